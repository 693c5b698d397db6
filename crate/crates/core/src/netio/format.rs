//! Weight-file formats.
//!
//! JSON:
//!
//! ```json
//! {"activation": {"alpha": 0.0, "beta": 1.0},
//!  "layers": [{"W": [[1.0, 0.0], [0.0, 1.0]], "b": [0.0, 0.0]}]}
//! ```
//!
//! `ecl-binary` (all integers `u32`, all reals `f64`, little-endian):
//!
//! ```text
//! "ECL1" | layer_count | { rows | cols | W (rows*cols, row-major) | b (rows) } * layer_count
//! ```
//!
//! Networks whose activation is not `[0, 1]` get a 16-byte trailer holding
//! `alpha` and `beta`; without it the reader assumes `[0, 1]`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActivationBounds, LayerWeights, Network};
use crate::error::{Error, Result};
use crate::spectral::{Matrix, Vector};

const MAGIC: &[u8; 4] = b"ECL1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetFormat {
    Json,
    EclBinary,
}

impl NetFormat {
    /// `.json` is JSON, `.ecl` and `.bin` are binary.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(NetFormat::Json),
            Some("ecl") | Some("bin") => Ok(NetFormat::EclBinary),
            _ => Err(Error::Argument(format!(
                "cannot infer network format from {}; use .json, .ecl or .bin",
                path.display()
            ))),
        }
    }
}

impl std::str::FromStr for NetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(NetFormat::Json),
            "ecl-binary" | "ecl" | "binary" => Ok(NetFormat::EclBinary),
            other => Err(Error::Argument(format!("unknown network format {other:?}"))),
        }
    }
}

pub fn load_network(path: &Path, format: NetFormat) -> Result<Network> {
    match format {
        NetFormat::Json => network_from_json(&fs::read_to_string(path)?),
        NetFormat::EclBinary => network_from_bytes(&fs::read(path)?),
    }
}

/// Loads either format, recognising binary files by their magic bytes.
pub fn load_network_any(path: &Path) -> Result<Network> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        network_from_bytes(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::Parse("network file is neither JSON nor ecl-binary".into()))?;
        network_from_json(&text)
    }
}

pub fn save_network(net: &Network, path: &Path, format: NetFormat) -> Result<()> {
    net.validate()?;
    match format {
        NetFormat::Json => fs::write(path, network_to_json(net)?)?,
        NetFormat::EclBinary => fs::write(path, network_to_bytes(net)?)?,
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ActivationFile {
    alpha: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    activation: ActivationFile,
    layers: Vec<LayerFile>,
}

pub fn network_to_json(net: &Network) -> Result<String> {
    net.validate()?;
    let file = NetworkFile {
        activation: ActivationFile {
            alpha: net.activation.alpha(),
            beta: net.activation.beta(),
        },
        layers: net
            .layers
            .iter()
            .map(|l| LayerFile {
                w: l.w.row_iter().map(|r| r.iter().copied().collect()).collect(),
                b: l.b.iter().copied().collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))
}

pub fn network_from_json(text: &str) -> Result<Network> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let activation = ActivationBounds::new(file.activation.alpha, file.activation.beta)?;
    let mut layers = Vec::with_capacity(file.layers.len());
    for (i, layer) in file.layers.into_iter().enumerate() {
        let rows = layer.w.len();
        let cols = layer.w.first().map_or(0, Vec::len);
        if let Some(bad) = layer.w.iter().position(|r| r.len() != cols) {
            return Err(Error::shape(
                i + 1,
                format!("row {bad} has {} entries, expected {cols}", layer.w[bad].len()),
            ));
        }
        let flat: Vec<f64> = layer.w.into_iter().flatten().collect();
        layers.push(LayerWeights {
            w: Matrix::from_row_slice(rows, cols, &flat),
            b: Vector::from_vec(layer.b),
        });
    }
    Network::new(layers, activation)
}

pub fn network_to_bytes(net: &Network) -> Result<Vec<u8>> {
    net.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&count(net.layers.len())?.to_le_bytes());
    for layer in &net.layers {
        out.extend_from_slice(&count(layer.rows())?.to_le_bytes());
        out.extend_from_slice(&count(layer.cols())?.to_le_bytes());
        for row in layer.w.row_iter() {
            for x in row.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        for x in layer.b.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    if !net.activation.is_unit_relu() {
        out.extend_from_slice(&net.activation.alpha().to_le_bytes());
        out.extend_from_slice(&net.activation.beta().to_le_bytes());
    }
    Ok(out)
}

fn count(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Value(format!("dimension {n} does not fit in u32")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Parse(format!("truncated ecl-binary data at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        let mut buf = [0u8; 8];
        buf.copy_from_slice(b);
        Ok(f64::from_le_bytes(buf))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub fn network_from_bytes(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Parse("missing ECL1 magic".into()));
    }
    let n_layers = r.u32()?;
    let mut layers = Vec::new();
    for _ in 0..n_layers {
        let rows = r.u32()?;
        let cols = r.u32()?;
        let len = rows
            .checked_mul(cols)
            .filter(|&len| len.saturating_mul(8) <= r.remaining())
            .ok_or_else(|| Error::Parse("truncated ecl-binary weight block".into()))?;
        let mut flat = Vec::with_capacity(len);
        for _ in 0..len {
            flat.push(r.f64()?);
        }
        let mut bias = Vec::with_capacity(rows);
        for _ in 0..rows {
            bias.push(r.f64()?);
        }
        layers.push(LayerWeights {
            w: Matrix::from_row_slice(rows, cols, &flat),
            b: Vector::from_vec(bias),
        });
    }
    let activation = match r.remaining() {
        0 => ActivationBounds::RELU,
        16 => ActivationBounds::new(r.f64()?, r.f64()?)?,
        n => return Err(Error::Parse(format!("{n} unexpected trailing bytes"))),
    };
    Network::new(layers, activation)
}
