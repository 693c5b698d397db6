use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::cascade::Algorithm;
use crate::error::{Error, Result};
use crate::estimators::{estimate, estimate_trivial, EstimateOptions};
use crate::netio::{bench_dims, random_network, DEFAULT_NORM_RANGE};

pub const CSV_HEADER: &str = "depth,width,seed,algo,L,L_normalized,wall_time_s,status";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchStatus {
    Ok,
    Timeout,
    Error,
}

impl BenchStatus {
    pub fn tag(self) -> &'static str {
        match self {
            BenchStatus::Ok => "ok",
            BenchStatus::Timeout => "timeout",
            BenchStatus::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub depth: usize,
    pub width: usize,
    pub seed: u64,
    pub algo: Algorithm,
    /// `NaN` unless the run finished.
    pub bound: f64,
    /// `bound` divided by the product of layer norms.
    pub normalized: f64,
    pub wall_time_s: f64,
    pub status: BenchStatus,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub seeds: Vec<u64>,
    pub algos: Vec<Algorithm>,
    pub timeout: Duration,
    /// Worker cap; all cores when absent.
    pub threads: Option<usize>,
}

/// Runs every `(depth, width, seed, algo)` cell on random networks with
/// input size 4 and output size 1. Records come back sorted by grid key.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    if config.depths.contains(&0) || config.widths.contains(&0) {
        return Err(Error::Argument("depths and widths must be positive".into()));
    }
    let mut cells = Vec::new();
    for &depth in &config.depths {
        for &width in &config.widths {
            for &seed in &config.seeds {
                cells.push((depth, width, seed));
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Argument(e.to_string()))?;
    let per_net: Vec<Vec<BenchRecord>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(depth, width, seed)| run_cell(depth, width, seed, config))
            .collect::<Result<_>>()
    })?;
    let order = |a: Algorithm| config.algos.iter().position(|&x| x == a).unwrap_or(usize::MAX);
    let mut records: Vec<BenchRecord> = per_net.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        (a.depth, a.width, a.seed, order(a.algo)).cmp(&(b.depth, b.width, b.seed, order(b.algo)))
    });
    Ok(records)
}

fn run_cell(depth: usize, width: usize, seed: u64, config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    let net = random_network(&bench_dims(depth, width), seed, DEFAULT_NORM_RANGE)?;
    let trivial = estimate_trivial(&net)?.bound;
    let mut out = Vec::with_capacity(config.algos.len());
    for &algo in &config.algos {
        let start = Instant::now();
        let opts = EstimateOptions {
            deadline: Some(start + config.timeout),
            ..EstimateOptions::new(algo)
        };
        let result = estimate(&net, &opts);
        let wall_time_s = start.elapsed().as_secs_f64();
        let (bound, status) = match result {
            Ok(cert) if wall_time_s <= config.timeout.as_secs_f64() => (cert.bound, BenchStatus::Ok),
            Ok(_) | Err(Error::Timeout) => (f64::NAN, BenchStatus::Timeout),
            Err(_) => (f64::NAN, BenchStatus::Error),
        };
        out.push(BenchRecord {
            depth,
            width,
            seed,
            algo,
            bound,
            normalized: bound / trivial,
            wall_time_s,
            status,
        });
    }
    Ok(out)
}

pub fn write_csv(records: &[BenchRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(CSV_HEADER.split(',')).map_err(csv_error)?;
    for r in records {
        w.write_record([
            r.depth.to_string(),
            r.width.to_string(),
            r.seed.to_string(),
            r.algo.tag().to_string(),
            r.bound.to_string(),
            r.normalized.to_string(),
            r.wall_time_s.to_string(),
            r.status.tag().to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}
