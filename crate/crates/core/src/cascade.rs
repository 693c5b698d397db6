//! Layer-by-layer reduction of the network-wide Lipschitz matrix inequality.
//!
//! With multipliers `Λ_i` (positive diagonal) the monolithic condition
//! `P_l ≻ 0` is equivalent to the chain
//!
//! ```text
//! M_0 = I
//! F_i = W_i M_{i-1}⁻¹ W_iᵀ
//! M_i = Λ_i − ¼ Λ_i F_i Λ_i        (i = 1 … l−1)
//! M_i ≻ 0 for i ≤ l−2,   M_{l−1} − F·W_lᵀW_l ≻ 0
//! ```
//!
//! and the smallest admissible `1/F` is `λ_max(W_l M_{l−1}⁻¹ W_lᵀ)`. This
//! module holds the recursion, the certificate record, and two independent
//! verifiers: one replays the chain, the other assembles the full block
//! tri-diagonal matrix and checks it directly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netio::Network;
use crate::spectral::{check_pd, default_pd_tol, sym_eigvals, sym_max_eig, Matrix, SpdFactor, SymMatrix};

/// Default relative shrink applied to `F` before verification.
pub const DEFAULT_SLACK: f64 = 1e-6;

/// Largest monolithic matrix [`verify_monolithic`] will assemble.
pub const DEFAULT_MONOLITHIC_CAP: usize = 2000;

/// Running state of the recursion after stage `stage`.
#[derive(Debug, Clone)]
pub struct CascadeState {
    stage: usize,
    m: SymMatrix,
    factor: SpdFactor,
    f: Option<SymMatrix>,
}

impl CascadeState {
    /// Stage 0: `M_0 = I` of the input dimension.
    pub fn initial(input_dim: usize) -> Self {
        let m = SymMatrix::identity(input_dim);
        let factor = SpdFactor::new(&m).expect("identity is positive definite");
        CascadeState {
            stage: 0,
            m,
            factor,
            f: None,
        }
    }

    /// State after `stage`, given `M` and the `F` that produced it.
    pub fn from_parts(stage: usize, m: SymMatrix, f: Option<SymMatrix>) -> Result<Self> {
        let factor = SpdFactor::new(&m)?;
        Ok(CascadeState { stage, m, factor, f })
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn m(&self) -> &SymMatrix {
        &self.m
    }

    /// `F_stage`, absent at stage 0.
    pub fn f(&self) -> Option<&SymMatrix> {
        self.f.as_ref()
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    /// Moves to the next stage with multipliers `lambda` applied to `f`
    /// (which must be `next_f` of the upcoming weight). Fails if the new `M`
    /// is not positive definite.
    pub fn advance(&self, lambda: &[f64], f: SymMatrix) -> Result<CascadeState> {
        let m = next_m(lambda, &f)?;
        CascadeState::from_parts(self.stage + 1, m, Some(f))
    }
}

/// `W · M⁻¹ · Wᵀ` for the state's `M`.
pub fn next_f(w_next: &Matrix, state: &CascadeState) -> Result<SymMatrix> {
    if w_next.ncols() != state.m.dim() {
        return Err(Error::shape(
            state.stage + 1,
            format!("weight has {} columns, state has dimension {}", w_next.ncols(), state.m.dim()),
        ));
    }
    if state.stage == 0 {
        return Ok(SymMatrix::symmetrize(w_next * w_next.transpose()));
    }
    Ok(state.factor.congruence_inverse(w_next))
}

/// `Λ − ¼ Λ F Λ` with `Λ = diag(lambda)`.
pub fn next_m(lambda: &[f64], f: &SymMatrix) -> Result<SymMatrix> {
    let n = f.dim();
    if lambda.len() != n {
        return Err(Error::Argument(format!(
            "{} multipliers for a {n}-dimensional stage",
            lambda.len()
        )));
    }
    if let Some(bad) = lambda.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Argument(format!("multiplier {bad} is not positive")));
    }
    let fm = f.matrix();
    let m = Matrix::from_fn(n, n, |i, j| {
        let diag = if i == j { lambda[i] } else { 0.0 };
        diag - 0.25 * lambda[i] * fm[(i, j)] * lambda[j]
    });
    Ok(SymMatrix::symmetrize(m))
}

/// Relative amount by which computed bounds are rounded up, covering the
/// eigenvalue iteration's stopping error and accumulated round-off.
pub const BOUND_ROUNDING: f64 = 1e-12;

/// `1/F = λ_max(W_l M_{l−1}⁻¹ W_lᵀ)`, the smallest admissible value, rounded
/// up by [`BOUND_ROUNDING`] so a bound that is exact in real arithmetic never
/// lands below the true constant.
pub fn final_bound(w_last: &Matrix, state: &CascadeState) -> Result<f64> {
    Ok(sym_max_eig(&next_f(w_last, state)?)? * (1.0 + BOUND_ROUNDING))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Fast,
    Sdp,
    Trivial,
    JointNeuron,
    JointLayer,
}

impl Algorithm {
    pub fn tag(&self) -> &'static str {
        match self {
            Algorithm::Fast => "fast",
            Algorithm::Sdp => "sdp",
            Algorithm::Trivial => "trivial",
            Algorithm::JointNeuron => "joint-neuron",
            Algorithm::JointLayer => "joint-layer",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Algorithm::Fast),
            "sdp" => Ok(Algorithm::Sdp),
            "trivial" => Ok(Algorithm::Trivial),
            "joint-neuron" | "joint_neuron" => Ok(Algorithm::JointNeuron),
            "joint-layer" | "joint_layer" => Ok(Algorithm::JointLayer),
            other => Err(Error::Argument(format!("unknown algorithm {other:?}"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Output of an estimation run. `lambdas[i]` is `diag(Λ_{i+1})`; `L = √inv_F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub algo: Algorithm,
    pub lambdas: Vec<Vec<f64>>,
    #[serde(rename = "inv_F")]
    pub inv_f: f64,
    #[serde(rename = "L")]
    pub bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_values: Option<Vec<f64>>,
    /// Zero-based stages whose SDP failed and used the closed-form multiplier.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fallback_layers: Vec<usize>,
}

impl Certificate {
    pub fn new(algo: Algorithm, lambdas: Vec<Vec<f64>>, inv_f: f64) -> Self {
        Certificate {
            algo,
            lambdas,
            inv_f,
            bound: inv_f.sqrt(),
            c_values: None,
            fallback_layers: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inv_f.is_finite() && self.inv_f > 0.0) {
            return Err(Error::Value(format!("inv_F must be positive, got {}", self.inv_f)));
        }
        let expect = self.inv_f.sqrt();
        if (self.bound - expect).abs() > 1e-14 * expect {
            return Err(Error::Value(format!("L = {} does not equal sqrt(inv_F) = {expect}", self.bound)));
        }
        for (i, lam) in self.lambdas.iter().enumerate() {
            if let Some(bad) = lam.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::Value(format!("stage {} has non-positive multiplier {bad}", i + 1)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cert: Certificate = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cert.validate()?;
        Ok(cert)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// `F` shrunk by `slack`, the value actually checked by the verifiers.
    pub fn verified_f(&self, slack: f64) -> f64 {
        (1.0 - slack) / self.inv_f
    }
}

fn check_lambda_shapes(net: &Network, lambdas: &[Vec<f64>]) -> Result<()> {
    let l = net.depth();
    if lambdas.len() != l - 1 {
        return Err(Error::shape(
            lambdas.len().min(l),
            format!("certificate has {} multiplier vectors, network needs {}", lambdas.len(), l - 1),
        ));
    }
    for (i, lam) in lambdas.iter().enumerate() {
        let want = net.weight(i).nrows();
        if lam.len() != want {
            return Err(Error::shape(
                i + 1,
                format!("{} multipliers for a layer of width {want}", lam.len()),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    pub ok: bool,
    /// `λ_min(M_i)` for the stages that were checked, then `λ_min(M_{l−1} − F W_lᵀW_l)`
    /// if the recursion got that far.
    pub stage_min_eigs: Vec<f64>,
    /// One-based index of the first failing condition (`l` is the final one).
    pub failed_at: Option<usize>,
}

/// Replays the chain conditions for `cert` at `F = (1 − slack)/inv_F`.
pub fn verify_chain(net: &Network, cert: &Certificate, slack: f64) -> Result<ChainReport> {
    if !net.activation().is_unit_relu() {
        return Err(Error::Argument("chain verification needs activation slopes [0, 1]".into()));
    }
    check_lambda_shapes(net, &cert.lambdas)?;
    cert.validate()?;
    let l = net.depth();
    let mut mins = Vec::with_capacity(l);
    let mut state = CascadeState::initial(net.input_dim());

    for (i, lam) in cert.lambdas.iter().enumerate() {
        let stage = i + 1;
        let f = next_f(net.weight(i), &state)?;
        let m = next_m(lam, &f)?;
        if stage == l - 1 {
            state = CascadeState {
                stage,
                factor: state.factor,
                m,
                f: Some(f),
            };
            break;
        }
        let report = check_pd(&m, default_pd_tol(&m));
        mins.push(report.min_eig);
        if !report.is_pd {
            return Ok(ChainReport {
                ok: false,
                stage_min_eigs: mins,
                failed_at: Some(stage),
            });
        }
        state = CascadeState::from_parts(stage, m, Some(f))?;
    }

    let w = net.weight(l - 1);
    let gram = SymMatrix::symmetrize(w.tr_mul(w));
    let last = &state.m - &gram.scaled(cert.verified_f(slack));
    let report = check_pd(&last, default_pd_tol(&last));
    mins.push(report.min_eig);
    Ok(ChainReport {
        ok: report.is_pd,
        stage_min_eigs: mins,
        failed_at: (!report.is_pd).then_some(l),
    })
}

/// The block tri-diagonal matrix `P_l` over `(z_0, …, z_{l−1})`.
#[derive(Debug, Clone)]
pub struct MonolithicForm {
    pub p: SymMatrix,
    /// Start row of each block; block `i` spans `offsets[i]..offsets[i + 1]`.
    pub offsets: Vec<usize>,
}

impl MonolithicForm {
    pub fn block(&self, row: usize, col: usize) -> Matrix {
        let (r0, r1) = (self.offsets[row], self.offsets[row + 1]);
        let (c0, c1) = (self.offsets[col], self.offsets[col + 1]);
        self.p.matrix().view((r0, c0), (r1 - r0, c1 - c0)).into_owned()
    }
}

/// Assembles `P_l` for general slopes `p = αβ`, `m = (α+β)/2`:
/// diagonal blocks `I + pW_1ᵀΛ_1W_1`, `Λ_i + pW_{i+1}ᵀΛ_{i+1}W_{i+1}`,
/// last block `Λ_{l−1} − F W_lᵀW_l`; off-diagonal blocks `−m W_iᵀΛ_i`.
pub fn assemble_monolithic(net: &Network, lambdas: &[Vec<f64>], f: f64) -> Result<MonolithicForm> {
    check_lambda_shapes(net, lambdas)?;
    let l = net.depth();
    let dims = net.dims();
    let mut offsets = vec![0];
    for &d in &dims[..l] {
        offsets.push(offsets.last().unwrap() + d);
    }
    let n = offsets[l];
    let p = net.activation().p();
    let mslope = net.activation().m();
    let mut big = Matrix::zeros(n, n);

    for i in 0..l {
        let o = offsets[i];
        let d = dims[i];
        let mut block = if i == 0 {
            Matrix::identity(d, d)
        } else {
            Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&lambdas[i - 1]))
        };
        if i + 1 < l && p != 0.0 {
            // p · W_{i+1}ᵀ Λ_{i+1} W_{i+1}
            let w = net.weight(i);
            let mut lw = w.clone();
            for (r, &lam) in lambdas[i].iter().enumerate() {
                lw.row_mut(r).scale_mut(lam);
            }
            block += w.tr_mul(&lw) * p;
        }
        if i == l - 1 {
            let w = net.weight(l - 1);
            block -= w.tr_mul(w) * f;
        }
        big.view_mut((o, o), (d, d)).copy_from(&block);
    }

    for i in 1..l {
        // Rows of block i−1, columns of block i: −m W_iᵀ Λ_i.
        let w = net.weight(i - 1);
        let mut wt_lam = w.transpose();
        for (c, &lam) in lambdas[i - 1].iter().enumerate() {
            wt_lam.column_mut(c).scale_mut(-mslope * lam);
        }
        let (r0, c0) = (offsets[i - 1], offsets[i]);
        big.view_mut((r0, c0), (dims[i - 1], dims[i])).copy_from(&wt_lam);
        big.view_mut((c0, r0), (dims[i], dims[i - 1])).copy_from(&wt_lam.transpose());
    }

    Ok(MonolithicForm {
        p: SymMatrix::symmetrize(big),
        offsets,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonolithicReport {
    pub ok: bool,
    /// `λ_min(P_l)`.
    pub min_eig: f64,
    /// `λ_min(D P_l D)` with `D = diag(P_l)^{-1/2}`; same sign as `min_eig`
    /// in exact arithmetic and far better conditioned when multipliers span
    /// many orders of magnitude.
    pub scaled_min_eig: f64,
    pub dim: usize,
}

/// Checks `P_l ≻ 0` directly at `F = (1 − slack)/inv_F`.
pub fn verify_monolithic(net: &Network, cert: &Certificate, slack: f64, cap: usize) -> Result<MonolithicReport> {
    let dim: usize = net.dims()[..net.depth()].iter().sum();
    if dim > cap {
        return Err(Error::Size { dim, cap });
    }
    cert.validate()?;
    let form = assemble_monolithic(net, &cert.lambdas, cert.verified_f(slack))?;
    let min_eig = sym_eigvals(&form.p)?[0];
    let diag: Vec<f64> = form.p.matrix().diagonal().iter().copied().collect();
    let scaled_min_eig = if diag.iter().all(|&x| x > 0.0) {
        let s: Vec<f64> = diag.iter().map(|x| 1.0 / x.sqrt()).collect();
        let scaled = Matrix::from_fn(dim, dim, |i, j| s[i] * form.p.matrix()[(i, j)] * s[j]);
        sym_eigvals(&SymMatrix::symmetrize(scaled))?[0]
    } else {
        min_eig.min(0.0)
    };
    Ok(MonolithicReport {
        ok: scaled_min_eig > 0.0,
        min_eig,
        scaled_min_eig,
        dim,
    })
}
