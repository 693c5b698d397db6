//! End-to-end Lipschitz estimators and the sampling lower bound.

use std::time::Instant;

use rayon::prelude::*;

use crate::cascade::{
    final_bound, next_f, next_m, verify_chain, Algorithm, CascadeState, Certificate, BOUND_ROUNDING,
    DEFAULT_SLACK,
};
use crate::error::{Error, Result};
use crate::netio::{Network, NormalStream};
use crate::sdpsolve::{
    feasible_start_from_f, layer_lmi, maximize_bisection, solve_joint_lipsdp, JointVariant,
    DEFAULT_JOINT_TOL, DEFAULT_SDP_TOL,
};
use crate::spectral::{check_pd, default_pd_tol, spectral_norm, sym_max_eig, Matrix, SymMatrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SdpBackend {
    #[default]
    Barrier,
    Bisection,
}

#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub algo: Algorithm,
    /// Relative objective tolerance of each per-layer SDP.
    pub sdp_tol: f64,
    /// Relative objective tolerance of the joint SDP.
    pub joint_tol: f64,
    pub slack: f64,
    /// Replay the chain conditions before returning.
    pub verify: bool,
    /// Use the closed-form multiplier for a layer whose SDP fails.
    pub fallback: bool,
    pub backend: SdpBackend,
    /// Checked between stages; passing it yields [`Error::Timeout`].
    pub deadline: Option<Instant>,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            algo: Algorithm::Fast,
            sdp_tol: DEFAULT_SDP_TOL,
            joint_tol: DEFAULT_JOINT_TOL,
            slack: DEFAULT_SLACK,
            verify: false,
            fallback: true,
            backend: SdpBackend::Barrier,
            deadline: None,
        }
    }
}

impl EstimateOptions {
    pub fn new(algo: Algorithm) -> Self {
        EstimateOptions {
            algo,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sdp_tol > 0.0 && self.sdp_tol < 1.0) {
            return Err(Error::Argument(format!("sdp tolerance {} outside (0, 1)", self.sdp_tol)));
        }
        if !(self.slack > 0.0 && self.slack < 1.0) {
            return Err(Error::Argument(format!("slack {} outside (0, 1)", self.slack)));
        }
        Ok(())
    }

    fn check_deadline(&self) -> Result<()> {
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(Error::Timeout),
            _ => Ok(()),
        }
    }
}

fn require_unit_relu(net: &Network) -> Result<()> {
    if net.activation().is_unit_relu() {
        Ok(())
    } else {
        Err(Error::Argument("compositional estimators need activation slopes [0, 1]".into()))
    }
}

fn finish(net: &Network, cert: Certificate, opts: &EstimateOptions) -> Result<Certificate> {
    if opts.verify {
        let report = verify_chain(net, &cert, opts.slack)?;
        if !report.ok {
            return Err(Error::Verification(format!(
                "chain condition {} failed (min eigenvalues {:?})",
                report.failed_at.unwrap_or(0),
                report.stage_min_eigs
            )));
        }
    }
    Ok(cert)
}

/// `∏ ‖W_i‖₂`.
pub fn estimate_trivial(net: &Network) -> Result<Certificate> {
    let mut bound = 1.0;
    for w in net.weights() {
        bound *= spectral_norm(w)? * (1.0 + BOUND_ROUNDING);
    }
    let mut cert = Certificate::new(Algorithm::Trivial, vec![], bound * bound);
    cert.bound = bound;
    Ok(cert)
}

fn single_layer(net: &Network, algo: Algorithm) -> Result<Certificate> {
    let inv_f = final_bound(net.weight(0), &CascadeState::initial(net.input_dim()))?;
    Ok(Certificate::new(algo, vec![], inv_f))
}

/// `λ_i = 2/λ_max(F_i)` at every stage, `Λ_i = λ_i I`.
pub fn estimate_fast(net: &Network, opts: &EstimateOptions) -> Result<Certificate> {
    require_unit_relu(net)?;
    let l = net.depth();
    if l == 1 {
        return finish(net, single_layer(net, Algorithm::Fast)?, opts);
    }
    let mut state = CascadeState::initial(net.input_dim());
    let mut lambdas = Vec::with_capacity(l - 1);
    for i in 0..l - 1 {
        opts.check_deadline()?;
        let f = next_f(net.weight(i), &state)?;
        let lam = closed_form_lambda(&f, i)?;
        state = advance(vec![lam; f.dim()], f, &mut lambdas, i)?;
    }
    let inv_f = final_bound(net.weight(l - 1), &state)?;
    finish(net, Certificate::new(Algorithm::Fast, lambdas, inv_f), opts)
}

fn closed_form_lambda(f: &SymMatrix, stage: usize) -> Result<f64> {
    let sigma = sym_max_eig(f)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::DegenerateLayer(stage + 1));
    }
    Ok(2.0 / sigma)
}

fn advance(
    lam: Vec<f64>,
    f: SymMatrix,
    lambdas: &mut Vec<Vec<f64>>,
    stage: usize,
) -> Result<CascadeState> {
    let m = next_m(&lam, &f)?;
    let next = CascadeState::from_parts(stage + 1, m, Some(f))
        .map_err(|_| Error::Numeric(format!("M_{} lost positive definiteness", stage + 1)))?;
    lambdas.push(lam);
    Ok(next)
}

/// Per-layer SDP multipliers, falling back to the closed form where a
/// layer's solve fails (if enabled).
pub fn estimate_sdp(net: &Network, opts: &EstimateOptions) -> Result<Certificate> {
    require_unit_relu(net)?;
    let l = net.depth();
    if l == 1 {
        return finish(net, single_layer(net, Algorithm::Sdp)?, opts);
    }
    let mut state = CascadeState::initial(net.input_dim());
    let mut lambdas = Vec::with_capacity(l - 1);
    let mut c_values = Vec::with_capacity(l - 1);
    let mut fallback_layers = Vec::new();
    'stages: for i in 0..l - 1 {
        opts.check_deadline()?;
        let f = next_f(net.weight(i), &state)?;
        let w_next = net.weight(i + 1);
        match solve_layer(&f, w_next, opts) {
            Ok((lam, c)) => {
                // Optimal multipliers sit near the boundary of the feasible set;
                // when that leaves too little margin for the replay, blend toward
                // the closed form, which stays feasible by convexity.
                let cf = closed_form_lambda(&f, i)?;
                let (_, c0) = feasible_start_from_f(&f, w_next)?;
                for theta in BLEND_STEPS {
                    let mixed: Vec<f64> = lam.iter().map(|&v| (1.0 - theta) * v + theta * cf).collect();
                    if let Some(next) = replayable_stage(net, i, &mixed, &f, opts.slack)? {
                        state = next;
                        lambdas.push(mixed);
                        c_values.push((1.0 - theta) * c + theta * c0);
                        continue 'stages;
                    }
                }
                if !opts.fallback {
                    return Err(Error::Solver {
                        layer: i + 1,
                        message: "multipliers do not leave a verifiable margin".into(),
                    });
                }
            }
            Err(Error::Timeout) => return Err(Error::Timeout),
            Err(e) if !opts.fallback => {
                return Err(Error::Solver {
                    layer: i + 1,
                    message: e.to_string(),
                })
            }
            Err(_) => {}
        }
        let lam = closed_form_lambda(&f, i)?;
        let (_, c0) = feasible_start_from_f(&f, w_next)?;
        fallback_layers.push(i);
        c_values.push(c0);
        state = advance(vec![lam; f.dim()], f, &mut lambdas, i)?;
    }
    let inv_f = final_bound(net.weight(l - 1), &state)?;
    let mut cert = Certificate::new(Algorithm::Sdp, lambdas, inv_f);
    cert.c_values = Some(c_values);
    cert.fallback_layers = fallback_layers;
    finish(net, cert, opts)
}

const BLEND_STEPS: [f64; 9] = [0.0, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3];

/// The state after stage `i` if it passes the same test [`verify_chain`]
/// will apply: `M ≻ τ` at inner stages, the final condition at the last.
fn replayable_stage(
    net: &Network,
    i: usize,
    lam: &[f64],
    f: &SymMatrix,
    slack: f64,
) -> Result<Option<CascadeState>> {
    let m = next_m(lam, f)?;
    let last = i + 2 == net.depth();
    if !last && !check_pd(&m, default_pd_tol(&m)).is_pd {
        return Ok(None);
    }
    let Ok(state) = CascadeState::from_parts(i + 1, m, Some(f.clone())) else {
        return Ok(None);
    };
    if last {
        let w = net.weight(i + 1);
        let inv_f = final_bound(w, &state)?;
        let gram = SymMatrix::symmetrize(w.tr_mul(w));
        let x = state.m() - &gram.scaled((1.0 - slack) / inv_f);
        if !check_pd(&x, default_pd_tol(&x)).is_pd {
            return Ok(None);
        }
    }
    Ok(Some(state))
}

fn solve_layer(f: &SymMatrix, w_next: &Matrix, opts: &EstimateOptions) -> Result<(Vec<f64>, f64)> {
    let prob = layer_lmi(f, w_next)?;
    let (mut x, c) = feasible_start_from_f(f, w_next)?;
    x.push(c);
    let sol = match opts.backend {
        SdpBackend::Barrier => {
            let mut bo = crate::sdpsolve::BarrierOptions::with_tol(opts.sdp_tol);
            bo.deadline = opts.deadline;
            crate::sdpsolve::maximize(&prob, &x, &bo)?
        }
        SdpBackend::Bisection => maximize_bisection(&prob, &x, opts.sdp_tol)?,
    };
    let d = f.dim();
    let lam = sol.x[..d].to_vec();
    if lam.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Numeric("solver returned a non-positive multiplier".into()));
    }
    Ok((lam, sol.objective))
}

/// Dispatches on `opts.algo`.
pub fn estimate(net: &Network, opts: &EstimateOptions) -> Result<Certificate> {
    opts.validate()?;
    match opts.algo {
        Algorithm::Trivial => estimate_trivial(net),
        Algorithm::Fast => estimate_fast(net, opts),
        Algorithm::Sdp => estimate_sdp(net, opts),
        Algorithm::JointNeuron => finish(net, solve_joint_lipsdp(net, JointVariant::Neuron, opts.joint_tol)?, opts),
        Algorithm::JointLayer => finish(net, solve_joint_lipsdp(net, JointVariant::Layer, opts.joint_tol)?, opts),
    }
}

/// Product of the estimates of consecutive sub-networks of the given depths,
/// each treated as a network whose last layer is linear.
pub fn split_compose(net: &Network, split_sizes: &[usize], base: Algorithm) -> Result<f64> {
    if split_sizes.is_empty() || split_sizes.contains(&0) {
        return Err(Error::Argument("split sizes must be positive".into()));
    }
    let total: usize = split_sizes.iter().sum();
    if total != net.depth() {
        return Err(Error::Argument(format!(
            "split sizes sum to {total}, network has {} layers",
            net.depth()
        )));
    }
    let opts = EstimateOptions::new(base);
    let mut start = 0;
    let mut product = 1.0;
    for &size in split_sizes {
        let part = net.slice(start..start + size)?;
        product *= estimate(&part, &opts)?.bound;
        start += size;
    }
    Ok(product)
}

#[derive(Debug, Clone)]
pub struct SamplingOptions {
    /// Half-width of the input box.
    pub radius: f64,
    /// Box center; the origin when absent.
    pub center: Option<Vector>,
    /// Masked-Jacobian norms at sampled points.
    pub jacobian: bool,
    /// Difference quotients over sampled pairs.
    pub quotient: bool,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            radius: 10.0,
            center: None,
            jacobian: true,
            quotient: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundReport {
    pub lower_bound: f64,
    pub samples: usize,
    pub argmax_input: Vector,
}

/// Largest observed local gain of the network over uniform samples from the
/// input box, a lower bound on the true Lipschitz constant.
pub fn empirical_lower_bound(net: &Network, n_samples: usize, seed: u64, radius: f64) -> Result<LowerBoundReport> {
    empirical_lower_bound_with(
        net,
        n_samples,
        seed,
        &SamplingOptions {
            radius,
            ..Default::default()
        },
    )
}

pub fn empirical_lower_bound_with(
    net: &Network,
    n_samples: usize,
    seed: u64,
    opts: &SamplingOptions,
) -> Result<LowerBoundReport> {
    let d = net.input_dim();
    if !(opts.radius > 0.0 && opts.radius.is_finite()) {
        return Err(Error::Argument(format!("sampling radius {} must be positive", opts.radius)));
    }
    if !(opts.jacobian || opts.quotient) {
        return Err(Error::Argument("no sampling path enabled".into()));
    }
    let center = match &opts.center {
        Some(c) if c.len() != d => {
            return Err(Error::Argument(format!("center has length {}, input has {d}", c.len())));
        }
        Some(c) => c.clone(),
        None => Vector::zeros(d),
    };
    let draw = |stream: &mut NormalStream| {
        Vector::from_fn(d, |i, _| center[i] + opts.radius * (2.0 * stream.uniform() - 1.0))
    };

    let results: Vec<(f64, usize, Vector)> = (0..n_samples)
        .into_par_iter()
        .map(|k| -> Result<(f64, usize, Vector)> {
            let mut stream = NormalStream::with_stream(seed, k as u64);
            let z = draw(&mut stream);
            let mut best = 0.0;
            if opts.jacobian {
                best = spectral_norm(&masked_jacobian(net, &z))?;
            }
            if opts.quotient {
                let z2 = draw(&mut stream);
                let gap = (&z - &z2).norm();
                if gap > 0.0 {
                    let q = (net.forward(&z) - net.forward(&z2)).norm() / gap;
                    best = f64::max(best, q);
                }
            }
            Ok((best, k, z))
        })
        .collect::<Result<_>>()?;

    let (lower_bound, _, argmax_input) = results
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .unwrap_or((0.0, 0, center));
    Ok(LowerBoundReport {
        lower_bound,
        samples: n_samples,
        argmax_input,
    })
}

/// `W_l D_{l−1} W_{l−1} ⋯ D_1 W_1` with `D_i` the activation slopes at `z`.
pub fn masked_jacobian(net: &Network, z: &Vector) -> Matrix {
    let last = net.depth() - 1;
    let mut x = z.clone();
    let mut jac: Option<Matrix> = None;
    for (i, layer) in net.layers().iter().enumerate() {
        let w = layer.weight();
        let mut j = match &jac {
            None => w.clone(),
            Some(prev) => w * prev,
        };
        if i < last {
            let v = w * &x + layer.bias();
            for (r, &t) in v.iter().enumerate() {
                j.row_mut(r).scale_mut(net.slope(t));
            }
            x = v.map(|t| net.activate(t));
        }
        jac = Some(j);
    }
    jac.expect("network has at least one layer")
}
