//! Small dense SDPs: the per-layer multiplier problem and the joint
//! network-wide problem, solved by a log-det barrier path-following method.
//!
//! Every coefficient matrix handled here has the low-rank form
//! `F_k = ½(A_k R_kᵀ + R_k A_kᵀ)`, so with `L` the Cholesky factor of the
//! current `A(x)` and `Ã = L⁻¹A`, `R̃ = L⁻¹R` the barrier derivatives reduce to
//!
//! ```text
//! X = R̃ᵀÃ,  Y = ÃᵀÃ,  Z = R̃ᵀR̃
//! ∂ log det A / ∂x_k         = Σ_{s∈k} X[s,s]
//! −∂² log det A / ∂x_j ∂x_k  = ½ Σ_{s∈j, u∈k} (X[s,u] X[u,s] + Y[s,u] Z[s,u])
//! ```
//!
//! which costs `O(dim²·r)` per Newton step instead of `O(n_vars²·dim²)`.

use std::time::Instant;

use nalgebra::Cholesky;

use crate::cascade::{next_f, Algorithm, CascadeState, Certificate, DEFAULT_MONOLITHIC_CAP, DEFAULT_SLACK};
use crate::error::{Error, Result};
use crate::netio::Network;
use crate::spectral::{spectral_norm, sym_eigvals, sym_max_eig, sym_sqrt_psd, Matrix, SymMatrix, Vector};

/// Largest `Σ d_i` the joint problem will attempt.
pub const JOINT_DIM_CAP: usize = 300;

/// Default relative objective tolerance for the per-layer solves.
pub const DEFAULT_SDP_TOL: f64 = 1e-7;

/// Default relative objective tolerance for the joint problem.
pub const DEFAULT_JOINT_TOL: f64 = 1e-9;

/// `A(x) = F0 + Σ x_k ½(A_k R_kᵀ + R_k A_kᵀ)` with a linear objective.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    f0: SymMatrix,
    a: Matrix,
    r: Matrix,
    spans: Vec<(usize, usize)>,
    owner: Vec<usize>,
    objective: Vector,
    positive: Vec<usize>,
}

impl LmiProblem {
    /// `terms[k] = (A_k, R_k)`, both `dim × r_k`.
    pub fn new(f0: SymMatrix, terms: Vec<(Matrix, Matrix)>, objective: Vector) -> Result<Self> {
        let dim = f0.dim();
        if objective.len() != terms.len() {
            return Err(Error::Argument(format!(
                "objective has {} entries for {} variables",
                objective.len(),
                terms.len()
            )));
        }
        let mut spans = Vec::with_capacity(terms.len());
        let mut owner = Vec::new();
        let mut cols = 0;
        for (k, (a, r)) in terms.iter().enumerate() {
            if a.nrows() != dim || r.nrows() != dim || a.ncols() != r.ncols() || a.ncols() == 0 {
                return Err(Error::Argument(format!("coefficient {k} has inconsistent factor shapes")));
            }
            spans.push((cols, cols + a.ncols()));
            owner.extend(std::iter::repeat(k).take(a.ncols()));
            cols += a.ncols();
        }
        let mut a_all = Matrix::zeros(dim, cols);
        let mut r_all = Matrix::zeros(dim, cols);
        for ((a, r), &(c0, c1)) in terms.iter().zip(&spans) {
            a_all.columns_mut(c0, c1 - c0).copy_from(a);
            r_all.columns_mut(c0, c1 - c0).copy_from(r);
        }
        Ok(LmiProblem {
            f0,
            a: a_all,
            r: r_all,
            spans,
            owner,
            objective,
            positive: Vec::new(),
        })
    }

    /// Variables that must stay strictly positive along the path.
    pub fn with_positive(mut self, vars: Vec<usize>) -> Self {
        self.positive = vars;
        self
    }

    pub fn n_vars(&self) -> usize {
        self.spans.len()
    }

    pub fn dim(&self) -> usize {
        self.f0.dim()
    }

    pub fn f0(&self) -> &SymMatrix {
        &self.f0
    }

    pub fn objective(&self) -> &Vector {
        &self.objective
    }

    /// `F_k` as a dense matrix.
    pub fn coefficient(&self, k: usize) -> SymMatrix {
        let (c0, c1) = self.spans[k];
        let a = self.a.columns(c0, c1 - c0);
        let r = self.r.columns(c0, c1 - c0);
        let k = a * r.transpose();
        SymMatrix::symmetrize((&k + k.transpose()) * 0.5)
    }

    pub fn evaluate(&self, x: &[f64]) -> SymMatrix {
        assert_eq!(x.len(), self.n_vars(), "variable vector length");
        let mut ax = self.a.clone();
        for (j, mut col) in ax.column_iter_mut().enumerate() {
            col *= x[self.owner[j]];
        }
        let k = ax * self.r.transpose();
        SymMatrix::symmetrize(self.f0.matrix() + (&k + k.transpose()) * 0.5)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    fn factor(&self, x: &[f64]) -> Option<Cholesky<f64, nalgebra::Dyn>> {
        if self.positive.iter().any(|&k| !(x[k] > 0.0)) || x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Cholesky::new(self.evaluate(x).into_matrix())
    }

    pub fn is_strictly_feasible(&self, x: &[f64]) -> bool {
        self.factor(x).is_some()
    }
}

fn ln_det(chol: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Converged,
    MaxIter,
    Numeric,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// `λ_min(A(x))`.
    pub margin: f64,
    pub newton_steps: usize,
    pub status: SdpStatus,
    /// Objective after each centering step (the start is off the path and
    /// not recorded).
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BarrierOptions {
    /// Stop once `dim / t < tol · |objective|`.
    pub tol: f64,
    /// Absolute floor for the gap test, for objectives that approach zero.
    pub abs_gap: f64,
    pub t0: f64,
    pub mu: f64,
    pub backtrack: f64,
    pub armijo: f64,
    /// Centering stops when half the squared Newton decrement falls below this.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Return as soon as the objective exceeds this value.
    pub stop_above: Option<f64>,
    pub deadline: Option<Instant>,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions {
            tol: DEFAULT_SDP_TOL,
            abs_gap: 0.0,
            t0: 1.0,
            mu: 10.0,
            backtrack: 0.5,
            armijo: 0.01,
            newton_tol: 1e-9,
            max_newton: 2000,
            stop_above: None,
            deadline: None,
        }
    }
}

impl BarrierOptions {
    pub fn with_tol(tol: f64) -> Self {
        BarrierOptions {
            tol,
            ..Default::default()
        }
    }
}

struct NewtonSystem {
    grad: Vector,
    hess: Matrix,
}

fn newton_system(prob: &LmiProblem, chol: &Cholesky<f64, nalgebra::Dyn>, t: f64) -> Option<NewtonSystem> {
    let l = chol.l();
    let at = l.solve_lower_triangular(&prob.a)?;
    let rt = l.solve_lower_triangular(&prob.r)?;
    let x = rt.tr_mul(&at);
    let y = at.tr_mul(&at);
    let z = rt.tr_mul(&rt);
    let n = prob.n_vars();
    let mut grad = Vector::zeros(n);
    let mut hess = Matrix::zeros(n, n);
    for (j, &(s0, s1)) in prob.spans.iter().enumerate() {
        grad[j] = t * prob.objective[j] + (s0..s1).map(|s| x[(s, s)]).sum::<f64>();
        for (k, &(u0, u1)) in prob.spans.iter().enumerate().skip(j) {
            let mut q = 0.0;
            for s in s0..s1 {
                for u in u0..u1 {
                    q += x[(s, u)] * x[(u, s)] + y[(s, u)] * z[(s, u)];
                }
            }
            hess[(j, k)] = 0.5 * q;
            hess[(k, j)] = 0.5 * q;
        }
    }
    Some(NewtonSystem { grad, hess })
}

/// Solves `H Δ = g` after Jacobi scaling.
fn newton_direction(sys: &NewtonSystem) -> Option<Vector> {
    let n = sys.grad.len();
    let mut d = Vector::zeros(n);
    for i in 0..n {
        let h = sys.hess[(i, i)];
        if !(h > 0.0 && h.is_finite()) {
            return None;
        }
        d[i] = 1.0 / h.sqrt();
    }
    let scaled = Matrix::from_fn(n, n, |i, j| d[i] * sys.hess[(i, j)] * d[j]);
    let rhs = sys.grad.component_mul(&d);
    let chol = Cholesky::new(scaled)?;
    let step = chol.solve(&rhs).component_mul(&d);
    step.iter().all(|v| v.is_finite()).then_some(step)
}

/// Maximizes `objectiveᵀx` subject to `A(x) ≻ 0` from a strictly feasible
/// start. The returned point is always strictly feasible.
pub fn maximize(prob: &LmiProblem, start: &[f64], opts: &BarrierOptions) -> Result<SdpSolution> {
    if start.len() != prob.n_vars() {
        return Err(Error::Argument(format!(
            "start has {} entries for {} variables",
            start.len(),
            prob.n_vars()
        )));
    }
    let mut x = Vector::from_column_slice(start);
    let mut chol = prob
        .factor(x.as_slice())
        .ok_or_else(|| Error::Argument("start point is not strictly feasible".into()))?;
    let dim = prob.dim() as f64;
    let mut t = opts.t0;
    let mut steps = 0;
    let mut trace = Vec::new();
    let mut status = SdpStatus::MaxIter;

    'outer: loop {
        loop {
            if steps >= opts.max_newton {
                break 'outer;
            }
            if opts.deadline.is_some_and(|d| Instant::now() >= d) {
                return Err(Error::Timeout);
            }
            let Some(sys) = newton_system(prob, &chol, t) else {
                status = SdpStatus::Numeric;
                break 'outer;
            };
            let Some(dir) = newton_direction(&sys) else {
                status = SdpStatus::Numeric;
                break 'outer;
            };
            let dec2 = sys.grad.dot(&dir);
            if !(dec2 > 2.0 * opts.newton_tol) {
                break;
            }
            let ld = ln_det(&chol);
            let slope = t * prob.objective.dot(&dir);
            let mut s = 1.0;
            let accepted = loop {
                let trial = &x + &dir * s;
                if let Some(c) = prob.factor(trial.as_slice()) {
                    let gain = s * slope + (ln_det(&c) - ld);
                    if gain >= opts.armijo * s * dec2 {
                        break Some((trial, c));
                    }
                }
                s *= opts.backtrack;
                if s < 1e-12 {
                    break None;
                }
            };
            steps += 1;
            match accepted {
                Some((trial, c)) => {
                    x = trial;
                    chol = c;
                }
                // No ascent left at working precision: treat as centered.
                None => break,
            }
        }
        let obj = prob.objective_value(x.as_slice());
        trace.push(obj);
        if opts.stop_above.is_some_and(|target| obj > target) {
            status = SdpStatus::Converged;
            break;
        }
        if dim / t < (opts.tol * obj.abs()).max(opts.abs_gap) {
            status = SdpStatus::Converged;
            break;
        }
        t *= opts.mu;
        if !t.is_finite() {
            status = SdpStatus::Numeric;
            break;
        }
    }

    let objective = prob.objective_value(x.as_slice());
    let margin = sym_eigvals(&prob.evaluate(x.as_slice()))?[0];
    Ok(SdpSolution {
        x: x.as_slice().to_vec(),
        objective,
        margin,
        newton_steps: steps,
        status,
        trace,
    })
}

/// Barrier solve with default schedule and the given relative tolerance.
pub fn maximize_c(prob: &LmiProblem, start: &[f64], tol: f64) -> Result<SdpSolution> {
    maximize(prob, start, &BarrierOptions::with_tol(tol))
}

/// Same optimum by bisection on the (single) objective variable: for each
/// trial value the remaining variables maximize `s` subject to
/// `A(x) − sI ≻ 0`, and the trial is feasible once `s > 0`.
pub fn maximize_bisection(prob: &LmiProblem, start: &[f64], tol: f64) -> Result<SdpSolution> {
    let n = prob.n_vars();
    let j = (0..n)
        .find(|&k| prob.objective[k] != 0.0)
        .filter(|&k| prob.objective[k] == 1.0 && (0..n).all(|i| i == k || prob.objective[i] == 0.0))
        .ok_or_else(|| Error::Argument("bisection needs a single-variable objective".into()))?;
    if !prob.is_strictly_feasible(start) {
        return Err(Error::Argument("start point is not strictly feasible".into()));
    }
    let dim = prob.dim();
    let others: Vec<usize> = (0..n).filter(|&k| k != j).collect();
    let fj = prob.coefficient(j);
    let scale = prob.f0.frobenius_norm().max(fj.frobenius_norm() * start[j].abs()).max(1.0);
    let mut steps = 0;

    // Returns the remaining variables at a strictly feasible point for x_j = value.
    let mut probe = |value: f64, warm: &[f64]| -> Result<Option<Vec<f64>>> {
        if value <= 0.0 && prob.positive.contains(&j) {
            return Ok(None);
        }
        let f0 = SymMatrix::symmetrize(prob.f0.matrix() + fj.matrix() * value);
        let mut terms: Vec<(Matrix, Matrix)> = others
            .iter()
            .map(|&k| {
                let (c0, c1) = prob.spans[k];
                (prob.a.columns(c0, c1 - c0).into_owned(), prob.r.columns(c0, c1 - c0).into_owned())
            })
            .collect();
        terms.push((-Matrix::identity(dim, dim), Matrix::identity(dim, dim)));
        let mut obj = Vector::zeros(others.len() + 1);
        obj[others.len()] = 1.0;
        let positive = others
            .iter()
            .enumerate()
            .filter(|(_, k)| prob.positive.contains(k))
            .map(|(i, _)| i)
            .collect();
        let inner = LmiProblem::new(f0, terms, obj)?.with_positive(positive);
        let mut x0: Vec<f64> = warm.to_vec();
        let base = {
            let mut full = vec![0.0; n];
            for (i, &k) in others.iter().enumerate() {
                full[k] = warm[i];
            }
            full[j] = value;
            sym_eigvals(&prob.evaluate(&full))?[0]
        };
        x0.push(base - 1.0);
        let opts = BarrierOptions {
            tol: 1e-6,
            abs_gap: 1e-12 * scale,
            stop_above: Some(0.0),
            ..Default::default()
        };
        let sol = maximize(&inner, &x0, &opts)?;
        steps += sol.newton_steps;
        let s = sol.objective;
        Ok((s > 0.0).then(|| sol.x[..others.len()].to_vec()))
    };

    let mut best: Vec<f64> = others.iter().map(|&k| start[k]).collect();
    let mut lo = start[j];
    let mut trace = vec![lo];
    let mut hi = if lo > 0.0 { 2.0 * lo } else { lo.abs() + 1.0 };
    let mut doublings = 0;
    while let Some(w) = probe(hi, &best)? {
        best = w;
        lo = hi;
        trace.push(lo);
        hi = if hi > 0.0 { 2.0 * hi } else { hi.abs() + 1.0 };
        doublings += 1;
        if doublings > 200 {
            return Err(Error::Numeric("objective appears unbounded".into()));
        }
    }
    while hi - lo > tol * lo.abs().max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match probe(mid, &best)? {
            Some(w) => {
                best = w;
                lo = mid;
                trace.push(lo);
            }
            None => hi = mid,
        }
    }
    let mut x = vec![0.0; n];
    for (i, &k) in others.iter().enumerate() {
        x[k] = best[i];
    }
    x[j] = lo;
    let margin = sym_eigvals(&prob.evaluate(&x))?[0];
    Ok(SdpSolution {
        objective: lo,
        x,
        margin,
        newton_steps: steps,
        status: SdpStatus::Converged,
        trace,
    })
}

/// Per-layer problem in `(λ_1, …, λ_d, c)`:
///
/// ```text
/// [ Λ − c W_nextᵀW_next   ½ Λ S ]
/// [ ½ S Λ                  I    ]  ≻ 0,   S = (W_i M_prev⁻¹ W_iᵀ)^{1/2}
/// ```
pub fn build_layer_lmi(w_i: &Matrix, m_prev: &SymMatrix, w_next: &Matrix) -> Result<LmiProblem> {
    let state = CascadeState::from_parts(1, m_prev.clone(), None)?;
    layer_lmi(&next_f(w_i, &state)?, w_next)
}

/// [`build_layer_lmi`] from an already propagated `F = W_i M_prev⁻¹ W_iᵀ`.
pub fn layer_lmi(f: &SymMatrix, w_next: &Matrix) -> Result<LmiProblem> {
    let d = f.dim();
    if w_next.ncols() != d {
        return Err(Error::Argument(format!(
            "next weight has {} columns for a stage of width {d}",
            w_next.ncols()
        )));
    }
    let s = sym_sqrt_psd(f)?;
    let dim = 2 * d;
    let mut f0 = Matrix::zeros(dim, dim);
    f0.view_mut((d, d), (d, d)).fill_with_identity();
    let mut terms = Vec::with_capacity(d + 1);
    for k in 0..d {
        let mut a = Matrix::zeros(dim, 1);
        a[(k, 0)] = 1.0;
        let mut r = a.clone();
        for i in 0..d {
            r[(d + i, 0)] = s.matrix()[(i, k)];
        }
        terms.push((a, r));
    }
    let mut r = Matrix::zeros(dim, w_next.nrows());
    r.view_mut((0, 0), (d, w_next.nrows())).copy_from(&w_next.transpose());
    terms.push((-&r, r));
    let mut obj = Vector::zeros(d + 1);
    obj[d] = 1.0;
    Ok(LmiProblem::new(SymMatrix::symmetrize(f0), terms, obj)?.with_positive(vec![d]))
}

/// Strictly feasible point `Λ = (2/σ)I`, `c = 0.9/(σ‖W_next‖²)` with
/// `σ = λ_max(W_i M_prev⁻¹ W_iᵀ)`.
pub fn feasible_start(w_i: &Matrix, m_prev: &SymMatrix, w_next: &Matrix) -> Result<(Vec<f64>, f64)> {
    let state = CascadeState::from_parts(1, m_prev.clone(), None)?;
    feasible_start_from_f(&next_f(w_i, &state)?, w_next)
}

pub fn feasible_start_from_f(f: &SymMatrix, w_next: &Matrix) -> Result<(Vec<f64>, f64)> {
    let sigma = sym_max_eig(f)?;
    let norm = spectral_norm(w_next)?;
    if !(sigma > 0.0) || norm == 0.0 {
        return Err(Error::Value("layer propagates nothing; no strictly feasible start".into()));
    }
    Ok((vec![2.0 / sigma; f.dim()], 0.9 / (sigma * norm * norm)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointVariant {
    /// One multiplier per neuron.
    Neuron,
    /// One multiplier per layer.
    Layer,
}

impl JointVariant {
    pub fn algorithm(self) -> Algorithm {
        match self {
            JointVariant::Neuron => Algorithm::JointNeuron,
            JointVariant::Layer => Algorithm::JointLayer,
        }
    }
}

/// Maximizes `F` over all multipliers jointly subject to the network-wide
/// block tri-diagonal LMI. Intended as a small-scale reference.
pub fn solve_joint_lipsdp(net: &Network, variant: JointVariant, tol: f64) -> Result<Certificate> {
    if !net.activation().is_unit_relu() {
        return Err(Error::Argument("joint solve needs activation slopes [0, 1]".into()));
    }
    let algo = variant.algorithm();
    let l = net.depth();
    if l == 1 {
        let s = spectral_norm(net.weight(0))? * (1.0 + crate::cascade::BOUND_ROUNDING);
        let mut cert = Certificate::new(algo, vec![], s * s);
        cert.bound = s;
        return Ok(cert);
    }
    let dims = net.dims();
    let dim: usize = dims[..l].iter().sum();
    if dim > JOINT_DIM_CAP {
        return Err(Error::Size { dim, cap: JOINT_DIM_CAP });
    }
    let mut offsets = vec![0];
    for &d in &dims[..l] {
        offsets.push(offsets.last().unwrap() + d);
    }

    let mut f0 = Matrix::zeros(dim, dim);
    f0.view_mut((0, 0), (dims[0], dims[0])).fill_with_identity();
    let mut terms = Vec::new();
    let mut owner = Vec::new();
    for i in 1..l {
        let w = net.weight(i - 1);
        let mut layer_a = Matrix::zeros(dim, dims[i]);
        let mut layer_r = Matrix::zeros(dim, dims[i]);
        for k in 0..dims[i] {
            let e = offsets[i] + k;
            layer_a[(e, k)] = 1.0;
            layer_r[(e, k)] = 1.0;
            for c in 0..dims[i - 1] {
                layer_r[(offsets[i - 1] + c, k)] = -w[(k, c)];
            }
        }
        match variant {
            JointVariant::Neuron => {
                for k in 0..dims[i] {
                    terms.push((layer_a.columns(k, 1).into_owned(), layer_r.columns(k, 1).into_owned()));
                    owner.push((i - 1, Some(k)));
                }
            }
            JointVariant::Layer => {
                terms.push((layer_a, layer_r));
                owner.push((i - 1, None));
            }
        }
    }
    let wl = net.weight(l - 1);
    let mut r = Matrix::zeros(dim, wl.nrows());
    r.view_mut((offsets[l - 1], 0), (dims[l - 1], wl.nrows())).copy_from(&wl.transpose());
    terms.push((-&r, r));
    let nv = terms.len();
    let mut obj = Vector::zeros(nv);
    obj[nv - 1] = 1.0;
    let prob = LmiProblem::new(SymMatrix::symmetrize(f0), terms, obj)?.with_positive((0..nv).collect());

    let fast = crate::estimators::estimate_fast(net, &crate::estimators::EstimateOptions::default())?;
    let mut start: Vec<f64> = owner.iter().map(|&(i, _)| fast.lambdas[i][0]).collect();
    start.push(0.5 / fast.inv_f);
    let mut tries = 0;
    while !prob.is_strictly_feasible(&start) {
        start[nv - 1] *= 0.5;
        tries += 1;
        if tries > 60 {
            return Err(Error::Numeric("could not find a strictly feasible joint start".into()));
        }
    }
    let sol = maximize(&prob, &start, &BarrierOptions::with_tol(tol))?;

    let mut lambdas: Vec<Vec<f64>> = dims[1..l].iter().map(|&d| vec![0.0; d]).collect();
    for (&(i, k), &v) in owner.iter().zip(&sol.x) {
        match k {
            Some(k) => lambdas[i][k] = v,
            None => lambdas[i].iter_mut().for_each(|x| *x = v),
        }
    }
    let direct = Certificate::new(algo, lambdas.clone(), 1.0 / sol.objective);
    // The chain gives the exact best F for these multipliers.
    let candidate = chain_inv_f(net, &lambdas)
        .ok()
        .filter(|&v| v.is_finite() && v > 0.0 && v < direct.inv_f)
        .map(|v| Certificate::new(algo, lambdas.clone(), v));
    for cert in candidate.into_iter().chain(std::iter::once(direct)) {
        let report = crate::cascade::verify_monolithic(net, &cert, DEFAULT_SLACK, DEFAULT_MONOLITHIC_CAP)?;
        if report.ok {
            return Ok(cert);
        }
    }
    Err(Error::Verification("joint certificate failed the monolithic check".into()))
}

fn chain_inv_f(net: &Network, lambdas: &[Vec<f64>]) -> Result<f64> {
    let mut state = CascadeState::initial(net.input_dim());
    for (i, lam) in lambdas.iter().enumerate() {
        let f = next_f(net.weight(i), &state)?;
        state = state.advance(lam, f)?;
    }
    crate::cascade::final_bound(net.weight(net.depth() - 1), &state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netio::random_network;
    use crate::spectral::check_pd;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn scalar_layer(w1: f64, m: f64, w2: f64) -> LmiProblem {
        build_layer_lmi(&scalar(w1), &SymMatrix::from_diagonal(&[m]), &scalar(w2)).unwrap()
    }

    #[test]
    fn scalar_layout() {
        let p = scalar_layer(1.0, 1.0, 1.0);
        let (lam, c) = (1.3, 0.4);
        let a = p.evaluate(&[lam, c]);
        let want = Matrix::from_row_slice(2, 2, &[lam - c, lam / 2.0, lam / 2.0, 1.0]);
        assert!((a.matrix() - want).abs().max() < 1e-15);
    }

    #[test]
    fn constant_term() {
        let p = scalar_layer(1.0, 1.0, 1.0);
        let a = p.evaluate(&[0.0, 0.0]);
        assert_eq!(a.matrix(), &Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));
        assert_eq!(a, *p.f0());
    }

    #[test]
    fn dims_follow_layer_widths() {
        let net = random_network(&[3, 5, 2], 4, [0.4, 1.8]).unwrap();
        let p = build_layer_lmi(net.weight(0), &SymMatrix::identity(3), net.weight(1)).unwrap();
        assert_eq!(p.n_vars(), 6);
        assert_eq!(p.dim(), 10);
    }

    #[test]
    fn evaluate_matches_dense_coefficients() {
        let net = random_network(&[3, 4, 2], 9, [0.4, 1.8]).unwrap();
        let p = build_layer_lmi(net.weight(0), &SymMatrix::identity(3), net.weight(1)).unwrap();
        let x = [0.7, 1.1, 0.3, 2.0, 0.05];
        let mut dense = p.f0().matrix().clone();
        for (k, &v) in x.iter().enumerate() {
            dense += p.coefficient(k).matrix() * v;
        }
        assert!((p.evaluate(&x).matrix() - dense).abs().max() < 1e-13);
    }

    #[test]
    fn feasible_start_examples() {
        let (lam, c) = feasible_start(&scalar(1.0), &SymMatrix::identity(1), &scalar(1.0)).unwrap();
        assert!((lam[0] - 2.0).abs() < 1e-15 && (c - 0.9).abs() < 1e-15);
        let id = Matrix::identity(4, 4);
        let (lam, c) = feasible_start(&id, &SymMatrix::identity(4), &id).unwrap();
        assert!(lam.iter().all(|&l| (l - 2.0).abs() < 1e-12));
        assert!((c - 0.9).abs() < 1e-12);
    }

    #[test]
    fn feasible_start_is_strictly_feasible() {
        for seed in 0..20 {
            let net = random_network(&[4, 6, 5], seed, [0.4, 1.8]).unwrap();
            let (lam, c) = feasible_start(net.weight(0), &SymMatrix::identity(4), net.weight(1)).unwrap();
            let p = build_layer_lmi(net.weight(0), &SymMatrix::identity(4), net.weight(1)).unwrap();
            let mut x = lam;
            x.push(c);
            assert!(check_pd(&p.evaluate(&x), 0.0).is_pd, "seed {seed}");
        }
    }

    fn solve(p: &LmiProblem, w1: f64, m: f64, w2: f64) -> SdpSolution {
        let (lam, c) = feasible_start(&scalar(w1), &SymMatrix::from_diagonal(&[m]), &scalar(w2)).unwrap();
        maximize_c(p, &[lam[0], c], DEFAULT_SDP_TOL).unwrap()
    }

    #[test]
    fn scalar_unit_optimum() {
        let sol = solve(&scalar_layer(1.0, 1.0, 1.0), 1.0, 1.0, 1.0);
        assert_eq!(sol.status, SdpStatus::Converged);
        assert!((sol.objective - 1.0).abs() < 1e-4, "{sol:?}");
        assert!(sol.margin > 0.0);
        assert!((sol.x[0] - 2.0).abs() < 1e-2);
    }

    #[test]
    fn scalar_weighted_optimum() {
        let sol = solve(&scalar_layer(2.0, 1.0, 3.0), 2.0, 1.0, 3.0);
        assert!(((sol.objective - 1.0 / 36.0) * 36.0).abs() < 1e-4, "{sol:?}");
    }

    #[test]
    fn objective_trace_is_monotone() {
        let net = random_network(&[4, 8, 6], 2, [0.4, 1.8]).unwrap();
        let p = build_layer_lmi(net.weight(0), &SymMatrix::identity(4), net.weight(1)).unwrap();
        let (mut x, c) = feasible_start(net.weight(0), &SymMatrix::identity(4), net.weight(1)).unwrap();
        x.push(c);
        let sol = maximize_c(&p, &x, DEFAULT_SDP_TOL).unwrap();
        for pair in sol.trace.windows(2) {
            assert!(pair[1] >= pair[0] * (1.0 - 1e-12), "{:?}", sol.trace);
        }
        assert!(sol.margin > 0.0 && sol.x.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn identity_layer_decouples() {
        let id = Matrix::identity(4, 4);
        let p = build_layer_lmi(&id, &SymMatrix::identity(4), &id).unwrap();
        let (mut x, c) = feasible_start(&id, &SymMatrix::identity(4), &id).unwrap();
        x.push(c);
        let sol = maximize_c(&p, &x, DEFAULT_SDP_TOL).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-4);
        assert!(sol.x[..4].iter().all(|&l| (l - 2.0).abs() < 1e-2), "{:?}", sol.x);
    }

    #[test]
    fn rejects_infeasible_start() {
        let p = scalar_layer(1.0, 1.0, 1.0);
        assert!(matches!(maximize_c(&p, &[2.0, 1.5], 1e-6), Err(Error::Argument(_))));
    }

    #[test]
    fn bisection_matches_barrier_on_scalar() {
        let p = scalar_layer(2.0, 1.0, 3.0);
        let (lam, c) = feasible_start(&scalar(2.0), &SymMatrix::identity(1), &scalar(3.0)).unwrap();
        let sol = maximize_bisection(&p, &[lam[0], c], 1e-7).unwrap();
        assert!(((sol.objective - 1.0 / 36.0) * 36.0).abs() < 1e-4, "{sol:?}");
        assert!(sol.margin > 0.0);
    }

    #[test]
    fn joint_single_layer_is_spectral_norm() {
        let net = random_network(&[3, 2], 5, [0.4, 1.8]).unwrap();
        let cert = solve_joint_lipsdp(&net, JointVariant::Neuron, DEFAULT_JOINT_TOL).unwrap();
        let s = spectral_norm(net.weight(0)).unwrap();
        assert!((cert.bound - s).abs() < 1e-4 * s);
    }

    #[test]
    fn joint_scalar_chain() {
        let net = Network::scalar_chain(&[0.5, 2.0, 1.5]).unwrap();
        for v in [JointVariant::Neuron, JointVariant::Layer] {
            let cert = solve_joint_lipsdp(&net, v, DEFAULT_JOINT_TOL).unwrap();
            assert!((cert.bound - 1.5).abs() < 1e-3, "{cert:?}");
        }
    }

    #[test]
    fn joint_identity_network() {
        let net = Network::identity(3, 4).unwrap();
        let cert = solve_joint_lipsdp(&net, JointVariant::Neuron, DEFAULT_JOINT_TOL).unwrap();
        assert!((cert.bound - 1.0).abs() < 1e-3, "{cert:?}");
        assert_eq!(cert.algo, Algorithm::JointNeuron);
    }

    #[test]
    fn joint_size_cap() {
        let net = Network::identity(4, 100).unwrap();
        assert!(matches!(
            solve_joint_lipsdp(&net, JointVariant::Layer, DEFAULT_JOINT_TOL),
            Err(Error::Size { dim: 400, cap: 300 })
        ));
    }
}
