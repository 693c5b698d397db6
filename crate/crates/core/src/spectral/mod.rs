//! Dense symmetric linear-algebra kernels.
//!
//! Everything downstream works with small dense blocks (a layer's width at
//! most), so the kernels here are plain cubic-time routines: a
//! Householder/QL symmetric eigensolver, Cholesky-based definiteness tests
//! and solves, a certified power iteration for the largest eigenvalue, and
//! a clamped PSD square root.

mod tridiag;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative change of the Rayleigh quotient that counts as converged.
const POWER_REL_TOL: f64 = 1e-12;
/// Hard cap on power iterations.
const POWER_MAX_ITER: usize = 10_000;
/// Relative gap used when certifying a power-iteration estimate by Cholesky.
const POWER_CERT_GAP: f64 = 2e-10;
/// Relative scale of the PD slack returned by [`default_pd_tol`].
pub const PD_REL_TOL: f64 = 1e-9;
/// Relative negative eigenvalue tolerated by [`sym_sqrt_psd`].
pub const PSD_REL_TOL: f64 = 1e-9;

/// A dense symmetric matrix whose storage is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Symmetrizes `m` as `(m + mᵀ) / 2`.
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Argument(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("symmetric matrix"));
        }
        Ok(Self::symmetrize(m))
    }

    pub(crate) fn symmetrize(mut m: Matrix) -> Self {
        let n = m.nrows();
        for j in 0..n {
            for i in 0..j {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        SymMatrix(m)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(Matrix::zeros(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(Matrix::from_diagonal(&Vector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn is_exactly_symmetric(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..j).all(|i| self.0[(i, j)] == self.0[(j, i)]))
    }

    /// `self + alpha * I`.
    pub fn shifted(&self, alpha: f64) -> SymMatrix {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += alpha;
        }
        SymMatrix(m)
    }

    pub fn scaled(&self, alpha: f64) -> SymMatrix {
        SymMatrix(&self.0 * alpha)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    // Column-major storage of a symmetric matrix is also its row-major storage.
    fn to_row_major(&self) -> Vec<f64> {
        self.0.as_slice().to_vec()
    }
}

impl std::ops::Sub for &SymMatrix {
    type Output = SymMatrix;

    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl std::ops::Add for &SymMatrix {
    type Output = SymMatrix;

    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

/// Eigenvalues in ascending order and the matching orthonormal eigenvectors
/// (as columns).
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

pub fn sym_eig(s: &SymMatrix) -> Result<SymEig> {
    let n = s.dim();
    let dec = tridiag::decompose(s.to_row_major(), n, true)?;
    let rows = dec.vectors.unwrap_or_default();
    Ok(SymEig {
        values: dec.values,
        vectors: Matrix::from_row_slice(n, n, &rows),
    })
}

/// Eigenvalues only, ascending.
pub fn sym_eigvals(s: &SymMatrix) -> Result<Vec<f64>> {
    Ok(tridiag::decompose(s.to_row_major(), s.dim(), false)?.values)
}

/// Largest (algebraic) eigenvalue of a symmetric matrix.
///
/// Runs power iteration from the normalized all-ones vector with a
/// Rayleigh-quotient stopping rule. A converged estimate `rho` is accepted
/// only if `rho * (1 + 2e-10) * I - S` admits a Cholesky factorization,
/// which proves no eigenvalue was missed; otherwise, or when the iteration
/// stagnates, the full eigensolver decides.
pub fn sym_max_eig(s: &SymMatrix) -> Result<f64> {
    let n = s.dim();
    if n == 0 {
        return Err(Error::Argument("empty matrix".into()));
    }
    if n == 1 {
        return Ok(s.0[(0, 0)]);
    }
    if s.0.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    if let Some(rho) = power_iteration(s) {
        if rho > 0.0 && is_pd(&s.scaled(-1.0).shifted(rho * (1.0 + POWER_CERT_GAP)), 0.0) {
            return Ok(rho);
        }
    }
    let values = sym_eigvals(s)?;
    Ok(values[n - 1])
}

fn power_iteration(s: &SymMatrix) -> Option<f64> {
    let n = s.dim();
    // Past this many sweeps the dense eigensolver is cheaper than waiting.
    let budget = (2 * n + 50).min(POWER_MAX_ITER);
    let mut v = Vector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut w = Vector::zeros(n);
    let mut prev_rho: Option<f64> = None;
    let mut prev_delta: Option<f64> = None;
    for _ in 0..budget {
        w.gemv(1.0, &s.0, &v, 0.0);
        let rho = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        v.copy_from(&w);
        v /= norm;
        if let Some(prev) = prev_rho {
            let delta = (rho - prev).abs();
            // Geometric rate estimate bounds the error still ahead.
            let rate = match prev_delta {
                Some(pd) if pd > 0.0 => (delta / pd).min(0.999),
                _ => 0.5,
            };
            let scale = rho.abs();
            if delta <= POWER_REL_TOL * scale && delta * rate / (1.0 - rate) <= 0.1 * POWER_REL_TOL * scale {
                return Some(rho);
            }
            prev_delta = Some(delta);
        }
        prev_rho = Some(rho);
    }
    None
}

/// Largest singular value `sqrt(λ_max(AᵀA))`.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::Argument("spectral norm of an empty matrix".into()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let gram = if a.ncols() <= a.nrows() {
        a.tr_mul(a)
    } else {
        a * a.transpose()
    };
    Ok(sym_max_eig(&SymMatrix::symmetrize(gram))?.max(0.0).sqrt())
}

/// Scale-aware strictness slack `1e-9 * max(1, ‖S‖₂)`.
pub fn default_pd_tol(s: &SymMatrix) -> f64 {
    let norm = match sym_eigvals(s) {
        Ok(v) if !v.is_empty() => v[0].abs().max(v[v.len() - 1].abs()),
        _ => s.frobenius_norm(),
    };
    PD_REL_TOL * norm.max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdMethod {
    Cholesky,
    Eig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdReport {
    pub is_pd: bool,
    pub min_eig: f64,
    pub method: PdMethod,
}

/// Tests `λ_min(S) > tol`.
///
/// A Cholesky factorization of `S - tol·I` is attempted first; the minimum
/// eigenvalue is then taken from the eigensolver, which is authoritative for
/// the reported verdict so that `is_pd == (min_eig > tol)` always holds.
pub fn check_pd(s: &SymMatrix, tol: f64) -> PdReport {
    let method = if is_pd(s, tol) {
        PdMethod::Cholesky
    } else {
        PdMethod::Eig
    };
    let min_eig = match sym_eigvals(s) {
        Ok(v) if !v.is_empty() => v[0],
        Ok(_) => f64::INFINITY,
        Err(_) => f64::NAN,
    };
    PdReport {
        is_pd: min_eig > tol,
        min_eig,
        method,
    }
}

/// Cholesky-only predicate for `λ_min(S) > tol`.
pub fn is_pd(s: &SymMatrix, tol: f64) -> bool {
    let m = if tol == 0.0 { s.0.clone() } else { s.shifted(-tol).0 };
    Cholesky::new(m).is_some()
}

/// Cholesky factor of an SPD matrix, reusable across solves.
#[derive(Clone, Debug)]
pub struct SpdFactor(Cholesky<f64, Dyn>);

impl SpdFactor {
    pub fn new(m: &SymMatrix) -> Result<Self> {
        Cholesky::new(m.0.clone())
            .map(SpdFactor)
            .ok_or(Error::NotPositiveDefinite)
    }

    pub fn solve(&self, b: &Matrix) -> Matrix {
        self.0.solve(b)
    }

    /// `W · M⁻¹ · Wᵀ`, symmetrized.
    pub fn congruence_inverse(&self, w: &Matrix) -> SymMatrix {
        let x = self.0.solve(&w.transpose());
        SymMatrix::symmetrize(w * x)
    }

    pub fn inverse(&self) -> SymMatrix {
        SymMatrix::symmetrize(self.0.inverse())
    }

    pub fn ln_det(&self) -> f64 {
        let l = self.0.l_dirty();
        (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
    }
}

/// Solves `M X = B` for SPD `M`.
pub fn solve_spd(m: &SymMatrix, b: &Matrix) -> Result<Matrix> {
    if b.nrows() != m.dim() {
        return Err(Error::Argument(format!(
            "right-hand side has {} rows, matrix is {}x{}",
            b.nrows(),
            m.dim(),
            m.dim()
        )));
    }
    Ok(SpdFactor::new(m)?.solve(b))
}

/// Symmetric PSD square root with negative round-off eigenvalues clamped to 0.
pub fn sym_sqrt_psd(s: &SymMatrix) -> Result<SymMatrix> {
    let n = s.dim();
    if n == 0 {
        return Ok(SymMatrix::zeros(0));
    }
    let eig = sym_eig(s)?;
    let min = eig.values[0];
    let norm = min.abs().max(eig.values[n - 1].abs());
    if min < -PSD_REL_TOL * norm {
        return Err(Error::NotPsd(min));
    }
    let mut scaled = eig.vectors.clone();
    for (j, &lambda) in eig.values.iter().enumerate() {
        let root = lambda.max(0.0).sqrt();
        scaled.column_mut(j).scale_mut(root);
    }
    Ok(SymMatrix::symmetrize(&scaled * eig.vectors.transpose()))
}
