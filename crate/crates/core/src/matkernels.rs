//! Self-contained dense linear-algebra kernels for small matrices: the
//! matrix exponential, the logarithm near the identity, commutators, the
//! differential of the exponential map, the projection onto the symplectic
//! Lie algebra, and symplecticity residuals.
//!
//! Everything here targets moderate-norm matrices of dimension ~10 or less,
//! so the kernels favour short verified series over general-purpose
//! decompositions.

use crate::error::{Error, Result};

/// Default kernel tolerance: two orders of magnitude above double-precision
/// noise for 8x8 work.
pub const DEFAULT_TOL: f64 = 1e-13;

/// Frobenius-norm bound on `B - I` accepted by the logarithm series.
pub const LOG_SERIES_BOUND: f64 = 0.9;

/// Convergence guard on `||X||_F` for the dexp series.
pub const DEXP_NORM_BOUND: f64 = 5.0;

const DEXP_MAX_TERMS: usize = 25;
const LOG_MAX_TERMS: usize = 400;
const LOG_MAX_SQRT_DEPTH: usize = 8;

/// Dense real square matrix, row-major storage.
///
/// Entries are validated to be finite on construction and after every
/// kernel operation; the dimension is fixed for the lifetime of the value.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SquareMatrix {
    /// Builds a matrix from row-major entries, rejecting NaN/Inf.
    pub fn from_entries(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionError {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        let m = SquareMatrix { dim, entries };
        m.check_finite("from_entries")?;
        Ok(m)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionError {
                    expected: dim,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::from_entries(dim, entries)
    }

    pub fn zeros(dim: usize) -> Self {
        SquareMatrix {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.entries[i * diag.len() + i] = *d;
        }
        m.check_finite("diagonal")?;
        Ok(m)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.entries[i * dim + j] = f(i, j);
            }
        }
        m.check_finite("from_fn")?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    fn check_finite(&self, context: &str) -> Result<()> {
        if self.entries.iter().all(|e| e.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidMatrix {
                context: context.to_string(),
            })
        }
    }

    pub fn transpose(&self) -> SquareMatrix {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.entries[j * d + i] = self.entries[i * d + j];
            }
        }
        out
    }

    pub fn scale(&self, a: f64) -> SquareMatrix {
        SquareMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * a).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |m, e| m.max(e.abs()))
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "matrix-vector dimension mismatch");
        let d = self.dim;
        let mut out = vec![0.0; d];
        for i in 0..d {
            let row = &self.entries[i * d..(i + 1) * d];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    fn add_assign_scaled(&mut self, other: &SquareMatrix, a: f64) {
        debug_assert_eq!(self.dim, other.dim);
        for (s, o) in self.entries.iter_mut().zip(&other.entries) {
            *s += a * o;
        }
    }
}

impl std::ops::Add for &SquareMatrix {
    type Output = SquareMatrix;
    fn add(self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix addition dimension mismatch");
        SquareMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl std::ops::Sub for &SquareMatrix {
    type Output = SquareMatrix;
    fn sub(self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix subtraction dimension mismatch");
        SquareMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl std::ops::Mul for &SquareMatrix {
    type Output = SquareMatrix;
    fn mul(self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let d = self.dim;
        let mut out = SquareMatrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let aik = self.entries[i * d + k];
                if aik == 0.0 {
                    continue;
                }
                let brow = &rhs.entries[k * d..(k + 1) * d];
                let orow = &mut out.entries[i * d..(i + 1) * d];
                for j in 0..d {
                    orow[j] += aik * brow[j];
                }
            }
        }
        out
    }
}

/// The canonical structure matrix `J_n = [[0, I_n], [-I_n, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrix {
    n: usize,
    matrix: SquareMatrix,
}

impl StructureMatrix {
    pub fn new(n: usize) -> Self {
        let dim = 2 * n;
        let mut m = SquareMatrix::zeros(dim);
        for i in 0..n {
            m.entries[i * dim + (n + i)] = 1.0;
            m.entries[(n + i) * dim + i] = -1.0;
        }
        StructureMatrix { n, matrix: m }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    /// `J v` without forming a product: `(J v)_q = v_p`, `(J v)_p = -v_q`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), 2 * self.n, "structure matrix dimension mismatch");
        let n = self.n;
        let mut out = vec![0.0; 2 * n];
        for i in 0..n {
            out[i] = v[n + i];
            out[n + i] = -v[i];
        }
        out
    }
}

/// LU factorization with partial pivoting; `None` when singular.
pub(crate) struct Lu {
    dim: usize,
    lu: Vec<f64>,
    pivots: Vec<usize>,
}

impl Lu {
    pub(crate) fn factor(m: &SquareMatrix) -> Option<Lu> {
        let d = m.dim;
        let mut lu = m.entries.clone();
        let mut pivots: Vec<usize> = (0..d).collect();
        for col in 0..d {
            let mut max_val = 0.0;
            let mut max_row = col;
            for row in col..d {
                let v = lu[row * d + col].abs();
                if v > max_val {
                    max_val = v;
                    max_row = row;
                }
            }
            if max_val < f64::EPSILON * 16.0 {
                return None;
            }
            if max_row != col {
                for j in 0..d {
                    lu.swap(col * d + j, max_row * d + j);
                }
                pivots.swap(col, max_row);
            }
            let pivot = lu[col * d + col];
            for row in (col + 1)..d {
                let factor = lu[row * d + col] / pivot;
                lu[row * d + col] = factor;
                for j in (col + 1)..d {
                    lu[row * d + j] -= factor * lu[col * d + j];
                }
            }
        }
        Some(Lu { dim: d, lu, pivots })
    }

    pub(crate) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let d = self.dim;
        assert_eq!(rhs.len(), d);
        let mut x: Vec<f64> = self.pivots.iter().map(|&p| rhs[p]).collect();
        for i in 1..d {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * d + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..d).rev() {
            let mut s = x[i];
            for j in (i + 1)..d {
                s -= self.lu[i * d + j] * x[j];
            }
            x[i] = s / self.lu[i * d + i];
        }
        x
    }

    pub(crate) fn inverse(&self) -> SquareMatrix {
        let d = self.dim;
        let mut out = SquareMatrix::zeros(d);
        let mut e = vec![0.0; d];
        for col in 0..d {
            e[col] = 1.0;
            let x = self.solve(&e);
            e[col] = 0.0;
            for row in 0..d {
                out.entries[row * d + col] = x[row];
            }
        }
        out
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol <= 1e-6 {
        Ok(())
    } else {
        Err(Error::InvalidTolerance { tol, max: 1e-6 })
    }
}

/// Matrix exponential by scaling and squaring around a truncated Taylor core.
///
/// The input is scaled so its Frobenius norm is at most 1/2, the series is
/// summed until terms drop below the (scaled) tolerance, and the result is
/// squared back. Exact identity for the zero matrix.
pub fn mat_exp(x: &SquareMatrix, tol: f64) -> Result<SquareMatrix> {
    check_tol(tol)?;
    x.check_finite("mat_exp input")?;
    let norm = x.frobenius_norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = x.scale(0.5_f64.powi(squarings as i32));
    // Tighten the series tolerance so that error doubling per squaring
    // stays within the requested relative bound.
    let series_tol = (tol * 0.5_f64.powi(squarings as i32 + 1)).max(1e-17);

    let mut sum = SquareMatrix::identity(x.dim);
    let mut term = SquareMatrix::identity(x.dim);
    for k in 1..=48 {
        term = &term * &scaled;
        term = term.scale(1.0 / k as f64);
        sum.add_assign_scaled(&term, 1.0);
        if term.frobenius_norm() <= series_tol * sum.frobenius_norm() {
            break;
        }
    }
    let mut result = sum;
    for _ in 0..squarings {
        result = &result * &result;
    }
    result.check_finite("mat_exp result")?;
    Ok(result)
}

/// Mercator series `log(I + E) = sum (-1)^(k+1) E^k / k` with a
/// term-magnitude stopping rule. Requires `||E||_F <= LOG_SERIES_BOUND`.
fn mercator_log(e: &SquareMatrix, tol: f64) -> SquareMatrix {
    let mut sum = e.clone();
    let mut power = e.clone();
    let mut below = 0;
    for k in 2..=LOG_MAX_TERMS {
        power = &power * e;
        let coeff = if k % 2 == 0 {
            -1.0 / k as f64
        } else {
            1.0 / k as f64
        };
        sum.add_assign_scaled(&power, coeff);
        // Two consecutive small terms: odd/even powers can differ in
        // magnitude for structured matrices.
        if power.frobenius_norm() / k as f64 <= tol {
            below += 1;
            if below >= 2 {
                break;
            }
        } else {
            below = 0;
        }
    }
    sum
}

/// Matrix square root by the Denman-Beavers iteration.
fn sqrt_denman_beavers(b: &SquareMatrix) -> Result<SquareMatrix> {
    let out_of_domain = |m: &SquareMatrix| Error::LogDomainError {
        norm: (m - &SquareMatrix::identity(m.dim)).frobenius_norm(),
        bound: LOG_SERIES_BOUND,
    };
    let mut y = b.clone();
    let mut z = SquareMatrix::identity(b.dim);
    for _ in 0..60 {
        let y_inv = Lu::factor(&y).ok_or_else(|| out_of_domain(b))?.inverse();
        let z_inv = Lu::factor(&z).ok_or_else(|| out_of_domain(b))?.inverse();
        let y_next = (&y + &z_inv).scale(0.5);
        let z_next = (&z + &y_inv).scale(0.5);
        let delta = (&y_next - &y).frobenius_norm();
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * y.frobenius_norm().max(1.0) {
            y.check_finite("sqrt iteration")?;
            return Ok(y);
        }
    }
    Err(Error::LogDomainError {
        norm: (b - &SquareMatrix::identity(b.dim)).frobenius_norm(),
        bound: LOG_SERIES_BOUND,
    })
}

/// Matrix logarithm for `B` near the identity.
///
/// Uses the Mercator series when `||B - I||_F <= 0.9` (the Frobenius norm is
/// the documented surrogate for the spectral bound). Outside that domain the
/// argument is brought closer to the identity by square roots
/// (`log B = 2 log sqrt(B)`, Denman-Beavers) before recursing; if repeated
/// square roots cannot reach the series domain the input is rejected.
pub fn mat_log_near_identity(b: &SquareMatrix, tol: f64) -> Result<SquareMatrix> {
    check_tol(tol)?;
    b.check_finite("mat_log input")?;
    log_with_depth(b, tol, 0)
}

fn log_with_depth(b: &SquareMatrix, tol: f64, depth: usize) -> Result<SquareMatrix> {
    let e = b - &SquareMatrix::identity(b.dim);
    let norm = e.frobenius_norm();
    if norm <= LOG_SERIES_BOUND {
        let l = mercator_log(&e, tol);
        l.check_finite("mat_log result")?;
        return Ok(l);
    }
    if depth >= LOG_MAX_SQRT_DEPTH {
        return Err(Error::LogDomainError {
            norm,
            bound: LOG_SERIES_BOUND,
        });
    }
    let root = sqrt_denman_beavers(b)?;
    Ok(log_with_depth(&root, tol * 0.5, depth + 1)?.scale(2.0))
}

/// Commutator `[X, Y] = XY - YX`.
pub fn commutator(x: &SquareMatrix, y: &SquareMatrix) -> Result<SquareMatrix> {
    if x.dim != y.dim {
        return Err(Error::DimensionError {
            expected: x.dim,
            found: y.dim,
        });
    }
    Ok(&(x * y) - &(y * x))
}

/// Differential of the exponential map,
/// `dexp_X(Y) = sum_k ad_X^k(Y) / (k+1)!`,
/// truncated when a term drops below `tol` in Frobenius norm.
pub fn dexp(x: &SquareMatrix, y: &SquareMatrix, tol: f64) -> Result<SquareMatrix> {
    check_tol(tol)?;
    if x.dim != y.dim {
        return Err(Error::DimensionError {
            expected: x.dim,
            found: y.dim,
        });
    }
    let x_norm = x.frobenius_norm();
    if x_norm > DEXP_NORM_BOUND {
        return Err(Error::SeriesDivergence {
            context: format!("||X||_F = {x_norm:.3e} exceeds dexp guard {DEXP_NORM_BOUND}"),
        });
    }
    let mut sum = y.clone();
    let mut ad = y.clone();
    // (k+1)! accumulated incrementally; factorial decay dominates for the
    // norms admitted by the guard.
    let mut factorial = 1.0_f64;
    let mut converged = false;
    for k in 1..=DEXP_MAX_TERMS {
        ad = commutator(x, &ad)?;
        factorial *= (k + 1) as f64;
        let coeff = 1.0 / factorial;
        sum.add_assign_scaled(&ad, coeff);
        if ad.frobenius_norm() * coeff <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SeriesDivergence {
            context: format!("dexp series not below tol {tol:.1e} after {DEXP_MAX_TERMS} terms"),
        });
    }
    sum.check_finite("dexp result")?;
    Ok(sum)
}

/// Linear projection onto the symplectic Lie algebra,
/// `P(X) = (X + J X^T J) / 2`; the image satisfies `JP + P^T J = 0`.
pub fn project_sp(x: &SquareMatrix, j: &StructureMatrix) -> Result<SquareMatrix> {
    if x.dim != j.dim() {
        return Err(Error::DimensionError {
            expected: j.dim(),
            found: x.dim,
        });
    }
    let jm = j.matrix();
    let conj = &(jm * &x.transpose()) * jm;
    Ok((&(x + &conj)).scale(0.5))
}

/// Frobenius norm of `M^T J M - J`; zero exactly when `M` is symplectic.
pub fn symplectic_residual(m: &SquareMatrix, j: &StructureMatrix) -> Result<f64> {
    if m.dim != j.dim() {
        return Err(Error::DimensionError {
            expected: j.dim(),
            found: m.dim,
        });
    }
    let jm = j.matrix();
    let prod = &(&m.transpose() * jm) * m;
    Ok((&prod - jm).frobenius_norm())
}
