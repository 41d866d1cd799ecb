//! Problem definitions: quadratic Hamiltonians `H = -y^T J A(t) y / 2` for
//! coefficient maps `A(t)` in sp(2n), the slowly perturbed harmonic
//! oscillator used in the experiments, and the extended-phase-space state
//! `(q, p, t, u)` with its energy bookkeeping `K = H + u`.

use crate::error::{Error, Result};
use crate::matkernels::{SquareMatrix, StructureMatrix};

/// Point `y = (q, p)` in phase space, stored as two length-n vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    q: Vec<f64>,
    p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() || q.is_empty() {
            return Err(Error::DimensionError {
                expected: q.len().max(1),
                found: p.len(),
            });
        }
        if !q.iter().chain(p.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidMatrix {
                context: "phase point has non-finite components".to_string(),
            });
        }
        Ok(PhasePoint { q, p })
    }

    /// Rebuilds a point from the stacked vector `(q_1..q_n, p_1..p_n)`.
    pub fn from_stacked(y: &[f64]) -> Result<Self> {
        if y.len() % 2 != 0 || y.is_empty() {
            return Err(Error::DimensionError {
                expected: y.len() + 1,
                found: y.len(),
            });
        }
        let n = y.len() / 2;
        Self::new(y[..n].to_vec(), y[n..].to_vec())
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Stacked column vector `(q, p)` of length 2n.
    pub fn stacked(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.q.len());
        y.extend_from_slice(&self.q);
        y.extend_from_slice(&self.p);
        y
    }

    pub fn norm(&self) -> f64 {
        self.q
            .iter()
            .chain(self.p.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// State in extended phase space: `z = (q, p, t, u)`.
///
/// With `u_0 = -H(q_0, p_0, t_0)` the extended Hamiltonian `K = H + u`
/// vanishes at the initial point and `-u` tracks the energy along the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPoint {
    pub y: PhasePoint,
    pub t: f64,
    pub u: f64,
}

impl ExtendedPoint {
    pub fn new(y: PhasePoint, t: f64, u: f64) -> Result<Self> {
        if !t.is_finite() || !u.is_finite() {
            return Err(Error::InvalidMatrix {
                context: "extended point has non-finite t or u".to_string(),
            });
        }
        Ok(ExtendedPoint { y, t, u })
    }

    /// Initial state with `u_0 = -H(y_0, t_0)`.
    pub fn from_initial(
        prob: &dyn LinearHamiltonianProblem,
        y: PhasePoint,
        t: f64,
    ) -> Result<Self> {
        let u = -prob.hamiltonian(&y, t)?;
        ExtendedPoint::new(y, t, u)
    }

    /// Flat coordinates `(q_1..q_n, p_1..p_n, t, u)`.
    pub fn coords(&self) -> Vec<f64> {
        let mut c = self.y.stacked();
        c.push(self.t);
        c.push(self.u);
        c
    }

    pub fn from_coords(c: &[f64]) -> Result<Self> {
        if c.len() < 4 || c.len() % 2 != 0 {
            return Err(Error::DimensionError {
                expected: 4,
                found: c.len(),
            });
        }
        let dim = c.len() - 2;
        let y = PhasePoint::from_stacked(&c[..dim])?;
        ExtendedPoint::new(y, c[dim], c[dim + 1])
    }
}

/// A linear Hamiltonian problem supplies the coefficient matrix `A(t)` in
/// sp(2n) and its analytic time derivative `A'(t)`.
///
/// The derivative is supplied analytically rather than by differencing: the
/// auxiliary-variable updates need `A'` at machine precision, and finite
/// differences would pollute long-time energy diagnostics.
pub trait LinearHamiltonianProblem {
    /// Degrees of freedom n (the phase space has dimension 2n).
    fn dof(&self) -> usize;

    /// Coefficient matrix `A(t)`, dimension 2n.
    fn coefficient(&self, t: f64) -> SquareMatrix;

    /// Analytic derivative `A'(t)`, dimension 2n.
    fn coefficient_derivative(&self, t: f64) -> SquareMatrix;

    fn dim(&self) -> usize {
        2 * self.dof()
    }

    fn structure(&self) -> StructureMatrix {
        StructureMatrix::new(self.dof())
    }

    /// `H(y, t) = -y^T J A(t) y / 2`.
    fn hamiltonian(&self, y: &PhasePoint, t: f64) -> Result<f64> {
        quadratic_form(self, &self.coefficient(t), y)
    }

    /// `dH/dt (y, t) = -y^T J A'(t) y / 2`.
    fn hamiltonian_time_derivative(&self, y: &PhasePoint, t: f64) -> Result<f64> {
        quadratic_form(self, &self.coefficient_derivative(t), y)
    }

    /// Right-hand side in extended phase space, ordered `(dq, dp, dt, du)`:
    /// the `(q, p)` block is `A(t) y`, time advances at unit rate, and
    /// `du/dt = -dH/dt`.
    fn extended_vector_field(&self, z: &ExtendedPoint) -> Result<Vec<f64>> {
        if z.y.n() != self.dof() {
            return Err(Error::DimensionError {
                expected: self.dof(),
                found: z.y.n(),
            });
        }
        let a = self.coefficient(z.t);
        let mut rates = a.apply(&z.y.stacked());
        rates.push(1.0);
        rates.push(-self.hamiltonian_time_derivative(&z.y, z.t)?);
        Ok(rates)
    }

    /// Extended Hamiltonian `K(z) = H(y, t) + u`.
    fn extended_hamiltonian(&self, z: &ExtendedPoint) -> Result<f64> {
        Ok(self.hamiltonian(&z.y, z.t)? + z.u)
    }

    /// Checks at the sampled times that `A(t)` lies in sp(2n)
    /// (`J A + A^T J = 0` to 1e-13) and that the supplied derivative matches
    /// a central finite difference of the coefficient to 1e-6.
    fn validate_at(&self, times: &[f64]) -> Result<()> {
        let j = self.structure();
        for &t in times {
            let a = self.coefficient(t);
            if a.dim() != self.dim() {
                return Err(Error::DimensionError {
                    expected: self.dim(),
                    found: a.dim(),
                });
            }
            let lhs = &(j.matrix() * &a) + &(&a.transpose() * j.matrix());
            if lhs.max_abs() > 1e-13 {
                return Err(Error::ConfigError {
                    context: format!(
                        "coefficient at t = {t} leaves sp(2n): ||JA + A^T J|| = {:.3e}",
                        lhs.max_abs()
                    ),
                });
            }
            let fd_step = 1e-5;
            let fd = (&self.coefficient(t + fd_step) - &self.coefficient(t - fd_step))
                .scale(0.5 / fd_step);
            let diff = (&fd - &self.coefficient_derivative(t)).max_abs();
            if diff > 1e-6 {
                return Err(Error::ConfigError {
                    context: format!(
                        "coefficient derivative at t = {t} disagrees with finite difference by {diff:.3e}"
                    ),
                });
            }
        }
        Ok(())
    }
}

fn quadratic_form(
    prob: &(impl LinearHamiltonianProblem + ?Sized),
    m: &SquareMatrix,
    y: &PhasePoint,
) -> Result<f64> {
    if y.n() != prob.dof() {
        return Err(Error::DimensionError {
            expected: prob.dof(),
            found: y.n(),
        });
    }
    let j = prob.structure();
    let stacked = y.stacked();
    let my = m.apply(&stacked);
    let jmy = j.apply(&my);
    let dot: f64 = stacked.iter().zip(&jmy).map(|(a, b)| a * b).sum();
    Ok(-0.5 * dot)
}

/// Harmonic oscillator with a slow periodic stiffness perturbation:
/// `H = ((1 + eps sin(alpha t)) q^T q + p^T p) / 2`, i.e.
/// `A(t) = [[0, I], [-(1 + eps sin(alpha t)) I, 0]]`.
#[derive(Debug, Clone, Copy)]
pub struct PerturbedOscillator {
    n: usize,
    epsilon: f64,
    alpha: f64,
}

impl PerturbedOscillator {
    pub fn new(n: usize, epsilon: f64, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::ConfigError {
                context: "oscillator needs at least one degree of freedom".to_string(),
            });
        }
        if !(epsilon > 0.0 && epsilon < 1.0) || !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::ConfigError {
                context: format!(
                    "perturbation parameters must satisfy 0 < eps, alpha < 1 (got eps = {epsilon}, alpha = {alpha})"
                ),
            });
        }
        Ok(PerturbedOscillator { n, epsilon, alpha })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn stiffness(&self, t: f64) -> f64 {
        1.0 + self.epsilon * (self.alpha * t).sin()
    }
}

impl LinearHamiltonianProblem for PerturbedOscillator {
    fn dof(&self) -> usize {
        self.n
    }

    fn coefficient(&self, t: f64) -> SquareMatrix {
        let n = self.n;
        let kappa = self.stiffness(t);
        SquareMatrix::from_fn(2 * n, |i, j| {
            if i < n && j == n + i {
                1.0
            } else if i >= n && j == i - n {
                -kappa
            } else {
                0.0
            }
        })
        .expect("finite entries")
    }

    fn coefficient_derivative(&self, t: f64) -> SquareMatrix {
        let n = self.n;
        let rate = -self.epsilon * self.alpha * (self.alpha * t).cos();
        SquareMatrix::from_fn(2 * n, |i, j| {
            if i >= n && j == i - n {
                rate
            } else {
                0.0
            }
        })
        .expect("finite entries")
    }
}

/// Problem defined by a pair of coefficient closures; used for autonomous
/// and custom test problems.
pub struct CoefficientPair<A, D>
where
    A: Fn(f64) -> SquareMatrix,
    D: Fn(f64) -> SquareMatrix,
{
    n: usize,
    coefficient: A,
    derivative: D,
}

impl<A, D> CoefficientPair<A, D>
where
    A: Fn(f64) -> SquareMatrix,
    D: Fn(f64) -> SquareMatrix,
{
    pub fn new(n: usize, coefficient: A, derivative: D) -> Self {
        CoefficientPair {
            n,
            coefficient,
            derivative,
        }
    }
}

impl<A, D> LinearHamiltonianProblem for CoefficientPair<A, D>
where
    A: Fn(f64) -> SquareMatrix,
    D: Fn(f64) -> SquareMatrix,
{
    fn dof(&self) -> usize {
        self.n
    }

    fn coefficient(&self, t: f64) -> SquareMatrix {
        (self.coefficient)(t)
    }

    fn coefficient_derivative(&self, t: f64) -> SquareMatrix {
        (self.derivative)(t)
    }
}

/// Autonomous problem with a constant coefficient matrix.
pub struct ConstantCoefficient {
    a: SquareMatrix,
}

impl ConstantCoefficient {
    pub fn new(a: SquareMatrix) -> Result<Self> {
        if a.dim() % 2 != 0 || a.dim() == 0 {
            return Err(Error::DimensionError {
                expected: a.dim() + 1,
                found: a.dim(),
            });
        }
        Ok(ConstantCoefficient { a })
    }
}

impl LinearHamiltonianProblem for ConstantCoefficient {
    fn dof(&self) -> usize {
        self.a.dim() / 2
    }

    fn coefficient(&self, _t: f64) -> SquareMatrix {
        self.a.clone()
    }

    fn coefficient_derivative(&self, _t: f64) -> SquareMatrix {
        SquareMatrix::zeros(self.a.dim())
    }
}
