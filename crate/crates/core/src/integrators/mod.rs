//! The method zoo: exponential one-step maps with canonical auxiliary
//! updates, Runge-Kutta methods in extended phase space, Kahan's method,
//! symplectic Euler, two deliberately non-canonical exponential variants,
//! and triple-jump compositions.
//!
//! Every method advances time by exactly `t + h` per step. Methods are
//! selected by string id (see [`Scheme::from_id`]); descriptors carry the
//! order and the canonical/symmetric/exponential property flags that drive
//! the verification suites and the benchmark table.

mod exponential;
mod rk;
pub mod tableau;

pub use exponential::{
    canonical_u_update, step_exp_noncan, step_exp_sym_noncan, step_lie_euler, step_lie_gauss,
    step_lie_midpoint, step_projection, SYMPLECTIC_PRECONDITION,
};
pub use rk::{step_kahan, step_rk_extended, step_symplectic_euler};
pub use tableau::ButcherTableau;

use crate::error::{Error, Result};
use crate::model::{ExtendedPoint, LinearHamiltonianProblem};

/// Method identity plus the property flags of the benchmark table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDescriptor {
    pub id: String,
    pub order: u32,
    pub canonical: bool,
    pub symmetric: bool,
    pub exponential: bool,
}

impl MethodDescriptor {
    pub fn flags(&self) -> String {
        let mut s = String::new();
        if self.canonical {
            s.push('C');
        }
        if self.symmetric {
            s.push('S');
        }
        if self.exponential {
            s.push('E');
        }
        s
    }
}

/// Result of one step: the new extended state plus optional diagnostics.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub z_next: ExtendedPoint,
    pub diagnostics: Option<StepDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub stages: u32,
    pub solver_iterations: u32,
    /// `||M^T J M - J||_F` of the step matrix, when the method exposes one.
    pub map_symplectic_residual: Option<f64>,
}

/// The base one-step methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    LieEuler,
    LieMidpoint,
    LieGauss,
    GaussLegendre4,
    Midpoint,
    Kahan,
    Projection,
    Lobatto3c,
    Radau2a,
    SymplecticEuler,
    ExpNonCan,
    ExpSymNonCan,
}

impl Method {
    pub const ALL: [Method; 12] = [
        Method::LieEuler,
        Method::LieMidpoint,
        Method::LieGauss,
        Method::GaussLegendre4,
        Method::Midpoint,
        Method::Kahan,
        Method::Projection,
        Method::Lobatto3c,
        Method::Radau2a,
        Method::SymplecticEuler,
        Method::ExpNonCan,
        Method::ExpSymNonCan,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Method::LieEuler => "lie_euler",
            Method::LieMidpoint => "lie_midpoint",
            Method::LieGauss => "lie_gauss",
            Method::GaussLegendre4 => "gauss_legendre4",
            Method::Midpoint => "midpoint",
            Method::Kahan => "kahan",
            Method::Projection => "projection",
            Method::Lobatto3c => "lobatto3c",
            Method::Radau2a => "radau2a",
            Method::SymplecticEuler => "symplectic_euler",
            Method::ExpNonCan => "exp_noncan",
            Method::ExpSymNonCan => "exp_sym_noncan",
        }
    }

    fn properties(&self) -> (u32, bool, bool, bool) {
        // (order, canonical, symmetric, exponential)
        match self {
            Method::LieEuler => (1, true, false, true),
            Method::LieMidpoint => (2, true, true, true),
            Method::LieGauss => (4, true, true, true),
            Method::GaussLegendre4 => (4, true, true, false),
            Method::Midpoint => (2, true, true, false),
            Method::Kahan => (2, false, true, false),
            Method::Projection => (1, true, false, false),
            Method::Lobatto3c => (2, false, false, false),
            Method::Radau2a => (3, false, false, false),
            Method::SymplecticEuler => (1, true, false, false),
            Method::ExpNonCan => (1, false, false, true),
            Method::ExpSymNonCan => (1, false, true, true),
        }
    }

    pub fn descriptor(&self) -> MethodDescriptor {
        let (order, canonical, symmetric, exponential) = self.properties();
        MethodDescriptor {
            id: self.id().to_string(),
            order,
            canonical,
            symmetric,
            exponential,
        }
    }

    /// Whether the method carries a genuine auxiliary update; symplectic
    /// Euler and the non-canonical exponential variants copy `u` unchanged.
    pub fn has_u_update(&self) -> bool {
        !matches!(
            self,
            Method::SymplecticEuler | Method::ExpNonCan | Method::ExpSymNonCan
        )
    }

    fn step(
        &self,
        prob: &dyn LinearHamiltonianProblem,
        z: &ExtendedPoint,
        h: f64,
    ) -> Result<StepResult> {
        match self {
            Method::LieEuler => step_lie_euler(prob, z, h),
            Method::LieMidpoint => step_lie_midpoint(prob, z, h),
            Method::LieGauss => step_lie_gauss(prob, z, h),
            Method::GaussLegendre4 => {
                step_rk_extended(prob, z, h, &ButcherTableau::gauss_legendre4())
            }
            Method::Midpoint => step_rk_extended(prob, z, h, &ButcherTableau::midpoint()),
            Method::Kahan => step_kahan(prob, z, h),
            Method::Projection => step_projection(prob, z, h),
            Method::Lobatto3c => step_rk_extended(prob, z, h, &ButcherTableau::lobatto_iiic()),
            Method::Radau2a => step_rk_extended(prob, z, h, &ButcherTableau::radau_iia()),
            Method::SymplecticEuler => step_symplectic_euler(prob, z, h),
            Method::ExpNonCan => step_exp_noncan(prob, z, h),
            Method::ExpSymNonCan => step_exp_sym_noncan(prob, z, h),
        }
    }
}

/// A runnable scheme: a base method or its triple-jump composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Single(Method),
    TripleJump(Method),
}

/// Substep fractions of the triple jump for a symmetric base of even order
/// p: `g1 = g3 = 1 / (2 - 2^(1/(p+1)))`, `g2 = 1 - 2 g1`.
pub fn triple_jump_gammas(p: u32) -> (f64, f64) {
    let g1 = 1.0 / (2.0 - 2.0_f64.powf(1.0 / (p as f64 + 1.0)));
    (g1, 1.0 - 2.0 * g1)
}

/// Wraps a base method in the triple jump. The composition runs for any
/// base; the descriptor only claims the raised order when the base is
/// symmetric of even order.
pub fn triple_jump(base: Method) -> Scheme {
    Scheme::TripleJump(base)
}

impl Scheme {
    /// The methods of the benchmark table, in its row order.
    pub fn table_methods() -> Vec<Scheme> {
        vec![
            Scheme::Single(Method::LieGauss),
            Scheme::TripleJump(Method::LieMidpoint),
            Scheme::Single(Method::LieMidpoint),
            Scheme::Single(Method::LieEuler),
            Scheme::Single(Method::GaussLegendre4),
            Scheme::TripleJump(Method::Midpoint),
            Scheme::Single(Method::Midpoint),
            Scheme::Single(Method::ExpSymNonCan),
            Scheme::TripleJump(Method::Kahan),
            Scheme::Single(Method::Projection),
            Scheme::Single(Method::Kahan),
            Scheme::Single(Method::ExpNonCan),
            Scheme::Single(Method::SymplecticEuler),
            Scheme::Single(Method::Radau2a),
        ]
    }

    /// Every selectable scheme: the twelve base methods plus the three
    /// compositions of the benchmark table.
    pub fn all() -> Vec<Scheme> {
        let mut v: Vec<Scheme> = Method::ALL.iter().copied().map(Scheme::Single).collect();
        v.extend([
            Scheme::TripleJump(Method::LieMidpoint),
            Scheme::TripleJump(Method::Midpoint),
            Scheme::TripleJump(Method::Kahan),
        ]);
        v
    }

    pub fn from_id(id: &str) -> Result<Scheme> {
        if let Some(base) = id.strip_suffix("_triple_jump") {
            return Method::ALL
                .iter()
                .find(|m| m.id() == base)
                .map(|m| Scheme::TripleJump(*m))
                .ok_or_else(|| Error::UnknownMethod { id: id.to_string() });
        }
        Method::ALL
            .iter()
            .find(|m| m.id() == id)
            .map(|m| Scheme::Single(*m))
            .ok_or_else(|| Error::UnknownMethod { id: id.to_string() })
    }

    pub fn id(&self) -> String {
        match self {
            Scheme::Single(m) => m.id().to_string(),
            Scheme::TripleJump(m) => format!("{}_triple_jump", m.id()),
        }
    }

    pub fn descriptor(&self) -> MethodDescriptor {
        match self {
            Scheme::Single(m) => m.descriptor(),
            Scheme::TripleJump(m) => {
                let base = m.descriptor();
                // The order gain requires a symmetric even-order base; an
                // invalid composition keeps the base order (claim void).
                let order = if base.symmetric && base.order % 2 == 0 {
                    base.order + 2
                } else {
                    base.order
                };
                MethodDescriptor {
                    id: self.id(),
                    order,
                    ..base
                }
            }
        }
    }

    pub fn has_u_update(&self) -> bool {
        match self {
            Scheme::Single(m) | Scheme::TripleJump(m) => m.has_u_update(),
        }
    }

    /// Advances the extended state by one step of size `h`.
    ///
    /// `h` may be negative: adjoint checks and the triple jump's middle
    /// substep run the maps backwards in time.
    pub fn step(
        &self,
        prob: &dyn LinearHamiltonianProblem,
        z: &ExtendedPoint,
        h: f64,
    ) -> Result<StepResult> {
        if h == 0.0 || !h.is_finite() {
            return Err(Error::ConfigError {
                context: format!("step size must be finite and nonzero (got {h})"),
            });
        }
        if z.y.n() != prob.dof() {
            return Err(Error::DimensionError {
                expected: prob.dof(),
                found: z.y.n(),
            });
        }
        match self {
            Scheme::Single(m) => m.step(prob, z, h),
            Scheme::TripleJump(m) => {
                let base = m.descriptor();
                let p = if base.symmetric && base.order % 2 == 0 {
                    base.order
                } else {
                    2
                };
                let (g1, g2) = triple_jump_gammas(p);
                let s1 = m.step(prob, z, g1 * h)?;
                let s2 = m.step(prob, &s1.z_next, g2 * h)?;
                let s3 = m.step(prob, &s2.z_next, g1 * h)?;
                let stages = [&s1, &s2, &s3]
                    .iter()
                    .filter_map(|s| s.diagnostics.as_ref())
                    .map(|d| d.stages)
                    .sum();
                let residual = [&s1, &s2, &s3]
                    .iter()
                    .filter_map(|s| s.diagnostics.as_ref())
                    .filter_map(|d| d.map_symplectic_residual)
                    .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
                let mut z_next = s3.z_next;
                // The fractions sum to one; pin the time advance to a
                // single addition like every other method.
                z_next.t = z.t + h;
                Ok(StepResult {
                    z_next,
                    diagnostics: Some(StepDiagnostics {
                        stages,
                        solver_iterations: 0,
                        map_symplectic_residual: residual,
                    }),
                })
            }
        }
    }

    /// Integrates `steps` fixed steps, returning the final state.
    pub fn integrate(
        &self,
        prob: &dyn LinearHamiltonianProblem,
        z0: &ExtendedPoint,
        h: f64,
        steps: usize,
    ) -> Result<ExtendedPoint> {
        let mut z = z0.clone();
        for _ in 0..steps {
            z = self.step(prob, &z, h)?.z_next;
        }
        Ok(z)
    }
}
