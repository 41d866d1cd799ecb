//! Numerical verification of structural claims about the one-step maps:
//! canonicity of the extended map (symplecticity of the phase-space
//! Jacobian, the auxiliary-gradient condition, and the full extended-space
//! symplecticity), exactness on autonomous problems, symmetry under adjoint
//! composition, convergence-order estimation, and conservation of the
//! extended Hamiltonian.

use crate::error::{Error, Result};
use crate::integrators::{Method, Scheme};
use crate::matkernels::{mat_exp, SquareMatrix, StructureMatrix, DEFAULT_TOL};
use crate::model::{ConstantCoefficient, ExtendedPoint, LinearHamiltonianProblem, PhasePoint};

/// Residuals of the canonical-transformation conditions at one point.
///
/// `w_condition_residual` and `extended_residual` are absent for methods
/// that copy the auxiliary variable unchanged: without an auxiliary update
/// only the phase-space condition applies.
#[derive(Debug, Clone)]
pub struct CanonicityReport {
    /// `||Y_y^T J Y_y - J||_F` for the phase-space block of the Jacobian.
    pub symplectic_residual_yy: f64,
    /// `||W_y + Y_t^T J Y_y||_F`, the gradient condition on the auxiliary
    /// update.
    pub w_condition_residual: Option<f64>,
    /// Full symplecticity residual of the extended Jacobian in the
    /// `(q, t, p, u)` ordering.
    pub extended_residual: Option<f64>,
}

/// Richardson order estimate from three step sizes.
#[derive(Debug, Clone)]
pub struct OrderEstimate {
    pub measured_order: f64,
    pub step_sizes: [f64; 3],
    pub errors: [f64; 3],
}

/// Structure matrix of `dp ^ dq + du ^ dt` in the `(q, t, p, u)` ordering.
///
/// Grouping positions `(q, t)` before momenta `(p, u)` makes this exactly
/// the canonical `J_{n+1}`.
pub fn extended_structure_matrix(n: usize) -> SquareMatrix {
    StructureMatrix::new(n + 1).matrix().clone()
}

/// Permutation taking internal coordinates `(q, p, t, u)` to the block
/// ordering `(q, t, p, u)`: `out[k] = coords[perm[k]]`.
pub fn reorder_to_qtpu(n: usize) -> Vec<usize> {
    let mut perm = Vec::with_capacity(2 * n + 2);
    perm.extend(0..n); // q
    perm.push(2 * n); // t
    perm.extend(n..2 * n); // p
    perm.push(2 * n + 1); // u
    perm
}

/// Full Jacobian of the step map by central finite differences, columns and
/// rows in internal `(q, p, t, u)` ordering. The difference step is scaled
/// by the component magnitude when that exceeds one.
fn step_jacobian(
    scheme: Scheme,
    prob: &dyn LinearHamiltonianProblem,
    z: &ExtendedPoint,
    h: f64,
    fd_step: f64,
) -> Result<SquareMatrix> {
    let dim = 2 * prob.dof() + 2;
    let base = z.coords();
    let mut jac = vec![0.0; dim * dim];
    for col in 0..dim {
        let delta = fd_step * base[col].abs().max(1.0);
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[col] += delta;
        minus[col] -= delta;
        let zp = scheme
            .step(prob, &ExtendedPoint::from_coords(&plus)?, h)?
            .z_next
            .coords();
        let zm = scheme
            .step(prob, &ExtendedPoint::from_coords(&minus)?, h)?
            .z_next
            .coords();
        for row in 0..dim {
            jac[row * dim + col] = (zp[row] - zm[row]) / (2.0 * delta);
        }
    }
    SquareMatrix::from_entries(dim, jac)
}

/// Evaluates the canonical-transformation conditions for one step of the
/// scheme at `z` via finite-difference Jacobians.
pub fn check_canonicity(
    scheme: Scheme,
    prob: &dyn LinearHamiltonianProblem,
    z: &ExtendedPoint,
    h: f64,
    fd_step: f64,
) -> Result<CanonicityReport> {
    if !(1e-7..=1e-4).contains(&fd_step) {
        return Err(Error::ConfigError {
            context: format!("finite-difference step {fd_step} outside [1e-7, 1e-4]"),
        });
    }
    let n = prob.dof();
    let d = 2 * n;
    let j = prob.structure();
    let jac = step_jacobian(scheme, prob, z, h, fd_step)?;

    // Phase-space block Y_y (rows and columns q, p of the internal order).
    let y_block = SquareMatrix::from_fn(d, |r, c| jac.get(r, c))?;
    let jm = j.matrix();
    let symplectic_residual_yy = (&(&(&y_block.transpose() * jm) * &y_block) - jm).frobenius_norm();

    if !scheme.has_u_update() {
        return Ok(CanonicityReport {
            symplectic_residual_yy,
            w_condition_residual: None,
            extended_residual: None,
        });
    }

    // Gradient condition: W_y = -Y_t^T J Y_y, with W_y read off the u-row
    // of the Jacobian and Y_t from the t-column.
    let y_t: Vec<f64> = (0..d).map(|r| jac.get(r, d)).collect();
    let w_y: Vec<f64> = (0..d).map(|c| jac.get(d + 1, c)).collect();
    let jy = jm * &y_block;
    // (Y_t^T J Y_y)_c = sum_r Y_t[r] (J Y_y)[r, c]
    let mut residual_sq = 0.0;
    for c in 0..d {
        let mut v = 0.0;
        for r in 0..d {
            v += y_t[r] * jy.get(r, c);
        }
        residual_sq += (w_y[c] + v) * (w_y[c] + v);
    }
    let w_condition_residual = Some(residual_sq.sqrt());

    // Full extended symplecticity in the (q, t, p, u) ordering.
    let perm = reorder_to_qtpu(n);
    let dim = d + 2;
    let z_block = SquareMatrix::from_fn(dim, |r, c| jac.get(perm[r], perm[c]))?;
    let j_ext = extended_structure_matrix(n);
    let extended_residual =
        Some((&(&(&z_block.transpose() * &j_ext) * &z_block) - &j_ext).frobenius_norm());

    Ok(CanonicityReport {
        symplectic_residual_yy,
        w_condition_residual,
        extended_residual,
    })
}

/// Relative defect `||step(y) - exp(hA) y|| / ||y||` of one step on the
/// autonomous problem with constant coefficient `a`.
pub fn check_exponential_exactness(
    scheme: Scheme,
    a: &SquareMatrix,
    y: &PhasePoint,
    t: f64,
    h: f64,
) -> Result<f64> {
    let prob = ConstantCoefficient::new(a.clone())?;
    let z = ExtendedPoint::from_initial(&prob, y.clone(), t)?;
    let stepped = scheme.step(&prob, &z, h)?.z_next;
    let exact = mat_exp(&a.scale(h), DEFAULT_TOL)?.apply(&y.stacked());
    let defect: f64 = stepped
        .y
        .stacked()
        .iter()
        .zip(&exact)
        .map(|(g, e)| (g - e) * (g - e))
        .sum::<f64>()
        .sqrt();
    Ok(defect / y.norm())
}

/// Max-norm defect of the adjoint round trip `step_{-h} . step_h` over the
/// components the method updates (phase space and time always; the
/// auxiliary variable only when the method updates it).
pub fn check_symmetry(
    scheme: Scheme,
    prob: &dyn LinearHamiltonianProblem,
    z: &ExtendedPoint,
    h: f64,
) -> Result<f64> {
    let fwd = scheme.step(prob, z, h)?.z_next;
    let back = scheme.step(prob, &fwd, -h)?.z_next;
    let a = back.coords();
    let b = z.coords();
    let components = if scheme.has_u_update() {
        a.len()
    } else {
        a.len() - 1
    };
    Ok(a[..components]
        .iter()
        .zip(&b[..components])
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Richardson order estimation: integrates with `h0`, `h0/2`, `h0/4`
/// against a fine reference and fits the decay rate of the final-time
/// phase-space error.
///
/// The reference is the two-stage Gauss Magnus method at `h0/64`, whose
/// order is at least that of every method in the zoo; for that method
/// itself the step-size gap still leaves the reference error four orders
/// below the coarsest run.
pub fn estimate_order(
    scheme: Scheme,
    prob: &dyn LinearHamiltonianProblem,
    z0: &ExtendedPoint,
    t_end: f64,
    h0: f64,
) -> Result<OrderEstimate> {
    let span = t_end - z0.t;
    let steps = span / h0;
    if h0 <= 0.0 || steps <= 0.0 || (steps - steps.round()).abs() > 1e-9 * steps.abs().max(1.0) {
        return Err(Error::ConfigError {
            context: format!(
                "interval [{}, {t_end}] is not a whole number of steps of {h0}",
                z0.t
            ),
        });
    }
    let base_steps = steps.round() as usize;

    let reference = Scheme::Single(Method::LieGauss)
        .integrate(prob, z0, h0 / 64.0, base_steps * 64)?
        .y
        .stacked();

    let mut errors = [0.0; 3];
    let mut step_sizes = [0.0; 3];
    for k in 0..3 {
        let h = h0 / 2.0_f64.powi(k as i32);
        let end = scheme.integrate(prob, z0, h, base_steps << k)?.y.stacked();
        errors[k] = end
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        step_sizes[k] = h;
    }
    if !(errors[0] > errors[1] && errors[1] > errors[2]) {
        return Err(Error::NonConvergence {
            context: format!("errors not decreasing: {errors:?}"),
        });
    }
    let measured_order = 0.5 * ((errors[0] / errors[1]).log2() + (errors[1] / errors[2]).log2());
    Ok(OrderEstimate {
        measured_order,
        step_sizes,
        errors,
    })
}

/// Maximum drift `max_k |K_k - K_0|` of the extended Hamiltonian along a
/// trajectory. Only meaningful for methods with an auxiliary update.
pub fn check_k_conservation(
    scheme: Scheme,
    prob: &dyn LinearHamiltonianProblem,
    z0: &ExtendedPoint,
    steps: usize,
    h: f64,
) -> Result<f64> {
    if !scheme.has_u_update() {
        return Err(Error::NotApplicable {
            context: format!("{} has no auxiliary update", scheme.id()),
        });
    }
    let k0 = prob.extended_hamiltonian(z0)?;
    let mut z = z0.clone();
    let mut max_drift = 0.0_f64;
    for _ in 0..steps {
        z = scheme.step(prob, &z, h)?.z_next;
        max_drift = max_drift.max((prob.extended_hamiltonian(&z)? - k0).abs());
    }
    Ok(max_drift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkernels::project_sp;
    use crate::model::{CoefficientPair, PerturbedOscillator};

    fn benchmark_problem() -> PerturbedOscillator {
        PerturbedOscillator::new(4, 0.1, 0.123).unwrap()
    }

    fn benchmark_state(prob: &PerturbedOscillator) -> ExtendedPoint {
        let y = PhasePoint::new(vec![1.0, 2.0, 3.0, 4.0], vec![4.0, 1.0, 2.0, 3.0]).unwrap();
        ExtendedPoint::from_initial(prob, y, 0.0).unwrap()
    }

    fn sp_matrix(n: usize, seed: u64) -> SquareMatrix {
        let j = StructureMatrix::new(n);
        let raw = SquareMatrix::from_fn(2 * n, |i, k| {
            (((seed as usize + 1) * (i * 2 * n + k + 1)) as f64).sin()
        })
        .unwrap();
        project_sp(&raw, &j).unwrap()
    }

    /// Time-dependent coefficient whose square is not scalar, so the
    /// deliberately broken exponential methods actually leave sp(2n).
    fn generic_problem() -> impl LinearHamiltonianProblem {
        let x0 = sp_matrix(2, 1);
        let x1 = sp_matrix(2, 2);
        CoefficientPair::new(
            2,
            move |t: f64| &x0 + &x1.scale(t.sin()),
            move |t: f64| sp_matrix(2, 2).scale(t.cos()),
        )
    }

    #[test]
    fn extended_structure_agrees_with_permuted_block_form() {
        // Assemble the (q, p, t, u)-ordered structure matrix directly and
        // conjugate by the reordering permutation.
        let n = 3;
        let d = 2 * n + 2;
        let mut entries = vec![0.0; d * d];
        for i in 0..n {
            entries[i * d + (n + i)] = 1.0; // dp ^ dq block
            entries[(n + i) * d + i] = -1.0;
        }
        entries[(2 * n) * d + (2 * n + 1)] = 1.0; // du ^ dt block
        entries[(2 * n + 1) * d + (2 * n)] = -1.0;
        let block = SquareMatrix::from_entries(d, entries).unwrap();

        let perm = reorder_to_qtpu(n);
        let permuted = SquareMatrix::from_fn(d, |r, c| block.get(perm[r], perm[c])).unwrap();
        assert_eq!(permuted, extended_structure_matrix(n));
    }

    #[test]
    fn lie_gauss_passes_all_canonicity_conditions() {
        let prob = benchmark_problem();
        let z = benchmark_state(&prob);
        let report =
            check_canonicity(Scheme::Single(Method::LieGauss), &prob, &z, 0.3, 1e-5).unwrap();
        assert!(report.symplectic_residual_yy <= 1e-6);
        assert!(report.w_condition_residual.unwrap() <= 1e-6);
        assert!(report.extended_residual.unwrap() <= 1e-6);
    }

    #[test]
    fn lie_euler_w_condition_trivial_on_autonomous_problem() {
        let prob = ConstantCoefficient::new(sp_matrix(2, 9).scale(0.5)).unwrap();
        let y = PhasePoint::new(vec![0.6, -0.2], vec![0.1, 0.8]).unwrap();
        let z = ExtendedPoint::from_initial(&prob, y, 0.0).unwrap();
        let report =
            check_canonicity(Scheme::Single(Method::LieEuler), &prob, &z, 0.3, 1e-5).unwrap();
        assert!(report.w_condition_residual.unwrap() <= 1e-6);
    }

    #[test]
    fn exp_noncan_fails_symplecticity_on_generic_problem() {
        let prob = generic_problem();
        let y = PhasePoint::new(vec![1.0, 0.3], vec![-0.4, 0.8]).unwrap();
        let z = ExtendedPoint::from_initial(&prob, y, 0.4).unwrap();
        let report =
            check_canonicity(Scheme::Single(Method::ExpNonCan), &prob, &z, 0.3, 1e-5).unwrap();
        assert!(report.symplectic_residual_yy > 1e-8);
        assert!(report.w_condition_residual.is_none());
        assert!(report.extended_residual.is_none());
    }

    #[test]
    fn canonicity_rejects_out_of_range_fd_step() {
        let prob = benchmark_problem();
        let z = benchmark_state(&prob);
        assert!(check_canonicity(Scheme::Single(Method::LieGauss), &prob, &z, 0.3, 1e-3).is_err());
    }

    #[test]
    fn exactness_split_between_exponential_and_rk_methods() {
        let a = sp_matrix(4, 5);
        let y = PhasePoint::new(vec![1.0, 2.0, 3.0, 4.0], vec![4.0, 1.0, 2.0, 3.0]).unwrap();
        let exact =
            check_exponential_exactness(Scheme::Single(Method::LieGauss), &a, &y, 0.0, 0.3)
                .unwrap();
        assert!(exact <= 1e-11, "lie_gauss defect {exact}");
        let sym =
            check_exponential_exactness(Scheme::Single(Method::ExpSymNonCan), &a, &y, 0.0, 0.3)
                .unwrap();
        assert!(sym <= 1e-11, "exp_sym_noncan defect {sym}");
        let midpoint =
            check_exponential_exactness(Scheme::Single(Method::Midpoint), &a, &y, 0.0, 0.3)
                .unwrap();
        assert!(midpoint > 1e-6, "midpoint defect {midpoint}");
    }

    #[test]
    fn symmetry_defects_follow_the_flags() {
        let prob = benchmark_problem();
        let z = benchmark_state(&prob);
        let h = 0.3;
        let midpoint = check_symmetry(Scheme::Single(Method::Midpoint), &prob, &z, h).unwrap();
        assert!(midpoint <= 1e-12, "midpoint defect {midpoint}");
        let lie_euler = check_symmetry(Scheme::Single(Method::LieEuler), &prob, &z, h).unwrap();
        assert!(lie_euler > 1e-4, "lie_euler defect {lie_euler}");
        let lobatto = check_symmetry(Scheme::Single(Method::Lobatto3c), &prob, &z, h).unwrap();
        assert!(lobatto > 1e-6, "lobatto3c defect {lobatto}");
    }

    #[test]
    fn k_conservation_is_tight_for_exponential_canonical_methods_on_autonomous_problems() {
        let a = SquareMatrix::from_rows(&[
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, 1.3],
            &[-1.0, 0.0, 0.0, 0.0],
            &[0.0, -1.3, 0.0, 0.0],
        ])
        .unwrap();
        let prob = ConstantCoefficient::new(a).unwrap();
        let y = PhasePoint::new(vec![1.0, 2.0], vec![0.5, -0.5]).unwrap();
        let z0 = ExtendedPoint::from_initial(&prob, y, 0.0).unwrap();
        for scheme in [
            Scheme::Single(Method::LieEuler),
            Scheme::Single(Method::LieGauss),
        ] {
            let drift = check_k_conservation(scheme, &prob, &z0, 100, 0.3).unwrap();
            assert!(drift <= 1e-10, "{} drift {drift}", scheme.id());
        }
    }

    #[test]
    fn k_conservation_rejects_methods_without_auxiliary_update() {
        let prob = benchmark_problem();
        let z0 = benchmark_state(&prob);
        assert!(matches!(
            check_k_conservation(Scheme::Single(Method::SymplecticEuler), &prob, &z0, 10, 0.3),
            Err(Error::NotApplicable { .. })
        ));
    }

    #[test]
    fn order_estimate_for_lie_euler() {
        let prob = benchmark_problem();
        let z0 = benchmark_state(&prob);
        let est = estimate_order(Scheme::Single(Method::LieEuler), &prob, &z0, 8.0, 0.1).unwrap();
        assert!(
            (0.8..=1.2).contains(&est.measured_order),
            "measured {}",
            est.measured_order
        );
    }

    #[test]
    fn order_estimate_rejects_fractional_step_counts() {
        let prob = benchmark_problem();
        let z0 = benchmark_state(&prob);
        assert!(estimate_order(Scheme::Single(Method::LieEuler), &prob, &z0, 10.0, 0.3).is_err());
    }
}
