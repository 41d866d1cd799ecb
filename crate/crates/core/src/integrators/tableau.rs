//! Butcher tableaux for the Runge-Kutta methods in the zoo, plus the
//! symplectic-partner construction used by the canonicity checks.

use crate::error::{Error, Result};

/// Runge-Kutta coefficients `(a, b, c)` with `c_i = sum_j a_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    s: usize,
    a: Vec<f64>, // row-major s x s
    b: Vec<f64>,
    c: Vec<f64>,
}

impl ButcherTableau {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let s = b.len();
        if a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(Error::DimensionError {
                expected: s,
                found: a.len(),
            });
        }
        let c: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
        let flat: Vec<f64> = a.into_iter().flatten().collect();
        Ok(ButcherTableau { s, a: flat, b, c })
    }

    pub fn stages(&self) -> usize {
        self.s
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.s + j]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// Implicit midpoint: one stage, order 2.
    pub fn midpoint() -> Self {
        Self::new(vec![vec![0.5]], vec![1.0]).expect("static tableau")
    }

    /// Two-stage Gauss-Legendre collocation, order 4.
    pub fn gauss_legendre4() -> Self {
        let s3 = 3.0_f64.sqrt();
        Self::new(
            vec![
                vec![0.25, 0.25 - s3 / 6.0],
                vec![0.25 + s3 / 6.0, 0.25],
            ],
            vec![0.5, 0.5],
        )
        .expect("static tableau")
    }

    /// Two-stage Lobatto IIIC, order 2.
    pub fn lobatto_iiic() -> Self {
        Self::new(
            vec![vec![0.5, -0.5], vec![0.5, 0.5]],
            vec![0.5, 0.5],
        )
        .expect("static tableau")
    }

    /// Two-stage Radau IIA, order 3.
    pub fn radau_iia() -> Self {
        Self::new(
            vec![
                vec![5.0 / 12.0, -1.0 / 12.0],
                vec![0.75, 0.25],
            ],
            vec![0.75, 0.25],
        )
        .expect("static tableau")
    }

    /// Companion tableau of the symplectic partitioned pairing:
    /// `a_hat_ij = b_j - a_ji b_j / b_i` with the same weights.
    /// Requires all weights nonzero.
    pub fn symplectic_companion(&self) -> Result<ButcherTableau> {
        if self.b.iter().any(|&bi| bi == 0.0) {
            return Err(Error::ConfigError {
                context: "companion tableau needs nonzero weights".to_string(),
            });
        }
        let s = self.s;
        let mut a_hat = vec![0.0; s * s];
        for i in 0..s {
            for j in 0..s {
                a_hat[i * s + j] = self.b[j] - self.a(j, i) * self.b[j] / self.b[i];
            }
        }
        let c: Vec<f64> = (0..s)
            .map(|i| (0..s).map(|j| a_hat[i * s + j]).sum())
            .collect();
        Ok(ButcherTableau {
            s,
            a: a_hat,
            b: self.b.clone(),
            c,
        })
    }
}
