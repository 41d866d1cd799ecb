//! Long-time experiment pipeline: fixed-step trajectory runs with energy
//! bookkeeping, aligned reference solutions, block-maximum smoothing of the
//! energy error, the benchmark summary table with its three accuracy tiers,
//! and CSV emission.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::integrators::{MethodDescriptor, Scheme};
use crate::model::{ExtendedPoint, LinearHamiltonianProblem, PerturbedOscillator, PhasePoint};

/// Relative slack accepted when checking that an interval is a whole number
/// of steps; covers decimal step sizes that are not exactly representable.
const STEP_COUNT_TOL: f64 = 1e-9;

/// Full description of one experiment: problem parameters, initial data,
/// step sizes, methods, and the reference recipe.
///
/// The auxiliary variable is always initialized to `u0 = -H(q0, p0, t0)`.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub q0: Vec<f64>,
    pub p0: Vec<f64>,
    pub t0: f64,
    pub h: f64,
    pub t_end: f64,
    pub method_ids: Vec<String>,
    pub reference_method: String,
    pub reference_h: f64,
    pub block_size: usize,
}

impl ExperimentConfig {
    /// The long-horizon benchmark configuration: n = 4,
    /// q0 = (1, 2, 3, 4), p0 = (4, 1, 2, 3), alpha = 0.123, eps = 0.1,
    /// h = 0.3, reference at h = 0.02.
    ///
    /// The nominal horizon 50000 is not a whole number of steps of 0.3;
    /// the interval is rounded up to 50000.1 = 166667 steps.
    pub fn benchmark() -> Self {
        ExperimentConfig {
            n: 4,
            epsilon: 0.1,
            alpha: 0.123,
            q0: vec![1.0, 2.0, 3.0, 4.0],
            p0: vec![4.0, 1.0, 2.0, 3.0],
            t0: 0.0,
            h: 0.3,
            t_end: 50000.1,
            method_ids: Scheme::table_methods().iter().map(|s| s.id()).collect(),
            reference_method: "lie_gauss".to_string(),
            reference_h: 0.02,
            block_size: 500,
        }
    }

    /// The long-time demonstration configuration: alpha = 0.1, eps = 0.3,
    /// h = 0.3, reference at a tenth of the step.
    pub fn long_time_demo() -> Self {
        ExperimentConfig {
            n: 4,
            epsilon: 0.3,
            alpha: 0.1,
            q0: vec![1.0, 2.0, 3.0, 4.0],
            p0: vec![4.0, 1.0, 2.0, 3.0],
            t0: 0.0,
            h: 0.3,
            t_end: 3000.0,
            method_ids: vec!["lie_gauss".to_string()],
            reference_method: "lie_gauss".to_string(),
            reference_h: 0.03,
            block_size: 500,
        }
    }

    pub fn problem(&self) -> Result<PerturbedOscillator> {
        PerturbedOscillator::new(self.n, self.epsilon, self.alpha)
    }

    pub fn initial_state(&self) -> Result<ExtendedPoint> {
        let prob = self.problem()?;
        let y = PhasePoint::new(self.q0.clone(), self.p0.clone())?;
        ExtendedPoint::from_initial(&prob, y, self.t0)
    }

    /// Number of coarse steps; requires the interval to divide evenly.
    pub fn steps(&self) -> Result<usize> {
        whole_steps(self.t_end - self.t0, self.h)
    }

    /// Coarse samples per reference step, `h / reference_h`.
    pub fn reference_stride(&self) -> Result<usize> {
        whole_steps(self.h, self.reference_h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q0.len() != self.n || self.p0.len() != self.n {
            return Err(Error::ConfigError {
                context: format!(
                    "initial vectors must have length n = {} (got {}, {})",
                    self.n,
                    self.q0.len(),
                    self.p0.len()
                ),
            });
        }
        if self.h <= 0.0 || self.reference_h <= 0.0 {
            return Err(Error::ConfigError {
                context: "step sizes must be positive".to_string(),
            });
        }
        if self.block_size == 0 {
            return Err(Error::ConfigError {
                context: "block size must be positive".to_string(),
            });
        }
        self.steps()?;
        self.reference_stride()?;
        for id in &self.method_ids {
            Scheme::from_id(id)?;
        }
        Scheme::from_id(&self.reference_method)?;
        let prob = self.problem()?;
        prob.validate_at(&[self.t0, self.t0 + 0.37 * (self.t_end - self.t0), self.t_end])?;
        Ok(())
    }

    /// Parses the key-value configuration grammar:
    /// one `key = value` pair per line, `#` starts a comment, vectors are
    /// comma-separated, method lists are comma-separated ids.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::benchmark();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigError {
                context: format!("line {}: expected `key = value`, got `{raw}`", lineno + 1),
            })?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies one key-value override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |context: String| Error::ConfigError { context };
        let parse_f64 = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| bad(format!("`{key}`: not a number: `{v}`")))
        };
        match key {
            "n" => {
                self.n = value
                    .parse()
                    .map_err(|_| bad(format!("`n`: not an integer: `{value}`")))?
            }
            "epsilon" => self.epsilon = parse_f64(value)?,
            "alpha" => self.alpha = parse_f64(value)?,
            "q0" => self.q0 = parse_vector(value)?,
            "p0" => self.p0 = parse_vector(value)?,
            "t0" => self.t0 = parse_f64(value)?,
            "h" => self.h = parse_f64(value)?,
            "t_end" => self.t_end = parse_f64(value)?,
            "methods" => {
                self.method_ids = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "reference_method" => self.reference_method = value.to_string(),
            "reference_h" => self.reference_h = parse_f64(value)?,
            "block_size" => {
                self.block_size = value
                    .parse()
                    .map_err(|_| bad(format!("`block_size`: not an integer: `{value}`")))?
            }
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
        Ok(())
    }
}

fn parse_vector(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| Error::ConfigError {
                context: format!("vector entry `{s}` is not a number"),
            })
        })
        .collect()
}

fn whole_steps(span: f64, h: f64) -> Result<usize> {
    let ratio = span / h;
    if !(ratio > 0.0) || (ratio - ratio.round()).abs() > STEP_COUNT_TOL * ratio.abs().max(1.0) {
        return Err(Error::ConfigError {
            context: format!("{span} is not a positive whole number of steps of {h}"),
        });
    }
    Ok(ratio.round() as usize)
}

/// Per-sample energy record of one trajectory: times, the Hamiltonian, the
/// auxiliary variable and extended Hamiltonian when the method carries
/// them, and the aligned reference energies once attached.
#[derive(Debug, Clone)]
pub struct EnergySeries {
    pub times: Vec<f64>,
    pub h_values: Vec<f64>,
    pub u_values: Option<Vec<f64>>,
    pub k_values: Option<Vec<f64>>,
    pub h_reference: Option<Vec<f64>>,
}

impl EnergySeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn with_reference(mut self, reference: Vec<f64>) -> Result<Self> {
        if reference.len() != self.times.len() {
            return Err(Error::DimensionError {
                expected: self.times.len(),
                found: reference.len(),
            });
        }
        self.h_reference = Some(reference);
        Ok(self)
    }
}

/// Block maxima of `|H_k - H_ex|`: one value per run of `block_size`
/// samples (final partial block kept), stamped with the first time in the
/// block.
#[derive(Debug, Clone)]
pub struct SmoothedErrorSeries {
    pub block_times: Vec<f64>,
    pub block_max_errors: Vec<f64>,
}

impl SmoothedErrorSeries {
    pub fn max(&self) -> f64 {
        self.block_max_errors.iter().fold(0.0_f64, |m, e| m.max(*e))
    }
}

/// Integrates one method over the configured interval, recording energies
/// at every coarse step. Step failures abort with the step index and time.
pub fn run_trajectory(config: &ExperimentConfig, scheme: Scheme) -> Result<EnergySeries> {
    let prob = config.problem()?;
    let steps = config.steps()?;
    let mut z = config.initial_state()?;
    let with_u = scheme.has_u_update();

    let mut times = Vec::with_capacity(steps + 1);
    let mut h_values = Vec::with_capacity(steps + 1);
    let mut u_values = with_u.then(|| Vec::with_capacity(steps + 1));
    let mut k_values = with_u.then(|| Vec::with_capacity(steps + 1));

    let record = |z: &ExtendedPoint,
                      times: &mut Vec<f64>,
                      h_values: &mut Vec<f64>,
                      u_values: &mut Option<Vec<f64>>,
                      k_values: &mut Option<Vec<f64>>|
     -> Result<()> {
        times.push(z.t);
        h_values.push(prob.hamiltonian(&z.y, z.t)?);
        if let Some(u) = u_values.as_mut() {
            u.push(z.u);
        }
        if let Some(k) = k_values.as_mut() {
            k.push(prob.extended_hamiltonian(z)?);
        }
        Ok(())
    };

    record(&z, &mut times, &mut h_values, &mut u_values, &mut k_values)?;
    for step_index in 0..steps {
        z = scheme
            .step(&prob, &z, config.h)
            .map_err(|e| Error::ConfigError {
                context: format!(
                    "{} failed at step {} (t = {}): {e}",
                    scheme.id(),
                    step_index,
                    z.t
                ),
            })?
            .z_next;
        record(&z, &mut times, &mut h_values, &mut u_values, &mut k_values)?;
    }

    Ok(EnergySeries {
        times,
        h_values,
        u_values,
        k_values,
        h_reference: None,
    })
}

/// Integrates the reference method at the fine step and returns its
/// Hamiltonian subsampled at the coarse sample times (every
/// `h / reference_h`-th point, by index).
pub fn run_reference(config: &ExperimentConfig) -> Result<Vec<f64>> {
    let prob = config.problem()?;
    let scheme = Scheme::from_id(&config.reference_method)?;
    let stride = config.reference_stride()?;
    let coarse_steps = config.steps()?;
    let mut z = config.initial_state()?;

    let mut h_ex = Vec::with_capacity(coarse_steps + 1);
    h_ex.push(prob.hamiltonian(&z.y, z.t)?);
    for step_index in 0..coarse_steps * stride {
        z = scheme
            .step(&prob, &z, config.reference_h)
            .map_err(|e| Error::ConfigError {
                context: format!(
                    "reference {} failed at step {} (t = {}): {e}",
                    scheme.id(),
                    step_index,
                    z.t
                ),
            })?
            .z_next;
        if (step_index + 1) % stride == 0 {
            h_ex.push(prob.hamiltonian(&z.y, z.t)?);
        }
    }
    Ok(h_ex)
}

/// Block-maximum smoothing of the pointwise energy error.
pub fn smooth_max_error(series: &EnergySeries, block_size: usize) -> Result<SmoothedErrorSeries> {
    if series.is_empty() {
        return Err(Error::EmptyInput);
    }
    if block_size == 0 {
        return Err(Error::ConfigError {
            context: "block size must be positive".to_string(),
        });
    }
    let reference = series.h_reference.as_ref().ok_or(Error::MissingReference)?;
    let mut block_times = Vec::new();
    let mut block_max_errors = Vec::new();
    for (block_index, chunk) in series.h_values.chunks(block_size).enumerate() {
        let start = block_index * block_size;
        block_times.push(series.times[start]);
        let max = chunk
            .iter()
            .zip(&reference[start..start + chunk.len()])
            .map(|(h, r)| (h - r).abs())
            .fold(0.0_f64, f64::max);
        block_max_errors.push(max);
    }
    Ok(SmoothedErrorSeries {
        block_times,
        block_max_errors,
    })
}

/// Peak-to-trough height of the fast oscillation of the reference energy
/// near the start of the run: the largest energy error a method can show
/// when its fast component is completely out of phase with the reference.
///
/// One fast period of the near-unit-frequency oscillator family spans pi
/// time units. The slow perturbation is almost exactly linear over that
/// window, so a least-squares line is removed first; half the remaining
/// peak-to-trough height is the oscillation amplitude, and an out-of-phase
/// error reaches twice that amplitude.
pub fn phase_ceiling(reference: &[f64], h: f64) -> Result<f64> {
    let window = (std::f64::consts::PI / h).ceil() as usize + 1;
    if reference.len() < window || window < 3 {
        return Err(Error::EmptyInput);
    }
    let ys = &reference[..window];
    let m = window as f64;
    let mean_x = (m - 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / m;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let residual = |i: usize| ys[i] - (mean_y + slope * (i as f64 - mean_x));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..window {
        lo = lo.min(residual(i));
        hi = hi.max(residual(i));
    }
    let amplitude = (hi - lo) / 2.0;
    Ok(2.0 * amplitude)
}

/// Accuracy tier of a method relative to the phase ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    /// Max smoothed error below 0.9 of the ceiling.
    BelowCeiling,
    /// Error at the ceiling, in `[0.9, 2)` of it.
    AtCeiling,
    /// Error beyond twice the ceiling.
    AboveCeiling,
}

pub fn tier_of(value: f64, ceiling: f64) -> Tier {
    if value < 0.9 * ceiling {
        Tier::BelowCeiling
    } else if value < 2.0 * ceiling {
        Tier::AtCeiling
    } else {
        Tier::AboveCeiling
    }
}

/// Successful outcome of one benchmark row.
#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub max_smoothed_error: f64,
    pub smoothed: SmoothedErrorSeries,
    pub series: EnergySeries,
}

#[derive(Debug, Clone)]
pub struct TableRow {
    pub descriptor: MethodDescriptor,
    pub outcome: std::result::Result<MethodSummary, String>,
}

/// Benchmark table: one row per configured method plus the phase ceiling
/// computed from the shared reference run.
#[derive(Debug)]
pub struct BenchmarkTable {
    pub rows: Vec<TableRow>,
    pub phase_ceiling: f64,
}

impl BenchmarkTable {
    pub fn row(&self, id: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.descriptor.id == id)
    }

    pub fn max_error(&self, id: &str) -> Option<f64> {
        self.row(id)
            .and_then(|r| r.outcome.as_ref().ok())
            .map(|s| s.max_smoothed_error)
    }

    /// Rows ordered by ascending error (which groups the tiers); failed
    /// rows last.
    pub fn sorted_rows(&self) -> Vec<&TableRow> {
        let mut rows: Vec<&TableRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            let key = |r: &TableRow| match &r.outcome {
                Ok(s) => s.max_smoothed_error,
                Err(_) => f64::INFINITY,
            };
            key(a).partial_cmp(&key(b)).unwrap()
        });
        rows
    }

    /// Plain-text summary with aligned columns and tier separators.
    pub fn text_summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<26} {:>5} {:<6} {:>14}",
            "method", "order", "flags", "max energy err"
        );
        let _ = writeln!(out, "{}", "-".repeat(54));
        let mut last_tier: Option<Tier> = None;
        for row in self.sorted_rows() {
            match &row.outcome {
                Ok(summary) => {
                    let tier = tier_of(summary.max_smoothed_error, self.phase_ceiling);
                    if last_tier.is_some() && last_tier != Some(tier) {
                        let _ = writeln!(out, "{}", "-".repeat(54));
                    }
                    last_tier = Some(tier);
                    let _ = writeln!(
                        out,
                        "{:<26} {:>5} {:<6} {:>14.3e}",
                        row.descriptor.id,
                        row.descriptor.order,
                        row.descriptor.flags(),
                        summary.max_smoothed_error
                    );
                }
                Err(message) => {
                    let _ = writeln!(
                        out,
                        "{:<26} {:>5} {:<6} failed: {message}",
                        row.descriptor.id,
                        row.descriptor.order,
                        row.descriptor.flags()
                    );
                }
            }
        }
        let _ = writeln!(out, "{}", "-".repeat(54));
        let _ = writeln!(out, "phase ceiling: {:.3e}", self.phase_ceiling);
        out
    }

    /// Summary as CSV: `method,order,flags,max_energy_error,tier`.
    pub fn csv_summary(&self) -> String {
        let mut out = String::from("method,order,flags,max_energy_error,tier\n");
        for row in self.sorted_rows() {
            match &row.outcome {
                Ok(summary) => {
                    let tier = match tier_of(summary.max_smoothed_error, self.phase_ceiling) {
                        Tier::BelowCeiling => "below_ceiling",
                        Tier::AtCeiling => "at_ceiling",
                        Tier::AboveCeiling => "above_ceiling",
                    };
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{tier}",
                        row.descriptor.id,
                        row.descriptor.order,
                        row.descriptor.flags(),
                        summary.max_smoothed_error
                    );
                }
                Err(message) => {
                    let _ = writeln!(
                        out,
                        "{},{},{},error: {message},",
                        row.descriptor.id,
                        row.descriptor.order,
                        row.descriptor.flags()
                    );
                }
            }
        }
        out
    }
}

/// Runs the full benchmark: one shared reference run, then every configured
/// method. A failing method becomes a row-level error; the other rows are
/// still produced.
pub fn benchmark_table(config: &ExperimentConfig) -> Result<BenchmarkTable> {
    config.validate()?;
    let reference = run_reference(config)?;
    let ceiling = phase_ceiling(&reference, config.h)?;

    let mut rows = Vec::with_capacity(config.method_ids.len());
    for id in &config.method_ids {
        let scheme = Scheme::from_id(id)?;
        let outcome = run_trajectory(config, scheme)
            .and_then(|series| {
                let series = series.with_reference(reference.clone())?;
                let smoothed = smooth_max_error(&series, config.block_size)?;
                Ok(MethodSummary {
                    max_smoothed_error: smoothed.max(),
                    smoothed,
                    series,
                })
            })
            .map_err(|e| e.to_string());
        rows.push(TableRow {
            descriptor: scheme.descriptor(),
            outcome,
        });
    }
    Ok(BenchmarkTable {
        rows,
        phase_ceiling: ceiling,
    })
}

/// Writes one trajectory as CSV with header `t,H,u,K,H_ref`; absent columns
/// stay empty. Floats use the shortest round-trip decimal form.
pub fn series_to_csv(series: &EnergySeries) -> String {
    let mut out = String::from("t,H,u,K,H_ref\n");
    for i in 0..series.len() {
        let _ = write!(out, "{},{}", series.times[i], series.h_values[i]);
        match &series.u_values {
            Some(u) => {
                let _ = write!(out, ",{}", u[i]);
            }
            None => out.push(','),
        }
        match &series.k_values {
            Some(k) => {
                let _ = write!(out, ",{}", k[i]);
            }
            None => out.push(','),
        }
        match &series.h_reference {
            Some(r) => {
                let _ = writeln!(out, ",{}", r[i]);
            }
            None => out.push_str(",\n"),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::Method;

    fn tiny_config() -> ExperimentConfig {
        let mut config = ExperimentConfig::benchmark();
        config.t_end = 30.0;
        config.method_ids = vec!["lie_gauss".to_string(), "lie_euler".to_string()];
        config
    }

    #[test]
    fn benchmark_preset_validates() {
        ExperimentConfig::benchmark().validate().unwrap();
        ExperimentConfig::long_time_demo().validate().unwrap();
    }

    #[test]
    fn benchmark_preset_counts_steps() {
        let config = ExperimentConfig::benchmark();
        assert_eq!(config.steps().unwrap(), 166_667);
        assert_eq!(config.reference_stride().unwrap(), 15);
        assert!((config.initial_state().unwrap().u + 30.0).abs() < 1e-12);
    }

    #[test]
    fn config_rejects_misaligned_steps() {
        let mut config = tiny_config();
        config.t_end = 30.05;
        assert!(config.validate().is_err());
        let mut config = tiny_config();
        config.reference_h = 0.07;
        assert!(config.validate().is_err());
    }

    #[test]
    fn key_value_grammar_round_trips() {
        let text = "\
# experiment
n = 2
epsilon = 0.2   # inline comment
alpha = 0.05
q0 = 1, 2
p0 = 0.5, -0.5
t0 = 0
h = 0.1
t_end = 10
methods = lie_gauss, midpoint
reference_method = lie_gauss
reference_h = 0.01
block_size = 25
";
        let config = ExperimentConfig::from_key_values(text).unwrap();
        assert_eq!(config.n, 2);
        assert_eq!(config.q0, vec![1.0, 2.0]);
        assert_eq!(config.method_ids, vec!["lie_gauss", "midpoint"]);
        assert_eq!(config.steps().unwrap(), 100);
    }

    #[test]
    fn key_value_grammar_rejects_unknown_keys() {
        assert!(ExperimentConfig::from_key_values("bogus = 1\n").is_err());
        assert!(ExperimentConfig::from_key_values("h 0.3\n").is_err());
    }

    #[test]
    fn trajectory_on_nearly_autonomous_problem_keeps_energy_constant() {
        // With the perturbation amplitude at its smallest admissible scale
        // the energy wobble over a short run is proportionally tiny; the
        // true autonomous exactness is covered by the step tests.
        let mut config = tiny_config();
        config.epsilon = 1e-9;
        config.method_ids = vec!["lie_euler".to_string()];
        let series = run_trajectory(&config, Scheme::Single(Method::LieEuler)).unwrap();
        let h0 = series.h_values[0];
        for h in &series.h_values {
            assert!((h - h0).abs() < 1e-6);
        }
    }

    #[test]
    fn reference_of_itself_at_same_step_is_identical() {
        let mut config = tiny_config();
        config.reference_h = config.h;
        config.reference_method = "lie_gauss".to_string();
        let series = run_trajectory(&config, Scheme::Single(Method::LieGauss)).unwrap();
        let reference = run_reference(&config).unwrap();
        assert_eq!(series.h_values, reference);
    }

    #[test]
    fn reference_is_index_aligned() {
        let config = tiny_config();
        let series = run_trajectory(&config, Scheme::Single(Method::LieGauss)).unwrap();
        let reference = run_reference(&config).unwrap();
        assert_eq!(series.len(), reference.len());
        // Fourth-order coarse vs fine runs stay close on a short horizon.
        for (a, b) in series.h_values.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn smoothing_of_constant_error_is_constant() {
        let m = 10;
        let series = EnergySeries {
            times: (0..m).map(|i| i as f64).collect(),
            h_values: vec![2.5; m],
            u_values: None,
            k_values: None,
            h_reference: Some(vec![2.0; m]),
        };
        let smoothed = smooth_max_error(&series, 3).unwrap();
        assert_eq!(smoothed.block_max_errors, vec![0.5; 4]); // final partial block kept
        assert_eq!(smoothed.block_times, vec![0.0, 3.0, 6.0, 9.0]);
    }

    #[test]
    fn smoothing_tracks_windowed_maxima_of_oscillation() {
        // |sin(k)| sampled at unit steps: every window of length >= pi
        // contains a point within 0.5 of a crest, so block maxima stay in
        // [0.84, 1.0].
        let m = 200;
        let series = EnergySeries {
            times: (0..m).map(|i| i as f64).collect(),
            h_values: (0..m).map(|i| (i as f64).sin().abs()).collect(),
            u_values: None,
            k_values: None,
            h_reference: Some(vec![0.0; m]),
        };
        let smoothed = smooth_max_error(&series, 5).unwrap();
        for block_max in &smoothed.block_max_errors {
            assert!((0.84..=1.0).contains(block_max), "{block_max}");
        }
    }

    #[test]
    fn smoothing_rejects_empty_and_missing_reference() {
        let empty = EnergySeries {
            times: vec![],
            h_values: vec![],
            u_values: None,
            k_values: None,
            h_reference: Some(vec![]),
        };
        assert!(matches!(smooth_max_error(&empty, 5), Err(Error::EmptyInput)));
        let no_ref = EnergySeries {
            times: vec![0.0],
            h_values: vec![1.0],
            u_values: None,
            k_values: None,
            h_reference: None,
        };
        assert!(matches!(
            smooth_max_error(&no_ref, 5),
            Err(Error::MissingReference)
        ));
    }

    #[test]
    fn csv_output_is_deterministic_and_full_width() {
        let config = tiny_config();
        let series = run_trajectory(&config, Scheme::Single(Method::LieGauss)).unwrap();
        let reference = run_reference(&config).unwrap();
        let series = series.with_reference(reference).unwrap();
        let a = series_to_csv(&series);
        let b = series_to_csv(&series);
        assert_eq!(a, b);
        let mut lines = a.lines();
        assert_eq!(lines.next().unwrap(), "t,H,u,K,H_ref");
        assert_eq!(lines.next().unwrap().split(',').count(), 5);
    }

    #[test]
    fn csv_round_trips_exact_values() {
        let series = EnergySeries {
            times: vec![0.0, 0.1 + 0.2],
            h_values: vec![1.0 / 3.0, 2.0_f64.sqrt()],
            u_values: None,
            k_values: None,
            h_reference: Some(vec![0.25, 0.5]),
        };
        let csv = series_to_csv(&series);
        let second_line = csv.lines().nth(2).unwrap();
        let fields: Vec<&str> = second_line.split(',').collect();
        assert_eq!(fields[0].parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(fields[1].parse::<f64>().unwrap(), 2.0_f64.sqrt());
    }

    #[test]
    fn tier_boundaries() {
        let c = 0.15;
        assert_eq!(tier_of(1e-4, c), Tier::BelowCeiling);
        assert_eq!(tier_of(0.149, c), Tier::AtCeiling);
        assert_eq!(tier_of(6.4, c), Tier::AboveCeiling);
    }

    #[test]
    fn benchmark_table_produces_row_level_errors() {
        // Projection aborts with a domain error at this large eps; the
        // remaining rows must still be produced.
        let mut config = tiny_config();
        config.epsilon = 0.3;
        config.alpha = 0.1;
        config.method_ids = vec!["projection".to_string(), "lie_gauss".to_string()];
        let table = benchmark_table(&config).unwrap();
        assert!(table.row("projection").unwrap().outcome.is_err());
        assert!(table.row("lie_gauss").unwrap().outcome.is_ok());
    }
}
