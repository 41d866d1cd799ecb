// Scratch scan used while tuning test parameters; not part of the library.
use extphase::harness::{benchmark_table, phase_ceiling, run_reference, ExperimentConfig};
use extphase::integrators::Scheme;
use extphase::model::{ExtendedPoint, PerturbedOscillator, PhasePoint};
use extphase::verify::estimate_order;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "orders".into());
    match which.as_str() {
        "orders" => orders(),
        "projection" => projection_scan(),
        "ceiling" => ceiling(),
        "table" => table(std::env::args().nth(2)),
        "variants" => variants(),
        "exactness" => exactness(),
        _ => eprintln!("unknown scan"),
    }
}

fn exactness() {
    use extphase::matkernels::{project_sp, SquareMatrix, StructureMatrix};
    use extphase::verify::check_exponential_exactness;
    use rand::{Rng, SeedableRng};
    let y = PhasePoint::new(vec![1.0, 2.0, 3.0, 4.0], vec![4.0, 1.0, 2.0, 3.0]).unwrap();
    for norm in [1.5, 2.0, 2.5, 3.0] {
        println!("norm {norm}:");
        for id in ["lie_gauss", "exp_sym_noncan", "midpoint", "kahan", "gauss_legendre4"] {
            let scheme = Scheme::from_id(id).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
            let mut worst_low = f64::INFINITY;
            let mut worst_high = 0.0_f64;
            for _ in 0..10 {
                let j = StructureMatrix::new(4);
                let raw = SquareMatrix::from_fn(8, |_, _| rng.gen_range(-1.0..1.0)).unwrap();
                let a = project_sp(&raw, &j).unwrap();
                let a = a.scale(norm / a.frobenius_norm());
                let d = check_exponential_exactness(scheme, &a, &y, 0.0, 0.3).unwrap();
                worst_low = worst_low.min(d);
                worst_high = worst_high.max(d);
            }
            println!("  {id:<18} min={worst_low:.2e} max={worst_high:.2e}");
        }
    }
}

// Alternative readings of the two ad-hoc exponential maps, run through the
// benchmark pipeline by hand.
fn variants() {
    use extphase::harness::{phase_ceiling as ceiling_of, smooth_max_error, EnergySeries};
    use extphase::matkernels::{commutator, mat_exp, SquareMatrix};
    use extphase::model::LinearHamiltonianProblem;

    let config = ExperimentConfig::benchmark();
    let prob = config.problem().unwrap();
    let reference = run_reference(&config).unwrap();
    println!("ceiling {:.4}", ceiling_of(&reference, config.h).unwrap());

    type MapFn = Box<dyn Fn(&PerturbedOscillator, f64, f64) -> SquareMatrix>;
    let ident = || SquareMatrix::identity(8);
    let variants: Vec<(&str, MapFn)> = vec![
        (
            "noncan_outside", // exp(h A0) (I + h A0 [A0, A1])
            Box::new(|p: &PerturbedOscillator, t: f64, h: f64| {
                let a0 = p.coefficient(t);
                let a1 = p.coefficient(t + h);
                let c = commutator(&a0, &a1).unwrap();
                let corr = &SquareMatrix::identity(8) + &(&a0 * &c).scale(h);
                &mat_exp(&a0.scale(h), 1e-13).unwrap() * &corr
            }),
        ),
        (
            "sym_outside", // exp(h Ah) (I + h Ah [A0, A1])
            Box::new(|p: &PerturbedOscillator, t: f64, h: f64| {
                let a0 = p.coefficient(t);
                let ah = p.coefficient(t + h / 2.0);
                let a1 = p.coefficient(t + h);
                let c = commutator(&a0, &a1).unwrap();
                let corr = &SquareMatrix::identity(8) + &(&ah * &c).scale(h);
                &mat_exp(&ah.scale(h), 1e-13).unwrap() * &corr
            }),
        ),
    ];
    let _ = ident;

    for (name, map) in &variants {
        let steps = config.steps().unwrap();
        let z0 = config.initial_state().unwrap();
        let mut y = z0.y.stacked();
        let mut t = z0.t;
        let mut times = Vec::with_capacity(steps + 1);
        let mut h_values = Vec::with_capacity(steps + 1);
        let record = |y: &[f64], t: f64| {
            let pt = PhasePoint::new(y[..4].to_vec(), y[4..].to_vec()).unwrap();
            prob.hamiltonian(&pt, t).unwrap()
        };
        times.push(t);
        h_values.push(record(&y, t));
        for _ in 0..steps {
            let m = map(&prob, t, config.h);
            y = m.apply(&y);
            t += config.h;
            times.push(t);
            h_values.push(record(&y, t));
        }
        let series = EnergySeries {
            times,
            h_values,
            u_values: None,
            k_values: None,
            h_reference: Some(reference.clone()),
        };
        let smoothed = smooth_max_error(&series, config.block_size).unwrap();
        println!("{name}: max smoothed error = {:.4e}", smoothed.max());
    }
}

fn projection_scan() {
    for (eps, alpha) in [(0.3, 0.1), (0.6, 0.5), (0.9, 0.9)] {
        let prob = PerturbedOscillator::new(1, eps, alpha).unwrap();
        let y = PhasePoint::new(vec![1.0], vec![0.5]).unwrap();
        let z0 = ExtendedPoint::from_initial(&prob, y, 0.0).unwrap();
        print!("eps={eps} alpha={alpha}:");
        for h0 in [0.2, 0.1, 0.05, 0.02, 0.01] {
            match estimate_order(Scheme::from_id("projection").unwrap(), &prob, &z0, 8.0, h0) {
                Ok(est) => print!(
                    "  h0={h0}: {:.2} (e={:.1e})",
                    est.measured_order, est.errors[0]
                ),
                Err(e) => print!("  h0={h0}: ERR {e}"),
            }
        }
        println!();
    }
}

fn orders() {
    let prob = PerturbedOscillator::new(1, 0.9, 0.9).unwrap();
    let y = PhasePoint::new(vec![1.0], vec![0.5]).unwrap();
    let z0 = ExtendedPoint::from_initial(&prob, y, 0.0).unwrap();
    for scheme in Scheme::all() {
        print!("{:<26}", scheme.id());
        for h0 in [0.2, 0.1, 0.05, 0.02] {
            let t_end = 8.0;
            match estimate_order(scheme, &prob, &z0, t_end, h0) {
                Ok(est) => print!(
                    " h0={h0}: {:>5.2} (e={:.1e})",
                    est.measured_order, est.errors[0]
                ),
                Err(e) => print!(" h0={h0}: ERR({e:.20})"),
            }
        }
        println!();
    }
}

fn ceiling() {
    let mut config = ExperimentConfig::benchmark();
    config.t_end = 600.0;
    let reference = run_reference(&config).unwrap();
    println!("ceiling = {:.6}", phase_ceiling(&reference, config.h).unwrap());
}

fn table(t_end: Option<String>) {
    let mut config = ExperimentConfig::benchmark();
    if let Some(te) = t_end {
        config.t_end = te.parse().unwrap();
    }
    let start = std::time::Instant::now();
    let table = benchmark_table(&config).unwrap();
    println!("{}", table.text_summary());
    println!("elapsed: {:.1?}", start.elapsed());
}
