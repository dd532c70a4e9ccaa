use std::f64::consts::{E, PI};

use ratchet_core::dynamics::{IntegratorConfig, State};
use ratchet_core::ensemble::{
    adiabatic_convergence_sweep, current_estimate, empirical_moment, ensemble_run, sample_measure, InitialMeasure,
    PositionLaw, SweepConfig, VelocityLaw,
};
use ratchet_core::forcing::{default_mollifier, DrivingProtocol};
use ratchet_core::potentials::PeriodicPotential;
use ratchet_core::Error;

fn gaussian() -> InitialMeasure {
    InitialMeasure::new(PositionLaw::UniformCircle, VelocityLaw::Gaussian { mean: 0.0, sigma: 1.0 })
}

fn fast_cfg() -> IntegratorConfig {
    IntegratorConfig::rk45(1e-8, 1e-10)
}

#[test]
fn point_mass_and_determinism() {
    let states = sample_measure(&InitialMeasure::point(0.0, 0.0), 5, 1).unwrap();
    assert_eq!(states, vec![State::new(0.0, 0.0); 5]);
    assert_eq!(sample_measure(&gaussian(), 100, 9).unwrap(), sample_measure(&gaussian(), 100, 9).unwrap());
}

#[test]
fn gaussian_moment_matches_quadrature() {
    // E[(1 + |v|) log(e + |v|)] for v ~ N(0, 1) by Simpson on [0, 12]
    let n = 24_000;
    let h = 12.0 / n as f64;
    let f = |v: f64| 2.0 * (1.0 + v) * (E + v).ln() * (-0.5 * v * v).exp() / (2.0 * PI).sqrt();
    let mut acc = f(0.0) + f(12.0);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    let exact = acc * h / 3.0;

    let states = sample_measure(&gaussian(), 10_000, 3).unwrap();
    let (mean, se) = empirical_moment(&states);
    assert!((mean - exact).abs() < 3.0 * se, "{mean} ± {se} vs {exact}");

    let more = sample_measure(&gaussian(), 20_000, 3).unwrap();
    let (mean2, se2) = empirical_moment(&more);
    assert!(mean2.is_finite() && (mean2 - mean).abs() < 3.0 * se.hypot(se2));

    for law in [VelocityLaw::Point { v: 4.0 }, VelocityLaw::Uniform { low: -2.0, high: 5.0 }] {
        let states = sample_measure(&InitialMeasure::new(PositionLaw::UniformCircle, law), 1000, 3).unwrap();
        assert!(empirical_moment(&states).0.is_finite());
    }
}

#[test]
fn flat_potential_current_decays_like_one_over_t() {
    let p = PeriodicPotential::flat();
    let proto = DrivingProtocol::new(2.0, 2.0, 1.0, 0.01, 0.2, default_mollifier()).unwrap();
    let m = InitialMeasure::new(PositionLaw::UniformCircle, VelocityLaw::Uniform { low: -1.0, high: 1.0 });
    for periods in [10.0, 40.0] {
        let t = periods * proto.fast_period();
        let run = ensemble_run(&p, &proto, 1.0, &m, t, 64, 5, &fast_cfg()).unwrap();
        // γX = ∫E - (v(t) - v₀) with ∫E = 0 over whole periods and |v| ≤ max(|v₀|, E/γ)
        assert!(run.estimate.estimate.abs() <= (1.0 + 2.0) / t);
        assert!(run.tail.estimate.abs() < 1e-9);
    }
}

#[test]
fn estimates_are_bit_identical_across_thread_counts() {
    let p = PeriodicPotential::two_harmonic(0.5).unwrap();
    let proto = DrivingProtocol::new(3.0, 3.0, 1.0, 0.02, 0.5, default_mollifier()).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| current_estimate(&p, &proto, 1.0, &gaussian(), 20.0, 50, 11, &fast_cfg()).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    assert_eq!(a.quantiles, b.quantiles);
    assert!(a.stderr >= 0.0 && a.estimate.is_finite());
}

#[test]
fn standard_error_scales_as_inverse_root_n() {
    let p = PeriodicPotential::cosine();
    let proto = DrivingProtocol::new(3.0, 3.0, 1.0, 0.02, 0.5, default_mollifier()).unwrap();
    let scaled: Vec<f64> = [100usize, 1000, 10_000]
        .iter()
        .map(|&n| current_estimate(&p, &proto, 1.0, &gaussian(), 20.0, n, 17, &fast_cfg()).unwrap().stderr * (n as f64).sqrt())
        .collect();
    let reference = scaled[2];
    for s in &scaled {
        assert!((s / reference - 1.0).abs() < 0.2, "{scaled:?}");
    }
}

#[test]
fn failing_sample_is_identified() {
    let p = PeriodicPotential::cosine();
    let proto = DrivingProtocol::new(3.0, 3.0, 1.0, 0.02, 0.5, default_mollifier()).unwrap();
    let cfg = IntegratorConfig { max_steps: 3, ..fast_cfg() };
    let err = current_estimate(&p, &proto, 1.0, &gaussian(), 20.0, 4, 1, &cfg).unwrap_err();
    assert!(matches!(err, Error::Sample { .. }));
    assert!(err.to_string().starts_with("sample "));
    assert!(current_estimate(&p, &proto, 1.0, &gaussian(), 0.0, 4, 1, &fast_cfg()).is_err());
}

#[test]
fn small_sweep_table() {
    let p = PeriodicPotential::two_harmonic(0.5).unwrap();
    let cfg = SweepConfig {
        samples: 24,
        integrator: fast_cfg(),
        ..SweepConfig::default()
    };
    let lambdas = [0.4, 0.2];
    let deltas = [0.04, 0.02];
    let table = adiabatic_convergence_sweep(&p, 1.0, 4.0, 4.0, &lambdas, &deltas, 10.0, &InitialMeasure::default(), &cfg).unwrap();
    assert_eq!(table.rows.len(), 4);
    assert!(table.j_adiabatic < 0.0);
    for r in &table.rows {
        assert!((r.t - 10.0 / r.lambda).abs() < 1e-9);
        assert_eq!(r.abs_error, (r.estimate - r.j_adiabatic).abs());
    }
    assert_eq!(table.trend.lambda_monotone.len(), 2);
    assert_eq!(table.trend.delta_extrapolations.len(), 2);
    assert!(table.trend.error_model.is_some());
    assert!(table.row(0.2, 0.02).is_some());

    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("lambda,delta,t,estimate,stderr,J_adiabatic,abs_error\n"));
    assert_eq!(text.lines().count(), 5);
}
