use std::f64::consts::PI;

use anyhow::Result;
use ratchet_core::adiabatic::{adiabatic_current, check_regime};
use ratchet_core::ensemble::{adiabatic_convergence_sweep, ensemble_run};
use ratchet_core::expansion::{
    asymptotic_current_symmetric, asymptotic_current_tilted, expansion_coefficients, expansion_residual_scaling,
    ratchet_integral,
};
use ratchet_core::limit_cycle::cycle;
use ratchet_core::potentials::{slope_bounds, PeriodicPotential};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, Study};
use crate::output::{Artifacts, CommandKind};

pub fn execute(kind: CommandKind, cfg: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    match kind {
        CommandKind::Cycle => run_cycle(cfg, out),
        CommandKind::Current => run_current(cfg, out),
        CommandKind::Expansion => run_expansion(cfg, out),
        CommandKind::Ensemble => run_ensemble(cfg, out),
        CommandKind::Sweep => run_sweep(cfg, out),
        CommandKind::Reproduce => run_reproduce(cfg, out),
    }
}

#[derive(Serialize)]
struct CyclePoint {
    x: f64,
    v: f64,
}

fn run_cycle(cfg: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    let p = cfg.build_potential()?;
    let c = cycle(&p, cfg.cycle.field, cfg.gamma, &cfg.cycle_config())?;
    let samples: Vec<CyclePoint> = c
        .positions()
        .into_iter()
        .zip(c.velocities())
        .map(|(x, v)| CyclePoint { x, v })
        .collect();
    let summary = json!({
        "potential": p.name(),
        "field": c.field,
        "gamma": c.gamma,
        "v_star": c.v_star,
        "mean_velocity": c.mean_velocity,
        "contraction": c.contraction,
        "iterations": c.iterations,
        "cycle_average": c.cycle_average(),
    });
    let mut full = summary.clone();
    full["samples"] = serde_json::to_value(&samples)?;
    out.json("cycle.json", &full)?;
    out.csv("cycle.csv", &samples)?;
    Ok(summary)
}

#[derive(Serialize)]
struct CurrentRow {
    e1: f64,
    e2: f64,
    gamma: f64,
    forward_velocity: f64,
    backward_velocity: f64,
    current: f64,
}

fn run_current(cfg: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    let p = cfg.build_potential()?;
    let (e1, e2) = (cfg.forcing.e1, cfg.forcing.e2);
    let j = adiabatic_current(&p, cfg.gamma, e1, e2, &cfg.adiabatic_config())?;
    out.json("current.json", &j)?;
    out.csv(
        "current.csv",
        [CurrentRow {
            e1,
            e2,
            gamma: cfg.gamma,
            forward_velocity: j.forward_velocity,
            backward_velocity: j.backward_velocity,
            current: j.current,
        }],
    )?;
    Ok(serde_json::to_value(&j)?)
}

#[derive(Serialize)]
struct ScalingRow {
    field: f64,
    residual: f64,
    scaled_residual: f64,
}

fn run_expansion(cfg: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    let p = cfg.build_potential()?;
    let order = cfg.expansion.order;
    let set = expansion_coefficients(&p, cfg.gamma, order)?;
    out.raw("coefficients.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        let mut header = vec!["x".to_string()];
        header.extend((1..=order).map(|k| format!("v{k}")));
        w.write_record(&header)?;
        for (i, x) in set.positions().into_iter().enumerate() {
            let mut record = vec![x.to_string()];
            record.extend((1..=order).map(|k| set.coefficient(k)[i].to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    })?;

    let scaling = expansion_residual_scaling(&p, cfg.gamma, order, &cfg.expansion.fields, &cfg.cycle_config())?;
    out.csv(
        "scaling.csv",
        scaling
            .fields
            .iter()
            .zip(&scaling.residuals)
            .zip(&scaling.scaled_residuals)
            .map(|((&field, &residual), &scaled_residual)| ScalingRow {
                field,
                residual,
                scaled_residual,
            }),
    )?;
    let integral = ratchet_integral(&p)?;
    let summary = json!({
        "potential": p.name(),
        "gamma": cfg.gamma,
        "order": order,
        "fields": scaling.fields,
        "residuals": scaling.residuals,
        "slope": scaling.slope,
        "expected_slope": -(order as f64 + 1.0),
        "ratchet_integral": integral.value,
    });
    out.json("expansion.json", &summary)?;
    Ok(summary)
}

#[derive(Serialize)]
struct EnsembleRow {
    lambda: f64,
    delta: f64,
    t: f64,
    estimate: f64,
    stderr: f64,
    #[serde(rename = "J_adiabatic")]
    j_adiabatic: Option<f64>,
    abs_error: Option<f64>,
}

fn run_ensemble(cfg: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    let p = cfg.build_potential()?;
    let proto = cfg.build_protocol()?;
    let e = &cfg.ensemble;
    // outside the regime the ensemble still runs, without a reference current
    let reference = match check_regime(&p, proto.e1, proto.e2, cfg.adiabatic.margin) {
        Ok(()) => Some(adiabatic_current(&p, cfg.gamma, proto.e1, proto.e2, &cfg.adiabatic_config())?.current),
        Err(_) => None,
    };
    let t = e.periods * proto.fast_period();
    let run = ensemble_run(&p, &proto, cfg.gamma, &e.measure, t, e.samples, cfg.seed, &cfg.integrator)?;
    let est = &run.estimate;
    let row = EnsembleRow {
        lambda: proto.lambda,
        delta: proto.delta,
        t,
        estimate: est.estimate,
        stderr: est.stderr,
        j_adiabatic: reference,
        abs_error: reference.map(|j| (est.estimate - j).abs()),
    };
    out.csv("ensemble.csv", [&row])?;
    let summary = json!({
        "potential": p.name(),
        "gamma": cfg.gamma,
        "e1": proto.e1,
        "e2": proto.e2,
        "symmetric_setup": p.is_even() && proto.is_antisymmetric() && e.measure.is_symmetric(),
        "row": row,
        "quantiles": est.quantiles,
        "steps": est.steps,
        "tail": run.tail,
    });
    out.json("ensemble.json", &summary)?;
    Ok(summary)
}

fn run_sweep(cfg: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    let p = cfg.build_potential()?;
    let f = &cfg.forcing;
    let table = adiabatic_convergence_sweep(
        &p,
        cfg.gamma,
        f.e1,
        f.e2,
        &cfg.sweep.lambdas,
        &cfg.sweep.deltas,
        cfg.ensemble.periods,
        &cfg.ensemble.measure,
        &cfg.sweep_config(),
    )?;
    out.raw("sweep.csv", |w| Ok(table.write_csv(w)?))?;
    let summary = json!({
        "potential": p.name(),
        "gamma": cfg.gamma,
        "j_adiabatic": table.j_adiabatic,
        "periods": table.periods,
        "rows": table.rows,
        "trend": table.trend,
    });
    out.json("sweep.json", &summary)?;
    Ok(summary)
}

/// One line of the reproduction summary.
#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub study: &'static str,
    pub parameter: &'static str,
    pub value: f64,
    pub ratchet_integral: f64,
    pub reference: f64,
    pub asymptotic_current: f64,
    pub current: f64,
    pub expected_sign: f64,
    pub agree: bool,
}

fn run_reproduce(cfg: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    let r = &cfg.reproduce;
    let mut rows = Vec::new();
    if matches!(r.study, Study::TwoHarmonic | Study::All) {
        rows.extend(two_harmonic_study(cfg)?);
    }
    if matches!(r.study, Study::Sawtooth | Study::All) {
        rows.extend(sawtooth_study(cfg)?);
    }
    if matches!(r.study, Study::Tilt | Study::All) {
        rows.extend(tilt_study(cfg)?);
    }
    out.csv("summary.csv", &rows)?;
    let summary = json!({
        "study": r.study,
        "gamma": cfg.gamma,
        "rows": rows,
        "all_agree": rows.iter().all(|row| row.agree),
    });
    out.json("summary.json", &summary)?;
    Ok(summary)
}

fn symmetric_row(
    cfg: &RunConfig,
    study: &'static str,
    parameter: &'static str,
    value: f64,
    p: &PeriodicPotential,
    reference: f64,
    expected_sign: f64,
) -> Result<(StudyRow, f64)> {
    let acfg = cfg.adiabatic_config();
    let field = cfg.reproduce.field;
    let integral = ratchet_integral(p)?.value;
    let row = StudyRow {
        study,
        parameter,
        value,
        ratchet_integral: integral,
        reference,
        asymptotic_current: asymptotic_current_symmetric(p, cfg.gamma, field, &acfg)?,
        current: adiabatic_current(p, cfg.gamma, field, field, &acfg)?.current,
        expected_sign,
        agree: false,
    };
    Ok((row, integral))
}

fn two_harmonic_study(cfg: &RunConfig) -> Result<Vec<StudyRow>> {
    (1..=9)
        .map(|i| {
            let mu = i as f64 / 10.0;
            let p = PeriodicPotential::two_harmonic(mu)?;
            let reference = -3.0 * PI * mu / 4.0;
            let (mut row, integral) = symmetric_row(cfg, "two_harmonic", "mu", mu, &p, reference, -1.0)?;
            row.agree = ((integral - reference) / reference).abs() < 1e-8 && row.current < 0.0;
            Ok(row)
        })
        .collect()
}

fn sawtooth_study(cfg: &RunConfig) -> Result<Vec<StudyRow>> {
    let b = 1.0;
    [0.5, 0.75, 1.25, 1.5]
        .iter()
        .map(|&frac| {
            let a = frac * PI;
            let p = PeriodicPotential::sawtooth(a, b, cfg.reproduce.sawtooth_eps)?;
            let sign = (a - PI).signum();
            let reference = PI * b * b * b * (a - PI) / 90.0;
            let (mut row, integral) = symmetric_row(cfg, "sawtooth", "a", a, &p, reference, sign)?;
            row.agree = integral.signum() == sign && row.current.signum() == sign;
            Ok(row)
        })
        .collect()
}

fn tilt_study(cfg: &RunConfig) -> Result<Vec<StudyRow>> {
    let p = PeriodicPotential::cosine();
    let acfg = cfg.adiabatic_config();
    let field = cfg.reproduce.tilt_field;
    let bound = slope_bounds(&p).largest();
    let integral = ratchet_integral(&p)?.value;
    [-0.5f64, -0.25, 0.25, 0.5]
        .iter()
        .map(|&tilt| {
            if field - tilt.abs() <= bound {
                return Err(ratchet_core::Error::OutOfRegime(format!(
                    "tilted study needs E - |Δ| > {bound}, got E = {field}, Δ = {tilt}"
                ))
                .into());
            }
            let current = adiabatic_current(&p, cfg.gamma, field + tilt, field, &acfg)?.current;
            let sign = f64::signum(tilt);
            Ok(StudyRow {
                study: "tilt",
                parameter: "delta",
                value: tilt,
                ratchet_integral: integral,
                reference: 0.0,
                asymptotic_current: asymptotic_current_tilted(&p, cfg.gamma, field, tilt, &acfg)?,
                current,
                expected_sign: sign,
                agree: current.signum() == sign,
            })
        })
        .collect()
}
