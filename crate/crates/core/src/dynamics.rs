//! Time integration of `ẍ + γẋ + U'(x) = E(t)` on the unwrapped cylinder.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::DrivingProtocol;
use crate::ode::{dopri5_step, next_step_size, rk4_step};
use crate::potentials::PeriodicPotential;

/// Position on the real line (unwrapped angle) and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub v: f64,
}

impl State {
    pub fn new(x: f64, v: f64) -> Self {
        Self { x, v }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.v.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classical RK4 with fixed step `dt`.
    Rk4,
    /// Dormand–Prince 5(4) with error control from `rtol`/`atol`.
    Rk45,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// Fixed step for RK4; initial step guess for RK45.
    pub dt: f64,
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk45,
            rtol: 1e-9,
            atol: 1e-11,
            dt: 1e-2,
            max_steps: 500_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(dt: f64) -> Self {
        Self {
            method: Method::Rk4,
            dt,
            ..Self::default()
        }
    }

    pub fn rk45(rtol: f64, atol: f64) -> Self {
        Self {
            method: Method::Rk45,
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("integrator.dt", format!("must be positive, got {}", self.dt)));
        }
        if self.method == Method::Rk45 {
            if !(self.rtol > 0.0) {
                return Err(Error::invalid("integrator.rtol", format!("must be positive, got {}", self.rtol)));
            }
            if !(self.atol > 0.0) {
                return Err(Error::invalid("integrator.atol", format!("must be positive, got {}", self.atol)));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("integrator.max_steps", "must be at least 1"));
        }
        Ok(())
    }
}

/// Which states end up in the returned [`Trajectory`].
#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    /// Every accepted step.
    EveryStep,
    /// Exactly these times (sorted, inside `(0, t_end]`); the integrator lands on them.
    At(Vec<f64>),
    /// Only the initial and final state.
    Endpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub steps: u64,
    pub rejected: u64,
    /// Largest accepted scaled error estimate (RK45 only).
    pub max_error_estimate: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn last(&self) -> State {
        let s = self.samples.last().expect("trajectory always holds its initial state");
        State::new(s.x, s.v)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "x", "v"])?;
        for s in &self.samples {
            w.serialize((s.t, s.x, s.v))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn autonomous_rhs<'a>(p: &'a PeriodicPotential, field: f64, gamma: f64) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + 'a {
    move |_t, y| [y[1], field - p.slope(y[0]) - gamma * y[1]]
}

/// One RK4 step of `ẋ = v, v̇ = E - U'(x) - γv`.
pub fn step_autonomous(p: &PeriodicPotential, field: f64, gamma: f64, s: State, dt: f64) -> Result<State> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    let f = autonomous_rhs(p, field, gamma);
    let y = rk4_step(&f, 0.0, &[s.x, s.v], dt);
    let out = State::new(y[0], y[1]);
    if !out.is_finite() {
        return Err(Error::Integration {
            time: dt,
            reason: "non-finite state".into(),
        });
    }
    Ok(out)
}

pub fn integrate_autonomous(
    p: &PeriodicPotential,
    field: f64,
    gamma: f64,
    s0: State,
    t_end: f64,
    cfg: &IntegratorConfig,
    sampling: &Sampling,
) -> Result<Trajectory> {
    let f = autonomous_rhs(p, field, gamma);
    integrate(&f, s0, t_end, cfg, sampling, &[])
}

/// Driven system `ẍ + γẋ + U'(x) = E_δ(λt)`. Integration restarts at every
/// protocol junction so the C¹ corners of the bridge never fall inside a step.
pub fn integrate_driven(
    p: &PeriodicPotential,
    proto: &DrivingProtocol,
    gamma: f64,
    s0: State,
    t_end: f64,
    cfg: &IntegratorConfig,
    sampling: &Sampling,
) -> Result<Trajectory> {
    let f = move |t: f64, y: &[f64; 2]| [y[1], proto.at_fast_time(t) - p.slope(y[0]) - gamma * y[1]];
    let junctions = proto.junctions(t_end);
    integrate(&f, s0, t_end, cfg, sampling, &junctions)
}

/// Displacement over each of the first `periods` slow periods `T/λ`.
///
/// Once the velocity has relaxed within every plateau, one slow period acts
/// as a lift `x ↦ x + D(x mod 2π)` of a circle map, and the long-run current
/// is `λ/T` times its mean displacement per period. When `|J| T/λ` is smaller
/// than the phase dependence of `D`, the map has periodic orbits and the mean
/// displacement locks to a rational multiple of `2π` (typically zero) instead
/// of approaching `J T/λ`.
pub fn slow_period_displacements(
    p: &PeriodicPotential,
    proto: &DrivingProtocol,
    gamma: f64,
    s0: State,
    periods: usize,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    if periods == 0 {
        return Err(Error::invalid("periods", "need at least one slow period"));
    }
    let slow = proto.fast_period();
    let times: Vec<f64> = (1..=periods).map(|k| k as f64 * slow).collect();
    let t_end = times[periods - 1];
    let traj = integrate_driven(p, proto, gamma, s0, t_end, cfg, &Sampling::At(times))?;
    Ok(traj.samples.windows(2).map(|w| w[1].x - w[0].x).collect())
}

fn integrate<F>(
    f: &F,
    s0: State,
    t_end: f64,
    cfg: &IntegratorConfig,
    sampling: &Sampling,
    breakpoints: &[f64],
) -> Result<Trajectory>
where
    F: Fn(f64, &[f64; 2]) -> [f64; 2],
{
    cfg.validate()?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid("t_end", format!("must be positive, got {t_end}")));
    }
    if !s0.is_finite() {
        return Err(Error::Integration {
            time: 0.0,
            reason: "non-finite initial state".into(),
        });
    }
    let sample_times: &[f64] = match sampling {
        Sampling::At(times) => {
            if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|&t| t <= 0.0 || t > t_end) {
                return Err(Error::invalid("sampling", "sample times must be increasing within (0, t_end]"));
            }
            times
        }
        _ => &[],
    };

    // merged, deduplicated stop list ending at t_end
    let mut stops: Vec<(f64, bool)> = breakpoints
        .iter()
        .filter(|&&t| t < t_end)
        .map(|&t| (t, false))
        .chain(sample_times.iter().map(|&t| (t, true)))
        .collect();
    stops.push((t_end, matches!(sampling, Sampling::Endpoints)));
    stops.sort_by(|a, b| a.0.total_cmp(&b.0));
    stops.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 |= b.1;
            true
        } else {
            false
        }
    });

    let mut samples = vec![Sample {
        t: 0.0,
        x: s0.x,
        v: s0.v,
    }];
    let mut stats = IntegratorStats::default();
    let mut t = 0.0;
    // position reduced to [0, 2π); `offset` carries the whole turns
    let mut y = [s0.x.rem_euclid(TAU), s0.v];
    let mut offset = s0.x - y[0];
    let mut h = cfg.dt;
    let mut k1 = f(t, &y);
    let every = matches!(sampling, Sampling::EveryStep);

    for &(stop, record) in &stops {
        while t < stop {
            if stats.steps >= cfg.max_steps {
                return Err(Error::Integration {
                    time: t,
                    reason: format!("step budget of {} exhausted", cfg.max_steps),
                });
            }
            let remaining = stop - t;
            // land exactly on the stop when within a hair of it
            let (step, last) = if h >= remaining * (1.0 - 1e-12) {
                (remaining, true)
            } else {
                (h, false)
            };
            match cfg.method {
                Method::Rk4 => {
                    y = rk4_step(f, t, &y, step);
                    stats.steps += 1;
                }
                Method::Rk45 => {
                    let trial = dopri5_step(f, t, &y, &k1, step, cfg.rtol, cfg.atol);
                    let proposed = next_step_size(step, trial.error);
                    if trial.error > 1.0 {
                        stats.rejected += 1;
                        h = proposed;
                        if h < 1e-14 * t.abs().max(1.0) {
                            return Err(Error::Integration {
                                time: t,
                                reason: "step size underflow".into(),
                            });
                        }
                        continue;
                    }
                    stats.steps += 1;
                    stats.max_error_estimate = stats.max_error_estimate.max(trial.error);
                    y = trial.y;
                    k1 = trial.k_last;
                    // do not let a short landing step shrink the next one
                    h = if last { proposed.max(h) } else { proposed };
                }
            }
            t = if last { stop } else { t + step };
            if !(0.0..TAU).contains(&y[0]) {
                let turns = (y[0] / TAU).floor();
                y[0] -= turns * TAU;
                offset += turns * TAU;
            }
            if !(y[0].is_finite() && y[1].is_finite()) {
                return Err(Error::Integration {
                    time: t,
                    reason: "non-finite state".into(),
                });
            }
            if every {
                samples.push(Sample { t, x: offset + y[0], v: y[1] });
            }
        }
        if record && !every {
            samples.push(Sample { t, x: offset + y[0], v: y[1] });
        }
    }
    if every && samples.last().map(|s| s.t) != Some(t_end) {
        samples.push(Sample { t: t_end, x: offset + y[0], v: y[1] });
    }
    Ok(Trajectory { samples, stats })
}
