//! The running limit cycle `v_E(x)` of the autonomous system for a static
//! field beyond the slope bounds.
//!
//! Because the cycle stays on one side of `v = 0` it is the graph of a
//! periodic solution of `dv/dx = -γ + (E - U'(x))/v`. Writing
//! `v = E/γ + w` turns this into `dw/dx = -(γw + U'(x)) / (E/γ + w)`, whose
//! solution is small for large fields and can be carried without the
//! cancellation that plagues `v` itself. The cycle is the fixed point of the
//! return map `w ↦ w(2π)`, a contraction with factor `exp[-∫γ/v_E]`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::rk4_step;
use crate::potentials::{slope_bounds, PeriodicPotential};
use crate::quadrature::{periodic_integral, periodic_mean};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CycleConfig {
    /// RK4 steps (and recorded samples) per period.
    pub grid_size: usize,
    /// Stop when `|G(v) - v| < tol`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Smallest admissible `|v|` along the flow.
    pub v_floor: f64,
    /// Newton acceleration of the fixed-point iteration.
    pub newton: bool,
    /// Required excess of `E` over the relevant slope bound.
    pub margin: f64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            grid_size: 4096,
            tol: 1e-12,
            max_iterations: 100_000,
            v_floor: 1e-6,
            newton: false,
            margin: 0.0,
        }
    }
}

impl CycleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 8 {
            return Err(Error::invalid("grid", format!("need at least 8 points, got {}", self.grid_size)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", format!("must be positive, got {}", self.tol)));
        }
        if !(self.v_floor > 0.0) {
            return Err(Error::invalid("v_floor", "must be positive"));
        }
        if !(self.margin >= 0.0) {
            return Err(Error::invalid("margin", "must be non-negative"));
        }
        Ok(())
    }
}

/// A converged running cycle sampled on `x_j = 2πj/n`, `j = 0..=n`.
#[derive(Debug, Clone, Serialize)]
pub struct LimitCycle {
    pub field: f64,
    pub gamma: f64,
    pub potential: String,
    /// `E/γ`, the cycle average.
    pub offset: f64,
    /// `v_E(x_j) - E/γ` for `j = 0..=n`; the last entry closes the period.
    pub deviation: Vec<f64>,
    /// `v* = v_E(0)`.
    pub v_star: f64,
    /// `𝒱_E = 2π / ∫dx/v_E`.
    pub mean_velocity: f64,
    /// `s` in `𝒱_E = (E/γ)/(1 + s)`; non-negative by Jensen.
    pub slowness_excess: f64,
    /// `exp[-∫γ/v_E dx]`, the derivative of the return map at `v*`.
    pub contraction: f64,
    pub iterations: usize,
    /// `|G(v_k) - v_k|` for every iteration.
    pub gaps: Vec<f64>,
}

impl LimitCycle {
    pub fn grid_size(&self) -> usize {
        self.deviation.len() - 1
    }

    pub fn positions(&self) -> Vec<f64> {
        let n = self.grid_size();
        (0..=n).map(|j| TAU * j as f64 / n as f64).collect()
    }

    pub fn velocities(&self) -> Vec<f64> {
        self.deviation.iter().map(|w| self.offset + w).collect()
    }

    fn periodic_velocities(&self) -> Vec<f64> {
        let mut v = self.velocities();
        v.pop();
        v
    }

    /// `(1/2π)∫v_E dx`; equals `E/γ` on the exact cycle.
    pub fn cycle_average(&self) -> f64 {
        self.offset + periodic_mean(&self.deviation[..self.grid_size()])
    }

    /// `2π / ∫dx/v_E` straight from the samples, without using the cycle
    /// average identity. Loses relative accuracy `~ (γ²/E)²` for large fields.
    pub fn harmonic_mean_direct(&self) -> f64 {
        let inv: Vec<f64> = self.periodic_velocities().iter().map(|v| 1.0 / v).collect();
        TAU / periodic_integral(&inv)
    }

    /// `|v_E(2π) - v_E(0)|`.
    pub fn periodicity_defect(&self) -> f64 {
        (self.deviation[self.grid_size()] - self.deviation[0]).abs()
    }

    /// Median ratio of successive fixed-point gaps, taken while the gaps are
    /// well above rounding level. `None` when the iteration converged too fast
    /// to measure.
    pub fn observed_contraction(&self) -> Option<f64> {
        let floor = 1e-13 * self.offset.abs().max(1.0);
        let mut ratios: Vec<f64> = self
            .gaps
            .windows(2)
            .skip(1)
            .filter(|w| w[1] > floor)
            .map(|w| w[1] / w[0])
            .collect();
        if ratios.is_empty() {
            return None;
        }
        ratios.sort_by(f64::total_cmp);
        Some(ratios[ratios.len() / 2])
    }
}

/// `𝒱_E` of a cycle.
pub fn mean_velocity(c: &LimitCycle) -> f64 {
    c.mean_velocity
}

struct Flow<'a> {
    potential: &'a PeriodicPotential,
    gamma: f64,
    offset: f64,
    v_floor: f64,
}

impl Flow<'_> {
    fn rhs(&self, x: f64, w: f64) -> f64 {
        -(self.gamma * w + self.potential.slope(x)) / (self.offset + w)
    }

    /// Integrates `w` over `[0, x_end]` in `steps` RK4 steps, optionally
    /// recording every node. Returns `w(x_end)` and `∫γ/v` (trapezoid).
    fn sweep(&self, w0: f64, x_end: f64, steps: usize, mut record: Option<&mut Vec<f64>>) -> Result<(f64, f64)> {
        let h = x_end / steps as f64;
        let f = |x: f64, y: &[f64; 1]| [self.rhs(x, y[0])];
        let mut w = [w0];
        let mut damping = 0.5 * self.gamma / (self.offset + w0);
        if let Some(r) = record.as_deref_mut() {
            r.clear();
            r.push(w0);
        }
        for j in 0..steps {
            let x = j as f64 * h;
            w = rk4_step(&f, x, &w, h);
            let v = self.offset + w[0];
            if !(v.abs() > self.v_floor) || !v.is_finite() || v.signum() != self.offset.signum() {
                return Err(Error::SingularFlow {
                    position: x + h,
                    velocity: v,
                    floor: self.v_floor,
                });
            }
            let weight = if j + 1 == steps { 0.5 } else { 1.0 };
            damping += weight * self.gamma / v;
            if let Some(r) = record.as_deref_mut() {
                r.push(w[0]);
            }
        }
        Ok((w[0], damping * h))
    }
}

/// `Φ(x_end; v0)`: the solution of `dv/dx = -γ + (E - U'(x))/v` with
/// `Φ(0) = v0`, integrated with RK4 on `cfg.grid_size` steps per period.
pub fn phase_flow(
    p: &PeriodicPotential,
    field: f64,
    gamma: f64,
    v0: f64,
    x_end: f64,
    cfg: &CycleConfig,
) -> Result<f64> {
    check_gamma(gamma)?;
    if !(x_end > 0.0) {
        return Err(Error::invalid("x_end", "must be positive"));
    }
    if !(v0.abs() > cfg.v_floor) {
        return Err(Error::SingularFlow {
            position: 0.0,
            velocity: v0,
            floor: cfg.v_floor,
        });
    }
    let offset = field / gamma;
    let flow = Flow {
        potential: p,
        gamma,
        offset,
        v_floor: cfg.v_floor,
    };
    let steps = ((x_end / TAU) * cfg.grid_size as f64).ceil().max(1.0) as usize;
    let (w, _) = flow.sweep(v0 - offset, x_end, steps, None)?;
    Ok(offset + w)
}

/// `G(v) = Φ(2π; v)`.
pub fn poincare_map(p: &PeriodicPotential, field: f64, gamma: f64, v: f64, cfg: &CycleConfig) -> Result<f64> {
    phase_flow(p, field, gamma, v, TAU, cfg)
}

/// `∂Φ(2π; v)/∂v` from the variational identity
/// `(v/Φ) exp[-∫₀^{2π} γ/Φ]`.
pub fn poincare_map_derivative(p: &PeriodicPotential, field: f64, gamma: f64, v: f64, cfg: &CycleConfig) -> Result<f64> {
    check_gamma(gamma)?;
    let offset = field / gamma;
    let flow = Flow {
        potential: p,
        gamma,
        offset,
        v_floor: cfg.v_floor,
    };
    let (w, damping) = flow.sweep(v - offset, TAU, cfg.grid_size, None)?;
    Ok(v / (offset + w) * (-damping).exp())
}

/// `[(E - M)/γ - α, (E + m)/γ + α]` with the default `α = 0.1 (E - M)/γ`.
pub fn invariant_interval(p: &PeriodicPotential, field: f64, gamma: f64) -> (f64, f64) {
    let b = slope_bounds(p);
    let alpha = 0.1 * (field - b.upper) / gamma;
    ((field - b.upper) / gamma - alpha, (field + b.lower) / gamma + alpha)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("gamma", format!("must be positive, got {gamma}")))
    }
}

/// Rounding allowance on a numerically refined slope bound, so that `E = M`
/// itself is admitted. The flow floor still rejects any stalled sweep.
fn boundary_slack(bound: f64) -> f64 {
    1e-9 * bound.abs().max(1.0)
}

/// Cycle for `E >= M`, starting the fixed-point iteration at `v = E/γ`.
pub fn find_cycle(p: &PeriodicPotential, field: f64, gamma: f64, cfg: &CycleConfig) -> Result<LimitCycle> {
    find_cycle_from(p, field, gamma, field / gamma, cfg)
}

/// Cycle for `E >= M` with an explicit starting velocity on the section `x = 0`.
pub fn find_cycle_from(p: &PeriodicPotential, field: f64, gamma: f64, v0: f64, cfg: &CycleConfig) -> Result<LimitCycle> {
    check_gamma(gamma)?;
    cfg.validate()?;
    let bounds = slope_bounds(p);
    if !(field >= bounds.upper + cfg.margin - boundary_slack(bounds.upper)) {
        return Err(Error::OutOfRegime(format!(
            "static field E = {field} must reach the maximal slope M = {:.6} (+ margin {}) for a running cycle",
            bounds.upper, cfg.margin
        )));
    }
    let offset = field / gamma;
    let flow = Flow {
        potential: p,
        gamma,
        offset,
        v_floor: cfg.v_floor,
    };
    let n = cfg.grid_size;
    let mut w = v0 - offset;
    let mut gaps = Vec::new();
    let mut best = f64::INFINITY;
    let mut stalled = 0usize;
    loop {
        if gaps.len() >= cfg.max_iterations {
            return Err(Error::NoConvergence {
                iterations: gaps.len(),
                gap: gaps.last().copied().unwrap_or(f64::NAN),
            });
        }
        let (next, damping) = flow.sweep(w, TAU, n, None)?;
        let gap = (next - w).abs();
        gaps.push(gap);
        if gap < cfg.tol {
            w = next;
            break;
        }
        if gap < best * 0.999 {
            best = gap;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > 50 {
                return Err(Error::NoConvergence {
                    iterations: gaps.len(),
                    gap,
                });
            }
        }
        w = if cfg.newton {
            let slope = (offset + w) / (offset + next) * (-damping).exp();
            w - (next - w) / (slope - 1.0)
        } else {
            next
        };
    }

    let mut deviation = Vec::with_capacity(n + 1);
    let (_, damping) = flow.sweep(w, TAU, n, Some(&mut deviation))?;
    Ok(assemble(p, field, gamma, deviation, damping, gaps))
}

fn assemble(p: &PeriodicPotential, field: f64, gamma: f64, deviation: Vec<f64>, damping: f64, gaps: Vec<f64>) -> LimitCycle {
    let offset = field / gamma;
    let n = deviation.len() - 1;
    // ∫(1/v - 1/c) = -(1/c²)∫w + (1/c²)∫w²/v, and ∫w = 0 on the exact cycle
    let excess: Vec<f64> = deviation[..n].iter().map(|w| w * w / (offset + w)).collect();
    let defect = periodic_integral(&excess) / (offset * offset);
    let slowness_excess = offset * defect / TAU;
    LimitCycle {
        field,
        gamma,
        potential: p.name(),
        offset,
        v_star: offset + deviation[0],
        mean_velocity: offset / (1.0 + slowness_excess),
        slowness_excess,
        contraction: (-damping).exp(),
        iterations: gaps.len(),
        gaps,
        deviation,
    }
}

/// Cycle for `E <= -m`, obtained from the cycle of `Ũ(y) = U(-y)` at `-E` by
/// `v_E(x) = -ṽ(-x)`.
pub fn negative_field_cycle(p: &PeriodicPotential, field: f64, gamma: f64, cfg: &CycleConfig) -> Result<LimitCycle> {
    let bounds = slope_bounds(p);
    if !(field <= -(bounds.lower + cfg.margin) + boundary_slack(bounds.lower)) {
        return Err(Error::OutOfRegime(format!(
            "static field E = {field} must not exceed -m = {:.6} (- margin {}) for a backward running cycle",
            -bounds.lower, cfg.margin
        )));
    }
    let mirror = find_cycle(&p.reflected(), -field, gamma, cfg)?;
    Ok(reflect(p, &mirror))
}

fn reflect(p: &PeriodicPotential, mirror: &LimitCycle) -> LimitCycle {
    let n = mirror.grid_size();
    let deviation: Vec<f64> = (0..=n).map(|j| -mirror.deviation[n - j]).collect();
    LimitCycle {
        field: -mirror.field,
        gamma: mirror.gamma,
        potential: p.name(),
        offset: -mirror.offset,
        v_star: -mirror.offset + deviation[0],
        mean_velocity: -mirror.mean_velocity,
        slowness_excess: mirror.slowness_excess,
        contraction: mirror.contraction,
        iterations: mirror.iterations,
        gaps: mirror.gaps.clone(),
        deviation,
    }
}

/// Dispatches on the sign of the field.
pub fn cycle(p: &PeriodicPotential, field: f64, gamma: f64, cfg: &CycleConfig) -> Result<LimitCycle> {
    if field >= 0.0 {
        find_cycle(p, field, gamma, cfg)
    } else {
        negative_field_cycle(p, field, gamma, cfg)
    }
}
