//! Adiabatic-limit current `J = (E2 𝒱_{E1} + E1 𝒱_{-E2}) / (E1 + E2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_cycle::{find_cycle, negative_field_cycle, CycleConfig, LimitCycle};
use crate::potentials::{slope_bounds, PeriodicPotential};

/// Default excess required of `E1` over `M` and of `E2` over `m`.
pub const DEFAULT_REGIME_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdiabaticConfig {
    pub margin: f64,
    pub cycle: CycleConfig,
}

impl Default for AdiabaticConfig {
    fn default() -> Self {
        Self {
            margin: DEFAULT_REGIME_MARGIN,
            cycle: CycleConfig::default(),
        }
    }
}

/// Headline numbers of a cycle, as written to run outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleSummary {
    pub field: f64,
    pub gamma: f64,
    pub v_star: f64,
    pub mean_velocity: f64,
    pub contraction: f64,
    pub iterations: usize,
}

impl From<&LimitCycle> for CycleSummary {
    fn from(c: &LimitCycle) -> Self {
        Self {
            field: c.field,
            gamma: c.gamma,
            v_star: c.v_star,
            mean_velocity: c.mean_velocity,
            contraction: c.contraction,
            iterations: c.iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdiabaticCurrent {
    pub e1: f64,
    pub e2: f64,
    pub gamma: f64,
    pub potential: String,
    /// `𝒱_{E1} > 0`.
    pub forward_velocity: f64,
    /// `𝒱_{-E2} < 0`.
    pub backward_velocity: f64,
    pub current: f64,
    /// `E2 𝒱_{E1} / (E1 + E2)`: time share `T₀/T` of the forward plateau times its drift.
    pub forward_share: f64,
    /// `E1 𝒱_{-E2} / (E1 + E2)`.
    pub backward_share: f64,
    pub forward_cycle: CycleSummary,
    pub backward_cycle: CycleSummary,
}

impl AdiabaticCurrent {
    /// The two shares summed in floating point; agrees with `current` up to
    /// the rounding of two `O(E/γ)` numbers.
    pub fn current_from_parts(&self) -> f64 {
        self.forward_share + self.backward_share
    }
}

/// Errors unless `E1 > M + margin` and `E2 > m + margin`.
pub fn check_regime(p: &PeriodicPotential, e1: f64, e2: f64, margin: f64) -> Result<()> {
    let b = slope_bounds(p);
    if !(e1 > b.upper + margin) {
        return Err(Error::OutOfRegime(format!(
            "hypothesis E1 > M violated: E1 = {e1}, M = {:.6}, margin {margin}",
            b.upper
        )));
    }
    if !(e2 > b.lower + margin) {
        return Err(Error::OutOfRegime(format!(
            "hypothesis E2 > m violated: E2 = {e2}, m = {:.6}, margin {margin}",
            b.lower
        )));
    }
    Ok(())
}

pub fn adiabatic_current(
    p: &PeriodicPotential,
    gamma: f64,
    e1: f64,
    e2: f64,
    cfg: &AdiabaticConfig,
) -> Result<AdiabaticCurrent> {
    check_regime(p, e1, e2, cfg.margin)?;
    let forward = find_cycle(p, e1, gamma, &cfg.cycle)?;
    let backward = negative_field_cycle(p, -e2, gamma, &cfg.cycle)?;
    Ok(combine(p, gamma, e1, e2, &forward, &backward))
}

/// Combines the two cycles. With `𝒱 = (E/γ)/(1 + s)` the leading parts of
/// `E2 𝒱_{E1}` and `E1 𝒱_{-E2}` cancel exactly, leaving
/// `J = E1 E2 (s₂ - s₁) / (γ (E1 + E2)(1 + s₁)(1 + s₂))`.
fn combine(
    p: &PeriodicPotential,
    gamma: f64,
    e1: f64,
    e2: f64,
    forward: &LimitCycle,
    backward: &LimitCycle,
) -> AdiabaticCurrent {
    let (s1, s2) = (forward.slowness_excess, backward.slowness_excess);
    let current = e1 * e2 * (s2 - s1) / (gamma * (e1 + e2) * (1.0 + s1) * (1.0 + s2));
    AdiabaticCurrent {
        e1,
        e2,
        gamma,
        potential: p.name(),
        forward_velocity: forward.mean_velocity,
        backward_velocity: backward.mean_velocity,
        current,
        forward_share: e2 * forward.mean_velocity / (e1 + e2),
        backward_share: e1 * backward.mean_velocity / (e1 + e2),
        forward_cycle: forward.into(),
        backward_cycle: backward.into(),
    }
}

/// `𝒱̃_E`, the mean velocity of the cycle of `Ũ(y) = U(-y)` at field `E`;
/// equal to `-𝒱_{-E}`.
pub fn tilde_mean_velocity(p: &PeriodicPotential, gamma: f64, field: f64, cfg: &AdiabaticConfig) -> Result<f64> {
    Ok(tilde_cycle(p, gamma, field, cfg)?.mean_velocity)
}

pub fn tilde_cycle(p: &PeriodicPotential, gamma: f64, field: f64, cfg: &AdiabaticConfig) -> Result<LimitCycle> {
    let b = slope_bounds(p);
    if !(field > b.lower + cfg.margin) {
        return Err(Error::OutOfRegime(format!(
            "reflected cycle needs E > m: E = {field}, m = {:.6}, margin {}",
            b.lower, cfg.margin
        )));
    }
    find_cycle(&p.reflected(), field, gamma, &cfg.cycle)
}

/// `J = (E 𝒱_{E+Δ} - (E+Δ) 𝒱̃_E) / (2E + Δ)` for `E1 = E + Δ`, `E2 = E`,
/// evaluated literally from the two mean velocities.
pub fn current_tilde_form(p: &PeriodicPotential, gamma: f64, field: f64, tilt: f64, cfg: &AdiabaticConfig) -> Result<f64> {
    check_regime(p, field + tilt, field, cfg.margin)?;
    let forward = find_cycle(p, field + tilt, gamma, &cfg.cycle)?.mean_velocity;
    let tilde = tilde_mean_velocity(p, gamma, field, cfg)?;
    Ok((field * forward - (field + tilt) * tilde) / (2.0 * field + tilt))
}
