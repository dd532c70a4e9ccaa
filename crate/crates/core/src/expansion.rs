//! Large-field expansion `v_E(x) = E/γ + Σ_k v_k(x)/E^k + O(E^{-N-1})` of the
//! running cycle, and the asymptotic currents built on it.
//!
//! Substituting the expansion into `½(v²)' = -γv + E - U'` and collecting
//! powers of `1/E` gives the triangular system
//!
//! ```text
//! v₁'     = -γ U'
//! v₂'     = -γ² v₁
//! v_{k+1}' = -γ² v_k - γ Σ_{l=1}^{k-1} v_l' v_{k-l}     (k ≥ 2)
//! ```
//!
//! with every `v_k` periodic and of zero mean. The recursion is applied for
//! all `k ≥ 2`; the `k = 2` and `k = 3` instances give the `v₃` and `v₄`
//! relations the symmetric-drive current relies on.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::adiabatic::{tilde_mean_velocity, AdiabaticConfig};
use crate::error::{Error, Result};
use crate::limit_cycle::{find_cycle, CycleConfig, LimitCycle};
use crate::potentials::{antiderivative_zero_mean_with, slope_bounds, PeriodicPotential};
use crate::quadrature::{periodic_grid, periodic_integral, periodic_mean, zero_mean_antiderivative};

/// Coefficient functions `v_1 … v_N` sampled on `x_j = 2πj/n`.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionSet {
    pub order: usize,
    pub gamma: f64,
    pub potential: String,
    /// `coefficients[k-1][j] = v_k(x_j)`.
    pub coefficients: Vec<Vec<f64>>,
    /// `derivatives[k-1][j] = v_k'(x_j)`.
    pub derivatives: Vec<Vec<f64>>,
}

impl ExpansionSet {
    pub fn grid_size(&self) -> usize {
        self.coefficients[0].len()
    }

    pub fn positions(&self) -> Vec<f64> {
        periodic_grid(self.grid_size())
    }

    /// `v_k` for `k` in `1..=order`.
    pub fn coefficient(&self, k: usize) -> &[f64] {
        &self.coefficients[k - 1]
    }

    pub fn derivative(&self, k: usize) -> &[f64] {
        &self.derivatives[k - 1]
    }

    /// `Σ_{k=1}^{order} v_k(x_j)/E^k`, i.e. the truncation minus `E/γ`.
    pub fn truncated_deviation(&self, field: f64, order: usize) -> Vec<f64> {
        let order = order.min(self.order);
        (0..self.grid_size())
            .map(|j| {
                (1..=order)
                    .rev()
                    .fold(0.0, |acc, k| (acc + self.coefficients[k - 1][j]) / field)
            })
            .collect()
    }

    /// `max_x |v_E - (E/γ + Σ_{k≤order} v_k/E^k)|` against a numerically
    /// computed cycle on the same grid.
    pub fn residual(&self, cycle: &LimitCycle, order: usize) -> Result<f64> {
        if cycle.grid_size() != self.grid_size() {
            return Err(Error::invalid(
                "grid",
                format!("cycle grid {} differs from expansion grid {}", cycle.grid_size(), self.grid_size()),
            ));
        }
        let trunc = self.truncated_deviation(cycle.field, order);
        Ok(trunc
            .iter()
            .zip(&cycle.deviation)
            .map(|(t, w)| (w - t).abs())
            .fold(0.0, f64::max))
    }

    /// `∫₀^{2π} v_a v_b dx`.
    pub fn inner(&self, a: usize, b: usize) -> f64 {
        let prod: Vec<f64> = self.coefficient(a).iter().zip(self.coefficient(b)).map(|(x, y)| x * y).collect();
        periodic_integral(&prod)
    }
}

pub fn expansion_coefficients(p: &PeriodicPotential, gamma: f64, order: usize) -> Result<ExpansionSet> {
    expansion_coefficients_with(p, gamma, order, CycleConfig::default().grid_size)
}

pub fn expansion_coefficients_with(p: &PeriodicPotential, gamma: f64, order: usize, nodes: usize) -> Result<ExpansionSet> {
    if order == 0 {
        return Err(Error::invalid("order", "must be at least 1"));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", format!("must be positive, got {gamma}")));
    }
    let xs = periodic_grid(nodes);
    let g2 = gamma * gamma;
    // per order: value, first and second derivative
    let mut vals: Vec<Vec<f64>> = Vec::with_capacity(order);
    let mut d1: Vec<Vec<f64>> = Vec::with_capacity(order);
    let mut d2: Vec<Vec<f64>> = Vec::with_capacity(order);

    for k in 1..=order {
        let (dk, ddk): (Vec<f64>, Vec<f64>) = if k == 1 {
            xs.iter().map(|&x| (-gamma * p.slope(x), -gamma * p.curvature(x))).unzip()
        } else {
            let prev = k - 2; // index of v_{k-1}
            (0..nodes)
                .map(|j| {
                    let mut d = -g2 * vals[prev][j];
                    let mut dd = -g2 * d1[prev][j];
                    // Σ_{l=1}^{k-2} v_l' v_{k-1-l}
                    for l in 1..k - 1 {
                        let (a, b) = (l - 1, k - 2 - l);
                        d -= gamma * d1[a][j] * vals[b][j];
                        dd -= gamma * (d2[a][j] * vals[b][j] + d1[a][j] * d1[b][j]);
                    }
                    (d, dd)
                })
                .unzip()
        };
        let mean = periodic_mean(&dk);
        let scale = dk.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if mean.abs() > 1e-9 * scale + 1e-14 {
            return Err(Error::NumericalConsistency(format!(
                "right-hand side for v_{k}' has mean {mean:.3e} (scale {scale:.3e}); no periodic solution"
            )));
        }
        vals.push(zero_mean_antiderivative(&dk, &ddk));
        d1.push(dk);
        d2.push(ddk);
    }
    Ok(ExpansionSet {
        order,
        gamma,
        potential: p.name(),
        coefficients: vals,
        derivatives: d1,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub order: usize,
    pub fields: Vec<f64>,
    /// `max_x |v_E - truncation|` per field.
    pub residuals: Vec<f64>,
    /// `E^{N+1}` times the residual; bounded as `E` grows.
    pub scaled_residuals: Vec<f64>,
    /// Least-squares slope of `log residual` against `log E`.
    pub slope: f64,
}

pub fn expansion_residual_scaling(
    p: &PeriodicPotential,
    gamma: f64,
    order: usize,
    fields: &[f64],
    cfg: &CycleConfig,
) -> Result<ScalingReport> {
    if fields.len() < 2 {
        return Err(Error::invalid("fields", "need at least two fields to fit a slope"));
    }
    let set = expansion_coefficients_with(p, gamma, order, cfg.grid_size)?;
    let mut residuals = Vec::with_capacity(fields.len());
    for &e in fields {
        let cycle = find_cycle(p, e, gamma, cfg)?;
        residuals.push(set.residual(&cycle, order)?);
    }
    let scaled = fields
        .iter()
        .zip(&residuals)
        .map(|(e, r)| r * e.powi(order as i32 + 1))
        .collect();
    let logs: Vec<(f64, f64)> = fields.iter().zip(&residuals).map(|(e, r)| (e.ln(), r.ln())).collect();
    Ok(ScalingReport {
        order,
        fields: fields.to_vec(),
        residuals,
        scaled_residuals: scaled,
        slope: fit_slope(&logs),
    })
}

/// Least-squares slope through `(x, y)` points.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `∫₀^{2π} G(x) G'(x)² dx` with `G` the zero-mean antiderivative of `U`.
#[derive(Debug, Clone, Serialize)]
pub struct RatchetIntegral {
    pub value: f64,
    pub potential: String,
    pub resolution: usize,
}

pub fn ratchet_integral(p: &PeriodicPotential) -> Result<RatchetIntegral> {
    ratchet_integral_with(p, 1 << 14)
}

pub fn ratchet_integral_with(p: &PeriodicPotential, nodes: usize) -> Result<RatchetIntegral> {
    let g = antiderivative_zero_mean_with(p, nodes)?;
    let integrand: Vec<f64> = periodic_grid(nodes)
        .iter()
        .zip(g.samples())
        .map(|(&x, &gx)| {
            let u = p.value(x);
            gx * u * u
        })
        .collect();
    Ok(RatchetIntegral {
        value: periodic_integral(&integrand),
        potential: p.name(),
        resolution: nodes,
    })
}

/// Leading-order current for `E1 = E + Δ`, `E2 = E`:
/// `𝒱_{E+Δ} 𝒱̃_E γ⁵ / (2π(2E+Δ)) · (E⁻⁴ - (E+Δ)⁻⁴) ∫U²`.
pub fn asymptotic_current_tilted(p: &PeriodicPotential, gamma: f64, field: f64, tilt: f64, cfg: &AdiabaticConfig) -> Result<f64> {
    let b = slope_bounds(p);
    if !(field > b.largest() + cfg.margin) {
        return Err(Error::OutOfRegime(format!(
            "asymptotic current needs E > max(m, M) = {:.6}: E = {field}",
            b.largest()
        )));
    }
    if !(field + tilt > b.upper + cfg.margin) {
        return Err(Error::OutOfRegime(format!(
            "hypothesis E1 > M violated: E + Δ = {}, M = {:.6}",
            field + tilt,
            b.upper
        )));
    }
    let forward = find_cycle(p, field + tilt, gamma, &cfg.cycle)?.mean_velocity;
    let tilde = tilde_mean_velocity(p, gamma, field, cfg)?;
    let n = cfg.cycle.grid_size;
    let u2: Vec<f64> = periodic_grid(n).iter().map(|&x| p.value(x).powi(2)).collect();
    let bracket = (field.powi(-4) - (field + tilt).powi(-4)) * periodic_integral(&u2);
    Ok(forward * tilde * gamma.powi(5) / (TAU * (2.0 * field + tilt)) * bracket)
}

/// Leading-order current for `E1 = E2 = E`:
/// `5 𝒱_E 𝒱̃_E γ⁹ / (2π E⁸) · ∫G G'²`.
pub fn asymptotic_current_symmetric(p: &PeriodicPotential, gamma: f64, field: f64, cfg: &AdiabaticConfig) -> Result<f64> {
    let b = slope_bounds(p);
    if !(field > b.largest() + cfg.margin) {
        return Err(Error::OutOfRegime(format!(
            "asymptotic current needs E > max(m, M) = {:.6}: E = {field}",
            b.largest()
        )));
    }
    let forward = find_cycle(p, field, gamma, &cfg.cycle)?.mean_velocity;
    let tilde = tilde_mean_velocity(p, gamma, field, cfg)?;
    let integral = ratchet_integral(p)?.value;
    Ok(5.0 * forward * tilde * gamma.powi(9) / (TAU * field.powi(8)) * integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::antiderivative_zero_mean;
    use std::f64::consts::PI;

    #[test]
    fn first_two_coefficients_have_closed_forms() {
        let p = PeriodicPotential::two_harmonic(0.5).unwrap();
        let set = expansion_coefficients(&p, 1.0, 4).unwrap();
        let n = set.grid_size();
        // v₁(π/2) = -(sin(π/2) + μ sin π)
        assert!((set.coefficient(1)[n / 4] + 1.0).abs() < 1e-12);
        assert!((set.coefficient(2)[0] + 1.25).abs() < 1e-12);
        assert!(set.inner(1, 2).abs() < 1e-10);
        for k in 1..=4 {
            assert!(periodic_mean(set.coefficient(k)).abs() < 1e-12, "v_{k}");
        }
    }

    #[test]
    fn closed_forms_hold_for_general_gamma() {
        let p = PeriodicPotential::cosine();
        let gamma = 0.6;
        let set = expansion_coefficients(&p, gamma, 2).unwrap();
        let g = antiderivative_zero_mean(&p).unwrap();
        for (j, x) in set.positions().into_iter().enumerate() {
            assert!((set.coefficient(1)[j] + gamma * p.value(x)).abs() < 1e-12);
            assert!((set.coefficient(2)[j] - gamma.powi(3) * g.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn integration_by_parts_chain() {
        let gamma = 0.9;
        let p = PeriodicPotential::two_harmonic(0.5).unwrap();
        let set = expansion_coefficients(&p, gamma, 4).unwrap();
        let v2 = set.coefficient(2);
        let dv2 = set.derivative(2);
        let cubic: Vec<f64> = v2.iter().zip(dv2).map(|(a, b)| a * b * b).collect();
        let lhs = set.inner(1, 4);
        let rhs = -set.inner(2, 3) - periodic_integral(&cubic) / gamma.powi(3);
        assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn ratchet_integral_examples() {
        for mu in [0.1, 0.5, 0.9] {
            let r = ratchet_integral(&PeriodicPotential::two_harmonic(mu).unwrap()).unwrap();
            let exact = -0.75 * PI * mu;
            assert!(((r.value - exact) / exact).abs() < 1e-10, "mu = {mu}: {}", r.value);
        }
        let c = ratchet_integral(&PeriodicPotential::cosine()).unwrap();
        assert!(c.value.abs() < 1e-10);
    }

    #[test]
    fn tilted_asymptotics_vanish_without_tilt() {
        let p = PeriodicPotential::cosine();
        let j = asymptotic_current_tilted(&p, 1.0, 10.0, 0.0, &AdiabaticConfig::default()).unwrap();
        assert_eq!(j, 0.0);
        let plus = asymptotic_current_tilted(&p, 1.0, 10.0, 0.5, &AdiabaticConfig::default()).unwrap();
        let minus = asymptotic_current_tilted(&p, 1.0, 10.0, -0.5, &AdiabaticConfig::default()).unwrap();
        assert!(plus > 0.0 && minus < 0.0);
    }

    #[test]
    fn order_zero_is_rejected() {
        assert!(expansion_coefficients(&PeriodicPotential::cosine(), 1.0, 0).is_err());
    }

    #[test]
    fn fit_slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|&e| (e.ln(), (3.0 * e.powf(-2.5)).ln())).collect();
        assert!((fit_slope(&pts) + 2.5).abs() < 1e-12);
    }
}
