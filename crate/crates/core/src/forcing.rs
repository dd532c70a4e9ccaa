//! Zero-mean, mollified square-wave driving `E_δ(τ)` of period `T` in the
//! slow time `τ = λt`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smooth non-increasing bridge with `φ(s) = 1` for `s <= 0` and `φ(s) = -1`
/// for `s >= 1`. Both variants are antisymmetric about `s = 1/2`, so
/// `∫₀¹ φ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mollifier {
    /// `cos(πs)` on `[0, 1]`; C¹ at the junctions.
    #[default]
    HalfCosine,
    /// `1 - 2ψ(s)` with the C^∞ transition `ψ(s) = f(s)/(f(s) + f(1-s))`,
    /// `f(s) = exp(-1/s)`.
    SmoothBump,
}

pub fn default_mollifier() -> Mollifier {
    Mollifier::HalfCosine
}

impl Mollifier {
    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 1.0;
        }
        if s >= 1.0 {
            return -1.0;
        }
        match self {
            Mollifier::HalfCosine => (PI * s).cos(),
            Mollifier::SmoothBump => {
                let f = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
                let (a, b) = (f(s), f(1.0 - s));
                1.0 - 2.0 * a / (a + b)
            }
        }
    }

    /// `∫₀¹ φ(s) ds` by composite Simpson.
    pub fn integral(&self) -> f64 {
        simpson(|s| self.eval(s), 0.0, 1.0, 4096)
    }
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Driving parameters as they appear in a configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingSpec {
    pub e1: f64,
    pub e2: f64,
    #[serde(default = "unit")]
    pub period: f64,
    pub delta: f64,
    pub lambda: f64,
    #[serde(default)]
    pub mollifier: Mollifier,
}

fn unit() -> f64 {
    1.0
}

impl ForcingSpec {
    pub fn build(&self) -> Result<DrivingProtocol> {
        DrivingProtocol::new(self.e1, self.e2, self.period, self.delta, self.lambda, self.mollifier)
    }
}

/// `E_δ(τ)`: equal to `E1` on `[0, T_δ]`, bridges down over `[T_δ, T_δ + δ]`,
/// equals `-E2` on `[T_δ + δ, T - δ]` and bridges back up over `[T - δ, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrivingProtocol {
    pub e1: f64,
    pub e2: f64,
    pub period: f64,
    pub delta: f64,
    pub lambda: f64,
    pub mollifier: Mollifier,
    /// Switching time chosen so the period mean vanishes.
    pub t_delta: f64,
}

impl DrivingProtocol {
    pub fn new(e1: f64, e2: f64, period: f64, delta: f64, lambda: f64, mollifier: Mollifier) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be positive, got {lambda}")));
        }
        let t_delta = solve_t_delta(e1, e2, period, delta, mollifier)?;
        Ok(Self {
            e1,
            e2,
            period,
            delta,
            lambda,
            mollifier,
            t_delta,
        })
    }

    fn bridge(&self, s: f64) -> f64 {
        if self.delta == 0.0 {
            if s <= 0.0 {
                1.0
            } else {
                -1.0
            }
        } else {
            self.mollifier.eval(s / self.delta)
        }
    }

    /// `E_δ(τ)` for any real slow time.
    pub fn eval(&self, tau: f64) -> f64 {
        let tau = tau.rem_euclid(self.period);
        let (half_diff, half_sum) = (0.5 * (self.e1 - self.e2), 0.5 * (self.e1 + self.e2));
        let down_end = self.t_delta + self.delta;
        let up_start = self.period - self.delta;
        if tau <= self.t_delta {
            self.e1
        } else if tau < down_end {
            half_diff + half_sum * self.bridge(tau - self.t_delta)
        } else if tau <= up_start {
            -self.e2
        } else {
            half_diff - half_sum * self.bridge(tau - up_start)
        }
    }

    /// `E_δ(λt)`.
    pub fn at_fast_time(&self, t: f64) -> f64 {
        self.eval(self.lambda * t)
    }

    /// Length of one protocol period in fast time, `T/λ`.
    pub fn fast_period(&self) -> f64 {
        self.period / self.lambda
    }

    /// Fast times in `(0, t_end)` where `E_δ(λt)` changes analytic form:
    /// `λ⁻¹(kT + T_δ)`, `λ⁻¹(kT + T_δ + δ)`, `λ⁻¹(kT + T - δ)` and `λ⁻¹(k+1)T`.
    pub fn junctions(&self, t_end: f64) -> Vec<f64> {
        let offsets = [
            self.t_delta,
            self.t_delta + self.delta,
            self.period - self.delta,
            self.period,
        ];
        let mut out = Vec::new();
        let mut k = 0.0;
        loop {
            let base = k * self.period;
            if base / self.lambda >= t_end {
                break;
            }
            for off in offsets {
                let t = (base + off) / self.lambda;
                if t > 0.0 && t < t_end && out.last().is_none_or(|&last| t > last) {
                    out.push(t);
                }
            }
            k += 1.0;
        }
        out
    }

    /// Period mean `(1/T)∫₀ᵀ E_δ` by piecewise Simpson quadrature.
    pub fn period_mean(&self) -> f64 {
        period_mean_with(self, 2048)
    }

    /// True when `E_δ(τ + T/2) = -E_δ(τ)`, the protocol half of the
    /// space-time symmetry that forbids a current for even potentials.
    pub fn is_antisymmetric(&self) -> bool {
        self.e1 == self.e2
    }
}

fn period_mean_with(p: &DrivingProtocol, panels: usize) -> f64 {
    let cuts = [
        0.0,
        p.t_delta,
        p.t_delta + p.delta,
        p.period - p.delta,
        p.period,
    ];
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            // nudge inside so the piecewise formula is evaluated on the right branch
            acc += simpson(|t| p.eval(t.clamp(w[0], w[1])), w[0], w[1], panels);
        }
    }
    acc / p.period
}

/// Switching time `T_δ` making the period mean of `E_δ` vanish.
///
/// The mean is affine in `T_δ`, so two quadrature evaluations fix it. For
/// every admissible `φ` the two bridges contribute `±δ∫φ` and cancel, giving
/// `T_δ = E2 T / (E1 + E2) - δ`; the quadrature path checks this.
pub fn solve_t_delta(e1: f64, e2: f64, period: f64, delta: f64, mollifier: Mollifier) -> Result<f64> {
    if !(e1 > 0.0 && e1.is_finite()) {
        return Err(Error::invalid("e1", format!("must be positive, got {e1}")));
    }
    if !(e2 > 0.0 && e2.is_finite()) {
        return Err(Error::invalid("e2", format!("must be positive, got {e2}")));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::invalid("period", format!("must be positive, got {period}")));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::invalid("delta", format!("must be non-negative, got {delta}")));
    }
    let guess = e2 * period / (e1 + e2) - delta;
    let feasible = |t: f64| t > 0.0 && 2.0 * delta < period - t;
    if !feasible(guess) {
        return Err(Error::invalid(
            "delta",
            format!("δ = {delta} leaves no room for the plateaus (need 0 < T_δ and 2δ < T - T_δ)"),
        ));
    }
    if delta == 0.0 {
        return Ok(guess);
    }
    let mean_at = |t_delta: f64| {
        let p = DrivingProtocol {
            e1,
            e2,
            period,
            delta,
            lambda: 1.0,
            mollifier,
            t_delta,
        };
        period_mean_with(&p, 2048)
    };
    let probe = 0.25 * guess.min(period - 2.0 * delta - guess);
    let (a, b) = (guess - probe, guess + probe);
    let (ma, mb) = (mean_at(a), mean_at(b));
    let root = a - ma * (b - a) / (mb - ma);
    if !feasible(root) {
        return Err(Error::invalid("delta", format!("switching time {root} is infeasible")));
    }
    Ok(root)
}
