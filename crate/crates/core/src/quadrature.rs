//! Uniform-grid quadrature on one period `[0, 2π)`.
//!
//! Every integrand handled here is 2π-periodic and smooth, so the plain
//! trapezoid rule on `n` equispaced nodes converges geometrically. Cumulative
//! (indefinite) integrals use the endpoint-corrected trapezoid rule
//! `h/2 (f_j + f_{j+1}) + h²/12 (f'_j - f'_{j+1})`, which is fourth order on
//! each cell and whose corrections telescope to zero over a full period.

use std::f64::consts::TAU;

/// Neumaier-compensated running sum. Aggregation order still matters, but
/// the rounding error no longer grows with the number of terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Nodes `x_j = 2πj/n`, `j = 0..n`.
pub fn periodic_grid(n: usize) -> Vec<f64> {
    let h = TAU / n as f64;
    (0..n).map(|j| j as f64 * h).collect()
}

/// Trapezoid rule over one period from `n` samples at [`periodic_grid`] nodes.
pub fn periodic_integral(samples: &[f64]) -> f64 {
    TAU / samples.len() as f64 * compensated_sum(samples.iter().copied())
}

pub fn periodic_mean(samples: &[f64]) -> f64 {
    compensated_sum(samples.iter().copied()) / samples.len() as f64
}

/// Trapezoid rule for `∫₀^{2π} f(x) dx` with `n` nodes.
pub fn integrate_periodic<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    let h = TAU / n as f64;
    h * compensated_sum((0..n).map(|j| f(j as f64 * h)))
}

/// Indefinite integral `F(x_j) = ∫₀^{x_j} f` of a periodic function sampled
/// together with its derivative on `n` equispaced nodes. Returns `n + 1`
/// values; the last one is the full-period integral.
pub fn cumulative_integral(values: &[f64], derivatives: &[f64]) -> Vec<f64> {
    let n = values.len();
    assert_eq!(n, derivatives.len(), "sample/derivative length mismatch");
    let h = TAU / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = CompensatedSum::new();
    out.push(0.0);
    for j in 0..n {
        let k = (j + 1) % n;
        acc.add(0.5 * h * (values[j] + values[k]));
        acc.add(h * h / 12.0 * (derivatives[j] - derivatives[k]));
        out.push(acc.value());
    }
    out
}

/// Zero-mean periodic antiderivative of `f` (given with `f'`) on the grid.
/// The input must itself have zero mean for the result to be periodic.
pub fn zero_mean_antiderivative(values: &[f64], derivatives: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut cumulative = cumulative_integral(values, derivatives);
    cumulative.truncate(n);
    let mean = periodic_mean(&cumulative);
    cumulative.iter_mut().for_each(|g| *g -= mean);
    cumulative
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
