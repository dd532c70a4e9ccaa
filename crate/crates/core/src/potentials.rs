//! 2π-periodic potentials `U(x)` with their first two derivatives.

use std::f64::consts::{PI, TAU};
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{golden_section_min, periodic_grid, periodic_mean, zero_mean_antiderivative};

/// Default number of quadrature nodes per period.
pub const DEFAULT_QUADRATURE_NODES: usize = 1 << 12;
/// Default number of nodes for the coarse slope-bound scan.
pub const DEFAULT_SLOPE_SCAN_NODES: usize = 1 << 16;
/// Default sawtooth smoothing half-width.
pub const DEFAULT_SAWTOOTH_EPS: f64 = 0.05;

#[derive(Debug, Clone)]
pub enum PotentialKind {
    /// `U ≡ 0`. Violates the non-constant invariant; kept as an exact oracle
    /// for integrator and cycle tests.
    Flat,
    /// `U(x) = -cos x`.
    Cosine,
    /// `U(x) = sin x + μ sin 2x`.
    TwoHarmonic { mu: f64 },
    Sawtooth(Sawtooth),
    Tabulated(Arc<PeriodicSpline>),
}

/// A smooth periodic potential. Cheap to clone; immutable after construction.
#[derive(Debug, Clone)]
pub struct PeriodicPotential {
    kind: PotentialKind,
    reflected: bool,
    offset: f64,
}

impl PeriodicPotential {
    /// Degenerate flat potential, used as an analytic oracle.
    pub fn flat() -> Self {
        Self::from_kind(PotentialKind::Flat)
    }

    pub fn cosine() -> Self {
        Self::from_kind(PotentialKind::Cosine)
    }

    pub fn two_harmonic(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::invalid("mu", format!("must lie in (0, 1), got {mu}")));
        }
        Ok(Self::from_kind(PotentialKind::TwoHarmonic { mu }))
    }

    /// Piecewise-linear ratchet rising on `[0, a]` and falling on `[a, 2π]`,
    /// with both kinks smoothed over `[-eps, eps]`.
    pub fn sawtooth(a: f64, b: f64, eps: f64) -> Result<Self> {
        let saw = Sawtooth::new(a, b, eps)?;
        let mut p = Self::from_kind(PotentialKind::Sawtooth(saw));
        p.offset = -periodic_mean(&sample(&p, DEFAULT_QUADRATURE_NODES, Self::value));
        Ok(p)
    }

    /// Potential interpolated by a periodic cubic spline through `(x, U)`
    /// samples on `[0, 2π)`. The sample mean is removed.
    pub fn tabulated(xs: &[f64], us: &[f64]) -> Result<Self> {
        let spline = PeriodicSpline::new(xs, us)?;
        let mut p = Self::from_kind(PotentialKind::Tabulated(Arc::new(spline)));
        p.offset = -periodic_mean(&sample(&p, DEFAULT_QUADRATURE_NODES, Self::value));
        let bounds = slope_bounds(&p);
        if !(bounds.lower > 0.0 && bounds.upper > 0.0) {
            return Err(Error::Table("tabulated potential is constant".into()));
        }
        Ok(p)
    }

    /// Reads `(x, U)` rows from CSV. A non-numeric first row is treated as a header.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut xs = Vec::new();
        let mut us = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() < 2 {
                return Err(Error::Table(format!("row {} has fewer than two columns", i + 1)));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(x), Ok(u)) => {
                    xs.push(x);
                    us.push(u);
                }
                _ if i == 0 => continue,
                _ => return Err(Error::Table(format!("row {} is not numeric", i + 1))),
            }
        }
        Self::tabulated(&xs, &us)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    fn from_kind(kind: PotentialKind) -> Self {
        Self {
            kind,
            reflected: false,
            offset: 0.0,
        }
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    /// `Ũ(y) = U(-y)`, the potential seen by the mirrored coordinate `y = -x`.
    pub fn reflected(&self) -> Self {
        Self {
            reflected: !self.reflected,
            ..self.clone()
        }
    }

    pub fn is_reflected(&self) -> bool {
        self.reflected
    }

    /// True when `U(-x) = U(x)` holds by construction.
    pub fn is_even(&self) -> bool {
        match &self.kind {
            PotentialKind::Flat | PotentialKind::Cosine => true,
            PotentialKind::Sawtooth(s) => (s.a - PI).abs() < 1e-15,
            _ => false,
        }
    }

    pub fn name(&self) -> String {
        let base = match &self.kind {
            PotentialKind::Flat => "flat".to_string(),
            PotentialKind::Cosine => "cosine".to_string(),
            PotentialKind::TwoHarmonic { mu } => format!("two_harmonic(mu={mu})"),
            PotentialKind::Sawtooth(s) => format!("sawtooth(a={}, b={}, eps={})", s.a, s.b, s.eps),
            PotentialKind::Tabulated(t) => format!("tabulated({} nodes)", t.len()),
        };
        if self.reflected {
            format!("reflected {base}")
        } else {
            base
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match &self.kind {
            PotentialKind::TwoHarmonic { mu } => vec![("mu", *mu)],
            PotentialKind::Sawtooth(s) => vec![("a", s.a), ("b", s.b), ("eps", s.eps)],
            _ => Vec::new(),
        }
    }

    /// `U(x)`.
    pub fn value(&self, x: f64) -> f64 {
        let y = if self.reflected { -x } else { x };
        self.raw(y, 0) + self.offset
    }

    /// `U'(x)`.
    pub fn slope(&self, x: f64) -> f64 {
        if self.reflected {
            -self.raw(-x, 1)
        } else {
            self.raw(x, 1)
        }
    }

    /// `U''(x)`.
    pub fn curvature(&self, x: f64) -> f64 {
        let y = if self.reflected { -x } else { x };
        self.raw(y, 2)
    }

    fn raw(&self, x: f64, derivative: u8) -> f64 {
        match &self.kind {
            PotentialKind::Flat => 0.0,
            PotentialKind::Cosine => match derivative {
                0 => -x.cos(),
                1 => x.sin(),
                _ => x.cos(),
            },
            PotentialKind::TwoHarmonic { mu } => match derivative {
                0 => x.sin() + mu * (2.0 * x).sin(),
                1 => x.cos() + 2.0 * mu * (2.0 * x).cos(),
                _ => -x.sin() - 4.0 * mu * (2.0 * x).sin(),
            },
            PotentialKind::Sawtooth(s) => s.eval(x, derivative),
            PotentialKind::Tabulated(t) => t.eval(x, derivative),
        }
    }
}

fn sample(p: &PeriodicPotential, n: usize, f: fn(&PeriodicPotential, f64) -> f64) -> Vec<f64> {
    periodic_grid(n).into_iter().map(|x| f(p, x)).collect()
}

/// Sawtooth with kinks at `x = 0` and `x = a`, each smoothed by convolving
/// with the C² kernel `(35/32)(1 - s²)³` of half-width `eps`. Outside the
/// `eps`-neighbourhoods of the kinks the potential is exactly linear.
#[derive(Debug, Clone, Copy)]
pub struct Sawtooth {
    pub a: f64,
    pub b: f64,
    pub eps: f64,
}

impl Sawtooth {
    pub fn new(a: f64, b: f64, eps: f64) -> Result<Self> {
        if !(a > 0.0 && a < TAU) {
            return Err(Error::invalid("a", format!("must lie in (0, 2π), got {a}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid("b", format!("must be positive, got {b}")));
        }
        let limit = a.min(TAU - a) / 4.0;
        if !(eps > 0.0 && eps < limit) {
            return Err(Error::invalid(
                "eps",
                format!("must lie in (0, {limit:.6}) for a = {a}, got {eps}"),
            ));
        }
        Ok(Self { a, b, eps })
    }

    fn rising(&self) -> f64 {
        self.b / self.a
    }

    fn falling(&self) -> f64 {
        -self.b / (TAU - self.a)
    }

    /// The unsmoothed piecewise-linear profile.
    pub fn sharp_value(&self, x: f64) -> f64 {
        let y = x.rem_euclid(TAU);
        if y <= self.a {
            self.b * y / self.a - self.b / 2.0
        } else {
            self.b * (TAU - y) / (TAU - self.a) - self.b / 2.0
        }
    }

    /// Zero-mean antiderivative of the unsmoothed profile.
    pub fn sharp_antiderivative(&self, x: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        let y = x.rem_euclid(TAU);
        let c = b * (PI - a) / 6.0;
        if y <= a {
            b * y * y / (2.0 * a) - b * y / 2.0 - c
        } else {
            let r = TAU - y;
            -b * r * r / (2.0 * (TAU - a)) + b * r / 2.0 - c
        }
    }

    fn eval(&self, x: f64, derivative: u8) -> f64 {
        let y = x.rem_euclid(TAU);
        let (s1, s2) = (self.rising(), self.falling());
        // (kink position value, left slope, right slope, signed offset)
        let kink = if y < self.eps {
            Some((-self.b / 2.0, s2, s1, y))
        } else if y > TAU - self.eps {
            Some((-self.b / 2.0, s2, s1, y - TAU))
        } else if (y - self.a).abs() < self.eps {
            Some((self.b / 2.0, s1, s2, y - self.a))
        } else {
            None
        };
        match kink {
            Some((u0, left, right, z)) => {
                let t = z / self.eps;
                let jump = right - left;
                match derivative {
                    0 => u0 + left * z + jump * self.eps * ramp(t),
                    1 => left + jump * step(t),
                    _ => jump * kernel(t) / self.eps,
                }
            }
            None => match derivative {
                0 => self.sharp_value(y),
                1 => {
                    if y < self.a {
                        s1
                    } else {
                        s2
                    }
                }
                _ => 0.0,
            },
        }
    }
}

fn kernel(t: f64) -> f64 {
    let q = 1.0 - t * t;
    35.0 / 32.0 * q * q * q
}

fn step(t: f64) -> f64 {
    let t2 = t * t;
    0.5 + 35.0 / 32.0 * t * (1.0 - t2 + 0.6 * t2 * t2 - t2 * t2 * t2 / 7.0)
}

fn ramp(t: f64) -> f64 {
    let t2 = t * t;
    let q = t2 / 2.0 - t2 * t2 / 4.0 + t2 * t2 * t2 / 10.0 - t2 * t2 * t2 * t2 / 56.0;
    0.5 * (t + 1.0) + 35.0 / 32.0 * (q - 93.0 / 280.0)
}

/// Periodic cubic spline on `[0, 2π)`.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl PeriodicSpline {
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n != ys.len() {
            return Err(Error::Table("x and U columns differ in length".into()));
        }
        if n < 4 {
            return Err(Error::Table(format!("need at least 4 samples, got {n}")));
        }
        if xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(Error::Table("non-finite sample".into()));
        }
        if xs[0] < 0.0 || xs[n - 1] >= TAU || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Table(
                "x samples must be strictly increasing within [0, 2π)".into(),
            ));
        }
        let h: Vec<f64> = (0..n)
            .map(|i| if i + 1 < n { xs[i + 1] - xs[i] } else { xs[0] + TAU - xs[i] })
            .collect();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            sub[i] = h[prev];
            diag[i] = 2.0 * (h[prev] + h[i]);
            sup[i] = h[i];
            rhs[i] = 6.0 * ((ys[next] - ys[i]) / h[i] - (ys[i] - ys[prev]) / h[prev]);
        }
        let second = solve_cyclic_tridiagonal(&sub, &diag, &sup, &rhs);
        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            second,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn eval(&self, x: f64, derivative: u8) -> f64 {
        let n = self.xs.len();
        let mut y = x.rem_euclid(TAU);
        let i = match self.xs.partition_point(|&xi| xi <= y) {
            0 => {
                y += TAU;
                n - 1
            }
            k => k - 1,
        };
        let j = (i + 1) % n;
        let x0 = self.xs[i];
        let x1 = if j == 0 { self.xs[0] + TAU } else { self.xs[j] };
        let h = x1 - x0;
        let (a, b) = (x1 - y, y - x0);
        let (m0, m1) = (self.second[i], self.second[j]);
        let (y0, y1) = (self.ys[i], self.ys[j]);
        match derivative {
            0 => {
                m0 * a * a * a / (6.0 * h)
                    + m1 * b * b * b / (6.0 * h)
                    + (y0 / h - m0 * h / 6.0) * a
                    + (y1 / h - m1 * h / 6.0) * b
            }
            1 => {
                -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) - (y0 / h - m0 * h / 6.0)
                    + (y1 / h - m1 * h / 6.0)
            }
            _ => (m0 * a + m1 * b) / h,
        }
    }
}

/// Cyclic tridiagonal solve via Sherman–Morrison. `sub[0]` couples row 0 to
/// the last unknown and `sup[n-1]` couples the last row to unknown 0.
fn solve_cyclic_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(sub, &b, sup, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(sub, &b, sup, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / denom;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// `(m, M)` with `-m = min U'` and `M = max U'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeBounds {
    /// `m = -min U'`.
    pub lower: f64,
    /// `M = max U'`.
    pub upper: f64,
}

impl SlopeBounds {
    pub fn largest(&self) -> f64 {
        self.lower.max(self.upper)
    }
}

pub fn slope_bounds(p: &PeriodicPotential) -> SlopeBounds {
    slope_bounds_with(p, DEFAULT_SLOPE_SCAN_NODES)
}

/// Dense scan of `U'` followed by golden-section refinement of the best
/// bracket on each side.
pub fn slope_bounds_with(p: &PeriodicPotential, nodes: usize) -> SlopeBounds {
    let h = TAU / nodes as f64;
    let (mut imin, mut imax) = (0usize, 0usize);
    let (mut fmin, mut fmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in 0..nodes {
        let s = p.slope(j as f64 * h);
        if s < fmin {
            fmin = s;
            imin = j;
        }
        if s > fmax {
            fmax = s;
            imax = j;
        }
    }
    let refine = |center: usize, sign: f64| {
        let c = center as f64 * h;
        golden_section_min(|x| sign * p.slope(x), c - h, c + h, 1e-13).1 * sign
    };
    let min = refine(imin, 1.0).min(fmin);
    let max = refine(imax, -1.0).max(fmax);
    SlopeBounds {
        lower: -min,
        upper: max,
    }
}

/// Zero-mean antiderivative `G` of `U`, stored on a uniform grid and
/// evaluated by cubic Hermite interpolation with `G' = U` at the nodes.
#[derive(Debug, Clone)]
pub struct Antiderivative {
    potential: PeriodicPotential,
    nodes: Vec<f64>,
}

impl Antiderivative {
    pub fn resolution(&self) -> usize {
        self.nodes.len()
    }

    /// Grid samples `G(2πj/n)`.
    pub fn samples(&self) -> &[f64] {
        &self.nodes
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        let h = TAU / n as f64;
        let y = x.rem_euclid(TAU);
        let i = ((y / h).floor() as usize).min(n - 1);
        let j = (i + 1) % n;
        let x0 = i as f64 * h;
        let t = (y - x0) / h;
        let (g0, g1) = (self.nodes[i], self.nodes[j]);
        let (d0, d1) = (self.potential.value(x0), self.potential.value(x0 + h));
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * g0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * g1
            + (t3 - t2) * h * d1
    }
}

pub fn antiderivative_zero_mean(p: &PeriodicPotential) -> Result<Antiderivative> {
    antiderivative_zero_mean_with(p, DEFAULT_QUADRATURE_NODES)
}

pub fn antiderivative_zero_mean_with(p: &PeriodicPotential, nodes: usize) -> Result<Antiderivative> {
    let u = sample(p, nodes, PeriodicPotential::value);
    let mean = periodic_mean(&u);
    if mean.abs() > 1e-10 {
        return Err(Error::NumericalConsistency(format!(
            "potential mean {mean:.3e} is not zero; the antiderivative would not be periodic"
        )));
    }
    let du = sample(p, nodes, PeriodicPotential::slope);
    Ok(Antiderivative {
        potential: p.clone(),
        nodes: zero_mean_antiderivative(&u, &du),
    })
}

/// Config-file description of a potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Cosine,
    TwoHarmonic {
        mu: f64,
    },
    Sawtooth {
        a: f64,
        #[serde(default = "one")]
        b: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    Tabulated {
        path: std::path::PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

fn default_eps() -> f64 {
    DEFAULT_SAWTOOTH_EPS
}

impl PotentialSpec {
    pub fn build(&self) -> Result<PeriodicPotential> {
        match self {
            PotentialSpec::Cosine => Ok(PeriodicPotential::cosine()),
            PotentialSpec::TwoHarmonic { mu } => PeriodicPotential::two_harmonic(*mu),
            PotentialSpec::Sawtooth { a, b, eps } => PeriodicPotential::sawtooth(*a, *b, *eps),
            PotentialSpec::Tabulated { path } => PeriodicPotential::from_csv_path(path),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_max(n: usize, f: impl Fn(f64) -> f64) -> f64 {
        periodic_grid(n).into_iter().map(f).fold(0.0, |m, v| m.max(v.abs()))
    }

    #[test]
    fn cosine_point_values_and_bounds() {
        let p = PeriodicPotential::cosine();
        assert_eq!(p.value(0.0), -1.0);
        assert!((p.slope(PI / 2.0) - 1.0).abs() < 1e-15);
        assert!((p.value(PI) - 1.0).abs() < 1e-15);
        assert!((p.value(-PI) - p.value(PI)).abs() < 1e-15);
        let b = slope_bounds(&p);
        assert!((b.lower - 1.0).abs() < 1e-12 && (b.upper - 1.0).abs() < 1e-12, "{b:?}");
        assert!(periodic_mean(&sample(&p, 4096, PeriodicPotential::value)).abs() < 1e-14);
    }

    #[test]
    fn two_harmonic_rejects_mu_outside_unit_interval() {
        for mu in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(PeriodicPotential::two_harmonic(mu).is_err(), "mu = {mu}");
        }
    }

    #[test]
    fn two_harmonic_antiderivative_matches_closed_form() {
        let mu = 0.5;
        let p = PeriodicPotential::two_harmonic(mu).unwrap();
        let g = antiderivative_zero_mean(&p).unwrap();
        assert!((g.eval(0.0) + 1.25).abs() < 1e-12);
        let err = grid_max(999, |x| g.eval(x) - (-x.cos() - mu / 2.0 * (2.0 * x).cos()));
        assert!(err < 1e-12, "max error {err}");
        assert!(periodic_mean(g.samples()).abs() < 1e-14);
    }

    #[test]
    fn cosine_antiderivative_is_minus_sine() {
        let g = antiderivative_zero_mean(&PeriodicPotential::cosine()).unwrap();
        let err = grid_max(777, |x| g.eval(x) + x.sin());
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn two_harmonic_slope_bounds_match_brute_force() {
        let mu = 0.5;
        let p = PeriodicPotential::two_harmonic(mu).unwrap();
        let n = 1_000_000;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..n {
            let s = p.slope(TAU * j as f64 / n as f64);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        let b = slope_bounds(&p);
        // brute force can only undershoot the true extrema
        assert!(b.lower >= -lo - 1e-12 && b.lower - (-lo) < 1e-10, "{b:?} vs {lo}");
        assert!(b.upper >= hi - 1e-12 && b.upper - hi < 1e-10, "{b:?} vs {hi}");
        // U' = cos x + cos 2x: max 2 at x = 0; min -9/8 at cos x = -1/4
        assert!((b.upper - 2.0).abs() < 1e-12);
        assert!((b.lower - 1.125).abs() < 1e-12);
    }

    #[test]
    fn small_mu_bounds_approach_unit() {
        let b = slope_bounds(&PeriodicPotential::two_harmonic(1e-9).unwrap());
        assert!((b.lower - 1.0).abs() < 1e-6 && (b.upper - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sawtooth_matches_linear_profile_away_from_kinks() {
        let p = PeriodicPotential::sawtooth(PI, 1.0, 0.05).unwrap();
        assert!(p.value(PI / 2.0).abs() < 1e-12);
        let PotentialKind::Sawtooth(s) = p.kind().clone() else { unreachable!() };
        for x in [0.2, 1.0, 2.5, 3.5, 5.0, 6.0] {
            assert!((p.value(x) - s.sharp_value(x)).abs() < 1e-12, "x = {x}");
        }
        assert!(periodic_mean(&sample(&p, 4096, PeriodicPotential::value)).abs() < 1e-10);
    }

    #[test]
    fn sawtooth_slopes_are_bounded_by_ramps() {
        let a = 1.5 * PI;
        let p = PeriodicPotential::sawtooth(a, 1.0, 0.05).unwrap();
        let b = slope_bounds(&p);
        assert!((b.upper - 1.0 / a).abs() < 1e-12);
        assert!((b.lower - 1.0 / (TAU - a)).abs() < 1e-12);
        let steep = (1.0 / a).max(1.0 / (TAU - a));
        assert!(grid_max(100_000, |x| p.slope(x)) <= steep + 1e-12);
    }

    #[test]
    fn sawtooth_rejects_degenerate_geometry() {
        assert!(PeriodicPotential::sawtooth(0.4, 1.0, 0.2).is_err());
        assert!(PeriodicPotential::sawtooth(0.0, 1.0, 0.01).is_err());
        assert!(PeriodicPotential::sawtooth(1.0, -1.0, 0.01).is_err());
    }

    #[test]
    fn sawtooth_antiderivative_close_to_sharp_profile() {
        let (a, b, eps) = (1.5 * PI, 1.0, 0.05);
        let p = PeriodicPotential::sawtooth(a, b, eps).unwrap();
        let g = antiderivative_zero_mean(&p).unwrap();
        let s = Sawtooth::new(a, b, eps).unwrap();
        assert!((s.sharp_antiderivative(0.0) + b * (PI - a) / 6.0).abs() < 1e-15);
        // smoothing moves G by O(b eps²) away from the kinks
        for x in [0.0, 1.0, 2.0, 3.0, 4.0, 5.5] {
            let d = (g.eval(x) - s.sharp_antiderivative(x)).abs();
            assert!(d < b * eps * eps, "x = {x}: {d}");
        }
    }

    #[test]
    fn reflection_mirrors_value_and_slope() {
        let p = PeriodicPotential::two_harmonic(0.3).unwrap();
        let r = p.reflected();
        for x in [0.1, 1.3, 4.0] {
            assert!((r.value(x) - p.value(-x)).abs() < 1e-15);
            assert!((r.slope(x) + p.slope(-x)).abs() < 1e-15);
            assert!((r.curvature(x) - p.curvature(-x)).abs() < 1e-15);
        }
        let b = slope_bounds(&p);
        let br = slope_bounds(&r);
        assert!((b.lower - br.upper).abs() < 1e-12 && (b.upper - br.lower).abs() < 1e-12);
    }

    #[test]
    fn tabulated_reproduces_smooth_potential() {
        let n = 256;
        let xs = periodic_grid(n);
        let us: Vec<f64> = xs.iter().map(|x| x.sin() + 0.5 * (2.0 * x).sin()).collect();
        let p = PeriodicPotential::tabulated(&xs, &us).unwrap();
        let err = grid_max(1001, |x| p.value(x) - (x.sin() + 0.5 * (2.0 * x).sin()));
        assert!(err < 1e-6, "{err}");
        let derr = grid_max(1001, |x| p.slope(x) - (x.cos() + (2.0 * x).cos()));
        assert!(derr < 1e-4, "{derr}");
    }

    #[test]
    fn tabulated_csv_with_header() {
        let mut text = String::from("x,U\n");
        for j in 0..64 {
            let x = TAU * j as f64 / 64.0;
            text.push_str(&format!("{x},{}\n", -x.cos() + 3.0));
        }
        let p = PeriodicPotential::from_csv_reader(text.as_bytes()).unwrap();
        // mean removed
        assert!((p.value(0.0) + 1.0).abs() < 1e-4);
    }

    #[test]
    fn tabulated_rejects_bad_tables() {
        assert!(PeriodicPotential::tabulated(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]).is_err());
        assert!(PeriodicPotential::tabulated(&[0.0, 2.0, 1.0, 3.0], &[0.0, 1.0, 0.0, 1.0]).is_err());
        assert!(PeriodicPotential::tabulated(&[0.0, 1.0, 2.0, 7.0], &[0.0, 1.0, 0.0, 1.0]).is_err());
        let xs = periodic_grid(8);
        assert!(PeriodicPotential::tabulated(&xs, &[2.0; 8]).is_err());
    }

    #[test]
    fn antiderivative_rejects_nonzero_mean() {
        // a tabulated potential has its mean removed, so build a biased one by hand
        let p = PeriodicPotential {
            kind: PotentialKind::Cosine,
            reflected: false,
            offset: 0.25,
        };
        assert!(matches!(
            antiderivative_zero_mean(&p),
            Err(Error::NumericalConsistency(_))
        ));
    }
}
