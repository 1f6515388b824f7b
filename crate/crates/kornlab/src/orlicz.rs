//! Young functions, their Simonenko indices and the Korn constant on the
//! Orlicz scale obtained by interpolating between two Lebesgue exponents.

use crate::error::{check_exponent, Error, Result};
use crate::special::p_star;

#[derive(Clone, Debug, PartialEq)]
enum Family {
    Power { p: f64 },
    /// (1 + λt)^{p−2} t²
    Mixed { lambda: f64, p: f64 },
    /// t log(1 + t)
    TLog,
    Tabulated { t: Vec<f64>, phi: Vec<f64>, dphi: Vec<f64> },
}

/// A C¹ Young function Φ, optionally precomposed with t ↦ t^r.
#[derive(Clone, Debug, PartialEq)]
pub struct YoungFunction {
    family: Family,
    inner_power: f64,
}

/// Abscissae used for validation spot checks.
fn spot_grid() -> Vec<f64> {
    log_grid(1e-4, 1e4, 10)
}

impl YoungFunction {
    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::YoungFunction(format!("t^p needs p >= 1, got {p}")));
        }
        Self::checked(Family::Power { p }, 1.0)
    }

    /// G_{λ,p}(t) = (1 + λt)^{p−2} t² for p ∈ (1, 2], λ > 0.
    pub fn mixed(lambda: f64, p: f64) -> Result<Self> {
        if !(p > 1.0 && p <= 2.0) || !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::YoungFunction(format!("G_(lambda,p) needs lambda > 0 and p in (1, 2], got ({lambda}, {p})")));
        }
        Self::checked(Family::Mixed { lambda, p }, 1.0)
    }

    pub fn t_log() -> Self {
        YoungFunction { family: Family::TLog, inner_power: 1.0 }
    }

    /// Samples (t, Φ(t), Φ′(t)) with increasing positive t; values between
    /// samples are linear interpolants.
    pub fn tabulated(t: Vec<f64>, phi: Vec<f64>, dphi: Vec<f64>) -> Result<Self> {
        if t.len() < 2 || t.len() != phi.len() || t.len() != dphi.len() {
            return Err(Error::YoungFunction("table needs at least two rows of equal length".into()));
        }
        if t[0] <= 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::YoungFunction("abscissae must be positive and increasing".into()));
        }
        if phi.windows(2).any(|w| w[1] < w[0]) || dphi.windows(2).any(|w| w[1] < w[0]) || dphi[0] < 0.0 {
            return Err(Error::YoungFunction("table is not convex increasing".into()));
        }
        Ok(YoungFunction { family: Family::Tabulated { t, phi, dphi }, inner_power: 1.0 })
    }

    /// Parses `t,phi,dphi` rows; blank lines, `#` comments and a header
    /// line starting with a letter are skipped.
    pub fn parse_table(text: &str) -> Result<Self> {
        let (mut t, mut phi, mut dphi) = (Vec::new(), Vec::new(), Vec::new());
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(|c: char| c.is_ascii_alphabetic()) {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::YoungFunction(format!("line {}: {e}", n + 1)))?;
            if fields.len() != 3 {
                return Err(Error::YoungFunction(format!("line {}: expected 3 columns", n + 1)));
            }
            t.push(fields[0]);
            phi.push(fields[1]);
            dphi.push(fields[2]);
        }
        Self::tabulated(t, phi, dphi)
    }

    /// Φ(t^r); the indices scale by r.
    pub fn compose_power(&self, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::YoungFunction(format!("power must be positive, got {r}")));
        }
        Self::checked(self.family.clone(), self.inner_power * r)
    }

    fn checked(family: Family, inner_power: f64) -> Result<Self> {
        let phi = YoungFunction { family, inner_power };
        if phi.value(0.0) != 0.0 {
            return Err(Error::YoungFunction("Phi(0) must vanish".into()));
        }
        let grid = spot_grid();
        let slopes: Vec<f64> = grid.iter().map(|&t| phi.derivative(t)).collect();
        let tol = 1e-12;
        if slopes.iter().any(|s| !(*s > 0.0)) || slopes.windows(2).any(|w| w[1] < w[0] * (1.0 - tol)) {
            return Err(Error::YoungFunction("not convex increasing on the spot-check grid".into()));
        }
        Ok(phi)
    }

    fn base_value(&self, s: f64) -> f64 {
        match &self.family {
            Family::Power { p } => s.powf(*p),
            Family::Mixed { lambda, p } => (1.0 + lambda * s).powf(p - 2.0) * s * s,
            Family::TLog => s * s.ln_1p(),
            Family::Tabulated { t, phi, .. } => interpolate(t, phi, s),
        }
    }

    fn base_derivative(&self, s: f64) -> f64 {
        match &self.family {
            Family::Power { p } => p * s.powf(p - 1.0),
            Family::Mixed { lambda, p } => {
                let b = 1.0 + lambda * s;
                b.powf(p - 3.0) * s * (2.0 * b + (p - 2.0) * lambda * s)
            }
            Family::TLog => s.ln_1p() + s / (1.0 + s),
            Family::Tabulated { t, dphi, .. } => interpolate(t, dphi, s),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.base_value(t.powf(self.inner_power))
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let r = self.inner_power;
        if r == 1.0 {
            return self.base_derivative(t);
        }
        r * t.powf(r - 1.0) * self.base_derivative(t.powf(r))
    }

    /// Sample abscissae for tabulated functions.
    pub fn table_points(&self) -> Option<Vec<f64>> {
        match &self.family {
            Family::Tabulated { t, .. } => Some(t.iter().map(|s| s.powf(1.0 / self.inner_power)).collect()),
            _ => None,
        }
    }
}

/// Linear interpolation with linear extrapolation from the end segments.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = xs.partition_point(|&v| v < x).clamp(1, xs.len() - 1);
    let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Log-spaced grid from `lo` to `hi` with `per_decade` intervals per decade.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    let n = ((b - a) * per_decade as f64).round().max(1.0) as usize;
    (0..=n).map(|i| 10f64.powf(a + (b - a) * i as f64 / n as f64)).collect()
}

/// Default index grid: 10⁻⁹ to 10⁹, 100 points per decade. Limits at 0 and
/// ∞ are reached to about 1e-9 relative for scale parameters of order one.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-9, 1e9, 100)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Indices {
    /// inf of tΦ′(t)/Φ(t) over the grid.
    pub lower: f64,
    /// sup of tΦ′(t)/Φ(t) over the grid.
    pub upper: f64,
    /// Largest ratio of consecutive grid points.
    pub resolution: f64,
}

pub fn simonenko_indices(phi: &YoungFunction, grid: &[f64]) -> Result<Indices> {
    if grid.is_empty() {
        return Err(Error::Parameter("empty grid".into()));
    }
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for &t in grid {
        let v = phi.value(t);
        if !(t > 0.0) {
            return Err(Error::Parameter(format!("grid point {t} is not positive")));
        }
        if !(v > 0.0) {
            return Err(Error::YoungFunction(format!("Phi({t}) = {v} at a positive point")));
        }
        let q = t * phi.derivative(t) / v;
        lower = lower.min(q);
        upper = upper.max(q);
    }
    let resolution = grid.windows(2).map(|w| w[1] / w[0]).fold(1.0, f64::max);
    Ok(Indices { lower, upper, resolution })
}

/// 2^{1/(pq′) + min(1/p, 1/q′)} for 1 < p ≤ q < ∞.
pub fn interpolation_k(p: f64, q: f64) -> Result<f64> {
    check_exponent(p)?;
    check_exponent(q)?;
    if p > q {
        return Err(Error::Parameter(format!("need p <= q, got ({p}, {q})")));
    }
    let q_dual = q / (q - 1.0);
    Ok(2f64.powf(1.0 / (p * q_dual) + (1.0 / p).min(1.0 / q_dual)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrliczConstant {
    pub indices: Indices,
    pub k: f64,
    /// √3 K(i, s) max(i*−1, s*−1)
    pub constant: f64,
    /// 2√3 max(i*−1, s*−1) when both indices sit on one side of 2.
    pub simplified: Option<f64>,
}

/// Slack for index comparisons with 1 and 2.
const INDEX_TOL: f64 = 1e-9;

pub fn orlicz_korn_constant(phi: &YoungFunction, grid: &[f64]) -> Result<OrliczConstant> {
    let indices = simonenko_indices(phi, grid)?;
    let (i, s) = (indices.lower, indices.upper);
    if !(i > 1.0 + INDEX_TOL) || !s.is_finite() {
        return Err(Error::IndicesDegenerate { lower: i, upper: s });
    }
    let k = interpolation_k(i, s)?;
    let worst = (p_star(i) - 1.0).max(p_star(s) - 1.0);
    let constant = 3f64.sqrt() * k * worst;
    let same_side = (i <= 2.0 + INDEX_TOL && s <= 2.0 + INDEX_TOL) || (i >= 2.0 - INDEX_TOL && s >= 2.0 - INDEX_TOL);
    let simplified = same_side.then(|| 2.0 * 3f64.sqrt() * worst);
    Ok(OrliczConstant { indices, k, constant, simplified })
}
