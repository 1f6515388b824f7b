//! Gamma-distribution identities behind the radial witness estimates.
//!
//! X_k denotes a Gamma variable with shape α = p(k−1)+1 and scale θ = 1/k.
//! Its centered moment E|X_k − 1|^p is exactly f_k(p)^p, the p-th power of
//! the Korn quotient of the planar vortex witness of order k.

use crate::error::{Error, Result};
use crate::quad::{integrate, Integral, Tolerance};
use crate::special::{ln_gamma, ln_gamma_ratio};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaSpec {
    p: f64,
    k: u32,
    shape: f64,
    scale: f64,
}

impl GammaSpec {
    pub fn new(p: f64, k: u32) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::Exponent(p));
        }
        if k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        let kf = f64::from(k);
        Ok(GammaSpec { p, k, shape: p * (kf - 1.0) + 1.0, scale: 1.0 / kf })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    fn ln_density(&self, x: f64) -> f64 {
        (self.shape - 1.0) * x.ln() - x / self.scale - self.shape * self.scale.ln() - ln_gamma(self.shape)
    }
}

/// E[X^s] = θ^s Γ(α+s)/Γ(α).
pub fn gamma_moment(spec: &GammaSpec, s: f64) -> Result<f64> {
    if spec.shape + s <= 0.0 {
        return Err(Error::Parameter(format!("moment order {s} needs alpha + s > 0")));
    }
    Ok((s * spec.scale.ln() + ln_gamma_ratio(spec.shape, s)?).exp())
}

/// E[X^p] − p·E[X^{p−1}] relative to E[X^p]; vanishes identically.
pub fn moment_identity_defect(spec: &GammaSpec) -> Result<f64> {
    let top = gamma_moment(spec, spec.p)?;
    let lower = gamma_moment(spec, spec.p - 1.0)?;
    Ok((top - spec.p * lower) / top)
}

/// E|X − 1|^p by adaptive quadrature against the log-space density.
pub fn centered_abs_moment(spec: &GammaSpec) -> Result<Integral> {
    let p = spec.p;
    let integrand = |x: f64| {
        if x <= 0.0 {
            return 0.0;
        }
        let dev = (x - 1.0).abs();
        if dev == 0.0 {
            return 0.0;
        }
        (p * dev.ln() + spec.ln_density(x)).exp()
    };
    let mean = spec.mean();
    let sd = spec.shape.sqrt() * spec.scale;
    let lo = (mean - 40.0 * sd).max(0.0);
    let hi = mean + 40.0 * sd + 40.0 * spec.scale;
    let mut breaks: Vec<f64> = [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|j| mean + j * sd)
        .chain([lo, hi, 1.0])
        .filter(|x| (lo..=hi).contains(x))
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    integrate(integrand, &breaks, Tolerance { abs: 0.0, rel: 1e-12, max_intervals: 4000 })
}

/// |E[X] − 1|^p = ((p−1)(k−1)/k)^p.
pub fn jensen_lower(spec: &GammaSpec) -> f64 {
    (spec.mean() - 1.0).abs().powf(spec.p)
}

/// RHS − LHS of |x−1|^p ≤ (p−1)^p + (p−1)^{p−1}/p^{p−2}·(x^p − p x^{p−1}).
pub fn majorant_slack(p: f64, x: f64) -> f64 {
    let c = (p - 1.0).powf(p - 1.0) / p.powf(p - 2.0);
    (p - 1.0).powf(p) + c * (x.powf(p) - p * x.powf(p - 1.0)) - (x - 1.0).abs().powf(p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MajorantCheck {
    pub min_slack: f64,
    pub argmin: f64,
    /// Sample points where the slack is below −1e−12 (relative to the terms).
    pub violations: Vec<f64>,
}

pub fn pointwise_majorant_check(p: f64, xs: &[f64]) -> Result<MajorantCheck> {
    if !(p.is_finite() && p >= 2.0) {
        return Err(Error::Exponent(p));
    }
    let mut out = MajorantCheck { min_slack: f64::INFINITY, argmin: f64::NAN, violations: Vec::new() };
    for &x in xs {
        if x < 0.0 {
            return Err(Error::Parameter(format!("majorant samples must be nonnegative, got {x}")));
        }
        let s = majorant_slack(p, x);
        if s < out.min_slack {
            out.min_slack = s;
            out.argmin = x;
        }
        let scale = 1.0 + (x - 1.0).abs().powf(p) + (p - 1.0).powf(p);
        if s < -1e-12 * scale {
            out.violations.push(x);
        }
    }
    Ok(out)
}

/// Default sample set: a window of half-width 20/√k around 1 and [0, 10].
pub fn majorant_samples(k: u32, count: usize) -> Vec<f64> {
    let half = 20.0 / f64::from(k.max(1)).sqrt();
    let (lo, hi) = ((1.0 - half).max(0.0), 1.0 + half);
    let n = count.max(2);
    let step = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (n - 1) as f64;
    (0..n).map(|i| step(lo, hi, i)).chain((0..n).map(|i| step(0.0, 10.0, i))).collect()
}

/// Minimizer of the majorant slack located by golden-section search on
/// [1, 2p + 10]; the slack is zero there.
pub fn majorant_tangency(p: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1.0, 2.0 * p + 10.0);
    let f = |x: f64| majorant_slack(p, x);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    while b - a > 1e-10 * (1.0 + a.abs()) {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FkRow {
    pub k: u32,
    pub f_k: f64,
    /// (p − 1) − f_k
    pub gap: f64,
    /// Whether the majorant chain certifies f_k ≤ p − 1 for this k.
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FkRates {
    pub rows: Vec<FkRow>,
    /// Exponent β of a least-squares fit gap ≈ C k^{−β} over k ≥ 10, when
    /// at least two gaps are positive.
    pub beta: Option<f64>,
}

/// f_k(p) = (E|X_k − 1|^p)^{1/p}.
pub fn f_k(p: f64, k: u32) -> Result<f64> {
    let spec = GammaSpec::new(p, k)?;
    Ok(centered_abs_moment(&spec)?.value.powf(1.0 / p))
}

pub fn fk_upper_and_rate(p: f64, ks: &[u32]) -> Result<FkRates> {
    if !(p.is_finite() && p >= 2.0) {
        return Err(Error::Exponent(p));
    }
    let rows = ks
        .iter()
        .map(|&k| {
            let spec = GammaSpec::new(p, k)?;
            let f = centered_abs_moment(&spec)?.value.powf(1.0 / p);
            let slack = pointwise_majorant_check(p, &majorant_samples(k, 2000))?;
            let defect = moment_identity_defect(&spec)?;
            Ok(FkRow {
                k,
                f_k: f,
                gap: (p - 1.0) - f,
                certified: slack.violations.is_empty() && defect.abs() <= 1e-12,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.k >= 10 && r.gap > 1e-12)
        .map(|r| (f64::from(r.k).ln(), r.gap.ln()))
        .collect();
    let beta = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        -sxy / sxx
    });
    Ok(FkRates { rows, beta })
}
