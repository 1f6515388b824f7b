//! Explicit lower-bound fields for the Korn quotient.
//!
//! * the planar vortex u_k(x) = Qx·ln(|x|)^k on the unit disk, Q the
//!   rotation generator, whose quotient f_k(p) tends to p − 1;
//! * the product lift to one more dimension;
//! * the rotational witness in even dimension that is asymptotically
//!   sharp for p = 1.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_exponent, Error, Result};
use crate::matalg::{SquareMatrix, Subspace};
use crate::quad::{composite_gauss, integrate, Tolerance};
use crate::radial::{centered_abs_moment, GammaSpec};
use crate::spectral::{gradient, korn_ratio, scalar_lp_norm, GridSpec, VectorField, Variant};
use crate::special::{ln_gamma, sphere_abs_mean};

/// Radius of the disk the unit-disk witness is mapped onto, in cell units.
pub const PLACEMENT_RADIUS: f64 = 0.45;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessSpec {
    k: u32,
    p: f64,
    d: usize,
    scale_r: f64,
}

impl WitnessSpec {
    pub fn new(k: u32, p: f64, d: usize, scale_r: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("witness order k must be at least 1".into()));
        }
        check_exponent(p)?;
        if d < 2 {
            return Err(Error::Dimension { found: d, reason: "witness needs d >= 2" });
        }
        if !(scale_r.is_finite() && scale_r > 0.0) {
            return Err(Error::Parameter(format!("lift scale must be positive, got {scale_r}")));
        }
        Ok(WitnessSpec { k, p, d, scale_r })
    }

    /// Planar witness of order k; p and r are irrelevant for sampling.
    pub fn planar(k: u32) -> Result<Self> {
        Self::new(k, 2.0, 2, 1.0)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn scale_r(&self) -> f64 {
        self.scale_r
    }
}

/// u_k at a point of the plane (unit-disk coordinates).
pub fn vortex_value(k: u32, x: [f64; 2]) -> [f64; 2] {
    let r = x[0].hypot(x[1]);
    if r >= 1.0 || r == 0.0 {
        return [0.0, 0.0];
    }
    let l = r.ln().powi(k as i32);
    [x[1] * l, -x[0] * l]
}

/// Samples R·u_k((x − c)/R) with c the cell center and R = [`PLACEMENT_RADIUS`],
/// so that the Jacobian is the unit-disk Jacobian transported to the cell.
pub fn vortex_field(spec: &WitnessSpec, grid: GridSpec) -> Result<VectorField> {
    if spec.d != 2 {
        return Err(Error::Dimension { found: spec.d, reason: "the vortex lives in the plane; use dimension_lift" });
    }
    if grid.dim() != 2 {
        return Err(Error::Dimension { found: grid.dim(), reason: "vortex sampling needs a planar grid" });
    }
    let rr = PLACEMENT_RADIUS;
    VectorField::from_fn(grid, |x| {
        let v = vortex_value(spec.k, [(x[0] - 0.5) / rr, (x[1] - 0.5) / rr]);
        vec![rr * v[0], rr * v[1]]
    })
}

/// Factor relating L^p norms over the cell to those over the unit disk:
/// ‖∇u_cell‖_{L^p(cell)} = R^{2/p}·‖∇u_k‖_{L^p(ℝ²)}.
pub fn cell_norm_factor(p: f64) -> f64 {
    PLACEMENT_RADIUS.powf(2.0 / p)
}

/// Closed-form norms of the vortex witness, kept in log space since Γ
/// overflows for large p(k−1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessNorms {
    pub ln_norm_e: f64,
    pub ln_norm_a: f64,
    /// ln Γ(p(k−1)+1)
    pub ln_i: f64,
    /// ln ∫₀^∞ e^{−t} t^{p(k−1)} |t/k − 1|^p dt
    pub ln_j: f64,
    /// f_k(p) = (J/I)^{1/p}
    pub ratio: f64,
    /// Quadrature error estimate for J/I.
    pub error: f64,
}

impl WitnessNorms {
    pub fn norm_e(&self) -> f64 {
        self.ln_norm_e.exp()
    }

    pub fn norm_a(&self) -> f64 {
        self.ln_norm_a.exp()
    }
}

pub fn witness_norms_closed_form(k: u32, p: f64) -> Result<WitnessNorms> {
    check_exponent(p)?;
    let spec = GammaSpec::new(p, k)?;
    // J/I = E|X/k − 1|^p with X ~ Γ(p(k−1)+1, 1), i.e. the centered moment of X_k.
    let moment = centered_abs_moment(&spec)?;
    let alpha = spec.shape();
    let kf = f64::from(k);
    let ln_i = ln_gamma(alpha);
    let ln_j = ln_i + moment.value.ln();
    let ln2 = std::f64::consts::LN_2;
    let ln_e_p = (2.0 * std::f64::consts::PI).ln() + p * kf.ln() - 0.5 * p * ln2 - alpha * ln2 + ln_i;
    let ratio = moment.value.powf(1.0 / p);
    Ok(WitnessNorms {
        ln_norm_e: ln_e_p / p,
        ln_norm_a: ln_e_p / p + ratio.ln(),
        ln_i,
        ln_j,
        ratio,
        error: moment.error,
    })
}

/// Lower and upper ends of the bracket f_k(p) ∈ [(p−1)(k−1)/k, p−1].
pub fn witness_bracket(k: u32, p: f64) -> (f64, f64) {
    let kf = f64::from(k);
    ((p - 1.0) * (kf - 1.0) / kf, p - 1.0)
}

/// The bump c(1−s²)⁴ on [−1, 1], normalized in L^p.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    amplitude: f64,
    p: f64,
}

impl Bump {
    pub fn normalized(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(Bump { amplitude: 1.0 / Self::unit_norm(p), p })
    }

    /// A bump with an arbitrary amplitude, for checking the normalization guard.
    pub fn with_amplitude(p: f64, amplitude: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(Bump { amplitude, p })
    }

    // ∫(1−s²)^{4p} ds = B(1/2, 4p+1)
    fn unit_norm(p: f64) -> f64 {
        let a = 4.0 * p + 1.0;
        let ln_beta = ln_gamma(0.5) + ln_gamma(a) - ln_gamma(a + 0.5);
        (ln_beta / p).exp()
    }

    pub fn lp_norm(&self) -> f64 {
        self.amplitude.abs() * Self::unit_norm(self.p)
    }

    pub fn value(&self, s: f64) -> f64 {
        if s.abs() >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - s * s).powi(4)
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        if s.abs() >= 1.0 {
            0.0
        } else {
            -8.0 * self.amplitude * s * (1.0 - s * s).powi(3)
        }
    }

    /// max |g′|, attained at s² = 1/7.
    pub fn derivative_sup(&self) -> f64 {
        self.derivative(-(1.0f64 / 7.0).sqrt()).abs()
    }
}

/// The field (x', s) ↦ f(r·x')·g(s) in one more dimension, kept in product
/// form. Dilating x' by r turns its Jacobian into
/// r·[[g(s)∇f(y), g′(s)f(y)/r], [0, 0]] with y = r·x', so every Korn
/// quotient is an integral over the base grid and the bump variable.
#[derive(Clone, Debug)]
pub struct DimensionLift {
    base: VectorField,
    bump: Bump,
    scale_r: f64,
}

impl DimensionLift {
    pub fn scale_r(&self) -> f64 {
        self.scale_r
    }

    pub fn base(&self) -> &VectorField {
        &self.base
    }

    fn lifted_jacobian(&self, grad: &SquareMatrix, f: &[f64], s: f64) -> SquareMatrix {
        let d = grad.dim();
        let g = self.bump.value(s);
        let dg = self.bump.derivative(s) / self.scale_r;
        SquareMatrix::from_fn(d + 1, |i, j| match (i < d, j < d) {
            (true, true) => g * grad.get(i, j),
            (true, false) => dg * f[i],
            _ => 0.0,
        })
    }

    /// Korn quotient of the lifted field.
    pub fn korn_ratio(&self, p: f64, variant: Variant) -> Result<f64> {
        check_exponent(p)?;
        let grad = gradient(&self.base);
        let nodes = composite_gauss(-1.0, 1.0, 16, 8);
        let (mut num, mut den) = (0.0, 0.0);
        let points = self.base.grid().points();
        for idx in 0..points {
            let jac = grad.at(idx);
            let f = self.base.value(idx);
            for &(s, w) in &nodes {
                let m = self.lifted_jacobian(&jac, &f, s);
                let (top, bottom) = match variant {
                    Variant::Plain => (m.project_unchecked(Subspace::Skew), m.project_unchecked(Subspace::Sym)),
                    Variant::TraceFree => {
                        let e0 = m.project_unchecked(Subspace::Sym0);
                        (m.sub(&e0), e0)
                    }
                    Variant::FullGradient => (m.clone(), m.project_unchecked(Subspace::Sym)),
                };
                num += w * top.norm().powf(p);
                den += w * bottom.norm().powf(p);
            }
        }
        if den <= 0.0 {
            return Err(Error::DegenerateDenominator);
        }
        Ok((num / den).powf(1.0 / p))
    }

    /// ‖f(r·)g‖_{L^p} over ℝ^{d+1} by product quadrature: r^{−d/p}‖f‖_p‖g‖_p.
    pub fn field_lp_norm(&self, p: f64) -> Result<f64> {
        let d = self.base.grid().dim() as f64;
        let mags: Vec<f64> = (0..self.base.grid().points())
            .map(|idx| self.base.value(idx).iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let base = scalar_lp_norm(&mags, p)?;
        let bump: f64 = composite_gauss(-1.0, 1.0, 16, 8)
            .iter()
            .map(|&(s, w)| w * self.bump.value(s).abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p);
        Ok(self.scale_r.powf(-d / p) * base * bump)
    }

    /// ‖𝒜(f)‖/(‖ℰ(f)‖ + 2‖g′‖_∞‖f‖/r), which tends to the base quotient as r → ∞.
    pub fn reported_bound(&self, p: f64) -> Result<f64> {
        let grad = gradient(&self.base);
        let skew = grad.project(Subspace::Skew).lp_norm(p)?;
        let sym = grad.project(Subspace::Sym).lp_norm(p)?;
        let mags: Vec<f64> = (0..self.base.grid().points())
            .map(|idx| self.base.value(idx).iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let f = scalar_lp_norm(&mags, p)?;
        let c = 2.0 * self.bump.derivative_sup();
        Ok(skew / (sym + c * f / self.scale_r))
    }
}

pub fn dimension_lift(base: VectorField, bump: Bump, scale_r: f64) -> Result<DimensionLift> {
    if (bump.lp_norm() - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(bump.lp_norm()));
    }
    if !(scale_r.is_finite() && scale_r > 0.0) {
        return Err(Error::Parameter(format!("lift scale must be positive, got {scale_r}")));
    }
    Ok(DimensionLift { base, bump, scale_r })
}

/// L¹ quotient of the rotational witness u(x) = (1−|x|²)·Jx on the unit
/// ball, J = [[0, Id], [−Id, 0]], with the bound 1 + 2√2/(c_d·d − √2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L1Radial {
    pub ratio: f64,
    pub paper_bound: f64,
}

fn check_even(d: usize) -> Result<()> {
    if d < 4 || d % 2 == 1 {
        return Err(Error::Dimension { found: d, reason: "rotational witness needs even d >= 4" });
    }
    Ok(())
}

pub fn l1_bound(d: usize) -> f64 {
    let s = std::f64::consts::SQRT_2;
    1.0 + 2.0 * s / (sphere_abs_mean(d) * d as f64 - s)
}

/// Exact radial reduction: |ℰ| = √2·r² and
/// |𝒜|² = d(1−r²)² − 4r²(1−r²) + 2r⁴ depend on r only.
pub fn l1_radial_ratio(d: usize) -> Result<L1Radial> {
    check_even(d)?;
    let df = d as f64;
    let skew = |r: f64| {
        let s = r * r;
        r.powi(d as i32 - 1) * (df * (1.0 - s).powi(2) - 4.0 * s * (1.0 - s) + 2.0 * s * s).sqrt()
    };
    let num = integrate(skew, &[0.0, 0.5, 1.0], Tolerance::default())?.value;
    let den = std::f64::consts::SQRT_2 / (df + 2.0);
    Ok(L1Radial { ratio: num / den, paper_bound: l1_bound(d) })
}

/// Monte Carlo estimate of the same quotient from full Jacobians at
/// uniform points of the ball, with a 4σ delta-method tolerance.
pub fn l1_radial_ratio_mc(d: usize, samples: usize, seed: u64) -> Result<(f64, f64)> {
    check_even(d)?;
    if samples < 2 {
        return Err(Error::Parameter("need at least two samples".into()));
    }
    let half = d / 2;
    let j = SquareMatrix::from_fn(d, |a, b| {
        if b == a + half {
            1.0
        } else if a == b + half {
            -1.0
        } else {
            0.0
        }
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a_vals = Vec::with_capacity(samples);
    let mut e_vals = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let u: f64 = rand::Rng::random(&mut rng);
        let r = u.powf(1.0 / d as f64);
        x.iter_mut().for_each(|v| *v *= r / n);
        let jx = j.mul_vec(&x);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let grad = j.scale(1.0 - r2).sub(&SquareMatrix::outer(&jx, &x).scale(2.0));
        a_vals.push(grad.project_unchecked(Subspace::Skew).norm());
        e_vals.push(grad.project_unchecked(Subspace::Sym).norm());
    }
    let n = samples as f64;
    let ma = a_vals.iter().sum::<f64>() / n;
    let me = e_vals.iter().sum::<f64>() / n;
    let ratio = ma / me;
    let var = a_vals.iter().zip(&e_vals).map(|(a, e)| (a - ratio * e).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((ratio, 4.0 * (var / n).sqrt() / me))
}

/// Spectral quotient of the sampled planar vortex.
pub fn sampled_vortex_ratio(k: u32, p: f64, n: usize) -> Result<f64> {
    let grid = GridSpec::new(2, n)?;
    let u = vortex_field(&WitnessSpec::planar(k)?, grid)?;
    korn_ratio(&u, p, Variant::Plain)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vortex_formula() {
        let v = vortex_value(1, [0.5, 0.0]);
        assert_eq!(v[0], 0.0);
        assert!((v[1] - (-0.5 * 0.5f64.ln())).abs() < 1e-15);
        assert_eq!(vortex_value(3, [0.8, 0.7]), [0.0, 0.0]);
        assert!(vortex_field(&WitnessSpec::new(2, 3.0, 3, 1.0).unwrap(), GridSpec::new(2, 16).unwrap()).is_err());
    }

    #[test]
    fn closed_form_small_cases() {
        let w = witness_norms_closed_form(1, 2.0).unwrap();
        assert!((w.ratio - 1.0).abs() < 1e-12);
        // k = 1: ‖ℰ‖₂² = 2π·(1/2)·(1/2)·Γ(1)
        assert!((w.norm_e().powi(2) - std::f64::consts::PI / 2.0).abs() < 1e-12);
        let w = witness_norms_closed_form(20, 4.0).unwrap();
        assert!(w.ratio >= 2.85 && w.ratio <= 3.0, "{}", w.ratio);
        let w = witness_norms_closed_form(50, 3.0).unwrap();
        assert!((w.ratio - 2.0).abs() <= 0.1);
        assert!(witness_norms_closed_form(100, 8.0).unwrap().ln_norm_e.is_finite());
    }

    #[test]
    fn bump_normalization() {
        let g = Bump::normalized(3.0).unwrap();
        let direct: f64 = composite_gauss(-1.0, 1.0, 16, 8).iter().map(|&(s, w)| w * g.value(s).powi(3)).sum();
        assert!((direct - 1.0).abs() < 1e-12);
        let grid = GridSpec::new(2, 16).unwrap();
        let u = vortex_field(&WitnessSpec::planar(1).unwrap(), grid).unwrap();
        assert!(matches!(
            dimension_lift(u, Bump::with_amplitude(3.0, 1.0).unwrap(), 2.0),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn lift_bound_increases_with_r() {
        let grid = GridSpec::new(2, 32).unwrap();
        let u = vortex_field(&WitnessSpec::planar(1).unwrap(), grid).unwrap();
        let base = korn_ratio(&u, 3.0, Variant::Plain).unwrap();
        let bounds: Vec<f64> = [1.0, 4.0, 16.0, 1e6]
            .iter()
            .map(|&r| dimension_lift(u.clone(), Bump::normalized(3.0).unwrap(), r).unwrap().reported_bound(3.0).unwrap())
            .collect();
        assert!(bounds.windows(2).all(|w| w[1] > w[0]));
        assert!((bounds[3] - base).abs() < 1e-5 * base);
    }

    #[test]
    fn lifted_norm_scaling() {
        let grid = GridSpec::new(2, 16).unwrap();
        let u = vortex_field(&WitnessSpec::planar(1).unwrap(), grid).unwrap();
        let p = 3.0;
        let n1 = dimension_lift(u.clone(), Bump::normalized(p).unwrap(), 1.0).unwrap().field_lp_norm(p).unwrap();
        let n8 = dimension_lift(u, Bump::normalized(p).unwrap(), 8.0).unwrap().field_lp_norm(p).unwrap();
        assert!((n8 / n1 - 8f64.powf(-2.0 / p)).abs() < 1e-12);
    }

    #[test]
    fn l1_witness() {
        let lo = l1_radial_ratio(4).unwrap();
        assert!(lo.ratio >= 1.0 && lo.ratio <= lo.paper_bound);
        assert!((lo.ratio - 1.02058).abs() < 1e-4);
        let (mc, tol) = l1_radial_ratio_mc(4, 200_000, 11).unwrap();
        assert!((mc - lo.ratio).abs() <= tol, "{mc} ± {tol} vs {}", lo.ratio);
        assert!(l1_radial_ratio(5).is_err());
        for d in 3..=64 {
            assert!(sphere_abs_mean(d) * d as f64 > std::f64::consts::SQRT_2);
        }
    }
}
