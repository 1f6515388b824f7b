//! The Korn integrand f_{p,c}(A) = c^p|P_Sym A|^p − |P_Skew A|^p, its
//! rank-one behaviour at the origin, a two-direction convexification on the
//! plane spanned by one symmetric and one skew direction, and the curve c(p).

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::burkholder::{eval_g, BurkholderState};
use crate::error::{check_exponent, Error, Result};
use crate::matalg::{SquareMatrix, Subspace};
use crate::special::p_star;

/// Which split of the matrix space the integrand compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Sym against Skew.
    Plain,
    /// Trace-free symmetric part against its orthogonal complement.
    TraceFree,
    /// Sym against the whole matrix.
    FullGradient,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrandSpec {
    p: f64,
    c: f64,
    variant: Variant,
}

impl IntegrandSpec {
    pub fn new(p: f64, c: f64, variant: Variant) -> Result<Self> {
        check_exponent(p)?;
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Parameter(format!("c must be positive, got {c}")));
        }
        Ok(IntegrandSpec { p, c, variant })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }
}

/// p-homogeneous integrand value; negative values mean the inequality
/// with constant c fails at A.
pub fn eval_integrand(spec: &IntegrandSpec, a: &SquareMatrix) -> f64 {
    let (good, bad) = match spec.variant {
        Variant::Plain => {
            let sym = a.project_unchecked(Subspace::Sym);
            (sym.norm(), a.sub(&sym).norm())
        }
        Variant::TraceFree => {
            let sym0 = a.project_unchecked(Subspace::Sym0);
            (sym0.norm(), a.sub(&sym0).norm())
        }
        Variant::FullGradient => (a.project_unchecked(Subspace::Sym).norm(), a.norm()),
    };
    spec.c.powf(spec.p) * good.powf(spec.p) - bad.powf(spec.p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankOneTest {
    /// Smallest normalized second difference, or f(a⊗b) at S = 0.
    pub min_second_difference: f64,
    /// (a, b) of the worst direction a⊗b.
    pub worst_direction: (Vec<f64>, Vec<f64>),
}

fn unit_vector(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Rank-one convexity at the origin. For each seeded unit direction R = a⊗b
/// the sign of f(R) is recorded (convexity at 0 of a p-homogeneous function
/// along R), together with second differences of t ↦ f(tR + S) at t = 0 for
/// small base points S of norm 1e-3 and step 1e-2, divided by the step
/// squared.
pub fn rank_one_test_at_zero(spec: &IntegrandSpec, d: usize, n_directions: usize, seed: u64) -> Result<RankOneTest> {
    if d < 2 {
        return Err(Error::Dimension { found: d, reason: "rank-one tests need d >= 2" });
    }
    if n_directions == 0 {
        return Err(Error::Parameter("need at least one direction".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (base, step) = (1e-3, 1e-2);
    let mut worst = (f64::INFINITY, (Vec::new(), Vec::new()));
    for _ in 0..n_directions {
        let a = unit_vector(d, &mut rng);
        let b = unit_vector(d, &mut rng);
        let r = SquareMatrix::outer(&a, &b);
        let s = SquareMatrix::random(d, &mut rng);
        let s = s.scale(base / s.norm());
        let at = |t: f64, shift: &SquareMatrix| eval_integrand(spec, &r.scale(t).add(shift));
        let zero = SquareMatrix::zeros(d);
        let mut v = eval_integrand(spec, &r);
        // The shifted difference only probes convexity when f is smooth
        // enough at the scale of the step; p ≥ 2 guarantees that.
        if spec.p >= 2.0 {
            for shift in [&zero, &s] {
                let second = (at(step, shift) - 2.0 * at(0.0, shift) + at(-step, shift)) / (step * step);
                // Homogeneity: rescale to the unit step so the figure is scale free.
                v = v.min(second * step.powf(2.0 - spec.p));
            }
        }
        if v < worst.0 {
            worst = (v, (a, b));
        }
    }
    Ok(RankOneTest { min_second_difference: worst.0, worst_direction: worst.1 })
}

#[derive(Clone, Copy, Debug)]
pub struct EnvelopeOptions {
    /// Nodes per half axis; the lattice is {−1, …, −1/n, 0, 1/n, …, 1}².
    pub half_cells: usize,
    pub sweeps: usize,
    /// Fraction of the half axis kept when reporting, centered at 0.
    pub report_fraction: f64,
}

impl EnvelopeOptions {
    pub fn new(half_cells: usize, sweeps: usize) -> Self {
        EnvelopeOptions { half_cells, sweeps, report_fraction: 0.5 }
    }
}

#[derive(Clone, Debug)]
pub struct EnvelopeTable {
    pub p: f64,
    pub c: f64,
    pub half_cells: usize,
    /// Row-major over a, then b, both from −1 to 1.
    pub values: Vec<f64>,
    /// sup of the change per sweep (never positive).
    pub increments: Vec<f64>,
    pub report_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeRow {
    pub a: f64,
    pub b: f64,
    pub f: f64,
    pub envelope: f64,
    /// 𝒢_p(|b|, |a|)
    pub g: f64,
}

impl EnvelopeTable {
    fn side(&self) -> usize {
        2 * self.half_cells + 1
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64 - self.half_cells as f64) / self.half_cells as f64
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.side() + j]
    }

    pub fn integrand(&self, i: usize, j: usize) -> f64 {
        planar_integrand(self.p, self.c, self.coordinate(i), self.coordinate(j))
    }

    /// Rows of the margin-trimmed subgrid |a|, |b| ≤ report_fraction.
    pub fn rows(&self) -> Vec<EnvelopeRow> {
        let n = self.half_cells as i64;
        let keep = (self.report_fraction * self.half_cells as f64).floor() as i64;
        let mut out = Vec::new();
        for i in (n - keep)..=(n + keep) {
            for j in (n - keep)..=(n + keep) {
                let (i, j) = (i as usize, j as usize);
                let (a, b) = (self.coordinate(i), self.coordinate(j));
                let g = BurkholderState::new(self.p, b.abs(), a.abs()).map(|s| eval_g(&s)).unwrap_or(f64::NAN);
                out.push(EnvelopeRow { a, b, f: self.integrand(i, j), envelope: self.value(i, j), g });
            }
        }
        out
    }

    /// sup |envelope − 𝒢_p(|b|, |a|)| over the reported rows divided by the
    /// sup of |𝒢_p| there.
    pub fn relative_gap_to_burkholder(&self) -> f64 {
        let rows = self.rows();
        let scale = rows.iter().map(|r| r.g.abs()).fold(0.0, f64::max);
        rows.iter().map(|r| (r.envelope - r.g).abs()).fold(0.0, f64::max) / scale
    }

    /// sup |envelope − f| over reported rows with f ≥ 0.
    pub fn gap_on_nonnegative_zone(&self) -> f64 {
        self.rows().iter().filter(|r| r.f >= 0.0).map(|r| (r.envelope - r.f).abs()).fold(0.0, f64::max)
    }

    /// Largest violation of midpoint convexity along (1, ±1) over all
    /// lattice triples that fit in the grid.
    pub fn midpoint_convexity_defect(&self) -> f64 {
        let n = self.side() as i64;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut worst = 0.0f64;
                for j in 0..n {
                    for h in 1..n {
                        for e in [1i64, -1] {
                            let (i0, j0, i1, j1) = (i - h, j - e * h, i + h, j + e * h);
                            if i0 < 0 || i1 >= n || j0.min(j1) < 0 || j0.max(j1) >= n {
                                continue;
                            }
                            let avg = 0.5
                                * (self.value(i0 as usize, j0 as usize) + self.value(i1 as usize, j1 as usize));
                            worst = worst.max(self.value(i as usize, j as usize) - avg);
                        }
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// f_{p,c} on A(a, b) = a(e₁⊗e₂ + e₂⊗e₁)/√2 + b(e₁⊗e₂ − e₂⊗e₁)/√2, where
/// |P_Sym A| = |a| and |P_Skew A| = |b|.
pub fn planar_matrix(a: f64, b: f64) -> SquareMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    SquareMatrix::from_vec(2, vec![0.0, s * (a + b), s * (a - b), 0.0]).expect("2x2")
}

fn planar_integrand(p: f64, c: f64, a: f64, b: f64) -> f64 {
    c.powf(p) * a.abs().powf(p) - b.abs().powf(p)
}

/// Two-direction convexification of f_{p,c} on the (a, b) plane. Each sweep
/// replaces every node by the least of itself and the midpoint averages
/// over (a ± h, b ± eh), e = ±1, for dyadic h such that both endpoints stay
/// on the lattice. The diagonal directions are exactly the rank-one
/// directions of the plane. Sweeps read the previous iterate, so they run
/// row-parallel and the result does not depend on scheduling.
pub fn planar_envelope(p: f64, c: f64, opts: EnvelopeOptions) -> Result<EnvelopeTable> {
    check_exponent(p)?;
    if !(c >= 1.0 && c.is_finite()) {
        return Err(Error::Parameter(format!("envelope needs c >= 1, got {c}")));
    }
    let n = opts.half_cells;
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Parameter(format!("half_cells must be a power of two >= 2, got {n}")));
    }
    if !(opts.report_fraction > 0.0 && opts.report_fraction <= 1.0) {
        return Err(Error::Parameter("report_fraction must lie in (0, 1]".into()));
    }
    let side = 2 * n + 1;
    let steps: Vec<usize> = (0..=n.trailing_zeros()).map(|j| n >> j).collect();
    let coord = |i: usize| (i as f64 - n as f64) / n as f64;
    let mut values: Vec<f64> =
        (0..side * side).map(|idx| planar_integrand(p, c, coord(idx / side), coord(idx % side))).collect();
    let mut increments = Vec::with_capacity(opts.sweeps);
    let steps = &steps;
    for _ in 0..opts.sweeps {
        let prev = &values;
        let next: Vec<f64> = (0..side)
            .into_par_iter()
            .flat_map_iter(|i| {
                (0..side).map(move |j| {
                    let mut best = prev[i * side + j];
                    for &h in steps {
                        if i < h || i + h >= side {
                            continue;
                        }
                        for (ja, jb) in [(j + h, j.wrapping_sub(h)), (j.wrapping_sub(h), j + h)] {
                            if ja >= side || jb >= side {
                                continue;
                            }
                            let avg = 0.5 * (prev[(i + h) * side + ja] + prev[(i - h) * side + jb]);
                            best = best.min(avg);
                        }
                    }
                    best
                })
            })
            .collect();
        let rise = next.iter().zip(prev).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
        if rise > 0.0 || rise.is_nan() {
            return Err(Error::NonMonotone(rise));
        }
        increments.push(rise);
        values = next;
    }
    Ok(EnvelopeTable { p, c, half_cells: n, values, increments, report_fraction: opts.report_fraction })
}

/// u_p(t) = (p−1)(1+t²)^{(2−p)/2} − p + (1+t)^{2−p} − t(2−p)
fn u_p(p: f64, t: f64) -> f64 {
    (p - 1.0) * (1.0 + t * t).powf(0.5 * (2.0 - p)) - p + (1.0 + t).powf(2.0 - p) - t * (2.0 - p)
}

fn moebius(s: f64) -> f64 {
    (1.0 + s) / (1.0 - s)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Rightmost sign change of `f` on a uniform scan of [lo, hi], refined by
/// bisection. The left end of the s-range carries the trivial root s = −1.
fn rightmost_root(what: &'static str, lo: f64, hi: f64, points: usize, f: impl Fn(f64) -> f64) -> Result<f64> {
    let xs: Vec<f64> = (0..=points).map(|i| lo + (hi - lo) * i as f64 / points as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    for i in (0..points).rev() {
        if vals[i].is_finite() && vals[i + 1].is_finite() && (vals[i] < 0.0) != (vals[i + 1] < 0.0) {
            return Ok(bisect(xs[i], xs[i + 1], &f, 1e-12));
        }
    }
    Err(Error::RootBracket { what, lo, hi })
}

/// Threshold p₀ ≈ 1.638 below which c(p) is the natural bound.
pub fn p_zero() -> f64 {
    static P0: OnceLock<f64> = OnceLock::new();
    *P0.get_or_init(|| {
        rightmost_root("p0", 1.2, 1.99, 10_000, |p| u_p(p, moebius(-1.0 + 2.0 / p)))
            .expect("u_p changes sign on (1.2, 1.99)")
    })
}

/// √(1 + (p*−1)²)
pub fn natural_bound(p: f64) -> f64 {
    let q = p_star(p) - 1.0;
    (1.0 + q * q).sqrt()
}

/// Root s₀ ∈ (−1, 1) of s ↦ u_p(g(s)) for p ∈ (p₀, 2).
pub fn s_zero(p: f64) -> Result<f64> {
    let eps = 1e-9;
    rightmost_root("s0", -1.0 + eps, 1.0 - eps, 10_000, |s| u_p(p, moebius(s)))
}

pub fn c_of_p(p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p >= 2.0 || p <= p_zero() {
        return Ok(natural_bound(p));
    }
    let s0 = s_zero(p)?;
    let inner = 1.0 - 2f64.powf(1.0 - p) * (1.0 - s0).powf(p - 1.0) / ((p - 1.0) * (1.0 - s0) + (2.0 - p));
    if !(inner > 0.0) {
        return Err(Error::NoConvergence { what: "c(p)", detail: format!("nonpositive base {inner} at p = {p}") });
    }
    Ok(inner.powf(-1.0 / p))
}

/// (c(p), known upper bound) for the symmetric-part-against-gradient constant.
pub fn full_gradient_bounds(p: f64) -> Result<(f64, f64)> {
    let lower = c_of_p(p)?;
    let upper = if p >= 2.0 {
        (3.0 * (p - 1.0).powi(2) + 1.0).sqrt()
    } else {
        ((3f64.sqrt() * (p_star(p) - 1.0)).powf(p) + 1.0).powf(1.0 / p)
    };
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p: f64, c: f64) -> IntegrandSpec {
        IntegrandSpec::new(p, c, Variant::Plain).unwrap()
    }

    #[test]
    fn integrand_on_pure_parts() {
        let s = SquareMatrix::from_vec(2, vec![1.0, 2.0, 2.0, -1.0]).unwrap();
        let k = SquareMatrix::from_vec(2, vec![0.0, 3.0, -3.0, 0.0]).unwrap();
        let f = spec(3.0, 2.0);
        assert!((eval_integrand(&f, &s) - 8.0 * s.norm().powi(3)).abs() < 1e-12);
        assert!((eval_integrand(&f, &k) + k.norm().powi(3)).abs() < 1e-12);
        let full = IntegrandSpec::new(3.0, 2.0, Variant::FullGradient).unwrap();
        assert!((eval_integrand(&full, &s) - 7.0 * s.norm().powi(3)).abs() < 1e-10);
    }

    #[test]
    fn planar_matrix_normalization() {
        let m = planar_matrix(0.3, -0.7);
        assert!((m.project(Subspace::Sym).unwrap().norm() - 0.3).abs() < 1e-15);
        assert!((m.project(Subspace::Skew).unwrap().norm() - 0.7).abs() < 1e-15);
        assert!((eval_integrand(&spec(4.0, 3.0), &m) - planar_integrand(4.0, 3.0, 0.3, -0.7)).abs() < 1e-14);
    }

    #[test]
    fn rank_one_sign_at_zero() {
        let t = rank_one_test_at_zero(&spec(4.0, 3.0), 3, 500, 1).unwrap();
        assert!(t.min_second_difference >= -1e-10, "{t:?}");
        let t = rank_one_test_at_zero(&spec(2.0, 1.0), 3, 500, 2).unwrap();
        assert!(t.min_second_difference >= -1e-10, "{t:?}");
        // Below the rank-one ratio a pure direction already fails.
        let t = rank_one_test_at_zero(&spec(4.0, 0.9), 2, 500, 3).unwrap();
        assert!(t.min_second_difference < 0.0);
    }

    #[test]
    fn envelope_is_exact_for_quadratics() {
        let t = planar_envelope(2.0, 1.0, EnvelopeOptions::new(16, 5)).unwrap();
        for i in 0..33 {
            for j in 0..33 {
                assert!((t.value(i, j) - t.integrand(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn envelope_matches_burkholder_at_four() {
        let t = planar_envelope(4.0, 3.0, EnvelopeOptions::new(32, 100)).unwrap();
        assert_eq!(*t.increments.last().unwrap(), 0.0);
        assert!(t.gap_on_nonnegative_zone() < 1e-12);
        assert!(t.relative_gap_to_burkholder() < 0.02, "{}", t.relative_gap_to_burkholder());
        assert!(t.midpoint_convexity_defect() <= 1e-12);
        // Lower bound up to the lattice error.
        assert!(t.rows().iter().all(|r| r.envelope >= r.g - 0.02 * 81.0));
    }

    #[test]
    fn p_zero_value() {
        assert!((p_zero() - 1.638038678).abs() < 1e-8);
    }

    #[test]
    fn c_of_p_cases() {
        assert!((c_of_p(2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((c_of_p(1.5).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        let c = c_of_p(1.8).unwrap();
        let gain = c - natural_bound(1.8);
        assert!(gain > 0.0 && gain <= 5e-4, "{gain}");
    }

    #[test]
    fn full_gradient_values() {
        let (lo, hi) = full_gradient_bounds(4.0).unwrap();
        assert!((lo - 10f64.sqrt()).abs() < 1e-14 && (hi - 28f64.sqrt()).abs() < 1e-14);
        let (lo, hi) = full_gradient_bounds(2.0).unwrap();
        assert!((lo - 2f64.sqrt()).abs() < 1e-15 && (hi - 2.0).abs() < 1e-15);
    }
}
