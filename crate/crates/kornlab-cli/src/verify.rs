//! The invariant suite behind `kornlab verify`. Every check is seeded from
//! the root seed and sized to finish in seconds.

use kornlab::burkholder::{
    bellman_iterate, random_pair, simulate_subordinate_pair, zigzag_convexity_check, BellmanOptions,
};
use kornlab::matalg::{skew_defect_operator, tracefree_defect_constant, SquareMatrix};
use kornlab::orlicz::{default_grid, interpolation_k, orlicz_korn_constant, simonenko_indices, YoungFunction};
use kornlab::radial::{
    centered_abs_moment, gamma_moment, jensen_lower, majorant_samples, pointwise_majorant_check, GammaSpec,
};
use kornlab::rankone::{
    c_of_p, eval_integrand, full_gradient_bounds, natural_bound, p_zero, planar_envelope, rank_one_test_at_zero,
    EnvelopeOptions, IntegrandSpec, Variant as Integrand,
};
use kornlab::spectral::{
    divergence, gradient, korn_identity_residual, korn_ratio, korn_upper_bound, random_band_limited,
    scalar_lp_norm, strain_parts, GridSpec, Variant,
};
use kornlab::special::{p_star, sphere_abs_mean};
use kornlab::witness::{l1_bound, l1_radial_ratio, witness_bracket, witness_norms_closed_form};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::task_seed;
use crate::output::fmt_num;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub tolerance: &'static str,
    pub measured: f64,
    pub pass: bool,
    pub error: Option<String>,
}

impl Check {
    pub fn line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let mut s = format!("{status} {:<28} measured={} tol: {}", self.name, fmt_num(self.measured), self.tolerance);
        if let Some(e) = &self.error {
            s.push_str(&format!(" error: {e}"));
        }
        s
    }
}

/// Measured value and verdict of one check.
type Outcome = kornlab::Result<(f64, bool)>;

fn run(name: &'static str, tolerance: &'static str, f: impl FnOnce() -> Outcome) -> Check {
    match f() {
        Ok((measured, pass)) => Check { name, tolerance, measured, pass: pass && !measured.is_nan(), error: None },
        Err(e) => Check { name, tolerance, measured: f64::NAN, pass: false, error: Some(e.to_string()) },
    }
}

fn fields(seed: u64) -> kornlab::Result<Vec<kornlab::spectral::VectorField>> {
    let mut out = Vec::new();
    for (i, (d, n)) in [(2, 32), (2, 32), (2, 32), (3, 16), (3, 16)].into_iter().enumerate() {
        out.push(random_band_limited(GridSpec::new(d, n)?, n / 4, task_seed(seed, i as u64))?);
    }
    Ok(out)
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Runs every check. `negate` flips the sign in the Gamma moment identity
/// so the harness itself can be seen to fail.
pub fn verify(seed: u64, negate: bool) -> Vec<Check> {
    let mut checks = Vec::new();

    checks.push(run("korn_identity_plain", "<= 1e-10", || {
        let worst = max_of(
            fields(seed)?.iter().map(|u| korn_identity_residual(u, Variant::Plain)).collect::<kornlab::Result<Vec<_>>>()?,
        );
        Ok((worst, worst <= 1e-10))
    }));
    checks.push(run("korn_identity_trace_free", "<= 1e-10", || {
        let worst = max_of(
            fields(seed)?
                .iter()
                .map(|u| korn_identity_residual(u, Variant::TraceFree))
                .collect::<kornlab::Result<Vec<_>>>()?,
        );
        Ok((worst, worst <= 1e-10))
    }));
    checks.push(run("p2_ratio_at_most_one", "ratio - 1 <= 1e-10", || {
        let worst = max_of(
            fields(seed)?.iter().map(|u| korn_ratio(u, 2.0, Variant::Plain)).collect::<kornlab::Result<Vec<_>>>()?,
        ) - 1.0;
        Ok((worst, worst <= 1e-10))
    }));
    checks.push(run("energy_identity", "relative <= 1e-10", || {
        let mut worst = 0.0f64;
        for u in fields(seed)? {
            let g = gradient(&u);
            let (e, a) = strain_parts(&g, Variant::Plain);
            let ne = e.lp_norm(2.0)?.powi(2);
            let na = a.lp_norm(2.0)?.powi(2);
            let nd = scalar_lp_norm(&divergence(&u), 2.0)?.powi(2);
            worst = worst.max((ne - na - nd).abs() / ne);
        }
        Ok((worst, worst <= 1e-10))
    }));
    checks.push(run("korn_upper_bound", "ratio/bound <= 1", || {
        let mut worst = 0.0f64;
        for u in fields(seed)? {
            for p in [1.5, 4.0] {
                worst = worst.max(korn_ratio(&u, p, Variant::Plain)? / korn_upper_bound(p));
            }
        }
        Ok((worst, worst <= 1.0 + 1e-6 / korn_upper_bound(4.0)))
    }));

    checks.push(run("skew_defect_min_eigenvalue", "|min + 1/2| <= 1e-10", || {
        let worst = max_of((2..=6).map(|d| skew_defect_operator(d).map(|op| (op.min_eigenvalue + 0.5).abs())).collect::<kornlab::Result<Vec<_>>>()?);
        Ok((worst, worst <= 1e-10))
    }));
    checks.push(run("skew_defect_operator_identity", "<= 1e-12", || {
        let worst = max_of((2..=6).map(|d| skew_defect_operator(d).map(|op| op.quadratic_residual())).collect::<kornlab::Result<Vec<_>>>()?);
        Ok((worst, worst <= 1e-12))
    }));
    checks.push(run("trace_free_constants", "|C - (4 | 3)| <= 1e-8", || {
        let mut worst = 0.0f64;
        for d in 2..=6 {
            let target = if d == 2 { 4.0 } else { 3.0 };
            worst = worst.max((tracefree_defect_constant(d)?.constant - target).abs());
        }
        Ok((worst, worst <= 1e-8))
    }));

    checks.push(run("burkholder_minorant", "max(G - V) <= 1e-12", || {
        let mut worst = f64::NEG_INFINITY;
        for (i, p) in [1.5, 3.0].into_iter().enumerate() {
            worst = worst.max(zigzag_convexity_check(p, 2000, task_seed(seed, 100 + i as u64), 1e-3)?.max_majorization_excess);
        }
        Ok((worst, worst <= 1e-12))
    }));
    checks.push(run("burkholder_zigzag", "min second difference >= -1e-8", || {
        let mut worst = f64::INFINITY;
        for (i, p) in [1.5, 3.0].into_iter().enumerate() {
            worst = worst.min(zigzag_convexity_check(p, 2000, task_seed(seed, 100 + i as u64), 1e-3)?.min_second_difference);
        }
        Ok((worst, worst >= -1e-8))
    }));
    checks.push(run("transform_bound", "ratio - (p*-1) <= 1e-10", || {
        let mut worst = f64::NEG_INFINITY;
        for p in [1.5, 3.0] {
            for t in 0..20 {
                let pair = random_pair(10, task_seed(seed, 200 + t))?;
                worst = worst.max(simulate_subordinate_pair(&pair, p)?.ratio - (p_star(p) - 1.0));
            }
        }
        Ok((worst, worst <= 1e-10))
    }));
    checks.push(run("bellman_monotone", "max increment <= 0", || {
        let t = bellman_iterate(4.0, BellmanOptions::new(32, 20))?;
        let worst = max_of(t.increments.iter().copied());
        Ok((worst, worst <= 1e-14))
    }));

    checks.push(run("envelope_zone", "|env - f| <= 1e-12 where f >= 0", || {
        let t = planar_envelope(4.0, 3.0, EnvelopeOptions::new(32, 100))?;
        let gap = t.gap_on_nonnegative_zone();
        Ok((gap, gap <= 1e-12))
    }));
    checks.push(run("envelope_burkholder", "relative sup gap <= 0.02", || {
        let t = planar_envelope(4.0, 3.0, EnvelopeOptions::new(32, 100))?;
        let gap = t.relative_gap_to_burkholder();
        Ok((gap, gap <= 0.02))
    }));
    checks.push(run("envelope_quadratic", "<= 1e-12", || {
        let t = planar_envelope(2.0, 1.0, EnvelopeOptions::new(16, 10))?;
        let worst = max_of((0..33).flat_map(|i| (0..33).map(move |j| (i, j))).map(|(i, j)| (t.value(i, j) - t.integrand(i, j)).abs()));
        Ok((worst, worst <= 1e-12))
    }));
    checks.push(run("rank_one_sign_at_zero", ">= -1e-10", || {
        let spec = IntegrandSpec::new(4.0, 3.0, Integrand::Plain)?;
        let m = rank_one_test_at_zero(&spec, 3, 500, task_seed(seed, 300))?.min_second_difference;
        Ok((m, m >= -1e-10))
    }));
    checks.push(run("integrand_homogeneity", "relative <= 1e-12", || {
        let mut rng = ChaCha8Rng::seed_from_u64(task_seed(seed, 301));
        let spec = IntegrandSpec::new(3.5, 2.0, Integrand::Plain)?;
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let a = SquareMatrix::random(3, &mut rng);
            let t: f64 = rng.random_range(-3.0..3.0);
            let lhs = eval_integrand(&spec, &a.scale(t));
            let rhs = t.abs().powf(3.5) * eval_integrand(&spec, &a);
            worst = worst.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
        }
        Ok((worst, worst <= 1e-12))
    }));

    checks.push(run("p_zero", "|p0 - 1.638| <= 1e-3", || {
        let d = (p_zero() - 1.638).abs();
        Ok((d, d <= 1e-3))
    }));
    checks.push(run("c_of_p_improvement", "0 < max <= 5e-4", || {
        let p0 = p_zero();
        let mut best = f64::NEG_INFINITY;
        let mut positive = true;
        for i in 1..200 {
            let p = p0 + (2.0 - p0) * f64::from(i) / 200.0;
            let gain = c_of_p(p)? - natural_bound(p);
            positive &= gain > 0.0;
            best = best.max(gain);
        }
        Ok((best, positive && best > 0.0 && best <= 5e-4))
    }));
    checks.push(run("c_of_p_continuity", "<= 1e-6", || {
        let p0 = p_zero();
        let jumps = [p0 + 1e-9, 2.0 - 1e-9].map(|p| c_of_p(p).map(|c| (c - natural_bound(p)).abs()));
        let worst = jumps[0].clone()?.max(jumps[1].clone()?);
        Ok((worst, worst <= 1e-6))
    }));
    checks.push(run("full_gradient_ordering", "min(upper - lower) >= 0", || {
        let mut worst = f64::INFINITY;
        for i in 1..=150 {
            let p = 1.0 + 15.0 * f64::from(i) / 150.0;
            let (lo, hi) = full_gradient_bounds(p)?;
            worst = worst.min(hi - lo);
        }
        Ok((worst, worst >= 0.0))
    }));

    checks.push(run("gamma_identity", "relative <= 1e-12", || {
        let sign = if negate { -1.0 } else { 1.0 };
        let mut worst = 0.0f64;
        for p in [2.0, 3.0, 4.0, 8.0] {
            for k in [1, 5, 20, 100] {
                let spec = GammaSpec::new(p, k)?;
                let top = gamma_moment(&spec, p)?;
                let lower = gamma_moment(&spec, p - 1.0)?;
                worst = worst.max((top - sign * p * lower).abs() / top);
            }
        }
        Ok((worst, worst <= 1e-12))
    }));
    checks.push(run("jensen_sandwich", "jensen <= exact <= (p-1)^p", || {
        let mut rng = ChaCha8Rng::seed_from_u64(task_seed(seed, 400));
        let mut worst = f64::INFINITY;
        for _ in 0..30 {
            let p: f64 = rng.random_range(2.0..8.0);
            let k: u32 = rng.random_range(1..=100);
            let spec = GammaSpec::new(p, k)?;
            let exact = centered_abs_moment(&spec)?.value;
            let scale = (p - 1.0).powf(p);
            worst = worst.min((exact - jensen_lower(&spec)) / scale).min((scale - exact) / scale);
        }
        Ok((worst, worst >= -1e-12))
    }));
    checks.push(run("majorant", "min slack >= -1e-12", || {
        let mut worst = f64::INFINITY;
        for p in [2.0, 3.0, 4.0, 8.0] {
            worst = worst.min(pointwise_majorant_check(p, &majorant_samples(20, 1000))?.min_slack);
        }
        Ok((worst, worst >= -1e-12))
    }));
    checks.push(run("witness_bracket", "inside [(p-1)(k-1)/k, p-1]", || {
        let mut worst = f64::INFINITY;
        for p in [2.0, 3.0, 5.0, 8.0] {
            for k in [1, 2, 5, 20, 100] {
                let f = witness_norms_closed_form(k, p)?.ratio;
                let (lo, hi) = witness_bracket(k, p);
                worst = worst.min(f - lo + 1e-10).min(hi - f + 1e-10);
            }
        }
        Ok((worst, worst >= 0.0))
    }));
    checks.push(run("l1_dimension_margin", "min c_d d - sqrt2 > 0", || {
        let worst = (3..=64).map(|d| sphere_abs_mean(d) * d as f64 - 2f64.sqrt()).fold(f64::INFINITY, f64::min);
        Ok((worst, worst > 0.0))
    }));
    checks.push(run("l1_witness", "1 <= ratio <= bound", || {
        let mut worst = f64::INFINITY;
        for d in [4, 8] {
            let w = l1_radial_ratio(d)?;
            worst = worst.min(w.ratio - 1.0).min(l1_bound(d) - w.ratio);
        }
        Ok((worst, worst >= 0.0))
    }));

    checks.push(run("orlicz_indices", "|(i, s) - (p, 2)| <= 1e-6", || {
        let mut worst = 0.0f64;
        for p in [1.2, 1.5, 1.8] {
            let ix = simonenko_indices(&YoungFunction::mixed(1.0, p)?, &default_grid())?;
            worst = worst.max((ix.lower - p).abs()).max((ix.upper - 2.0).abs());
        }
        Ok((worst, worst <= 1e-6))
    }));
    checks.push(run("interpolation_k", "max K < 4", || {
        let mut worst = 0.0f64;
        for i in 1..=40 {
            for j in i..=40 {
                let (p, q) = (1.0 + 0.25 * f64::from(i), 1.0 + 0.25 * f64::from(j));
                worst = worst.max(interpolation_k(p, q)?);
            }
        }
        Ok((worst, worst < 4.0))
    }));
    checks.push(run("orlicz_constant", "constant / (2 sqrt3 (p*-1)) <= 1", || {
        let mut worst = 0.0f64;
        for p in [1.2, 1.5, 1.8] {
            let c = orlicz_korn_constant(&YoungFunction::mixed(1.0, p)?, &default_grid())?;
            worst = worst.max(c.constant / (2.0 * 3f64.sqrt() * (p_star(p) - 1.0)));
        }
        Ok((worst, worst <= 1.0))
    }));

    checks
}

/// Plain-text report, one line per check plus a verdict.
pub fn report(checks: &[Check]) -> String {
    let mut out: String = checks.iter().map(|c| c.line() + "\n").collect();
    let failed = checks.iter().filter(|c| !c.pass).count();
    out.push_str(&format!("{} checks, {failed} failed\n", checks.len()));
    out
}
