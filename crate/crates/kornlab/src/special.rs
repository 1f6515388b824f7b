//! Special functions shared across modules.

use crate::error::{Error, Result};

/// Conjugate-symmetric exponent `max(p, p/(p-1))`.
pub fn p_star(p: f64) -> f64 {
    p.max(p / (p - 1.0))
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `ln Γ(a+s) − ln Γ(a)` without cancellation for large `a`.
pub fn ln_gamma_ratio(a: f64, s: f64) -> Result<f64> {
    if !(a > 0.0 && a + s > 0.0) {
        return Err(Error::Parameter(format!("gamma ratio needs a > 0 and a + s > 0 (a = {a}, s = {s})")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    // Shift both arguments above 12 with the recurrence, then use the
    // difference of two Stirling expansions.
    let mut shift = 0.0;
    let mut z = a;
    while z.min(z + s) < 12.0 {
        shift += (s / z).ln_1p();
        z += 1.0;
    }
    let z2 = z + s;
    let main = (z - 0.5) * (s / z).ln_1p() + s * z2.ln() - s;
    Ok(main + stirling_tail(z2) - stirling_tail(z) - shift)
}

fn stirling_tail(z: f64) -> f64 {
    let r = 1.0 / z;
    let r2 = r * r;
    r * (1.0 / 12.0
        - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 * (1.0 / 1188.0)))))
}

/// Mean of |θ₁| over the unit sphere in ℝ^d: Γ(d/2)/(√π Γ((d+1)/2)).
pub fn sphere_abs_mean(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    let lr = ln_gamma_ratio(half, 0.5).expect("d >= 1");
    (-lr).exp() / std::f64::consts::PI.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_ratio_matches_direct_values() {
        for &(a, s) in &[(0.5, 0.5), (3.0, 2.0), (7.5, -2.25), (50.0, 8.0), (1.0, 1e-3)] {
            let direct = ln_gamma(a + s) - ln_gamma(a);
            let r = ln_gamma_ratio(a, s).unwrap();
            assert!((r - direct).abs() < 1e-12 * (1.0 + direct.abs()), "{a} {s}: {r} vs {direct}");
        }
        // Γ(n+1)/Γ(n) = n exactly
        let r = ln_gamma_ratio(1500.25, 1.0).unwrap();
        assert!((r.exp() / 1500.25 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_mean_small_dimensions() {
        assert!((sphere_abs_mean(2) - 2.0 / std::f64::consts::PI).abs() < 1e-15);
        assert!((sphere_abs_mean(3) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn p_star_is_dual_symmetric() {
        assert_eq!(p_star(4.0), 4.0);
        assert!((p_star(4.0 / 3.0) - 4.0).abs() < 1e-14);
    }
}
