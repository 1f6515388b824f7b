//! Fourier-multiplier engine on the periodic unit torus.
//!
//! Fields are stored component-wise on an `n^d` lattice with axis 0 varying
//! slowest. Derivatives use the symbol `2πiξ`; frequency components with a
//! coordinate on the Nyquist index `−n/2` are dropped by differentiation,
//! since an odd symbol cannot be represented there by a real field. The
//! second-order Riesz matrix is even and keeps the Nyquist rows.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_exponent, Error, Result};
use crate::matalg::{SquareMatrix, Subspace};
use crate::special::p_star;

/// Default cap on the number of lattice points per field.
pub const MAX_POINTS: usize = 1 << 20;

/// Uniform lattice on [0,1)^d.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridSpec {
    dim: usize,
    n: usize,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        Self::with_cap(dim, n, MAX_POINTS)
    }

    pub fn with_cap(dim: usize, n: usize, cap: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::Grid { n, d: dim, reason: "dimension must be 2 or 3" });
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Grid { n, d: dim, reason: "n must be a power of two >= 8" });
        }
        match n.checked_pow(dim as u32) {
            Some(total) if total <= cap => Ok(GridSpec { dim, n }),
            _ => Err(Error::Grid { n, d: dim, reason: "point count exceeds the memory cap" }),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Lattice multi-index of a flat index.
    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.dim).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    /// Physical coordinates in [0,1)^d.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let h = 1.0 / self.n as f64;
        [m[0] as f64 * h, m[1] as f64 * h, m[2] as f64 * h]
    }

    /// Integer frequency in [−n/2, n/2) along each axis.
    pub fn frequency(&self, idx: usize) -> [i64; 3] {
        let m = self.multi_index(idx);
        let half = self.n / 2;
        let mut out = [0i64; 3];
        for a in 0..self.dim {
            out[a] = if m[a] < half { m[a] as i64 } else { m[a] as i64 - self.n as i64 };
        }
        out
    }

    fn has_nyquist(&self, freq: &[i64; 3]) -> bool {
        let ny = -(self.n as i64 / 2);
        freq[..self.dim].iter().any(|&f| f == ny)
    }
}

struct Transform {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Transform {
    fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Transform { grid, forward: planner.plan_fft_forward(grid.n), inverse: planner.plan_fft_inverse(grid.n) }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.grid.n;
        let d = self.grid.dim;
        let plan = if inverse { &self.inverse } else { &self.forward };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let blocks = data.len() / (n * stride);
            for block in 0..blocks {
                for off in 0..stride {
                    let base = block * n * stride + off;
                    for (t, z) in line.iter_mut().enumerate() {
                        *z = data[base + t * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (t, z) in line.iter().enumerate() {
                        data[base + t * stride] = *z;
                    }
                }
            }
        }
        if inverse {
            let s = 1.0 / data.len() as f64;
            data.iter_mut().for_each(|z| *z *= s);
        }
    }

    fn forward_real(&self, v: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.run(&mut data, false);
        data
    }

    fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.run(&mut data, true);
        data.into_iter().map(|z| z.re).collect()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Vector-valued field sampled on a grid, one array per component.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: GridSpec, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != grid.dim || comps.iter().any(|c| c.len() != grid.points()) {
            return Err(Error::Grid { n: grid.n, d: grid.dim, reason: "component shape mismatch" });
        }
        if comps.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("vector field has non-finite entries".into()));
        }
        Ok(VectorField { grid, comps })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        VectorField { grid, comps: vec![vec![0.0; grid.points()]; grid.dim] }
    }

    /// Samples `f` at every lattice point.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Vec<f64> + Sync) -> Result<Self> {
        let d = grid.dim;
        let values: Vec<Vec<f64>> = (0..grid.points())
            .into_par_iter()
            .map(|idx| f(&grid.position(idx)[..d]))
            .collect();
        let comps = (0..d).map(|i| values.iter().map(|v| v[i]).collect()).collect();
        Self::new(grid, comps)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.comps[i]
    }

    pub fn value(&self, idx: usize) -> Vec<f64> {
        self.comps.iter().map(|c| c[idx]).collect()
    }

    /// Root-mean-square of the pointwise Euclidean norm.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.comps.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>()).sum();
        (s / self.grid.points() as f64).sqrt()
    }

    fn axpy(&self, s: f64, other: &VectorField) -> VectorField {
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + s * y).collect())
            .collect();
        VectorField { grid: self.grid, comps }
    }

    fn recentered(mut self) -> VectorField {
        for c in &mut self.comps {
            let m = mean(c);
            c.iter_mut().for_each(|x| *x -= m);
        }
        self
    }
}

/// Matrix-valued field, entry (i, j) stored in `entries[i*d + j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    grid: GridSpec,
    entries: Vec<Vec<f64>>,
    mean_free: bool,
}

impl MatrixField {
    pub fn new(grid: GridSpec, entries: Vec<Vec<f64>>) -> Result<Self> {
        let d = grid.dim;
        if entries.len() != d * d || entries.iter().any(|c| c.len() != grid.points()) {
            return Err(Error::Grid { n: grid.n, d, reason: "entry shape mismatch" });
        }
        let mean_free = entries.iter().all(|c| mean(c).abs() <= 1e-12 * (1.0 + rms(c)));
        Ok(MatrixField { grid, entries, mean_free })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> SquareMatrix + Sync) -> Result<Self> {
        let d = grid.dim;
        let values: Vec<SquareMatrix> =
            (0..grid.points()).into_par_iter().map(|idx| f(&grid.position(idx)[..d])).collect();
        let entries = (0..d * d).map(|e| values.iter().map(|m| m.entries()[e]).collect()).collect();
        Self::new(grid, entries)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn mean_free(&self) -> bool {
        self.mean_free
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.entries[i * self.grid.dim + j]
    }

    /// Matrix at one lattice point.
    pub fn at(&self, idx: usize) -> SquareMatrix {
        let d = self.grid.dim;
        SquareMatrix::from_fn(d, |i, j| self.entries[i * d + j][idx])
    }

    /// Pointwise Frobenius norm.
    pub fn pointwise_norm(&self) -> Vec<f64> {
        (0..self.grid.points())
            .map(|idx| self.entries.iter().map(|c| c[idx] * c[idx]).sum::<f64>().sqrt())
            .collect()
    }

    pub fn transpose(&self) -> MatrixField {
        let d = self.grid.dim;
        let entries = (0..d * d).map(|e| self.entries[(e % d) * d + e / d].clone()).collect();
        MatrixField { grid: self.grid, entries, mean_free: self.mean_free }
    }

    /// Entrywise linear combination `self + s·other`.
    pub fn axpy(&self, s: f64, other: &MatrixField) -> MatrixField {
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + s * y).collect())
            .collect();
        MatrixField::new(self.grid, entries).expect("shape preserved")
    }

    /// Pointwise orthogonal projection, computed entry by entry.
    pub fn project(&self, subspace: Subspace) -> MatrixField {
        let d = self.grid.dim;
        let points = self.grid.points();
        let trace = || -> Vec<f64> {
            (0..points).map(|idx| (0..d).map(|i| self.entries[i * d + i][idx]).sum::<f64>() / d as f64).collect()
        };
        let half = |e: usize, sign: f64| -> Vec<f64> {
            let (a, b) = (&self.entries[e], &self.entries[(e % d) * d + e / d]);
            a.iter().zip(b).map(|(x, y)| 0.5 * (x + sign * y)).collect()
        };
        let entries: Vec<Vec<f64>> = match subspace {
            Subspace::Sym => (0..d * d).map(|e| half(e, 1.0)).collect(),
            Subspace::Skew => (0..d * d).map(|e| half(e, -1.0)).collect(),
            Subspace::SpanId => {
                let t = trace();
                (0..d * d).map(|e| if e % (d + 1) == 0 { t.clone() } else { vec![0.0; points] }).collect()
            }
            Subspace::Sym0 => {
                let t = trace();
                (0..d * d)
                    .map(|e| {
                        let mut v = half(e, 1.0);
                        if e % (d + 1) == 0 {
                            v.iter_mut().zip(&t).for_each(|(x, s)| *x -= s);
                        }
                        v
                    })
                    .collect()
            }
        };
        MatrixField::new(self.grid, entries).expect("shape preserved")
    }

    /// Grid average of |F(x)|^p raised to 1/p; the sup norm for p = ∞.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        scalar_lp_norm(&self.pointwise_norm(), p)
    }
}

/// L^p norm of a scalar sample set on the unit-measure torus.
pub fn scalar_lp_norm(values: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Exponent(p));
    }
    let top = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if p.is_infinite() || top == 0.0 {
        return Ok(top);
    }
    let s: f64 = values.iter().map(|x| (x.abs() / top).powf(p)).sum();
    Ok(top * (s / values.len() as f64).powf(1.0 / p))
}

/// Which Korn quotient to form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// ‖𝒜‖ / ‖ℰ‖
    Plain,
    /// ‖𝒜₀‖ / ‖ℰ₀‖ with the trace moved to the antisymmetric side.
    TraceFree,
    /// ‖∇u‖ / ‖ℰ‖
    FullGradient,
}

/// Spectral Jacobian, entry (i, j) = ∂_j u_i.
pub fn gradient(u: &VectorField) -> MatrixField {
    let grid = u.grid;
    let d = grid.dim;
    let tf = Transform::new(grid);
    let specs: Vec<Vec<Complex64>> = u.comps.par_iter().map(|c| tf.forward_real(c)).collect();
    let entries: Vec<Vec<f64>> = (0..d * d)
        .into_par_iter()
        .map(|e| {
            let (i, j) = (e / d, e % d);
            let out = specs[i]
                .iter()
                .enumerate()
                .map(|(idx, z)| {
                    let f = grid.frequency(idx);
                    if grid.has_nyquist(&f) {
                        Complex64::new(0.0, 0.0)
                    } else {
                        z * Complex64::new(0.0, 2.0 * std::f64::consts::PI * f[j] as f64)
                    }
                })
                .collect();
            tf.inverse_real(out)
        })
        .collect();
    MatrixField::new(grid, entries).expect("gradient shape")
}

/// Spectral divergence Σ_i ∂_i u_i.
pub fn divergence(u: &VectorField) -> Vec<f64> {
    let g = gradient(u);
    let d = u.grid.dim;
    (0..u.grid.points()).map(|idx| (0..d).map(|i| g.entry(i, i)[idx]).sum()).collect()
}

/// Row divergence (div W)_i = Σ_j ∂_j W_ij.
pub fn row_divergence(w: &MatrixField) -> VectorField {
    let grid = w.grid;
    let d = grid.dim;
    let tf = Transform::new(grid);
    let comps = (0..d)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![Complex64::new(0.0, 0.0); grid.points()];
            for j in 0..d {
                let spec = tf.forward_real(w.entry(i, j));
                for (idx, z) in spec.iter().enumerate() {
                    let f = grid.frequency(idx);
                    if !grid.has_nyquist(&f) {
                        acc[idx] += z * Complex64::new(0.0, 2.0 * std::f64::consts::PI * f[j] as f64);
                    }
                }
            }
            tf.inverse_real(acc)
        })
        .collect();
    VectorField { grid, comps }
}

/// Relative size of ∂_k G_ij − ∂_j G_ik, zero for exact gradients.
pub fn curl_residual(g: &MatrixField) -> f64 {
    let grid = g.grid;
    let d = grid.dim;
    let tf = Transform::new(grid);
    let specs: Vec<Vec<Complex64>> = g.entries.iter().map(|c| tf.forward_real(c)).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for (idx, _) in specs[0].iter().enumerate() {
        let f = grid.frequency(idx);
        if grid.has_nyquist(&f) {
            continue;
        }
        for i in 0..d {
            for j in 0..d {
                den += specs[i * d + j][idx].norm_sqr() * (f[..d].iter().map(|x| (x * x) as f64).sum::<f64>());
                for k in 0..d {
                    let r = specs[i * d + j][idx] * f[k] as f64 - specs[i * d + k][idx] * f[j] as f64;
                    num += r.norm_sqr();
                }
            }
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Symmetric and antisymmetric parts of a gradient field. For the
/// trace-free variant the trace part is moved: E₀ = ℰ − Tr/d·Id and
/// 𝒜₀ = 𝒜 + Tr/d·Id, so E + Askew = G in both cases.
pub fn strain_parts(g: &MatrixField, variant: Variant) -> (MatrixField, MatrixField) {
    match variant {
        Variant::TraceFree => {
            let e = g.project(Subspace::Sym0);
            let a = g.axpy(-1.0, &e);
            (e, a)
        }
        _ => {
            let e = g.project(Subspace::Sym);
            let a = g.axpy(-1.0, &e);
            (e, a)
        }
    }
}

/// Symbol of R⊗R at an integer frequency.
pub fn riesz_symbol(freq: &[i64]) -> SquareMatrix {
    let d = freq.len();
    let n2: f64 = freq.iter().map(|x| (x * x) as f64).sum();
    if n2 == 0.0 {
        return SquareMatrix::zeros(d);
    }
    SquareMatrix::from_fn(d, |i, j| -(freq[i] * freq[j]) as f64 / n2)
}

/// Applies (R⊗R F)_{il} = Σ_j R_i R_j F_{jl}. Inputs must be mean-free
/// unless `force` is set, in which case the mean is discarded.
pub fn riesz_tensor(f: &MatrixField, force: bool) -> Result<MatrixField> {
    let grid = f.grid;
    let d = grid.dim;
    if !force {
        let worst = f.entries.iter().map(|c| mean(c).abs() / (1.0 + rms(c))).fold(0.0, f64::max);
        if worst > 1e-10 {
            return Err(Error::NonZeroMean(worst));
        }
    }
    let tf = Transform::new(grid);
    let specs: Vec<Vec<Complex64>> = f.entries.par_iter().map(|c| tf.forward_real(c)).collect();
    let entries = (0..d * d)
        .into_par_iter()
        .map(|e| {
            let (i, l) = (e / d, e % d);
            let out = (0..grid.points())
                .map(|idx| {
                    let f = grid.frequency(idx);
                    let n2: i64 = f[..d].iter().map(|x| x * x).sum();
                    if n2 == 0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    // Row i of the symbol −ξ⊗ξ/|ξ|² applied to column l.
                    let s: Complex64 = (0..d).map(|j| specs[j * d + l][idx] * f[j] as f64).sum();
                    s * (-(f[i] as f64) / n2 as f64)
                })
                .collect();
            tf.inverse_real(out)
        })
        .collect();
    MatrixField::new(grid, entries)
}

fn relative_l2(diff: &MatrixField, reference: &MatrixField) -> f64 {
    let num = diff.lp_norm(2.0).expect("p = 2");
    let den = reference.lp_norm(2.0).expect("p = 2");
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Relative L² residual of the Riesz representation of the vorticity:
/// plain: 𝒜 = R⊗Rℰ − (R⊗Rℰ)ᵗ; trace-free:
/// 2P_Skew(R⊗Rℰ₀) − d/(d−1)·P_span(Id)(R⊗Rℰ₀) = 𝒜₀.
pub fn korn_identity_residual(u: &VectorField, variant: Variant) -> Result<f64> {
    let g = gradient(u);
    let d = u.grid.dim as f64;
    match variant {
        Variant::TraceFree => {
            let (e0, a0) = strain_parts(&g, Variant::TraceFree);
            let r = riesz_tensor(&e0, false)?;
            let skew = r.project(Subspace::Skew);
            let lhs = skew.axpy(1.0, &skew).axpy(-d / (d - 1.0), &r.project(Subspace::SpanId));
            Ok(relative_l2(&lhs.axpy(-1.0, &a0), &a0))
        }
        _ => {
            let (e, a) = strain_parts(&g, Variant::Plain);
            let r = riesz_tensor(&e, false)?;
            let lhs = r.axpy(-1.0, &r.transpose());
            Ok(relative_l2(&lhs.axpy(-1.0, &a), &a))
        }
    }
}

/// The numerator and denominator fields of a Korn quotient.
fn ratio_fields(g: &MatrixField, variant: Variant) -> (MatrixField, MatrixField) {
    match variant {
        Variant::Plain => {
            let (e, a) = strain_parts(g, Variant::Plain);
            (a, e)
        }
        Variant::TraceFree => {
            let (e, a) = strain_parts(g, Variant::TraceFree);
            (a, e)
        }
        Variant::FullGradient => (g.clone(), g.project(Subspace::Sym)),
    }
}

/// ‖𝒜‖_p/‖ℰ‖_p, ‖𝒜₀‖_p/‖ℰ₀‖_p or ‖∇u‖_p/‖ℰ‖_p.
pub fn korn_ratio(u: &VectorField, p: f64, variant: Variant) -> Result<f64> {
    let (num, den) = ratio_fields(&gradient(u), variant);
    let dn = den.lp_norm(p)?;
    if dn <= 1e-300 {
        return Err(Error::DegenerateDenominator);
    }
    Ok(num.lp_norm(p)? / dn)
}

/// Upper bound √3(p*−1) for the plain quotient.
pub fn korn_upper_bound(p: f64) -> f64 {
    3f64.sqrt() * (p_star(p) - 1.0)
}

/// Seeded mean-free real field whose Fourier support lies in max|m| ≤ band,
/// with amplitudes decaying like 1/(1+|m|²).
pub fn random_band_limited(grid: GridSpec, band: usize, seed: u64) -> Result<VectorField> {
    if band == 0 || band >= grid.n / 2 {
        return Err(Error::Parameter(format!("band must lie in 1..{}", grid.n / 2)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tf = Transform::new(grid);
    let d = grid.dim;
    let comps = (0..d)
        .map(|_| {
            let spec: Vec<Complex64> = (0..grid.points())
                .map(|idx| {
                    let f = grid.frequency(idx);
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    let m2: i64 = f[..d].iter().map(|x| x * x).sum();
                    let inside = f[..d].iter().all(|x| x.unsigned_abs() as usize <= band);
                    if m2 == 0 || !inside {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::new(re, im) / (1.0 + m2 as f64)
                    }
                })
                .collect();
            tf.inverse_real(spec)
        })
        .collect::<Vec<_>>();
    let u = VectorField::new(grid, comps)?;
    let s = 1.0 / u.l2_norm().max(f64::MIN_POSITIVE);
    Ok(VectorField { grid, comps: u.comps.iter().map(|c| c.iter().map(|x| x * s).collect()).collect() })
}

/// Truncates a field to the Fourier box max|m| ≤ band and removes its mean.
pub fn band_limit(u: &VectorField, band: usize) -> VectorField {
    let grid = u.grid;
    let d = grid.dim;
    let tf = Transform::new(grid);
    let comps = u
        .comps
        .iter()
        .map(|c| {
            let mut spec = tf.forward_real(c);
            for (idx, z) in spec.iter_mut().enumerate() {
                let f = grid.frequency(idx);
                let inside = f[..d].iter().all(|x| x.unsigned_abs() as usize <= band);
                let zero = f[..d].iter().all(|x| *x == 0);
                if !inside || zero || grid.has_nyquist(&f) {
                    *z = Complex64::new(0.0, 0.0);
                }
            }
            tf.inverse_real(spec)
        })
        .collect();
    VectorField { grid, comps }
}

/// Starting point of [`maximize_ratio`].
#[derive(Clone, Debug)]
pub enum AscentInit {
    Random { seed: u64 },
    /// The planar vortex witness of the given order (d = 2 only).
    Witness { k: u32 },
    Field(VectorField),
}

/// Knobs of [`maximize_ratio`].
#[derive(Clone, Copy, Debug)]
pub struct AscentOptions {
    pub steps: usize,
    pub step_size: f64,
    /// Fourier box for the search directions; `None` uses all non-Nyquist modes.
    pub band: Option<usize>,
    pub max_halvings: usize,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions { steps: 50, step_size: 0.25, band: None, max_halvings: 20 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Completed,
    /// No improving step within the line-search budget at this step.
    Stalled { step: usize },
}

#[derive(Clone, Debug)]
pub struct Ascent {
    pub field: VectorField,
    pub ratio: f64,
    /// Ratio after each accepted step, starting with the initial value.
    pub history: Vec<f64>,
    pub termination: Termination,
}

fn duality_weight(f: &MatrixField, p: f64) -> Result<MatrixField> {
    let norms = f.pointwise_norm();
    let total = scalar_lp_norm(&norms, p)?;
    let grid = f.grid;
    let scale: Vec<f64> = norms
        .iter()
        .map(|&r| if r == 0.0 || total == 0.0 { 0.0 } else { (r / total).powf(p - 2.0) / total })
        .collect();
    let entries = f.entries.iter().map(|c| c.iter().zip(&scale).map(|(x, s)| x * s).collect()).collect();
    MatrixField::new(grid, entries)
}

/// L² gradient of the Korn quotient with respect to u.
fn ratio_gradient(u: &VectorField, p: f64, variant: Variant) -> Result<(f64, VectorField)> {
    let (num, den) = ratio_fields(&gradient(u), variant);
    let nn = num.lp_norm(p)?;
    let dn = den.lp_norm(p)?;
    if dn <= 1e-300 {
        return Err(Error::DegenerateDenominator);
    }
    let ratio = nn / dn;
    // d‖F‖_p = mean ⟨|F|^{p−2}F/‖F‖^{p−1}, dF⟩ and ⟨W, ∇v⟩ = −⟨div W, v⟩.
    let wn = duality_weight(&num, p)?;
    let wd = duality_weight(&den, p)?;
    let combined = wn.axpy(-ratio, &wd);
    let div = row_divergence(&combined);
    let s = -1.0 / dn;
    let comps = div.comps.iter().map(|c| c.iter().map(|x| x * s).collect()).collect();
    Ok((ratio, VectorField { grid: u.grid, comps }))
}

/// Projected gradient ascent of the Korn quotient over mean-free fields.
pub fn maximize_ratio(
    p: f64,
    variant: Variant,
    grid: GridSpec,
    init: AscentInit,
    opts: AscentOptions,
) -> Result<Ascent> {
    check_exponent(p)?;
    let band = opts.band.unwrap_or(grid.n / 2 - 1).min(grid.n / 2 - 1);
    let mut u = match init {
        AscentInit::Random { seed } => random_band_limited(grid, band.min(grid.n / 4).max(1), seed)?,
        AscentInit::Witness { k } => crate::witness::vortex_field(&crate::witness::WitnessSpec::planar(k)?, grid)?,
        AscentInit::Field(f) => {
            if f.grid != grid {
                return Err(Error::Grid { n: f.grid.n, d: f.grid.dim, reason: "initial field grid mismatch" });
            }
            f
        }
    }
    .recentered();
    let mut ratio = korn_ratio(&u, p, variant)?;
    let mut history = vec![ratio];
    let mut eta = opts.step_size;
    let mut termination = Termination::Completed;
    for step in 0..opts.steps {
        let (_, g) = ratio_gradient(&u, p, variant)?;
        let g = band_limit(&g, band);
        let gn = g.l2_norm();
        if gn == 0.0 {
            termination = Termination::Stalled { step };
            break;
        }
        let scale = u.l2_norm() / gn;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial = u.axpy(eta * scale, &g).recentered();
            if let Ok(r) = korn_ratio(&trial, p, variant) {
                if r > ratio {
                    u = trial;
                    ratio = r;
                    accepted = true;
                    break;
                }
            }
            eta *= 0.5;
        }
        if !accepted {
            termination = Termination::Stalled { step };
            break;
        }
        history.push(ratio);
        eta = (eta * 2.0).min(opts.step_size);
    }
    Ok(Ascent { field: u, ratio, history, termination })
}

/// Writes a matrix field as a flat little-endian binary snapshot: three
/// u64 header words (d, n, entries per point) followed by the values,
/// point by point with each matrix in row-major order.
pub fn write_snapshot(f: &MatrixField, mut w: impl Write) -> std::io::Result<()> {
    let d = f.grid.dim;
    for word in [d as u64, f.grid.n as u64, (d * d) as u64] {
        w.write_all(&word.to_le_bytes())?;
    }
    for idx in 0..f.grid.points() {
        for e in 0..d * d {
            w.write_all(&f.entries[e][idx].to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a snapshot produced by [`write_snapshot`].
pub fn read_snapshot(mut r: impl Read) -> std::io::Result<MatrixField> {
    let bad = |msg: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string());
    let mut word = [0u8; 8];
    let mut header = [0usize; 3];
    for h in &mut header {
        r.read_exact(&mut word)?;
        *h = u64::from_le_bytes(word) as usize;
    }
    let [d, n, count] = header;
    let grid = GridSpec::new(d, n).map_err(|e| bad(&e.to_string()))?;
    if count != d * d {
        return Err(bad("entry count does not match d*d"));
    }
    let mut entries = vec![vec![0.0; grid.points()]; count];
    for idx in 0..grid.points() {
        for column in entries.iter_mut() {
            r.read_exact(&mut word)?;
            column[idx] = f64::from_le_bytes(word);
        }
    }
    MatrixField::new(grid, entries).map_err(|e| bad(&e.to_string()))
}

/// CSV rows (lattice indices, then entries in row-major order).
pub fn write_csv(f: &MatrixField, mut w: impl Write) -> std::io::Result<()> {
    let d = f.grid.dim;
    let axes = ["i0", "i1", "i2"];
    let mut header: Vec<String> = axes[..d].iter().map(|s| s.to_string()).collect();
    for i in 0..d {
        for j in 0..d {
            header.push(format!("m{i}{j}"));
        }
    }
    writeln!(w, "{}", header.join(","))?;
    for idx in 0..f.grid.points() {
        let m = f.grid.multi_index(idx);
        let mut row: Vec<String> = m[..d].iter().map(|x| x.to_string()).collect();
        row.extend(f.entries.iter().map(|c| format!("{:.16e}", c[idx])));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(d: usize, n: usize) -> GridSpec {
        GridSpec::new(d, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(2, 12).is_err());
        assert!(GridSpec::new(4, 8).is_err());
        assert!(GridSpec::new(3, 4).is_err());
        assert!(GridSpec::new(3, 256).is_err());
        assert_eq!(GridSpec::new(2, 16).unwrap().frequency(8)[1], -8);
    }

    #[test]
    fn gradient_of_single_mode() {
        let g = grid(2, 16);
        let u = VectorField::from_fn(g, |x| vec![(2.0 * PI * x[1]).sin(), 0.0]).unwrap();
        let du = gradient(&u);
        assert!(du.mean_free());
        for idx in 0..g.points() {
            let x = g.position(idx);
            assert!((du.entry(0, 1)[idx] - 2.0 * PI * (2.0 * PI * x[1]).cos()).abs() < 1e-12);
            for (i, j) in [(0, 0), (1, 0), (1, 1)] {
                assert!(du.entry(i, j)[idx].abs() < 1e-12);
            }
        }
        let c = VectorField::from_fn(g, |_| vec![3.0, -1.0]).unwrap();
        assert!(gradient(&c).lp_norm(f64::INFINITY).unwrap() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let n = 64;
        let g = grid(2, n);
        let u = random_band_limited(g, 3, 5).unwrap();
        let du = gradient(&u);
        let h = 1.0 / n as f64;
        let mut worst: f64 = 0.0;
        for idx in 0..g.points() {
            let m = g.multi_index(idx);
            let plus = ((m[0] + 1) % n) * n + m[1];
            let minus = ((m[0] + n - 1) % n) * n + m[1];
            let fd = (u.component(0)[plus] - u.component(0)[minus]) / (2.0 * h);
            worst = worst.max((fd - du.entry(0, 0)[idx]).abs());
        }
        let scale = du.lp_norm(f64::INFINITY).unwrap();
        // O(h²) with the third derivative bounded by (2π·3)² times the gradient.
        assert!(worst <= scale * (2.0 * PI * 3.0 * h).powi(2), "{worst}");
    }

    #[test]
    fn strain_parts_reassemble() {
        let g = grid(3, 8);
        let u = random_band_limited(g, 2, 9).unwrap();
        let du = gradient(&u);
        for v in [Variant::Plain, Variant::TraceFree] {
            let (e, a) = strain_parts(&du, v);
            let r = e.axpy(1.0, &a).axpy(-1.0, &du);
            assert!(r.lp_norm(f64::INFINITY).unwrap() <= 1e-12);
        }
        let c = MatrixField::from_fn(g, |_| SquareMatrix::identity(3).scale(2.0)).unwrap();
        let (e, a) = strain_parts(&c, Variant::TraceFree);
        assert!(e.lp_norm(f64::INFINITY).unwrap() < 1e-15);
        assert!((a.entry(1, 1)[0] - 2.0).abs() < 1e-15);
        let (_, a) = strain_parts(&c, Variant::Plain);
        assert_eq!(a.lp_norm(f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn riesz_single_mode() {
        let g = grid(2, 16);
        // F = M cos(2π ξ·x) has F̂ supported on ±ξ with the same matrix.
        let xi = [2i64, -3];
        let m = SquareMatrix::from_fn(2, |i, j| (1 + i + 2 * j) as f64);
        let f = MatrixField::from_fn(g, |x| {
            m.scale((2.0 * PI * (xi[0] as f64 * x[0] + xi[1] as f64 * x[1])).cos())
        })
        .unwrap();
        let r = riesz_tensor(&f, false).unwrap();
        let expected = riesz_symbol(&xi).matmul(&m);
        for idx in [0, 5, 77] {
            let x = g.position(idx);
            let c = (2.0 * PI * (xi[0] as f64 * x[0] + xi[1] as f64 * x[1])).cos();
            assert!(r.at(idx).sub(&expected.scale(c)).norm() < 1e-12);
        }
    }

    #[test]
    fn riesz_rejects_mean_and_is_contractive() {
        let g = grid(2, 16);
        let f = MatrixField::from_fn(g, |_| SquareMatrix::identity(2)).unwrap();
        assert!(matches!(riesz_tensor(&f, false), Err(Error::NonZeroMean(_))));
        assert!(riesz_tensor(&f, true).unwrap().lp_norm(2.0).unwrap() < 1e-14);
        for seed in 0..10 {
            let u = random_band_limited(g, 7, seed).unwrap();
            let du = gradient(&u);
            let r = riesz_tensor(&du, false).unwrap();
            assert!(r.lp_norm(2.0).unwrap() <= du.lp_norm(2.0).unwrap() * (1.0 + 1e-12));
            // The symbol squares to its negative.
            let rr = riesz_tensor(&r, false).unwrap();
            assert!(rr.axpy(1.0, &r).lp_norm(2.0).unwrap() <= 1e-12 * r.lp_norm(2.0).unwrap());
        }
    }

    #[test]
    fn pure_gradient_has_no_vorticity() {
        let g = grid(2, 32);
        // u = ∇φ with φ = sin(2πx)cos(4πy)
        let u = VectorField::from_fn(g, |x| {
            let (a, b) = (2.0 * PI * x[0], 4.0 * PI * x[1]);
            vec![2.0 * PI * a.cos() * b.cos(), -4.0 * PI * a.sin() * b.sin()]
        })
        .unwrap();
        let du = gradient(&u);
        let (e, a) = strain_parts(&du, Variant::Plain);
        assert!(a.lp_norm(2.0).unwrap() < 1e-10);
        let r = riesz_tensor(&e, false).unwrap();
        assert!(r.axpy(-1.0, &r.transpose()).lp_norm(2.0).unwrap() < 1e-10);
    }

    #[test]
    fn identities_hold() {
        for (d, n) in [(2, 32), (3, 16)] {
            let u = random_band_limited(grid(d, n), n / 4, 1).unwrap();
            for v in [Variant::Plain, Variant::TraceFree] {
                let r = korn_identity_residual(&u, v).unwrap();
                assert!(r <= 1e-10, "d={d} {v:?}: {r}");
            }
        }
        let z = VectorField::zeros(grid(2, 8));
        assert_eq!(korn_identity_residual(&z, Variant::Plain).unwrap(), 0.0);
    }

    #[test]
    fn energy_identity_and_p2_ratio() {
        let u = random_band_limited(grid(2, 32), 6, 4).unwrap();
        let du = gradient(&u);
        let (e, a) = strain_parts(&du, Variant::Plain);
        let div = divergence(&u);
        let lhs = e.lp_norm(2.0).unwrap().powi(2);
        let rhs = a.lp_norm(2.0).unwrap().powi(2) + scalar_lp_norm(&div, 2.0).unwrap().powi(2);
        assert!((lhs - rhs).abs() <= 1e-10 * lhs);
        assert!(korn_ratio(&u, 2.0, Variant::Plain).unwrap() <= 1.0 + 1e-10);
    }

    #[test]
    fn lp_norm_basics() {
        let g = grid(2, 8);
        let f = MatrixField::from_fn(g, |_| SquareMatrix::identity(2).scale(3.0)).unwrap();
        for p in [1.0, 2.5, 7.0, f64::INFINITY] {
            assert!((f.lp_norm(p).unwrap() - 3.0 * 2f64.sqrt()).abs() < 1e-13);
        }
        assert!(f.lp_norm(0.5).is_err());
    }

    #[test]
    fn degenerate_ratio_is_reported() {
        let z = VectorField::zeros(grid(2, 8));
        assert_eq!(korn_ratio(&z, 2.0, Variant::Plain), Err(Error::DegenerateDenominator));
    }

    #[test]
    fn snapshot_round_trip() {
        let u = random_band_limited(grid(2, 8), 2, 3).unwrap();
        let du = gradient(&u);
        let mut buf = Vec::new();
        write_snapshot(&du, &mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 64 * 4 * 8);
        assert_eq!(read_snapshot(&buf[..]).unwrap(), du);
        let mut csv = Vec::new();
        write_csv(&du, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 65);
    }

    #[test]
    fn ascent_at_p2_stays_below_one() {
        let g = grid(2, 16);
        let opts = AscentOptions { steps: 10, ..Default::default() };
        let a = maximize_ratio(2.0, Variant::Plain, g, AscentInit::Random { seed: 2 }, opts).unwrap();
        assert!(a.ratio <= 1.0 + 1e-8);
        assert!(a.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn ascent_improves_at_p4() {
        let g = grid(2, 16);
        let opts = AscentOptions { steps: 15, ..Default::default() };
        let a = maximize_ratio(4.0, Variant::Plain, g, AscentInit::Random { seed: 3 }, opts).unwrap();
        assert!(a.history.len() > 1);
        assert!(a.ratio > a.history[0]);
        assert!(a.ratio <= korn_upper_bound(4.0));
    }
}
