//! Finite-dimensional linear algebra on matrices and third-order tensors:
//! orthogonal projections of the matrix space, the swap operator behind the
//! skew-defect inequality, sphere averages and rank-one projection ratios.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quad::composite_gauss;
use crate::special::sphere_abs_mean;

/// Dense d×d real matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    entries: Vec<f64>,
}

/// Closed subspaces of the matrix space used throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Subspace {
    Sym,
    Skew,
    /// Trace-free symmetric matrices.
    Sym0,
    /// Multiples of the identity.
    SpanId,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        SquareMatrix { dim, entries: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let entries = (0..dim * dim).map(|ij| f(ij / dim, ij % dim)).collect();
        SquareMatrix { dim, entries }
    }

    pub fn from_vec(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::Dimension { found: dim, reason: "entry count must equal d*d" });
        }
        Ok(SquareMatrix { dim, entries })
    }

    /// Outer product a ⊗ b, entry (i, j) = a_i b_j.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        assert_eq!(a.len(), b.len());
        Self::from_fn(a.len(), |i, j| a[i] * b[j])
    }

    /// Elementary matrix e_i ⊗ e_j.
    pub fn unit(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.set(i, j, 1.0);
        m
    }

    pub fn random(dim: usize, rng: &mut impl Rng) -> Self {
        let entries = (0..dim * dim).map(|_| rng.sample(StandardNormal)).collect();
        SquareMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product Tr(A Bᵗ).
    pub fn inner(&self, other: &Self) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        SquareMatrix { dim: self.dim, entries: self.entries.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| f(*a, *b)).collect();
        SquareMatrix { dim: self.dim, entries }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum()).collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        Self::from_fn(self.dim, |i, j| (0..self.dim).map(|k| self.get(i, k) * other.get(k, j)).sum())
    }

    /// Orthogonal projection onto `subspace` in the Frobenius geometry.
    pub fn project(&self, subspace: Subspace) -> Result<Self> {
        if self.dim < 2 {
            return Err(Error::Dimension { found: self.dim, reason: "projections need d >= 2" });
        }
        Ok(self.project_unchecked(subspace))
    }

    pub(crate) fn project_unchecked(&self, subspace: Subspace) -> Self {
        let d = self.dim;
        match subspace {
            Subspace::Sym => Self::from_fn(d, |i, j| 0.5 * (self.get(i, j) + self.get(j, i))),
            Subspace::Skew => Self::from_fn(d, |i, j| 0.5 * (self.get(i, j) - self.get(j, i))),
            Subspace::Sym0 => {
                let t = self.trace() / d as f64;
                Self::from_fn(d, |i, j| {
                    0.5 * (self.get(i, j) + self.get(j, i)) - if i == j { t } else { 0.0 }
                })
            }
            Subspace::SpanId => Self::identity(d).scale(self.trace() / d as f64),
        }
    }

    /// Numerical rank from singular values above `tol * largest`.
    pub fn rank(&self, tol: f64) -> usize {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.entries);
        let sv = m.singular_values();
        let top = sv.iter().cloned().fold(0.0, f64::max);
        if top == 0.0 {
            return 0;
        }
        sv.iter().filter(|s| **s > tol * top).count()
    }
}

/// Orthonormal basis of Sym(d): diagonal units then (e_j⊗e_k + e_k⊗e_j)/√2,
/// ordered lexicographically over j ≤ k.
pub fn sym_basis(d: usize) -> Vec<SquareMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for j in 0..d {
        for k in j..d {
            let mut m = SquareMatrix::zeros(d);
            if j == k {
                m.set(j, j, 1.0);
            } else {
                m.set(j, k, s);
                m.set(k, j, s);
            }
            out.push(m);
        }
    }
    out
}

/// Orthonormal basis of trace-free symmetric matrices: Helmert-type
/// diagonals followed by the normalized off-diagonal pairs.
pub fn sym0_basis(d: usize) -> Vec<SquareMatrix> {
    let mut out = Vec::with_capacity(d * (d + 1) / 2 - 1);
    for m in 1..d {
        let norm = ((m * (m + 1)) as f64).sqrt();
        let mut a = SquareMatrix::zeros(d);
        for i in 0..m {
            a.set(i, i, 1.0 / norm);
        }
        a.set(m, m, -(m as f64) / norm);
        out.push(a);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in j + 1..d {
            let mut a = SquareMatrix::zeros(d);
            a.set(j, k, s);
            a.set(k, j, s);
            out.push(a);
        }
    }
    out
}

/// Element of ℝ^d⊗ℝ^d⊗ℝ^d, entry (i, j, k) stored at (i*d + j)*d + k.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    entries: Vec<f64>,
    sym_last_two: bool,
    trace_free_last_two: bool,
}

const CONSTRAINT_TOL: f64 = 1e-12;

impl Tensor3 {
    /// Builds a tensor and validates the declared constraints relative to its norm.
    pub fn new(dim: usize, entries: Vec<f64>, sym_last_two: bool, trace_free_last_two: bool) -> Result<Self> {
        if dim < 2 || entries.len() != dim * dim * dim {
            return Err(Error::Dimension { found: dim, reason: "tensor needs d >= 2 and d^3 entries" });
        }
        let t = Tensor3 { dim, entries, sym_last_two, trace_free_last_two };
        let scale = t.norm().max(f64::MIN_POSITIVE);
        if sym_last_two {
            let defect = t.symmetry_defect();
            if defect > CONSTRAINT_TOL * scale {
                return Err(Error::Constraint { constraint: "symmetry in the last two slots", defect });
            }
        }
        if trace_free_last_two {
            let defect = t.trace_defect();
            if defect > CONSTRAINT_TOL * scale {
                return Err(Error::Constraint { constraint: "trace-free last two slots", defect });
            }
        }
        Ok(t)
    }

    pub fn from_fn(dim: usize, sym: bool, trace_free: bool, f: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let entries = (0..dim * dim * dim)
            .map(|ijk| f(ijk / (dim * dim), (ijk / dim) % dim, ijk % dim))
            .collect();
        Self::new(dim, entries, sym, trace_free)
    }

    /// Random tensor with symmetric last two slots.
    pub fn random_sym(dim: usize, rng: &mut impl Rng) -> Self {
        let raw: Vec<f64> = (0..dim * dim * dim).map(|_| rng.sample(StandardNormal)).collect();
        let at = |i: usize, j: usize, k: usize| raw[(i * dim + j) * dim + k];
        Self::from_fn(dim, true, false, |i, j, k| 0.5 * (at(i, j, k) + at(i, k, j)))
            .expect("symmetrized tensor")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn sym_last_two(&self) -> bool {
        self.sym_last_two
    }

    pub fn trace_free_last_two(&self) -> bool {
        self.trace_free_last_two
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.entries[(i * self.dim + j) * self.dim + k]
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn symmetry_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    worst = worst.max((self.get(i, j, k) - self.get(i, k, j)).abs());
                }
            }
        }
        worst
    }

    fn trace_defect(&self) -> f64 {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j, j)).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

/// Tensor e_i ⊗ S as a flat d³ array.
fn lift_basis(d: usize, i: usize, s: &SquareMatrix) -> Vec<f64> {
    let mut v = vec![0.0; d * d * d];
    for j in 0..d {
        for k in 0..d {
            v[(i * d + j) * d + k] = s.get(j, k);
        }
    }
    v
}

/// Swap of the first two slots.
fn swap_first_two(d: usize, a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                out[(i * d + j) * d + k] = a[(j * d + i) * d + k];
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The compressed swap operator on ℝ^d⊗Sym(d) with its spectrum.
#[derive(Clone, Debug)]
pub struct SkewDefectOperator {
    pub dim: usize,
    /// Matrix of the operator in the lexicographic orthonormal basis.
    pub matrix: DMatrix<f64>,
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    /// `2 − 2·min_eigenvalue`, the best constant in the skew-defect bound.
    pub sharp_constant: f64,
    /// Unit eigentensor for the minimal eigenvalue.
    pub extremal: Tensor3,
}

impl SkewDefectOperator {
    /// Frobenius norm of T² − T/2 − I/2.
    pub fn quadratic_residual(&self) -> f64 {
        let n = self.matrix.nrows();
        let t = &self.matrix;
        let r = t * t - t * 0.5 - DMatrix::<f64>::identity(n, n) * 0.5;
        r.norm()
    }

    /// Frobenius norm of (T − I)(2T + I).
    pub fn factor_residual(&self) -> f64 {
        let n = self.matrix.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        let r = (&self.matrix - &id) * (&self.matrix * 2.0 + &id);
        r.norm()
    }
}

/// Builds π∘σ∘π restricted to ℝ^d⊗Sym(d) and diagonalizes it.
pub fn skew_defect_operator(d: usize) -> Result<SkewDefectOperator> {
    if d < 2 {
        return Err(Error::Dimension { found: d, reason: "skew-defect operator needs d >= 2" });
    }
    let basis: Vec<Vec<f64>> = (0..d)
        .flat_map(|i| sym_basis(d).into_iter().map(move |s| lift_basis(d, i, &s)))
        .collect();
    let swapped: Vec<Vec<f64>> = basis.iter().map(|w| swap_first_two(d, w)).collect();
    let n = basis.len();
    let matrix = DMatrix::from_fn(n, n, |a, b| dot(&basis[a], &swapped[b]));
    let (eigenvalues, vectors) = sorted_eigen(&matrix)?;
    let min_eigenvalue = eigenvalues[0];
    let coeffs = vectors.column(0);
    let mut flat = vec![0.0; d * d * d];
    for (c, w) in coeffs.iter().zip(&basis) {
        for (f, x) in flat.iter_mut().zip(w) {
            *f += c * x;
        }
    }
    let extremal = Tensor3::new(d, flat, true, false)?;
    Ok(SkewDefectOperator {
        dim: d,
        matrix,
        eigenvalues,
        min_eigenvalue,
        sharp_constant: 2.0 - 2.0 * min_eigenvalue,
        extremal,
    })
}

fn sorted_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), 1e-15, 10_000).ok_or_else(|| Error::NoConvergence {
        what: "symmetric eigen-solve",
        detail: format!("matrix of size {n}"),
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Σ (a_ijk − a_jik)² / |a|² for a tensor symmetric in its last two slots.
pub fn skew_defect_ratio(a: &Tensor3) -> Result<f64> {
    if !a.sym_last_two {
        return Err(Error::Constraint { constraint: "symmetry in the last two slots", defect: f64::NAN });
    }
    let norm2 = a.norm().powi(2);
    if norm2 == 0.0 {
        return Err(Error::ZeroInput("tensor"));
    }
    let d = a.dim;
    let mut num = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                num += (a.get(i, j, k) - a.get(j, i, k)).powi(2);
            }
        }
    }
    Ok(num / norm2)
}

/// ‖b‖² + d/(d−1)²‖c‖² over |a|² with b_ijk = a_ijk − a_jik and c_k = Σ_i a_iik.
pub fn tracefree_defect_value(a: &Tensor3) -> Result<f64> {
    let norm2 = a.norm().powi(2);
    if norm2 == 0.0 {
        return Err(Error::ZeroInput("tensor"));
    }
    let (b, c) = tracefree_defect_parts(a.dim, &a.entries);
    let d = a.dim as f64;
    Ok((dot(&b, &b) + d / (d - 1.0).powi(2) * dot(&c, &c)) / norm2)
}

fn tracefree_defect_parts(d: usize, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let at = |i: usize, j: usize, k: usize| a[(i * d + j) * d + k];
    let mut b = vec![0.0; d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                b[(i * d + j) * d + k] = at(i, j, k) - at(j, i, k);
            }
        }
    }
    let c = (0..d).map(|k| (0..d).map(|i| at(i, i, k)).sum()).collect();
    (b, c)
}

/// Maximum of the trace-free defect form with an explicit maximizer.
#[derive(Clone, Debug)]
pub struct TraceFreeDefect {
    pub constant: f64,
    pub maximizer: Tensor3,
}

/// Largest eigenvalue of ‖b‖² + d/(d−1)²‖c‖² on unit tensors of ℝ^d⊗Sym₀(d).
pub fn tracefree_defect_constant(d: usize) -> Result<TraceFreeDefect> {
    if d < 2 {
        return Err(Error::Dimension { found: d, reason: "trace-free defect needs d >= 2" });
    }
    let basis: Vec<Vec<f64>> = (0..d)
        .flat_map(|i| sym0_basis(d).into_iter().map(move |s| lift_basis(d, i, &s)))
        .collect();
    let weight = (d as f64).sqrt() / (d as f64 - 1.0);
    let images: Vec<Vec<f64>> = basis
        .iter()
        .map(|w| {
            let (mut b, c) = tracefree_defect_parts(d, w);
            b.extend(c.iter().map(|x| x * weight));
            b
        })
        .collect();
    let n = basis.len();
    let form = DMatrix::from_fn(n, n, |a, b| dot(&images[a], &images[b]));
    let (values, vectors) = sorted_eigen(&form)?;
    let coeffs = vectors.column(n - 1);
    let mut flat = vec![0.0; d * d * d];
    for (c, w) in coeffs.iter().zip(&basis) {
        for (f, x) in flat.iter_mut().zip(w) {
            *f += c * x;
        }
    }
    Ok(TraceFreeDefect { constant: values[n - 1], maximizer: Tensor3::new(d, flat, true, true)? })
}

/// Integration rule on the unit sphere S^{d−1} (normalized measure).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SphereRule {
    /// Gaussian-normalized samples from a seeded stream.
    MonteCarlo { samples: usize, seed: u64 },
    /// Product rule in hyperspherical angles: two Gauss-Legendre panels of
    /// `order` nodes per polar angle and 2·`order` equispaced azimuths.
    Product { order: usize },
}

/// Sphere average with its reported tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereAverage {
    pub value: f64,
    pub tolerance: f64,
}

fn gaussian_direction(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = dot(&v, &v).sqrt();
        if n > 1e-300 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn product_nodes(d: usize, order: usize) -> Vec<(Vec<f64>, f64)> {
    use std::f64::consts::PI;
    let azimuth: Vec<(f64, f64)> =
        (0..2 * order).map(|i| (2.0 * PI * i as f64 / (2 * order) as f64, 1.0)).collect();
    let mut nodes: Vec<(Vec<f64>, f64)> = azimuth
        .iter()
        .map(|&(phi, w)| (vec![phi.cos(), phi.sin()], w))
        .collect();
    // Each extra polar angle ψ ∈ [0, π] contributes cos ψ as a new leading
    // coordinate, scales the rest by sin ψ, and carries the weight sin^{m−1} ψ
    // on S^{m}.
    let polar = composite_gauss(0.0, PI, 2, order);
    for m in 2..d {
        let mut next = Vec::with_capacity(nodes.len() * polar.len());
        for &(psi, wpsi) in &polar {
            let (s, c) = psi.sin_cos();
            let jac = s.powi(m as i32 - 1);
            for (v, w) in &nodes {
                let mut u = Vec::with_capacity(m + 1);
                u.push(c);
                u.extend(v.iter().map(|x| x * s));
                next.push((u, w * wpsi * jac));
            }
        }
        nodes = next;
    }
    let total: f64 = nodes.iter().map(|(_, w)| w).sum();
    nodes.into_iter().map(|(v, w)| (v, w / total)).collect()
}

/// Average of `f` over the unit sphere in ℝ^d.
pub fn sphere_average(d: usize, rule: SphereRule, f: impl Fn(&[f64]) -> f64) -> Result<SphereAverage> {
    if d < 2 {
        return Err(Error::Dimension { found: d, reason: "sphere averages need d >= 2" });
    }
    match rule {
        SphereRule::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::Parameter("Monte Carlo needs at least one sample".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..samples {
                let v = f(&gaussian_direction(d, &mut rng));
                s1 += v;
                s2 += v * v;
            }
            let n = samples as f64;
            let mean = s1 / n;
            let var = (s2 / n - mean * mean).max(0.0);
            // Four standard errors.
            Ok(SphereAverage { value: mean, tolerance: 4.0 * (var / n).sqrt() })
        }
        SphereRule::Product { order } => {
            if order < 2 {
                return Err(Error::Parameter("product rule needs order >= 2".into()));
            }
            let eval = |o: usize| product_nodes(d, o).iter().map(|(v, w)| w * f(v)).sum::<f64>();
            let fine = eval(order);
            let coarse = eval(order / 2 + 1);
            Ok(SphereAverage { value: fine, tolerance: (fine - coarse).abs() + 1e-13 })
        }
    }
}

/// Monte Carlo estimate of the second moment of a uniform direction.
/// Only the upper triangle is accumulated, so the result is exactly symmetric.
pub fn sphere_moment(d: usize, n_samples: usize, seed: u64) -> Result<SquareMatrix> {
    if d < 2 {
        return Err(Error::Dimension { found: d, reason: "sphere moments need d >= 2" });
    }
    if n_samples == 0 {
        return Err(Error::Parameter("at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = SquareMatrix::zeros(d);
    for _ in 0..n_samples {
        let v = gaussian_direction(d, &mut rng);
        for i in 0..d {
            for j in i..d {
                m.entries[i * d + j] += v[i] * v[j];
            }
        }
    }
    let n = n_samples as f64;
    Ok(SquareMatrix::from_fn(d, |i, j| m.get(i.min(j), i.max(j)) / n))
}

/// Second moment of a uniform direction by odd symmetry: Id/d.
pub fn sphere_moment_exact(d: usize) -> SquareMatrix {
    SquareMatrix::identity(d).scale(1.0 / d as f64)
}

/// Sphere average of |Aθ| against the lower bound c_d·|A|.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionalAverage {
    pub avg: f64,
    pub bound: f64,
    pub tolerance: f64,
}

pub fn directional_average_lower(a: &SquareMatrix, rule: SphereRule) -> Result<DirectionalAverage> {
    let norm = a.norm();
    if norm == 0.0 {
        return Err(Error::ZeroInput("matrix"));
    }
    let d = a.dim();
    let avg = sphere_average(d, rule, |th| a.mul_vec(th).iter().map(|x| x * x).sum::<f64>().sqrt())?;
    Ok(DirectionalAverage { avg: avg.value, bound: sphere_abs_mean(d) * norm, tolerance: avg.tolerance })
}

/// Subspaces admissible in the rank-one ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatioSubspace {
    Sym,
    Sym0,
}

fn split(x: RatioSubspace, r: &SquareMatrix) -> (SquareMatrix, SquareMatrix) {
    let inside = match x {
        RatioSubspace::Sym => r.project_unchecked(Subspace::Sym),
        RatioSubspace::Sym0 => r.project_unchecked(Subspace::Sym0),
    };
    let outside = r.sub(&inside);
    (inside, outside)
}

/// |P_{X⊥}(a⊗b)| / |P_X(a⊗b)| at a single rank-one matrix.
pub fn pointwise_rank_one_ratio(x: RatioSubspace, a: &[f64], b: &[f64]) -> f64 {
    let (inside, outside) = split(x, &SquareMatrix::outer(a, b));
    outside.norm() / inside.norm()
}

/// Options for the multi-start optimizer of [`rank_one_ratio`].
#[derive(Clone, Copy, Debug)]
pub struct RankOneOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for RankOneOptions {
    fn default() -> Self {
        RankOneOptions { starts: 32, seed: 0x5eed, max_iters: 2000, grad_tol: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct RankOneRatio {
    pub ratio: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Set for the trace-free case in d = 2, where the ratio is constant.
    pub degenerate: bool,
}

pub fn rank_one_ratio(x: RatioSubspace, d: usize) -> Result<RankOneRatio> {
    rank_one_ratio_with(x, d, RankOneOptions::default())
}

/// Sup of the projection ratio over unit a, b by projected gradient ascent
/// on the product of spheres.
pub fn rank_one_ratio_with(x: RatioSubspace, d: usize, opts: RankOneOptions) -> Result<RankOneRatio> {
    if d < 2 {
        return Err(Error::Dimension { found: d, reason: "rank-one ratio needs d >= 2" });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let objective = |a: &[f64], b: &[f64]| pointwise_rank_one_ratio(x, a, b).powi(2);
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, f64)> = None;
    for _ in 0..opts.starts.max(1) {
        let mut a = gaussian_direction(d, &mut rng);
        let mut b = gaussian_direction(d, &mut rng);
        let mut val = objective(&a, &b);
        let mut gnorm = f64::INFINITY;
        let mut step = 0.5;
        for _ in 0..opts.max_iters {
            let (ga, gb) = ratio_gradient(x, &a, &b);
            gnorm = (dot(&ga, &ga) + dot(&gb, &gb)).sqrt();
            if gnorm < opts.grad_tol {
                break;
            }
            let mut accepted = false;
            for _ in 0..40 {
                let na = normalized(&a, &ga, step);
                let nb = normalized(&b, &gb, step);
                let nv = objective(&na, &nb);
                // Armijo condition; plain increase lets the iterate bounce across the ridge.
                if nv >= val + 1e-4 * step * gnorm * gnorm {
                    a = na;
                    b = nb;
                    val = nv;
                    accepted = true;
                    step = (step * 1.5).min(4.0);
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if best.as_ref().is_none_or(|(v, ..)| val > *v) {
            best = Some((val, a, b, gnorm));
        }
    }
    let (val, a, b, gnorm) = best.expect("at least one start");
    if gnorm > 1e-6 && gnorm.is_finite() {
        return Err(Error::NoConvergence { what: "rank-one ratio ascent", detail: format!("gradient norm {gnorm:e}") });
    }
    Ok(RankOneRatio { ratio: val.sqrt(), a, b, degenerate: x == RatioSubspace::Sym0 && d == 2 })
}

fn normalized(v: &[f64], g: &[f64], step: f64) -> Vec<f64> {
    let w: Vec<f64> = v.iter().zip(g).map(|(x, y)| x + step * y).collect();
    let n = dot(&w, &w).sqrt();
    w.into_iter().map(|x| x / n).collect()
}

/// Tangential gradient of |P⊥R|²/|P R|² at R = a⊗b.
fn ratio_gradient(x: RatioSubspace, a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (inside, outside) = split(x, &SquareMatrix::outer(a, b));
    let ni = inside.inner(&inside);
    let no = outside.inner(&outside);
    // d/dR of no/ni = 2(outside·ni − inside·no)/ni².
    let g = outside.scale(2.0 / ni).sub(&inside.scale(2.0 * no / (ni * ni)));
    let ga = g.mul_vec(b);
    let gb = g.transpose().mul_vec(a);
    (tangent(a, ga), tangent(b, gb))
}

fn tangent(v: &[f64], g: Vec<f64>) -> Vec<f64> {
    let c = dot(v, &g);
    g.iter().zip(v).map(|(gi, vi)| gi - c * vi).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn identity_has_no_skew_part() {
        let p = SquareMatrix::identity(3).project(Subspace::Skew).unwrap();
        assert_eq!(p.norm(), 0.0);
    }

    #[test]
    fn sym_of_elementary_matrix() {
        let p = SquareMatrix::unit(3, 0, 1).project(Subspace::Sym).unwrap();
        let expected = SquareMatrix::unit(3, 0, 1).add(&SquareMatrix::unit(3, 1, 0)).scale(0.5);
        assert_eq!(p, expected);
    }

    #[test]
    fn projections_reject_scalars() {
        assert!(SquareMatrix::identity(1).project(Subspace::Sym).is_err());
    }

    #[test]
    fn pythagoras_for_random_matrices() {
        let mut r = rng();
        for d in 2..6 {
            let a = SquareMatrix::random(d, &mut r);
            let s = a.project(Subspace::Sym).unwrap();
            let k = a.project(Subspace::Skew).unwrap();
            // oracle: entrywise squares
            let mut lhs = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let sym = 0.5 * (a.get(i, j) + a.get(j, i));
                    let skw = 0.5 * (a.get(i, j) - a.get(j, i));
                    lhs += sym * sym + skw * skw;
                }
            }
            assert!((lhs - a.norm().powi(2)).abs() < 1e-12);
            assert!((s.norm().powi(2) + k.norm().powi(2) - a.norm().powi(2)).abs() < 1e-12);
            assert!(s.inner(&k).abs() < 1e-12);
        }
    }

    #[test]
    fn bases_are_orthonormal() {
        for d in 2..5 {
            for basis in [sym_basis(d), sym0_basis(d)] {
                for (i, a) in basis.iter().enumerate() {
                    for (j, b) in basis.iter().enumerate() {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        assert!((a.inner(b) - expect).abs() < 1e-14);
                    }
                }
            }
            assert!(sym0_basis(d).iter().all(|m| m.trace().abs() < 1e-14));
        }
    }

    #[test]
    fn skew_defect_spectrum() {
        let op = skew_defect_operator(3).unwrap();
        assert!((op.min_eigenvalue + 0.5).abs() < 1e-10);
        assert!((op.sharp_constant - 3.0).abs() < 1e-10);
        assert!(op.quadratic_residual() <= 1e-12);
        let op2 = skew_defect_operator(2).unwrap();
        for e in &op2.eigenvalues {
            assert!((e - 1.0).abs() < 1e-10 || (e + 0.5).abs() < 1e-10, "{e}");
        }
        assert!(op2.factor_residual() < 1e-12);
        assert!(skew_defect_operator(1).is_err());
    }

    #[test]
    fn skew_defect_extremal_attains_three() {
        for d in 2..=4 {
            let op = skew_defect_operator(d).unwrap();
            let r = skew_defect_ratio(&op.extremal).unwrap();
            assert!((r - 3.0).abs() < 1e-8, "d={d}: {r}");
        }
    }

    #[test]
    fn skew_defect_ratio_edge_cases() {
        let full = Tensor3::from_fn(3, true, false, |i, j, k| ((i + 1) * (j + 1) * (k + 1)) as f64).unwrap();
        assert!(skew_defect_ratio(&full).unwrap() < 1e-15);
        let zero = Tensor3::new(2, vec![0.0; 8], true, false).unwrap();
        assert!(skew_defect_ratio(&zero).is_err());
        let bad = Tensor3::from_fn(2, false, false, |i, j, k| (i + 2 * j + 3 * k) as f64).unwrap();
        assert!(skew_defect_ratio(&bad).is_err());
        assert!(Tensor3::from_fn(2, true, false, |_, j, k| (j + 2 * k) as f64).is_err());
        // a = e_1 ⊗ S
        let s = [[1.0, 2.0, 0.5], [2.0, -1.0, 0.0], [0.5, 0.0, 3.0]];
        let a = Tensor3::from_fn(3, true, false, |i, j, k| if i == 0 { s[j][k] } else { 0.0 }).unwrap();
        assert!(skew_defect_ratio(&a).unwrap() <= 3.0);
    }

    #[test]
    fn tracefree_constants() {
        let c2 = tracefree_defect_constant(2).unwrap();
        assert!((c2.constant - 4.0).abs() < 1e-8, "{}", c2.constant);
        for d in [3, 4] {
            let c = tracefree_defect_constant(d).unwrap();
            assert!((c.constant - 3.0).abs() < 1e-8, "d={d}: {}", c.constant);
            let v = tracefree_defect_value(&c.maximizer).unwrap();
            assert!((v - c.constant).abs() < 1e-8);
        }
    }

    #[test]
    fn sphere_moment_properties() {
        let m = sphere_moment(2, 1_000_000, 3).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 0.5 } else { 0.0 };
                assert!((m.get(i, j) - target).abs() < 5e-3);
            }
        }
        let m5 = sphere_moment(5, 1000, 11).unwrap();
        assert!((m5.trace() - 1.0).abs() < 1e-12);
        assert_eq!(m5, m5.transpose());
        assert_eq!(sphere_moment_exact(3), SquareMatrix::identity(3).scale(1.0 / 3.0));
    }

    #[test]
    fn directional_average_cases() {
        let rule = SphereRule::Product { order: 24 };
        let id = directional_average_lower(&SquareMatrix::identity(3), rule).unwrap();
        assert!((id.avg - 1.0).abs() < 1e-13);
        for d in 2..=4 {
            let e11 = directional_average_lower(&SquareMatrix::unit(d, 0, 0), rule).unwrap();
            assert!((e11.avg - e11.bound).abs() <= e11.tolerance + 1e-10, "d={d}");
        }
        let a = SquareMatrix::random(4, &mut rng());
        let r = directional_average_lower(&a, SphereRule::Product { order: 16 }).unwrap();
        assert!(r.avg >= r.bound - 1e-6);
        assert!(directional_average_lower(&SquareMatrix::zeros(3), rule).is_err());
    }

    #[test]
    fn rank_one_ratio_is_one() {
        let r = rank_one_ratio(RatioSubspace::Sym, 2).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-6);
        assert!(dot(&r.a, &r.b).abs() < 1e-3);
        let r0 = rank_one_ratio(RatioSubspace::Sym0, 3).unwrap();
        assert!((r0.ratio - 1.0).abs() < 1e-6);
        assert!(rank_one_ratio(RatioSubspace::Sym0, 2).unwrap().degenerate);
        assert_eq!(pointwise_rank_one_ratio(RatioSubspace::Sym, &[1.0, 0.0], &[1.0, 0.0]), 0.0);
    }
}
