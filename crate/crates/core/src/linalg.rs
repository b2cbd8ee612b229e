//! Small dense and block-banded complex linear algebra.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2, LU};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Relative pivot size below which a factorization is declared singular.
const PIVOT_TOL: f64 = 1e-12;

/// Block tridiagonal matrix, optionally cyclic (corner blocks coupling the
/// first and last block rows).
///
/// Row `i` reads `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]`; for a
/// non-cyclic matrix `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone)]
pub struct BlockTridiagonal {
    pub lower: Vec<Mat>,
    pub diag: Vec<Mat>,
    pub upper: Vec<Mat>,
    pub cyclic: bool,
}

impl BlockTridiagonal {
    pub fn zeros(n_blocks: usize, block: usize, cyclic: bool) -> Self {
        let z = || vec![Mat::zeros(block, block); n_blocks];
        Self { lower: z(), diag: z(), upper: z(), cyclic }
    }

    pub fn n_blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn block_size(&self) -> usize {
        self.diag[0].nrows()
    }

    pub fn dim(&self) -> usize {
        self.n_blocks() * self.block_size()
    }

    fn neighbours(&self, i: usize) -> (Option<usize>, Option<usize>) {
        let n = self.n_blocks();
        let prev = if i > 0 { Some(i - 1) } else if self.cyclic { Some(n - 1) } else { None };
        let next = if i + 1 < n { Some(i + 1) } else if self.cyclic { Some(0) } else { None };
        (prev, next)
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let bs = self.block_size();
        let mut out = vec![ZERO; x.len()];
        let block = |j: usize| DVector::from_column_slice(&x[j * bs..(j + 1) * bs]);
        for i in 0..self.n_blocks() {
            let (prev, next) = self.neighbours(i);
            let mut acc = &self.diag[i] * block(i);
            if let Some(p) = prev {
                acc += &self.lower[i] * block(p);
            }
            if let Some(q) = next {
                acc += &self.upper[i] * block(q);
            }
            out[i * bs..(i + 1) * bs].copy_from_slice(acc.as_slice());
        }
        out
    }

    /// Dense copy (tests and small diagnostics only).
    pub fn to_dense(&self) -> Mat {
        let (n, bs) = (self.n_blocks(), self.block_size());
        let mut m = Mat::zeros(n * bs, n * bs);
        for i in 0..n {
            let (prev, next) = self.neighbours(i);
            m.view_mut((i * bs, i * bs), (bs, bs)).copy_from(&self.diag[i]);
            if let Some(p) = prev {
                let cur = m.view((i * bs, p * bs), (bs, bs)).clone_owned();
                m.view_mut((i * bs, p * bs), (bs, bs)).copy_from(&(cur + &self.lower[i]));
            }
            if let Some(q) = next {
                let cur = m.view((i * bs, q * bs), (bs, bs)).clone_owned();
                m.view_mut((i * bs, q * bs), (bs, bs)).copy_from(&(cur + &self.upper[i]));
            }
        }
        m
    }

    pub fn factor(&self) -> Result<BlockLu> {
        match BlockLu::new(self) {
            Ok(lu) => Ok(lu),
            Err(pivot) => Err(Error::SingularSystem { pivot, near_null: self.near_null_vector() }),
        }
    }

    /// Approximate null vector by inverse iteration on a slightly shifted matrix.
    fn near_null_vector(&self) -> Vec<C64> {
        let scale = self.diag.iter().map(|d| d.camax()).fold(0.0, f64::max).max(1e-300);
        let mut shifted = self.clone();
        for d in &mut shifted.diag {
            for j in 0..d.nrows() {
                d[(j, j)] += C64::new(1e-7 * scale, 0.0);
            }
        }
        let Ok(lu) = BlockLu::new(&shifted) else {
            return Vec::new();
        };
        let mut v: Vec<C64> = (0..self.dim()).map(|j| C64::new(1.0 + 0.01 * j as f64, 0.0)).collect();
        for _ in 0..3 {
            v = lu.solve(&v);
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|z| *z /= norm);
        }
        v
    }
}

/// Block LU factorization (block Thomas algorithm, bordered for the cyclic case).
#[derive(Debug, Clone)]
pub struct BlockLu {
    n: usize,
    bs: usize,
    cyclic: bool,
    lower: Vec<Mat>,
    upper: Vec<Mat>,
    pivots: Vec<LU<C64, nalgebra::Dyn, nalgebra::Dyn>>,
    /// Cyclic case: `A'^{-1} E` for the border blocks, and the Schur complement factor.
    border: Option<(Vec<Mat>, Mat, Mat, LU<C64, nalgebra::Dyn, nalgebra::Dyn>)>,
}

/// `scale` is the size of the original matrix, so that pivots which cancel
/// down to roundoff are caught even when the reduced block is tiny.
fn checked_lu(m: Mat, scale: f64) -> std::result::Result<LU<C64, nalgebra::Dyn, nalgebra::Dyn>, f64> {
    let lu = m.lu();
    let u = lu.u();
    let min_pivot = (0..u.nrows()).map(|j| u[(j, j)].norm()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > PIVOT_TOL * scale) {
        return Err(min_pivot / scale);
    }
    Ok(lu)
}

impl BlockLu {
    fn new(a: &BlockTridiagonal) -> std::result::Result<Self, f64> {
        let n = a.n_blocks();
        let bs = a.block_size();
        let m = if a.cyclic { n - 1 } else { n };
        let scale = a.diag.iter().map(|d| d.camax()).fold(0.0, f64::max).max(1e-300);
        let mut pivots = Vec::with_capacity(m);
        let mut prev: Option<&LU<C64, nalgebra::Dyn, nalgebra::Dyn>> = None;
        for i in 0..m {
            let mut d = a.diag[i].clone();
            if let Some(lu) = prev {
                let x = lu.solve(&a.upper[i - 1]).ok_or(0.0)?;
                d -= &a.lower[i] * x;
            }
            pivots.push(checked_lu(d, scale)?);
            prev = pivots.last();
        }
        let mut lu = BlockLu {
            n,
            bs,
            cyclic: a.cyclic,
            lower: a.lower.clone(),
            upper: a.upper.clone(),
            pivots,
            border: None,
        };
        if a.cyclic {
            let mut e = vec![Mat::zeros(bs, bs); m];
            e[0] += &a.lower[0];
            e[m - 1] += &a.upper[m - 1];
            let z = lu.solve_inner(e);
            let schur = &a.diag[n - 1] - &a.lower[n - 1] * &z[m - 1] - &a.upper[n - 1] * &z[0];
            let s_lu = checked_lu(schur, scale)?;
            lu.border = Some((z, a.lower[n - 1].clone(), a.upper[n - 1].clone(), s_lu));
        }
        Ok(lu)
    }

    /// Solves the leading (non-cyclic) block system for block right-hand sides.
    fn solve_inner(&self, mut rhs: Vec<Mat>) -> Vec<Mat> {
        let m = self.pivots.len();
        for i in 1..m {
            let y = self.pivots[i - 1].solve(&rhs[i - 1]).expect("factor checked");
            rhs[i] -= &self.lower[i] * y;
        }
        let mut x = vec![Mat::zeros(0, 0); m];
        for i in (0..m).rev() {
            let mut r = rhs[i].clone();
            if i + 1 < m {
                r -= &self.upper[i] * &x[i + 1];
            }
            x[i] = self.pivots[i].solve(&r).expect("factor checked");
        }
        x
    }

    pub fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        self.solve_many(&[rhs]).pop().expect("one column")
    }

    /// Solves for several right-hand sides at once; each block sweep acts on all columns.
    pub fn solve_many(&self, rhs: &[&[C64]]) -> Vec<Vec<C64>> {
        let bs = self.bs;
        let k = rhs.len();
        let m = self.pivots.len();
        let gather = |i: usize| Mat::from_fn(bs, k, |l, c| rhs[c][i * bs + l]);
        let y = self.solve_inner((0..m).map(gather).collect());
        let mut out = vec![vec![ZERO; self.n * bs]; k];
        let mut scatter = |i: usize, x: &Mat| {
            for (c, col) in out.iter_mut().enumerate() {
                for l in 0..bs {
                    col[i * bs + l] = x[(l, c)];
                }
            }
        };
        match &self.border {
            None => {
                for (i, yi) in y.iter().enumerate() {
                    scatter(i, yi);
                }
            }
            Some((z, low, up, s_lu)) => {
                let r = gather(m) - low * &y[m - 1] - up * &y[0];
                let x_last = s_lu.solve(&r).expect("factor checked");
                for i in 0..m {
                    scatter(i, &(&y[i] - &z[i] * &x_last));
                }
                scatter(m, &x_last);
            }
        }
        debug_assert!(self.cyclic == self.border.is_some());
        out
    }
}

/// `exp(t A)` for a 2x2 complex matrix and complex `t`.
pub fn expm2(a: &Matrix2<C64>, t: C64) -> Matrix2<C64> {
    let m = (a[(0, 0)] + a[(1, 1)]) * 0.5;
    let b = a - Matrix2::identity() * m;
    let delta = (-(b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)])).sqrt();
    let x = t * delta;
    let (ch, sh_over) = if x.norm() < 1e-4 {
        let x2 = x * x;
        (ONE + x2 * 0.5 + x2 * x2 / 24.0, t * (ONE + x2 / 6.0 + x2 * x2 / 120.0))
    } else {
        (x.cosh(), x.sinh() / delta)
    };
    (Matrix2::identity() * ch + b * sh_over) * (t * m).exp()
}

/// Eigen-decomposition of a 2x2 complex matrix with distinct eigenvalues.
#[derive(Debug, Clone, Copy)]
pub struct Eigen2 {
    pub values: [C64; 2],
    pub vectors: [Vector2<C64>; 2],
}

impl Eigen2 {
    /// Returns `None` when the eigenvalues (relatively) coincide.
    pub fn new(a: &Matrix2<C64>) -> Option<Self> {
        let m = (a[(0, 0)] + a[(1, 1)]) * 0.5;
        let b = a - Matrix2::identity() * m;
        let delta = (-(b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)])).sqrt();
        let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        if delta.norm() < 1e-10 * scale {
            return None;
        }
        let values = [m + delta, m - delta];
        let vectors = values.map(|lam| {
            // (A - lam) v = 0; pick the better-conditioned row
            let r0 = (a[(0, 0)] - lam, a[(0, 1)]);
            let r1 = (a[(1, 0)], a[(1, 1)] - lam);
            let v = if r0.0.norm() + r0.1.norm() >= r1.0.norm() + r1.1.norm() {
                Vector2::new(r0.1, -r0.0)
            } else {
                Vector2::new(r1.1, -r1.0)
            };
            v.unscale(v.norm())
        });
        Some(Self { values, vectors })
    }
}

/// Inverse of a 2x2 complex matrix, `None` if singular.
pub fn inv2(m: &Matrix2<C64>) -> Option<Matrix2<C64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    // scale-invariant: compare with the product of the column norms
    let scale = m.column(0).norm() * m.column(1).norm();
    if !(det.norm() > 1e-14 * scale) {
        return None;
    }
    Some(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

/// Smallest eigenvalue of the Hermitian part `(M + M^*)/2` of a 2x2 matrix.
pub fn min_hermitian_eig2(m: &Matrix2<C64>) -> f64 {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let off = (m[(0, 1)] + m[(1, 0)].conj()) * 0.5;
    0.5 * (a + d) - (0.25 * (a - d) * (a - d) + off.norm_sqr()).sqrt()
}

/// Smallest eigenvalue of the Hermitian part of a square matrix.
pub fn min_hermitian_eig(m: &Mat) -> f64 {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    nalgebra::SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Max-abs entry norm.
pub fn max_abs(m: &Matrix2<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and P_{n-1}
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

/// Composite Gauss-Legendre rule on `[a, b]` with `panels` panels of `order` points.
pub fn composite_gauss(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (xs, ws) = gauss_legendre(order);
    let w = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|p| {
            let mid = a + (p as f64 + 0.5) * w;
            xs.iter().zip(&ws).map(move |(x, wt)| (mid + 0.5 * w * x, 0.5 * w * wt)).collect::<Vec<_>>()
        })
        .collect()
}

/// Weights `c_j` with `p(0) = sum_j c_j p(x_j)` and `p'(0) = sum_j d_j p(x_j)`
/// for the interpolating polynomial through the nodes `xs`.
pub fn lagrange_at_zero(xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len();
    let mut value = vec![0.0; n];
    let mut deriv = vec![0.0; n];
    for j in 0..n {
        let denom: f64 = (0..n).filter(|&m| m != j).map(|m| xs[j] - xs[m]).product();
        let others: Vec<f64> = (0..n).filter(|&m| m != j).map(|m| xs[m]).collect();
        // L_j(x) = prod (x - x_m) / denom
        value[j] = others.iter().map(|x| -x).product::<f64>() / denom;
        let mut d = 0.0;
        for skip in 0..others.len() {
            d += others.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, x)| -x).product::<f64>();
        }
        deriv[j] = d / denom;
    }
    (value, deriv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_c(rng: &mut ChaCha8Rng) -> C64 {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    fn random_system(n: usize, bs: usize, cyclic: bool, rng: &mut ChaCha8Rng) -> BlockTridiagonal {
        let mut a = BlockTridiagonal::zeros(n, bs, cyclic);
        for i in 0..n {
            a.lower[i] = Mat::from_fn(bs, bs, |_, _| random_c(rng));
            a.upper[i] = Mat::from_fn(bs, bs, |_, _| random_c(rng));
            a.diag[i] = Mat::from_fn(bs, bs, |r, c| random_c(rng) + if r == c { C64::new(6.0, 0.0) } else { ZERO });
        }
        a
    }

    #[test]
    fn block_solver_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, bs, cyclic) in &[(9, 1, false), (9, 1, true), (7, 3, false), (7, 3, true), (3, 2, true)] {
            let a = random_system(n, bs, cyclic, &mut rng);
            let x: Vec<C64> = (0..n * bs).map(|_| random_c(&mut rng)).collect();
            let b = a.apply(&x);
            let dense_b = a.to_dense() * DVector::from_column_slice(&x);
            assert!(b.iter().zip(dense_b.iter()).all(|(p, q)| (p - q).norm() < 1e-12));
            let sol = a.factor().unwrap().solve(&b);
            let err = sol.iter().zip(&x).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            assert!(err < 1e-11, "n={n} bs={bs} cyclic={cyclic} err={err}");
        }
    }

    #[test]
    fn singular_cyclic_laplacian_is_reported() {
        // periodic second difference annihilates constants
        let n = 11;
        let mut a = BlockTridiagonal::zeros(n, 1, true);
        for i in 0..n {
            a.lower[i][(0, 0)] = -ONE;
            a.upper[i][(0, 0)] = -ONE;
            a.diag[i][(0, 0)] = C64::new(2.0, 0.0);
        }
        match a.factor() {
            Err(Error::SingularSystem { near_null, .. }) => {
                let first = near_null[0];
                assert!(near_null.iter().all(|z| (z - first).norm() < 1e-6));
            }
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn expm_matches_series_and_group_law() {
        let a = Matrix2::new(C64::new(0.1, 0.2), C64::new(1.0, 0.0), C64::new(-2.0, 0.3), C64::new(0.0, -0.4));
        let t = C64::new(0.7, -0.2);
        let mut series = Matrix2::identity();
        let mut term = Matrix2::identity();
        for j in 1..40 {
            term = term * a * t.unscale(j as f64);
            series += term;
        }
        assert!(max_abs(&(expm2(&a, t) - series)) < 1e-13);
        let prod = expm2(&a, t) * expm2(&a, -t);
        assert!(max_abs(&(prod - Matrix2::identity())) < 1e-13);
        // nilpotent generator hits the series branch
        let n = Matrix2::new(ZERO, ONE, ZERO, ZERO);
        let e = expm2(&n, C64::new(2.0, 0.0));
        assert!((e[(0, 1)] - 2.0).norm() < 1e-15);
    }

    #[test]
    fn eigen2_vectors() {
        let a = Matrix2::new(C64::new(0.0, -0.5), ONE, C64::new(2.0, 0.0), C64::new(0.0, -0.5));
        let e = Eigen2::new(&a).unwrap();
        for j in 0..2 {
            let r = a * e.vectors[j] - e.vectors[j] * e.values[j];
            assert!(r.norm() < 1e-14);
        }
        assert!(Eigen2::new(&Matrix2::new(ZERO, ONE, ZERO, ZERO)).is_none());
    }

    #[test]
    fn hermitian_eigs() {
        let m = Matrix2::new(C64::new(2.0, 0.0), C64::new(1.0, 1.0), C64::new(1.0, -1.0), C64::new(1.0, 0.0));
        let dense = Mat::from_fn(2, 2, |r, c| m[(r, c)]);
        assert!((min_hermitian_eig2(&m) - min_hermitian_eig(&dense)).abs() < 1e-13);
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let (xs, ws) = gauss_legendre(8);
        for p in 0..16 {
            let q: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(p)).sum();
            let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
            assert!((q - exact).abs() < 1e-14, "{p} {q}");
        }
        let total: f64 = composite_gauss(0.0, 1.0, 20, 8).iter().map(|(x, w)| w * (3.0 * x).exp()).sum();
        assert!((total - ((3.0f64).exp() - 1.0) / 3.0).abs() < 1e-13);
    }

    #[test]
    fn lagrange_weights_reproduce_cubics() {
        let xs = [0.1, 0.2, 0.3, 0.4];
        let (v, d) = lagrange_at_zero(&xs);
        let p = |x: f64| 1.5 - 2.0 * x + 0.7 * x * x - 3.0 * x * x * x;
        let val: f64 = xs.iter().zip(&v).map(|(x, w)| w * p(*x)).sum();
        let der: f64 = xs.iter().zip(&d).map(|(x, w)| w * p(*x)).sum();
        assert!((val - 1.5).abs() < 1e-11);
        assert!((der + 2.0).abs() < 1e-9);
    }
}
