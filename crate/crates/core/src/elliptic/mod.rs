//! Discretized complex Laplacian `K = -|k|^{-1/2} d_a k^{ab} |k|^{1/2} d_b + lambda`
//! on a slab `|s| < L` (Dirichlet ends) or on the circle `s ~ s + beta`.
//!
//! The `s` direction uses second-order differences in divergence form with
//! `rho k^ss` sampled at half nodes. The `y` direction is either a single
//! Fourier mode or a periodic grid. With weights `W = diag(rho_j h)` the
//! matrix satisfies `M^* W = W kappa M kappa` exactly.

pub mod modal;

use std::sync::OnceLock;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::geometry::CoefficientFamily;
use crate::linalg::{BlockLu, BlockTridiagonal, Mat, C64, I, ZERO};

/// Minimum number of grid points per unit of `s`.
pub const MIN_POINTS_PER_UNIT: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    /// `X = (-L, L)`, solutions vanish at `s = +-L`.
    DirichletSlab { l: f64 },
    /// `X` is the circle of length `beta`, `Omega^+ = (0, beta/2)`.
    Periodic { beta: f64 },
}

/// The two half regions `Omega^+ = {s > 0}` and `Omega^- = {s < 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }
}

/// Uniform `s` grid, symmetric about `s = 0`, holding the unknown nodes.
#[derive(Debug, Clone)]
pub struct SGrid {
    pub bc: BoundaryCondition,
    pub h: f64,
    /// Unknown nodes in increasing order; `nodes[center] == 0`.
    pub nodes: Vec<f64>,
    pub center: usize,
}

impl SGrid {
    /// `n_s` counts all nodes: for a slab it includes the two Dirichlet ends,
    /// for the circle it is the number of nodes per period. Must be odd.
    pub fn new(bc: BoundaryCondition, n_s: usize) -> Result<Self> {
        if n_s % 2 == 0 || n_s < 9 {
            return Err(Error::GridTooCoarse(format!("n_s = {n_s} must be odd and >= 9")));
        }
        let (h, half) = match bc {
            BoundaryCondition::DirichletSlab { l } => {
                let m = (n_s - 1) / 2;
                (l / m as f64, m as isize - 1)
            }
            BoundaryCondition::Periodic { beta } => (beta / n_s as f64, (n_s as isize - 1) / 2),
        };
        if 1.0 / h < MIN_POINTS_PER_UNIT {
            return Err(Error::GridTooCoarse(format!("spacing {h} gives fewer than {MIN_POINTS_PER_UNIT} points per unit")));
        }
        let nodes = (-half..=half).map(|j| j as f64 * h).collect();
        Ok(Self { bc, h, nodes, center: half as usize })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn periodic(&self) -> bool {
        matches!(self.bc, BoundaryCondition::Periodic { .. })
    }

    /// Index of the node `offset` steps from `s = 0`; `None` past a Dirichlet end.
    pub fn offset(&self, offset: isize) -> Option<usize> {
        let n = self.len() as isize;
        let i = self.center as isize + offset;
        if self.periodic() {
            Some(i.rem_euclid(n) as usize)
        } else if (0..n).contains(&i) {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Index of the mirror node `-s_i`.
    pub fn kappa(&self, i: usize) -> usize {
        self.len() - 1 - i
    }

    /// Number of cells from `s = 0` to the outer edge of a half region.
    pub fn half_cells(&self) -> usize {
        match self.bc {
            // the last cell ends on the Dirichlet node
            BoundaryCondition::DirichletSlab { .. } => self.center + 1,
            BoundaryCondition::Periodic { .. } => self.center,
        }
    }

    /// Values along a half region, node 0 first, walking away from `s = 0`.
    /// Slab ends contribute their zero boundary value.
    pub fn half_values<T: Copy + Default>(&self, field: &[T], bs: usize, side: Side, l: usize) -> Vec<T> {
        let step = side.sign() as isize;
        (0..=self.half_cells() as isize)
            .map(|j| self.offset(step * j).map(|i| field[i * bs + l]).unwrap_or_default())
            .collect()
    }
}

/// Coefficients of the per-node operator: `a = k^ss`, `c = k^sy`, `e = k^yy`.
#[derive(Debug, Clone, Copy)]
pub struct NodeCoeffs {
    pub rho: f64,
    pub a: C64,
    pub c: C64,
    pub e: C64,
    pub lambda: C64,
}

impl NodeCoeffs {
    pub fn at(fam: &CoefficientFamily, s: f64) -> Result<Self> {
        let sample = fam.eval_complex_metric(s, 0.0)?;
        Ok(Self {
            rho: sample.sqrt_det(),
            a: sample.k_inv[(0, 0)],
            c: sample.k_inv[(0, 1)],
            e: sample.k_inv[(1, 1)],
            lambda: fam.mass.eval(I * s),
        })
    }

    /// `Re k^{ab}` in the `(s, y)` basis.
    pub fn re_k_inv(&self) -> Matrix2<f64> {
        Matrix2::new(self.a.re, self.c.re, self.c.re, self.e.re)
    }
}

/// How the `y` derivative is represented.
#[derive(Debug, Clone, PartialEq)]
pub enum YDiscretization {
    /// One Fourier mode: `d_y -> dy`, `d_y^2 -> dyy` (scalars).
    Mode { k: f64, dy: C64, dyy: C64 },
    /// `n_y` points on a circle of the given circumference, centered differences.
    Grid { n_y: usize, circumference: f64 },
}

impl YDiscretization {
    /// Exact Fourier symbol `d_y -> ik`.
    pub fn mode(k: f64) -> Self {
        YDiscretization::Mode { k, dy: I * k, dyy: C64::from(-k * k) }
    }

    /// Symbol of the centered 3-point differences on a `y` grid of spacing `h_y`.
    pub fn lattice_mode(k: f64, h_y: f64) -> Self {
        let d1 = (k * h_y).sin() / h_y;
        let d2 = 2.0 * (0.5 * k * h_y).sin() / h_y;
        YDiscretization::Mode { k, dy: I * d1, dyy: C64::from(-d2 * d2) }
    }

    pub fn block_size(&self) -> usize {
        match self {
            YDiscretization::Mode { .. } => 1,
            YDiscretization::Grid { n_y, .. } => *n_y,
        }
    }

    /// Boundary quadrature weight per `y` node.
    pub fn y_weight(&self) -> f64 {
        match self {
            YDiscretization::Mode { .. } => 1.0,
            YDiscretization::Grid { n_y, circumference } => circumference / *n_y as f64,
        }
    }

    /// `(D_y, D_yy)` as block matrices.
    pub fn operators(&self) -> (Mat, Mat) {
        match self {
            YDiscretization::Mode { dy, dyy, .. } => (Mat::from_element(1, 1, *dy), Mat::from_element(1, 1, *dyy)),
            YDiscretization::Grid { n_y, circumference } => {
                let n = *n_y;
                let hy = circumference / n as f64;
                let mut d1 = Mat::zeros(n, n);
                let mut d2 = Mat::zeros(n, n);
                for l in 0..n {
                    let (p, q) = ((l + 1) % n, (l + n - 1) % n);
                    d1[(l, p)] += C64::from(0.5 / hy);
                    d1[(l, q)] -= C64::from(0.5 / hy);
                    d2[(l, p)] += C64::from(1.0 / (hy * hy));
                    d2[(l, q)] += C64::from(1.0 / (hy * hy));
                    d2[(l, l)] -= C64::from(2.0 / (hy * hy));
                }
                (d1, d2)
            }
        }
    }
}

/// Discrete `K` together with its grid, quadrature and (lazily) its factorization.
#[derive(Debug)]
pub struct DiscreteEllipticSystem {
    pub family: CoefficientFamily,
    pub grid: SGrid,
    pub y: YDiscretization,
    pub matrix: BlockTridiagonal,
    pub coeffs: Vec<NodeCoeffs>,
    /// `(rho a)` at the half node `s_i + h/2`, indexed by the left node offset.
    half: Vec<C64>,
    /// `dmu_k` weight per unknown.
    pub weights: Vec<f64>,
    pub dy: Mat,
    pub dyy: Mat,
    lu: OnceLock<BlockLu>,
}

/// Builds the discrete operator. Errors if the complex metric degenerates on the grid.
pub fn assemble_k(fam: &CoefficientFamily, grid: SGrid, y: YDiscretization) -> Result<DiscreteEllipticSystem> {
    if grid.periodic() && !fam.is_stationary() {
        return Err(Error::NotStationary("periodic boundary condition needs time-independent coefficients".into()));
    }
    let n = grid.len();
    let h = grid.h;
    let bs = y.block_size();
    let (dy, dyy) = y.operators();
    let id = Mat::identity(bs, bs);
    let coeffs = grid.nodes.iter().map(|&s| NodeCoeffs::at(fam, s)).collect::<Result<Vec<_>>>()?;
    // offsets -1 and n for the outer neighbours (Dirichlet ends or periodic images)
    let at_offset = |j: isize| -> Result<NodeCoeffs> { NodeCoeffs::at(fam, grid.nodes[0] + j as f64 * h) };
    let half = (-1..n as isize)
        .map(|j| {
            let c = NodeCoeffs::at(fam, grid.nodes[0] + (j as f64 + 0.5) * h)?;
            Ok(c.a * c.rho)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut m = BlockTridiagonal::zeros(n, bs, grid.periodic());
    for i in 0..n {
        let ci = coeffs[i];
        let (left, right) = (half[i], half[i + 1]);
        let prev = if i > 0 { coeffs[i - 1] } else { at_offset(-1)? };
        let next = if i + 1 < n { coeffs[i + 1] } else { at_offset(n as isize)? };
        let inv = 1.0 / (ci.rho * h * h);
        m.diag[i] = &id * ((left + right) * inv + ci.lambda) - &dyy * ci.e;
        let drift_up = next.c * next.rho / (2.0 * h * ci.rho) + ci.c / (2.0 * h);
        let drift_down = prev.c * prev.rho / (2.0 * h * ci.rho) + ci.c / (2.0 * h);
        m.upper[i] = &id * (-right * inv) - &dy * drift_up;
        m.lower[i] = &id * (-left * inv) + &dy * drift_down;
    }
    let yw = y.y_weight();
    let weights = coeffs.iter().flat_map(|c| std::iter::repeat_n(c.rho * h * yw, bs)).collect();
    Ok(DiscreteEllipticSystem { family: fam.clone(), grid, y, matrix: m, coeffs, half, weights, dy, dyy, lu: OnceLock::new() })
}

impl DiscreteEllipticSystem {
    pub fn block_size(&self) -> usize {
        self.y.block_size()
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        self.matrix.apply(u)
    }

    fn lu(&self) -> Result<&BlockLu> {
        if let Some(lu) = self.lu.get() {
            return Ok(lu);
        }
        let lu = self.matrix.factor()?;
        Ok(self.lu.get_or_init(|| lu))
    }

    /// Checks that the system is invertible (factorizing it once).
    pub fn factorize(&self) -> Result<()> {
        self.lu().map(|_| ())
    }

    pub fn solve(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        if rhs.len() != self.dim() {
            return Err(Error::RegionMismatch(format!("rhs has {} entries, system has {}", rhs.len(), self.dim())));
        }
        if rhs.iter().all(|z| *z == ZERO) {
            return Ok(vec![ZERO; rhs.len()]);
        }
        Ok(self.lu()?.solve(rhs))
    }

    /// `K^{-1}` applied to several right-hand sides in one sweep.
    pub fn solve_many(&self, rhs: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
        if let Some(r) = rhs.iter().find(|r| r.len() != self.dim()) {
            return Err(Error::RegionMismatch(format!("rhs has {} entries, system has {}", r.len(), self.dim())));
        }
        let cols: Vec<&[C64]> = rhs.iter().map(|r| r.as_slice()).collect();
        Ok(self.lu()?.solve_many(&cols))
    }

    /// `||K u - rhs||_inf / ||rhs||_inf`.
    pub fn solve_residual(&self, u: &[C64], rhs: &[C64]) -> f64 {
        let ku = self.apply(u);
        let num = ku.iter().zip(rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let den = rhs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        num / den.max(f64::MIN_POSITIVE)
    }

    /// `(v|u)` with the `dmu_k` weights.
    pub fn inner(&self, v: &[C64], u: &[C64]) -> C64 {
        v.iter().zip(u).zip(&self.weights).map(|((a, b), w)| a.conj() * b * *w).sum()
    }

    /// `kappa u` for a field on this grid.
    pub fn kappa(&self, u: &[C64]) -> Vec<C64> {
        let bs = self.block_size();
        let mut out = vec![ZERO; u.len()];
        for i in 0..self.grid.len() {
            let j = self.grid.kappa(i);
            out[j * bs..(j + 1) * bs].copy_from_slice(&u[i * bs..(i + 1) * bs]);
        }
        out
    }

    /// Formal adjoint `K^* = kappa K kappa`.
    pub fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.kappa(&self.apply(&self.kappa(v)))
    }

    /// Discrete delta at `s = 0` with unit mass against `dmu_k` (per `y` node for a grid).
    pub fn delta_at_zero(&self) -> Vec<C64> {
        let bs = self.block_size();
        let mut r = vec![ZERO; self.dim()];
        let c = self.grid.center;
        for l in 0..bs {
            r[c * bs + l] = C64::from(1.0 / self.weights[c * bs + l]);
        }
        r
    }

    /// `||M^* W - W kappa M kappa||_max / ||M||_max`.
    pub fn adjoint_residual(&self) -> Result<f64> {
        crate::geometry::check_symmetric(&self.grid.nodes)?;
        let dense = self.matrix.to_dense();
        let n = dense.nrows();
        let bs = self.block_size();
        let kap = |i: usize| self.grid.kappa(i / bs) * bs + i % bs;
        let mut worst = 0.0_f64;
        let mut scale = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let lhs = dense[(j, i)].conj() * self.weights[j];
                let rhs = dense[(kap(i), kap(j))] * self.weights[i];
                worst = worst.max((lhs - rhs).norm());
                scale = scale.max(dense[(i, j)].norm());
            }
        }
        Ok(worst / scale)
    }

    /// `eta^+-(v, u) = 2 int_{Omega^+-} (conj(grad v) Re k^{ab} grad u + Re lambda conj(v) u) dmu_k`,
    /// midpoint rule on each cell of the half region.
    pub fn eta_form(&self, v: &[C64], u: &[C64], side: Side) -> Result<C64> {
        if v.len() != self.dim() || u.len() != self.dim() {
            return Err(Error::RegionMismatch(format!(
                "fields of length {} and {} on a system of size {}",
                v.len(),
                u.len(),
                self.dim()
            )));
        }
        let bs = self.block_size();
        let h = self.grid.h;
        let yw = self.y.y_weight();
        let cells = self.grid.half_cells();
        let vs: Vec<Vec<C64>> = (0..bs).map(|l| self.grid.half_values(v, bs, side, l)).collect();
        let us: Vec<Vec<C64>> = (0..bs).map(|l| self.grid.half_values(u, bs, side, l)).collect();
        let sgn = side.sign();
        let mut total = ZERO;
        for j in 0..cells {
            let s_mid = sgn * (j as f64 + 0.5) * h;
            let c = NodeCoeffs::at(&self.family, s_mid)?;
            let rk = c.re_k_inv();
            // values, s-derivative (oriented along +s) and y-derivative at the cell midpoint
            let mid = |f: &Vec<Vec<C64>>| -> (Vec<C64>, Vec<C64>) {
                let val: Vec<C64> = (0..bs).map(|l| (f[l][j] + f[l][j + 1]) * 0.5).collect();
                let ds: Vec<C64> = (0..bs).map(|l| (f[l][j + 1] - f[l][j]) * (sgn / h)).collect();
                (val, ds)
            };
            let (vm, vd) = mid(&vs);
            let (um, ud) = mid(&us);
            let vy = &self.dy * nalgebra::DVector::from_vec(vm.clone());
            let uy = &self.dy * nalgebra::DVector::from_vec(um.clone());
            let mut cell = ZERO;
            for l in 0..bs {
                cell += vd[l].conj() * ud[l] * rk[(0, 0)]
                    + (vd[l].conj() * uy[l] + vy[l].conj() * ud[l]) * rk[(0, 1)]
                    + vy[l].conj() * uy[l] * rk[(1, 1)]
                    + vm[l].conj() * um[l] * c.lambda.re;
            }
            total += cell * (c.rho * h * yw);
        }
        Ok(total * 2.0)
    }

    /// `(rho a)` at the half node between offsets `j` and `j + 1` from `s = 0`.
    pub fn half_rho_a(&self, j: isize) -> C64 {
        self.half[(self.grid.center as isize + j + 1) as usize]
    }
}

#[cfg(test)]
mod tests;
