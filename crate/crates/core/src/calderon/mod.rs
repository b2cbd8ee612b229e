//! Boundary data on `{s = 0}`: the normal `n`, the operators `b, q, S, I`,
//! and the Calderón operators `C^+- = -+ gamma^+- K^{-1} gamma^* S`.
//!
//! Pairs are ordered `(f0, f1)` = (value, normal derivative). For a grid in
//! `y` each component is a block of `n_y` values.

pub mod cutoff;
pub mod fd;

use nalgebra::{DMatrix, Matrix2};

use crate::elliptic::modal::{ModalInverse, State};
use crate::elliptic::{NodeCoeffs, Side, YDiscretization};
use crate::error::{Error, Result};
use crate::geometry::{CoefficientFamily, ComplexMetricSample};
use crate::linalg::{min_hermitian_eig, Mat, C64, I, ONE, ZERO};

/// Complex normal vector `n = (n^s, n^y)` at `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    pub ns: C64,
    pub ny: C64,
}

impl Normal {
    pub fn flipped(self) -> Self {
        Normal { ns: -self.ns, ny: -self.ny }
    }
}

/// `n = -(k^ss, k^ys) / sqrt(k^ss)`, outward from `Omega^+`.
pub fn compute_normal(sample: &ComplexMetricSample) -> Result<Normal> {
    let kss = sample.k_inv[(0, 0)];
    if kss.norm() < 1e-14 {
        return Err(Error::DegenerateNormal(kss.norm()));
    }
    let root = kss.sqrt();
    Ok(Normal { ns: -kss / root, ny: -sample.k_inv[(1, 0)] / root })
}

/// `b, b^*, q, S, I, S^{-1}` as dense matrices over boundary pairs.
#[derive(Debug, Clone)]
pub struct BoundaryOperators {
    pub b: Mat,
    pub b_star: Mat,
    pub q: Mat,
    pub s: Mat,
    pub i: Mat,
    pub s_inv: Mat,
}

fn blocks(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    let n = a.nrows();
    let mut m = Mat::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(b);
    m.view_mut((n, 0), (n, n)).copy_from(c);
    m.view_mut((n, n), (n, n)).copy_from(d);
    m
}

/// `b = Im(n^y) d_y` on the boundary; `b^*` is its adjoint for the uniform boundary weight.
pub fn build_boundary_operators(normal: &Normal, y: &YDiscretization) -> BoundaryOperators {
    let (dy, _) = y.operators();
    let n = dy.nrows();
    let b = &dy * C64::from(normal.ny.im);
    let b_star = b.adjoint();
    let id = Mat::identity(n, n);
    let zero = Mat::zeros(n, n);
    let two_i = C64::new(0.0, 2.0);
    BoundaryOperators {
        q: blocks(&zero, &id, &id, &zero),
        s: blocks(&(&b_star * two_i), &(-&id), &id, &zero),
        i: blocks(&id, &zero, &(&b * two_i), &(-&id)),
        s_inv: blocks(&zero, &id, &(-&id), &(&b_star * two_i)),
        b,
        b_star,
    }
}

/// Everything needed to turn boundary pairs into layer sources and back.
#[derive(Debug, Clone)]
pub struct BoundarySetup {
    pub normal: Normal,
    /// Boundary density `sqrt(h(0))`.
    pub sigma: f64,
    pub at_zero: NodeCoeffs,
    pub ops: BoundaryOperators,
}

impl BoundarySetup {
    pub fn new(fam: &CoefficientFamily, y: &YDiscretization) -> Result<Self> {
        let sample = fam.eval_complex_metric(0.0, 0.0)?;
        let normal = compute_normal(&sample)?;
        let sigma = fam.h.eval(ZERO).re.sqrt();
        Ok(Self { normal, sigma, at_zero: NodeCoeffs::at(fam, 0.0)?, ops: build_boundary_operators(&normal, y) })
    }

    /// Same setup with the orientation of `n` reversed.
    pub fn flipped(&self, y: &YDiscretization) -> Self {
        let normal = self.normal.flipped();
        Self { normal, ops: build_boundary_operators(&normal, y), ..self.clone() }
    }
}

/// Hermitian part's smallest eigenvalue of `sign * q C` in the `dsigma` inner product.
pub fn positivity_min(c: &Mat, setup: &BoundarySetup, sign: f64) -> f64 {
    let qc = &setup.ops.q * c * C64::from(sign * setup.sigma);
    min_hermitian_eig(&qc)
}

/// Residuals of the identities satisfied by a pair of Calderón operators.
#[derive(Debug, Clone, Copy)]
pub struct IdentityReport {
    /// `||C^+ + C^- - 1||_max`
    pub sum_residual: f64,
    /// Smallest eigenvalue of the Hermitian part of `+q C^+`.
    pub positivity_plus: f64,
    /// Smallest eigenvalue of the Hermitian part of `-q C^-`.
    pub positivity_minus: f64,
    /// `||C^+ q - gamma^+ K^{-1} kappa gamma^*||_max`
    pub reflection_residual: f64,
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn verify_calderon_identities(cp: &Mat, cm: &Mat, reflection: &Mat, setup: &BoundarySetup) -> IdentityReport {
    let n = cp.nrows();
    IdentityReport {
        sum_residual: max_abs(&(cp + cm - Mat::identity(n, n))),
        positivity_plus: positivity_min(cp, setup, 1.0),
        positivity_minus: positivity_min(cm, setup, -1.0),
        reflection_residual: max_abs(&(cp * &setup.ops.q - reflection)),
    }
}

pub fn to_mat2(m: &Mat) -> Matrix2<C64> {
    Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

pub fn from_mat2(m: &Matrix2<C64>) -> Mat {
    DMatrix::from_fn(2, 2, |r, c| m[(r, c)])
}

/// Per-mode reference Calderón data from an exact (or RK4) modal inverse.
pub struct ModalCalderon<'a> {
    pub inv: &'a ModalInverse,
    pub setup: BoundarySetup,
}

impl<'a> ModalCalderon<'a> {
    pub fn new(inv: &'a ModalInverse) -> Result<Self> {
        let y = YDiscretization::mode(inv.ode.k);
        Ok(Self { setup: BoundarySetup::new(&inv.ode.family, &y)?, inv })
    }

    fn ik(&self) -> C64 {
        I * self.inv.ode.k
    }

    /// State jump across `s = 0` produced by `gamma^* g`, or by `kappa gamma^* g`.
    pub fn layer_jump(&self, g: [C64; 2], reflected: bool) -> State {
        let n = self.setup.normal;
        let c0 = self.setup.at_zero;
        let sigma = self.setup.sigma;
        let big_a = g[0] + (n.ny * self.ik()).conj() * g[1];
        let mut big_b = n.ns.conj() * g[1];
        if reflected {
            big_b = -big_b;
        }
        let j0 = big_b * sigma / (c0.rho * c0.a);
        let jp = -big_a * sigma - self.ik() * c0.rho * c0.c * j0;
        State::new(j0, jp)
    }

    /// `gamma^+-` of the solution with the given jump at `s = 0`.
    pub fn trace_of_jump(&self, jump: State, side: Side) -> Result<[C64; 2]> {
        let sol = self.inv.jump_solution(0.0, jump)?;
        let (phi, dphi) = sol.value_and_derivative(0.0, side)?;
        let n = self.setup.normal;
        Ok([phi, n.ns * dphi + n.ny * self.ik() * phi])
    }

    fn columns(&self, f: impl Fn(usize) -> Result<[C64; 2]>) -> Result<Matrix2<C64>> {
        let mut m = Matrix2::zeros();
        for j in 0..2 {
            let col = f(j)?;
            m[(0, j)] = col[0];
            m[(1, j)] = col[1];
        }
        Ok(m)
    }

    /// `C^+- = -+ gamma^+- K^{-1} gamma^* S`.
    pub fn calderon(&self, side: Side) -> Result<Matrix2<C64>> {
        let s = to_mat2(&self.setup.ops.s);
        self.columns(|j| {
            let g = s.column(j);
            let tr = self.trace_of_jump(self.layer_jump([g[0], g[1]], false), side)?;
            let sign = -side.sign();
            Ok([tr[0] * sign, tr[1] * sign])
        })
    }

    /// `gamma^+ K^{-1} kappa gamma^*`.
    pub fn reflection(&self) -> Result<Matrix2<C64>> {
        self.columns(|j| {
            let mut e = [ZERO, ZERO];
            e[j] = ONE;
            self.trace_of_jump(self.layer_jump(e, true), Side::Plus)
        })
    }

    pub fn report(&self) -> Result<IdentityReport> {
        let cp = from_mat2(&self.calderon(Side::Plus)?);
        let cm = from_mat2(&self.calderon(Side::Minus)?);
        Ok(verify_calderon_identities(&cp, &cm, &from_mat2(&self.reflection()?), &self.setup))
    }
}
