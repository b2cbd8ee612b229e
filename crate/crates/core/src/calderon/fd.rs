//! Traces, the adjoint trace and Calderón operators on the finite-difference grid.
//!
//! `gamma^*` is the exact adjoint of the two-sided trace (centered
//! derivative) for the `dmu_k` and `dsigma` weights. Solutions of
//! `K u = gamma^* g` carry a layer at `s = 0`, so their one-sided traces are
//! taken by cubic extrapolation from the four nearest nodes on that side.

use nalgebra::DVector;

use super::{positivity_min, BoundarySetup, IdentityReport};
use crate::elliptic::{DiscreteEllipticSystem, Side};
use crate::error::{Error, Result};
use crate::linalg::{lagrange_at_zero, Mat, C64, ONE, ZERO};

/// Nodes used by the extrapolated layer trace.
const LAYER_NODES: usize = 4;

pub struct FdBoundary<'a> {
    pub sys: &'a DiscreteEllipticSystem,
    pub setup: BoundarySetup,
    /// `n^y D_y`
    ny_dy: Mat,
}

impl<'a> FdBoundary<'a> {
    pub fn new(sys: &'a DiscreteEllipticSystem) -> Result<Self> {
        let setup = BoundarySetup::new(&sys.family, &sys.y)?;
        Ok(Self::with_setup(sys, setup))
    }

    pub fn with_setup(sys: &'a DiscreteEllipticSystem, setup: BoundarySetup) -> Self {
        let ny_dy = &sys.dy * setup.normal.ny;
        Self { sys, setup, ny_dy }
    }

    fn bs(&self) -> usize {
        self.sys.block_size()
    }

    /// Block of values at the node `offset` steps from `s = 0` (zero past a Dirichlet end).
    fn block(&self, u: &[C64], offset: isize) -> DVector<C64> {
        let bs = self.bs();
        match self.sys.grid.offset(offset) {
            Some(i) => DVector::from_column_slice(&u[i * bs..(i + 1) * bs]),
            None => DVector::zeros(bs),
        }
    }

    fn pair(&self, f0: DVector<C64>, ds: DVector<C64>) -> Vec<C64> {
        let f1 = ds * self.setup.normal.ns + &self.ny_dy * &f0;
        f0.iter().chain(f1.iter()).copied().collect()
    }

    /// Two-sided trace with a centered `s` derivative.
    pub fn trace_two_sided(&self, u: &[C64]) -> Vec<C64> {
        let h = self.sys.grid.h;
        let ds = (self.block(u, 1) - self.block(u, -1)) / C64::from(2.0 * h);
        self.pair(self.block(u, 0), ds)
    }

    /// `gamma^+-` of a field smooth up to `s = 0` from the given side (3-point one-sided derivative).
    pub fn trace(&self, u: &[C64], side: Side) -> Result<Vec<C64>> {
        if self.sys.grid.center < 2 {
            return Err(Error::GridTooCoarse("fewer than 3 nodes on a side".into()));
        }
        let h = self.sys.grid.h;
        let sg = side.sign() as isize;
        let (u0, u1, u2) = (self.block(u, 0), self.block(u, sg), self.block(u, 2 * sg));
        let ds = (u0 * C64::from(-3.0) + u1 * C64::from(4.0) - u2) / C64::from(2.0 * h * side.sign());
        Ok(self.pair(self.block(u, 0), ds))
    }

    fn layer_weights(&self, side: Side) -> (Vec<f64>, Vec<f64>) {
        let h = self.sys.grid.h;
        let xs: Vec<f64> = (1..=LAYER_NODES).map(|j| side.sign() * j as f64 * h).collect();
        lagrange_at_zero(&xs)
    }

    /// Value and `s` derivative at `s = 0` extrapolated from one side.
    fn layer_limits(&self, u: &[C64], side: Side) -> (DVector<C64>, DVector<C64>) {
        let (wv, wd) = self.layer_weights(side);
        let sg = side.sign() as isize;
        let mut v = DVector::zeros(self.bs());
        let mut d = DVector::zeros(self.bs());
        for j in 0..LAYER_NODES {
            let b = self.block(u, sg * (j as isize + 1));
            v += &b * C64::from(wv[j]);
            d += &b * C64::from(wd[j]);
        }
        (v, d)
    }

    /// `gamma^+-` of a layer solution, i.e. its one-sided limit at `s = 0`.
    pub fn trace_layer(&self, u: &[C64], side: Side) -> Result<Vec<C64>> {
        if self.sys.grid.center < LAYER_NODES {
            return Err(Error::GridTooCoarse(format!("fewer than {LAYER_NODES} nodes on a side")));
        }
        let (v, d) = self.layer_limits(u, side);
        Ok(self.pair(v, d))
    }

    /// `r^+-` of a layer solution: the field on `Omega^+-`, node 0 replaced by
    /// the one-sided limit, zero on the other side.
    pub fn restrict_layer(&self, u: &[C64], side: Side) -> Vec<C64> {
        let bs = self.bs();
        let c = self.sys.grid.center;
        let mut out = vec![ZERO; u.len()];
        for (i, s) in self.sys.grid.nodes.iter().enumerate() {
            if s * side.sign() > 0.0 {
                out[i * bs..(i + 1) * bs].copy_from_slice(&u[i * bs..(i + 1) * bs]);
            }
        }
        let (v, _) = self.layer_limits(u, side);
        out[c * bs..(c + 1) * bs].copy_from_slice(v.as_slice());
        out
    }

    /// `(f|g)_{dsigma}`.
    pub fn boundary_inner(&self, f: &[C64], g: &[C64]) -> C64 {
        let w = self.setup.sigma * self.sys.y.y_weight();
        f.iter().zip(g).map(|(a, b)| a.conj() * b).sum::<C64>() * w
    }

    /// `gamma^* f`: the grid field `r` with `(r|v)_{dmu} = (f|gamma v)_{dsigma}` for all `v`.
    pub fn trace_adjoint(&self, f: &[C64]) -> Vec<C64> {
        let bs = self.bs();
        let h = self.sys.grid.h;
        let f0 = DVector::from_column_slice(&f[..bs]);
        let f1 = DVector::from_column_slice(&f[bs..]);
        let sw = self.setup.sigma * self.sys.y.y_weight();
        let mut r = vec![ZERO; self.sys.dim()];
        let mut put = |offset: isize, val: DVector<C64>| {
            if let Some(i) = self.sys.grid.offset(offset) {
                for l in 0..bs {
                    r[i * bs + l] += val[l] * (sw / self.sys.weights[i * bs + l]);
                }
            }
        };
        put(0, &f0 + self.ny_dy.adjoint() * &f1);
        let dip = &f1 * (self.setup.normal.ns.conj() / (2.0 * h));
        put(1, dip.clone());
        put(-1, -dip);
        r
    }

    fn unit_columns(&self, mut col: impl FnMut(&[C64]) -> Result<Vec<C64>>) -> Result<Mat> {
        let n = 2 * self.bs();
        let mut m = Mat::zeros(n, n);
        for j in 0..n {
            let mut e = vec![ZERO; n];
            e[j] = ONE;
            let c = col(&e)?;
            m.set_column(j, &DVector::from_vec(c));
        }
        Ok(m)
    }

    /// `K^{-1} gamma^* S f`.
    pub fn layer_potential(&self, f: &[C64]) -> Result<Vec<C64>> {
        let sf = &self.setup.ops.s * DVector::from_column_slice(f);
        self.sys.solve(&self.trace_adjoint(sf.as_slice()))
    }

    /// `C^+- = -+ gamma^+- K^{-1} gamma^* S`.
    pub fn calderon(&self, side: Side) -> Result<Mat> {
        self.unit_columns(|e| {
            let u = self.layer_potential(e)?;
            Ok(self.trace_layer(&u, side)?.iter().map(|z| z * -side.sign()).collect())
        })
    }

    /// `(C^+, C^-)` from one set of layer potentials.
    pub fn calderon_pair(&self) -> Result<(Mat, Mat)> {
        let n = 2 * self.bs();
        let sources: Vec<Vec<C64>> = (0..n)
            .map(|j| {
                let sf = self.setup.ops.s.column(j).into_owned();
                self.trace_adjoint(sf.as_slice())
            })
            .collect();
        let (mut cp, mut cm) = (Mat::zeros(n, n), Mat::zeros(n, n));
        for (j, u) in self.sys.solve_many(&sources)?.iter().enumerate() {
            let u = u.as_slice();
            let tp: Vec<C64> = self.trace_layer(u, Side::Plus)?.iter().map(|z| -z).collect();
            cp.set_column(j, &DVector::from_vec(tp));
            cm.set_column(j, &DVector::from_vec(self.trace_layer(u, Side::Minus)?));
        }
        Ok((cp, cm))
    }

    /// `gamma^+ K^{-1} kappa gamma^*`, with `kappa` applied to the source before solving.
    pub fn reflection(&self) -> Result<Mat> {
        let n = 2 * self.bs();
        let sources: Vec<Vec<C64>> = (0..n)
            .map(|j| {
                let mut e = vec![ZERO; n];
                e[j] = ONE;
                self.sys.kappa(&self.trace_adjoint(&e))
            })
            .collect();
        let mut m = Mat::zeros(n, n);
        for (j, u) in self.sys.solve_many(&sources)?.iter().enumerate() {
            m.set_column(j, &DVector::from_vec(self.trace_layer(u, Side::Plus)?));
        }
        Ok(m)
    }

    pub fn report(&self) -> Result<IdentityReport> {
        let (cp, cm) = self.calderon_pair()?;
        let refl = self.reflection()?;
        let n = cp.nrows();
        Ok(IdentityReport {
            sum_residual: super::max_abs(&(&cp + &cm - Mat::identity(n, n))),
            positivity_plus: positivity_min(&cp, &self.setup, 1.0),
            positivity_minus: positivity_min(&cm, &self.setup, -1.0),
            reflection_residual: super::max_abs(&(&cp * &self.setup.ops.q - refl)),
        })
    }

    /// `(v|w)_{Omega^+-}`: trapezoid weights, half weight on the `s = 0` node.
    pub fn half_inner(&self, v: &[C64], w: &[C64], side: Side) -> C64 {
        let bs = self.bs();
        let c = self.sys.grid.center;
        let mut acc = ZERO;
        for (i, s) in self.sys.grid.nodes.iter().enumerate() {
            let factor = if i == c {
                0.5
            } else if s * side.sign() > 0.0 {
                1.0
            } else {
                continue;
            };
            for l in 0..bs {
                let k = i * bs + l;
                acc += v[k].conj() * w[k] * (self.sys.weights[k] * factor);
            }
        }
        acc
    }

    fn pair_product(&self, f: &[C64], op: &Mat, g: &[C64]) -> C64 {
        let og = op * DVector::from_column_slice(g);
        self.boundary_inner(f, og.as_slice())
    }

    /// Residuals of the two Green identities for fields smooth on the closed half region
    /// and vanishing near its outer edge.
    pub fn green_identity_check(&self, u: &[C64], v: &[C64], side: Side) -> Result<(f64, f64)> {
        let ku = self.sys.apply(u);
        let kv = self.sys.apply(v);
        let ksv = self.sys.apply_adjoint(v);
        let (gu, gv) = (self.trace(u, side)?, self.trace(v, side)?);
        let sg = side.sign();
        let lhs_i = self.half_inner(v, &ku, side) - self.half_inner(&ksv, u, side);
        let rhs_i = self.pair_product(&gv, &self.setup.ops.s, &gu) * sg;
        let lhs_ii = self.half_inner(v, &ku, side) + self.half_inner(&kv, u, side);
        let rhs_ii = self.sys.eta_form(v, u, side)? - self.pair_product(&gv, &self.setup.ops.q, &gu) * sg;
        Ok(((lhs_i - rhs_i).norm(), (lhs_ii - rhs_ii).norm()))
    }

    fn multiply(&self, chi: &dyn Fn(f64) -> f64, u: &[C64]) -> Vec<C64> {
        let bs = self.bs();
        u.iter().enumerate().map(|(k, z)| z * chi(self.sys.grid.nodes[k / bs])).collect()
    }

    /// `[K, chi] u`
    fn commutator(&self, chi: &dyn Fn(f64) -> f64, u: &[C64], adjoint: bool) -> Vec<C64> {
        let apply = |x: &[C64]| if adjoint { self.sys.apply_adjoint(x) } else { self.sys.apply(x) };
        let a = apply(&self.multiply(chi, u));
        let b = self.multiply(chi, &apply(u));
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    }

    /// Residuals of the two cutoff identities for boundary data `f`, `g`:
    /// the first maximized over both sides, the second for `Omega^+`.
    pub fn cutoff_identity_check(&self, chi: &dyn Fn(f64) -> f64, f: &[C64], g: &[C64]) -> Result<(f64, f64)> {
        let eps = 1e-5;
        let dchi = (chi(eps) - chi(-eps)) / (2.0 * eps);
        let dn = (self.setup.normal.ns * dchi).norm();
        if dn > 1e-12 {
            return Err(Error::CutoffViolation(dn));
        }
        let big_u = self.layer_potential(f)?;
        let mut res_a = 0.0_f64;
        let mut layer = [Vec::new(), Vec::new()];
        for (slot, side) in [Side::Plus, Side::Minus].into_iter().enumerate() {
            let sg = side.sign();
            let u: Vec<C64> = self.restrict_layer(&big_u, side).iter().map(|z| z * -sg).collect();
            let cf = self.trace_layer(&u, side)?;
            let lhs = self.pair_product(&cf, &self.setup.ops.q, &cf) * (chi(0.0) * chi(0.0));
            let chi_u = self.multiply(chi, &u);
            let comm = self.commutator(chi, &u, false);
            let rhs = self.sys.eta_form(&chi_u, &chi_u, side)? * sg
                - C64::from(2.0 * sg * self.half_inner(&u, &self.multiply(chi, &comm), side).re);
            res_a = res_a.max((lhs - rhs).norm());
            layer[slot] = u;
        }
        let u_plus = &layer[0];
        let big_v = self.layer_potential(g)?;
        let w_plus: Vec<C64> = self.restrict_layer(&self.sys.kappa(&big_v), Side::Plus).iter().map(|z| -z).collect();
        let chi_t = |s: f64| chi(-s);
        let cp_f = self.trace_layer(u_plus, Side::Plus)?;
        let cm_g = self.trace_layer(&big_v, Side::Minus)?;
        let lhs = self.pair_product(&cm_g, &self.setup.ops.q, &cp_f) * (chi(0.0) * chi(0.0));
        let t1 = self.half_inner(&w_plus, &self.multiply(&chi_t, &self.commutator(chi, u_plus, false)), Side::Plus);
        let t2 = self.half_inner(&self.multiply(chi, &self.commutator(&chi_t, &w_plus, true)), u_plus, Side::Plus);
        Ok((res_a, (lhs - (t1 - t2)).norm()))
    }
}

/// Smooth even cutoff: 1 on `|s| <= inner`, 0 on `|s| >= outer`.
pub fn smooth_cutoff(inner: f64, outer: f64) -> impl Fn(f64) -> f64 {
    let chi = super::cutoff::Cutoff::new(inner, outer);
    move |s: f64| chi.value(s)
}
