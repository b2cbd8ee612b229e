//! Even cutoffs and the cutoff identities for a single Fourier mode, evaluated
//! on exact modal fields with composite Gauss-Legendre quadrature.

use nalgebra::Vector2;

use super::ModalCalderon;
use crate::elliptic::modal::JumpSolution;
use crate::elliptic::{NodeCoeffs, Side};
use crate::error::{Error, Result};
use crate::linalg::{composite_gauss, C64, I, ZERO};

/// Smooth even cutoff: 1 on `|s| <= inner`, 0 on `|s| >= outer`.
#[derive(Debug, Clone, Copy)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

fn bump(x: f64) -> [f64; 3] {
    if x <= 0.0 {
        return [0.0; 3];
    }
    let e = (-1.0 / x).exp();
    [e, e / (x * x), e * (1.0 / x.powi(4) - 2.0 / x.powi(3))]
}

impl Cutoff {
    pub fn new(inner: f64, outer: f64) -> Self {
        Self { inner, outer }
    }

    /// `(chi, chi', chi'')` at `s`.
    pub fn eval(&self, s: f64) -> [f64; 3] {
        let w = self.outer - self.inner;
        let x = (self.outer - s.abs()) / w;
        if x >= 1.0 {
            return [1.0, 0.0, 0.0];
        }
        if x <= 0.0 {
            return [0.0; 3];
        }
        let [a, a1, a2] = bump(x);
        let [b, b1, b2] = bump(1.0 - x);
        let (b1, b2) = (-b1, b2);
        let d = (a + b) * (a + b);
        let n = a1 * b - a * b1;
        let dn = a2 * b - a * b2;
        let dd = 2.0 * (a + b) * (a1 + b1);
        let psi1 = n / d;
        let psi2 = (dn * d - n * dd) / (d * d);
        let dx = -s.signum() / w;
        [a / (a + b), psi1 * dx, psi2 / (w * w)]
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval(s)[0]
    }
}

fn rho_a_derivative(mc: &ModalCalderon, s: f64) -> Result<C64> {
    let d = 1e-3;
    let f = |t: f64| -> Result<C64> {
        let c = mc.inv.ode.coeffs(t)?;
        Ok(c.a * c.rho)
    };
    Ok((f(s - 2.0 * d)? - f(s + 2.0 * d)? + (f(s + d)? - f(s - d)?) * 8.0) / (12.0 * d))
}

/// Field value, derivative and coefficients at one quadrature node.
struct Sample {
    u: C64,
    du: C64,
    c: NodeCoeffs,
    rho_a_prime: C64,
}

/// `[K, chi] u`, or `[K^*, chi] u` when `adjoint` (conjugated coefficients).
fn commutator(sm: &Sample, k: f64, chi: [f64; 3], adjoint: bool) -> C64 {
    let fix = |z: C64| if adjoint { z.conj() } else { z };
    let (a, c, ra) = (fix(sm.c.a), fix(sm.c.c), fix(sm.rho_a_prime));
    let div = (ra * chi[1] + a * sm.c.rho * chi[2]) / sm.c.rho;
    -a * (2.0 * chi[1]) * sm.du - I * k * c * (2.0 * chi[1]) * sm.u - div * sm.u
}

/// Integrand of `eta` (without the factor 2 and the density).
fn eta_density(v: (C64, C64), u: (C64, C64), c: &NodeCoeffs, k: f64) -> C64 {
    let vy = I * k * v.0;
    let uy = I * k * u.0;
    v.1.conj() * u.1 * c.a.re + (v.1.conj() * uy + vy.conj() * u.1) * c.c.re + vy.conj() * uy * c.e.re
        + v.0.conj() * u.0 * c.lambda.re
}

impl ModalCalderon<'_> {
    fn sample(&self, sol: &JumpSolution, s: f64, side: Side, scale: f64, mirrored: bool) -> Result<Sample> {
        let at = if mirrored { -s } else { s };
        let (u, du) = sol.value_and_derivative(at, side)?;
        let du = if mirrored { -du } else { du };
        Ok(Sample { u: u * scale, du: du * scale, c: self.inv.ode.coeffs(s)?, rho_a_prime: rho_a_derivative(self, s)? })
    }

    fn pair(&self, f: &Vector2<C64>, g: &Vector2<C64>) -> C64 {
        // (f | q g)_sigma
        (f[0].conj() * g[1] + f[1].conj() * g[0]) * self.setup.sigma
    }

    /// Residuals of the cutoff identities for `C^+-` (max over sides) and for the
    /// mixed pairing `(chi C^- g | q chi C^+ f)`, using `panels` eight-point panels.
    pub fn cutoff_identity_check(&self, chi: &Cutoff, f: [C64; 2], g: [C64; 2], panels: usize) -> Result<(f64, f64)> {
        let dn = (self.setup.normal.ns * chi.eval(0.0)[1]).norm();
        if dn > 1e-12 {
            return Err(Error::CutoffViolation(dn));
        }
        let k = self.inv.ode.k;
        let s_op = super::to_mat2(&self.setup.ops.s);
        let fv = Vector2::new(f[0], f[1]);
        let gv = Vector2::new(g[0], g[1]);
        let sf = s_op * fv;
        let sg = s_op * gv;
        let big_u = self.inv.jump_solution(0.0, self.layer_jump([sf[0], sf[1]], false))?;
        let big_v = self.inv.jump_solution(0.0, self.layer_jump([sg[0], sg[1]], false))?;
        let chi0 = chi.value(0.0).powi(2);
        let nodes = composite_gauss(0.0, chi.outer, panels, 8);

        let mut res_a = 0.0_f64;
        for side in [Side::Plus, Side::Minus] {
            let sgn = side.sign();
            let cf = self.calderon(side)? * fv;
            let lhs = self.pair(&cf, &cf) * chi0;
            let (mut eta, mut comm) = (ZERO, ZERO);
            for &(x, w) in &nodes {
                let s = sgn * x;
                let sm = self.sample(&big_u, s, side, -sgn, false)?;
                let ch = chi.eval(s);
                let cu = (sm.u * ch[0], sm.du * ch[0] + sm.u * ch[1]);
                eta += eta_density(cu, cu, &sm.c, k) * (2.0 * w * sm.c.rho);
                comm += sm.u.conj() * commutator(&sm, k, ch, false) * (ch[0] * w * sm.c.rho);
            }
            let rhs = eta * sgn - C64::from(2.0 * sgn * comm.re);
            res_a = res_a.max((lhs - rhs).norm());
        }

        let cp_f = self.calderon(Side::Plus)? * fv;
        let cm_g = self.calderon(Side::Minus)? * gv;
        let lhs = self.pair(&cm_g, &cp_f) * chi0;
        let (mut t1, mut t2) = (ZERO, ZERO);
        for &(s, w) in &nodes {
            let ch = chi.eval(s);
            let u = self.sample(&big_u, s, Side::Plus, -1.0, false)?;
            // w^+ = -r^+ kappa V
            let wp = self.sample(&big_v, s, Side::Minus, -1.0, true)?;
            t1 += wp.u.conj() * commutator(&u, k, ch, false) * (ch[0] * w * u.c.rho);
            t2 += (commutator(&wp, k, ch, true) * ch[0]).conj() * u.u * (w * u.c.rho);
        }
        Ok((res_a, (lhs - (t1 - t2)).norm()))
    }
}
