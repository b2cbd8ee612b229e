//! Two-point functions `Lambda^+- = +- U C^+- q U^*` for one Fourier mode.

use nalgebra::{DMatrix, Matrix2};
use rand::Rng;

use crate::calderon::fd::FdBoundary;
use crate::calderon::ModalCalderon;
use crate::elliptic::Side;
use crate::error::{Error, Result};
use crate::linalg::{min_hermitian_eig, C64, I};
use crate::lorentzian::ModeEvolution;
use crate::wick::{boundary_value_extrapolation, euclidean_strip, fit_stationary, Edge};

/// Calderón pair of one mode together with the boundary density it was built with.
#[derive(Debug, Clone, Copy)]
pub struct ModeCalderon {
    pub k: f64,
    pub sigma: f64,
    pub plus: Matrix2<C64>,
    pub minus: Matrix2<C64>,
}

impl ModeCalderon {
    pub fn from_modal(mc: &ModalCalderon) -> Result<Self> {
        Ok(Self {
            k: mc.inv.ode.k,
            sigma: mc.setup.sigma,
            plus: mc.calderon(Side::Plus)?,
            minus: mc.calderon(Side::Minus)?,
        })
    }

    pub fn side(&self, side: Side) -> &Matrix2<C64> {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        }
    }
}

/// `Lambda(t_i, t_j) = row_i . M . conj(row_j)` with `M = +- sigma^{-1} C q`.
#[derive(Debug, Clone)]
pub struct TwoPointKernel {
    pub side: Side,
    pub k: f64,
    pub times: Vec<f64>,
    pub m: Matrix2<C64>,
    rows: Vec<[C64; 2]>,
}

impl TwoPointKernel {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn value(&self, i: usize, j: usize) -> C64 {
        let (a, b) = (self.rows[i], self.rows[j]);
        let mb = [self.m[(0, 0)] * b[0].conj() + self.m[(0, 1)] * b[1].conj(), self.m[(1, 0)] * b[0].conj() + self.m[(1, 1)] * b[1].conj()];
        a[0] * mb[0] + a[1] * mb[1]
    }

    /// Dense samples on every `stride`-th node.
    pub fn dense(&self, stride: usize) -> (Vec<usize>, DMatrix<C64>) {
        let idx: Vec<usize> = (0..self.len()).step_by(stride.max(1)).collect();
        let m = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.value(idx[a], idx[b]));
        (idx, m)
    }
}

pub fn assemble_two_point(cal: &ModeCalderon, evo: &ModeEvolution, side: Side) -> Result<TwoPointKernel> {
    if cal.k != evo.k {
        return Err(Error::ModeMismatch(format!("Calderón data for k = {}, evolution for k = {}", cal.k, evo.k)));
    }
    if (cal.sigma - evo.sigma).abs() > 1e-14 * cal.sigma {
        return Err(Error::ModeMismatch(format!("boundary densities {} and {}", cal.sigma, evo.sigma)));
    }
    let q = Matrix2::new(C64::from(0.0), C64::from(1.0), C64::from(1.0), C64::from(0.0));
    let m = cal.side(side) * q * C64::from(side.sign() / cal.sigma);
    Ok(TwoPointKernel { side, k: cal.k, times: evo.grid.nodes(), m, rows: (0..evo.grid.len()).map(|j| evo.row(j)).collect() })
}

/// `cosh(omega (beta/2 + i (t1 - t2))) / (2 omega sinh(omega beta / 2))`.
pub fn thermal_mode_oracle(omega: f64, beta: f64, t1: f64, t2: f64) -> C64 {
    let tau = t1 - t2;
    if omega * beta > 700.0 {
        return (I * omega * tau).exp() / (2.0 * omega);
    }
    (C64::new(omega * beta / 2.0, omega * tau)).cosh() / (2.0 * omega * (omega * beta / 2.0).sinh())
}

#[derive(Debug, Clone, Copy)]
pub struct StateReport {
    /// Smallest Gram eigenvalue relative to the largest, over both signs.
    pub positivity_min: f64,
    /// Mode operator applied in either argument, relative to `(1 + omega^2) max |Lambda|`.
    pub bisolution_res: f64,
    /// `max |Lambda^+ - Lambda^- - i G|` with `G` from independent evolutions.
    pub ccr_res: f64,
    /// `max |Lambda(t1, t2) - conj(Lambda(t2, t1))|`.
    pub hermiticity: f64,
    /// `max |Lambda(t1 + tau, t2 + tau) - Lambda(t1, t2)|`, stationary coefficients only.
    pub translation: Option<f64>,
}

/// `r^{-1}(D(p D phi) + r (k^2/h + mu) phi)` with `D = d_t - i k w`, `p = sqrt(h)/N`,
/// by 5-point stencils; the two nodes next to each end are skipped.
pub fn mode_operator_residual(evo: &ModeEvolution, phi: &[C64]) -> Vec<C64> {
    let fam = &evo.family;
    let dt = evo.grid.dt();
    let k = evo.k;
    let n = phi.len();
    let mut out = Vec::with_capacity(n.saturating_sub(4));
    for j in 2..n.saturating_sub(2) {
        let t = evo.grid.node(j);
        let c = fam.at(C64::from(t));
        let d = fam.derivs_at(C64::from(t));
        let (nn, h, w, mu) = (c.lapse.re, c.h.re, c.shift.re, c.mass.re);
        let (dn, dh, dw) = (d.lapse.re, d.h.re, d.shift.re);
        let p = h.sqrt() / nn;
        let dp = dh / (2.0 * h.sqrt() * nn) - h.sqrt() * dn / (nn * nn);
        let r = nn * h.sqrt();
        let f1 = (phi[j - 2] - phi[j + 2] + (phi[j + 1] - phi[j - 1]) * 8.0) / (12.0 * dt);
        let f2 = (-phi[j - 2] - phi[j + 2] + (phi[j + 1] + phi[j - 1]) * 16.0 - phi[j] * 30.0) / (12.0 * dt * dt);
        let ikw = I * (k * w);
        let dphi = f1 - ikw * phi[j];
        let ddphi = f2 - I * (k * dw) * phi[j] - ikw * f1;
        let lhs = dphi * dp + ddphi * p - ikw * p * dphi;
        out.push((lhs + phi[j] * (r * (k * k / h + mu))) / r);
    }
    out
}

fn omega_sq_max(evo: &ModeEvolution) -> f64 {
    evo.grid
        .nodes()
        .iter()
        .map(|&t| {
            let c = evo.family.at(C64::from(t));
            c.lapse.re.powi(2) * (evo.k * evo.k / c.h.re + c.mass.re)
        })
        .fold(0.0, f64::max)
}

/// Relative Gram positivity of a kernel over delta test functions on every `stride`-th node.
pub fn gram_positivity(kernel: &TwoPointKernel, evo: &ModeEvolution, stride: usize) -> f64 {
    let w = evo.m_weights();
    let (idx, mut g) = kernel.dense(stride);
    for a in 0..idx.len() {
        for b in 0..idx.len() {
            g[(a, b)] *= w[idx[a]] * w[idx[b]];
        }
    }
    let herm = (&g + g.adjoint()) * C64::from(0.5);
    let top = herm.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    min_hermitian_eig(&g) / top
}

/// Smallest `Re <phi, Lambda phi> / (||phi||^2 max|Lambda|)` over random test vectors,
/// where `phi` ranges over several modes at once (different modes do not couple).
pub fn random_positivity(kernels: &[(&TwoPointKernel, &ModeEvolution)], trials: usize, rng: &mut impl Rng) -> f64 {
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let (mut form, mut norm, mut scale) = (0.0, 0.0, 0.0_f64);
        for (kernel, evo) in kernels {
            let w = evo.m_weights();
            let n = kernel.len();
            let phi: Vec<C64> = (0..n).map(|j| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * w[j]).collect();
            // <phi, Lambda phi> = sum_ij conj(phi_i) Lambda_ij phi_j = (sum_i conj(phi_i) row_i) M (sum_j conj(row_j) phi_j)
            let mut left = [C64::from(0.0); 2];
            for (j, p) in phi.iter().enumerate() {
                let r = kernel.rows[j];
                left[0] += p.conj() * r[0];
                left[1] += p.conj() * r[1];
            }
            let right = [left[0].conj(), left[1].conj()];
            let m = kernel.m;
            let v = left[0] * (m[(0, 0)] * right[0] + m[(0, 1)] * right[1]) + left[1] * (m[(1, 0)] * right[0] + m[(1, 1)] * right[1]);
            form += v.re;
            norm += phi.iter().map(|p| p.norm_sqr()).sum::<f64>();
            scale = scale.max(kernel.value(n / 2, n / 2).norm());
        }
        worst = worst.min(form / (norm * scale.max(1e-300)));
    }
    worst
}

/// State properties of `(Lambda^+, Lambda^-)`, sampling pairs every `stride` nodes.
pub fn verify_state_properties(plus: &TwoPointKernel, minus: &TwoPointKernel, evo: &ModeEvolution, stride: usize) -> Result<StateReport> {
    let n = plus.len();
    let stride = stride.max(1);
    let positivity_min = gram_positivity(plus, evo, stride).min(gram_positivity(minus, evo, stride));

    let scale = (1.0 + omega_sq_max(evo)) * plus.value(n / 2, n / 2).norm().max(minus.value(n / 2, n / 2).norm());
    let mut bis = 0.0_f64;
    for kernel in [plus, minus] {
        for j in (0..n).step_by(stride) {
            let col: Vec<C64> = (0..n).map(|i| kernel.value(i, j)).collect();
            let row: Vec<C64> = (0..n).map(|i| kernel.value(j, i).conj()).collect();
            for r in mode_operator_residual(evo, &col).into_iter().chain(mode_operator_residual(evo, &row)) {
                bis = bis.max(r.norm() / scale);
            }
        }
    }

    let mut ccr = 0.0_f64;
    let mut herm = 0.0_f64;
    for j1 in (0..n).step_by(stride) {
        for j2 in (0..n).step_by(stride) {
            let g = evo.causal_propagator(plus.times[j1], plus.times[j2])?;
            ccr = ccr.max((plus.value(j1, j2) - minus.value(j1, j2) - I * g).norm());
            for kernel in [plus, minus] {
                herm = herm.max((kernel.value(j1, j2) - kernel.value(j2, j1).conj()).norm());
            }
        }
    }

    let translation = evo.family.is_stationary().then(|| {
        let shift = n / 4;
        let mut worst = 0.0_f64;
        for kernel in [plus, minus] {
            for j1 in (0..n - shift).step_by(stride) {
                for j2 in (0..n - shift).step_by(stride) {
                    worst = worst.max((kernel.value(j1 + shift, j2 + shift) - kernel.value(j1, j2)).norm());
                }
            }
        }
        worst
    });

    Ok(StateReport { positivity_min, bisolution_res: bis, ccr_res: ccr, hermiticity: herm, translation })
}

#[derive(Debug, Clone, Copy)]
pub struct KmsReport {
    /// Per-component deviation of the fitted kernels from `Lambda^+(t1 + i beta, t2) = Lambda^-(t1, t2)`.
    pub closed_form: f64,
    /// Edge rows of the Euclidean strip against `Lambda^+(t, 0)` and `Lambda^-(t, 0)`.
    pub strip: Option<f64>,
    /// Extrapolation error estimate of the strip edges.
    pub strip_estimate: Option<f64>,
}

/// KMS identities at inverse temperature `beta`. The closed-form path compares the
/// fitted coefficients in the direction where `e^{-beta |nu|}` damps rather than
/// amplifies. The strip path runs when an FD boundary is supplied, on every
/// `t_stride`-th node.
pub fn verify_kms(
    plus: &TwoPointKernel,
    minus: &TwoPointKernel,
    evo: &ModeEvolution,
    beta: f64,
    fd: Option<&FdBoundary>,
    t_stride: usize,
) -> Result<KmsReport> {
    let fp = fit_stationary(plus, evo, (plus.len() / 40).max(1))?;
    let fm = fit_stationary(minus, evo, (minus.len() / 40).max(1))?;
    let mut closed_form = fp.residual.max(fm.residual);
    for i in 0..2 {
        let damp = (-beta * fp.nu[i].abs()).exp();
        for j in 0..2 {
            let d = if fp.nu[i] >= 0.0 { fm.a[i][j] - fp.a[i][j] * damp } else { fp.a[i][j] - fm.a[i][j] * damp };
            closed_form = closed_form.max(d.norm());
        }
    }
    let (mut strip, mut strip_estimate) = (None, None);
    if let Some(fd) = fd {
        let t_idx: Vec<usize> = (0..evo.grid.len()).step_by(t_stride.max(1)).collect();
        let f = euclidean_strip(fd, evo, &t_idx)?;
        let c = evo.grid.steps;
        let mut worst = 0.0_f64;
        let mut est = 0.0_f64;
        for (edge, kernel) in [(Edge::Top, plus), (Edge::Bottom, minus)] {
            let ex = boundary_value_extrapolation(&f, edge)?;
            est = est.max(ex.error);
            for (q, &j) in t_idx.iter().enumerate() {
                worst = worst.max((ex.row[q] - kernel.value(j, c)).norm());
            }
        }
        strip = Some(worst);
        strip_estimate = Some(est);
    }
    Ok(KmsReport { closed_form, strip, strip_estimate })
}

/// `Lambda^+ (t, t)` at every node.
pub fn equal_time(kernel: &TwoPointKernel) -> Vec<C64> {
    (0..kernel.len()).map(|j| kernel.value(j, j)).collect()
}
