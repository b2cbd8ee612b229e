//! Continuation between the Euclidean and Lorentzian sides for stationary
//! coefficients: fitted analytic kernels, cone limits, and strip functions.

use nalgebra::{DMatrix, DVector};

use crate::calderon::fd::FdBoundary;
use crate::elliptic::modal::ModalInverse;
use crate::elliptic::{DiscreteEllipticSystem, Side};
use crate::error::{Error, Result};
use crate::linalg::{lagrange_at_zero, C64, I, ZERO};
use crate::lorentzian::{lorentz_generator, ModeEvolution};
use crate::twopoint::TwoPointKernel;

/// Green function of one mode from the modal inverse.
pub fn euclidean_kernel(inv: &ModalInverse, s1: f64, s2: f64) -> Result<C64> {
    inv.green(s1, s2)
}

/// Green function by column extraction from the FD system: `K u = delta_{i2}`, read `u_{i1}`.
pub fn euclidean_kernel_fd(sys: &DiscreteEllipticSystem, i1: usize, i2: usize) -> Result<C64> {
    if i1 == i2 {
        return Err(Error::CoincidentPoints(sys.grid.nodes[i1]));
    }
    let mut rhs = vec![ZERO; sys.dim()];
    rhs[i2] = C64::from(1.0 / sys.weights[i2]);
    Ok(sys.solve(&rhs)?[i1])
}

/// `F(z1, z2) = sum_ij a_ij exp(i nu_i z1 - i nu_j z2)`, fitted to a stationary-coefficient kernel.
#[derive(Debug, Clone, Copy)]
pub struct StationaryFit {
    pub nu: [f64; 2],
    pub a: [[C64; 2]; 2],
    /// Max deviation of the fit from the kernel samples.
    pub residual: f64,
}

impl StationaryFit {
    pub fn eval(&self, z1: C64, z2: C64) -> C64 {
        let mut acc = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                acc += self.a[i][j] * (I * self.nu[i] * z1 - I * self.nu[j] * z2).exp();
            }
        }
        acc
    }

    /// Largest coefficient coupling different frequencies, i.e. the non-stationarity of the state.
    pub fn cross_terms(&self) -> f64 {
        self.a[0][1].norm().max(self.a[1][0].norm())
    }
}

/// Real frequencies `nu` with generator eigenvalues `i nu`, ascending.
pub fn mode_frequencies(evo: &ModeEvolution) -> Result<[f64; 2]> {
    if !evo.family.is_stationary() {
        return Err(Error::NotStationary("continuation candidates need time-independent coefficients".into()));
    }
    let a = lorentz_generator(&evo.family, evo.k, 0.0)?;
    let tr = a[(0, 0)] + a[(1, 1)];
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let disc = (tr * tr * 0.25 - det).sqrt();
    let (l1, l2) = (tr * 0.5 + disc, tr * 0.5 - disc);
    let mut nu = [l1.im, l2.im];
    nu.sort_by(f64::total_cmp);
    Ok(nu)
}

/// Least-squares fit of the four coefficients on every `stride`-th node pair.
pub fn fit_stationary(kernel: &TwoPointKernel, evo: &ModeEvolution, stride: usize) -> Result<StationaryFit> {
    let nu = mode_frequencies(evo)?;
    let idx: Vec<usize> = (0..kernel.len()).step_by(stride.max(1)).collect();
    let rows = idx.len() * idx.len();
    let mut m = DMatrix::<C64>::zeros(rows, 4);
    let mut b = DVector::<C64>::zeros(rows);
    for (p, &i) in idx.iter().enumerate() {
        for (q, &j) in idx.iter().enumerate() {
            let r = p * idx.len() + q;
            let (t1, t2) = (kernel.times[i], kernel.times[j]);
            for a in 0..2 {
                for c in 0..2 {
                    m[(r, 2 * a + c)] = (I * (nu[a] * t1 - nu[c] * t2)).exp();
                }
            }
            b[r] = kernel.value(i, j);
        }
    }
    let coef = m.clone().svd(true, true).solve(&b, 1e-14).map_err(|e| Error::NonConvergent(e.to_string()))?;
    let residual = (&m * &coef - &b).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(StationaryFit { nu, a: [[coef[0], coef[1]], [coef[2], coef[3]]], residual })
}

/// Proper subcone of `+-{s1 > 0, s2 < 0}` approached geometrically with ratio 1/2.
#[derive(Debug, Clone, Copy)]
pub struct ContinuationCone {
    pub sign: Side,
    /// `|s2| / s1`, within `[1/4, 4]`.
    pub aspect: f64,
    pub base: f64,
    pub levels: usize,
}

impl ContinuationCone {
    pub fn new(sign: Side, aspect: f64, base: f64, levels: usize) -> Result<Self> {
        if !(0.25..=4.0).contains(&aspect) || base <= 0.0 {
            return Err(Error::HypothesisViolation(format!("cone aspect {aspect} outside [1/4, 4] or base {base} <= 0")));
        }
        Ok(Self { sign, aspect, base, levels })
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        let sg = self.sign.sign();
        (0..self.levels)
            .map(|j| {
                let r = self.base * 0.5f64.powi(j as i32);
                (sg * r, -sg * self.aspect * r)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationReport {
    /// `max |G(s1, s2) - F(i s1, i s2)|` over the Euclidean sample pairs.
    pub euclidean: f64,
    pub samples: usize,
    /// `|F(t + i s_j) - Lambda(t1, t2)|` along the cone.
    pub cone_deviation: Vec<f64>,
    /// Mean `log2` ratio of the last three successive deviations (1 for a linear approach).
    pub rate: f64,
    pub fit_residual: f64,
}

/// Both clauses of the two-time continuation for one mode: Euclidean values on a
/// 5 x 10 sample set inside the cone, and the cone limit at the node pair `(i, j)`.
/// Samples are confined to `omega |s| <= 3` so that exponential growth of the
/// individual terms stays far below the rounding budget.
pub fn two_time_continuation_check(
    kernel: &TwoPointKernel,
    evo: &ModeEvolution,
    inv: &ModalInverse,
    half_width: f64,
    cone: &ContinuationCone,
    pair: (usize, usize),
) -> Result<ContinuationReport> {
    let fit = fit_stationary(kernel, evo, (kernel.len() / 40).max(1))?;
    let omega = fit.nu[0].abs().max(fit.nu[1].abs()).max(1.0);
    let scale = (0.9 * half_width).min(3.0 / omega);
    let sg = cone.sign.sign();
    let mut euclidean = 0.0_f64;
    let mut samples = 0;
    for a in 1..=5 {
        for b in 1..=10 {
            let s1 = sg * scale * a as f64 / 5.0;
            let s2 = -sg * scale * b as f64 / 10.0;
            let g = inv.green(s1, s2)?;
            euclidean = euclidean.max((g - fit.eval(I * s1, I * s2)).norm());
            samples += 1;
        }
    }
    let (i, j) = pair;
    let (t1, t2) = (kernel.times[i], kernel.times[j]);
    let target = kernel.value(i, j);
    let cone_deviation: Vec<f64> = cone
        .points()
        .iter()
        .map(|&(s1, s2)| (fit.eval(C64::new(t1, s1), C64::new(t2, s2)) - target).norm())
        .collect();
    let ratios: Vec<f64> = cone_deviation.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let tail = &ratios[ratios.len().saturating_sub(3)..];
    let rate = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    Ok(ContinuationReport { euclidean, samples, cone_deviation, rate, fit_residual: fit.residual })
}

/// Values on `[t_0, t_0 + P) x [0, beta]`; row `r` is `s_r = r beta / (n_s - 1)`.
#[derive(Debug, Clone)]
pub struct StripFunction {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub values: DMatrix<C64>,
}

impl StripFunction {
    /// `max |(d_t^2 + d_s^2) F| / max |F|` at interior nodes, 5-point stencils, periodic in `t`.
    pub fn harmonicity_residual(&self) -> f64 {
        let (ns, nt) = self.values.shape();
        let dt = self.t[1] - self.t[0];
        let ds = self.s[1] - self.s[0];
        let f = &self.values;
        let top = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut worst = 0.0_f64;
        for r in 2..ns.saturating_sub(2) {
            for j in 0..nt {
                let at = |d: isize| f[(r, (j as isize + d).rem_euclid(nt as isize) as usize)];
                let ftt = (-at(-2) - at(2) + (at(1) + at(-1)) * 16.0 - at(0) * 30.0) / (12.0 * dt * dt);
                let fss = (-f[(r - 2, j)] - f[(r + 2, j)] + (f[(r + 1, j)] + f[(r - 1, j)]) * 16.0 - f[(r, j)] * 30.0) / (12.0 * ds * ds);
                worst = worst.max((ftt + fss).norm());
            }
        }
        worst / top.max(1e-300)
    }
}

fn uniform_period(t: &[f64]) -> Result<f64> {
    if t.len() < 4 {
        return Err(Error::BoundaryMismatch(format!("{} time samples", t.len())));
    }
    let dt = t[1] - t[0];
    if t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-12 * dt.abs().max(1.0)) {
        return Err(Error::BoundaryMismatch("time samples are not uniform".into()));
    }
    Ok(dt * t.len() as f64)
}

/// `sinh(nu (beta - s)) / sinh(nu beta)` without overflow.
fn decay(nu: f64, beta: f64, s: f64) -> f64 {
    let nu = nu.abs();
    if nu * beta < 1e-12 {
        return 1.0 - s / beta;
    }
    (-nu * s).exp() * (1.0 - (-2.0 * nu * (beta - s)).exp()) / (1.0 - (-2.0 * nu * beta).exp())
}

/// Harmonic function on the strip with the given rows at `s = 0` and `s = beta`,
/// solved exactly per temporal frequency of the periodic data.
pub fn harmonic_strip_continuation(t_top: &[f64], top: &[C64], t_bottom: &[f64], bottom: &[C64], beta: f64, n_s: usize) -> Result<StripFunction> {
    if t_top.len() != t_bottom.len() || t_top.iter().zip(t_bottom).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::BoundaryMismatch("top and bottom rows use different time grids".into()));
    }
    if top.len() != t_top.len() || bottom.len() != t_bottom.len() {
        return Err(Error::BoundaryMismatch("row length differs from its time grid".into()));
    }
    let period = uniform_period(t_top)?;
    let n = t_top.len();
    let t0 = t_top[0];
    let freq = |m: usize| {
        let signed = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
        std::f64::consts::TAU * signed / period
    };
    let dft = |row: &[C64]| -> Vec<C64> {
        (0..n)
            .map(|m| {
                let nu = freq(m);
                row.iter().zip(t_top).map(|(v, &t)| v * (-I * nu * (t - t0)).exp()).sum::<C64>() / n as f64
            })
            .collect()
    };
    let (ct, cb) = (dft(top), dft(bottom));
    let s: Vec<f64> = (0..n_s).map(|r| beta * r as f64 / (n_s - 1) as f64).collect();
    let mut values = DMatrix::zeros(n_s, n);
    for (r, &sr) in s.iter().enumerate() {
        let coef: Vec<C64> = (0..n).map(|m| ct[m] * decay(freq(m), beta, sr) + cb[m] * decay(freq(m), beta, beta - sr)).collect();
        for (j, &t) in t_top.iter().enumerate() {
            values[(r, j)] = (0..n).map(|m| coef[m] * (I * freq(m) * (t - t0)).exp()).sum();
        }
    }
    Ok(StripFunction { t: t_top.to_vec(), s, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Top,
    Bottom,
}

#[derive(Debug, Clone)]
pub struct Extrapolation {
    pub row: Vec<C64>,
    /// Twice the max difference of the last two extrapolants. The actual error of
    /// the last extrapolant runs at about 1.5 times that difference for rough data.
    pub error: f64,
}

/// Polynomial extrapolation of interior rows `1..=m` (`m = 4, 5, 6`) to the edge.
pub fn boundary_value_extrapolation(f: &StripFunction, target: Edge) -> Result<Extrapolation> {
    let (ns, nt) = f.values.shape();
    if ns < 8 {
        return Err(Error::BoundaryMismatch(format!("{ns} rows, need at least 6 interior rows")));
    }
    let row_at = |d: usize| match target {
        Edge::Top => d,
        Edge::Bottom => ns - 1 - d,
    };
    let ds = (f.s[1] - f.s[0]).abs();
    let extrapolant = |m: usize| -> Vec<C64> {
        let xs: Vec<f64> = (1..=m).map(|d| d as f64 * ds).collect();
        let (w, _) = lagrange_at_zero(&xs);
        (0..nt).map(|j| (1..=m).map(|d| f.values[(row_at(d), j)] * w[d - 1]).sum()).collect()
    };
    let (e4, e5, e6) = (extrapolant(4), extrapolant(5), extrapolant(6));
    let diff = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let (d1, d2) = (diff(&e5, &e4), diff(&e6, &e5));
    let scale = e6.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if d2 > 10.0 * d1 + 1e-13 * scale {
        return Err(Error::NonConvergent(format!("extrapolants diverge: {d1:e} then {d2:e}")));
    }
    Ok(Extrapolation { row: e6, error: 2.0 * d2 })
}

/// Strip `F(t, s) = sigma^{-1} (c(t), i s(t)) . (w, n.grad w)(s)` built from the FD Euclidean
/// solution `w = K^{-1} gamma^* (1, 0)` on a periodic grid. Rows run over `s` in `(0, beta)`
/// (negative nodes wrapped by `beta`); the edge rows are left undefined (NaN) because `w`
/// has a kink there.
pub fn euclidean_strip(fd: &FdBoundary, evo: &ModeEvolution, t_idx: &[usize]) -> Result<StripFunction> {
    let sys = fd.sys;
    let beta = match sys.grid.bc {
        crate::elliptic::BoundaryCondition::Periodic { beta } => beta,
        _ => return Err(Error::BoundaryMismatch("the Euclidean strip needs a periodic grid".into())),
    };
    let w = sys.solve(&fd.trace_adjoint(&[C64::from(1.0), ZERO]))?;
    let n = sys.grid.len();
    let h = sys.grid.h;
    let c = sys.grid.center;
    let n_dir = fd.setup.normal;
    let k = evo.k;
    // row r <-> s = r h for r = 0..n, node index (c + r) mod n
    let at = |r: isize| w[((c as isize + r).rem_euclid(n as isize)) as usize];
    let nan = C64::new(f64::NAN, f64::NAN);
    let mut values = DMatrix::from_element(n + 1, t_idx.len(), nan);
    for r in 1..n as isize {
        let val = at(r);
        let ds = (at(r + 1) - at(r - 1)) / (2.0 * h);
        let dn = n_dir.ns * ds + n_dir.ny * I * k * val;
        for (q, &j) in t_idx.iter().enumerate() {
            let row = evo.row(j);
            values[(r as usize, q)] = (row[0] * val + row[1] * dn) / evo.sigma;
        }
    }
    let s = (0..=n).map(|r| r as f64 * h).collect();
    debug_assert!((n as f64 * h - beta).abs() < 1e-12);
    Ok(StripFunction { t: t_idx.iter().map(|&j| evo.grid.node(j)).collect(), s, values })
}
