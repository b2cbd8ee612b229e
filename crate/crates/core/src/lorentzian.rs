//! Klein-Gordon evolution for one Fourier mode on `(-T, T) x S^1`.
//!
//! The state is `(phi, pi)` with `pi = (r / N^2)(phi' - i k w phi)` and
//! `r = N sqrt(h)`, so that `d_nu phi = pi / sqrt(h)` for the future unit
//! normal `nu = N^{-1}(d_t - w d_y)`. Cauchy data `f = (f0, f1)` prescribe
//! `phi(0) = f0`, `d_nu phi(0) = i f1`.

use nalgebra::Matrix2;

use crate::elliptic::modal::State;
use crate::error::{Error, Result};
use crate::geometry::CoefficientFamily;
use crate::linalg::{expm2, C64, I, ONE, ZERO};

/// RK4 is stable on the imaginary axis up to `2 sqrt 2`; keep a margin.
pub const CFL_LIMIT: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    ClosedForm,
    Rk4,
}

/// Uniform nodes `t_j = -T + j dt`, `j = 0..=2 steps`, `dt = T / steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_max: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, steps: usize) -> Self {
        Self { t_max, steps }
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.steps as f64
    }

    pub fn len(&self) -> usize {
        2 * self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, j: usize) -> f64 {
        (j as f64 - self.steps as f64) * self.dt()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.node(j)).collect()
    }

    pub fn check(&self, t: f64) -> Result<()> {
        if t.abs() > self.t_max * (1.0 + 1e-12) {
            return Err(Error::WindowExceeded { t, window: self.t_max });
        }
        Ok(())
    }

    /// Trapezoid weights in `t`.
    pub fn weights(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.len()).map(|j| if j == 0 || j + 1 == self.len() { 0.5 * dt } else { dt }).collect()
    }
}

/// Generator of `(phi, pi)' = A (phi, pi)` at real time `t`.
pub fn lorentz_generator(fam: &CoefficientFamily, k: f64, t: f64) -> Result<Matrix2<C64>> {
    let c = fam.at(C64::from(t));
    let (n, h, w, mu) = (c.lapse.re, c.h.re, c.shift.re, c.mass.re);
    if n <= 0.0 || h <= 0.0 {
        return Err(Error::NonLorentzian { t, y: 0.0, detail: format!("N = {n}, h = {h}") });
    }
    let r = n * h.sqrt();
    let ikw = I * (k * w);
    Ok(Matrix2::new(ikw, C64::from(n * n / r), C64::from(-r * (k * k / h + mu)), ikw))
}

/// Volume density `N sqrt(h)` at time `t`.
pub fn density(fam: &CoefficientFamily, t: f64) -> f64 {
    let c = fam.at(C64::from(t));
    c.lapse.re * c.h.re.sqrt()
}

/// Largest `|eigenvalue|` of the generator over the nodes.
fn max_frequency(fam: &CoefficientFamily, k: f64, nodes: &[f64]) -> Result<f64> {
    let mut worst = 0.0_f64;
    for &t in nodes {
        let c = fam.at(C64::from(t));
        let (n, h, w, mu) = (c.lapse.re, c.h.re, c.shift.re, c.mass.re);
        let om = (n * n * (k * k / h + mu)).abs().sqrt();
        worst = worst.max(om + (k * w).abs());
        lorentz_generator(fam, k, t)?;
    }
    Ok(worst)
}

/// Evolves a state from `t0` to `t1` in `steps` equal RK4 steps.
pub fn rk4(fam: &CoefficientFamily, k: f64, x: State, t0: f64, t1: f64, steps: usize) -> Result<State> {
    let dt = (t1 - t0) / steps as f64;
    let mut x = x;
    let mut t = t0;
    for _ in 0..steps {
        let a0 = lorentz_generator(fam, k, t)?;
        let am = lorentz_generator(fam, k, t + 0.5 * dt)?;
        let a1 = lorentz_generator(fam, k, t + dt)?;
        let h = C64::from(dt);
        let k1 = a0 * x;
        let k2 = am * (x + k1 * (h * 0.5));
        let k3 = am * (x + k2 * (h * 0.5));
        let k4 = a1 * (x + k3 * h);
        x += (k1 + k2 + k2 + k3 + k3 + k4) * (h / 6.0);
        t += dt;
    }
    Ok(x)
}

/// Fundamental pair `c(0) = (1, 0)`, `s(0) = (0, sigma)` (so `d_nu s(0) = 1`) on a time grid.
#[derive(Debug, Clone)]
pub struct ModeEvolution {
    pub family: CoefficientFamily,
    pub k: f64,
    pub sigma: f64,
    pub grid: TimeGrid,
    pub integrator: Integrator,
    /// Constant generator when the coefficients are time independent.
    constant: Option<Matrix2<C64>>,
    pub c: Vec<State>,
    pub s: Vec<State>,
}

impl ModeEvolution {
    pub fn new(fam: &CoefficientFamily, k: f64, grid: TimeGrid, integrator: Integrator) -> Result<Self> {
        let sigma = fam.h.eval(ZERO).re.sqrt();
        let nodes = grid.nodes();
        let constant = if fam.is_stationary() { Some(lorentz_generator(fam, k, 0.0)?) } else { None };
        if integrator == Integrator::ClosedForm && constant.is_none() {
            return Err(Error::NotStationary("closed-form evolution needs time-independent coefficients".into()));
        }
        if integrator == Integrator::Rk4 {
            let om = max_frequency(fam, k, &nodes)?;
            if om * grid.dt() > CFL_LIMIT {
                return Err(Error::CflViolation(format!("omega dt = {} > {CFL_LIMIT}", om * grid.dt())));
            }
        }
        let c0 = State::new(ONE, ZERO);
        let s0 = State::new(ZERO, C64::from(sigma));
        let mut evo = Self { family: fam.clone(), k, sigma, grid, integrator, constant, c: vec![c0; grid.len()], s: vec![s0; grid.len()] };
        match integrator {
            Integrator::ClosedForm => {
                let a = evo.constant.expect("checked above");
                for (j, &t) in nodes.iter().enumerate() {
                    let m = expm2(&a, C64::from(t));
                    evo.c[j] = m * c0;
                    evo.s[j] = m * s0;
                }
            }
            Integrator::Rk4 => {
                let mid = grid.steps;
                for dir in [1isize, -1] {
                    let (mut c, mut s) = (c0, s0);
                    for n in 1..=grid.steps {
                        let j = (mid as isize + dir * n as isize) as usize;
                        let (t0, t1) = (nodes[(j as isize - dir) as usize], nodes[j]);
                        c = rk4(fam, k, c, t0, t1, 1)?;
                        s = rk4(fam, k, s, t0, t1, 1)?;
                        evo.c[j] = c;
                        evo.s[j] = s;
                    }
                }
            }
        }
        Ok(evo)
    }

    /// Moves a state from `t0` to `t1` with the evolution's own integrator and step.
    pub fn propagate(&self, x: State, t0: f64, t1: f64) -> Result<State> {
        self.grid.check(t0)?;
        self.grid.check(t1)?;
        match self.constant.filter(|_| self.integrator == Integrator::ClosedForm) {
            Some(a) => Ok(expm2(&a, C64::from(t1 - t0)) * x),
            None => {
                let steps = ((t1 - t0).abs() / self.grid.dt()).round().max(1.0) as usize;
                rk4(&self.family, self.k, x, t0, t1, steps)
            }
        }
    }

    /// `(c(t_j), i s(t_j))` applied to data: `(U f)(t_j) = row_j . f`.
    pub fn row(&self, j: usize) -> [C64; 2] {
        [self.c[j][0], I * self.s[j][0]]
    }

    /// Fundamental pair at an arbitrary `t` in the window.
    pub fn fundamental_at(&self, t: f64) -> Result<(State, State)> {
        self.grid.check(t)?;
        let j = (((t + self.grid.t_max) / self.grid.dt()).round() as usize).min(self.grid.len() - 1);
        let tj = self.grid.node(j);
        if (t - tj).abs() < 1e-14 * (1.0 + t.abs()) {
            return Ok((self.c[j], self.s[j]));
        }
        Ok((self.propagate(self.c[j], tj, t)?, self.propagate(self.s[j], tj, t)?))
    }

    /// Value of `U f` at time `t`.
    pub fn evolve_cauchy(&self, f: [C64; 2], t: f64) -> Result<C64> {
        let (c, s) = self.fundamental_at(t)?;
        Ok(f[0] * c[0] + I * f[1] * s[0])
    }

    /// Quadrature weights `|g|^{1/2} dt` on the nodes.
    pub fn m_weights(&self) -> Vec<f64> {
        self.grid.weights().iter().zip(self.grid.nodes()).map(|(w, t)| w * density(&self.family, t)).collect()
    }

    /// Samples a test function after checking its support lies in the window.
    pub fn sample(&self, phi: impl Fn(f64) -> C64, support: (f64, f64)) -> Result<Vec<C64>> {
        self.grid.check(support.0)?;
        self.grid.check(support.1)?;
        Ok(self.grid.nodes().into_iter().map(phi).collect())
    }

    /// `<u, phi>_M` with the discrete quadrature.
    pub fn m_inner(&self, u: &[C64], phi: &[C64]) -> C64 {
        u.iter().zip(phi).zip(self.m_weights()).map(|((a, b), w)| a.conj() * b * w).sum()
    }

    /// `<f, g>_Sigma = sigma conj(f) . g` per mode.
    pub fn sigma_inner(&self, f: [C64; 2], g: [C64; 2]) -> C64 {
        (f[0].conj() * g[0] + f[1].conj() * g[1]) * self.sigma
    }

    /// Exact discrete adjoint of `f -> (U f)(t_j)`.
    pub fn adjoint_apply(&self, phi: &[C64]) -> Result<[C64; 2]> {
        if phi.len() != self.grid.len() {
            return Err(Error::RegionMismatch(format!("{} samples on a grid of {}", phi.len(), self.grid.len())));
        }
        let mut out = [ZERO, ZERO];
        for (j, (p, w)) in phi.iter().zip(self.m_weights()).enumerate() {
            let r = self.row(j);
            out[0] += r[0].conj() * p * w;
            out[1] += r[1].conj() * p * w;
        }
        Ok([out[0] / self.sigma, out[1] / self.sigma])
    }

    /// `max_j |conj(c) pi_s - conj(pi_c) s - sigma| / sigma`, the conserved sesquilinear Wronskian.
    pub fn wronskian_defect(&self) -> f64 {
        self.c
            .iter()
            .zip(&self.s)
            .map(|(c, s)| ((c[0].conj() * s[1] - c[1].conj() * s[0]) / self.sigma - 1.0).norm())
            .fold(0.0, f64::max)
    }

    /// Kernel of `U q U^*` between nodes `j1`, `j2` (w.r.t. the measure `|g|^{1/2} dt`).
    pub fn uqu_kernel(&self, j1: usize, j2: usize) -> C64 {
        let (a, b) = (self.row(j1), self.row(j2));
        (a[0] * b[1].conj() + a[1] * b[0].conj()) / self.sigma
    }

    /// Causal propagator from an independent evolution of `(0, 1)` started at `t2`.
    pub fn causal_propagator(&self, t1: f64, t2: f64) -> Result<C64> {
        Ok(self.propagate(State::new(ZERO, ONE), t2, t1)?[0])
    }

    /// `max |U q U^* - i G|` over node pairs taken every `stride` nodes.
    pub fn verify_ccr(&self, stride: usize) -> Result<f64> {
        let nodes = self.grid.nodes();
        let mut worst = 0.0_f64;
        for j2 in (0..nodes.len()).step_by(stride.max(1)) {
            let start = State::new(ZERO, ONE);
            // one sweep from t2 in each direction reuses the same step as the main grid
            let mut fwd = start;
            let mut back = start;
            worst = worst.max(self.uqu_kernel(j2, j2).norm());
            for j1 in j2 + 1..nodes.len() {
                fwd = self.propagate(fwd, nodes[j1 - 1], nodes[j1])?;
                if (j1 - j2) % stride.max(1) == 0 {
                    worst = worst.max((self.uqu_kernel(j1, j2) - I * fwd[0]).norm());
                }
            }
            for j1 in (0..j2).rev() {
                back = self.propagate(back, nodes[j1 + 1], nodes[j1])?;
                if (j2 - j1) % stride.max(1) == 0 {
                    worst = worst.max((self.uqu_kernel(j1, j2) - I * back[0]).norm());
                }
            }
        }
        Ok(worst)
    }

    /// `max |K(t1, t2) - conj(K(t2, t1))|` for `K = U q U^*`, every `stride` nodes.
    pub fn ccr_hermiticity(&self, stride: usize) -> f64 {
        let n = self.grid.len();
        let mut worst = 0.0_f64;
        for j1 in (0..n).step_by(stride.max(1)) {
            for j2 in (0..n).step_by(stride.max(1)) {
                worst = worst.max((self.uqu_kernel(j1, j2) - self.uqu_kernel(j2, j1).conj()).norm());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests;
