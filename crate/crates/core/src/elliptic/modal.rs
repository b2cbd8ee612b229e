//! Per-mode reference inverse of `K`.
//!
//! For a Fourier mode `e^{iky}` the equation `K u = 0` is the first-order
//! system for the state `(phi, p)` with flux `p = rho (a phi' + c ik phi)`:
//!
//! ```text
//! phi' = (p / rho - ik c phi) / a
//! p'   = -ik c / a p + rho (k^2 (e - c^2/a) + lambda) phi
//! ```
//!
//! Time-independent coefficients are solved exactly (matrix exponential or
//! eigen-expansion); otherwise RK4 on a fine fixed grid is used. A source
//! supported at `s0` is encoded as the jump `state(s0+) - state(s0-)`.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use super::{BoundaryCondition, NodeCoeffs, Side};
use crate::error::{Error, Result};
use crate::geometry::CoefficientFamily;
use crate::linalg::{expm2, inv2, Eigen2, C64, I, ONE, ZERO};

pub type State = Vector2<C64>;

/// Default RK4 steps per unit of `s` for non-stationary reference solutions.
pub const RK4_STEPS_PER_UNIT: usize = 40_000;

/// Coefficients sampled at every RK4 stage point of a uniform grid on `[s_min, s_max]`.
#[derive(Debug)]
pub struct CoefficientTable {
    pub s_min: f64,
    pub step: f64,
    pub steps: usize,
    /// Samples at `s_min + j * step / 2`, `j = 0..=2 steps`.
    samples: Vec<NodeCoeffs>,
}

impl CoefficientTable {
    pub fn new(fam: &CoefficientFamily, s_min: f64, s_max: f64, steps_per_unit: usize) -> Result<Self> {
        let steps = ((s_max - s_min) * steps_per_unit as f64).ceil().max(2.0) as usize;
        let step = (s_max - s_min) / steps as f64;
        let samples = (0..=2 * steps).map(|j| NodeCoeffs::at(fam, s_min + j as f64 * step * 0.5)).collect::<Result<_>>()?;
        Ok(Self { s_min, step, steps, samples })
    }

    /// Index of the grid node at `s`, if `s` is (to roundoff) a node.
    fn node_index(&self, s: f64) -> Option<usize> {
        let x = (s - self.s_min) / self.step;
        let j = x.round();
        ((x - j).abs() < 1e-9 && j >= 0.0 && j as usize <= self.steps).then_some(j as usize)
    }
}

/// The mode-`k` first-order system.
#[derive(Debug, Clone)]
pub struct ModeOde {
    pub family: CoefficientFamily,
    pub k: f64,
    /// Generator when the coefficients are constant.
    constant: Option<Matrix2<C64>>,
}

/// Generator of `(phi, p)' = A (phi, p)` for given node coefficients.
pub fn generator(c: &NodeCoeffs, k: f64) -> Matrix2<C64> {
    let ikc_a = I * k * c.c / c.a;
    let pot = c.rho * (c.e * k * k - c.c * c.c / c.a * k * k + c.lambda);
    Matrix2::new(-ikc_a, ONE / (c.a * c.rho), pot, -ikc_a)
}

impl ModeOde {
    pub fn new(fam: &CoefficientFamily, k: f64) -> Result<Self> {
        let constant = if fam.is_stationary() { Some(generator(&NodeCoeffs::at(fam, 0.0)?, k)) } else { None };
        Ok(Self { family: fam.clone(), k, constant })
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }

    pub fn coeffs(&self, s: f64) -> Result<NodeCoeffs> {
        NodeCoeffs::at(&self.family, s)
    }

    pub fn generator_at(&self, s: f64) -> Result<Matrix2<C64>> {
        match self.constant {
            Some(a) => Ok(a),
            None => Ok(generator(&self.coeffs(s)?, self.k)),
        }
    }

    /// `phi'` recovered from the state at `s`.
    pub fn dphi(&self, s: f64, y: &State) -> Result<C64> {
        let c = self.coeffs(s)?;
        Ok((y[1] / c.rho - I * self.k * c.c * y[0]) / c.a)
    }

    /// One RK4 step with directly evaluated coefficients.
    fn rk4_step_direct(&self, y: State, s: f64, ds: f64) -> Result<State> {
        let a0 = self.generator_at(s)?;
        let a1 = self.generator_at(s + 0.5 * ds)?;
        let a2 = self.generator_at(s + ds)?;
        Ok(rk4_step(&a0, &a1, &a2, y, ds))
    }
}

fn rk4_step(a0: &Matrix2<C64>, a1: &Matrix2<C64>, a2: &Matrix2<C64>, y: State, ds: f64) -> State {
    let h = C64::from(ds);
    let k1 = a0 * y;
    let k2 = a1 * (y + k1 * (h * 0.5));
    let k3 = a1 * (y + k2 * (h * 0.5));
    let k4 = a2 * (y + k3 * h);
    y + (k1 + k2 + k2 + k3 + k3 + k4) * (h / 6.0)
}

/// A solution of the homogeneous system known on a whole interval.
#[derive(Debug, Clone)]
enum Branch {
    /// `exp((s - s_ref) A) y_ref`.
    Exact { s_ref: f64, y_ref: State, a: Matrix2<C64> },
    /// States at the nodes of a coefficient table.
    Table { table: Arc<CoefficientTable>, states: Vec<State> },
}

impl Branch {
    fn tabulate(ode: &ModeOde, table: Arc<CoefficientTable>, from_right: bool, y0: State) -> Self {
        let n = table.steps;
        let mut states = vec![State::zeros(); n + 1];
        let gen = |j: usize| generator(&table.samples[j], ode.k);
        if from_right {
            states[n] = y0;
            for i in (0..n).rev() {
                states[i] = rk4_step(&gen(2 * i + 2), &gen(2 * i + 1), &gen(2 * i), states[i + 1], -table.step);
            }
        } else {
            states[0] = y0;
            for i in 0..n {
                states[i + 1] = rk4_step(&gen(2 * i), &gen(2 * i + 1), &gen(2 * i + 2), states[i], table.step);
            }
        }
        Branch::Table { table, states }
    }

    fn state(&self, ode: &ModeOde, s: f64) -> Result<State> {
        match self {
            Branch::Exact { s_ref, y_ref, a } => Ok(expm2(a, C64::from(s - s_ref)) * y_ref),
            Branch::Table { table, states } => {
                if let Some(j) = table.node_index(s) {
                    return Ok(states[j]);
                }
                let x = ((s - table.s_min) / table.step).round().clamp(0.0, table.steps as f64);
                let j = x as usize;
                let s_j = table.s_min + j as f64 * table.step;
                ode.rk4_step_direct(states[j], s_j, s - s_j)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Slab { l: f64, right: Branch, left: Branch },
    Periodic { beta: f64, eig: Eigen2 },
}

/// Exact (or RK4-reference) inverse of one Fourier mode of `K`.
#[derive(Debug, Clone)]
pub struct ModalInverse {
    pub ode: ModeOde,
    pub bc: BoundaryCondition,
    kind: Kind,
}

impl ModalInverse {
    /// `table` is required for non-stationary slabs and must cover `[-L, L]`.
    pub fn new(fam: &CoefficientFamily, k: f64, bc: BoundaryCondition, table: Option<Arc<CoefficientTable>>) -> Result<Self> {
        let ode = ModeOde::new(fam, k)?;
        let kind = match bc {
            BoundaryCondition::DirichletSlab { l } => {
                let y0 = State::new(ZERO, ONE);
                let (right, left) = match ode.constant {
                    Some(a) => (Branch::Exact { s_ref: l, y_ref: y0, a }, Branch::Exact { s_ref: -l, y_ref: y0, a }),
                    None => {
                        let table = match table {
                            Some(t) => t,
                            None => Arc::new(CoefficientTable::new(fam, -l, l, RK4_STEPS_PER_UNIT)?),
                        };
                        (Branch::tabulate(&ode, table.clone(), true, y0), Branch::tabulate(&ode, table, false, y0))
                    }
                };
                Kind::Slab { l, right, left }
            }
            BoundaryCondition::Periodic { beta } => {
                let a = ode.constant.ok_or_else(|| Error::NotStationary("periodic inverse needs constant coefficients".into()))?;
                let eig = Eigen2::new(&a).ok_or_else(|| Error::SingularSystem {
                    pivot: 0.0,
                    near_null: vec![ONE],
                })?;
                Kind::Periodic { beta, eig }
            }
        };
        Ok(Self { ode, bc, kind })
    }

    /// The solution of `K u = source at s0` whose state jumps by `jump` across `s0`.
    pub fn jump_solution(&self, s0: f64, jump: State) -> Result<JumpSolution<'_>> {
        let coef = match &self.kind {
            Kind::Slab { l, right, left } => {
                if s0.abs() >= *l {
                    return Err(Error::RegionMismatch(format!("source at {s0} outside the slab |s| < {l}")));
                }
                let r = right.state(&self.ode, s0)?;
                let lf = left.state(&self.ode, s0)?;
                // alpha r - beta lf = jump
                let m = Matrix2::new(r[0], -lf[0], r[1], -lf[1]);
                let inv = inv2(&m).ok_or_else(|| Error::SingularSystem { pivot: 0.0, near_null: vec![lf[0], lf[1]] })?;
                inv * jump
            }
            Kind::Periodic { beta, eig } => {
                // state(x) = sum_j c_j v_j exp(lambda_j (x - x_j)), x = s - s0 in (0, beta)
                let mut m = Matrix2::zeros();
                for j in 0..2 {
                    let (lam, v) = (eig.values[j], eig.vectors[j]);
                    let xj = anchor(lam, *beta);
                    let factor = (lam * -xj).exp() - (lam * (beta - xj)).exp();
                    m.set_column(j, &(v * factor));
                }
                let inv = inv2(&m).ok_or_else(|| Error::SingularSystem { pivot: 0.0, near_null: vec![ONE] })?;
                inv * jump
            }
        };
        Ok(JumpSolution { inv: self, s0, coef })
    }

    /// Green kernel `G_k(s1, s2)` with respect to `dmu_k`.
    pub fn green(&self, s1: f64, s2: f64) -> Result<C64> {
        Ok(self.jump_solution(s2, State::new(ZERO, -ONE))?.state(s1, Side::Plus)?[0])
    }
}

/// Reference point for an exponential so that it stays bounded by one on `(0, beta)`.
fn anchor(lam: C64, beta: f64) -> f64 {
    if lam.re > 0.0 {
        beta
    } else {
        0.0
    }
}

/// Piecewise homogeneous solution with a prescribed jump at `s0`.
#[derive(Debug, Clone)]
pub struct JumpSolution<'a> {
    inv: &'a ModalInverse,
    pub s0: f64,
    coef: Vector2<C64>,
}

impl JumpSolution<'_> {
    /// State `(phi, p)` at `s`; at `s == s0` the side selects the one-sided limit.
    pub fn state(&self, s: f64, side: Side) -> Result<State> {
        let above = s > self.s0 || (s == self.s0 && side == Side::Plus);
        match &self.inv.kind {
            Kind::Slab { l, right, left } => {
                if s.abs() > *l {
                    return Err(Error::RegionMismatch(format!("s = {s} outside the slab")));
                }
                if above {
                    Ok(right.state(&self.inv.ode, s)? * self.coef[0])
                } else {
                    Ok(left.state(&self.inv.ode, s)? * self.coef[1])
                }
            }
            Kind::Periodic { beta, eig } => {
                let mut x = (s - self.s0).rem_euclid(*beta);
                if x == 0.0 && !above {
                    x = *beta;
                }
                let mut y = State::zeros();
                for j in 0..2 {
                    let lam = eig.values[j];
                    y += eig.vectors[j] * (self.coef[j] * (lam * (x - anchor(lam, *beta))).exp());
                }
                Ok(y)
            }
        }
    }

    /// `(phi, phi')` at `s` from the given side.
    pub fn value_and_derivative(&self, s: f64, side: Side) -> Result<(C64, C64)> {
        let y = self.state(s, side)?;
        Ok((y[0], self.inv.ode.dphi(s, &y)?))
    }
}
