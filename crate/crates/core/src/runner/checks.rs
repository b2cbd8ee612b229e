//! The individual checks. Each returns records with tolerances already scaled.

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Context;
use crate::calderon::cutoff::Cutoff;
use crate::calderon::fd::{smooth_cutoff, FdBoundary};
use crate::calderon::{positivity_min, ModalCalderon};
use crate::config::CheckId;
use crate::elliptic::modal::ModalInverse;
use crate::elliptic::{assemble_k, SGrid, Side, YDiscretization};
use crate::error::{Error, Result};
use crate::geometry::check_hypotheses;
use crate::lorentzian::{ModeEvolution, TimeGrid};
use crate::linalg::{max_abs, C64, ONE, ZERO};
use crate::report::{ModeKey, Record};
use crate::twopoint::{assemble_two_point, random_positivity, verify_kms, verify_state_properties, ModeCalderon, TwoPointKernel};
use crate::wick::{two_time_continuation_check, ContinuationCone};

/// Kernels of one mode together with the data they were built from.
pub(super) struct ModeState {
    pub inv: ModalInverse,
    pub evo: ModeEvolution,
    pub plus: TwoPointKernel,
    pub minus: TwoPointKernel,
}

fn rng_for(m: i32, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(salt.wrapping_mul(1_000_003).wrapping_add((m as i64 + 1_000) as u64))
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn c(x: f64) -> C64 {
    C64::from(x)
}

const F: [C64; 2] = [C64::new(0.3, -0.2), C64::new(1.0, 0.5)];
const G: [C64; 2] = [C64::new(-0.7, 0.1), C64::new(0.2, 0.9)];

impl Context<'_> {
    fn mode_rows(&self, mut f: impl FnMut(i32, f64) -> Result<Record>) -> Result<Vec<Record>> {
        self.cfg.modes().into_iter().map(|m| f(m, self.cfg.wavenumber(m))).collect()
    }

    pub(super) fn mode_state(&self, k: f64, n_t: usize) -> Result<ModeState> {
        let inv = self.modal(k)?;
        let cal = ModeCalderon::from_modal(&ModalCalderon::new(&inv)?)?;
        let evo = self.evolution(k, n_t)?;
        let plus = assemble_two_point(&cal, &evo, Side::Plus)?;
        let minus = assemble_two_point(&cal, &evo, Side::Minus)?;
        Ok(ModeState { inv, evo, plus, minus })
    }

    /// Determinant, spectrum and coercivity conditions on the `s` grid times 16 `y` points,
    /// plus Lorentzian signature on the time window. The residual counts failures.
    pub(super) fn hypotheses(&self) -> Result<Vec<Record>> {
        let grid = SGrid::new(self.cfg.bc, self.cfg.n_s)?;
        let ys: Vec<f64> = (0..16).map(|j| self.cfg.circumference * j as f64 / 16.0).collect();
        let rep = check_hypotheses(&self.cfg.family, &grid.nodes, &ys, 16);
        let times = TimeGrid::new(self.cfg.t_max, self.cfg.time_steps());
        let mut failures = rep.failures.len();
        for t in times.nodes() {
            for &y in &ys {
                match self.cfg.family.eval_lorentzian(t, y) {
                    Ok(_) => {}
                    Err(Error::NonLorentzian { .. }) => failures += 1,
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(vec![Record::new(
            CheckId::Hypotheses,
            ModeKey::All,
            (rep.min_det, rep.coercivity),
            c(rep.spectrum_margin),
            failures as f64,
            0.0,
        )])
    }

    pub(super) fn adjoint(&self, n_s: usize) -> Result<Vec<Record>> {
        self.mode_rows(|m, k| {
            let r = self.fd(k, n_s)?.adjoint_residual()?;
            Ok(Record::new(CheckId::Adjoint, ModeKey::Mode(m), (k, n_s as f64), ZERO, r, self.tol(1e-12)))
        })
    }

    /// Relative residual of a solve with a seeded random right-hand side.
    pub(super) fn solve_residual(&self, n_s: usize) -> Result<Vec<Record>> {
        self.mode_rows(|m, k| {
            let sys = self.fd(k, n_s)?;
            let rhs = random_vector(&mut rng_for(m, 1), sys.dim());
            let u = sys.solve(&rhs)?;
            let r = sys.solve_residual(&u, &rhs);
            Ok(Record::new(CheckId::SolveResidual, ModeKey::Mode(m), (k, n_s as f64), u[sys.grid.center], r, self.tol(1e-10)))
        })
    }

    /// `eta^+-(u, u)` for `u = K^{-1} r`, r random; the residual is the relative negative part.
    pub(super) fn eta_positivity(&self, n_s: usize) -> Result<Vec<Record>> {
        self.mode_rows(|m, k| {
            let sys = self.fd(k, n_s)?;
            let rhs = random_vector(&mut rng_for(m, 2), sys.dim());
            let u = sys.solve(&rhs)?;
            let ep = sys.eta_form(&u, &u, Side::Plus)?;
            let em = sys.eta_form(&u, &u, Side::Minus)?;
            let neg = |e: C64| (-e.re).max(0.0) / e.norm().max(f64::MIN_POSITIVE);
            let r = neg(ep).max(neg(em));
            Ok(Record::new(CheckId::EtaPositivity, ModeKey::Mode(m), (k, n_s as f64), C64::new(ep.re, em.re), r, self.tol(1e-12)))
        })
    }

    /// Sum, positivity and reflection identities from the modal reference.
    pub(super) fn modal_identities(&self, id: CheckId) -> Result<Vec<Record>> {
        self.mode_rows(|m, k| {
            let inv = self.modal(k)?;
            let mc = ModalCalderon::new(&inv)?;
            let rep = mc.report()?;
            let cp = mc.calderon(Side::Plus)?;
            let (value, residual) = match id {
                CheckId::CalderonSum => (cp[(0, 0)], rep.sum_residual),
                CheckId::ReflectionPositivity => {
                    (C64::new(rep.positivity_plus, rep.positivity_minus), (-rep.positivity_plus.min(rep.positivity_minus)).max(0.0))
                }
                _ => (cp[(0, 1)], rep.reflection_residual),
            };
            Ok(Record::new(id, ModeKey::Mode(m), (k, 0.0), value, residual, self.tol(1e-10)))
        })
    }

    /// `C^+ + C^- = 1` per mode on the finite-difference grid, for refinement studies.
    pub(super) fn calderon_sum_fd(&self, n_s: usize) -> Result<Vec<Record>> {
        self.mode_rows(|m, k| {
            let sys = self.fd(k, n_s)?;
            let (cp, cm) = FdBoundary::new(&sys)?.calderon_pair()?;
            let sum = crate::calderon::max_abs(&(&cp + &cm - nalgebra::DMatrix::identity(2, 2)));
            Ok(Record::new(CheckId::CalderonSum, ModeKey::Mode(m), (k, n_s as f64), cp[(0, 0)], sum, f64::INFINITY))
        })
    }

    /// `C^+ + C^- = 1` on the two-dimensional grid with `n_s` nodes; value is the
    /// smaller positivity eigenvalue.
    pub(super) fn calderon_grid_level(&self, n_s: usize) -> Result<Vec<Record>> {
        let y = YDiscretization::Grid { n_y: self.cfg.n_y, circumference: self.cfg.circumference };
        let sys = assemble_k(&self.cfg.family, SGrid::new(self.cfg.bc, n_s)?, y)?;
        let fd = FdBoundary::new(&sys)?;
        let (cp, cm) = fd.calderon_pair()?;
        let n = cp.nrows();
        let sum = crate::calderon::max_abs(&(&cp + &cm - nalgebra::DMatrix::identity(n, n)));
        let pos = positivity_min(&cp, &fd.setup, 1.0).min(positivity_min(&cm, &fd.setup, -1.0));
        Ok(vec![Record::new(CheckId::CalderonSumGrid, ModeKey::All, (n_s as f64, self.cfg.n_y as f64), c(pos), sum, f64::INFINITY)])
    }

    /// Flat metric: modal `C^+` against its closed form; for a slab also its distance
    /// from the vacuum projector, and for the circle the form `q C^+`.
    pub(super) fn calderon_closed_form(&self) -> Result<Vec<Record>> {
        let mu = self.flat_mass().ok_or_else(|| Error::config("checks", "calderon_closed_form needs a flat metric"))?;
        self.mode_rows(|m, k| {
            let omega = (k * k + mu).sqrt();
            let cp = ModalCalderon::new(&self.modal(k)?)?.calderon(Side::Plus)?;
            let residual = match self.cfg.beta() {
                Some(beta) => {
                    let ct = 1.0 / (omega * beta / 2.0).tanh();
                    let exact = Matrix2::new(c(0.5), c(0.5 * ct / omega), c(0.5 * omega * ct), c(0.5));
                    let qc = Matrix2::new(ZERO, ONE, ONE, ZERO) * cp;
                    let q_exact = Matrix2::new(c(0.5 * omega * ct), c(0.5), c(0.5), c(0.5 * ct / omega));
                    max_abs(&(cp - exact)).max(max_abs(&(qc - q_exact)))
                }
                None => {
                    let l = self.cfg.half_width();
                    let t = (omega * l).tanh();
                    let exact = Matrix2::new(c(0.5), c(0.5 * t / omega), c(0.5 * omega / t), c(0.5));
                    let vacuum = Matrix2::new(c(0.5), c(0.5 / omega), c(0.5 * omega), c(0.5));
                    let bound = 3.0 * (-2.0 * omega * l).exp() * omega.max(1.0);
                    max_abs(&(cp - exact)).max((max_abs(&(cp - vacuum)) - bound).max(0.0))
                }
            };
            Ok(Record::new(CheckId::CalderonClosedForm, ModeKey::Mode(m), (k, omega), cp[(0, 1)], residual, self.tol(1e-9)))
        })
    }

    /// `||C^2 - C||`: zero on a slab; on a flat circle it must stay visibly nonzero
    /// while `omega beta <= 4`. Other modes are reported without a bound.
    pub(super) fn projection(&self) -> Result<Vec<Record>> {
        let mu = self.flat_mass();
        self.mode_rows(|m, k| {
            let cp = ModalCalderon::new(&self.modal(k)?)?.calderon(Side::Plus)?;
            let defect = max_abs(&(cp * cp - cp));
            let (residual, tol) = match (self.cfg.beta(), mu) {
                (None, _) => (defect / max_abs(&cp), self.tol(1e-9)),
                (Some(beta), Some(mu)) if (k * k + mu).sqrt() * beta <= 4.0 => ((0.01 - defect).max(0.0), 0.0),
                _ => (0.0, 0.0),
            };
            Ok(Record::new(CheckId::Projection, ModeKey::Mode(m), (k, 0.0), c(defect), residual, tol))
        })
    }

    /// Both Green identities on each side for smooth fields vanishing near the outer edge.
    pub(super) fn green_identity(&self, n_s: usize) -> Result<Vec<Record>> {
        let outer = self.cfg.half_width();
        let chi = smooth_cutoff(0.3 * outer, 0.9 * outer);
        self.mode_rows(|m, k| {
            let sys = self.fd(k, n_s)?;
            let fd = FdBoundary::new(&sys)?;
            let u: Vec<C64> = sys.grid.nodes.iter().map(|&s| c((-1.5 * s).exp() * chi(s))).collect();
            let v: Vec<C64> = sys.grid.nodes.iter().map(|&s| C64::new(s, 0.3) * (-1.5 * s).exp() * chi(s)).collect();
            let (a, b) = fd.green_identity_check(&u, &v, Side::Plus)?;
            let (a2, b2) = fd.green_identity_check(&u, &v, Side::Minus)?;
            Ok(Record::new(CheckId::GreenIdentity, ModeKey::Mode(m), (k, n_s as f64), C64::new(a.max(a2), b.max(b2)), a.max(a2).max(b).max(b2), f64::INFINITY))
        })
    }

    fn cutoff(&self) -> Cutoff {
        let r = self.cfg.half_width();
        Cutoff::new(0.3 * r, 0.8 * r)
    }

    /// Modal cutoff identities to quadrature accuracy (`param2 = 0`), then the FD
    /// versions on three levels with their order.
    pub(super) fn cutoff_identity(&self) -> Result<Vec<Record>> {
        let chi = self.cutoff();
        let mut rows = self.mode_rows(|m, k| {
            let inv = self.modal(k)?;
            let (a, b) = ModalCalderon::new(&inv)?.cutoff_identity_check(&chi, F, G, 100)?;
            Ok(Record::new(CheckId::CutoffIdentity, ModeKey::Mode(m), (k, 0.0), C64::new(a, b), a.max(b), self.tol(1e-10)))
        })?;
        rows.extend(self.leveled(CheckId::CutoffIdentity, &self.s_levels(), |n| self.cutoff_fd(n))?);
        Ok(rows)
    }

    pub(super) fn cutoff_fd(&self, n_s: usize) -> Result<Vec<Record>> {
        let chi = self.cutoff();
        let f = |s: f64| chi.value(s);
        self.mode_rows(|m, k| {
            let sys = self.fd(k, n_s)?;
            let (a, b) = FdBoundary::new(&sys)?.cutoff_identity_check(&f, &F, &G)?;
            Ok(Record::new(CheckId::CutoffIdentity, ModeKey::Mode(m), (k, n_s as f64), C64::new(a, b), a.max(b), f64::INFINITY))
        })
    }

    /// Wronskian identity of the evolution and hermiticity of `G`.
    pub(super) fn ccr(&self, n_t: usize) -> Result<Vec<Record>> {
        let tol = if self.rk4() { 1e-7 } else { 1e-12 };
        self.mode_rows(|m, k| {
            let evo = self.evolution(k, n_t)?;
            let stride = (evo.grid.steps / 10).max(1);
            let r = evo.verify_ccr(stride)?.max(evo.ccr_hermiticity(stride / 4));
            let g = evo.causal_propagator(0.5 * self.cfg.t_max, 0.0)?;
            Ok(Record::new(CheckId::Ccr, ModeKey::Mode(m), (k, n_t as f64), g, r, self.tol(tol)))
        })
    }

    /// Positivity, bisolution and the commutator of the kernel pair. Positivity also
    /// gets a scenario-wide row over random test functions spanning all modes.
    pub(super) fn state_properties(&self, id: CheckId, n_t: usize) -> Result<Vec<Record>> {
        let rk4 = self.rk4();
        let mut states = Vec::new();
        let mut rows = self.mode_rows(|m, k| {
            let st = self.mode_state(k, n_t)?;
            let rep = verify_state_properties(&st.plus, &st.minus, &st.evo, (st.evo.grid.steps / 10).max(1))?;
            let c0 = st.evo.grid.steps;
            let value = st.plus.value(c0, c0);
            let (residual, tol) = match id {
                CheckId::StatePositivity => ((-rep.positivity_min).max(0.0), 1e-9),
                CheckId::Bisolution => (rep.bisolution_res, if rk4 { 1e-5 } else { 1e-8 }),
                _ => {
                    // translation invariance is only expected of the thermal state
                    let shift = if self.cfg.beta().is_some() { rep.translation.unwrap_or(0.0) } else { 0.0 };
                    (rep.ccr_res.max(shift), if rk4 { 1e-7 } else { 1e-10 })
                }
            };
            if id == CheckId::StatePositivity {
                states.push(st);
            }
            Ok(Record::new(id, ModeKey::Mode(m), (k, n_t as f64), value, residual, self.tol(tol)))
        })?;
        if id == CheckId::StatePositivity {
            let mut rng = rng_for(0, 3);
            let plus: Vec<_> = states.iter().map(|s| (&s.plus, &s.evo)).collect();
            let minus: Vec<_> = states.iter().map(|s| (&s.minus, &s.evo)).collect();
            let p = random_positivity(&plus, 200, &mut rng);
            let q = random_positivity(&minus, 200, &mut rng);
            rows.push(Record::new(id, ModeKey::All, (0.0, n_t as f64), C64::new(p, q), (-p.min(q)).max(0.0), self.tol(1e-9)));
        }
        Ok(rows)
    }

    /// Flat thermal state: `Lambda^+(t, t) = coth(beta omega / 2) / (2 omega)` on the whole window.
    pub(super) fn thermal_amplitude(&self) -> Result<Vec<Record>> {
        let (Some(mu), Some(beta)) = (self.flat_mass(), self.cfg.beta()) else {
            return Err(Error::config("checks", "thermal_amplitude needs a flat periodic scenario"));
        };
        self.mode_rows(|m, k| {
            let omega = (k * k + mu).sqrt();
            let amp = 1.0 / ((beta * omega / 2.0).tanh() * 2.0 * omega);
            let st = self.mode_state(k, self.cfg.n_t)?;
            let r = (0..st.plus.len()).map(|j| (st.plus.value(j, j) - amp).norm()).fold(0.0, f64::max);
            Ok(Record::new(CheckId::ThermalAmplitude, ModeKey::Mode(m), (k, omega), c(amp), r, self.tol(1e-9)))
        })
    }

    /// Euclidean agreement and cone limit of the continued kernels, one row per mode
    /// and side; `param2` is the side's sign.
    pub(super) fn wick(&self, id: CheckId) -> Result<Vec<Record>> {
        let mut rows = Vec::new();
        for m in self.cfg.modes() {
            let k = self.cfg.wavenumber(m);
            let st = self.mode_state(k, self.cfg.n_t)?;
            let steps = st.evo.grid.steps;
            let pair = (steps + steps / 5, steps - steps / 8);
            for (side, kernel) in [(Side::Plus, &st.plus), (Side::Minus, &st.minus)] {
                let cone = ContinuationCone::new(side, 0.7, 0.2, 10)?;
                let rep = two_time_continuation_check(kernel, &st.evo, &st.inv, self.cfg.half_width(), &cone, pair)?;
                let params = (k, side.sign());
                rows.push(if id == CheckId::WickEuclidean {
                    Record::new(id, ModeKey::Mode(m), params, c(rep.fit_residual), rep.euclidean, self.tol(1e-8))
                } else {
                    let dev = &rep.cone_deviation;
                    let decreasing = dev.windows(2).all(|w| w[1] < w[0]);
                    let residual = if decreasing { (rep.rate - 1.0).abs() } else { f64::INFINITY };
                    Record::new(id, ModeKey::Mode(m), params, C64::new(rep.rate, dev[dev.len() - 1]), residual, self.tol(0.1))
                });
            }
        }
        Ok(rows)
    }

    pub(super) fn kms_closed_form(&self) -> Result<Vec<Record>> {
        let beta = self.cfg.beta().ok_or_else(|| Error::config("checks", "kms needs a periodic scenario"))?;
        self.mode_rows(|m, k| {
            let st = self.mode_state(k, self.cfg.n_t)?;
            let rep = verify_kms(&st.plus, &st.minus, &st.evo, beta, None, 1)?;
            Ok(Record::new(CheckId::KmsClosedForm, ModeKey::Mode(m), (k, beta), ZERO, rep.closed_form, self.tol(1e-12)))
        })
    }

    /// Strip edges against the Lorentzian kernels with `n_s` rows in the strip.
    /// The 1e-4 bound applies on a 201 x 201 strip to `|m| <= kms.strip_mode_max`.
    pub(super) fn kms_strip_level(&self, n_s: usize) -> Result<Vec<Record>> {
        let beta = self.cfg.beta().ok_or_else(|| Error::config("checks", "kms needs a periodic scenario"))?;
        let t_stride = ((self.cfg.n_t - 1) / (super::KMS_STRIP_LEVELS[0] - 1)).max(1);
        self.mode_rows(|m, k| {
            let st = self.mode_state(k, self.cfg.n_t)?;
            let sys = self.fd(k, n_s)?;
            let fd = FdBoundary::new(&sys)?;
            let rep = verify_kms(&st.plus, &st.minus, &st.evo, beta, Some(&fd), t_stride)?;
            let bounded = n_s == super::KMS_STRIP_LEVELS[0] && m.unsigned_abs() as usize <= self.cfg.strip_mode_max;
            let tol = if bounded { self.tol(1e-4) } else { f64::INFINITY };
            let residual = rep.strip.unwrap_or(f64::INFINITY);
            Ok(Record::new(CheckId::KmsStrip, ModeKey::Mode(m), (k, n_s as f64), c(rep.strip_estimate.unwrap_or(0.0)), residual, tol))
        })
    }
}
