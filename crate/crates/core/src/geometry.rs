//! Analytic coefficient families, the Lorentzian metric
//! `g = -N^2 dt^2 + h (dy + w dt)^2` on `R x S^1`, and its Wick-rotated
//! complex metric `k = N(is)^2 ds^2 + h(is) (dy + i w(is) ds)^2`.
//!
//! Coefficients depend on the time variable only, so Fourier modes in `y`
//! decouple exactly. Every family has real parameters, which makes the
//! reality condition `conj(f(z)) = f(conj z)` hold by construction.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A named analytic function of the complex time variable `z = t + i s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AnalyticFamily {
    /// `c`
    Constant(f64),
    /// `a0 + sum_n (a_n cos(n z) + b_n sin(n z))`, params `[a0, a1, b1, a2, b2, ...]`.
    TrigPoly { a0: f64, cos: Vec<f64>, sin: Vec<f64> },
    /// `sum_n c_n exp(n * rate * z)`, params `[rate, c0, c1, ...]`.
    ExpPoly { rate: f64, coeffs: Vec<f64> },
    /// `(c0 + c1 cosh(c2 z))^power`, params `[c0, c1, c2]` or `[c0, c1, c2, power]`.
    CoshScale { c0: f64, c1: f64, c2: f64, power: i32 },
}

impl AnalyticFamily {
    pub fn from_spec(family: &str, params: &[f64]) -> std::result::Result<Self, String> {
        if params.iter().any(|p| !p.is_finite()) {
            return Err("parameters must be finite real numbers".into());
        }
        match family {
            "constant" => match params {
                [c] => Ok(AnalyticFamily::Constant(*c)),
                _ => Err(format!("constant takes 1 parameter, got {}", params.len())),
            },
            "trig_poly" => {
                let Some((&a0, rest)) = params.split_first() else {
                    return Err("trig_poly needs at least a0".into());
                };
                if rest.len() % 2 != 0 {
                    return Err("trig_poly needs [a0, a1, b1, a2, b2, ...]".into());
                }
                let cos = rest.iter().step_by(2).copied().collect();
                let sin = rest.iter().skip(1).step_by(2).copied().collect();
                Ok(AnalyticFamily::TrigPoly { a0, cos, sin })
            }
            "exp_poly" => match params.split_first() {
                Some((&rate, coeffs)) if !coeffs.is_empty() => {
                    Ok(AnalyticFamily::ExpPoly { rate, coeffs: coeffs.to_vec() })
                }
                _ => Err("exp_poly needs [rate, c0, ...]".into()),
            },
            "cosh_scale" => match params {
                [c0, c1, c2] => Ok(AnalyticFamily::CoshScale { c0: *c0, c1: *c1, c2: *c2, power: 1 }),
                [c0, c1, c2, p] if p.fract() == 0.0 && p.abs() <= 8.0 => {
                    Ok(AnalyticFamily::CoshScale { c0: *c0, c1: *c1, c2: *c2, power: *p as i32 })
                }
                _ => Err("cosh_scale needs [c0, c1, c2] or [c0, c1, c2, integer power]".into()),
            },
            other => Err(format!("unknown family `{other}`")),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnalyticFamily::Constant(_) => "constant",
            AnalyticFamily::TrigPoly { .. } => "trig_poly",
            AnalyticFamily::ExpPoly { .. } => "exp_poly",
            AnalyticFamily::CoshScale { .. } => "cosh_scale",
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            AnalyticFamily::Constant(c) => Complex64::from(*c),
            AnalyticFamily::TrigPoly { a0, cos, sin } => {
                let mut acc = Complex64::from(*a0);
                for (n, (a, b)) in cos.iter().zip(sin).enumerate() {
                    let nz = z * (n as f64 + 1.0);
                    acc += nz.cos() * *a + nz.sin() * *b;
                }
                acc
            }
            AnalyticFamily::ExpPoly { rate, coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(n, c)| (z * (n as f64 * rate)).exp() * *c)
                .sum(),
            AnalyticFamily::CoshScale { c0, c1, c2, power } => {
                ((z * *c2).cosh() * *c1 + *c0).powi(*power)
            }
        }
    }

    /// Complex derivative `f'(z)`.
    pub fn deriv(&self, z: Complex64) -> Complex64 {
        match self {
            AnalyticFamily::Constant(_) => Complex64::new(0.0, 0.0),
            AnalyticFamily::TrigPoly { cos, sin, .. } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (n, (a, b)) in cos.iter().zip(sin).enumerate() {
                    let m = n as f64 + 1.0;
                    let nz = z * m;
                    acc += (-nz.sin() * *a + nz.cos() * *b) * m;
                }
                acc
            }
            AnalyticFamily::ExpPoly { rate, coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(n, c)| {
                    let r = n as f64 * rate;
                    (z * r).exp() * (*c * r)
                })
                .sum(),
            AnalyticFamily::CoshScale { c0, c1, c2, power } => {
                let base = (z * *c2).cosh() * *c1 + *c0;
                let dbase = (z * *c2).sinh() * (*c1 * *c2);
                if *power == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    base.powi(*power - 1) * dbase * (*power as f64)
                }
            }
        }
    }

    /// True when the function does not depend on `z`.
    pub fn is_constant(&self) -> bool {
        match self {
            AnalyticFamily::Constant(_) => true,
            AnalyticFamily::TrigPoly { cos, sin, .. } => cos.iter().chain(sin).all(|c| *c == 0.0),
            AnalyticFamily::ExpPoly { rate, coeffs } => {
                *rate == 0.0 || coeffs.iter().skip(1).all(|c| *c == 0.0)
            }
            AnalyticFamily::CoshScale { c1, c2, power, .. } => *c1 == 0.0 || *c2 == 0.0 || *power == 0,
        }
    }
}

/// The four coefficient functions `N, h, w, mu` of the metric and mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFamily {
    pub lapse: AnalyticFamily,
    pub h: AnalyticFamily,
    pub shift: AnalyticFamily,
    pub mass: AnalyticFamily,
}

/// Coefficient values at one complex time.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientValues {
    pub lapse: Complex64,
    pub h: Complex64,
    pub shift: Complex64,
    pub mass: Complex64,
}

impl CoefficientFamily {
    pub fn new(lapse: AnalyticFamily, h: AnalyticFamily, shift: AnalyticFamily, mass: AnalyticFamily) -> Self {
        Self { lapse, h, shift, mass }
    }

    /// Minkowski space with `N = h = 1`, no shift, mass term `mu`.
    pub fn flat(mu: f64) -> Self {
        Self::twisted(0.0, mu)
    }

    /// Flat cylinder with constant shift `w0` ("twisted" cylinder).
    pub fn twisted(w0: f64, mu: f64) -> Self {
        Self::new(
            AnalyticFamily::Constant(1.0),
            AnalyticFamily::Constant(1.0),
            AnalyticFamily::Constant(w0),
            AnalyticFamily::Constant(mu),
        )
    }

    /// Spatially closed FRW-type metric `-dt^2 + cosh^2(t) dy^2`.
    pub fn cosh_frw(mu: f64) -> Self {
        Self::new(
            AnalyticFamily::Constant(1.0),
            AnalyticFamily::CoshScale { c0: 0.0, c1: 1.0, c2: 1.0, power: 2 },
            AnalyticFamily::Constant(0.0),
            AnalyticFamily::Constant(mu),
        )
    }

    pub fn at(&self, z: Complex64) -> CoefficientValues {
        CoefficientValues {
            lapse: self.lapse.eval(z),
            h: self.h.eval(z),
            shift: self.shift.eval(z),
            mass: self.mass.eval(z),
        }
    }

    pub fn derivs_at(&self, z: Complex64) -> CoefficientValues {
        CoefficientValues {
            lapse: self.lapse.deriv(z),
            h: self.h.deriv(z),
            shift: self.shift.deriv(z),
            mass: self.mass.deriv(z),
        }
    }

    /// Coefficients independent of time.
    pub fn is_stationary(&self) -> bool {
        self.lapse.is_constant() && self.h.is_constant() && self.shift.is_constant() && self.mass.is_constant()
    }

    fn families(&self) -> [&AnalyticFamily; 4] {
        [&self.lapse, &self.h, &self.shift, &self.mass]
    }

    /// Largest relative violation of `conj(f(z)) = f(conj z)` over the sample points.
    pub fn reality_defect(&self, samples: &[Complex64]) -> f64 {
        let mut worst = 0.0_f64;
        for f in self.families() {
            for &z in samples {
                let fz = f.eval(z);
                let d = (fz.conj() - f.eval(z.conj())).norm() / (1.0 + fz.norm());
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Lorentzian metric in the `(dt, dy)` basis.
    pub fn eval_lorentzian(&self, t: f64, y: f64) -> Result<[[f64; 2]; 2]> {
        let c = self.at(Complex64::from(t));
        let (n, h, w) = (c.lapse.re, c.h.re, c.shift.re);
        if n <= 0.0 || h <= 0.0 {
            return Err(Error::NonLorentzian { t, y, detail: format!("N = {n}, h = {h}") });
        }
        Ok([[-n * n + h * w * w, h * w], [h * w, h]])
    }

    /// Complex metric at Euclidean time `s`, i.e. coefficients evaluated at `z = i s`.
    pub fn eval_complex_metric(&self, s: f64, y: f64) -> Result<ComplexMetricSample> {
        let sample = self.complex_metric_unchecked(s, y);
        let d = sample.det;
        if !(d.re > 0.0) || d.im.abs() > 1e-12 * d.norm() {
            return Err(Error::HypothesisViolation(format!("det k = {d} at s = {s}")));
        }
        Ok(sample)
    }

    pub(crate) fn complex_metric_unchecked(&self, s: f64, y: f64) -> ComplexMetricSample {
        let c = self.at(I * s);
        let iw = I * c.shift;
        let k = Matrix2::new(c.lapse * c.lapse + c.h * iw * iw, c.h * iw, c.h * iw, c.h);
        ComplexMetricSample::from_matrix(k, (s, y))
    }
}

/// The complex metric at one point together with its determinant and inverse.
#[derive(Debug, Clone, Copy)]
pub struct ComplexMetricSample {
    pub point: (f64, f64),
    pub k: Matrix2<Complex64>,
    pub det: Complex64,
    pub k_inv: Matrix2<Complex64>,
}

impl ComplexMetricSample {
    /// Builds a sample from an arbitrary symmetric matrix; no hypothesis is enforced.
    pub fn from_matrix(k: Matrix2<Complex64>, point: (f64, f64)) -> Self {
        let det = k[(0, 0)] * k[(1, 1)] - k[(0, 1)] * k[(1, 0)];
        let k_inv = Matrix2::new(k[(1, 1)], -k[(0, 1)], -k[(1, 0)], k[(0, 0)]) / det;
        Self { point, k, det, k_inv }
    }

    pub fn from_real(g: [[f64; 2]; 2], point: (f64, f64)) -> Self {
        let c = |x: f64| Complex64::from(x);
        Self::from_matrix(Matrix2::new(c(g[0][0]), c(g[0][1]), c(g[1][0]), c(g[1][1])), point)
    }

    /// `|k|^{1/2}`, positive root of the (real, positive) determinant.
    pub fn sqrt_det(&self) -> f64 {
        self.det.re.sqrt()
    }

    /// `v_a k^{ab} v_b` for a real covector.
    pub fn covector_form(&self, v: [f64; 2]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                acc += self.k_inv[(a, b)] * v[a] * v[b];
            }
        }
        acc
    }

    /// `conj(v)^a k_ab v^b` for a complex vector.
    pub fn vector_form(&self, v: [Complex64; 2]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                acc += v[a].conj() * self.k[(a, b)] * v[b];
            }
        }
        acc
    }
}

/// Distance of `z` from the closed half-line `(-inf, 0]`.
pub fn distance_from_negative_axis(z: Complex64) -> f64 {
    if z.re >= 0.0 {
        z.norm()
    } else {
        z.im.abs()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub min_det: f64,
    pub max_det_imag: f64,
    /// Smallest distance of `v k^{-1} v` from `(-inf, 0]` over unit covectors.
    pub spectrum_margin: f64,
    /// Smallest admissible `C` with `|Im q| <= C Re q` on the sampled vectors.
    pub coercivity: f64,
    pub samples: usize,
    pub failures: Vec<String>,
}

impl HypothesisReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks positivity of the determinant, the spectrum condition on
/// `n_dirs` covector directions and the coercivity bound on complex vectors.
pub fn check_samples(samples: &[ComplexMetricSample], n_dirs: usize) -> HypothesisReport {
    let mut report = HypothesisReport {
        min_det: f64::INFINITY,
        max_det_imag: 0.0,
        spectrum_margin: f64::INFINITY,
        coercivity: 0.0,
        samples: samples.len(),
        failures: Vec::new(),
    };
    let phases = 8;
    for sample in samples {
        let (s, y) = sample.point;
        report.min_det = report.min_det.min(sample.det.re);
        report.max_det_imag = report.max_det_imag.max(sample.det.im.abs());
        if !(sample.det.re > 0.0) || sample.det.im.abs() > 1e-12 * sample.det.norm() {
            report.failures.push(format!("det k = {} at ({s}, {y})", sample.det));
        }
        for j in 0..n_dirs {
            let theta = std::f64::consts::PI * 2.0 * j as f64 / n_dirs as f64;
            let q = sample.covector_form([theta.cos(), theta.sin()]);
            let dist = distance_from_negative_axis(q);
            report.spectrum_margin = report.spectrum_margin.min(dist);
            if dist < 1e-12 {
                report.failures.push(format!("v k^-1 v = {q} in (-inf, 0] at ({s}, {y})"));
            }
            for p in 0..phases {
                let phi = std::f64::consts::PI * 2.0 * p as f64 / phases as f64;
                let v = [Complex64::from(theta.cos()), Complex64::from_polar(theta.sin(), phi)];
                let q = sample.vector_form(v);
                if q.re <= 0.0 {
                    report.coercivity = f64::INFINITY;
                } else {
                    report.coercivity = report.coercivity.max(q.im.abs() / q.re);
                }
            }
        }
    }
    if !report.coercivity.is_finite() {
        report.failures.push("Re(conj(v) k v) <= 0 for some sampled v".into());
    }
    report.failures.dedup();
    report
}

/// Evaluates the complex metric on `s_points x y_points` and checks the hypotheses there.
pub fn check_hypotheses(
    fam: &CoefficientFamily,
    s_points: &[f64],
    y_points: &[f64],
    n_dirs: usize,
) -> HypothesisReport {
    let samples: Vec<_> = s_points
        .iter()
        .flat_map(|&s| y_points.iter().map(move |&y| fam.complex_metric_unchecked(s, y)))
        .collect();
    check_samples(&samples, n_dirs)
}

/// Pullback by `kappa(s, y) = (-s, y)` of a field stored s-major with `n_y` values per s-node.
pub fn kappa_pullback<T: Copy>(values: &[T], s_nodes: &[f64], n_y: usize) -> Result<Vec<T>> {
    check_symmetric(s_nodes)?;
    if values.len() != s_nodes.len() * n_y {
        return Err(Error::RegionMismatch(format!(
            "field has {} values, grid has {} x {n_y}",
            values.len(),
            s_nodes.len()
        )));
    }
    Ok(values.chunks(n_y).rev().flatten().copied().collect())
}

pub fn check_symmetric(s_nodes: &[f64]) -> Result<()> {
    let n = s_nodes.len();
    let scale = s_nodes.iter().fold(1.0_f64, |m, s| m.max(s.abs()));
    for j in 0..n / 2 + 1 {
        let (l, r) = (s_nodes[j], s_nodes[n - 1 - j]);
        if (l + r).abs() > 1e-12 * scale {
            return Err(Error::GridAsymmetry { index: j, left: l, right: r });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lorentzian_examples() {
        let flat = CoefficientFamily::flat(1.0);
        assert_eq!(flat.eval_lorentzian(0.3, 1.0).unwrap(), [[-1.0, 0.0], [0.0, 1.0]]);
        let frw = CoefficientFamily::cosh_frw(1.0);
        let g = frw.eval_lorentzian(0.0, 0.0).unwrap();
        assert!((g[0][0] + 1.0).abs() < 1e-15 && (g[1][1] - 1.0).abs() < 1e-15);

        // -N^2 + h w^2 = -0.75, h w = 0.5, h = 1; eigenvalues of opposite sign
        let g = CoefficientFamily::twisted(0.5, 1.0).eval_lorentzian(2.0, 0.0).unwrap();
        assert_eq!(g, [[-0.75, 0.5], [0.5, 1.0]]);
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        assert!(det < 0.0);
    }

    #[test]
    fn non_lorentzian_rejected() {
        let fam = CoefficientFamily::new(
            AnalyticFamily::Constant(1.0),
            AnalyticFamily::Constant(-1.0),
            AnalyticFamily::Constant(0.0),
            AnalyticFamily::Constant(1.0),
        );
        assert!(matches!(fam.eval_lorentzian(0.0, 0.0), Err(Error::NonLorentzian { .. })));
    }

    #[test]
    fn complex_metric_examples() {
        let k = CoefficientFamily::flat(1.0).eval_complex_metric(0.7, 0.0).unwrap();
        assert_eq!(k.k, Matrix2::identity());
        assert!((k.det - 1.0).norm() < 1e-15);

        let s = 0.4_f64;
        let k = CoefficientFamily::cosh_frw(1.0).eval_complex_metric(s, 0.0).unwrap();
        assert!((k.k[(1, 1)] - s.cos().powi(2)).norm() < 1e-14);
        assert!((k.det.re - s.cos().powi(2)).abs() < 1e-14);

        let w0 = 0.5;
        let k = CoefficientFamily::twisted(w0, 1.0).eval_complex_metric(1.3, 0.0).unwrap();
        assert!((k.k[(0, 0)] - c(1.0 - w0 * w0, 0.0)).norm() < 1e-15);
        assert!((k.k[(0, 1)] - c(0.0, w0)).norm() < 1e-15);
        assert!((k.det - 1.0).norm() < 1e-14);
        let prod = k.k * k.k_inv;
        assert!((prod - Matrix2::identity()).norm() < 1e-14);
    }

    #[test]
    fn determinant_is_lapse_squared_times_h() {
        let fam = CoefficientFamily::new(
            AnalyticFamily::CoshScale { c0: 1.0, c1: 0.2, c2: 1.0, power: 1 },
            AnalyticFamily::TrigPoly { a0: 2.0, cos: vec![0.3], sin: vec![0.0] },
            AnalyticFamily::ExpPoly { rate: 0.0, coeffs: vec![0.4] },
            AnalyticFamily::Constant(1.0),
        );
        for &s in &[-0.8, -0.1, 0.0, 0.5, 1.1] {
            let sample = fam.complex_metric_unchecked(s, 0.0);
            let v = fam.at(I * s);
            let expect = v.lapse * v.lapse * v.h;
            assert!((sample.det - expect).norm() < 1e-12 * (1.0 + expect.norm()));
        }
    }

    #[test]
    fn complex_metric_at_zero_is_spatial_data() {
        let fam = CoefficientFamily::twisted(0.3, 1.0);
        let k = fam.eval_complex_metric(0.0, 0.0).unwrap();
        assert_eq!(k.k[(0, 1)].re, 0.0);
        assert!(k.k[(0, 1)].im != 0.0);
        assert_eq!(k.k[(1, 1)], c(1.0, 0.0));
    }

    #[test]
    fn reality_condition_for_all_families() {
        let fams = [
            AnalyticFamily::from_spec("constant", &[2.0]).unwrap(),
            AnalyticFamily::from_spec("trig_poly", &[1.0, 0.3, -0.2, 0.1, 0.05]).unwrap(),
            AnalyticFamily::from_spec("exp_poly", &[0.7, 1.0, -0.3, 0.2]).unwrap(),
            AnalyticFamily::from_spec("cosh_scale", &[0.5, 1.0, 1.3, 2.0]).unwrap(),
        ];
        let zs: Vec<_> = (-4..=4)
            .flat_map(|a| (-4..=4).map(move |b| c(a as f64 * 0.4, b as f64 * 0.35)))
            .collect();
        for f in fams {
            let fam = CoefficientFamily::new(f.clone(), f.clone(), f.clone(), f);
            assert!(fam.reality_defect(&zs) < 1e-13);
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let fams = [
            AnalyticFamily::from_spec("trig_poly", &[1.0, 0.3, -0.2, 0.1, 0.05]).unwrap(),
            AnalyticFamily::from_spec("exp_poly", &[0.7, 1.0, -0.3, 0.2]).unwrap(),
            AnalyticFamily::from_spec("cosh_scale", &[0.5, 1.0, 1.3, 2.0]).unwrap(),
        ];
        let z = c(0.3, -0.2);
        let eps = 1e-5;
        for f in fams {
            let fd = (f.eval(z + eps) - f.eval(z - eps)) / (2.0 * eps);
            assert!((fd - f.deriv(z)).norm() < 1e-8, "{}", f.name());
        }
    }

    #[test]
    fn family_spec_errors() {
        assert!(AnalyticFamily::from_spec("constant", &[1.0, 2.0]).is_err());
        assert!(AnalyticFamily::from_spec("trig_poly", &[1.0, 2.0]).is_err());
        assert!(AnalyticFamily::from_spec("bessel", &[1.0]).is_err());
        assert!(AnalyticFamily::from_spec("cosh_scale", &[1.0, 1.0, 1.0, 0.5]).is_err());
    }

    #[test]
    fn hypothesis_reports() {
        let s_pts: Vec<f64> = (-10..=10).map(|j| j as f64 * 0.1).collect();
        let r = check_hypotheses(&CoefficientFamily::flat(1.0), &s_pts, &[0.0], 64);
        assert!(r.pass());
        assert_eq!(r.coercivity, 0.0);
        assert!((r.min_det - 1.0).abs() < 1e-15);

        let r = check_hypotheses(&CoefficientFamily::twisted(0.5, 1.0), &s_pts, &[0.0], 64);
        assert!(r.pass());
        assert!(r.coercivity.is_finite() && r.coercivity > 0.0);
        // Re(v k^-1 v) = v1^2 + 0.75 v2^2
        let k = CoefficientFamily::twisted(0.5, 1.0).eval_complex_metric(0.2, 0.0).unwrap();
        let q = k.covector_form([0.6, 0.8]);
        assert!((q.re - (0.36 + 0.75 * 0.64)).abs() < 1e-14);

        let g = CoefficientFamily::flat(1.0).eval_lorentzian(0.0, 0.0).unwrap();
        let r = check_samples(&[ComplexMetricSample::from_real(g, (0.0, 0.0))], 64);
        assert!(!r.pass());
        assert!(r.min_det < 0.0);
    }

    #[test]
    fn kappa_examples() {
        let nodes: Vec<f64> = (-3..=3).map(|j| j as f64 * 0.5).collect();
        let u: Vec<f64> = nodes.clone();
        let ku = kappa_pullback(&u, &nodes, 1).unwrap();
        assert!(ku.iter().zip(&u).all(|(a, b)| *a == -*b));
        let sq: Vec<f64> = nodes.iter().map(|s| s * s).collect();
        assert_eq!(kappa_pullback(&sq, &nodes, 1).unwrap(), sq);
        let two_d: Vec<usize> = (0..nodes.len() * 3).collect();
        let back = kappa_pullback(&kappa_pullback(&two_d, &nodes, 3).unwrap(), &nodes, 3).unwrap();
        assert_eq!(back, two_d);
        let bad = [0.0, 0.5, 1.1];
        assert!(matches!(kappa_pullback(&[1, 2, 3], &bad, 1), Err(Error::GridAsymmetry { .. })));
    }
}
