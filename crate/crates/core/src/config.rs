//! Scenario files: one `dotted.key = <JSON value>` per line, `#` comments.
//!
//! Every key is consumed exactly once; unknown or repeated keys are errors,
//! so a typo never silently falls back to a default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::elliptic::BoundaryCondition;
use crate::error::{Error, Result};
use crate::geometry::{AnalyticFamily, CoefficientFamily};
use crate::lorentzian::Integrator;

/// Smallest admissible grid count.
pub const MIN_GRID: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    Hypotheses,
    Adjoint,
    SolveResidual,
    EtaPositivity,
    CalderonSum,
    CalderonSumGrid,
    ReflectionPositivity,
    ReflectionFormula,
    CalderonClosedForm,
    Projection,
    GreenIdentity,
    CutoffIdentity,
    Ccr,
    StatePositivity,
    Bisolution,
    CcrDifference,
    ThermalAmplitude,
    WickEuclidean,
    WickCone,
    KmsClosedForm,
    KmsStrip,
}

impl CheckId {
    pub const ALL: [CheckId; 21] = [
        CheckId::Hypotheses,
        CheckId::Adjoint,
        CheckId::SolveResidual,
        CheckId::EtaPositivity,
        CheckId::CalderonSum,
        CheckId::CalderonSumGrid,
        CheckId::ReflectionPositivity,
        CheckId::ReflectionFormula,
        CheckId::CalderonClosedForm,
        CheckId::Projection,
        CheckId::GreenIdentity,
        CheckId::CutoffIdentity,
        CheckId::Ccr,
        CheckId::StatePositivity,
        CheckId::Bisolution,
        CheckId::CcrDifference,
        CheckId::ThermalAmplitude,
        CheckId::WickEuclidean,
        CheckId::WickCone,
        CheckId::KmsClosedForm,
        CheckId::KmsStrip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckId::Hypotheses => "hypotheses",
            CheckId::Adjoint => "adjoint",
            CheckId::SolveResidual => "solve_residual",
            CheckId::EtaPositivity => "eta_positivity",
            CheckId::CalderonSum => "calderon_sum",
            CheckId::CalderonSumGrid => "calderon_sum_grid",
            CheckId::ReflectionPositivity => "reflection_positivity",
            CheckId::ReflectionFormula => "reflection_formula",
            CheckId::CalderonClosedForm => "calderon_closed_form",
            CheckId::Projection => "projection",
            CheckId::GreenIdentity => "green_identity",
            CheckId::CutoffIdentity => "cutoff_identity",
            CheckId::Ccr => "ccr",
            CheckId::StatePositivity => "state_positivity",
            CheckId::Bisolution => "bisolution",
            CheckId::CcrDifference => "ccr_difference",
            CheckId::ThermalAmplitude => "thermal_amplitude",
            CheckId::WickEuclidean => "wick_euclidean",
            CheckId::WickCone => "wick_cone",
            CheckId::KmsClosedForm => "kms_closed_form",
            CheckId::KmsStrip => "kms_strip",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub family: CoefficientFamily,
    pub circumference: f64,
    pub mode_max: usize,
    /// Points of the `y` grid used by the two-dimensional path.
    pub n_y: usize,
    pub bc: BoundaryCondition,
    pub n_s: usize,
    /// `n_s` levels of the two-dimensional grid check.
    pub grid_levels: Vec<usize>,
    pub t_max: f64,
    pub n_t: usize,
    pub integrator: Integrator,
    pub checks: Vec<CheckId>,
    /// Highest `|m|` held to the strip-path bound.
    pub strip_mode_max: usize,
    pub output_dir: PathBuf,
    pub format: Format,
    /// SHA-256 of `"blob <len>\0" + file`, the git object hash of the config text.
    pub hash: String,
}

impl ScenarioConfig {
    pub fn wavenumber(&self, m: i32) -> f64 {
        std::f64::consts::TAU * m as f64 / self.circumference
    }

    pub fn modes(&self) -> Vec<i32> {
        let m = self.mode_max as i32;
        (-m..=m).collect()
    }

    pub fn beta(&self) -> Option<f64> {
        match self.bc {
            BoundaryCondition::Periodic { beta } => Some(beta),
            BoundaryCondition::DirichletSlab { .. } => None,
        }
    }

    /// Half-width of the Euclidean region on either side of `s = 0`.
    pub fn half_width(&self) -> f64 {
        match self.bc {
            BoundaryCondition::Periodic { beta } => 0.5 * beta,
            BoundaryCondition::DirichletSlab { l } => l,
        }
    }

    pub fn time_steps(&self) -> usize {
        (self.n_t - 1) / 2
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = Entries::read(text)?;
        let cfg = Self::from_entries(&mut raw, text)?;
        if let Some(key) = raw.0.keys().next() {
            return Err(Error::config(key.as_str(), "unknown key"));
        }
        Ok(cfg)
    }

    fn from_entries(raw: &mut Entries, text: &str) -> Result<Self> {
        let name = raw.string("name")?;
        let family = CoefficientFamily::new(
            raw.family("metric.N")?,
            raw.family("metric.h")?,
            raw.family("metric.w")?,
            raw.family("metric.mu")?,
        );
        let circumference = raw.positive("sigma.circumference")?;
        let n_y_given = raw.optional_count("sigma.n_y")?;
        let mode_max = match (raw.optional_count("sigma.mode_max")?, n_y_given) {
            (Some(m), _) => m,
            (None, Some(n)) => (n - 1) / 2,
            (None, None) => return Err(Error::config("sigma.mode_max", "one of sigma.mode_max or sigma.n_y is required")),
        };
        let n_y = n_y_given.unwrap_or(MIN_GRID);
        check_grid("sigma.n_y", n_y, false)?;

        let bc = raw.boundary_condition()?;
        let n_s = raw.count("euclidean.n_s")?;
        check_grid("euclidean.n_s", n_s, true)?;
        let grid_levels = match raw.take("euclidean.grid_levels") {
            Some(v) => {
                let levels = v
                    .as_array()
                    .and_then(|a| a.iter().map(|x| x.as_u64().map(|n| n as usize)).collect::<Option<Vec<_>>>())
                    .ok_or_else(|| Error::config("euclidean.grid_levels", "expected an array of integers"))?;
                if levels.len() < 3 || levels.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::config("euclidean.grid_levels", "need at least 3 increasing levels"));
                }
                for &n in &levels {
                    check_grid("euclidean.grid_levels", n, true)?;
                }
                levels
            }
            None => vec![n_s, 2 * n_s - 1, 4 * n_s - 3],
        };

        let t_max = raw.positive("lorentzian.T")?;
        let n_t = raw.count("lorentzian.n_t")?;
        check_grid("lorentzian.n_t", n_t, true)?;
        let integrator = match raw.string("lorentzian.integrator")?.as_str() {
            "closed_form" => Integrator::ClosedForm,
            "rk4" => Integrator::Rk4,
            other => return Err(Error::config("lorentzian.integrator", format!("expected closed_form or rk4, got {other}"))),
        };

        let checks = raw.checks()?;
        let strip_mode_max = raw.optional_count("kms.strip_mode_max")?.unwrap_or(4);
        let output_dir = PathBuf::from(raw.string("output.dir")?);
        let format = raw.string("output.format")?;
        let format = Format::parse(&format).ok_or_else(|| Error::config("output.format", format!("expected csv or json, got {format}")))?;

        Ok(Self {
            name,
            family,
            circumference,
            mode_max,
            n_y,
            bc,
            n_s,
            grid_levels,
            t_max,
            n_t,
            integrator,
            checks,
            strip_mode_max,
            output_dir,
            format,
            hash: object_hash(text.as_bytes()),
        })
    }
}

fn check_grid(key: &str, n: usize, odd: bool) -> Result<()> {
    if n < MIN_GRID {
        return Err(Error::config(key, format!("{n} is below the minimum grid count {MIN_GRID}")));
    }
    if odd && n % 2 == 0 {
        return Err(Error::config(key, format!("{n} must be odd")));
    }
    Ok(())
}

pub fn object_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Parsed `key = value` lines not yet consumed.
struct Entries(BTreeMap<String, Value>);

impl Entries {
    fn read(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", lineno + 1), "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() || !key.split('.').all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')) {
                return Err(Error::config(format!("line {}", lineno + 1), format!("malformed key `{key}`")));
            }
            let value: Value = serde_json::from_str(value.trim()).map_err(|e| Error::config(key, format!("invalid JSON value: {e}")))?;
            if map.insert(key.to_string(), value).is_some() {
                return Err(Error::config(key, "key given more than once"));
            }
        }
        Ok(Self(map))
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.0.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<Value> {
        self.take(key).ok_or_else(|| Error::config(key, "missing"))
    }

    fn string(&mut self, key: &str) -> Result<String> {
        match self.require(key)? {
            Value::String(s) => Ok(s),
            other => Err(Error::config(key, format!("expected a string, got {other}"))),
        }
    }

    fn positive(&mut self, key: &str) -> Result<f64> {
        match self.require(key)?.as_f64() {
            Some(x) if x > 0.0 && x.is_finite() => Ok(x),
            _ => Err(Error::config(key, "expected a positive number")),
        }
    }

    fn as_count(key: &str, v: &Value) -> Result<usize> {
        v.as_u64().map(|n| n as usize).ok_or_else(|| Error::config(key, "expected a non-negative integer"))
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let v = self.require(key)?;
        Self::as_count(key, &v)
    }

    fn optional_count(&mut self, key: &str) -> Result<Option<usize>> {
        self.take(key).map(|v| Self::as_count(key, &v)).transpose()
    }

    fn family(&mut self, key: &str) -> Result<AnalyticFamily> {
        let v = self.require(key)?;
        let name = v.get("family").and_then(Value::as_str).ok_or_else(|| Error::config(key, "expected {\"family\": ..., \"params\": [...]}"))?;
        let params = v
            .get("params")
            .and_then(Value::as_array)
            .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
            .ok_or_else(|| Error::config(key, "params must be an array of numbers"))?;
        AnalyticFamily::from_spec(name, &params).map_err(|msg| Error::config(key, msg))
    }

    fn boundary_condition(&mut self) -> Result<BoundaryCondition> {
        let key = "euclidean.bc";
        let bc = match self.require(key)? {
            Value::String(s) => s,
            other => return Err(Error::config(key, format!("exactly one of \"dirichlet\" or \"periodic\" is required, got {other}"))),
        };
        let l = self.take("euclidean.L");
        let beta = self.take("euclidean.beta");
        let num = |k: &str, v: Value| match v.as_f64() {
            Some(x) if x > 0.0 && x.is_finite() => Ok(x),
            _ => Err(Error::config(k, "expected a positive number")),
        };
        match (bc.as_str(), l, beta) {
            ("dirichlet", Some(l), None) => Ok(BoundaryCondition::DirichletSlab { l: num("euclidean.L", l)? }),
            ("periodic", None, Some(b)) => Ok(BoundaryCondition::Periodic { beta: num("euclidean.beta", b)? }),
            ("dirichlet", _, _) => Err(Error::config(key, "dirichlet needs euclidean.L and no euclidean.beta")),
            ("periodic", _, _) => Err(Error::config(key, "periodic needs euclidean.beta and no euclidean.L")),
            (other, _, _) => Err(Error::config(key, format!("expected dirichlet or periodic, got {other}"))),
        }
    }

    fn checks(&mut self) -> Result<Vec<CheckId>> {
        let key = "checks";
        let v = self.require(key)?;
        let names = v.as_array().ok_or_else(|| Error::config(key, "expected an array of check ids"))?;
        let mut out = Vec::new();
        for n in names {
            let s = n.as_str().ok_or_else(|| Error::config(key, format!("check id {n} is not a string")))?;
            let id = CheckId::parse(s).ok_or_else(|| Error::config(key, format!("unknown check id `{s}`")))?;
            if !out.contains(&id) {
                out.push(id);
            }
        }
        out.sort();
        Ok(out)
    }
}
