//! Experiment configuration: TOML schema, validation with key paths, and
//! construction of the system and run settings.

use std::path::Path;
use std::sync::Arc;

use mrbv::contact::Dissipation;
use mrbv::energy::{Builtin, InitialState, LoadCurve, QuadraticEnergy, State, System};
use mrbv::pipeline::{RunSettings, ToleranceOverrides};
use mrbv::potentials::{Custom2D, Matrix, RatePotential, ScalarProfile, Vector, ViscousPotential};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A configuration problem, located by its key path.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

fn err<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { path: path.into(), message: message.into() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: f64,
    /// strictly decreasing
    pub eps: Vec<f64>,
    /// fixed step; otherwise tau_ratio * min(eps, eps^alpha)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default = "default_tau_ratio")]
    pub tau_ratio: f64,
    /// final time T; defaults to the energy's horizon
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    pub out_dir: String,
    #[serde(default)]
    /// recorded with the artifacts; the sweep itself draws no random numbers
    pub seed: u32,
    #[serde(default = "default_n_nodes")]
    pub n_nodes: usize,
    #[serde(default = "default_finsler_nodes")]
    pub finsler_nodes: usize,
    pub energy: EnergySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potentials: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "ToleranceSpec::is_empty")]
    pub tolerances: ToleranceSpec,
}

fn default_tau_ratio() -> f64 {
    0.1
}

fn default_n_nodes() -> usize {
    2000
}

fn default_finsler_nodes() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergySpec {
    /// one of the bundled systems, by name
    Builtin(String),
    /// 1/2 <A u, u> + <B u, z> + 1/2 <G z, z> - <f(t), u> - <g(t), z>;
    /// B has one row per z component. Loads are `[t, value...]` rows.
    Quadratic {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        g: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        f_load: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        g_load: Vec<Vec<f64>>,
        horizon: f64,
        u0: Vec<f64>,
        z0: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub vu: ViscousSpec,
    pub vz: ViscousSpec,
    pub kappa_plus: Vec<f64>,
    pub kappa_minus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ViscousSpec {
    Quadratic,
    WeightedQuadratic { weight: Vec<Vec<f64>> },
    PHomogeneous { p: f64, weight: Vec<Vec<f64>> },
    NormPower { p: f64 },
    NormLinearQuadratic { a: f64, b: f64 },
    CustomC,
    CustomD,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_zero: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_inf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_class: Option<f64>,
}

impl ToleranceSpec {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    fn fields(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("tol_t", self.tol_t),
            ("tol_s", self.tol_s),
            ("tol_v", self.tol_v),
            ("lambda_zero", self.lambda_zero),
            ("lambda_inf", self.lambda_inf),
            ("tol_class", self.tol_class),
        ]
    }
}

fn positive(path: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        err(path, format!("must be a positive finite number, got {x}"))
    }
}

fn matrix(path: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<Matrix, ConfigError> {
    if rows.len() != nrows {
        return err(path, format!("expected {nrows} rows, got {}", rows.len()));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return err(format!("{path}[{i}]"), format!("expected {ncols} entries, got {}", r.len()));
        }
        if let Some(j) = r.iter().position(|x| !x.is_finite()) {
            return err(format!("{path}[{i}][{j}]"), "not a finite number");
        }
    }
    Ok(Matrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()))
}

fn load(path: &str, rows: &[Vec<f64>], dim: usize) -> Result<LoadCurve, ConfigError> {
    if rows.is_empty() {
        return Ok(LoadCurve::zero(dim));
    }
    if rows.len() < 2 {
        return err(path, "need at least two [t, value...] samples");
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim + 1 {
            return err(format!("{path}[{i}]"), format!("expected [t, value...] with {} entries, got {}", dim + 1, r.len()));
        }
        if i > 0 && r[0] <= rows[i - 1][0] {
            return err(format!("{path}[{i}]"), "sample times must be strictly increasing");
        }
    }
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let values: Vec<Vec<f64>> = rows.iter().map(|r| r[1..].to_vec()).collect();
    LoadCurve::from_samples(&times, &values).or_else(|e| err(path, e.to_string()))
}

impl ViscousSpec {
    fn build(&self, path: &str, dim: usize) -> Result<ViscousPotential, ConfigError> {
        let wrap = |r: Result<ViscousPotential, mrbv::potentials::PotentialError>| r.or_else(|e| err(path, e.to_string()));
        let planar = || if dim == 2 { Ok(()) } else { err(path, format!("custom potentials are planar, but the block has dimension {dim}")) };
        match self {
            ViscousSpec::Quadratic => Ok(ViscousPotential::quadratic(dim)),
            ViscousSpec::WeightedQuadratic { weight } => wrap(ViscousPotential::weighted_quadratic(matrix(&format!("{path}.weight"), weight, dim, dim)?)),
            ViscousSpec::PHomogeneous { p, weight } => {
                if !(*p > 1.0 && p.is_finite()) {
                    return err(format!("{path}.p"), "must exceed 1");
                }
                wrap(ViscousPotential::p_homogeneous(*p, matrix(&format!("{path}.weight"), weight, dim, dim)?))
            }
            ViscousSpec::NormPower { p } => {
                if !(*p > 1.0 && p.is_finite()) {
                    return err(format!("{path}.p"), "must exceed 1");
                }
                wrap(ViscousPotential::norm_based(dim, ScalarProfile::Power { p: *p }))
            }
            ViscousSpec::NormLinearQuadratic { a, b } => {
                if !(*a >= 0.0 && a.is_finite()) {
                    return err(format!("{path}.a"), "must be nonnegative");
                }
                positive(&format!("{path}.b"), *b)?;
                wrap(ViscousPotential::norm_based(dim, ScalarProfile::LinearQuadratic { a: *a, b: *b }))
            }
            ViscousSpec::CustomC => planar().map(|_| ViscousPotential::custom2d(Custom2D::C)),
            ViscousSpec::CustomD => planar().map(|_| ViscousPotential::custom2d(Custom2D::D)),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.message().to_string();
            let at = inner.span().map(|s| format!(" (line {})", text[..s.start].lines().count().max(1))).unwrap_or_default();
            ConfigError { path: if path == "." { "<root>".into() } else { path }, message: format!("{message}{at}") }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).or_else(|e| err(path.display().to_string(), format!("cannot read config: {e}")))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serialisable")
    }

    /// Checks every invariant that does not need the system built.
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("alpha", self.alpha)?;
        if self.eps.is_empty() {
            return err("eps", "the epsilon list is empty");
        }
        for (i, &e) in self.eps.iter().enumerate() {
            positive(&format!("eps[{i}]"), e)?;
            if i > 0 && e >= self.eps[i - 1] {
                return err(format!("eps[{i}]"), "the epsilon list must be strictly decreasing");
            }
        }
        if let Some(t) = self.tau {
            positive("tau", t)?;
        }
        positive("tau_ratio", self.tau_ratio)?;
        if let Some(h) = self.horizon {
            positive("horizon", h)?;
        }
        if self.out_dir.trim().is_empty() {
            return err("out_dir", "must not be empty");
        }
        if self.n_nodes < 3 {
            return err("n_nodes", "need at least 3 nodes");
        }
        if self.finsler_nodes < 2 {
            return err("finsler_nodes", "need at least 2 nodes");
        }
        for (name, v) in self.tolerances.fields() {
            if let Some(x) = v {
                positive(&format!("tolerances.{name}"), x)?;
            }
        }
        Ok(())
    }

    /// Builds the energy, the potentials and the initial state.
    pub fn system(&self) -> Result<System, ConfigError> {
        let base = match &self.energy {
            EnergySpec::Builtin(name) => match Builtin::parse(name) {
                Some(b) => b.system(),
                None => {
                    let known: Vec<&str> = Builtin::ALL.iter().map(|b| b.name()).collect();
                    return err("energy.builtin", format!("unknown builtin {name:?}; expected one of {}", known.join(", ")));
                }
            },
            EnergySpec::Quadratic { a, b, g, f_load, g_load, horizon, u0, z0 } => {
                let (n, m) = (u0.len(), z0.len());
                if n == 0 || m == 0 {
                    return err(if n == 0 { "energy.quadratic.u0" } else { "energy.quadratic.z0" }, "must not be empty");
                }
                positive("energy.quadratic.horizon", *horizon)?;
                let e = QuadraticEnergy::new(
                    matrix("energy.quadratic.a", a, n, n)?,
                    matrix("energy.quadratic.b", b, m, n)?,
                    matrix("energy.quadratic.g", g, m, m)?,
                    load("energy.quadratic.f_load", f_load, n)?,
                    load("energy.quadratic.g_load", g_load, m)?,
                    *horizon,
                )
                .or_else(|e| err("energy.quadratic", e.to_string()))?;
                let q0 = State::new(Vector::from_column_slice(u0), Vector::from_column_slice(z0));
                if let Some(i) = u0.iter().chain(z0).position(|x| !x.is_finite()) {
                    return err(if i < n { format!("energy.quadratic.u0[{i}]") } else { format!("energy.quadratic.z0[{}]", i - n) }, "not a finite number");
                }
                System::new("quadratic", Arc::new(e), Dissipation::quadratic(n, m, 1.0), InitialState::Fixed(q0))
                    .or_else(|e| err("energy.quadratic", e.to_string()))?
            }
        };
        let Some(p) = &self.potentials else {
            if matches!(self.energy, EnergySpec::Quadratic { .. }) {
                return err("potentials", "required for a quadratic energy");
            }
            return Ok(base);
        };
        let (n, m) = (base.energy.n_u(), base.energy.n_z());
        for (name, k) in [("kappa_plus", &p.kappa_plus), ("kappa_minus", &p.kappa_minus)] {
            if k.len() != m {
                return err(format!("potentials.{name}"), format!("expected {m} entries, got {}", k.len()));
            }
            for (i, &x) in k.iter().enumerate() {
                positive(&format!("potentials.{name}[{i}]"), x)?;
            }
        }
        let vu = p.vu.build("potentials.vu", n)?;
        let vz = p.vz.build("potentials.vz", m)?;
        let rate = RatePotential::new(p.kappa_plus.clone(), p.kappa_minus.clone()).or_else(|e| err("potentials", e.to_string()))?;
        let d = Dissipation::new(vu, rate, vz).or_else(|e| err("potentials", e.to_string()))?;
        System::new(base.name.clone(), base.energy.clone(), d, base.initial.clone()).or_else(|e| err("potentials", e.to_string()))
    }

    pub fn settings(&self) -> RunSettings {
        let t = &self.tolerances;
        RunSettings {
            alpha: self.alpha,
            tau: self.tau,
            tau_ratio: self.tau_ratio,
            horizon: self.horizon,
            n_nodes: self.n_nodes,
            finsler_nodes: self.finsler_nodes,
            tolerances: ToleranceOverrides {
                tol_t: t.tol_t,
                tol_s: t.tol_s,
                tol_v: t.tol_v,
                lambda_zero: t.lambda_zero,
                lambda_inf: t.lambda_inf,
                tol_class: t.tol_class,
            },
        }
    }
}
