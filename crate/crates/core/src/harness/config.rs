use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::{AssemblyParams, Grid, GridMode, SourceSpec};
use crate::basis::{BasisFamily, BasisSpec};
use crate::error::{Error, Result};
use crate::geometry::{CardanAngles, ImmersedGeometry};
use crate::stabilization::{Lumping, StabilizationParams, DEFAULT_F_LAMBDA};
use crate::timeint::Integrator;

/// Largest explicit step for about 5% accuracy.
pub const DT_MAX_CDM: f64 = 1.0 / 450.0;
/// Largest implicit/IMEX step for about 5% accuracy.
pub const DT_MAX_IMPLICIT: f64 = 0.015385;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Defaults to the centre of the face `x' = -l_p / 2`.
    #[serde(default)]
    pub x_l_local: Option<[f64; 3]>,
    #[serde(default = "default_sigma")]
    pub sigma_s: f64,
    #[serde(default = "default_f_e")]
    pub f_e: f64,
}

fn default_sigma() -> f64 {
    0.01
}

fn default_f_e() -> f64 {
    10.0
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self { x_l_local: None, sigma_s: default_sigma(), f_e: default_f_e() }
    }
}

/// One simulation, read from a flat JSON object. Missing keys take the
/// benchmark values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub label: Option<String>,
    // geometry
    pub l_p: f64,
    pub l_e: f64,
    pub cardan_deg: [f64; 3],
    pub octree_depth: usize,
    pub boundary_fitted: bool,
    // discretization
    pub family: BasisFamily,
    pub p: usize,
    pub n_e: usize,
    pub rho: f64,
    pub c: f64,
    // stabilization
    pub alpha: f64,
    pub epsilon: f64,
    pub f_lambda: f64,
    pub lumping: Lumping,
    // time integration
    pub integrator: Integrator,
    pub beta: f64,
    pub gamma: f64,
    pub dt_max: Option<f64>,
    pub dt: Option<f64>,
    pub n_t: Option<usize>,
    #[serde(rename = "T")]
    pub t_end: f64,
    // benchmark
    pub source: SourceConfig,
    pub n_s: usize,
    pub load_subdivisions: usize,
    pub seed: u64,
    pub reference_signals: Option<PathBuf>,
    // studies
    pub n_e_list: Vec<usize>,
    pub repetitions: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            label: None,
            l_p: 0.3,
            l_e: 0.5,
            cardan_deg: [10.0; 3],
            octree_depth: 4,
            boundary_fitted: false,
            family: BasisFamily::GllLagrange,
            p: 3,
            n_e: 13,
            rho: 1.0,
            c: 1.0,
            alpha: 1e-8,
            epsilon: 0.0,
            f_lambda: DEFAULT_F_LAMBDA,
            lumping: Lumping::None,
            integrator: Integrator::Cdm,
            beta: 0.25,
            gamma: 0.5,
            dt_max: None,
            dt: None,
            n_t: None,
            t_end: 1.0,
            source: SourceConfig::default(),
            n_s: 100,
            load_subdivisions: 1,
            seed: 0,
            reference_signals: None,
            n_e_list: vec![6, 10, 13],
            repetitions: 10,
        }
    }
}

impl RunConfig {
    /// Desk-scale boundary-fitted spectral reference: `n_e = 6`, `p = 6`,
    /// `dt = 1e-4`, every step sampled.
    pub fn desk_reference() -> Self {
        Self {
            label: Some("reference".into()),
            boundary_fitted: true,
            family: BasisFamily::GllLagrange,
            p: 6,
            n_e: 6,
            integrator: Integrator::Cdm,
            n_t: Some(10_000),
            n_s: 10_000,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// A single object or an array of objects.
    pub fn load_set(path: &Path) -> Result<Vec<Self>> {
        let text = std::fs::read_to_string(path)?;
        Self::set_from_json(&text)
    }

    pub fn set_from_json(text: &str) -> Result<Vec<Self>> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        let items = match value {
            serde_json::Value::Array(items) => items,
            other => vec![other],
        };
        if items.is_empty() {
            return Err(Error::config("empty configuration set"));
        }
        items
            .into_iter()
            .map(|v| {
                let cfg: Self = serde_json::from_value(v).map_err(|e| Error::config(e.to_string()))?;
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        self.basis_spec()?;
        self.assembly_params().validate()?;
        self.source().validate()?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("T must be positive"));
        }
        if self.n_s == 0 {
            return Err(Error::config("n_s must be positive"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be positive"));
        }
        if self.n_e_list.contains(&0) {
            return Err(Error::config("n_e_list entries must be positive"));
        }
        if !(self.beta >= 0.0 && self.gamma >= 0.0 && self.beta.is_finite() && self.gamma.is_finite()) {
            return Err(Error::config("beta and gamma must be nonnegative"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config("dt must be positive"));
            }
        }
        if let Some(dt_max) = self.dt_max {
            if !(dt_max > 0.0) {
                return Err(Error::config("dt_max must be positive"));
            }
        }
        if self.dt.is_some() && self.n_t.is_some() {
            return Err(Error::config("give either dt or n_t, not both"));
        }
        if self.n_t == Some(0) {
            return Err(Error::config("n_t must be positive"));
        }
        if self.integrator == Integrator::Imex && self.family != BasisFamily::GllLagrange {
            return Err(Error::config("the IMEX integrator needs a GLL-Lagrange basis"));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ImmersedGeometry> {
        let [a, b, c] = self.cardan_deg;
        ImmersedGeometry::new(self.l_p, self.l_e, CardanAngles::new(a, b, c))
    }

    pub fn basis_spec(&self) -> Result<BasisSpec> {
        BasisSpec::new(self.family, self.p, self.n_e)
    }

    pub fn grid(&self) -> Result<Grid> {
        let mode = if self.boundary_fitted { GridMode::BoundaryFitted } else { GridMode::Immersed };
        Grid::new(self.basis_spec()?, self.geometry()?, mode)
    }

    pub fn stabilization(&self) -> StabilizationParams {
        StabilizationParams { alpha: self.alpha, epsilon: self.epsilon, f_lambda: self.f_lambda, lumping: self.lumping }
    }

    pub fn assembly_params(&self) -> AssemblyParams {
        AssemblyParams {
            rho: self.rho,
            c: self.c,
            octree_depth: self.octree_depth,
            stabilization: self.stabilization(),
            load_subdivisions: self.load_subdivisions,
        }
    }

    pub fn source(&self) -> SourceSpec {
        SourceSpec {
            x_l_local: self.source.x_l_local.unwrap_or([-0.5 * self.l_p, 0.0, 0.0]),
            sigma_s: self.source.sigma_s,
            f_e: self.source.f_e,
        }
    }

    pub fn effective_dt_max(&self) -> f64 {
        self.dt_max.unwrap_or(match self.integrator {
            Integrator::Cdm => DT_MAX_CDM,
            Integrator::Newmark | Integrator::Imex => DT_MAX_IMPLICIT,
        })
    }

    /// Short method name used in study tables.
    pub fn method_name(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let fam = match (self.family, self.boundary_fitted) {
            (BasisFamily::GllLagrange, true) => "sem",
            (BasisFamily::GllLagrange, false) => "scm",
            (BasisFamily::BSpline, true) => "iga",
            (BasisFamily::BSpline, false) => "iga-fcm",
        };
        let int = match self.integrator {
            Integrator::Cdm => "cdm",
            Integrator::Newmark => "newmark",
            Integrator::Imex => "imex",
        };
        let lump = match self.lumping {
            Lumping::None => "",
            Lumping::RowSum => "-rowsum",
            Lumping::Hrz => "-hrz",
        };
        format!("{fam}{lump}-{int}")
    }
}

/// Time grid of a run: `n_t` steps of `dt`, `n_t` a multiple of `n_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_t: usize,
}

/// Chooses the step: an explicit `n_t` gives `dt = T / n_t`; an explicit
/// `dt` is used as is with `n_t = round(T / dt)`; otherwise
/// `select_dt(dt_crit, dt_max)` fixes the step count, rounded up to a
/// multiple of `n_s`, and `dt = T / n_t`.
pub fn time_grid(cfg: &RunConfig, dt_crit: Option<f64>) -> Result<TimeGrid> {
    let t = cfg.t_end;
    if let Some(n_t) = cfg.n_t {
        return Ok(TimeGrid { dt: t / n_t as f64, n_t });
    }
    if let Some(dt) = cfg.dt {
        let n_t = (t / dt).round().max(1.0) as usize;
        return Ok(TimeGrid { dt, n_t });
    }
    let dt = crate::timeint::select_dt(dt_crit.unwrap_or(f64::INFINITY), cfg.effective_dt_max());
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config("cannot select a time step"));
    }
    let n_min = (t / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let n_t = n_min.div_ceil(cfg.n_s) * cfg.n_s;
    Ok(TimeGrid { dt: t / n_t as f64, n_t })
}
