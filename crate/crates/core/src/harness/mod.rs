//! Rotated-cube benchmark: run configuration, observer sampling, error
//! metrics, reference solutions and the convergence and timing studies.

mod config;
mod signals;
mod study;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{time_grid, RunConfig, SourceConfig, TimeGrid, DT_MAX_CDM, DT_MAX_IMPLICIT};
pub use signals::{relative_error, sample_observers, ObserverKind, ObserverSampler, ObserverSet, SignalMatrix};
pub use study::{bit_identical, convergence_study, timing_study, write_rows, StudyRow, TimingRun, TimingStudy};

use crate::assembly::{assemble, count_dofs, force_at, spatial_load, tensor_stiffness, DiscreteSystem, Grid};
use crate::basis::{BasisFamily, BasisSpec};
use crate::error::{Error, Result};
use crate::geometry::ImmersedGeometry;
use crate::linalg::{dt_from_lambda, max_gen_eig, SymOperator, TensorStiffness, DEFAULT_EIG_MAX_ITER, DEFAULT_EIG_TOL};
use crate::timeint::{cdm_run, imex_run, newmark_run_with_operator, Integrator, NewmarkParams, Recorder, RunOutput, StageTimings, State};

/// Assembled benchmark problem, ready to integrate.
pub struct Prepared {
    pub cfg: RunConfig,
    pub grid: Grid,
    pub system: DiscreteSystem,
    /// Spatial load vector; the force at `t` is `ricker(t) * f_s`.
    pub f_s: Vec<f64>,
    pub observer_weights: Vec<Vec<(usize, f64)>>,
    pub assembly_seconds: f64,
    tensor_k: Option<TensorStiffness>,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let start = Instant::now();
    let grid = cfg.grid()?;
    let params = cfg.assembly_params();
    let system = assemble(&grid, params)?;
    let f_s = spatial_load(&system, &grid, &cfg.source())?;
    let tensor_k = tensor_stiffness(&grid, &params)?;
    let assembly_seconds = start.elapsed().as_secs_f64();
    let observer_weights = ObserverSet::benchmark(cfg.l_p).weights(&grid, &system)?;
    log::info!("assembled {} DOFs ({} cut-supported) in {:.2} s", system.n_dof, system.partition.c.len(), assembly_seconds);
    Ok(Prepared { cfg: cfg.clone(), grid, system, f_s, observer_weights, assembly_seconds, tensor_k })
}

impl Prepared {
    /// Stiffness as an operator; matrix-free on uncut tensor grids.
    pub fn stiffness(&self) -> &dyn SymOperator {
        match &self.tensor_k {
            Some(t) => t,
            None => &self.system.k,
        }
    }

    /// Critical step of the scheme: the full system for central
    /// differences, the uncut subsystem for IMEX and none for Newmark with
    /// `beta >= 1/4`.
    pub fn dt_crit(&self) -> Result<Option<f64>> {
        let seed = self.cfg.seed;
        let lambda = |k: &dyn SymOperator, m| max_gen_eig(k, m, DEFAULT_EIG_TOL, DEFAULT_EIG_MAX_ITER, seed).map(|e| e.lambda);
        match self.cfg.integrator {
            Integrator::Cdm => Ok(Some(dt_from_lambda(lambda(self.stiffness(), &self.system.m)?))),
            Integrator::Newmark => {
                let (b, g) = (self.cfg.beta, self.cfg.gamma);
                if b >= 0.25 || 0.5 * g <= b {
                    return Ok(None);
                }
                let l = lambda(self.stiffness(), &self.system.m)?;
                Ok(Some(if l > 0.0 { 1.0 / (l.sqrt() * (0.5 * g - b).sqrt()) } else { f64::INFINITY }))
            }
            Integrator::Imex => {
                let d = &self.system.partition.d;
                if d.is_empty() {
                    return Ok(None);
                }
                let k = self.system.k.principal_submatrix(d);
                let m = self.system.m.principal_submatrix(d);
                Ok(Some(dt_from_lambda(lambda(&k, &m)?)))
            }
        }
    }

    /// Integrates from rest over `tg`.
    pub fn simulate(&self, tg: TimeGrid, rec: &mut dyn Recorder) -> Result<RunOutput> {
        let sys = &self.system;
        let src = self.cfg.source();
        let f_s = &self.f_s;
        let force = move |t: f64, out: &mut [f64]| force_at(f_s, &src, t, out);
        let initial = State::zeros(sys.n_dof);
        let params = NewmarkParams { beta: self.cfg.beta, gamma: self.cfg.gamma, dt: tg.dt, n_t: tg.n_t };
        match self.cfg.integrator {
            Integrator::Cdm => cdm_run(&sys.m, self.stiffness(), tg.dt, tg.n_t, &force, &initial, rec),
            Integrator::Newmark => newmark_run_with_operator(&sys.m, &sys.k, self.stiffness(), &params, &force, &initial, rec),
            Integrator::Imex => imex_run(&sys.m, &sys.k, &sys.partition, &params, &force, &initial, rec),
        }
    }

    /// Integrates and samples the observers `n_s` times.
    pub fn run(&self, tg: TimeGrid) -> Result<(SignalMatrix, RunOutput)> {
        let mut sampler = ObserverSampler::new(&self.observer_weights, tg.n_t, self.cfg.n_s, tg.dt)?;
        let out = self.simulate(tg, &mut sampler)?;
        Ok((sampler.signals, out))
    }
}

/// Summary of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub method: String,
    pub family: BasisFamily,
    pub p: usize,
    pub n_e: usize,
    pub boundary_fitted: bool,
    pub integrator: Integrator,
    pub n_dof: usize,
    pub n_cut_elements: usize,
    pub n_c: usize,
    pub dt_crit: Option<f64>,
    pub dt_used: f64,
    pub n_t: usize,
    pub n_s: usize,
    pub error: Option<f64>,
    pub timings: StageTimings,
    pub factor_dim: usize,
    pub assembly_seconds: f64,
    pub seed: u64,
    pub config: RunConfig,
}

/// Loads the reference named in the configuration, if any, resampled to
/// the run's sample count.
pub fn load_reference(cfg: &RunConfig) -> Result<Option<SignalMatrix>> {
    match &cfg.reference_signals {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|e| Error::config(format!("cannot open reference {}: {e}", path.display())))?;
            Ok(Some(SignalMatrix::read_csv(std::io::BufReader::new(file))?))
        }
        None => Ok(None),
    }
}

/// Error of `sig` against a reference sampled at the same or a finer rate.
pub fn error_against(sig: &SignalMatrix, reference: &SignalMatrix) -> Result<f64> {
    relative_error(sig, &reference.resample(sig.n_s())?)
}

/// One complete simulation: assembly, step selection, integration and,
/// when a reference is given, the error.
pub fn run_benchmark(cfg: &RunConfig, reference: Option<&SignalMatrix>) -> Result<(SignalMatrix, BenchmarkReport)> {
    let prep = prepare(cfg)?;
    let needs_crit = cfg.dt.is_none() && cfg.n_t.is_none();
    let dt_crit = if needs_crit || cfg.integrator != Integrator::Newmark { prep.dt_crit()? } else { None };
    let tg = time_grid(cfg, if needs_crit { dt_crit } else { None })?;
    log::info!("dt_crit = {dt_crit:?}, dt = {:e}, n_t = {}", tg.dt, tg.n_t);
    let (signals, out) = prep.run(tg)?;
    let error = reference.map(|r| error_against(&signals, r)).transpose()?;
    let report = BenchmarkReport {
        method: cfg.method_name(),
        family: cfg.family,
        p: cfg.p,
        n_e: cfg.n_e,
        boundary_fitted: cfg.boundary_fitted,
        integrator: cfg.integrator,
        n_dof: prep.system.n_dof,
        n_cut_elements: prep.grid.n_cut(),
        n_c: prep.system.partition.c.len(),
        dt_crit,
        dt_used: tg.dt,
        n_t: tg.n_t,
        n_s: cfg.n_s,
        error,
        timings: out.timings,
        factor_dim: out.factor_dim,
        assembly_seconds: prep.assembly_seconds,
        seed: cfg.seed,
        config: cfg.clone(),
    };
    Ok((signals, report))
}

/// Boundary-fitted spectral-element reference with central differences.
pub fn reference_run(cfg: &RunConfig) -> Result<SignalMatrix> {
    if !cfg.boundary_fitted {
        return Err(Error::config("the reference run needs boundary_fitted = true"));
    }
    if cfg.family != BasisFamily::GllLagrange || cfg.integrator != Integrator::Cdm {
        return Err(Error::config("the reference run uses GLL-Lagrange elements and central differences"));
    }
    Ok(run_benchmark(cfg, None)?.0)
}

/// DOFs of the immersed discretization after discarding outside elements.
pub fn dof_count(spec: BasisSpec, geometry: ImmersedGeometry) -> Result<usize> {
    Ok(count_dofs(&Grid::immersed(spec, geometry)?))
}
