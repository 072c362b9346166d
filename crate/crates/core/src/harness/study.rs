use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{error_against, prepare, run_benchmark, time_grid, RunConfig, SignalMatrix};
use crate::error::{Error, Result};
use crate::timeint::{Integrator, StageTimings};

/// One row of a study table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub method: String,
    pub p: usize,
    pub n_e: usize,
    pub n_dof: usize,
    pub dt_crit: Option<f64>,
    pub dt: f64,
    pub error: Option<f64>,
    pub t_fact: f64,
    pub t_rhs: f64,
    pub t_binsert: f64,
}

pub fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Runs `cfg` once per `n_e` in `cfg.n_e_list`.
pub fn convergence_study(cfg: &RunConfig, reference: Option<&SignalMatrix>) -> Result<Vec<StudyRow>> {
    cfg.n_e_list
        .iter()
        .map(|&n_e| {
            let c = RunConfig { n_e, ..cfg.clone() };
            let (_, rep) = run_benchmark(&c, reference)?;
            Ok(StudyRow {
                method: rep.method,
                p: rep.p,
                n_e,
                n_dof: rep.n_dof,
                dt_crit: rep.dt_crit,
                dt: rep.dt_used,
                error: rep.error,
                t_fact: rep.timings.factorization,
                t_rhs: rep.timings.rhs,
                t_binsert: rep.timings.backward_insertion,
            })
        })
        .collect()
}

/// One timed repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRun {
    pub method: String,
    pub repetition: usize,
    pub t_fact: f64,
    pub t_rhs: f64,
    pub t_binsert: f64,
    pub factor_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingStudy {
    /// Mean stage times per configuration.
    pub rows: Vec<StudyRow>,
    pub runs: Vec<TimingRun>,
    /// Whether every repetition reproduced the first one bit for bit.
    pub deterministic: Vec<bool>,
    /// Size of the cut-supported DOF set per configuration.
    pub n_c: Vec<usize>,
    /// Signals of the first repetition per configuration.
    pub signals: Vec<SignalMatrix>,
}

/// Repeats every configuration `cfg.repetitions` times, serially on one
/// thread. Assembly and step selection are not timed.
pub fn timing_study(configs: &[RunConfig], reference: Option<&SignalMatrix>) -> Result<TimingStudy> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| Error::invalid(e.to_string()))?;
    pool.install(|| {
        let mut study = TimingStudy { rows: Vec::new(), runs: Vec::new(), deterministic: Vec::new(), n_c: Vec::new(), signals: Vec::new() };
        for cfg in configs {
            let prep = prepare(cfg)?;
            let needs_crit = cfg.dt.is_none() && cfg.n_t.is_none();
            let dt_crit = if needs_crit || cfg.integrator != Integrator::Newmark { prep.dt_crit()? } else { None };
            let tg = time_grid(cfg, if needs_crit { dt_crit } else { None })?;
            let method = cfg.method_name();
            let mut first: Option<SignalMatrix> = None;
            let mut same = true;
            let mut sum = StageTimings::default();
            for rep in 0..cfg.repetitions {
                let (sig, out) = prep.run(tg)?;
                let t = out.timings;
                sum.factorization += t.factorization;
                sum.rhs += t.rhs;
                sum.backward_insertion += t.backward_insertion;
                study.runs.push(TimingRun {
                    method: method.clone(),
                    repetition: rep,
                    t_fact: t.factorization,
                    t_rhs: t.rhs,
                    t_binsert: t.backward_insertion,
                    factor_dim: out.factor_dim,
                });
                match &first {
                    None => first = Some(sig),
                    Some(f) => same &= bit_identical(f, &sig),
                }
            }
            let sig = first.expect("at least one repetition");
            let error = reference.map(|r| error_against(&sig, r)).transpose()?;
            let n = cfg.repetitions as f64;
            study.rows.push(StudyRow {
                method,
                p: cfg.p,
                n_e: cfg.n_e,
                n_dof: prep.system.n_dof,
                dt_crit,
                dt: tg.dt,
                error,
                t_fact: sum.factorization / n,
                t_rhs: sum.rhs / n,
                t_binsert: sum.backward_insertion / n,
            });
            study.deterministic.push(same);
            study.n_c.push(prep.system.partition.c.len());
            study.signals.push(sig);
        }
        Ok(study)
    })
}

pub fn bit_identical(a: &SignalMatrix, b: &SignalMatrix) -> bool {
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    a.n_p() == b.n_p() && bits(&a.times) == bits(&b.times) && a.values.iter().zip(&b.values).all(|(x, y)| bits(x) == bits(y))
}
