//! Newmark-family time integration: central differences, implicit Newmark
//! and the implicit-explicit split over cut and uncut DOFs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::DofPartition;
use crate::error::{Error, Result};
use crate::linalg::{factorize, SparseSym, SymOperator};

/// States with `max |psi|` above this abort as unstable.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Cdm,
    Newmark,
    Imex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewmarkParams {
    pub beta: f64,
    pub gamma: f64,
    pub dt: f64,
    pub n_t: usize,
}

impl NewmarkParams {
    pub fn trapezoidal(dt: f64, n_t: usize) -> Self {
        Self { beta: 0.25, gamma: 0.5, dt, n_t }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.beta >= 0.0 && self.gamma >= 0.0) {
            return Err(Error::config("beta and gamma must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub psi: Vec<f64>,
    pub psi_dot: Vec<f64>,
    pub psi_ddot: Vec<f64>,
}

impl State {
    pub fn zeros(n: usize) -> Self {
        Self { psi: vec![0.0; n], psi_dot: vec![0.0; n], psi_ddot: vec![0.0; n] }
    }

    pub fn new(psi: Vec<f64>, psi_dot: Vec<f64>) -> Self {
        let n = psi.len();
        Self { psi, psi_dot, psi_ddot: vec![0.0; n] }
    }
}

/// Accumulated wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub factorization: f64,
    pub rhs: f64,
    pub backward_insertion: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.factorization + self.rhs + self.backward_insertion
    }
}

/// Receives `psi` at step 0 and after every step.
pub trait Recorder {
    fn record(&mut self, step: usize, psi: &[f64]);
}

impl<F: FnMut(usize, &[f64])> Recorder for F {
    fn record(&mut self, step: usize, psi: &[f64]) {
        self(step, psi)
    }
}

/// Recorder that ignores everything.
pub struct NoRecord;

impl Recorder for NoRecord {
    fn record(&mut self, _step: usize, _psi: &[f64]) {}
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: State,
    pub timings: StageTimings,
    /// Dimension of the factorized matrix (zero for diagonal solves).
    pub factor_dim: usize,
}

/// Load vector at time `t`, written into `out`.
pub type Forcing<'a> = &'a (dyn Fn(f64, &mut [f64]) + Sync);

fn check(step: usize, psi: &[f64]) -> Result<()> {
    let norm = psi.iter().fold(0.0f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) });
    if norm > DIVERGENCE_LIMIT {
        return Err(Error::Divergence { step, norm });
    }
    Ok(())
}

fn timed<T>(acc: &mut f64, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let r = f();
    *acc += t.elapsed().as_secs_f64();
    r
}

fn check_dims(m: &SparseSym, k: &dyn SymOperator, s: &State) -> Result<()> {
    let n = m.dim();
    if k.dim() != n || s.psi.len() != n || s.psi_dot.len() != n {
        return Err(Error::invalid("system and state dimensions differ"));
    }
    Ok(())
}

/// Newmark predictor-corrector with `S = M + beta dt^2 K`.
pub fn newmark_run(m: &SparseSym, k: &SparseSym, params: &NewmarkParams, force: Forcing, initial: &State, rec: &mut dyn Recorder) -> Result<RunOutput> {
    newmark_run_with_operator(m, k, k, params, force, initial, rec)
}

/// As [`newmark_run`], with the products `K x` taken from `k_op`, which
/// must represent the same matrix as `k`.
pub fn newmark_run_with_operator(
    m: &SparseSym,
    k: &SparseSym,
    k_op: &dyn SymOperator,
    params: &NewmarkParams,
    force: Forcing,
    initial: &State,
    rec: &mut dyn Recorder,
) -> Result<RunOutput> {
    params.validate()?;
    check_dims(m, k, initial)?;
    check_dims(m, k_op, initial)?;
    let n = m.dim();
    let (beta, gamma, dt) = (params.beta, params.gamma, params.dt);
    let mut tm = StageTimings::default();
    let s_mat = if beta == 0.0 { m.clone() } else { m.add_scaled(beta * dt * dt, k)? };
    let fs = timed(&mut tm.factorization, || factorize(&s_mat))?;
    let fm = if beta == 0.0 { None } else { Some(factorize(m)?) };
    if fs.is_diagonal() {
        tm.factorization = 0.0;
    }

    let mut psi = initial.psi.clone();
    let mut vel = initial.psi_dot.clone();
    let mut acc = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut kx = vec![0.0; n];
    force(0.0, &mut f);
    k_op.apply(&psi, &mut kx);
    for i in 0..n {
        acc[i] = f[i] - kx[i];
    }
    fm.as_ref().unwrap_or(&fs).solve_in_place(&mut acc);
    rec.record(0, &psi);

    for step in 0..params.n_t {
        for i in 0..n {
            psi[i] += dt * vel[i] + (0.5 - beta) * dt * dt * acc[i];
            vel[i] += (1.0 - gamma) * dt * acc[i];
        }
        let t1 = (step + 1) as f64 * dt;
        timed(&mut tm.rhs, || {
            force(t1, &mut f);
            k_op.apply(&psi, &mut kx);
            for i in 0..n {
                acc[i] = f[i] - kx[i];
            }
        });
        timed(&mut tm.backward_insertion, || fs.solve_in_place(&mut acc));
        for i in 0..n {
            vel[i] += gamma * dt * acc[i];
            psi[i] += beta * dt * dt * acc[i];
        }
        check(step + 1, &psi)?;
        rec.record(step + 1, &psi);
    }
    let factor_dim = if fs.is_diagonal() { 0 } else { n };
    Ok(RunOutput { final_state: State { psi, psi_dot: vel, psi_ddot: acc }, timings: tm, factor_dim })
}

/// Central differences, `psi_{k+1} = 2 psi_k - psi_{k-1} + dt^2 M^{-1}(F_k - K psi_k)`,
/// started from a second-order Taylor estimate of `psi_{-1}`.
pub fn cdm_run(m: &SparseSym, k: &dyn SymOperator, dt: f64, n_t: usize, force: Forcing, initial: &State, rec: &mut dyn Recorder) -> Result<RunOutput> {
    NewmarkParams { beta: 0.0, gamma: 0.5, dt, n_t }.validate()?;
    check_dims(m, k, initial)?;
    let n = m.dim();
    let mut tm = StageTimings::default();
    let fm = timed(&mut tm.factorization, || factorize(m))?;
    if fm.is_diagonal() {
        tm.factorization = 0.0;
    }
    let mut f = vec![0.0; n];
    let mut a = vec![0.0; n];
    force(0.0, &mut f);
    k.apply(&initial.psi, &mut a);
    for i in 0..n {
        a[i] = f[i] - a[i];
    }
    fm.solve_in_place(&mut a);
    let mut prev: Vec<f64> = (0..n).map(|i| initial.psi[i] - dt * initial.psi_dot[i] + 0.5 * dt * dt * a[i]).collect();
    let mut cur = initial.psi.clone();
    let mut next = vec![0.0; n];
    rec.record(0, &cur);
    for step in 0..n_t {
        let t = step as f64 * dt;
        timed(&mut tm.rhs, || {
            force(t, &mut f);
            k.apply(&cur, &mut a);
            for i in 0..n {
                a[i] = f[i] - a[i];
            }
        });
        timed(&mut tm.backward_insertion, || fm.solve_in_place(&mut a));
        for i in 0..n {
            next[i] = 2.0 * cur[i] - prev[i] + dt * dt * a[i];
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        check(step + 1, &cur)?;
        rec.record(step + 1, &cur);
    }
    let psi_dot = (0..n).map(|i| (cur[i] - next[i]) / (2.0 * dt)).collect();
    let factor_dim = if fm.is_diagonal() { 0 } else { n };
    Ok(RunOutput { final_state: State { psi: cur, psi_dot, psi_ddot: a }, timings: tm, factor_dim })
}

/// Implicit-explicit Newmark: central differences on the `d` DOFs with a
/// diagonal `M^dd`, implicit Newmark on the `c` DOFs with
/// `S = M^cc + beta dt^2 K^cc`.
pub fn imex_run(
    m: &SparseSym,
    k: &SparseSym,
    partition: &DofPartition,
    params: &NewmarkParams,
    force: Forcing,
    initial: &State,
    rec: &mut dyn Recorder,
) -> Result<RunOutput> {
    params.validate()?;
    check_dims(m, k, initial)?;
    let n = m.dim();
    let (dset, cset) = (&partition.d, &partition.c);
    if dset.len() + cset.len() != n {
        return Err(Error::invalid("DOF partition does not cover the system"));
    }
    let mut is_c = vec![false; n];
    for &i in cset {
        is_c[i] = true;
    }
    let mdd = m.principal_submatrix(dset);
    if !mdd.is_structurally_diagonal() {
        return Err(Error::config("IMEX needs a diagonal mass matrix on the uncut DOFs"));
    }
    if dset.iter().any(|&r| m.row(r).any(|(c, v)| is_c[c] && v != 0.0)) {
        return Err(Error::config("IMEX needs a mass matrix without coupling between cut and uncut DOFs"));
    }
    let (beta, gamma, dt) = (params.beta, params.gamma, params.dt);
    let all: Vec<usize> = (0..n).collect();
    let kd = k.row_block(dset, &all);
    let kc = k.row_block(cset, &all);
    let mdd_inv: Vec<f64> = mdd.diagonal();
    if let Some(i) = mdd_inv.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NotPositiveDefinite(format!("uncut mass entry {} is {}", dset[i], mdd_inv[i])));
    }
    let mcc = m.principal_submatrix(cset);
    let mut tm = StageTimings::default();
    let s_mat = mcc.add_scaled(beta * dt * dt, &k.principal_submatrix(cset))?;
    let fs = timed(&mut tm.factorization, || factorize(&s_mat))?;
    let fmcc = factorize(&mcc)?;

    let (nd, nc) = (dset.len(), cset.len());
    let mut psi = initial.psi.clone();
    let mut f = vec![0.0; n];
    let mut rd = vec![0.0; nd];
    let mut rc = vec![0.0; nc];
    force(0.0, &mut f);

    // Uncut part: Taylor start value psi^d_{-1}.
    kd.spmv(&psi, &mut rd);
    let mut prev_d: Vec<f64> = (0..nd)
        .map(|j| {
            let i = dset[j];
            let a0 = (f[i] - rd[j]) / mdd_inv[j];
            psi[i] - dt * initial.psi_dot[i] + 0.5 * dt * dt * a0
        })
        .collect();
    // Cut part: initial acceleration.
    kc.spmv(&psi, &mut rc);
    let mut acc_c: Vec<f64> = (0..nc).map(|j| f[cset[j]] - rc[j]).collect();
    fmcc.solve_in_place(&mut acc_c);
    let mut vel_c: Vec<f64> = cset.iter().map(|&i| initial.psi_dot[i]).collect();
    rec.record(0, &psi);

    for step in 0..params.n_t {
        let t = step as f64 * dt;
        // Explicit step.
        timed(&mut tm.rhs, || {
            force(t, &mut f);
            kd.spmv(&psi, &mut rd);
            for j in 0..nd {
                rd[j] = f[dset[j]] - rd[j];
            }
        });
        timed(&mut tm.backward_insertion, || {
            for j in 0..nd {
                rd[j] /= mdd_inv[j];
            }
        });
        for j in 0..nd {
            let i = dset[j];
            let next = 2.0 * psi[i] - prev_d[j] + dt * dt * rd[j];
            prev_d[j] = psi[i];
            psi[i] = next;
        }
        // Implicit step on the predicted state.
        for j in 0..nc {
            let i = cset[j];
            psi[i] += dt * vel_c[j] + (0.5 - beta) * dt * dt * acc_c[j];
            vel_c[j] += (1.0 - gamma) * dt * acc_c[j];
        }
        if nc > 0 {
            timed(&mut tm.rhs, || {
                force(t + dt, &mut f);
                kc.spmv(&psi, &mut rc);
                for j in 0..nc {
                    acc_c[j] = f[cset[j]] - rc[j];
                }
            });
            timed(&mut tm.backward_insertion, || fs.solve_in_place(&mut acc_c));
        }
        for j in 0..nc {
            let i = cset[j];
            vel_c[j] += gamma * dt * acc_c[j];
            psi[i] += beta * dt * dt * acc_c[j];
        }
        check(step + 1, &psi)?;
        rec.record(step + 1, &psi);
    }
    let mut psi_dot = vec![0.0; n];
    let mut psi_ddot = vec![0.0; n];
    for j in 0..nd {
        psi_dot[dset[j]] = (psi[dset[j]] - prev_d[j]) / dt;
        psi_ddot[dset[j]] = rd[j];
    }
    for j in 0..nc {
        psi_dot[cset[j]] = vel_c[j];
        psi_ddot[cset[j]] = acc_c[j];
    }
    Ok(RunOutput { final_state: State { psi, psi_dot, psi_ddot }, timings: tm, factor_dim: nc })
}

/// `min(0.9 dt_crit, dt_max)`.
pub fn select_dt(dt_crit: f64, dt_max: f64) -> f64 {
    (0.9 * dt_crit).min(dt_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn no_force(_: f64, f: &mut [f64]) {
        f.fill(0.0);
    }

    fn scalar(omega: f64) -> (SparseSym, SparseSym) {
        (SparseSym::from_diagonal(&[1.0]), SparseSym::from_diagonal(&[omega * omega]))
    }

    fn trajectory(run: impl FnOnce(&mut dyn Recorder) -> Result<RunOutput>) -> (Result<RunOutput>, Vec<Vec<f64>>) {
        let mut out = Vec::new();
        let r = run(&mut |_: usize, p: &[f64]| out.push(p.to_vec()));
        (r, out)
    }

    fn random_spd(n: usize, seed: u64) -> (SparseSym, SparseSym, State) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let k = &b * b.transpose();
        let c = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.2..0.2));
        let m = &c * c.transpose() + DMatrix::identity(n, n);
        let s = State::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        (SparseSym::from_dense(&m), SparseSym::from_dense(&k), s)
    }

    fn ramp(t: f64, f: &mut [f64]) {
        for (i, v) in f.iter_mut().enumerate() {
            *v = (t * (i + 1) as f64).sin();
        }
    }

    fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs())).fold(0.0, f64::max)
    }

    #[test]
    fn zero_data_stays_zero() {
        let (m, k, _) = random_spd(6, 1);
        let z = State::zeros(6);
        let p = NewmarkParams::trapezoidal(0.01, 50);
        let part = DofPartition { d: vec![], c: (0..6).collect() };
        for out in [
            newmark_run(&m, &k, &p, &no_force, &z, &mut NoRecord).unwrap(),
            cdm_run(&m, &k, 0.01, 50, &no_force, &z, &mut NoRecord).unwrap(),
            imex_run(&m, &k, &part, &p, &no_force, &z, &mut NoRecord).unwrap(),
        ] {
            assert!(out.final_state.psi.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn trapezoidal_amplitude_never_grows() {
        let (m, k) = scalar(50.0);
        let s = State::new(vec![1.0], vec![0.0]);
        let (r, traj) = trajectory(|rec| newmark_run(&m, &k, &NewmarkParams::trapezoidal(0.1, 5000), &no_force, &s, rec));
        r.unwrap();
        assert!(traj.iter().all(|p| p[0].abs() <= 1.0 + 1e-9));
    }

    fn oscillator_error(dt: f64, cdm: bool) -> f64 {
        let omega = 2.0;
        let (m, k) = scalar(omega);
        let s = State::new(vec![1.0], vec![0.0]);
        let n_t = (2.0 / dt).round() as usize;
        let (r, traj) = trajectory(|rec| {
            if cdm {
                cdm_run(&m, &k, dt, n_t, &no_force, &s, rec)
            } else {
                newmark_run(&m, &k, &NewmarkParams::trapezoidal(dt, n_t), &no_force, &s, rec)
            }
        });
        r.unwrap();
        traj.iter().enumerate().map(|(i, p)| (p[0] - (omega * i as f64 * dt).cos()).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn second_order_on_the_oscillator() {
        for cdm in [false, true] {
            let e1 = oscillator_error(0.01, cdm);
            let e2 = oscillator_error(0.005, cdm);
            let ratio = e1 / e2;
            assert!((3.6..=4.4).contains(&ratio), "cdm={cdm}: ratio {ratio}");
        }
    }

    #[test]
    fn cdm_stability_boundary() {
        let omega = 10.0;
        let (m, k) = scalar(omega);
        let s = State::new(vec![1.0], vec![0.0]);
        assert!(cdm_run(&m, &k, 1.99 / omega, 10_000, &no_force, &s, &mut NoRecord).is_ok());
        let r = cdm_run(&m, &k, 2.01 / omega, 10_000, &no_force, &s, &mut NoRecord);
        assert!(matches!(r, Err(Error::Divergence { .. })));
    }

    #[test]
    fn explicit_newmark_equals_cdm() {
        let (m, k, s) = random_spd(10, 4);
        let p = NewmarkParams { beta: 0.0, gamma: 0.5, dt: 0.05, n_t: 100 };
        let (r1, a) = trajectory(|rec| newmark_run(&m, &k, &p, &ramp, &s, rec));
        let (r2, b) = trajectory(|rec| cdm_run(&m, &k, p.dt, p.n_t, &ramp, &s, rec));
        r1.unwrap();
        r2.unwrap();
        assert!(max_diff(&a, &b) < 1e-10);
    }

    #[test]
    fn imex_degenerate_partitions() {
        // Empty c-set: central differences on a diagonal mass.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 10;
        let (_, k, s) = random_spd(n, 5);
        let md = SparseSym::from_diagonal(&(0..n).map(|_| rng.gen_range(0.5..2.0)).collect::<Vec<_>>());
        let p = NewmarkParams::trapezoidal(0.05, 100);
        let all_d = DofPartition { d: (0..n).collect(), c: vec![] };
        let (r1, a) = trajectory(|rec| imex_run(&md, &k, &all_d, &p, &ramp, &s, rec));
        let (r2, b) = trajectory(|rec| cdm_run(&md, &k, p.dt, p.n_t, &ramp, &s, rec));
        assert_eq!(r1.unwrap().factor_dim, 0);
        r2.unwrap();
        assert!(max_diff(&a, &b) < 1e-12);
        // Empty d-set: trapezoidal Newmark with a consistent mass.
        let (m, k, s) = random_spd(n, 6);
        let all_c = DofPartition { d: vec![], c: (0..n).collect() };
        let (r1, a) = trajectory(|rec| imex_run(&m, &k, &all_c, &p, &ramp, &s, rec));
        let (r2, b) = trajectory(|rec| newmark_run(&m, &k, &p, &ramp, &s, rec));
        assert_eq!(r1.unwrap().factor_dim, n);
        r2.unwrap();
        assert!(max_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn imex_rejects_consistent_uncut_mass() {
        let (m, k, s) = random_spd(4, 7);
        let part = DofPartition { d: vec![0, 1], c: vec![2, 3] };
        let r = imex_run(&m, &k, &part, &NewmarkParams::trapezoidal(0.01, 1), &no_force, &s, &mut NoRecord);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    /// Three linear bar elements on [0, 3], free ends; the middle element is
    /// flagged as cut and carries a consistent mass.
    fn bar_chain() -> (SparseSym, SparseSym, DofPartition) {
        let mut m = DMatrix::zeros(4, 4);
        let mut k = DMatrix::zeros(4, 4);
        for e in 0..3 {
            let me = if e == 1 { DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]) / 6.0 } else { DMatrix::from_diagonal_element(2, 2, 0.5) };
            let ke = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
            for a in 0..2 {
                for b in 0..2 {
                    m[(e + a, e + b)] += me[(a, b)];
                    k[(e + a, e + b)] += ke[(a, b)];
                }
            }
        }
        // The cut element couples DOFs 1 and 2, so both are implicit.
        (SparseSym::from_dense(&m), SparseSym::from_dense(&k), DofPartition { d: vec![0, 3], c: vec![1, 2] })
    }

    #[test]
    fn imex_converges_to_the_implicit_solution() {
        let (m, k, part) = bar_chain();
        let s = State::new(vec![1.0, 0.0, 0.0, -0.5], vec![0.0; 4]);
        let tf = 2.0;
        let run_imex = |dt: f64| {
            let n_t = (tf / dt).round() as usize;
            imex_run(&m, &k, &part, &NewmarkParams::trapezoidal(dt, n_t), &no_force, &s, &mut NoRecord).unwrap().final_state.psi
        };
        let reference = newmark_run(&m, &k, &NewmarkParams::trapezoidal(1e-5, 200_000), &no_force, &s, &mut NoRecord).unwrap().final_state.psi;
        let err = |dt: f64| run_imex(dt).iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let (e1, e2) = (err(0.02), err(0.01));
        assert!((3.5..=4.5).contains(&(e1 / e2)), "{e1} {e2}");
    }

    #[test]
    fn select_dt_examples() {
        assert!((select_dt(1e-3, 1e-3) - 9e-4).abs() < 1e-18);
        assert_eq!(select_dt(f64::INFINITY, 1e-3), 1e-3);
        assert!((select_dt(4.17564e-3, 6.8966e-3) - 3.758076e-3).abs() < 1e-9);
    }

    #[test]
    fn linear_in_initial_data() {
        let (m, k, s) = random_spd(8, 8);
        let p = NewmarkParams::trapezoidal(0.05, 40);
        let double = State::new(s.psi.iter().map(|v| 2.0 * v).collect(), s.psi_dot.iter().map(|v| 2.0 * v).collect());
        let a = newmark_run(&m, &k, &p, &no_force, &s, &mut NoRecord).unwrap().final_state.psi;
        let b = newmark_run(&m, &k, &p, &no_force, &double, &mut NoRecord).unwrap().final_state.psi;
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x - y).abs() < 1e-12 * (1.0 + y.abs()));
        }
    }
}
