use std::io::{Read, Write};

use crate::assembly::{DiscreteSystem, Grid};
use crate::error::{Error, Result};
use crate::geometry::Point;

/// Observer kind; the exact solution only differs between kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverKind {
    Source,
    Center,
    Face,
    Edge,
    Corner,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverSet {
    pub points: Vec<(ObserverKind, Point)>,
}

impl ObserverSet {
    /// Source, centre, face, four edge centres and four corners of the cube,
    /// in the cube-centred local frame.
    pub fn benchmark(l_p: f64) -> Self {
        let h = 0.5 * l_p;
        let mut points = vec![
            (ObserverKind::Source, Point::new(-h, 0.0, 0.0)),
            (ObserverKind::Center, Point::zeros()),
            (ObserverKind::Face, Point::new(h, 0.0, 0.0)),
        ];
        for (s2, s3) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
            points.push((ObserverKind::Edge, Point::new(0.0, s2 * h, s3 * h)));
        }
        for (s2, s3) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
            points.push((ObserverKind::Corner, Point::new(h, s2 * h, s3 * h)));
        }
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Interpolation weights over the compact DOFs for every observer.
    pub fn weights(&self, grid: &Grid, system: &DiscreteSystem) -> Result<Vec<Vec<(usize, f64)>>> {
        self.points
            .iter()
            .map(|(kind, x)| {
                let xg = grid.from_local(x);
                let (e, xi) = grid.locate(&xg).ok_or_else(|| Error::config(format!("{kind:?} observer at {x:?} lies outside the discretization")))?;
                let (vals, _) = grid.eval_element(e, &xi);
                Ok(system.element_dofs(e).iter().copied().zip(vals).filter(|&(_, v)| v != 0.0).collect())
            })
            .collect()
    }
}

/// Observer samples: `values[i][j] = psi(x_i, t_j)` at `times[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl SignalMatrix {
    pub fn new(n_p: usize) -> Self {
        Self { times: Vec::new(), values: vec![Vec::new(); n_p] }
    }

    pub fn n_p(&self) -> usize {
        self.values.len()
    }

    pub fn n_s(&self) -> usize {
        self.times.len()
    }

    /// Every `n_s() / n_s`-th sample; `n_s` must divide the sample count.
    pub fn resample(&self, n_s: usize) -> Result<SignalMatrix> {
        if n_s == 0 || self.n_s() % n_s != 0 {
            return Err(Error::invalid(format!("cannot resample {} samples to {n_s}", self.n_s())));
        }
        let stride = self.n_s() / n_s;
        let pick = |v: &Vec<f64>| (1..=n_s).map(|j| v[j * stride - 1]).collect();
        Ok(SignalMatrix { times: pick(&self.times), values: self.values.iter().map(pick).collect() })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n_p()).map(|i| format!("psi_{i}")));
        wr.write_record(&header)?;
        for (j, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:e}")];
            row.extend(self.values.iter().map(|v| format!("{:e}", v[j])));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<SignalMatrix> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        if header.is_empty() || &header[0] != "t" {
            return Err(Error::Parse("signals file must start with a 't' column".into()));
        }
        for (i, h) in header.iter().enumerate().skip(1) {
            if h != format!("psi_{i}") {
                return Err(Error::Parse(format!("unexpected column '{h}', expected psi_{i}")));
            }
        }
        let n_p = header.len() - 1;
        let mut s = SignalMatrix::new(n_p);
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != n_p + 1 {
                return Err(Error::Parse(format!("row with {} fields, expected {}", rec.len(), n_p + 1)));
            }
            let parse = |f: &str| f.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad number '{f}': {e}")));
            let t = parse(&rec[0])?;
            if !t.is_finite() || s.times.last().is_some_and(|&last| t <= last) {
                return Err(Error::Parse("times must be finite and strictly increasing".into()));
            }
            s.times.push(t);
            for i in 0..n_p {
                let v = parse(&rec[i + 1])?;
                if !v.is_finite() {
                    return Err(Error::Parse(format!("non-finite value in column psi_{}", i + 1)));
                }
                s.values[i].push(v);
            }
        }
        Ok(s)
    }
}

/// Mean over observers of `|psi - psi_ref|_2 / |psi_ref|_2`.
pub fn relative_error(sig: &SignalMatrix, reference: &SignalMatrix) -> Result<f64> {
    if sig.n_p() != reference.n_p() || sig.n_s() != reference.n_s() || sig.n_p() == 0 {
        return Err(Error::invalid(format!(
            "signal shapes differ: {}x{} vs {}x{}",
            sig.n_p(),
            sig.n_s(),
            reference.n_p(),
            reference.n_s()
        )));
    }
    let tol = 1e-9 * reference.times.last().copied().unwrap_or(1.0).abs().max(1.0);
    if sig.times.iter().zip(&reference.times).any(|(a, b)| (a - b).abs() > tol) {
        return Err(Error::invalid("signals are sampled at different times"));
    }
    let mut sum = 0.0;
    for (i, (s, r)) in sig.values.iter().zip(&reference.values).enumerate() {
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn == 0.0 {
            return Err(Error::invalid(format!("reference signal {} is identically zero", i + 1)));
        }
        let dn = s.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        sum += dn / rn;
    }
    Ok(sum / sig.n_p() as f64)
}

/// Records observer values at `t_j = j T / n_s`, i.e. every `n_t / n_s`
/// steps (no interpolation in time).
pub struct ObserverSampler<'a> {
    weights: &'a [Vec<(usize, f64)>],
    stride: usize,
    dt: f64,
    pub signals: SignalMatrix,
}

impl<'a> ObserverSampler<'a> {
    pub fn new(weights: &'a [Vec<(usize, f64)>], n_t: usize, n_s: usize, dt: f64) -> Result<Self> {
        if n_s == 0 || n_t % n_s != 0 {
            return Err(Error::config(format!("number of steps {n_t} is not a multiple of the sample count {n_s}")));
        }
        Ok(Self { weights, stride: n_t / n_s, dt, signals: SignalMatrix::new(weights.len()) })
    }
}

impl crate::timeint::Recorder for ObserverSampler<'_> {
    fn record(&mut self, step: usize, psi: &[f64]) {
        if step == 0 || step % self.stride != 0 {
            return;
        }
        self.signals.times.push(step as f64 * self.dt);
        for (row, w) in self.signals.values.iter_mut().zip(self.weights) {
            row.push(w.iter().map(|&(d, v)| v * psi[d]).sum());
        }
    }
}

/// Samples a stored trajectory (`trajectory[k]` at step `k`).
pub fn sample_observers(trajectory: &[Vec<f64>], weights: &[Vec<(usize, f64)>], n_s: usize, dt: f64) -> Result<SignalMatrix> {
    use crate::timeint::Recorder;
    let n_t = trajectory.len().saturating_sub(1);
    let mut s = ObserverSampler::new(weights, n_t, n_s, dt)?;
    for (k, psi) in trajectory.iter().enumerate() {
        s.record(k, psi);
    }
    Ok(s.signals)
}
