//! Cut-cell mass stabilization and lumping.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::jacobi_eig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Lumping {
    #[default]
    None,
    #[serde(alias = "rowsum", alias = "row-sum")]
    RowSum,
    #[serde(alias = "HRZ")]
    Hrz,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilizationParams {
    pub alpha: f64,
    pub epsilon: f64,
    pub f_lambda: f64,
    pub lumping: Lumping,
}

pub const DEFAULT_F_LAMBDA: f64 = 1e-2;

impl Default for StabilizationParams {
    fn default() -> Self {
        Self { alpha: 1e-8, epsilon: 0.0, f_lambda: DEFAULT_F_LAMBDA, lumping: Lumping::None }
    }
}

impl StabilizationParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::config(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if !(self.f_lambda > 0.0 && self.f_lambda < 1.0) {
            return Err(Error::config(format!("f_lambda must lie in (0, 1), got {}", self.f_lambda)));
        }
        if self.epsilon > 0.0 && self.alpha <= 0.0 {
            return Err(Error::config("eigenvalue stabilization requires alpha > 0"));
        }
        Ok(())
    }
}

/// `M_o + alpha (M_f - M_o)`.
pub fn alpha_combine(m_o: &DMatrix<f64>, m_f: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    m_o + (m_f - m_o) * alpha
}

/// Split of an element mass matrix into small and large eigenpairs.
#[derive(Debug, Clone)]
pub struct EvsDecomposition {
    pub phi_s: DMatrix<f64>,
    pub phi_l: DMatrix<f64>,
    pub lambda_s: DVector<f64>,
    pub lambda_l: DVector<f64>,
}

impl EvsDecomposition {
    /// Eigenpairs with `lambda < f_lambda * lambda_max` go to the small block.
    pub fn new(m_o: &DMatrix<f64>, f_lambda: f64, element: usize) -> Result<Self> {
        let (phi, lambda) = jacobi_eig(m_o).ok_or(Error::EigenNoConvergence { element, sweeps: crate::linalg::JACOBI_MAX_SWEEPS })?;
        let n = lambda.len();
        let lmax = lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let n_s = lambda.iter().take_while(|&&l| l < f_lambda * lmax).count();
        Ok(Self {
            phi_s: phi.columns(0, n_s).into_owned(),
            phi_l: phi.columns(n_s, n - n_s).into_owned(),
            lambda_s: lambda.rows(0, n_s).into_owned(),
            lambda_l: lambda.rows(n_s, n - n_s).into_owned(),
        })
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.phi_s * DMatrix::from_diagonal(&self.lambda_s) * self.phi_s.transpose()
            + &self.phi_l * DMatrix::from_diagonal(&self.lambda_l) * self.phi_l.transpose()
    }
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Eigenvalue stabilization: lifts the small-eigenvalue subspace of `M_o` by
/// `epsilon` times a projector scaled to the magnitude of `M_f`.
pub fn evs_stabilize(m_o: &DMatrix<f64>, m_f: &DMatrix<f64>, epsilon: f64, f_lambda: f64, element: usize) -> Result<DMatrix<f64>> {
    if epsilon == 0.0 {
        return Ok(m_o.clone());
    }
    let d = EvsDecomposition::new(m_o, f_lambda, element)?;
    if d.phi_s.ncols() == 0 {
        return Ok(m_o.clone());
    }
    let ms = &d.phi_s * d.phi_s.transpose();
    let scale = max_abs(m_f) / max_abs(&ms);
    let mut m = m_o + ms * (epsilon * scale);
    let sym = (&m + m.transpose()) * 0.5;
    m.copy_from(&sym);
    Ok(m)
}

/// Row sums of `m`, i.e. `m * 1`.
pub fn row_sum_lump(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum()))
}

/// Diagonal scaled so that it sums to `m_e`.
pub fn hrz_lump(m: &DMatrix<f64>, m_e: f64) -> Result<DVector<f64>> {
    let diag = m.diagonal();
    let trace = diag.sum();
    if !(trace > 0.0) || !(m_e > 0.0) {
        return Err(Error::invalid(format!("HRZ lumping needs positive trace and mass, got {trace} and {m_e}")));
    }
    Ok(diag * (m_e / trace))
}

/// Element mass after stabilization, either dense or lumped to a diagonal.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementMass {
    Dense(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

/// Per-element mass pipeline. `m_o` already carries the indicator weighting
/// through quadrature; EVS acts on cut elements only; lumping acts on cut
/// elements for GLL-Lagrange and on every element for B-splines
/// (`lump_this_element` encodes that choice).
pub fn stabilize_element_mass(
    m_o: &DMatrix<f64>,
    m_f: &DMatrix<f64>,
    is_cut: bool,
    lump_this_element: bool,
    params: &StabilizationParams,
    element: usize,
) -> Result<ElementMass> {
    let m = if is_cut { evs_stabilize(m_o, m_f, params.epsilon, params.f_lambda, element)? } else { m_o.clone() };
    if !lump_this_element {
        return Ok(ElementMass::Dense(m));
    }
    Ok(match params.lumping {
        Lumping::None => ElementMass::Dense(m),
        Lumping::RowSum => ElementMass::Diagonal(row_sum_lump(&m)),
        // Total element mass is that of the indicator-weighted matrix.
        Lumping::Hrz => ElementMass::Diagonal(hrz_lump(&m, m_o.sum())?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bar_mass(h: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]) * (h / 6.0)
    }

    fn min_eig(a: &DMatrix<f64>) -> f64 {
        a.clone().symmetric_eigenvalues().min()
    }

    /// Mass matrix of a badly cut 1D quadratic element: only the first 1%
    /// of the element is physical.
    fn sliver_pair() -> (DMatrix<f64>, DMatrix<f64>) {
        let gl = crate::basis::gl_rule(3).unwrap();
        let nodes = crate::basis::gll_rule(2).unwrap().nodes;
        let mut m_o = DMatrix::zeros(3, 3);
        let mut m_f = DMatrix::zeros(3, 3);
        let (a, b) = (-1.0, -0.98);
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let (n, _) = crate::basis::lagrange_eval(&nodes, *x);
            let xs = a + 0.5 * (x + 1.0) * (b - a);
            let (ns, _) = crate::basis::lagrange_eval(&nodes, xs);
            for i in 0..3 {
                for j in 0..3 {
                    m_f[(i, j)] += w * n[i] * n[j];
                    m_o[(i, j)] += w * 0.5 * (b - a) * ns[i] * ns[j];
                }
            }
        }
        (m_o, m_f)
    }

    #[test]
    fn alpha_combine_examples() {
        let m_o = DMatrix::identity(2, 2);
        let m_f = DMatrix::identity(2, 2) * 3.0;
        assert_eq!(alpha_combine(&m_o, &m_f, 0.0), m_o);
        assert_eq!(alpha_combine(&m_o, &m_f, 1.0), m_f);
        assert_eq!(alpha_combine(&m_o, &m_f, 0.5), DMatrix::identity(2, 2) * 2.0);
    }

    #[test]
    fn evs_hand_case() {
        let m_o = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-8]));
        let m_f = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let m = evs_stabilize(&m_o, &m_f, 1e-2, 1e-4, 0).unwrap();
        assert_eq!(m, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-8 + 2e-2])));
    }

    #[test]
    fn evs_trivial_cases() {
        let (m_o, m_f) = sliver_pair();
        assert_eq!(evs_stabilize(&m_o, &m_f, 0.0, 1e-2, 0).unwrap(), m_o);
        assert_eq!(evs_stabilize(&m_o, &m_f, 1e-2, 1e-300, 0).unwrap(), m_o);
        let well = bar_mass(1.0);
        assert_eq!(evs_stabilize(&well, &well, 1e-2, 0.3, 0).unwrap(), well);
    }

    #[test]
    fn evs_monotone_in_epsilon() {
        let (m_o, m_f) = sliver_pair();
        let mut last = min_eig(&m_o);
        for eps in [0.0, 1e-6, 1e-4, 1e-2] {
            let m = evs_stabilize(&m_o, &m_f, eps, 1e-2, 0).unwrap();
            let l = min_eig(&m);
            assert!(l >= last - 1e-18, "eps {eps}: {l} < {last}");
            last = l;
        }
        assert!(last > 1e3 * min_eig(&m_o));
    }

    #[test]
    fn decomposition_reconstructs() {
        let (m_o, _) = sliver_pair();
        let d = EvsDecomposition::new(&m_o, 1e-2, 0).unwrap();
        assert!((d.reconstruct() - &m_o).norm() <= 1e-9 * m_o.norm());
        let lmax = d.lambda_l.max();
        assert!(d.lambda_s.iter().all(|&l| l < 1e-2 * lmax));
        assert!(d.lambda_l.iter().all(|&l| l >= 1e-2 * lmax));
        assert!(d.phi_s.ncols() >= 1);
    }

    #[test]
    fn lumping_closed_forms() {
        let h = 0.2;
        let m = bar_mass(h);
        let rs = row_sum_lump(&m);
        assert_relative_eq!(rs[0], h / 2.0, epsilon = 1e-15);
        assert_relative_eq!(rs[1], h / 2.0, epsilon = 1e-15);
        let hrz = hrz_lump(&m, h).unwrap();
        assert_relative_eq!(hrz[0], h / 2.0, epsilon = 1e-15);
        assert_relative_eq!(hrz[1], h / 2.0, epsilon = 1e-15);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, 0.7]));
        assert_eq!(hrz_lump(&d, 1.0).unwrap(), d.diagonal());
        assert_eq!(row_sum_lump(&DMatrix::identity(3, 3)), DVector::from_element(3, 1.0));
        assert!(hrz_lump(&DMatrix::zeros(2, 2), 1.0).is_err());
    }

    #[test]
    fn hrz_conserves_mass_and_row_sum_is_m_times_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(2..30);
            let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let m = &b * b.transpose() + DMatrix::identity(n, n);
            let m_e: f64 = rng.gen_range(0.1..10.0);
            let d = hrz_lump(&m, m_e).unwrap();
            assert!((d.sum() - m_e).abs() <= 1e-12 * m_e);
            assert_eq!(row_sum_lump(&m), &m * DVector::from_element(n, 1.0));
        }
    }

    #[test]
    fn params_validation() {
        assert!(StabilizationParams::default().validate().is_ok());
        let bad = StabilizationParams { alpha: 0.0, epsilon: 1e-4, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(StabilizationParams { alpha: 2.0, ..Default::default() }.validate().is_err());
        assert!(StabilizationParams { f_lambda: 1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn pipeline_respects_element_kind() {
        let (m_o, m_f) = sliver_pair();
        let p = StabilizationParams { alpha: 1e-8, epsilon: 1e-2, f_lambda: 1e-2, lumping: Lumping::Hrz };
        match stabilize_element_mass(&m_o, &m_f, false, false, &p, 0).unwrap() {
            ElementMass::Dense(m) => assert_eq!(m, m_o),
            _ => panic!(),
        }
        match stabilize_element_mass(&m_o, &m_f, true, true, &p, 0).unwrap() {
            ElementMass::Diagonal(d) => assert!((d.sum() - m_o.sum()).abs() <= 1e-12 * m_o.sum()),
            _ => panic!(),
        }
    }
}
