//! One-dimensional shape functions and quadrature rules.
//!
//! Two families are supported: Lagrange polynomials through the
//! Gauss-Lobatto-Legendre points (spectral elements) and maximally smooth
//! open-uniform B-splines. Both are evaluated element by element on the
//! reference interval `[-1, 1]`; 3D functions are tensor products.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    #[serde(alias = "gll", alias = "lagrange", alias = "sem")]
    GllLagrange,
    #[serde(alias = "bspline", alias = "iga")]
    BSpline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub family: BasisFamily,
    pub p: usize,
    pub n_e: usize,
}

impl BasisSpec {
    pub fn new(family: BasisFamily, p: usize, n_e: usize) -> Result<Self> {
        if p < 1 {
            return Err(Error::config(format!("polynomial degree must be >= 1, got {p}")));
        }
        if n_e < 1 {
            return Err(Error::config("need at least one element per direction"));
        }
        Ok(Self { family, p, n_e })
    }

    pub fn functions_per_direction(&self) -> usize {
        match self.family {
            BasisFamily::GllLagrange => self.n_e * self.p + 1,
            BasisFamily::BSpline => self.n_e + self.p,
        }
    }

    pub fn local_functions(&self) -> usize {
        self.p + 1
    }
}

/// One-dimensional quadrature rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // P'_n(+-1) = (+-1)^(n+1) n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX: usize = 100;

/// Gauss-Legendre rule with `q` points.
pub fn gl_rule(q: usize) -> Result<Rule1D> {
    match q {
        0 => Err(Error::invalid("Gauss-Legendre rule needs at least one point")),
        1 => Ok(Rule1D { nodes: vec![0.0], weights: vec![2.0] }),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            Ok(Rule1D { nodes: vec![-a, a], weights: vec![1.0, 1.0] })
        }
        _ => {
            let mut nodes = vec![0.0; q];
            let mut weights = vec![0.0; q];
            let qf = q as f64;
            for i in 0..(q + 1) / 2 {
                let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
                for _ in 0..NEWTON_MAX {
                    let (p, dp) = legendre(q, x);
                    let dx = p / dp;
                    x -= dx;
                    if dx.abs() < NEWTON_TOL {
                        break;
                    }
                }
                let (_, dp) = legendre(q, x);
                let w = 2.0 / ((1.0 - x * x) * dp * dp);
                nodes[i] = -x;
                nodes[q - 1 - i] = x;
                weights[i] = w;
                weights[q - 1 - i] = w;
            }
            if q % 2 == 1 {
                nodes[q / 2] = 0.0;
            }
            Ok(Rule1D { nodes, weights })
        }
    }
}

/// Gauss-Lobatto-Legendre rule with `p + 1` points: the end points and the
/// roots of `P'_p`.
pub fn gll_rule(p: usize) -> Result<Rule1D> {
    match p {
        0 => Err(Error::invalid("Gauss-Lobatto-Legendre rule needs degree >= 1")),
        1 => Ok(Rule1D { nodes: vec![-1.0, 1.0], weights: vec![1.0, 1.0] }),
        2 => Ok(Rule1D { nodes: vec![-1.0, 0.0, 1.0], weights: vec![1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0] }),
        _ => {
            let n = p + 1;
            let pf = p as f64;
            let mut nodes = vec![0.0; n];
            nodes[0] = -1.0;
            nodes[p] = 1.0;
            for i in 1..(n + 1) / 2 {
                // Chebyshev-Gauss-Lobatto start, Newton on P'_p using
                // (1 - x^2) P''_p = 2x P'_p - p(p+1) P_p.
                let mut x = (std::f64::consts::PI * i as f64 / pf).cos();
                for _ in 0..NEWTON_MAX {
                    let (lp, dp) = legendre(p, x);
                    let d2p = (2.0 * x * dp - pf * (pf + 1.0) * lp) / (1.0 - x * x);
                    let dx = dp / d2p;
                    x -= dx;
                    if dx.abs() < NEWTON_TOL {
                        break;
                    }
                }
                nodes[p - i] = x;
                nodes[i] = -x;
            }
            if n % 2 == 1 {
                nodes[p / 2] = 0.0;
            }
            let weights = nodes
                .iter()
                .map(|&x| {
                    let (lp, _) = legendre(p, x);
                    2.0 / (pf * (pf + 1.0) * lp * lp)
                })
                .collect();
            Ok(Rule1D { nodes, weights })
        }
    }
}

/// Lagrange basis through a fixed node set.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
    inv_denominators: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(nodes: &[f64]) -> Self {
        let inv_denominators = (0..nodes.len())
            .map(|i| {
                let d: f64 = (0..nodes.len()).filter(|&j| j != i).map(|j| nodes[i] - nodes[j]).product();
                1.0 / d
            })
            .collect();
        Self { nodes: nodes.to_vec(), inv_denominators }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn eval(&self, xi: f64, values: &mut [f64], derivatives: &mut [f64]) {
        let n = self.nodes.len();
        let diff: Vec<f64> = self.nodes.iter().map(|&x| xi - x).collect();
        for i in 0..n {
            let mut v = 1.0;
            let mut d = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                // product rule, accumulated without dividing by (xi - x_j)
                d = d * diff[j] + v;
                v *= diff[j];
            }
            values[i] = v * self.inv_denominators[i];
            derivatives[i] = d * self.inv_denominators[i];
        }
    }
}

/// Values and derivatives of the Lagrange polynomials through `nodes` at `xi`.
pub fn lagrange_eval(nodes: &[f64], xi: f64) -> (Vec<f64>, Vec<f64>) {
    let basis = LagrangeBasis::new(nodes);
    let mut v = vec![0.0; nodes.len()];
    let mut d = vec![0.0; nodes.len()];
    basis.eval(xi, &mut v, &mut d);
    (v, d)
}

/// Open uniform knot vector with `n_e` spans on `[a, b]`.
pub fn open_uniform_knots(n_e: usize, p: usize, a: f64, b: f64) -> Vec<f64> {
    let mut knots = Vec::with_capacity(n_e + 2 * p + 1);
    knots.extend(std::iter::repeat(a).take(p + 1));
    for i in 1..n_e {
        knots.push(a + (b - a) * i as f64 / n_e as f64);
    }
    knots.extend(std::iter::repeat(b).take(p + 1));
    knots
}

/// Index of the knot span containing `x` (the last non-empty span for the
/// right end point).
pub fn find_span(knots: &[f64], p: usize, x: f64) -> usize {
    let n = knots.len() - p - 1;
    if x >= knots[n] {
        return n - 1;
    }
    if x <= knots[p] {
        return p;
    }
    let (mut lo, mut hi) = (p, n);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if x < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Nonzero B-spline values and first derivatives on a given span.
fn bspline_span_eval(knots: &[f64], p: usize, span: usize, x: f64, values: &mut [f64], derivatives: &mut [f64]) {
    // Triangular table of basis functions of increasing degree.
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            // lower triangle holds knot differences
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    for j in 0..=p {
        values[j] = ndu[j][p];
    }
    if p == 0 {
        derivatives[0] = 0.0;
        return;
    }
    let pf = p as f64;
    for r in 0..=p {
        let mut d = 0.0;
        if r >= 1 {
            d += ndu[r - 1][p - 1] / ndu[p][r - 1];
        }
        if r < p {
            d -= ndu[r][p - 1] / ndu[p][r];
        }
        derivatives[r] = pf * d;
    }
}

/// Span index plus the `p + 1` nonzero B-spline values and derivatives at `x`.
pub fn bspline_eval(knots: &[f64], p: usize, x: f64) -> (usize, Vec<f64>, Vec<f64>) {
    let span = find_span(knots, p, x);
    let mut v = vec![0.0; p + 1];
    let mut d = vec![0.0; p + 1];
    bspline_span_eval(knots, p, span, x, &mut v, &mut d);
    (span, v, d)
}

/// Element-wise evaluator for one coordinate direction.
#[derive(Debug, Clone)]
pub enum Basis1D {
    Lagrange { p: usize, n_e: usize, basis: LagrangeBasis },
    BSpline { p: usize, n_e: usize, knots: Vec<f64> },
}

impl Basis1D {
    pub fn new(spec: &BasisSpec) -> Result<Self> {
        Ok(match spec.family {
            BasisFamily::GllLagrange => {
                let rule = gll_rule(spec.p)?;
                Basis1D::Lagrange { p: spec.p, n_e: spec.n_e, basis: LagrangeBasis::new(&rule.nodes) }
            }
            // Knots in element units so that span e covers [e, e + 1].
            BasisFamily::BSpline => Basis1D::BSpline {
                p: spec.p,
                n_e: spec.n_e,
                knots: open_uniform_knots(spec.n_e, spec.p, 0.0, spec.n_e as f64),
            },
        })
    }

    pub fn degree(&self) -> usize {
        match self {
            Basis1D::Lagrange { p, .. } | Basis1D::BSpline { p, .. } => *p,
        }
    }

    pub fn n_e(&self) -> usize {
        match self {
            Basis1D::Lagrange { n_e, .. } | Basis1D::BSpline { n_e, .. } => *n_e,
        }
    }

    pub fn n_functions(&self) -> usize {
        match self {
            Basis1D::Lagrange { p, n_e, .. } => n_e * p + 1,
            Basis1D::BSpline { p, n_e, .. } => n_e + p,
        }
    }

    /// Global index of local function `a` of element `elem`.
    pub fn global_index(&self, elem: usize, a: usize) -> usize {
        match self {
            Basis1D::Lagrange { p, .. } => elem * p + a,
            Basis1D::BSpline { .. } => elem + a,
        }
    }

    /// Values and derivatives with respect to the reference coordinate
    /// `xi in [-1, 1]` of the `p + 1` functions supported on `elem`.
    pub fn eval(&self, elem: usize, xi: f64, values: &mut [f64], derivatives: &mut [f64]) {
        match self {
            Basis1D::Lagrange { basis, .. } => basis.eval(xi, values, derivatives),
            Basis1D::BSpline { p, knots, .. } => {
                let x = elem as f64 + 0.5 * (xi + 1.0);
                bspline_span_eval(knots, *p, elem + p, x, values, derivatives);
                for d in derivatives.iter_mut() {
                    *d *= 0.5;
                }
            }
        }
    }
}
