//! Grids, element matrices, global assembly and the benchmark load.
//!
//! Element-local functions are ordered with the x index running fastest,
//! and global DOFs are numbered lexicographically in the same way before
//! the DOFs of discarded elements are compacted away.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{gl_rule, gll_rule, Basis1D, BasisFamily, BasisSpec};
use crate::error::{Error, Result};
use crate::geometry::{Box3, ElementClass, ImmersedGeometry, Point};
use crate::linalg::{Banded1D, SparseSym, TensorStiffness};
use crate::quadrature::{element_leaves, ElementRule};
use crate::stabilization::{stabilize_element_mass, ElementMass, Lumping, StabilizationParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    /// Cartesian grid over the extended cube `[0, l_e]^3` in global coordinates.
    Immersed,
    /// Grid over the physical cube in its local frame; every element is inside.
    BoundaryFitted,
}

#[derive(Debug, Clone)]
pub struct Grid {
    spec: BasisSpec,
    basis: Basis1D,
    geometry: ImmersedGeometry,
    mode: GridMode,
    origin: Point,
    h: f64,
    classes: Vec<ElementClass>,
}

impl Grid {
    pub fn immersed(spec: BasisSpec, geometry: ImmersedGeometry) -> Result<Self> {
        let h = geometry.l_e() / spec.n_e as f64;
        let mut grid = Self { basis: Basis1D::new(&spec)?, spec, geometry, mode: GridMode::Immersed, origin: Point::zeros(), h, classes: Vec::new() };
        grid.classes = (0..grid.n_elements()).into_par_iter().map(|e| grid.geometry.classify_box(&grid.element_box(e))).collect();
        Ok(grid)
    }

    pub fn boundary_fitted(spec: BasisSpec, geometry: ImmersedGeometry) -> Result<Self> {
        let h = geometry.l_p() / spec.n_e as f64;
        let n = spec.n_e.pow(3);
        Ok(Self {
            basis: Basis1D::new(&spec)?,
            spec,
            origin: Point::repeat(-0.5 * geometry.l_p()),
            geometry,
            mode: GridMode::BoundaryFitted,
            h,
            classes: vec![ElementClass::Inside; n],
        })
    }

    pub fn new(spec: BasisSpec, geometry: ImmersedGeometry, mode: GridMode) -> Result<Self> {
        match mode {
            GridMode::Immersed => Self::immersed(spec, geometry),
            GridMode::BoundaryFitted => Self::boundary_fitted(spec, geometry),
        }
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn basis(&self) -> &Basis1D {
        &self.basis
    }

    pub fn geometry(&self) -> &ImmersedGeometry {
        &self.geometry
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_e(&self) -> usize {
        self.spec.n_e
    }

    pub fn n_elements(&self) -> usize {
        self.spec.n_e.pow(3)
    }

    pub fn element_index(&self, e: usize) -> [usize; 3] {
        let n = self.spec.n_e;
        [e % n, (e / n) % n, e / (n * n)]
    }

    /// Element box in grid coordinates (global for immersed grids, local for
    /// boundary-fitted ones).
    pub fn element_box(&self, e: usize) -> Box3 {
        let [i, j, k] = self.element_index(e);
        let lo = self.origin + Point::new(i as f64, j as f64, k as f64) * self.h;
        Box3::from_corners(lo, lo.add_scalar(self.h))
    }

    pub fn class(&self, e: usize) -> ElementClass {
        self.classes[e]
    }

    pub fn classes(&self) -> &[ElementClass] {
        &self.classes
    }

    pub fn kept_elements(&self) -> Vec<usize> {
        (0..self.n_elements()).filter(|&e| self.classes[e] != ElementClass::Outside).collect()
    }

    pub fn n_cut(&self) -> usize {
        self.classes.iter().filter(|&&c| c == ElementClass::Cut).count()
    }

    /// Local frame coordinates of a grid point.
    pub fn to_local(&self, x: &Point) -> Point {
        match self.mode {
            GridMode::Immersed => self.geometry.to_local(x),
            GridMode::BoundaryFitted => *x,
        }
    }

    pub fn from_local(&self, x_local: &Point) -> Point {
        match self.mode {
            GridMode::Immersed => self.geometry.to_global(x_local),
            GridMode::BoundaryFitted => *x_local,
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        match self.mode {
            GridMode::Immersed => self.geometry.contains(x),
            GridMode::BoundaryFitted => true,
        }
    }

    /// Reference coordinates of `x` inside element `e`.
    pub fn to_reference(&self, e: usize, x: &Point) -> [f64; 3] {
        let b = self.element_box(e);
        std::array::from_fn(|d| 2.0 * (x[d] - b.lo[d]) / self.h - 1.0)
    }

    /// A kept element whose closed box contains `x`, with reference coordinates.
    pub fn locate(&self, x: &Point) -> Option<(usize, [f64; 3])> {
        let n = self.spec.n_e;
        let mut candidates: [Vec<usize>; 3] = Default::default();
        for d in 0..3 {
            let s = (x[d] - self.origin[d]) / self.h;
            if !(-1e-9..=n as f64 + 1e-9).contains(&s) {
                return None;
            }
            let i = (s.floor().max(0.0) as usize).min(n - 1);
            candidates[d].push(i);
            if (s - i as f64).abs() < 1e-9 && i > 0 {
                candidates[d].push(i - 1);
            }
            if (s - (i + 1) as f64).abs() < 1e-9 && i + 1 < n {
                candidates[d].push(i + 1);
            }
        }
        for &k in &candidates[2] {
            for &j in &candidates[1] {
                for &i in &candidates[0] {
                    let e = i + n * (j + n * k);
                    if self.classes[e] != ElementClass::Outside {
                        let xi = self.to_reference(e, x).map(|v| v.clamp(-1.0, 1.0));
                        return Some((e, xi));
                    }
                }
            }
        }
        None
    }

    /// Uncompacted lexicographic indices of the functions supported on `e`.
    pub fn element_full_dofs(&self, e: usize) -> Vec<usize> {
        let idx = self.element_index(e);
        let p1 = self.spec.p + 1;
        let n1 = self.basis.n_functions();
        let mut out = Vec::with_capacity(p1 * p1 * p1);
        for c in 0..p1 {
            for b in 0..p1 {
                for a in 0..p1 {
                    let gx = self.basis.global_index(idx[0], a);
                    let gy = self.basis.global_index(idx[1], b);
                    let gz = self.basis.global_index(idx[2], c);
                    out.push(gx + n1 * (gy + n1 * gz));
                }
            }
        }
        out
    }

    /// Tensor-product values and gradients (grid coordinates) of the local
    /// functions of `e` at reference point `xi`.
    pub fn eval_element(&self, e: usize, xi: &[f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
        let idx = self.element_index(e);
        let p1 = self.spec.p + 1;
        let mut v = [vec![0.0; p1], vec![0.0; p1], vec![0.0; p1]];
        let mut dv = [vec![0.0; p1], vec![0.0; p1], vec![0.0; p1]];
        for d in 0..3 {
            self.basis.eval(idx[d], xi[d], &mut v[d], &mut dv[d]);
        }
        let s = 2.0 / self.h;
        let mut vals = Vec::with_capacity(p1 * p1 * p1);
        let mut grads = Vec::with_capacity(p1 * p1 * p1);
        for c in 0..p1 {
            for b in 0..p1 {
                for a in 0..p1 {
                    vals.push(v[0][a] * v[1][b] * v[2][c]);
                    grads.push([s * dv[0][a] * v[1][b] * v[2][c], s * v[0][a] * dv[1][b] * v[2][c], s * v[0][a] * v[1][b] * dv[2][c]]);
                }
            }
        }
        (vals, grads)
    }
}

/// Map from uncompacted lexicographic indices to compact DOF numbers.
#[derive(Debug, Clone)]
pub struct DofMap {
    compact: Vec<u32>,
    n_dof: usize,
}

pub const NO_DOF: u32 = u32::MAX;

impl DofMap {
    pub fn new(grid: &Grid) -> Self {
        let n1 = grid.basis().n_functions();
        let mut used = vec![false; n1 * n1 * n1];
        for e in grid.kept_elements() {
            for g in grid.element_full_dofs(e) {
                used[g] = true;
            }
        }
        let mut compact = vec![NO_DOF; used.len()];
        let mut n_dof = 0usize;
        for (g, u) in used.iter().enumerate() {
            if *u {
                compact[g] = n_dof as u32;
                n_dof += 1;
            }
        }
        Self { compact, n_dof }
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn get(&self, full: usize) -> Option<usize> {
        let c = self.compact[full];
        (c != NO_DOF).then_some(c as usize)
    }

    /// Compact DOFs of a kept element, in local order.
    pub fn element_dofs(&self, grid: &Grid, e: usize) -> Vec<usize> {
        grid.element_full_dofs(e).into_iter().map(|g| self.compact[g] as usize).collect()
    }
}

/// Number of DOFs that survive discarding the elements outside the cube.
pub fn count_dofs(grid: &Grid) -> usize {
    DofMap::new(grid).n_dof()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyParams {
    pub rho: f64,
    pub c: f64,
    pub octree_depth: usize,
    pub stabilization: StabilizationParams,
    /// Uniform subdivisions per direction of every quadrature cell when
    /// integrating the source term near the source.
    pub load_subdivisions: usize,
}

impl Default for AssemblyParams {
    fn default() -> Self {
        Self { rho: 1.0, c: 1.0, octree_depth: 4, stabilization: StabilizationParams::default(), load_subdivisions: 1 }
    }
}

impl AssemblyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) || !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config("rho and c must be positive"));
        }
        if self.load_subdivisions == 0 {
            return Err(Error::config("load_subdivisions must be at least 1"));
        }
        self.stabilization.validate()
    }
}

/// Element matrices: `m_o`, `k_o` carry the indicator weighting, `m_f`,
/// `k_f` integrate over the whole element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMatrices {
    pub m_o: DMatrix<f64>,
    pub k_o: DMatrix<f64>,
    pub m_f: DMatrix<f64>,
    pub k_f: DMatrix<f64>,
}

/// Mass and stiffness by direct quadrature over explicit rules (reference
/// path; the assembler uses the sum-factorized equivalent).
pub fn element_matrices_from_rules(grid: &Grid, e: usize, mass_rule: &ElementRule, stiffness_rule: &ElementRule, rho: f64, c: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = (grid.spec().p + 1).pow(3);
    let jac = (0.5 * grid.h()).powi(3);
    let mut m = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    for q in &mass_rule.points {
        let (v, _) = grid.eval_element(e, &q.xi);
        let w = rho * q.alpha_fcm * q.w * jac;
        for j in 0..n {
            for i in 0..n {
                m[(i, j)] += w * v[i] * v[j];
            }
        }
    }
    for q in &stiffness_rule.points {
        let (_, g) = grid.eval_element(e, &q.xi);
        let w = rho * c * c * q.alpha_fcm * q.w * jac;
        for j in 0..n {
            for i in 0..n {
                k[(i, j)] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2]);
            }
        }
    }
    (m, k)
}

/// 1D mass and stiffness factors (`p+1` square, row-major) of one direction.
#[derive(Debug, Clone)]
struct Factor1D {
    m: Vec<f64>,
    s: Vec<f64>,
}

/// Key of a 1D factor: interval bits plus the quadrature point index
/// (`u32::MAX` for the whole interval).
type Key1D = (u64, u64, u32);

/// Sum-factorized element integrator: contributions of the form
/// `a * X (x) Y (x) Z` are grouped by their `Z` and then `Y` factors.
struct Accumulator {
    p1: usize,
    /// (z, y) -> (sum a X_m, sum a X_s)
    xy: BTreeMap<(Key1D, Key1D), (Vec<f64>, Vec<f64>)>,
}

impl Accumulator {
    fn new(p1: usize) -> Self {
        Self { p1, xy: BTreeMap::new() }
    }

    fn add(&mut self, a: f64, x: &Factor1D, ky: Key1D, kz: Key1D) {
        let n = self.p1 * self.p1;
        let entry = self.xy.entry((kz, ky)).or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
        for i in 0..n {
            entry.0[i] += a * x.m[i];
            entry.1[i] += a * x.s[i];
        }
    }

    /// Reference mass and stiffness (unit Jacobians, gradients in reference
    /// coordinates).
    fn finish(self, factor: impl Fn(usize, Key1D) -> Factor1D) -> (DMatrix<f64>, DMatrix<f64>) {
        let p1 = self.p1;
        let n2 = p1 * p1;
        let n3 = n2 * p1;
        // z -> (A_mm, A_sm + A_ms) over the (x, y) plane, row-major n2 x n2.
        let mut planes: BTreeMap<Key1D, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        let mut cache_y: BTreeMap<Key1D, Factor1D> = BTreeMap::new();
        for ((kz, ky), (xm, xs)) in self.xy {
            let y = cache_y.entry(ky).or_insert_with(|| factor(1, ky));
            let (amm, agrad) = planes.entry(kz).or_insert_with(|| (vec![0.0; n2 * n2], vec![0.0; n2 * n2]));
            for ay in 0..p1 {
                for by in 0..p1 {
                    let ym = y.m[ay * p1 + by];
                    let ys = y.s[ay * p1 + by];
                    for ax in 0..p1 {
                        let row = (ax + p1 * ay) * n2 + p1 * by;
                        for bx in 0..p1 {
                            let (m, s) = (xm[ax * p1 + bx], xs[ax * p1 + bx]);
                            amm[row + bx] += m * ym;
                            agrad[row + bx] += s * ym + m * ys;
                        }
                    }
                }
            }
        }
        let mut mass = DMatrix::zeros(n3, n3);
        let mut stiff = DMatrix::zeros(n3, n3);
        for (kz, (amm, agrad)) in planes {
            let z = factor(2, kz);
            for az in 0..p1 {
                for bz in 0..p1 {
                    let zm = z.m[az * p1 + bz];
                    let zs = z.s[az * p1 + bz];
                    for b2 in 0..n2 {
                        let col = b2 + n2 * bz;
                        for a2 in 0..n2 {
                            let i = a2 * n2 + b2;
                            mass[(a2 + n2 * az, col)] += amm[i] * zm;
                            stiff[(a2 + n2 * az, col)] += agrad[i] * zm + amm[i] * zs;
                        }
                    }
                }
            }
        }
        (mass, stiff)
    }
}

/// Builds element matrices and the global system for a grid.
pub struct Assembler<'a> {
    grid: &'a Grid,
    params: AssemblyParams,
    gl: crate::basis::Rule1D,
    gll: crate::basis::Rule1D,
    inside_gll: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

fn key(lo: f64, hi: f64, pt: u32) -> Key1D {
    (lo.to_bits(), hi.to_bits(), pt)
}

impl<'a> Assembler<'a> {
    pub fn new(grid: &'a Grid, params: AssemblyParams) -> Result<Self> {
        params.validate()?;
        let p = grid.spec().p;
        let mut a = Self { grid, params, gl: gl_rule(p + 1)?, gll: gll_rule(p)?, inside_gll: None };
        if grid.spec().family == BasisFamily::GllLagrange {
            a.inside_gll = Some(a.inside_matrices(0));
        }
        Ok(a)
    }

    pub fn params(&self) -> &AssemblyParams {
        &self.params
    }

    /// 1D factor of direction-index `elem1d` on `[lo, hi]`, either integrated
    /// over the interval (`pt == u32::MAX`) or at a single GL point.
    fn factor(&self, elem1d: usize, k: Key1D) -> Factor1D {
        let p1 = self.grid.spec().p + 1;
        let (lo, hi, pt) = (f64::from_bits(k.0), f64::from_bits(k.1), k.2);
        let half = 0.5 * (hi - lo);
        let mut m = vec![0.0; p1 * p1];
        let mut s = vec![0.0; p1 * p1];
        let mut v = vec![0.0; p1];
        let mut d = vec![0.0; p1];
        let range = if pt == u32::MAX { 0..self.gl.len() } else { pt as usize..pt as usize + 1 };
        for q in range {
            let xi = lo + (self.gl.nodes[q] + 1.0) * half;
            let w = half * self.gl.weights[q];
            self.grid.basis().eval(elem1d, xi, &mut v, &mut d);
            for a in 0..p1 {
                for b in 0..p1 {
                    m[a * p1 + b] += w * v[a] * v[b];
                    s[a * p1 + b] += w * d[a] * d[b];
                }
            }
        }
        Factor1D { m, s }
    }

    fn scale(&self, (m, k): (DMatrix<f64>, DMatrix<f64>)) -> (DMatrix<f64>, DMatrix<f64>) {
        let half = 0.5 * self.grid.h();
        let rho = self.params.rho;
        let c = self.params.c;
        (m * (rho * half.powi(3)), k * (rho * c * c * half))
    }

    /// Full-element consistent matrices of `e` (indicator one everywhere).
    fn full_matrices(&self, e: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let idx = self.grid.element_index(e);
        let full = key(-1.0, 1.0, u32::MAX);
        let mut acc = Accumulator::new(self.grid.spec().p + 1);
        acc.add(1.0, &self.factor(idx[0], full), full, full);
        self.scale(acc.finish(|d, k| self.factor(idx[d], k)))
    }

    /// Matrices of an uncut element: GLL-Lagrange gets the nodal (diagonal)
    /// mass, B-splines the consistent one.
    fn inside_matrices(&self, e: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let (m, k) = self.full_matrices(e);
        if self.grid.spec().family == BasisFamily::BSpline {
            return (m, k);
        }
        let p1 = self.grid.spec().p + 1;
        let w = &self.gll.weights;
        let rho = self.params.rho * (0.5 * self.grid.h()).powi(3);
        let diag = nalgebra::DVector::from_iterator(p1 * p1 * p1, (0..p1).flat_map(|c| (0..p1).flat_map(move |b| (0..p1).map(move |a| rho * w[a] * w[b] * w[c]))));
        (DMatrix::from_diagonal(&diag), k)
    }

    /// Indicator-weighted matrices of a cut element by space-tree
    /// integration, with pointwise indicator in leaves still cut at the
    /// maximum depth.
    fn cut_matrices(&self, e: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let grid = self.grid;
        let idx = grid.element_index(e);
        let bx = grid.element_box(e);
        let alpha = self.params.stabilization.alpha;
        let q = self.gl.len();
        let mut acc = Accumulator::new(grid.spec().p + 1);
        let mut xcache: BTreeMap<Key1D, Factor1D> = BTreeMap::new();
        let mut add = |acc: &mut Accumulator, a: f64, kx: Key1D, ky: Key1D, kz: Key1D| {
            if a != 0.0 {
                let x = xcache.entry(kx).or_insert_with(|| self.factor(idx[0], kx));
                acc.add(a, x, ky, kz);
            }
        };
        for leaf in element_leaves(&bx, grid.geometry(), self.params.octree_depth) {
            let kx = key(leaf.lo[0], leaf.hi[0], u32::MAX);
            let ky = key(leaf.lo[1], leaf.hi[1], u32::MAX);
            let kz = key(leaf.lo[2], leaf.hi[2], u32::MAX);
            match leaf.class {
                ElementClass::Inside => add(&mut acc, 1.0, kx, ky, kz),
                ElementClass::Outside => add(&mut acc, alpha, kx, ky, kz),
                ElementClass::Cut => {
                    let nodes: [Vec<f64>; 3] = std::array::from_fn(|d| self.gl.nodes.iter().map(|t| leaf.lo[d] + 0.5 * (t + 1.0) * (leaf.hi[d] - leaf.lo[d])).collect());
                    let mut inside = Vec::with_capacity(q * q * q);
                    for k in 0..q {
                        for j in 0..q {
                            for i in 0..q {
                                let xi = [nodes[0][i], nodes[1][j], nodes[2][k]];
                                inside.push(grid.contains(&crate::quadrature::reference_to_box(&bx, &xi)));
                            }
                        }
                    }
                    let n_in = inside.iter().filter(|&&b| b).count();
                    // Whole leaf at one weight plus a correction over the
                    // smaller of the inside and outside point sets.
                    let (base, corr, pick) = if n_in * 2 <= inside.len() { (alpha, 1.0 - alpha, true) } else { (1.0, alpha - 1.0, false) };
                    add(&mut acc, base, kx, ky, kz);
                    for k in 0..q {
                        for j in 0..q {
                            for i in 0..q {
                                if inside[i + q * (j + q * k)] == pick {
                                    let px = key(leaf.lo[0], leaf.hi[0], i as u32);
                                    let py = key(leaf.lo[1], leaf.hi[1], j as u32);
                                    let pz = key(leaf.lo[2], leaf.hi[2], k as u32);
                                    add(&mut acc, corr, px, py, pz);
                                }
                            }
                        }
                    }
                }
            }
        }
        self.scale(acc.finish(|d, k| self.factor(idx[d], k)))
    }

    /// `(M_o, K_o, M_f, K_f)` for element `e`.
    pub fn element_matrices(&self, e: usize) -> ElementMatrices {
        match self.grid.class(e) {
            ElementClass::Cut => {
                let (m_o, k_o) = self.cut_matrices(e);
                let (m_f, k_f) = self.full_matrices(e);
                ElementMatrices { m_o, k_o, m_f, k_f }
            }
            ElementClass::Inside => {
                let (m, k) = match &self.inside_gll {
                    Some(mk) => mk.clone(),
                    None => self.inside_matrices(e),
                };
                ElementMatrices { m_f: m.clone(), k_f: k.clone(), m_o: m, k_o: k }
            }
            ElementClass::Outside => {
                let (m, k) = self.full_matrices(e);
                let a = self.params.stabilization.alpha;
                ElementMatrices { m_o: &m * a, k_o: &k * a, m_f: m, k_f: k }
            }
        }
    }

    /// Whether the lumping mode acts on element `e`.
    fn lumps(&self, e: usize) -> bool {
        self.params.stabilization.lumping != Lumping::None
            && (self.grid.spec().family == BasisFamily::BSpline || self.grid.class(e) == ElementClass::Cut)
    }

    /// Whether the final element mass of `e` has off-diagonal entries.
    fn dense_mass(&self, e: usize) -> bool {
        match self.grid.spec().family {
            BasisFamily::GllLagrange => self.grid.class(e) == ElementClass::Cut && !self.lumps(e),
            BasisFamily::BSpline => !self.lumps(e),
        }
    }

    /// Global matrices over the kept elements.
    pub fn assemble(&self) -> Result<DiscreteSystem> {
        let grid = self.grid;
        let kept = grid.kept_elements();
        if kept.is_empty() {
            return Err(Error::config("no element intersects the physical domain"));
        }
        let dofs = DofMap::new(grid);
        let n = dofs.n_dof();
        let elem_dofs: Vec<Vec<usize>> = (0..grid.n_elements())
            .map(|e| if grid.class(e) == ElementClass::Outside { Vec::new() } else { dofs.element_dofs(grid, e) })
            .collect();

        // Elements touching each DOF, in element order.
        let mut touching: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &e in &kept {
            for &d in &elem_dofs[e] {
                touching[d].push(e as u32);
            }
        }
        let k = pattern(n, &touching, &elem_dofs, |_| true);
        let m = pattern(n, &touching, &elem_dofs, |e| self.dense_mass(e));
        let (mut k, mut m) = (k, m);

        let mut cut_dof = vec![false; n];
        for &e in &kept {
            if grid.class(e) == ElementClass::Cut {
                for &d in &elem_dofs[e] {
                    cut_dof[d] = true;
                }
            }
        }

        let stab = self.params.stabilization;
        for chunk in kept.chunks(256) {
            let results: Vec<Result<(ElementMass, DMatrix<f64>)>> = chunk
                .par_iter()
                .map(|&e| {
                    let em = self.element_matrices(e);
                    let mass = if grid.class(e) == ElementClass::Cut || self.lumps(e) {
                        stabilize_element_mass(&em.m_o, &em.m_f, grid.class(e) == ElementClass::Cut, self.lumps(e), &stab, e)?
                    } else if grid.spec().family == BasisFamily::GllLagrange {
                        ElementMass::Diagonal(em.m_o.diagonal())
                    } else {
                        ElementMass::Dense(em.m_o)
                    };
                    Ok((mass, em.k_o))
                })
                .collect();
            for (&e, r) in chunk.iter().zip(results) {
                let (mass, stiff) = r?;
                let ld = &elem_dofs[e];
                scatter(&mut k, ld, &stiff);
                match mass {
                    ElementMass::Dense(mm) => scatter(&mut m, ld, &mm),
                    ElementMass::Diagonal(d) => {
                        for (a, &r) in ld.iter().enumerate() {
                            let pos = m.position(r, r).expect("diagonal entry is always stored");
                            m.values_mut()[pos] += d[a];
                        }
                    }
                }
            }
        }
        let partition = DofPartition {
            d: (0..n).filter(|&i| !cut_dof[i]).collect(),
            c: (0..n).filter(|&i| cut_dof[i]).collect(),
        };
        Ok(DiscreteSystem { m, k, n_dof: n, partition, dofs, params: self.params, elem_dofs })
    }
}

/// CSR pattern: row `r` couples to every DOF of the elements in
/// `touching[r]` accepted by `dense`, plus the diagonal.
fn pattern(n: usize, touching: &[Vec<u32>], elem_dofs: &[Vec<usize>], dense: impl Fn(usize) -> bool + Sync) -> SparseSym {
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|r| {
            let mut cols = vec![r];
            for &e in &touching[r] {
                if dense(e as usize) {
                    cols.extend_from_slice(&elem_dofs[e as usize]);
                }
            }
            cols.sort_unstable();
            cols.dedup();
            cols
        })
        .collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::with_capacity(rows.iter().map(Vec::len).sum());
    for r in rows {
        col_idx.extend_from_slice(&r);
        row_ptr.push(col_idx.len());
    }
    let values = vec![0.0; col_idx.len()];
    SparseSym::from_csr(n, row_ptr, col_idx, values).expect("pattern rows are sorted and unique")
}

/// Adds a dense element matrix. Local order maps to increasing global
/// columns, so each row is located with a moving binary search.
fn scatter(a: &mut SparseSym, dofs: &[usize], local: &DMatrix<f64>) {
    let mut order: Vec<usize> = (0..dofs.len()).collect();
    order.sort_by_key(|&i| dofs[i]);
    for (la, &r) in dofs.iter().enumerate() {
        let start = a.row_ptr()[r];
        let end = a.row_ptr()[r + 1];
        let mut lo = start;
        for &lb in &order {
            let c = dofs[lb];
            let off = a.col_idx()[lo..end].partition_point(|&x| x < c);
            lo += off;
            debug_assert_eq!(a.col_idx()[lo], c);
            a.values_mut()[lo] += local[(la, lb)];
        }
    }
}

/// DOFs split into those touched by cut elements (`c`) and the rest (`d`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DofPartition {
    pub d: Vec<usize>,
    pub c: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub m: SparseSym,
    pub k: SparseSym,
    pub n_dof: usize,
    pub partition: DofPartition,
    pub dofs: DofMap,
    pub params: AssemblyParams,
    elem_dofs: Vec<Vec<usize>>,
}

impl DiscreteSystem {
    /// Compact DOFs of element `e` (empty for discarded elements).
    pub fn element_dofs(&self, e: usize) -> &[usize] {
        &self.elem_dofs[e]
    }

    pub fn rho(&self) -> f64 {
        self.params.rho
    }

    pub fn c(&self) -> f64 {
        self.params.c
    }
}

pub fn assemble(grid: &Grid, params: AssemblyParams) -> Result<DiscreteSystem> {
    Assembler::new(grid, params)?.assemble()
}

/// Matrix-free form of `K` when every element is uncut and kept: the
/// stiffness then factors into 1D mass and stiffness matrices.
pub fn tensor_stiffness(grid: &Grid, params: &AssemblyParams) -> Result<Option<TensorStiffness>> {
    if grid.classes().iter().any(|&c| c != ElementClass::Inside) {
        return Ok(None);
    }
    let basis = grid.basis();
    let p1 = grid.spec().p + 1;
    let n1 = basis.n_functions();
    let gl = gl_rule(p1)?;
    let h = grid.h();
    let mut m1 = DMatrix::zeros(n1, n1);
    let mut k1 = DMatrix::zeros(n1, n1);
    let (mut v, mut dv) = (vec![0.0; p1], vec![0.0; p1]);
    for e in 0..grid.n_e() {
        for (xi, w) in gl.nodes.iter().zip(&gl.weights) {
            basis.eval(e, *xi, &mut v, &mut dv);
            for a in 0..p1 {
                for b in 0..p1 {
                    let (ga, gb) = (basis.global_index(e, a), basis.global_index(e, b));
                    m1[(ga, gb)] += w * v[a] * v[b] * 0.5 * h;
                    k1[(ga, gb)] += w * dv[a] * dv[b] * 2.0 / h;
                }
            }
        }
    }
    Ok(Some(TensorStiffness::new(Banded1D::from_dense(&k1), Banded1D::from_dense(&m1), params.rho * params.c * params.c)))
}

/// Homogeneous Neumann data: the boundary integral vanishes, so nothing is
/// added to the load.
pub fn add_neumann_load(_system: &DiscreteSystem, _grid: &Grid, _load: &mut [f64]) {}

/// Gaussian point source with a Ricker time signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    /// Centre in the local frame.
    pub x_l_local: [f64; 3],
    pub sigma_s: f64,
    pub f_e: f64,
}

impl SourceSpec {
    pub fn benchmark(l_p: f64) -> Self {
        Self { x_l_local: [-0.5 * l_p, 0.0, 0.0], sigma_s: 0.01, f_e: 10.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_s > 0.0) || !(self.f_e > 0.0) || self.x_l_local.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("source needs sigma_s > 0, f_e > 0 and a finite centre"));
        }
        Ok(())
    }

    /// `exp(-d^2 / 2)` with `d = |x' - x_l| / sigma_s`.
    pub fn spatial(&self, x_local: &Point) -> f64 {
        let d2 = (x_local - Point::from(self.x_l_local)).norm_squared() / (self.sigma_s * self.sigma_s);
        (-0.5 * d2).exp()
    }
}

/// Ricker wavelet `(1 - 2 q^2) exp(-q^2)`, `q = pi f_e (t - t_s)`,
/// `t_s = 2 sqrt(6) / (pi f_e)`.
pub fn ricker(t: f64, f_e: f64) -> f64 {
    let t_s = 2.0 * 6f64.sqrt() / (std::f64::consts::PI * f_e);
    let q = std::f64::consts::PI * f_e * (t - t_s);
    let q2 = q * q;
    (1.0 - 2.0 * q2) * (-q2).exp()
}

/// `ricker(t) * F_s`.
pub fn force_at(f_s: &[f64], src: &SourceSpec, t: f64, out: &mut [f64]) {
    let r = ricker(t, src.f_e);
    for (o, f) in out.iter_mut().zip(f_s) {
        *o = r * f;
    }
}

/// Distance in units of `sigma_s` beyond which the source is treated as zero.
const SOURCE_CUTOFF: f64 = 10.0;

/// Consistent load `F_i = sum_q alpha_fcm rho f_s N_i w_q` over the kept
/// elements near the source. Quadrature cells (the element, or its space-tree
/// leaves when cut) are split `load_subdivisions` times per direction.
pub fn spatial_load(system: &DiscreteSystem, grid: &Grid, src: &SourceSpec) -> Result<Vec<f64>> {
    src.validate()?;
    let params = &system.params;
    let gl = gl_rule(grid.spec().p + 1)?;
    let s = params.load_subdivisions;
    let x_src = grid.from_local(&Point::from(src.x_l_local));
    let reach = SOURCE_CUTOFF * src.sigma_s;
    let alpha = params.stabilization.alpha;
    let jac = (0.5 * grid.h()).powi(3);
    let near: Vec<usize> = grid.kept_elements().into_iter().filter(|&e| grid.element_box(e).distance_squared(&x_src) <= reach * reach).collect();
    let contributions: Vec<(usize, Vec<f64>)> = near
        .par_iter()
        .map(|&e| {
            let bx = grid.element_box(e);
            let cells: Vec<([f64; 3], [f64; 3], Option<f64>)> = match grid.class(e) {
                ElementClass::Cut => element_leaves(&bx, grid.geometry(), params.octree_depth)
                    .into_iter()
                    .map(|l| {
                        let a = match l.class {
                            ElementClass::Inside => Some(1.0),
                            ElementClass::Outside => Some(alpha),
                            ElementClass::Cut => None,
                        };
                        (l.lo, l.hi, a)
                    })
                    .collect(),
                _ => vec![([-1.0; 3], [1.0; 3], Some(1.0))],
            };
            let mut fe = vec![0.0; (grid.spec().p + 1).pow(3)];
            for (lo, hi, a) in cells {
                for sub in 0..s * s * s {
                    let si = [sub % s, (sub / s) % s, sub / (s * s)];
                    let slo: [f64; 3] = std::array::from_fn(|d| lo[d] + (hi[d] - lo[d]) * si[d] as f64 / s as f64);
                    let shi: [f64; 3] = std::array::from_fn(|d| lo[d] + (hi[d] - lo[d]) * (si[d] + 1) as f64 / s as f64);
                    let wscale: f64 = (0..3).map(|d| 0.5 * (shi[d] - slo[d])).product();
                    for k in 0..gl.len() {
                        for j in 0..gl.len() {
                            for i in 0..gl.len() {
                                let t = [gl.nodes[i], gl.nodes[j], gl.nodes[k]];
                                let xi: [f64; 3] = std::array::from_fn(|d| slo[d] + 0.5 * (t[d] + 1.0) * (shi[d] - slo[d]));
                                let x = crate::quadrature::reference_to_box(&bx, &xi);
                                let f = src.spatial(&grid.to_local(&x));
                                if f < 1e-300 {
                                    continue;
                                }
                                let af = a.unwrap_or_else(|| if grid.contains(&x) { 1.0 } else { alpha });
                                let w = wscale * gl.weights[i] * gl.weights[j] * gl.weights[k] * jac * params.rho * af * f;
                                let (v, _) = grid.eval_element(e, &xi);
                                for (fa, va) in fe.iter_mut().zip(&v) {
                                    *fa += w * va;
                                }
                            }
                        }
                    }
                }
            }
            (e, fe)
        })
        .collect();
    let mut f = vec![0.0; system.n_dof];
    for (e, fe) in contributions {
        for (&d, v) in system.element_dofs(e).iter().zip(fe) {
            f[d] += v;
        }
    }
    add_neumann_load(system, grid, &mut f);
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CardanAngles;
    use crate::quadrature::{cut_cell_rule, tensor_rule, RuleKind};
    use approx::assert_relative_eq;

    fn benchmark_geometry() -> ImmersedGeometry {
        ImmersedGeometry::new(0.3, 0.5, CardanAngles::new(10.0, 10.0, 10.0)).unwrap()
    }

    fn spec(f: BasisFamily, p: usize, n_e: usize) -> BasisSpec {
        BasisSpec::new(f, p, n_e).unwrap()
    }

    fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).abs().max() / b.abs().max()
    }

    #[test]
    fn one_dimensional_linear_element_closed_form() {
        // p = 1 tensor element: the 3D matrices factor into the 1D closed
        // forms M1 = h/6 [[2,1],[1,2]], K1 = 1/h [[1,-1],[-1,1]].
        let g = benchmark_geometry();
        let grid = Grid::boundary_fitted(spec(BasisFamily::BSpline, 1, 3), g).unwrap();
        let a = Assembler::new(&grid, AssemblyParams { rho: 2.0, c: 3.0, ..Default::default() }).unwrap();
        let em = a.element_matrices(13);
        let h = grid.h();
        let m1 = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]) * (h / 6.0);
        let k1 = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]) / h;
        let m_exp = m1.kronecker(&m1).kronecker(&m1) * 2.0;
        let k_exp = (k1.kronecker(&m1).kronecker(&m1) + m1.kronecker(&k1).kronecker(&m1) + m1.kronecker(&m1).kronecker(&k1)) * 18.0;
        assert!(rel_diff(&em.m_o, &m_exp) < 1e-13);
        assert!(rel_diff(&em.k_o, &k_exp) < 1e-13);
    }

    #[test]
    fn uncut_gll_mass_is_diagonal_and_integrates_volume() {
        let grid = Grid::boundary_fitted(spec(BasisFamily::GllLagrange, 3, 4), benchmark_geometry()).unwrap();
        let a = Assembler::new(&grid, AssemblyParams::default()).unwrap();
        let em = a.element_matrices(0);
        let off: f64 = (0..64).flat_map(|i| (0..64).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| em.m_o[(i, j)].abs()).sum();
        assert_eq!(off, 0.0);
        assert_relative_eq!(em.m_o.sum(), grid.h().powi(3), max_relative = 1e-13);
        assert_relative_eq!(em.m_f.sum(), grid.h().powi(3), max_relative = 1e-13);
    }

    #[test]
    fn fast_cut_matrices_match_direct_quadrature() {
        for family in [BasisFamily::GllLagrange, BasisFamily::BSpline] {
            let grid = Grid::immersed(spec(family, 2, 7), benchmark_geometry()).unwrap();
            let params = AssemblyParams { octree_depth: 3, stabilization: StabilizationParams { alpha: 1e-3, ..Default::default() }, ..Default::default() };
            let a = Assembler::new(&grid, params).unwrap();
            let gl = gl_rule(3).unwrap();
            let mut checked = 0;
            for e in (0..grid.n_elements()).filter(|&e| grid.class(e) == ElementClass::Cut).take(6) {
                let rule = cut_cell_rule(&grid.element_box(e), grid.geometry(), &gl, 3, 1e-3).unwrap();
                let (m, k) = element_matrices_from_rules(&grid, e, &rule, &rule, 1.0, 1.0);
                let em = a.element_matrices(e);
                assert!(rel_diff(&em.m_o, &m) < 1e-12, "{family:?} {e}");
                assert!(rel_diff(&em.k_o, &k) < 1e-12, "{family:?} {e}");
                let full = tensor_rule(&gl, RuleKind::TensorGl);
                let (mf, kf) = element_matrices_from_rules(&grid, e, &full, &full, 1.0, 1.0);
                assert!(rel_diff(&em.m_f, &mf) < 1e-12);
                assert!(rel_diff(&em.k_f, &kf) < 1e-12);
                checked += 1;
            }
            assert_eq!(checked, 6);
        }
    }

    #[test]
    fn alpha_weighting_equals_matrix_combination() {
        let g = benchmark_geometry();
        let grid = Grid::immersed(spec(BasisFamily::GllLagrange, 2, 6), g).unwrap();
        let e = (0..grid.n_elements()).find(|&e| grid.class(e) == ElementClass::Cut).unwrap();
        let with = |alpha| {
            let p = AssemblyParams { stabilization: StabilizationParams { alpha, ..Default::default() }, ..Default::default() };
            Assembler::new(&grid, p).unwrap().element_matrices(e)
        };
        let zero = with(0.0);
        let a = with(0.37);
        let comb_m = crate::stabilization::alpha_combine(&zero.m_o, &zero.m_f, 0.37);
        let comb_k = crate::stabilization::alpha_combine(&zero.k_o, &zero.k_f, 0.37);
        assert!(rel_diff(&a.m_o, &comb_m) < 1e-10);
        assert!(rel_diff(&a.k_o, &comb_k) < 1e-10);
    }

    #[test]
    fn boundary_fitted_counts_and_partition() {
        let grid = Grid::boundary_fitted(spec(BasisFamily::GllLagrange, 3, 10), benchmark_geometry()).unwrap();
        assert_eq!(count_dofs(&grid), 29791);
        let small = Grid::boundary_fitted(spec(BasisFamily::GllLagrange, 2, 3), benchmark_geometry()).unwrap();
        let sys = assemble(&small, AssemblyParams::default()).unwrap();
        assert!(sys.partition.c.is_empty());
        assert_eq!(sys.partition.d.len(), sys.n_dof);
        assert!(sys.m.is_structurally_diagonal());
    }

    #[test]
    fn global_matrix_properties() {
        for family in [BasisFamily::GllLagrange, BasisFamily::BSpline] {
            let grid = Grid::immersed(spec(family, 2, 5), benchmark_geometry()).unwrap();
            let sys = assemble(&grid, AssemblyParams::default()).unwrap();
            assert!(sys.m.asymmetry() <= 1e-12 * sys.m.max_abs());
            assert!(sys.k.asymmetry() <= 1e-12 * sys.k.max_abs());
            let ones = vec![1.0; sys.n_dof];
            let k1 = sys.k.mul_vec(&ones);
            let norm = k1.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm <= 1e-8 * sys.k.max_abs() * (sys.n_dof as f64).sqrt());
            // Total mass: physical volume plus alpha times the fictitious part.
            let total: f64 = sys.m.values().iter().sum();
            assert_relative_eq!(total, 0.027, max_relative = 1e-2);
        }
    }

    #[test]
    fn partition_matches_brute_force_support_scan() {
        let grid = Grid::immersed(spec(BasisFamily::BSpline, 2, 6), benchmark_geometry()).unwrap();
        let sys = assemble(&grid, AssemblyParams::default()).unwrap();
        let mut touched = vec![false; sys.n_dof];
        for e in 0..grid.n_elements() {
            if grid.class(e) == ElementClass::Cut {
                for &d in sys.element_dofs(e) {
                    touched[d] = true;
                }
            }
        }
        for d in 0..sys.n_dof {
            assert_eq!(touched[d], sys.partition.c.binary_search(&d).is_ok());
            assert_eq!(!touched[d], sys.partition.d.binary_search(&d).is_ok());
        }
        assert_eq!(sys.partition.c.len() + sys.partition.d.len(), sys.n_dof);
    }

    #[test]
    fn lumped_systems_are_diagonal() {
        for family in [BasisFamily::GllLagrange, BasisFamily::BSpline] {
            for lumping in [Lumping::RowSum, Lumping::Hrz] {
                let grid = Grid::immersed(spec(family, 2, 5), benchmark_geometry()).unwrap();
                let p = AssemblyParams { stabilization: StabilizationParams { lumping, ..Default::default() }, ..Default::default() };
                let sys = assemble(&grid, p).unwrap();
                assert!(sys.m.is_structurally_diagonal());
            }
        }
        // Row-sum lumping of B-splines: global diagonal equals M 1.
        let grid = Grid::immersed(spec(BasisFamily::BSpline, 2, 5), benchmark_geometry()).unwrap();
        let cons = assemble(&grid, AssemblyParams::default()).unwrap();
        let p = AssemblyParams { stabilization: StabilizationParams { lumping: Lumping::RowSum, ..Default::default() }, ..Default::default() };
        let lumped = assemble(&grid, p).unwrap();
        let m1 = cons.m.row_sums();
        for (a, b) in lumped.m.diagonal().iter().zip(&m1) {
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1e-300) + 1e-20);
        }
    }

    #[test]
    fn ricker_examples() {
        let f = 10.0;
        let t_s = 2.0 * 6f64.sqrt() / (std::f64::consts::PI * f);
        assert_eq!(ricker(t_s, f), 1.0);
        let t1 = t_s + 1.0 / (std::f64::consts::PI * f);
        assert!((ricker(t1, f) + (-1.0f64).exp()).abs() < 1e-12);
        assert!(ricker(0.0, f).abs() < 0.01);
        assert!(ricker(1e3, f).abs() < 1e-300);
        let fs = [1.0, -2.0];
        let src = SourceSpec::benchmark(0.3);
        let mut out = [0.0; 2];
        force_at(&fs, &src, t_s, &mut out);
        assert_eq!(out, fs);
    }

    #[test]
    fn source_shape() {
        let s = SourceSpec::benchmark(0.3);
        assert_eq!(s.spatial(&Point::new(-0.15, 0.0, 0.0)), 1.0);
        assert!((s.spatial(&Point::new(-0.14, 0.0, 0.0)) - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn load_integrates_the_gaussian() {
        let g = benchmark_geometry();
        let full = (2.0 * std::f64::consts::PI).powf(1.5) * 1e-6;
        // Source well inside a boundary-fitted cube: the whole Gaussian.
        let grid = Grid::boundary_fitted(spec(BasisFamily::GllLagrange, 3, 6), g.clone()).unwrap();
        let sys = assemble(&grid, AssemblyParams::default()).unwrap();
        let inner = SourceSpec { x_l_local: [0.013, -0.02, 0.007], ..SourceSpec::benchmark(0.3) };
        let f = spatial_load(&sys, &grid, &inner).unwrap();
        assert_relative_eq!(f.iter().sum::<f64>(), full, max_relative = 0.02);
        // Benchmark source on the face of the immersed cube: half of it lies
        // in the fictitious domain and is cut off by the indicator.
        let grid = Grid::immersed(spec(BasisFamily::GllLagrange, 3, 13), g).unwrap();
        let p = AssemblyParams { stabilization: StabilizationParams { alpha: 0.0, ..Default::default() }, ..Default::default() };
        let sys = assemble(&grid, p).unwrap();
        let f = spatial_load(&sys, &grid, &SourceSpec::benchmark(0.3)).unwrap();
        assert_relative_eq!(f.iter().sum::<f64>(), 0.5 * full, max_relative = 0.02);
    }

    #[test]
    fn locate_prefers_kept_elements() {
        let g = benchmark_geometry();
        let grid = Grid::immersed(spec(BasisFamily::GllLagrange, 2, 10), g).unwrap();
        for local in [Point::new(0.15, 0.15, 0.15), Point::new(-0.15, 0.0, 0.0), Point::zeros()] {
            let (e, xi) = grid.locate(&grid.from_local(&local)).unwrap();
            assert_ne!(grid.class(e), ElementClass::Outside);
            assert!(xi.iter().all(|v| v.abs() <= 1.0));
        }
        assert!(grid.locate(&Point::new(-0.1, 0.2, 0.2)).is_none());
    }

    #[test]
    fn tensor_stiffness_matches_assembled_matrix() {
        use crate::linalg::SymOperator;
        for f in [BasisFamily::GllLagrange, BasisFamily::BSpline] {
            let grid = Grid::boundary_fitted(spec(f, 3, 3), benchmark_geometry()).unwrap();
            let params = AssemblyParams { rho: 2.0, c: 1.5, ..Default::default() };
            let sys = assemble(&grid, params).unwrap();
            let op = tensor_stiffness(&grid, &params).unwrap().unwrap();
            assert_eq!(op.dim(), sys.n_dof);
            let x: Vec<f64> = (0..sys.n_dof).map(|i| ((i * 37) % 19) as f64 / 19.0 - 0.5).collect();
            let mut y = vec![0.0; sys.n_dof];
            op.apply(&x, &mut y);
            let z = sys.k.mul_vec(&x);
            let scale = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(y.iter().zip(&z).all(|(a, b)| (a - b).abs() <= 1e-12 * scale), "{f:?}");
        }
        let immersed = Grid::immersed(spec(BasisFamily::GllLagrange, 2, 4), benchmark_geometry()).unwrap();
        assert!(tensor_stiffness(&immersed, &AssemblyParams::default()).unwrap().is_none());
    }

}
