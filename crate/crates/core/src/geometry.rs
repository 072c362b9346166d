//! Immersed geometry: a cube of edge `l_p` rotated inside an axis-aligned
//! extended cube of edge `l_e`. Both cubes share their center.
//!
//! Local (cube) coordinates are centered: the physical cube is
//! `[-l_p/2, l_p/2]^3` and `x = T x' + center`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

/// Cardan angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CardanAngles {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl CardanAngles {
    pub fn new(phi: f64, theta: f64, psi: f64) -> Self {
        Self { phi, theta, psi }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.theta.is_finite() && self.psi.is_finite()
    }
}

/// `T = R_z(psi) R_y(theta) R_x(phi)`.
pub fn cardan_rotation_matrix(a: CardanAngles) -> Matrix3<f64> {
    let (sx, cx) = a.phi.to_radians().sin_cos();
    let (sy, cy) = a.theta.to_radians().sin_cos();
    let (sz, cz) = a.psi.to_radians().sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx);
    let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let rz = Matrix3::new(cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0);
    rz * ry * rx
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3 {
    pub lo: Point,
    pub hi: Point,
}

impl Box3 {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        if (0..3).any(|i| !(lo[i] <= hi[i])) {
            return Err(Error::invalid(format!("degenerate box {lo:?} .. {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    /// Box without the ordering check; callers guarantee `lo <= hi`.
    pub(crate) fn from_corners(lo: Point, hi: Point) -> Self {
        debug_assert!((0..3).all(|i| lo[i] <= hi[i]));
        Self { lo, hi }
    }

    pub fn center(&self) -> Point {
        (self.lo + self.hi) * 0.5
    }

    pub fn half_extent(&self) -> Point {
        (self.hi - self.lo) * 0.5
    }

    pub fn volume(&self) -> f64 {
        let d = self.hi - self.lo;
        d.x * d.y * d.z
    }

    pub fn corners(&self) -> [Point; 8] {
        let mut out = [Point::zeros(); 8];
        for (n, c) in out.iter_mut().enumerate() {
            for i in 0..3 {
                c[i] = if n >> i & 1 == 0 { self.lo[i] } else { self.hi[i] };
            }
        }
        out
    }

    /// The eight children obtained by halving every edge, in lexicographic
    /// order (x fastest).
    pub fn octants(&self) -> [Box3; 8] {
        let mid = self.center();
        let mut out = [*self; 8];
        for (n, b) in out.iter_mut().enumerate() {
            for i in 0..3 {
                if n >> i & 1 == 0 {
                    b.lo[i] = self.lo[i];
                    b.hi[i] = mid[i];
                } else {
                    b.lo[i] = mid[i];
                    b.hi[i] = self.hi[i];
                }
            }
        }
        out
    }

    /// Squared Euclidean distance from `x` to the box (zero inside).
    pub fn distance_squared(&self, x: &Point) -> f64 {
        (0..3)
            .map(|i| {
                let d = (self.lo[i] - x[i]).max(0.0).max(x[i] - self.hi[i]);
                d * d
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementClass {
    Inside,
    Outside,
    Cut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Inside,
    Outside,
}

#[derive(Debug, Clone)]
pub struct ImmersedGeometry {
    l_p: f64,
    l_e: f64,
    angles: CardanAngles,
    rotation: Matrix3<f64>,
    center: Point,
    // Separating axes for the box-vs-cube test, computed once.
    sat_axes: Vec<Vector3<f64>>,
}

impl ImmersedGeometry {
    /// Cube of edge `l_p` rotated by `angles` inside `[0, l_e]^3`.
    pub fn new(l_p: f64, l_e: f64, angles: CardanAngles) -> Result<Self> {
        if !(l_p > 0.0 && l_p.is_finite() && l_e.is_finite()) {
            return Err(Error::config(format!("edge lengths must be positive and finite (l_p = {l_p}, l_e = {l_e})")));
        }
        if !(l_p < l_e) {
            return Err(Error::config(format!("physical cube (l_p = {l_p}) must be smaller than the extended domain (l_e = {l_e})")));
        }
        if !angles.is_finite() {
            return Err(Error::config("Cardan angles must be finite"));
        }
        let rotation = cardan_rotation_matrix(angles);
        let center = Point::repeat(0.5 * l_e);
        let mut sat_axes: Vec<Vector3<f64>> = Vec::with_capacity(15);
        for i in 0..3 {
            sat_axes.push(Vector3::ith(i, 1.0));
        }
        for j in 0..3 {
            sat_axes.push(rotation.column(j).into_owned());
        }
        for i in 0..3 {
            for j in 0..3 {
                let c = Vector3::<f64>::ith(i, 1.0).cross(&rotation.column(j));
                let n = c.norm();
                if n > 1e-12 {
                    sat_axes.push(c / n);
                }
            }
        }
        Ok(Self { l_p, l_e, angles, rotation, center, sat_axes })
    }

    pub fn l_p(&self) -> f64 {
        self.l_p
    }

    pub fn l_e(&self) -> f64 {
        self.l_e
    }

    pub fn angles(&self) -> CardanAngles {
        self.angles
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn to_local(&self, x: &Point) -> Point {
        self.rotation.tr_mul(&(x - self.center))
    }

    pub fn to_global(&self, x_local: &Point) -> Point {
        self.rotation * x_local + self.center
    }

    /// Closed cube: points on the surface count as inside.
    pub fn classify_point(&self, x: &Point) -> PointClass {
        let local = self.to_local(x);
        if local.iter().all(|c| c.abs() <= 0.5 * self.l_p) {
            PointClass::Inside
        } else {
            PointClass::Outside
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.classify_point(x) == PointClass::Inside
    }

    /// Exact classification of an axis-aligned box against the rotated cube
    /// (separating axis theorem for two oriented boxes).
    pub fn classify_box(&self, b: &Box3) -> ElementClass {
        let d = self.center - b.center();
        let bh = b.half_extent();
        let ch = 0.5 * self.l_p;
        for axis in &self.sat_axes {
            let rb = bh.x * axis.x.abs() + bh.y * axis.y.abs() + bh.z * axis.z.abs();
            let rc = ch * (0..3).map(|j| self.rotation.column(j).dot(axis).abs()).sum::<f64>();
            if d.dot(axis).abs() > rb + rc {
                return ElementClass::Outside;
            }
        }
        if b.corners().iter().all(|c| self.contains(c)) {
            ElementClass::Inside
        } else {
            ElementClass::Cut
        }
    }

    /// Space-tree partition of `b`: only cut boxes are subdivided, down to
    /// `max_depth` levels. Leaves are returned in depth-first order.
    pub fn octree_partition(&self, b: &Box3, max_depth: usize) -> Vec<(Box3, ElementClass)> {
        let mut leaves = Vec::new();
        self.octree_recurse(b, self.classify_box(b), max_depth, &mut leaves);
        leaves
    }

    fn octree_recurse(&self, b: &Box3, class: ElementClass, depth: usize, out: &mut Vec<(Box3, ElementClass)>) {
        if class != ElementClass::Cut || depth == 0 {
            out.push((*b, class));
            return;
        }
        for child in b.octants() {
            let c = self.classify_box(&child);
            self.octree_recurse(&child, c, depth - 1, out);
        }
    }
}
