//! Element quadrature. Uncut elements use tensor Gauss or Gauss-Lobatto
//! rules; cut elements are split by a space tree and every leaf carries a
//! tensor Gauss-Legendre rule weighted by the fictitious-domain indicator.

use crate::basis::Rule1D;
use crate::error::{Error, Result};
use crate::geometry::{Box3, ElementClass, ImmersedGeometry, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    /// Reference coordinates in `[-1, 1]^3`.
    pub xi: [f64; 3],
    /// Weight in reference measure (sums to 8 over an element).
    pub w: f64,
    /// Indicator value, 1 inside the physical domain and `alpha` outside.
    pub alpha_fcm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    TensorGl,
    TensorGll,
    OctreeGl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementRule {
    pub points: Vec<QuadPoint>,
    pub kind: RuleKind,
}

impl ElementRule {
    pub fn weight_sum(&self) -> f64 {
        self.points.iter().map(|q| q.w).sum()
    }
}

/// Tensor product of a 1D rule; points ordered with the first coordinate
/// running fastest.
pub fn tensor_rule(rule: &Rule1D, kind: RuleKind) -> ElementRule {
    tensor_rule_on(rule, [-1.0; 3], [1.0; 3], 1.0, kind)
}

fn tensor_rule_on(rule: &Rule1D, lo: [f64; 3], hi: [f64; 3], alpha_fcm: f64, kind: RuleKind) -> ElementRule {
    let n = rule.len();
    let scale: f64 = (0..3).map(|d| 0.5 * (hi[d] - lo[d])).product();
    let mut points = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let xi = [
                    map_to(lo[0], hi[0], rule.nodes[i]),
                    map_to(lo[1], hi[1], rule.nodes[j]),
                    map_to(lo[2], hi[2], rule.nodes[k]),
                ];
                points.push(QuadPoint { xi, w: scale * rule.weights[i] * rule.weights[j] * rule.weights[k], alpha_fcm });
            }
        }
    }
    ElementRule { points, kind }
}

#[inline]
pub(crate) fn map_to(a: f64, b: f64, t: f64) -> f64 {
    a + 0.5 * (t + 1.0) * (b - a)
}

/// One space-tree leaf of an element, in the element's reference frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefLeaf {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub class: ElementClass,
}

/// Space-tree partition of an element box, mapped to `[-1, 1]^3`.
pub fn element_leaves(element_box: &Box3, g: &ImmersedGeometry, depth: usize) -> Vec<RefLeaf> {
    let size = element_box.hi - element_box.lo;
    g.octree_partition(element_box, depth)
        .into_iter()
        .map(|(b, class)| {
            let mut lo = [0.0; 3];
            let mut hi = [0.0; 3];
            for d in 0..3 {
                lo[d] = 2.0 * (b.lo[d] - element_box.lo[d]) / size[d] - 1.0;
                hi[d] = 2.0 * (b.hi[d] - element_box.lo[d]) / size[d] - 1.0;
            }
            RefLeaf { lo, hi, class }
        })
        .collect()
}

/// Global position of a reference point of `element_box`.
pub fn reference_to_box(element_box: &Box3, xi: &[f64; 3]) -> Point {
    Point::new(
        map_to(element_box.lo[0], element_box.hi[0], xi[0]),
        map_to(element_box.lo[1], element_box.hi[1], xi[1]),
        map_to(element_box.lo[2], element_box.hi[2], xi[2]),
    )
}

/// Octree-composed Gauss-Legendre rule for an element. Leaves that are still
/// cut at the maximum depth get their indicator point by point.
pub fn cut_cell_rule(element_box: &Box3, g: &ImmersedGeometry, gl: &Rule1D, depth: usize, alpha: f64) -> Result<ElementRule> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let mut points = Vec::new();
    for leaf in element_leaves(element_box, g, depth) {
        let a = match leaf.class {
            ElementClass::Inside => 1.0,
            ElementClass::Outside => alpha,
            ElementClass::Cut => f64::NAN,
        };
        let mut rule = tensor_rule_on(gl, leaf.lo, leaf.hi, a, RuleKind::OctreeGl);
        if leaf.class == ElementClass::Cut {
            for q in &mut rule.points {
                let x = reference_to_box(element_box, &q.xi);
                q.alpha_fcm = if g.contains(&x) { 1.0 } else { alpha };
            }
        }
        points.extend(rule.points);
    }
    Ok(ElementRule { points, kind: RuleKind::OctreeGl })
}

/// `sum w * alpha_fcm`, i.e. 8 times the indicator-weighted volume fraction.
pub fn indicator_volume(rule: &ElementRule) -> f64 {
    rule.points.iter().map(|q| q.w * q.alpha_fcm).sum()
}
