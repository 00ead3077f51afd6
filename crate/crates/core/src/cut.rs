//! Sub-triangulation of cut triangles along the zero line of `I_h φ`.

use thiserror::Error;

use crate::levelset::{classify_values, ElementClass, Phase};
use crate::mesh::{signed_area, Point};
use crate::quadrature::{segment_rule, triangle_rule, QuadratureError, QuadratureRule};

#[derive(Debug, Error, PartialEq)]
pub enum CutError {
    #[error("triangle is not cut (vertex values {0:?})")]
    NotCut([f64; 3]),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Clone, Debug)]
pub struct CutDecomposition {
    pub neg: Vec<[Point; 3]>,
    pub pos: Vec<[Point; 3]>,
    pub segment: [Point; 2],
    /// Unit normal of the segment pointing from phase one into phase two.
    pub normal: Point,
}

impl CutDecomposition {
    pub fn parts(&self, phase: Phase) -> &[[Point; 3]] {
        match phase {
            Phase::One => &self.neg,
            Phase::Two => &self.pos,
        }
    }
}

fn ccw(mut tri: [Point; 3]) -> [Point; 3] {
    if signed_area(&tri[0], &tri[1], &tri[2]) < 0.0 {
        tri.swap(1, 2);
    }
    tri
}

/// Splits a cut triangle into one sub-triangle on the side of the vertex
/// with the lone sign and two on the other side.
pub fn decompose(tri: &[Point; 3], values: &[f64; 3]) -> Result<CutDecomposition, CutError> {
    if classify_values(values) != ElementClass::Cut || values.contains(&0.0) {
        return Err(CutError::NotCut(*values));
    }
    let n_neg = values.iter().filter(|&&v| v < 0.0).count();
    let lone_negative = n_neg == 1;
    let k = (0..3).find(|&k| (values[k] < 0.0) == lone_negative).unwrap();
    let (i, j) = ((k + 1) % 3, (k + 2) % 3);
    let zero = |a: usize, b: usize| {
        let t = values[a] / (values[a] - values[b]);
        tri[a] + (tri[b] - tri[a]) * t
    };
    let (pki, pkj) = (zero(k, i), zero(k, j));
    let corner = vec![ccw([tri[k], pki, pkj])];
    let quad = vec![ccw([pki, tri[i], tri[j]]), ccw([pki, tri[j], pkj])];

    // Gradient of the linear interpolant.
    let area2 = 2.0 * signed_area(&tri[0], &tri[1], &tri[2]);
    let mut grad = Point::zeros();
    for a in 0..3 {
        let (b, c) = (tri[(a + 1) % 3], tri[(a + 2) % 3]);
        grad += Point::new(b.y - c.y, c.x - b.x) * (values[a] / area2);
    }
    let normal = grad.normalize();

    let (neg, pos) = if lone_negative { (corner, quad) } else { (quad, corner) };
    Ok(CutDecomposition { neg, pos, segment: [pki, pkj], normal })
}

/// Rule exact up to `degree` on the union of the phase's sub-triangles.
pub fn subdomain_rule(decomp: &CutDecomposition, phase: Phase, degree: usize) -> Result<QuadratureRule, CutError> {
    let mut rule = QuadratureRule::default();
    for tri in decomp.parts(phase) {
        rule.append(triangle_rule(tri, degree)?);
    }
    Ok(rule)
}

/// Gauss rule on the interface segment with the segment normal attached.
pub fn interface_rule(decomp: &CutDecomposition, degree: usize) -> Result<QuadratureRule, CutError> {
    let [a, b] = decomp.segment;
    let mut rule = segment_rule(&a, &b, degree)?;
    rule.normals = Some(vec![decomp.normal; rule.len()]);
    Ok(rule)
}
