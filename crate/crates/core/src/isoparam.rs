//! P2 mesh deformation `Ψ_h = id + d_h` moving `{I_h φ = 0}` towards
//! `{φ = 0}`, and the transformation of quadrature rules under it.
//!
//! At every P2 node `x` of a cut element the displacement is `t·G(x)` with
//! `G = ∇φ/|∇φ|` and `t` solving `φ(x + t·G(x)) = I_h φ(x)`. All other
//! nodes stay put, so uncut neighbours of the cut band are blended to the
//! identity through the P2 shape functions.

use nalgebra::Matrix2;
use thiserror::Error;

use crate::basis::{p2_gradients, p2_values, AffineElement};
use crate::levelset::{CutTopology, LevelSet, NodalLevelSet};
use crate::mesh::{Mesh, Point};
use crate::quadrature::QuadratureRule;

/// Nodal displacements are clamped to `CLAMP · h_T`.
pub const CLAMP: f64 = 0.5;
const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum DeformationError {
    #[error("no root of φ(x + t∇φ/|∇φ|) = I_hφ(x) found for P2 node {node} at ({x}, {y})")]
    RootNotFound { node: usize, x: f64, y: f64 },
    #[error("deformed element {element} is not injective (det DΨ = {det:e})")]
    NotInjective { element: usize, det: f64 },
}

#[derive(Clone, Debug)]
pub struct MeshDeformation {
    displacement: Vec<Point>,
    active: Vec<bool>,
}

impl MeshDeformation {
    pub fn identity(mesh: &Mesh) -> Self {
        Self { displacement: vec![Point::zeros(); mesh.n_p2_nodes()], active: vec![false; mesh.n_elements()] }
    }

    /// Elements whose nodes carry a nonzero displacement.
    pub fn is_active(&self, element: usize) -> bool {
        self.active[element]
    }

    pub fn active_elements(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter().enumerate().filter(|(_, a)| **a).map(|(e, _)| e)
    }

    pub fn displacement(&self, node: usize) -> Point {
        self.displacement[node]
    }

    pub fn max_displacement(&self) -> f64 {
        self.displacement.iter().map(|d| d.norm()).fold(0.0, f64::max)
    }

    fn element_displacements(&self, mesh: &Mesh, element: usize) -> [Point; 6] {
        mesh.p2_nodes(element).map(|n| self.displacement[n])
    }

    /// `Ψ_h(x)` and `DΨ_h(x)` at an undeformed point `x` of `element`.
    pub fn map(&self, mesh: &Mesh, element: usize, geo: &AffineElement, x: &Point) -> (Point, Matrix2<f64>) {
        if !self.active[element] {
            return (*x, Matrix2::identity());
        }
        let d = self.element_displacements(mesh, element);
        let l = geo.barycentric(x);
        let vals = p2_values(&l);
        let grads = p2_gradients(&l, &geo.grad_lambda);
        let mut y = *x;
        let mut jac = Matrix2::identity();
        for k in 0..6 {
            y += d[k] * vals[k];
            jac += d[k] * grads[k].transpose();
        }
        (y, jac)
    }
}

/// Solves `φ(x + t·dir) = target` for `t ∈ [−bound, bound]`.
fn line_search(ls: &dyn LevelSet, x: &Point, dir: &Point, target: f64, bound: f64) -> Option<f64> {
    let f = |t: f64| ls.value(&(x + dir * t)) - target;
    let mut t = 0.0;
    for _ in 0..NEWTON_MAX_ITER {
        let r = f(t);
        if r.abs() < NEWTON_TOL {
            return Some(t.clamp(-bound, bound));
        }
        let slope = ls.gradient(&(x + dir * t)).dot(dir);
        if slope.abs() < 1e-300 || !slope.is_finite() {
            break;
        }
        let step = r / slope;
        t -= step;
        if !t.is_finite() || t.abs() > 4.0 * bound {
            break;
        }
        if step.abs() < 1e-17 {
            return Some(t.clamp(-bound, bound));
        }
    }
    // Bisection fallback on the admissible bracket.
    let (mut lo, mut hi) = (-bound, bound);
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() < NEWTON_TOL || hi - lo < 1e-16 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

pub fn build_deformation(
    mesh: &Mesh,
    ls: &dyn LevelSet,
    nls: &NodalLevelSet,
    ct: &CutTopology,
) -> Result<MeshDeformation, DeformationError> {
    let mut deformation = MeshDeformation::identity(mesh);
    // Smallest diameter among the cut elements sharing each node.
    let mut h_node = vec![f64::INFINITY; mesh.n_p2_nodes()];
    let mut target = vec![f64::NAN; mesh.n_p2_nodes()];
    // Sum of ∇I_hφ over adjacent cut elements, used where ∇φ vanishes.
    let mut discrete_grad = vec![Point::zeros(); mesh.n_p2_nodes()];
    for e in ct.cut_elements() {
        let [a, b, c] = nls.element_values(mesh, e);
        let nodal = [a, b, c, 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)];
        let geo = AffineElement::new(mesh.element_vertices(e));
        let g = geo.grad_lambda[0] * a + geo.grad_lambda[1] * b + geo.grad_lambda[2] * c;
        for (k, node) in mesh.p2_nodes(e).into_iter().enumerate() {
            h_node[node] = h_node[node].min(mesh.diameter(e));
            target[node] = nodal[k];
            discrete_grad[node] += g;
        }
    }
    for node in 0..mesh.n_p2_nodes() {
        if !h_node[node].is_finite() {
            continue;
        }
        let x = mesh.p2_node_position(node);
        let mut grad = ls.gradient(&x);
        if !(grad.norm() > 0.0) {
            grad = discrete_grad[node];
        }
        let norm = grad.norm();
        let err = || DeformationError::RootNotFound { node, x: x.x, y: x.y };
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(err());
        }
        let dir = grad / norm;
        let t = line_search(ls, &x, &dir, target[node], CLAMP * h_node[node]).ok_or_else(err)?;
        deformation.displacement[node] = dir * t;
    }
    for e in 0..mesh.n_elements() {
        deformation.active[e] = mesh.p2_nodes(e).iter().any(|&n| deformation.displacement[n] != Point::zeros());
    }
    Ok(deformation)
}

/// Quadrature rule pushed forward through `Ψ_h`, keeping the undeformed
/// points and Jacobians for basis evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct MappedQuadrature {
    pub reference_points: Vec<Point>,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub normals: Option<Vec<Point>>,
    pub jacobians: Vec<Matrix2<f64>>,
}

impl MappedQuadrature {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Volume rules get `|det DΨ|`; interface rules (those carrying normals) get
/// the tangential stretch `|DΨ τ|` and cofactor-transformed normals.
pub fn map_rule(
    rule: &QuadratureRule,
    deformation: &MeshDeformation,
    mesh: &Mesh,
    element: usize,
) -> Result<MappedQuadrature, DeformationError> {
    if !deformation.is_active(element) {
        return Ok(MappedQuadrature {
            reference_points: rule.points.clone(),
            points: rule.points.clone(),
            weights: rule.weights.clone(),
            normals: rule.normals.clone(),
            jacobians: vec![Matrix2::identity(); rule.len()],
        });
    }
    let geo = AffineElement::new(mesh.element_vertices(element));
    let n = rule.len();
    let mut out = MappedQuadrature {
        reference_points: rule.points.clone(),
        points: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
        normals: rule.normals.as_ref().map(|_| Vec::with_capacity(n)),
        jacobians: Vec::with_capacity(n),
    };
    for q in 0..n {
        let (y, jac) = deformation.map(mesh, element, &geo, &rule.points[q]);
        let det = jac.determinant();
        if !(det > 0.0) {
            return Err(DeformationError::NotInjective { element, det });
        }
        let w = match &rule.normals {
            None => rule.weights[q] * det,
            Some(normals) => {
                let nrm = normals[q];
                let tangent = Point::new(-nrm.y, nrm.x);
                let cof = Matrix2::new(jac[(1, 1)], -jac[(1, 0)], -jac[(0, 1)], jac[(0, 0)]);
                out.normals.as_mut().unwrap().push((cof * nrm).normalize());
                rule.weights[q] * (jac * tangent).norm()
            }
        };
        out.points.push(y);
        out.weights.push(w);
        out.jacobians.push(jac);
    }
    Ok(out)
}
