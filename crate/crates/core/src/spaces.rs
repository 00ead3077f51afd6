//! Taylor–Hood P2/P1 spaces and their phase-wise enrichment.
//!
//! Enrichment is realised by doubling: every node whose support meets both
//! phases carries one copy per phase, and on a cut element each copy is
//! integrated only against its own phase. A phase-`i` copy exists exactly on
//! the nodes of the extended domain `Ω_i^+`, so evaluating the phase-`i`
//! coefficients on a whole element is the canonical extension `E_{i,h}`.
//!
//! Spaces on the deformed mesh are never built explicitly: basis functions
//! are evaluated at undeformed points and their gradients are pulled through
//! `DΨ_h^{-T}`.

use nalgebra::Matrix2;
use thiserror::Error;

use crate::basis::{p1_values, p2_gradients, p2_values, AffineElement};
use crate::cut::{decompose, interface_rule, subdomain_rule, CutError};
use crate::isoparam::{build_deformation, map_rule, DeformationError, MappedQuadrature, MeshDeformation};
use crate::levelset::{classify, interpolate_p1, CutTopology, ElementClass, LevelSet, NodalLevelSet, Phase};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{triangle_rule, QuadratureError};

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("element {element} has no active {phase:?} copy")]
    InactivePhase { element: usize, phase: Phase },
    #[error("field has {got} coefficients but the layout expects {expected}")]
    CoefficientCount { got: usize, expected: usize },
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Deformation(#[from] DeformationError),
}

#[derive(Clone, Debug)]
pub struct DofLayout {
    /// Velocity slot (a node copy carrying two components) per P2 node and
    /// phase. Without velocity enrichment both entries are the same slot.
    velocity_slots: Vec<[Option<usize>; 2]>,
    pressure_dofs: Vec<[Option<usize>; 2]>,
    n_velocity_slots: usize,
    n_pressure: usize,
    boundary_slots: Vec<bool>,
    enrich_velocity: bool,
}

impl DofLayout {
    pub fn n_velocity_dofs(&self) -> usize {
        2 * self.n_velocity_slots
    }

    pub fn n_pressure_dofs(&self) -> usize {
        self.n_pressure
    }

    pub fn n_dofs(&self) -> usize {
        self.n_velocity_dofs() + self.n_pressure
    }

    pub fn n_velocity_slots(&self) -> usize {
        self.n_velocity_slots
    }

    pub fn enrich_velocity(&self) -> bool {
        self.enrich_velocity
    }

    pub fn velocity_slot(&self, node: usize, phase: Phase) -> Option<usize> {
        self.velocity_slots[node][phase.index()]
    }

    pub fn pressure_dof(&self, vertex: usize, phase: Phase) -> Option<usize> {
        self.pressure_dofs[vertex][phase.index()]
    }

    pub fn is_boundary_slot(&self, slot: usize) -> bool {
        self.boundary_slots[slot]
    }

    /// Number of P2 nodes with two distinct velocity copies.
    pub fn doubled_velocity_nodes(&self) -> usize {
        self.velocity_slots.iter().filter(|s| matches!(s, [Some(a), Some(b)] if a != b)).count()
    }

    pub fn doubled_pressure_nodes(&self) -> usize {
        self.pressure_dofs.iter().filter(|s| matches!(s, [Some(a), Some(b)] if a != b)).count()
    }

    pub fn element_velocity_slots(&self, mesh: &Mesh, element: usize, phase: Phase) -> Option<[usize; 6]> {
        let nodes = mesh.p2_nodes(element);
        let mut out = [0; 6];
        for k in 0..6 {
            out[k] = self.velocity_slot(nodes[k], phase)?;
        }
        Some(out)
    }

    pub fn element_pressure_dofs(&self, mesh: &Mesh, element: usize, phase: Phase) -> Option<[usize; 3]> {
        let vs = mesh.elements()[element];
        let mut out = [0; 3];
        for k in 0..3 {
            out[k] = self.pressure_dof(vs[k], phase)?;
        }
        Some(out)
    }
}

/// Numbers velocity slots and pressure dofs. Pressure is always enriched;
/// velocity only when `enrich_velocity` is set.
pub fn build_layout(mesh: &Mesh, ct: &CutTopology, enrich_velocity: bool) -> DofLayout {
    let mut node_phase = vec![[false; 2]; mesh.n_p2_nodes()];
    for e in 0..mesh.n_elements() {
        for phase in Phase::BOTH {
            if ct.in_extended(phase, e) {
                for n in mesh.p2_nodes(e) {
                    node_phase[n][phase.index()] = true;
                }
            }
        }
    }
    let mut velocity_slots = vec![[None; 2]; mesh.n_p2_nodes()];
    let mut n_slots = 0;
    for (node, present) in node_phase.iter().enumerate() {
        if enrich_velocity {
            for i in 0..2 {
                if present[i] {
                    velocity_slots[node][i] = Some(n_slots);
                    n_slots += 1;
                }
            }
        } else {
            velocity_slots[node] = [Some(n_slots); 2];
            n_slots += 1;
        }
    }
    let mut pressure_dofs = vec![[None; 2]; mesh.n_vertices()];
    let mut n_pressure = 0;
    for (v, present) in node_phase.iter().take(mesh.n_vertices()).enumerate() {
        for i in 0..2 {
            if present[i] {
                pressure_dofs[v][i] = Some(n_pressure);
                n_pressure += 1;
            }
        }
    }
    let mut boundary_slots = vec![false; n_slots];
    let nv = mesh.n_vertices();
    for (f, face) in mesh.faces().iter().enumerate() {
        if !face.is_boundary() {
            continue;
        }
        for node in [face.vertices[0], face.vertices[1], nv + f] {
            for slot in velocity_slots[node].iter().flatten() {
                boundary_slots[*slot] = true;
            }
        }
    }
    DofLayout { velocity_slots, pressure_dofs, n_velocity_slots: n_slots, n_pressure, boundary_slots, enrich_velocity }
}

/// Shape function values with physical gradients at one point.
#[derive(Clone, Debug)]
pub struct BasisValues {
    pub p2: [f64; 6],
    pub p2_grad: [Point; 6],
    pub p1: [f64; 3],
    pub p1_grad: [Point; 3],
}

/// Evaluates the P2 and P1 bases at the undeformed point `x`, with
/// gradients mapped by `DΨ^{-T}`.
pub fn basis_at(geo: &AffineElement, x: &Point, jac: &Matrix2<f64>) -> BasisValues {
    let l = geo.barycentric(x);
    let jit = jac.try_inverse().expect("DΨ is invertible").transpose();
    let mut p2_grad = p2_gradients(&l, &geo.grad_lambda);
    for g in p2_grad.iter_mut() {
        *g = jit * *g;
    }
    let p1_grad = geo.grad_lambda.map(|g| jit * g);
    BasisValues { p2: p2_values(&l), p2_grad, p1: p1_values(&l), p1_grad }
}

#[derive(Clone, Copy, Debug)]
pub struct DiscretizationOptions {
    pub enrich_velocity: bool,
    pub isoparametric: bool,
}

impl Default for DiscretizationOptions {
    fn default() -> Self {
        Self { enrich_velocity: true, isoparametric: true }
    }
}

/// Mesh, geometry and dof layout for one level.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: Mesh,
    pub nodal: NodalLevelSet,
    pub topology: CutTopology,
    pub deformation: MeshDeformation,
    pub layout: DofLayout,
    pub options: DiscretizationOptions,
}

impl Discretization {
    pub fn new(mesh: Mesh, ls: &dyn LevelSet, options: DiscretizationOptions) -> Result<Self, SpaceError> {
        let nodal = interpolate_p1(ls, &mesh);
        let topology = classify(&nodal, &mesh);
        let deformation = if options.isoparametric {
            build_deformation(&mesh, ls, &nodal, &topology)?
        } else {
            MeshDeformation::identity(&mesh)
        };
        let layout = build_layout(&mesh, &topology, options.enrich_velocity);
        Ok(Self { mesh, nodal, topology, deformation, layout, options })
    }

    pub fn geometry(&self, element: usize) -> AffineElement {
        AffineElement::new(self.mesh.element_vertices(element))
    }

    /// Mapped volume rules per phase present on the element.
    pub fn volume_rules(&self, element: usize, degree: usize) -> Result<Vec<(Phase, MappedQuadrature)>, SpaceError> {
        let tri = self.mesh.element_vertices(element);
        let mut out = Vec::with_capacity(2);
        match self.topology.class(element) {
            ElementClass::Neg | ElementClass::Pos => {
                let phase = if self.topology.class(element) == ElementClass::Neg { Phase::One } else { Phase::Two };
                let rule = triangle_rule(&tri, degree)?;
                out.push((phase, map_rule(&rule, &self.deformation, &self.mesh, element)?));
            }
            ElementClass::Cut => {
                let d = decompose(&tri, &self.nodal.element_values(&self.mesh, element))?;
                for phase in Phase::BOTH {
                    let rule = subdomain_rule(&d, phase, degree)?;
                    out.push((phase, map_rule(&rule, &self.deformation, &self.mesh, element)?));
                }
            }
        }
        Ok(out)
    }

    /// Mapped interface rule on a cut element.
    pub fn interface_rule(&self, element: usize, degree: usize) -> Result<Option<MappedQuadrature>, SpaceError> {
        if !self.topology.is_cut(element) {
            return Ok(None);
        }
        let tri = self.mesh.element_vertices(element);
        let d = decompose(&tri, &self.nodal.element_values(&self.mesh, element))?;
        let rule = interface_rule(&d, degree)?;
        Ok(Some(map_rule(&rule, &self.deformation, &self.mesh, element)?))
    }

    /// Basis of the phase copy on `element` at reference coordinates
    /// `(ξ, η)`.
    pub fn eval_basis(&self, element: usize, phase: Phase, reference: [f64; 2]) -> Result<BasisValues, SpaceError> {
        if !self.topology.in_extended(phase, element) {
            return Err(SpaceError::InactivePhase { element, phase });
        }
        let geo = self.geometry(element);
        let x = geo.point(&[1.0 - reference[0] - reference[1], reference[0], reference[1]]);
        let (_, jac) = self.deformation.map(&self.mesh, element, &geo, &x);
        Ok(basis_at(&geo, &x, &jac))
    }

    /// Nodal interpolation of a phase-wise velocity field. Node copies take
    /// the branch of their own phase at the deformed node position; shared
    /// (unenriched) nodes take the branch on whose side the node lies.
    pub fn interpolate_velocity(&self, ls: &dyn LevelSet, u: impl Fn(Phase, &Point) -> Point) -> FieldFunction {
        let mut coefficients = vec![0.0; self.layout.n_velocity_dofs()];
        for node in 0..self.mesh.n_p2_nodes() {
            let y = self.mesh.p2_node_position(node) + self.deformation.displacement(node);
            let slots = self.layout.velocity_slots[node];
            for phase in Phase::BOTH {
                let Some(slot) = slots[phase.index()] else { continue };
                let shared = slots[phase.other().index()] == Some(slot);
                let branch = if shared { Phase::of_value(ls.value(&y)) } else { phase };
                let v = u(branch, &y);
                coefficients[2 * slot] = v.x;
                coefficients[2 * slot + 1] = v.y;
            }
        }
        FieldFunction { kind: FieldKind::Velocity, coefficients }
    }

    pub fn interpolate_pressure(&self, p: impl Fn(Phase, &Point) -> f64) -> FieldFunction {
        let mut coefficients = vec![0.0; self.layout.n_pressure_dofs()];
        for v in 0..self.mesh.n_vertices() {
            let y = self.mesh.vertices()[v] + self.deformation.displacement(v);
            for phase in Phase::BOTH {
                if let Some(dof) = self.layout.pressure_dof(v, phase) {
                    coefficients[dof] = p(phase, &y);
                }
            }
        }
        FieldFunction { kind: FieldKind::Pressure, coefficients }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Velocity,
    Pressure,
}

#[derive(Clone, Debug)]
pub struct FieldFunction {
    pub kind: FieldKind,
    pub coefficients: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldSample {
    Scalar { value: f64, gradient: Point },
    /// `gradient[(i, j)] = ∂u_i/∂x_j`.
    Vector { value: Point, gradient: Matrix2<f64> },
}

impl FieldFunction {
    pub fn zeros(layout: &DofLayout, kind: FieldKind) -> Self {
        let n = match kind {
            FieldKind::Velocity => layout.n_velocity_dofs(),
            FieldKind::Pressure => layout.n_pressure_dofs(),
        };
        Self { kind, coefficients: vec![0.0; n] }
    }

    fn check(&self, layout: &DofLayout) -> Result<(), SpaceError> {
        let expected = match self.kind {
            FieldKind::Velocity => layout.n_velocity_dofs(),
            FieldKind::Pressure => layout.n_pressure_dofs(),
        };
        if self.coefficients.len() != expected {
            return Err(SpaceError::CoefficientCount { got: self.coefficients.len(), expected });
        }
        Ok(())
    }

    /// Phase-`i` polynomial of `element` evaluated with basis values `b`,
    /// ignoring where the interface lies.
    pub fn sample(
        &self,
        disc: &Discretization,
        phase: Phase,
        element: usize,
        b: &BasisValues,
    ) -> Result<FieldSample, SpaceError> {
        self.check(&disc.layout)?;
        let inactive = || SpaceError::InactivePhase { element, phase };
        match self.kind {
            FieldKind::Velocity => {
                let slots = disc.layout.element_velocity_slots(&disc.mesh, element, phase).ok_or_else(inactive)?;
                let mut value = Point::zeros();
                let mut gradient = Matrix2::zeros();
                for k in 0..6 {
                    let c = Point::new(self.coefficients[2 * slots[k]], self.coefficients[2 * slots[k] + 1]);
                    value += c * b.p2[k];
                    gradient += c * b.p2_grad[k].transpose();
                }
                Ok(FieldSample::Vector { value, gradient })
            }
            FieldKind::Pressure => {
                let dofs = disc.layout.element_pressure_dofs(&disc.mesh, element, phase).ok_or_else(inactive)?;
                let mut value = 0.0;
                let mut gradient = Point::zeros();
                for k in 0..3 {
                    value += self.coefficients[dofs[k]] * b.p1[k];
                    gradient += b.p1_grad[k] * self.coefficients[dofs[k]];
                }
                Ok(FieldSample::Scalar { value, gradient })
            }
        }
    }

    /// Canonical extension `E_{i,h}`: the phase-`i` copy evaluated anywhere
    /// on an element of `Ω_i^+`.
    pub fn extend_eval(
        &self,
        disc: &Discretization,
        phase: Phase,
        element: usize,
        reference: [f64; 2],
    ) -> Result<FieldSample, SpaceError> {
        let b = disc.eval_basis(element, phase, reference)?;
        self.sample(disc, phase, element, &b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{level_set_by_name, Circle};

    fn two_triangles() -> Mesh {
        let vs = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 1.0)];
        Mesh::from_parts(vs, vec![[0, 1, 2], [1, 3, 2]]).unwrap()
    }

    #[test]
    fn no_cut_no_enrichment() {
        let m = Mesh::structured(4).unwrap();
        let ls = Circle::new(Point::zeros(), 5.0);
        let disc = Discretization::new(m.clone(), &ls, DiscretizationOptions::default()).unwrap();
        assert_eq!(disc.layout.n_velocity_dofs(), 2 * m.n_p2_nodes());
        assert_eq!(disc.layout.n_pressure_dofs(), m.n_vertices());
    }

    #[test]
    fn single_cut_element_doubles_its_support() {
        // Only element 0 is cut: vertex 0 negative, the rest positive, so
        // every node of element 0 gets two copies.
        let m = two_triangles();
        let nls = NodalLevelSet { values: vec![-1.0, 1.0, 1.0, 1.0] };
        let ct = classify(&nls, &m);
        assert_eq!(ct.classes, vec![ElementClass::Cut, ElementClass::Pos]);
        let layout = build_layout(&m, &ct, true);
        assert_eq!(layout.doubled_velocity_nodes(), 6);
        assert_eq!(layout.doubled_pressure_nodes(), 3);
        assert_eq!(layout.n_velocity_dofs(), 2 * m.n_p2_nodes() + 12);
        assert_eq!(layout.n_pressure_dofs(), m.n_vertices() + 3);
        let plain = build_layout(&m, &ct, false);
        assert_eq!(plain.n_velocity_dofs(), 2 * m.n_p2_nodes());
        assert_eq!(plain.n_pressure_dofs(), m.n_vertices() + 3);
    }

    #[test]
    fn boundary_slots_cover_boundary_nodes() {
        let m = Mesh::structured(2).unwrap();
        let ls = level_set_by_name("circle").unwrap();
        let disc = Discretization::new(m.clone(), ls.as_ref(), DiscretizationOptions::default()).unwrap();
        let nodes = (0..m.n_p2_nodes())
            .filter(|&n| Phase::BOTH.iter().any(|&ph| disc.layout.velocity_slot(n, ph).is_some_and(|s| disc.layout.is_boundary_slot(s))))
            .count();
        // 8 boundary edges: 8 vertices + 8 midpoints.
        assert_eq!(nodes, 16);
    }

    #[test]
    fn inactive_phase_rejected() {
        let m = Mesh::structured(8).unwrap();
        let ls = level_set_by_name("circle").unwrap();
        let disc = Discretization::new(m, ls.as_ref(), DiscretizationOptions::default()).unwrap();
        let corner = (0..disc.mesh.n_elements()).find(|&e| disc.topology.class(e) == ElementClass::Pos).unwrap();
        assert!(matches!(
            disc.eval_basis(corner, Phase::One, [0.2, 0.2]),
            Err(SpaceError::InactivePhase { .. })
        ));
    }

    #[test]
    fn extension_of_linear_pressure() {
        let m = Mesh::structured(8).unwrap();
        let ls = level_set_by_name("circle").unwrap();
        for iso in [false, true] {
            let opts = DiscretizationOptions { enrich_velocity: true, isoparametric: iso };
            let disc = Discretization::new(m.clone(), ls.as_ref(), opts).unwrap();
            let p = disc.interpolate_pressure(|_, x| x.x);
            for e in disc.topology.cut_elements() {
                for phase in Phase::BOTH {
                    let FieldSample::Scalar { value, gradient } = p.extend_eval(&disc, phase, e, [0.3, 0.3]).unwrap() else {
                        panic!()
                    };
                    if !iso {
                        let x = disc.geometry(e).point(&[0.4, 0.3, 0.3]);
                        assert!((value - x.x).abs() < 1e-14);
                        assert!((gradient - Point::new(1.0, 0.0)).norm() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn phase_restrictions_continuous_across_faces() {
        let m = Mesh::structured(8).unwrap();
        let ls = level_set_by_name("circle").unwrap();
        let disc = Discretization::new(m, ls.as_ref(), DiscretizationOptions::default()).unwrap();
        let n = disc.layout.n_velocity_dofs();
        let u = FieldFunction { kind: FieldKind::Velocity, coefficients: (0..n).map(|i| (i as f64 * 0.37).sin()).collect() };
        let ct = &disc.topology;
        for face in disc.mesh.faces() {
            let (a, Some(b)) = face.elements else { continue };
            for phase in Phase::BOTH {
                if !(ct.in_extended(phase, a) && ct.in_extended(phase, b)) {
                    continue;
                }
                let [p, q] = face.vertices.map(|v| disc.mesh.vertices()[v]);
                for t in [0.1, 0.5, 0.8] {
                    let x = p + (q - p) * t;
                    let eval = |e: usize| {
                        let geo = disc.geometry(e);
                        let (_, jac) = disc.deformation.map(&disc.mesh, e, &geo, &x);
                        match u.sample(&disc, phase, e, &basis_at(&geo, &x, &jac)).unwrap() {
                            FieldSample::Vector { value, .. } => value,
                            _ => unreachable!(),
                        }
                    };
                    assert!((eval(a) - eval(b)).norm() < 1e-12);
                }
            }
        }
    }
}
