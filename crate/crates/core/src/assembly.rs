//! Assembly of the stabilized saddle-point system
//!
//! ```text
//! k((u,p),(v,q)) = A(u,v) + b(u,q) + b(v,p) − J(p,q)
//! A(u,v) = a(u,v) + N((u,0),(v,0))
//! b(u,q) = −Σ (div u, q)_{Ω_i} + N((u,0),(0,q))
//! ```
//!
//! Unknowns are ordered velocity (two components per slot), pressure, and a
//! final Lagrange multiplier for the zero-mean pressure constraint.

use thiserror::Error;

use crate::basis::AffineElement;
use crate::levelset::Phase;
use crate::mesh::Point;
use crate::problem::{MaterialParams, ParamError, ProblemData};
use crate::sparse::{SparseMatrix, Triplets};
use crate::spaces::{basis_at, Discretization, SpaceError};

#[derive(Debug, Error, PartialEq)]
pub enum AssemblyError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("block dimensions do not match: {0}")]
    Dimension(String),
}

#[derive(Clone, Copy, Debug)]
pub struct QuadratureOptions {
    pub volume_degree: usize,
    pub interface_degree: usize,
}

impl QuadratureOptions {
    /// Degree 4 on affine elements, 6 when the mesh is deformed; five Gauss
    /// points on the interface.
    pub fn for_discretization(disc: &Discretization) -> Self {
        Self { volume_degree: if disc.options.isoparametric { 6 } else { 4 }, interface_degree: 9 }
    }
}

/// Length scale in the Nitsche penalty `λ/h {{μ}}`: the smallest altitude
/// `2|T|/diam(T)` of the undeformed cut element.
pub fn nitsche_h(mesh: &crate::mesh::Mesh, element: usize) -> f64 {
    2.0 * mesh.area(element) / mesh.diameter(element)
}

/// `κ₁ = 1` if more than half of the element lies in phase one.
pub fn nitsche_weights(cut_fraction: f64) -> [f64; 2] {
    if cut_fraction <= 0.5 {
        [0.0, 1.0]
    } else {
        [1.0, 0.0]
    }
}

fn vel_dof(slot: usize, comp: usize) -> usize {
    2 * slot + comp
}

/// `a(u,v) = ½ Σ μ_i (D(u), D(v))_{Ω_i}` with `D(u) = ∇u + ∇uᵀ`.
pub fn assemble_viscosity(
    disc: &Discretization,
    params: &MaterialParams,
    quad: &QuadratureOptions,
) -> Result<SparseMatrix, AssemblyError> {
    let n = disc.layout.n_velocity_dofs();
    let mut t = Triplets::new(n, n);
    let mut local = [[0.0; 12]; 12];
    for e in 0..disc.mesh.n_elements() {
        let geo = disc.geometry(e);
        for (phase, rule) in disc.volume_rules(e, quad.volume_degree)? {
            let slots = disc.layout.element_velocity_slots(&disc.mesh, e, phase).expect("phase active on element");
            let mu = params.mu(phase);
            local.iter_mut().for_each(|r| r.fill(0.0));
            for q in 0..rule.len() {
                let b = basis_at(&geo, &rule.reference_points[q], &rule.jacobians[q]);
                let w = rule.weights[q] * mu;
                for i in 0..6 {
                    for j in 0..6 {
                        let (gi, gj) = (b.p2_grad[i], b.p2_grad[j]);
                        let dot = gi.dot(&gj);
                        for k in 0..2 {
                            for l in 0..2 {
                                let diag = if k == l { dot } else { 0.0 };
                                // test (i,k), trial (j,l)
                                local[2 * i + k][2 * j + l] += w * (diag + gj[k] * gi[l]);
                            }
                        }
                    }
                }
            }
            scatter_velocity(&mut t, &slots, &local);
        }
    }
    Ok(t.into_csr())
}

fn scatter_velocity(t: &mut Triplets, slots: &[usize; 6], local: &[[f64; 12]; 12]) {
    for i in 0..12 {
        for j in 0..12 {
            t.push(vel_dof(slots[i / 2], i % 2), vel_dof(slots[j / 2], j % 2), local[i][j]);
        }
    }
}

/// Interface contributions of `N`.
#[derive(Clone, Debug)]
pub struct NitscheForms {
    /// `N((u,0),(v,0))`, velocity × velocity.
    pub velocity: SparseMatrix,
    /// `N((u,0),(0,q)) = ({{q}} n, [[u]])_Γ`, pressure rows × velocity columns.
    pub coupling: SparseMatrix,
    /// Penalty part `(λ/h {{μ}} [[u]], [[v]])_Γ` alone.
    pub penalty: SparseMatrix,
    /// `f(v) = (f, κ₁ v|Ω₂ + κ₂ v|Ω₁)_Γ`.
    pub surface_load: Vec<f64>,
}

/// One trace function on Γ: a velocity or pressure basis function of one
/// phase copy, with its contribution to `[[·]]` and `{{σ(·)·n}}`.
#[derive(Clone, Copy)]
struct Trace {
    dof: usize,
    pressure: bool,
    jump: Point,
    flux: Point,
    /// Weight in the swapped average `κ₂ v|Ω₁ + κ₁ v|Ω₂`.
    swapped: Point,
}

pub fn assemble_nitsche(
    disc: &Discretization,
    params: &MaterialParams,
    data: Option<&ProblemData>,
    quad: &QuadratureOptions,
) -> Result<NitscheForms, AssemblyError> {
    params.validate()?;
    let nv = disc.layout.n_velocity_dofs();
    let np = disc.layout.n_pressure_dofs();
    let mut tv = Triplets::new(nv, nv);
    let mut tp = Triplets::new(nv, nv);
    let mut tc = Triplets::new(np, nv);
    let mut load = vec![0.0; nv];
    let mut traces: Vec<Trace> = Vec::with_capacity(30);
    for e in disc.topology.cut_elements() {
        let rule = disc.interface_rule(e, quad.interface_degree)?.expect("cut element has an interface");
        let normals = rule.normals.as_ref().expect("interface rule carries normals");
        let geo = disc.geometry(e);
        let kappa = nitsche_weights(disc.topology.cut_fraction[e]);
        let mu_avg = kappa[0] * params.mu[0] + kappa[1] * params.mu[1];
        let penalty = params.lambda / nitsche_h(&disc.mesh, e) * mu_avg;
        let slots = Phase::BOTH.map(|ph| disc.layout.element_velocity_slots(&disc.mesh, e, ph).unwrap());
        let pdofs = Phase::BOTH.map(|ph| disc.layout.element_pressure_dofs(&disc.mesh, e, ph).unwrap());
        for q in 0..rule.len() {
            let n = normals[q];
            let w = rule.weights[q];
            let b = basis_at(&geo, &rule.reference_points[q], &rule.jacobians[q]);
            traces.clear();
            for phase in Phase::BOTH {
                let s = phase.index();
                let sign = if phase == Phase::One { 1.0 } else { -1.0 };
                let mu = params.mu(phase);
                for k in 0..6 {
                    let g = b.p2_grad[k];
                    let gn = g.dot(&n);
                    for c in 0..2 {
                        let mut e_c = Point::zeros();
                        e_c[c] = 1.0;
                        // D(N e_c) n = e_c (∇N·n) + ∇N n_c
                        let dn = e_c * gn + g * n[c];
                        traces.push(Trace {
                            dof: vel_dof(slots[s][k], c),
                            pressure: false,
                            jump: e_c * (sign * b.p2[k]),
                            flux: dn * (-kappa[s] * mu),
                            swapped: e_c * (kappa[1 - s] * b.p2[k]),
                        });
                    }
                }
                for k in 0..3 {
                    traces.push(Trace {
                        dof: pdofs[s][k],
                        pressure: true,
                        jump: Point::zeros(),
                        flux: n * (kappa[s] * b.p1[k]),
                        swapped: Point::zeros(),
                    });
                }
            }
            if let Some(data) = data {
                let f = (data.surface_force)(&rule.points[q], &n);
                for tr in traces.iter().filter(|t| !t.pressure) {
                    load[tr.dof] += w * f.dot(&tr.swapped);
                }
            }
            for ti in traces.iter().filter(|t| !t.pressure) {
                for tj in &traces {
                    if tj.pressure {
                        // test velocity ti, trial pressure tj enters as ({{p}}n, [[v]]);
                        // stored once in the pressure-row coupling block.
                        tc.push(tj.dof, ti.dof, w * tj.flux.dot(&ti.jump));
                    } else {
                        let jj = tj.jump.dot(&ti.jump);
                        tv.push(ti.dof, tj.dof, w * (tj.flux.dot(&ti.jump) + ti.flux.dot(&tj.jump)));
                        tp.push(ti.dof, tj.dof, w * penalty * jj);
                    }
                }
            }
        }
    }
    let penalty = tp.into_csr();
    let consistency = tv.into_csr();
    let mut all = Triplets::new(nv, nv);
    consistency.push_into(&mut all, 0, 0, 1.0);
    penalty.push_into(&mut all, 0, 0, 1.0);
    Ok(NitscheForms { velocity: all.into_csr(), coupling: tc.into_csr(), penalty, surface_load: load })
}

/// `b(u,q)` as pressure rows × velocity columns; the interface coupling is
/// added when `nitsche` is given.
pub fn assemble_divergence(
    disc: &Discretization,
    quad: &QuadratureOptions,
    nitsche: Option<&NitscheForms>,
) -> Result<SparseMatrix, AssemblyError> {
    let nv = disc.layout.n_velocity_dofs();
    let np = disc.layout.n_pressure_dofs();
    let mut t = Triplets::new(np, nv);
    for e in 0..disc.mesh.n_elements() {
        let geo = disc.geometry(e);
        for (phase, rule) in disc.volume_rules(e, quad.volume_degree)? {
            let slots = disc.layout.element_velocity_slots(&disc.mesh, e, phase).unwrap();
            let pdofs = disc.layout.element_pressure_dofs(&disc.mesh, e, phase).unwrap();
            let mut local = [[0.0; 12]; 3];
            for q in 0..rule.len() {
                let b = basis_at(&geo, &rule.reference_points[q], &rule.jacobians[q]);
                let w = rule.weights[q];
                for m in 0..3 {
                    for k in 0..6 {
                        for c in 0..2 {
                            local[m][2 * k + c] -= w * b.p1[m] * b.p2_grad[k][c];
                        }
                    }
                }
            }
            for m in 0..3 {
                for j in 0..12 {
                    t.push(pdofs[m], vel_dof(slots[j / 2], j % 2), local[m][j]);
                }
            }
        }
    }
    if let Some(n) = nitsche {
        n.coupling.push_into(&mut t, 0, 0, 1.0);
    }
    Ok(t.into_csr())
}

/// `J(p,q) = γ Σ_i Σ_{F∈F_i^Γ} μ_i⁻¹ h_F³ ([[∂_n E_i p]], [[∂_n E_i q]])_F`.
/// For P1 pressures the integrand is constant on each face.
pub fn assemble_ghost_penalty(disc: &Discretization, params: &MaterialParams) -> SparseMatrix {
    let np = disc.layout.n_pressure_dofs();
    let mut t = Triplets::new(np, np);
    if params.gamma == 0.0 {
        return t.into_csr();
    }
    let mesh = &disc.mesh;
    for phase in Phase::BOTH {
        let scale = params.gamma / params.mu(phase);
        for &f in &disc.topology.ghost_faces[phase.index()] {
            let face = &mesh.faces()[f];
            let (a, Some(b)) = face.elements else { continue };
            let [p, q] = face.vertices.map(|v| mesh.vertices()[v]);
            let len = (q - p).norm();
            let normal = Point::new(q.y - p.y, p.x - q.x) / len;
            let mut dofs = [0usize; 6];
            let mut jump = [0.0; 6];
            for (side, el, sign) in [(0, a, 1.0), (1, b, -1.0)] {
                let geo = AffineElement::new(mesh.element_vertices(el));
                let d = disc.layout.element_pressure_dofs(mesh, el, phase).expect("ghost face inside Ω_i^+");
                for k in 0..3 {
                    dofs[3 * side + k] = d[k];
                    jump[3 * side + k] = sign * geo.grad_lambda[k].dot(&normal);
                }
            }
            let w = scale * face.h.powi(3) * len;
            for i in 0..6 {
                for j in 0..6 {
                    t.push(dofs[i], dofs[j], w * jump[i] * jump[j]);
                }
            }
        }
    }
    t.into_csr()
}

/// Volume load `Σ ρ_i (g, v)_{Ω_i}` and the pressure mean functional
/// `q ↦ ∫_Ω q`.
pub fn assemble_rhs(
    disc: &Discretization,
    params: &MaterialParams,
    data: &ProblemData,
    quad: &QuadratureOptions,
) -> Result<(Vec<f64>, Vec<f64>), AssemblyError> {
    let mut rhs = vec![0.0; disc.layout.n_velocity_dofs()];
    let mut mean = vec![0.0; disc.layout.n_pressure_dofs()];
    for e in 0..disc.mesh.n_elements() {
        let geo = disc.geometry(e);
        for (phase, rule) in disc.volume_rules(e, quad.volume_degree)? {
            let slots = disc.layout.element_velocity_slots(&disc.mesh, e, phase).unwrap();
            let pdofs = disc.layout.element_pressure_dofs(&disc.mesh, e, phase).unwrap();
            let rho = params.rho(phase);
            for q in 0..rule.len() {
                let b = basis_at(&geo, &rule.reference_points[q], &rule.jacobians[q]);
                let w = rule.weights[q];
                let g = (data.body_force)(phase, &rule.points[q]) * rho;
                for k in 0..6 {
                    rhs[vel_dof(slots[k], 0)] += w * g.x * b.p2[k];
                    rhs[vel_dof(slots[k], 1)] += w * g.y * b.p2[k];
                }
                for m in 0..3 {
                    mean[pdofs[m]] += w * b.p1[m];
                }
            }
        }
    }
    Ok((rhs, mean))
}

/// All blocks of the unconstrained saddle-point system.
#[derive(Clone, Debug)]
pub struct SystemBlocks {
    /// `a(u,v)` alone.
    pub viscosity: SparseMatrix,
    /// `A = a + N((u,0),(v,0))`.
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub j: SparseMatrix,
    /// `∫_Ω ψ_k` per pressure dof.
    pub mean: Vec<f64>,
    /// Velocity right-hand side `Σ ρ_i (g,v) − f(v)`.
    pub rhs: Vec<f64>,
    /// Strongly imposed velocity values, per velocity dof.
    pub dirichlet: Vec<Option<f64>>,
}

impl SystemBlocks {
    pub fn n_velocity(&self) -> usize {
        self.a.nrows
    }

    pub fn n_pressure(&self) -> usize {
        self.j.nrows
    }

    /// `[[A, Bᵀ], [B, −J]]` without boundary conditions or constraint.
    pub fn saddle_matrix(&self) -> SparseMatrix {
        let nv = self.n_velocity();
        let n = nv + self.n_pressure();
        let mut t = Triplets::new(n, n);
        self.a.push_into(&mut t, 0, 0, 1.0);
        self.b.push_into(&mut t, nv, 0, 1.0);
        self.b.transpose().push_into(&mut t, 0, nv, 1.0);
        self.j.push_into(&mut t, nv, nv, -1.0);
        t.into_csr()
    }

    /// `k((u,p),(v,q))`.
    pub fn k(&self, u: &[f64], p: &[f64], v: &[f64], q: &[f64]) -> f64 {
        self.a.bilinear(v, u) + self.b.bilinear(q, u) + self.b.bilinear(p, v) - self.j.bilinear(q, p)
    }

    /// `|||(u,p)|||² = A(u,u) + Σ_i ‖μ_i^{-1/2} E_i p‖²_{Ω_i^+} + J(p,p)`;
    /// the middle term is passed in as `extension_norm_sq`.
    pub fn triple_norm_sq(&self, u: &[f64], p: &[f64], extension_norm_sq: f64) -> f64 {
        self.a.bilinear(u, u) + extension_norm_sq + self.j.bilinear(p, p)
    }
}

/// `Σ_i μ_i⁻¹ ‖E_i p‖²` over the whole (deformed) elements of `Ω_i^+`.
pub fn pressure_extension_norm_sq(
    disc: &Discretization,
    params: &MaterialParams,
    p: &[f64],
    degree: usize,
) -> Result<f64, AssemblyError> {
    let mut total = 0.0;
    for e in 0..disc.mesh.n_elements() {
        let tri = disc.mesh.element_vertices(e);
        let geo = disc.geometry(e);
        let rule = crate::quadrature::triangle_rule(&tri, degree).map_err(SpaceError::from)?;
        let mapped = crate::isoparam::map_rule(&rule, &disc.deformation, &disc.mesh, e).map_err(SpaceError::from)?;
        for phase in Phase::BOTH {
            let Some(dofs) = disc.layout.element_pressure_dofs(&disc.mesh, e, phase) else { continue };
            if !disc.topology.in_extended(phase, e) {
                continue;
            }
            for q in 0..mapped.len() {
                let b = basis_at(&geo, &mapped.reference_points[q], &mapped.jacobians[q]);
                let v: f64 = (0..3).map(|k| p[dofs[k]] * b.p1[k]).sum();
                total += mapped.weights[q] * v * v / params.mu(phase);
            }
        }
    }
    Ok(total)
}

/// Assembles every block. The interface load enters the momentum balance
/// with a minus sign: partial integration of `div σ` with
/// `σ = −μD(u) + pI` leaves `+({{σn}},[[v]]) + ([[σn]], κ₂v₁ + κ₁v₂)` on the
/// left-hand side.
pub fn assemble_blocks(
    disc: &Discretization,
    params: &MaterialParams,
    data: &ProblemData,
    quad: &QuadratureOptions,
) -> Result<SystemBlocks, AssemblyError> {
    params.validate()?;
    let viscosity = assemble_viscosity(disc, params, quad)?;
    let nitsche = assemble_nitsche(disc, params, Some(data), quad)?;
    let b = assemble_divergence(disc, quad, Some(&nitsche))?;
    let j = assemble_ghost_penalty(disc, params);
    let (mut rhs, mean) = assemble_rhs(disc, params, data, quad)?;
    for (r, f) in rhs.iter_mut().zip(&nitsche.surface_load) {
        *r -= f;
    }
    let nv = disc.layout.n_velocity_dofs();
    let mut t = Triplets::new(nv, nv);
    viscosity.push_into(&mut t, 0, 0, 1.0);
    nitsche.velocity.push_into(&mut t, 0, 0, 1.0);
    let a = t.into_csr();

    let mut dirichlet = vec![None; nv];
    for node in 0..disc.mesh.n_p2_nodes() {
        for phase in Phase::BOTH {
            let Some(slot) = disc.layout.velocity_slot(node, phase) else { continue };
            if disc.layout.is_boundary_slot(slot) {
                let y = disc.mesh.p2_node_position(node) + disc.deformation.displacement(node);
                let g = (data.boundary_velocity)(&y);
                dirichlet[vel_dof(slot, 0)] = Some(g.x);
                dirichlet[vel_dof(slot, 1)] = Some(g.y);
            }
        }
    }
    Ok(SystemBlocks { viscosity, a, b, j, mean, rhs, dirichlet })
}

/// Linear system ready for factorization.
#[derive(Clone, Debug)]
pub struct SystemAssembly {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub n_velocity: usize,
    pub n_pressure: usize,
    pub mean: Vec<f64>,
}

impl SystemAssembly {
    pub fn n(&self) -> usize {
        self.matrix.nrows
    }

    pub fn velocity<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.n_velocity]
    }

    pub fn pressure<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.n_velocity..self.n_velocity + self.n_pressure]
    }
}

/// Builds `[[A, Bᵀ, 0], [B, −J, c], [0, cᵀ, 0]]`, eliminating Dirichlet
/// dofs symmetrically (identity rows and columns, data moved to the
/// right-hand side). With `mean_constraint = false` the last row and column
/// are left empty.
pub fn assemble_system(blocks: &SystemBlocks, mean_constraint: bool) -> Result<SystemAssembly, AssemblyError> {
    let nv = blocks.n_velocity();
    let np = blocks.n_pressure();
    if blocks.b.nrows != np || blocks.b.ncols != nv || blocks.mean.len() != np || blocks.rhs.len() != nv {
        return Err(AssemblyError::Dimension(format!(
            "A {}x{}, B {}x{}, J {}x{}, mean {}, rhs {}",
            blocks.a.nrows, blocks.a.ncols, blocks.b.nrows, blocks.b.ncols, blocks.j.nrows, blocks.j.ncols,
            blocks.mean.len(),
            blocks.rhs.len()
        )));
    }
    let n = nv + np + 1;
    let mut rhs = vec![0.0; n];
    rhs[..nv].copy_from_slice(&blocks.rhs);
    let fixed = |i: usize| if i < nv { blocks.dirichlet[i] } else { None };
    let mut t = Triplets::new(n, n);
    let push = |t: &mut Triplets, rhs: &mut Vec<f64>, r: usize, c: usize, v: f64| match (fixed(r), fixed(c)) {
        (Some(_), _) => {}
        (None, Some(g)) => rhs[r] -= v * g,
        (None, None) => t.push(r, c, v),
    };
    for (r, c, v) in blocks.a.iter() {
        push(&mut t, &mut rhs, r, c, v);
    }
    for (r, c, v) in blocks.b.iter() {
        push(&mut t, &mut rhs, nv + r, c, v);
        push(&mut t, &mut rhs, c, nv + r, v);
    }
    for (r, c, v) in blocks.j.iter() {
        t.push(nv + r, nv + c, -v);
    }
    if mean_constraint {
        for (k, &c) in blocks.mean.iter().enumerate() {
            t.push(nv + k, n - 1, c);
            t.push(n - 1, nv + k, c);
        }
    }
    for (i, g) in blocks.dirichlet.iter().enumerate() {
        if let Some(g) = g {
            t.push(i, i, 1.0);
            rhs[i] = *g;
        }
    }
    Ok(SystemAssembly { matrix: t.into_csr(), rhs, n_velocity: nv, n_pressure: np, mean: blocks.mean.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{Circle, Plane};
    use crate::mesh::Mesh;
    use crate::spaces::DiscretizationOptions;

    fn params() -> MaterialParams {
        MaterialParams { mu: [1.0, 1.0], rho: [1.0, 1.0], lambda: 20.0, gamma: 0.1 }
    }

    fn circle_disc(enrich: bool, iso: bool) -> Discretization {
        let ls = Circle::new(Point::new(0.03, -0.02), 2.0 / 3.0);
        Discretization::new(Mesh::structured(4).unwrap(), &ls, DiscretizationOptions { enrich_velocity: enrich, isoparametric: iso })
            .unwrap()
    }

    fn interpolate(disc: &Discretization, f: impl Fn(&Point) -> Point) -> Vec<f64> {
        let ls = Circle::new(Point::zeros(), 2.0 / 3.0);
        disc.interpolate_velocity(&ls, |_, x| f(x)).coefficients
    }

    #[test]
    fn nitsche_weight_rule() {
        assert_eq!(nitsche_weights(0.7), [1.0, 0.0]);
        assert_eq!(nitsche_weights(0.5), [0.0, 1.0]);
        assert_eq!(nitsche_weights(0.2), [0.0, 1.0]);
    }

    #[test]
    fn viscosity_of_rigid_rotation_and_stretch() {
        let disc = circle_disc(true, true);
        let quad = QuadratureOptions::for_discretization(&disc);
        let a = assemble_viscosity(&disc, &params(), &quad).unwrap();
        let rot = interpolate(&disc, |x| Point::new(-x.y, x.x));
        assert!(a.bilinear(&rot, &rot).abs() < 1e-12);
        let stretch = interpolate(&disc, |x| Point::new(x.x, -x.y));
        assert!((a.bilinear(&stretch, &stretch) - 16.0).abs() < 1e-11);
    }

    #[test]
    fn viscosity_kernel_is_rigid_motions() {
        let disc = Discretization::new(
            Mesh::structured(1).unwrap(),
            &Circle::new(Point::zeros(), 5.0),
            DiscretizationOptions { enrich_velocity: false, isoparametric: false },
        )
        .unwrap();
        let quad = QuadratureOptions::for_discretization(&disc);
        let a = assemble_viscosity(&disc, &params(), &quad).unwrap().to_dense();
        let n = a.len();
        // Rank via Gaussian elimination with full pivoting.
        let mut m = a.clone();
        let mut rank = 0;
        let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
        let mut used_cols = vec![false; n];
        for r in 0..n {
            let mut best = (0.0, 0, 0);
            for i in r..n {
                for j in 0..n {
                    if !used_cols[j] && m[i][j].abs() > best.0 {
                        best = (m[i][j].abs(), i, j);
                    }
                }
            }
            if best.0 < 1e-10 * scale {
                break;
            }
            m.swap(r, best.1);
            used_cols[best.2] = true;
            for i in r + 1..n {
                let f = m[i][best.2] / m[r][best.2];
                for j in 0..n {
                    m[i][j] -= f * m[r][j];
                }
            }
            rank += 1;
        }
        assert_eq!(n - rank, 3);
    }

    #[test]
    fn divergence_block() {
        let disc = circle_disc(true, false);
        let quad = QuadratureOptions::for_discretization(&disc);
        let b = assemble_divergence(&disc, &quad, None).unwrap();
        let rot = interpolate(&disc, |x| Point::new(-x.y, x.x));
        assert!(b.mul_vec(&rot).iter().all(|v| v.abs() < 1e-12));
        // u = (x, 0) against q = 1 in both phases: −|Ω|.
        let ux = interpolate(&disc, |x| Point::new(x.x, 0.0));
        let ones = vec![1.0; b.nrows];
        assert!((b.bilinear(&ones, &ux) + 4.0).abs() < 1e-12);
    }

    #[test]
    fn single_element_divergence() {
        let m = Mesh::from_parts(vec![Point::new(0.0, 0.0), Point::new(0.5, 0.0), Point::new(0.0, 0.5)], vec![[0, 1, 2]])
            .unwrap();
        let disc = Discretization::new(
            m,
            &Circle::new(Point::zeros(), 5.0),
            DiscretizationOptions { enrich_velocity: true, isoparametric: false },
        )
        .unwrap();
        let quad = QuadratureOptions::for_discretization(&disc);
        let b = assemble_divergence(&disc, &quad, None).unwrap();
        let ux = interpolate(&disc, |x| Point::new(x.x, 0.0));
        assert!((b.bilinear(&[1.0; 3], &ux) + 0.125).abs() < 1e-15);
    }

    #[test]
    fn nitsche_vanishes_without_velocity_enrichment() {
        let disc = circle_disc(false, true);
        let quad = QuadratureOptions::for_discretization(&disc);
        let n = assemble_nitsche(&disc, &params(), None, &quad).unwrap();
        assert!(n.velocity.max_abs() < 1e-12);
        assert!(n.coupling.max_abs() < 1e-12);
    }

    #[test]
    fn nitsche_penalty_is_linear_in_lambda() {
        let disc = circle_disc(true, true);
        let quad = QuadratureOptions::for_discretization(&disc);
        let p1 = assemble_nitsche(&disc, &params(), None, &quad).unwrap().penalty;
        let p2 = assemble_nitsche(&disc, &MaterialParams { lambda: 40.0, ..params() }, None, &quad).unwrap().penalty;
        assert_eq!(p1.indices, p2.indices);
        for (a, b) in p1.data.iter().zip(&p2.data) {
            assert!((2.0 * a - b).abs() <= 1e-14 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn nitsche_rejects_nonpositive_lambda() {
        let disc = circle_disc(true, false);
        let quad = QuadratureOptions::for_discretization(&disc);
        let err = assemble_nitsche(&disc, &MaterialParams { lambda: 0.0, ..params() }, None, &quad).unwrap_err();
        assert_eq!(err, AssemblyError::Params(ParamError::Lambda(0.0)));
    }

    #[test]
    fn continuous_velocity_sees_only_consistency_terms() {
        let disc = circle_disc(true, false);
        let quad = QuadratureOptions::for_discretization(&disc);
        let n = assemble_nitsche(&disc, &params(), None, &quad).unwrap();
        let u = interpolate(&disc, |x| Point::new(x.x * x.y, x.y * x.y - x.x));
        // [[u]] = 0 kills the penalty and the symmetric term in N(u, u).
        assert!(n.penalty.bilinear(&u, &u).abs() < 1e-12);
        assert!(n.velocity.bilinear(&u, &u).abs() < 1e-12);
    }

    #[test]
    fn ghost_penalty_basics() {
        let disc = circle_disc(true, false);
        let p = disc.interpolate_pressure(|_, x| 2.0 * x.x - x.y).coefficients;
        let j = assemble_ghost_penalty(&disc, &params());
        assert!(j.bilinear(&p, &p).abs() < 1e-14);
        assert!(j.relative_asymmetry() == 0.0);
        assert_eq!(assemble_ghost_penalty(&disc, &MaterialParams { gamma: 0.0, ..params() }).nnz(), 0);
    }

    #[test]
    fn ghost_penalty_single_face() {
        // Two triangles sharing the face x = 0; the left one is cut.
        let vs = vec![Point::new(-1.0, 0.0), Point::new(0.0, -1.0), Point::new(0.0, 1.0), Point::new(1.0, 0.0)];
        let m = Mesh::from_parts(vs, vec![[0, 1, 2], [1, 3, 2]]).unwrap();
        let ls = Plane { normal: Point::new(1.0, 0.0), offset: -0.5 };
        let disc = Discretization::new(m, &ls, DiscretizationOptions { enrich_velocity: true, isoparametric: false }).unwrap();
        assert_eq!(disc.topology.ghost_faces[1].len(), 1);
        assert!(disc.topology.ghost_faces[0].is_empty());
        let mesh = &disc.mesh;
        let f = disc.topology.ghost_faces[1][0];
        let h = mesh.faces()[f].h;
        // Phase-two copy: p = x on the left element, 2x on the right.
        let mut p = vec![0.0; disc.layout.n_pressure_dofs()];
        for (v, x) in mesh.vertices().iter().enumerate() {
            let dof = disc.layout.pressure_dof(v, Phase::Two).unwrap();
            p[dof] = if x.x > 0.0 { 2.0 * x.x } else { x.x };
        }
        let gamma = 0.3;
        let j = assemble_ghost_penalty(&disc, &MaterialParams { gamma, mu: [1.0, 1.0], ..params() });
        assert!((j.bilinear(&p, &p) - gamma * h.powi(3) * 2.0).abs() < 1e-14);
    }

    #[test]
    fn rhs_hat_integrals() {
        // Constant g = (0, −1) on one affine element: the P2 vertex
        // functions integrate to 0, the edge functions to |T|/3.
        let m = Mesh::from_parts(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)], vec![[0, 1, 2]])
            .unwrap();
        let disc = Discretization::new(
            m,
            &Circle::new(Point::zeros(), 5.0),
            DiscretizationOptions { enrich_velocity: true, isoparametric: false },
        )
        .unwrap();
        let data = ProblemData {
            body_force: Box::new(|_, _| Point::new(0.0, -1.0)),
            surface_force: Box::new(|_, _| Point::zeros()),
            boundary_velocity: Box::new(|_| Point::zeros()),
            exact: None,
        };
        let quad = QuadratureOptions::for_discretization(&disc);
        let (rhs, mean) = assemble_rhs(&disc, &params(), &data, &quad).unwrap();
        for node in 0..6 {
            let slot = disc.layout.velocity_slot(disc.mesh.p2_nodes(0)[node], Phase::One).unwrap();
            let expect = if node < 3 { 0.0 } else { -0.5 / 3.0 };
            assert!(rhs[2 * slot].abs() < 1e-15);
            assert!((rhs[2 * slot + 1] - expect).abs() < 1e-15);
        }
        assert!((mean.iter().sum::<f64>() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_data_zero_rhs() {
        let disc = circle_disc(true, true);
        let data = ProblemData {
            body_force: Box::new(|_, _| Point::zeros()),
            surface_force: Box::new(|_, _| Point::zeros()),
            boundary_velocity: Box::new(|_| Point::zeros()),
            exact: None,
        };
        let blocks = assemble_blocks(&disc, &params(), &data, &QuadratureOptions::for_discretization(&disc)).unwrap();
        assert!(blocks.rhs.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn surface_load_of_normal_force() {
        let disc = circle_disc(true, false);
        let quad = QuadratureOptions::for_discretization(&disc);
        let data = ProblemData {
            body_force: Box::new(|_, _| Point::zeros()),
            surface_force: Box::new(|_, n| n * 0.5),
            boundary_velocity: Box::new(|_| Point::zeros()),
            exact: None,
        };
        let n = assemble_nitsche(&disc, &params(), Some(&data), &quad).unwrap();
        let v = interpolate(&disc, |x| Point::new(x.x + x.y * x.y, 0.3 * x.y));
        let load: f64 = n.surface_load.iter().zip(&v).map(|(a, b)| a * b).sum();
        // ½ ∫_Γ v·n directly on the interface segments.
        let mut expect = 0.0;
        for e in disc.topology.cut_elements() {
            let r = disc.interface_rule(e, 9).unwrap().unwrap();
            let normals = r.normals.as_ref().unwrap();
            for q in 0..r.len() {
                let x = r.points[q];
                expect += 0.5 * r.weights[q] * Point::new(x.x + x.y * x.y, 0.3 * x.y).dot(&normals[q]);
            }
        }
        assert!((load - expect).abs() < 1e-13);
    }
}
