//! Error norms against a reference solution and convergence orders.

use thiserror::Error;

use crate::problem::ExactSolution;
use crate::spaces::{basis_at, Discretization, FieldFunction, FieldSample, SpaceError};

#[derive(Debug, Error, PartialEq)]
pub enum PostprocError {
    #[error("problem has no exact solution")]
    MissingExact,
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorReport {
    pub level: usize,
    pub ndof: usize,
    /// `‖p − p_h‖_{L²} + ‖u − u_h‖_{H¹}` (broken, full norm).
    pub e_up: f64,
    pub e_u_l2: f64,
    pub e_u_h1_semi: f64,
    pub e_p_l2: f64,
    pub eoc_up: Option<f64>,
    pub eoc_u_l2: Option<f64>,
}

/// Squared error contributions integrated over the discrete phases.
/// The reference branch follows the discrete side of each quadrature point;
/// the pressure difference is taken modulo constants.
pub fn compute_errors(
    disc: &Discretization,
    exact: &dyn ExactSolution,
    velocity: &FieldFunction,
    pressure: &FieldFunction,
    degree: usize,
) -> Result<ErrorReport, PostprocError> {
    let mut u_l2 = 0.0;
    let mut u_semi = 0.0;
    let mut p_sq = 0.0;
    let mut p_int = 0.0;
    let mut area = 0.0;
    for e in 0..disc.mesh.n_elements() {
        let geo = disc.geometry(e);
        for (phase, rule) in disc.volume_rules(e, degree)? {
            for q in 0..rule.len() {
                let b = basis_at(&geo, &rule.reference_points[q], &rule.jacobians[q]);
                let y = rule.points[q];
                let w = rule.weights[q];
                let FieldSample::Vector { value: uh, gradient: guh } = velocity.sample(disc, phase, e, &b)? else {
                    unreachable!("velocity field samples are vectors")
                };
                let FieldSample::Scalar { value: ph, .. } = pressure.sample(disc, phase, e, &b)? else {
                    unreachable!("pressure field samples are scalars")
                };
                let du = exact.velocity(phase, &y) - uh;
                let dg = exact.velocity_gradient(phase, &y) - guh;
                let dp = exact.pressure(phase, &y) - ph;
                u_l2 += w * du.norm_squared();
                u_semi += w * dg.norm_squared();
                p_sq += w * dp * dp;
                p_int += w * dp;
                area += w;
            }
        }
    }
    let mean = p_int / area;
    let p_l2 = (p_sq - mean * mean * area).max(0.0).sqrt();
    let e_u_l2 = u_l2.sqrt();
    Ok(ErrorReport {
        level: 0,
        ndof: disc.layout.n_dofs(),
        e_up: p_l2 + (u_l2 + u_semi).sqrt(),
        e_u_l2,
        e_u_h1_semi: u_semi.sqrt(),
        e_p_l2: p_l2,
        eoc_up: None,
        eoc_u_l2: None,
    })
}

/// `log₂(e_{L−1}/e_L)`; absent for the first level and for zero errors.
pub fn eoc(errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; errors.len()];
    for l in 1..errors.len() {
        let (a, b) = (errors[l - 1], errors[l]);
        if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
            out[l] = Some((a / b).log2());
        }
    }
    out
}

/// Fills the `eoc_*` fields of consecutive levels.
pub fn annotate_eoc(reports: &mut [ErrorReport]) {
    let up = eoc(&reports.iter().map(|r| r.e_up).collect::<Vec<_>>());
    let l2 = eoc(&reports.iter().map(|r| r.e_u_l2).collect::<Vec<_>>());
    for (i, r) in reports.iter_mut().enumerate() {
        r.eoc_up = up[i];
        r.eoc_u_l2 = l2[i];
    }
}
