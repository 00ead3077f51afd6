//! Material data, problem data and the registry of manufactured solutions.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use thiserror::Error;

use crate::levelset::{Circle, LevelSet, Phase};
use crate::mesh::Point;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("viscosities must be positive, got {0:?}")]
    Viscosity([f64; 2]),
    #[error("densities must be positive, got {0:?}")]
    Density([f64; 2]),
    #[error("Nitsche parameter must be positive, got {0}")]
    Lambda(f64),
    #[error("ghost penalty parameter must be non-negative, got {0}")]
    Gamma(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    pub mu: [f64; 2],
    pub rho: [f64; 2],
    pub lambda: f64,
    pub gamma: f64,
}

impl MaterialParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !self.mu.iter().all(|m| *m > 0.0) {
            return Err(ParamError::Viscosity(self.mu));
        }
        if !self.rho.iter().all(|r| *r > 0.0) {
            return Err(ParamError::Density(self.rho));
        }
        if !(self.lambda > 0.0) {
            return Err(ParamError::Lambda(self.lambda));
        }
        if !(self.gamma >= 0.0) {
            return Err(ParamError::Gamma(self.gamma));
        }
        Ok(())
    }

    pub fn mu(&self, phase: Phase) -> f64 {
        self.mu[phase.index()]
    }

    pub fn rho(&self, phase: Phase) -> f64 {
        self.rho[phase.index()]
    }
}

/// Phase-wise smooth reference solution. Each branch is defined on the
/// whole plane so it can be sampled on either side of a discrete interface.
pub trait ExactSolution: Send + Sync {
    fn velocity(&self, phase: Phase, x: &Point) -> Point;
    /// `∂u_i/∂x_j` at `(i, j)`.
    fn velocity_gradient(&self, phase: Phase, x: &Point) -> Matrix2<f64>;
    fn pressure(&self, phase: Phase, x: &Point) -> f64;
}

pub type BodyForce = Box<dyn Fn(Phase, &Point) -> Point + Send + Sync>;
pub type SurfaceForce = Box<dyn Fn(&Point, &Point) -> Point + Send + Sync>;
pub type BoundaryVelocity = Box<dyn Fn(&Point) -> Point + Send + Sync>;

pub struct ProblemData {
    /// `g` in `ρ_i g`.
    pub body_force: BodyForce,
    /// Interface load `f(x, n) = [[σ(u,p)·n]]` for the normal `n` pointing
    /// into phase two.
    pub surface_force: SurfaceForce,
    pub boundary_velocity: BoundaryVelocity,
    pub exact: Option<Box<dyn ExactSolution>>,
}

pub struct Problem {
    pub name: String,
    pub level_set: Box<dyn LevelSet>,
    pub material: MaterialParams,
    pub data: ProblemData,
}

/// Rotating two-phase flow in `[-1,1]²` around a circle of radius `2/3`:
/// the velocity has a kink and the pressure jumps by `1/2` across the
/// interface.
#[derive(Clone, Debug)]
pub struct KirchhartCircle {
    pub center: Point,
    pub radius: f64,
    pub mu: [f64; 2],
}

impl KirchhartCircle {
    pub fn new(center: Point) -> Self {
        Self { center, radius: 2.0 / 3.0, mu: [1.0, 10.0] }
    }

    /// `u = f(r)·(−y, x)` relative to the centre; returns `f` and `f'(r)/r`.
    fn profile(&self, phase: Phase, r2: f64) -> (f64, f64) {
        let e = (-r2).exp();
        let [m1, m2] = self.mu;
        match phase {
            Phase::One => (e / m1, -2.0 * e / m1),
            Phase::Two => {
                let r_gamma2 = self.radius * self.radius;
                (e / m2 + (1.0 / m1 - 1.0 / m2) * (-r_gamma2).exp(), -2.0 * e / m2)
            }
        }
    }

    fn pressure_offset(&self) -> f64 {
        // Mean over the square: the jump adds π r²/8, the shifted cubic
        // adds −(c + c³).
        let c = self.center.x;
        -PI * self.radius * self.radius / 8.0 + c + c * c * c
    }

    /// `−div(μ_i D(u)) + ∇p` in closed form (identical in both phases).
    pub fn forcing(&self, x: &Point) -> Point {
        let d = x - self.center;
        let r2 = d.norm_squared();
        (8.0 - 4.0 * r2) * (-r2).exp() * Point::new(-d.y, d.x) + Point::new(3.0 * d.x * d.x, 0.0)
    }

    pub fn into_problem(self, lambda: f64, gamma: f64) -> Problem {
        let level_set = Box::new(Circle::new(self.center, self.radius));
        let material = MaterialParams { mu: self.mu, rho: [1.0, 1.0], lambda, gamma };
        let forcing = self.clone();
        let boundary = self.clone();
        let data = ProblemData {
            body_force: Box::new(move |_, x| forcing.forcing(x)),
            surface_force: Box::new(|_, n| n * 0.5),
            boundary_velocity: Box::new(move |x| boundary.velocity(Phase::Two, x)),
            exact: Some(Box::new(self)),
        };
        Problem { name: "kirchhart-circle".into(), level_set, material, data }
    }
}

impl ExactSolution for KirchhartCircle {
    fn velocity(&self, phase: Phase, x: &Point) -> Point {
        let d = x - self.center;
        let (f, _) = self.profile(phase, d.norm_squared());
        Point::new(-d.y, d.x) * f
    }

    fn velocity_gradient(&self, phase: Phase, x: &Point) -> Matrix2<f64> {
        let d = x - self.center;
        let (f, s) = self.profile(phase, d.norm_squared());
        Matrix2::new(-d.y * d.x * s, -f - d.y * d.y * s, f + d.x * d.x * s, d.x * d.y * s)
    }

    fn pressure(&self, phase: Phase, x: &Point) -> f64 {
        let d = x - self.center;
        let jump = if phase == Phase::One { 0.5 } else { 0.0 };
        self.pressure_offset() + d.x.powi(3) + jump
    }
}

/// `u = (−y, x)`, `p = x` in both phases with equal viscosities: a smooth
/// solution that every consistent discretization reproduces exactly.
#[derive(Clone, Debug)]
pub struct RotationPatch;

impl ExactSolution for RotationPatch {
    fn velocity(&self, _: Phase, x: &Point) -> Point {
        Point::new(-x.y, x.x)
    }

    fn velocity_gradient(&self, _: Phase, _: &Point) -> Matrix2<f64> {
        Matrix2::new(0.0, -1.0, 1.0, 0.0)
    }

    fn pressure(&self, _: Phase, x: &Point) -> f64 {
        x.x
    }
}

impl RotationPatch {
    pub fn into_problem(self, level_set: Box<dyn LevelSet>, lambda: f64, gamma: f64) -> Problem {
        let material = MaterialParams { mu: [1.0, 1.0], rho: [1.0, 1.0], lambda, gamma };
        let data = ProblemData {
            body_force: Box::new(|_, _| Point::new(1.0, 0.0)),
            surface_force: Box::new(|_, _| Point::zeros()),
            boundary_velocity: Box::new(|x| Point::new(-x.y, x.x)),
            exact: Some(Box::new(self)),
        };
        Problem { name: "rotation-patch".into(), level_set, material, data }
    }
}

pub const PROBLEM_NAMES: [&str; 2] = ["kirchhart-circle", "rotation-patch"];

/// Registered problems. `center` moves the interface (and, for the
/// benchmark, the whole solution) relative to the mesh.
pub fn problem_by_name(name: &str, center: Point, lambda: f64, gamma: f64) -> Option<Problem> {
    match name {
        "kirchhart-circle" => Some(KirchhartCircle::new(center).into_problem(lambda, gamma)),
        "rotation-patch" => {
            Some(RotationPatch.into_problem(Box::new(Circle::new(center, 2.0 / 3.0)), lambda, gamma))
        }
        _ => None,
    }
}
