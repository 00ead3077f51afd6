//! Unfitted finite elements for the stationary two-phase Stokes problem.
//!
//! The fluid interface is the zero level of a function `φ` on a fixed
//! triangulation of `[-1,1]²`. Velocity and pressure are approximated by
//! Taylor–Hood P2/P1 elements, doubled on cut elements so that each phase
//! carries its own copy; interface conditions enter weakly through a
//! Nitsche term and a ghost penalty on the pressure restores inf-sup
//! stability independently of the cut position. An optional isoparametric
//! map bends the piecewise-linear interface towards the exact one.
//!
//! Pipeline: [`mesh`] → [`levelset`] → [`cut`]/[`quadrature`] →
//! [`isoparam`] → [`spaces`] → [`assembly`] → [`solve`] → [`postproc`],
//! driven level by level from [`study`].

pub mod assembly;
pub mod basis;
pub mod cut;
pub mod isoparam;
pub mod levelset;
pub mod mesh;
pub mod postproc;
pub mod problem;
pub mod quadrature;
pub mod solve;
pub mod spaces;
pub mod sparse;
pub mod study;

pub use assembly::{assemble_blocks, assemble_system, QuadratureOptions, SystemAssembly, SystemBlocks};
pub use levelset::{Circle, LevelSet, Phase, Plane};
pub use mesh::{Mesh, Point};
pub use problem::{MaterialParams, Problem, ProblemData};
pub use solve::{factor_solve, SolveOptions, SolveReport};
pub use spaces::{Discretization, DiscretizationOptions};
pub use study::{run_study, MeshSource, RunConfig, StudyResult};
