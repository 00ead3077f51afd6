//! The pipeline by hand: geometry, enriched spaces, blocks, saddle-point
//! system, direct solve and error norms on one level.
//!
//! cargo run --release --example assemble_and_solve -- [level]

use cutstokes::assembly::{assemble_blocks, assemble_system, QuadratureOptions};
use cutstokes::levelset::ElementClass;
use cutstokes::postproc::compute_errors;
use cutstokes::problem::KirchhartCircle;
use cutstokes::spaces::{FieldFunction, FieldKind};
use cutstokes::{factor_solve, Discretization, DiscretizationOptions, Mesh, Point, SolveOptions};

fn main() {
    let level: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let problem = KirchhartCircle::new(Point::zeros()).into_problem(20.0, 0.1);
    let mut mesh = Mesh::structured(8).unwrap();
    for _ in 0..level {
        mesh = mesh.refine_uniform();
    }
    let disc = Discretization::new(mesh, problem.level_set.as_ref(), DiscretizationOptions::default()).unwrap();
    let t = &disc.topology;
    println!(
        "elements {} (cut {}, inside {}, outside {}), ghost faces {} + {}, max displacement {:.2e}",
        disc.mesh.n_elements(),
        t.count(ElementClass::Cut),
        t.count(ElementClass::Neg),
        t.count(ElementClass::Pos),
        t.ghost_faces[0].len(),
        t.ghost_faces[1].len(),
        disc.deformation.max_displacement()
    );
    println!(
        "dofs: velocity {}, pressure {} ({} doubled velocity nodes, {} doubled pressure nodes)",
        disc.layout.n_velocity_dofs(),
        disc.layout.n_pressure_dofs(),
        disc.layout.doubled_velocity_nodes(),
        disc.layout.doubled_pressure_nodes()
    );

    let quad = QuadratureOptions::for_discretization(&disc);
    let blocks = assemble_blocks(&disc, &problem.material, &problem.data, &quad).unwrap();
    let sys = assemble_system(&blocks, true).unwrap();
    println!("system {}x{}, nnz {}, asymmetry {:.1e}", sys.n(), sys.n(), sys.matrix.nnz(), sys.matrix.relative_asymmetry());

    let (x, report) = factor_solve(&sys, &SolveOptions::default()).unwrap();
    println!(
        "factor {:.2}s, solve {:.2}s, factor nnz {}, residual {:.1e}, refinement steps {}, ∫p {:.1e}",
        report.factor_time,
        report.solve_time,
        report.factor_nnz,
        report.relative_residual,
        report.refinement_steps,
        report.pressure_mean
    );

    let u = FieldFunction { kind: FieldKind::Velocity, coefficients: sys.velocity(&x).to_vec() };
    let p = FieldFunction { kind: FieldKind::Pressure, coefficients: sys.pressure(&x).to_vec() };
    let err = compute_errors(&disc, problem.data.exact.as_deref().unwrap(), &u, &p, 6).unwrap();
    println!(
        "‖p − p_h‖ {:.3e}, ‖u − u_h‖_H1 {:.3e}, ‖u − u_h‖_L2 {:.3e}",
        err.e_p_l2,
        (err.e_u_l2.powi(2) + err.e_u_h1_semi.powi(2)).sqrt(),
        err.e_u_l2
    );
}
