//! A globally smooth flow with equal viscosities is reproduced exactly on a
//! cut mesh: the Nitsche terms and the ghost penalty are consistent.
//!
//! cargo run --release --example patch_test

use cutstokes::postproc::compute_errors;
use cutstokes::problem::RotationPatch;
use cutstokes::study::solve_problem;
use cutstokes::{Circle, DiscretizationOptions, LevelSet, Mesh, Plane, Point, SolveOptions};

fn run(name: &str, ls: Box<dyn LevelSet>, isoparametric: bool) {
    let problem = RotationPatch.into_problem(ls, 20.0, 0.1);
    let opts = DiscretizationOptions { enrich_velocity: true, isoparametric };
    let sol = solve_problem(Mesh::structured(8).unwrap(), &problem, opts, &SolveOptions::default(), 0).expect("solve");
    let err = compute_errors(&sol.disc, &RotationPatch, &sol.velocity, &sol.pressure, 6).expect("errors");
    println!(
        "{name}: {} cut elements, e_up {:.2e}, e_uL2 {:.2e}, residual {:.1e}",
        sol.disc.topology.cut_elements().count(),
        err.e_up,
        err.e_u_l2,
        sol.solve.relative_residual
    );
}

fn main() {
    run("circle, linear geometry", Box::new(Circle::new(Point::new(0.05, -0.02), 2.0 / 3.0)), false);
    run("tilted line, mapped", Box::new(Plane { normal: Point::new(0.6, 0.8), offset: 0.117 }), true);
}
