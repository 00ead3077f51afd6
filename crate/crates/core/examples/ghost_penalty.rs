//! Effect of the ghost penalty parameter on accuracy and on the factor for
//! a circle placed so that some elements are cut into tiny pieces.
//!
//! cargo run --release --example ghost_penalty -- [level]

use cutstokes::postproc::compute_errors;
use cutstokes::problem::KirchhartCircle;
use cutstokes::study::solve_problem;
use cutstokes::{DiscretizationOptions, Mesh, Point, SolveOptions};

fn main() {
    let level: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let mut mesh = Mesh::structured(8).unwrap();
    for _ in 0..level {
        mesh = mesh.refine_uniform();
    }
    // Moves the circle so that it grazes vertices of the mesh.
    let center = Point::new(2.0 / 3.0 - 0.75 + 1e-6, 0.0);
    println!("gamma,e_up,e_p,e_uL2,residual,refinement_steps");
    for gamma in [0.0, 0.01, 0.1, 1.0] {
        let problem = KirchhartCircle::new(center).into_problem(20.0, gamma);
        let exact = problem.data.exact.as_deref().unwrap();
        match solve_problem(mesh.clone(), &problem, DiscretizationOptions::default(), &SolveOptions::default(), level) {
            Ok(sol) => {
                let e = compute_errors(&sol.disc, exact, &sol.velocity, &sol.pressure, 6).unwrap();
                println!(
                    "{gamma},{:.4e},{:.4e},{:.4e},{:.1e},{}",
                    e.e_up, e.e_p_l2, e.e_u_l2, sol.solve.relative_residual, sol.solve.refinement_steps
                );
            }
            Err(err) => println!("{gamma},failed: {err}"),
        }
    }
}
