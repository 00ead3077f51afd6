//! Interpolation errors of the benchmark solution, independent of the
//! solver: the best rate a discretization can reach on each level.
//!
//! cargo run --release --example interpolation_study -- [levels] [iso:on|off] [enrich:on|off]

use cutstokes::levelset::Circle;
use cutstokes::postproc::{annotate_eoc, compute_errors};
use cutstokes::problem::{ExactSolution, KirchhartCircle};
use cutstokes::{Discretization, DiscretizationOptions, Mesh, Point};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let levels: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let iso = args.get(2).is_none_or(|s| s != "off");
    let enrich = args.get(3).is_none_or(|s| s != "off");
    let exact = KirchhartCircle::new(Point::zeros());
    let ls = Circle::new(exact.center, exact.radius);
    let mut mesh = Mesh::structured(8).unwrap();
    let mut reports = Vec::new();
    for level in 0..=levels {
        if level > 0 {
            mesh = mesh.refine_uniform();
        }
        let opts = DiscretizationOptions { enrich_velocity: enrich, isoparametric: iso };
        let disc = Discretization::new(mesh.clone(), &ls, opts).unwrap();
        let u = disc.interpolate_velocity(&ls, |ph, x| exact.velocity(ph, x));
        let p = disc.interpolate_pressure(|ph, x| exact.pressure(ph, x));
        let mut r = compute_errors(&disc, &exact, &u, &p, 6).unwrap();
        r.level = level;
        reports.push(r);
    }
    annotate_eoc(&mut reports);
    println!("L,ndof,e_up,eoc_up,e_uL2,eoc_uL2,e_p,e_u_h1semi");
    for r in &reports {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
        println!(
            "{},{},{:.4e},{},{:.4e},{},{:.4e},{:.4e}",
            r.level,
            r.ndof,
            r.e_up,
            f(r.eoc_up),
            r.e_u_l2,
            f(r.eoc_u_l2),
            r.e_p_l2,
            r.e_u_h1_semi
        );
    }
}
