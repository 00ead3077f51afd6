//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;

use cutstokes::assembly::{assemble_blocks, assemble_system, pressure_extension_norm_sq, QuadratureOptions};
use cutstokes::cut::{decompose, interface_rule, subdomain_rule};
use cutstokes::levelset::{classify_values, ElementClass};
use cutstokes::postproc::compute_errors;
use cutstokes::problem::{ExactSolution, KirchhartCircle, RotationPatch};
use cutstokes::study::{run_study, solve_problem, RunConfig, StudyResult};
use cutstokes::{Circle, Discretization, DiscretizationOptions, LevelSet, Mesh, Phase, Plane, Point, SolveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn window(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn last_two(result: &StudyResult) -> ([f64; 2], [f64; 2]) {
    let n = result.rows.len();
    let up = [n - 2, n - 1].map(|i| result.rows[i].errors.eoc_up.expect("eoc"));
    let l2 = [n - 2, n - 1].map(|i| result.rows[i].errors.eoc_u_l2.expect("eoc"));
    (up, l2)
}

fn eoc_windows(cfg: &RunConfig, up: (f64, f64), l2: (f64, f64)) -> Outcome {
    let result = match run_study(cfg) {
        Ok(r) => r,
        Err(e) => return Outcome { pass: false, detail: format!("study failed: {e}") },
    };
    let (eu, el) = last_two(&result);
    let pass = eu.iter().all(|&v| window(v, up.0, up.1)) && el.iter().all(|&v| window(v, l2.0, l2.1));
    Outcome {
        pass,
        detail: format!(
            "eoc_up {:.4} {:.4} in [{}, {}], eoc_uL2 {:.4} {:.4} in [{}, {}]",
            eu[0], eu[1], up.0, up.1, el[0], el[1], l2.0, l2.1
        ),
    }
}

fn benchmark_config() -> RunConfig {
    RunConfig { levels: 4, enrich_velocity: true, isoparametric: true, gamma: 0.1, lambda: 20.0, ..RunConfig::default() }
}

fn full_method() -> Outcome {
    eoc_windows(&benchmark_config(), (1.8, 2.2), (2.6, 3.2))
}

fn no_enrichment() -> Outcome {
    eoc_windows(&RunConfig { enrich_velocity: false, ..benchmark_config() }, (0.3, 0.7), (0.8, 1.2))
}

fn no_mapping() -> Outcome {
    eoc_windows(&RunConfig { isoparametric: false, ..benchmark_config() }, (1.3, 1.8), (2.2, 2.9))
}

fn max_interface_distance(mesh: &Mesh, circle: &Circle, iso: bool) -> f64 {
    let opts = DiscretizationOptions { enrich_velocity: true, isoparametric: iso };
    let disc = Discretization::new(mesh.clone(), circle, opts).expect("discretization");
    let mut worst: f64 = 0.0;
    for e in disc.topology.cut_elements() {
        let rule = disc.interface_rule(e, 9).expect("interface rule").expect("cut");
        for y in &rule.points {
            worst = worst.max(((y - circle.center).norm() - circle.radius).abs());
        }
    }
    worst
}

fn geometry_order() -> Outcome {
    let circle = Circle::new(Point::zeros(), 2.0 / 3.0);
    let mut mesh = Mesh::structured(8).unwrap();
    let mut with = Vec::new();
    let mut without = Vec::new();
    for level in 0..=4 {
        if level > 0 {
            mesh = mesh.refine_uniform();
        }
        with.push(max_interface_distance(&mesh, &circle, true));
        without.push(max_interface_distance(&mesh, &circle, false));
    }
    let order = |d: &[f64]| (d[d.len() - 2] / d[d.len() - 1]).log2();
    let (ow, on) = (order(&with), order(&without));
    Outcome {
        pass: ow >= 2.7 && window(on, 1.7, 2.3),
        detail: format!("mapped order {ow:.3} (>= 2.7), linear order {on:.3} in [1.7, 2.3]"),
    }
}

/// Energy-norm distance between the discrete solution and the interpolant
/// of the smooth rotation patch, plus the broken-norm error.
fn patch_errors(ls: Box<dyn LevelSet>, iso: bool) -> (f64, f64) {
    let problem = RotationPatch.into_problem(ls, 20.0, 0.1);
    let mesh = Mesh::structured(8).unwrap().refine_uniform();
    let opts = DiscretizationOptions { enrich_velocity: true, isoparametric: iso };
    let sol = solve_problem(mesh, &problem, opts, &SolveOptions::default(), 1).expect("patch solve");
    let disc = &sol.disc;
    let ui = disc.interpolate_velocity(problem.level_set.as_ref(), |ph, x| RotationPatch.velocity(ph, x));
    let pi = disc.interpolate_pressure(|ph, x| RotationPatch.pressure(ph, x));
    let du: Vec<f64> = sol.velocity.coefficients.iter().zip(&ui.coefficients).map(|(a, b)| a - b).collect();
    let dp: Vec<f64> = sol.pressure.coefficients.iter().zip(&pi.coefficients).map(|(a, b)| a - b).collect();
    let ext = pressure_extension_norm_sq(disc, &problem.material, &dp, 4).expect("extension norm");
    let energy = sol.blocks.triple_norm_sq(&du, &dp, ext).max(0.0).sqrt();
    let broken = compute_errors(disc, &RotationPatch, &sol.velocity, &sol.pressure, 6).expect("errors").e_up;
    (energy, broken)
}

fn patch_test() -> Outcome {
    let (ec, bc) = patch_errors(Box::new(Circle::new(Point::new(0.013, -0.021), 2.0 / 3.0)), false);
    let (ep, bp) = patch_errors(Box::new(Plane { normal: Point::new(0.6, 0.8), offset: 0.117 }), true);
    let worst = ec.max(bc).max(ep).max(bp);
    Outcome {
        pass: worst < 1e-10,
        detail: format!(
            "circle (linear geometry): energy {ec:.2e}, broken {bc:.2e}; plane (mapped): energy {ep:.2e}, broken {bp:.2e}"
        ),
    }
}

fn algebraic_identities() -> Outcome {
    let problem = KirchhartCircle::new(Point::zeros()).into_problem(20.0, 0.1);
    let mesh = Mesh::structured(8).unwrap().refine_uniform();
    let disc = Discretization::new(mesh, problem.level_set.as_ref(), DiscretizationOptions::default()).unwrap();
    let quad = QuadratureOptions::for_discretization(&disc);
    let blocks = assemble_blocks(&disc, &problem.material, &problem.data, &quad).unwrap();
    let sys = assemble_system(&blocks, true).unwrap();
    let asym = sys.matrix.relative_asymmetry().max(blocks.saddle_matrix().relative_asymmetry());

    let k = blocks.saddle_matrix();
    let (nv, np) = (blocks.n_velocity(), blocks.n_pressure());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_identity: f64 = 0.0;
    for _ in 0..100 {
        let u: Vec<f64> = (0..nv).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p: Vec<f64> = (0..np).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = u.iter().chain(&p).copied().collect();
        let y: Vec<f64> = u.iter().copied().chain(p.iter().map(|v| -v)).collect();
        let lhs = k.bilinear(&y, &x);
        let rhs = blocks.a.bilinear(&u, &u) + blocks.j.bilinear(&p, &p);
        worst_identity = worst_identity.max((lhs - rhs).abs() / rhs.abs());
    }

    // Globally linear pressure on every phase copy, at undeformed vertices.
    let mut p = vec![0.0; np];
    for (v, x) in disc.mesh.vertices().iter().enumerate() {
        for phase in Phase::BOTH {
            if let Some(dof) = disc.layout.pressure_dof(v, phase) {
                p[dof] = 0.7 * x.x - 1.3 * x.y + 0.4;
            }
        }
    }
    let pp: f64 = p.iter().map(|v| v * v).sum();
    let j_linear = blocks.j.bilinear(&p, &p).abs() / (blocks.j.max_abs() * pp);

    Outcome {
        pass: asym < 1e-12 && worst_identity < 1e-11 && j_linear < 1e-14,
        detail: format!(
            "asymmetry {asym:.1e} (< 1e-12), k identity {worst_identity:.1e} (< 1e-11), J(p,p) linear {j_linear:.1e}"
        ),
    }
}

fn shoelace(poly: &[Point]) -> f64 {
    let n = poly.len();
    0.5 * (0..n).map(|i| poly[i].x * poly[(i + 1) % n].y - poly[(i + 1) % n].x * poly[i].y).sum::<f64>().abs()
}

/// Clips the triangle to `{sign·φ_h ≥ 0}` (Sutherland–Hodgman on the
/// linear interpolant) and returns the polygon and its crossing points.
fn clip(tri: &[Point; 3], values: &[f64; 3], sign: f64) -> (Vec<Point>, Vec<Point>) {
    let mut poly = Vec::new();
    let mut crossings = Vec::new();
    for a in 0..3 {
        let b = (a + 1) % 3;
        let (va, vb) = (sign * values[a], sign * values[b]);
        if va >= 0.0 {
            poly.push(tri[a]);
        }
        if (va < 0.0) != (vb < 0.0) {
            let t = va / (va - vb);
            let x = tri[a] + (tri[b] - tri[a]) * t;
            poly.push(x);
            crossings.push(x);
        }
    }
    (poly, crossings)
}

fn quadrature_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_area, mut worst_length): (f64, f64) = (0.0, 0.0);
    let mut count = 0;
    while count < 1000 {
        let tri = [0, 1, 2].map(|_| Point::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)));
        let area2 = (tri[1] - tri[0]).perp(&(tri[2] - tri[0]));
        let values = [0, 1, 2].map(|_| rng.gen_range(-1.0..1.0));
        if area2.abs() < 1e-3 || classify_values(&values) != ElementClass::Cut || values.iter().any(|v| v.abs() < 1e-6)
        {
            continue;
        }
        count += 1;
        let d = decompose(&tri, &values).unwrap();
        for (phase, sign) in [(Phase::One, -1.0), (Phase::Two, 1.0)] {
            let exact = shoelace(&clip(&tri, &values, sign).0);
            let rule = subdomain_rule(&d, phase, 4).unwrap();
            worst_area = worst_area.max((rule.measure() - exact).abs());
        }
        let crossings = clip(&tri, &values, 1.0).1;
        let length = (crossings[0] - crossings[1]).norm();
        worst_length = worst_length.max((interface_rule(&d, 9).unwrap().measure() - length).abs());
    }
    Outcome {
        pass: worst_area < 1e-12 && worst_length < 1e-13,
        detail: format!("1000 triangles: area error {worst_area:.1e} (< 1e-12), length error {worst_length:.1e} (< 1e-13)"),
    }
}

/// `−div(μ (∇u + ∇uᵀ)) + ∇p` by central differences of the exact branches.
fn fd_operator(exact: &dyn ExactSolution, phase: Phase, mu: f64, x: &Point, h: f64) -> Point {
    let u = |dx: f64, dy: f64| exact.velocity(phase, &(x + Point::new(dx, dy)));
    let p = |dx: f64, dy: f64| exact.pressure(phase, &(x + Point::new(dx, dy)));
    let c = u(0.0, 0.0);
    let uxx = (u(h, 0.0) - c * 2.0 + u(-h, 0.0)) / (h * h);
    let uyy = (u(0.0, h) - c * 2.0 + u(0.0, -h)) / (h * h);
    let uxy = (u(h, h) - u(h, -h) - u(-h, h) + u(-h, -h)) / (4.0 * h * h);
    // Σ_j ∂_j(∂_j u_i + ∂_i u_j) = Δu_i + ∂_i div u.
    let lap = uxx + uyy;
    let grad_div = Point::new(uxx.x + uxy.y, uxy.x + uyy.y);
    let grad_p = Point::new((p(h, 0.0) - p(-h, 0.0)) / (2.0 * h), (p(0.0, h) - p(0.0, -h)) / (2.0 * h));
    -(lap + grad_div) * mu + grad_p
}

fn forcing_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for center in [Point::zeros(), Point::new(0.04, -0.05)] {
        let bench = KirchhartCircle::new(center);
        let problem = bench.clone().into_problem(20.0, 0.1);
        let mut counts = [0usize; 2];
        let mut scale: f64 = 0.0;
        let mut residual: f64 = 0.0;
        while counts.iter().any(|&c| c < 10_000) {
            let x = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let phase = Phase::of_value(problem.level_set.value(&x));
            if counts[phase.index()] >= 10_000 {
                continue;
            }
            counts[phase.index()] += 1;
            let rhs = (problem.data.body_force)(phase, &x) * problem.material.rho(phase);
            let lhs = fd_operator(&bench, phase, problem.material.mu(phase), &x, 1e-3);
            residual = residual.max((lhs - rhs).norm());
            scale = scale.max(rhs.norm());
        }
        worst = worst.max(residual / scale);
    }
    Outcome { pass: worst < 1e-6, detail: format!("relative residual {worst:.2e} (< 1e-6) at 10^4 points per phase") }
}

fn cut_position_robustness() -> Outcome {
    let h = Mesh::structured(8).unwrap().max_diameter();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for k in 0..10 {
        let r = 0.3 * h * rng.gen_range(0.0f64..1.0).sqrt();
        let t = rng.gen_range(0.0..std::f64::consts::TAU);
        let center = Point::new(r * t.cos(), r * t.sin());
        let out = eoc_windows(&RunConfig { center, ..benchmark_config() }, (1.8, 2.2), (2.6, 3.2));
        lines.push(format!("    offset ({:+.4}, {:+.4}): {}", center.x, center.y, out.detail));
        if !out.pass {
            failures.push(k);
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!("{} of 10 offsets outside the windows\n{}", failures.len(), lines.join("\n")),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("full method EOC", full_method),
        ("no-enrichment degradation", no_enrichment),
        ("no-mapping degradation", no_mapping),
        ("geometry order", geometry_order),
        ("patch test", patch_test),
        ("algebraic identities", algebraic_identities),
        ("quadrature oracle", quadrature_oracle),
        ("manufactured forcing oracle", forcing_oracle),
        ("robustness to cut position", cut_position_robustness),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let out = run();
        if !out.pass {
            failed += 1;
        }
        println!("criterion {} {name}: {} | {}", i + 1, if out.pass { "PASS" } else { "FAIL" }, out.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
