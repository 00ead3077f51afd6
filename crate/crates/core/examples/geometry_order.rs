//! Distance of interface quadrature points to the exact circle, with and
//! without the isoparametric map.
//!
//! cargo run --release --example geometry_order -- [levels]

use cutstokes::{Circle, Discretization, DiscretizationOptions, Mesh, Point};

fn max_distance(mesh: &Mesh, circle: &Circle, isoparametric: bool) -> f64 {
    let opts = DiscretizationOptions { enrich_velocity: true, isoparametric };
    let disc = Discretization::new(mesh.clone(), circle, opts).expect("discretization");
    disc.topology
        .cut_elements()
        .flat_map(|e| disc.interface_rule(e, 9).expect("rule").expect("cut").points)
        .map(|y| ((y - circle.center).norm() - circle.radius).abs())
        .fold(0.0, f64::max)
}

fn main() {
    let levels: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let circle = Circle::new(Point::zeros(), 2.0 / 3.0);
    let mut mesh = Mesh::structured(8).unwrap();
    let mut prev: Option<(f64, f64)> = None;
    println!("L,h,dist_mapped,order_mapped,dist_linear,order_linear");
    for level in 0..=levels {
        if level > 0 {
            mesh = mesh.refine_uniform();
        }
        let (m, l) = (max_distance(&mesh, &circle, true), max_distance(&mesh, &circle, false));
        let orders = prev.map(|(pm, pl)| (format!("{:.2}", (pm / m).log2()), format!("{:.2}", (pl / l).log2())));
        let (om, ol) = orders.unwrap_or_default();
        println!("{level},{:.4e},{m:.3e},{om},{l:.3e},{ol}", mesh.max_diameter());
        prev = Some((m, l));
    }
}
