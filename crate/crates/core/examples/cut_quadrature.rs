//! Sub-triangulation of one cut triangle and the quadrature rules on both
//! phases and on the interface segment.
//!
//! cargo run --example cut_quadrature

use cutstokes::cut::{decompose, interface_rule, subdomain_rule};
use cutstokes::{Phase, Point};

fn main() {
    let tri = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
    let phi = |x: &Point| x.x + 2.0 * x.y - 0.8;
    let values = tri.each_ref().map(phi);
    let d = decompose(&tri, &values).expect("cut triangle");
    for phase in Phase::BOTH {
        let rule = subdomain_rule(&d, phase, 4).unwrap();
        let moment = rule.integrate(|x| x.x * x.y);
        println!(
            "{phase:?}: {} sub-triangles, {} points, area {:.15}, ∫xy {:.15}",
            d.parts(phase).len(),
            rule.len(),
            rule.measure(),
            moment
        );
    }
    let gamma = interface_rule(&d, 9).unwrap();
    let [a, b] = d.segment;
    println!(
        "interface: {} points, length {:.15} (segment {:.15}), normal ({:.4}, {:.4})",
        gamma.len(),
        gamma.measure(),
        (b - a).norm(),
        d.normal.x,
        d.normal.y
    );
}
