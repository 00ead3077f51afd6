//! Runs the benchmark from a mesh file: a criss-cross mesh with jittered
//! interior vertices, written in the plain-text format and read back.
//!
//! cargo run --release --example custom_mesh -- [levels]

use cutstokes::study::{run_study, MeshSource, RunConfig};
use cutstokes::{Mesh, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let levels: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let base = Mesh::structured(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let jitter = 0.15 * base.max_diameter();
    let vertices: Vec<Point> = base
        .vertices()
        .iter()
        .map(|v| {
            let interior = v.x.abs() < 1.0 - 1e-12 && v.y.abs() < 1.0 - 1e-12;
            if interior {
                v + Point::new(rng.gen_range(-jitter..jitter), rng.gen_range(-jitter..jitter))
            } else {
                *v
            }
        })
        .collect();
    let mesh = Mesh::from_parts(vertices, base.elements().to_vec()).expect("valid mesh");
    let path = std::env::temp_dir().join("cutstokes-jittered.mesh");
    mesh.write(&path).expect("write mesh");
    println!("# mesh written to {}", path.display());

    let cfg = RunConfig { levels, mesh: MeshSource::File(path), ..RunConfig::default() };
    print!("{}", run_study(&cfg).expect("study").to_csv(true));
}
