//! Convergence study of the rotating two-phase flow around a circle, for the
//! full method and the two degraded variants.
//!
//! cargo run --release --example circle_benchmark -- [levels]

use cutstokes::study::{run_study_with, RunConfig};

fn main() {
    let levels: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let base = RunConfig { levels, ..RunConfig::default() };
    let variants = [
        ("enriched, mapped", base.clone()),
        ("no velocity enrichment", RunConfig { enrich_velocity: false, ..base.clone() }),
        ("no isoparametric map", RunConfig { isoparametric: false, ..base.clone() }),
    ];
    for (name, cfg) in variants {
        println!("# {name}");
        let result = run_study_with(&cfg, |row| eprintln!("  level {} done in {:.1}s", row.errors.level, row.seconds))
            .expect("study");
        print!("{}", result.to_csv(true));
    }
}
