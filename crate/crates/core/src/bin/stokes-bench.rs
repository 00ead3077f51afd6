use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use cutstokes::mesh::Point;
use cutstokes::study::{run_study_with, MeshSource, RunConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        matches!(self, Switch::On)
    }
}

fn parse_center(s: &str) -> Result<Point, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok(Point::new(p(x)?, p(y)?))
}

/// Mesh refinement study for the unfitted two-phase Stokes discretization.
#[derive(Parser, Debug)]
#[command(name = "stokes-bench", version)]
struct Cli {
    /// Finest refinement level; levels 0..=N are solved.
    #[arg(long, default_value_t = 4)]
    levels: usize,
    #[arg(long, value_enum, default_value = "on")]
    enrich_velocity: Switch,
    #[arg(long, value_enum, default_value = "on")]
    isoparametric: Switch,
    /// Ghost penalty parameter.
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    /// Nitsche penalty parameter.
    #[arg(long, default_value_t = 20.0)]
    lambda: f64,
    /// structured:N or file:PATH
    #[arg(long, default_value = "structured:8")]
    mesh: MeshSource,
    #[arg(long, default_value = "kirchhart-circle")]
    problem: String,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Quadrature degree of the error norms.
    #[arg(long, default_value_t = 6)]
    quad_degree: usize,
    /// Single-threaded, bitwise reproducible run.
    #[arg(long)]
    serial: bool,
    /// Interface centre as x,y.
    #[arg(long, value_parser = parse_center, default_value = "0,0")]
    center: Point,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = RunConfig {
        levels: cli.levels,
        enrich_velocity: cli.enrich_velocity.on(),
        isoparametric: cli.isoparametric.on(),
        gamma: cli.gamma,
        lambda: cli.lambda,
        mesh: cli.mesh,
        problem: cli.problem,
        output: cli.out.clone(),
        quad_degree: cli.quad_degree,
        serial: cli.serial,
        center: cli.center,
    };
    let result = run_study_with(&cfg, |row| {
        let e = &row.errors;
        eprintln!(
            "level {} ndof {} e_up {:.3e} (p {:.3e}, grad u {:.3e}) e_uL2 {:.3e} ({:.1}s)",
            e.level, e.ndof, e.e_up, e.e_p_l2, e.e_u_h1_semi, e.e_u_l2, row.seconds
        );
    });
    match result {
        Ok(res) => {
            if cli.out.is_none() {
                print!("{}", res.to_csv(true));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
