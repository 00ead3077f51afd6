//! Refinement studies: one solve per level, errors and orders per row.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::assembly::{assemble_blocks, assemble_system, QuadratureOptions, SystemBlocks};
use crate::mesh::{Mesh, Point};
use crate::postproc::{annotate_eoc, compute_errors, ErrorReport};
use crate::problem::{problem_by_name, MaterialParams, Problem};
use crate::solve::{factor_solve, SolveOptions, SolveReport};
use crate::spaces::{Discretization, DiscretizationOptions, FieldFunction, FieldKind};

pub const CSV_HEADER: &str = "L,ndof,e_up,eoc_up,e_uL2,eoc_uL2,residual,seconds";

#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    Structured(usize),
    File(PathBuf),
}

impl MeshSource {
    pub fn load(&self) -> Result<Mesh, crate::mesh::MeshError> {
        match self {
            MeshSource::Structured(n) => Mesh::structured(*n),
            MeshSource::File(p) => Mesh::read(p),
        }
    }
}

impl FromStr for MeshSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(n) = s.strip_prefix("structured:") {
            let n: usize = n.parse().map_err(|_| format!("invalid subdivision count in {s:?}"))?;
            if n == 0 {
                return Err("structured mesh needs at least one subdivision".into());
            }
            Ok(MeshSource::Structured(n))
        } else if let Some(p) = s.strip_prefix("file:") {
            Ok(MeshSource::File(PathBuf::from(p)))
        } else {
            Err(format!("expected structured:N or file:PATH, got {s:?}"))
        }
    }
}

impl fmt::Display for MeshSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshSource::Structured(n) => write!(f, "structured:{n}"),
            MeshSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Finest level; levels `0..=levels` are run.
    pub levels: usize,
    pub enrich_velocity: bool,
    pub isoparametric: bool,
    pub gamma: f64,
    pub lambda: f64,
    pub mesh: MeshSource,
    pub problem: String,
    pub output: Option<PathBuf>,
    /// Quadrature degree of the error norms.
    pub quad_degree: usize,
    pub serial: bool,
    /// Interface centre; moves the whole reference solution.
    pub center: Point,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            enrich_velocity: true,
            isoparametric: true,
            gamma: 0.1,
            lambda: 20.0,
            mesh: MeshSource::Structured(8),
            problem: "kirchhart-circle".into(),
            output: None,
            quad_degree: 6,
            serial: true,
            center: Point::zeros(),
        }
    }
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage {stage} failed at level {level}: {message}")]
    Stage { stage: &'static str, level: usize, message: String },
    #[error("writing {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

fn stage<E: fmt::Display>(stage: &'static str, level: usize) -> impl FnOnce(E) -> StudyError {
    move |e| StudyError::Stage { stage, level, message: e.to_string() }
}

/// Everything produced by one solve.
pub struct LevelSolution {
    pub disc: Discretization,
    pub blocks: SystemBlocks,
    pub velocity: FieldFunction,
    pub pressure: FieldFunction,
    pub solve: SolveReport,
}

/// Discretizes, assembles and solves `problem` on `mesh`.
pub fn solve_problem(
    mesh: Mesh,
    problem: &Problem,
    options: DiscretizationOptions,
    solve_options: &SolveOptions,
    level: usize,
) -> Result<LevelSolution, StudyError> {
    let disc = Discretization::new(mesh, problem.level_set.as_ref(), options).map_err(stage("geometry", level))?;
    let quad = QuadratureOptions::for_discretization(&disc);
    let blocks = assemble_blocks(&disc, &problem.material, &problem.data, &quad).map_err(stage("assembly", level))?;
    let sys = assemble_system(&blocks, true).map_err(stage("assembly", level))?;
    let (x, solve) = factor_solve(&sys, solve_options).map_err(stage("solve", level))?;
    let velocity = FieldFunction { kind: FieldKind::Velocity, coefficients: sys.velocity(&x).to_vec() };
    let pressure = FieldFunction { kind: FieldKind::Pressure, coefficients: sys.pressure(&x).to_vec() };
    Ok(LevelSolution { disc, blocks, velocity, pressure, solve })
}

#[derive(Clone, Debug)]
pub struct StudyRow {
    pub errors: ErrorReport,
    pub residual: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

impl StudyResult {
    /// CSV text; `with_timing = false` blanks the wall-clock column so the
    /// output is byte-reproducible.
    pub fn to_csv(&self, with_timing: bool) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let e = &r.errors;
            let seconds = if with_timing { format!("{:.3}", r.seconds) } else { String::new() };
            out.push_str(&format!(
                "{},{},{:.6e},{},{:.6e},{},{:.3e},{}\n",
                e.level,
                e.ndof,
                e.e_up,
                opt(e.eoc_up),
                e.e_u_l2,
                opt(e.eoc_u_l2),
                r.residual,
                seconds
            ));
        }
        out
    }

    pub fn last(&self) -> Option<&ErrorReport> {
        self.rows.last().map(|r| &r.errors)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), StudyError> {
        MaterialParams { mu: [1.0, 1.0], rho: [1.0, 1.0], lambda: self.lambda, gamma: self.gamma }
            .validate()
            .map_err(|e| StudyError::Config(e.to_string()))?;
        if self.quad_degree > crate::quadrature::MAX_DEGREE {
            return Err(StudyError::Config(format!(
                "quadrature degree {} exceeds {}",
                self.quad_degree,
                crate::quadrature::MAX_DEGREE
            )));
        }
        if problem_by_name(&self.problem, self.center, self.lambda, self.gamma).is_none() {
            return Err(StudyError::Config(format!("unknown problem {:?}", self.problem)));
        }
        Ok(())
    }
}

/// Runs levels `0..=cfg.levels`, calling `progress` after each level.
pub fn run_study_with(cfg: &RunConfig, mut progress: impl FnMut(&StudyRow)) -> Result<StudyResult, StudyError> {
    cfg.validate()?;
    let base = cfg.mesh.load().map_err(stage("mesh", 0))?;
    let options = DiscretizationOptions { enrich_velocity: cfg.enrich_velocity, isoparametric: cfg.isoparametric };
    let solve_options = SolveOptions { serial: cfg.serial, ..SolveOptions::default() };
    let mut mesh = base;
    let mut rows: Vec<StudyRow> = Vec::new();
    for level in 0..=cfg.levels {
        if level > 0 {
            mesh = mesh.refine_uniform();
        }
        let start = Instant::now();
        let problem = problem_by_name(&cfg.problem, cfg.center, cfg.lambda, cfg.gamma).expect("validated");
        let sol = solve_problem(mesh.clone(), &problem, options, &solve_options, level)?;
        let exact = problem.data.exact.as_deref().ok_or_else(|| StudyError::Stage {
            stage: "errors",
            level,
            message: "problem has no exact solution".into(),
        })?;
        let mut errors = compute_errors(&sol.disc, exact, &sol.velocity, &sol.pressure, cfg.quad_degree)
            .map_err(stage("errors", level))?;
        errors.level = level;
        rows.push(StudyRow { errors, residual: sol.solve.relative_residual, seconds: start.elapsed().as_secs_f64() });
        let mut reports: Vec<ErrorReport> = rows.iter().map(|r| r.errors.clone()).collect();
        annotate_eoc(&mut reports);
        for (r, e) in rows.iter_mut().zip(reports) {
            r.errors = e;
        }
        progress(rows.last().unwrap());
    }
    let result = StudyResult { rows };
    if let Some(path) = &cfg.output {
        std::fs::write(path, result.to_csv(true)).map_err(|source| StudyError::Output { path: path.clone(), source })?;
    }
    Ok(result)
}

pub fn run_study(cfg: &RunConfig) -> Result<StudyResult, StudyError> {
    run_study_with(cfg, |_| {})
}
