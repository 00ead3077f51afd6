//! Direct sparse solve of the assembled saddle-point system.
//!
//! The matrix `[[A, Bᵀ, 0], [B, −J, c], [0, cᵀ, 0]]` is symmetric
//! indefinite. Shifting the lower-right diagonal by `−δ` makes it
//! quasi-definite, so an `LDLᵀ` factorization exists for any symmetric
//! fill-reducing ordering without pivoting. The shift is removed again by
//! iterative refinement against the unshifted matrix.

use std::time::Instant;

use dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::{LdltError, LdltRegularization};
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LdltRef, SymmetricOrdering};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Conj, Mat, Par, Side};
use thiserror::Error;

use crate::assembly::SystemAssembly;
use crate::sparse::Triplets;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("system is singular: no pivot available at row {index}")]
    Singular { index: usize },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("relative residual {residual:e} exceeds {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
    #[error("pressure mean {0:e} is not zero")]
    PressureMean(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Single-threaded factorization, bitwise reproducible.
    pub serial: bool,
    pub residual_tolerance: f64,
    pub max_refinement_steps: usize,
    /// Diagonal shift of the pressure block, relative to `max |K|`.
    pub shift: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { serial: true, residual_tolerance: 1e-10, max_refinement_steps: 20, shift: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    /// `‖Kx − b‖ / ‖b‖`.
    pub relative_residual: f64,
    pub factor_time: f64,
    pub solve_time: f64,
    pub nnz: usize,
    /// Nonzeros of the triangular factor.
    pub factor_nnz: usize,
    /// `∫ p dx` of the computed pressure.
    pub pressure_mean: f64,
    pub refinement_steps: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// First row or column without a single nonzero entry.
pub fn structural_deficiency(sys: &SystemAssembly) -> Option<usize> {
    let m = &sys.matrix;
    let mut col_hit = vec![false; m.ncols];
    let mut first = None;
    for r in 0..m.nrows {
        let mut any = false;
        for (c, v) in m.row(r) {
            if v != 0.0 {
                any = true;
                col_hit[c] = true;
            }
        }
        if !any && first.is_none() {
            first = Some(r);
        }
    }
    let col = col_hit.iter().position(|h| !h);
    match (first, col) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

pub fn factor_solve(sys: &SystemAssembly, opts: &SolveOptions) -> Result<(Vec<f64>, SolveReport), SolveError> {
    if let Some(index) = structural_deficiency(sys) {
        return Err(SolveError::Singular { index });
    }
    let n = sys.n();
    let nv = sys.n_velocity;
    let par = if opts.serial { Par::Seq } else { Par::rayon(0) };
    if opts.serial {
        faer::set_global_parallelism(Par::Seq);
    }

    // Upper triangle in CSR is the lower triangle in CSC.
    let delta = opts.shift * sys.matrix.max_abs();
    let mut t = Triplets::new(n, n);
    for (r, c, v) in sys.matrix.iter() {
        if c >= r {
            t.push(r, c, v);
        }
    }
    for i in nv..n {
        t.push(i, i, -delta);
    }
    let lower = t.into_csr();
    let symbolic = SymbolicSparseColMat::new_checked(n, n, lower.indptr, None, lower.indices);
    let mat = SparseColMat::new(symbolic, lower.data);

    let start = Instant::now();
    let symbolic = factorize_symbolic_cholesky(mat.symbolic(), Side::Lower, SymmetricOrdering::Amd, Default::default())
        .map_err(|e| SolveError::Factorization(format!("{e:?}")))?;
    let mut values = vec![0.0f64; symbolic.len_val()];
    let mut mem = MemBuffer::new(
        symbolic
            .factorize_numeric_ldlt_scratch::<f64>(par, Default::default())
            .or(symbolic.solve_in_place_scratch::<f64>(1, par)),
    );
    let stack = MemStack::new(&mut mem);
    symbolic
        .factorize_numeric_ldlt(&mut values, mat.as_ref(), Side::Lower, LdltRegularization::default(), par, stack, Default::default())
        .map_err(|e| match e {
            LdltError::ZeroPivot { index } => SolveError::Singular { index },
        })?;
    let ldlt = LdltRef::new(&symbolic, &values);
    let factor_time = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let mut solve = |b: &[f64]| -> Vec<f64> {
        let mut rhs = Mat::from_fn(n, 1, |i, _| b[i]);
        ldlt.solve_in_place_with_conj(Conj::No, rhs.as_mut(), par, MemStack::new(&mut mem));
        (0..n).map(|i| rhs[(i, 0)]).collect()
    };
    let mut x = solve(&sys.rhs);
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(SolveError::Singular { index });
    }
    let bnorm = norm(&sys.rhs);
    let residual_of = |x: &[f64]| -> (Vec<f64>, f64) {
        let kx = sys.matrix.mul_vec(x);
        let r: Vec<f64> = sys.rhs.iter().zip(&kx).map(|(b, k)| b - k).collect();
        let rel = if bnorm > 0.0 { norm(&r) / bnorm } else { norm(&r) };
        (r, rel)
    };
    let (mut r, mut rel) = residual_of(&x);
    let mut steps = 0;
    while rel > 1e-3 * opts.residual_tolerance && steps < opts.max_refinement_steps {
        let dx = solve(&r);
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let (r2, rel2) = residual_of(&candidate);
        if !(rel2 < rel) {
            break;
        }
        x = candidate;
        r = r2;
        rel = rel2;
        steps += 1;
    }
    let solve_time = start.elapsed().as_secs_f64();
    if !(rel < opts.residual_tolerance) {
        return Err(SolveError::Residual { residual: rel, tolerance: opts.residual_tolerance });
    }
    let pressure_mean: f64 = sys.mean.iter().zip(sys.pressure(&x)).map(|(c, p)| c * p).sum();
    if pressure_mean.abs() >= 1e-10 {
        return Err(SolveError::PressureMean(pressure_mean));
    }
    let report = SolveReport {
        relative_residual: rel,
        factor_time,
        solve_time,
        nnz: sys.matrix.nnz(),
        factor_nnz: symbolic.len_val(),
        pressure_mean,
        refinement_steps: steps,
    };
    Ok((x, report))
}
