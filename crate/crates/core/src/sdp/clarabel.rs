//! Backend on the Clarabel interior-point solver.
//!
//! Clarabel solves `min q^T x  s.t.  A x + s = b, s in K` and stores PSD
//! blocks in the same scaled upper-triangle form as [`super::svec`], so each
//! cone maps to `b = constant`, `A = -columns`. Lower bounds become one
//! nonnegative-orthant block.
//!
//! Points returned by an interior-point method satisfy the inequalities only
//! up to the solver tolerance, which can exceed the safety margin. Such a
//! point is pulled toward a maximally interior point of the same program
//! (see [`max_margin`]) by the smallest convex step that restores the margin.
//! Feasibility problems are solved directly in max-margin form.

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT,
    SolverStatus, SupportedConeT,
};
use nalgebra::DVector;

use super::{accept, residuals, svec_index, ConicProgram, ConicSolver, SolveReport, SolveStatus, SolverSettings};

#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelSolver;

/// Cap on the shift of the max-margin problem, which is unbounded whenever
/// the inequalities are homogeneous in some variable.
const MARGIN_CAP: f64 = 1.0;

/// Column-compressed matrix from `(row, col, value)` triplets; duplicates are summed.
fn csc(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    triplets.sort_by_key(|&(r, c, _)| (c, r));
    let mut colptr = vec![0; n_cols + 1];
    let mut rowval: Vec<usize> = Vec::with_capacity(triplets.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(triplets.len());
    let mut prev = None;
    for (r, c, x) in triplets {
        if prev == Some((r, c)) {
            *nzval.last_mut().expect("previous entry") += x;
            continue;
        }
        prev = Some((r, c));
        rowval.push(r);
        nzval.push(x);
        colptr[c + 1] += 1;
    }
    for c in 0..n_cols {
        colptr[c + 1] += colptr[c];
    }
    CscMatrix::new(n_rows, n_cols, colptr, rowval, nzval)
}

struct Raw {
    status: SolverStatus,
    x: Vec<f64>,
    gap: f64,
    iterations: usize,
}

/// Static KKT regularization levels, tried in order while the factorization
/// breaks down. Every returned point is re-checked by `accept`, so a
/// stronger regularization only costs accuracy, never soundness.
const REGULARIZATION: [f64; 3] = [1e-8, 1e-6, 1e-4];

/// Solve `min q^T (v, t)` over the cones of `prog`. With `shift`, an extra
/// variable `t <= MARGIN_CAP` is subtracted from the diagonal of every cone.
fn run(prog: &ConicProgram, q: &[f64], shift: bool, settings: &SolverSettings) -> Option<Raw> {
    let mut iterations = 0;
    let mut last = None;
    for reg in REGULARIZATION {
        let mut raw = run_once(prog, q, shift, settings, reg)?;
        iterations += raw.iterations;
        raw.iterations = iterations;
        let retry = matches!(raw.status, SolverStatus::NumericalError | SolverStatus::InsufficientProgress);
        last = Some(raw);
        if !retry {
            break;
        }
    }
    last
}

fn run_once(prog: &ConicProgram, q: &[f64], shift: bool, settings: &SolverSettings, regularization: f64) -> Option<Raw> {
    let n = prog.n_vars + usize::from(shift);
    let mut triplets = Vec::new();
    let mut b = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    for cone in &prog.cones {
        let offset = b.len();
        b.extend_from_slice(&cone.constant);
        for (j, col) in &cone.columns {
            triplets.extend(col.iter().map(|&(k, x)| (offset + k, *j, -x)));
        }
        if shift {
            triplets.extend((0..cone.dim).map(|i| (offset + svec_index(i, i), prog.n_vars, 1.0)));
        }
        cones.push(PSDTriangleConeT(cone.dim));
    }
    let mut n_orthant = 0;
    for &(j, lb) in &prog.lower_bounds {
        triplets.push((b.len(), j, -1.0));
        b.push(-lb);
        n_orthant += 1;
    }
    if shift {
        triplets.push((b.len(), prog.n_vars, 1.0));
        b.push(MARGIN_CAP);
        n_orthant += 1;
    }
    if n_orthant > 0 {
        cones.push(NonnegativeConeT(n_orthant));
    }
    let a = csc(b.len(), n, triplets);
    let p = CscMatrix::zeros((n, n));
    let options: DefaultSettings<f64> = DefaultSettingsBuilder::default()
        .verbose(false)
        .static_regularization_constant(regularization)
        .tol_gap_abs(settings.abs_tol)
        .tol_gap_rel(settings.rel_tol)
        .tol_feas(settings.rel_tol)
        .max_iter(u32::try_from(settings.max_iter).unwrap_or(u32::MAX))
        .build()
        .ok()?;
    let mut solver = DefaultSolver::new(&p, q, &a, &b, &cones, options).ok()?;
    solver.solve();
    let sol = &solver.solution;
    Some(Raw {
        status: sol.status,
        x: sol.x.clone(),
        gap: (sol.obj_val - sol.obj_val_dual).abs(),
        iterations: sol.iterations as usize,
    })
}

/// Most interior point: maximize `t` subject to `S_k(v) >= t I` and the
/// bounds, with `t <= MARGIN_CAP`. Returns the point, `t` and the iteration count.
fn max_margin(prog: &ConicProgram, settings: &SolverSettings) -> Option<(DVector<f64>, f64, SolverStatus, usize)> {
    let mut q = vec![0.0; prog.n_vars + 1];
    q[prog.n_vars] = -1.0;
    let raw = run(prog, &q, true, settings)?;
    let t = raw.x.get(prog.n_vars).copied().unwrap_or(f64::NAN);
    let v = DVector::from_column_slice(raw.x.get(..prog.n_vars)?);
    Some((v, t, raw.status, raw.iterations))
}

fn solved(status: SolverStatus) -> bool {
    matches!(status, SolverStatus::Solved | SolverStatus::AlmostSolved)
}

/// Smallest `theta` on a geometric grid with `(1 - theta) v + theta center` acceptable.
fn pull_inside(prog: &ConicProgram, v: &DVector<f64>, center: &DVector<f64>) -> Option<DVector<f64>> {
    let mut theta = 1e-9;
    while theta <= 1.0 {
        let w = v * (1.0 - theta) + center * theta;
        if accept(prog, &w) {
            return Some(w);
        }
        theta *= 2.0;
    }
    None
}

impl ConicSolver for ClarabelSolver {
    fn solve(&self, prog: &ConicProgram, settings: &SolverSettings) -> SolveReport {
        let started = Instant::now();
        let n = prog.n_vars;
        let report = |status, v: DVector<f64>, gap, iterations| {
            let objective = prog.objective.iter().zip(v.iter()).map(|(c, x)| c * x).sum();
            let (cone, bound) = residuals(prog, &v);
            SolveReport {
                status,
                objective,
                primal_residual: cone.max(bound).max(0.0),
                v,
                gap,
                iterations,
                solve_time: started.elapsed(),
            }
        };
        let trouble = |iterations| report(SolveStatus::NumericalTrouble, DVector::zeros(n), f64::NAN, iterations);
        if prog.validate().is_err() {
            return trouble(0);
        }

        // Decide feasibility through the margin problem when there is
        // nothing to optimize, or when the optimizer's answer needs help.
        let classify = |center: Option<(DVector<f64>, f64, SolverStatus, usize)>| match center {
            Some((v, t, status, it)) if solved(status) && t.is_finite() => {
                if t > 0.0 && accept(prog, &v) {
                    Ok((v, it))
                } else if t <= 0.0 {
                    Err(report(SolveStatus::Infeasible, v, 0.0, it))
                } else {
                    Err(trouble(it))
                }
            }
            Some((_, _, SolverStatus::MaxIterations, it)) => Err(report(
                SolveStatus::IterationLimit,
                DVector::zeros(n),
                f64::NAN,
                it,
            )),
            Some((_, _, _, it)) => Err(trouble(it)),
            None => Err(trouble(0)),
        };

        if prog.objective.iter().all(|&c| c == 0.0) {
            return match classify(max_margin(prog, settings)) {
                Ok((v, it)) => report(SolveStatus::Optimal, v, 0.0, it),
                Err(r) => r,
            };
        }

        // The argmin does not depend on the objective scale; a unit-scale
        // objective keeps the relative tolerances meaningful.
        let c_scale = prog.objective.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let q: Vec<f64> = prog.objective.iter().map(|x| x / c_scale).collect();
        let Some(raw) = run(prog, &q, false, settings) else {
            return trouble(0);
        };
        let gap = c_scale * raw.gap;
        let v = DVector::from_column_slice(&raw.x);
        let finite = v.iter().all(|x| x.is_finite());
        match raw.status {
            s if solved(s) && finite => {
                if accept(prog, &v) {
                    return report(SolveStatus::Optimal, v, gap, raw.iterations);
                }
                match classify(max_margin(prog, settings)) {
                    Ok((center, it)) => match pull_inside(prog, &v, &center) {
                        Some(w) => report(SolveStatus::Optimal, w, gap, raw.iterations + it),
                        None => trouble(raw.iterations + it),
                    },
                    Err(r) => r,
                }
            }
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                report(SolveStatus::Infeasible, v, gap, raw.iterations)
            }
            SolverStatus::MaxIterations | SolverStatus::MaxTime => {
                report(SolveStatus::IterationLimit, v, gap, raw.iterations)
            }
            _ => match classify(max_margin(prog, settings)) {
                // feasible, but the optimizer failed
                Ok((_, it)) => trouble(raw.iterations + it),
                Err(r) => r,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csc_sums_duplicates_and_orders_columns() {
        let m = csc(2, 2, vec![(1, 1, 2.0), (0, 0, 1.0), (1, 1, 3.0), (0, 1, -1.0)]);
        assert_eq!(m.colptr, vec![0, 1, 3]);
        assert_eq!(m.rowval, vec![0, 0, 1]);
        assert_eq!(m.nzval, vec![1.0, -1.0, 5.0]);
    }
}
