//! Conic programs over PSD cones and the solver contract.
//!
//! An affine matrix inequality `M(v) <= -margin I` becomes the cone
//! constraint `S(v) = -A0 - margin I - sum_j v_j A_j` in the PSD cone.
//! Matrices are stored in `svec` form: the upper triangle stacked column by
//! column with off-diagonal entries scaled by `sqrt(2)`, so that
//! `<svec(A), svec(B)> = trace(A B)`.

mod clarabel;

use std::fmt::Write as _;
use std::time::Duration;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lmi::{AffineMatrixInequality, DecisionVariableSpace, VarId, VariableKind};
use crate::linalg::Mat;

pub use clarabel::ClarabelSolver;

/// Length of `svec` for an `m x m` matrix.
pub fn svec_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Symmetric vectorization (upper triangle, column-major, off-diagonals times sqrt 2).
pub fn svec(a: &Mat) -> Vec<f64> {
    let m = a.nrows();
    let mut out = Vec::with_capacity(svec_len(m));
    for j in 0..m {
        for i in 0..=j {
            let x = if i == j { a[(i, i)] } else { a[(i, j)] * std::f64::consts::SQRT_2 };
            out.push(x);
        }
    }
    out
}

/// Position of `(i, j)`, `i <= j`, inside `svec`.
pub fn svec_index(i: usize, j: usize) -> usize {
    j * (j + 1) / 2 + i
}

/// Inverse of [`svec`].
pub fn unsvec(v: &[f64], m: usize) -> Mat {
    let mut a = Mat::zeros(m, m);
    for j in 0..m {
        for i in 0..=j {
            let x = v[svec_index(i, j)];
            if i == j {
                a[(i, i)] = x;
            } else {
                let x = x / std::f64::consts::SQRT_2;
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
    }
    a
}

/// Recover the matrix dimension from an `svec` length.
fn svec_dim(len: usize) -> Option<usize> {
    let m = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    (svec_len(m) == len).then_some(m)
}

/// One PSD-cone constraint `constant + sum_j v_j column_j` in `svec` form.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdCone {
    pub name: String,
    pub dim: usize,
    pub margin: f64,
    pub constant: Vec<f64>,
    /// Sparse columns `(decision index, [(svec index, value)])`, sorted by index.
    pub columns: Vec<(usize, Vec<(usize, f64)>)>,
}

impl PsdCone {
    /// Slack matrix `S(v)`.
    pub fn slack(&self, v: &DVector<f64>) -> Mat {
        let mut s = self.constant.clone();
        for (j, col) in &self.columns {
            for &(k, x) in col {
                s[k] += v[*j] * x;
            }
        }
        unsvec(&s, self.dim)
    }
}

/// Linear objective `c^T v` subject to PSD cones and lower bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub cones: Vec<PsdCone>,
    pub lower_bounds: Vec<(usize, f64)>,
}

/// What to minimize.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Pure feasibility problem.
    Feasibility,
    /// `rho^T beta` for a nonnegative vector variable `beta`.
    WeightedL1 { var: VarId, weights: Vec<f64> },
}

/// Translate a decision space, objective and inequalities into a conic program.
pub fn compile(
    space: &DecisionVariableSpace,
    objective: &Objective,
    lmis: &[AffineMatrixInequality],
) -> Result<ConicProgram> {
    let n = space.dim();
    let mut c = vec![0.0; n];
    if let Objective::WeightedL1 { var, weights } = objective {
        let len = match space.var(*var).kind {
            VariableKind::NonnegVector { len, .. } => len,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "weighted l1 objective needs a nonnegative vector, {} is not",
                    space.var(*var).name
                )))
            }
        };
        if weights.len() != len {
            return Err(Error::Dimension(format!("{} weights for {len} entries", weights.len())));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidArgument(format!("weights must be positive, got {w}")));
        }
        for (k, w) in space.range(*var).zip(weights) {
            c[k] = *w;
        }
    }
    let mut cones = Vec::with_capacity(lmis.len());
    for lmi in lmis {
        if lmi.n_vars() != n {
            return Err(Error::Dimension(format!(
                "{} was assembled for {} variables, space has {n}",
                lmi.name(),
                lmi.n_vars()
            )));
        }
        let m = lmi.dim();
        let constant = svec(&(-lmi.constant() - Mat::identity(m, m) * lmi.margin()));
        let columns = lmi
            .coefficients()
            .iter()
            .map(|(j, a)| {
                let col = a
                    .entries
                    .iter()
                    .map(|&(r, cc, x)| {
                        let s = if r == cc { -x } else { -x * std::f64::consts::SQRT_2 };
                        (svec_index(r, cc), s)
                    })
                    .collect();
                (*j, col)
            })
            .collect();
        cones.push(PsdCone { name: lmi.name().to_owned(), dim: m, margin: lmi.margin(), constant, columns });
    }
    Ok(ConicProgram {
        n_vars: n,
        objective: c,
        cones,
        lower_bounds: space.lower_bounds(),
    })
}

impl ConicProgram {
    /// Plain-text sparse dump for cross-solver testing.
    ///
    /// Header `SDP n_v n_cones`; each cone is `CONE m nnz` followed by
    /// `row col val var_index` lines (upper triangle of the slack matrix,
    /// `var_index = -1` for the constant term). Lower bounds are written as
    /// `1 x 1` cones. A trailing `OBJ nnz` section lists `var_index val`.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        let n_cones = self.cones.len() + self.lower_bounds.len();
        let _ = writeln!(out, "SDP {} {}", self.n_vars, n_cones);
        for cone in &self.cones {
            let mut lines = Vec::new();
            let mut push = |v: &[(usize, f64)], var: i64| {
                for &(k, x) in v {
                    if x == 0.0 {
                        continue;
                    }
                    let (i, j) = svec_position(k);
                    let val = if i == j { x } else { x / std::f64::consts::SQRT_2 };
                    lines.push(format!("{i} {j} {val:e} {var}"));
                }
            };
            let constant: Vec<(usize, f64)> = self.constant_entries(cone);
            push(&constant, -1);
            for (j, col) in &cone.columns {
                push(col, *j as i64);
            }
            let _ = writeln!(out, "CONE {} {}", cone.dim, lines.len());
            for l in lines {
                let _ = writeln!(out, "{l}");
            }
        }
        for &(j, lb) in &self.lower_bounds {
            // v_j - lb >= 0
            let mut lines = Vec::new();
            if lb != 0.0 {
                lines.push(format!("0 0 {:e} -1", -lb));
            }
            lines.push(format!("0 0 {:e} {j}", 1.0));
            let _ = writeln!(out, "CONE 1 {}", lines.len());
            for l in lines {
                let _ = writeln!(out, "{l}");
            }
        }
        let nz: Vec<(usize, f64)> =
            self.objective.iter().copied().enumerate().filter(|(_, x)| *x != 0.0).collect();
        let _ = writeln!(out, "OBJ {}", nz.len());
        for (j, x) in nz {
            let _ = writeln!(out, "{j} {x:e}");
        }
        out
    }

    fn constant_entries(&self, cone: &PsdCone) -> Vec<(usize, f64)> {
        cone.constant.iter().copied().enumerate().collect()
    }

    /// Check that the cone data is internally consistent.
    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.n_vars {
            return Err(Error::Dimension("objective length differs from n_vars".into()));
        }
        for cone in &self.cones {
            if svec_dim(cone.constant.len()) != Some(cone.dim) {
                return Err(Error::Dimension(format!("cone {} has malformed svec data", cone.name)));
            }
            for (j, col) in &cone.columns {
                if *j >= self.n_vars || col.iter().any(|&(k, _)| k >= cone.constant.len()) {
                    return Err(Error::Dimension(format!("cone {} indexes out of range", cone.name)));
                }
            }
        }
        if self.lower_bounds.iter().any(|&(j, _)| j >= self.n_vars) {
            return Err(Error::Dimension("bound on a nonexistent variable".into()));
        }
        Ok(())
    }
}

/// Inverse of [`svec_index`].
fn svec_position(k: usize) -> (usize, usize) {
    let mut j = 0;
    while svec_len(j + 1) <= k {
        j += 1;
    }
    (k - svec_len(j), j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalTrouble,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { abs_tol: 1e-8, rel_tol: 1e-8, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub v: DVector<f64>,
    pub objective: f64,
    /// Largest violation of a cone (`max(0, -lambda_min(S_k(v)))`) or bound.
    pub primal_residual: f64,
    /// Final duality gap of the optimization phase.
    pub gap: f64,
    pub iterations: usize,
    pub solve_time: Duration,
}

/// Anything that can solve a [`ConicProgram`].
pub trait ConicSolver {
    fn solve(&self, prog: &ConicProgram, settings: &SolverSettings) -> SolveReport;
}

/// Solve with the default backend.
pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> SolveReport {
    ClarabelSolver.solve(prog, settings)
}

/// `(worst cone residual, worst bound violation)` at `v`, where the cone
/// residual is `lambda_max(M_k(v)) + margin_k` (negative when satisfied
/// with room to spare).
pub fn residuals(prog: &ConicProgram, v: &DVector<f64>) -> (f64, f64) {
    let mut cone = f64::NEG_INFINITY;
    for c in &prog.cones {
        // M = -S - margin I
        let lmin = crate::linalg::min_sym_eigenvalue(&c.slack(v));
        cone = cone.max(-lmin);
    }
    let bound = prog.lower_bounds.iter().map(|&(j, lb)| lb - v[j]).fold(0.0_f64, f64::max);
    (cone, bound)
}

/// Contract check applied to every candidate `Optimal` point: each
/// inequality must hold with at least half its margin and every bound to 1e-9.
pub(crate) fn accept(prog: &ConicProgram, v: &DVector<f64>) -> bool {
    let bounds_ok = prog.lower_bounds.iter().all(|&(j, lb)| v[j] >= lb - 1e-9);
    bounds_ok
        && prog.cones.iter().all(|c| {
            // lambda_max(M) = -lambda_min(S) - margin <= -margin / 2
            crate::linalg::min_sym_eigenvalue(&c.slack(v)) >= -0.5 * c.margin
        })
}
