//! Sparse sensor selection by iteratively reweighted l1 minimization of the
//! precision vector, followed by pruning, a refinement re-solve on the
//! surviving sensors, and observer-gain recovery.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, min_sym_eigenvalue, symmetrize, Mat};
use crate::lmi::{
    assemble_lft_performance, assemble_lft_small_gain, assemble_theorem1, Assembly, LmiOptions, BETA, X2, Y,
};
use crate::sdp::{compile, solve, Objective, PsdCone, SolveReport, SolveStatus, SolverSettings};
use crate::system_model::{AffineUncertainty, LftPlant, ObserverGain, PrecisionVector, StateSpaceModel};

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOptions {
    /// Reweighting offset, relative to `max(1, max beta)` of the first iterate.
    pub epsilon_reweight: f64,
    pub max_reweight_iters: usize,
    /// Stop reweighting when `rho^T beta` changes by less than this (relative).
    pub convergence_tol: f64,
    pub prune_rel: f64,
    pub prune_abs: f64,
    pub lmi: LmiOptions,
    pub solver: SolverSettings,
    /// When set, an infeasible design reports the feasibility frontier found
    /// by bisection between these bounds.
    pub frontier_bracket: Option<(f64, f64)>,
    /// Relative budget on the total precision for the final centering solve;
    /// zero keeps the refinement optimum as is.
    pub centering_slack: f64,
    pub rng_seed: u64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            epsilon_reweight: 1e-4,
            max_reweight_iters: 10,
            convergence_tol: 1e-3,
            prune_rel: 1e-5,
            prune_abs: 1e-7,
            lmi: LmiOptions::default(),
            solver: SolverSettings::default(),
            frontier_bracket: None,
            centering_slack: 5e-2,
            rng_seed: 0,
        }
    }
}

impl DesignOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon_reweight", self.epsilon_reweight),
            ("convergence_tol", self.convergence_tol),
            ("prune_rel", self.prune_rel),
            ("prune_abs", self.prune_abs),
            ("beta_min", self.lmi.beta_min),
            ("delta_min", self.lmi.delta_min),
            ("margin_scale", self.lmi.margin_scale),
            ("abs_tol", self.solver.abs_tol),
            ("rel_tol", self.solver.rel_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.centering_slack.is_finite() && self.centering_slack >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "centering_slack must be nonnegative, got {}",
                self.centering_slack
            )));
        }
        if self.max_reweight_iters == 0 || self.solver.max_iter == 0 {
            return Err(Error::InvalidArgument("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Reweight,
    Refine,
    Center,
}

/// One solve of the design loop. Vectors are indexed by the full sensor set
/// (sensors outside the solved set are reported as zero).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub phase: Phase,
    pub rho: Vec<f64>,
    pub beta: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub solver_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct DesignResult {
    pub gain: ObserverGain,
    pub precision: PrecisionVector,
    pub gamma: f64,
    pub active_count: usize,
    pub history: Vec<IterationRecord>,
    pub refined: bool,
    /// Sensors surviving the pruning threshold applied to the first
    /// (equal-weights) iterate.
    pub first_iteration_active: usize,
    /// Pruned sensors put back because the refinement was infeasible.
    pub restored: Vec<usize>,
    /// `max_k lambda_max(M_k(v)) + margin_k` at the final point (negative).
    pub lmi_residual: f64,
    /// `||X2 L - Y||_max` of the gain recovery.
    pub gain_residual: f64,
    /// `||Y||_max` at the final point.
    pub y_max: f64,
}

/// `rho_i = 1 / (epsilon + |beta_i|)`.
pub fn reweight(beta: &[f64], epsilon: f64) -> Vec<f64> {
    beta.iter().map(|b| 1.0 / (epsilon + b.abs())).collect()
}

/// Solve `X2 L = Y` for `L` through a Cholesky factorization of `X2`.
pub fn recover_gain(x2: &Mat, y: &Mat) -> Result<(ObserverGain, f64)> {
    if x2.nrows() != x2.ncols() || x2.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "X2 is {}x{}, Y is {}x{}",
            x2.nrows(),
            x2.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    let x2 = symmetrize(x2);
    if !(min_sym_eigenvalue(&x2) > 0.0) {
        return Err(Error::NotPositiveDefinite("X2"));
    }
    let chol = x2.clone().cholesky().ok_or(Error::NotPositiveDefinite("X2"))?;
    let l = chol.solve(y);
    let residual = max_abs(&(&x2 * &l - y));
    if !(residual <= 1e-8 * (1.0 + max_abs(y))) {
        return Err(Error::Solver(format!("gain recovery residual {residual:e} too large; X2 is numerically singular")));
    }
    Ok((ObserverGain::new(l)?, residual))
}

/// A synthesis problem restricted to a subset of the sensors.
trait Synthesis {
    fn n_sensors(&self) -> usize;
    fn assemble(&self, sensors: &[usize], gamma: f64, opts: &LmiOptions) -> Result<Assembly>;
}

struct Structured<'a> {
    model: &'a StateSpaceModel,
    unc: &'a AffineUncertainty,
}

impl Synthesis for Structured<'_> {
    fn n_sensors(&self) -> usize {
        self.model.n_sensors()
    }

    fn assemble(&self, sensors: &[usize], gamma: f64, opts: &LmiOptions) -> Result<Assembly> {
        assemble_theorem1(&self.model.select_sensors(sensors)?, self.unc, gamma, opts)
    }
}

struct Lft<'a> {
    plant: &'a LftPlant,
}

impl Synthesis for Lft<'_> {
    fn n_sensors(&self) -> usize {
        self.plant.n_sensors()
    }

    fn assemble(&self, sensors: &[usize], gamma: f64, opts: &LmiOptions) -> Result<Assembly> {
        assemble_lft_performance(&self.plant.select_sensors(sensors)?, gamma, opts)
    }
}

struct Solved {
    asm: Assembly,
    report: SolveReport,
    beta: Vec<f64>,
}

fn solve_weighted(
    problem: &dyn Synthesis,
    sensors: &[usize],
    rho: &[f64],
    gamma: f64,
    opts: &DesignOptions,
) -> Result<Solved> {
    let asm = problem.assemble(sensors, gamma, &opts.lmi)?;
    let beta_id = asm.space.require(BETA)?;
    let prog = compile(&asm.space, &Objective::WeightedL1 { var: beta_id, weights: rho.to_vec() }, &asm.lmis)?;
    let report = solve(&prog, &opts.solver);
    let beta = asm.space.vector_value(&report.v, beta_id)?;
    Ok(Solved { asm, report, beta })
}

fn record(phase: Phase, n: usize, sensors: &[usize], rho: &[f64], s: &Solved) -> IterationRecord {
    let mut full_rho = vec![0.0; n];
    let mut full_beta = vec![0.0; n];
    for (k, &i) in sensors.iter().enumerate() {
        full_rho[i] = rho[k];
        full_beta[i] = s.beta[k];
    }
    IterationRecord {
        phase,
        rho: full_rho,
        beta: full_beta,
        objective: s.report.objective,
        status: s.report.status,
        solver_iterations: s.report.iterations,
    }
}

fn solver_failure(status: SolveStatus, what: &str) -> Error {
    Error::Solver(format!("{what} ended with status {status:?}"))
}

/// Most interior point of the refinement problem with the total precision
/// held within `(1 + slack)` of its optimum. Minimizers of the precision sum
/// sit on the boundary of the feasible set, where the gain can grow without
/// bound; the centered point keeps the certificate well conditioned.
fn center(refined: &Solved, slack: f64, opts: &DesignOptions) -> Result<Option<Solved>> {
    let space = &refined.asm.space;
    let mut prog = compile(space, &Objective::Feasibility, &refined.asm.lmis)?;
    let budget = (1.0 + slack) * refined.beta.iter().sum::<f64>();
    prog.cones.push(PsdCone {
        name: "precision-budget".into(),
        dim: 1,
        margin: 0.0,
        constant: vec![budget],
        columns: space.range(space.require(BETA)?).map(|j| (j, vec![(0, -1.0)])).collect(),
    });
    let report = solve(&prog, &opts.solver);
    if report.status != SolveStatus::Optimal {
        return Ok(None);
    }
    let beta = space.vector_value(&report.v, space.require(BETA)?)?;
    Ok(Some(Solved { asm: refined.asm.clone(), report, beta }))
}

/// Indices whose precision clears `max(prune_rel * max beta, prune_abs)`.
fn survivors(beta: &[f64], opts: &DesignOptions) -> Vec<usize> {
    let top = beta.iter().copied().fold(0.0_f64, f64::max);
    let threshold = (opts.prune_rel * top).max(opts.prune_abs);
    (0..beta.len()).filter(|&i| beta[i] >= threshold).collect()
}

/// Smallest performance level at which the equal-weights synthesis problem
/// is feasible, bisected geometrically between `lo` and `hi` (12 steps). `None` if `hi`
/// itself is infeasible.
fn frontier(problem: &dyn Synthesis, lo: f64, hi: f64, opts: &DesignOptions) -> Result<Option<f64>> {
    let all: Vec<usize> = (0..problem.n_sensors()).collect();
    let ones = vec![1.0; all.len()];
    let feasible = |g: f64| -> Result<bool> {
        Ok(solve_weighted(problem, &all, &ones, g, opts)?.report.status == SolveStatus::Optimal)
    };
    if !feasible(hi)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..12 {
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

fn run(problem: &dyn Synthesis, gamma: f64, opts: &DesignOptions) -> Result<DesignResult> {
    opts.validate()?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let n = problem.n_sensors();
    let all: Vec<usize> = (0..n).collect();
    let mut history = Vec::new();

    // Equal weights first.
    let mut rho = vec![1.0; n];
    let first = solve_weighted(problem, &all, &rho, gamma, opts)?;
    history.push(record(Phase::Reweight, n, &all, &rho, &first));
    match first.report.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            let frontier = match opts.frontier_bracket {
                Some((lo, hi)) => frontier(problem, lo, hi, opts)?,
                None => None,
            };
            return Err(Error::Infeasible { gamma, frontier });
        }
        s => return Err(solver_failure(s, "first reweighting iteration")),
    }
    let first_iteration_active = survivors(&first.beta, opts).len();
    let epsilon = opts.epsilon_reweight * first.beta.iter().copied().fold(1.0_f64, f64::max);

    let mut objective = first.report.objective;
    let mut beta = first.beta;
    for _ in 1..opts.max_reweight_iters {
        rho = reweight(&beta, epsilon);
        let next = solve_weighted(problem, &all, &rho, gamma, opts)?;
        history.push(record(Phase::Reweight, n, &all, &rho, &next));
        if next.report.status != SolveStatus::Optimal {
            // keep the last good iterate
            break;
        }
        let new = next.report.objective;
        beta = next.beta;
        if (new - objective).abs() <= opts.convergence_tol * objective.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        objective = new;
    }

    // Prune, then re-solve with equal weights on the survivors. If that is
    // infeasible, put pruned sensors back in decreasing order of precision.
    let mut kept = survivors(&beta, opts);
    let mut pruned: Vec<usize> = (0..n).filter(|i| !kept.contains(i)).collect();
    pruned.sort_by(|&a, &b| beta[b].total_cmp(&beta[a]).then(a.cmp(&b)));
    let mut restored = Vec::new();
    let refined = loop {
        let ones = vec![1.0; kept.len()];
        let s = solve_weighted(problem, &kept, &ones, gamma, opts)?;
        history.push(record(Phase::Refine, n, &kept, &ones, &s));
        match s.report.status {
            SolveStatus::Optimal => break s,
            SolveStatus::Infeasible if !pruned.is_empty() => {
                let back = pruned.remove(0);
                restored.push(back);
                kept.push(back);
                kept.sort_unstable();
            }
            st => return Err(solver_failure(st, "refinement")),
        }
    };

    let ones = vec![1.0; kept.len()];
    let refined = match opts.centering_slack {
        0.0 => refined,
        slack => match center(&refined, slack, opts)? {
            Some(c) => {
                history.push(record(Phase::Center, n, &kept, &ones, &c));
                c
            }
            None => refined,
        },
    };

    let space = &refined.asm.space;
    let x2 = space.matrix_value(&refined.report.v, space.require(X2)?)?;
    let y = space.matrix_value(&refined.report.v, space.require(Y)?)?;
    let (reduced_gain, gain_residual) = recover_gain(&x2, &y)?;
    let n_states = x2.nrows();
    let mut l = Mat::zeros(n_states, n);
    let mut beta_full = vec![0.0; n];
    let mut active = vec![false; n];
    for (k, &i) in kept.iter().enumerate() {
        l.set_column(i, &reduced_gain.matrix().column(k));
        beta_full[i] = refined.beta[k];
        active[i] = true;
    }
    let lmi_residual = refined.asm.worst_residual(&refined.report.v)?;
    let precision = PrecisionVector::new(beta_full, active.clone(), opts.lmi.beta_min)?;
    Ok(DesignResult {
        gain: ObserverGain::masked(l, &active)?,
        active_count: precision.active_count(),
        precision,
        gamma,
        history,
        refined: true,
        first_iteration_active,
        restored,
        lmi_residual,
        gain_residual,
        y_max: max_abs(&y),
    })
}

/// Sparse robust observer for a plant with affine uncertainty.
pub fn design_structured(
    model: &StateSpaceModel,
    unc: &AffineUncertainty,
    gamma: f64,
    opts: &DesignOptions,
) -> Result<DesignResult> {
    unc.check_against(model)?;
    run(&Structured { model, unc }, gamma, opts)
}

/// Sparse robust observer for an LFT plant. The small-gain condition on the
/// uncertainty channel does not involve the observer and is checked once.
pub fn design_lft(plant: &LftPlant, gamma: f64, opts: &DesignOptions) -> Result<DesignResult> {
    opts.validate()?;
    let sg = assemble_lft_small_gain(plant, &opts.lmi)?;
    let prog = compile(&sg.space, &Objective::Feasibility, &sg.lmis)?;
    match solve(&prog, &opts.solver).status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            return Err(Error::Infeasible { gamma, frontier: None });
        }
        s => return Err(solver_failure(s, "small-gain check")),
    }
    run(&Lft { plant }, gamma, opts)
}
