//! End-to-end acceptance run on the spring-mass-damper benchmark.
//!
//! Prints one PASS/FAIL line per criterion and exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_hinf::analysis::{hinf_norm, sample_contraction, sample_diagonal, sample_rng, Certification, CERT_TOL};
use sparse_hinf::design::{recover_gain, DesignOptions, DesignResult};
use sparse_hinf::linalg::{mat, max_abs, Mat};
use sparse_hinf::lmi::{assemble_theorem1, assemble_theorem2, Assembly, LmiOptions};
use sparse_hinf::sdp::{compile, solve, Objective, SolveStatus, SolverSettings};
use sparse_hinf::smd::{
    smd_affine, smd_lft, smd_nominal, sweep_gamma, sweep_uncertainty, SmdConfig, SweepPoint, C0_GRID, GAMMA_GRID,
    LFT_C0_GRID, LFT_GAMMA_GRID,
};
use sparse_hinf::system_model::{
    build_structured_error_system, close_delta_loop, ObserverGain, PrecisionVector, StateSpace,
};

use common::{chain_state_matrix, grid_peak, random_stable};

const FIG3_RUNTIME: Duration = Duration::from_secs(60);
const CERT_RUNTIME: Duration = Duration::from_secs(300);
const GRID_POINTS: usize = 100_000;
const GRID_REL_TOL: f64 = 1e-3;
const UNIT_TOL: f64 = 1e-6;
const FIDELITY_TOL: f64 = 1e-12;
const MONOTONE_SAMPLES: u64 = 20;
/// Sensor counts of the LFT gamma sweep (c0 = c1 = 0.1) and c0 sweep
/// (c1 = 0, gamma = 0.2), both with S_d = 0.2 I.
const LFT_GAMMA_COUNTS: [usize; 4] = [3, 6, 6, 6];
const LFT_C0_COUNTS: [usize; 3] = [6, 6, 6];
const LFT_C0_GAMMA: f64 = 0.2;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn counts(points: &[SweepPoint]) -> Vec<Option<usize>> {
    points.iter().map(SweepPoint::active_count).collect()
}

fn fmt_counts(c: &[Option<usize>]) -> String {
    let parts: Vec<String> = c.iter().map(|x| x.map_or("-".into(), |n| n.to_string())).collect();
    format!("[{}]", parts.join(", "))
}

fn nondecreasing(c: &[Option<usize>]) -> bool {
    c.iter().all(Option::is_some) && c.windows(2).all(|w| w[0] <= w[1])
}

struct Runs {
    fig3: Vec<SweepPoint>,
    fig3_time: Duration,
    fig4: Vec<SweepPoint>,
    fig5: Vec<SweepPoint>,
    fig6: Vec<SweepPoint>,
    total_time: Duration,
}

fn runs() -> Runs {
    let opts = DesignOptions::default();
    let start = Instant::now();
    let fig3 = sweep_gamma(&SmdConfig::structured(0.01, 0.02, 0.03), &opts, &GAMMA_GRID);
    let fig3_time = start.elapsed();
    let fig4 = sweep_uncertainty(&SmdConfig::structured(0.0, 0.0, 0.0), &opts, 1.0, &C0_GRID);
    let fig5 = sweep_gamma(&SmdConfig::lft(0.1, 0.1), &opts, &LFT_GAMMA_GRID);
    let fig6 = sweep_uncertainty(&SmdConfig::lft(0.0, 0.0), &opts, LFT_C0_GAMMA, &LFT_C0_GRID);
    Runs { fig3, fig3_time, fig4, fig5, fig6, total_time: start.elapsed() }
}

fn criterion1(r: &Runs) -> Outcome {
    let c = counts(&r.fig3);
    let ok = c.first() == Some(&Some(2)) && c.last() == Some(&Some(6)) && nondecreasing(&c) && r.fig3_time < FIG3_RUNTIME;
    outcome(ok, format!("gamma {GAMMA_GRID:?} -> sensors {}, {:.1} s", fmt_counts(&c), r.fig3_time.as_secs_f64()))
}

fn criterion2(r: &Runs) -> Outcome {
    let c = counts(&r.fig4);
    let ok = c.first() == Some(&Some(1)) && c.last() == Some(&Some(3)) && nondecreasing(&c);
    outcome(ok, format!("c0 {C0_GRID:?} -> sensors {}", fmt_counts(&c)))
}

fn criterion3(r: &Runs) -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    let all = r.fig3.iter().chain(&r.fig4).chain(&r.fig5).chain(&r.fig6);
    for p in all {
        let Ok((res, cert)) = &p.outcome else { continue };
        checked += 1;
        let bound = res.gamma * (1.0 + CERT_TOL);
        let ok = match cert {
            Certification::Structured { sampled, lmi_certificate } => {
                sampled.n_samples == 200 && sampled.worst_norm <= bound && *lmi_certificate == Some(true)
            }
            Certification::Lft(c) => c.diagonal.n_samples == 200 && c.full_block.n_samples == 200 && c.passed && cert.worst_norm() <= bound,
        };
        if !ok {
            failures.push(format!("{}={} (worst {:.6})", p.param.as_str(), p.value, cert.worst_norm()));
        }
    }
    let ok = failures.is_empty() && checked == 15 && r.total_time < CERT_RUNTIME;
    outcome(ok, format!("{checked} designs, failures {failures:?}, {:.1} s total", r.total_time.as_secs_f64()))
}

fn criterion4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(1..=8);
        let (m, p) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let ss = random_stable(&mut rng, n, m, p);
        let Ok(exact) = hinf_norm(&ss, 1e-6, None) else { return outcome(false, "bisection failed".into()) };
        let grid = grid_peak(&ss, 1e-4, 1e4, GRID_POINTS);
        worst = worst.max((exact - grid).abs() / grid);
    }
    let unit = StateSpace::new(mat(1, 1, &[-1.0]), mat(1, 1, &[1.0]), mat(1, 1, &[1.0]), mat(1, 1, &[0.0])).unwrap();
    let u = hinf_norm(&unit, 1e-9, None).unwrap_or(f64::NAN);
    let ok = worst <= GRID_REL_TOL && (u - 1.0).abs() <= UNIT_TOL;
    outcome(ok, format!("worst relative gap {worst:.2e} over 20 systems, unit system {u:.9}"))
}

fn check_program(asm: &Assembly) -> Result<(f64, f64), String> {
    let beta = asm.space.require("beta").map_err(|e| e.to_string())?;
    let n = asm.space.var(beta).kind.scalar_count();
    let prog = compile(&asm.space, &Objective::WeightedL1 { var: beta, weights: vec![1.0; n] }, &asm.lmis)
        .map_err(|e| e.to_string())?;
    let rep = solve(&prog, &SolverSettings::default());
    if rep.status != SolveStatus::Optimal {
        return Err(format!("status {:?}", rep.status));
    }
    let mut worst = f64::NEG_INFINITY;
    for lmi in &asm.lmis {
        let (m, _) = lmi.evaluate(&rep.v).map_err(|e| e.to_string())?;
        let lmax = nalgebra::SymmetricEigen::new((&m + m.transpose()) * 0.5).eigenvalues.max();
        worst = worst.max(lmax / lmi.margin());
    }
    let x2 = asm.space.matrix_value(&rep.v, asm.space.require("X2").unwrap()).unwrap();
    let y = asm.space.matrix_value(&rep.v, asm.space.require("Y").unwrap()).unwrap();
    let (gain, _) = recover_gain(&x2, &y).map_err(|e| e.to_string())?;
    Ok((worst, max_abs(&(&x2 * gain.matrix() - &y)) / (1.0 + max_abs(&y))))
}

fn criterion5(r: &Runs) -> Outcome {
    let model = smd_nominal(&[1.0; 3]).unwrap();
    let unc = smd_affine(0.01, 0.02, 0.03).unwrap();
    let opts = LmiOptions::default();
    let mut asms = Vec::new();
    for g in GAMMA_GRID {
        asms.push(assemble_theorem1(&model, &unc, g, &opts).unwrap());
    }
    let plant = smd_lft(0.1, 0.1, &[0.2; 3]).unwrap();
    for g in LFT_GAMMA_GRID {
        asms.push(assemble_theorem2(&plant, g, &opts).unwrap());
    }
    // lambda_max / margin must be <= -1/2, the scaled residual <= 1e-8
    let (mut lam, mut res) = (f64::NEG_INFINITY, 0.0_f64);
    for asm in &asms {
        match check_program(asm) {
            Ok((l, g)) => {
                lam = lam.max(l);
                res = res.max(g);
            }
            Err(e) => return outcome(false, e),
        }
    }
    for p in r.fig3.iter().chain(&r.fig4).chain(&r.fig5).chain(&r.fig6) {
        if let Ok((d, _)) = &p.outcome {
            // the design loop reports max(lambda_max + margin) < 0, i.e. lambda_max < -margin
            if !(d.lmi_residual < 0.0) {
                lam = f64::INFINITY;
            }
            res = res.max(d.gain_residual / (1.0 + d.y_max));
        }
    }
    let ok = lam <= -0.5 && res <= 1e-8;
    outcome(ok, format!("max lambda_max/margin {lam:.3}, max scaled gain residual {res:.2e}"))
}

fn criterion6() -> Outcome {
    let (c0, c1) = (0.1, 0.1);
    let plant = smd_lft(c0, c1, &[0.2; 3]).unwrap();
    let gain = ObserverGain::zeros(6, 6);
    let prec = PrecisionVector::uniform(6, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let delta = sample_diagonal(6, &mut rng, k % 2 == 0);
        let closed = close_delta_loop(&plant, &gain, &prec, &delta).unwrap();
        let d: Vec<f64> = (0..6).map(|i| delta[(i, i)]).collect();
        let k_ = [1.0 + c0 * d[0], 1.0 + c0 * d[1], 1.0 + c0 * d[2]];
        let xi = [1.0 + c1 * d[3], 1.0 + c1 * d[4], 1.0 + c1 * d[5]];
        worst = worst.max((closed.a.view((0, 0), (6, 6)).into_owned() - chain_state_matrix(&k_, &xi)).amax());
    }
    let nominal = close_delta_loop(&plant, &gain, &prec, &Mat::zeros(6, 6)).unwrap();
    let exact = nominal.a.view((0, 0), (6, 6)).into_owned() == *smd_nominal(&[0.2; 3]).unwrap().a();
    outcome(worst <= FIDELITY_TOL && exact, format!("max deviation {worst:.1e} over 100 samples, Delta = 0 exact: {exact}"))
}

fn norm_or_inf(ss: &StateSpace) -> f64 {
    hinf_norm(ss, 1e-9, None).unwrap_or(f64::INFINITY)
}

fn monotone_structured(res: &DesignResult) -> Result<f64, String> {
    let model = smd_nominal(&[1.0; 3]).unwrap();
    let unc = smd_affine(0.01, 0.02, 0.03).unwrap();
    let base = build_structured_error_system(&model, &unc, &res.gain, &res.precision).map_err(|e| e.to_string())?;
    let doubled =
        build_structured_error_system(&model, &unc, &res.gain, &res.precision.scaled(2.0)).map_err(|e| e.to_string())?;
    let t = base.tiled.as_ref().unwrap();
    let mut worst = f64::NEG_INFINITY;
    for id in 0..MONOTONE_SAMPLES {
        let mut rng = sample_rng(77, id);
        let boundary = id % 2 == 0;
        let f1 = sample_contraction(t.m1.ncols(), t.n1.nrows(), &mut rng, boundary);
        let f2 = sample_contraction(t.m2.ncols(), t.n2.nrows(), &mut rng, boundary);
        let a = norm_or_inf(&base.perturbed(&f1, &f2).unwrap());
        let b = norm_or_inf(&doubled.perturbed(&f1, &f2).unwrap());
        worst = worst.max(b / a - 1.0);
    }
    Ok(worst)
}

fn monotone_lft(res: &DesignResult) -> f64 {
    let plant = smd_lft(0.1, 0.1, &[0.2; 3]).unwrap();
    let doubled = res.precision.scaled(2.0);
    let mut worst = f64::NEG_INFINITY;
    for id in 0..MONOTONE_SAMPLES {
        let delta = sample_diagonal(6, &mut sample_rng(78, id), id % 2 == 0);
        let a = norm_or_inf(&close_delta_loop(&plant, &res.gain, &res.precision, &delta).unwrap());
        let b = norm_or_inf(&close_delta_loop(&plant, &res.gain, &doubled, &delta).unwrap());
        worst = worst.max(b / a - 1.0);
    }
    worst
}

fn criterion7(r: &Runs) -> Outcome {
    let certified = |p: &SweepPoint| match &p.outcome {
        Ok((d, c)) if c.passed() => Some(d.clone()),
        _ => None,
    };
    let (Some(s), Some(l)) = (r.fig3.iter().find_map(certified), r.fig5.iter().rev().find_map(certified)) else {
        return outcome(false, "no certified design".into());
    };
    let ws = match monotone_structured(&s) {
        Ok(w) => w,
        Err(e) => return outcome(false, e),
    };
    let wl = monotone_lft(&l);
    // norms are computed to 1e-9 relative
    let ok = ws <= 1e-8 && wl <= 1e-8;
    outcome(ok, format!("max relative increase {ws:.1e} (structured), {wl:.1e} (LFT) over 20 samples each"))
}

fn criterion8(r: &Runs) -> Outcome {
    let g = counts(&r.fig5);
    let c = counts(&r.fig6);
    let want_g: Vec<Option<usize>> = LFT_GAMMA_COUNTS.iter().map(|&n| Some(n)).collect();
    let want_c: Vec<Option<usize>> = LFT_C0_COUNTS.iter().map(|&n| Some(n)).collect();
    let ok = g == want_g && c == want_c && nondecreasing(&g) && nondecreasing(&c);
    outcome(
        ok,
        format!(
            "gamma {LFT_GAMMA_GRID:?} -> {}, c0 {LFT_C0_GRID:?} at gamma {LFT_C0_GAMMA} -> {}",
            fmt_counts(&g),
            fmt_counts(&c)
        ),
    )
}

fn main() {
    let r = runs();
    let results = [
        ("1 gamma sweep endpoints", criterion1(&r)),
        ("2 uncertainty sweep endpoints", criterion2(&r)),
        ("3 robust certification", criterion3(&r)),
        ("4 norm oracle agreement", criterion4()),
        ("5 LMI residual soundness", criterion5(&r)),
        ("6 LFT fidelity", criterion6()),
        ("7 precision monotonicity", criterion7(&r)),
        ("8 LFT sweep regression", criterion8(&r)),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("criterion {name}: {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
