//! Serially connected three-mass spring-mass-damper benchmark.
//!
//! State `x = [x1, x2, x3, x1', x2', x3']` (positions measured from the
//! wall), unit masses, unit nominal springs and dampers, disturbance forces
//! on every mass, and six sensors: three positions then three velocities.
//! Spring/damper `j` connects mass `j-1` to mass `j` (the wall for `j = 1`).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::analysis::{certify_structured, verify_lft, Certification};
use crate::design::{design_lft, design_structured, DesignOptions, DesignResult};
use crate::error::{Error, Result};
use crate::linalg::{from_blocks, mat, vstack, Mat};
use crate::system_model::{AffineUncertainty, DeltaStructure, LftPlant, StateSpaceModel};

pub const N_MASSES: usize = 3;

/// Coupling matrix of the chain with unit springs (and unit dampers).
pub fn coupling() -> Mat {
    mat(3, 3, &[-2.0, 1.0, 0.0, 1.0, -2.0, 1.0, 0.0, 1.0, -1.0])
}

fn check_scaling(s_d: &[f64; 3]) -> Result<Mat> {
    if s_d.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidArgument(format!("disturbance scaling must be positive, got {s_d:?}")));
    }
    Ok(Mat::from_diagonal(&DVector::from_row_slice(s_d)))
}

fn check_magnitudes(cs: &[f64]) -> Result<()> {
    if cs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::InvalidArgument(format!("uncertainty magnitudes must be nonnegative, got {cs:?}")));
    }
    Ok(())
}

fn velocity_input() -> Mat {
    vstack(&[&Mat::zeros(3, 3), &Mat::identity(3, 3)])
}

/// Nominal plant `A = [0, I; H, H]`, `B_d = [0; I] S_d`, `C_y = I`, `D_d = 0`, `C_z = I`.
pub fn smd_nominal(s_d: &[f64; 3]) -> Result<StateSpaceModel> {
    let sd = check_scaling(s_d)?;
    let h = coupling();
    let eye = Mat::identity(3, 3);
    let a = from_blocks(&[3, 3], &[3, 3], &[&[None, Some(&eye)], &[Some(&h), Some(&h)]]);
    StateSpaceModel::new(a, velocity_input() * sd, Mat::identity(6, 6), Mat::zeros(6, 3), Mat::identity(6, 6))
}

/// Affine uncertainty `dA = [0; I] F1 blkdiag(c0 H, c1 H)`, `dB_d = [0; I] F2 (c2 I)`.
pub fn smd_affine(c0: f64, c1: f64, c2: f64) -> Result<AffineUncertainty> {
    check_magnitudes(&[c0, c1, c2])?;
    let h = coupling();
    let n1 = crate::linalg::blkdiag(&[&(&h * c0), &(&h * c1)]);
    AffineUncertainty::new(velocity_input(), n1, velocity_input(), Mat::identity(3, 3) * c2)
}

/// LFT form with spring constants `1 + c0 delta_j` and damper coefficients
/// `1 + c1 delta_{3+j}`, `|delta| <= 1`, pulled out as a diagonal `Delta`.
pub fn smd_lft(c0: f64, c1: f64, s_d: &[f64; 3]) -> Result<LftPlant> {
    check_magnitudes(&[c0, c1])?;
    let nominal = smd_nominal(s_d)?;
    // relative displacement r_j = x_j - x_{j-1}
    let mut rel = Mat::zeros(3, 3);
    for j in 0..N_MASSES {
        rel[(j, j)] = 1.0;
        if j > 0 {
            rel[(j, j - 1)] = -1.0;
        }
    }
    let c_delta = from_blocks(
        &[3, 3],
        &[3, 3],
        &[&[Some(&(&rel * c0)), None], &[None, Some(&(&rel * c1))]],
    );
    // element j pushes mass j by -w_j and mass j-1 by +w_j
    let force = -rel.transpose();
    let b_delta = from_blocks(&[3, 3], &[3, 3], &[&[None, None], &[Some(&force), Some(&force)]]);
    LftPlant {
        a: nominal.a().clone(),
        b_delta,
        b_d: nominal.b_d().clone(),
        c_delta,
        e_delta: Mat::zeros(6, 6),
        e_d: Mat::zeros(6, 3),
        c_y: nominal.c_y().clone(),
        d_delta: Mat::zeros(6, 6),
        d_d: nominal.d_d().clone(),
        c_z: nominal.c_z().clone(),
        delta_structure: DeltaStructure::Diagonal,
    }
    .validate()
}

/// Which synthesis route a benchmark run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkKind {
    /// Affine uncertainty with norm-bounded factors.
    Structured,
    /// Interval springs and dampers in LFT form.
    Lft,
}

/// Benchmark instance and verification settings shared by all sweep points.
#[derive(Debug, Clone, PartialEq)]
pub struct SmdConfig {
    pub kind: BenchmarkKind,
    pub s_d: [f64; 3],
    pub c0: f64,
    pub c1: f64,
    /// Ignored by the LFT form.
    pub c2: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Also run the robust bounded-real LMI on structured designs.
    pub lmi_check: bool,
}

impl SmdConfig {
    pub fn structured(c0: f64, c1: f64, c2: f64) -> Self {
        Self { kind: BenchmarkKind::Structured, s_d: [1.0; 3], c0, c1, c2, n_samples: 200, seed: 0, lmi_check: true }
    }

    pub fn lft(c0: f64, c1: f64) -> Self {
        Self { kind: BenchmarkKind::Lft, s_d: [0.2; 3], c0, c1, c2: 0.0, n_samples: 200, seed: 0, lmi_check: false }
    }
}

/// Default performance grid for structured sweeps.
pub const GAMMA_GRID: [f64; 4] = [1.0, 0.75, 0.5, 0.25];
/// Default uncertainty grid for structured sweeps.
pub const C0_GRID: [f64; 4] = [0.0, 0.1, 0.2, 0.3];
/// LFT performance grid.
pub const LFT_GAMMA_GRID: [f64; 4] = [1.0, 0.5, 0.3, 0.2];
/// LFT uncertainty grid. Spring uncertainty of 0.3 already violates the
/// small-gain condition of the uncertainty channel.
pub const LFT_C0_GRID: [f64; 3] = [0.0, 0.1, 0.2];

/// Design and certify one benchmark instance at level `gamma`.
pub fn design_and_certify(cfg: &SmdConfig, gamma: f64, opts: &DesignOptions) -> Result<(DesignResult, Certification)> {
    match cfg.kind {
        BenchmarkKind::Structured => {
            let model = smd_nominal(&cfg.s_d)?;
            let unc = smd_affine(cfg.c0, cfg.c1, cfg.c2)?;
            let result = design_structured(&model, &unc, gamma, opts)?;
            let lmi = cfg.lmi_check.then_some((&opts.lmi, &opts.solver));
            let cert = certify_structured(&model, &unc, &result, gamma, cfg.n_samples, cfg.seed, lmi)?;
            Ok((result, cert))
        }
        BenchmarkKind::Lft => {
            let plant = smd_lft(cfg.c0, cfg.c1, &cfg.s_d)?;
            let result = design_lft(&plant, gamma, opts)?;
            let cert = verify_lft(&plant, &result, gamma, cfg.n_samples, cfg.seed)?;
            Ok((result, Certification::Lft(cert)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Gamma,
    C0,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gamma => "gamma",
            Self::C0 => "c0",
        }
    }
}

#[derive(Debug)]
pub struct SweepPoint {
    pub param: SweepParam,
    pub value: f64,
    pub gamma: f64,
    pub c0: f64,
    /// Infeasibility and solver failures are recorded, not propagated.
    pub outcome: Result<(DesignResult, Certification)>,
}

impl SweepPoint {
    pub fn active_count(&self) -> Option<usize> {
        self.outcome.as_ref().ok().map(|(r, _)| r.active_count)
    }
}

fn sweep(cfg: &SmdConfig, opts: &DesignOptions, param: SweepParam, points: &[(f64, f64)]) -> Vec<SweepPoint> {
    points
        .iter()
        .enumerate()
        .map(|(k, &(gamma, c0))| {
            let point = SmdConfig { c0, seed: cfg.seed.wrapping_add(k as u64), ..cfg.clone() };
            let value = match param {
                SweepParam::Gamma => gamma,
                SweepParam::C0 => c0,
            };
            SweepPoint { param, value, gamma, c0, outcome: design_and_certify(&point, gamma, opts) }
        })
        .collect()
}

/// One design per performance level, uncertainty fixed by `cfg`.
pub fn sweep_gamma(cfg: &SmdConfig, opts: &DesignOptions, gammas: &[f64]) -> Vec<SweepPoint> {
    let points: Vec<(f64, f64)> = gammas.iter().map(|&g| (g, cfg.c0)).collect();
    sweep(cfg, opts, SweepParam::Gamma, &points)
}

/// One design per spring-uncertainty magnitude at a fixed level.
pub fn sweep_uncertainty(cfg: &SmdConfig, opts: &DesignOptions, gamma: f64, c0s: &[f64]) -> Vec<SweepPoint> {
    let points: Vec<(f64, f64)> = c0s.iter().map(|&c| (gamma, c)).collect();
    sweep(cfg, opts, SweepParam::C0, &points)
}
