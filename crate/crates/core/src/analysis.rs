//! Certification of designed observers: H-infinity norms, sampling of
//! admissible uncertainty, and Monte-Carlo checks of the closed loop.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Serialize, Serializer};

use crate::design::DesignResult;
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, sigma_max, spectral_abscissa, Mat};
use crate::lmi::{assemble_robust_bounded_real, LmiOptions};
use crate::sdp::{compile, solve, Objective, SolveStatus, SolverSettings};
use crate::system_model::{
    build_structured_error_system, close_delta_loop, AffineUncertainty, DeltaStructure, LftPlant, StateSpace,
    StateSpaceModel,
};

/// Stability threshold on the spectral abscissa.
pub const HURWITZ_MARGIN: f64 = -1e-10;

/// Relative slack on `gamma` accepted by the sampled certification.
pub const CERT_TOL: f64 = 1e-4;

/// Default relative accuracy of [`hinf_norm`].
pub const HINF_TOL: f64 = 1e-6;

/// `true` iff every eigenvalue of `a` has real part below `-1e-10`.
pub fn is_hurwitz(a: &Mat) -> bool {
    a.is_square() && spectral_abscissa(a).map(|s| s < HURWITZ_MARGIN).unwrap_or(false)
}

/// Largest singular value of `C (j w I - A)^-1 B + D`.
pub fn sigma_at(ss: &StateSpace, w: f64) -> Result<f64> {
    let n = ss.n_states();
    if n == 0 {
        return Ok(sigma_max(&ss.d));
    }
    let cplx = |m: &Mat| m.map(|x| Complex::new(x, 0.0));
    let mut m: DMatrix<Complex<f64>> = -cplx(&ss.a);
    for i in 0..n {
        m[(i, i)] += Complex::new(0.0, w);
    }
    let x = m.lu().solve(&cplx(&ss.b)).ok_or_else(|| Error::Bisection(format!("j{w} is a pole")))?;
    let g = cplx(&ss.c) * x + cplx(&ss.d);
    Ok(g.singular_values().iter().copied().fold(0.0, f64::max))
}

/// Frequencies `w >= 0` such that `j w` is an eigenvalue of the Hamiltonian
/// at level `gamma`, sorted, together with their negatives.
fn crossings(ss: &StateSpace, gamma: f64) -> Result<Vec<f64>> {
    let (n, m, p) = (ss.n_states(), ss.n_inputs(), ss.n_outputs());
    let (a, b, c, d) = (&ss.a, &ss.b, &ss.c, &ss.d);
    let r = Mat::identity(m, m) * (gamma * gamma) - d.transpose() * d;
    let r_inv = r.try_inverse().ok_or_else(|| Error::Bisection(format!("gamma = {gamma} equals sigma(D)")))?;
    let ae = a + b * &r_inv * d.transpose() * c;
    let h12 = b * &r_inv * b.transpose();
    let h21 = -(c.transpose() * (Mat::identity(p, p) + d * &r_inv * d.transpose()) * c);
    let h = crate::linalg::from_blocks(
        &[n, n],
        &[n, n],
        &[&[Some(&ae), Some(&h12)], &[Some(&h21), Some(&(-ae.transpose()))]],
    );
    // Rounding moves imaginary-axis eigenvalues by about eps * |H|, so the
    // screen is loose and each candidate is confirmed on the frequency response.
    let scale = crate::linalg::max_abs(&h);
    let mut out = Vec::new();
    for l in eigenvalues(&h)? {
        if l.re.abs() < 1e-6 * (l.norm() + scale) && (sigma_at(ss, l.im.abs())? / gamma - 1.0).abs() < 1e-4 {
            out.push(l.im);
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Golden-section maximization of `sigma_at` in `log w` near `w0`.
fn local_peak(ss: &StateSpace, w0: f64) -> Result<f64> {
    let f = |x: f64| sigma_at(ss, x.exp());
    let center = w0.max(1e-12).ln();
    let (mut a, mut b) = (center - 0.1, center + 0.1);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - r * (b - a), a + r * (b - a));
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    let mut best = f(center)?.max(f1).max(f2);
    for _ in 0..60 {
        if f1 > f2 {
            b = x2;
            (x2, f2) = (x1, f1);
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            (x1, f1) = (x2, f2);
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        }
        best = best.max(f1).max(f2);
    }
    Ok(best)
}

/// H-infinity norm of a stable realization to relative accuracy `tol`.
///
/// Level-set iteration: `lb` is raised to the peak of `sigma_max(G(jw))`
/// over the midpoints of the frequency intervals on which it exceeds the
/// current level, until the level `lb (1 + tol)` has no imaginary-axis
/// Hamiltonian eigenvalues. The returned value is that lower bound.
/// With `gamma_max`, an error is returned as soon as the norm is known to exceed it.
pub fn hinf_norm(ss: &StateSpace, tol: f64, gamma_max: Option<f64>) -> Result<f64> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if !is_hurwitz(&ss.a) {
        return Err(Error::NotHurwitz(spectral_abscissa(&ss.a).unwrap_or(f64::NAN)));
    }
    let sd = sigma_max(&ss.d);
    if ss.n_states() == 0 || ss.b.amax() == 0.0 || ss.c.amax() == 0.0 {
        return Ok(sd);
    }
    let mut lb = sd.max(sigma_at(ss, 0.0)?);
    for l in eigenvalues(&ss.a)? {
        lb = lb.max(sigma_at(ss, l.norm())?);
    }
    if lb == 0.0 {
        // a strictly proper, nonzero G cannot vanish at all these points
        lb = f64::MIN_POSITIVE;
    }
    for _ in 0..100 {
        if let Some(g) = gamma_max {
            if lb > g {
                return Err(Error::Bisection(format!("norm exceeds {g} (lower bound {lb})")));
            }
        }
        let level = lb * (1.0 + tol);
        let w = crossings(ss, level)?;
        if w.is_empty() {
            return Ok(lb);
        }
        let mut next = lb;
        for pair in w.windows(2) {
            next = next.max(sigma_at(ss, 0.5 * (pair[0] + pair[1]).abs())?);
        }
        if next <= lb {
            // Near a flat peak the Hamiltonian test is ambiguous at this
            // level; search the response around each candidate instead.
            for &wi in w.iter().filter(|&&wi| wi >= 0.0) {
                next = next.max(local_peak(ss, wi)?);
            }
            if next <= level {
                return Ok(lb.max(next));
            }
        }
        lb = next;
    }
    Err(Error::Bisection("level-set iteration did not converge".into()))
}

/// Random `F` with `sigma_max(F) <= 1`: a Gaussian direction scaled to a
/// spectral norm drawn uniformly from `[0, 1]`, or exactly 1 for boundary samples.
pub fn sample_contraction<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R, boundary: bool) -> Mat {
    let g = Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = sigma_max(&g);
    if s == 0.0 {
        return g;
    }
    let radius = if boundary { 1.0 } else { rng.random::<f64>() };
    let f = g * (radius / s);
    if boundary {
        // guard against the last ulp of rounding
        let s = sigma_max(&f);
        if s > 1.0 {
            return f / s;
        }
    }
    f
}

/// Random diagonal `Delta` with entries in `[-1, 1]`; boundary samples use
/// `+-1` on every entry.
pub fn sample_diagonal<R: Rng + ?Sized>(n: usize, rng: &mut R, boundary: bool) -> Mat {
    let entries: Vec<f64> = (0..n)
        .map(|_| {
            if boundary {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            } else {
                rng.random_range(-1.0..=1.0)
            }
        })
        .collect();
    Mat::from_diagonal(&nalgebra::DVector::from_vec(entries))
}

/// Independent generator for one sample.
pub fn sample_rng(seed: u64, sample_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_id);
    rng
}

/// Sample 0 is the nominal plant; odd samples are interior, even nonzero
/// samples lie on the boundary.
fn is_boundary(sample_id: usize) -> bool {
    sample_id > 0 && sample_id % 2 == 0
}

fn finite_or_null<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub sample_id: usize,
    /// `null` in JSON when the sampled loop is unstable or ill-posed.
    #[serde(serialize_with = "finite_or_null")]
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub gamma: f64,
    pub n_samples: usize,
    #[serde(serialize_with = "finite_or_null")]
    pub worst_norm: f64,
    pub worst_sample_id: usize,
    pub violations: Vec<Violation>,
    #[serde(serialize_with = "finite_or_null")]
    pub nominal_norm: f64,
    pub passed: bool,
}

impl CertificationReport {
    /// Fold per-sample norms: the nominal plant first, then the random
    /// samples (infinite for unstable or ill-posed loops).
    pub fn from_norms(gamma: f64, norms: &[f64]) -> Self {
        let bound = gamma * (1.0 + CERT_TOL);
        let mut worst_norm = f64::NEG_INFINITY;
        let mut worst_sample_id = 0;
        let mut violations = Vec::new();
        for (id, &norm) in norms.iter().enumerate() {
            let norm = if norm.is_nan() { f64::INFINITY } else { norm };
            if norm > worst_norm {
                worst_norm = norm;
                worst_sample_id = id;
            }
            if norm > bound {
                violations.push(Violation { sample_id: id, norm });
            }
        }
        Self {
            gamma,
            n_samples: norms.len().saturating_sub(1),
            worst_norm,
            worst_sample_id,
            passed: violations.is_empty() && worst_norm <= bound,
            violations,
            nominal_norm: norms.first().copied().unwrap_or(f64::NAN),
        }
    }
}

fn norm_or_inf(ss: Result<StateSpace>) -> Result<f64> {
    let ss = match ss {
        Ok(ss) => ss,
        Err(Error::IllPosed { .. }) => return Ok(f64::INFINITY),
        Err(e) => return Err(e),
    };
    match hinf_norm(&ss, HINF_TOL, None) {
        Ok(g) => Ok(g),
        Err(Error::NotHurwitz(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Sampled robust-performance check of a design for an affine-uncertainty
/// plant: the nominal plant plus `n_samples` admissible perturbations.
pub fn verify_structured(
    model: &StateSpaceModel,
    unc: &AffineUncertainty,
    result: &DesignResult,
    gamma: f64,
    n_samples: usize,
    seed: u64,
) -> Result<CertificationReport> {
    let err = build_structured_error_system(model, unc, &result.gain, &result.precision)?;
    let ((r1, c1), (r2, c2)) = (unc.f1_shape(), unc.f2_shape());
    let mut norms = Vec::with_capacity(n_samples + 1);
    for id in 0..=n_samples {
        let (f1, f2) = if id == 0 {
            (Mat::zeros(r1, c1), Mat::zeros(r2, c2))
        } else {
            let mut rng = sample_rng(seed, id as u64);
            let b = is_boundary(id);
            (sample_contraction(r1, c1, &mut rng, b), sample_contraction(r2, c2, &mut rng, b))
        };
        norms.push(norm_or_inf(err.perturbed(&f1, &f2))?);
    }
    Ok(CertificationReport::from_norms(gamma, &norms))
}

/// Sampled check of an LFT design for both readings of the uncertainty block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LftCertification {
    /// Norm of the open-loop map `(w, d) -> z_delta`; must not exceed 1.
    #[serde(serialize_with = "finite_or_null")]
    pub uncertainty_channel_norm: f64,
    pub diagonal: CertificationReport,
    pub full_block: CertificationReport,
    pub passed: bool,
}

fn lft_samples(
    plant: &LftPlant,
    result: &DesignResult,
    gamma: f64,
    n_samples: usize,
    seed: u64,
    structure: DeltaStructure,
) -> Result<CertificationReport> {
    let (nw, nz) = (plant.n_w(), plant.n_z_delta());
    let mut norms = Vec::with_capacity(n_samples + 1);
    for id in 0..=n_samples {
        let delta = if id == 0 {
            Mat::zeros(nw, nz)
        } else {
            let mut rng = sample_rng(seed, id as u64);
            match structure {
                DeltaStructure::Diagonal if nw == nz => sample_diagonal(nw, &mut rng, is_boundary(id)),
                DeltaStructure::Diagonal => {
                    return Err(Error::Dimension(format!("diagonal Delta needs a square block, got {nw}x{nz}")))
                }
                DeltaStructure::FullBlock => sample_contraction(nw, nz, &mut rng, is_boundary(id)),
            }
        };
        norms.push(norm_or_inf(close_delta_loop(plant, &result.gain, &result.precision, &delta))?);
    }
    Ok(CertificationReport::from_norms(gamma, &norms))
}

/// Sampled robust-performance check of a design for an LFT plant. The
/// diagonal reading applies only when the block is square.
pub fn verify_lft(
    plant: &LftPlant,
    result: &DesignResult,
    gamma: f64,
    n_samples: usize,
    seed: u64,
) -> Result<LftCertification> {
    let channel = norm_or_inf(Ok(plant.uncertainty_channel()))?;
    let full_block = lft_samples(plant, result, gamma, n_samples, seed, DeltaStructure::FullBlock)?;
    let diagonal = if plant.n_w() == plant.n_z_delta() {
        lft_samples(plant, result, gamma, n_samples, seed, DeltaStructure::Diagonal)?
    } else {
        full_block.clone()
    };
    let passed = channel <= 1.0 + CERT_TOL && diagonal.passed && full_block.passed;
    Ok(LftCertification { uncertainty_channel_norm: channel, diagonal, full_block, passed })
}

/// Feasibility of the robust bounded-real LMI for the designed error
/// system at level `gamma`: a deterministic certificate for all admissible
/// affine perturbations.
pub fn robust_certificate(
    model: &StateSpaceModel,
    unc: &AffineUncertainty,
    result: &DesignResult,
    gamma: f64,
    opts: &LmiOptions,
    settings: &SolverSettings,
) -> Result<bool> {
    let err = build_structured_error_system(model, unc, &result.gain, &result.precision)?;
    let asm = assemble_robust_bounded_real(&err, gamma, opts)?;
    let prog = compile(&asm.space, &Objective::Feasibility, &asm.lmis)?;
    match solve(&prog, settings).status {
        SolveStatus::Optimal => Ok(true),
        SolveStatus::Infeasible => Ok(false),
        s => Err(Error::Solver(format!("robust bounded-real check ended with status {s:?}"))),
    }
}

/// Certification outcome of one design, as emitted by the CLI and sweeps.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Certification {
    Structured {
        sampled: CertificationReport,
        /// Robust bounded-real LMI at the design level; `None` if not run.
        lmi_certificate: Option<bool>,
    },
    Lft(LftCertification),
}

impl Certification {
    pub fn passed(&self) -> bool {
        match self {
            Self::Structured { sampled, lmi_certificate } => sampled.passed && *lmi_certificate != Some(false),
            Self::Lft(c) => c.passed,
        }
    }

    pub fn worst_norm(&self) -> f64 {
        match self {
            Self::Structured { sampled, .. } => sampled.worst_norm,
            Self::Lft(c) => c.diagonal.worst_norm.max(c.full_block.worst_norm),
        }
    }

    pub fn nominal_norm(&self) -> f64 {
        match self {
            Self::Structured { sampled, .. } => sampled.nominal_norm,
            Self::Lft(c) => c.full_block.nominal_norm,
        }
    }
}

/// Sampled check plus, when `lmi_check` is set, the robust bounded-real LMI.
pub fn certify_structured(
    model: &StateSpaceModel,
    unc: &AffineUncertainty,
    result: &DesignResult,
    gamma: f64,
    n_samples: usize,
    seed: u64,
    lmi_check: Option<(&LmiOptions, &SolverSettings)>,
) -> Result<Certification> {
    let sampled = verify_structured(model, unc, result, gamma, n_samples, seed)?;
    let lmi_certificate = match lmi_check {
        Some((opts, settings)) => Some(robust_certificate(model, unc, result, gamma, opts, settings)?),
        None => None,
    };
    Ok(Certification::Structured { sampled, lmi_certificate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat;

    fn ss(a: Mat, b: Mat, c: Mat, d: Mat) -> StateSpace {
        StateSpace::new(a, b, c, d).unwrap()
    }

    #[test]
    fn hurwitz_examples() {
        assert!(is_hurwitz(&(-Mat::identity(3, 3))));
        assert!(!is_hurwitz(&mat(2, 2, &[0.0, 1.0, -1.0, 0.0])));
        assert!(!is_hurwitz(&Mat::zeros(1, 1)));
    }

    #[test]
    fn first_order_lag_has_unit_norm() {
        let g = ss(mat(1, 1, &[-1.0]), mat(1, 1, &[1.0]), mat(1, 1, &[1.0]), Mat::zeros(1, 1));
        let n = hinf_norm(&g, HINF_TOL, None).unwrap();
        assert!((n - 1.0).abs() <= 1e-6, "{n}");
    }

    #[test]
    fn constant_transfer_is_exact() {
        let g = ss(mat(1, 1, &[-1.0]), Mat::zeros(1, 1), mat(1, 1, &[1.0]), mat(1, 1, &[2.0]));
        assert_eq!(hinf_norm(&g, HINF_TOL, None).unwrap(), 2.0);
    }

    #[test]
    fn unstable_is_rejected() {
        let g = ss(mat(1, 1, &[1.0]), mat(1, 1, &[1.0]), mat(1, 1, &[1.0]), Mat::zeros(1, 1));
        assert!(matches!(hinf_norm(&g, HINF_TOL, None), Err(Error::NotHurwitz(_))));
    }

    #[test]
    fn gamma_max_stops_early() {
        let g = ss(mat(1, 1, &[-1.0]), mat(1, 1, &[3.0]), mat(1, 1, &[1.0]), Mat::zeros(1, 1));
        assert!(matches!(hinf_norm(&g, HINF_TOL, Some(2.0)), Err(Error::Bisection(_))));
    }

    #[test]
    fn report_folds_norms() {
        let r = CertificationReport::from_norms(1.0, &[0.5, 0.9, 1.00005, f64::INFINITY]);
        assert_eq!(r.n_samples, 3);
        assert_eq!(r.nominal_norm, 0.5);
        assert_eq!(r.worst_sample_id, 3);
        assert_eq!(r.violations, vec![Violation { sample_id: 3, norm: f64::INFINITY }]);
        assert!(!r.passed);
        let r = CertificationReport::from_norms(1.0, &[0.5, 1.00005]);
        assert!(r.passed);
        let json = serde_json::to_string(&CertificationReport::from_norms(1.0, &[f64::INFINITY])).unwrap();
        assert!(json.contains("\"worst_norm\":null"));
    }

    #[test]
    fn boundary_schedule() {
        assert!(!is_boundary(0));
        assert!(!is_boundary(1));
        assert!(is_boundary(2));
        let b = (1..201).filter(|&i| is_boundary(i)).count();
        assert_eq!(b, 100);
    }
}
