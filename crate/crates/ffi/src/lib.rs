//! C ABI for the sparse-hinf toolkit.
//!
//! Plants and designs live behind opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`ShStatus`]; on failure, [`sh_last_error`] describes the problem until
//! the next call on the same thread. Matrices cross the boundary as
//! row-major `double` arrays with explicit dimensions.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sparse_hinf::analysis::{hinf_norm, verify_lft, verify_structured, CertificationReport};
use sparse_hinf::design::{design_lft, design_structured, DesignOptions, DesignResult};
use sparse_hinf::linalg::Mat;
use sparse_hinf::smd::{smd_affine, smd_lft, smd_nominal};
use sparse_hinf::system_model::{AffineUncertainty, DeltaStructure, LftPlant, StateSpace, StateSpaceModel};
use sparse_hinf::Error;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Infeasible = 4,
    Solver = 5,
    NotHurwitz = 6,
    IllPosed = 7,
    BufferTooSmall = 8,
    Panic = 9,
    Other = 10,
}

/// Uncertainty structure of an LFT plant.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShDeltaStructure {
    FullBlock = 0,
    Diagonal = 1,
}

/// Plant with affine, norm-bounded uncertainty.
pub struct ShStructured {
    model: StateSpaceModel,
    unc: AffineUncertainty,
}

/// Plant with uncertainty in a feedback block.
pub struct ShLft {
    plant: LftPlant,
}

/// Designed observer.
pub struct ShDesign {
    result: DesignResult,
}

/// Tuning of the design loop; obtain defaults from [`sh_design_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShDesignOptions {
    pub epsilon_reweight: f64,
    pub max_reweight_iters: usize,
    pub convergence_tol: f64,
    pub prune_rel: f64,
    pub prune_abs: f64,
    pub centering_slack: f64,
    pub beta_min: f64,
    pub delta_min: f64,
    pub margin_scale: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl From<&DesignOptions> for ShDesignOptions {
    fn from(o: &DesignOptions) -> Self {
        Self {
            epsilon_reweight: o.epsilon_reweight,
            max_reweight_iters: o.max_reweight_iters,
            convergence_tol: o.convergence_tol,
            prune_rel: o.prune_rel,
            prune_abs: o.prune_abs,
            centering_slack: o.centering_slack,
            beta_min: o.lmi.beta_min,
            delta_min: o.lmi.delta_min,
            margin_scale: o.lmi.margin_scale,
            abs_tol: o.solver.abs_tol,
            rel_tol: o.solver.rel_tol,
            max_iter: o.solver.max_iter,
        }
    }
}

impl From<&ShDesignOptions> for DesignOptions {
    fn from(c: &ShDesignOptions) -> Self {
        let mut o = DesignOptions::default();
        o.epsilon_reweight = c.epsilon_reweight;
        o.max_reweight_iters = c.max_reweight_iters;
        o.convergence_tol = c.convergence_tol;
        o.prune_rel = c.prune_rel;
        o.prune_abs = c.prune_abs;
        o.centering_slack = c.centering_slack;
        o.lmi.beta_min = c.beta_min;
        o.lmi.delta_min = c.delta_min;
        o.lmi.margin_scale = c.margin_scale;
        o.solver.abs_tol = c.abs_tol;
        o.solver.rel_tol = c.rel_tol;
        o.solver.max_iter = c.max_iter;
        o
    }
}

/// Summary of a sampled certification. Norms of unstable samples are `+inf`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShReport {
    pub gamma: f64,
    pub n_samples: usize,
    pub worst_norm: f64,
    pub worst_sample_id: usize,
    pub n_violations: usize,
    pub nominal_norm: f64,
    pub passed: bool,
}

impl From<&CertificationReport> for ShReport {
    fn from(r: &CertificationReport) -> Self {
        Self {
            gamma: r.gamma,
            n_samples: r.n_samples,
            worst_norm: r.worst_norm,
            worst_sample_id: r.worst_sample_id,
            n_violations: r.violations.len(),
            nominal_norm: r.nominal_norm,
            passed: r.passed,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> ShStatus {
    match err {
        Error::Dimension(_) => ShStatus::Dimension,
        Error::InvalidArgument(_) | Error::NonFinite(_) | Error::Config(_) => ShStatus::InvalidArgument,
        Error::Infeasible { .. } => ShStatus::Infeasible,
        Error::Solver(_) | Error::Bisection(_) | Error::EigenFailure | Error::NotPositiveDefinite(_) => ShStatus::Solver,
        Error::NotHurwitz(_) => ShStatus::NotHurwitz,
        Error::IllPosed { .. } => ShStatus::IllPosed,
        _ => ShStatus::Other,
    }
}

/// Failure inside the boundary layer.
struct Fail(ShStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(ShStatus::NullPointer, format!("{what} is null"))
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ShStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ShStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ShStatus::Panic
        }
    }
}

/// Copy a row-major `rows x cols` array.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles (or be anything when empty).
unsafe fn read_mat(data: *const f64, rows: usize, cols: usize, what: &str) -> Result<Mat, Fail> {
    let len = rows.checked_mul(cols).ok_or_else(|| Fail(ShStatus::InvalidArgument, format!("{what} too large")))?;
    if len == 0 {
        return Ok(Mat::zeros(rows, cols));
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(Mat::from_row_slice(rows, cols, std::slice::from_raw_parts(data, len)))
}

/// Write `values` to a caller buffer of `len` entries.
///
/// # Safety
/// `out` must point to `len` writable elements.
unsafe fn write_out<T: Copy>(values: &[T], out: *mut T, len: usize, what: &str) -> Result<(), Fail> {
    if values.len() > len {
        return Err(Fail(
            ShStatus::BufferTooSmall,
            format!("{what} needs {} entries, buffer has {len}", values.len()),
        ));
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null(what));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

fn store<T>(out: *mut *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    // SAFETY: checked non-null; the caller provides a writable slot.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// # Safety
/// `p` must be null or a live handle produced by this library.
unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message describing the last failure on this thread (empty after success).
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn sh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library defaults for the design loop.
#[no_mangle]
pub extern "C" fn sh_design_options_default() -> ShDesignOptions {
    ShDesignOptions::from(&DesignOptions::default())
}

/// Plant `x' = A x + B_d d`, `y = C_y x + D_d d + n`, `z = C_z x` with
/// `dA = M1 F1 N1`, `dB_d = M2 F2 N2`. `M1` is `n x p1`, `N1` is `q1 x n`,
/// `M2` is `n x p2`, `N2` is `q2 x n_d`; zero-sized factors are allowed.
///
/// # Safety
/// Every matrix pointer must reference an array of the stated size.
#[no_mangle]
pub unsafe extern "C" fn sh_structured_new(
    n: usize,
    n_d: usize,
    n_y: usize,
    n_z: usize,
    a: *const f64,
    b_d: *const f64,
    c_y: *const f64,
    d_d: *const f64,
    c_z: *const f64,
    p1: usize,
    q1: usize,
    m1: *const f64,
    n1: *const f64,
    p2: usize,
    q2: usize,
    m2: *const f64,
    n2: *const f64,
    out: *mut *mut ShStructured,
) -> ShStatus {
    guard(|| {
        let model = StateSpaceModel::new(
            read_mat(a, n, n, "A")?,
            read_mat(b_d, n, n_d, "B_d")?,
            read_mat(c_y, n_y, n, "C_y")?,
            read_mat(d_d, n_y, n_d, "D_d")?,
            read_mat(c_z, n_z, n, "C_z")?,
        )?;
        let unc = AffineUncertainty::new(
            read_mat(m1, n, p1, "M1")?,
            read_mat(n1, q1, n, "N1")?,
            read_mat(m2, n, p2, "M2")?,
            read_mat(n2, q2, n_d, "N2")?,
        )?;
        unc.check_against(&model)?;
        store(out, ShStructured { model, unc }, "out")
    })
}

/// Three-mass spring-mass-damper benchmark with affine uncertainty.
///
/// # Safety
/// `s_d` must point to 3 doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sh_smd_structured_new(
    s_d: *const f64,
    c0: f64,
    c1: f64,
    c2: f64,
    out: *mut *mut ShStructured,
) -> ShStatus {
    guard(|| {
        let s = read_mat(s_d, 1, 3, "s_d")?;
        let model = smd_nominal(&[s[0], s[1], s[2]])?;
        let unc = smd_affine(c0, c1, c2)?;
        store(out, ShStructured { model, unc }, "out")
    })
}

/// # Safety
/// `p` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sh_structured_free(p: *mut ShStructured) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// LFT plant
/// `x' = A x + B_delta w + B_d d`, `z_delta = C_delta x + E_delta w + E_d d`,
/// `y = C_y x + D_delta w + D_d d + n`, `z = C_z x`, closed by `w = Delta z_delta`.
/// `Delta` is `n_w x n_zd`.
///
/// # Safety
/// Every matrix pointer must reference an array of the stated size.
#[no_mangle]
pub unsafe extern "C" fn sh_lft_new(
    n: usize,
    n_w: usize,
    n_d: usize,
    n_zd: usize,
    n_y: usize,
    n_z: usize,
    a: *const f64,
    b_delta: *const f64,
    b_d: *const f64,
    c_delta: *const f64,
    e_delta: *const f64,
    e_d: *const f64,
    c_y: *const f64,
    d_delta: *const f64,
    d_d: *const f64,
    c_z: *const f64,
    structure: ShDeltaStructure,
    out: *mut *mut ShLft,
) -> ShStatus {
    guard(|| {
        let plant = LftPlant {
            a: read_mat(a, n, n, "A")?,
            b_delta: read_mat(b_delta, n, n_w, "B_delta")?,
            b_d: read_mat(b_d, n, n_d, "B_d")?,
            c_delta: read_mat(c_delta, n_zd, n, "C_delta")?,
            e_delta: read_mat(e_delta, n_zd, n_w, "E_delta")?,
            e_d: read_mat(e_d, n_zd, n_d, "E_d")?,
            c_y: read_mat(c_y, n_y, n, "C_y")?,
            d_delta: read_mat(d_delta, n_y, n_w, "D_delta")?,
            d_d: read_mat(d_d, n_y, n_d, "D_d")?,
            c_z: read_mat(c_z, n_z, n, "C_z")?,
            delta_structure: match structure {
                ShDeltaStructure::FullBlock => DeltaStructure::FullBlock,
                ShDeltaStructure::Diagonal => DeltaStructure::Diagonal,
            },
        }
        .validate()?;
        store(out, ShLft { plant }, "out")
    })
}

/// Spring-mass-damper benchmark with interval springs and dampers.
///
/// # Safety
/// `s_d` must point to 3 doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sh_smd_lft_new(s_d: *const f64, c0: f64, c1: f64, out: *mut *mut ShLft) -> ShStatus {
    guard(|| {
        let s = read_mat(s_d, 1, 3, "s_d")?;
        store(out, ShLft { plant: smd_lft(c0, c1, &[s[0], s[1], s[2]])? }, "out")
    })
}

/// # Safety
/// `p` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sh_lft_free(p: *mut ShLft) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Sparse observer design at level `gamma`; `opts` may be null for defaults.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sh_design_structured(
    plant: *const ShStructured,
    gamma: f64,
    opts: *const ShDesignOptions,
    out: *mut *mut ShDesign,
) -> ShStatus {
    guard(|| {
        let p = borrow(plant, "plant")?;
        let o = opts.as_ref().map(DesignOptions::from).unwrap_or_default();
        let result = design_structured(&p.model, &p.unc, gamma, &o)?;
        store(out, ShDesign { result }, "out")
    })
}

/// Sparse observer design for an LFT plant; `opts` may be null for defaults.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sh_design_lft(
    plant: *const ShLft,
    gamma: f64,
    opts: *const ShDesignOptions,
    out: *mut *mut ShDesign,
) -> ShStatus {
    guard(|| {
        let p = borrow(plant, "plant")?;
        let o = opts.as_ref().map(DesignOptions::from).unwrap_or_default();
        let result = design_lft(&p.plant, gamma, &o)?;
        store(out, ShDesign { result }, "out")
    })
}

/// # Safety
/// `p` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sh_design_free(p: *mut ShDesign) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of estimator states (rows of the gain); 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sh_design_n_states(d: *const ShDesign) -> usize {
    d.as_ref().map_or(0, |d| d.result.gain.matrix().nrows())
}

/// Number of candidate sensors; 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sh_design_n_sensors(d: *const ShDesign) -> usize {
    d.as_ref().map_or(0, |d| d.result.precision.len())
}

/// Number of selected sensors; 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sh_design_active_count(d: *const ShDesign) -> usize {
    d.as_ref().map_or(0, |d| d.result.active_count)
}

/// Precision per sensor (0 for unselected sensors).
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sh_design_beta(d: *const ShDesign, out: *mut f64, len: usize) -> ShStatus {
    guard(|| write_out(borrow(d, "design")?.result.precision.beta(), out, len, "beta"))
}

/// Selection mask per sensor (1 selected, 0 not).
///
/// # Safety
/// `out` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sh_design_active(d: *const ShDesign, out: *mut u8, len: usize) -> ShStatus {
    guard(|| {
        let mask: Vec<u8> = borrow(d, "design")?.result.precision.active().iter().map(|&a| u8::from(a)).collect();
        write_out(&mask, out, len, "active")
    })
}

/// Observer gain, row-major, states x sensors.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sh_design_gain(d: *const ShDesign, out: *mut f64, len: usize) -> ShStatus {
    guard(|| {
        let l = borrow(d, "design")?.result.gain.matrix();
        let row_major: Vec<f64> = l.transpose().iter().copied().collect();
        write_out(&row_major, out, len, "gain")
    })
}

/// Sampled certification: the nominal plant plus `n_samples` admissible
/// perturbations drawn from `seed`.
///
/// # Safety
/// Handles must be live; `report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sh_verify_structured(
    plant: *const ShStructured,
    design: *const ShDesign,
    gamma: f64,
    n_samples: usize,
    seed: u64,
    report: *mut ShReport,
) -> ShStatus {
    guard(|| {
        let p = borrow(plant, "plant")?;
        let d = borrow(design, "design")?;
        let r = verify_structured(&p.model, &p.unc, &d.result, gamma, n_samples, seed)?;
        let out = report.as_mut().ok_or_else(|| null("report"))?;
        *out = ShReport::from(&r);
        Ok(())
    })
}

/// Sampled certification of an LFT design under diagonal and full-block
/// uncertainty, plus the norm of the open-loop uncertainty channel. Any of
/// the output pointers may be null.
///
/// # Safety
/// Handles must be live; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sh_verify_lft(
    plant: *const ShLft,
    design: *const ShDesign,
    gamma: f64,
    n_samples: usize,
    seed: u64,
    diagonal: *mut ShReport,
    full_block: *mut ShReport,
    channel_norm: *mut f64,
    passed: *mut bool,
) -> ShStatus {
    guard(|| {
        let p = borrow(plant, "plant")?;
        let d = borrow(design, "design")?;
        let c = verify_lft(&p.plant, &d.result, gamma, n_samples, seed)?;
        if let Some(o) = diagonal.as_mut() {
            *o = ShReport::from(&c.diagonal);
        }
        if let Some(o) = full_block.as_mut() {
            *o = ShReport::from(&c.full_block);
        }
        if let Some(o) = channel_norm.as_mut() {
            *o = c.uncertainty_channel_norm;
        }
        if let Some(o) = passed.as_mut() {
            *o = c.passed;
        }
        Ok(())
    })
}

/// H-infinity norm of a stable `(A, B, C, D)` to relative accuracy `tol`.
///
/// # Safety
/// Matrix pointers must reference arrays of the stated size; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sh_hinf_norm(
    n: usize,
    m: usize,
    p: usize,
    a: *const f64,
    b: *const f64,
    c: *const f64,
    d: *const f64,
    tol: f64,
    out: *mut f64,
) -> ShStatus {
    guard(|| {
        let ss = StateSpace::new(
            read_mat(a, n, n, "A")?,
            read_mat(b, n, m, "B")?,
            read_mat(c, p, n, "C")?,
            read_mat(d, p, m, "D")?,
        )?;
        let g = hinf_norm(&ss, tol, None)?;
        *out.as_mut().ok_or_else(|| null("out"))? = g;
        Ok(())
    })
}
