//! Plants, uncertainty descriptions, observers and the augmented error
//! systems that every LMI and every verification run operates on.
//!
//! Observer convention: `xhat' = (A + L C_y) xhat - L y`, estimation error
//! `e = x - xhat`, performance output `eps = C_z e`. Sensor noise enters as
//! `S_n n` with `diag(beta) = (S_n S_n)^-1`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_finite, check_shape, hstack, rcond, vstack, Mat};

/// Reciprocal condition below which `I - Delta E_delta` is treated as singular.
pub const WELL_POSEDNESS_RCOND: f64 = 1e-10;

/// A plain LTI realization `(A, B, C, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        let n = a.nrows();
        check_shape(&a, n, n, "A")?;
        check_shape(&b, n, b.ncols(), "B")?;
        check_shape(&c, c.nrows(), n, "C")?;
        check_shape(&d, c.nrows(), b.ncols(), "D")?;
        for (m, what) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            check_finite(m, what)?;
        }
        Ok(Self { a, b, c, d })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }
}

/// Nominal plant `x' = A x + B_d d`, `y = C_y x + D_d d + S_n n`, `z = C_z x`.
///
/// The sensor-noise input matrix is the identity (independent channels), so
/// it is not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: Mat,
    b_d: Mat,
    c_y: Mat,
    d_d: Mat,
    c_z: Mat,
}

impl StateSpaceModel {
    pub fn new(a: Mat, b_d: Mat, c_y: Mat, d_d: Mat, c_z: Mat) -> Result<Self> {
        let n = a.nrows();
        check_shape(&a, n, n, "A")?;
        check_shape(&b_d, n, b_d.ncols(), "B_d")?;
        check_shape(&c_y, c_y.nrows(), n, "C_y")?;
        check_shape(&d_d, c_y.nrows(), b_d.ncols(), "D_d")?;
        check_shape(&c_z, c_z.nrows(), n, "C_z")?;
        for (m, what) in [(&a, "A"), (&b_d, "B_d"), (&c_y, "C_y"), (&d_d, "D_d"), (&c_z, "C_z")] {
            check_finite(m, what)?;
        }
        Ok(Self { a, b_d, c_y, d_d, c_z })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b_d(&self) -> &Mat {
        &self.b_d
    }
    pub fn c_y(&self) -> &Mat {
        &self.c_y
    }
    pub fn d_d(&self) -> &Mat {
        &self.d_d
    }
    pub fn c_z(&self) -> &Mat {
        &self.c_z
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_disturbances(&self) -> usize {
        self.b_d.ncols()
    }
    pub fn n_sensors(&self) -> usize {
        self.c_y.nrows()
    }
    pub fn n_performance(&self) -> usize {
        self.c_z.nrows()
    }

    /// Keep only the listed sensors (rows of `C_y` and `D_d`), in the given order.
    pub fn select_sensors(&self, keep: &[usize]) -> Result<Self> {
        check_indices(keep, self.n_sensors())?;
        Self::new(
            self.a.clone(),
            self.b_d.clone(),
            self.c_y.select_rows(keep),
            self.d_d.select_rows(keep),
            self.c_z.clone(),
        )
    }
}

fn check_indices(keep: &[usize], n: usize) -> Result<()> {
    match keep.iter().find(|&&i| i >= n) {
        Some(i) => Err(Error::Dimension(format!("sensor index {i} out of range for {n} sensors"))),
        None => Ok(()),
    }
}

/// Norm-bounded affine uncertainty `dA = M1 F1 N1`, `dB_d = M2 F2 N2`,
/// `F_i^T F_i <= I`. The contraction factors are sampled at verification time.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineUncertainty {
    pub m1: Mat,
    pub n1: Mat,
    pub m2: Mat,
    pub n2: Mat,
}

impl AffineUncertainty {
    pub fn new(m1: Mat, n1: Mat, m2: Mat, n2: Mat) -> Result<Self> {
        for (m, what) in [(&m1, "M1"), (&n1, "N1"), (&m2, "M2"), (&n2, "N2")] {
            check_finite(m, what)?;
        }
        Ok(Self { m1, n1, m2, n2 })
    }

    /// No uncertainty: empty factors.
    pub fn none(model: &StateSpaceModel) -> Self {
        let n = model.n_states();
        Self {
            m1: Mat::zeros(n, 0),
            n1: Mat::zeros(0, n),
            m2: Mat::zeros(n, 0),
            n2: Mat::zeros(0, model.n_disturbances()),
        }
    }

    pub fn check_against(&self, model: &StateSpaceModel) -> Result<()> {
        let n = model.n_states();
        check_shape(&self.m1, n, self.m1.ncols(), "M1")?;
        check_shape(&self.n1, self.n1.nrows(), n, "N1")?;
        check_shape(&self.m2, n, self.m2.ncols(), "M2")?;
        check_shape(&self.n2, self.n2.nrows(), model.n_disturbances(), "N2")
    }

    /// Shape of `F1` (rows = columns of `M1`, cols = rows of `N1`).
    pub fn f1_shape(&self) -> (usize, usize) {
        (self.m1.ncols(), self.n1.nrows())
    }

    pub fn f2_shape(&self) -> (usize, usize) {
        (self.m2.ncols(), self.n2.nrows())
    }

    /// True when `dA` is identically zero for every admissible `F1`.
    pub fn a_vacuous(&self) -> bool {
        is_zero(&self.m1) || is_zero(&self.n1)
    }

    pub fn b_vacuous(&self) -> bool {
        is_zero(&self.m2) || is_zero(&self.n2)
    }
}

fn is_zero(m: &Mat) -> bool {
    m.iter().all(|&v| v == 0.0)
}

/// Shape of the pulled-out uncertainty block, used when sampling `Delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaStructure {
    FullBlock,
    Diagonal,
}

/// Plant with its uncertainty pulled out into a feedback block
/// `w_delta = Delta z_delta`, `||Delta|| <= 1`:
///
/// ```text
/// x'      = A x       + B_delta w_delta + B_d d
/// z_delta = C_delta x + E_delta w_delta + E_d d
/// y       = C_y x     + D_delta w_delta + D_d d + S_n n
/// z       = C_z x
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LftPlant {
    pub a: Mat,
    pub b_delta: Mat,
    pub b_d: Mat,
    pub c_delta: Mat,
    pub e_delta: Mat,
    pub e_d: Mat,
    pub c_y: Mat,
    pub d_delta: Mat,
    pub d_d: Mat,
    pub c_z: Mat,
    pub delta_structure: DeltaStructure,
}

impl LftPlant {
    /// Validates dimensions and finiteness of a fully populated plant.
    pub fn validate(self) -> Result<Self> {
        let n = self.a.nrows();
        let nw = self.b_delta.ncols();
        let nd = self.b_d.ncols();
        let nzd = self.c_delta.nrows();
        let ny = self.c_y.nrows();
        check_shape(&self.a, n, n, "A")?;
        check_shape(&self.b_delta, n, nw, "B_delta")?;
        check_shape(&self.b_d, n, nd, "B_d")?;
        check_shape(&self.c_delta, nzd, n, "C_delta")?;
        check_shape(&self.e_delta, nzd, nw, "E_delta")?;
        check_shape(&self.e_d, nzd, nd, "E_d")?;
        check_shape(&self.c_y, ny, n, "C_y")?;
        check_shape(&self.d_delta, ny, nw, "D_delta")?;
        check_shape(&self.d_d, ny, nd, "D_d")?;
        check_shape(&self.c_z, self.c_z.nrows(), n, "C_z")?;
        if self.delta_structure == DeltaStructure::Diagonal && nw != nzd {
            return Err(Error::Dimension(format!(
                "diagonal Delta needs a square block, got {nw}x{nzd}"
            )));
        }
        for (m, what) in [
            (&self.a, "A"),
            (&self.b_delta, "B_delta"),
            (&self.b_d, "B_d"),
            (&self.c_delta, "C_delta"),
            (&self.e_delta, "E_delta"),
            (&self.e_d, "E_d"),
            (&self.c_y, "C_y"),
            (&self.d_delta, "D_delta"),
            (&self.d_d, "D_d"),
            (&self.c_z, "C_z"),
        ] {
            check_finite(m, what)?;
        }
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_w(&self) -> usize {
        self.b_delta.ncols()
    }
    pub fn n_z_delta(&self) -> usize {
        self.c_delta.nrows()
    }
    pub fn n_disturbances(&self) -> usize {
        self.b_d.ncols()
    }
    pub fn n_sensors(&self) -> usize {
        self.c_y.nrows()
    }

    /// The nominal plant seen with `Delta = 0`.
    pub fn nominal(&self) -> Result<StateSpaceModel> {
        StateSpaceModel::new(
            self.a.clone(),
            self.b_d.clone(),
            self.c_y.clone(),
            self.d_d.clone(),
            self.c_z.clone(),
        )
    }

    /// Open-loop map `(w_delta, d) -> z_delta` whose gain must not exceed one.
    pub fn uncertainty_channel(&self) -> StateSpace {
        StateSpace {
            a: self.a.clone(),
            b: hstack(&[&self.b_delta, &self.b_d]),
            c: self.c_delta.clone(),
            d: hstack(&[&self.e_delta, &self.e_d]),
        }
    }

    pub fn select_sensors(&self, keep: &[usize]) -> Result<Self> {
        check_indices(keep, self.n_sensors())?;
        Self {
            c_y: self.c_y.select_rows(keep),
            d_delta: self.d_delta.select_rows(keep),
            d_d: self.d_d.select_rows(keep),
            ..self.clone()
        }
        .validate()
    }
}

/// Per-sensor precision `beta` with an active mask.
///
/// Inactive sensors carry `beta = 0` (infinite noise energy); their noise
/// channel is removed, which is represented by a zero entry in `S_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionVector {
    beta: Vec<f64>,
    active: Vec<bool>,
}

impl PrecisionVector {
    pub fn new(beta: Vec<f64>, active: Vec<bool>, beta_min: f64) -> Result<Self> {
        if beta.len() != active.len() {
            return Err(Error::Dimension(format!(
                "{} precisions but {} mask entries",
                beta.len(),
                active.len()
            )));
        }
        for (i, (&b, &on)) in beta.iter().zip(&active).enumerate() {
            if !b.is_finite() {
                return Err(Error::NonFinite("beta"));
            }
            if on && b < beta_min {
                return Err(Error::InvalidArgument(format!(
                    "active sensor {i} has precision {b:e} below {beta_min:e}"
                )));
            }
        }
        let beta = beta.iter().zip(&active).map(|(&b, &on)| if on { b } else { 0.0 }).collect();
        Ok(Self { beta, active })
    }

    /// Every sensor active.
    pub fn all_active(beta: Vec<f64>) -> Result<Self> {
        let n = beta.len();
        Self::new(beta, vec![true; n], f64::MIN_POSITIVE)
    }

    pub fn uniform(n: usize, beta: f64) -> Self {
        Self { beta: vec![beta; n], active: vec![true; n] }
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.active[i]).collect()
    }

    /// `S_n = diag(beta)^(-1/2)` on active sensors, zero on removed channels.
    pub fn noise_scaling(&self) -> Mat {
        let d = DVector::from_iterator(
            self.len(),
            self.beta.iter().zip(&self.active).map(|(&b, &on)| if on { 1.0 / b.sqrt() } else { 0.0 }),
        );
        Mat::from_diagonal(&d)
    }

    /// Same precisions with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { beta: self.beta.iter().map(|b| b * factor).collect(), active: self.active.clone() }
    }

    /// Restriction to the listed sensors.
    pub fn select(&self, keep: &[usize]) -> Self {
        Self {
            beta: keep.iter().map(|&i| self.beta[i]).collect(),
            active: keep.iter().map(|&i| self.active[i]).collect(),
        }
    }
}

/// Observer gain `L` (states x sensors).
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverGain {
    l: Mat,
}

impl ObserverGain {
    pub fn new(l: Mat) -> Result<Self> {
        check_finite(&l, "L")?;
        Ok(Self { l })
    }

    pub fn zeros(n_states: usize, n_sensors: usize) -> Self {
        Self { l: Mat::zeros(n_states, n_sensors) }
    }

    /// Gain with the columns of inactive sensors forced to exactly zero.
    pub fn masked(l: Mat, active: &[bool]) -> Result<Self> {
        if l.ncols() != active.len() {
            return Err(Error::Dimension(format!(
                "gain has {} columns but mask has {} entries",
                l.ncols(),
                active.len()
            )));
        }
        let mut l = l;
        for (j, &on) in active.iter().enumerate() {
            if !on {
                l.column_mut(j).fill(0.0);
            }
        }
        Self::new(l)
    }

    pub fn matrix(&self) -> &Mat {
        &self.l
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { l: &self.l * factor }
    }

    pub fn select(&self, keep: &[usize]) -> Self {
        Self { l: self.l.select_columns(keep) }
    }
}

/// Which augmented error dynamics an [`ErrorSystem`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorSystemKind {
    /// State `(x, e)`, input `(d, n)`.
    Structured,
    /// State `e`, input `(w_delta, d, n)`.
    Lft,
}

/// Uncertainty factors lifted onto the `(x, e)` state: `M~ = [M; M]`, `N~1 = [N1, 0]`
/// (acting on `(x, e)`), `N~2 = [N2, 0]` (acting on `(d, n)`).
#[derive(Debug, Clone, PartialEq)]
pub struct TiledUncertainty {
    pub m1: Mat,
    pub n1: Mat,
    pub m2: Mat,
    pub n2: Mat,
}

/// `x~' = A~ x~ + B~ S~ w~`, `eps = C~ x~`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSystem {
    pub a: Mat,
    pub b: Mat,
    pub s: Mat,
    pub c: Mat,
    pub kind: ErrorSystemKind,
    /// Sizes of the `(w_delta,) d, n` segments of the input.
    pub input_partition: Vec<usize>,
    pub tiled: Option<TiledUncertainty>,
}

impl ErrorSystem {
    /// Nominal realization `(A~, B~ S~, C~, 0)`.
    pub fn state_space(&self) -> StateSpace {
        StateSpace {
            a: self.a.clone(),
            b: &self.b * &self.s,
            c: self.c.clone(),
            d: Mat::zeros(self.c.nrows(), self.b.ncols()),
        }
    }

    /// Structured error system under a particular admissible perturbation:
    /// `A~ + M~1 F1 N~1`, `B~ S~ + M~2 F2 N~2`.
    pub fn perturbed(&self, f1: &Mat, f2: &Mat) -> Result<StateSpace> {
        let t = self.tiled.as_ref().ok_or_else(|| {
            Error::InvalidArgument("perturbation needs a structured error system".into())
        })?;
        check_shape(f1, t.m1.ncols(), t.n1.nrows(), "F1")?;
        check_shape(f2, t.m2.ncols(), t.n2.nrows(), "F2")?;
        let mut ss = self.state_space();
        ss.a += &t.m1 * f1 * &t.n1;
        ss.b += &t.m2 * f2 * &t.n2;
        Ok(ss)
    }
}

fn check_sensor_dims(n_sensors: usize, gain: &ObserverGain, prec: &PrecisionVector, n: usize) -> Result<()> {
    check_shape(gain.matrix(), n, n_sensors, "L")?;
    if prec.len() != n_sensors {
        return Err(Error::Dimension(format!(
            "{} precisions for {n_sensors} sensors",
            prec.len()
        )));
    }
    Ok(())
}

/// Augmented `(x, e)` error dynamics for the affine-uncertainty plant.
pub fn build_structured_error_system(
    model: &StateSpaceModel,
    unc: &AffineUncertainty,
    gain: &ObserverGain,
    prec: &PrecisionVector,
) -> Result<ErrorSystem> {
    unc.check_against(model)?;
    let n = model.n_states();
    let ny = model.n_sensors();
    let nd = model.n_disturbances();
    check_sensor_dims(ny, gain, prec, n)?;
    let l = gain.matrix();

    let a_obs = model.a() + l * model.c_y();
    let a = crate::linalg::from_blocks(
        &[n, n],
        &[n, n],
        &[&[Some(model.a()), None], &[None, Some(&a_obs)]],
    );
    let b_obs = model.b_d() + l * model.d_d();
    let b = crate::linalg::from_blocks(
        &[n, n],
        &[nd, ny],
        &[&[Some(model.b_d()), None], &[Some(&b_obs), Some(l)]],
    );
    let s = crate::linalg::blkdiag(&[&Mat::identity(nd, nd), &prec.noise_scaling()]);
    let c = hstack(&[&Mat::zeros(model.n_performance(), n), model.c_z()]);

    let tiled = TiledUncertainty {
        m1: vstack(&[&unc.m1, &unc.m1]),
        n1: hstack(&[&unc.n1, &Mat::zeros(unc.n1.nrows(), n)]),
        m2: vstack(&[&unc.m2, &unc.m2]),
        n2: hstack(&[&unc.n2, &Mat::zeros(unc.n2.nrows(), ny)]),
    };
    Ok(ErrorSystem {
        a,
        b,
        s,
        c,
        kind: ErrorSystemKind::Structured,
        input_partition: vec![nd, ny],
        tiled: Some(tiled),
    })
}

/// Error dynamics `e' = (A + L C_y) e + B~ S~ w~` of the LFT plant, with
/// `B~ = [B_delta, B_d, 0] + L [D_delta, D_d, I]`.
pub fn build_lft_error_system(
    plant: &LftPlant,
    gain: &ObserverGain,
    prec: &PrecisionVector,
) -> Result<ErrorSystem> {
    let n = plant.n_states();
    let ny = plant.n_sensors();
    let (nw, nd) = (plant.n_w(), plant.n_disturbances());
    check_sensor_dims(ny, gain, prec, n)?;
    let l = gain.matrix();

    let a = &plant.a + l * &plant.c_y;
    let b_open = hstack(&[&plant.b_delta, &plant.b_d, &Mat::zeros(n, ny)]);
    let d_all = hstack(&[&plant.d_delta, &plant.d_d, &Mat::identity(ny, ny)]);
    let b = b_open + l * d_all;
    let s = crate::linalg::blkdiag(&[
        &Mat::identity(nw, nw),
        &Mat::identity(nd, nd),
        &prec.noise_scaling(),
    ]);
    Ok(ErrorSystem {
        a,
        b,
        s,
        c: plant.c_z.clone(),
        kind: ErrorSystemKind::Lft,
        input_partition: vec![nw, nd, ny],
        tiled: None,
    })
}

/// Close `w_delta = Delta z_delta` around the plant and its observer.
///
/// Returns the realization with state `(x, e)`, input `(d, n)` and output
/// `eps = C_z e`.
pub fn close_delta_loop(
    plant: &LftPlant,
    gain: &ObserverGain,
    prec: &PrecisionVector,
    delta: &Mat,
) -> Result<StateSpace> {
    let n = plant.n_states();
    let ny = plant.n_sensors();
    let (nw, nzd, nd) = (plant.n_w(), plant.n_z_delta(), plant.n_disturbances());
    check_sensor_dims(ny, gain, prec, n)?;
    check_shape(delta, nw, nzd, "Delta")?;
    check_finite(delta, "Delta")?;
    let l = gain.matrix();

    // w = (I - Delta E_delta)^-1 Delta (C_delta x + E_d d)
    let loop_mat = Mat::identity(nw, nw) - delta * &plant.e_delta;
    let rc = rcond(&loop_mat);
    if rc < WELL_POSEDNESS_RCOND {
        return Err(Error::IllPosed { rcond: rc, threshold: WELL_POSEDNESS_RCOND });
    }
    let k = loop_mat
        .lu()
        .solve(delta)
        .ok_or(Error::IllPosed { rcond: 0.0, threshold: WELL_POSEDNESS_RCOND })?;
    let kx = &k * &plant.c_delta;
    let kd = &k * &plant.e_d;

    let b_w_obs = &plant.b_delta + l * &plant.d_delta;
    let a11 = &plant.a + &plant.b_delta * &kx;
    let a21 = &b_w_obs * &kx;
    let a22 = &plant.a + l * &plant.c_y;
    let a = crate::linalg::from_blocks(&[n, n], &[n, n], &[&[Some(&a11), None], &[Some(&a21), Some(&a22)]]);

    let b11 = &plant.b_d + &plant.b_delta * &kd;
    let b21 = &plant.b_d + l * &plant.d_d + &b_w_obs * &kd;
    let b22 = l * prec.noise_scaling();
    let b = crate::linalg::from_blocks(&[n, n], &[nd, ny], &[&[Some(&b11), None], &[Some(&b21), Some(&b22)]]);
    let c = hstack(&[&Mat::zeros(plant.c_z.nrows(), n), &plant.c_z]);
    let d = Mat::zeros(plant.c_z.nrows(), nd + ny);
    StateSpace::new(a, b, c, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat;

    fn toy_model() -> StateSpaceModel {
        StateSpaceModel::new(
            mat(2, 2, &[-1.0, 1.0, 0.0, -2.0]),
            mat(2, 1, &[1.0, 0.5]),
            mat(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            mat(2, 1, &[0.1, 0.0]),
            mat(1, 2, &[1.0, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let err = StateSpaceModel::new(
            Mat::zeros(2, 2),
            Mat::zeros(3, 1),
            Mat::zeros(1, 2),
            Mat::zeros(1, 1),
            Mat::zeros(1, 2),
        );
        assert!(matches!(err, Err(Error::Dimension(_))));
        let mut a = Mat::zeros(2, 2);
        a[(0, 0)] = f64::NAN;
        let err = StateSpaceModel::new(a, Mat::zeros(2, 1), Mat::zeros(1, 2), Mat::zeros(1, 1), Mat::zeros(1, 2));
        assert!(matches!(err, Err(Error::NonFinite("A"))));
    }

    #[test]
    fn zero_gain_structured_input_matrix() {
        let model = StateSpaceModel::new(
            mat(2, 2, &[-1.0, 1.0, 0.0, -2.0]),
            mat(2, 1, &[1.0, 0.5]),
            Mat::identity(2, 2),
            Mat::zeros(2, 1),
            mat(1, 2, &[1.0, 1.0]),
        )
        .unwrap();
        let unc = AffineUncertainty::none(&model);
        let err = build_structured_error_system(
            &model,
            &unc,
            &ObserverGain::zeros(2, 2),
            &PrecisionVector::uniform(2, 1.0),
        )
        .unwrap();
        let expected = crate::linalg::from_blocks(
            &[2, 2],
            &[1, 2],
            &[&[Some(model.b_d()), None], &[Some(model.b_d()), None]],
        );
        assert_eq!(err.b, expected);
        assert_eq!((err.a.nrows(), err.b.ncols(), err.c.nrows()), (4, 3, 1));
    }

    #[test]
    fn precision_scaling_inverts_beta() {
        let p = PrecisionVector::new(vec![4.0, 0.25, 9.0], vec![true, true, false], 1e-8).unwrap();
        let s = p.noise_scaling();
        assert_eq!(s[(0, 0)], 0.5);
        assert_eq!(s[(1, 1)], 2.0);
        assert_eq!(s[(2, 2)], 0.0);
        assert_eq!(p.beta()[2], 0.0);
        for i in 0..2 {
            assert_eq!(p.beta()[i] * s[(i, i)] * s[(i, i)], 1.0);
        }
    }

    #[test]
    fn precision_below_floor_rejected() {
        let err = PrecisionVector::new(vec![1e-9], vec![true], 1e-8);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn masked_gain_zeroes_columns() {
        let g = ObserverGain::masked(Mat::from_element(2, 3, 1.0), &[true, false, true]).unwrap();
        assert!(g.matrix().column(1).iter().all(|&v| v == 0.0));
        assert_eq!(g.matrix()[(0, 2)], 1.0);
    }

    #[test]
    fn sensor_selection_keeps_rows() {
        let m = toy_model();
        let r = m.select_sensors(&[1]).unwrap();
        assert_eq!(r.c_y(), &mat(1, 2, &[0.0, 1.0]));
        assert_eq!(r.d_d(), &mat(1, 1, &[0.0]));
        assert!(m.select_sensors(&[2]).is_err());
    }
}
