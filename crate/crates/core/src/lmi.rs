//! Affine matrix inequalities over a flat decision vector, and the
//! synthesis/analysis constructions built from them.
//!
//! Every inequality is stored as `M(v) = A0 + sum_j v_j A_j` and constrained
//! as `M(v) <= -margin * I`.

use std::collections::{BTreeMap, HashSet};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, max_sym_eigenvalue, Mat};
use crate::system_model::{
    AffineUncertainty, ErrorSystem, ErrorSystemKind, LftPlant, StateSpace, StateSpaceModel,
};

pub const X1: &str = "X1";
pub const X2: &str = "X2";
pub const Y: &str = "Y";
pub const BETA: &str = "beta";
pub const DELTA1: &str = "delta1";
pub const DELTA2: &str = "delta2";
pub const X: &str = "X";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VariableKind {
    Symmetric { n: usize },
    Full { rows: usize, cols: usize },
    NonnegVector { len: usize, lower: f64 },
    NonnegScalar { lower: f64 },
}

impl VariableKind {
    pub fn scalar_count(&self) -> usize {
        match *self {
            VariableKind::Symmetric { n } => n * (n + 1) / 2,
            VariableKind::Full { rows, cols } => rows * cols,
            VariableKind::NonnegVector { len, .. } => len,
            VariableKind::NonnegScalar { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VariableKind,
    pub offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(usize);

/// Ordered, named decision variables packed into one flat real vector.
///
/// Symmetric matrices are parameterized by their upper triangle, stored
/// column by column; full matrices are stored row-major.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecisionVariableSpace {
    vars: Vec<Variable>,
    dim: usize,
}

/// Index of entry `(i, j)`, `i <= j`, in a packed upper triangle.
fn tri_index(i: usize, j: usize) -> usize {
    j * (j + 1) / 2 + i
}

impl DecisionVariableSpace {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, kind: VariableKind) -> Result<VarId> {
        if self.vars.iter().any(|v| v.name == name) {
            return Err(Error::InvalidArgument(format!("duplicate variable name {name}")));
        }
        let id = VarId(self.vars.len());
        self.vars.push(Variable { name: name.to_owned(), kind, offset: self.dim });
        self.dim += kind.scalar_count();
        Ok(id)
    }

    pub fn add_symmetric(&mut self, name: &str, n: usize) -> Result<VarId> {
        self.push(name, VariableKind::Symmetric { n })
    }

    pub fn add_full(&mut self, name: &str, rows: usize, cols: usize) -> Result<VarId> {
        self.push(name, VariableKind::Full { rows, cols })
    }

    pub fn add_nonneg_vector(&mut self, name: &str, len: usize, lower: f64) -> Result<VarId> {
        self.push(name, VariableKind::NonnegVector { len, lower })
    }

    pub fn add_nonneg_scalar(&mut self, name: &str, lower: f64) -> Result<VarId> {
        self.push(name, VariableKind::NonnegScalar { lower })
    }

    /// Total scalar dimension `n_v`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn require(&self, name: &str) -> Result<VarId> {
        self.find(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no decision variable named {name}")))
    }

    /// Range of flat indices owned by a variable.
    pub fn range(&self, id: VarId) -> std::ops::Range<usize> {
        let v = self.var(id);
        v.offset..v.offset + v.kind.scalar_count()
    }

    /// Lower bounds of all nonnegative entries as `(index, bound)`.
    pub fn lower_bounds(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for v in &self.vars {
            match v.kind {
                VariableKind::NonnegVector { len, lower } => {
                    out.extend((0..len).map(|k| (v.offset + k, lower)));
                }
                VariableKind::NonnegScalar { lower } => out.push((v.offset, lower)),
                _ => {}
            }
        }
        out
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Dimension(format!(
                "decision vector has {} entries, space has {}",
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Matrix value of a symmetric or full matrix variable.
    pub fn matrix_value(&self, v: &DVector<f64>, id: VarId) -> Result<Mat> {
        self.check_len(v)?;
        let var = self.var(id);
        match var.kind {
            VariableKind::Symmetric { n } => Ok(Mat::from_fn(n, n, |i, j| {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                v[var.offset + tri_index(a, b)]
            })),
            VariableKind::Full { rows, cols } => {
                Ok(Mat::from_fn(rows, cols, |i, j| v[var.offset + i * cols + j]))
            }
            _ => Err(Error::InvalidArgument(format!("{} is not a matrix variable", var.name))),
        }
    }

    /// Entries of a vector or scalar variable.
    pub fn vector_value(&self, v: &DVector<f64>, id: VarId) -> Result<Vec<f64>> {
        self.check_len(v)?;
        Ok(self.range(id).map(|k| v[k]).collect())
    }

    /// Write a matrix value into the flat vector (symmetric input is read
    /// from its upper triangle).
    pub fn set_matrix(&self, v: &mut DVector<f64>, id: VarId, value: &Mat) -> Result<()> {
        self.check_len(v)?;
        let var = self.var(id);
        match var.kind {
            VariableKind::Symmetric { n } => {
                crate::linalg::check_shape(value, n, n, &var.name)?;
                for j in 0..n {
                    for i in 0..=j {
                        v[var.offset + tri_index(i, j)] = value[(i, j)];
                    }
                }
            }
            VariableKind::Full { rows, cols } => {
                crate::linalg::check_shape(value, rows, cols, &var.name)?;
                for i in 0..rows {
                    for j in 0..cols {
                        v[var.offset + i * cols + j] = value[(i, j)];
                    }
                }
            }
            _ => return Err(Error::InvalidArgument(format!("{} is not a matrix variable", var.name))),
        }
        Ok(())
    }

    pub fn set_vector(&self, v: &mut DVector<f64>, id: VarId, value: &[f64]) -> Result<()> {
        self.check_len(v)?;
        let r = self.range(id);
        if r.len() != value.len() {
            return Err(Error::Dimension(format!(
                "{} has {} entries, got {}",
                self.var(id).name,
                r.len(),
                value.len()
            )));
        }
        for (k, x) in r.zip(value) {
            v[k] = *x;
        }
        Ok(())
    }
}

/// Matrix-valued affine function `C + sum_j v_j G_j` of fixed shape.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr {
    rows: usize,
    cols: usize,
    constant: Mat,
    terms: BTreeMap<usize, Mat>,
}

impl AffineExpr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, constant: Mat::zeros(rows, cols), terms: BTreeMap::new() }
    }

    pub fn constant(m: Mat) -> Self {
        Self { rows: m.nrows(), cols: m.ncols(), constant: m, terms: BTreeMap::new() }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn add_term(&mut self, index: usize, g: Mat) {
        match self.terms.get_mut(&index) {
            Some(t) => *t += g,
            None => {
                self.terms.insert(index, g);
            }
        }
    }

    /// `left * V * right` for a matrix variable `V`.
    pub fn product(space: &DecisionVariableSpace, left: &Mat, id: VarId, right: &Mat) -> Result<Self> {
        let var = space.var(id);
        let (vr, vc) = match var.kind {
            VariableKind::Symmetric { n } => (n, n),
            VariableKind::Full { rows, cols } => (rows, cols),
            _ => return Err(Error::InvalidArgument(format!("{} is not a matrix variable", var.name))),
        };
        if left.ncols() != vr || right.nrows() != vc {
            return Err(Error::Dimension(format!(
                "product with {} ({vr}x{vc}) against {}x{} and {}x{}",
                var.name,
                left.nrows(),
                left.ncols(),
                right.nrows(),
                right.ncols()
            )));
        }
        let mut e = Self::zeros(left.nrows(), right.ncols());
        let outer = |i: usize, j: usize| left.column(i) * right.row(j);
        match var.kind {
            VariableKind::Symmetric { n } => {
                for j in 0..n {
                    for i in 0..=j {
                        let g = if i == j { outer(i, i) } else { outer(i, j) + outer(j, i) };
                        e.add_term(var.offset + tri_index(i, j), g);
                    }
                }
            }
            VariableKind::Full { rows, cols } => {
                for i in 0..rows {
                    for j in 0..cols {
                        e.add_term(var.offset + i * cols + j, outer(i, j));
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(e)
    }

    /// `V * right`.
    pub fn var_times(space: &DecisionVariableSpace, id: VarId, right: &Mat) -> Result<Self> {
        let n = match space.var(id).kind {
            VariableKind::Symmetric { n } => n,
            VariableKind::Full { rows, .. } => rows,
            _ => 0,
        };
        Self::product(space, &Mat::identity(n, n), id, right)
    }

    /// The bare matrix variable `V`.
    pub fn var(space: &DecisionVariableSpace, id: VarId) -> Result<Self> {
        let c = match space.var(id).kind {
            VariableKind::Symmetric { n } => n,
            VariableKind::Full { cols, .. } => cols,
            _ => 0,
        };
        Self::var_times(space, id, &Mat::identity(c, c))
    }

    /// `s * M` for a scalar variable `s`.
    pub fn scalar_times(space: &DecisionVariableSpace, id: VarId, m: &Mat) -> Result<Self> {
        let var = space.var(id);
        if !matches!(var.kind, VariableKind::NonnegScalar { .. }) {
            return Err(Error::InvalidArgument(format!("{} is not a scalar variable", var.name)));
        }
        let mut e = Self::zeros(m.nrows(), m.ncols());
        e.add_term(var.offset, m.clone());
        Ok(e)
    }

    /// `scale * diag(v)` for a vector variable `v`.
    pub fn diag_of(space: &DecisionVariableSpace, id: VarId, scale: f64) -> Result<Self> {
        let var = space.var(id);
        let len = match var.kind {
            VariableKind::NonnegVector { len, .. } => len,
            _ => return Err(Error::InvalidArgument(format!("{} is not a vector variable", var.name))),
        };
        let mut e = Self::zeros(len, len);
        for k in 0..len {
            let mut g = Mat::zeros(len, len);
            g[(k, k)] = scale;
            e.add_term(var.offset + k, g);
        }
        Ok(e)
    }

    pub fn plus(mut self, other: Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "adding {:?} to {:?}",
                other.shape(),
                self.shape()
            )));
        }
        self.constant += other.constant;
        for (k, g) in other.terms {
            self.add_term(k, g);
        }
        Ok(self)
    }

    pub fn plus_const(self, m: &Mat) -> Result<Self> {
        self.plus(Self::constant(m.clone()))
    }

    pub fn transpose(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            constant: self.constant.transpose(),
            terms: self.terms.iter().map(|(&k, g)| (k, g.transpose())).collect(),
        }
    }

    /// `E + E^T`.
    pub fn sym(self) -> Result<Self> {
        let t = self.transpose();
        self.plus(t)
    }

    /// Value at a decision vector.
    pub fn value(&self, v: &DVector<f64>) -> Mat {
        let mut out = self.constant.clone();
        for (&k, g) in &self.terms {
            out += g * v[k];
        }
        out
    }
}

/// Upper-triangular (row <= col) nonzeros of a symmetric matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseSym {
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn from_dense(m: &Mat) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..=j {
                let x = m[(i, j)];
                if x != 0.0 {
                    entries.push((i, j, x));
                }
            }
        }
        Self { entries }
    }

    pub fn to_dense(&self, dim: usize) -> Mat {
        let mut m = Mat::zeros(dim, dim);
        for &(i, j, x) in &self.entries {
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
        m
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `out += scale * self`, writing both triangles.
    pub fn axpy_into(&self, scale: f64, out: &mut Mat) {
        for &(i, j, x) in &self.entries {
            out[(i, j)] += scale * x;
            if i != j {
                out[(j, i)] += scale * x;
            }
        }
    }
}

/// Default relative margin used to realize strict inequalities.
pub const DEFAULT_MARGIN_SCALE: f64 = 1e-7;

/// `A0 + sum_j v_j A_j <= -margin * I`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrixInequality {
    name: String,
    dim: usize,
    n_vars: usize,
    constant: Mat,
    coefficients: Vec<(usize, SparseSym)>,
    margin: f64,
}

impl AffineMatrixInequality {
    /// Assemble from an upper block triangle; blocks below the diagonal are
    /// implied by symmetry. Diagonal blocks must be symmetric and are
    /// symmetrized on ingestion.
    pub fn from_blocks(
        name: &str,
        space: &DecisionVariableSpace,
        sizes: &[usize],
        blocks: Vec<((usize, usize), AffineExpr)>,
        margin_scale: f64,
    ) -> Result<Self> {
        let offsets: Vec<usize> = sizes
            .iter()
            .scan(0, |acc, &s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect();
        let dim: usize = sizes.iter().sum();
        let mut constant = Mat::zeros(dim, dim);
        let mut dense: BTreeMap<usize, Mat> = BTreeMap::new();
        let mut seen = HashSet::new();
        for ((bi, bj), expr) in blocks {
            if bi > bj || bj >= sizes.len() {
                return Err(Error::InvalidArgument(format!("block ({bi},{bj}) outside the upper triangle")));
            }
            if !seen.insert((bi, bj)) {
                return Err(Error::InvalidArgument(format!("block ({bi},{bj}) given twice")));
            }
            if expr.shape() != (sizes[bi], sizes[bj]) {
                return Err(Error::Dimension(format!(
                    "{name}: block ({bi},{bj}) is {:?}, expected {:?}",
                    expr.shape(),
                    (sizes[bi], sizes[bj])
                )));
            }
            let (r, c) = (offsets[bi], offsets[bj]);
            let place = |target: &mut Mat, g: &Mat| {
                if bi == bj {
                    let s = crate::linalg::symmetrize(g);
                    let mut view = target.view_mut((r, c), (sizes[bi], sizes[bj]));
                    view += &s;
                } else {
                    {
                        let mut view = target.view_mut((r, c), (sizes[bi], sizes[bj]));
                        view += g;
                    }
                    let mut view = target.view_mut((c, r), (sizes[bj], sizes[bi]));
                    view += g.transpose();
                }
            };
            place(&mut constant, &expr.constant);
            for (k, g) in &expr.terms {
                let target = dense.entry(*k).or_insert_with(|| Mat::zeros(dim, dim));
                place(target, g);
            }
        }
        let coefficients: Vec<(usize, SparseSym)> = dense
            .into_iter()
            .map(|(k, m)| (k, SparseSym::from_dense(&m)))
            .filter(|(_, s)| !s.is_empty())
            .collect();
        let margin = margin_scale * (1.0 + max_abs(&constant));
        Ok(Self { name: name.to_owned(), dim, n_vars: space.dim(), constant, coefficients, margin })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn constant(&self) -> &Mat {
        &self.constant
    }

    /// Nonzero coefficient matrices as `(variable index, matrix)`, sorted by index.
    pub fn coefficients(&self) -> &[(usize, SparseSym)] {
        &self.coefficients
    }

    /// Dense coefficient of one scalar decision entry (zero if absent).
    pub fn coefficient(&self, index: usize) -> Mat {
        match self.coefficients.binary_search_by_key(&index, |(k, _)| *k) {
            Ok(p) => self.coefficients[p].1.to_dense(self.dim),
            Err(_) => Mat::zeros(self.dim, self.dim),
        }
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    /// `A0 + sum_j v_j A_j` and its largest eigenvalue.
    pub fn evaluate(&self, v: &DVector<f64>) -> Result<(Mat, f64)> {
        if v.len() != self.n_vars {
            return Err(Error::Dimension(format!(
                "{}: decision vector has {} entries, expected {}",
                self.name,
                v.len(),
                self.n_vars
            )));
        }
        let mut m = self.constant.clone();
        for (k, a) in &self.coefficients {
            a.axpy_into(v[*k], &mut m);
        }
        let lmax = max_sym_eigenvalue(&m);
        Ok((m, lmax))
    }
}

/// Knobs shared by all constructions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmiOptions {
    pub beta_min: f64,
    pub delta_min: f64,
    pub margin_scale: f64,
}

impl Default for LmiOptions {
    fn default() -> Self {
        Self { beta_min: 1e-8, delta_min: 1e-9, margin_scale: DEFAULT_MARGIN_SCALE }
    }
}

/// A decision space together with the inequalities posed on it.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub space: DecisionVariableSpace,
    pub lmis: Vec<AffineMatrixInequality>,
}

impl Assembly {
    /// Largest value of `lambda_max(M_k(v)) + margin_k` over all inequalities;
    /// negative means every inequality holds with its margin.
    pub fn worst_residual(&self, v: &DVector<f64>) -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for lmi in &self.lmis {
            let (_, l) = lmi.evaluate(v)?;
            worst = worst.max(l + lmi.margin());
        }
        Ok(worst)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")))
    }
}

fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

fn positivity(name: &str, space: &DecisionVariableSpace, id: VarId, opts: &LmiOptions) -> Result<AffineMatrixInequality> {
    let n = match space.var(id).kind {
        VariableKind::Symmetric { n } => n,
        _ => unreachable!("positivity constraints are only posed on symmetric variables"),
    };
    let neg = AffineExpr::product(space, &(-eye(n)), id, &eye(n))?;
    AffineMatrixInequality::from_blocks(name, space, &[n], vec![((0, 0), neg)], opts.margin_scale)
}

/// Robust sparse synthesis LMI for affine uncertainty (variables `X1, X2, Y,
/// beta, delta1, delta2`), plus `X1 > 0` and `X2 > 0`.
///
/// Uncertainty channels whose factors vanish identically are dropped together
/// with their multiplier.
pub fn assemble_theorem1(
    model: &StateSpaceModel,
    unc: &AffineUncertainty,
    gamma: f64,
    opts: &LmiOptions,
) -> Result<Assembly> {
    check_gamma(gamma)?;
    unc.check_against(model)?;
    let n = model.n_states();
    let ny = model.n_sensors();
    let nd = model.n_disturbances();
    let g2 = gamma * gamma;
    let use_a = !unc.a_vacuous();
    let use_b = !unc.b_vacuous();

    let mut space = DecisionVariableSpace::new();
    let x1 = space.add_symmetric(X1, n)?;
    let x2 = space.add_symmetric(X2, n)?;
    let y = space.add_full(Y, n, ny)?;
    let beta = space.add_nonneg_vector(BETA, ny, opts.beta_min)?;
    let d1 = if use_a { Some(space.add_nonneg_scalar(DELTA1, opts.delta_min)?) } else { None };
    let d2 = if use_b { Some(space.add_nonneg_scalar(DELTA2, opts.delta_min)?) } else { None };

    let (a, b_d, c_y, d_d, c_z) = (model.a(), model.b_d(), model.c_y(), model.d_d(), model.c_z());
    let mut sizes = vec![n, n, nd, ny];
    let mut blocks = Vec::new();

    let mut z11 = AffineExpr::var_times(&space, x1, a)?.sym()?;
    if let Some(d1) = d1 {
        z11 = z11.plus(AffineExpr::scalar_times(&space, d1, &(unc.n1.transpose() * &unc.n1))?)?;
    }
    blocks.push(((0, 0), z11));
    let z22 = AffineExpr::var_times(&space, x2, a)?
        .plus(AffineExpr::var_times(&space, y, c_y)?)?
        .sym()?
        .plus_const(&(c_z.transpose() * c_z))?;
    blocks.push(((1, 1), z22));
    blocks.push(((0, 2), AffineExpr::var_times(&space, x1, b_d)?));
    blocks.push((
        (1, 2),
        AffineExpr::var_times(&space, x2, b_d)?.plus(AffineExpr::var_times(&space, y, d_d)?)?,
    ));
    blocks.push(((1, 3), AffineExpr::var(&space, y)?));

    let mut dd = AffineExpr::constant(-g2 * eye(nd));
    if let Some(d2) = d2 {
        dd = dd.plus(AffineExpr::scalar_times(&space, d2, &(unc.n2.transpose() * &unc.n2))?)?;
    }
    blocks.push(((2, 2), dd));
    blocks.push(((3, 3), AffineExpr::diag_of(&space, beta, -g2)?));

    if let Some(d1) = d1 {
        let q1 = unc.m1.ncols();
        let k = sizes.len();
        sizes.push(q1);
        blocks.push(((0, k), AffineExpr::var_times(&space, x1, &unc.m1)?));
        blocks.push(((1, k), AffineExpr::var_times(&space, x2, &unc.m1)?));
        blocks.push(((k, k), AffineExpr::scalar_times(&space, d1, &(-eye(q1)))?));
    }
    if let Some(d2) = d2 {
        let q2 = unc.m2.ncols();
        let k = sizes.len();
        sizes.push(q2);
        blocks.push(((0, k), AffineExpr::var_times(&space, x1, &unc.m2)?));
        blocks.push(((1, k), AffineExpr::var_times(&space, x2, &unc.m2)?));
        blocks.push(((k, k), AffineExpr::scalar_times(&space, d2, &(-eye(q2)))?));
    }

    let main = AffineMatrixInequality::from_blocks("robust-performance", &space, &sizes, blocks, opts.margin_scale)?;
    let p1 = positivity("X1-positive", &space, x1, opts)?;
    let p2 = positivity("X2-positive", &space, x2, opts)?;
    Ok(Assembly { space, lmis: vec![main, p1, p2] })
}

/// Small-gain condition `||G_{w~ z_delta}|| < 1` of the LFT plant on `X1`.
fn lft_small_gain(space: &DecisionVariableSpace, x1: VarId, plant: &LftPlant, opts: &LmiOptions) -> Result<AffineMatrixInequality> {
    let n = plant.n_states();
    let (nw, nd) = (plant.n_w(), plant.n_disturbances());
    let (cd, ed, edd) = (&plant.c_delta, &plant.e_delta, &plant.e_d);
    let blocks = vec![
        (
            (0, 0),
            AffineExpr::var_times(space, x1, &plant.a)?.sym()?.plus_const(&(cd.transpose() * cd))?,
        ),
        ((0, 1), AffineExpr::var_times(space, x1, &plant.b_delta)?.plus_const(&(cd.transpose() * ed))?),
        ((0, 2), AffineExpr::var_times(space, x1, &plant.b_d)?.plus_const(&(cd.transpose() * edd))?),
        ((1, 1), AffineExpr::constant(ed.transpose() * ed - eye(nw))),
        ((1, 2), AffineExpr::constant(ed.transpose() * edd)),
        ((2, 2), AffineExpr::constant(edd.transpose() * edd - eye(nd))),
    ];
    AffineMatrixInequality::from_blocks("small-gain", space, &[n, nw, nd], blocks, opts.margin_scale)
}

/// Performance condition of the LFT error system on `X2, Y, beta`.
fn lft_performance(
    space: &DecisionVariableSpace,
    (x2, y, beta): (VarId, VarId, VarId),
    plant: &LftPlant,
    gamma: f64,
    opts: &LmiOptions,
) -> Result<AffineMatrixInequality> {
    let n = plant.n_states();
    let ny = plant.n_sensors();
    let (nw, nd) = (plant.n_w(), plant.n_disturbances());
    let g2 = gamma * gamma;
    let blocks = vec![
        (
            (0, 0),
            AffineExpr::var_times(space, x2, &plant.a)?
                .plus(AffineExpr::var_times(space, y, &plant.c_y)?)?
                .sym()?
                .plus_const(&(plant.c_z.transpose() * &plant.c_z))?,
        ),
        (
            (0, 1),
            AffineExpr::var_times(space, x2, &plant.b_delta)?.plus(AffineExpr::var_times(space, y, &plant.d_delta)?)?,
        ),
        (
            (0, 2),
            AffineExpr::var_times(space, x2, &plant.b_d)?.plus(AffineExpr::var_times(space, y, &plant.d_d)?)?,
        ),
        ((0, 3), AffineExpr::var(space, y)?),
        ((1, 1), AffineExpr::constant(-g2 * eye(nw))),
        ((2, 2), AffineExpr::constant(-g2 * eye(nd))),
        ((3, 3), AffineExpr::diag_of(space, beta, -g2)?),
    ];
    AffineMatrixInequality::from_blocks("performance", space, &[n, nw, nd, ny], blocks, opts.margin_scale)
}

/// Robust sparse synthesis LMIs for the LFT plant (variables `X1, X2, Y,
/// beta`): the small-gain condition on `X1`, the performance condition on
/// `X2, Y, beta`, and the two positivity constraints, in that order.
///
/// The coupling terms of the performance condition use `Y D_delta` and
/// `Y D_d`, as required by `B~ = [B_delta, B_d, 0] + L [D_delta, D_d, I]`.
pub fn assemble_theorem2(plant: &LftPlant, gamma: f64, opts: &LmiOptions) -> Result<Assembly> {
    check_gamma(gamma)?;
    let n = plant.n_states();
    let mut space = DecisionVariableSpace::new();
    let x1 = space.add_symmetric(X1, n)?;
    let x2 = space.add_symmetric(X2, n)?;
    let y = space.add_full(Y, n, plant.n_sensors())?;
    let beta = space.add_nonneg_vector(BETA, plant.n_sensors(), opts.beta_min)?;
    let small_gain = lft_small_gain(&space, x1, plant, opts)?;
    let perf = lft_performance(&space, (x2, y, beta), plant, gamma, opts)?;
    let p1 = positivity("X1-positive", &space, x1, opts)?;
    let p2 = positivity("X2-positive", &space, x2, opts)?;
    Ok(Assembly { space, lmis: vec![small_gain, perf, p1, p2] })
}

/// The `X1` part of [`assemble_theorem2`] on its own: small-gain condition
/// and `X1 > 0`. It involves neither the gain nor the precisions.
pub fn assemble_lft_small_gain(plant: &LftPlant, opts: &LmiOptions) -> Result<Assembly> {
    let mut space = DecisionVariableSpace::new();
    let x1 = space.add_symmetric(X1, plant.n_states())?;
    let small_gain = lft_small_gain(&space, x1, plant, opts)?;
    let p1 = positivity("X1-positive", &space, x1, opts)?;
    Ok(Assembly { space, lmis: vec![small_gain, p1] })
}

/// The `(X2, Y, beta)` part of [`assemble_theorem2`]: performance condition and `X2 > 0`.
pub fn assemble_lft_performance(plant: &LftPlant, gamma: f64, opts: &LmiOptions) -> Result<Assembly> {
    check_gamma(gamma)?;
    let mut space = DecisionVariableSpace::new();
    let x2 = space.add_symmetric(X2, plant.n_states())?;
    let y = space.add_full(Y, plant.n_states(), plant.n_sensors())?;
    let beta = space.add_nonneg_vector(BETA, plant.n_sensors(), opts.beta_min)?;
    let perf = lft_performance(&space, (x2, y, beta), plant, gamma, opts)?;
    let p2 = positivity("X2-positive", &space, x2, opts)?;
    Ok(Assembly { space, lmis: vec![perf, p2] })
}

/// Bounded-real inequality `[XA + A^T X + C^T C, XB + C^T D; *, D^T D - g^2 I] < 0`
/// with `X > 0`.
pub fn assemble_bounded_real(ss: &StateSpace, gamma: f64, opts: &LmiOptions) -> Result<Assembly> {
    check_gamma(gamma)?;
    let n = ss.n_states();
    let m = ss.n_inputs();
    let mut space = DecisionVariableSpace::new();
    let x = space.add_symmetric(X, n)?;
    let blocks = vec![
        ((0, 0), AffineExpr::var_times(&space, x, &ss.a)?.sym()?.plus_const(&(ss.c.transpose() * &ss.c))?),
        ((0, 1), AffineExpr::var_times(&space, x, &ss.b)?.plus_const(&(ss.c.transpose() * &ss.d))?),
        ((1, 1), AffineExpr::constant(ss.d.transpose() * &ss.d - gamma * gamma * eye(m))),
    ];
    let main = AffineMatrixInequality::from_blocks("bounded-real", &space, &[n, m], blocks, opts.margin_scale)?;
    let pos = positivity("X-positive", &space, x, opts)?;
    Ok(Assembly { space, lmis: vec![main, pos] })
}

/// Robust bounded-real inequality on a structured error system, taking
/// `B = B~ S~`, `C = C~`, `D = 0` and the tiled uncertainty factors.
/// Variables `X, delta1, delta2`.
pub fn assemble_robust_bounded_real(err: &ErrorSystem, gamma: f64, opts: &LmiOptions) -> Result<Assembly> {
    check_gamma(gamma)?;
    if err.kind != ErrorSystemKind::Structured {
        return Err(Error::InvalidArgument("robust bounded-real LMI needs a structured error system".into()));
    }
    let t = err.tiled.as_ref().ok_or_else(|| Error::InvalidArgument("missing tiled uncertainty".into()))?;
    let ss = err.state_space();
    let n = ss.n_states();
    let m = ss.n_inputs();
    let use_a = !(t.m1.iter().all(|&v| v == 0.0) || t.n1.iter().all(|&v| v == 0.0));
    let use_b = !(t.m2.iter().all(|&v| v == 0.0) || t.n2.iter().all(|&v| v == 0.0));

    let mut space = DecisionVariableSpace::new();
    let x = space.add_symmetric(X, n)?;
    let d1 = if use_a { Some(space.add_nonneg_scalar(DELTA1, opts.delta_min)?) } else { None };
    let d2 = if use_b { Some(space.add_nonneg_scalar(DELTA2, opts.delta_min)?) } else { None };

    let mut sizes = vec![n, m];
    let mut z = AffineExpr::var_times(&space, x, &ss.a)?.sym()?.plus_const(&(ss.c.transpose() * &ss.c))?;
    if let Some(d1) = d1 {
        z = z.plus(AffineExpr::scalar_times(&space, d1, &(t.n1.transpose() * &t.n1))?)?;
    }
    let mut w = AffineExpr::constant(ss.d.transpose() * &ss.d - gamma * gamma * eye(m));
    if let Some(d2) = d2 {
        w = w.plus(AffineExpr::scalar_times(&space, d2, &(t.n2.transpose() * &t.n2))?)?;
    }
    let mut blocks = vec![
        ((0, 0), z),
        ((0, 1), AffineExpr::var_times(&space, x, &ss.b)?.plus_const(&(ss.c.transpose() * &ss.d))?),
        ((1, 1), w),
    ];
    for (d, mi) in [(d1, &t.m1), (d2, &t.m2)] {
        if let Some(d) = d {
            let k = sizes.len();
            sizes.push(mi.ncols());
            blocks.push(((0, k), AffineExpr::var_times(&space, x, mi)?));
            blocks.push(((k, k), AffineExpr::scalar_times(&space, d, &(-eye(mi.ncols())))?));
        }
    }
    let main = AffineMatrixInequality::from_blocks("robust-bounded-real", &space, &sizes, blocks, opts.margin_scale)?;
    let pos = positivity("X-positive", &space, x, opts)?;
    Ok(Assembly { space, lmis: vec![main, pos] })
}

/// Evaluate an inequality at `v`: the matrix and its largest eigenvalue.
pub fn evaluate_lmi(lmi: &AffineMatrixInequality, v: &DVector<f64>) -> Result<(Mat, f64)> {
    lmi.evaluate(v)
}
