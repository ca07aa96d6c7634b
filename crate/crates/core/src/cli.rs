//! Command-line front end: TOML run configurations, the `design`, `verify`
//! and `sweep` verbs, and JSON/CSV result files.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 infeasible design,
//! 3 certification failure, 4 solver failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{certify_structured, verify_lft, Certification};
use crate::design::{design_lft, design_structured, DesignOptions, DesignResult, IterationRecord};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::sdp::SolveStatus;
use crate::smd::{self, BenchmarkKind, SmdConfig, SweepParam, SweepPoint};
use crate::system_model::{AffineUncertainty, DeltaStructure, LftPlant, ObserverGain, PrecisionVector, StateSpaceModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_CERTIFICATION: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "sparse-hinf", version, about = "Sparse robust H-infinity observer design and certification")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Design an observer at the configured level and certify it.
    Design(Common),
    /// Certify a previously designed observer against the configured plant.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Design file; defaults to `design.json` in the output directory.
        #[arg(long)]
        design: Option<PathBuf>,
    },
    /// Design and certify over a grid of levels or uncertainty magnitudes.
    Sweep(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of random uncertainty samples (overrides the config).
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

/// Dense matrix given row-major with explicit dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixSpec {
    pub fn to_mat(&self, name: &str) -> Result<Mat> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Config(format!(
                "matrix {name}: {} entries given for {}x{}",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(Mat::from_row_slice(self.rows, self.cols, &self.data))
    }

    pub fn from_mat(m: &Mat) -> Self {
        Self { rows: m.nrows(), cols: m.ncols(), data: m.transpose().iter().copied().collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Structured,
    Lft,
    SmdStructured,
    SmdLft,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a: MatrixSpec,
    pub b_d: MatrixSpec,
    pub c_y: MatrixSpec,
    pub d_d: MatrixSpec,
    pub c_z: MatrixSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySection {
    pub m1: MatrixSpec,
    pub n1: MatrixSpec,
    pub m2: MatrixSpec,
    pub n2: MatrixSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LftSection {
    pub a: MatrixSpec,
    pub b_delta: MatrixSpec,
    pub b_d: MatrixSpec,
    pub c_delta: MatrixSpec,
    pub e_delta: MatrixSpec,
    pub e_d: MatrixSpec,
    pub c_y: MatrixSpec,
    pub d_delta: MatrixSpec,
    pub d_d: MatrixSpec,
    pub c_z: MatrixSpec,
    pub delta_structure: DeltaStructure,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmdSection {
    pub s_d: [f64; 3],
    pub c0: f64,
    pub c1: f64,
    #[serde(default)]
    pub c2: f64,
}

/// Overrides of [`DesignOptions`]; absent fields keep the defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub epsilon_reweight: Option<f64>,
    pub max_reweight_iters: Option<usize>,
    pub convergence_tol: Option<f64>,
    pub prune_rel: Option<f64>,
    pub prune_abs: Option<f64>,
    pub centering_slack: Option<f64>,
    pub beta_min: Option<f64>,
    pub delta_min: Option<f64>,
    pub margin_scale: Option<f64>,
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub max_iter: Option<usize>,
    /// Bisection bracket for the feasibility frontier reported on
    /// infeasibility; defaults to `[gamma, 10 max(1, gamma)]`.
    pub frontier_bracket: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    /// Run the robust bounded-real LMI on structured designs.
    #[serde(default = "default_true")]
    pub lmi_check: bool,
}

fn default_samples() -> usize {
    200
}

fn default_true() -> bool {
    true
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { n_samples: default_samples(), lmi_check: true }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kind: ProblemKind,
    pub seed: Option<u64>,
    /// Design level; for `c0` sweeps, the fixed level.
    pub gamma: Option<f64>,
    pub plant: Option<PlantSection>,
    pub uncertainty: Option<UncertaintySection>,
    pub lft: Option<LftSection>,
    pub smd: Option<SmdSection>,
    #[serde(default)]
    pub design: DesignSection,
    #[serde(default)]
    pub verify: VerifySection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        let present = [
            ("plant", self.plant.is_some()),
            ("uncertainty", self.uncertainty.is_some()),
            ("lft", self.lft.is_some()),
            ("smd", self.smd.is_some()),
        ];
        let needed: &[&str] = match self.kind {
            ProblemKind::Structured => &["plant", "uncertainty"],
            ProblemKind::Lft => &["lft"],
            ProblemKind::SmdStructured | ProblemKind::SmdLft => &["smd"],
        };
        for (name, here) in present {
            match (needed.contains(&name), here) {
                (true, false) => return Err(Error::Config(format!("section [{name}] is required for this kind"))),
                (false, true) => return Err(Error::Config(format!("section [{name}] does not belong to this kind"))),
                _ => {}
            }
        }
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::Config(format!("gamma must be positive, got {g}")));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::Config("sweep.values must not be empty".into()));
            }
            if s.param == SweepParam::C0 && !matches!(self.kind, ProblemKind::SmdStructured | ProblemKind::SmdLft) {
                return Err(Error::Config("c0 sweeps need an smd-structured or smd-lft kind".into()));
            }
        }
        Ok(())
    }

    pub fn design_options(&self, gamma: f64) -> Result<DesignOptions> {
        let d = &self.design;
        let mut o = DesignOptions::default();
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = d.$src { o.$($dst).+ = v; })*
            };
        }
        set!(
            epsilon_reweight => epsilon_reweight,
            max_reweight_iters => max_reweight_iters,
            convergence_tol => convergence_tol,
            prune_rel => prune_rel,
            prune_abs => prune_abs,
            centering_slack => centering_slack,
            beta_min => lmi.beta_min,
            delta_min => lmi.delta_min,
            margin_scale => lmi.margin_scale,
            abs_tol => solver.abs_tol,
            rel_tol => solver.rel_tol,
            max_iter => solver.max_iter,
        );
        let [lo, hi] = d.frontier_bracket.unwrap_or([gamma, 10.0 * gamma.max(1.0)]);
        o.frontier_bracket = Some((lo, hi));
        o.rng_seed = self.seed.unwrap_or(0);
        o.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(o)
    }

    fn require_gamma(&self) -> Result<f64> {
        self.gamma.ok_or_else(|| Error::Config("gamma is required".into()))
    }

    fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("a seed is required for verification (config `seed` or --seed)".into()))
    }
}

/// A configured plant ready for design and certification.
#[derive(Debug, Clone)]
pub enum Problem {
    Structured { model: StateSpaceModel, unc: AffineUncertainty },
    Lft(LftPlant),
    Smd(SmdConfig),
}

impl Problem {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let missing = |s: &str| Error::Config(format!("section [{s}] is missing"));
        match cfg.kind {
            ProblemKind::Structured => {
                let p = cfg.plant.as_ref().ok_or_else(|| missing("plant"))?;
                let u = cfg.uncertainty.as_ref().ok_or_else(|| missing("uncertainty"))?;
                let model = StateSpaceModel::new(
                    p.a.to_mat("a")?,
                    p.b_d.to_mat("b_d")?,
                    p.c_y.to_mat("c_y")?,
                    p.d_d.to_mat("d_d")?,
                    p.c_z.to_mat("c_z")?,
                )?;
                let unc = AffineUncertainty::new(u.m1.to_mat("m1")?, u.n1.to_mat("n1")?, u.m2.to_mat("m2")?, u.n2.to_mat("n2")?)?;
                unc.check_against(&model)?;
                Ok(Self::Structured { model, unc })
            }
            ProblemKind::Lft => {
                let l = cfg.lft.as_ref().ok_or_else(|| missing("lft"))?;
                let plant = LftPlant {
                    a: l.a.to_mat("a")?,
                    b_delta: l.b_delta.to_mat("b_delta")?,
                    b_d: l.b_d.to_mat("b_d")?,
                    c_delta: l.c_delta.to_mat("c_delta")?,
                    e_delta: l.e_delta.to_mat("e_delta")?,
                    e_d: l.e_d.to_mat("e_d")?,
                    c_y: l.c_y.to_mat("c_y")?,
                    d_delta: l.d_delta.to_mat("d_delta")?,
                    d_d: l.d_d.to_mat("d_d")?,
                    c_z: l.c_z.to_mat("c_z")?,
                    delta_structure: l.delta_structure,
                }
                .validate()?;
                Ok(Self::Lft(plant))
            }
            ProblemKind::SmdStructured | ProblemKind::SmdLft => {
                let s = cfg.smd.as_ref().ok_or_else(|| missing("smd"))?;
                let kind = if cfg.kind == ProblemKind::SmdLft { BenchmarkKind::Lft } else { BenchmarkKind::Structured };
                let smd = SmdConfig {
                    kind,
                    s_d: s.s_d,
                    c0: s.c0,
                    c1: s.c1,
                    c2: s.c2,
                    n_samples: cfg.verify.n_samples,
                    seed: cfg.seed.unwrap_or(0),
                    lmi_check: cfg.verify.lmi_check,
                };
                // surface bad magnitudes as configuration errors
                match kind {
                    BenchmarkKind::Structured => {
                        smd::smd_nominal(&smd.s_d)?;
                        smd::smd_affine(smd.c0, smd.c1, smd.c2)?;
                    }
                    BenchmarkKind::Lft => {
                        smd::smd_lft(smd.c0, smd.c1, &smd.s_d)?;
                    }
                }
                Ok(Self::Smd(smd))
            }
        }
    }

    pub fn design(&self, gamma: f64, opts: &DesignOptions) -> Result<DesignResult> {
        match self {
            Self::Structured { model, unc } => design_structured(model, unc, gamma, opts),
            Self::Lft(plant) => design_lft(plant, gamma, opts),
            Self::Smd(cfg) => match cfg.kind {
                BenchmarkKind::Structured => {
                    design_structured(&smd::smd_nominal(&cfg.s_d)?, &smd::smd_affine(cfg.c0, cfg.c1, cfg.c2)?, gamma, opts)
                }
                BenchmarkKind::Lft => design_lft(&smd::smd_lft(cfg.c0, cfg.c1, &cfg.s_d)?, gamma, opts),
            },
        }
    }

    pub fn certify(
        &self,
        result: &DesignResult,
        gamma: f64,
        verify: &VerifySection,
        seed: u64,
        opts: &DesignOptions,
    ) -> Result<Certification> {
        let lmi = verify.lmi_check.then_some((&opts.lmi, &opts.solver));
        match self {
            Self::Structured { model, unc } => certify_structured(model, unc, result, gamma, verify.n_samples, seed, lmi),
            Self::Lft(plant) => Ok(Certification::Lft(verify_lft(plant, result, gamma, verify.n_samples, seed)?)),
            Self::Smd(cfg) => match cfg.kind {
                BenchmarkKind::Structured => {
                    let model = smd::smd_nominal(&cfg.s_d)?;
                    let unc = smd::smd_affine(cfg.c0, cfg.c1, cfg.c2)?;
                    certify_structured(&model, &unc, result, gamma, verify.n_samples, seed, lmi)
                }
                BenchmarkKind::Lft => {
                    let plant = smd::smd_lft(cfg.c0, cfg.c1, &cfg.s_d)?;
                    Ok(Certification::Lft(verify_lft(&plant, result, gamma, verify.n_samples, seed)?))
                }
            },
        }
    }

    fn n_sensors(&self) -> usize {
        match self {
            Self::Structured { model, .. } => model.n_sensors(),
            Self::Lft(plant) => plant.n_sensors(),
            Self::Smd(_) => 6,
        }
    }
}

/// JSON document written by `design` and read back by `verify`.
#[derive(Debug, Clone, Serialize)]
pub struct DesignDocument {
    pub kind: ProblemKind,
    pub gamma: f64,
    pub active_sensors: Vec<usize>,
    pub beta: Vec<f64>,
    pub gain: MatrixSpec,
    pub iterations: Vec<IterationRecord>,
    pub solver_statuses: Vec<SolveStatus>,
    pub first_iteration_active: usize,
    pub restored: Vec<usize>,
    pub lmi_residual: f64,
    pub gain_residual: f64,
    pub certification: Certification,
}

impl DesignDocument {
    pub fn new(kind: ProblemKind, result: &DesignResult, certification: Certification) -> Self {
        Self {
            kind,
            gamma: result.gamma,
            active_sensors: result.precision.active_indices(),
            beta: result.precision.beta().to_vec(),
            gain: MatrixSpec::from_mat(result.gain.matrix()),
            solver_statuses: result.history.iter().map(|r| r.status).collect(),
            iterations: result.history.clone(),
            first_iteration_active: result.first_iteration_active,
            restored: result.restored.clone(),
            lmi_residual: result.lmi_residual,
            gain_residual: result.gain_residual,
            certification,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct InfeasibleDocument {
    kind: ProblemKind,
    gamma: f64,
    status: &'static str,
    frontier: Option<f64>,
}

/// The fields of a design document needed to rebuild the observer.
#[derive(Debug, Clone, Deserialize)]
pub struct StoredDesign {
    pub gamma: f64,
    pub active_sensors: Vec<usize>,
    pub beta: Vec<f64>,
    pub gain: MatrixSpec,
}

impl StoredDesign {
    pub fn to_result(&self) -> Result<DesignResult> {
        let n = self.beta.len();
        let mut active = vec![false; n];
        for &i in &self.active_sensors {
            *active.get_mut(i).ok_or_else(|| Error::Dimension(format!("active sensor {i} out of range")))? = true;
        }
        let precision = PrecisionVector::new(self.beta.clone(), active, 0.0)?;
        let gain = ObserverGain::new(self.gain.to_mat("gain")?)?;
        if gain.matrix().ncols() != n {
            return Err(Error::Dimension(format!("gain has {} columns for {n} sensors", gain.matrix().ncols())));
        }
        Ok(DesignResult {
            active_count: precision.active_count(),
            gain,
            precision,
            gamma: self.gamma,
            history: Vec::new(),
            refined: false,
            first_iteration_active: 0,
            restored: Vec::new(),
            lmi_residual: f64::NAN,
            gain_residual: f64::NAN,
            y_max: f64::NAN,
        })
    }
}

/// Tri-state sensor flag of the sweep CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActiveFlag {
    #[serde(rename = "1")]
    Active,
    #[serde(rename = "0")]
    Inactive,
    /// The sweep point produced no design.
    #[serde(rename = "NA")]
    NotAvailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_param: SweepParam,
    pub sweep_value: f64,
    pub sensor_index: usize,
    pub active: ActiveFlag,
    pub beta: Option<f64>,
    pub certified: bool,
    pub worst_norm: Option<f64>,
}

/// One row per (point, sensor), sorted by sweep value then sensor index.
pub fn sweep_rows(points: &[SweepPoint], n_sensors: usize) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(points.len() * n_sensors);
    for p in points {
        for i in 0..n_sensors {
            rows.push(match &p.outcome {
                Ok((r, c)) => SweepRow {
                    sweep_param: p.param,
                    sweep_value: p.value,
                    sensor_index: i,
                    active: if r.precision.active()[i] { ActiveFlag::Active } else { ActiveFlag::Inactive },
                    beta: Some(r.precision.beta()[i]),
                    certified: c.passed(),
                    worst_norm: Some(c.worst_norm()).filter(|w| w.is_finite()),
                },
                Err(_) => SweepRow {
                    sweep_param: p.param,
                    sweep_value: p.value,
                    sensor_index: i,
                    active: ActiveFlag::NotAvailable,
                    beta: None,
                    certified: false,
                    worst_norm: None,
                },
            });
        }
    }
    rows.sort_by(|a, b| a.sweep_value.total_cmp(&b.sweep_value).then(a.sensor_index.cmp(&b.sensor_index)));
    rows
}

pub fn write_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, Serialize)]
struct PointDocument {
    param: SweepParam,
    value: f64,
    gamma: f64,
    c0: f64,
    status: &'static str,
    active_count: Option<usize>,
    active_sensors: Option<Vec<usize>>,
    frontier: Option<f64>,
    error: Option<String>,
    certification: Option<Certification>,
}

impl PointDocument {
    fn new(p: &SweepPoint) -> Self {
        let mut doc = Self {
            param: p.param,
            value: p.value,
            gamma: p.gamma,
            c0: p.c0,
            status: "certified",
            active_count: None,
            active_sensors: None,
            frontier: None,
            error: None,
            certification: None,
        };
        match &p.outcome {
            Ok((r, c)) => {
                doc.status = if c.passed() { "certified" } else { "certification-failed" };
                doc.active_count = Some(r.active_count);
                doc.active_sensors = Some(r.precision.active_indices());
                doc.certification = Some(c.clone());
            }
            Err(Error::Infeasible { frontier, .. }) => {
                doc.status = "infeasible";
                doc.frontier = *frontier;
            }
            Err(e) => {
                doc.status = "failed";
                doc.error = Some(e.to_string());
            }
        }
        doc
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Infeasible { .. } => EXIT_INFEASIBLE,
        Error::Solver(_) | Error::Bisection(_) | Error::EigenFailure | Error::NotPositiveDefinite(_) => EXIT_SOLVER,
        _ => EXIT_USAGE,
    }
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
    quiet: bool,
}

impl Context {
    fn new(common: &Common) -> Result<Self> {
        let mut cfg = RunConfig::load(&common.config)?;
        if let Some(s) = common.seed {
            cfg.seed = Some(s);
        }
        if let Some(n) = common.samples {
            cfg.verify.n_samples = n;
        }
        let out = common.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&out)?;
        Ok(Self { cfg, out, quiet: common.quiet })
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.out.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

fn cmd_design(common: &Common) -> Result<i32> {
    let ctx = Context::new(common)?;
    let gamma = ctx.cfg.require_gamma()?;
    let seed = ctx.cfg.require_seed()?;
    let opts = ctx.cfg.design_options(gamma)?;
    let problem = Problem::from_config(&ctx.cfg)?;
    let result = match problem.design(gamma, &opts) {
        Ok(r) => r,
        Err(Error::Infeasible { gamma, frontier }) => {
            let doc = InfeasibleDocument { kind: ctx.cfg.kind, gamma, status: "infeasible", frontier };
            let path = ctx.write_json("design.json", &doc)?;
            match frontier {
                Some(f) => ctx.say(format!("gamma = {gamma} is infeasible; smallest feasible gamma found: {f}")),
                None => ctx.say(format!("gamma = {gamma} is infeasible")),
            }
            ctx.say(format!("wrote {}", path.display()));
            return Ok(EXIT_INFEASIBLE);
        }
        Err(e) => return Err(e),
    };
    let cert = problem.certify(&result, gamma, &ctx.cfg.verify, seed, &opts)?;
    let passed = cert.passed();
    let doc = DesignDocument::new(ctx.cfg.kind, &result, cert);
    let path = ctx.write_json("design.json", &doc)?;
    ctx.say(format!(
        "gamma = {gamma}: {} active sensors {:?}, certification {}",
        result.active_count,
        doc.active_sensors,
        if passed { "passed" } else { "FAILED" }
    ));
    ctx.say(format!("wrote {}", path.display()));
    Ok(if passed { EXIT_OK } else { EXIT_CERTIFICATION })
}

fn cmd_verify(common: &Common, design: Option<&Path>) -> Result<i32> {
    let ctx = Context::new(common)?;
    let seed = ctx.cfg.require_seed()?;
    let path = design.map(Path::to_path_buf).unwrap_or_else(|| ctx.out.join("design.json"));
    let text = fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let stored: StoredDesign =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let result = stored.to_result()?;
    let gamma = ctx.cfg.gamma.unwrap_or(stored.gamma);
    let opts = ctx.cfg.design_options(gamma)?;
    let problem = Problem::from_config(&ctx.cfg)?;
    if result.precision.len() != problem.n_sensors() {
        return Err(Error::Dimension(format!(
            "design has {} sensors, plant has {}",
            result.precision.len(),
            problem.n_sensors()
        )));
    }
    let cert = problem.certify(&result, gamma, &ctx.cfg.verify, seed, &opts)?;
    let out = ctx.write_json("report.json", &cert)?;
    ctx.say(format!(
        "gamma = {gamma}: worst norm {:.6}, nominal {:.6}, certification {}",
        cert.worst_norm(),
        cert.nominal_norm(),
        if cert.passed() { "passed" } else { "FAILED" }
    ));
    ctx.say(format!("wrote {}", out.display()));
    Ok(if cert.passed() { EXIT_OK } else { EXIT_CERTIFICATION })
}

fn cmd_sweep(common: &Common) -> Result<i32> {
    let ctx = Context::new(common)?;
    let seed = ctx.cfg.require_seed()?;
    let sweep = ctx.cfg.sweep.clone().ok_or_else(|| Error::Config("section [sweep] is required".into()))?;
    let problem = Problem::from_config(&ctx.cfg)?;
    let points: Vec<SweepPoint> = match (&problem, sweep.param) {
        (Problem::Smd(cfg), SweepParam::Gamma) => {
            let opts = ctx.cfg.design_options(sweep.values[0])?;
            smd::sweep_gamma(&SmdConfig { seed, ..cfg.clone() }, &opts, &sweep.values)
        }
        (Problem::Smd(cfg), SweepParam::C0) => {
            let gamma = ctx.cfg.require_gamma()?;
            let opts = ctx.cfg.design_options(gamma)?;
            smd::sweep_uncertainty(&SmdConfig { seed, ..cfg.clone() }, &opts, gamma, &sweep.values)
        }
        (_, SweepParam::Gamma) => sweep
            .values
            .iter()
            .enumerate()
            .map(|(k, &gamma)| {
                let outcome = ctx.cfg.design_options(gamma).and_then(|opts| {
                    let r = problem.design(gamma, &opts)?;
                    let c = problem.certify(&r, gamma, &ctx.cfg.verify, seed.wrapping_add(k as u64), &opts)?;
                    Ok((r, c))
                });
                SweepPoint { param: SweepParam::Gamma, value: gamma, gamma, c0: f64::NAN, outcome }
            })
            .collect(),
        (_, SweepParam::C0) => return Err(Error::Config("c0 sweeps need an smd kind".into())),
    };

    for p in &points {
        match &p.outcome {
            Ok((r, c)) => ctx.say(format!(
                "{} = {}: {} active, certification {}",
                p.param.as_str(),
                p.value,
                r.active_count,
                if c.passed() { "passed" } else { "FAILED" }
            )),
            Err(e) => ctx.say(format!("{} = {}: {e}", p.param.as_str(), p.value)),
        }
    }
    let csv_path = ctx.out.join("sweep.csv");
    write_csv(&csv_path, &sweep_rows(&points, problem.n_sensors()))?;
    let docs: Vec<PointDocument> = points.iter().map(PointDocument::new).collect();
    let json_path = ctx.write_json("sweep.json", &docs)?;
    ctx.say(format!("wrote {} and {}", csv_path.display(), json_path.display()));

    let failed_cert = points.iter().any(|p| matches!(&p.outcome, Ok((_, c)) if !c.passed()));
    let infeasible = points.iter().any(|p| matches!(p.outcome, Err(Error::Infeasible { .. })));
    let broken = points.iter().any(|p| matches!(&p.outcome, Err(e) if !matches!(e, Error::Infeasible { .. })));
    Ok(if failed_cert {
        EXIT_CERTIFICATION
    } else if infeasible {
        EXIT_INFEASIBLE
    } else if broken {
        EXIT_SOLVER
    } else {
        EXIT_OK
    })
}

/// Parse arguments, run the verb and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match &cli.verb {
        Verb::Design(c) => cmd_design(c),
        Verb::Verify { common, design } => cmd_verify(common, design.as_deref()),
        Verb::Sweep(c) => cmd_sweep(c),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code_for(&e)
    })
}
