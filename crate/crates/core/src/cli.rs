//! Command-line front end. Exit codes: 0 success, 1 a non-vacuous check failed, 2 usage or run error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::freelaw::{
    boundary_curves, critical_points, edge_bound_constant, law_constants, m_ac, quadrant_map, Curve, MRect, UHPoint,
};
use crate::io::{fmt17, pair_from_text, pair_to_text, to_json, write_atomic, Csv};
use crate::linalg::{c, C64};
use crate::linearize::{
    apriori_bound, basic_identities, build_linearization, factorization_residual, generalized_resolvent,
    generalized_resolvent_direct, key_identity_residual, resolvent_stats_minor, schur_identity_residual, spread_bound,
    xw_norms, StatsMethod,
};
use crate::locallaw::{
    delocalization_check, diagonal_consistency, empirical_k, empirical_k_grid, figure1_data, k_tail_estimate,
    semicircle_locallaw, verify_gizmo, GizmoConfig, GridSpec, SemicircleConfig,
};
use crate::sdcore::sd_point_report;
use crate::tails::{quad_tail_check, whittle_check, QuadTailConfig, WhittleMode};
use crate::wigner::{sample_pair, EnsembleSpec, EntryLaw, WignerPair};

pub const THREADS_ENV: &str = "ANTICOMM_THREADS";

#[derive(Parser, Debug)]
#[command(name = "anticomm", version, about = "Local law toolkit for the anticommutator of Wigner matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Stieltjes transform of the limiting law on a grid
    Law(LawArgs),
    /// Quadrant diagram of (m^2+1)/(m^3-m) and its boundary curves
    Figure2(Figure2Args),
    /// Schwinger-Dyson solution, kappa blocks and deformation steps on a grid
    Sd(SdArgs),
    /// Linearization and generalized resolvent identities for one sampled pair
    LinearizeCheck(LinearizeArgs),
    /// Deterministic local-law implication with the constructed K
    Verify(VerifyArgs),
    /// Local semicircle law for U of a sampled pair
    Semicircle(SemicircleArgs),
    /// Eigenvector delocalization bounds
    Deloc(DelocArgs),
    /// Closest permissible approach curves sigma(lambda)
    Figure1(Figure1Args),
    /// Moment and tail toolbox checks
    Tails(TailsArgs),
    /// Sample a Wigner pair and dump it
    Sample(SampleArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Schur,
    Minor,
}

impl From<MethodArg> for StatsMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Schur => StatsMethod::Schur,
            MethodArg::Minor => StatsMethod::Minor,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PairArgs {
    /// matrix size
    #[arg(long = "N", short = 'N', default_value_t = 64)]
    pub n: usize,
    /// complex-gaussian (gaussian, gue), real-gaussian (goe), rademacher, uniform-bounded, heavy-tailed
    #[arg(long, default_value = "gaussian")]
    pub ensemble: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// read the pair from a dump written by `sample` instead of sampling
    #[arg(long)]
    pub pair: Option<PathBuf>,
}

impl PairArgs {
    fn load(&self) -> Result<WignerPair> {
        match &self.pair {
            Some(p) => pair_from_text(&std::fs::read_to_string(p)?),
            None => {
                let law: EntryLaw = self.ensemble.parse()?;
                Ok(sample_pair(&EnsembleSpec::new(self.n, law, self.seed)?))
            }
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LawArgs {
    /// `default` or `re_min:re_max:n_re,im_min:im_max:n_im[,lin]`
    #[arg(long, default_value = "default")]
    pub z_grid: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Figure2Args {
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub re_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub re_max: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub im_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub im_max: f64,
    #[arg(long, default_value_t = 201)]
    pub n_re: usize,
    #[arg(long, default_value_t = 101)]
    pub n_im: usize,
    /// cells within this distance of 0, 1, -1 are labelled `pole`
    #[arg(long, default_value_t = 1e-3)]
    pub exclusion: f64,
    /// samples per branch of each boundary curve
    #[arg(long, default_value_t = 200)]
    pub curve_samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SdArgs {
    #[arg(long, default_value = "-4:4:9,0.1:2:5")]
    pub z_grid: String,
    /// size of the deformation step, capped at half the admissible size
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LinearizeArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// spectral parameter `re,im`
    #[arg(long, default_value = "0.5,0.5", allow_hyphen_values = true)]
    pub z: String,
    /// number of indices in the explicit minor checks
    #[arg(long, default_value_t = 4)]
    pub indices: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long, default_value_t = 8.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// edge constant: a number, or `auto` for the empirical estimator of the limiting law
    #[arg(long = "c", default_value = "auto")]
    pub c_config: String,
    /// spacing of the net used for K
    #[arg(long, default_value_t = 2.0)]
    pub spacing: f64,
    #[arg(long, default_value = "default")]
    pub z_grid: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Schur)]
    pub method: MethodArg,
    /// constant of the Lipschitz budget
    #[arg(long, default_value_t = 1.0)]
    pub lipschitz_c: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SemicircleArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long, default_value_t = 20.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    #[arg(long, default_value = "-1:1:11,0.05:1:6")]
    pub z_grid: String,
    /// every k-th index enters the explicit identity check
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DelocArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// K; defaults to the self-consistent empirical value
    #[arg(long = "K")]
    pub k: Option<f64>,
    #[arg(long = "c", default_value_t = 1.0)]
    pub c_config: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Figure1Args {
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.02,0.002,0.0002")]
    pub rho: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TailsArgs {
    /// real-valued entry law (real-gaussian, rademacher, uniform-bounded)
    #[arg(long, default_value = "real-gaussian")]
    pub law: String,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, default_value_t = 4.0)]
    pub p: f64,
    #[arg(long, default_value_t = 20000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// also estimate the tail of K/theta over this many sampled pairs of size `--k-n`
    #[arg(long, default_value_t = 0)]
    pub k_samples: usize,
    #[arg(long, default_value_t = 32)]
    pub k_n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a C,
    passed: bool,
    report: R,
}

/// Outcome of a subcommand: the bytes to emit and whether every non-vacuous check passed.
struct Output {
    bytes: String,
    passed: bool,
}

fn envelope<R: Serialize>(cmd: &Command, passed: bool, report: R) -> Result<Output> {
    let bytes = to_json(&Envelope { tool: "anticomm", version: crate::VERSION, command: cmd, passed, report })?;
    Ok(Output { bytes, passed })
}

pub fn parse_z(s: &str) -> Result<C64> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Invalid(format!("expected `re,im`, got '{s}'")));
    }
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| Error::Invalid(format!("'{t}': {e}")));
    let z = c(p(parts[0])?, p(parts[1])?);
    UHPoint::new(z)?;
    Ok(z)
}

/// `re_min:re_max:n_re,im_min:im_max:n_im[,lin|log]`
pub fn parse_grid(s: &str, default: GridSpec) -> Result<GridSpec> {
    if s == "default" {
        return Ok(default);
    }
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(Error::Invalid(format!("bad grid '{s}'")));
    }
    let axis = |t: &str| -> Result<(f64, f64, usize)> {
        let f: Vec<&str> = t.split(':').collect();
        if f.len() != 3 {
            return Err(Error::Invalid(format!("bad grid axis '{t}'")));
        }
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| Error::Invalid(format!("'{x}': {e}")));
        let cnt = f[2].trim().parse::<usize>().map_err(|e| Error::Invalid(format!("'{}': {e}", f[2])))?;
        Ok((num(f[0])?, num(f[1])?, cnt))
    };
    let (re_min, re_max, n_re) = axis(parts[0])?;
    let (im_min, im_max, n_im) = axis(parts[1])?;
    let log_im = match parts.get(2).map(|x| x.trim()) {
        None | Some("log") => true,
        Some("lin") => false,
        Some(o) => return Err(Error::Invalid(format!("axis scale must be lin or log, got '{o}'"))),
    };
    let g = GridSpec { re_min, re_max, n_re, im_min, im_max, n_im, log_im };
    g.validate()?;
    Ok(g)
}

fn law_default_grid() -> GridSpec {
    GridSpec { re_min: -8.0, re_max: 8.0, n_re: 50, im_min: 1e-2, im_max: 8.0, n_im: 50, log_im: true }
}

/// Empirical edge constant of the limiting law on a fixed grid.
pub fn auto_edge_constant() -> Result<f64> {
    let g = GridSpec { re_min: -8.0, re_max: 8.0, n_re: 161, im_min: 1e-3, im_max: 8.0, n_im: 40, log_im: true };
    edge_bound_constant(&g.points())
}

fn run_law(cmd: &Command, a: &LawArgs) -> Result<Output> {
    let grid = parse_grid(&a.z_grid, law_default_grid())?;
    let pts = grid.points().into_iter().map(|z| m_ac(UHPoint::new(z)?)).collect::<Result<Vec<_>>>()?;
    let passed = pts.iter().all(|p| {
        p.residual <= 1e-10 * (1.0 + p.z.norm()) * p.m.norm().max(1.0).powi(3)
            && p.m.im > 0.0
            && p.m.norm() <= 1f64.min(4.0 / p.z.im) * (1.0 + 1e-12)
    });
    match a.format {
        Format::Csv => {
            let mut csv = Csv::new(&["re_z", "im_z", "re_m", "im_m", "h"]);
            for p in &pts {
                csv.num_row(&[p.z.re, p.z.im, p.m.re, p.m.im, p.h]);
            }
            Ok(Output { bytes: csv.finish(), passed })
        }
        Format::Json => {
            #[derive(Serialize)]
            struct R<'a> {
                constants: crate::freelaw::LawConstants,
                points: &'a [crate::freelaw::LawPoint],
            }
            envelope(cmd, passed, R { constants: law_constants(), points: &pts })
        }
    }
}

fn run_figure2(a: &Figure2Args) -> Result<Output> {
    if a.n_re == 0 || a.n_im == 0 || !(a.exclusion >= 0.0) || a.re_min > a.re_max || a.im_min > a.im_max {
        return Err(Error::Invalid("bad figure2 rectangle".into()));
    }
    let rect = MRect { re_min: a.re_min, re_max: a.re_max, im_min: a.im_min, im_max: a.im_max };
    let mut csv = Csv::new(&["kind", "re_m", "im_m", "label"]);
    for cell in quadrant_map(rect, a.n_re, a.n_im, a.exclusion) {
        csv.row(&["cell".into(), fmt17(cell.m.re), fmt17(cell.m.im), cell.quadrant.label().into()]);
    }
    for (curve, m) in boundary_curves(a.curve_samples) {
        let kind = match curve {
            Curve::BigOval => "big_oval",
            Curve::LittleOval => "little_oval",
        };
        csv.row(&[kind.into(), fmt17(m.re), fmt17(m.im), String::new()]);
    }
    for (z, m) in critical_points() {
        csv.row(&["critical".into(), fmt17(m.re), fmt17(m.im), format!("z={};{}", fmt17(z.re), fmt17(z.im))]);
    }
    Ok(Output { bytes: csv.finish(), passed: true })
}

fn run_sd(cmd: &Command, a: &SdArgs) -> Result<Output> {
    if !(a.step > 0.0) {
        return Err(Error::Invalid("--step must be positive".into()));
    }
    let grid = parse_grid(&a.z_grid, GridSpec::default())?;
    let rows = grid
        .points()
        .into_iter()
        .map(|z| sd_point_report(UHPoint::new(z)?, a.step))
        .collect::<Result<Vec<_>>>()?;
    let passed = rows.iter().all(|r| {
        r.sd_residual <= 1e-10 && r.kappa_block_gap <= 1e-8 && r.det_mismatch <= 1e-10 && r.contraction <= 0.75
    });
    envelope(cmd, passed, rows)
}

fn run_linearize(cmd: &Command, a: &LinearizeArgs) -> Result<Output> {
    let pair = a.pair.load()?;
    let z = UHPoint::new(parse_z(&a.z)?)?;
    let lin = build_linearization(&pair);
    let n = lin.n;
    let idx: Vec<usize> = (0..a.indices.min(n)).map(|k| k * n / a.indices.min(n).max(1)).collect();
    let basic = basic_identities(&lin, z)?;
    let stats = resolvent_stats_minor(&lin, z, &idx)?;
    let full = crate::linearize::resolvent_stats_fast(&lin, z)?;
    let key = key_identity_residual(&stats)?;
    let schur = schur_identity_residual(&lin, z, &idx)?;
    let spread = spread_bound(&lin, z, &full)?;
    let (x_norm, w_norm, w_inv_norm, w_adj_norm) = xw_norms(&lin);
    let (scalar_dev, block_dev) = diagonal_consistency(&lin, z.z())?;
    let direct_gap = if n <= 64 {
        let r = generalized_resolvent(&lin, z)?;
        let d = generalized_resolvent_direct(&lin, z)?;
        Some(crate::linalg::max_abs(&(r - &d)) / crate::linalg::max_abs(&d))
    } else {
        None
    };
    #[derive(Serialize)]
    struct R {
        n: usize,
        z: [f64; 2],
        norm_u: f64,
        norm_v: f64,
        norm_ok: bool,
        factorization_residual: f64,
        basic: crate::linearize::BasicIdentityReport,
        direct_inverse_gap: Option<f64>,
        key_identity: f64,
        schur_identity: f64,
        spread_bound_holds: bool,
        x_norm: f64,
        w_norm: f64,
        w_inv_norm: f64,
        w_adj_norm: f64,
        g_deviation: f64,
        apriori_bound: f64,
        diag_deviation: f64,
        kfrak: f64,
    }
    let r = R {
        n,
        z: [z.z().re, z.z().im],
        norm_u: lin.u_norm,
        norm_v: lin.v_norm,
        norm_ok: lin.norm_ok,
        factorization_residual: factorization_residual(&lin, z.z()),
        basic,
        direct_inverse_gap: direct_gap,
        key_identity: key,
        schur_identity: schur,
        spread_bound_holds: spread.iter().all(|s| s.lhs <= s.rhs * (1.0 + 1e-9)),
        x_norm,
        w_norm,
        w_inv_norm,
        w_adj_norm,
        g_deviation: block_dev,
        apriori_bound: apriori_bound(&lin, z.z()),
        diag_deviation: scalar_dev,
        kfrak: full.kfrak,
    };
    let scale = lin.u_norm.max(lin.v_norm).max(1.0);
    let passed = r.factorization_residual <= 1e-12
        && r.basic.max() <= 1e-8
        && r.direct_inverse_gap.is_none_or(|g| g <= 1e-8)
        && r.key_identity <= 1e-8
        && r.schur_identity <= 1e-8
        && r.spread_bound_holds
        && r.g_deviation <= r.apriori_bound
        && r.diag_deviation <= r.g_deviation * (1.0 + 1e-12)
        && (r.w_norm - r.w_inv_norm).abs() <= 1e-8 * r.w_norm
        && (r.w_norm - r.w_adj_norm).abs() <= 1e-8 * r.w_norm
        && r.w_norm >= 1.0 - 1e-8
        && r.x_norm.max(r.w_norm) <= 8.0 * scale;
    envelope(cmd, passed, r)
}

fn resolve_c(s: &str) -> Result<f64> {
    if s == "auto" {
        return auto_edge_constant();
    }
    let v = s.parse::<f64>().map_err(|e| Error::Invalid(format!("--c: {e}")))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Invalid("--c must be positive".into()));
    }
    Ok(v)
}

fn run_verify(cmd: &Command, a: &VerifyArgs) -> Result<Output> {
    let cfg = GizmoConfig {
        tau: a.tau,
        theta: a.theta,
        c_config: resolve_c(&a.c_config)?,
        spacing: a.spacing,
        method: a.method.into(),
        lipschitz_c: a.lipschitz_c,
    };
    cfg.validate()?;
    let grid = parse_grid(&a.z_grid, GridSpec::default())?;
    let pair = a.pair.load()?;
    let report = verify_gizmo(&pair, &grid.points(), &cfg)?;
    envelope(cmd, report.implication_holds, report)
}

fn run_semicircle(cmd: &Command, a: &SemicircleArgs) -> Result<Output> {
    let grid = parse_grid(&a.z_grid, GridSpec::default())?;
    let pair = a.pair.load()?;
    let cfg = SemicircleConfig { tau: a.tau, theta: a.theta, spacing: a.spacing, identity_stride: a.stride, ..Default::default() };
    let r = semicircle_locallaw(&pair.u, &grid.points(), &cfg)?;
    let passed = r.user.implication_holds
        && r.reference.implication_holds
        && r.identities.key_identity <= 1e-8
        && r.identities.magic_identity <= 1e-10;
    envelope(cmd, passed, r)
}

fn run_deloc(cmd: &Command, a: &DelocArgs) -> Result<Output> {
    let pair = a.pair.load()?;
    let k = match a.k {
        Some(k) if k >= 1.0 && k.is_finite() => k,
        Some(k) => return Err(Error::Invalid(format!("--K must be >= 1, got {k}"))),
        None => empirical_k(&build_linearization(&pair), &empirical_k_grid(pair.n()), a.c_config)?,
    };
    let r = delocalization_check(&pair, k, a.c_config)?;
    envelope(cmd, r.all_hold && r.max_solver_residual <= 1e-10, r)
}

fn run_figure1(a: &Figure1Args) -> Result<Output> {
    if a.rho.is_empty() {
        return Err(Error::Invalid("--rho needs at least one value".into()));
    }
    let rows = figure1_data(&a.rho)?;
    let mut csv = Csv::new(&["rho", "lambda", "sigma"]);
    for r in rows {
        csv.num_row(&[r.rho, r.lambda, r.sigma]);
    }
    Ok(Output { bytes: csv.finish(), passed: true })
}

fn run_tails(cmd: &Command, a: &TailsArgs) -> Result<Output> {
    let law: EntryLaw = a.law.parse()?;
    if !(2.0..=16.0).contains(&a.p) || a.n == 0 || a.trials < 100 {
        return Err(Error::Invalid("need p in [2, 16], n >= 1, trials >= 100".into()));
    }
    let linear = whittle_check(law, a.n, a.p, a.trials, WhittleMode::Linear, a.seed)?;
    let quadratic = whittle_check(law, a.n, a.p, a.trials, WhittleMode::Quadratic, a.seed.wrapping_add(1))?;
    let quad_tail = quad_tail_check(&QuadTailConfig {
        k: 1,
        n: a.n,
        gamma0: 0.5,
        gamma1: 1.0,
        b: DMatrix::identity(a.n, a.n),
        trials: a.trials.min(5000),
        law,
        paired: false,
        y0_scale: 0.0,
        seed: a.seed.wrapping_add(2),
    })?;
    let k_tail = if a.k_samples > 0 {
        Some(k_tail_estimate(&EnsembleSpec::new(a.k_n, law, a.seed)?, 8.0, 2.0, a.k_samples)?)
    } else {
        None
    };
    let passed = linear.holds && quadratic.holds && quad_tail.holds && k_tail.as_ref().is_none_or(|k| k.fit.decaying);
    #[derive(Serialize)]
    struct R {
        linear: crate::tails::WhittleReport,
        quadratic: crate::tails::WhittleReport,
        quad_tail: crate::tails::QuadTailReport,
        k_tail: Option<crate::locallaw::KTailReport>,
    }
    envelope(cmd, passed, R { linear, quadratic, quad_tail, k_tail })
}

fn run_sample(a: &SampleArgs) -> Result<Output> {
    Ok(Output { bytes: pair_to_text(&a.pair.load()?), passed: true })
}

fn dispatch(cmd: &Command) -> Result<(Output, Option<PathBuf>)> {
    Ok(match cmd {
        Command::Law(a) => (run_law(cmd, a)?, a.out.clone()),
        Command::Figure2(a) => (run_figure2(a)?, a.out.clone()),
        Command::Sd(a) => (run_sd(cmd, a)?, a.out.clone()),
        Command::LinearizeCheck(a) => (run_linearize(cmd, a)?, a.out.clone()),
        Command::Verify(a) => (run_verify(cmd, a)?, a.out.clone()),
        Command::Semicircle(a) => (run_semicircle(cmd, a)?, a.out.clone()),
        Command::Deloc(a) => (run_deloc(cmd, a)?, a.out.clone()),
        Command::Figure1(a) => (run_figure1(a)?, a.out.clone()),
        Command::Tails(a) => (run_tails(cmd, a)?, a.out.clone()),
        Command::Sample(a) => (run_sample(a)?, a.out.clone()),
    })
}

/// Sizes the global thread pool from the environment, once.
pub fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `argv` (program name first), runs the command, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_threads();
    match dispatch(&cli.command) {
        Ok((out, path)) => {
            let written = match path {
                Some(p) => write_atomic(&p, out.bytes.as_bytes()),
                None => {
                    let mut stdout = std::io::stdout().lock();
                    match stdout.write_all(out.bytes.as_bytes()).and_then(|_| stdout.flush()) {
                        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                        r => r.map_err(Error::from),
                    }
                }
            };
            match written {
                Ok(()) if out.passed => 0,
                Ok(()) => 1,
                Err(e) => {
                    eprintln!("error: {e}");
                    2
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("-1:1:3,0.1:1:2,lin", GridSpec::default()).unwrap();
        assert_eq!((g.n_re, g.n_im, g.log_im), (3, 2, false));
        assert!(parse_grid("1:0:3,0.1:1:2", GridSpec::default()).is_err());
        assert!(parse_grid("nonsense", GridSpec::default()).is_err());
    }

    #[test]
    fn z_parsing_refuses_lower_half_plane() {
        assert!(parse_z("0.1,-1").is_err());
        assert_eq!(parse_z("-0.5,0.5").unwrap(), c(-0.5, 0.5));
    }

    #[test]
    fn usage_error_exit_code() {
        assert_eq!(run(["anticomm", "no-such-command"]), 2);
        assert_eq!(run(["anticomm", "figure1", "--rho", "1.5"]), 2);
    }
}
