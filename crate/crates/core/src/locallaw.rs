//! Local-law verification harnesses for the anticommutator and the semicircle case.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freelaw::{h_edge, law_constants, m_at, UHPoint};
use crate::linalg::{c, hermitian_eigen, inverse_checked, norm3, CMat, C64, COND_CEILING};
use crate::linearize::{build_linearization, kfrak_sup, g_deviation, Linearization, StatsMethod, ZRect};
use crate::sdcore::{m_mat_ac, m_sc};
use crate::tails::{fit_log_survival, SurvivalFit};
use crate::wigner::{sample_pair, EnsembleSpec, WignerPair};

/// Spectral-parameter grid: linear in `Re z`, linear or logarithmic in `Im z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub n_re: usize,
    pub im_min: f64,
    pub im_max: f64,
    pub n_im: usize,
    pub log_im: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { re_min: -3.0, re_max: 3.0, n_re: 13, im_min: 0.05, im_max: 2.0, n_im: 6, log_im: true }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_re >= 1
            && self.n_im >= 1
            && self.re_min <= self.re_max
            && self.im_min > 0.0
            && self.im_min <= self.im_max
            && self.re_min.is_finite()
            && self.re_max.is_finite()
            && self.im_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("bad grid {self:?}")))
        }
    }

    fn axis(lo: f64, hi: f64, n: usize, log: bool) -> Vec<f64> {
        if n == 1 {
            return vec![lo];
        }
        (0..n)
            .map(|k| {
                let t = k as f64 / (n - 1) as f64;
                if log {
                    (lo.ln() + t * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + t * (hi - lo)
                }
            })
            .collect()
    }

    /// Points ordered by `Im z` then `Re z`.
    pub fn points(&self) -> Vec<C64> {
        let res = Self::axis(self.re_min, self.re_max, self.n_re, false);
        let ims = Self::axis(self.im_min, self.im_max, self.n_im, self.log_im);
        ims.iter().flat_map(|&im| res.iter().map(move |&re| c(re, im))).collect()
    }

    /// Nearest-neighbour adjacency of [`GridSpec::points`].
    pub fn adjacency(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.n_im {
            for b in 0..self.n_re {
                let k = a * self.n_re + b;
                if b + 1 < self.n_re {
                    out.push((k, k + 1));
                }
                if a + 1 < self.n_im {
                    out.push((k, k + self.n_re));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridRow {
    pub re: f64,
    pub im: f64,
    pub h: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// inside the verification rectangle
    pub admissible: bool,
    pub in_x: bool,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalLawReport {
    pub mode: String,
    pub version: String,
    pub n: usize,
    pub ensemble: String,
    pub seed: Option<u64>,
    pub tau: f64,
    pub theta: f64,
    pub c_config: f64,
    pub net_spacing: f64,
    pub norm_u: f64,
    pub norm_v: f64,
    pub degenerate: bool,
    pub kfrak_max: f64,
    /// `2 max 𝔎` over the net
    pub k: f64,
    /// left side of the admissibility inequality
    pub rho: f64,
    pub lipschitz_budget: f64,
    pub lipschitz_max_quotient: f64,
    pub lipschitz_ok: bool,
    pub grid: Vec<GridRow>,
    pub x_empty: bool,
    /// every row in the admissible set satisfies the bound
    pub implication_holds: bool,
    /// the implication holds because the admissible set is empty
    pub vacuous: bool,
    /// smallest multiplier making the bound hold on the grid rows inside the rectangle
    pub empirical_theta_star: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GizmoConfig {
    pub tau: f64,
    pub theta: f64,
    pub c_config: f64,
    pub spacing: f64,
    pub method: StatsMethod,
    /// constant in the `c N^{7/2}` Lipschitz budget
    pub lipschitz_c: f64,
}

impl Default for GizmoConfig {
    fn default() -> Self {
        GizmoConfig { tau: 8.0, theta: 1.0, c_config: 1.0, spacing: 2.0, method: StatsMethod::Schur, lipschitz_c: 1.0 }
    }
}

impl GizmoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 8.0 && self.tau.is_finite()) {
            return Err(Error::Precondition(format!("tau must be >= 8, got {}", self.tau)));
        }
        if !(self.theta >= 1.0 && self.theta.is_finite()) {
            return Err(Error::Precondition(format!("theta must be >= 1, got {}", self.theta)));
        }
        if !(self.c_config > 0.0 && self.c_config.is_finite()) {
            return Err(Error::Precondition("c must be positive".into()));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::Precondition("net spacing must be positive".into()));
        }
        Ok(())
    }
}

fn check_norms(pair: &WignerPair) -> Result<(f64, f64)> {
    let (nu, nv) = pair.norms();
    if nu.max(nv) > 4.0 {
        return Err(Error::Precondition(format!("max(|U|, |V|) = {} exceeds 4", nu.max(nv))));
    }
    Ok((nu, nv))
}

pub fn anticomm_rectangle(n: usize, tau: f64) -> ZRect {
    ZRect { re_min: -8.0, re_max: 8.0, im_min: 1.0 / n as f64, im_max: tau }
}

pub fn semicircle_rectangle(n: usize, tau: f64) -> ZRect {
    ZRect { re_min: -4.0, re_max: 4.0, im_min: 1.0 / n as f64, im_max: tau }
}

/// Largest `lhs sqrt(N h Im z) / K` over rows inside the rectangle.
fn theta_star(rows: &[GridRow], n: usize, k: f64) -> Option<f64> {
    rows.iter()
        .filter(|r| r.admissible)
        .map(|r| r.lhs * (n as f64 * r.h * r.im).sqrt() / k)
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    mode: &str,
    pair_meta: (usize, String, Option<u64>, f64, f64),
    tau: f64,
    theta: f64,
    c_config: f64,
    spacing: f64,
    rect: ZRect,
    k: f64,
    kfrak_max: f64,
    rho: f64,
    lip: (f64, f64, bool),
    pts: &[(C64, f64, f64)],
) -> LocalLawReport {
    let (n, ensemble, seed, norm_u, norm_v) = pair_meta;
    let grid: Vec<GridRow> = pts
        .iter()
        .map(|&(z, h, lhs)| {
            let rhs = theta * k / (n as f64 * h * z.im).sqrt();
            let admissible = rect.contains(z);
            GridRow {
                re: z.re,
                im: z.im,
                h,
                lhs,
                rhs,
                admissible,
                in_x: admissible && rho <= h * h * z.im,
                holds: lhs <= rhs,
            }
        })
        .collect();
    let x_empty = !grid.iter().any(|r| r.in_x);
    let implication_holds = grid.iter().filter(|r| r.in_x).all(|r| r.holds);
    let empirical_theta_star = theta_star(&grid, n, k);
    LocalLawReport {
        mode: mode.into(),
        version: crate::VERSION.into(),
        n,
        ensemble,
        seed,
        tau,
        theta,
        c_config,
        net_spacing: spacing,
        norm_u,
        norm_v,
        degenerate: norm_u == 0.0 && norm_v == 0.0,
        kfrak_max,
        k,
        rho,
        lipschitz_budget: lip.0,
        lipschitz_max_quotient: lip.1,
        lipschitz_ok: lip.2,
        grid,
        x_empty,
        implication_holds,
        vacuous: x_empty,
        empirical_theta_star,
    }
}

/// Deterministic local-law implication for the anticommutator at every grid point.
pub fn verify_gizmo(pair: &WignerPair, z_grid: &[C64], cfg: &GizmoConfig) -> Result<LocalLawReport> {
    cfg.validate()?;
    let (norm_u, norm_v) = check_norms(pair)?;
    let lin = build_linearization(pair);
    verify_gizmo_lin(&lin, pair, z_grid, cfg, (norm_u, norm_v))
}

fn verify_gizmo_lin(
    lin: &Linearization,
    pair: &WignerPair,
    z_grid: &[C64],
    cfg: &GizmoConfig,
    norms: (f64, f64),
) -> Result<LocalLawReport> {
    let n = lin.n;
    let rect = anticomm_rectangle(n, cfg.tau);
    let ks = kfrak_sup(lin, rect, cfg.spacing, cfg.method, cfg.lipschitz_c)?;
    let k = ks.k;
    let rho = 4.0 * cfg.c_config.powi(2) * cfg.theta.powi(2) * k * k / n as f64;
    let pts = z_grid
        .par_iter()
        .map(|&z| {
            let zp = UHPoint::new(z)?;
            let m = m_at(zp.z())?;
            let (lhs, _) = g_deviation(lin, z, &m_mat_ac(m))?;
            Ok((z, h_edge(z), lhs))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(
        "anticommutator",
        (n, pair.spec.law.tag().to_string(), Some(pair.spec.seed), norms.0, norms.1),
        cfg.tau,
        cfg.theta,
        cfg.c_config,
        cfg.spacing,
        rect,
        k,
        ks.kfrak_max,
        rho,
        (ks.lipschitz_budget, ks.max_difference_quotient, ks.lipschitz_ok),
        &pts,
    ))
}

/// `theta * 2 * max 𝔎` over a net of the rectangle.
pub fn construct_k(pair: &WignerPair, tau: f64, theta: f64, spacing: f64, method: StatsMethod) -> Result<f64> {
    if !(theta >= 1.0) || !(tau >= 8.0) {
        return Err(Error::Precondition("need tau >= 8 and theta >= 1".into()));
    }
    let lin = build_linearization(pair);
    Ok(theta * kfrak_sup(&lin, anticomm_rectangle(lin.n, tau), spacing, method, 1.0)?.k)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KTailReport {
    pub n: usize,
    pub ensemble: String,
    pub samples: usize,
    pub tau: f64,
    pub spacing: f64,
    /// `K / theta` per sample, seed order
    pub values: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
    pub fit: SurvivalFit,
}

/// Empirical survival of `K / theta` over seeds `spec.seed, spec.seed + 1, ...`.
pub fn k_tail_estimate(spec: &EnsembleSpec, tau: f64, spacing: f64, samples: usize) -> Result<KTailReport> {
    if samples < 50 {
        return Err(Error::Precondition("need at least 50 samples".into()));
    }
    let values = (0..samples as u64)
        .map(|s| construct_k(&sample_pair(&spec.with_seed(spec.seed + s)), tau, 1.0, spacing, StatsMethod::Schur))
        .collect::<Result<Vec<f64>>>()?;
    let nf = values.len() as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let fit = fit_log_survival(&values);
    Ok(KTailReport {
        n: spec.n,
        ensemble: spec.law.tag().into(),
        samples,
        tau,
        spacing,
        values,
        mean,
        std_dev: var.sqrt(),
        fit,
    })
}

/// `max_i |({UV}-z)^{-1}(i,i) - m| sqrt(N h Im z)`
pub fn scaling_statistic(lin: &Linearization, z: C64) -> Result<f64> {
    let m = m_at(z)?;
    let dev = crate::linearize::anticomm_diag_deviation(lin, z, m)?;
    Ok(dev * (lin.n as f64 * h_edge(z) * z.im).sqrt())
}

/// Median of [`scaling_statistic`] over grid points inside the rectangle.
pub fn scaling_median(lin: &Linearization, z_grid: &[C64], tau: f64) -> Result<Option<f64>> {
    let rect = anticomm_rectangle(lin.n, tau);
    let vals = z_grid
        .iter()
        .filter(|z| rect.contains(**z))
        .map(|&z| scaling_statistic(lin, z))
        .collect::<Result<Vec<f64>>>()?;
    Ok(median(vals))
}

pub fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// Smallest `K >= 1` such that [`scaling_statistic`] is at most `K` on every grid point with
/// `4 c^2 K^2 / N <= h^2 Im z`.
pub fn empirical_k(lin: &Linearization, z_grid: &[C64], c_config: f64) -> Result<f64> {
    let nf = lin.n as f64;
    let pts = z_grid
        .iter()
        .map(|&z| Ok((scaling_statistic(lin, z)?, h_edge(z).powi(2) * z.im)))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let sup_on = |k: f64| {
        let rho = 4.0 * c_config * c_config * k * k / nf;
        pts.iter().filter(|p| p.1 >= rho).map(|p| p.0).fold(0.0, f64::max)
    };
    if sup_on(1.0) <= 1.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (1.0, pts.iter().map(|p| p.0).fold(1.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sup_on(mid) <= mid {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Default grid for [`empirical_k`]: `Re z` in `[-8, 8]`, `Im z` logarithmic in `[1/N, 1]`.
pub fn empirical_k_grid(n: usize) -> Vec<C64> {
    GridSpec { re_min: -8.0, re_max: 8.0, n_re: 65, im_min: 1.0 / n as f64, im_max: 1.0, n_im: 16, log_im: true }.points()
}

pub const SIGMA_BRACKET: (f64, f64) = (1e-12, 1.0);
pub const SIGMA_ITERATIONS: usize = 100;

/// Root of `h(lambda + i sigma)^2 sigma = rho` by bisection.
pub fn solve_sigma(lambda: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Precondition(format!("rho must lie in (0, 1), got {rho}")));
    }
    let f = |s: f64| h_edge(c(lambda, s)).powi(2) * s - rho;
    let (mut lo, mut hi) = SIGMA_BRACKET;
    if f(lo) > 0.0 {
        return Ok(lo);
    }
    for _ in 0..SIGMA_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn sigma_residual(lambda: f64, sigma: f64, rho: f64) -> f64 {
    (h_edge(c(lambda, sigma)).powi(2) * sigma - rho).abs()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DelocalizationRow {
    pub lambda: f64,
    pub sigma: f64,
    pub h: f64,
    pub sup_norm: f64,
    pub bound: f64,
    pub holds: bool,
    pub solver_residual: f64,
    pub sigma_in_range: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DelocalizationReport {
    pub version: String,
    pub n: usize,
    pub ensemble: String,
    pub seed: u64,
    pub k: f64,
    pub c_config: f64,
    pub rho: f64,
    pub rows: Vec<DelocalizationRow>,
    pub all_hold: bool,
    /// rows with `h = 1` at `lambda + i sigma`
    pub bulk_count: usize,
    pub bulk_all_hold: bool,
    pub max_solver_residual: f64,
}

pub fn delocalization_check(pair: &WignerPair, k: f64, c_config: f64) -> Result<DelocalizationReport> {
    check_norms(pair)?;
    let n = pair.n();
    let rho = 4.0 * c_config * c_config * k * k / n as f64;
    if !(rho < 1.0) {
        return Err(Error::Precondition(format!("rho = 4c^2K^2/N = {rho} is not below 1")));
    }
    let (evals, evecs) = hermitian_eigen(&pair.anticommutator());
    let rows = evals
        .iter()
        .enumerate()
        .filter(|(_, l)| l.abs() <= 8.0)
        .map(|(col, &lambda)| {
            let sigma = solve_sigma(lambda, rho)?;
            let sup_norm = evecs.column(col).iter().map(|x| x.norm()).fold(0.0, f64::max);
            let bound = (2.0 * sigma).sqrt();
            Ok(DelocalizationRow {
                lambda,
                sigma,
                h: h_edge(c(lambda, sigma)),
                sup_norm,
                bound,
                holds: sup_norm <= bound,
                solver_residual: sigma_residual(lambda, sigma, rho),
                sigma_in_range: sigma >= rho * (1.0 - 1e-12) && sigma <= rho.cbrt() * (1.0 + 1e-12),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bulk: Vec<&DelocalizationRow> = rows.iter().filter(|r| r.h >= 1.0).collect();
    Ok(DelocalizationReport {
        version: crate::VERSION.into(),
        n,
        ensemble: pair.spec.law.tag().into(),
        seed: pair.spec.seed,
        k,
        c_config,
        rho,
        all_hold: rows.iter().all(|r| r.holds),
        bulk_count: bulk.len(),
        bulk_all_hold: bulk.iter().all(|r| r.holds),
        max_solver_residual: rows.iter().map(|r| r.solver_residual).fold(0.0, f64::max),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Figure1Row {
    pub rho: f64,
    pub lambda: f64,
    pub sigma: f64,
}

/// `sigma(lambda)` on `[-8, 8]` at spacing `0.01` for each `rho`, plus the points `lambda = +-zeta`.
pub fn figure1_data(rho_list: &[f64]) -> Result<Vec<Figure1Row>> {
    let zeta = law_constants().zeta;
    let mut lambdas: Vec<f64> = (0..=1600).map(|k| -8.0 + 0.01 * k as f64).collect();
    lambdas.push(zeta);
    lambdas.push(-zeta);
    lambdas.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(rho_list.len() * lambdas.len());
    for &rho in rho_list {
        for &lambda in &lambdas {
            out.push(Figure1Row { rho, lambda, sigma: solve_sigma(lambda, rho)? });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UroboricReport {
    pub points: usize,
    pub connected: bool,
    /// `f1 < f2` somewhere
    pub seed_point: Option<usize>,
    /// points where `f1 <= f2` but `f1 > f3`
    pub step_violations: Vec<usize>,
    /// points where `f3 >= f2`
    pub gap_violations: Vec<usize>,
    pub failed_hypothesis: Option<String>,
    pub conclusion_violations: Vec<usize>,
    pub conclusion_holds: bool,
    /// hypotheses hold yet the conclusion fails, so the grid is too coarse to see continuity
    pub resolution_gap: bool,
}

fn is_connected(n: usize, adjacency: &[(usize, usize)]) -> bool {
    if n == 0 {
        return false;
    }
    let mut nbrs = vec![Vec::new(); n];
    for &(a, b) in adjacency {
        if a < n && b < n {
            nbrs[a].push(b);
            nbrs[b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &nbrs[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

pub fn uroboric_check(f1: &[f64], f2: &[f64], f3: &[f64], adjacency: &[(usize, usize)]) -> Result<UroboricReport> {
    let n = f1.len();
    if f2.len() != n || f3.len() != n {
        return Err(Error::Invalid("f1, f2, f3 must have equal length".into()));
    }
    if f1.iter().chain(f2).chain(f3).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("functions must be finite".into()));
    }
    let connected = is_connected(n, adjacency);
    let seed_point = (0..n).find(|&x| f1[x] < f2[x]);
    let step_violations: Vec<usize> = (0..n).filter(|&x| f1[x] <= f2[x] && f1[x] > f3[x]).collect();
    let gap_violations: Vec<usize> = (0..n).filter(|&x| f3[x] >= f2[x]).collect();
    let failed_hypothesis = if !connected {
        Some("connectivity".to_string())
    } else if seed_point.is_none() {
        Some("existence of a point with f1 < f2".to_string())
    } else if !step_violations.is_empty() {
        Some("f1 <= f2 implies f1 <= f3".to_string())
    } else if !gap_violations.is_empty() {
        Some("f3 < f2 everywhere".to_string())
    } else {
        None
    };
    let conclusion_violations: Vec<usize> = (0..n).filter(|&x| f1[x] > f3[x]).collect();
    let conclusion_holds = conclusion_violations.is_empty();
    Ok(UroboricReport {
        points: n,
        connected,
        seed_point,
        resolution_gap: failed_hypothesis.is_none() && !conclusion_holds,
        step_violations,
        gap_violations,
        failed_hypothesis,
        conclusion_violations,
        conclusion_holds,
    })
}

/// `(f1, f2, f3) = (lhs, sqrt(h)/c, rhs)` read off a local-law report.
pub fn uroboric_from_report(report: &LocalLawReport, adjacency: &[(usize, usize)]) -> Result<UroboricReport> {
    let f1: Vec<f64> = report.grid.iter().map(|r| r.lhs).collect();
    let f2: Vec<f64> = report.grid.iter().map(|r| r.h.sqrt() / report.c_config).collect();
    let f3: Vec<f64> = report.grid.iter().map(|r| r.rhs).collect();
    uroboric_check(&f1, &f2, &f3, adjacency)
}

/// `1 ^ |z-2| ^ |z+2|`
pub fn h_semicircle(z: C64) -> f64 {
    1f64.min((z - 2.0).norm()).min((z + 2.0).norm())
}

#[derive(Clone, Debug)]
pub struct ScalarStats {
    pub z: C64,
    pub g_i: Vec<C64>,
    pub ghat_i: Vec<C64>,
    pub q_i: Vec<C64>,
    pub r_i_frob: Vec<f64>,
    pub kfrak: f64,
}

fn scalar_kfrak(q: &[C64], r_frob: &[f64], n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    q.iter().zip(r_frob).map(|(q, &r)| q.norm() * sn / (r / sn).max(1.0)).fold(1.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix, reused across spectral parameters.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub evals: Vec<f64>,
    pub evecs: CMat,
    /// `|O(i,l)|^2`
    pub weights: Vec<Vec<f64>>,
}

impl Spectral {
    pub fn new(x: &CMat) -> Result<Self> {
        if !crate::linalg::is_hermitian(x) {
            return Err(Error::Invalid("matrix is not Hermitian".into()));
        }
        let (evals, evecs) = hermitian_eigen(x);
        let n = evals.len();
        let weights = (0..n).map(|i| (0..n).map(|l| evecs[(i, l)].norm_sqr()).collect()).collect();
        Ok(Spectral { evals, evecs, weights })
    }

    pub fn n(&self) -> usize {
        self.evals.len()
    }

    fn factors(&self, z: C64) -> Result<Vec<C64>> {
        let d: Vec<f64> = self.evals.iter().map(|&l| (c(l, 0.0) - z).norm()).collect();
        let cond = d.iter().cloned().fold(0.0, f64::max) / d.iter().cloned().fold(f64::INFINITY, f64::min);
        if !cond.is_finite() || cond > COND_CEILING {
            return Err(Error::IllConditioned { cond, limit: COND_CEILING });
        }
        Ok(self.evals.iter().map(|&l| 1.0 / (c(l, 0.0) - z)).collect())
    }

    /// Diagonal of the resolvent.
    pub fn diag(&self, z: C64) -> Result<Vec<C64>> {
        let s = self.factors(z)?;
        Ok(self.weights.iter().map(|w| w.iter().zip(&s).map(|(&wl, sl)| sl * wl).sum()).collect())
    }

    /// Scalar statistics through the Schur identity, O(N) per index.
    pub fn stats(&self, z: C64) -> Result<ScalarStats> {
        let n = self.n();
        let s = self.factors(z)?;
        let tr: C64 = s.iter().sum();
        let total: f64 = s.iter().map(|x| x.norm_sqr()).sum();
        let mut g_i = Vec::with_capacity(n);
        let mut ghat_i = Vec::with_capacity(n);
        let mut q_i = Vec::with_capacity(n);
        let mut r_i_frob = Vec::with_capacity(n);
        for w in &self.weights {
            let (mut g, mut r2, mut rr, mut rrr) = (c(0.0, 0.0), c(0.0, 0.0), 0.0, c(0.0, 0.0));
            for (&wl, sl) in w.iter().zip(&s) {
                g += sl * wl;
                r2 += sl * sl * wl;
                rr += sl.norm_sqr() * wl;
                rrr += sl * (sl.norm_sqr() * wl);
            }
            let ghat = (tr - g - (r2 - g * g) / g) / n as f64;
            let q = -(1.0 / g + z + ghat);
            let g2 = g.norm_sqr();
            let a2 = total - 2.0 * rr + g2;
            let k = rrr - 2.0 * g * rr + g * g2;
            let b = rr - g2;
            let frob2 = (a2 - 2.0 * (k / g).re + b * b / g2).max(0.0);
            g_i.push(g);
            ghat_i.push(ghat);
            q_i.push(q);
            r_i_frob.push(frob2.sqrt());
        }
        let kfrak = scalar_kfrak(&q_i, &r_i_frob, n);
        Ok(ScalarStats { z, g_i, ghat_i, q_i, r_i_frob, kfrak })
    }
}

/// Scalar statistics from explicit minor inversions at the listed indices.
pub fn scalar_stats_minor(x: &CMat, z: UHPoint, indices: &[usize]) -> Result<ScalarStats> {
    let n = x.nrows();
    let zz = z.z();
    let shifted = x - CMat::identity(n, n) * zz;
    let full = inverse_checked(&shifted, COND_CEILING)?;
    let per = indices
        .par_iter()
        .map(|&i| {
            let keep: Vec<usize> = (0..n).filter(|&k| k != i).collect();
            let r_i = inverse_checked(&shifted.select_rows(&keep).select_columns(&keep), COND_CEILING)?;
            let ghat = r_i.trace() / n as f64;
            let row = x.select_rows(&[i]).select_columns(&keep);
            let col = x.select_rows(&keep).select_columns(&[i]);
            let q = (row * &r_i * col)[(0, 0)] - x[(i, i)] - ghat;
            Ok((full[(i, i)], ghat, q, crate::linalg::frobenius(&r_i)))
        })
        .collect::<Result<Vec<_>>>()?;
    let g_i: Vec<C64> = per.iter().map(|p| p.0).collect();
    let ghat_i: Vec<C64> = per.iter().map(|p| p.1).collect();
    let q_i: Vec<C64> = per.iter().map(|p| p.2).collect();
    let r_i_frob: Vec<f64> = per.iter().map(|p| p.3).collect();
    let kfrak = scalar_kfrak(&q_i, &r_i_frob, n);
    Ok(ScalarStats { z: zz, g_i, ghat_i, q_i, r_i_frob, kfrak })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalarIdentityReport {
    pub z: C64,
    pub indices: usize,
    /// `max_i |Q_i + G_i^{-1} + z + Ghat_i| / (1 + |Q_i|)`
    pub key_identity: f64,
    /// `max_i |‖R_i‖_2^2/N - Im Ghat_i / Im z|` relative to the right side
    pub magic_identity: f64,
    /// largest gap between the explicit and eigenbasis statistics
    pub route_gap: f64,
}

pub fn scalar_identity_check(x: &CMat, z: UHPoint, indices: &[usize]) -> Result<ScalarIdentityReport> {
    let n = x.nrows() as f64;
    let zz = z.z();
    let st = scalar_stats_minor(x, z, indices)?;
    let mut key = 0.0f64;
    let mut magic = 0.0f64;
    for k in 0..indices.len() {
        let r = st.q_i[k] + 1.0 / st.g_i[k] + zz + st.ghat_i[k];
        key = key.max(r.norm() / (1.0 + st.q_i[k].norm()));
        let rhs = st.ghat_i[k].im / zz.im;
        magic = magic.max((st.r_i_frob[k].powi(2) / n - rhs).abs() / rhs.abs().max(1e-300));
    }
    let fast = Spectral::new(x)?.stats(zz)?;
    let mut gap = 0.0f64;
    for (k, &i) in indices.iter().enumerate() {
        gap = gap
            .max((fast.g_i[i] - st.g_i[k]).norm() / st.g_i[k].norm())
            .max((fast.ghat_i[i] - st.ghat_i[k]).norm() / st.ghat_i[k].norm())
            .max((fast.q_i[i] - st.q_i[k]).norm() / (1.0 + st.q_i[k].norm()))
            .max((fast.r_i_frob[i] - st.r_i_frob[k]).abs() / st.r_i_frob[k]);
    }
    Ok(ScalarIdentityReport { z: zz, indices: indices.len(), key_identity: key, magic_identity: magic, route_gap: gap })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemicircleReport {
    /// implication at the fixed `theta = 2^100`
    pub reference: LocalLawReport,
    /// implication at the configured `theta`
    pub user: LocalLawReport,
    pub identities: ScalarIdentityReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemicircleConfig {
    pub tau: f64,
    pub theta: f64,
    pub spacing: f64,
    /// spectral parameter of the explicit identity check
    pub identity_z: [f64; 2],
    /// every `identity_stride`-th index enters the explicit check
    pub identity_stride: usize,
}

impl Default for SemicircleConfig {
    fn default() -> Self {
        SemicircleConfig { tau: 20.0, theta: 1.0, spacing: 1.0, identity_z: [0.3, 0.1], identity_stride: 1 }
    }
}

pub const REFERENCE_SEMICIRCLE_THETA: f64 = (1u128 << 100) as f64;

pub fn semicircle_locallaw(x: &CMat, z_grid: &[C64], cfg: &SemicircleConfig) -> Result<SemicircleReport> {
    if !(cfg.spacing > 0.0) || !(cfg.theta >= 1.0) || !(cfg.tau > 0.0) || cfg.identity_stride == 0 {
        return Err(Error::Precondition("need spacing > 0, theta >= 1, tau > 0, stride >= 1".into()));
    }
    let sp = Spectral::new(x)?;
    let n = sp.n();
    let rect = semicircle_rectangle(n, cfg.tau);
    let net = rect.net(cfg.spacing);
    let per_z = net.par_iter().map(|&z| Ok(sp.stats(z)?.kfrak)).collect::<Result<Vec<f64>>>()?;
    let kfrak_max = per_z.iter().cloned().fold(1.0, f64::max);
    let k = 2.0 * kfrak_max;
    let pts = z_grid
        .par_iter()
        .map(|&z| {
            UHPoint::new(z)?;
            let m = m_sc(z);
            let lhs = sp.diag(z)?.iter().map(|g| (g - m).norm()).fold(0.0, f64::max);
            Ok((z, h_semicircle(z), lhs))
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = (n, "hermitian".to_string(), None, crate::linalg::hermitian_norm(x), 0.0);
    let build = |theta: f64| {
        let rho = 256.0 * theta * theta * k * k / n as f64;
        let mut r = assemble(
            "semicircle",
            meta.clone(),
            cfg.tau,
            theta,
            1.0,
            cfg.spacing,
            rect,
            k,
            kfrak_max,
            rho,
            (f64::NAN, f64::NAN, true),
            &pts,
        );
        r.degenerate = false;
        r
    };
    let indices: Vec<usize> = (0..n).step_by(cfg.identity_stride).collect();
    let identities = scalar_identity_check(x, UHPoint::from_parts(cfg.identity_z[0], cfg.identity_z[1])?, &indices)?;
    Ok(SemicircleReport { reference: build(REFERENCE_SEMICIRCLE_THETA), user: build(cfg.theta), identities })
}

/// Smallest and largest eigenvalue of `{UV}`.
pub fn spectrum_range(pair: &WignerPair) -> (f64, f64) {
    let ev = pair.anticommutator().symmetric_eigenvalues();
    (ev.iter().cloned().fold(f64::INFINITY, f64::min), ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// `max_i ||G_i - M||` against the a-priori bound `2^7 max(|U|,|V|,1)^2 / Im z`.
pub fn apriori_check(lin: &Linearization, z: C64) -> Result<(f64, f64)> {
    let m = m_at(z)?;
    let (lhs, _) = g_deviation(lin, z, &m_mat_ac(m))?;
    Ok((lhs, crate::linearize::apriori_bound(lin, z)))
}

/// `max_i |r(i,i) - m|` and `max_i ||G_i - M||` computed independently.
pub fn diagonal_consistency(lin: &Linearization, z: C64) -> Result<(f64, f64)> {
    let m = m_at(z)?;
    let scalar = crate::linearize::anticomm_diag_deviation(lin, z, m)?;
    let (_, blocks) = g_deviation(lin, z, &m_mat_ac(m))?;
    let block = blocks.iter().map(|g| norm3(&(g - m_mat_ac(m)))).fold(0.0, f64::max);
    Ok((scalar, block))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wigner::EntryLaw;

    #[test]
    fn sigma_endpoints() {
        let zeta = law_constants().zeta;
        assert!((solve_sigma(0.0, 0.2).unwrap() - 0.2).abs() < 1e-12);
        let s = solve_sigma(zeta, 2e-4).unwrap();
        assert!((s - 2e-4f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn uroboric_constants() {
        let r = uroboric_check(&[0.0; 4], &[1.0; 4], &[0.5; 4], &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert!(r.failed_hypothesis.is_none() && r.conclusion_holds);
        let r = uroboric_check(&[0.0; 4], &[1.0; 4], &[0.5, 0.5, 1.5, 0.5], &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(r.gap_violations, vec![2]);
    }

    #[test]
    fn scalar_routes_agree() {
        let p = sample_pair(&EnsembleSpec::new(12, EntryLaw::ComplexGaussian, 3).unwrap());
        let idx: Vec<usize> = (0..12).collect();
        let r = scalar_identity_check(&p.u, UHPoint::from_parts(0.2, 0.3).unwrap(), &idx).unwrap();
        assert!(r.route_gap < 1e-9, "{r:?}");
        assert!(r.key_identity < 1e-10 && r.magic_identity < 1e-10, "{r:?}");
    }

    #[test]
    fn grid_ordering_and_adjacency() {
        let g = GridSpec { re_min: -1.0, re_max: 1.0, n_re: 3, im_min: 0.1, im_max: 1.0, n_im: 2, log_im: true };
        let p = g.points();
        assert_eq!(p.len(), 6);
        assert!((p[3].im - 1.0).abs() < 1e-15 && (p[0].im - 0.1).abs() < 1e-15);
        assert_eq!(g.adjacency().len(), 7);
    }
}
