//! Moment and tail conversions, Whittle-type moment bounds, and survival-curve fitting.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::wigner::EntryLaw;

/// `Theta(s) = 2^{s/2} Gamma((s+1)/2) / sqrt(pi)`, the `s`-th absolute moment of a standard normal.
pub fn theta_fn(s: f64) -> f64 {
    (0.5 * s * std::f64::consts::LN_2 - 0.5 * std::f64::consts::PI.ln() + ln_gamma(0.5 * (s + 1.0))).exp()
}

pub fn gamma_fn(s: f64) -> f64 {
    gamma(s)
}

/// `exp(alpha (2 - t/e))` clamped to `[0, 1]`: a bound on `Pr(Z > t^alpha)` when
/// `p^{-alpha} ||Z||_p <= 1` for all `p >= 1`.
pub fn moment_to_tail(alpha: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0) || !(t > 0.0) {
        return Err(Error::Invalid("alpha and t must be positive".into()));
    }
    Ok((alpha * (2.0 - t / std::f64::consts::E)).exp().clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TailMomentBound {
    pub alpha: f64,
    pub c: f64,
    pub p: f64,
    /// `C^{1/p} (alpha + 1/p)^alpha`, bounding `p^{-alpha} ||Z||_p`
    pub normalized: f64,
    /// `p^alpha` times `normalized`, bounding `||Z||_p`
    pub norm_bound: f64,
    /// `C^{1/2} (alpha + 1/2)^alpha`, bounding `sup_{p >= 2} p^{-alpha} ||Z||_p`
    pub sup_form: f64,
}

/// Moment bound for a variable with `Pr(|Z| > t^alpha) <= C e^{-t}`.
pub fn tail_to_moment(alpha: f64, c: f64, p: f64) -> Result<TailMomentBound> {
    if !(alpha >= 0.0) || !(c >= 1.0) || !(p >= 2.0) || !p.is_finite() {
        return Err(Error::Invalid("need alpha >= 0, C >= 1, p in [2, inf)".into()));
    }
    let normalized = c.powf(1.0 / p) * (alpha + 1.0 / p).powf(alpha);
    Ok(TailMomentBound {
        alpha,
        c,
        p,
        normalized,
        norm_bound: p.powf(alpha) * normalized,
        sup_form: c.sqrt() * (alpha + 0.5).powf(alpha),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WhittleMode {
    Linear,
    Quadratic,
}

/// Coefficients of a linear form `sum v_i Y_i` or quadratic form `sum B_ij (Y_i Y_j - E Y_i Y_j)`.
#[derive(Clone, Debug)]
pub enum WhittleForm {
    Linear(Vec<f64>),
    Quadratic(DMatrix<f64>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WhittleReport {
    pub law: EntryLaw,
    pub n: usize,
    pub p: f64,
    pub trials: usize,
    pub mode: WhittleMode,
    /// Monte Carlo estimate of the p-norm of the form
    pub estimate: f64,
    /// bootstrap 99% upper confidence bound on the estimate
    pub upper_99: f64,
    pub bound: f64,
    pub holds: bool,
    /// exact `E q_I` over random half splittings (quadratic mode)
    pub splitting_q: Option<f64>,
    /// Monte Carlo estimate of the same
    pub splitting_q_mc: Option<f64>,
}

const BOOTSTRAP_RESAMPLES: usize = 200;

/// 99% bootstrap upper bound on `(mean |s|^p)^{1/p}`.
pub fn bootstrap_upper_pnorm(samples: &[f64], p: f64, seed: u64) -> (f64, f64) {
    let n = samples.len();
    let peak = samples.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
    let pw: Vec<f64> = samples.iter().map(|x| (x.abs() / peak).powf(p)).collect();
    let est = peak * (pw.iter().sum::<f64>() / n as f64).powf(1.0 / p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boots: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let s: f64 = (0..n).map(|_| pw[rng.random_range(0..n)]).sum();
            peak * (s / n as f64).powf(1.0 / p)
        })
        .collect();
    boots.sort_by(f64::total_cmp);
    let idx = ((0.99 * BOOTSTRAP_RESAMPLES as f64).ceil() as usize).min(BOOTSTRAP_RESAMPLES) - 1;
    (est, boots[idx].max(est))
}

/// Exact mean over uniformly random `I` with `|I| = floor(n/2)` of `P(i in I, j not in I)`, `i != j`.
pub fn splitting_constant(n: usize) -> f64 {
    let k = (n / 2) as f64;
    let n = n as f64;
    k * (n - k) / (n * (n - 1.0))
}

pub fn splitting_constant_mc(n: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = n / 2;
    let mut hits = 0usize;
    for _ in 0..samples {
        let mut idx: Vec<usize> = (0..n).collect();
        for t in 0..k {
            let r = rng.random_range(t..n);
            idx.swap(t, r);
        }
        // index 0 in I and index 1 not in I
        let in_i = |x: usize| idx[..k].contains(&x);
        if in_i(0) && !in_i(1) {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}

pub fn whittle_bound(law: EntryLaw, form: &WhittleForm, p: f64) -> Result<f64> {
    match form {
        WhittleForm::Linear(v) => {
            let yp = law.real_p_norm(p).ok_or_else(|| Error::Invalid("law has no closed-form p-norm".into()))?;
            let s: f64 = v.iter().map(|x| x * x * yp * yp).sum();
            Ok(2.0 * theta_fn(p).powf(1.0 / p) * s.sqrt())
        }
        WhittleForm::Quadratic(b) => {
            let y2p = law
                .real_p_norm(2.0 * p)
                .ok_or_else(|| Error::Invalid("law has no closed-form p-norm".into()))?;
            let s: f64 = b.iter().map(|x| x * x * y2p.powi(4)).sum();
            Ok(8.0 * theta_fn(p).powf(1.0 / p) * theta_fn(2.0 * p).powf(1.0 / (2.0 * p)) * s.sqrt())
        }
    }
}

/// Monte Carlo check of a Whittle bound for a given form.
pub fn whittle_check_form(law: EntryLaw, form: &WhittleForm, p: f64, trials: usize, seed: u64) -> Result<WhittleReport> {
    if !(2.0..=16.0).contains(&p) {
        return Err(Error::Invalid("p must lie in [2, 16]".into()));
    }
    if law.is_complex() {
        return Err(Error::Invalid("Whittle checks need a real-valued law".into()));
    }
    let n = match form {
        WhittleForm::Linear(v) => v.len(),
        WhittleForm::Quadratic(b) => {
            if !b.is_square() {
                return Err(Error::Invalid("B must be square".into()));
            }
            b.nrows()
        }
    };
    let trials = trials.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = vec![0.0; n];
    let stats: Vec<f64> = (0..trials)
        .map(|_| {
            for x in y.iter_mut() {
                *x = law.draw_real(&mut rng);
            }
            match form {
                WhittleForm::Linear(v) => v.iter().zip(&y).map(|(a, b)| a * b).sum(),
                WhittleForm::Quadratic(b) => {
                    let mut s = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            // E Y_i Y_j = delta_ij for unit-variance laws
                            let centred = y[i] * y[j] - if i == j { 1.0 } else { 0.0 };
                            s += b[(i, j)] * centred;
                        }
                    }
                    s
                }
            }
        })
        .collect();
    let (estimate, upper_99) = bootstrap_upper_pnorm(&stats, p, seed ^ 0x9e37_79b9);
    let bound = whittle_bound(law, form, p)?;
    let (mode, splitting_q, splitting_q_mc) = match form {
        WhittleForm::Linear(_) => (WhittleMode::Linear, None, None),
        WhittleForm::Quadratic(_) => (
            WhittleMode::Quadratic,
            Some(splitting_constant(n.max(2))),
            Some(splitting_constant_mc(n.max(2), 4000, seed ^ 0x5151)),
        ),
    };
    Ok(WhittleReport {
        law,
        n,
        p,
        trials,
        mode,
        estimate,
        upper_99,
        bound,
        holds: upper_99 <= bound,
        splitting_q,
        splitting_q_mc,
    })
}

/// Random coefficients (standard normal `v`, or `B` with zero diagonal), then [`whittle_check_form`].
pub fn whittle_check(law: EntryLaw, n: usize, p: f64, trials: usize, mode: WhittleMode, seed: u64) -> Result<WhittleReport> {
    if n == 0 {
        return Err(Error::Invalid("n must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ 0xabc);
    let mut g = || -> f64 { rng.sample(rand_distr::StandardNormal) };
    let form = match mode {
        WhittleMode::Linear => WhittleForm::Linear((0..n).map(|_| g()).collect()),
        WhittleMode::Quadratic => WhittleForm::Quadratic(DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { g() })),
    };
    whittle_check_form(law, &form, p, trials, seed)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub t: f64,
    pub survival: f64,
    pub fitted: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurvivalFit {
    pub points: Vec<SurvivalPoint>,
    pub slope: Option<f64>,
    pub slope_se: Option<f64>,
    pub intercept: Option<f64>,
    /// slope plus two standard errors is negative
    pub decaying: bool,
    pub degenerate: bool,
}

/// Empirical survival function at quantiles 0.50, 0.52, ..., 0.98 and a least-squares fit of
/// `log S(t)` against `t` on those points.
pub fn fit_log_survival(values: &[f64]) -> SurvivalFit {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let survival = |t: f64| v.iter().filter(|&&x| x > t).count() as f64 / n as f64;
    let spread = v.last().copied().unwrap_or(0.0) - v.first().copied().unwrap_or(0.0);
    let mut ts: Vec<f64> = Vec::new();
    if n > 0 {
        for k in 0..25 {
            let q = 0.5 + 0.02 * k as f64;
            let idx = ((q * n as f64) as usize).min(n - 1);
            let t = v[idx];
            if ts.last().is_none_or(|&last| t > last) {
                ts.push(t);
            }
        }
    }
    let pts: Vec<(f64, f64)> = ts.iter().map(|&t| (t, survival(t))).filter(|&(_, s)| s > 0.0).collect();
    if spread <= 0.0 || pts.len() < 3 {
        let points = ts.iter().map(|&t| SurvivalPoint { t, survival: survival(t), fitted: f64::NAN }).collect();
        return SurvivalFit { points, slope: None, slope_se: None, intercept: None, decaying: false, degenerate: true };
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1.ln() - intercept - slope * p.0).powi(2)).sum();
    let se = (rss / (m - 2.0).max(1.0) / sxx).sqrt();
    let points = ts
        .iter()
        .map(|&t| SurvivalPoint { t, survival: survival(t), fitted: (intercept + slope * t).exp() })
        .collect();
    SurvivalFit {
        points,
        slope: Some(slope),
        slope_se: Some(se),
        intercept: Some(intercept),
        decaying: slope + 2.0 * se < 0.0,
        degenerate: false,
    }
}

#[derive(Clone, Debug)]
pub struct QuadTailConfig {
    pub k: usize,
    pub n: usize,
    pub gamma0: f64,
    pub gamma1: f64,
    /// `kN x kN`
    pub b: DMatrix<f64>,
    pub trials: usize,
    pub law: EntryLaw,
    /// take `Y_{i+N} = Y_i` instead of an independent copy
    pub paired: bool,
    /// entries of `Y_0` are `law * y0_scale`; zero disables `Y_0`
    pub y0_scale: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadTailReport {
    pub k: usize,
    pub n: usize,
    pub trials: usize,
    pub normalizer: f64,
    pub statistic_mean: f64,
    pub statistic_max: f64,
    /// max entry of the empirical mean of `Y B Yhat^* - E(...)` in standard-error units
    pub centred_max_z: f64,
    pub fit: SurvivalFit,
    pub holds: bool,
}

/// Survival function of `||Y B Yhat^* - Y0 - E(Y B Yhat^*)|| / ((gamma1/sqrt N) (1 v ||B||/sqrt N))`.
pub fn quad_tail_check(cfg: &QuadTailConfig) -> Result<QuadTailReport> {
    let (k, n) = (cfg.k, cfg.n);
    if k == 0 || n == 0 || cfg.b.shape() != (k * n, k * n) {
        return Err(Error::Invalid("B must be kN x kN with k, N positive".into()));
    }
    if !(cfg.gamma1 > 0.0) {
        return Err(Error::Invalid("gamma1 must be positive".into()));
    }
    if cfg.law.is_complex() {
        return Err(Error::Invalid("quad_tail_check uses real-valued laws".into()));
    }
    let kn = k * n;
    let b_norm = cfg.b.clone().singular_values().iter().cloned().fold(0.0, f64::max);
    let nf = n as f64;
    let normalizer = (cfg.gamma1 / nf.sqrt()) * (b_norm / nf.sqrt()).max(1.0);
    let scale = (cfg.gamma1 / nf).sqrt();
    // E(Y B Yhat^*) = sigma^2 sum_a tr(B_aa) I_k when paired, else 0
    let expect = if cfg.paired {
        let tr: f64 = (0..kn).map(|r| cfg.b[(r, r)]).sum();
        scale * scale * tr
    } else {
        0.0
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let trials = cfg.trials.max(2);
    let mut stats = Vec::with_capacity(trials);
    let mut sum = DMatrix::<f64>::zeros(k, k);
    let mut sum_sq = DMatrix::<f64>::zeros(k, k);
    for _ in 0..trials {
        let y = DMatrix::<f64>::from_fn(k, kn, |_, _| scale * cfg.law.draw_real(&mut rng));
        let yhat = if cfg.paired {
            y.clone()
        } else {
            DMatrix::<f64>::from_fn(k, kn, |_, _| scale * cfg.law.draw_real(&mut rng))
        };
        let mut d = &y * &cfg.b * yhat.transpose();
        for r in 0..k {
            d[(r, r)] -= expect;
        }
        sum += &d;
        sum_sq += d.component_mul(&d);
        if cfg.y0_scale > 0.0 {
            let y0 = DMatrix::<f64>::from_fn(k, k, |_, _| cfg.y0_scale * cfg.law.draw_real(&mut rng));
            d -= y0;
        }
        let nrm = if d.iter().all(|&x| x == 0.0) {
            0.0
        } else {
            d.singular_values().iter().cloned().fold(0.0, f64::max)
        };
        stats.push(nrm / normalizer);
    }
    let tf = trials as f64;
    let mut centred_max_z = 0.0f64;
    for idx in 0..k * k {
        let m = sum[idx] / tf;
        let var = (sum_sq[idx] / tf - m * m).max(0.0);
        let se = (var / tf).sqrt();
        if se > 0.0 {
            centred_max_z = centred_max_z.max(m.abs() / se);
        }
    }
    let fit = fit_log_survival(&stats);
    let statistic_mean = stats.iter().sum::<f64>() / tf;
    let statistic_max = stats.iter().cloned().fold(0.0, f64::max);
    let holds = fit.degenerate && statistic_max == 0.0 || fit.decaying;
    Ok(QuadTailReport { k, n, trials, normalizer, statistic_mean, statistic_max, centred_max_z, fit, holds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_small_values() {
        assert!((theta_fn(2.0) - 1.0).abs() < 1e-12);
        assert!((theta_fn(4.0) - 3.0).abs() < 1e-12);
        assert!((theta_fn(1.0) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn moment_to_tail_values() {
        let e = std::f64::consts::E;
        assert!((moment_to_tail(1.0, 2.0 * e).unwrap() - 1.0).abs() < 1e-15);
        assert!((moment_to_tail(1.0, 10.0 * e).unwrap() - (-8f64).exp()).abs() < 1e-15);
        assert_eq!(moment_to_tail(1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn tail_to_moment_structure() {
        let a = tail_to_moment(0.7, 1.0, 4.0).unwrap();
        let b = tail_to_moment(0.7, 2.0, 4.0).unwrap();
        assert!((b.sup_form / a.sup_form - 2f64.sqrt()).abs() < 1e-12);
        let z = tail_to_moment(0.0, 3.0, 4.0).unwrap();
        assert!((z.sup_form - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn splitting_constant_at_least_quarter() {
        for n in 2..40 {
            assert!(splitting_constant(n) >= 0.25);
        }
    }
}
