//! Wigner pair sampling with reproducible per-row random streams.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_norm, CMat, Mat3, C64};
use crate::sdcore::phi_ac;

/// Entry distribution. Every law is mean zero with unit second moment before scaling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryLaw {
    ComplexGaussian,
    RealGaussian,
    Rademacher,
    UniformBounded,
    /// Student t with 3 degrees of freedom, rescaled to unit variance. Violates the moment hypothesis.
    HeavyTailed,
}

impl EntryLaw {
    pub fn tag(&self) -> &'static str {
        match self {
            EntryLaw::ComplexGaussian => "complex-gaussian",
            EntryLaw::RealGaussian => "real-gaussian",
            EntryLaw::Rademacher => "rademacher",
            EntryLaw::UniformBounded => "uniform-bounded",
            EntryLaw::HeavyTailed => "heavy-tailed",
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, EntryLaw::ComplexGaussian)
    }

    /// Default `(alpha0, alpha1)` for which the moment condition holds.
    pub fn default_alphas(&self) -> (f64, f64) {
        match self {
            EntryLaw::Rademacher | EntryLaw::UniformBounded => (1.0, 1.0),
            _ => (0.5, 1.0),
        }
    }

    /// A real draw with mean zero and unit variance.
    pub fn draw_real<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            EntryLaw::ComplexGaussian | EntryLaw::RealGaussian => rng.sample(StandardNormal),
            EntryLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryLaw::UniformBounded => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            EntryLaw::HeavyTailed => {
                let t: f64 = StudentT::new(3.0).expect("valid dof").sample(rng);
                t / 3f64.sqrt()
            }
        }
    }

    /// An off-diagonal draw with unit complex second moment.
    pub fn draw_offdiag<R: Rng + ?Sized>(&self, rng: &mut R) -> C64 {
        if self.is_complex() {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c(s * re, s * im)
        } else {
            c(self.draw_real(rng), 0.0)
        }
    }

    /// Exact `||Y||_p` for a real unit-variance draw, when known in closed form.
    pub fn real_p_norm(&self, p: f64) -> Option<f64> {
        match self {
            EntryLaw::RealGaussian | EntryLaw::ComplexGaussian => {
                Some(crate::tails::theta_fn(p).powf(1.0 / p))
            }
            EntryLaw::Rademacher => Some(1.0),
            EntryLaw::UniformBounded => Some(3f64.sqrt() * (1.0 / (p + 1.0)).powf(1.0 / p)),
            EntryLaw::HeavyTailed => None,
        }
    }
}

impl fmt::Display for EntryLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EntryLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complex-gaussian" | "gaussian" | "gue" => Ok(EntryLaw::ComplexGaussian),
            "real-gaussian" | "goe" => Ok(EntryLaw::RealGaussian),
            "rademacher" => Ok(EntryLaw::Rademacher),
            "uniform-bounded" | "uniform" => Ok(EntryLaw::UniformBounded),
            "heavy-tailed" => Ok(EntryLaw::HeavyTailed),
            other => Err(Error::Invalid(format!("unknown ensemble '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub law: EntryLaw,
    pub alpha0: f64,
    pub alpha1: f64,
    pub seed: u64,
    /// diagonal variance is `diag_variance / N`
    pub diag_variance: f64,
    /// multiplies every entry by `sqrt(variance_scale)`
    pub variance_scale: f64,
}

impl EnsembleSpec {
    pub fn new(n: usize, law: EntryLaw, seed: u64) -> Result<Self> {
        let (alpha0, alpha1) = law.default_alphas();
        let spec = EnsembleSpec { n, law, alpha0, alpha1, seed, diag_variance: 1.0, variance_scale: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Invalid(format!("N must be at least 2, got {}", self.n)));
        }
        if !(self.alpha0 > 0.0) {
            return Err(Error::Invalid("alpha0 must be positive".into()));
        }
        if !(self.alpha1 >= 1.0) {
            return Err(Error::Invalid("alpha1 must be at least 1".into()));
        }
        if !(self.diag_variance >= 0.0) || !(self.variance_scale > 0.0) {
            return Err(Error::Invalid("variances must be non-negative".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        EnsembleSpec { seed, ..self.clone() }
    }

    pub fn to_kv(&self) -> String {
        format!(
            "n={}\nensemble={}\nalpha0={}\nalpha1={}\nseed={}\ndiag_variance={}\nvariance_scale={}\n",
            self.n, self.law, self.alpha0, self.alpha1, self.seed, self.diag_variance, self.variance_scale
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut spec = EnsembleSpec {
            n: 0,
            law: EntryLaw::ComplexGaussian,
            alpha0: 0.5,
            alpha1: 1.0,
            seed: 0,
            diag_variance: 1.0,
            variance_scale: 1.0,
        };
        let mut saw_alpha = false;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("expected key=value, got '{line}'")))?;
            let num = |v: &str| v.trim().parse::<f64>().map_err(|e| Error::Invalid(format!("{k}: {e}")));
            match k.trim() {
                "n" => spec.n = v.trim().parse().map_err(|e| Error::Invalid(format!("n: {e}")))?,
                "ensemble" => spec.law = v.trim().parse()?,
                "alpha0" => {
                    spec.alpha0 = num(v)?;
                    saw_alpha = true;
                }
                "alpha1" => spec.alpha1 = num(v)?,
                "seed" => spec.seed = v.trim().parse().map_err(|e| Error::Invalid(format!("seed: {e}")))?,
                "diag_variance" => spec.diag_variance = num(v)?,
                "variance_scale" => spec.variance_scale = num(v)?,
                other => return Err(Error::Invalid(format!("unknown key '{other}'"))),
            }
        }
        if !saw_alpha {
            let (a0, a1) = spec.law.default_alphas();
            spec.alpha0 = a0;
            spec.alpha1 = a1;
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Stream index for `(matrix, row)`; matrix 0 is U, 1 is V, 2 is reserved for moment probes.
pub fn stream_id(matrix: u64, row: u64) -> u64 {
    (matrix << 40) | row
}

pub fn row_rng(seed: u64, matrix: u64, row: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(matrix, row));
    rng
}

#[derive(Clone, Debug)]
pub struct WignerPair {
    pub u: CMat,
    pub v: CMat,
    pub spec: EnsembleSpec,
}

impl WignerPair {
    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn from_matrices(u: CMat, v: CMat, spec: EnsembleSpec) -> Result<Self> {
        if u.shape() != v.shape() || !u.is_square() || u.nrows() < 2 {
            return Err(Error::Invalid("U and V must be square, equal-sized, N >= 2".into()));
        }
        if !crate::linalg::is_hermitian(&u) || !crate::linalg::is_hermitian(&v) {
            return Err(Error::Invalid("U and V must be Hermitian".into()));
        }
        Ok(WignerPair { u, v, spec })
    }

    pub fn norms(&self) -> (f64, f64) {
        (hermitian_norm(&self.u), hermitian_norm(&self.v))
    }

    pub fn anticommutator(&self) -> CMat {
        let uv = crate::linalg::matmul(&self.u, &self.v);
        let h = &uv + uv.adjoint();
        // exact Hermitian symmetrisation
        (&h + h.adjoint()) * c(0.5, 0.0)
    }
}

fn sample_matrix(spec: &EnsembleSpec, matrix: u64) -> CMat {
    let n = spec.n;
    let off = (spec.variance_scale / n as f64).sqrt();
    let diag = (spec.variance_scale * spec.diag_variance / n as f64).sqrt();
    let mut a = CMat::zeros(n, n);
    for i in 0..n {
        let mut rng = row_rng(spec.seed, matrix, i as u64);
        a[(i, i)] = c(diag * spec.law.draw_real(&mut rng), 0.0);
        for j in (i + 1)..n {
            let x = spec.law.draw_offdiag(&mut rng) * off;
            a[(i, j)] = x;
            a[(j, i)] = x.conj();
        }
    }
    a
}

pub fn sample_pair(spec: &EnsembleSpec) -> WignerPair {
    WignerPair { u: sample_matrix(spec, 0), v: sample_matrix(spec, 1), spec: spec.clone() }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentRow {
    pub p: f64,
    /// Monte Carlo estimate of `||entry||_p`
    pub estimate: f64,
    /// delta-method standard error of the estimate
    pub std_err: f64,
    /// `p^{-alpha0} ||entry||_p`
    pub normalized: f64,
    /// `sqrt(alpha1 / N)`
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentReport {
    pub spec: EnsembleSpec,
    pub samples: usize,
    pub rows: Vec<MomentRow>,
    pub holds: bool,
}

/// Monte Carlo check of `p^{-alpha0} ||entry||_p <= sqrt(alpha1/N)` on an off-diagonal entry.
/// A row fails only when the estimate exceeds the bound by more than three standard errors.
pub fn check_moment_condition(spec: &EnsembleSpec, p_grid: &[f64], samples: usize) -> Result<MomentReport> {
    if p_grid.iter().any(|&p| !(2.0..=16.0).contains(&p)) {
        return Err(Error::Invalid("p must lie in [2, 16]".into()));
    }
    let samples = samples.max(2);
    let n = spec.n as f64;
    let scale = (spec.variance_scale / n).sqrt();
    let mut rng = row_rng(spec.seed, 2, 0);
    let draws: Vec<f64> = (0..samples).map(|_| (spec.law.draw_offdiag(&mut rng) * scale).norm()).collect();
    let bound = (spec.alpha1 / n).sqrt();
    let mut rows = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        // scale out to avoid under/overflow in |x|^p
        let peak = draws.iter().cloned().fold(0.0, f64::max).max(1e-300);
        let pw: Vec<f64> = draws.iter().map(|x| (x / peak).powf(p)).collect();
        let mean = pw.iter().sum::<f64>() / samples as f64;
        let var = pw.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
        let se_mean = (var / samples as f64).sqrt();
        let estimate = peak * mean.powf(1.0 / p);
        let std_err = if mean > 0.0 { estimate * se_mean / (p * mean) } else { 0.0 };
        let w = p.powf(-spec.alpha0);
        let normalized = w * estimate;
        let holds = w * (estimate - 3.0 * std_err) <= bound;
        rows.push(MomentRow { p, estimate, std_err, normalized, bound, holds });
    }
    let holds = rows.iter().all(|r| r.holds);
    Ok(MomentReport { spec: spec.clone(), samples, rows, holds })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct XStructureReport {
    pub samples: usize,
    pub indices: (usize, usize, usize),
    /// `N` times the empirical mean of `(e_i X e_j^*) A (e_k X e_i^*)`
    pub mean: [[[f64; 2]; 3]; 3],
    pub target: [[[f64; 2]; 3]; 3],
    /// max over entries of `|mean - target|` in units of its standard error
    pub max_z_score: f64,
    /// second moments `N E|a|^2`, `N E|b|^2`, `N |E a conj(b)|` of the two block coefficients
    pub orthonormality: [f64; 3],
    /// max over entries of the empirical mean of `X` in units of `1/sqrt(samples N)`
    pub mean_x_max: f64,
    pub holds: bool,
}

fn block_coeffs(pair: &WignerPair, i: usize, j: usize) -> (C64, C64) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (u, v) = (pair.u[(i, j)], pair.v[(i, j)]);
    ((u - v) * s, (-u - v) * s)
}

/// `e_i X e_j^*` as a 3x3 matrix.
pub fn x_block(pair: &WignerPair, i: usize, j: usize) -> Mat3 {
    let (a, b) = block_coeffs(pair, i, j);
    let z = c(0.0, 0.0);
    Mat3::new(z, a, b, a, z, z, b, z, z)
}

/// Monte Carlo over fresh pairs drawn from `spec` (seeds `spec.seed + s`).
pub fn check_x_structure(
    spec: &EnsembleSpec,
    a: &Mat3,
    (i, j, k): (usize, usize, usize),
    samples: usize,
) -> Result<XStructureReport> {
    let n = spec.n;
    if i >= n || j >= n || k >= n || i == j || i == k {
        return Err(Error::Invalid("need distinct i from j and k, all below N".into()));
    }
    let samples = samples.max(2);
    let nf = n as f64;
    let mut sum = Mat3::zeros();
    let mut sum_sq = [[0.0f64; 3]; 3];
    let mut ortho = [c(0.0, 0.0); 3];
    let mut ortho_sq = [0.0f64; 3];
    let mut x_sum = vec![c(0.0, 0.0); n * n];
    for s in 0..samples {
        let pair = sample_pair(&spec.with_seed(spec.seed.wrapping_add(s as u64)));
        let y = x_block(&pair, i, j) * a * x_block(&pair, k, i) * c(nf, 0.0);
        sum += y;
        for r in 0..3 {
            for q in 0..3 {
                sum_sq[r][q] += y[(r, q)].norm_sqr();
            }
        }
        let (ca, cb) = block_coeffs(&pair, i, j);
        let terms = [ca * ca.conj() * nf, cb * cb.conj() * nf, ca * cb.conj() * nf];
        for t in 0..3 {
            ortho[t] += terms[t];
            ortho_sq[t] += terms[t].norm_sqr();
        }
        for (t, x) in x_sum.iter_mut().enumerate() {
            *x += pair.u[(t / n, t % n)];
        }
    }
    let sf = samples as f64;
    let mean = sum / c(sf, 0.0);
    let target = if j == k { phi_ac(a) } else { Mat3::zeros() };
    let mut max_z = 0.0f64;
    let mut mean_arr = [[[0.0; 2]; 3]; 3];
    let mut target_arr = [[[0.0; 2]; 3]; 3];
    for r in 0..3 {
        for q in 0..3 {
            let m = mean[(r, q)];
            let var = (sum_sq[r][q] / sf - m.norm_sqr()).max(0.0);
            let se = (var / sf).sqrt();
            let dev = (m - target[(r, q)]).norm();
            let zs = if se > 0.0 {
                dev / se
            } else if dev > 1e-12 {
                f64::INFINITY
            } else {
                0.0
            };
            max_z = max_z.max(zs);
            mean_arr[r][q] = [m.re, m.im];
            target_arr[r][q] = [target[(r, q)].re, target[(r, q)].im];
        }
    }
    let orthonormality = [ortho[0].re / sf, ortho[1].re / sf, ortho[2].norm() / sf];
    let mean_x_max = x_sum.iter().map(|x| x.norm() / sf * (sf * nf).sqrt()).fold(0.0, f64::max);
    let ortho_se: Vec<f64> = (0..3)
        .map(|t| ((ortho_sq[t] / sf - (ortho[t] / sf).norm_sqr()).max(0.0) / sf).sqrt())
        .collect();
    let ortho_ok = (orthonormality[0] - 1.0).abs() <= 5.0 * ortho_se[0] + 1e-12
        && (orthonormality[1] - 1.0).abs() <= 5.0 * ortho_se[1] + 1e-12
        && orthonormality[2] <= 5.0 * ortho_se[2] + 1e-12;
    Ok(XStructureReport {
        samples,
        indices: (i, j, k),
        mean: mean_arr,
        target: target_arr,
        max_z_score: max_z,
        orthonormality,
        mean_x_max,
        holds: max_z <= 5.0 && ortho_ok,
    })
}

/// Fraction of sampled pairs (seeds `spec.seed + s`) with `max(||U||, ||V||) > 4`.
pub fn norm_event_rate(spec: &EnsembleSpec, samples: usize) -> f64 {
    let samples = samples.max(1);
    let hits = (0..samples)
        .filter(|&s| {
            let pair = sample_pair(&spec.with_seed(spec.seed.wrapping_add(s as u64)));
            let (a, b) = pair.norms();
            a.max(b) > 4.0
        })
        .count();
    hits as f64 / samples as f64
}

/// Diagonal of a Hermitian matrix as reals, used for dumps and quick checks.
pub fn real_diagonal(a: &CMat) -> DVector<f64> {
    DVector::from_iterator(a.nrows(), (0..a.nrows()).map(|i| a[(i, i)].re))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_hermitian() {
        let spec = EnsembleSpec::new(2, EntryLaw::Rademacher, 11).unwrap();
        let a = sample_pair(&spec);
        let b = sample_pair(&spec);
        assert_eq!(a.u, b.u);
        assert_eq!(a.v, b.v);
        assert!(crate::linalg::is_hermitian(&a.u));
        assert!(crate::linalg::is_hermitian(&a.v));
        assert_ne!(a.u, a.v);
    }

    #[test]
    fn kv_round_trip() {
        let spec = EnsembleSpec::new(16, EntryLaw::UniformBounded, 99).unwrap();
        assert_eq!(EnsembleSpec::from_kv(&spec.to_kv()).unwrap(), spec);
        assert!(EnsembleSpec::from_kv("n=1\nensemble=rademacher\n").is_err());
    }

    #[test]
    fn rademacher_moment_condition() {
        let spec = EnsembleSpec::new(8, EntryLaw::Rademacher, 1).unwrap();
        let rep = check_moment_condition(&spec, &[2.0, 4.0, 16.0], 2000).unwrap();
        assert!(rep.holds);
        for r in &rep.rows {
            assert!((r.estimate - 1.0 / 8f64.sqrt()).abs() < 1e-12);
        }
    }
}
