//! Self-adjoint linearization of the anticommutator and the generalized resolvent statistics.
//!
//! With `A = (U-V)/sqrt2`, `B = (-U-V)/sqrt2`:
//! `X = [0 A B; A 0 0; B 0 0]`, `W = [I 0 0; -A I 0; B 0 I]`, and
//! `W^*(X - Lambda (x) I)W = blockdiag({UV} - z, I, -I)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freelaw::UHPoint;
use crate::linalg::{
    c, frob3, frobenius, gemm_into, hermitian_eigen, hermitian_norm, inverse3, inverse_checked, matmul,
    max_abs, norm3, CMat, Mat3, C64, COND_CEILING,
};
use crate::sdcore::{lambda_ac, phi_ac};
use crate::wigner::WignerPair;

#[derive(Clone, Debug)]
pub struct Linearization {
    pub n: usize,
    pub x: CMat,
    pub w: CMat,
    /// `(U-V)/sqrt2`
    pub a_plus: CMat,
    /// `(-U-V)/sqrt2`
    pub b_minus: CMat,
    /// `UV + VU`
    pub anticomm: CMat,
    pub u_norm: f64,
    pub v_norm: f64,
    /// `max(||U||, ||V||) <= 4`
    pub norm_ok: bool,
    /// eigenvalues of `{UV}`, ascending
    pub evals: Vec<f64>,
    /// eigenvectors of `{UV}` as columns
    pub evecs: CMat,
    /// `W [O; 0; 0]`, so that `R = Y S Y^* + J`
    pub y: CMat,
}

pub fn build_linearization(pair: &WignerPair) -> Linearization {
    let n = pair.n();
    let s = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let a_plus = (&pair.u - &pair.v) * s;
    let b_minus = (-&pair.u - &pair.v) * s;
    let mut x = CMat::zeros(3 * n, 3 * n);
    x.view_mut((0, n), (n, n)).copy_from(&a_plus);
    x.view_mut((n, 0), (n, n)).copy_from(&a_plus);
    x.view_mut((0, 2 * n), (n, n)).copy_from(&b_minus);
    x.view_mut((2 * n, 0), (n, n)).copy_from(&b_minus);
    let mut w = CMat::identity(3 * n, 3 * n);
    w.view_mut((n, 0), (n, n)).copy_from(&(-&a_plus));
    w.view_mut((2 * n, 0), (n, n)).copy_from(&b_minus);
    let anticomm = pair.anticommutator();
    let (evals, evecs) = hermitian_eigen(&anticomm);
    let mut y = CMat::zeros(3 * n, n);
    y.view_mut((0, 0), (n, n)).copy_from(&evecs);
    y.view_mut((n, 0), (n, n)).copy_from(&(-matmul(&a_plus, &evecs)));
    y.view_mut((2 * n, 0), (n, n)).copy_from(&matmul(&b_minus, &evecs));
    let (u_norm, v_norm) = pair.norms();
    Linearization {
        n,
        x,
        w,
        a_plus,
        b_minus,
        anticomm,
        u_norm,
        v_norm,
        norm_ok: u_norm.max(v_norm) <= 4.0,
        evals,
        evecs,
        y,
    }
}

impl Linearization {
    /// Row/column indices `(i, i+N, i+2N)`.
    pub fn triple(&self, i: usize) -> [usize; 3] {
        [i, i + self.n, i + 2 * self.n]
    }

    /// `X - Lambda (x) I_N`
    pub fn shifted(&self, z: C64) -> CMat {
        let mut m = self.x.clone();
        let n = self.n;
        for k in 0..n {
            m[(k, k)] -= z;
            m[(n + k, n + k)] += c(1.0, 0.0);
            m[(2 * n + k, 2 * n + k)] -= c(1.0, 0.0);
        }
        m
    }

    /// Diagonal of `S = ({UV} - z)^{-1}` in the eigenbasis, with a conditioning check.
    pub fn spectral_factors(&self, z: C64) -> Result<Vec<C64>> {
        let d: Vec<f64> = self.evals.iter().map(|&l| (c(l, 0.0) - z).norm()).collect();
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.iter().cloned().fold(0.0, f64::max);
        let cond = hi / lo;
        if !cond.is_finite() || cond > COND_CEILING {
            return Err(Error::IllConditioned { cond, limit: COND_CEILING });
        }
        Ok(self.evals.iter().map(|&l| 1.0 / (c(l, 0.0) - z)).collect())
    }

    /// `({UV} - z)^{-1}`
    pub fn little_r(&self, z: C64) -> Result<CMat> {
        let s = self.spectral_factors(z)?;
        let mut os = self.evecs.clone();
        for (k, sk) in s.iter().enumerate() {
            for r in 0..self.n {
                os[(r, k)] *= sk;
            }
        }
        Ok(matmul(&os, &self.evecs.adjoint()))
    }

    /// Diagonal 3x3 block `e_i R e_i^*` without forming `R`.
    pub fn g_block(&self, s: &[C64], i: usize) -> Mat3 {
        let t = self.triple(i);
        let mut g = Mat3::zeros();
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = c(0.0, 0.0);
                for (l, sl) in s.iter().enumerate() {
                    acc += self.y[(t[a], l)] * sl * self.y[(t[b], l)].conj();
                }
                g[(a, b)] = acc;
            }
        }
        g[(1, 1)] += c(1.0, 0.0);
        g[(2, 2)] -= c(1.0, 0.0);
        g
    }
}

/// `Lambda (x) I_N` with `Lambda = diag(z, -1, 1)`.
pub fn lambda_kron(n: usize, z: C64) -> CMat {
    let mut d = CMat::zeros(3 * n, 3 * n);
    for k in 0..n {
        d[(k, k)] = z;
        d[(n + k, n + k)] = c(-1.0, 0.0);
        d[(2 * n + k, 2 * n + k)] = c(1.0, 0.0);
    }
    d
}

fn blockdiag3(a: &CMat, b: C64, d: C64) -> CMat {
    let n = a.nrows();
    let mut m = CMat::zeros(3 * n, 3 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    for k in 0..n {
        m[(n + k, n + k)] = b;
        m[(2 * n + k, 2 * n + k)] = d;
    }
    m
}

/// `max |W^*(X - Lambda(x)I)W - blockdiag({UV}-z, I, -I)|` divided by `max(1, max|X|)^2`.
pub fn factorization_residual(lin: &Linearization, z: C64) -> f64 {
    let lhs = matmul(&matmul(&lin.w.adjoint(), &lin.shifted(z)), &lin.w);
    let hz = &lin.anticomm - CMat::identity(lin.n, lin.n) * z;
    let rhs = blockdiag3(&hz, c(1.0, 0.0), c(-1.0, 0.0));
    let scale = max_abs(&lin.x).max(1.0).powi(2) * (1.0 + z.norm());
    max_abs(&(lhs - rhs)) / scale
}

/// `R = W blockdiag(({UV}-z)^{-1}, I, -I) W^*`, evaluated as `Y S Y^* + J`.
pub fn generalized_resolvent(lin: &Linearization, z: UHPoint) -> Result<CMat> {
    let s = lin.spectral_factors(z.z())?;
    Ok(resolvent_from_factors(lin, &s))
}

fn resolvent_from_factors(lin: &Linearization, s: &[C64]) -> CMat {
    let n = lin.n;
    let mut ys = lin.y.clone();
    for (k, sk) in s.iter().enumerate() {
        for r in 0..3 * n {
            ys[(r, k)] *= sk;
        }
    }
    let yh = lin.y.adjoint();
    let mut r = CMat::zeros(3 * n, 3 * n);
    gemm_into(c(1.0, 0.0), &ys, &yh, c(0.0, 0.0), &mut r);
    for k in 0..n {
        r[(n + k, n + k)] += c(1.0, 0.0);
        r[(2 * n + k, 2 * n + k)] -= c(1.0, 0.0);
    }
    r
}

/// Direct LU inversion of `X - Lambda (x) I_N`.
pub fn generalized_resolvent_direct(lin: &Linearization, z: UHPoint) -> Result<CMat> {
    inverse_checked(&lin.shifted(z.z()), COND_CEILING)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasicIdentityReport {
    /// `R + Lambda^0 (x) I = W r W^*`, with `r = blockdiag(({UV}-z)^{-1}, 0, 0)`
    pub shift: f64,
    /// `dR/dz = W r^2 W^*`, derivative by contour quadrature
    pub derivative: f64,
    /// `Im R / Im z = W r r^* W^*`
    pub imaginary: f64,
    /// upper-left block of `R` against `({UV}-z)^{-1}`
    pub corner: f64,
}

impl BasicIdentityReport {
    pub fn max(&self) -> f64 {
        self.shift.max(self.derivative).max(self.imaginary).max(self.corner)
    }
}

/// Relative residuals of the basic resolvent identities at `z`.
pub fn basic_identities(lin: &Linearization, z: UHPoint) -> Result<BasicIdentityReport> {
    let n = lin.n;
    let zz = z.z();
    let r_big = generalized_resolvent(lin, z)?;
    let r_small = lin.little_r(zz)?;
    let mut rr = CMat::zeros(3 * n, 3 * n);
    rr.view_mut((0, 0), (n, n)).copy_from(&r_small);
    let w = &lin.w;
    let wh = w.adjoint();
    let scale = |m: &CMat| max_abs(m).max(1e-300);

    let mut lhs = r_big.clone();
    for k in 0..n {
        lhs[(n + k, n + k)] -= c(1.0, 0.0);
        lhs[(2 * n + k, 2 * n + k)] += c(1.0, 0.0);
    }
    let rhs = matmul(&matmul(w, &rr), &wh);
    let shift = max_abs(&(&lhs - &rhs)) / scale(&rhs);

    let rr2 = matmul(&rr, &rr);
    let rhs_d = matmul(&matmul(w, &rr2), &wh);
    // dR/dz = (1/2 pi i) closed integral R(zeta)/(zeta - z)^2, trapezoid on a circle
    let rad = 0.5 * zz.im;
    let pts = 48;
    let mut deriv = CMat::zeros(3 * n, 3 * n);
    for k in 0..pts {
        let th = 2.0 * std::f64::consts::PI * k as f64 / pts as f64;
        let e = C64::from_polar(1.0, th);
        let rk = generalized_resolvent(lin, UHPoint::new(zz + e * rad)?)?;
        deriv += rk * (e.conj() / c(rad * pts as f64, 0.0));
    }
    let derivative = max_abs(&(&deriv - &rhs_d)) / scale(&rhs_d);

    let im_r = (&r_big - r_big.adjoint()) * c(0.0, -0.5 / zz.im);
    let rrs = matmul(&rr, &rr.adjoint());
    let rhs_i = matmul(&matmul(w, &rrs), &wh);
    let imaginary = max_abs(&(&im_r - &rhs_i)) / scale(&rhs_i);

    let corner = max_abs(&(r_big.view((0, 0), (n, n)) - &r_small)) / scale(&r_small);
    Ok(BasicIdentityReport { shift, derivative, imaginary, corner })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatsMethod {
    /// explicit inversion of every minor
    Minor,
    /// minor quantities recovered from `R` through the Schur complement identity
    Schur,
}

#[derive(Clone, Debug)]
pub struct ResolventStats {
    pub z: C64,
    pub method: StatsMethod,
    pub g_i: Vec<Mat3>,
    pub g_avg: Mat3,
    pub ghat_i: Vec<Mat3>,
    pub q_i: Vec<Mat3>,
    pub kfrak_i: Vec<f64>,
    pub kfrak: f64,
    /// Hilbert-Schmidt norms `||R_i||_2`
    pub r_i_frob: Vec<f64>,
}

fn kfrak_value(q: &Mat3, r_frob: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    (norm3(q) * sn / (r_frob / sn).max(1.0)).max(1.0)
}

fn finish_stats(
    z: C64,
    method: StatsMethod,
    g_i: Vec<Mat3>,
    ghat_i: Vec<Mat3>,
    q_i: Vec<Mat3>,
    r_i_frob: Vec<f64>,
    n: usize,
) -> ResolventStats {
    let g_avg = g_i.iter().fold(Mat3::zeros(), |a, b| a + b) / c(g_i.len() as f64, 0.0);
    let kfrak_i: Vec<f64> = q_i.iter().zip(&r_i_frob).map(|(q, &r)| kfrak_value(q, r, n)).collect();
    let kfrak = kfrak_i.iter().cloned().fold(1.0, f64::max);
    ResolventStats { z, method, g_i, g_avg, ghat_i, q_i, kfrak_i, kfrak, r_i_frob }
}

/// Statistics from explicit minor inversions.
pub fn resolvent_stats(lin: &Linearization, z: UHPoint) -> Result<ResolventStats> {
    let idx: Vec<usize> = (0..lin.n).collect();
    resolvent_stats_minor(lin, z, &idx)
}

/// Explicit-minor statistics restricted to the listed indices (the average `G` still uses all of them).
pub fn resolvent_stats_minor(lin: &Linearization, z: UHPoint, indices: &[usize]) -> Result<ResolventStats> {
    let n = lin.n;
    let zz = z.z();
    let s = lin.spectral_factors(zz)?;
    let shifted = lin.shifted(zz);
    let mut g_i = Vec::with_capacity(indices.len());
    let mut ghat_i = Vec::with_capacity(indices.len());
    let mut q_i = Vec::with_capacity(indices.len());
    let mut r_i_frob = Vec::with_capacity(indices.len());
    for &i in indices {
        let t = lin.triple(i);
        let keep: Vec<usize> = (0..3 * n).filter(|k| !t.contains(k)).collect();
        let minor = shifted.select_rows(&keep).select_columns(&keep);
        let r_i = inverse_checked(&minor, COND_CEILING)?;
        // position of j's triple inside the kept list
        let pos = |j: usize| {
            let base = if j < i { j } else { j - 1 };
            [base, base + (n - 1), base + 2 * (n - 1)]
        };
        let mut ghat = Mat3::zeros();
        for j in (0..n).filter(|&j| j != i) {
            let p = pos(j);
            for a in 0..3 {
                for b in 0..3 {
                    ghat[(a, b)] += r_i[(p[a], p[b])];
                }
            }
        }
        ghat /= c(n as f64, 0.0);
        let xi = lin.x.select_rows(&keep).select_columns(&t);
        let quad = xi.adjoint() * &r_i * &xi;
        let mut xii = Mat3::zeros();
        for a in 0..3 {
            for b in 0..3 {
                xii[(a, b)] = lin.x[(t[a], t[b])];
            }
        }
        let mut q = Mat3::zeros();
        for a in 0..3 {
            for b in 0..3 {
                q[(a, b)] = quad[(a, b)];
            }
        }
        q = q - xii - phi_ac(&ghat);
        g_i.push(lin.g_block(&s, i));
        ghat_i.push(ghat);
        q_i.push(q);
        r_i_frob.push(frobenius(&r_i));
    }
    Ok(finish_stats(zz, StatsMethod::Minor, g_i, ghat_i, q_i, r_i_frob, n))
}

/// Statistics through the Schur identity `R_i = eh R eh^* - (eh R e^*) G_i^{-1} (e R eh^*)`.
pub fn resolvent_stats_fast(lin: &Linearization, z: UHPoint) -> Result<ResolventStats> {
    let n = lin.n;
    let zz = z.z();
    let s = lin.spectral_factors(zz)?;
    let r = resolvent_from_factors(lin, &s);
    let mut rhr = CMat::zeros(3 * n, 3 * n);
    gemm_into(c(1.0, 0.0), &r.adjoint(), &r, c(0.0, 0.0), &mut rhr);
    let lambda = lambda_ac(zz);
    let total_frob2 = r.iter().map(|x| x.norm_sqr()).sum::<f64>();
    let block = |m: &CMat, ti: &[usize; 3], tj: &[usize; 3]| {
        Mat3::from_fn(|a, b| m[(ti[a], tj[b])])
    };
    let mut diag_sum = Mat3::zeros();
    for j in 0..n {
        let t = lin.triple(j);
        diag_sum += block(&r, &t, &t);
    }
    let mut g_i = Vec::with_capacity(n);
    let mut ghat_i = Vec::with_capacity(n);
    let mut q_i = Vec::with_capacity(n);
    let mut r_i_frob = Vec::with_capacity(n);
    for i in 0..n {
        let t = lin.triple(i);
        let g = block(&r, &t, &t);
        let g_inv = inverse3(&g, COND_CEILING)?;
        // sum_{j != i} R_ji G^{-1} R_ij, and the Gram blocks of row/column i
        let mut corr = Mat3::zeros();
        let mut row_gram = Mat3::zeros();
        let mut col_gram = Mat3::zeros();
        let mut rrr = Mat3::zeros();
        for j in 0..n {
            let tj = lin.triple(j);
            let r_ji = block(&r, &tj, &t);
            let r_ij = block(&r, &t, &tj);
            if j != i {
                corr += r_ji * g_inv * r_ij;
            }
            row_gram += r_ij * r_ij.adjoint();
            col_gram += r_ji.adjoint() * r_ji;
            rrr += r_ij * block(&rhr, &tj, &t);
        }
        let ghat = (diag_sum - g - corr) / c(n as f64, 0.0);
        let q = -(g_inv + lambda + phi_ac(&ghat));
        // ||R_i||^2 = ||A||^2 - 2 Re tr(G^{-1} C A^* B) + tr(B^*B G^{-1} C C^* G^{-*})
        let gg = g * g.adjoint();
        let a_frob2 = total_frob2 - row_gram.trace().re - col_gram.trace().re + frob3(&g).powi(2);
        let rhr_ii = block(&rhr, &t, &t);
        let k = rrr - g * rhr_ii - row_gram * g + gg * g;
        let btb = col_gram - g.adjoint() * g;
        let cct = row_gram - gg;
        let cross = (g_inv * k).trace().re;
        let last = (btb * g_inv * cct * g_inv.adjoint()).trace().re;
        let frob2 = (a_frob2 - 2.0 * cross + last).max(0.0);
        g_i.push(g);
        ghat_i.push(ghat);
        q_i.push(q);
        r_i_frob.push(frob2.sqrt());
    }
    Ok(finish_stats(zz, StatsMethod::Schur, g_i, ghat_i, q_i, r_i_frob, n))
}

pub fn resolvent_stats_with(lin: &Linearization, z: UHPoint, method: StatsMethod) -> Result<ResolventStats> {
    match method {
        StatsMethod::Minor => resolvent_stats(lin, z),
        StatsMethod::Schur => resolvent_stats_fast(lin, z),
    }
}

/// `max_i ||Q_i + G_i^{-1} + Lambda + Phi(Ghat_i)||` relative to `1 + ||Q_i||`.
pub fn key_identity_residual(stats: &ResolventStats) -> Result<f64> {
    let lambda = lambda_ac(stats.z);
    let mut worst = 0.0f64;
    for ((g, gh), q) in stats.g_i.iter().zip(&stats.ghat_i).zip(&stats.q_i) {
        let r = q + inverse3(g, COND_CEILING)? + lambda + phi_ac(gh);
        worst = worst.max(norm3(&r) / (1.0 + norm3(q)));
    }
    Ok(worst)
}

/// Max over the listed indices of `|| R - (eh^* R_i eh + R e_i^* G_i^{-1} e_i R) ||` relative to `||R||`.
pub fn schur_identity_residual(lin: &Linearization, z: UHPoint, indices: &[usize]) -> Result<f64> {
    let n = lin.n;
    let zz = z.z();
    let r = generalized_resolvent(lin, z)?;
    let shifted = lin.shifted(zz);
    let mut worst = 0.0f64;
    for &i in indices {
        let t = lin.triple(i);
        let keep: Vec<usize> = (0..3 * n).filter(|k| !t.contains(k)).collect();
        let minor = shifted.select_rows(&keep).select_columns(&keep);
        let r_i = inverse_checked(&minor, COND_CEILING)?;
        let mut rec = CMat::zeros(3 * n, 3 * n);
        for (a, &ka) in keep.iter().enumerate() {
            for (b, &kb) in keep.iter().enumerate() {
                rec[(ka, kb)] = r_i[(a, b)];
            }
        }
        let g = Mat3::from_fn(|a, b| r[(t[a], t[b])]);
        let g_inv = inverse3(&g, COND_CEILING)?;
        let col = r.select_columns(&t);
        let row = r.select_rows(&t);
        let mut g_inv_d = CMat::zeros(3, 3);
        for a in 0..3 {
            for b in 0..3 {
                g_inv_d[(a, b)] = g_inv[(a, b)];
            }
        }
        rec += matmul(&matmul(&col, &g_inv_d), &row);
        worst = worst.max(max_abs(&(&r - rec)) / max_abs(&r));
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpreadBoundRow {
    pub i: usize,
    /// `N ||G - Ghat_i||`
    pub lhs: f64,
    /// `||G_i^{-1}|| ||R e_i^*||_2 ||e_i R||_2`
    pub rhs: f64,
}

/// `N ||G - Ghat_i|| <= ||G_i^{-1}|| ||R e_i^*||_2 ||e_i R||_2` for every index.
pub fn spread_bound(lin: &Linearization, z: UHPoint, stats: &ResolventStats) -> Result<Vec<SpreadBoundRow>> {
    let r = generalized_resolvent(lin, z)?;
    let n = lin.n;
    let mut out = Vec::with_capacity(stats.g_i.len());
    for (i, (g, gh)) in stats.g_i.iter().zip(&stats.ghat_i).enumerate() {
        let t = lin.triple(i);
        let g_inv = inverse3(g, COND_CEILING)?;
        let col = frobenius(&r.select_columns(&t));
        let row = frobenius(&r.select_rows(&t));
        out.push(SpreadBoundRow { i, lhs: n as f64 * norm3(&(stats.g_avg - gh)), rhs: norm3(&g_inv) * col * row });
    }
    Ok(out)
}

/// `2^7 max(||U||, ||V||, 1)^2 / Im z`
pub fn apriori_bound(lin: &Linearization, z: C64) -> f64 {
    128.0 * lin.u_norm.max(lin.v_norm).max(1.0).powi(2) / z.im
}

/// Axis-aligned rectangle of spectral parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZRect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl ZRect {
    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    /// Uniform net with the given spacing, both edges included.
    pub fn net(&self, spacing: f64) -> Vec<C64> {
        let axis = |lo: f64, hi: f64| {
            let mut v = Vec::new();
            let steps = ((hi - lo) / spacing).floor() as usize;
            for k in 0..=steps {
                v.push(lo + spacing * k as f64);
            }
            if hi - v.last().copied().unwrap_or(lo) > 1e-12 * hi.abs().max(1.0) {
                v.push(hi);
            }
            v
        };
        let res = axis(self.re_min, self.re_max);
        let ims = axis(self.im_min, self.im_max);
        let mut out = Vec::with_capacity(res.len() * ims.len());
        for &im in &ims {
            for &re in &res {
                out.push(c(re, im));
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KfrakSup {
    /// twice the max of the statistic over the net
    pub k: f64,
    pub kfrak_max: f64,
    pub spacing: f64,
    pub net: Vec<C64>,
    pub per_z: Vec<f64>,
    /// `c N^{7/2} spacing`
    pub lipschitz_budget: f64,
    pub lipschitz_constant: f64,
    /// largest `|K(z1) - K(z2)| / |z1 - z2|` between net neighbours
    pub max_difference_quotient: f64,
    pub lipschitz_ok: bool,
}

pub fn kfrak_sup(
    lin: &Linearization,
    rect: ZRect,
    spacing: f64,
    method: StatsMethod,
    lipschitz_constant: f64,
) -> Result<KfrakSup> {
    if !(spacing > 0.0) {
        return Err(Error::Invalid("net spacing must be positive".into()));
    }
    let net = rect.net(spacing);
    let per_z = net
        .par_iter()
        .map(|&z| Ok(resolvent_stats_with(lin, UHPoint::new(z)?, method)?.kfrak))
        .collect::<Result<Vec<f64>>>()?;
    let kfrak_max = per_z.iter().cloned().fold(1.0, f64::max);
    let mut max_dq = 0.0f64;
    for a in 0..net.len() {
        for b in (a + 1)..net.len() {
            let d = (net[a] - net[b]).norm();
            if d <= spacing * 1.000_001 + 1e-12 && d > 0.0 {
                max_dq = max_dq.max((per_z[a] - per_z[b]).abs() / d);
            }
        }
    }
    let nf = lin.n as f64;
    Ok(KfrakSup {
        k: 2.0 * kfrak_max,
        kfrak_max,
        spacing,
        net,
        per_z,
        lipschitz_budget: lipschitz_constant * nf.powf(3.5) * spacing,
        lipschitz_constant,
        max_difference_quotient: max_dq,
        lipschitz_ok: max_dq <= lipschitz_constant * nf.powf(3.5),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MagicReport {
    /// max relative gap between `Im R(i,i)/Im z` and `sum_j |R(i,j)|^2`
    pub row_residual: f64,
    /// same with `sum_j |R(j,i)|^2`
    pub col_residual: f64,
    /// max relative gap between the row and column sums
    pub row_col_gap: f64,
}

pub fn magic_resolvent_check(h: &CMat, z: UHPoint) -> Result<MagicReport> {
    let n = h.nrows();
    let zz = z.z();
    let shifted = h - CMat::identity(n, n) * zz;
    let r = inverse_checked(&shifted, COND_CEILING)?;
    let (mut row_res, mut col_res, mut gap) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        let lhs = r[(i, i)].im / zz.im;
        let rs: f64 = (0..n).map(|j| r[(i, j)].norm_sqr()).sum();
        let cs: f64 = (0..n).map(|j| r[(j, i)].norm_sqr()).sum();
        let sc = lhs.abs().max(1e-300);
        row_res = row_res.max((lhs - rs).abs() / sc);
        col_res = col_res.max((lhs - cs).abs() / sc);
        gap = gap.max((rs - cs).abs() / sc);
    }
    Ok(MagicReport { row_residual: row_res, col_residual: col_res, row_col_gap: gap })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockInversionReport {
    /// inverse assembled from the Schur complement `a - b d^{-1} c`
    pub schur_complement: f64,
    /// inverse assembled from its own upper-left block `p`
    pub corner_block: f64,
}

/// Checks both two-by-two block inversion formulas against a direct inverse.
pub fn block_inversion_check(m: &CMat, split: usize) -> Result<BlockInversionReport> {
    let n = m.nrows();
    if !m.is_square() || split == 0 || split >= n {
        return Err(Error::Invalid("need a square matrix and 0 < split < n".into()));
    }
    let k = n - split;
    let a = m.view((0, 0), (split, split)).into_owned();
    let b = m.view((0, split), (split, k)).into_owned();
    let cc = m.view((split, 0), (k, split)).into_owned();
    let d = m.view((split, split), (k, k)).into_owned();
    let full_inv = inverse_checked(m, COND_CEILING)?;
    let d_inv = inverse_checked(&d, COND_CEILING)?;
    let schur = &a - &b * &d_inv * &cc;
    let schur_inv = inverse_checked(&schur, COND_CEILING)?;
    let mut base = CMat::zeros(n, n);
    base.view_mut((split, split), (k, k)).copy_from(&d_inv);
    let mut left = CMat::zeros(n, split);
    left.view_mut((0, 0), (split, split)).copy_from(&CMat::identity(split, split));
    left.view_mut((split, 0), (k, split)).copy_from(&(-(&d_inv * &cc)));
    let mut right = CMat::zeros(split, n);
    right.view_mut((0, 0), (split, split)).copy_from(&CMat::identity(split, split));
    right.view_mut((0, split), (split, k)).copy_from(&(-(&b * &d_inv)));
    let first = &base + &left * &schur_inv * &right;
    let p = full_inv.view((0, 0), (split, split)).into_owned();
    let p_inv = inverse_checked(&p, COND_CEILING)?;
    let pr = full_inv.columns(0, split).into_owned();
    let pq = full_inv.rows(0, split).into_owned();
    let second = &base + &pr * &p_inv * &pq;
    let sc = max_abs(&full_inv);
    Ok(BlockInversionReport {
        schur_complement: max_abs(&(&first - &full_inv)) / sc,
        corner_block: max_abs(&(&second - &full_inv)) / sc,
    })
}

/// Norm facts about `X` and `W`: `(||X||, ||W||, ||W^{-1}||, ||W^*||)`.
pub fn xw_norms(lin: &Linearization) -> (f64, f64, f64, f64) {
    let x_norm = hermitian_norm(&lin.x);
    let w_norm = crate::linalg::spectral_norm(&lin.w);
    let mut w_inv = lin.w.clone();
    let n = lin.n;
    w_inv.view_mut((n, 0), (n, n)).copy_from(&lin.a_plus);
    w_inv.view_mut((2 * n, 0), (n, n)).copy_from(&(-&lin.b_minus));
    let w_inv_norm = crate::linalg::spectral_norm(&w_inv);
    let w_adj_norm = crate::linalg::spectral_norm(&lin.w.adjoint());
    (x_norm, w_norm, w_inv_norm, w_adj_norm)
}

/// `max_i |({UV}-z)^{-1}(i,i) - m|` from the eigenbasis, O(N^2).
pub fn anticomm_diag_deviation(lin: &Linearization, z: C64, m: C64) -> Result<f64> {
    let s = lin.spectral_factors(z)?;
    let mut worst = 0.0f64;
    for i in 0..lin.n {
        let mut acc = c(0.0, 0.0);
        for (l, sl) in s.iter().enumerate() {
            acc += lin.evecs[(i, l)].norm_sqr() * sl;
        }
        worst = worst.max((acc - m).norm());
    }
    Ok(worst)
}

/// `max_i ||G_i - M||` using only the diagonal blocks, O(N^2).
pub fn g_deviation(lin: &Linearization, z: C64, m_mat: &Mat3) -> Result<(f64, Vec<Mat3>)> {
    let s = lin.spectral_factors(z)?;
    let blocks: Vec<Mat3> = (0..lin.n).map(|i| lin.g_block(&s, i)).collect();
    let worst = blocks.iter().map(|g| norm3(&(g - m_mat))).fold(0.0, f64::max);
    Ok((worst, blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wigner::{sample_pair, EnsembleSpec, EntryLaw};

    fn pair(n: usize, seed: u64) -> WignerPair {
        sample_pair(&EnsembleSpec::new(n, EntryLaw::ComplexGaussian, seed).unwrap())
    }

    #[test]
    fn zero_pair_gives_trivial_linearization() {
        let spec = EnsembleSpec::new(3, EntryLaw::Rademacher, 0).unwrap();
        let p = WignerPair::from_matrices(CMat::zeros(3, 3), CMat::zeros(3, 3), spec).unwrap();
        let lin = build_linearization(&p);
        assert_eq!(max_abs(&lin.x), 0.0);
        assert_eq!(lin.w, CMat::identity(9, 9));
    }

    #[test]
    fn fast_and_minor_stats_agree() {
        let lin = build_linearization(&pair(8, 5));
        let z = UHPoint::from_parts(0.3, 0.4).unwrap();
        let a = resolvent_stats(&lin, z).unwrap();
        let b = resolvent_stats_fast(&lin, z).unwrap();
        for i in 0..8 {
            assert!(frob3(&(a.ghat_i[i] - b.ghat_i[i])) < 1e-10);
            assert!(frob3(&(a.q_i[i] - b.q_i[i])) < 1e-9 * (1.0 + frob3(&a.q_i[i])));
            assert!((a.r_i_frob[i] - b.r_i_frob[i]).abs() < 1e-9 * a.r_i_frob[i]);
        }
    }

    #[test]
    fn net_includes_edges() {
        let r = ZRect { re_min: -1.0, re_max: 1.0, im_min: 0.1, im_max: 1.0 };
        let net = r.net(0.75);
        assert!(net.iter().any(|z| (z.re - 1.0).abs() < 1e-15 && (z.im - 1.0).abs() < 1e-15));
        assert!(net.iter().any(|z| (z.re + 1.0).abs() < 1e-15 && (z.im - 0.1).abs() < 1e-15));
    }
}
