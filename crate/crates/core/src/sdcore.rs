//! Schwinger-Dyson equation `1 + (Lambda + Phi(M)) M = 0` over `Mat3` and over the scalars.

use nalgebra::{SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freelaw::{self, law_constants, UHPoint};
use crate::linalg::{bullet, c, diag3, frob3, inverse3, norm3, Mat3, C64};

pub type Mat9 = SMatrix<C64, 9, 9>;
pub type Vec9 = SVector<C64, 9>;

/// Coordinate ordering `x1..x9` of `Mat3` entries used by [`LinMap3`].
pub const BASIS: [(usize, usize); 9] =
    [(0, 0), (1, 1), (2, 2), (0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)];

pub const KAPPA_COND_CEILING: f64 = 1e12;
pub const POLE_RADIUS: f64 = 1e-8;

pub fn vec9(a: &Mat3) -> Vec9 {
    Vec9::from_fn(|k, _| a[BASIS[k]])
}

pub fn unvec9(x: &Vec9) -> Mat3 {
    let mut a = Mat3::zeros();
    for (k, &ij) in BASIS.iter().enumerate() {
        a[ij] = x[k];
    }
    a
}

/// A linear map on `Mat3`, stored as its 9x9 matrix in the `BASIS` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LinMap3 {
    pub matrix: Mat9,
}

impl LinMap3 {
    pub fn from_fn(f: impl Fn(&Mat3) -> Mat3) -> Self {
        let mut matrix = Mat9::zeros();
        for k in 0..9 {
            let mut e = Mat3::zeros();
            e[BASIS[k]] = c(1.0, 0.0);
            matrix.set_column(k, &vec9(&f(&e)));
        }
        LinMap3 { matrix }
    }

    pub fn identity() -> Self {
        LinMap3 { matrix: Mat9::identity() }
    }

    pub fn apply(&self, a: &Mat3) -> Mat3 {
        unvec9(&(self.matrix * vec9(a)))
    }

    pub fn scale(&self, s: C64) -> Self {
        LinMap3 { matrix: self.matrix * s }
    }

    pub fn inverse(&self, cond_max: f64) -> Result<Self> {
        let inv = self
            .matrix
            .try_inverse()
            .ok_or_else(|| Error::Singular("9x9 map not invertible".into()))?;
        let cond = sigma_max(&self.matrix) * sigma_max(&inv);
        if !cond.is_finite() || cond > cond_max {
            return Err(Error::IllConditioned { cond, limit: cond_max });
        }
        Ok(LinMap3 { matrix: inv })
    }
}

fn sigma_max(m: &Mat9) -> f64 {
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

fn e(i: usize, j: usize) -> Mat3 {
    let mut a = Mat3::zeros();
    a[(i, j)] = c(1.0, 0.0);
    a
}

/// `(e12+e21) A (e12+e21) + (e13+e31) A (e13+e31)`
pub fn phi_ac(a: &Mat3) -> Mat3 {
    let p = e(0, 1) + e(1, 0);
    let q = e(0, 2) + e(2, 0);
    p * a * p + q * a * q
}

/// Coordinate form of the same map: `[x1 x4 x6; x5 x2 x8; x7 x9 x3] -> [x2+x3 x5 x7; x4 x1 0; x6 0 x1]`.
pub fn phi_ac_coordinates(a: &Mat3) -> Mat3 {
    let z = c(0.0, 0.0);
    Mat3::new(
        a[(1, 1)] + a[(2, 2)],
        a[(1, 0)],
        a[(2, 0)],
        a[(0, 1)],
        a[(0, 0)],
        z,
        a[(0, 2)],
        z,
        a[(0, 0)],
    )
}

pub fn phi_map() -> LinMap3 {
    LinMap3::from_fn(phi_ac)
}

/// `sqrt(3)` times the sum of the moduli of the 81 coefficients.
pub fn op_norm_upper(t: &LinMap3) -> f64 {
    3f64.sqrt() * t.matrix.iter().map(|x| x.norm()).sum::<f64>()
}

/// `sqrt(3)` times the largest singular value of the coefficient matrix.
/// Valid because `||x||_F <= sqrt(3) ||x||` and `||y|| <= ||y||_F` on `Mat3`.
pub fn op_norm_upper_sv(t: &LinMap3) -> f64 {
    3f64.sqrt() * sigma_max(&t.matrix)
}

/// The smaller of the two certified upper bounds.
pub fn op_norm_certified(t: &LinMap3) -> f64 {
    op_norm_upper(t).min(op_norm_upper_sv(t))
}

/// Monte Carlo lower estimate of the induced spectral operator norm, with hill climbing.
pub fn op_norm_estimate(t: &LinMap3, samples: usize, seed: u64) -> f64 {
    let ratio = |x: &Mat3| {
        let n = norm3(x);
        if n == 0.0 {
            0.0
        } else {
            norm3(&t.apply(x)) / n
        }
    };
    let mut best = Mat3::identity();
    let mut best_r = ratio(&best);
    for k in 0..9 {
        let mut u = Mat3::zeros();
        u[BASIS[k]] = c(1.0, 0.0);
        let r = ratio(&u);
        if r > best_r {
            best_r = r;
            best = u;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    for _ in 0..samples.max(1) {
        let x = Mat3::from_fn(|_, _| gauss());
        let r = ratio(&x);
        if r > best_r {
            best_r = r;
            best = x;
        }
    }
    let mut step = 0.5 * norm3(&best).max(1e-300);
    for _ in 0..400 {
        let cand = best + Mat3::from_fn(|_, _| gauss()) * c(step, 0.0);
        let r = ratio(&cand);
        if r > best_r {
            best_r = r;
            best = cand;
        } else {
            step *= 0.97;
        }
    }
    best_r
}

/// A nondegenerate solution `(Lambda, M, Phi, kappa)` over `Mat3`.
#[derive(Clone, Debug)]
pub struct SDQuadruple {
    pub z: Option<C64>,
    pub lambda: Mat3,
    pub m_mat: Mat3,
    pub phi: LinMap3,
    pub kappa: LinMap3,
    pub op_norm_kappa_upper: f64,
    pub op_norm_phi_upper: f64,
    pub stability_radius: f64,
}

impl SDQuadruple {
    /// Builds kappa as the inverse of `x -> M^{-1} x - Phi(x) M`.
    pub fn new(lambda: Mat3, m_mat: Mat3, phi: LinMap3) -> Result<Self> {
        let m_inv = inverse3(&m_mat, KAPPA_COND_CEILING)?;
        let kinv = LinMap3::from_fn(|x| m_inv * x - phi.apply(x) * m_mat);
        let kappa = kinv.inverse(KAPPA_COND_CEILING)?;
        let op_norm_kappa_upper = op_norm_certified(&kappa);
        let op_norm_phi_upper = op_norm_certified(&phi);
        let stability_radius = 1.0 / (8.0 * bullet(op_norm_kappa_upper) * bullet(op_norm_phi_upper));
        Ok(SDQuadruple {
            z: None,
            lambda,
            m_mat,
            phi,
            kappa,
            op_norm_kappa_upper,
            op_norm_phi_upper,
            stability_radius,
        })
    }

    /// `||1 + (Lambda + Phi(M)) M||`
    pub fn sd_residual(&self) -> f64 {
        sd_residual(&self.lambda, &self.m_mat, &self.phi)
    }

    /// `x -> M^{-1} x - Phi(x) M`
    pub fn kappa_inverse_apply(&self, x: &Mat3) -> Mat3 {
        let m_inv = self.m_mat.try_inverse().unwrap_or_else(Mat3::zeros);
        m_inv * x - self.phi.apply(x) * self.m_mat
    }

    pub fn m_norm(&self) -> f64 {
        norm3(&self.m_mat)
    }
}

pub fn sd_residual(lambda: &Mat3, m: &Mat3, phi: &LinMap3) -> f64 {
    norm3(&(Mat3::identity() + (lambda + phi.apply(m)) * m))
}

pub fn lambda_ac(z: C64) -> Mat3 {
    diag3(z, c(-1.0, 0.0), c(1.0, 0.0))
}

pub fn lambda_zero() -> Mat3 {
    diag3(c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0))
}

pub fn m_mat_ac(m: C64) -> Mat3 {
    diag3(m, -1.0 / (m - 1.0), -1.0 / (m + 1.0))
}

pub fn sd_solution_ac(z: UHPoint) -> Result<SDQuadruple> {
    let m = freelaw::m_ac(z)?.m;
    let mut q = SDQuadruple::new(lambda_ac(z.z()), m_mat_ac(m), phi_map())?;
    q.z = Some(z.z());
    Ok(q)
}

/// Diagonal blocks of kappa^{-1} in the `BASIS` coordinates, their determinants, and inverses.
#[derive(Clone, Debug)]
pub struct KappaBlocks {
    pub m: C64,
    pub block3: SMatrix<C64, 3, 3>,
    pub blocks2: [SMatrix<C64, 2, 2>; 3],
    /// determinants computed from the blocks
    pub dets: [C64; 4],
    /// determinants from the closed forms
    pub det_formulas: [C64; 4],
    pub inv3: SMatrix<C64, 3, 3>,
    pub invs2: [SMatrix<C64, 2, 2>; 3],
}

/// Coordinate index groups of the four blocks.
pub const BLOCK_INDEX: [&[usize]; 4] = [&[0, 1, 2], &[3, 4], &[5, 6], &[7, 8]];

impl KappaBlocks {
    /// Block-diagonal assembly of the explicit inverses, i.e. kappa.
    pub fn assembled_kappa(&self) -> LinMap3 {
        let mut k = Mat9::zeros();
        for r in 0..3 {
            for s in 0..3 {
                k[(r, s)] = self.inv3[(r, s)];
            }
        }
        for (b, inv) in self.invs2.iter().enumerate() {
            let idx = BLOCK_INDEX[b + 1];
            for r in 0..2 {
                for s in 0..2 {
                    k[(idx[r], idx[s])] = inv[(r, s)];
                }
            }
        }
        LinMap3 { matrix: k }
    }

    pub fn assembled_kappa_inverse(&self) -> LinMap3 {
        let mut k = Mat9::zeros();
        for r in 0..3 {
            for s in 0..3 {
                k[(r, s)] = self.block3[(r, s)];
            }
        }
        for (b, blk) in self.blocks2.iter().enumerate() {
            let idx = BLOCK_INDEX[b + 1];
            for r in 0..2 {
                for s in 0..2 {
                    k[(idx[r], idx[s])] = blk[(r, s)];
                }
            }
        }
        LinMap3 { matrix: k }
    }

    /// Max relative mismatch between block determinants and their closed forms.
    pub fn det_mismatch(&self) -> f64 {
        self.dets
            .iter()
            .zip(self.det_formulas.iter())
            .map(|(a, b)| (a - b).norm() / b.norm().max(1e-300))
            .fold(0.0, f64::max)
    }
}

pub fn kappa_blocks(m: C64) -> Result<KappaBlocks> {
    let omega = law_constants().omega;
    let poles: [(C64, &str); 9] = [
        (c(0.0, 0.0), "0"),
        (c(1.0, 0.0), "1"),
        (c(-1.0, 0.0), "-1"),
        (c(omega, 0.0), "omega"),
        (c(-omega, 0.0), "-omega"),
        (c(0.0, 1.0 / omega), "i/omega"),
        (c(0.0, -1.0 / omega), "-i/omega"),
        (c(0.5, 0.0), "1/2"),
        (c(-0.5, 0.0), "-1/2"),
    ];
    for (p, name) in poles.iter() {
        if (m - p).norm() < POLE_RADIUS {
            return Err(Error::PoleProximity {
                value: format!("{m}"),
                pole: name.to_string(),
                radius: POLE_RADIUS,
            });
        }
    }
    let one = c(1.0, 0.0);
    let z = c(0.0, 0.0);
    let (mm, mp) = (m - one, m + one);
    let block3 = SMatrix::<C64, 3, 3>::new(
        one / m, -m, -m,
        one / mm, -mm, z,
        one / mp, z, -mp,
    );
    let blocks2 = [
        SMatrix::<C64, 2, 2>::new(one / m, one / mm, -m, -mm),
        SMatrix::<C64, 2, 2>::new(one / m, one / mp, -m, -mp),
        SMatrix::<C64, 2, 2>::new(-mm, z, z, -mp),
    ];
    let m2 = m * m;
    let quart = m2 * m2 + 4.0 * m2 - one;
    let det_formulas = [
        -quart / (m * mm * mp),
        (2.0 * m - one) / (m * mm),
        -(2.0 * m + one) / (m * mp),
        mm * mp,
    ];
    let dets = [
        block3.determinant(),
        blocks2[0].determinant(),
        blocks2[1].determinant(),
        blocks2[2].determinant(),
    ];
    let m2m1 = m2 - one;
    let inv3 = SMatrix::<C64, 3, 3>::new(
        -m2m1 * m2m1 * m, m2 * m2m1 * mp, m2 * m2m1 * mm,
        -mp * mp * m, (2.0 * m + one) * mm, m2 * mp,
        -mm * mm * m, m2 * mm, -(2.0 * m - one) * mp,
    ) / quart;
    let invs2 = [
        SMatrix::<C64, 2, 2>::new(-mm * mm * m, -m, m2 * mm, mm) / (2.0 * m - one),
        SMatrix::<C64, 2, 2>::new(mp * mp * m, m, -m2 * mp, -mp) / (2.0 * m + one),
        SMatrix::<C64, 2, 2>::new(-one / mm, z, z, -one / mp),
    ];
    Ok(KappaBlocks { m, block3, blocks2, dets, det_formulas, inv3, invs2 })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DeformationOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for DeformationOptions {
    fn default() -> Self {
        DeformationOptions { max_iter: 200, tol: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct DeformationOutcome {
    pub m_mat: Mat3,
    pub iterations: usize,
    /// `||H_{k+1}-H_k|| / ||H_k-H_{k-1}||`
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub delta: f64,
    pub delta_max: f64,
    pub sd_residual: f64,
}

/// Allowed perturbation size `epsilon / (4 kappa_b M_b)` with `epsilon = 1/(4 kappa_b Phi_b)`.
pub fn deformation_delta_max(base: &SDQuadruple) -> f64 {
    let kb = bullet(base.op_norm_kappa_upper);
    let pb = bullet(base.op_norm_phi_upper);
    let mb = bullet(base.m_norm());
    let eps = 1.0 / (4.0 * kb * pb);
    eps / (4.0 * kb * mb)
}

/// Fixed point of `H -> kappa0(Theta M0 + Theta H + Phi0(H) H)` started at zero.
pub fn deformation_solve(
    base: &SDQuadruple,
    lambda_new: &Mat3,
    opts: DeformationOptions,
) -> Result<DeformationOutcome> {
    let theta = lambda_new - base.lambda;
    let delta = norm3(&theta);
    let delta_max = deformation_delta_max(base);
    if delta > delta_max {
        return Err(Error::Precondition(format!(
            "perturbation {delta:e} exceeds admissible {delta_max:e}"
        )));
    }
    let m0 = base.m_mat;
    let q = |h: &Mat3| base.kappa.apply(&(theta * m0 + theta * h + base.phi.apply(h) * h));
    let mut h = Mat3::zeros();
    let mut prev_step = f64::NAN;
    let mut ratios = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let next = q(&h);
        iterations += 1;
        let step = norm3(&(next - h));
        if prev_step.is_finite() && prev_step > 0.0 && step > 0.0 {
            ratios.push(step / prev_step);
        }
        h = next;
        prev_step = step;
        if step <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::IterationLimit(opts.max_iter));
    }
    let m_mat = m0 + h;
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(DeformationOutcome {
        m_mat,
        iterations,
        ratios,
        max_ratio,
        delta,
        delta_max,
        sd_residual: sd_residual(lambda_new, &m_mat, &base.phi),
    })
}

/// Per-point summary of the anticommutator solution and its kappa structure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdPointReport {
    pub z: [f64; 2],
    pub m: [f64; 2],
    pub sd_residual: f64,
    /// block-assembled kappa against generic inversion, relative max entry
    pub kappa_block_gap: f64,
    pub det_mismatch: f64,
    pub op_norm_kappa: f64,
    pub op_norm_phi: f64,
    pub stability_radius: f64,
    pub delta_max: f64,
    /// `|dz|` of the deformation step, capped by `delta_max`
    pub step: f64,
    pub deformation_iterations: usize,
    pub contraction: f64,
    /// deformed `M` against the cubic solution at `z + dz`
    pub deformation_error: f64,
}

/// Solution, kappa blocks, and one deformation step `z -> z + dz` with `|dz| <= step`.
pub fn sd_point_report(z: UHPoint, step: f64) -> Result<SdPointReport> {
    let q = sd_solution_ac(z)?;
    let zz = z.z();
    let m = freelaw::m_at(zz)?;
    let blocks = kappa_blocks(m)?;
    let assembled = blocks.assembled_kappa().matrix;
    let scale = q.kappa.matrix.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let kappa_block_gap =
        (assembled - q.kappa.matrix).iter().map(|x| x.norm()).fold(0.0, f64::max) / scale;
    let delta_max = deformation_delta_max(&q);
    let dz = step.min(0.5 * delta_max);
    let z1 = zz + dz;
    let out = deformation_solve(&q, &lambda_ac(z1), DeformationOptions::default())?;
    let m1 = m_mat_ac(freelaw::m_at(z1)?);
    Ok(SdPointReport {
        z: [zz.re, zz.im],
        m: [m.re, m.im],
        sd_residual: q.sd_residual(),
        kappa_block_gap,
        det_mismatch: blocks.det_mismatch(),
        op_norm_kappa: q.op_norm_kappa_upper,
        op_norm_phi: q.op_norm_phi_upper,
        stability_radius: q.stability_radius,
        delta_max,
        step: dz,
        deformation_iterations: out.iterations,
        contraction: out.max_ratio,
        deformation_error: norm3(&(out.m_mat - m1)),
    })
}

/// Verdict for a check of the form "hypothesis implies lhs <= rhs".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImplicationVerdict {
    pub z: Option<[f64; 2]>,
    pub lhs: f64,
    pub rhs: f64,
    pub hypothesis_met: bool,
    pub holds: bool,
}

impl ImplicationVerdict {
    pub fn new(z: Option<C64>, lhs: f64, rhs: f64, hypothesis_met: bool) -> Self {
        ImplicationVerdict {
            z: z.map(|z| [z.re, z.im]),
            lhs,
            rhs,
            hypothesis_met,
            holds: !hypothesis_met || lhs <= rhs,
        }
    }

    pub fn vacuous(&self) -> bool {
        !self.hypothesis_met
    }
}

/// If `||G0 - M0||` is within the stability radius, checks
/// `||G0 - M0|| <= 20 kappa_b Phi_b M_b^2 ||E0||`, `E0 = 1 + (Lambda0 + Phi0(G0)) G0`.
pub fn stability_check(base: &SDQuadruple, g0: &Mat3) -> ImplicationVerdict {
    let e0 = Mat3::identity() + (base.lambda + base.phi.apply(g0)) * g0;
    let lhs = norm3(&(g0 - base.m_mat));
    let rhs = 20.0
        * bullet(base.op_norm_kappa_upper)
        * bullet(base.op_norm_phi_upper)
        * bullet(base.m_norm()).powi(2)
        * norm3(&e0);
    ImplicationVerdict::new(base.z, lhs, rhs, lhs <= base.stability_radius)
}

/// `sup sqrt(h) / radius` over a grid: an empirical value for the constant linking
/// the stability radius of the anticommutator solution to the edge distance.
pub fn stability_constant(grid: &[C64]) -> Result<f64> {
    let mut sup = 0.0f64;
    for &z in grid {
        let q = sd_solution_ac(UHPoint::new(z)?)?;
        sup = sup.max(freelaw::h_edge(z).sqrt() / q.stability_radius);
    }
    Ok(sup)
}

/// Specialisation at the anticommutator solution with edge constant `c`:
/// `||G-M|| <= sqrt(h)/c` implies `||G-M|| <= 10 c ||E|| / sqrt(h)`.
pub fn stability_ac_check(z: UHPoint, g: &Mat3, c_const: f64) -> Result<ImplicationVerdict> {
    let q = sd_solution_ac(z)?;
    let h = freelaw::h_edge(z.z());
    let e0 = Mat3::identity() + (q.lambda + q.phi.apply(g)) * g;
    let lhs = norm3(&(g - q.m_mat));
    let rhs = 10.0 * c_const * norm3(&e0) / h.sqrt();
    Ok(ImplicationVerdict::new(Some(z.z()), lhs, rhs, lhs <= h.sqrt() / c_const))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrakGauge {
    pub e_frak: f64,
    /// per index: (self-consistency ratio, spread ratio)
    pub per_index: Vec<(f64, f64)>,
}

pub fn frak_gauge(g_list: &[Mat3], ghat_list: &[Mat3], base: &SDQuadruple) -> Result<FrakGauge> {
    if g_list.len() != ghat_list.len() || g_list.is_empty() {
        return Err(Error::Invalid("g_list and ghat_list must be non-empty and of equal length".into()));
    }
    let n = g_list.len() as f64;
    let g_avg = g_list.iter().fold(Mat3::zeros(), |a, b| a + b) / c(n, 0.0);
    let mut per_index = Vec::with_capacity(g_list.len());
    let mut e_frak = 0.0f64;
    for (g, gh) in g_list.iter().zip(ghat_list) {
        let g_inv = inverse3(g, KAPPA_COND_CEILING)?;
        let a = norm3(&(g_inv + base.lambda + base.phi.apply(gh))) / bullet(norm3(gh)).sqrt();
        let b = (norm3(&(gh - g_avg)) / (bullet(norm3(g)) * norm3(&g_inv))).sqrt();
        e_frak = e_frak.max(a).max(b);
        per_index.push((a, b));
    }
    Ok(FrakGauge { e_frak, per_index })
}

/// If `max ||G_i - M0||` is within the stability radius, checks
/// `max ||G_i - M0|| <= 2^14 (1+||M0||)^7 (Phi_b v Lambda_b)^4 kappa_b E`.
pub fn frak_implication_check(
    g_list: &[Mat3],
    ghat_list: &[Mat3],
    base: &SDQuadruple,
) -> Result<ImplicationVerdict> {
    let gauge = frak_gauge(g_list, ghat_list, base)?;
    let lhs = g_list.iter().map(|g| norm3(&(g - base.m_mat))).fold(0.0, f64::max);
    let f = bullet(base.op_norm_phi_upper).max(bullet(norm3(&base.lambda)));
    let rhs = 2f64.powi(14)
        * (1.0 + base.m_norm()).powi(7)
        * f.powi(4)
        * bullet(base.op_norm_kappa_upper)
        * gauge.e_frak;
    Ok(ImplicationVerdict::new(base.z, lhs, rhs, lhs <= base.stability_radius))
}

/// Scalar instance `(z, m, 1, (1/m - m)^{-1})` for the semicircle law.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScalarQuadruple {
    pub z: C64,
    pub m: C64,
    pub phi: f64,
    pub kappa: C64,
    pub stability_radius: f64,
    /// `sqrt(1 ^ |z-2| ^ |z+2|)/8`
    pub radius_lower: f64,
}

pub fn m_sc(z: C64) -> C64 {
    let s = (z * z - 4.0).sqrt();
    let a = (-z + s) / 2.0;
    let b = (-z - s) / 2.0;
    if a.im > b.im {
        a
    } else {
        b
    }
}

pub fn sd_semicircle(z: UHPoint) -> ScalarQuadruple {
    let z = z.z();
    let m = m_sc(z);
    let kappa = 1.0 / (1.0 / m - m);
    let stability_radius = 1.0 / (8.0 * bullet(kappa.norm()));
    let d = 1f64.min((z - 2.0).norm()).min((z + 2.0).norm());
    ScalarQuadruple { z, m, phi: 1.0, kappa, stability_radius, radius_lower: d.sqrt() / 8.0 }
}

/// Semicircle specialisation: `|g-m| <= r` implies `|g-m| <= 20|e|/sqrt(1 ^ |z-2| ^ |z+2|)`.
pub fn semicircle_stability_check(z: UHPoint, g: C64) -> ImplicationVerdict {
    let q = sd_semicircle(z);
    let e = 1.0 + (q.z + g) * g;
    let d = 1f64.min((q.z - 2.0).norm()).min((q.z + 2.0).norm());
    let lhs = (g - q.m).norm();
    ImplicationVerdict::new(Some(q.z), lhs, 20.0 * e.norm() / d.sqrt(), lhs <= d.sqrt() / 8.0)
}

/// Frobenius-relative distance, used by tests and reports.
pub fn rel_diff(a: &Mat3, b: &Mat3) -> f64 {
    frob3(&(a - b)) / frob3(a).max(frob3(b)).max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_of_identity_and_unit() {
        let d = phi_ac(&Mat3::identity());
        assert_eq!(d, diag3(c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)));
        assert_eq!(phi_ac(&e(0, 1)), e(1, 0));
    }

    #[test]
    fn op_norm_upper_identity_and_zero() {
        assert!((op_norm_upper(&LinMap3::identity()) - 9.0 * 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(op_norm_upper(&LinMap3 { matrix: Mat9::zeros() }), 0.0);
    }

    #[test]
    fn op_norm_estimate_identity_and_scaled() {
        let est = op_norm_estimate(&LinMap3::identity(), 50, 3);
        assert!((est - 1.0).abs() < 1e-6);
        let s = c(-2.5, 1.0);
        let est = op_norm_estimate(&LinMap3::identity().scale(s), 50, 3);
        assert!((est - s.norm()).abs() < 1e-6);
    }

    #[test]
    fn deformation_with_zero_perturbation_returns_base() {
        let base = sd_solution_ac(UHPoint::from_parts(0.4, 0.9).unwrap()).unwrap();
        let out = deformation_solve(&base, &base.lambda.clone(), DeformationOptions::default()).unwrap();
        assert_eq!(out.m_mat, base.m_mat);
    }

    #[test]
    fn semicircle_at_i() {
        let q = sd_semicircle(UHPoint::from_parts(0.0, 1.0).unwrap());
        assert!((q.m - c(0.0, (5f64.sqrt() - 1.0) / 2.0)).norm() < 1e-12);
    }

    #[test]
    fn pole_guard() {
        assert!(matches!(kappa_blocks(c(0.5, 1e-9)), Err(Error::PoleProximity { .. })));
    }
}
