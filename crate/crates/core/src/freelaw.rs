//! Limiting spectral law of the anticommutator of two free semicircular elements.
//!
//! The Stieltjes transform `m(z)` is the unique root in the upper half-plane of
//! `z m^3 - m^2 - z m - 1 = 0`.

use nalgebra::{Matrix3, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, C64};

/// Imaginary-part threshold used to decide whether a cubic root is in the upper half-plane.
pub const UHP_TOL: f64 = 1e-14;
/// Smallest Im z accepted by [`m_ac`].
pub const MIN_IM_Z: f64 = 1e-8;
pub const DEFAULT_LADDER: [f64; 3] = [1e-3, 1e-4, 1e-5];
pub const DEFAULT_LADDER_TOL: f64 = 5e-2;
pub const DEFAULT_POLE_EXCLUSION: f64 = 1e-3;

/// A point of the open upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UHPoint(C64);

impl UHPoint {
    pub fn new(z: C64) -> Result<Self> {
        if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
            Ok(UHPoint(z))
        } else {
            Err(Error::NotUpperHalfPlane(z.im))
        }
    }

    pub fn from_parts(re: f64, im: f64) -> Result<Self> {
        Self::new(c(re, im))
    }

    pub fn z(&self) -> C64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawConstants {
    pub omega: f64,
    pub zeta: f64,
    pub rho_aux: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawPoint {
    pub z: C64,
    pub m: C64,
    pub h: f64,
    /// `|z m^3 - m^2 - z m - 1|`
    pub residual: f64,
}

pub fn law_constants() -> LawConstants {
    let s5 = 5f64.sqrt();
    let omega = (s5 - 2.0).sqrt();
    let zeta = ((11.0 + 5.0 * s5) / 2.0).sqrt();
    let rho_aux = (omega.powi(3) + 5.0 * omega) / 2.0;
    LawConstants { omega, zeta, rho_aux }
}

/// Edge distance `min(|z+zeta|, |z-zeta|, 1)`.
pub fn h_edge(z: C64) -> f64 {
    let zeta = law_constants().zeta;
    (z + zeta).norm().min((z - zeta).norm()).min(1.0)
}

pub fn cubic(z: C64, m: C64) -> C64 {
    z * m * m * m - m * m - z * m - 1.0
}

pub fn cubic_dm(z: C64, m: C64) -> C64 {
    3.0 * z * m * m - 2.0 * m - z
}

/// All three roots of the cubic in `m`, from the companion matrix, Newton-polished.
pub fn cubic_roots(z: C64) -> Result<[C64; 3]> {
    if z.norm() == 0.0 {
        return Err(Error::Invalid("cubic degenerates at z = 0".into()));
    }
    // monic form m^3 + a2 m^2 + a1 m + a0
    let a2 = -1.0 / z;
    let a1 = c(-1.0, 0.0);
    let a0 = -1.0 / z;
    let zero = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let comp = Matrix3::new(-a2, -a1, -a0, one, zero, zero, zero, one, zero);
    let ev = Schur::new(comp)
        .eigenvalues()
        .ok_or_else(|| Error::Invalid("companion Schur form failed".into()))?;
    let mut roots = [ev[0], ev[1], ev[2]];
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let d = cubic_dm(z, *r);
            if d.norm() == 0.0 {
                break;
            }
            let step = cubic(z, *r) / d;
            let next = *r - step;
            if !(next.re.is_finite() && next.im.is_finite()) {
                break;
            }
            if cubic(z, next).norm() <= cubic(z, *r).norm() {
                *r = next;
            } else {
                break;
            }
        }
    }
    Ok(roots)
}

/// Stieltjes transform of the anticommutator law.
pub fn m_ac(z: UHPoint) -> Result<LawPoint> {
    let z = z.z();
    if z.im < MIN_IM_Z {
        return Err(Error::DegenerateRoot { re: z.re, im: z.im, count: 0 });
    }
    let roots = cubic_roots(z)?;
    let upper: Vec<C64> = roots.iter().cloned().filter(|r| r.im > UHP_TOL).collect();
    if upper.len() != 1 {
        return Err(Error::DegenerateRoot { re: z.re, im: z.im, count: upper.len() });
    }
    let m = upper[0];
    Ok(LawPoint { z, m, h: h_edge(z), residual: cubic(z, m).norm() })
}

/// Shorthand for `m_ac` on a raw complex number.
pub fn m_at(z: C64) -> Result<C64> {
    Ok(m_ac(UHPoint::new(z)?)?.m)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityOptions {
    pub ladder: Vec<f64>,
    pub tol: f64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions { ladder: DEFAULT_LADDER.to_vec(), tol: DEFAULT_LADDER_TOL }
    }
}

/// Density of the anticommutator law at `t`, via Im m(t + i eps)/pi along a ladder of eps.
pub fn density_ac(t: f64, opts: &DensityOptions) -> Result<f64> {
    let ladder = &opts.ladder;
    if ladder.is_empty() || ladder.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Invalid("eps ladder must be non-empty and positive".into()));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Invalid("eps ladder must be strictly decreasing".into()));
    }
    if t.abs() > law_constants().zeta {
        return Ok(0.0);
    }
    let vals = ladder
        .iter()
        .map(|&e| Ok(m_at(c(t, e))?.im / std::f64::consts::PI))
        .collect::<Result<Vec<f64>>>()?;
    let spread = vals.windows(2).map(|w| (w[0] - w[1]).abs()).fold(0.0, f64::max);
    if spread > opts.tol {
        return Err(Error::NonConvergence { t, spread, tol: opts.tol });
    }
    Ok(*vals.last().unwrap())
}

/// Total mass of the density over `[-zeta, zeta]`, using `t = zeta sin(theta)`
/// to tame the square-root edges, composite Simpson with `panels` (even) panels.
pub fn density_mass(panels: usize, opts: &DensityOptions) -> Result<f64> {
    let panels = panels.max(2) + panels % 2;
    let zeta = law_constants().zeta;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let step = 2.0 * half_pi / panels as f64;
    let mut acc = 0.0;
    for k in 0..=panels {
        let th = -half_pi + step * k as f64;
        let w = if k == 0 || k == panels {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let t = zeta * th.sin();
        let jac = zeta * th.cos();
        if jac > 0.0 {
            acc += w * density_ac(t, opts)? * jac;
        }
    }
    Ok(acc * step / 3.0)
}

/// The four points where the cubic has a double root in `m`.
pub fn critical_points() -> [(C64, C64); 4] {
    let LawConstants { omega, zeta, .. } = law_constants();
    [
        (c(-zeta, 0.0), c(omega, 0.0)),
        (c(zeta, 0.0), c(-omega, 0.0)),
        (c(0.0, -1.0 / zeta), c(0.0, 1.0 / omega)),
        (c(0.0, 1.0 / zeta), c(0.0, -1.0 / omega)),
    ]
}

/// Upper boundary of the region D at abscissa `u`, for `|u| <= omega`.
pub fn region_d_ceiling(u: f64) -> f64 {
    let inner = (1.0 - 4.0 * u * u).max(0.0).sqrt() - u * u;
    inner.max(0.0).sqrt()
}

pub fn in_region_d(m: C64) -> bool {
    let omega = law_constants().omega;
    let (u, v) = (m.re, m.im);
    u.abs() <= omega && v >= 0.0 && v <= region_d_ceiling(u)
}

/// Strict interior of D.
pub fn in_region_d_interior(m: C64) -> bool {
    let omega = law_constants().omega;
    let (u, v) = (m.re, m.im);
    u.abs() < omega && v > 0.0 && v < region_d_ceiling(u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrant {
    First,
    Second,
    Third,
    Fourth,
    Boundary,
    NearPole,
}

impl Quadrant {
    pub fn label(&self) -> &'static str {
        match self {
            Quadrant::First => "1",
            Quadrant::Second => "2",
            Quadrant::Third => "3",
            Quadrant::Fourth => "4",
            Quadrant::Boundary => "boundary",
            Quadrant::NearPole => "pole",
        }
    }

    /// Quadrant after a half turn.
    pub fn opposite(&self) -> Quadrant {
        match self {
            Quadrant::First => Quadrant::Third,
            Quadrant::Second => Quadrant::Fourth,
            Quadrant::Third => Quadrant::First,
            Quadrant::Fourth => Quadrant::Second,
            other => *other,
        }
    }
}

/// `(m^2+1)/(m^3-m)`
pub fn quadrant_rational(m: C64) -> C64 {
    (m * m + 1.0) / (m * m * m - m)
}

pub fn quadrant_of(m: C64, exclusion: f64) -> Quadrant {
    if [-1.0, 0.0, 1.0].iter().any(|&p| (m - p).norm() < exclusion) {
        return Quadrant::NearPole;
    }
    // sign-exact numerators of the real and imaginary parts
    let (u, v) = (m.re, m.im);
    let (u2, v2) = (u * u, v * v);
    let re = u * (u2 * u2 + 2.0 * u2 * v2 + v2 * v2 - 4.0 * v2 - 1.0);
    let im = -v * (v2 * v2 + 2.0 * u2 * v2 + u2 * u2 + 4.0 * u2 - 1.0);
    match (re.partial_cmp(&0.0), im.partial_cmp(&0.0)) {
        (Some(std::cmp::Ordering::Greater), Some(std::cmp::Ordering::Greater)) => Quadrant::First,
        (Some(std::cmp::Ordering::Less), Some(std::cmp::Ordering::Greater)) => Quadrant::Second,
        (Some(std::cmp::Ordering::Less), Some(std::cmp::Ordering::Less)) => Quadrant::Third,
        (Some(std::cmp::Ordering::Greater), Some(std::cmp::Ordering::Less)) => Quadrant::Fourth,
        _ => Quadrant::Boundary,
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MRect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QuadrantCell {
    pub m: C64,
    pub quadrant: Quadrant,
}

pub fn quadrant_map(rect: MRect, n_re: usize, n_im: usize, exclusion: f64) -> Vec<QuadrantCell> {
    let lin = |a: f64, b: f64, n: usize, k: usize| {
        if n <= 1 {
            a
        } else {
            a + (b - a) * k as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(n_re * n_im);
    for j in 0..n_im {
        for i in 0..n_re {
            let m = c(lin(rect.re_min, rect.re_max, n_re, i), lin(rect.im_min, rect.im_max, n_im, j));
            out.push(QuadrantCell { m, quadrant: quadrant_of(m, exclusion) });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Curve {
    /// Re (m^2+1)/(m^3-m) = 0
    BigOval,
    /// Im (m^2+1)/(m^3-m) = 0, whose upper arc bounds D
    LittleOval,
}

/// Samples both ovals, `samples` points per branch.
pub fn boundary_curves(samples: usize) -> Vec<(Curve, C64)> {
    let omega = law_constants().omega;
    let samples = samples.max(2);
    let mut out = Vec::with_capacity(4 * samples);
    for sign in [1.0, -1.0] {
        for k in 0..samples {
            let t = -1.0 / omega + 2.0 / omega * k as f64 / (samples - 1) as f64;
            let x = ((1.0 + 4.0 * t * t).sqrt() - t * t).max(0.0).sqrt();
            out.push((Curve::BigOval, sign * c(x, t)));
        }
    }
    for sign in [1.0, -1.0] {
        for k in 0..samples {
            let t = -omega + 2.0 * omega * k as f64 / (samples - 1) as f64;
            out.push((Curve::LittleOval, sign * c(t, region_d_ceiling(t))));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactoidReport {
    /// omega^4 + 4 omega^2 - 1
    pub omega_poly: f64,
    /// zeta^4 - 11 zeta^2 - 1
    pub zeta_poly: f64,
    /// (t^4 - 11 t^2 - 1) at t = (3 omega^3 + 13 omega)/2
    pub zeta_formula_poly: f64,
    /// zeta - (3 omega^3 + 13 omega)/2
    pub zeta_formula: f64,
    /// zeta (omega^3 + omega)/2 - 1
    pub product: f64,
    /// max over a t-grid and both signs of the cubic factorisation residual, relative
    pub factorisation: f64,
    /// max relative discrepancy of the reciprocal-distance identity over sampled z
    pub reciprocal_identity: f64,
}

impl FactoidReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.omega_poly,
            self.zeta_poly,
            self.zeta_formula_poly,
            self.zeta_formula,
            self.product,
            self.factorisation,
            self.reciprocal_identity,
        ]
        .iter()
        .fold(0.0, |a: f64, b| a.max(b.abs()))
    }
}

/// `(t^3 - t) + s ((a^3+a)/2)(t^2+1) - (t + s (a^3+5a)/2)(t - s a)^2` for `s = +-1`.
pub fn factorisation_residual(t: f64, a: f64, s: f64) -> f64 {
    let lhs = (t * t * t - t) + s * ((a * a * a + a) / 2.0) * (t * t + 1.0);
    let rhs = (t + s * (a * a * a + 5.0 * a) / 2.0) * (t - s * a).powi(2);
    (lhs - rhs).abs() / (1.0 + lhs.abs().max(rhs.abs()))
}

/// Both sides of the reciprocal-distance identity at `z`.
pub fn reciprocal_identity_sides(z: C64) -> Result<(f64, f64)> {
    let LawConstants { omega, zeta, rho_aux } = law_constants();
    let m = m_at(z)?;
    let m2 = m * m;
    let lhs = 1.0 / (m2 - omega * omega).norm();
    let rhs = (m2 - rho_aux * rho_aux).norm().sqrt() / (m2 - 1.0).norm() / m.norm() * zeta
        / (z * z - zeta * zeta).norm().sqrt();
    Ok((lhs, rhs))
}

pub fn factoid_identities() -> FactoidReport {
    let LawConstants { omega, zeta, .. } = law_constants();
    let quartic = |t: f64| t.powi(4) - 11.0 * t * t - 1.0;
    let zf = (3.0 * omega.powi(3) + 13.0 * omega) / 2.0;
    let mut factorisation = 0.0f64;
    for k in 0..=80 {
        let t = -4.0 + 0.1 * k as f64;
        for s in [1.0, -1.0] {
            factorisation = factorisation.max(factorisation_residual(t, omega, s));
        }
    }
    let mut reciprocal = 0.0f64;
    for &(re, im) in &[(1.0, 1.0), (0.3, 0.05), (-2.0, 0.5), (3.0, 0.01), (-5.0, 2.0), (0.0, 0.2), (6.0, 7.0)] {
        if let Ok((l, r)) = reciprocal_identity_sides(c(re, im)) {
            reciprocal = reciprocal.max((l - r).abs() / l.abs().max(r.abs()));
        }
    }
    FactoidReport {
        omega_poly: omega.powi(4) + 4.0 * omega * omega - 1.0,
        zeta_poly: quartic(zeta),
        zeta_formula_poly: quartic(zf),
        zeta_formula: zeta - zf,
        product: zeta * (omega.powi(3) + omega) / 2.0 - 1.0,
        factorisation,
        reciprocal_identity: reciprocal,
    }
}

/// Empirical sup over `grid` of `sqrt(h) / |m^2 - omega^2|`.
pub fn edge_bound_constant(grid: &[C64]) -> Result<f64> {
    let omega = law_constants().omega;
    let mut sup = 0.0f64;
    for &z in grid {
        let p = m_ac(UHPoint::new(z)?)?;
        sup = sup.max(p.h.sqrt() / (p.m * p.m - omega * omega).norm());
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn imaginary_axis_root() {
        let p = m_ac(UHPoint::from_parts(0.0, 1.0).unwrap()).unwrap();
        assert!(p.m.re.abs() < 1e-12);
        let v = p.m.im;
        assert!(v > 0.0 && v < 1.0);
        assert!((v.powi(3) + v * v + v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_z_asymptotics() {
        let z = c(0.0, 10.0);
        let m = m_at(z).unwrap();
        assert!((m + 1.0 / z).norm() <= 0.05);
    }

    #[test]
    fn refuses_near_real_axis() {
        assert!(matches!(
            m_ac(UHPoint::from_parts(0.5, 1e-9).unwrap()),
            Err(Error::DegenerateRoot { .. })
        ));
        assert!(UHPoint::from_parts(0.5, 0.0).is_err());
    }

    #[test]
    fn density_vanishes_outside_support() {
        let zeta = law_constants().zeta;
        let o = DensityOptions::default();
        assert_eq!(density_ac(zeta + 0.5, &o).unwrap(), 0.0);
        assert_eq!(density_ac(-zeta - 0.5, &o).unwrap(), 0.0);
    }

    #[test]
    fn density_rejects_bad_ladder() {
        let o = DensityOptions { ladder: vec![1e-4, 1e-3], tol: 1.0 };
        assert!(density_ac(0.0, &o).is_err());
    }

    #[test]
    fn region_d_corners() {
        let omega = law_constants().omega;
        assert!(in_region_d(c(0.0, 0.0)));
        assert!(in_region_d(c(omega, 0.0)));
        assert!(!in_region_d(c(omega + 0.01, 0.0)));
    }

    #[test]
    fn quadrant_inside_d_has_positive_imaginary_part() {
        let q = quadrant_of(c(0.2, 0.2), DEFAULT_POLE_EXCLUSION);
        assert!(matches!(q, Quadrant::First | Quadrant::Second));
        let w = quadrant_rational(c(0.2, 0.2));
        assert!(w.im > 0.0);
        assert_eq!(quadrant_of(c(1e-4, 0.0), DEFAULT_POLE_EXCLUSION), Quadrant::NearPole);
    }

    #[test]
    fn factorisation_at_two() {
        let omega = law_constants().omega;
        assert!(factorisation_residual(2.0, omega, 1.0) <= 1e-10);
        assert!(factorisation_residual(2.0, omega, -1.0) <= 1e-10);
    }
}
