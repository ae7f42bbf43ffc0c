//! Checks against values computed independently in the test code.

use anticomm::freelaw::{self, law_constants, DensityOptions, UHPoint};
use anticomm::linalg::{self, c, CMat, Mat3, C64};
use anticomm::linearize::{self, build_linearization};
use anticomm::locallaw::{self, Spectral};
use anticomm::sdcore::{self, LinMap3, BASIS};
use anticomm::tails;
use anticomm::wigner::{sample_pair, EnsembleSpec, EntryLaw};
use nalgebra::SMatrix;

/// Follows the Stieltjes branch down a vertical line from `Im z = 200` by Newton steps.
fn m_by_continuation(re: f64, im: f64) -> C64 {
    let top = 200.0f64;
    let steps = 4000;
    let z0 = c(re, top);
    let mut m = -1.0 / z0 - 2.0 / (z0 * z0 * z0);
    for k in 1..=steps {
        let t = k as f64 / steps as f64;
        let z = c(re, (top.ln() + t * (im.ln() - top.ln())).exp());
        for _ in 0..8 {
            let f = z * m * m * m - m * m - z * m - 1.0;
            let df = 3.0 * z * m * m - 2.0 * m - z;
            m -= f / df;
        }
    }
    m
}

#[test]
fn constants_match_closed_forms() {
    let k = law_constants();
    assert!((k.zeta - 3.330190676).abs() < 1e-9);
    assert!((k.omega - 0.4858682712).abs() < 1e-9);
    assert!((k.zeta * k.zeta - (11.0 + 5.0 * 5f64.sqrt()) / 2.0).abs() < 1e-12);
    assert!((k.rho_aux - (k.omega.powi(3) + 5.0 * k.omega) / 2.0).abs() < 1e-15);
}

#[test]
fn stieltjes_value_matches_continuation() {
    for &(re, im) in &[(0.0, 0.05), (1.5, 0.01), (-3.0, 0.2), (3.4, 0.02), (-7.0, 1.0), (0.3, 5.0)] {
        let want = m_by_continuation(re, im);
        let got = freelaw::m_ac(UHPoint::from_parts(re, im).unwrap()).unwrap().m;
        assert!((got - want).norm() < 1e-10, "z = {re}+{im}i: {got} vs {want}");
    }
}

#[test]
fn stieltjes_value_matches_large_matrices() {
    let z = c(0.5, 0.5);
    let m = freelaw::m_at(z).unwrap();
    let mut acc = c(0.0, 0.0);
    let seeds = 4;
    for s in 0..seeds {
        let pair = sample_pair(&EnsembleSpec::new(400, EntryLaw::ComplexGaussian, s).unwrap());
        let h = pair.anticommutator() - CMat::identity(400, 400) * z;
        let r = linalg::inverse_checked(&h, 1e12).unwrap();
        acc += r.trace() / 400.0;
    }
    let emp = acc / seeds as f64;
    assert!((emp - m).norm() < 0.02, "{emp} vs {m}");
}

#[test]
fn density_second_moment_is_two() {
    // tr((uv+vu)^2) = 2 for free semicirculars of unit variance
    let zeta = law_constants().zeta;
    let opts = DensityOptions::default();
    let panels = 2000;
    let step = std::f64::consts::PI / panels as f64;
    let mut acc = 0.0;
    for k in 0..=panels {
        let th = -std::f64::consts::FRAC_PI_2 + step * k as f64;
        let w = if k == 0 || k == panels { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let t = zeta * th.sin();
        acc += w * t * t * freelaw::density_ac(t, &opts).unwrap() * zeta * th.cos();
    }
    let second = acc * step / 3.0;
    assert!((second - 2.0).abs() < 2e-3, "{second}");
}

#[test]
fn semicircle_transform_matches_quadrature() {
    for &z in &[c(0.0, 1.0), c(1.5, 0.7), c(-3.0, 0.4)] {
        let panels = 4000;
        let step = std::f64::consts::PI / panels as f64;
        let mut acc = c(0.0, 0.0);
        for k in 0..=panels {
            let th = -std::f64::consts::FRAC_PI_2 + step * k as f64;
            let w = if k == 0 || k == panels { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            let t = 2.0 * th.sin();
            let dens = (4.0 - t * t).max(0.0).sqrt() / (2.0 * std::f64::consts::PI);
            acc += w * dens * 2.0 * th.cos() / (t - z);
        }
        let want = acc * step / 3.0;
        assert!((sdcore::m_sc(z) - want).norm() < 1e-8);
    }
}

#[test]
fn kappa_blocks_match_direct_matrix() {
    for &z in &[c(0.3, 0.4), c(-2.0, 0.1), c(5.0, 2.0)] {
        let m = freelaw::m_at(z).unwrap();
        let mm = sdcore::m_mat_ac(m);
        let m_inv = mm.try_inverse().unwrap();
        // matrix of x -> M^{-1} x - Phi(x) M in the block coordinates
        let mut direct = SMatrix::<C64, 9, 9>::zeros();
        for (col, &(a, b)) in BASIS.iter().enumerate() {
            let mut e = Mat3::zeros();
            e[(a, b)] = c(1.0, 0.0);
            let img = m_inv * e - sdcore::phi_ac(&e) * mm;
            for (row, &(p, q)) in BASIS.iter().enumerate() {
                direct[(row, col)] = img[(p, q)];
            }
        }
        let blocks = sdcore::kappa_blocks(m).unwrap();
        let assembled = blocks.assembled_kappa_inverse().matrix;
        let scale = direct.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let gap = (assembled - direct).iter().map(|x| x.norm()).fold(0.0, f64::max) / scale;
        assert!(gap < 1e-12, "z = {z}: {gap}");
        let inv = direct.try_inverse().unwrap();
        let k = blocks.assembled_kappa().matrix;
        let gap = (k - inv).iter().map(|x| x.norm()).fold(0.0, f64::max) / inv.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(gap < 1e-10, "z = {z}: {gap}");
    }
}

#[test]
fn linmap_inverse_round_trip() {
    let phi = sdcore::phi_map();
    let shifted = LinMap3::from_fn(|x| x * c(2.0, 0.5) + phi.apply(x));
    let inv = shifted.inverse(1e12).unwrap();
    let x = Mat3::from_fn(|i, j| c(i as f64 - 0.5 * j as f64, 0.25 * (i * j) as f64));
    let back = inv.apply(&shifted.apply(&x));
    assert!(sdcore::rel_diff(&back, &x) < 1e-13);
}

#[test]
fn generalized_resolvent_corner_is_anticommutator_resolvent() {
    let pair = sample_pair(&EnsembleSpec::new(12, EntryLaw::ComplexGaussian, 2).unwrap());
    let lin = build_linearization(&pair);
    let z = c(0.4, 0.3);
    let zp = UHPoint::new(z).unwrap();
    let fast = linearize::generalized_resolvent(&lin, zp).unwrap();
    let direct = linearize::generalized_resolvent_direct(&lin, zp).unwrap();
    assert!(linalg::max_abs(&(&fast - &direct)) / linalg::max_abs(&direct) < 1e-11);
    let small = linalg::inverse_checked(&(pair.anticommutator() - CMat::identity(12, 12) * z), 1e12).unwrap();
    let corner = direct.view((0, 0), (12, 12)).into_owned();
    assert!(linalg::max_abs(&(&corner - &small)) / linalg::max_abs(&small) < 1e-11);
}

#[test]
fn spectral_diagonal_matches_direct_inverse() {
    let pair = sample_pair(&EnsembleSpec::new(20, EntryLaw::Rademacher, 4).unwrap());
    let z = c(-0.7, 0.2);
    let sp = Spectral::new(&pair.u).unwrap();
    let d = sp.diag(z).unwrap();
    let r = linalg::inverse_checked(&(&pair.u - CMat::identity(20, 20) * z), 1e12).unwrap();
    for i in 0..20 {
        assert!((d[i] - r[(i, i)]).norm() < 1e-12);
    }
}

#[test]
fn sigma_closed_forms() {
    let zeta = law_constants().zeta;
    for &rho in &[0.3, 0.05, 1e-3] {
        // bulk: h = 1 so sigma = rho
        assert!((locallaw::solve_sigma(6.0, rho).unwrap() - rho).abs() < 1e-12);
        // edge: h = sigma so sigma^3 = rho
        assert!((locallaw::solve_sigma(-zeta, rho).unwrap() - rho.cbrt()).abs() < 1e-12);
    }
}

#[test]
fn absolute_normal_moments() {
    let pi = std::f64::consts::PI;
    assert!((tails::theta_fn(1.0) - (2.0 / pi).sqrt()).abs() < 1e-14);
    assert!((tails::theta_fn(2.0) - 1.0).abs() < 1e-13);
    assert!((tails::theta_fn(4.0) - 3.0).abs() < 1e-12);
    assert!((tails::theta_fn(6.0) - 15.0).abs() < 1e-11);
    assert!((tails::theta_fn(3.0) - 2.0 * (2.0 / pi).sqrt()).abs() < 1e-13);
    assert!((tails::gamma_fn(5.0) - 24.0).abs() < 1e-10);
}

#[test]
fn splitting_constant_matches_simulation() {
    for &n in &[4usize, 7, 10] {
        let exact = tails::splitting_constant(n);
        let mc = tails::splitting_constant_mc(n, 40000, n as u64);
        assert!((exact - mc).abs() < 0.01, "n = {n}: {exact} vs {mc}");
    }
}

#[test]
fn entry_variance_is_one_over_n() {
    let n = 60;
    for law in [EntryLaw::ComplexGaussian, EntryLaw::RealGaussian, EntryLaw::Rademacher, EntryLaw::UniformBounded] {
        let mut acc = 0.0;
        let mut count = 0.0;
        for s in 0..5 {
            let p = sample_pair(&EnsembleSpec::new(n, law, s).unwrap());
            for i in 0..n {
                for j in (i + 1)..n {
                    acc += p.u[(i, j)].norm_sqr() + p.v[(i, j)].norm_sqr();
                    count += 2.0;
                }
            }
        }
        let var = acc / count * n as f64;
        assert!((var - 1.0).abs() < 0.05, "{law:?}: {var}");
    }
}
