use anticomm::freelaw::{self, UHPoint};
use anticomm::io::{pair_from_text, pair_to_text};
use anticomm::linalg::{c, norm3, CMat, Mat3};
use anticomm::linearize::{self, build_linearization, StatsMethod, ZRect};
use anticomm::locallaw::{self, GridSpec};
use anticomm::sdcore;
use anticomm::wigner::{sample_pair, EnsembleSpec, EntryLaw};
use proptest::prelude::*;

fn law() -> impl Strategy<Value = EntryLaw> {
    prop_oneof![
        Just(EntryLaw::ComplexGaussian),
        Just(EntryLaw::RealGaussian),
        Just(EntryLaw::Rademacher),
        Just(EntryLaw::UniformBounded),
    ]
}

fn hermitian(n: usize, vals: &[f64]) -> CMat {
    let mut h = CMat::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        h[(i, i)] = c(vals[k], 0.0);
        k += 1;
        for j in (i + 1)..n {
            h[(i, j)] = c(vals[k], vals[k + 1]);
            h[(j, i)] = h[(i, j)].conj();
            k += 2;
        }
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn law_point_invariants(re in -10.0f64..10.0, im in 1e-2f64..10.0) {
        let z = c(re, im);
        let p = freelaw::m_ac(UHPoint::new(z).unwrap()).unwrap();
        prop_assert!(p.residual <= 1e-10);
        prop_assert!(p.m.im > 0.0);
        prop_assert!(p.m.norm() <= 1f64.min(1.0 / im) * (1.0 + 1e-12));
        prop_assert!(freelaw::in_region_d_interior(p.m));
        prop_assert!(p.h > 0.0 && p.h <= 1.0);
        // the law is symmetric: m(-conj z) = -conj m(z)
        let q = freelaw::m_at(c(-re, im)).unwrap();
        prop_assert!((q + p.m.conj()).norm() <= 1e-12);
    }

    #[test]
    fn sigma_solver_range(lambda in -10.0f64..10.0, rho in 1e-6f64..0.9) {
        let s = locallaw::solve_sigma(lambda, rho).unwrap();
        prop_assert!(locallaw::sigma_residual(lambda, s, rho) <= 1e-10);
        prop_assert!(s >= rho * (1.0 - 1e-12));
        prop_assert!(s <= rho.cbrt() * (1.0 + 1e-12));
    }

    #[test]
    fn sigma_monotone_in_rho(lambda in -8.0f64..8.0, a in 1e-5f64..0.5, b in 1e-5f64..0.5) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let s_lo = locallaw::solve_sigma(lambda, lo).unwrap();
        let s_hi = locallaw::solve_sigma(lambda, hi).unwrap();
        prop_assert!(s_lo <= s_hi + 1e-15);
    }

    #[test]
    fn semicircle_root(re in -6.0f64..6.0, im in 1e-3f64..6.0) {
        let z = c(re, im);
        let m = sdcore::m_sc(z);
        prop_assert!(m.im > 0.0);
        prop_assert!((m * m + z * m + 1.0).norm() <= 1e-12 * (1.0 + z.norm()));
    }

    #[test]
    fn stability_implication_holds(re in -8.0f64..8.0, im in 5e-2f64..8.0,
                                   dir in proptest::collection::vec(-1.0f64..1.0, 18),
                                   scale in 0.0f64..1.5) {
        let base = sdcore::sd_solution_ac(UHPoint::from_parts(re, im).unwrap()).unwrap();
        let d = Mat3::from_fn(|i, j| c(dir[2 * (3 * i + j)], dir[2 * (3 * i + j) + 1]));
        let d = d / c(norm3(&d).max(1e-300), 0.0);
        let g0 = base.m_mat + d * c(scale * base.stability_radius, 0.0);
        let v = sdcore::stability_check(&base, &g0);
        prop_assert!(v.holds, "{v:?}");
    }

    #[test]
    fn magic_identity(vals in proptest::collection::vec(-1.0f64..1.0, 49), re in -2.0f64..2.0, im in 0.05f64..2.0) {
        let h = hermitian(7, &vals);
        let r = linearize::magic_resolvent_check(&h, UHPoint::from_parts(re, im).unwrap()).unwrap();
        prop_assert!(r.row_residual <= 1e-10 && r.col_residual <= 1e-10, "{r:?}");
    }

    #[test]
    fn block_inversion(vals in proptest::collection::vec(-1.0f64..1.0, 72), split in 1usize..6) {
        let mut m = CMat::from_fn(6, 6, |i, j| c(vals[2 * (6 * i + j)], vals[2 * (6 * i + j) + 1]));
        for i in 0..6 {
            m[(i, i)] += c(8.0, 0.0);
        }
        let r = linearize::block_inversion_check(&m, split).unwrap();
        prop_assert!(r.schur_complement <= 1e-12 && r.corner_block <= 1e-12, "{r:?}");
    }

    #[test]
    fn grid_points_ordered(n_re in 1usize..8, n_im in 1usize..8, log in any::<bool>()) {
        let g = GridSpec { re_min: -2.0, re_max: 3.0, n_re, im_min: 0.01, im_max: 4.0, n_im, log_im: log };
        let p = g.points();
        prop_assert_eq!(p.len(), n_re * n_im);
        for w in p.windows(2) {
            prop_assert!(w[1].im > w[0].im || (w[1].im == w[0].im && w[1].re > w[0].re));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pair_sampling_deterministic_and_hermitian(n in 2usize..12, seed in any::<u64>(), law in law()) {
        let spec = EnsembleSpec::new(n, law, seed).unwrap();
        let a = sample_pair(&spec);
        let b = sample_pair(&spec);
        prop_assert_eq!(&a.u, &b.u);
        prop_assert_eq!(&a.v, &b.v);
        prop_assert_eq!(&a.u, &a.u.adjoint());
        prop_assert_eq!(&a.v, &a.v.adjoint());
        let back = pair_from_text(&pair_to_text(&a)).unwrap();
        prop_assert_eq!(&back.u, &a.u);
        prop_assert_eq!(&back.v, &a.v);
    }

    #[test]
    fn linearization_identities(n in 2usize..10, seed in 0u64..1000, re in -3.0f64..3.0, im in 0.05f64..2.0) {
        let pair = sample_pair(&EnsembleSpec::new(n, EntryLaw::ComplexGaussian, seed).unwrap());
        let lin = build_linearization(&pair);
        let z = UHPoint::from_parts(re, im).unwrap();
        prop_assert!(linearize::factorization_residual(&lin, z.z()) <= 1e-12);
        prop_assert!(linearize::basic_identities(&lin, z).unwrap().max() <= 1e-10);
        let idx: Vec<usize> = (0..n).collect();
        let slow = linearize::resolvent_stats_minor(&lin, z, &idx).unwrap();
        let fast = linearize::resolvent_stats_fast(&lin, z).unwrap();
        prop_assert!(linearize::key_identity_residual(&slow).unwrap() <= 1e-8);
        prop_assert!(linearize::schur_identity_residual(&lin, z, &idx).unwrap() <= 1e-8);
        for i in 0..n {
            prop_assert!((slow.r_i_frob[i] - fast.r_i_frob[i]).abs() <= 1e-8 * slow.r_i_frob[i]);
            prop_assert!((slow.kfrak_i[i] - fast.kfrak_i[i]).abs() <= 1e-8 * slow.kfrak_i[i]);
        }
    }

    #[test]
    fn kfrak_sup_grows_under_refinement(seed in 0u64..1000, spacing in 1.0f64..4.0) {
        let pair = sample_pair(&EnsembleSpec::new(6, EntryLaw::ComplexGaussian, seed).unwrap());
        let lin = build_linearization(&pair);
        let rect = ZRect { re_min: -4.0, re_max: 4.0, im_min: 0.25, im_max: 4.0 };
        let coarse = linearize::kfrak_sup(&lin, rect, spacing, StatsMethod::Schur, 1.0).unwrap();
        let fine = linearize::kfrak_sup(&lin, rect, spacing / 2.0, StatsMethod::Schur, 1.0).unwrap();
        for z in &coarse.net {
            prop_assert!(fine.net.contains(z));
        }
        prop_assert!(fine.k >= coarse.k);
    }

    #[test]
    fn figure1_rows_within_range(rho in 1e-4f64..0.5) {
        let rows = locallaw::figure1_data(&[rho]).unwrap();
        prop_assert_eq!(rows.len(), 1603);
        for r in &rows {
            prop_assert!(r.sigma >= rho * (1.0 - 1e-12) && r.sigma <= rho.cbrt() * (1.0 + 1e-12));
        }
    }
}

#[test]
fn uroboric_resolution_gap_flag() {
    // f1 jumps over the band between f3 and f2, which a continuous f1 could not do
    let r = locallaw::uroboric_check(&[0.0, 5.0], &[1.0, 1.0], &[0.5, 0.5], &[(0, 1)]).unwrap();
    assert!(r.failed_hypothesis.is_none());
    assert!(!r.conclusion_holds && r.resolution_gap);
    assert_eq!(r.conclusion_violations, vec![1]);
    let r = locallaw::uroboric_check(&[0.0, 0.2], &[1.0, 1.0], &[0.5, 0.5], &[]).unwrap();
    assert_eq!(r.failed_hypothesis.as_deref(), Some("connectivity"));
}
