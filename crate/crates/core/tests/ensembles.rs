use anticomm::linalg::{c, Mat3};
use anticomm::sdcore::phi_ac;
use anticomm::tails;
use anticomm::wigner::{self, EnsembleSpec, EntryLaw};

#[test]
fn x_blocks_average_to_phi() {
    let spec = EnsembleSpec::new(6, EntryLaw::ComplexGaussian, 40).unwrap();
    let a = Mat3::from_fn(|i, j| c(1.0 + i as f64, 0.5 * j as f64 - 0.25));
    let same = wigner::check_x_structure(&spec, &a, (0, 2, 2), 4000).unwrap();
    assert!(same.holds, "{same:?}");
    let t = phi_ac(&a);
    assert!((same.target[0][0][0] - t[(0, 0)].re).abs() < 1e-15);
    let cross = wigner::check_x_structure(&spec, &a, (0, 2, 3), 4000).unwrap();
    assert!(cross.holds, "{cross:?}");
    assert!(cross.target.iter().flatten().all(|e| e[0] == 0.0 && e[1] == 0.0));
}

#[test]
fn moment_condition_light_and_heavy() {
    let p = [2.0, 4.0, 8.0, 12.0];
    for law in [EntryLaw::ComplexGaussian, EntryLaw::Rademacher, EntryLaw::UniformBounded] {
        let r = wigner::check_moment_condition(&EnsembleSpec::new(16, law, 3).unwrap(), &p, 20000).unwrap();
        assert!(r.holds, "{law:?}");
    }
    // Student t(3) has no fourth moment, so high p-norms blow past any fixed bound
    let r = wigner::check_moment_condition(&EnsembleSpec::new(16, EntryLaw::HeavyTailed, 3).unwrap(), &p, 20000)
        .unwrap();
    assert!(!r.holds);
}

#[test]
fn norm_event_is_rare_for_moderate_n() {
    let spec = EnsembleSpec::new(64, EntryLaw::ComplexGaussian, 0).unwrap();
    assert_eq!(wigner::norm_event_rate(&spec, 20), 0.0);
}

#[test]
fn whittle_refuses_complex_law() {
    assert!(tails::whittle_check(EntryLaw::ComplexGaussian, 8, 4.0, 200, tails::WhittleMode::Linear, 0).is_err());
    assert!(tails::whittle_check(EntryLaw::RealGaussian, 8, 20.0, 200, tails::WhittleMode::Linear, 0).is_err());
}

#[test]
fn tail_and_moment_conversions() {
    let b = tails::tail_to_moment(0.5, 2.0, 4.0).unwrap();
    assert!((b.norm_bound - 4f64.sqrt() * b.normalized).abs() < 1e-14);
    assert!(tails::tail_to_moment(0.5, 0.5, 4.0).is_err());
    let hi = tails::moment_to_tail(1.0, 20.0).unwrap();
    let lo = tails::moment_to_tail(1.0, 40.0).unwrap();
    assert!(lo < hi && hi <= 1.0);
}
