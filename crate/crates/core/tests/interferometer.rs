//! Interferometer invariants, with exact rational arithmetic as the phase oracle.

use gie_core::hilbert::DensityMatrix;
use gie_core::interferometer::{self as ifm, CouplingModel, InterferometerConfig};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use proptest::prelude::*;

fn config() -> impl Strategy<Value = InterferometerConfig<f64>> {
    (-16.0..-12.0f64, -16.0..-12.0f64, -5.0..-2.0f64, 0.01..0.95f64, -2.0..2.0f64).prop_map(|(m1, m2, d, frac, t)| {
        let d = 10f64.powf(d);
        InterferometerConfig::si(10f64.powf(m1), 10f64.powf(m2), d, frac * d, 10f64.powf(t))
    })
}

fn exact(cfg: &InterferometerConfig<f64>) -> (f64, f64) {
    let r = |x: f64| BigRational::from_float(x).unwrap();
    let one = BigRational::from_integer(BigInt::from(1));
    let p = r(cfg.g) * r(cfg.m1) * r(cfg.m2) * r(cfg.t) / r(cfg.hbar);
    let (d, dx) = (r(cfg.d), r(cfg.delta_x));
    let plus = &p * (&one / (&d + &dx) - &one / &d);
    let minus = &p * (&one / (&d - &dx) - &one / &d);
    (plus.to_f64().unwrap(), minus.to_f64().unwrap())
}

proptest! {
    #[test]
    fn phases_match_exact_rationals(cfg in config()) {
        let (plus, minus) = ifm::branch_phases(&cfg).unwrap();
        let (ep, em) = exact(&cfg);
        prop_assert!(((plus - ep) / ep).abs() <= 1e-12);
        prop_assert!(((minus - em) / em).abs() <= 1e-12);
    }

    #[test]
    fn swapping_masses_leaves_phases(cfg in config()) {
        let swapped = InterferometerConfig { m1: cfg.m2, m2: cfg.m1, ..cfg };
        let (a, b) = ifm::branch_phases(&cfg).unwrap();
        let (c, d) = ifm::branch_phases(&swapped).unwrap();
        prop_assert!(((a - c) / a).abs() <= 1e-15 && ((b - d) / b).abs() <= 1e-15);
    }

    #[test]
    fn negativity_depends_only_on_phase_sum(cfg in config(), frac in 0.01..0.95f64, sum in 0.0..12.0f64) {
        let other = InterferometerConfig { delta_x: frac * cfg.d, ..cfg };
        let at_sum = |c: &InterferometerConfig<f64>| {
            let t = sum / ifm::phase_sum_rate(c).unwrap();
            ifm::branch_negativity(&ifm::evolve_branches(&c.with_time(t)).unwrap().state).unwrap()
        };
        prop_assert!((at_sum(&cfg) - at_sum(&other)).abs() <= 1e-12);
    }

    #[test]
    fn negativity_formula_against_partial_transpose(cfg in config()) {
        let (plus, minus) = ifm::branch_phases(&cfg).unwrap();
        let state = ifm::evolve_branches(&cfg).unwrap().state;
        let brute = DensityMatrix::from_pure(&state).negativity(&[1]).unwrap();
        let formula = (0.5 * (plus + minus)).sin().abs() / 2.0;
        prop_assert!((brute - formula).abs() <= 1e-10);
    }
}

#[test]
fn mean_field_scan_stays_separable() {
    let cfg = InterferometerConfig::si(1e-14, 1e-14, 450e-6, 250e-6, 2.5);
    let times = ifm::linear_times(0.1, 10.0, 50);
    let rows = ifm::entanglement_scan(&cfg, &times, None, CouplingModel::MeanField).unwrap();
    assert!(rows.iter().all(|r| r.negativity <= 1e-12));
    let quantum = ifm::entanglement_scan(&cfg, &times, None, CouplingModel::Quantum).unwrap();
    assert!(quantum.iter().any(|r| r.negativity > 0.1));
}
