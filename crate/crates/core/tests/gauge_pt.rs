//! Invariants of the two-oscillator gauge comparison.

use gie_core::gauge_pt::{self, GridPreset, LorentzOptions, ModeGrid, OscillatorPair};

fn medium(pair: &OscillatorPair<f64>) -> ModeGrid<f64> {
    ModeGrid::preset(GridPreset::Medium, pair, pair.separation / 8.0).unwrap()
}

#[test]
fn fock_cutoff_convergence() {
    let small = OscillatorPair { fock_cutoff: 4, ..OscillatorPair::<f64>::reference() };
    let large = OscillatorPair { fock_cutoff: 8, ..small };
    let c4 = gauge_pt::epsilon_coulomb(&small).unwrap().value;
    let c8 = gauge_pt::epsilon_coulomb(&large).unwrap().value;
    assert!((c4 - c8).norm() <= 1e-12 * c4.norm());
    let grid = medium(&small);
    let opts = LorentzOptions::default();
    let l4 = gauge_pt::epsilon_lorentz(&small, &grid, &opts).unwrap().value;
    let l8 = gauge_pt::epsilon_lorentz(&large, &grid, &opts).unwrap().value;
    assert!((l4 - l8).norm() < 0.01 * l4.norm());
}

#[test]
fn coulomb_amplitude_scales_as_inverse_cube() {
    let base = OscillatorPair::<f64>::reference();
    let reference = gauge_pt::epsilon_coulomb(&base).unwrap().value.norm() * base.separation.powi(3);
    for factor in [1.5, 2.0, 4.0, 10.0] {
        let pair = OscillatorPair { separation: base.separation * factor, ..base };
        let scaled = gauge_pt::epsilon_coulomb(&pair).unwrap().value.norm() * pair.separation.powi(3);
        assert!(((scaled - reference) / reference).abs() <= 1e-10, "factor {factor}");
    }
}

#[test]
fn lorentz_amplitude_is_real() {
    let pair = OscillatorPair::<f64>::reference();
    let eps = gauge_pt::epsilon_lorentz(&pair, &medium(&pair), &LorentzOptions::default()).unwrap().value;
    assert!(eps.im.abs() <= 1e-10 * eps.norm(), "imaginary residue {}", eps.im / eps.norm());
}

#[test]
fn report_flags_too_few_grids() {
    let pair = OscillatorPair::<f64>::reference();
    let grids = [medium(&pair)];
    assert!(gauge_pt::gauge_equivalence_report(&pair, &grids, &LorentzOptions::default(), 0.05).is_err());
}
