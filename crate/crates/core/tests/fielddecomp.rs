//! Linearity and Parseval consistency of the spectral solvers.

use gie_core::fielddecomp::{self, ConservationMode, Grid3D, ScalarField, StressEnergy, SymTensorField, VectorField};
use proptest::prelude::*;

const N: usize = 16;

fn grid() -> Grid3D<f64> {
    Grid3D::new(N, 1.0).unwrap()
}

fn zero_mean(seed: u64) -> ScalarField<f64> {
    let mut f = fielddecomp::band_limited_random(grid(), 4, seed);
    let mean = f.mean();
    f.values.iter_mut().for_each(|v| *v -= mean);
    f
}

fn combine(a: &[f64], b: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| alpha * x + beta * y).collect()
}

fn rel_diff(lhs: &[f64], rhs: &[f64]) -> f64 {
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    lhs.iter().zip(rhs).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn transverse(seed: u64) -> VectorField<f64> {
    let c = |s| fielddecomp::band_limited_random(grid(), 4, s).values;
    fielddecomp::helmholtz_vector(&VectorField { grid: grid(), components: [c(seed), c(seed + 1), c(seed + 2)] }).1
}

fn traceless(seed: u64) -> SymTensorField<f64> {
    let components = std::array::from_fn(|i| fielddecomp::band_limited_random(grid(), 4, seed + i as u64).values);
    SymTensorField { grid: grid(), components }.traceless_part()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solvers_are_linear(seed in 0u64..1_000_000, alpha in -3.0..3.0f64, beta in -3.0..3.0f64) {
        let g = 1.0;
        let (a, b) = (zero_mean(seed), zero_mean(seed + 7));
        let ab = ScalarField { grid: grid(), values: combine(&a.values, &b.values, alpha, beta) };
        let psi = |f: &ScalarField<f64>| fielddecomp::solve_psi(f, g).unwrap().values;
        let expected = combine(&psi(&a), &psi(&b), alpha, beta);
        prop_assert!(rel_diff(&psi(&ab), &expected) <= 1e-11);

        let (fa, fb) = (transverse(seed), transverse(seed + 11));
        let fab = VectorField { grid: grid(), components: std::array::from_fn(|i| combine(&fa.components[i], &fb.components[i], alpha, beta)) };
        let w = |f: &VectorField<f64>| fielddecomp::solve_w(f, g).unwrap();
        let (wa, wb, wab) = (w(&fa), w(&fb), w(&fab));
        for i in 0..3 {
            prop_assert!(rel_diff(&wab.components[i], &combine(&wa.components[i], &wb.components[i], alpha, beta)) <= 1e-11);
        }

        let (pa, pb) = (traceless(seed + 20), traceless(seed + 30));
        let pab = SymTensorField { grid: grid(), components: std::array::from_fn(|i| combine(&pa.components[i], &pb.components[i], alpha, beta)) };
        let zero = ScalarField::zeros(grid());
        let phi = |p: &SymTensorField<f64>| fielddecomp::solve_phi(&zero, p, g).unwrap().values;
        prop_assert!(rel_diff(&phi(&pab), &combine(&phi(&pa), &phi(&pb), alpha, beta)) <= 1e-11);

        let tt = |p: &SymTensorField<f64>| fielddecomp::decompose_tensor(p).unwrap().transverse_traceless;
        let (ta, tb, tab) = (tt(&pa), tt(&pb), tt(&pab));
        for i in 0..6 {
            prop_assert!(rel_diff(&tab.components[i], &combine(&ta.components[i], &tb.components[i], alpha, beta)) <= 1e-11);
        }
    }

    #[test]
    fn spectral_newtonian_term_matches_real_space_integral(seed in 0u64..1_000_000) {
        let g = 1.0;
        let t00 = zero_mean(seed);
        let terms = fielddecomp::assemble_interaction(&StressEnergy::dust(t00.clone()), g, ConservationMode::Static).unwrap();
        // −(G/2)∫∫ρρ/|r − r'| = ½ ∫ ρ ψ with ψ = −G ∫ ρ/|r − r'|.
        let psi = fielddecomp::solve_psi(&t00, g).unwrap();
        let product = ScalarField { grid: grid(), values: t00.values.iter().zip(&psi.values).map(|(a, b)| a * b).collect() };
        let real_space = 0.5 * product.integral();
        prop_assert!(((terms.newtonian - real_space) / real_space).abs() <= 1e-8);
    }
}

#[test]
fn field_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("f");
    let v = transverse(3);
    let parts: Vec<&[f64]> = v.components.iter().map(Vec::as_slice).collect();
    fielddecomp::write_field(&base, &grid(), &parts).unwrap();
    let (g, comps) = fielddecomp::read_field(&base).unwrap();
    assert_eq!(g, grid());
    assert_eq!(comps.len(), 3);
    assert!(comps.iter().zip(&v.components).all(|(a, b)| a == b));
}

#[test]
fn solve_psi_rejects_net_mass() {
    let f = ScalarField::from_fn(grid(), |_| 1.0);
    assert!(fielddecomp::solve_psi(&f, 1.0).is_err());
}
