//! Numerical laboratory for gravitationally induced entanglement (GIE).
//!
//! The crate evaluates the same two-body entangling interaction through
//! several equivalent formulations and cross-checks them:
//!
//! * [`hilbert`]: truncated Hilbert-space states, partial traces, negativity, witnesses.
//! * [`interferometer`]: branch phases and the four-branch state of two matter-wave
//!   interferometers.
//! * [`gauge_pt`]: the two-oscillator toy model, with the entanglement amplitude from the
//!   instantaneous Coulomb term (first order) and from scalar/longitudinal mediator sums
//!   with indefinite-metric signs (second order).
//! * [`fielddecomp`]: spectral Helmholtz / transverse-traceless decompositions and the
//!   Poisson-gauge constraint solvers on a periodic box.
//! * [`pathint`]: semiclassical branch phases on piecewise-linear worldlines with
//!   instantaneous and retarded kernels.
//! * [`cosmo`]: Mukhanov-Sasaki mode evolution and primordial spectra.
//! * [`runner`]: config ingestion, experiment registry and result records.
//!
//! Numerical code is generic over the scalar type through [`Real`]; the `*64`
//! aliases below fix it to `f64`, which is what the experiments use.

// Validation is written as `!(x > 0)` so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cosmo;
pub mod fielddecomp;
pub mod gauge_pt;
pub mod hilbert;
pub mod interferometer;
pub mod linalg;
pub mod ode;
pub mod pathint;
pub mod quad;
pub mod runner;

mod real;

pub use real::Real;

pub type Complex<T> = num_complex::Complex<T>;

pub type StateVector64 = hilbert::StateVector<f64>;
pub type DensityMatrix64 = hilbert::DensityMatrix<f64>;
pub type WitnessOperator64 = hilbert::WitnessOperator<f64>;
pub type InterferometerConfig64 = interferometer::InterferometerConfig<f64>;
pub type OscillatorPair64 = gauge_pt::OscillatorPair<f64>;
pub type ModeGrid64 = gauge_pt::ModeGrid<f64>;
pub type Grid3D64 = fielddecomp::Grid3D<f64>;
pub type ScalarField64 = fielddecomp::ScalarField<f64>;
pub type VectorField64 = fielddecomp::VectorField<f64>;
pub type SymTensorField64 = fielddecomp::SymTensorField<f64>;
pub type Worldline64 = pathint::Worldline<f64>;
pub type BranchProtocol64 = pathint::BranchProtocol<f64>;
pub type Background64 = cosmo::Background<f64>;
pub type ModeFunction64 = cosmo::ModeFunction<f64>;
