//! Two masses, each split into a left/right spatial superposition, picking up
//! Newtonian branch phases.
//!
//! Geometry: mass 1 sits at `∓Δx/2`, mass 2 at `d ∓ Δx/2`. The four branch
//! separations are `LL = RR = d`, `LR = d + Δx`, `RL = d − Δx`, so the
//! relative phases of the `LR` and `RL` branches against `LL` are
//!
//! ```text
//! φ± = (G m₁ m₂ t / ħ) · (1/(d ± Δx) − 1/d)
//! ```
//!
//! `φ+` takes the `+` sign and is negative for an attractive interaction.
//! Both phases are returned relative to the `1/d` reference, so the product
//! state is recovered when `Δx → 0`.

use num_complex::Complex;
use rayon::prelude::*;

use crate::hilbert::{DensityMatrix, HilbertError, StateVector, WitnessOperator};
use crate::Real;

pub const CODATA_G: f64 = 6.674_30e-11;
pub const CODATA_HBAR: f64 = 1.054_571_817e-34;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InterferometerError {
    #[error("invalid configuration: {field} violates {condition}")]
    Invalid { field: &'static str, condition: &'static str },
    #[error("scan needs at least one time")]
    EmptyRange,
    #[error("scan times must be positive and strictly ascending (offending index {0})")]
    BadTimes(usize),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

/// Physical parameters of the interferometer in SI units (or any consistent
/// system, as long as `g` and `hbar` match).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerConfig<T> {
    pub m1: T,
    pub m2: T,
    pub d: T,
    pub delta_x: T,
    pub t: T,
    pub g: T,
    pub hbar: T,
}

impl<T: Real> InterferometerConfig<T> {
    /// Config with CODATA values for `G` and `ħ`.
    pub fn si(m1: T, m2: T, d: T, delta_x: T, t: T) -> Self {
        Self { m1, m2, d, delta_x, t, g: T::lit(CODATA_G), hbar: T::lit(CODATA_HBAR) }
    }

    pub fn validate(&self) -> Result<(), InterferometerError> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        let checks: [(bool, &'static str, &'static str); 7] = [
            (pos(self.m1), "m1", "m1 > 0"),
            (pos(self.m2), "m2", "m2 > 0"),
            (pos(self.t), "t", "t > 0"),
            (pos(self.hbar), "hbar", "hbar > 0"),
            (self.g >= T::zero() && self.g.is_finite(), "G", "G >= 0"),
            (pos(self.delta_x), "delta_x", "d > delta_x > 0"),
            (self.d.is_finite() && self.d > self.delta_x, "d", "d > delta_x > 0"),
        ];
        for (ok, field, condition) in checks {
            if !ok {
                return Err(InterferometerError::Invalid { field, condition });
            }
        }
        Ok(())
    }

    /// `G m₁ m₂ t / ħ`, grouped so that no intermediate leaves the normal
    /// floating-point range for laboratory parameters.
    pub fn prefactor(&self) -> T {
        (self.g / self.hbar) * self.m1 * self.m2 * self.t
    }

    pub fn with_time(&self, t: T) -> Self {
        Self { t, ..*self }
    }
}

/// Relative branch phases `(φ+, φ−)`.
///
/// Evaluated as `∓P Δx / (d (d ± Δx))`, which is algebraically identical to
/// the difference of inverse distances but free of cancellation.
pub fn branch_phases<T: Real>(cfg: &InterferometerConfig<T>) -> Result<(T, T), InterferometerError> {
    cfg.validate()?;
    let p = cfg.prefactor();
    let (d, dx) = (cfg.d, cfg.delta_x);
    let plus = -(p * dx) / (d * (d + dx));
    let minus = (p * dx) / (d * (d - dx));
    Ok((plus, minus))
}

/// Phase-sum accumulation rate `d(φ+ + φ−)/dt`.
pub fn phase_sum_rate<T: Real>(cfg: &InterferometerConfig<T>) -> Result<T, InterferometerError> {
    cfg.validate()?;
    let (d, dx) = (cfg.d, cfg.delta_x);
    let two = T::lit(2.0);
    Ok((cfg.g / cfg.hbar) * cfg.m1 * cfg.m2 * (two * dx * dx) / (d * (d - dx) * (d + dx)))
}

/// Four-branch state after the interaction time, in the order LL, LR, RL, RR.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchState<T> {
    /// Absolute dynamical phases `P/r` of the four branches.
    pub phases: [T; 4],
    pub state: StateVector<T>,
}

/// How the branches couple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingModel {
    /// Each branch pair feels the Newtonian potential of its own separation.
    #[default]
    Quantum,
    /// Each mass feels the potential of the other's averaged position
    /// distribution. The resulting phases are a sum of one-body terms, so
    /// the state stays a product.
    MeanField,
}

fn branch_distances<T: Real>(cfg: &InterferometerConfig<T>) -> [T; 4] {
    [cfg.d, cfg.d + cfg.delta_x, cfg.d - cfg.delta_x, cfg.d]
}

/// Builds the normalized state `(1, e^{iφ+}, e^{iφ−}, 1)/2`.
pub fn branch_state_from_phases<T: Real>(plus: T, minus: T) -> StateVector<T> {
    let half = T::lit(0.5);
    let amp = |phi: T| Complex::new(half * phi.cos(), half * phi.sin());
    StateVector::new(vec![2, 2], vec![amp(T::zero()), amp(plus), amp(minus), amp(T::zero())])
        .expect("2x2 state has four amplitudes")
}

pub fn evolve_branches<T: Real>(cfg: &InterferometerConfig<T>) -> Result<BranchState<T>, InterferometerError> {
    evolve_branches_with(cfg, CouplingModel::Quantum)
}

pub fn evolve_branches_with<T: Real>(
    cfg: &InterferometerConfig<T>,
    model: CouplingModel,
) -> Result<BranchState<T>, InterferometerError> {
    cfg.validate()?;
    let p = cfg.prefactor();
    let r = branch_distances(cfg);
    let abs = [p / r[0], p / r[1], p / r[2], p / r[3]];
    match model {
        CouplingModel::Quantum => {
            let (plus, minus) = branch_phases(cfg)?;
            Ok(BranchState { phases: abs, state: branch_state_from_phases(plus, minus) })
        }
        CouplingModel::MeanField => {
            // phase(a, b) = ½(⟨φ_ab⟩_b + ⟨φ_ab⟩_a), a sum of a-only and b-only terms.
            let quarter = T::lit(0.25);
            let row = |a: usize| (abs[2 * a] + abs[2 * a + 1]) * quarter;
            let col = |b: usize| (abs[b] + abs[2 + b]) * quarter;
            let phases = [row(0) + col(0), row(0) + col(1), row(1) + col(0), row(1) + col(1)];
            let rel = |i: usize| phases[i] - phases[0];
            let half = T::lit(0.5);
            let amps = (0..4).map(|i| Complex::new(half * rel(i).cos(), half * rel(i).sin())).collect();
            let state = StateVector::new(vec![2, 2], amps)?;
            Ok(BranchState { phases, state })
        }
    }
}

/// Smallest `t > 0` with `φ+ + φ− = π`.
pub fn max_entanglement_time<T: Real>(cfg: &InterferometerConfig<T>) -> Result<T, InterferometerError> {
    let rate = phase_sum_rate(cfg)?;
    if rate <= T::zero() {
        return Err(InterferometerError::Invalid { field: "G", condition: "G m1 m2 > 0 for a finite entangling time" });
    }
    Ok(T::PI() / rate)
}

/// Negativity of a two-qubit branch state across the mass 1 | mass 2 cut.
pub fn branch_negativity<T: Real>(state: &StateVector<T>) -> Result<T, InterferometerError> {
    Ok(DensityMatrix::from_pure(state).negativity(&[1])?)
}

/// Default witness `½·I − |Φ⟩⟨Φ|`, with `Φ` the branch state at the first
/// time of maximal entanglement.
pub fn default_witness<T: Real>(cfg: &InterferometerConfig<T>) -> Result<WitnessOperator<T>, InterferometerError> {
    let t_star = max_entanglement_time(cfg)?;
    let target = evolve_branches(&cfg.with_time(t_star))?;
    Ok(WitnessOperator::projector(&target.state)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow<T> {
    pub t: T,
    pub phi_plus: T,
    pub phi_minus: T,
    pub negativity: T,
    pub witness: T,
}

/// Evaluates phases, negativity and witness value at each time.
///
/// Rows are computed in parallel and returned in input order; each row is a
/// pure function of its time, so the output does not depend on the pool size.
pub fn entanglement_scan<T: Real>(
    cfg: &InterferometerConfig<T>,
    times: &[T],
    witness: Option<&WitnessOperator<T>>,
    model: CouplingModel,
) -> Result<Vec<ScanRow<T>>, InterferometerError> {
    cfg.validate()?;
    if times.is_empty() {
        return Err(InterferometerError::EmptyRange);
    }
    for (i, &t) in times.iter().enumerate() {
        if !(t > T::zero() && t.is_finite()) || (i > 0 && t <= times[i - 1]) {
            return Err(InterferometerError::BadTimes(i));
        }
    }
    let owned;
    let w = match witness {
        Some(w) => w,
        None => {
            owned = default_witness(cfg)?;
            &owned
        }
    };
    times
        .par_iter()
        .map(|&t| {
            let c = cfg.with_time(t);
            let evolved = evolve_branches_with(&c, model)?;
            let (phi_plus, phi_minus) = match model {
                CouplingModel::Quantum => branch_phases(&c)?,
                CouplingModel::MeanField => {
                    let p = evolved.phases;
                    (p[1] - p[0], p[2] - p[0])
                }
            };
            let rho = DensityMatrix::from_pure(&evolved.state);
            Ok(ScanRow {
                t,
                phi_plus,
                phi_minus,
                negativity: rho.negativity(&[1])?,
                witness: rho.witness_expectation(w)?,
            })
        })
        .collect()
}

/// Evenly spaced times on `[t_min, t_max]` (inclusive, `steps ≥ 1`).
pub fn linear_times<T: Real>(t_min: T, t_max: T, steps: usize) -> Vec<T> {
    if steps <= 1 {
        return vec![t_min];
    }
    let n = T::from_usize_lossy(steps - 1);
    (0..steps)
        .map(|i| {
            let f = T::from_usize_lossy(i) / n;
            t_min + (t_max - t_min) * f
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cfg(p: f64, d: f64, dx: f64) -> InterferometerConfig<f64> {
        InterferometerConfig { m1: 1.0, m2: 1.0, d, delta_x: dx, t: p, g: 1.0, hbar: 1.0 }
    }

    #[test]
    fn unit_prefactor_phases() {
        let (p, m) = branch_phases(&unit_cfg(1.0, 2.0, 1.0)).unwrap();
        assert!((p + 1.0 / 6.0).abs() < 1e-16);
        assert!((m - 0.5).abs() < 1e-16);
    }

    #[test]
    fn tiny_superposition_gives_tiny_phases() {
        let (p, m) = branch_phases(&unit_cfg(1.0, 2.0, 1e-300)).unwrap();
        assert!(p.abs() < 1e-299 && m.abs() < 1e-299);
    }

    #[test]
    fn validation_names_the_invariant() {
        let err = branch_phases(&unit_cfg(1.0, 1.0, 2.0)).unwrap_err();
        assert_eq!(err, InterferometerError::Invalid { field: "d", condition: "d > delta_x > 0" });
        assert!(err.to_string().contains("d > delta_x > 0"));
        let mut c = unit_cfg(1.0, 2.0, 1.0);
        c.m1 = 0.0;
        assert!(matches!(branch_phases(&c), Err(InterferometerError::Invalid { field: "m1", .. })));
    }

    #[test]
    fn max_time_closed_form() {
        let t = max_entanglement_time(&unit_cfg(1.0, 2.0, 1.0)).unwrap();
        assert!((t / (3.0 * std::f64::consts::PI) - 1.0).abs() < 1e-15);
        let mut heavy = unit_cfg(1.0, 2.0, 1.0);
        heavy.m1 = 2.0;
        heavy.m2 = 2.0;
        let t4 = max_entanglement_time(&heavy).unwrap();
        assert!((t / t4 - 4.0).abs() < 1e-14);
    }

    #[test]
    fn round_trip_is_maximally_entangled() {
        let cfg = InterferometerConfig::<f64>::si(1e-14, 1e-14, 450e-6, 250e-6, 1.0);
        let t = max_entanglement_time(&cfg).unwrap();
        let s = evolve_branches(&cfg.with_time(t)).unwrap();
        assert!((branch_negativity(&s.state).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn phase_sum_pi_over_three() {
        let cfg = unit_cfg(1.0, 2.0, 1.0);
        let rate = phase_sum_rate(&cfg).unwrap();
        let s = evolve_branches(&cfg.with_time(std::f64::consts::FRAC_PI_3 / rate)).unwrap();
        assert!((branch_negativity(&s.state).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn mean_field_never_entangles() {
        let cfg = unit_cfg(1.0, 2.0, 1.0);
        let t = max_entanglement_time(&cfg).unwrap();
        let s = evolve_branches_with(&cfg.with_time(t), CouplingModel::MeanField).unwrap();
        assert!(branch_negativity(&s.state).unwrap() < 1e-12);
    }

    #[test]
    fn scan_doubles_phases_and_matches_evolve() {
        let cfg = unit_cfg(1.0, 2.0, 1.0);
        let rows = entanglement_scan(&cfg, &[1.0, 2.0], None, CouplingModel::Quantum).unwrap();
        assert!((rows[1].phi_plus / rows[0].phi_plus - 2.0).abs() < 1e-15);
        assert!((rows[1].phi_minus / rows[0].phi_minus - 2.0).abs() < 1e-15);
        let single = evolve_branches(&cfg).unwrap();
        assert!((rows[0].negativity - branch_negativity(&single.state).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn scan_rejects_bad_ranges() {
        let cfg = unit_cfg(1.0, 2.0, 1.0);
        assert_eq!(entanglement_scan(&cfg, &[], None, CouplingModel::Quantum), Err(InterferometerError::EmptyRange));
        assert_eq!(
            entanglement_scan(&cfg, &[2.0, 1.0], None, CouplingModel::Quantum),
            Err(InterferometerError::BadTimes(1))
        );
    }

    #[test]
    fn default_witness_negative_at_optimum() {
        let cfg = unit_cfg(1.0, 2.0, 1.0);
        let t = max_entanglement_time(&cfg).unwrap();
        let rows = entanglement_scan(&cfg, &[t], None, CouplingModel::Quantum).unwrap();
        assert!((rows[0].witness + 0.5).abs() < 1e-12);
    }
}
