//! Mukhanov-Sasaki mode evolution on inflationary backgrounds.
//!
//! Natural units with `c = ħ = 1` and reduced Planck mass 1; the Hubble rate
//! `H₀` sets the only scale. Conformal time `τ < 0` runs towards zero.
//!
//! For a constant slow-roll parameter `ε` the scale factor is
//! `a(τ) = (−H₀τ)^p` with `p = −1/(1 − ε)`, so `z''/z = a''/a = p(p − 1)/τ²`
//! and the Hankel index is `ν = (3 − ε) / (2(1 − ε))`. Exact de Sitter is
//! `ε = 0`, where `z = a√(2ε)` would vanish; there `z = a` is used, which
//! makes `v/z` the scale-invariant de Sitter spectator spectrum.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ode::{self, OdeError, OdeOptions};
use crate::Real;

/// Sachs-Wolfe relation `ΔT/T = Φ/3` on large angular scales.
pub const SACHS_WOLFE_FACTOR: f64 = 1.0 / 3.0;
/// Smallest allowed `|kτ|` at the Bunch-Davies start.
pub const MIN_START_KTAU: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CosmoError {
    #[error("invalid {field}: requires {condition}")]
    Invalid { field: &'static str, condition: &'static str },
    #[error("mode k = {k:e} starts at |k tau| = {ktau:e}, need >= {MIN_START_KTAU}")]
    StartInsideHorizon { k: f64, ktau: f64 },
    #[error("mode k = {k:e} evaluated at |k tau| = {ktau:e}, before horizon exit")]
    BeforeHorizonExit { k: f64, ktau: f64 },
    #[error("mode k = {k:e}: {source}")]
    Ode { k: f64, source: OdeError },
    #[error("tilt fit needs >= 5 points over >= 1 decade (got {points} over {decades:.3})")]
    Range { points: usize, decades: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Model {
    DeSitter,
    PowerLaw { epsilon: f64 },
}

impl Model {
    pub fn parse(name: &str, epsilon: f64) -> Option<Self> {
        match name {
            "desitter" => Some(Self::DeSitter),
            "powerlaw" => Some(Self::PowerLaw { epsilon }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Background<T> {
    pub epsilon: T,
    pub hubble: T,
}

impl<T: Real> Background<T> {
    pub fn de_sitter(hubble: T) -> Result<Self, CosmoError> {
        Self::power_law(T::zero(), hubble)
    }

    pub fn power_law(epsilon: T, hubble: T) -> Result<Self, CosmoError> {
        if !(epsilon >= T::zero() && epsilon < T::one()) {
            return Err(CosmoError::Invalid { field: "epsilon", condition: "0 <= epsilon < 1" });
        }
        if !(hubble > T::zero() && hubble.is_finite()) {
            return Err(CosmoError::Invalid { field: "hubble", condition: "H0 > 0" });
        }
        Ok(Self { epsilon, hubble })
    }

    pub fn from_model(model: Model, hubble: T) -> Result<Self, CosmoError> {
        match model {
            Model::DeSitter => Self::de_sitter(hubble),
            Model::PowerLaw { epsilon } => Self::power_law(T::lit(epsilon), hubble),
        }
    }

    /// Exponent `p` in `a ∝ (−τ)^p`.
    pub fn exponent(&self) -> T {
        -T::one() / (T::one() - self.epsilon)
    }

    pub fn nu(&self) -> T {
        T::lit(0.5) - self.exponent()
    }

    pub fn scale_factor(&self, tau: T) -> T {
        (-self.hubble * tau).powf(self.exponent())
    }

    /// `z = a√(2ε)`, or `a` in exact de Sitter.
    pub fn z(&self, tau: T) -> T {
        let a = self.scale_factor(tau);
        if self.epsilon == T::zero() {
            a
        } else {
            a * (T::lit(2.0) * self.epsilon).sqrt()
        }
    }

    /// `z''/z`, analytic.
    pub fn z_pp_over_z(&self, tau: T) -> T {
        let p = self.exponent();
        p * (p - T::one()) / (tau * tau)
    }

    /// Analytic `n_s − 1 = 3 − 2ν = −2ε/(1 − ε)`.
    pub fn analytic_tilt(&self) -> T {
        -T::lit(2.0) * self.epsilon / (T::one() - self.epsilon)
    }

    /// Conversion `Φ_k = ε ζ_k` between the Newtonian potential and the
    /// comoving curvature perturbation `ζ = v/z` on super-horizon scales
    /// during inflation. Vanishes in exact de Sitter.
    pub fn phi_per_zeta(&self) -> T {
        self.epsilon
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ModeOptions<T> {
    /// `|kτ|` at the Bunch-Davies start.
    pub start_ktau: T,
    /// `|kτ|` at which spectra are read off.
    pub eval_ktau: T,
    pub rel_tol: T,
}

impl<T: Real> Default for ModeOptions<T> {
    fn default() -> Self {
        Self { start_ktau: T::lit(MIN_START_KTAU), eval_ktau: T::lit(1e-2), rel_tol: T::lit(1e-12) }
    }
}

/// Samples of `v_k(τ)` and `v_k'(τ)` along an integration.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeFunction<T> {
    pub k: T,
    pub tau: Vec<T>,
    pub v: Vec<Complex<T>>,
    pub dv: Vec<Complex<T>>,
}

impl<T: Real> ModeFunction<T> {
    /// `Im(v v̄')`-based Wronskian `v v̄' − v̄ v'`, divided by `i`; equals 1
    /// for Bunch-Davies normalization.
    pub fn wronskian(&self, i: usize) -> T {
        let w = self.v[i] * self.dv[i].conj() - self.v[i].conj() * self.dv[i];
        w.im
    }

    pub fn max_wronskian_drift(&self) -> T {
        (0..self.tau.len()).map(|i| (self.wronskian(i) - T::one()).abs()).fold(T::zero(), T::max)
    }

    pub fn last(&self) -> (T, Complex<T>, Complex<T>) {
        let n = self.tau.len() - 1;
        (self.tau[n], self.v[n], self.dv[n])
    }
}

/// Asymptotic Hankel series `S(x) = Σ iⁿ aₙ / xⁿ` and `dS/dx`, with
/// `aₙ = Π_{j≤n} (4ν² − (2j − 1)²) / (n! 8ⁿ)`, summed until the terms stop
/// decreasing or drop below rounding.
fn hankel_series<T: Real>(nu: T, x: T) -> (Complex<T>, Complex<T>) {
    let mu = T::lit(4.0) * nu * nu;
    let mut s = Complex::new(T::one(), T::zero());
    let mut ds = Complex::new(T::zero(), T::zero());
    let mut coeff = T::one();
    let mut ipow = Complex::new(T::one(), T::zero());
    let i = Complex::new(T::zero(), T::one());
    let mut prev = T::infinity();
    for n in 1..200usize {
        let nf = T::from_usize_lossy(n);
        let odd = T::from_usize_lossy(2 * n - 1);
        coeff = coeff * (mu - odd * odd) / (nf * T::lit(8.0));
        ipow *= i;
        let term = coeff / x.powi(n as i32);
        if term.abs() > prev || term == T::zero() {
            break;
        }
        s += ipow * term;
        ds += ipow * (-nf * term / x);
        prev = term.abs();
        if term.abs() < T::epsilon() * T::lit(1e-3) {
            break;
        }
    }
    (s, ds)
}

/// Bunch-Davies initial data `(v, v')` at conformal time `tau`.
pub fn bunch_davies<T: Real>(bg: &Background<T>, k: T, tau: T) -> (Complex<T>, Complex<T>) {
    let x = -k * tau;
    let (s, ds) = hankel_series(bg.nu(), x);
    let phase = Complex::new(x.cos(), x.sin());
    let norm = T::one() / (T::lit(2.0) * k).sqrt();
    let v = phase * s * norm;
    let i = Complex::new(T::zero(), T::one());
    // d/dτ = −k d/dx.
    let dv = phase * (i * s + ds) * norm * (-k);
    (v, dv)
}

/// Evolves one mode from `|kτ| = start_ktau` to `|kτ| = eval_ktau`.
pub fn evolve_mode<T: Real>(k: T, bg: &Background<T>, opts: &ModeOptions<T>) -> Result<ModeFunction<T>, CosmoError> {
    let kf = k.to_f64_lossy();
    if !(k > T::zero() && k.is_finite()) {
        return Err(CosmoError::Invalid { field: "k", condition: "k > 0" });
    }
    if !(opts.start_ktau >= T::lit(MIN_START_KTAU)) {
        return Err(CosmoError::StartInsideHorizon { k: kf, ktau: opts.start_ktau.to_f64_lossy() });
    }
    if !(opts.eval_ktau > T::zero() && opts.eval_ktau < T::one()) {
        return Err(CosmoError::BeforeHorizonExit { k: kf, ktau: opts.eval_ktau.to_f64_lossy() });
    }
    let tau0 = -opts.start_ktau / k;
    let tau1 = -opts.eval_ktau / k;
    evolve_from(k, bg, tau0, bunch_davies(bg, k, tau0), tau1, opts.rel_tol)
}

/// Integrates the mode equation `v'' + (k² − z''/z) v = 0` from initial data
/// `(v, v')` at `tau0` to `tau1`. The equation is linear, so superposed data
/// evolve to superposed solutions.
pub fn evolve_from<T: Real>(
    k: T,
    bg: &Background<T>,
    tau0: T,
    (v0, dv0): (Complex<T>, Complex<T>),
    tau1: T,
    rel_tol: T,
) -> Result<ModeFunction<T>, CosmoError> {
    let kf = k.to_f64_lossy();
    if !(k > T::zero() && k.is_finite()) {
        return Err(CosmoError::Invalid { field: "k", condition: "k > 0" });
    }
    if !(tau0 < tau1 && tau1 < T::zero()) {
        return Err(CosmoError::Invalid { field: "tau", condition: "tau0 < tau1 < 0" });
    }
    let k2 = k * k;
    let rhs = |tau: T, y: &[T], dy: &mut [T]| {
        let m = k2 - bg.z_pp_over_z(tau);
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = -m * y[0];
        dy[3] = -m * y[1];
    };
    let scale = v0.norm().max(dv0.norm() / k);
    let ode_opts = OdeOptions {
        rel_tol,
        abs_tol: rel_tol * scale * T::lit(1e-3),
        first_step: T::lit(1e-3) / k,
        ..OdeOptions::default()
    };
    let traj = ode::integrate(rhs, tau0, &[v0.re, v0.im, dv0.re, dv0.im], tau1, &[], &ode_opts)
        .map_err(|source| CosmoError::Ode { k: kf, source })?;
    let v = traj.states.iter().map(|s| Complex::new(s[0], s[1])).collect();
    let dv = traj.states.iter().map(|s| Complex::new(s[2], s[3])).collect();
    Ok(ModeFunction { k, tau: traj.times, v, dv })
}

/// Exact de Sitter mode function `|v|² = (1 + 1/(kτ)²)/(2k)`.
pub fn de_sitter_power<T: Real>(k: T, tau: T) -> T {
    let x = k * tau;
    (T::one() + T::one() / (x * x)) / (T::lit(2.0) * k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub k: f64,
    /// `k³|v|²/2π²`.
    pub p_v: f64,
    /// `k³|v/z|²/2π²`, the curvature spectrum.
    pub p_zeta: f64,
    /// `ε² · p_zeta`.
    pub p_phi: f64,
    pub wronskian_drift: f64,
}

/// Spectra at `|kτ| = eval_ktau` for every `k`, sorted by `k`.
pub fn power_spectrum<T: Real>(
    ks: &[T],
    bg: &Background<T>,
    opts: &ModeOptions<T>,
) -> Result<Vec<SpectrumRow>, CosmoError> {
    let mut ks = ks.to_vec();
    ks.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let two_pi2 = T::lit(2.0) * T::PI() * T::PI();
    ks.par_iter()
        .map(|&k| {
            let mode = evolve_mode(k, bg, opts)?;
            let (tau, v, _) = mode.last();
            let k3 = k * k * k;
            let p_v = k3 * v.norm_sqr() / two_pi2;
            let z = bg.z(tau);
            let p_zeta = p_v / (z * z);
            let conv = bg.phi_per_zeta();
            Ok(SpectrumRow {
                k: k.to_f64_lossy(),
                p_v: p_v.to_f64_lossy(),
                p_zeta: p_zeta.to_f64_lossy(),
                p_phi: (conv * conv * p_zeta).to_f64_lossy(),
                wronskian_drift: mode.max_wronskian_drift().to_f64_lossy(),
            })
        })
        .collect()
}

/// Least-squares slope of `ln P` against `ln k`.
pub fn spectral_tilt(ks: &[f64], ps: &[f64]) -> Result<f64, CosmoError> {
    let n = ks.len().min(ps.len());
    let (lo, hi) = ks.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &k| (a.min(k), b.max(k)));
    let decades = if n > 0 && lo > 0.0 { (hi / lo).log10() } else { 0.0 };
    if n < 5 || decades < 1.0 - 1e-12 || ps[..n].iter().any(|&p| !(p > 0.0)) {
        return Err(CosmoError::Range { points: n, decades });
    }
    let xs: Vec<f64> = ks[..n].iter().map(|k| k.ln()).collect();
    let ys: Vec<f64> = ps[..n].iter().map(|p| p.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// `nk` wavenumbers log-spaced over `[kmin, kmax]`.
pub fn log_spaced(kmin: f64, kmax: f64, nk: usize) -> Vec<f64> {
    if nk == 1 {
        return vec![kmin];
    }
    let (a, b) = (kmin.ln(), kmax.ln());
    (0..nk).map(|i| (a + (b - a) * i as f64 / (nk - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bunch_davies_is_exact_in_de_sitter() {
        let bg = Background::<f64>::de_sitter(1.0).unwrap();
        let (k, tau) = (2.0f64, -60.0);
        let (v, dv) = bunch_davies(&bg, k, tau);
        let e = Complex::new(0.0, -k * tau).exp() / (2.0 * k).sqrt();
        let exact = e * Complex::new(1.0, -1.0 / (k * tau));
        assert!((v - exact).norm() < 1e-15);
        let w = (v * dv.conj() - v.conj() * dv).im;
        assert!((w - 1.0).abs() < 1e-13);
    }

    #[test]
    fn de_sitter_mode_matches_closed_form() {
        let bg = Background::<f64>::de_sitter(1.0).unwrap();
        let mode = evolve_mode(1.0, &bg, &ModeOptions::default()).unwrap();
        for (tau, v) in mode.tau.iter().zip(&mode.v) {
            let exact = de_sitter_power(1.0, *tau);
            assert!((v.norm_sqr() / exact - 1.0).abs() < 1e-6);
        }
        assert!(mode.max_wronskian_drift() < 1e-8);
    }

    #[test]
    fn start_must_be_deep_inside_horizon() {
        let bg = Background::<f64>::de_sitter(1.0).unwrap();
        let opts = ModeOptions { start_ktau: 50.0, ..ModeOptions::default() };
        assert!(matches!(evolve_mode(1.0, &bg, &opts), Err(CosmoError::StartInsideHorizon { .. })));
        let opts = ModeOptions { eval_ktau: 2.0, ..ModeOptions::default() };
        assert!(matches!(evolve_mode(1.0, &bg, &opts), Err(CosmoError::BeforeHorizonExit { .. })));
    }

    #[test]
    fn tilt_of_synthetic_spectra() {
        let ks = log_spaced(1.0, 10.0, 6);
        let flat = vec![2.5; 6];
        assert!(spectral_tilt(&ks, &flat).unwrap().abs() < 1e-12);
        let red: Vec<f64> = ks.iter().map(|k| 3.0 * k.powf(-0.04)).collect();
        assert!((spectral_tilt(&ks, &red).unwrap() + 0.04).abs() < 1e-10);
        assert!(spectral_tilt(&ks[..4], &flat[..4]).is_err());
        assert!(spectral_tilt(&log_spaced(1.0, 5.0, 6), &flat).is_err());
    }

    #[test]
    fn empty_mode_list() {
        let bg = Background::<f64>::de_sitter(1.0).unwrap();
        assert!(power_spectrum::<f64>(&[], &bg, &ModeOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn epsilon_range_enforced() {
        assert!(Background::power_law(1.0, 1.0).is_err());
        assert!(Background::power_law(-0.1, 1.0).is_err());
        let bg = Background::<f64>::power_law(0.02, 1.0).unwrap();
        assert!((bg.nu() - (3.0 - 0.02) / (2.0 * 0.98)).abs() < 1e-15);
    }
}
