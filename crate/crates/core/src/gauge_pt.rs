//! Two charged harmonic oscillators coupled through the electromagnetic field
//! (or its gravitational analogue), and the amplitude ε of the `|11⟩`
//! admixture in their perturbed ground state.
//!
//! Three routes to the same ε:
//!
//! * Coulomb gauge: first order in the instantaneous dipole-dipole term
//!   `g x_A x_B`.
//! * Lorentz (Feynman) gauge: second order in the local coupling to scalar,
//!   longitudinal and optionally transverse photons, summed over a
//!   discretized set of modes. Scalar photons have negative norm, which
//!   enters as an explicit `−1` weight on their contribution.
//! * The gravitational analogue, obtained by `q²/(4πε₀) → −G m²`.
//!
//! Oscillator A sits at the origin, B at `d ẑ`. Both oscillate along `ẑ`
//! (axial) or `x̂` (transverse).

use std::collections::BTreeMap;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::quad::gauss_legendre;
use crate::Real;

/// Largest `|ε|` accepted as perturbative.
pub const PERTURBATIVE_LIMIT: f64 = 0.3;
/// Smallest accepted ratio of separation to ground-state width.
pub const DIPOLE_RATIO_MIN: f64 = 10.0;
/// Energy denominators below this many `ħω` count as resonant.
pub const RESONANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GaugeError {
    #[error("invalid oscillator pair: {0}")]
    Invalid(String),
    #[error("dipole regime violated: d / x0 = {ratio:.3} < {DIPOLE_RATIO_MIN}")]
    NearField { ratio: f64 },
    #[error("|epsilon| = {0:.4} exceeds the perturbative limit {PERTURBATIVE_LIMIT}")]
    NonPerturbative(f64),
    #[error("resonant energy denominator {denominator:e} hbar*omega at mode {index} (k = {k:?})")]
    Resonance { index: usize, k: [f64; 3], denominator: f64 },
    #[error("mode grid is empty")]
    EmptyGrid,
    #[error("mode grid invalid: {0}")]
    BadGrid(String),
    #[error("convergence report needs at least two grids")]
    TooFewGrids,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Axial,
    Transverse,
}

/// Source of the pair interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interaction<T> {
    /// Both oscillators carry charge `q`.
    Electric { charge: T },
    /// Both oscillators interact through Newtonian gravity; the charge
    /// coupling `q²/(4πε₀)` is replaced by `−G m²`.
    Gravitational,
}

/// Physical constants in whatever unit system the pair is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants<T> {
    pub hbar: T,
    pub c: T,
    pub epsilon0: T,
    pub g_newton: T,
}

impl<T: Real> Constants<T> {
    pub fn si() -> Self {
        Self {
            hbar: T::lit(1.054_571_817e-34),
            c: T::lit(299_792_458.0),
            epsilon0: T::lit(8.854_187_812_8e-12),
            g_newton: T::lit(6.674_30e-11),
        }
    }

    /// `ħ = c = 1`, `ε₀ = 1/(4π)` so that `q²/(4πε₀) = q²`, and `G = 1`.
    pub fn natural() -> Self {
        Self { hbar: T::one(), c: T::one(), epsilon0: T::one() / (T::lit(4.0) * T::PI()), g_newton: T::one() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorPair<T> {
    pub mass: T,
    pub omega: T,
    pub interaction: Interaction<T>,
    pub separation: T,
    pub orientation: Orientation,
    pub fock_cutoff: usize,
    pub constants: Constants<T>,
}

impl<T: Real> OscillatorPair<T> {
    /// Reference pair in natural units (`ħ = c = ω = 1`): `ωd/c = 10⁻³`,
    /// `d/x0 ≈ 14` and `ε ≈ 0.05`.
    pub fn reference() -> Self {
        Self {
            mass: T::lit(1e8),
            omega: T::one(),
            interaction: Interaction::Electric { charge: T::lit(0.1) },
            separation: T::lit(1e-3),
            orientation: Orientation::Axial,
            fock_cutoff: 4,
            constants: Constants::natural(),
        }
    }

    pub fn validate(&self) -> Result<(), GaugeError> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !pos(self.mass) {
            return Err(GaugeError::Invalid("mass must be positive".into()));
        }
        if !pos(self.omega) {
            return Err(GaugeError::Invalid("omega must be positive".into()));
        }
        if !pos(self.separation) {
            return Err(GaugeError::Invalid("separation d must be positive".into()));
        }
        if self.fock_cutoff < 4 {
            return Err(GaugeError::Invalid(format!("fock_cutoff = {} < 4", self.fock_cutoff)));
        }
        let k = self.constants;
        if !(pos(k.hbar) && pos(k.c) && pos(k.epsilon0)) || !(k.g_newton >= T::zero()) {
            return Err(GaugeError::Invalid("constants hbar, c, epsilon0 must be positive and G >= 0".into()));
        }
        if let Interaction::Electric { charge } = self.interaction {
            if !charge.is_finite() {
                return Err(GaugeError::Invalid("charge must be finite".into()));
            }
        }
        Ok(())
    }

    /// Ground-state width `x0 = √(ħ / 2mω)`.
    pub fn x0(&self) -> T {
        (self.constants.hbar / (T::lit(2.0) * self.mass * self.omega)).sqrt()
    }

    /// Pair coupling strength `κ`: `q²/(4πε₀)` or `−G m²`.
    pub fn kappa(&self) -> T {
        match self.interaction {
            Interaction::Electric { charge } => charge * charge / (T::lit(4.0) * T::PI() * self.constants.epsilon0),
            Interaction::Gravitational => -self.constants.g_newton * self.mass * self.mass,
        }
    }

    /// Squared charge `q² = 4πε₀ κ` seen by the field. Negative for the
    /// gravitational analogue; only `q²` enters the mediator sums.
    fn charge_squared(&self) -> T {
        T::lit(4.0) * T::PI() * self.constants.epsilon0 * self.kappa()
    }

    fn orientation_vector(&self) -> [T; 3] {
        match self.orientation {
            Orientation::Axial => [T::zero(), T::zero(), T::one()],
            Orientation::Transverse => [T::one(), T::zero(), T::zero()],
        }
    }

    fn check_dipole_regime(&self) -> Result<(), GaugeError> {
        self.validate()?;
        let ratio = self.separation / self.x0();
        if ratio < T::lit(DIPOLE_RATIO_MIN) {
            return Err(GaugeError::NearField { ratio: ratio.to_f64_lossy() });
        }
        Ok(())
    }

    pub fn gravitational(&self) -> Self {
        Self { interaction: Interaction::Gravitational, ..*self }
    }
}

/// Mixed second derivative `∂²V/∂x_A∂x_B` of `κ/|d ẑ + x_B u − x_A u|` at
/// zero displacement: `−2κ/d³` for axial, `+κ/d³` for transverse.
fn geometric_coupling<T: Real>(kappa: T, d: T, orientation: Orientation) -> T {
    let d3 = d * d * d;
    match orientation {
        Orientation::Axial => -T::lit(2.0) * kappa / d3,
        Orientation::Transverse => kappa / d3,
    }
}

/// Dipole-dipole coupling `g` in `H = g x_A x_B` for the pair's own interaction.
pub fn dipole_coupling<T: Real>(pair: &OscillatorPair<T>) -> Result<T, GaugeError> {
    pair.check_dipole_regime()?;
    Ok(geometric_coupling(pair.kappa(), pair.separation, pair.orientation))
}

/// Dipole coupling with `q²/(4πε₀)` replaced by `−G m²`.
pub fn analog_gravity_coupling<T: Real>(pair: &OscillatorPair<T>) -> Result<T, GaugeError> {
    dipole_coupling(&pair.gravitational())
}

/// Truncated ladder-operator matrices on `n` Fock levels, row-major.
pub mod fock {
    use super::*;

    /// `a + a†`.
    pub fn position_unit<T: Real>(n: usize) -> Vec<Complex<T>> {
        let mut m = vec![Complex::new(T::zero(), T::zero()); n * n];
        for j in 1..n {
            let s = T::from_usize_lossy(j).sqrt();
            m[(j - 1) * n + j] = Complex::new(s, T::zero());
            m[j * n + (j - 1)] = Complex::new(s, T::zero());
        }
        m
    }

    /// `i (a† − a)`.
    pub fn momentum_unit<T: Real>(n: usize) -> Vec<Complex<T>> {
        let mut m = vec![Complex::new(T::zero(), T::zero()); n * n];
        for j in 1..n {
            let s = T::from_usize_lossy(j).sqrt();
            m[j * n + (j - 1)] = Complex::new(T::zero(), s);
            m[(j - 1) * n + j] = Complex::new(T::zero(), -s);
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Scalar,
    Longitudinal,
    Transverse1,
    Transverse2,
}

impl Polarization {
    pub const ALL: [Polarization; 4] =
        [Polarization::Scalar, Polarization::Longitudinal, Polarization::Transverse1, Polarization::Transverse2];

    /// Norm of the one-photon state: `−1` for scalar photons.
    pub fn norm_sign(self) -> i8 {
        match self {
            Polarization::Scalar => -1,
            _ => 1,
        }
    }
}

/// Discrete set of photon wavevectors with quadrature weights for `∫d³k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid<T> {
    pub wavevectors: Vec<[T; 3]>,
    pub weights: Vec<T>,
    /// Norm sign per mode, indexed like [`Polarization::ALL`].
    pub norm_signs: Vec<[i8; 4]>,
    pub label: String,
}

/// Radial/angular resolution of a [`ModeGrid`].
///
/// `|k|` runs over a Gauss-Legendre rule in `ln k` on `[k_min, k_join]`
/// followed by `panels` eight-point Gauss panels on `[k_join, k_max]`;
/// directions use Gauss-Legendre in `cos θ` and a uniform azimuth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub k_min: T,
    pub k_join: T,
    pub k_max: T,
    pub n_log: usize,
    pub panels: usize,
    pub n_mu: usize,
    pub n_phi: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridPreset {
    Coarse,
    Medium,
    Fine,
}

impl GridPreset {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "coarse" => Some(Self::Coarse),
            "medium" => Some(Self::Medium),
            "fine" => Some(Self::Fine),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Coarse => "coarse",
            Self::Medium => "medium",
            Self::Fine => "fine",
        }
    }
}

const PANEL_POINTS: usize = 8;

impl<T: Real> GridSpec<T> {
    /// Preset resolutions for `pair` with form-factor length `ell`. Each step
    /// doubles the cutoff in units of `1/ell`, halves the radial spacing and
    /// doubles the angular resolution.
    pub fn preset(preset: GridPreset, pair: &OscillatorPair<T>, ell: T) -> Self {
        let level = match preset {
            GridPreset::Coarse => 0,
            GridPreset::Medium => 1,
            GridPreset::Fine => 2,
        };
        let scale = 1usize << level;
        let k_omega = pair.omega / pair.constants.c;
        let k_join = T::one() / pair.separation;
        Self {
            k_min: T::lit(0.01) * k_omega.min(k_join),
            k_join,
            k_max: T::lit(1.5) * T::from_usize_lossy(scale) / ell,
            n_log: 8 * scale,
            panels: 2 * scale * scale,
            n_mu: 12 * scale,
            n_phi: 4 * scale,
        }
    }
}

impl<T: Real> ModeGrid<T> {
    pub fn build(spec: &GridSpec<T>, label: impl Into<String>) -> Result<Self, GaugeError> {
        let ok = spec.k_min > T::zero()
            && spec.k_join > spec.k_min
            && spec.k_max > spec.k_join
            && spec.n_log > 0
            && spec.panels > 0
            && spec.n_mu > 0
            && spec.n_phi > 0
            && spec.n_phi.is_multiple_of(2);
        if !ok {
            return Err(GaugeError::BadGrid(format!("inconsistent spec {spec:?}")));
        }
        let half = T::lit(0.5);
        let mut radial: Vec<(T, T)> = Vec::new();
        let (xl, wl) = gauss_legendre::<T>(spec.n_log);
        let (u0, u1) = (spec.k_min.ln(), spec.k_join.ln());
        for (x, w) in xl.iter().zip(&wl) {
            let k = (half * (u1 - u0) * *x + half * (u1 + u0)).exp();
            radial.push((k, half * (u1 - u0) * *w * k));
        }
        let (xp, wp) = gauss_legendre::<T>(PANEL_POINTS);
        let width = (spec.k_max - spec.k_join) / T::from_usize_lossy(spec.panels);
        for p in 0..spec.panels {
            let a = spec.k_join + width * T::from_usize_lossy(p);
            for (x, w) in xp.iter().zip(&wp) {
                radial.push((a + half * width * (*x + T::one()), half * width * *w));
            }
        }
        let (mus, wmus) = gauss_legendre::<T>(spec.n_mu);
        let dphi = T::TAU() / T::from_usize_lossy(spec.n_phi);
        let mut modes: Vec<([T; 3], T)> = Vec::with_capacity(radial.len() * spec.n_mu * spec.n_phi);
        for &(k, wk) in &radial {
            for (mu, wmu) in mus.iter().zip(&wmus) {
                let st = (T::one() - *mu * *mu).max(T::zero()).sqrt();
                for j in 0..spec.n_phi {
                    let phi = dphi * (T::from_usize_lossy(j) + half);
                    let kv = [k * st * phi.cos(), k * st * phi.sin(), k * *mu];
                    modes.push((kv, wk * k * k * *wmu * dphi));
                }
            }
        }
        Self::from_modes(modes, label)
    }

    pub fn preset(preset: GridPreset, pair: &OscillatorPair<T>, ell: T) -> Result<Self, GaugeError> {
        Self::build(&GridSpec::preset(preset, pair, ell), preset.name())
    }

    /// Sorts modes by `|k|`, then lexicographically, and attaches norm signs.
    pub fn from_modes(mut modes: Vec<([T; 3], T)>, label: impl Into<String>) -> Result<Self, GaugeError> {
        if modes.is_empty() {
            return Err(GaugeError::EmptyGrid);
        }
        for (k, w) in &modes {
            let n2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if !(n2 > T::zero()) || !(*w > T::zero()) {
                return Err(GaugeError::BadGrid("modes need |k| > 0 and positive weight".into()));
            }
        }
        let key = |k: &[T; 3]| (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
        modes.sort_by(|(a, _), (b, _)| {
            key(a)
                .partial_cmp(&key(b))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
        });
        let signs = Polarization::ALL.map(Polarization::norm_sign);
        let n = modes.len();
        let (wavevectors, weights) = modes.into_iter().unzip();
        Ok(Self { wavevectors, weights, norm_signs: vec![signs; n], label: label.into() })
    }

    pub fn len(&self) -> usize {
        self.wavevectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavevectors.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Coulomb,
    Lorentz,
    AnalogGravity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonResult<T> {
    pub value: Complex<T>,
    pub method: Method,
    pub diagnostics: BTreeMap<String, f64>,
}

fn guard<T: Real>(value: Complex<T>) -> Result<(), GaugeError> {
    let mag = value.norm();
    if !mag.is_finite() || mag >= T::lit(PERTURBATIVE_LIMIT) {
        return Err(GaugeError::NonPerturbative(mag.to_f64_lossy()));
    }
    Ok(())
}

/// First-order amplitude for `H = g x_A x_B`: `⟨11|H|00⟩ / (E₀ − E₁₁)`,
/// with the matrix element taken from truncated Fock matrices.
pub fn epsilon_from_coupling<T: Real>(
    pair: &OscillatorPair<T>,
    g: T,
    method: Method,
) -> Result<EpsilonResult<T>, GaugeError> {
    pair.validate()?;
    let n = pair.fock_cutoff;
    let x = fock::position_unit::<T>(n);
    let x0 = pair.x0();
    // ⟨1|x|0⟩_A ⟨1|x|0⟩_B, read off the n×n matrices (row 1, column 0).
    let element = x[n] * x[n] * (g * x0 * x0);
    let gap = -T::lit(2.0) * pair.constants.hbar * pair.omega;
    let value = element / gap;
    guard(value)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("g".into(), g.to_f64_lossy());
    diagnostics.insert("x0".into(), x0.to_f64_lossy());
    diagnostics.insert("fock_cutoff".into(), n as f64);
    Ok(EpsilonResult { value, method, diagnostics })
}

pub fn epsilon_coulomb<T: Real>(pair: &OscillatorPair<T>) -> Result<EpsilonResult<T>, GaugeError> {
    let g = dipole_coupling(pair)?;
    epsilon_from_coupling(pair, g, Method::Coulomb)
}

pub fn epsilon_analog_gravity<T: Real>(pair: &OscillatorPair<T>) -> Result<EpsilonResult<T>, GaugeError> {
    let g = analog_gravity_coupling(pair)?;
    epsilon_from_coupling(&pair.gravitational(), g, Method::AnalogGravity)
}

/// Which mediator polarizations enter the second-order sum, and the
/// Gaussian form factor applied at each vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzOptions<T> {
    pub scalar: bool,
    pub longitudinal: bool,
    pub transverse: bool,
    /// Length `ℓ` of the vertex form factor `exp(−k²ℓ²/2)`; `None` selects `d/8`.
    pub form_factor: Option<T>,
}

impl<T: Real> Default for LorentzOptions<T> {
    fn default() -> Self {
        Self { scalar: true, longitudinal: true, transverse: false, form_factor: None }
    }
}

impl<T: Real> LorentzOptions<T> {
    pub fn ell(&self, pair: &OscillatorPair<T>) -> T {
        self.form_factor.unwrap_or(pair.separation / T::lit(8.0))
    }
}

fn dot<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Two unit vectors completing `k̂` to an orthonormal frame.
fn transverse_basis<T: Real>(khat: &[T; 3]) -> [[T; 3]; 2] {
    let helper =
        if khat[2].abs() < T::lit(0.9) { [T::zero(), T::zero(), T::one()] } else { [T::one(), T::zero(), T::zero()] };
    let cross =
        |a: &[T; 3], b: &[T; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let mut e1 = cross(&helper, khat);
    let n1 = dot(&e1, &e1).sqrt();
    e1 = e1.map(|v| v / n1);
    let e2 = cross(khat, &e1);
    [e1, e2]
}

/// Contribution of one mode (all enabled polarizations, both orderings of
/// emission and absorption) to the effective `⟨11|H_eff|00⟩`.
struct ModeContext<T> {
    x: Vec<Complex<T>>,
    p: Vec<Complex<T>>,
    n: usize,
    u: [T; 3],
    sites: [[T; 3]; 2],
    hbar: T,
    c: T,
    omega: T,
    x0: T,
    /// `q² ħ c² / (2 ε₀ (2π)³)`; divide by `ω_k` for `N_k² q²`.
    coupling: T,
    ell: T,
    opts: LorentzOptions<T>,
}

impl<T: Real> ModeContext<T> {
    fn contribution(&self, index: usize, k: &[T; 3], weight: T, signs: &[i8; 4]) -> Result<Complex<T>, GaugeError> {
        let kn = dot(k, k).sqrt();
        let khat = k.map(|v| v / kn);
        let omega_k = self.c * kn;
        let ff = (-(kn * kn * self.ell * self.ell) * T::lit(0.5)).exp();
        let nq2 = self.coupling / omega_k;
        let i = Complex::new(T::zero(), T::one());
        let [t1, t2] = transverse_basis(&khat);
        let mut total = Complex::new(T::zero(), T::zero());
        for (pi, pol) in Polarization::ALL.iter().enumerate() {
            let enabled = match pol {
                Polarization::Scalar => self.opts.scalar,
                Polarization::Longitudinal => self.opts.longitudinal,
                _ => self.opts.transverse,
            };
            if !enabled {
                continue;
            }
            // Vertex factors without N_k q: (operator matrix, emission factor, absorption factor).
            let (op, emit, absorb): (&[Complex<T>], Complex<T>, Complex<T>) = match pol {
                Polarization::Scalar => {
                    let ku = dot(k, &self.u) * self.x0;
                    (&self.x, -i * ku, i * ku)
                }
                _ => {
                    let eps = match pol {
                        Polarization::Longitudinal => khat,
                        Polarization::Transverse1 => t1,
                        _ => t2,
                    };
                    // −N'(q/m)(ε·u) p, with N' = N/c and p = m ω x0 · i(a† − a).
                    let f = -(dot(&eps, &self.u) / self.c) * self.omega * self.x0;
                    let c = Complex::new(f, T::zero());
                    (&self.p, c, c)
                }
            };
            let sign = T::lit(f64::from(signs[pi]));
            for (emitter, absorber) in [(0usize, 1usize), (1, 0)] {
                let phase_e = -dot(k, &self.sites[emitter]);
                let phase_a = dot(k, &self.sites[absorber]);
                let ve = emit * Complex::new(phase_e.cos(), phase_e.sin()) * ff;
                let va = absorb * Complex::new(phase_a.cos(), phase_a.sin()) * ff;
                // Absorber goes 0 → 1; the emitter must already sit in |1⟩.
                let absorb_elem = op[self.n] * va;
                for level in 1..self.n {
                    // The absorber vertex leaves the emitter alone, so only
                    // emitter level 1 overlaps the final state.
                    if level != 1 {
                        continue;
                    }
                    let emit_elem = op[level * self.n] * ve;
                    let gap = -(self.hbar * self.omega * T::from_usize_lossy(level) + self.hbar * omega_k);
                    if gap.abs() < T::lit(RESONANCE_TOL) * self.hbar * self.omega {
                        return Err(GaugeError::Resonance {
                            index,
                            k: k.map(|v| v.to_f64_lossy()),
                            denominator: (gap / (self.hbar * self.omega)).to_f64_lossy(),
                        });
                    }
                    total += absorb_elem * emit_elem * (nq2 * sign * weight / gap);
                }
            }
        }
        Ok(total)
    }
}

/// Second-order amplitude from mediator exchange over `grid`.
pub fn epsilon_lorentz<T: Real>(
    pair: &OscillatorPair<T>,
    grid: &ModeGrid<T>,
    opts: &LorentzOptions<T>,
) -> Result<EpsilonResult<T>, GaugeError> {
    pair.check_dipole_regime()?;
    if grid.is_empty() {
        return Err(GaugeError::EmptyGrid);
    }
    let n = pair.fock_cutoff;
    let x0 = pair.x0();
    let consts = pair.constants;
    let eight_pi3 = T::lit(8.0) * T::PI() * T::PI() * T::PI();
    let ctx = ModeContext {
        x: fock::position_unit(n),
        p: fock::momentum_unit(n),
        n,
        u: pair.orientation_vector(),
        sites: [[T::zero(); 3], [T::zero(), T::zero(), pair.separation]],
        hbar: consts.hbar,
        c: consts.c,
        omega: pair.omega,
        x0,
        coupling: pair.charge_squared() * consts.hbar * consts.c * consts.c
            / (T::lit(2.0) * consts.epsilon0 * eight_pi3),
        ell: opts.ell(pair),
        opts: *opts,
    };
    let parts: Vec<Complex<T>> = (0..grid.len())
        .into_par_iter()
        .map(|m| ctx.contribution(m, &grid.wavevectors[m], grid.weights[m], &grid.norm_signs[m]))
        .collect::<Result<_, _>>()?;
    let mut effective = Complex::new(T::zero(), T::zero());
    for p in &parts {
        effective += *p;
    }
    let gap = -T::lit(2.0) * consts.hbar * pair.omega;
    let value = effective / gap;
    guard(value)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("modes".into(), grid.len() as f64);
    diagnostics.insert("form_factor_length".into(), ctx.ell.to_f64_lossy());
    diagnostics.insert("omega_d_over_c".into(), (pair.omega * pair.separation / consts.c).to_f64_lossy());
    diagnostics
        .insert("imag_residue".into(), (value.im.abs() / value.norm().max(T::min_positive_value())).to_f64_lossy());
    diagnostics.insert("scalar".into(), f64::from(u8::from(opts.scalar)));
    diagnostics.insert("longitudinal".into(), f64::from(u8::from(opts.longitudinal)));
    diagnostics.insert("transverse".into(), f64::from(u8::from(opts.transverse)));
    Ok(EpsilonResult { value, method: Method::Lorentz, diagnostics })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub grid: String,
    pub modes: usize,
    pub epsilon_re: f64,
    pub epsilon_im: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub epsilon_coulomb: f64,
    pub rows: Vec<ConvergenceRow>,
    pub monotone: bool,
    pub final_within_tolerance: bool,
    pub tolerance: f64,
    pub diagnostics: Vec<String>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.monotone && self.final_within_tolerance
    }
}

/// Runs [`epsilon_lorentz`] on each grid and tabulates `|ε_L/ε_C − 1|`.
/// A non-monotone error column is reported in `diagnostics`, not raised.
pub fn gauge_equivalence_report<T: Real>(
    pair: &OscillatorPair<T>,
    grids: &[ModeGrid<T>],
    opts: &LorentzOptions<T>,
    tolerance: f64,
) -> Result<ConvergenceReport, GaugeError> {
    if grids.len() < 2 {
        return Err(GaugeError::TooFewGrids);
    }
    let reference = epsilon_coulomb(pair)?.value;
    let mut rows = Vec::with_capacity(grids.len());
    for grid in grids {
        let eps = epsilon_lorentz(pair, grid, opts)?.value;
        rows.push(ConvergenceRow {
            grid: grid.label.clone(),
            modes: grid.len(),
            epsilon_re: eps.re.to_f64_lossy(),
            epsilon_im: eps.im.to_f64_lossy(),
            rel_error: (eps / reference - Complex::new(T::one(), T::zero())).norm().to_f64_lossy(),
        });
    }
    let mut diagnostics = Vec::new();
    let mut monotone = true;
    for w in rows.windows(2) {
        if !(w[1].rel_error < w[0].rel_error) {
            monotone = false;
            diagnostics.push(format!(
                "error did not decrease from {} ({:e}) to {} ({:e})",
                w[0].grid, w[0].rel_error, w[1].grid, w[1].rel_error
            ));
        }
    }
    let last = rows.last().map_or(f64::INFINITY, |r| r.rel_error);
    let final_within_tolerance = last <= tolerance;
    if !final_within_tolerance {
        diagnostics.push(format!("final error {last:e} exceeds {tolerance:e}"));
    }
    Ok(ConvergenceReport {
        epsilon_coulomb: reference.re.to_f64_lossy(),
        rows,
        monotone,
        final_within_tolerance,
        tolerance,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_pair(kappa: f64, d: f64, orientation: Orientation) -> OscillatorPair<f64> {
        OscillatorPair {
            mass: 1.0,
            omega: 1.0,
            interaction: Interaction::Electric { charge: kappa.sqrt() },
            separation: d,
            orientation,
            fock_cutoff: 4,
            constants: Constants::natural(),
        }
    }

    #[test]
    fn axial_and_transverse_coupling() {
        let g = dipole_coupling(&unit_pair(1.0, 10.0, Orientation::Axial)).unwrap();
        assert!((g + 2.0e-3).abs() < 1e-15);
        let gt = dipole_coupling(&unit_pair(1.0, 10.0, Orientation::Transverse)).unwrap();
        assert!((gt / g + 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_charge_has_no_coupling() {
        let pair = unit_pair(0.0, 10.0, Orientation::Axial);
        assert_eq!(dipole_coupling(&pair).unwrap(), 0.0);
        assert_eq!(epsilon_coulomb(&pair).unwrap().value.norm(), 0.0);
    }

    #[test]
    fn near_field_is_rejected() {
        let err = dipole_coupling(&unit_pair(1.0, 1.0, Orientation::Axial)).unwrap_err();
        assert!(matches!(err, GaugeError::NearField { .. }));
    }

    #[test]
    fn coulomb_amplitude_unit_oscillator() {
        let pair = unit_pair(1.0, 10.0, Orientation::Axial);
        let eps = epsilon_from_coupling(&pair, 0.01, Method::Coulomb).unwrap();
        assert!((eps.value.re + 0.0025).abs() < 1e-15);
        assert_eq!(eps.value.im, 0.0);
    }

    #[test]
    fn perturbative_guard() {
        let pair = unit_pair(1.0, 10.0, Orientation::Axial);
        assert!(matches!(epsilon_from_coupling(&pair, 2.0, Method::Coulomb), Err(GaugeError::NonPerturbative(_))));
    }

    #[test]
    fn fock_operators_are_hermitian() {
        for n in [4, 8] {
            let x = fock::position_unit::<f64>(n);
            let p = fock::momentum_unit::<f64>(n);
            assert!(crate::linalg::hermiticity_defect(&x, n) < 1e-15);
            assert!(crate::linalg::hermiticity_defect(&p, n) < 1e-15);
            // [x, p] = 2i on all but the truncated top level.
            let xp = crate::linalg::matmul(&x, &p, n);
            let px = crate::linalg::matmul(&p, &x, n);
            for j in 0..n - 1 {
                let c = xp[j * n + j] - px[j * n + j];
                assert!((c - Complex::new(0.0, 2.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn grid_has_sorted_signed_modes() {
        let pair = OscillatorPair::<f64>::reference();
        let grid = ModeGrid::preset(GridPreset::Coarse, &pair, pair.separation / 8.0).unwrap();
        let norms: Vec<f64> = grid.wavevectors.iter().map(|k| dot(k, k).sqrt()).collect();
        assert!(norms.windows(2).all(|w| w[0] <= w[1]));
        assert!(norms[0] > 0.0);
        assert!(grid.weights.iter().all(|&w| w > 0.0));
        assert!(grid.norm_signs.iter().all(|s| *s == [-1, 1, 1, 1]));
    }

    #[test]
    fn lorentz_matches_coulomb_on_fine_grid() {
        let pair = OscillatorPair::<f64>::reference();
        let opts = LorentzOptions::default();
        let grid = ModeGrid::preset(GridPreset::Fine, &pair, opts.ell(&pair)).unwrap();
        let el = epsilon_lorentz(&pair, &grid, &opts).unwrap();
        let ec = epsilon_coulomb(&pair).unwrap();
        assert!((el.value.re / ec.value.re - 1.0).abs() < 0.01);
        assert!(el.value.im.abs() < 1e-10 * el.value.re.abs());
    }

    #[test]
    fn transverse_orientation_also_converges() {
        let mut pair = OscillatorPair::<f64>::reference();
        pair.orientation = Orientation::Transverse;
        let opts = LorentzOptions::default();
        let grid = ModeGrid::preset(GridPreset::Fine, &pair, opts.ell(&pair)).unwrap();
        let el = epsilon_lorentz(&pair, &grid, &opts).unwrap();
        let ec = epsilon_coulomb(&pair).unwrap();
        assert!((el.value.re / ec.value.re - 1.0).abs() < 0.01, "{} vs {}", el.value, ec.value);
    }

    #[test]
    fn transverse_photons_are_negligible_in_near_field() {
        let pair = OscillatorPair::<f64>::reference();
        let base = LorentzOptions::default();
        let with_t = LorentzOptions { transverse: true, ..base };
        let grid = ModeGrid::preset(GridPreset::Medium, &pair, base.ell(&pair)).unwrap();
        let a = epsilon_lorentz(&pair, &grid, &base).unwrap().value.re;
        let b = epsilon_lorentz(&pair, &grid, &with_t).unwrap().value.re;
        assert!(((b - a) / a).abs() < 1e-2);
    }

    #[test]
    fn gravity_substitution() {
        let mut pair = unit_pair(1.0, 10.0, Orientation::Axial);
        pair.constants.g_newton = 3.0;
        let g = analog_gravity_coupling(&pair).unwrap();
        assert!((g - 2.0 * 3.0 / 1000.0).abs() < 1e-15);
    }
}
