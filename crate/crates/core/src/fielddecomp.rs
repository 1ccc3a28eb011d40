//! Spectral field algebra on a periodic cube: Helmholtz and
//! transverse-traceless decompositions, the weak-field constraint solvers in
//! Poisson gauge, and the resulting matter interaction energy.
//!
//! All transforms are FFTs over the full `n³` grid. Wavenumbers are
//! `2π m / L` with `m ∈ [−n/2, n/2)`. Odd-order derivatives and the
//! projectors see the Nyquist component of `k` as zero, which keeps
//! real fields real and makes the discrete projectors exact.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::Float;
use rayon::prelude::*;
use rustfft::{Fft, FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::Real;

/// Scalars usable by the spectral routines.
pub trait FieldReal: Real + FftNum {}
impl<T: Real + FftNum> FieldReal for T {}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("source has nonzero mean {mean:e} (max magnitude {max:e})")]
    NonZeroMean { mean: f64, max: f64 },
    #[error("tensor is not traceless (relative trace {0:e})")]
    NotTraceless(f64),
    #[error("vector field is not transverse (relative divergence {0:e})")]
    NotTransverse(f64),
    #[error("field contains non-finite values")]
    NonFinite,
    #[error("momentum density is not conserved (relative divergence {0:e})")]
    NotConserved(f64),
    #[error("static mode requires T^0i = 0 (max |T^0i| = {0:e})")]
    NotStatic(f64),
    #[error("geometry violates preconditions: {0}")]
    Geometry(String),
    #[error("field I/O: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3D<T> {
    n: usize,
    l: T,
}

impl<T: Real> Grid3D<T> {
    /// `n` points per axis (a power of two, at least 16) on a box of side `l`.
    pub fn new(n: usize, l: T) -> Result<Self, FieldError> {
        if n < 16 || !n.is_power_of_two() {
            return Err(FieldError::BadGrid(format!("n = {n} must be a power of two >= 16")));
        }
        if !(l > T::zero() && l.is_finite()) {
            return Err(FieldError::BadGrid("box side L must be positive".into()));
        }
        Ok(Self { n, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> T {
        self.l
    }

    pub fn points(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn spacing(&self) -> T {
        self.l / T::from_usize_lossy(self.n)
    }

    pub fn volume(&self) -> T {
        self.l * self.l * self.l
    }

    pub fn cell_volume(&self) -> T {
        let h = self.spacing();
        h * h * h
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn position(&self, idx: usize) -> [T; 3] {
        let n = self.n;
        let h = self.spacing();
        [idx / (n * n), (idx / n) % n, idx % n].map(|c| h * T::from_usize_lossy(c))
    }

    fn fundamental(&self) -> T {
        T::TAU() / self.l
    }

    /// Signed mode number for an FFT index.
    fn mode(&self, i: usize) -> isize {
        if i < self.n / 2 {
            i as isize
        } else {
            i as isize - self.n as isize
        }
    }

    /// `(k, k_odd)`: the true wavevector and the one used by odd operators,
    /// which has its Nyquist components zeroed.
    fn wavevector(&self, idx: usize) -> ([T; 3], [T; 3]) {
        let n = self.n;
        let f = self.fundamental();
        let ids = [idx / (n * n), (idx / n) % n, idx % n];
        let k = ids.map(|i| f * T::lit(self.mode(i) as f64));
        let odd = [0, 1, 2].map(|a| if ids[a] == n / 2 { T::zero() } else { k[a] });
        (k, odd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    pub grid: Grid3D<T>,
    pub values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    pub grid: Grid3D<T>,
    pub components: [Vec<T>; 3],
}

/// Symmetric 3×3 tensor per point, stored as `xx, xy, xz, yy, yz, zz`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField<T> {
    pub grid: Grid3D<T>,
    pub components: [Vec<T>; 6],
}

/// Storage slot of tensor entry `(a, b)`.
pub const fn sym_index(a: usize, b: usize) -> usize {
    match (a, b) {
        (0, 0) => 0,
        (0, 1) | (1, 0) => 1,
        (0, 2) | (2, 0) => 2,
        (1, 1) => 3,
        (1, 2) | (2, 1) => 4,
        _ => 5,
    }
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(Float::abs(*x)))
}

fn all_finite<T: Real>(v: &[T]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: Grid3D<T>) -> Self {
        Self { values: vec![T::zero(); grid.points()], grid }
    }

    pub fn from_fn(grid: Grid3D<T>, f: impl Fn([T; 3]) -> T + Sync) -> Self {
        let values = (0..grid.points()).into_par_iter().map(|i| f(grid.position(i))).collect();
        Self { grid, values }
    }

    pub fn max_abs(&self) -> T {
        max_abs(&self.values)
    }

    pub fn mean(&self) -> T {
        self.values.iter().fold(T::zero(), |s, x| s + *x) / T::from_usize_lossy(self.values.len())
    }

    /// `∫ f d³r` by the rectangle rule (spectrally accurate for smooth periodic f).
    pub fn integral(&self) -> T {
        self.values.iter().fold(T::zero(), |s, x| s + *x) * self.grid.cell_volume()
    }
}

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: Grid3D<T>) -> Self {
        let z = vec![T::zero(); grid.points()];
        Self { components: [z.clone(), z.clone(), z], grid }
    }

    pub fn from_fn(grid: Grid3D<T>, f: impl Fn([T; 3]) -> [T; 3] + Sync) -> Self {
        let vals: Vec<[T; 3]> = (0..grid.points()).into_par_iter().map(|i| f(grid.position(i))).collect();
        let components = [0, 1, 2].map(|a| vals.iter().map(|v| v[a]).collect());
        Self { grid, components }
    }

    pub fn max_abs(&self) -> T {
        self.components.iter().map(|c| max_abs(c)).fold(T::zero(), T::max)
    }

    pub fn add(&self, other: &Self) -> Self {
        let components =
            [0, 1, 2].map(|a| self.components[a].iter().zip(&other.components[a]).map(|(x, y)| *x + *y).collect());
        Self { grid: self.grid, components }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let components =
            [0, 1, 2].map(|a| self.components[a].iter().zip(&other.components[a]).map(|(x, y)| *x - *y).collect());
        Self { grid: self.grid, components }
    }
}

impl<T: Real> SymTensorField<T> {
    pub fn zeros(grid: Grid3D<T>) -> Self {
        let z = vec![T::zero(); grid.points()];
        Self { components: std::array::from_fn(|_| z.clone()), grid }
    }

    pub fn from_fn(grid: Grid3D<T>, f: impl Fn([T; 3]) -> [T; 6] + Sync) -> Self {
        let vals: Vec<[T; 6]> = (0..grid.points()).into_par_iter().map(|i| f(grid.position(i))).collect();
        let components = std::array::from_fn(|a| vals.iter().map(|v| v[a]).collect());
        Self { grid, components }
    }

    pub fn max_abs(&self) -> T {
        self.components.iter().map(|c| max_abs(c)).fold(T::zero(), T::max)
    }

    pub fn trace(&self) -> ScalarField<T> {
        let c = &self.components;
        let values = (0..self.grid.points()).map(|i| c[0][i] + c[3][i] + c[5][i]).collect();
        ScalarField { grid: self.grid, values }
    }

    /// `T_ij − δ_ij T^k_k / 3`.
    pub fn traceless_part(&self) -> Self {
        let tr = self.trace();
        let third = T::one() / T::lit(3.0);
        let mut out = self.clone();
        for slot in [0, 3, 5] {
            for (v, t) in out.components[slot].iter_mut().zip(&tr.values) {
                *v -= *t * third;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let components = std::array::from_fn(|a| {
            self.components[a].iter().zip(&other.components[a]).map(|(x, y)| *x + *y).collect()
        });
        Self { grid: self.grid, components }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let components = std::array::from_fn(|a| {
            self.components[a].iter().zip(&other.components[a]).map(|(x, y)| *x - *y).collect()
        });
        Self { grid: self.grid, components }
    }
}

/// Cached FFT plans for one grid size.
pub struct Spectral<T: FieldReal> {
    grid: Grid3D<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

type Spectrum<T> = Vec<Complex<T>>;

impl<T: FieldReal> Spectral<T> {
    pub fn new(grid: Grid3D<T>) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n);
        let inverse = planner.plan_fft_inverse(grid.n);
        Self { grid, forward, inverse }
    }

    pub fn grid(&self) -> &Grid3D<T> {
        &self.grid
    }

    /// `(i, j, k) → (k, i, j)`; three applications are the identity.
    fn rotate(data: &[Complex<T>], n: usize) -> Spectrum<T> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); data.len()];
        out.par_chunks_mut(n * n).enumerate().for_each(|(k, plane)| {
            for i in 0..n {
                for j in 0..n {
                    plane[i * n + j] = data[(i * n + j) * n + k];
                }
            }
        });
        out
    }

    fn transform(&self, mut data: Spectrum<T>, inverse: bool) -> Spectrum<T> {
        let n = self.grid.n;
        let plan = if inverse { &self.inverse } else { &self.forward };
        let scratch_len = plan.get_inplace_scratch_len();
        for _ in 0..3 {
            data.par_chunks_mut(n).for_each_init(
                || vec![Complex::new(T::zero(), T::zero()); scratch_len],
                |scratch, line| plan.process_with_scratch(line, scratch),
            );
            data = Self::rotate(&data, n);
        }
        if inverse {
            let scale = T::one() / T::from_usize_lossy(self.grid.points());
            data.par_iter_mut().for_each(|z| *z *= scale);
        }
        data
    }

    pub fn forward(&self, values: &[T]) -> Spectrum<T> {
        let data = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(data, false)
    }

    /// Inverse transform, keeping the real part.
    pub fn inverse_real(&self, spectrum: Spectrum<T>) -> Vec<T> {
        self.transform(spectrum, true).into_iter().map(|z| z.re).collect()
    }

    fn map_scalar(&self, values: &[T], f: impl Fn([T; 3], [T; 3], Complex<T>) -> Complex<T> + Sync) -> Vec<T> {
        let mut s = self.forward(values);
        let grid = self.grid;
        s.par_iter_mut().enumerate().for_each(|(idx, z)| {
            let (k, odd) = grid.wavevector(idx);
            *z = f(k, odd, *z);
        });
        self.inverse_real(s)
    }

    pub fn gradient(&self, f: &ScalarField<T>) -> VectorField<T> {
        let i = Complex::new(T::zero(), T::one());
        let components = [0, 1, 2].map(|a| self.map_scalar(&f.values, |_, odd, z| i * z * odd[a]));
        VectorField { grid: f.grid, components }
    }

    pub fn divergence(&self, v: &VectorField<T>) -> ScalarField<T> {
        let i = Complex::new(T::zero(), T::one());
        let specs: Vec<Spectrum<T>> = v.components.iter().map(|c| self.forward(c)).collect();
        let grid = self.grid;
        let out: Spectrum<T> = (0..grid.points())
            .into_par_iter()
            .map(|idx| {
                let (_, odd) = grid.wavevector(idx);
                i * (specs[0][idx] * odd[0] + specs[1][idx] * odd[1] + specs[2][idx] * odd[2])
            })
            .collect();
        ScalarField { grid, values: self.inverse_real(out) }
    }

    pub fn curl(&self, v: &VectorField<T>) -> VectorField<T> {
        let i = Complex::new(T::zero(), T::one());
        let specs: Vec<Spectrum<T>> = v.components.iter().map(|c| self.forward(c)).collect();
        let grid = self.grid;
        let components = [0usize, 1, 2].map(|a| {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            let out: Spectrum<T> = (0..grid.points())
                .into_par_iter()
                .map(|idx| {
                    let (_, k) = grid.wavevector(idx);
                    i * (specs[c][idx] * k[b] - specs[b][idx] * k[c])
                })
                .collect();
            self.inverse_real(out)
        });
        VectorField { grid, components }
    }

    /// Divergence of a symmetric tensor, `∂_j T_ij`.
    pub fn tensor_divergence(&self, t: &SymTensorField<T>) -> VectorField<T> {
        let i = Complex::new(T::zero(), T::one());
        let specs: Vec<Spectrum<T>> = t.components.iter().map(|c| self.forward(c)).collect();
        let grid = self.grid;
        let components = [0usize, 1, 2].map(|a| {
            let out: Spectrum<T> = (0..grid.points())
                .into_par_iter()
                .map(|idx| {
                    let (_, k) = grid.wavevector(idx);
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for (b, kb) in k.iter().enumerate() {
                        acc += specs[sym_index(a, b)][idx] * *kb;
                    }
                    i * acc
                })
                .collect();
            self.inverse_real(out)
        });
        VectorField { grid, components }
    }

    pub fn laplacian(&self, f: &ScalarField<T>) -> ScalarField<T> {
        ScalarField { grid: f.grid, values: self.map_scalar(&f.values, |k, _, z| -z * dot(&k, &k)) }
    }

    /// Solves `∇²u = src` with the zero mode of `u` set to zero.
    fn poisson(&self, src: &[T], scale: T) -> Vec<T> {
        self.map_scalar(src, |k, _, z| {
            let k2 = dot(&k, &k);
            if k2 == T::zero() {
                Complex::new(T::zero(), T::zero())
            } else {
                -z * (scale / k2)
            }
        })
    }

    /// `(f_∥, f_⊥)` with `f̂_∥ = k̂(k̂·f̂)`. The mean of `f` stays in `f_⊥`.
    pub fn helmholtz_vector(&self, f: &VectorField<T>) -> (VectorField<T>, VectorField<T>) {
        let specs: Vec<Spectrum<T>> = f.components.iter().map(|c| self.forward(c)).collect();
        let grid = self.grid;
        let par: Vec<[Complex<T>; 3]> = (0..grid.points())
            .into_par_iter()
            .map(|idx| {
                let (_, k) = grid.wavevector(idx);
                let k2 = dot(&k, &k);
                if k2 == T::zero() {
                    return [Complex::new(T::zero(), T::zero()); 3];
                }
                let proj = (specs[0][idx] * k[0] + specs[1][idx] * k[1] + specs[2][idx] * k[2]) / k2;
                [proj * k[0], proj * k[1], proj * k[2]]
            })
            .collect();
        let components = [0, 1, 2].map(|a| self.inverse_real(par.iter().map(|v| v[a]).collect()));
        let longitudinal = VectorField { grid, components };
        let transverse = f.sub(&longitudinal);
        (longitudinal, transverse)
    }

    /// Scalar potential `Π_∥` with `Π̂_∥ = (3/2) k̂_a k̂_b Π̂_ab`.
    pub fn longitudinal_potential(&self, pi: &SymTensorField<T>) -> ScalarField<T> {
        let specs: Vec<Spectrum<T>> = pi.components.iter().map(|c| self.forward(c)).collect();
        let grid = self.grid;
        let out: Spectrum<T> = (0..grid.points())
            .into_par_iter()
            .map(|idx| {
                let (_, k) = grid.wavevector(idx);
                longitudinal_scalar(&specs, idx, &k).unwrap_or(Complex::new(T::zero(), T::zero()))
            })
            .collect();
        ScalarField { grid, values: self.inverse_real(out) }
    }
}

fn dot<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn longitudinal_scalar<T: Real>(specs: &[Spectrum<T>], idx: usize, k: &[T; 3]) -> Option<Complex<T>> {
    let k2 = dot(k, k);
    if k2 == T::zero() {
        return None;
    }
    let mut acc = Complex::new(T::zero(), T::zero());
    for a in 0..3 {
        for b in 0..3 {
            acc += specs[sym_index(a, b)][idx] * (k[a] * k[b]);
        }
    }
    Some(acc * (T::lit(1.5) / k2))
}

/// Longitudinal, rotational and transverse-traceless parts of a traceless
/// symmetric tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorParts<T> {
    pub longitudinal: SymTensorField<T>,
    pub rotational: SymTensorField<T>,
    pub transverse_traceless: SymTensorField<T>,
}

/// Relative tolerance for the traceless precondition.
pub const TRACELESS_TOL: f64 = 1e-10;
/// Relative error below which a refinement step counts as converged: the
/// spectral cross term reaches double-precision round-off well before n = 128.
pub const NEWTON_ROUNDOFF_FLOOR: f64 = 1e-10;

/// Relative tolerance for the transversality precondition of [`solve_w`].
pub const TRANSVERSE_TOL: f64 = 1e-8;
/// Relative size of a mean that still counts as zero.
pub const ZERO_MEAN_TOL: f64 = 1e-12;

fn check_traceless<T: Real>(pi: &SymTensorField<T>) -> Result<(), FieldError> {
    let scale = pi.max_abs();
    let tr = max_abs(&pi.trace().values);
    if tr > T::lit(TRACELESS_TOL) * scale {
        return Err(FieldError::NotTraceless((tr / scale).to_f64_lossy()));
    }
    Ok(())
}

pub fn helmholtz_vector<T: FieldReal>(f: &VectorField<T>) -> (VectorField<T>, VectorField<T>) {
    Spectral::new(f.grid).helmholtz_vector(f)
}

/// Splits a traceless symmetric tensor as `Π = Π^∥ + Π^⊥ + Π^TT`.
///
/// Per Fourier mode, with `P = 1 − k̂k̂`:
/// `Π^∥ = (k̂k̂ − 1/3)(3/2)(k̂·Π·k̂)`, `Π^⊥_ij = k̂_i V_j + k̂_j V_i` with
/// `V = P·Π·k̂`, and `Π^TT` the remainder. The zero mode is left in `Π^TT`.
pub fn decompose_tensor<T: FieldReal>(pi: &SymTensorField<T>) -> Result<TensorParts<T>, FieldError> {
    check_traceless(pi)?;
    let sp = Spectral::new(pi.grid);
    let specs: Vec<Spectrum<T>> = pi.components.iter().map(|c| sp.forward(c)).collect();
    let grid = pi.grid;
    let zero = Complex::new(T::zero(), T::zero());
    let third = T::one() / T::lit(3.0);
    type Six<T> = [Complex<T>; 6];
    let parts: Vec<(Six<T>, Six<T>)> = (0..grid.points())
        .into_par_iter()
        .map(|idx| {
            let (_, k) = grid.wavevector(idx);
            let k2 = dot(&k, &k);
            if k2 == T::zero() {
                return ([zero; 6], [zero; 6]);
            }
            let kn = k2.sqrt();
            let kh = k.map(|v| v / kn);
            let scalar = longitudinal_scalar(&specs, idx, &k).unwrap_or(zero);
            // w = Π·k̂, s = k̂·Π·k̂, V = w − k̂ s.
            let w: [Complex<T>; 3] =
                std::array::from_fn(|a| (0..3).fold(zero, |acc, b| acc + specs[sym_index(a, b)][idx] * kh[b]));
            let s = w[0] * kh[0] + w[1] * kh[1] + w[2] * kh[2];
            let v: [Complex<T>; 3] = std::array::from_fn(|a| w[a] - s * kh[a]);
            let mut par = [zero; 6];
            let mut rot = [zero; 6];
            for a in 0..3 {
                for b in a..3 {
                    let slot = sym_index(a, b);
                    let delta = if a == b { third } else { T::zero() };
                    par[slot] = scalar * (kh[a] * kh[b] - delta);
                    rot[slot] = v[b] * kh[a] + v[a] * kh[b];
                }
            }
            (par, rot)
        })
        .collect();
    let longitudinal = SymTensorField {
        grid,
        components: std::array::from_fn(|c| sp.inverse_real(parts.iter().map(|p| p.0[c]).collect())),
    };
    let rotational = SymTensorField {
        grid,
        components: std::array::from_fn(|c| sp.inverse_real(parts.iter().map(|p| p.1[c]).collect())),
    };
    let transverse_traceless = pi.sub(&longitudinal).sub(&rotational);
    Ok(TensorParts { longitudinal, rotational, transverse_traceless })
}

fn check_zero_mean<T: Real>(f: &ScalarField<T>) -> Result<(), FieldError> {
    if !all_finite(&f.values) {
        return Err(FieldError::NonFinite);
    }
    let mean = f.mean();
    let max = f.max_abs();
    if Float::abs(mean) > T::lit(ZERO_MEAN_TOL) * max {
        return Err(FieldError::NonZeroMean { mean: mean.to_f64_lossy(), max: max.to_f64_lossy() });
    }
    Ok(())
}

/// `ψ` from `∇²ψ = 4πG T₀₀`, i.e. `ψ = −G ∫ T₀₀/|r − r'|`.
pub fn solve_psi<T: FieldReal>(t00: &ScalarField<T>, g: T) -> Result<ScalarField<T>, FieldError> {
    check_zero_mean(t00)?;
    let sp = Spectral::new(t00.grid);
    let four_pi_g = T::lit(4.0) * T::PI() * g;
    Ok(ScalarField { grid: t00.grid, values: sp.poisson(&t00.values, four_pi_g) })
}

/// `w_⊥ = −4G ∫ f_⊥/|r − r'|`, so `∇²w_⊥ = +16πG f_⊥` (from `∇×∇×w = −∇²w`
/// applied to `∇×(∇×w) = −16πG f_⊥`).
pub fn solve_w<T: FieldReal>(f_perp: &VectorField<T>, g: T) -> Result<VectorField<T>, FieldError> {
    if f_perp.components.iter().any(|c| !all_finite(c)) {
        return Err(FieldError::NonFinite);
    }
    let sp = Spectral::new(f_perp.grid);
    let specs: Vec<Spectrum<T>> = f_perp.components.iter().map(|c| sp.forward(c)).collect();
    let grid = f_perp.grid;
    let (mut num, mut den) = (T::zero(), T::zero());
    #[allow(clippy::needless_range_loop)]
    for idx in 0..grid.points() {
        let (_, k) = grid.wavevector(idx);
        let kf = specs[0][idx] * k[0] + specs[1][idx] * k[1] + specs[2][idx] * k[2];
        num += kf.norm_sqr();
        den += dot(&k, &k) * (specs[0][idx].norm_sqr() + specs[1][idx].norm_sqr() + specs[2][idx].norm_sqr());
    }
    if den > T::zero() && num.sqrt() > T::lit(TRANSVERSE_TOL) * den.sqrt() {
        return Err(FieldError::NotTransverse((num.sqrt() / den.sqrt()).to_f64_lossy()));
    }
    let scale = T::lit(16.0) * T::PI() * g;
    let components = [0, 1, 2].map(|a| sp.poisson(&f_perp.components[a], scale));
    Ok(VectorField { grid, components })
}

/// `φ = ψ + 2G ∫ Π_∥/|r − r'|`, i.e. `φ̂ = ψ̂ + 8πG Π̂_∥/k²`.
pub fn solve_phi<T: FieldReal>(
    psi: &ScalarField<T>,
    pi: &SymTensorField<T>,
    g: T,
) -> Result<ScalarField<T>, FieldError> {
    if psi.grid != pi.grid {
        return Err(FieldError::GridMismatch);
    }
    check_traceless(pi)?;
    let sp = Spectral::new(psi.grid);
    let pot = sp.longitudinal_potential(pi);
    let corr = sp.poisson(&pot.values, -T::lit(8.0) * T::PI() * g);
    let values = psi.values.iter().zip(&corr).map(|(a, b)| *a + *b).collect();
    Ok(ScalarField { grid: psi.grid, values })
}

/// Matter content on the grid. `tij` is the full spatial stress `T^ij`
/// (trace included); `s_tt` is an externally supplied TT strain.
#[derive(Debug, Clone, PartialEq)]
pub struct StressEnergy<T> {
    pub t00: ScalarField<T>,
    pub t0i: Option<VectorField<T>>,
    pub tij: Option<SymTensorField<T>>,
    pub s_tt: Option<SymTensorField<T>>,
}

impl<T: Real> StressEnergy<T> {
    pub fn dust(t00: ScalarField<T>) -> Self {
        Self { t00, t0i: None, tij: None, s_tt: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConservationMode {
    /// `T^0i` must vanish.
    #[default]
    Static,
    /// `T^0i` may be present but must be divergence-free.
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InteractionTerms<T> {
    pub radiation: T,
    pub frame_dragging: T,
    pub newtonian: T,
    pub total: T,
    /// Mean of `T₀₀` removed before the spectral solve.
    pub monopole: T,
}

/// Tolerance on `max|∂_i T^0i| / (k_max · max|T^0i|)` in stationary mode.
pub const CONSERVATION_TOL: f64 = 1e-8;

/// Interaction energy of the matter fields after eliminating the constrained
/// metric components:
///
/// ```text
/// H = −∫ s^TT_ij T^ij
///     + 2G ∫∫ f_⊥(r')·T^0i(r) / |r − r'|
///     − (G/2) ∫∫ T₀₀(r') (T⁰⁰ + T^k_k − 2Π_∥)(r) / |r − r'|
/// ```
///
/// Double integrals are evaluated spectrally with the periodic kernel
/// `4π/k²` (zero mode dropped), so the result is the energy per periodic cell.
pub fn assemble_interaction<T: FieldReal>(
    fields: &StressEnergy<T>,
    g: T,
    mode: ConservationMode,
) -> Result<InteractionTerms<T>, FieldError> {
    let grid = fields.t00.grid;
    let same = |gr: &Grid3D<T>| *gr == grid;
    if !fields.t0i.as_ref().is_none_or(|f| same(&f.grid))
        || !fields.tij.as_ref().is_none_or(|f| same(&f.grid))
        || !fields.s_tt.as_ref().is_none_or(|f| same(&f.grid))
    {
        return Err(FieldError::GridMismatch);
    }
    let finite = all_finite(&fields.t00.values)
        && fields.t0i.as_ref().is_none_or(|f| f.components.iter().all(|c| all_finite(c)))
        && fields.tij.as_ref().is_none_or(|f| f.components.iter().all(|c| all_finite(c)))
        && fields.s_tt.as_ref().is_none_or(|f| f.components.iter().all(|c| all_finite(c)));
    if !finite {
        return Err(FieldError::NonFinite);
    }
    let sp = Spectral::new(grid);
    let volume = grid.volume();
    let four_pi = T::lit(4.0) * T::PI();

    // ∫∫ a(r') b(r)/|r − r'| = V Σ_{k≠0} (4π/k²) conj(â_k) b̂_k, with â = FFT/N.
    let norm = T::one() / T::from_usize_lossy(grid.points());
    let coulomb = |a: &Spectrum<T>, b: &Spectrum<T>| -> T {
        let mut acc = T::zero();
        for idx in 0..grid.points() {
            let (k, _) = grid.wavevector(idx);
            let k2 = dot(&k, &k);
            if k2 == T::zero() {
                continue;
            }
            acc += (a[idx].conj() * b[idx]).re * (four_pi / k2);
        }
        acc * volume * norm * norm
    };

    let monopole = fields.t00.mean();
    let t00_hat = sp.forward(&fields.t00.values);

    let frame_dragging = match (&fields.t0i, mode) {
        (None, _) => T::zero(),
        (Some(f), ConservationMode::Static) => {
            let m = f.max_abs();
            if m > T::zero() {
                return Err(FieldError::NotStatic(m.to_f64_lossy()));
            }
            T::zero()
        }
        (Some(f), ConservationMode::Stationary) => {
            let div = sp.divergence(f);
            let kmax = grid.fundamental() * T::from_usize_lossy(grid.n / 2);
            let scale = kmax * f.max_abs();
            let rel = if scale > T::zero() { div.max_abs() / scale } else { T::zero() };
            if rel > T::lit(CONSERVATION_TOL) {
                return Err(FieldError::NotConserved(rel.to_f64_lossy()));
            }
            let (_, perp) = sp.helmholtz_vector(f);
            let mut acc = T::zero();
            for a in 0..3 {
                acc += coulomb(&sp.forward(&perp.components[a]), &sp.forward(&f.components[a]));
            }
            T::lit(2.0) * g * acc
        }
    };

    // Weight T⁰⁰ + T^k_k − 2Π_∥ in Fourier space.
    let mut weight = t00_hat.clone();
    if let Some(tij) = &fields.tij {
        let trace_hat = sp.forward(&tij.trace().values);
        let pi = tij.traceless_part();
        let specs: Vec<Spectrum<T>> = pi.components.iter().map(|c| sp.forward(c)).collect();
        for (idx, w) in weight.iter_mut().enumerate() {
            let (_, k) = grid.wavevector(idx);
            let pl = longitudinal_scalar(&specs, idx, &k).unwrap_or(Complex::new(T::zero(), T::zero()));
            *w += trace_hat[idx] - pl * T::lit(2.0);
        }
    }
    let newtonian = -(g * T::lit(0.5)) * coulomb(&t00_hat, &weight);

    let radiation = match (&fields.s_tt, &fields.tij) {
        (Some(s), Some(t)) => {
            let mut acc = T::zero();
            for slot in 0..6 {
                let mult = if matches!(slot, 0 | 3 | 5) { T::one() } else { T::lit(2.0) };
                let dotp = s.components[slot].iter().zip(&t.components[slot]).fold(T::zero(), |a, (x, y)| a + *x * *y);
                acc += mult * dotp;
            }
            -acc * grid.cell_volume()
        }
        _ => T::zero(),
    };

    Ok(InteractionTerms {
        radiation,
        frame_dragging,
        newtonian,
        total: radiation + frame_dragging + newtonian,
        monopole,
    })
}

/// Normalized Gaussian of total mass `m` centred at `c`, sampled with
/// minimum-image distances.
pub fn gaussian_blob<T: Real>(grid: Grid3D<T>, m: T, c: [T; 3], sigma: T) -> ScalarField<T> {
    let l = grid.side();
    let half = l * T::lit(0.5);
    let norm = m / (T::TAU() * sigma * sigma).powf(T::lit(1.5));
    let two_s2 = T::lit(2.0) * sigma * sigma;
    ScalarField::from_fn(grid, move |p| {
        let mut r2 = T::zero();
        for a in 0..3 {
            let mut dx = p[a] - c[a];
            if dx > half {
                dx -= l;
            } else if dx < -half {
                dx += l;
            }
            r2 += dx * dx;
        }
        norm * (-r2 / two_s2).exp()
    })
}

/// Interaction potential per unit masses of two Gaussians of width `sigma`
/// at separation `r` in a periodic box of side `l`, with the uniform
/// background removed: `(4π/V) Σ_{k≠0} e^{−k²σ²} cos(k·r)/k²`.
///
/// Evaluated by Ewald splitting with screening width `s = l/4`; each lattice
/// sum runs shell by shell until a shell adds less than `1e-10` relative.
pub fn periodic_pair_kernel(r: [f64; 3], sigma: f64, l: f64) -> f64 {
    use std::f64::consts::PI;
    let s = 0.25 * l;
    let beta2 = s * s - sigma * sigma;
    assert!(beta2 > 0.0, "Gaussian width must be below l/4");
    let volume = l * l * l;
    let short = |d: f64| {
        if d < 1e-12 * l {
            // Limit of [erf(d/2σ) − erf(d/2s)]/d at d → 0.
            (1.0 / sigma - 1.0 / s) / PI.sqrt()
        } else {
            (libm::erf(d / (2.0 * sigma)) - libm::erf(d / (2.0 * s))) / d
        }
    };
    let mut real = 0.0;
    let mut shell = 0i64;
    loop {
        let mut inc = 0.0;
        for_shell(shell, |n| {
            let v = [0, 1, 2].map(|a| r[a] + n[a] as f64 * l);
            inc += short((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt());
        });
        real += inc;
        if shell > 1 && inc.abs() <= 1e-10 * real.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        shell += 1;
    }
    let f = 2.0 * PI / l;
    let mut recip = 0.0;
    let mut shell = 1i64;
    loop {
        let mut inc = 0.0;
        for_shell(shell, |m| {
            let k = m.map(|c| c as f64 * f);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            inc += (-k2 * s * s).exp() * (k[0] * r[0] + k[1] * r[1] + k[2] * r[2]).cos() / k2;
        });
        recip += inc;
        if inc.abs() <= 1e-10 * recip.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        shell += 1;
    }
    real - 4.0 * PI * beta2 / volume + 4.0 * PI / volume * recip
}

/// Calls `f` for every integer vector with max-norm exactly `shell`.
fn for_shell(shell: i64, mut f: impl FnMut([i64; 3])) {
    for a in -shell..=shell {
        for b in -shell..=shell {
            for c in -shell..=shell {
                if a.abs().max(b.abs()).max(c.abs()) == shell {
                    f([a, b, c]);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonRow {
    pub n: usize,
    pub sigma: f64,
    pub cross_term: f64,
    pub periodic_reference: f64,
    pub point_reference: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonReport {
    pub m1: f64,
    pub m2: f64,
    pub d: f64,
    pub box_side: f64,
    pub rows: Vec<NewtonRow>,
    pub monotone: bool,
}

/// Cross term of the Newtonian interaction energy for two Gaussian masses,
/// `H(ρ₁+ρ₂) − H(ρ₁) − H(ρ₂)`, on the grid.
pub fn newtonian_cross_term<T: FieldReal>(
    grid: Grid3D<T>,
    m1: T,
    m2: T,
    d: T,
    sigma: T,
    g: T,
) -> Result<T, FieldError> {
    let l = grid.side();
    let c = l * T::lit(0.5);
    let a = gaussian_blob(grid, m1, [c - d * T::lit(0.5), c, c], sigma);
    let b = gaussian_blob(grid, m2, [c + d * T::lit(0.5), c, c], sigma);
    let both = ScalarField { grid, values: a.values.iter().zip(&b.values).map(|(x, y)| *x + *y).collect() };
    let h =
        |f: ScalarField<T>| assemble_interaction(&StressEnergy::dust(f), g, ConservationMode::Static).map(|t| t.total);
    Ok(h(both)? - h(a)? - h(b)?)
}

/// Compares the grid cross term with `−G m₁ m₂ K(d)` from
/// [`periodic_pair_kernel`] at each resolution in `ns`.
pub fn newtonian_reduction_check(
    m1: f64,
    m2: f64,
    d: f64,
    sigma: f64,
    l: f64,
    g: f64,
    ns: &[usize],
) -> Result<NewtonReport, FieldError> {
    if !(sigma > 0.0 && d >= 4.0 * sigma) {
        return Err(FieldError::Geometry(format!("need d >= 4 sigma (d = {d}, sigma = {sigma})")));
    }
    if !(d <= 0.25 * l) {
        return Err(FieldError::Geometry(format!("need d <= L/4 (d = {d}, L = {l})")));
    }
    if !(m1 >= 0.0 && m2 >= 0.0) {
        return Err(FieldError::Geometry("masses must be non-negative".into()));
    }
    let kernel = periodic_pair_kernel([d, 0.0, 0.0], sigma, l);
    let reference = -g * m1 * m2 * kernel;
    let point = -g * m1 * m2 / d;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let grid = Grid3D::new(n, l)?;
        let cross = newtonian_cross_term(grid, m1, m2, d, sigma, g)?;
        let rel_error = if reference != 0.0 { ((cross - reference) / reference).abs() } else { cross.abs() };
        rows.push(NewtonRow {
            n,
            sigma,
            cross_term: cross,
            periodic_reference: reference,
            point_reference: point,
            rel_error,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].rel_error < w[0].rel_error || w[1].rel_error <= NEWTON_ROUNDOFF_FLOOR);
    Ok(NewtonReport { m1, m2, d, box_side: l, rows, monotone })
}

/// Sidecar describing a raw field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub components: usize,
}

/// Writes `<base>.bin` (little-endian f64, component-major) and `<base>.json`.
pub fn write_field(base: &Path, grid: &Grid3D<f64>, components: &[&[f64]]) -> Result<(), FieldError> {
    let header = FieldHeader { n: grid.n(), l: grid.side(), components: components.len() };
    let mut bytes = Vec::with_capacity(8 * grid.points() * components.len());
    for c in components {
        if c.len() != grid.points() {
            return Err(FieldError::Io(format!("component has {} values, expected {}", c.len(), grid.points())));
        }
        for v in *c {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let io = |e: std::io::Error| FieldError::Io(e.to_string());
    std::fs::write(base.with_extension("bin"), bytes).map_err(io)?;
    let json = serde_json::to_string(&header).map_err(|e| FieldError::Io(e.to_string()))?;
    std::fs::write(base.with_extension("json"), json).map_err(io)?;
    Ok(())
}

/// Reads a field written by [`write_field`].
pub fn read_field(base: &Path) -> Result<(Grid3D<f64>, Vec<Vec<f64>>), FieldError> {
    let io = |e: std::io::Error| FieldError::Io(format!("{}: {e}", base.display()));
    let text = std::fs::read_to_string(base.with_extension("json")).map_err(io)?;
    let header: FieldHeader = serde_json::from_str(&text).map_err(|e| FieldError::Io(e.to_string()))?;
    let grid = Grid3D::new(header.n, header.l)?;
    let bytes = std::fs::read(base.with_extension("bin")).map_err(io)?;
    let expected = 8 * grid.points() * header.components;
    if bytes.len() != expected {
        return Err(FieldError::Io(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let values: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    let comps = values.chunks(grid.points()).map(<[f64]>::to_vec).collect();
    Ok((grid, comps))
}

/// Random real field whose spectrum is confined to `|m_a| ≤ band`.
pub fn band_limited_random<T: FieldReal>(grid: Grid3D<T>, band: usize, seed: u64) -> ScalarField<T> {
    // SplitMix64: a self-contained generator keeps the field bit-stable
    // regardless of which RNG crate versions are in the tree.
    let mut state = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut next = move || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let n = grid.n();
    let sp = Spectral::new(grid);
    let mut spec = vec![Complex::new(T::zero(), T::zero()); grid.points()];
    for (idx, z) in spec.iter_mut().enumerate() {
        let ids = [idx / (n * n), (idx / n) % n, idx % n];
        if ids.iter().all(|&i| grid.mode(i).unsigned_abs() <= band) {
            *z = Complex::new(T::lit(next()), T::lit(next()));
        }
    }
    let values = sp.inverse_real(spec);
    let scale = T::one() / max_abs(&values).max(T::min_positive_value());
    ScalarField { grid, values: values.into_iter().map(|v| v * scale).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid16() -> Grid3D<f64> {
        Grid3D::new(16, 1.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid3D::new(12, 1.0).is_err());
        assert!(Grid3D::new(8, 1.0).is_err());
        assert!(Grid3D::new(16, 0.0).is_err());
    }

    #[test]
    fn fft_round_trip() {
        let f = band_limited_random(grid16(), 8, 3);
        let sp = Spectral::new(f.grid);
        let back = sp.inverse_real(sp.forward(&f.values));
        for (a, b) in f.values.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_of_sine_is_longitudinal() {
        let g = grid16();
        let tau = std::f64::consts::TAU;
        let f = VectorField::from_fn(g, |p| [tau * (tau * p[0]).cos(), 0.0, 0.0]);
        let (par, perp) = helmholtz_vector(&f);
        assert!(perp.max_abs() < 1e-12);
        assert!(par.sub(&f).max_abs() < 1e-12);
    }

    #[test]
    fn single_mode_poisson() {
        let g = grid16();
        let tau = std::f64::consts::TAU;
        let src = ScalarField::from_fn(g, |p| 2.0 * (tau * p[1]).cos());
        let psi = solve_psi(&src, 1.0).unwrap();
        let k2 = tau * tau;
        for (i, v) in psi.values.iter().enumerate() {
            let p = g.position(i);
            let exact = -4.0 * std::f64::consts::PI * 2.0 * (tau * p[1]).cos() / k2;
            assert!((v - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn psi_rejects_mean() {
        let g = grid16();
        let src = ScalarField { grid: g, values: vec![1.0; g.points()] };
        assert!(matches!(solve_psi(&src, 1.0), Err(FieldError::NonZeroMean { .. })));
    }

    #[test]
    fn ewald_kernel_matches_direct_reciprocal_sum() {
        use std::f64::consts::PI;
        let (l, sigma) = (1.0, 0.05);
        let r = [0.25, 0.1, 0.0];
        let f = 2.0 * PI / l;
        let mut direct = 0.0;
        let m = 40i64;
        for a in -m..=m {
            for b in -m..=m {
                for c in -m..=m {
                    if a == 0 && b == 0 && c == 0 {
                        continue;
                    }
                    let k = [a as f64 * f, b as f64 * f, c as f64 * f];
                    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                    direct += (-k2 * sigma * sigma).exp() * (k[0] * r[0] + k[1] * r[1]).cos() / k2;
                }
            }
        }
        direct *= 4.0 * PI / (l * l * l);
        let ewald = periodic_pair_kernel(r, sigma, l);
        assert!((ewald - direct).abs() < 1e-9 * direct.abs(), "{ewald} vs {direct}");
    }

    #[test]
    fn field_io_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("f");
        let f = band_limited_random(grid16(), 4, 9);
        write_field(&base, &f.grid, &[&f.values]).unwrap();
        let (g, comps) = read_field(&base).unwrap();
        assert_eq!(g, f.grid);
        assert_eq!(comps[0], f.values);
        let header = std::fs::read_to_string(base.with_extension("json")).unwrap();
        assert!(header.contains("\"L\""));
    }
}
