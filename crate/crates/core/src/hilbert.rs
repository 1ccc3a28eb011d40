//! Dense states and density matrices over tensor-product Hilbert spaces.
//!
//! Subsystem 0 is the most significant index in the row-major amplitude
//! layout, so `|a b⟩` sits at `a * dim_b + b`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::Real;

/// Largest amplitude count accepted by constructors and tensor products.
pub const MAX_HILBERT_DIM: usize = 1 << 20;

/// Eigenvalues in `[-POSITIVITY_SLACK, 0)` count as zero in positivity checks.
pub const POSITIVITY_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HilbertError {
    #[error("hilbert space of {0} amplitudes exceeds the configured maximum {MAX_HILBERT_DIM}")]
    TooLarge(usize),
    #[error("amplitude count {got} does not match product of dims {expected}")]
    AmplitudeCount { expected: usize, got: usize },
    #[error("subsystem dimensions must be positive, got {0:?}")]
    BadDims(Vec<usize>),
    #[error("invalid subsystem index {index} for {subsystems} subsystems")]
    InvalidSubsystem { index: usize, subsystems: usize },
    #[error("subsystem selection must be nonempty")]
    EmptySelection,
    #[error("bipartition {0:?} is not a proper split of the subsystems")]
    ImproperBipartition(Vec<usize>),
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch(Vec<usize>, Vec<usize>),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("density matrix trace {0} differs from 1")]
    BadTrace(f64),
    #[error("density matrix has negative eigenvalue {0:e}")]
    NotPositive(f64),
    #[error("malformed JSON matrix document: {0}")]
    Json(String),
}

fn checked_product(dims: &[usize]) -> Result<usize, HilbertError> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(HilbertError::BadDims(dims.to_vec()));
    }
    let mut total: usize = 1;
    for &d in dims {
        total = total.checked_mul(d).ok_or(HilbertError::TooLarge(usize::MAX))?;
        if total > MAX_HILBERT_DIM {
            return Err(HilbertError::TooLarge(total));
        }
    }
    Ok(total)
}

fn zero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// Pure state as a flat amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    dims: Vec<usize>,
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn new(dims: Vec<usize>, amplitudes: Vec<Complex<T>>) -> Result<Self, HilbertError> {
        let expected = checked_product(&dims)?;
        if amplitudes.len() != expected {
            return Err(HilbertError::AmplitudeCount { expected, got: amplitudes.len() });
        }
        Ok(Self { dims, amplitudes })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self, HilbertError> {
        let total = checked_product(&dims)?;
        if index >= total {
            return Err(HilbertError::InvalidSubsystem { index, subsystems: total });
        }
        let mut amplitudes = vec![zero(); total];
        amplitudes[index] = Complex::new(T::one(), T::zero());
        Ok(Self { dims, amplitudes })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).fold(T::zero(), |s, x| s + x).sqrt()
    }

    pub fn normalize(&mut self) -> Result<(), HilbertError> {
        let n = self.norm();
        if n == T::zero() || !n.is_finite() {
            return Err(HilbertError::ZeroNorm);
        }
        let inv = T::one() / n;
        for a in &mut self.amplitudes {
            *a *= inv;
        }
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self, HilbertError> {
        self.normalize()?;
        Ok(self)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>, HilbertError> {
        if self.dims != other.dims {
            return Err(HilbertError::DimensionMismatch(self.dims.clone(), other.dims.clone()));
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).fold(zero(), |acc, (a, b)| acc + a.conj() * b))
    }

    /// Kronecker product; subsystem lists are concatenated.
    pub fn tensor_product(&self, other: &Self) -> Result<Self, HilbertError> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        checked_product(&dims)?;
        let mut amplitudes = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(*a * *b);
            }
        }
        Ok(Self { dims, amplitudes })
    }
}

/// Density matrix, row-major with side `∏ dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T> {
    dims: Vec<usize>,
    entries: Vec<Complex<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// Wraps raw entries after checking shape; call [`Self::validate`] for
    /// the physical invariants.
    pub fn new(dims: Vec<usize>, entries: Vec<Complex<T>>) -> Result<Self, HilbertError> {
        let side = checked_product(&dims)?;
        if entries.len() != side * side {
            return Err(HilbertError::AmplitudeCount { expected: side * side, got: entries.len() });
        }
        Ok(Self { dims, entries })
    }

    pub fn from_pure(state: &StateVector<T>) -> Self {
        let n = state.dim();
        let a = state.amplitudes();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(a[i] * a[j].conj());
            }
        }
        Self { dims: state.dims.clone(), entries }
    }

    /// Convex mixture `Σ p_i |ψ_i⟩⟨ψ_i|` of states with equal dims.
    pub fn mixture(weights: &[T], states: &[StateVector<T>]) -> Result<Self, HilbertError> {
        let first = states.first().ok_or(HilbertError::EmptySelection)?;
        let n = first.dim();
        let mut entries = vec![zero(); n * n];
        for (w, s) in weights.iter().zip(states) {
            if s.dims != first.dims {
                return Err(HilbertError::DimensionMismatch(first.dims.clone(), s.dims.clone()));
            }
            let rho = Self::from_pure(s);
            for (e, r) in entries.iter_mut().zip(rho.entries) {
                *e += r * *w;
            }
        }
        Ok(Self { dims: first.dims.clone(), entries })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn side(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex<T> {
        self.entries[row * self.side() + col]
    }

    pub fn trace(&self) -> Complex<T> {
        let n = self.side();
        (0..n).fold(zero(), |acc, i| acc + self.entries[i * n + i])
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        linalg::hermitian_eigenvalues(&self.entries, self.side())
    }

    /// Checks Hermiticity and unit trace to 1e-12 and positivity up to
    /// [`POSITIVITY_SLACK`].
    pub fn validate(&self) -> Result<(), HilbertError> {
        let n = self.side();
        let tol = T::lit(1e-12);
        let defect = linalg::hermiticity_defect(&self.entries, n);
        if defect > tol {
            return Err(HilbertError::NotHermitian(defect.to_f64_lossy()));
        }
        let tr = self.trace();
        if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
            return Err(HilbertError::BadTrace(tr.re.to_f64_lossy()));
        }
        let min = self.eigenvalues().into_iter().fold(T::infinity(), T::min);
        if min < -T::lit(POSITIVITY_SLACK) {
            return Err(HilbertError::NotPositive(min.to_f64_lossy()));
        }
        Ok(())
    }

    fn check_subsystems(&self, subsystems: &[usize]) -> Result<(), HilbertError> {
        for &s in subsystems {
            if s >= self.dims.len() {
                return Err(HilbertError::InvalidSubsystem { index: s, subsystems: self.dims.len() });
            }
        }
        Ok(())
    }

    /// Reduced state on the subsystems in `keep` (order of `keep` is ignored;
    /// the result lists kept subsystems in their original order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self, HilbertError> {
        if keep.is_empty() {
            return Err(HilbertError::EmptySelection);
        }
        self.check_subsystems(keep)?;
        let nsub = self.dims.len();
        let kept: Vec<usize> = (0..nsub).filter(|i| keep.contains(i)).collect();
        let traced: Vec<usize> = (0..nsub).filter(|i| !keep.contains(i)).collect();
        let kept_dims: Vec<usize> = kept.iter().map(|&i| self.dims[i]).collect();
        let traced_dims: Vec<usize> = traced.iter().map(|&i| self.dims[i]).collect();
        let nk: usize = kept_dims.iter().product();
        let nt: usize = traced_dims.iter().product();
        let n = self.side();

        let strides = strides(&self.dims);
        let offset = |k_idx: usize, t_idx: usize| -> usize {
            let mut flat = 0;
            let mut rem = k_idx;
            for (pos, &sub) in kept.iter().enumerate().rev() {
                let d = kept_dims[pos];
                flat += (rem % d) * strides[sub];
                rem /= d;
            }
            let mut rem = t_idx;
            for (pos, &sub) in traced.iter().enumerate().rev() {
                let d = traced_dims[pos];
                flat += (rem % d) * strides[sub];
                rem /= d;
            }
            flat
        };

        let mut out = vec![zero(); nk * nk];
        for a in 0..nk {
            for b in 0..nk {
                let mut acc = zero();
                for t in 0..nt {
                    acc += self.entries[offset(a, t) * n + offset(b, t)];
                }
                out[a * nk + b] = acc;
            }
        }
        Ok(Self { dims: kept_dims, entries: out })
    }

    /// Partial transpose over the listed subsystems.
    pub fn partial_transpose(&self, subsystems: &[usize]) -> Result<Self, HilbertError> {
        self.check_subsystems(subsystems)?;
        let n = self.side();
        let strides = strides(&self.dims);
        let mut out = vec![zero(); n * n];
        for row in 0..n {
            for col in 0..n {
                // Swap the digits of `row` and `col` belonging to transposed subsystems.
                let mut r = row;
                let mut c = col;
                for &s in subsystems {
                    let st = strides[s];
                    let d = self.dims[s];
                    let rd = (row / st) % d;
                    let cd = (col / st) % d;
                    r = r - rd * st + cd * st;
                    c = c - cd * st + rd * st;
                }
                out[r * n + c] = self.entries[row * n + col];
            }
        }
        Ok(Self { dims: self.dims.clone(), entries: out })
    }

    /// Negativity `(‖ρ^{T_B}‖₁ − 1)/2`, with `B` the listed subsystems.
    ///
    /// Evaluated as the summed magnitude of the negative eigenvalues of the
    /// partial transpose, which is the same quantity for unit trace and does
    /// not lose digits to the `− 1`.
    pub fn negativity(&self, bipartition: &[usize]) -> Result<T, HilbertError> {
        let nsub = self.dims.len();
        let mut set: Vec<usize> = bipartition.to_vec();
        set.sort_unstable();
        set.dedup();
        self.check_subsystems(&set)?;
        if set.is_empty() || set.len() >= nsub {
            return Err(HilbertError::ImproperBipartition(bipartition.to_vec()));
        }
        let pt = self.partial_transpose(&set)?;
        let neg = pt.eigenvalues().into_iter().filter(|&l| l < T::zero()).fold(T::zero(), |acc, l| acc - l);
        Ok(neg.max(T::zero()))
    }

    /// `Tr(W ρ)` (real part; the imaginary part vanishes for Hermitian W, ρ).
    pub fn witness_expectation(&self, w: &WitnessOperator<T>) -> Result<T, HilbertError> {
        if w.dims != self.dims {
            return Err(HilbertError::DimensionMismatch(w.dims.clone(), self.dims.clone()));
        }
        let n = self.side();
        let mut acc = zero();
        for i in 0..n {
            for k in 0..n {
                acc += w.entries[i * n + k] * self.entries[k * n + i];
            }
        }
        Ok(acc.re)
    }

    /// `U ρ U†` for a unitary on the full space.
    pub fn conjugate_by(&self, unitary: &[Complex<T>]) -> Result<Self, HilbertError> {
        let n = self.side();
        if unitary.len() != n * n {
            return Err(HilbertError::AmplitudeCount { expected: n * n, got: unitary.len() });
        }
        let ur = linalg::matmul(unitary, &self.entries, n);
        let entries = linalg::matmul(&ur, &linalg::adjoint(unitary, n), n);
        Ok(Self { dims: self.dims.clone(), entries })
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Hermitian observable used as an entanglement witness.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessOperator<T> {
    dims: Vec<usize>,
    entries: Vec<Complex<T>>,
}

impl<T: Real> WitnessOperator<T> {
    pub fn new(dims: Vec<usize>, entries: Vec<Complex<T>>) -> Result<Self, HilbertError> {
        let side = checked_product(&dims)?;
        if entries.len() != side * side {
            return Err(HilbertError::AmplitudeCount { expected: side * side, got: entries.len() });
        }
        let defect = linalg::hermiticity_defect(&entries, side);
        if defect > T::lit(1e-12) {
            return Err(HilbertError::NotHermitian(defect.to_f64_lossy()));
        }
        Ok(Self { dims, entries })
    }

    pub fn identity(dims: Vec<usize>) -> Result<Self, HilbertError> {
        let n = checked_product(&dims)?;
        let mut entries = vec![zero(); n * n];
        for i in 0..n {
            entries[i * n + i] = Complex::new(T::one(), T::zero());
        }
        Ok(Self { dims, entries })
    }

    /// `(1/2)·I − |Φ⟩⟨Φ|` for a normalized two-qubit target `Φ`.
    ///
    /// For maximally entangled `Φ` every separable state has fidelity at most
    /// 1/2, so a negative expectation certifies entanglement.
    pub fn projector(target: &StateVector<T>) -> Result<Self, HilbertError> {
        let n = target.dim();
        let a = target.amplitudes();
        let half = T::lit(0.5);
        let mut entries = vec![zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = -(a[i] * a[j].conj());
            }
            entries[i * n + i] += Complex::new(half, T::zero());
        }
        Self::new(target.dims().to_vec(), entries)
    }

    /// Swap operator on two subsystems of equal dimension. Its expectation
    /// on product states `ρ_A ⊗ ρ_B` is `Tr(ρ_A ρ_B) ≥ 0`.
    pub fn swap(dim: usize) -> Result<Self, HilbertError> {
        let n = dim * dim;
        let mut entries = vec![zero(); n * n];
        for i in 0..dim {
            for j in 0..dim {
                let row = i * dim + j;
                let col = j * dim + i;
                entries[row * n + col] = Complex::new(T::one(), T::zero());
            }
        }
        Self::new(vec![dim, dim], entries)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }
}

/// JSON layout shared by states, density matrices and witnesses:
/// `{"dims": [...], "re": [...], "im": [...]}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub dims: Vec<usize>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixDocument {
    fn from_complex<T: Real>(dims: &[usize], values: &[Complex<T>]) -> Self {
        Self {
            dims: dims.to_vec(),
            re: values.iter().map(|z| z.re.to_f64_lossy()).collect(),
            im: values.iter().map(|z| z.im.to_f64_lossy()).collect(),
        }
    }

    fn to_complex<T: Real>(&self) -> Result<Vec<Complex<T>>, HilbertError> {
        if self.re.len() != self.im.len() {
            return Err(HilbertError::Json(format!("re has {} entries but im has {}", self.re.len(), self.im.len())));
        }
        Ok(self.re.iter().zip(&self.im).map(|(&r, &i)| Complex::new(T::lit(r), T::lit(i))).collect())
    }

    pub fn from_json(text: &str) -> Result<Self, HilbertError> {
        serde_json::from_str(text).map_err(|e| HilbertError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrix document serializes")
    }
}

impl<T: Real> StateVector<T> {
    pub fn to_document(&self) -> MatrixDocument {
        MatrixDocument::from_complex(&self.dims, &self.amplitudes)
    }

    pub fn from_document(doc: &MatrixDocument) -> Result<Self, HilbertError> {
        Self::new(doc.dims.clone(), doc.to_complex()?)
    }
}

impl<T: Real> DensityMatrix<T> {
    pub fn to_document(&self) -> MatrixDocument {
        MatrixDocument::from_complex(&self.dims, &self.entries)
    }

    pub fn from_document(doc: &MatrixDocument) -> Result<Self, HilbertError> {
        Self::new(doc.dims.clone(), doc.to_complex()?)
    }
}

impl<T: Real> WitnessOperator<T> {
    pub fn to_document(&self) -> MatrixDocument {
        MatrixDocument::from_complex(&self.dims, &self.entries)
    }

    pub fn from_document(doc: &MatrixDocument) -> Result<Self, HilbertError> {
        Self::new(doc.dims.clone(), doc.to_complex()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    fn bell() -> StateVector<f64> {
        let s = 0.5f64.sqrt();
        StateVector::new(vec![2, 2], vec![c(s), c(0.0), c(0.0), c(s)]).unwrap()
    }

    #[test]
    fn tensor_of_basis_states() {
        let zero = StateVector::<f64>::basis(vec![2], 0).unwrap();
        let p = zero.tensor_product(&zero).unwrap();
        assert_eq!(p.dims(), &[2, 2]);
        assert_eq!(p.amplitudes()[0], c(1.0));
        assert!(p.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn tensor_plus_with_one() {
        let s = 0.5f64.sqrt();
        let plus = StateVector::new(vec![2], vec![c(s), c(s)]).unwrap();
        let one = StateVector::<f64>::basis(vec![2], 1).unwrap();
        let p = plus.tensor_product(&one).unwrap();
        let expect = [0.0, s, 0.0, s];
        for (a, e) in p.amplitudes().iter().zip(expect) {
            assert!((a.re - e).abs() < 1e-16 && a.im == 0.0);
        }
    }

    #[test]
    fn tensor_product_rejects_oversized_spaces() {
        let big = StateVector::<f64>::basis(vec![1 << 11], 0).unwrap();
        let err = big.tensor_product(&big).unwrap_err();
        assert!(matches!(err, HilbertError::TooLarge(_)));
    }

    #[test]
    fn bell_reduces_to_maximally_mixed() {
        let rho = DensityMatrix::from_pure(&bell());
        let red = rho.partial_trace(&[0]).unwrap();
        assert_eq!(red.dims(), &[2]);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 0.5 } else { 0.0 };
                assert!((red.entry(i, j) - c(expect)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn partial_trace_errors() {
        let rho = DensityMatrix::from_pure(&bell());
        assert_eq!(rho.partial_trace(&[]).unwrap_err(), HilbertError::EmptySelection);
        assert!(matches!(rho.partial_trace(&[2]).unwrap_err(), HilbertError::InvalidSubsystem { index: 2, .. }));
    }

    #[test]
    fn negativity_of_bell_and_product() {
        let rho = DensityMatrix::from_pure(&bell());
        assert!((rho.negativity(&[1]).unwrap() - 0.5).abs() < 1e-14);
        let zero = StateVector::<f64>::basis(vec![2, 2], 0).unwrap();
        assert!(DensityMatrix::from_pure(&zero).negativity(&[1]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn negativity_rejects_improper_split() {
        let rho = DensityMatrix::from_pure(&bell());
        assert!(matches!(rho.negativity(&[]), Err(HilbertError::ImproperBipartition(_))));
        assert!(matches!(rho.negativity(&[0, 1]), Err(HilbertError::ImproperBipartition(_))));
    }

    #[test]
    fn witness_identity_and_swap() {
        let rho = DensityMatrix::from_pure(&bell());
        let id = WitnessOperator::identity(vec![2, 2]).unwrap();
        assert!((rho.witness_expectation(&id).unwrap() - 1.0).abs() < 1e-15);
        let plus = StateVector::new(vec![2], vec![c(0.6), c(0.8)]).unwrap();
        let other = StateVector::new(vec![2], vec![c(0.8), Complex::new(0.0, 0.6)]).unwrap();
        let prod = DensityMatrix::from_pure(&plus.tensor_product(&other).unwrap());
        let swap = WitnessOperator::swap(2).unwrap();
        assert!(prod.witness_expectation(&swap).unwrap() >= 0.0);
        let bad = WitnessOperator::identity(vec![4]).unwrap();
        assert!(matches!(rho.witness_expectation(&bad), Err(HilbertError::DimensionMismatch(_, _))));
    }

    #[test]
    fn projector_witness_detects_target() {
        let w = WitnessOperator::projector(&bell()).unwrap();
        let rho = DensityMatrix::from_pure(&bell());
        assert!((rho.witness_expectation(&w).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn validate_flags_bad_matrices() {
        let rho = DensityMatrix::new(vec![2], vec![c(0.5), c(0.0), c(0.0), c(0.6)]).unwrap();
        assert!(matches!(rho.validate(), Err(HilbertError::BadTrace(_))));
        let rho = DensityMatrix::new(vec![2], vec![c(1.5), c(0.0), c(0.0), c(-0.5)]).unwrap();
        assert!(matches!(rho.validate(), Err(HilbertError::NotPositive(_))));
        let rho = DensityMatrix::new(vec![2], vec![c(0.5), c(0.1), c(0.0), c(0.5)]).unwrap();
        assert!(matches!(rho.validate(), Err(HilbertError::NotHermitian(_))));
        DensityMatrix::from_pure(&bell()).validate().unwrap();
    }

    #[test]
    fn json_document_round_trip() {
        let doc = bell().to_document();
        let text = doc.to_json();
        assert!(text.contains("\"dims\":[2,2]"));
        let back = StateVector::<f64>::from_document(&MatrixDocument::from_json(&text).unwrap()).unwrap();
        assert_eq!(back, bell());
    }

    #[test]
    fn normalize_zero_state_fails() {
        let mut z = StateVector::new(vec![2], vec![c(0.0), c(0.0)]).unwrap();
        assert_eq!(z.normalize().unwrap_err(), HilbertError::ZeroNorm);
    }
}
