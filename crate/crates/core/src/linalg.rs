//! Small dense linear algebra on row-major complex matrices.
//!
//! Hilbert spaces in this crate stay below a few hundred dimensions, so a
//! cyclic Jacobi sweep is fast enough and keeps everything generic over
//! [`Real`].

use num_complex::Complex;

use crate::Real;

/// `C = A * B` for square row-major matrices of side `n`.
pub fn matmul<T: Real>(a: &[Complex<T>], b: &[Complex<T>], n: usize) -> Vec<Complex<T>> {
    let mut out = vec![Complex::new(T::zero(), T::zero()); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik.re == T::zero() && aik.im == T::zero() {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Conjugate transpose.
pub fn adjoint<T: Real>(a: &[Complex<T>], n: usize) -> Vec<Complex<T>> {
    let mut out = a.to_vec();
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = a[i * n + j].conj();
        }
    }
    out
}

/// Largest entrywise deviation from Hermiticity, `max |A_ij - conj(A_ji)|`.
pub fn hermiticity_defect<T: Real>(a: &[Complex<T>], n: usize) -> T {
    let mut worst = T::zero();
    for i in 0..n {
        for j in i..n {
            let d = (a[i * n + j] - a[j * n + i].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

/// Kronecker product of an `n×n` and an `m×m` matrix.
pub fn kron<T: Real>(a: &[Complex<T>], n: usize, b: &[Complex<T>], m: usize) -> Vec<Complex<T>> {
    let side = n * m;
    let mut out = vec![Complex::new(T::zero(), T::zero()); side * side];
    for i in 0..n {
        for j in 0..n {
            let aij = a[i * n + j];
            for k in 0..m {
                for l in 0..m {
                    out[(i * m + k) * side + (j * m + l)] = aij * b[k * m + l];
                }
            }
        }
    }
    out
}

/// Eigenvalues of a real symmetric matrix (row-major, side `n`), ascending.
pub fn symmetric_eigenvalues<T: Real>(a: &[T], n: usize) -> Vec<T> {
    let mut m = a.to_vec();
    let scale = m.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
    if scale == T::zero() {
        return vec![T::zero(); n];
    }
    let tiny = T::epsilon() * T::epsilon() * scale * scale;
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if off <= tiny {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    eig
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// Uses the real embedding `[[Re, -Im], [Im, Re]]`, whose spectrum is the
/// Hermitian spectrum with every eigenvalue doubled.
pub fn hermitian_eigenvalues<T: Real>(a: &[Complex<T>], n: usize) -> Vec<T> {
    let side = 2 * n;
    let mut emb = vec![T::zero(); side * side];
    for i in 0..n {
        for j in 0..n {
            // Average with the mirrored entry so tiny Hermiticity noise cannot
            // break the pairing of the embedded spectrum.
            let z = (a[i * n + j] + a[j * n + i].conj()) * T::lit(0.5);
            emb[i * side + j] = z.re;
            emb[(i + n) * side + (j + n)] = z.re;
            emb[i * side + (j + n)] = -z.im;
            emb[(i + n) * side + j] = z.im;
        }
    }
    let all = symmetric_eigenvalues(&emb, side);
    all.chunks(2).map(|pair| (pair[0] + pair[1]) * T::lit(0.5)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn pauli_y_spectrum() {
        let y = [c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)];
        let ev = hermitian_eigenvalues(&y, 2);
        assert!((ev[0] + 1.0).abs() < 1e-14);
        assert!((ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn symmetric_against_known_tridiagonal() {
        // Eigenvalues of the 2,-1 Laplacian stencil: 2 - 2 cos(k pi / (n+1)).
        let n = 6;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 2.0;
            if i + 1 < n {
                a[i * n + i + 1] = -1.0;
                a[(i + 1) * n + i] = -1.0;
            }
        }
        let ev = symmetric_eigenvalues(&a, n);
        for (k, e) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((e - exact).abs() < 1e-13, "{e} vs {exact}");
        }
    }

    #[test]
    fn trace_preserved_by_spectrum() {
        let a = [
            c(1.0, 0.0),
            c(0.2, 0.3),
            c(0.0, -0.1),
            c(0.2, -0.3),
            c(-0.5, 0.0),
            c(0.4, 0.0),
            c(0.0, 0.1),
            c(0.4, 0.0),
            c(2.0, 0.0),
        ];
        let ev = hermitian_eigenvalues(&a, 3);
        let tr: f64 = ev.iter().sum();
        assert!((tr - 2.5).abs() < 1e-13);
        assert!(hermiticity_defect(&a, 3) < 1e-15);
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let i2 = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let k = kron(&i2, 2, &i2, 2);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(k[i * 4 + j], c(expect, 0.0));
            }
        }
    }
}
