//! Quadrature rules: Gauss-Legendre nodes and adaptive Gauss-Kronrod (7/15).

use crate::Real;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, refined by Newton in f64 then cast.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = T::lit(-x);
        nodes[n - 1 - i] = T::lit(x);
        weights[i] = T::lit(w);
        weights[n - 1 - i] = T::lit(w);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// One 15-point Kronrod evaluation: returns (kronrod estimate, |K - G| error).
fn gk15<T: Real, E, F: FnMut(T) -> Result<T, E>>(f: &mut F, a: T, b: T) -> Result<(T, T), E> {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let radius = half * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = radius * T::lit(XGK[j]);
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        kronrod += T::lit(WGK[j]) * (f1 + f2);
        if j % 2 == 1 {
            gauss += T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    Ok((kronrod * radius, ((kronrod - gauss) * radius).abs()))
}

/// Settings for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_depth: usize,
}

impl<T: Real> Default for QuadOptions<T> {
    fn default() -> Self {
        Self { rel_tol: T::lit(1e-12), abs_tol: T::zero(), max_depth: 40 }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]` with interior
/// `breakpoints` (sorted or not; points outside `(a, b)` are ignored).
///
/// Recursion is depth-first with a fixed left-then-right order, so the
/// result is a deterministic function of the integrand values.
pub fn integrate<T, E, F>(mut f: F, a: T, b: T, breakpoints: &[T], opts: &QuadOptions<T>) -> Result<QuadResult<T>, E>
where
    T: Real,
    F: FnMut(T) -> Result<T, E>,
{
    let mut cuts: Vec<T> = breakpoints.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);

    // Coarse pass fixes the global scale for the relative tolerance.
    let mut coarse = Vec::with_capacity(edges.len() - 1);
    let mut evaluations = 0;
    let mut scale = T::zero();
    for w in edges.windows(2) {
        let (k, e) = gk15(&mut f, w[0], w[1])?;
        evaluations += 15;
        scale += k.abs();
        coarse.push((w[0], w[1], k, e));
    }
    let target = opts.abs_tol.max(opts.rel_tol * scale);
    let n_pieces = T::from_usize_lossy(coarse.len().max(1));
    let mut value = T::zero();
    let mut error = T::zero();
    for (lo, hi, k, e) in coarse {
        let (v, err) = refine(&mut f, lo, hi, k, e, target / n_pieces, opts.max_depth, &mut evaluations)?;
        value += v;
        error += err;
    }
    Ok(QuadResult { value, error, evaluations })
}

#[allow(clippy::too_many_arguments)]
fn refine<T, E, F>(
    f: &mut F,
    a: T,
    b: T,
    estimate: T,
    err: T,
    tol: T,
    depth: usize,
    evaluations: &mut usize,
) -> Result<(T, T), E>
where
    T: Real,
    F: FnMut(T) -> Result<T, E>,
{
    if err <= tol || depth == 0 {
        return Ok((estimate, err));
    }
    let mid = T::lit(0.5) * (a + b);
    if !(mid > a && mid < b) {
        return Ok((estimate, err));
    }
    let (kl, el) = gk15(f, a, mid)?;
    let (kr, er) = gk15(f, mid, b)?;
    *evaluations += 30;
    let half_tol = tol * T::lit(0.5);
    let (vl, errl) = refine(f, a, mid, kl, el, half_tol, depth - 1, evaluations)?;
    let (vr, errr) = refine(f, mid, b, kr, er, half_tol, depth - 1, evaluations)?;
    Ok((vl + vr, errl + errr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre::<f64>(5);
        // exact up to degree 9: int_{-1}^{1} x^8 = 2/9
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-15);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_high_order_nodes_symmetric() {
        let (x, w) = gauss_legendre::<f64>(64);
        for i in 0..32 {
            assert_eq!(x[i], -x[63 - i]);
            assert_eq!(w[i], w[63 - i]);
        }
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * (3.0 * x).cos()).sum();
        assert!((s - 2.0 * 3.0f64.sin() / 3.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_kink_with_breakpoint() {
        let f = |x: f64| Ok::<_, Infallible>((x - 0.3).abs());
        let exact = 0.5 * 0.3 * 0.3 + 0.5 * 0.7 * 0.7;
        let r = integrate(f, 0.0, 1.0, &[0.3], &QuadOptions::default()).unwrap();
        assert!((r.value - exact).abs() < 1e-15);
        let r2 = integrate(f, 0.0, 1.0, &[], &QuadOptions::default()).unwrap();
        assert!((r2.value - exact).abs() < 1e-11);
    }

    #[test]
    fn adaptive_reaches_relative_tolerance() {
        let f = |x: f64| Ok::<_, Infallible>(1.0 / (1.0 + 25.0 * x * x));
        let exact = 2.0 * (5.0f64).atan() / 5.0;
        let r = integrate(f, -1.0, 1.0, &[], &QuadOptions::default()).unwrap();
        assert!(((r.value - exact) / exact).abs() < 1e-12);
    }
}
