//! Adaptive Dormand-Prince 5(4) integrator for real first-order systems.

use crate::Real;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    /// Initial step; zero means "pick from the interval length".
    pub first_step: T,
    pub max_steps: usize,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        Self { rel_tol: T::lit(1e-12), abs_tol: T::lit(1e-14), first_step: T::zero(), max_steps: 5_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t:e}")]
    StepUnderflow { t: f64 },
    #[error("exceeded {0} steps")]
    TooManySteps(usize),
    #[error("non-finite state at t = {t:e}")]
    NonFinite { t: f64 },
}

/// Accepted steps of an integration: times and states.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub rejected: usize,
}

// Dormand-Prince coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `y' = rhs(t, y)` from `t0` to `t1` (either direction).
///
/// `stops` are extra times the integrator must land on exactly; their
/// states appear in the returned trajectory.
pub fn integrate<T, F>(
    mut rhs: F,
    t0: T,
    y0: &[T],
    t1: T,
    stops: &[T],
    opts: &OdeOptions<T>,
) -> Result<Trajectory<T>, OdeError>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]),
{
    let n = y0.len();
    let dir = if t1 >= t0 { T::one() } else { -T::one() };
    let mut stops: Vec<T> =
        stops.iter().copied().filter(|&s| (s - t0) * dir > T::zero() && (t1 - s) * dir > T::zero()).collect();
    stops.sort_by(|a, b| ((*a - *b) * dir).partial_cmp(&T::zero()).unwrap_or(std::cmp::Ordering::Equal));
    stops.push(t1);

    let span = (t1 - t0).abs();
    let mut h = if opts.first_step > T::zero() { opts.first_step } else { span * T::lit(1e-6) };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut traj = Trajectory { times: vec![t0], states: vec![y.clone()], rejected: 0 };

    let mut k = vec![vec![T::zero(); n]; 7];
    let mut tmp = vec![T::zero(); n];
    let mut y5 = vec![T::zero(); n];
    rhs(t, &y, &mut k[0]);

    let safety = T::lit(0.9);
    let min_factor = T::lit(0.2);
    let max_factor = T::lit(5.0);
    let fifth = T::lit(0.2);
    let mut steps = 0usize;

    for &target in &stops {
        while (target - t) * dir > T::zero() {
            if steps >= opts.max_steps {
                return Err(OdeError::TooManySteps(opts.max_steps));
            }
            let remaining = (target - t).abs();
            let mut step = h.min(remaining);
            let hits_target = step >= remaining;
            if hits_target {
                step = remaining;
            }
            let hs = step * dir;
            if step <= T::epsilon() * t.abs().max(span) {
                return Err(OdeError::StepUnderflow { t: t.to_f64_lossy() });
            }

            let stage = |tmp: &mut [T], y: &[T], k: &[Vec<T>], coeffs: &[(usize, f64)]| {
                for i in 0..n {
                    let mut acc = T::zero();
                    for &(j, c) in coeffs {
                        acc += T::lit(c) * k[j][i];
                    }
                    tmp[i] = y[i] + hs * acc;
                }
            };
            stage(&mut tmp, &y, &k, &[(0, A21)]);
            rhs(t + hs * T::lit(C2), &tmp, &mut k[1]);
            stage(&mut tmp, &y, &k, &[(0, A31), (1, A32)]);
            rhs(t + hs * T::lit(C3), &tmp, &mut k[2]);
            stage(&mut tmp, &y, &k, &[(0, A41), (1, A42), (2, A43)]);
            rhs(t + hs * T::lit(C4), &tmp, &mut k[3]);
            stage(&mut tmp, &y, &k, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
            rhs(t + hs * T::lit(C5), &tmp, &mut k[4]);
            stage(&mut tmp, &y, &k, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
            rhs(t + hs, &tmp, &mut k[5]);
            stage(&mut y5, &y, &k, &[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)]);
            let t_new = if hits_target { target } else { t + hs };
            rhs(t_new, &y5, &mut k[6]);

            let mut err_norm = T::zero();
            for i in 0..n {
                let e = hs
                    * (T::lit(E1) * k[0][i]
                        + T::lit(E3) * k[2][i]
                        + T::lit(E4) * k[3][i]
                        + T::lit(E5) * k[4][i]
                        + T::lit(E6) * k[5][i]
                        + T::lit(E7) * k[6][i]);
                let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y5[i].abs());
                let r = e / sc;
                err_norm += r * r;
            }
            err_norm = (err_norm / T::from_usize_lossy(n.max(1))).sqrt();
            steps += 1;

            if !err_norm.is_finite() {
                if y5.iter().any(|v| !v.is_finite()) && step <= T::epsilon() * span {
                    return Err(OdeError::NonFinite { t: t.to_f64_lossy() });
                }
                h = step * min_factor;
                traj.rejected += 1;
                continue;
            }
            if err_norm <= T::one() {
                t = t_new;
                y.copy_from_slice(&y5);
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                traj.times.push(t);
                traj.states.push(y.clone());
                let factor = if err_norm == T::zero() {
                    max_factor
                } else {
                    (safety * err_norm.powf(-fifth)).min(max_factor).max(min_factor)
                };
                // Landing on a stop shortens the step; do not let that shrink h.
                if !hits_target {
                    h = step * factor;
                } else {
                    h = h.max(step * factor);
                }
            } else {
                traj.rejected += 1;
                let factor = (safety * err_norm.powf(-fifth)).max(min_factor);
                h = step * factor;
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_energy() {
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let tr = integrate(rhs, 0.0, &[1.0, 0.0], 20.0, &[], &OdeOptions::default()).unwrap();
        let last = tr.states.last().unwrap();
        assert!((last[0] - 20.0f64.cos()).abs() < 1e-10);
        assert!((last[1] + 20.0f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn lands_on_stops_and_runs_backwards() {
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0];
        let tr = integrate(rhs, 0.0, &[1.0], -2.0, &[-1.0], &OdeOptions::default()).unwrap();
        let i = tr.times.iter().position(|&t| t == -1.0).expect("stop visited");
        assert!((tr.states[i][0] - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(*tr.times.last().unwrap(), -2.0);
    }
}
