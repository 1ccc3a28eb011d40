//! Semiclassical branch phases for two particles on piecewise-linear
//! worldlines.
//!
//! A branch phase is `(1/ħ) ∫ V dt` with `V = coupling / r`, where `coupling`
//! is `−G m₁ m₂` for gravity or `q₁q₂/4πε₀` for electrostatics. The kernel
//! decides which separation enters:
//!
//! * instantaneous: `r = |x₁(t) − x₂(t)|`;
//! * retarded: Liénard-Wiechert form `coupling / (R (1 − n̂·v/c))` with the
//!   source taken at its retarded time, averaged over which particle is the
//!   source;
//! * symmetric: the half-retarded, half-advanced average (absorber form).
//!
//! Sign convention: with the branch phase defined as `+(1/ħ)∫V dt`,
//! [`entangling_phase`] on the static interferometer geometry equals
//! `φ₊ + φ₋` of [`crate::interferometer::branch_phases`]. The state phase
//! itself is `e^{−iφ}`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::quad::{self, QuadOptions};
use crate::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PathError {
    #[error("worldline {label} has no nodes")]
    Empty { label: String },
    #[error("worldline {label}: node times must strictly increase (node {index})")]
    NonIncreasing { label: String, index: usize },
    #[error("worldline {label}: segment {segment} has speed {speed:e} >= c")]
    Superluminal { label: String, segment: usize, speed: f64 },
    #[error("branch {branch}: {particle} endpoints differ from branch LL (closure violated)")]
    Closure { branch: String, particle: String },
    #[error("branch {branch}: worldlines meet at t = {t:e}")]
    Intersection { branch: String, t: f64 },
    #[error("retarded time for {label} at t = {t:e}: {reason}")]
    RetardedTime { label: String, t: f64, reason: String },
    #[error("invalid {field}: requires {condition}")]
    Invalid { field: &'static str, condition: &'static str },
    #[error("protocol file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Instantaneous,
    Retarded,
    /// Half-retarded, half-advanced. Not causal; kept for absorber experiments.
    Symmetric,
}

impl Kernel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "instantaneous" => Some(Self::Instantaneous),
            "retarded" => Some(Self::Retarded),
            "symmetric" => Some(Self::Symmetric),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Instantaneous => "instantaneous",
            Self::Retarded => "retarded",
            Self::Symmetric => "symmetric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node<T> {
    pub t: T,
    pub x: [T; 3],
}

/// Piecewise-linear trajectory, at rest before its first and after its last node.
#[derive(Debug, Clone, PartialEq)]
pub struct Worldline<T> {
    pub label: String,
    nodes: Vec<Node<T>>,
}

fn sub<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm<T: Real>(a: [T; 3]) -> T {
    dot(a, a).sqrt()
}

impl<T: Real> Worldline<T> {
    pub fn new(label: impl Into<String>, nodes: Vec<Node<T>>, c: T) -> Result<Self, PathError> {
        let label = label.into();
        if nodes.is_empty() {
            return Err(PathError::Empty { label });
        }
        for (i, w) in nodes.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(PathError::NonIncreasing { label, index: i + 1 });
            }
            let speed = norm(sub(w[1].x, w[0].x)) / (w[1].t - w[0].t);
            if !(speed < c) {
                return Err(PathError::Superluminal { label, segment: i, speed: speed.to_f64_lossy() });
            }
        }
        if nodes.iter().any(|n| !n.t.is_finite() || n.x.iter().any(|v| !v.is_finite())) {
            return Err(PathError::Invalid { field: "worldline", condition: "finite node coordinates" });
        }
        Ok(Self { label, nodes })
    }

    pub fn at_rest(label: impl Into<String>, x: [T; 3], t: T) -> Self {
        Self { label: label.into(), nodes: vec![Node { t, x }] }
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    /// Index of the segment `[t_i, t_{i+1}]` containing `t`, or `None` at rest.
    fn segment(&self, t: T) -> Option<usize> {
        let n = self.nodes.len();
        if n < 2 || t < self.nodes[0].t || t > self.nodes[n - 1].t {
            return None;
        }
        let i = self.nodes.partition_point(|node| node.t <= t);
        Some(i.saturating_sub(1).min(n - 2))
    }

    pub fn position(&self, t: T) -> [T; 3] {
        match self.segment(t) {
            None if t < self.nodes[0].t => self.nodes[0].x,
            None => self.nodes[self.nodes.len() - 1].x,
            Some(i) => {
                let (a, b) = (self.nodes[i], self.nodes[i + 1]);
                let f = (t - a.t) / (b.t - a.t);
                [0, 1, 2].map(|k| a.x[k] + (b.x[k] - a.x[k]) * f)
            }
        }
    }

    fn segment_velocity(&self, i: usize) -> [T; 3] {
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let dt = b.t - a.t;
        [0, 1, 2].map(|k| (b.x[k] - a.x[k]) / dt)
    }

    pub fn velocity(&self, t: T) -> [T; 3] {
        self.segment(t).map_or([T::zero(); 3], |i| self.segment_velocity(i))
    }

    pub fn max_speed(&self) -> T {
        (0..self.nodes.len().saturating_sub(1)).map(|i| norm(self.segment_velocity(i))).fold(T::zero(), T::max)
    }

    /// Node times where the velocity actually changes.
    pub fn kinks(&self) -> Vec<T> {
        let n = self.nodes.len();
        let zero = [T::zero(); 3];
        let vel = |i: isize| {
            if i < 0 || i as usize >= n - 1 {
                zero
            } else {
                self.segment_velocity(i as usize)
            }
        };
        (0..n).filter(|&i| vel(i as isize - 1) != vel(i as isize)).map(|i| self.nodes[i].t).collect()
    }

    pub fn shifted(&self, dt: T) -> Self {
        let nodes = self.nodes.iter().map(|n| Node { t: n.t + dt, x: n.x }).collect();
        Self { label: self.label.clone(), nodes }
    }

    /// Time-reversed copy: `x'(t) = x(−t)`.
    fn reversed(&self) -> Self {
        let nodes = self.nodes.iter().rev().map(|n| Node { t: -n.t, x: n.x }).collect();
        Self { label: self.label.clone(), nodes }
    }

    /// Retarded time `u ≤ t` with `c (t − u) = |xo − x(u)|`.
    ///
    /// `g(u) = c(t − u) − |xo − x(u)|` is strictly decreasing for subluminal
    /// motion, so the root is bracketed by a binary search over node times
    /// and then solved in closed form on the linear segment.
    pub fn retarded_time(&self, xo: [T; 3], t: T, c: T) -> Result<T, PathError> {
        let g = |u: T| c * (t - u) - norm(sub(xo, self.position(u)));
        let first = self.nodes[0];
        let last = self.nodes[self.nodes.len() - 1];
        let rest = |x: [T; 3]| t - norm(sub(xo, x)) / c;
        let u = if first.t >= t || g(first.t) < T::zero() {
            rest(first.x)
        } else {
            // Last node index k with t_k <= t and g(t_k) >= 0.
            let upto = self.nodes.partition_point(|n| n.t <= t);
            let k = self.nodes[..upto].partition_point(|n| g(n.t) >= T::zero()) - 1;
            if k + 1 == self.nodes.len() {
                rest(last.x)
            } else {
                let a = self.nodes[k];
                let v = self.segment_velocity(k);
                let span = (self.nodes[k + 1].t - a.t).min(t - a.t);
                let dt = t - a.t;
                let r0 = sub(xo, a.x);
                let qa = c * c - dot(v, v);
                let qb = c * c * dt - dot(r0, v);
                let qc = (c * dt) * (c * dt) - dot(r0, r0);
                let disc = (qb * qb - qa * qc).max(T::zero()).sqrt();
                let den = qb + disc;
                let w = if den > T::zero() { qc.max(T::zero()) / den } else { T::zero() };
                a.t + w.max(T::zero()).min(span)
            }
        };
        if !u.is_finite() {
            return Err(PathError::RetardedTime {
                label: self.label.clone(),
                t: t.to_f64_lossy(),
                reason: "non-finite solution".into(),
            });
        }
        Ok(u)
    }

    /// Observer times `t ≥ τ` at which this worldline crosses the future
    /// light cone of each kink `(τ, x_src(τ))` of `source`.
    fn cone_crossings(&self, source: &Self, c: T) -> Vec<T> {
        source
            .kinks()
            .into_iter()
            .map(|tau| {
                let s = source.position(tau);
                let h = |t: T| c * (t - tau) - norm(sub(self.position(t), s));
                let mut step = (norm(sub(self.position(tau), s)) / c).max(T::min_positive_value());
                while h(tau + step) < T::zero() {
                    step = step + step;
                }
                let (mut lo, mut hi) = (tau, tau + step);
                for _ in 0..200 {
                    let mid = T::lit(0.5) * (lo + hi);
                    if !(mid > lo && mid < hi) {
                        break;
                    }
                    if h(mid) < T::zero() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            })
            .collect()
    }
}

/// The two worldlines of one interferometer branch.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldlinePair<T> {
    pub particle1: Worldline<T>,
    pub particle2: Worldline<T>,
}

pub const BRANCH_LABELS: [&str; 4] = ["LL", "LR", "RL", "RR"];

#[derive(Debug, Clone, PartialEq)]
pub struct BranchProtocol<T> {
    pub coupling: T,
    pub hbar: T,
    pub c: T,
    pub t0: T,
    pub t1: T,
    /// Ordered as [`BRANCH_LABELS`].
    pub branches: [WorldlinePair<T>; 4],
    /// Whether every particle starts and ends at the same place in all branches.
    pub closed: bool,
}

/// Relative tolerance for endpoint agreement in the closure check.
pub const CLOSURE_TOL: f64 = 1e-12;

impl<T: Real> BranchProtocol<T> {
    /// Builds a protocol and checks the closure invariant.
    pub fn new(coupling: T, hbar: T, c: T, t0: T, t1: T, branches: [WorldlinePair<T>; 4]) -> Result<Self, PathError> {
        let p = Self::open(coupling, hbar, c, t0, t1, branches)?;
        p.check_closure()?;
        Ok(Self { closed: true, ..p })
    }

    /// Builds a protocol without requiring closure (static geometries that
    /// model only the hold segment of the interferometer).
    pub fn open(coupling: T, hbar: T, c: T, t0: T, t1: T, branches: [WorldlinePair<T>; 4]) -> Result<Self, PathError> {
        if !(hbar > T::zero() && hbar.is_finite()) {
            return Err(PathError::Invalid { field: "hbar", condition: "hbar > 0" });
        }
        if !(c > T::zero() && c.is_finite()) {
            return Err(PathError::Invalid { field: "c", condition: "c > 0" });
        }
        if !(t1 > t0 && t0.is_finite() && t1.is_finite()) {
            return Err(PathError::Invalid { field: "t1", condition: "t1 > t0" });
        }
        if !coupling.is_finite() {
            return Err(PathError::Invalid { field: "coupling", condition: "finite coupling" });
        }
        for pair in &branches {
            for w in [&pair.particle1, &pair.particle2] {
                for (i, s) in w.nodes.windows(2).enumerate() {
                    if !(norm(sub(s[1].x, s[0].x)) / (s[1].t - s[0].t) < c) {
                        return Err(PathError::Superluminal {
                            label: w.label.clone(),
                            segment: i,
                            speed: (norm(sub(s[1].x, s[0].x)) / (s[1].t - s[0].t)).to_f64_lossy(),
                        });
                    }
                }
            }
        }
        Ok(Self { coupling, hbar, c, t0, t1, branches, closed: false })
    }

    fn check_closure(&self) -> Result<(), PathError> {
        let reference = &self.branches[0];
        for (b, pair) in self.branches.iter().enumerate().skip(1) {
            for (name, w, r) in [
                ("particle1", &pair.particle1, &reference.particle1),
                ("particle2", &pair.particle2, &reference.particle2),
            ] {
                for t in [self.t0, self.t1] {
                    let (x, y) = (w.position(t), r.position(t));
                    let scale = norm(y).max(norm(x)).max(T::one());
                    if norm(sub(x, y)) > T::lit(CLOSURE_TOL) * scale {
                        return Err(PathError::Closure { branch: BRANCH_LABELS[b].into(), particle: name.into() });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn max_speed(&self) -> T {
        self.branches.iter().flat_map(|p| [p.particle1.max_speed(), p.particle2.max_speed()]).fold(T::zero(), T::max)
    }

    pub fn shifted(&self, dt: T) -> Self {
        let branches = self
            .branches
            .clone()
            .map(|p| WorldlinePair { particle1: p.particle1.shifted(dt), particle2: p.particle2.shifted(dt) });
        Self { t0: self.t0 + dt, t1: self.t1 + dt, branches, ..self.clone() }
    }

    /// Same protocol restricted to the window `[t0, t1]`.
    pub fn with_window(&self, t0: T, t1: T) -> Self {
        Self { t0, t1, ..self.clone() }
    }
}

fn quad_options<T: Real>() -> QuadOptions<T> {
    QuadOptions { rel_tol: T::lit(1e-13), abs_tol: T::zero(), max_depth: 50 }
}

/// `(1/ħ) ∫ coupling/|x₁ − x₂| dt` over `[t0, t1]`.
pub fn instantaneous_phase<T: Real>(
    pair: &WorldlinePair<T>,
    coupling: T,
    hbar: T,
    t0: T,
    t1: T,
) -> Result<T, PathError> {
    let mut cuts = pair.particle1.kinks();
    cuts.extend(pair.particle2.kinks());
    let f = |t: T| {
        let r = norm(sub(pair.particle1.position(t), pair.particle2.position(t)));
        if r == T::zero() {
            return Err(PathError::Intersection { branch: pair.particle1.label.clone(), t: t.to_f64_lossy() });
        }
        Ok(coupling / r)
    };
    Ok(quad::integrate(f, t0, t1, &cuts, &quad_options())?.value / hbar)
}

/// Potential at `xo` (time `t`) sourced by `src` at its retarded time.
fn lienard_wiechert<T: Real>(src: &Worldline<T>, xo: [T; 3], t: T, coupling: T, c: T) -> Result<T, PathError> {
    let u = src.retarded_time(xo, t, c)?;
    let rv = sub(xo, src.position(u));
    let r = norm(rv);
    if r == T::zero() {
        return Err(PathError::Intersection { branch: src.label.clone(), t: t.to_f64_lossy() });
    }
    let kappa = T::one() - dot(rv, src.velocity(u)) / (r * c);
    Ok(coupling / (r * kappa))
}

/// Particle-symmetrized retarded integrand at time `t`.
fn retarded_integrand<T: Real>(w1: &Worldline<T>, w2: &Worldline<T>, t: T, coupling: T, c: T) -> Result<T, PathError> {
    let a = lienard_wiechert(w1, w2.position(t), t, coupling, c)?;
    let b = lienard_wiechert(w2, w1.position(t), t, coupling, c)?;
    Ok(T::lit(0.5) * (a + b))
}

fn retarded_cuts<T: Real>(w1: &Worldline<T>, w2: &Worldline<T>, c: T) -> Vec<T> {
    let mut cuts = w1.kinks();
    cuts.extend(w2.kinks());
    cuts.extend(w1.cone_crossings(w2, c));
    cuts.extend(w2.cone_crossings(w1, c));
    cuts
}

/// `(1/ħ) ∫ ½[V(x₂(t) ← x₁(t_ret)) + V(x₁(t) ← x₂(t_ret))] dt`.
pub fn retarded_phase<T: Real>(
    pair: &WorldlinePair<T>,
    coupling: T,
    hbar: T,
    c: T,
    t0: T,
    t1: T,
) -> Result<T, PathError> {
    let (w1, w2) = (&pair.particle1, &pair.particle2);
    let cuts = retarded_cuts(w1, w2, c);
    let f = |t: T| retarded_integrand(w1, w2, t, coupling, c);
    Ok(quad::integrate(f, t0, t1, &cuts, &quad_options())?.value / hbar)
}

/// Half-retarded, half-advanced phase. The advanced part is the retarded
/// computation on time-reversed worldlines.
pub fn symmetric_phase<T: Real>(
    pair: &WorldlinePair<T>,
    coupling: T,
    hbar: T,
    c: T,
    t0: T,
    t1: T,
) -> Result<T, PathError> {
    let (w1, w2) = (&pair.particle1, &pair.particle2);
    let (r1, r2) = (w1.reversed(), w2.reversed());
    let mut cuts = retarded_cuts(w1, w2, c);
    cuts.extend(retarded_cuts(&r1, &r2, c).into_iter().map(|t| -t));
    let f = |t: T| {
        let ret = retarded_integrand(w1, w2, t, coupling, c)?;
        let adv = retarded_integrand(&r1, &r2, -t, coupling, c)?;
        Ok(T::lit(0.5) * (ret + adv))
    };
    Ok(quad::integrate(f, t0, t1, &cuts, &quad_options())?.value / hbar)
}

pub fn branch_phase<T: Real>(protocol: &BranchProtocol<T>, branch: usize, kernel: Kernel) -> Result<T, PathError> {
    let p = protocol;
    let pair = &p.branches[branch];
    let tag = |e: PathError| match e {
        PathError::Intersection { t, .. } => PathError::Intersection { branch: BRANCH_LABELS[branch].into(), t },
        other => other,
    };
    match kernel {
        Kernel::Instantaneous => instantaneous_phase(pair, p.coupling, p.hbar, p.t0, p.t1),
        Kernel::Retarded => retarded_phase(pair, p.coupling, p.hbar, p.c, p.t0, p.t1),
        Kernel::Symmetric => symmetric_phase(pair, p.coupling, p.hbar, p.c, p.t0, p.t1),
    }
    .map_err(tag)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    pub kernel: Kernel,
    /// Keyed by branch label.
    pub branch_phases: BTreeMap<String, f64>,
    pub entangling_phase: f64,
}

/// All four branch phases, in [`BRANCH_LABELS`] order. Branches are
/// evaluated concurrently and collected in label order.
pub fn branch_phases<T: Real>(protocol: &BranchProtocol<T>, kernel: Kernel) -> Result<[T; 4], PathError> {
    let v: Vec<T> = (0..4).into_par_iter().map(|b| branch_phase(protocol, b, kernel)).collect::<Result<_, _>>()?;
    Ok([v[0], v[1], v[2], v[3]])
}

/// `φ_LL + φ_RR − φ_LR − φ_RL`.
pub fn entangling_phase<T: Real>(protocol: &BranchProtocol<T>, kernel: Kernel) -> Result<T, PathError> {
    let [ll, lr, rl, rr] = branch_phases(protocol, kernel)?;
    Ok((ll + rr) - (lr + rl))
}

pub fn phase_report<T: Real>(protocol: &BranchProtocol<T>, kernel: Kernel) -> Result<PhaseReport, PathError> {
    let phases = branch_phases(protocol, kernel)?;
    let [ll, lr, rl, rr] = phases;
    Ok(PhaseReport {
        kernel,
        branch_phases: BRANCH_LABELS.iter().zip(phases).map(|(l, p)| (l.to_string(), p.to_f64_lossy())).collect(),
        entangling_phase: ((ll + rr) - (lr + rl)).to_f64_lossy(),
    })
}

/// Direction along which each particle is put in superposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitAxis {
    /// Along the line joining the particles (branch distances d, d ± Δx).
    Separation,
    /// Perpendicular to it (branch distances d and √(d² + Δx²)).
    #[default]
    Transverse,
}

/// Static interferometer geometry: particle 1 at `∓Δx/2`, particle 2 at
/// `d ∓ Δx/2` on the x axis, held for `duration`. Branch distances are
/// LL = RR = d, LR = d + Δx, RL = d − Δx. Not closed.
pub fn static_gie<T: Real>(
    d: T,
    delta_x: T,
    duration: T,
    coupling: T,
    hbar: T,
    c: T,
) -> Result<BranchProtocol<T>, PathError> {
    if !(d > delta_x && delta_x > T::zero()) {
        return Err(PathError::Invalid { field: "d", condition: "d > delta_x > 0" });
    }
    let half = delta_x * T::lit(0.5);
    let at = |label: &str, x: T| Worldline::at_rest(label, [x, T::zero(), T::zero()], T::zero());
    let pair = |s1: T, s2: T| WorldlinePair {
        particle1: at("particle1", s1 * half),
        particle2: at("particle2", d + s2 * half),
    };
    let (m, p) = (-T::one(), T::one());
    BranchProtocol::open(coupling, hbar, c, T::zero(), duration, [pair(m, m), pair(m, p), pair(p, m), pair(p, p)])
}

/// Trapezoidal split-hold-merge protocol: at rest for `lead`, split
/// linearly over `split`, hold for `hold`, merge over `split`, rest for
/// `tail`. Particle 1 is centred at the origin, particle 2 at `(d, 0, 0)`;
/// branch L displaces by `−Δx/2` along the split axis, branch R by `+Δx/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitHoldMerge<T> {
    pub d: T,
    pub delta_x: T,
    pub axis: SplitAxis,
    pub lead: T,
    pub split: T,
    pub hold: T,
    pub tail: T,
}

impl<T: Real> SplitHoldMerge<T> {
    /// Protocol whose split and merge run at speed `v`.
    pub fn with_speed(d: T, delta_x: T, axis: SplitAxis, v: T, hold: T) -> Self {
        let split = delta_x * T::lit(0.5) / v;
        Self { d, delta_x, axis, lead: T::zero(), split, hold, tail: T::zero() }
    }

    /// Whole protocol completed within `fraction · d_min / c`, where `d_min`
    /// is the smallest separation reached, followed by a rest period long
    /// enough for every retarded signal to arrive.
    pub fn spacelike(d: T, delta_x: T, axis: SplitAxis, c: T, fraction: T) -> Self {
        let d_min = match axis {
            SplitAxis::Separation => d - delta_x,
            SplitAxis::Transverse => d,
        };
        let total = fraction * d_min / c;
        let split = total / T::lit(3.0);
        let far = d + delta_x;
        Self { d, delta_x, axis, lead: T::zero(), split, hold: split, tail: T::lit(4.0) * far / c }
    }

    pub fn duration(&self) -> T {
        self.lead + self.split + self.hold + self.split + self.tail
    }

    pub fn speed(&self) -> T {
        self.delta_x * T::lit(0.5) / self.split
    }

    /// Same path, every duration multiplied by `factor` (speed divided by it).
    pub fn dilated(&self, factor: T) -> Self {
        Self {
            lead: self.lead * factor,
            split: self.split * factor,
            hold: self.hold * factor,
            tail: self.tail * factor,
            ..*self
        }
    }

    pub fn protocol(&self, coupling: T, hbar: T, c: T) -> Result<BranchProtocol<T>, PathError> {
        if !(self.d > self.delta_x && self.delta_x > T::zero()) {
            return Err(PathError::Invalid { field: "d", condition: "d > delta_x > 0" });
        }
        if !(self.split > T::zero() && self.hold >= T::zero() && self.lead >= T::zero() && self.tail >= T::zero()) {
            return Err(PathError::Invalid {
                field: "split",
                condition: "split > 0 and non-negative hold, lead, tail",
            });
        }
        let dir = match self.axis {
            SplitAxis::Separation => [T::one(), T::zero(), T::zero()],
            SplitAxis::Transverse => [T::zero(), T::one(), T::zero()],
        };
        let half = self.delta_x * T::lit(0.5);
        let mut times = Vec::new();
        let mut shape = Vec::new();
        let mut t = T::zero();
        let mut push = |t: T, s: T| {
            times.push(t);
            shape.push(s);
        };
        push(t, T::zero());
        if self.lead > T::zero() {
            t += self.lead;
            push(t, T::zero());
        }
        t += self.split;
        push(t, T::one());
        if self.hold > T::zero() {
            t += self.hold;
            push(t, T::one());
        }
        t += self.split;
        push(t, T::zero());
        let end = t + self.tail;
        let line = |label: &str, home: [T; 3], sign: T| {
            let nodes = times
                .iter()
                .zip(&shape)
                .map(|(&t, &s)| Node { t, x: [0, 1, 2].map(|k| home[k] + dir[k] * sign * half * s) })
                .collect();
            Worldline::new(label, nodes, c)
        };
        let home2 = [self.d, T::zero(), T::zero()];
        let origin = [T::zero(); 3];
        let pair = |s1: T, s2: T| -> Result<WorldlinePair<T>, PathError> {
            Ok(WorldlinePair { particle1: line("particle1", origin, s1)?, particle2: line("particle2", home2, s2)? })
        };
        let (m, p) = (-T::one(), T::one());
        BranchProtocol::new(coupling, hbar, c, T::zero(), end, [pair(m, m)?, pair(m, p)?, pair(p, m)?, pair(p, p)?])
    }
}

/// Relative kernel disagreement `|φ_ret − φ_inst| / |φ_inst|` of the
/// entangling phase for the protocol dilated by each factor, with the
/// corresponding `v/c`.
pub fn kernel_deviation_scan<T: Real>(
    base: &SplitHoldMerge<T>,
    factors: &[T],
    coupling: T,
    hbar: T,
    c: T,
) -> Result<Vec<(T, T)>, PathError> {
    factors
        .iter()
        .map(|&f| {
            let shm = base.dilated(f);
            let p = shm.protocol(coupling, hbar, c)?;
            let inst = entangling_phase(&p, Kernel::Instantaneous)?;
            let ret = entangling_phase(&p, Kernel::Retarded)?;
            Ok((shm.speed() / c, ((ret - inst) / inst).abs()))
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope<T: Real>(points: &[(T, T)]) -> Option<T> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > T::zero() && y > T::zero())) {
        return None;
    }
    let n = T::from_usize_lossy(points.len());
    let (sx, sy) = points.iter().fold((T::zero(), T::zero()), |(a, b), &(x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy) = (T::zero(), T::zero());
    for &(x, y) in points {
        let dx = x.ln() - mx;
        sxx += dx * dx;
        sxy += dx * (y.ln() - my);
    }
    (sxx > T::zero()).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PairDocument {
    particle1: Vec<[f64; 4]>,
    particle2: Vec<[f64; 4]>,
}

/// On-disk protocol: node lists are `[t, x, y, z]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolDocument {
    pub coupling: f64,
    pub hbar: f64,
    pub c: f64,
    pub t0: f64,
    pub t1: f64,
    #[serde(default = "closed_default")]
    pub closed: bool,
    branches: BTreeMap<String, PairDocument>,
}

fn closed_default() -> bool {
    true
}

impl ProtocolDocument {
    pub fn from_protocol(p: &BranchProtocol<f64>) -> Self {
        let nodes = |w: &Worldline<f64>| w.nodes.iter().map(|n| [n.t, n.x[0], n.x[1], n.x[2]]).collect();
        let branches = BRANCH_LABELS
            .iter()
            .zip(&p.branches)
            .map(|(l, pair)| {
                (l.to_string(), PairDocument { particle1: nodes(&pair.particle1), particle2: nodes(&pair.particle2) })
            })
            .collect();
        Self { coupling: p.coupling, hbar: p.hbar, c: p.c, t0: p.t0, t1: p.t1, closed: p.closed, branches }
    }

    pub fn into_protocol(self) -> Result<BranchProtocol<f64>, PathError> {
        let mut pairs = Vec::with_capacity(4);
        for label in BRANCH_LABELS {
            let doc = self.branches.get(label).ok_or_else(|| PathError::Format(format!("missing branch {label}")))?;
            let line = |name: &str, raw: &[[f64; 4]]| {
                let nodes = raw.iter().map(|r| Node { t: r[0], x: [r[1], r[2], r[3]] }).collect();
                Worldline::new(format!("{label}.{name}"), nodes, self.c)
            };
            pairs.push(WorldlinePair {
                particle1: line("particle1", &doc.particle1)?,
                particle2: line("particle2", &doc.particle2)?,
            });
        }
        if let Some(extra) = self.branches.keys().find(|k| !BRANCH_LABELS.contains(&k.as_str())) {
            return Err(PathError::Format(format!("unknown branch {extra}")));
        }
        let branches: [WorldlinePair<f64>; 4] = pairs.try_into().expect("four branches");
        if self.closed {
            BranchProtocol::new(self.coupling, self.hbar, self.c, self.t0, self.t1, branches)
        } else {
            BranchProtocol::open(self.coupling, self.hbar, self.c, self.t0, self.t1, branches)
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PathError> {
        serde_json::from_str(text).map_err(|e| PathError::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("protocol serializes")
    }
}
