//! Fiber groups: circle diffeomorphisms (sampled or closed-form) and
//! invertible real matrices.

pub mod circle;
pub mod matrix;

use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use circle::{c0_distance, c1_distance, circ_dist, CircleDiffeo, CircleMap, DEFAULT_GRID};
pub use matrix::MatrixElement;

/// Reduction to `[0, 1)`.
#[inline]
pub fn circ(t: f64) -> f64 {
    let r = t - t.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A circle diffeomorphism evaluated exactly from its description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FiberMap {
    Identity,
    Rotation(f64),
    /// `t ↦ t + shift + amp/(2π)·sin(2π(t − phase))`, a diffeomorphism for
    /// `|amp| < 1`.
    Bump {
        shift: f64,
        amp: f64,
        phase: f64,
    },
    Sampled(Arc<CircleDiffeo>),
    Inverse(Box<FiberMap>),
    /// Maps applied left to right: `Chain([a, b])` is `b ∘ a`.
    Chain(Vec<FiberMap>),
}

impl FiberMap {
    pub fn bump(amp: f64) -> Self {
        FiberMap::Bump {
            shift: 0.0,
            amp,
            phase: 0.0,
        }
    }

    pub fn inverse(self) -> Self {
        match self {
            FiberMap::Identity => FiberMap::Identity,
            FiberMap::Rotation(t) => FiberMap::Rotation(-t),
            FiberMap::Inverse(inner) => *inner,
            FiberMap::Chain(v) => {
                FiberMap::Chain(v.into_iter().rev().map(FiberMap::inverse).collect())
            }
            other => FiberMap::Inverse(Box::new(other)),
        }
    }

    /// `self` followed by `next`, i.e. `next ∘ self`.
    pub fn then(self, next: FiberMap) -> Self {
        match (self, next) {
            (FiberMap::Identity, n) => n,
            (s, FiberMap::Identity) => s,
            (FiberMap::Rotation(a), FiberMap::Rotation(b)) => FiberMap::Rotation(a + b),
            (FiberMap::Chain(mut v), FiberMap::Chain(w)) => {
                v.extend(w);
                FiberMap::Chain(v)
            }
            (FiberMap::Chain(mut v), n) => {
                v.push(n);
                FiberMap::Chain(v)
            }
            (s, FiberMap::Chain(mut w)) => {
                w.insert(0, s);
                FiberMap::Chain(w)
            }
            (s, n) => FiberMap::Chain(vec![s, n]),
        }
    }

    /// Lipschitz-type bound `sup |g′|`, used for Hölder constants.
    pub fn max_derivative(&self) -> f64 {
        match self {
            FiberMap::Identity | FiberMap::Rotation(_) => 1.0,
            FiberMap::Bump { amp, .. } => 1.0 + amp.abs(),
            FiberMap::Sampled(g) => g.derivative_samples().iter().cloned().fold(0.0, f64::max),
            FiberMap::Inverse(inner) => 1.0 / inner.min_derivative(),
            FiberMap::Chain(v) => v.iter().map(FiberMap::max_derivative).product(),
        }
    }

    pub fn min_derivative(&self) -> f64 {
        match self {
            FiberMap::Identity | FiberMap::Rotation(_) => 1.0,
            FiberMap::Bump { amp, .. } => 1.0 - amp.abs(),
            FiberMap::Sampled(g) => g
                .derivative_samples()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min),
            FiberMap::Inverse(inner) => 1.0 / inner.max_derivative(),
            FiberMap::Chain(v) => v.iter().map(FiberMap::min_derivative).product(),
        }
    }
}

fn bump_inverse(shift: f64, amp: f64, phase: f64, v: f64) -> f64 {
    // lift(t) − t ∈ [shift − |amp|/2π, shift + |amp|/2π]
    let r = amp.abs() / TAU;
    let mut lo = v - shift - r;
    let mut hi = v - shift + r;
    let mut t = v - shift;
    for _ in 0..100 {
        let s = TAU * (t - phase);
        let f = t + shift + amp / TAU * s.sin() - v;
        if f.abs() < 1e-15 {
            return t;
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let df = 1.0 + amp * s.cos();
        let next = t - f / df;
        t = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-16 {
            break;
        }
    }
    t
}

impl CircleMap for FiberMap {
    fn lift(&self, t: f64) -> f64 {
        match self {
            FiberMap::Identity => t,
            FiberMap::Rotation(tau) => t + tau,
            FiberMap::Bump { shift, amp, phase } => {
                t + shift + amp / TAU * (TAU * (t - phase)).sin()
            }
            FiberMap::Sampled(g) => g.lift(t),
            FiberMap::Inverse(inner) => inner.inv_lift(t),
            FiberMap::Chain(v) => v.iter().fold(t, |acc, g| g.lift(acc)),
        }
    }

    fn deriv(&self, t: f64) -> f64 {
        self.lift_with_deriv(t).1
    }

    fn lift_with_deriv(&self, t: f64) -> (f64, f64) {
        match self {
            FiberMap::Identity => (t, 1.0),
            FiberMap::Rotation(tau) => (t + tau, 1.0),
            FiberMap::Bump { shift, amp, phase } => {
                let s = TAU * (t - phase);
                (t + shift + amp / TAU * s.sin(), 1.0 + amp * s.cos())
            }
            FiberMap::Sampled(g) => g.lift_with_deriv(t),
            FiberMap::Inverse(inner) => {
                let u = inner.inv_lift(t);
                (u, 1.0 / inner.deriv(u))
            }
            FiberMap::Chain(v) => v.iter().fold((t, 1.0), |(acc, d), g| {
                let (l, dl) = g.lift_with_deriv(acc);
                (l, d * dl)
            }),
        }
    }

    fn inv_lift(&self, v: f64) -> f64 {
        match self {
            FiberMap::Identity => v,
            FiberMap::Rotation(tau) => v - tau,
            FiberMap::Bump { shift, amp, phase } => bump_inverse(*shift, *amp, *phase, v),
            FiberMap::Sampled(g) => g.inv_lift(v),
            FiberMap::Inverse(inner) => inner.lift(v),
            FiberMap::Chain(maps) => maps.iter().rev().fold(v, |acc, g| g.inv_lift(acc)),
        }
    }
}
