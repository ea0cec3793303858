//! Circle diffeomorphisms stored as sampled monotone lifts.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Default number of lift samples.
pub const DEFAULT_GRID: usize = 1024;

/// Smallest admissible gap between consecutive lift samples, in units of
/// the grid spacing.
pub const MIN_SLOPE: f64 = 1e-6;

/// Lift-level access to an orientation-preserving circle map.
pub trait CircleMap {
    /// Value of the lift at the real point `t`.
    fn lift(&self, t: f64) -> f64;
    /// Derivative at `t`.
    fn deriv(&self, t: f64) -> f64;
    /// Lift of the inverse map.
    fn inv_lift(&self, v: f64) -> f64;

    fn lift_with_deriv(&self, t: f64) -> (f64, f64) {
        (self.lift(t), self.deriv(t))
    }

    /// Value on the circle, in `[0, 1)`.
    fn eval(&self, y: f64) -> f64 {
        crate::fiber::circ(self.lift(y))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleDiffeo {
    lift: Arc<[f64]>,
    deriv: Arc<[f64]>,
}

impl CircleDiffeo {
    /// Builds from raw samples `ℓ(i/G)` and `ℓ'(i/G)`; the lift is repaired
    /// to be strictly increasing and normalized to `ℓ(0) ∈ [0, 1)`.
    pub fn from_samples(lift: Vec<f64>, deriv: Vec<f64>) -> Result<Self> {
        let (g, repairs) = Self::from_samples_counting(lift, deriv)?;
        if repairs > g.grid_size() / 8 {
            return Err(LabError::MonotoneRepair(format!(
                "{repairs} of {} samples repaired",
                g.grid_size()
            )));
        }
        Ok(g)
    }

    /// Same as [`CircleDiffeo::from_samples`] but reports the number of
    /// repaired samples instead of failing.
    pub fn from_samples_counting(mut lift: Vec<f64>, mut deriv: Vec<f64>) -> Result<(Self, usize)> {
        let g = lift.len();
        if g < 2 || !g.is_power_of_two() || deriv.len() != g {
            return Err(LabError::Invalid(format!(
                "grid size {g} must be a power of two ≥ 2 with matching derivative samples"
            )));
        }
        if lift.iter().chain(deriv.iter()).any(|v| !v.is_finite()) {
            return Err(LabError::Invalid("non-finite lift sample".into()));
        }
        let shift = lift[0].floor();
        for v in lift.iter_mut() {
            *v -= shift;
        }
        let repairs = repair_monotone(&mut lift);
        for d in deriv.iter_mut() {
            if !(*d > 0.0) {
                *d = MIN_SLOPE;
            }
        }
        Ok((
            Self {
                lift: lift.into(),
                deriv: deriv.into(),
            },
            repairs,
        ))
    }

    pub fn from_fn<F, D>(grid: usize, f: F, df: D) -> Result<Self>
    where
        F: Fn(f64) -> f64,
        D: Fn(f64) -> f64,
    {
        let h = 1.0 / grid as f64;
        let lift = (0..grid).map(|i| f(i as f64 * h)).collect();
        let deriv = (0..grid).map(|i| df(i as f64 * h)).collect();
        Self::from_samples(lift, deriv)
    }

    /// Samples an arbitrary circle map on a grid of size `grid`.
    pub fn sample<M: CircleMap + ?Sized>(map: &M, grid: usize) -> Result<Self> {
        let h = 1.0 / grid as f64;
        let mut lift = Vec::with_capacity(grid);
        let mut deriv = Vec::with_capacity(grid);
        for i in 0..grid {
            let (l, d) = map.lift_with_deriv(i as f64 * h);
            lift.push(l);
            deriv.push(d);
        }
        Self::from_samples(lift, deriv)
    }

    pub fn identity(grid: usize) -> Self {
        Self::from_fn(grid, |t| t, |_| 1.0).expect("identity is a diffeomorphism")
    }

    pub fn rotation(grid: usize, tau: f64) -> Self {
        Self::from_fn(grid, |t| t + tau, |_| 1.0).expect("rotations are diffeomorphisms")
    }

    pub fn grid_size(&self) -> usize {
        self.lift.len()
    }

    pub fn lift_samples(&self) -> &[f64] {
        &self.lift
    }

    pub fn derivative_samples(&self) -> &[f64] {
        &self.deriv
    }

    /// Sample `i` of the lift, extended by `ℓ(i + G) = ℓ(i) + 1`.
    #[inline]
    fn node(&self, i: i64) -> f64 {
        let g = self.lift.len() as i64;
        let q = i.div_euclid(g);
        self.lift[i.rem_euclid(g) as usize] + q as f64
    }

    /// `g ∘ h`, resampled on the grid of `h`.
    pub fn compose(&self, h: &CircleDiffeo) -> Result<Self> {
        let gs = h.grid_size();
        let mut lift = Vec::with_capacity(gs);
        let mut deriv = Vec::with_capacity(gs);
        for i in 0..gs {
            let hv = h.lift[i];
            let (gv, gd) = self.lift_with_deriv(hv);
            lift.push(gv);
            deriv.push(gd * h.deriv[i]);
        }
        Self::from_samples(lift, deriv)
    }

    pub fn invert(&self) -> Self {
        let gs = self.grid_size();
        let h = 1.0 / gs as f64;
        let mut lift = Vec::with_capacity(gs);
        let mut deriv = Vec::with_capacity(gs);
        for i in 0..gs {
            let t = self.inv_lift(i as f64 * h);
            lift.push(t);
            deriv.push(1.0 / self.deriv(t));
        }
        Self::from_samples(lift, deriv).expect("inverse of a monotone lift is monotone")
    }

    /// `sup_y d(g(y), h(y))` on the circle, evaluated on the finer grid.
    pub fn c0_distance(&self, other: &CircleDiffeo) -> f64 {
        c0_distance(self, other, self.grid_size().max(other.grid_size()))
    }

    /// `C⁰` distance plus `sup |g′ − h′|`.
    pub fn c1_distance(&self, other: &CircleDiffeo) -> f64 {
        c1_distance(self, other, self.grid_size().max(other.grid_size()))
    }
}

impl CircleMap for CircleDiffeo {
    #[inline]
    fn lift(&self, t: f64) -> f64 {
        let g = self.lift.len() as f64;
        let s = t * g;
        let i = s.floor();
        let w = s - i;
        let i = i as i64;
        let a = self.node(i);
        let b = self.node(i + 1);
        a + w * (b - a)
    }

    #[inline]
    fn deriv(&self, t: f64) -> f64 {
        let g = self.deriv.len();
        let s = t * g as f64;
        let i = s.floor();
        let w = s - i;
        let i = (i as i64).rem_euclid(g as i64) as usize;
        let j = (i + 1) % g;
        self.deriv[i] + w * (self.deriv[j] - self.deriv[i])
    }

    fn inv_lift(&self, v: f64) -> f64 {
        let g = self.lift.len();
        let base = self.lift[0];
        let n = (v - base).floor();
        let w = v - n;
        // largest i in 0..g with node(i) ≤ w; node(g) = base + 1 > w
        let (mut lo, mut hi) = (0usize, g);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.lift[mid] <= w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a = self.lift[lo];
        let b = self.node(lo as i64 + 1);
        let frac = if b > a {
            ((w - a) / (b - a)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (lo as f64 + frac) / g as f64 + n
    }
}

/// Forces strictly increasing samples with `ℓ(G) = ℓ(0) + 1`, returning the
/// number of modified samples.
fn repair_monotone(lift: &mut [f64]) -> usize {
    let g = lift.len();
    let gap = MIN_SLOPE / g as f64;
    let mut repairs = 0;
    for i in 1..g {
        if lift[i] < lift[i - 1] + gap {
            lift[i] = lift[i - 1] + gap;
            repairs += 1;
        }
    }
    let top = lift[0] + 1.0;
    if lift[g - 1] > top - gap {
        // squeeze the tail back below ℓ(0) + 1
        let mut i = g - 1;
        let mut ceiling = top - gap;
        loop {
            if lift[i] <= ceiling {
                break;
            }
            lift[i] = ceiling;
            repairs += 1;
            ceiling -= gap;
            if i == 1 {
                break;
            }
            i -= 1;
        }
    }
    repairs
}

/// Circular distance of two reals.
#[inline]
pub fn circ_dist(a: f64, b: f64) -> f64 {
    let d = a - b;
    (d - d.round()).abs()
}

/// `sup` over `grid` nodes of the circular distance between two maps.
pub fn c0_distance<A: CircleMap + ?Sized, B: CircleMap + ?Sized>(a: &A, b: &B, grid: usize) -> f64 {
    let h = 1.0 / grid as f64;
    (0..grid)
        .map(|i| {
            let t = i as f64 * h;
            circ_dist(a.lift(t), b.lift(t))
        })
        .fold(0.0, f64::max)
}

pub fn c1_distance<A: CircleMap + ?Sized, B: CircleMap + ?Sized>(a: &A, b: &B, grid: usize) -> f64 {
    let h = 1.0 / grid as f64;
    let d1 = (0..grid)
        .map(|i| {
            let t = i as f64 * h;
            (a.deriv(t) - b.deriv(t)).abs()
        })
        .fold(0.0, f64::max);
    c0_distance(a, b, grid) + d1
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn bump(a: f64) -> CircleDiffeo {
        CircleDiffeo::from_fn(
            DEFAULT_GRID,
            |t| t + a / TAU * (TAU * t).sin(),
            |t| 1.0 + a * (TAU * t).cos(),
        )
        .unwrap()
    }

    #[test]
    fn identity_and_rotation() {
        let id = CircleDiffeo::identity(DEFAULT_GRID);
        assert!((id.eval(0.3) - 0.3).abs() < 1e-15);
        let r = CircleDiffeo::rotation(DEFAULT_GRID, 0.25);
        assert!((r.eval(0.9) - 0.15).abs() < 1e-12);
        let inv = r.invert();
        assert!(inv.c0_distance(&CircleDiffeo::rotation(DEFAULT_GRID, 0.75)) < 1e-12);
        let r2 = CircleDiffeo::rotation(DEFAULT_GRID, 0.2)
            .compose(&CircleDiffeo::rotation(DEFAULT_GRID, 0.3))
            .unwrap();
        assert!(r2.c0_distance(&CircleDiffeo::rotation(DEFAULT_GRID, 0.5)) < 1e-12);
    }

    #[test]
    fn bump_values() {
        let g = bump(0.5);
        // 0.25 is a grid node
        assert!((g.eval(0.25) - (0.25 + 0.5 / TAU)).abs() < 1e-12);
        let gg = g.compose(&g).unwrap();
        assert!(gg.eval(0.0).abs() < 1e-15);
        assert!((gg.deriv(0.0) - 2.25).abs() < 1e-12);
        let inv = g.invert();
        assert!((inv.deriv(0.0) - 1.0 / 1.5).abs() < 1e-12);
        let e = g.compose(&inv).unwrap();
        assert!(e.c0_distance(&CircleDiffeo::identity(DEFAULT_GRID)) < 1e-6);
    }

    #[test]
    fn lift_equivariance() {
        let g = bump(0.3);
        for &t in &[0.1, 0.37, 0.999] {
            assert!((g.lift(t + 1.0) - g.lift(t) - 1.0).abs() < 1e-12);
            assert!((g.lift(t - 3.0) - g.lift(t) + 3.0).abs() < 1e-12);
            let v = g.lift(t + 2.0);
            assert!((g.inv_lift(v) - t - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(CircleDiffeo::from_samples(vec![0.0; 3], vec![1.0; 3]).is_err());
    }

    #[test]
    fn repair_counts_collapsed_samples() {
        let mut lift: Vec<f64> = (0..16).map(|i| i as f64 / 16.0).collect();
        lift[5] = lift[4];
        lift[6] = lift[4];
        let (g, repairs) = CircleDiffeo::from_samples_counting(lift, vec![1.0; 16]).unwrap();
        assert_eq!(repairs, 2);
        assert!(g.lift_samples().windows(2).all(|w| w[1] > w[0]));
    }
}
