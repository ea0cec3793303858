//! Local stable and unstable sets: sampling and paired orbits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cat::wrap;
use super::{BasePoint, BaseSystem, Sft, SftPoint, TorusPoint};
use crate::error::{LabError, Result};

/// Transverse component tolerated when deciding torus leaf membership.
pub const LEAF_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Stable,
    Unstable,
}

impl Side {
    pub fn label(self) -> &'static str {
        match self {
            Side::Stable => "s",
            Side::Unstable => "u",
        }
    }

    /// Time direction in which the local set contracts.
    pub fn direction(self) -> i64 {
        match self {
            Side::Stable => 1,
            Side::Unstable => -1,
        }
    }
}

/// The orbits `f^{±k}x`, `f^{±k}z` of a pair with `z` in the local `side`
/// set of `x`, advanced in the contracting direction.
///
/// On the torus `z_k` is kept exactly on the leaf of `x_k` as
/// `x_k + c·μᵏ·e`, so the pair does not drift apart under the expansion of
/// rounding errors.
pub struct LeafPair<'a> {
    sys: &'a BaseSystem,
    side: Side,
    x: BasePoint,
    z: BasePoint,
    torus: Option<([f64; 2], f64, f64)>,
    k: usize,
}

impl<'a> LeafPair<'a> {
    pub fn new(sys: &'a BaseSystem, x: &BasePoint, z: &BasePoint, side: Side) -> Result<Self> {
        let eps0 = sys.hyp().eps0;
        let d = sys.distance(x, z);
        if d > eps0 {
            return Err(LabError::Precondition(format!(
                "d(x, z) = {d:.3e} exceeds ε₀ = {eps0:.3e}"
            )));
        }
        let torus = match (sys, x, z) {
            (BaseSystem::Cat(c), BasePoint::Torus(a), BasePoint::Torus(b)) => {
                let v = [
                    wrap(b.coords[0] - a.coords[0]),
                    wrap(b.coords[1] - a.coords[1]),
                ];
                let [cu, cs] = c.eigen_coords(v);
                let (along, across, e, mu) = match side {
                    Side::Stable => (cs, cu, c.e_s, c.mu_s),
                    Side::Unstable => (cu, cs, c.e_u, 1.0 / c.mu_u),
                };
                if across.abs() > LEAF_TOL {
                    return Err(LabError::Precondition(format!(
                        "z is off the local {} leaf by {across:.3e}",
                        side.label()
                    )));
                }
                Some((e, along, mu))
            }
            _ => None,
        };
        Ok(Self {
            sys,
            side,
            x: x.clone(),
            z: z.clone(),
            torus,
            k: 0,
        })
    }

    pub fn depth(&self) -> usize {
        self.k
    }

    pub fn x(&self) -> &BasePoint {
        &self.x
    }

    pub fn z(&self) -> &BasePoint {
        &self.z
    }

    /// One step in the contracting direction, checking proximity.
    pub fn advance(&mut self) -> Result<()> {
        let dir = self.side.direction();
        self.x = self.sys.step(&self.x, dir);
        self.k += 1;
        match &mut self.torus {
            Some((e, c, mu)) => {
                *c *= *mu;
                let p = self.x.torus().coords;
                self.z = BasePoint::Torus(TorusPoint::new(p[0] + *c * e[0], p[1] + *c * e[1]));
            }
            None => {
                self.z = self.sys.step(&self.z, dir);
                let d = self.sys.distance(&self.x, &self.z);
                if d > self.sys.hyp().eps0 {
                    return Err(LabError::Precondition(format!(
                        "z escapes the local {} set after {} iterates (d = {d:.3e})",
                        self.side.label(),
                        self.k
                    )));
                }
            }
        }
        Ok(())
    }
}

impl BaseSystem {
    /// Random point of the local `side` set of `x`. On the torus the leaf
    /// coordinate is uniform in `(−scale·ε₀, scale·ε₀)`; on the shift the
    /// coordinates on the expanding side beyond the local window are
    /// resampled along a random admissible path.
    pub fn leaf_point<R: Rng + ?Sized>(
        &self,
        x: &BasePoint,
        side: Side,
        scale: f64,
        rng: &mut R,
    ) -> BasePoint {
        match (self, x) {
            (BaseSystem::Cat(c), BasePoint::Torus(p)) => {
                let t = scale * c.hyp.eps0 * rng.gen_range(-1.0..1.0);
                let e = match side {
                    Side::Stable => c.e_s,
                    Side::Unstable => c.e_u,
                };
                BasePoint::Torus(TorusPoint::new(
                    p.coords[0] + t * e[0],
                    p.coords[1] + t * e[1],
                ))
            }
            (BaseSystem::Shift(s), BasePoint::Symbolic(p)) => {
                BasePoint::Symbolic(shift_leaf_point(s, p, side, rng))
            }
            _ => panic!("base point does not belong to this system"),
        }
    }

    /// Angle factor of the local product structure: `d(x,[x,z])` and
    /// `d([x,z],z)` are at most `d(x,z)/sin φ`.
    pub fn product_sine(&self) -> f64 {
        match self {
            BaseSystem::Cat(c) => c.sin_angle,
            BaseSystem::Shift(_) => 1.0,
        }
    }
}

const RESAMPLED: usize = 40;

fn shift_leaf_point<R: Rng + ?Sized>(s: &Sft, p: &SftPoint, side: Side, rng: &mut R) -> SftPoint {
    let mut walk: Vec<u8> = Vec::with_capacity(RESAMPLED + 2);
    match side {
        Side::Stable => {
            // keep coordinates ≥ −1, resample the past
            let mut cur = p.symbol(-1);
            for _ in 0..RESAMPLED {
                let preds: Vec<u8> = (0..s.alphabet_size as u8)
                    .filter(|&a| s.admissible(a, cur))
                    .collect();
                cur = preds[rng.gen_range(0..preds.len())];
                walk.push(cur);
            }
            walk.reverse();
            walk.push(p.symbol(-1));
            let past = s.point_with_center(&walk, walk.len() as i64);
            super::sft::splice(&past, p).canonical()
        }
        Side::Unstable => {
            // keep coordinates ≤ 1, resample the future
            walk.push(p.symbol(0));
            walk.push(p.symbol(1));
            let mut cur = p.symbol(1);
            for _ in 0..RESAMPLED {
                let succ: Vec<u8> = (0..s.alphabet_size as u8)
                    .filter(|&b| s.admissible(cur, b))
                    .collect();
                cur = succ[rng.gen_range(0..succ.len())];
                walk.push(cur);
            }
            let future = s.point_with_center(&walk, 0);
            super::sft::splice(p, &future).canonical()
        }
    }
}
