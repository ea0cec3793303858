//! Hölder ratios, normalization changes and parameter continuity of
//! transfer functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{GroupValue, TransferFunction};
use crate::base::{BaseGrid, BaseSystem};
use crate::cocycle::{holder_estimate, SkewSystem};
use crate::error::Result;
use crate::fiber::{CircleDiffeo, MatrixElement};

/// Below this `|Φ|_α` the ratio is not applicable.
pub const HOLDER_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct HolderRatio {
    pub u_norm: f64,
    pub phi_norm: f64,
    /// `|u|_α / |Φ|_α`, absent for constant cocycles.
    pub ratio: Option<f64>,
    pub pairs: usize,
}

/// Empirical `|u|_α` over pairs of stored orbit points.
pub fn transfer_holder<T: GroupValue>(
    u: &TransferFunction<T>,
    sys: &BaseSystem,
    random_pairs: usize,
    seed: u64,
) -> (f64, usize) {
    let cells: Vec<usize> = u.visited().collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    if cells.len() <= 512 {
        for (i, &a) in cells.iter().enumerate() {
            for &b in &cells[i + 1..] {
                pairs.push((a, b));
            }
        }
    } else {
        if let BaseGrid::Torus { res } = u.grid {
            for &c in &cells {
                let (ix, iy) = (c % res, c / res);
                pairs.push((c, (ix + 1) % res + iy * res));
                pairs.push((c, ix + ((iy + 1) % res) * res));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..random_pairs {
            let a = cells[rng.gen_range(0..cells.len())];
            let b = cells[rng.gen_range(0..cells.len())];
            pairs.push((a, b));
        }
    }
    let best = pairs
        .par_iter()
        .filter_map(|&(a, b)| {
            let (xa, xb) = (u.points[a].as_ref()?, u.points[b].as_ref()?);
            let d = sys.distance(xa, xb);
            if d <= 0.0 {
                return None;
            }
            let q = u.values[a].as_ref()?.holder_dist(u.values[b].as_ref()?) / d.powf(u.alpha);
            Some(q)
        })
        .reduce(|| 0.0, f64::max);
    (best, pairs.len())
}

/// `|u|_α / |Φ|_α` with both seminorms estimated empirically.
pub fn holder_bound_check<T: GroupValue>(
    u: &TransferFunction<T>,
    skew: &SkewSystem,
    samples: usize,
    seed: u64,
) -> HolderRatio {
    let (u_norm, pairs) = transfer_holder(u, &skew.base, samples, seed);
    let phi_norm = holder_estimate(skew, samples, seed).value;
    HolderRatio {
        u_norm,
        phi_norm,
        ratio: (phi_norm >= HOLDER_FLOOR).then(|| u_norm / phi_norm),
        pairs,
    }
}

/// Right division `u·g⁻¹` in each group.
pub trait RightDivide: Sized {
    fn right_div(&self, g: &Self) -> Result<Self>;
}

impl RightDivide for f64 {
    fn right_div(&self, g: &Self) -> Result<Self> {
        Ok(self - g)
    }
}

impl RightDivide for MatrixElement {
    fn right_div(&self, g: &Self) -> Result<Self> {
        Ok(self.mul(&g.inverse()))
    }
}

impl RightDivide for CircleDiffeo {
    fn right_div(&self, g: &Self) -> Result<Self> {
        self.compose(&g.invert())
    }
}

/// Renormalizes `u` so that `cell` holds the identity: `u ↦ u·u(cell)⁻¹`.
pub fn rebase<T: GroupValue + RightDivide>(
    u: &TransferFunction<T>,
    cell: usize,
) -> Result<TransferFunction<T>> {
    let pivot = u.values[cell]
        .clone()
        .ok_or(crate::error::LabError::NotFound(cell))?;
    let values = u
        .values
        .par_iter()
        .map(|v| v.as_ref().map(|v| v.right_div(&pivot)).transpose())
        .collect::<Result<Vec<_>>>()?;
    Ok(TransferFunction {
        values,
        anchor: u.anchor.right_div(&pivot)?,
        ..u.clone()
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityReport {
    pub ts: Vec<f64>,
    /// Sup distance between consecutive solutions over common cells.
    pub variations: Vec<f64>,
    /// `variation / Δt`.
    pub moduli: Vec<f64>,
    pub max_variation: f64,
}

/// Solves every member of a family (the caller fixes plan and anchor) and
/// tabulates the variation between consecutive parameters.
pub fn continuity_in_parameter<T, F>(
    ts: &[f64],
    solve: F,
) -> Result<(Vec<TransferFunction<T>>, ContinuityReport)>
where
    T: GroupValue,
    F: Fn(f64) -> Result<TransferFunction<T>> + Sync,
{
    let sols = ts
        .par_iter()
        .map(|&t| solve(t))
        .collect::<Result<Vec<_>>>()?;
    let mut variations = Vec::with_capacity(ts.len().saturating_sub(1));
    let mut moduli = Vec::with_capacity(variations.capacity());
    for i in 1..sols.len() {
        let v = sup_distance(&sols[i - 1], &sols[i]);
        variations.push(v);
        moduli.push(v / (ts[i] - ts[i - 1]).abs());
    }
    let max_variation = variations.iter().cloned().fold(0.0, f64::max);
    Ok((
        sols,
        ContinuityReport {
            ts: ts.to_vec(),
            variations,
            moduli,
            max_variation,
        },
    ))
}

/// Sup over cells populated in both of the value distance.
pub fn sup_distance<T: GroupValue>(a: &TransferFunction<T>, b: &TransferFunction<T>) -> f64 {
    a.values
        .par_iter()
        .zip(b.values.par_iter())
        .filter_map(|(x, y)| Some(x.as_ref()?.sup_dist(y.as_ref()?)))
        .reduce(|| 0.0, f64::max)
}
