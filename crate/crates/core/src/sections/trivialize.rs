//! The trivializing conjugacy `H(x, t) = (x, H_{x,x₀}(t))`.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::holonomy::{cell_holonomy, Knots};
use super::section::{build_atlas, Atlas, SectionOptions};
use crate::base::DenseOrbitPlan;
use crate::cocycle::SkewSystem;
use crate::error::{LabError, Result};
use crate::fiber::{circ_dist, CircleDiffeo, CircleMap};
use crate::solver::TransferFunction;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrivializeOptions {
    /// Cell representatives at which the conjugacy is audited.
    pub state_samples: usize,
    pub fiber_points: usize,
    pub seed: u64,
}

impl Default for TrivializeOptions {
    fn default() -> Self {
        Self {
            state_samples: 512,
            fiber_points: 16,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trivialization {
    pub anchors: usize,
    pub anchor_cell: usize,
    /// Fiber part of `H` at each populated cell representative.
    #[serde(skip)]
    pub h_values: Vec<Option<CircleDiffeo>>,
    /// Sup over audited states of `d(H(F(ζ)), (f × id)(H(ζ)))`.
    pub conjugacy_residual: f64,
    pub worst_cell: Option<usize>,
    pub states_checked: usize,
    /// `(1/n)·log ∂_fib` of the conjugated system along the plan orbit,
    /// largest modulus over the sampled fiber points.
    pub conjugated_exponent: f64,
    pub conjugated_length: usize,
}

/// Holonomies to `x₀` from every populated cell, and the conjugacy audit
/// `H_{fx,x₀}(Φ(x)t) = H_{x,x₀}(t)` at cell representatives `x`, with the
/// fiber over `fx` reached by saturation.
pub fn trivialize(
    skew: &SkewSystem,
    atlas: &Atlas,
    opts: &TrivializeOptions,
) -> Result<Trivialization> {
    let plan = &atlas.plan;
    let sys = &skew.base;
    let anchor_cell = plan.anchor_cell();
    let k0 = Knots::new(
        atlas
            .cell_values(anchor_cell)
            .ok_or_else(|| LabError::SparseAtlas("anchor cell is not populated".into()))?,
    )?;
    let cells: Vec<usize> = (0..plan.grid.cell_count())
        .filter(|&c| plan.reps[c].is_some())
        .collect();
    let maps = cells
        .par_iter()
        .map(|&c| cell_holonomy(atlas, c, anchor_cell).map(|h| (c, h.map)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut h_values = vec![None; plan.grid.cell_count()];
    for (c, m) in maps {
        h_values[c] = Some(m);
    }

    let audited: Vec<usize> = if cells.len() <= opts.state_samples {
        cells.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut idx = sample(&mut rng, cells.len(), opts.state_samples).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| cells[i]).collect()
    };
    let ts: Vec<f64> = (0..opts.fiber_points)
        .map(|i| (i as f64 + 0.5) / opts.fiber_points as f64)
        .collect();
    let rows = audited
        .par_iter()
        .map(|&c| {
            let x = plan.reps[c].as_ref().unwrap();
            let kc = Knots::new(atlas.cell_values(c).unwrap())?;
            let kf = Knots::new(atlas.values_at(skew, &sys.step(x, 1))?)?;
            let g = skew.circle_map(x);
            let worst = ts
                .iter()
                .map(|&t| {
                    let lhs = k0.eval(kf.invert(g.lift(t))).0;
                    let rhs = k0.eval(kc.invert(t)).0;
                    circ_dist(lhs, rhs)
                })
                .fold(0.0, f64::max);
            Ok((c, worst))
        })
        .collect::<Result<Vec<_>>>()?;
    let (worst_cell, conjugacy_residual) =
        rows.iter().fold(
            (None, 0.0f64),
            |acc, &(c, r)| if r > acc.1 { (Some(c), r) } else { acc },
        );

    // ∂(H_{x_n}∘Φ⁽ⁿ⁾(x₀)∘H_{x₀}⁻¹) telescopes along the orbit
    let n = plan.n_forward.saturating_sub(1);
    let mut probe: Vec<(f64, f64)> = ts
        .iter()
        .step_by(4.max(ts.len() / 4))
        .map(|&t| (k0.eval(t).0, 0.0))
        .collect();
    let mut last = plan.start.clone();
    for (k, x) in plan.forward(sys).enumerate() {
        if k == n {
            last = x;
            break;
        }
        let g = skew.circle_map(&x);
        for p in probe.iter_mut() {
            let (a, d) = g.lift_with_deriv(p.0);
            *p = (a, p.1 + d.ln());
        }
    }
    let kn = Knots::new(atlas.values_at(skew, &last)?)?;
    let conjugated_exponent = if n == 0 {
        0.0
    } else {
        probe
            .iter()
            .map(|&(t, log_d)| {
                let th = kn.invert(t);
                let hd = k0.eval(th).1 / kn.eval(th).1;
                ((hd.ln() + log_d) / n as f64).abs()
            })
            .fold(0.0, f64::max)
    };
    Ok(Trivialization {
        anchors: atlas.m(),
        anchor_cell,
        h_values,
        conjugacy_residual,
        worst_cell,
        states_checked: audited.len(),
        conjugated_exponent,
        conjugated_length: n,
    })
}

/// Builds the atlas with `anchor_counts[0]` anchors and refines to the next
/// count whenever the atlas is too sparse.
pub fn trivialize_refining(
    skew: &SkewSystem,
    plan: Arc<DenseOrbitPlan>,
    anchor_counts: &[usize],
    section: &SectionOptions,
    opts: &TrivializeOptions,
) -> Result<(Atlas, Trivialization)> {
    let mut last = LabError::Invalid("no anchor counts given".into());
    for &m in anchor_counts {
        let attempt = build_atlas(skew, plan.clone(), m, section).and_then(|atlas| {
            let t = trivialize(skew, &atlas, opts)?;
            Ok((atlas, t))
        });
        match attempt {
            Err(e @ LabError::SparseAtlas(_)) => last = e,
            other => return other,
        }
    }
    Err(last)
}

/// `sup` over common cells of `d(u(x)∘u(x₀)⁻¹, H_{x,x₀}⁻¹)` for a circle
/// transfer function solved on the atlas plan.
pub fn solver_agreement(
    atlas: &Atlas,
    u: &TransferFunction<CircleDiffeo>,
    fiber_points: usize,
) -> Result<f64> {
    let plan = &atlas.plan;
    let k0 = Knots::new(atlas.cell_values(plan.anchor_cell()).unwrap_or_default())?;
    let rows = (0..plan.grid.cell_count())
        .into_par_iter()
        .filter_map(|c| {
            let uc = u.values[c].as_ref()?;
            if u.points[c] != plan.reps[c] {
                return None;
            }
            Some((c, uc))
        })
        .map(|(c, uc)| {
            let kc = Knots::new(atlas.cell_values(c).unwrap())?;
            let worst = (0..fiber_points)
                .map(|i| {
                    let t = (i as f64 + 0.5) / fiber_points as f64;
                    let solved = uc.lift(u.anchor.inv_lift(t));
                    let lamination = kc.eval(k0.invert(t)).0;
                    circ_dist(solved, lamination)
                })
                .fold(0.0, f64::max);
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sections::fixtures::{coboundary_atlas, generator, identity_atlas};
    use crate::solver::{solve_diffeo, SolveOptions};

    #[test]
    fn identity_trivialization_is_the_identity() {
        let (skew, atlas) = identity_atlas();
        let t = trivialize(skew, atlas, &TrivializeOptions::default()).unwrap();
        assert_eq!(t.conjugacy_residual, 0.0);
        assert!(t.conjugated_exponent < 1e-15);
        for h in t.h_values.iter().flatten() {
            assert!(h.c0_distance(&CircleDiffeo::identity(h.grid_size())) < 1e-12);
        }
    }

    #[test]
    fn coboundary_trivialization_is_the_conjugation() {
        let (skew, atlas) = coboundary_atlas();
        let t = trivialize(skew, atlas, &TrivializeOptions::default()).unwrap();
        assert!(t.conjugacy_residual < 1e-2, "{}", t.conjugacy_residual);
        assert!(t.conjugated_exponent < 1e-6);
        let g = generator();
        let sys = &skew.base;
        let v0 = g.at(sys, &atlas.plan.start);
        for (c, h) in t.h_values.iter().enumerate().step_by(7) {
            let (Some(h), Some(x)) = (h, atlas.plan.reps[c].as_ref()) else {
                continue;
            };
            let vx = g.at(sys, x);
            for i in 0..16 {
                let s = (i as f64 + 0.5) / 16.0;
                assert!(circ_dist(h.lift(s), v0.lift(vx.inv_lift(s))) < 1e-2);
            }
        }
    }

    #[test]
    fn lamination_agrees_with_the_solver() {
        let (skew, atlas) = coboundary_atlas();
        let (u, report) = solve_diffeo(
            skew,
            &atlas.plan,
            &CircleDiffeo::identity(1024),
            &SolveOptions::default(),
        )
        .unwrap();
        let d = solver_agreement(atlas, &u, 16).unwrap();
        assert!(d < report.residual_c0.max(1e-3) + 1e-2, "{d}");
    }
}
