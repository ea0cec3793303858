//! Orbit-closure sections, their return-claim audit, and the leaf-saturated
//! extension of section values off the orbit.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::leaf::{leaf_bound, leaf_transport, LeafBound, LeafOptions};
use crate::base::grid::visit_order;
use crate::base::{BaseGrid, BasePoint, BaseSystem, DenseOrbitPlan, NearReturnHash, Side};
use crate::cocycle::SkewSystem;
use crate::error::{LabError, Result};
use crate::fiber::{circ_dist, CircleMap};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SectionOptions {
    /// Fiber displacement at a base near-return `d < δ₁` that counts as a
    /// violation of the return claim.
    pub violation_eps: f64,
    /// Number of rungs `δ₁·2⁻ⁱ` of the recorded `(δ, ε)` ladder.
    pub ladder: usize,
    pub leaf: LeafOptions,
}

impl Default for SectionOptions {
    fn default() -> Self {
        Self {
            violation_eps: 0.1,
            ladder: 6,
            leaf: LeafOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NearReturn {
    /// Orbit indices of the two visits.
    pub i: i64,
    pub j: i64,
    /// Orbit points processed when the pair was seen.
    pub processed: usize,
    pub base_distance: f64,
    pub fiber_distance: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Rung {
    pub delta: f64,
    /// Largest fiber displacement over near-returns closer than `delta`.
    pub eps: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReturnClaim {
    pub radius: f64,
    pub violation_eps: f64,
    pub near_returns: usize,
    pub ladder: Vec<Rung>,
    pub first_violation: Option<NearReturn>,
}

impl ReturnClaim {
    pub fn violated(&self) -> bool {
        self.first_violation.is_some()
    }
}

/// The closure of one two-sided `F`-orbit, sampled at the first visit of
/// every grid cell. Values are lifts continued along the orbit.
#[derive(Clone, Debug, Serialize)]
pub struct OrbitClosureSection {
    pub anchor: (BasePoint, f64),
    pub grid: BaseGrid,
    pub values: Vec<Option<f64>>,
    pub visit_trace: Vec<Option<i64>>,
    pub return_claim: ReturnClaim,
}

fn trace(
    skew: &SkewSystem,
    y0: f64,
    plan: &DenseOrbitPlan,
    opts: &SectionOptions,
) -> OrbitClosureSection {
    let sys = &skew.base;
    let delta1 = sys.hyp().delta1;
    let mut values = vec![None; plan.grid.cell_count()];
    let mut hash: NearReturnHash<(i64, f64)> = NearReturnHash::new(sys, delta1);
    let mut ladder: Vec<Rung> = (0..opts.ladder)
        .map(|i| Rung {
            delta: delta1 * 0.5f64.powi(i as i32),
            eps: 0.0,
            count: 0,
        })
        .collect();
    let mut near_returns = 0usize;
    let mut first_violation = None;
    let (mut fx, mut fy) = (plan.start.clone(), y0);
    let (mut bx, mut by) = (plan.start.clone(), y0);
    for (pos, k) in visit_order(plan.n_forward, plan.n_backward).enumerate() {
        let (x, y) = if k == 0 {
            (&fx, fy)
        } else if k > 0 {
            fy = skew.circle_map(&fx).lift(fy);
            fx = sys.step(&fx, 1);
            (&fx, fy)
        } else {
            bx = sys.step(&bx, -1);
            by = skew.circle_map(&bx).inv_lift(by);
            (&bx, by)
        };
        let c = plan.grid.cell(x);
        if plan.first_visit[c] == Some(k) {
            values[c] = Some(y);
        }
        for (_, xj, (j, yj)) in hash.neighbors(x) {
            let d = sys.distance(xj, x);
            if d >= delta1 {
                continue;
            }
            near_returns += 1;
            let e = circ_dist(*yj, y);
            for rung in ladder.iter_mut().filter(|r| d < r.delta) {
                rung.eps = rung.eps.max(e);
                rung.count += 1;
            }
            if e > opts.violation_eps && first_violation.is_none() {
                first_violation = Some(NearReturn {
                    i: *j,
                    j: k,
                    processed: pos + 1,
                    base_distance: d,
                    fiber_distance: e,
                });
            }
        }
        hash.insert(pos, x.clone(), (k, y));
    }
    OrbitClosureSection {
        anchor: (plan.start.clone(), y0),
        grid: plan.grid,
        values,
        visit_trace: plan.first_visit.clone(),
        return_claim: ReturnClaim {
            radius: delta1,
            violation_eps: opts.violation_eps,
            near_returns,
            ladder,
            first_violation,
        },
    }
}

/// Return-claim audit of the orbit of `(x₀, y0)` without failing.
pub fn return_claim_check(
    skew: &SkewSystem,
    y0: f64,
    plan: &DenseOrbitPlan,
    opts: &SectionOptions,
) -> Result<ReturnClaim> {
    require_circle(skew)?;
    Ok(trace(skew, y0, plan, opts).return_claim)
}

/// Section through `(x₀, y0)` populated along the two-sided plan. A base
/// near-return with a large fiber displacement is an error: such an orbit
/// closure is not a section.
pub fn orbit_closure_section(
    skew: &SkewSystem,
    y0: f64,
    plan: &DenseOrbitPlan,
    opts: &SectionOptions,
) -> Result<OrbitClosureSection> {
    require_circle(skew)?;
    if !plan.two_sided() {
        return Err(LabError::Invalid(
            "orbit-closure sections need a two-sided plan".into(),
        ));
    }
    let s = trace(skew, y0, plan, opts);
    if let Some(v) = &s.return_claim.first_violation {
        return Err(LabError::ReturnClaim(format!(
            "orbit indices {} and {} are {:.3e} apart in the base but {:.3} apart in the fiber \
             (after {} orbit points)",
            v.i, v.j, v.base_distance, v.fiber_distance, v.processed
        )));
    }
    Ok(s)
}

pub(crate) fn require_circle(skew: &SkewSystem) -> Result<()> {
    if skew.is_circle() {
        Ok(())
    } else {
        Err(LabError::Invalid(
            "sections are built for circle cocycles".into(),
        ))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub cells: usize,
    /// Sup over populated cells of `d(Φ(x)·s(x), s(cell(fx)))` at the
    /// cell representative `x`.
    pub max_deviation: f64,
    /// The same restricted to cells whose successor cell was first visited
    /// at the next orbit index.
    pub orbit_deviation: f64,
    pub worst_cell: Option<usize>,
}

pub fn section_invariance(
    skew: &SkewSystem,
    section: &OrbitClosureSection,
    plan: &DenseOrbitPlan,
) -> InvarianceReport {
    let rows: Vec<(usize, f64, bool)> = (0..section.values.len())
        .into_par_iter()
        .filter_map(|c| {
            let s = section.values[c]?;
            let x = plan.reps[c].as_ref()?;
            let c2 = plan.grid.cell(&skew.base.step(x, 1));
            let s2 = section.values[c2]?;
            let d = circ_dist(skew.circle_map(x).lift(s), s2);
            let consecutive = matches!((plan.first_visit[c], plan.first_visit[c2]), (Some(a), Some(b)) if b == a + 1);
            Some((c, d, consecutive))
        })
        .collect();
    let mut report = InvarianceReport {
        cells: rows.len(),
        max_deviation: 0.0,
        orbit_deviation: 0.0,
        worst_cell: None,
    };
    for (c, d, consecutive) in rows {
        if d > report.max_deviation {
            report.max_deviation = d;
            report.worst_cell = Some(c);
        }
        if consecutive {
            report.orbit_deviation = report.orbit_deviation.max(d);
        }
    }
    report
}

#[derive(Clone, Debug, Serialize)]
pub struct SectionRow {
    pub cell: usize,
    pub coordinates: Vec<f64>,
    pub value: f64,
    /// Filled from the nearest populated cell for display only.
    pub interpolated: bool,
}

impl OrbitClosureSection {
    /// One row per admissible cell. Unpopulated cells take the value of the
    /// nearest populated representative and are flagged.
    pub fn report_rows(&self, sys: &BaseSystem, plan: &DenseOrbitPlan) -> Vec<SectionRow> {
        let populated: Vec<(usize, &BasePoint)> = (0..self.values.len())
            .filter(|&c| self.values[c].is_some())
            .filter_map(|c| Some((c, plan.reps[c].as_ref()?)))
            .collect();
        self.grid
            .cell_samples(sys)
            .into_iter()
            .filter_map(|(c, p)| match (self.values[c], plan.reps[c].as_ref()) {
                (Some(v), Some(rep)) => Some(SectionRow {
                    cell: c,
                    coordinates: rep.coordinates(),
                    value: v,
                    interpolated: false,
                }),
                _ => {
                    let (near, _) = populated.iter().min_by(|a, b| {
                        sys.distance(a.1, &p)
                            .partial_cmp(&sys.distance(b.1, &p))
                            .unwrap()
                    })?;
                    Some(SectionRow {
                        cell: c,
                        coordinates: p.coordinates(),
                        value: self.values[*near]?,
                        interpolated: true,
                    })
                }
            })
            .collect()
    }
}

/// Values over `z` of the sections whose values at the representative `r`
/// of `z`'s cell are `at_rep`: slide along the unstable leaf of `r` to
/// `w = [r, z]`, then along the stable leaf of `w` to `z`.
pub fn saturate(
    skew: &SkewSystem,
    plan: &DenseOrbitPlan,
    at_rep: &[f64],
    z: &BasePoint,
    opts: &LeafOptions,
) -> Result<Vec<f64>> {
    let c = plan.grid.cell(z);
    let r = plan.reps[c]
        .as_ref()
        .ok_or_else(|| LabError::SparseAtlas(format!("cell {c} is not populated")))?;
    if skew.base.distance(r, z) == 0.0 {
        return Ok(at_rep.to_vec());
    }
    let w = skew.base.bracket(r, z)?;
    let u = leaf_transport(skew, r, &w, Side::Unstable, at_rep, opts)?;
    let s = leaf_transport(skew, &w, z, Side::Stable, &u.values, opts)?;
    if !(u.converged && s.converged) {
        return Err(LabError::Lift(format!(
            "leaf transport to {} did not converge by depth {}",
            z.label(),
            opts.max_depth
        )));
    }
    Ok(s.values)
}

#[derive(Clone, Debug, Serialize)]
pub struct SaturationReport {
    pub samples: usize,
    /// Sup of `|lift from the representative − saturated value at the
    /// landing point|`.
    pub max_deviation: f64,
    /// Sup of `|lift − grid value of the landing cell|`, including the grid
    /// discretization.
    pub grid_deviation: f64,
    pub section_lipschitz: f64,
    pub pairs: usize,
    pub bound: LeafBound,
    pub lipschitz_bound: f64,
    pub lipschitz_ok: bool,
}

/// Slides section points along random stable and unstable leaves and
/// compares with the section, and compares the empirical Lipschitz
/// constant of the section with the leaf bound times the product-structure
/// constant.
pub fn saturation_check(
    skew: &SkewSystem,
    section: &OrbitClosureSection,
    plan: &DenseOrbitPlan,
    samples: usize,
    seed: u64,
    opts: &LeafOptions,
) -> Result<SaturationReport> {
    let sys = &skew.base;
    let cells: Vec<usize> = (0..section.values.len())
        .filter(|&c| section.values[c].is_some() && plan.reps[c].is_some())
        .collect();
    if cells.is_empty() {
        return Err(LabError::Invalid("section has no populated cells".into()));
    }
    let rows = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let c = cells[rng.gen_range(0..cells.len())];
            let r = plan.reps[c].as_ref().unwrap();
            let s = section.values[c].unwrap();
            let side = if i % 2 == 0 {
                Side::Stable
            } else {
                Side::Unstable
            };
            let z = sys.leaf_point(r, side, 0.5, &mut rng);
            let lifted = leaf_transport(skew, r, &z, side, &[s], opts)?.values[0];
            let c2 = plan.grid.cell(&z);
            let Some(s2) = section.values[c2] else {
                return Ok((0.0, 0.0));
            };
            let sat = saturate(skew, plan, &[s2], &z, opts)?[0];
            Ok((circ_dist(lifted, sat), circ_dist(lifted, s2)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (section_lipschitz, pairs) = section_lipschitz(skew, section, plan, seed);
    let bound = leaf_bound(skew, 2000, seed);
    let lipschitz_bound = bound.section_bound();
    Ok(SaturationReport {
        samples,
        max_deviation: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        grid_deviation: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        section_lipschitz,
        pairs,
        bound,
        lipschitz_bound,
        lipschitz_ok: section_lipschitz <= lipschitz_bound,
    })
}

/// Empirical `sup |s(x) − s(x′)| / d(x, x′)^α` over pairs of
/// representatives with `d ≤ δ₀`.
pub fn section_lipschitz(
    skew: &SkewSystem,
    section: &OrbitClosureSection,
    plan: &DenseOrbitPlan,
    seed: u64,
) -> (f64, usize) {
    let sys = &skew.base;
    let alpha = skew.cocycle.alpha;
    let delta0 = sys.hyp().delta0;
    let cells: Vec<usize> = (0..section.values.len())
        .filter(|&c| section.values[c].is_some() && plan.reps[c].is_some())
        .collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    match plan.grid {
        BaseGrid::Torus { res } => {
            for &c in &cells {
                let (ix, iy) = (c % res, c / res);
                pairs.push((c, (ix + 1) % res + iy * res));
                pairs.push((c, ix + ((iy + 1) % res) * res));
                pairs.push((c, (ix + 1) % res + ((iy + 1) % res) * res));
            }
        }
        _ if !cells.is_empty() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 * cells.len().max(1) {
                pairs.push((
                    cells[rng.gen_range(0..cells.len())],
                    cells[rng.gen_range(0..cells.len())],
                ));
            }
        }
        _ => {}
    }
    let q: Vec<f64> = pairs
        .par_iter()
        .filter_map(|&(a, b)| {
            let (xa, xb) = (plan.reps[a].as_ref()?, plan.reps[b].as_ref()?);
            let d = sys.distance(xa, xb);
            let (sa, sb) = (section.values[a]?, section.values[b]?);
            (d > 0.0 && d <= delta0).then(|| circ_dist(sa, sb) / d.powf(alpha))
        })
        .collect();
    (q.iter().cloned().fold(0.0, f64::max), q.len())
}

/// Sections through `{x₀} × {j/m}`.
#[derive(Clone, Debug)]
pub struct Atlas {
    pub plan: Arc<DenseOrbitPlan>,
    pub anchors: Vec<f64>,
    pub sections: Vec<OrbitClosureSection>,
    pub leaf: LeafOptions,
}

/// Builds the `m` anchor sections in parallel; the first failing anchor
/// (in anchor order) determines the error.
pub fn build_atlas(
    skew: &SkewSystem,
    plan: Arc<DenseOrbitPlan>,
    m: usize,
    opts: &SectionOptions,
) -> Result<Atlas> {
    if m < 4 {
        return Err(LabError::Invalid(format!(
            "an atlas needs at least 4 anchors, got {m}"
        )));
    }
    let anchors: Vec<f64> = (0..m).map(|j| j as f64 / m as f64).collect();
    let built: Vec<Result<OrbitClosureSection>> = anchors
        .par_iter()
        .map(|&y| orbit_closure_section(skew, y, &plan, opts))
        .collect();
    let sections = built.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Atlas {
        plan,
        anchors,
        sections,
        leaf: opts.leaf,
    })
}

impl Atlas {
    pub fn m(&self) -> usize {
        self.anchors.len()
    }

    /// Section values at the representative of cell `c`, in anchor order.
    pub fn cell_values(&self, c: usize) -> Option<Vec<f64>> {
        self.sections.iter().map(|s| s.values[c]).collect()
    }

    /// Section values over an arbitrary base point, by saturation from the
    /// representative of its cell.
    pub fn values_at(&self, skew: &SkewSystem, z: &BasePoint) -> Result<Vec<f64>> {
        let c = self.plan.grid.cell(z);
        let at_rep = self
            .cell_values(c)
            .ok_or_else(|| LabError::SparseAtlas(format!("cell {c} is not populated")))?;
        saturate(skew, &self.plan, &at_rep, z, &self.leaf)
    }
}
