//! Transfer functions for the cohomological equation, built along dense
//! orbits and transported to grid cells by first visit.

mod analysis;
mod diffeo;

use rayon::prelude::*;
use serde::Serialize;

pub use analysis::{
    continuity_in_parameter, holder_bound_check, rebase, sup_distance, transfer_holder,
    ContinuityReport, HolderRatio, RightDivide,
};
pub use diffeo::{solve_diffeo, verify_coboundary, DiffeoEquation, REFRESH_EVERY};

use crate::base::{BaseGrid, BasePoint, BaseSystem, DenseOrbitPlan};
use crate::cocycle::{BaseFunction, SkewSystem};
use crate::error::{LabError, Result};
use crate::fiber::{c0_distance, c1_distance, CircleDiffeo, MatrixElement};

/// Condition number above which linear transfer functions are refused.
pub const CONDITION_GUARD: f64 = 1e8;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolveOptions {
    /// Periods checked for obstructions before solving.
    pub poo_period: usize,
    pub poo_tol: f64,
    /// `residual_C0` threshold for a passing report.
    pub tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            poo_period: 6,
            poo_tol: 1e-4,
            tolerance: 5e-3,
        }
    }
}

/// Values of a transfer function on the cells of a base grid.
#[derive(Clone, Debug)]
pub struct TransferFunction<T> {
    pub grid: BaseGrid,
    pub values: Vec<Option<T>>,
    /// Orbit point whose value was stored in the cell.
    pub points: Vec<Option<BasePoint>>,
    /// Orbit index of that point.
    pub visit: Vec<Option<usize>>,
    pub anchor: T,
    pub anchor_cell: usize,
    pub alpha: f64,
    pub holder_norm: Option<f64>,
    pub plan_seed: u64,
    pub orbit_length: usize,
}

impl<T> TransferFunction<T> {
    pub fn visited(&self) -> impl Iterator<Item = usize> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(c, v)| v.as_ref().map(|_| c))
    }

    pub fn visited_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn value_at(&self, grid_point: &BasePoint) -> Option<&T> {
        self.values[self.grid.cell(grid_point)].as_ref()
    }
}

/// Group-valued data with a metric, used for audits and comparisons.
pub trait GroupValue: Clone + Send + Sync {
    /// Metric used in Hölder quotients.
    fn holder_dist(&self, other: &Self) -> f64;
    /// Sup distance used for comparisons of transfer functions.
    fn sup_dist(&self, other: &Self) -> f64;
}

impl GroupValue for f64 {
    fn holder_dist(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
    fn sup_dist(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
}

impl GroupValue for MatrixElement {
    fn holder_dist(&self, other: &Self) -> f64 {
        self.distance(other)
    }
    fn sup_dist(&self, other: &Self) -> f64 {
        self.distance(other)
    }
}

impl GroupValue for CircleDiffeo {
    fn holder_dist(&self, other: &Self) -> f64 {
        c1_distance(self, other, crate::cocycle::holder::HOLDER_FIBER_GRID)
    }
    fn sup_dist(&self, other: &Self) -> f64 {
        c0_distance(self, other, self.grid_size().max(other.grid_size()))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    /// Sup over checked cells of the one-step residual.
    pub residual_c0: f64,
    pub residual_c1: f64,
    /// Residual restricted to consecutive orbit points stored in the grid.
    pub orbit_residual: f64,
    /// `(n, sup residual of the n-step identity)` on sampled cells.
    pub iterated: Vec<(usize, f64)>,
    pub orbit_length_used: usize,
    pub cells_checked: usize,
    pub worst_cell: Option<usize>,
    pub holder_ratio: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// The equation `u(fⁿx) = Φ⁽ⁿ⁾(x)·u(x)` for one group encoding.
pub trait Cohomology: Sync {
    type Value: GroupValue;
    fn base(&self) -> &BaseSystem;
    /// `(C⁰, C¹)` residual of the `n`-step identity at `x`.
    fn residual(&self, x: &BasePoint, n: usize, ux: &Self::Value, ufx: &Self::Value) -> (f64, f64);
}

pub struct RealEquation<'a> {
    pub base: &'a BaseSystem,
    pub phi: &'a BaseFunction,
}

impl Cohomology for RealEquation<'_> {
    type Value = f64;
    fn base(&self) -> &BaseSystem {
        self.base
    }
    fn residual(&self, x: &BasePoint, n: usize, ux: &f64, ufx: &f64) -> (f64, f64) {
        let mut cur = x.clone();
        let mut sum = 0.0;
        for _ in 0..n {
            sum += self.phi.eval(self.base, &cur);
            cur = self.base.step(&cur, 1);
        }
        let r = (ufx - ux - sum).abs();
        (r, r)
    }
}

pub struct LinearEquation<'a>(pub &'a SkewSystem);

impl Cohomology for LinearEquation<'_> {
    type Value = MatrixElement;
    fn base(&self) -> &BaseSystem {
        &self.0.base
    }
    fn residual(
        &self,
        x: &BasePoint,
        n: usize,
        ux: &MatrixElement,
        ufx: &MatrixElement,
    ) -> (f64, f64) {
        let a = self.0.cocycle_product(x, n as i64);
        let r = a.matrix().distance(&ufx.mul(&ux.inverse()));
        (r, r)
    }
}

/// Runs `step` along the forward orbit of the plan and stores the running
/// state, converted by `store`, at the first visit of each cell.
pub(crate) fn transport<S, T>(
    sys: &BaseSystem,
    plan: &DenseOrbitPlan,
    mut state: S,
    anchor: T,
    alpha: f64,
    mut step: impl FnMut(usize, &BasePoint, &mut S) -> Result<()>,
    mut store: impl FnMut(&S) -> Result<T>,
) -> Result<TransferFunction<T>>
where
    T: Clone,
{
    let cells = plan.grid.cell_count();
    let mut values: Vec<Option<T>> = vec![None; cells];
    let mut points = vec![None; cells];
    let mut visit = vec![None; cells];
    let n = plan.n_forward;
    for (k, x) in plan.forward(sys).enumerate() {
        let c = plan.grid.cell(&x);
        if values[c].is_none() {
            values[c] = Some(if k == 0 {
                anchor.clone()
            } else {
                store(&state)?
            });
            points[c] = Some(x.clone());
            visit[c] = Some(k);
        }
        if k + 1 < n {
            step(k, &x, &mut state)?;
        }
    }
    Ok(TransferFunction {
        grid: plan.grid,
        values,
        points,
        visit,
        anchor,
        anchor_cell: plan.anchor_cell(),
        alpha,
        holder_norm: None,
        plan_seed: plan.seed,
        orbit_length: n,
    })
}

/// Residual audit of a transfer function against an equation.
pub fn verify<E: Cohomology>(
    eq: &E,
    u: &TransferFunction<E::Value>,
    tolerance: f64,
) -> SolveReport {
    let sys = eq.base();
    let cells: Vec<usize> = u.visited().collect();
    let one_step: Vec<Option<(usize, f64, f64, bool)>> = cells
        .par_iter()
        .map(|&c| {
            let x = u.points[c].as_ref()?;
            let fx = sys.step(x, 1);
            let c2 = u.grid.cell(&fx);
            let ufx = u.values[c2].as_ref()?;
            let (r0, r1) = eq.residual(x, 1, u.values[c].as_ref()?, ufx);
            let consecutive = matches!((u.visit[c], u.visit[c2]), (Some(a), Some(b)) if b == a + 1);
            Some((c, r0, r1, consecutive))
        })
        .collect();
    let mut report = SolveReport {
        residual_c0: 0.0,
        residual_c1: 0.0,
        orbit_residual: 0.0,
        iterated: Vec::new(),
        orbit_length_used: u.orbit_length,
        cells_checked: 0,
        worst_cell: None,
        holder_ratio: None,
        tolerance,
        pass: false,
    };
    for (c, r0, r1, consecutive) in one_step.into_iter().flatten() {
        report.cells_checked += 1;
        if r0 > report.residual_c0 {
            report.residual_c0 = r0;
            report.worst_cell = Some(c);
        }
        report.residual_c1 = report.residual_c1.max(r1);
        if consecutive {
            report.orbit_residual = report.orbit_residual.max(r0);
        }
    }
    let stride = (cells.len() / 64).max(1);
    let sampled: Vec<usize> = cells.iter().step_by(stride).cloned().collect();
    for n in [2usize, 5, 10] {
        let worst = sampled
            .par_iter()
            .filter_map(|&c| {
                let x = u.points[c].as_ref()?;
                let c2 = u.grid.cell(&sys.step(x, n as i64));
                let ufx = u.values[c2].as_ref()?;
                Some(eq.residual(x, n, u.values[c].as_ref()?, ufx).0)
            })
            .reduce(|| 0.0, f64::max);
        report.iterated.push((n, worst));
    }
    report.pass = report.residual_c0 <= tolerance;
    report
}

/// Real Birkhoff sums over periodic orbits. Fails at the first period with
/// a nonvanishing sum, reporting that period's worst witness.
pub fn real_poo(sys: &BaseSystem, phi: &BaseFunction, max_period: usize, tol: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for n in 1..=max_period {
        let pts = sys.periodic_points(n)?;
        let sums: Vec<f64> = pts
            .par_iter()
            .map(|p| {
                let mut cur = p.clone();
                let mut s = 0.0;
                for _ in 0..n {
                    s += phi.eval(sys, &cur);
                    cur = sys.step(&cur, 1);
                }
                s.abs()
            })
            .collect();
        let (i, s) =
            sums.iter()
                .cloned()
                .enumerate()
                .fold((0, 0.0f64), |a, b| if b.1 > a.1 { b } else { a });
        if s > tol {
            return Err(LabError::Poo {
                n,
                defect: s,
                tol,
                witness: pts[i].label(),
            });
        }
        worst = worst.max(s);
    }
    Ok(worst)
}

/// `u(fᵏx₀) = Σ_{j<k} φ(fʲx₀)`, normalized by `u(x₀) = anchor`.
pub fn solve_real(
    sys: &BaseSystem,
    phi: &BaseFunction,
    plan: &DenseOrbitPlan,
    anchor: f64,
    opts: &SolveOptions,
) -> Result<(TransferFunction<f64>, SolveReport)> {
    real_poo(sys, phi, opts.poo_period, opts.poo_tol)?;
    let u = transport(
        sys,
        plan,
        anchor,
        anchor,
        1.0,
        |_, x, acc| {
            *acc += phi.eval(sys, x);
            Ok(())
        },
        |acc| Ok(*acc),
    )?;
    let report = verify(&RealEquation { base: sys, phi }, &u, opts.tolerance);
    Ok((u, report))
}

/// `U(fᵏx₀) = A⁽ᵏ⁾(x₀)·anchor`.
pub fn solve_linear(
    skew: &SkewSystem,
    plan: &DenseOrbitPlan,
    anchor: &MatrixElement,
    opts: &SolveOptions,
) -> Result<(TransferFunction<MatrixElement>, SolveReport)> {
    if skew.is_circle() {
        return Err(LabError::Invalid(
            "solve_linear requires a matrix cocycle".into(),
        ));
    }
    skew.require_poo(opts.poo_period, opts.poo_tol)?;
    let u = transport(
        &skew.base,
        plan,
        anchor.clone(),
        anchor.clone(),
        skew.cocycle.alpha,
        |_, x, acc| {
            *acc = skew.matrix(x).mul(acc);
            Ok(())
        },
        |m: &MatrixElement| {
            let cond = m.condition();
            if cond > CONDITION_GUARD {
                Err(LabError::IllConditioned(cond))
            } else {
                Ok(m.clone())
            }
        },
    )?;
    let report = verify(&LinearEquation(skew), &u, opts.tolerance);
    Ok((u, report))
}
