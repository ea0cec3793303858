//! The fiber-derivative cocycle along a section, `x ↦ ∂_fib F(x, s(x))`,
//! and its transfer function.

use rayon::prelude::*;
use serde::Serialize;

use super::leaf::LeafOptions;
use super::section::{require_circle, saturate, OrbitClosureSection};
use crate::base::{BasePoint, BaseSystem, DenseOrbitPlan};
use crate::cocycle::SkewSystem;
use crate::error::{LabError, Result};
use crate::fiber::{CircleMap, MatrixElement};
use crate::solver::{transport, verify, Cohomology, SolveOptions, SolveReport, TransferFunction};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DerivativeOptions {
    pub solve: SolveOptions,
    /// Longest iterate in the uniform bound.
    pub horizon: usize,
    /// Section states whose orbits enter the uniform bound.
    pub bound_samples: usize,
    pub leaf: LeafOptions,
}

impl Default for DerivativeOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions {
                tolerance: 1e-3,
                ..SolveOptions::default()
            },
            horizon: 1000,
            bound_samples: 64,
            leaf: LeafOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DerivedPoo {
    pub max_period: usize,
    pub points: usize,
    pub worst_defect: f64,
    pub per_period: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformBound {
    pub horizon: usize,
    pub samples: usize,
    /// `sup |∂_fib Fⁿ|` over `n ≤ horizon/2` and over `n ≤ horizon`.
    pub sup_half: f64,
    pub sup: f64,
    /// `max U / min U` of the transfer function.
    pub constant: f64,
    /// Relative allowance `2·residual/min U` for the grid discretization.
    pub slack: f64,
    /// `sup ≤ C·(1 + slack)`.
    pub pass: bool,
    /// Doubling the horizon moves the sup by at most the slack.
    pub stable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearAlongSection {
    pub anchor: (BasePoint, f64),
    /// `∂_fib F` at `(x, s(x))` for every populated cell representative.
    pub values: Vec<Option<f64>>,
    #[serde(skip)]
    pub transfer: TransferFunction<MatrixElement>,
    pub report: SolveReport,
    pub poo: DerivedPoo,
    pub uniform: UniformBound,
}

/// `U(fⁿx) = D⁽ⁿ⁾(x)·U(x)` with `D(x) = Φ(x)′(s(x))`, audited at cell
/// representatives.
struct SectionDerivative<'a> {
    skew: &'a SkewSystem,
    section: &'a OrbitClosureSection,
}

impl SectionDerivative<'_> {
    fn product(&self, x: &BasePoint, n: usize) -> Option<f64> {
        let mut y = self.section.values[self.section.grid.cell(x)]?;
        let mut cur = x.clone();
        let mut d = 1.0;
        for _ in 0..n {
            let (a, da) = self.skew.circle_map(&cur).lift_with_deriv(y);
            y = a;
            d *= da;
            cur = self.skew.base.step(&cur, 1);
        }
        Some(d)
    }
}

impl Cohomology for SectionDerivative<'_> {
    type Value = MatrixElement;
    fn base(&self) -> &BaseSystem {
        &self.skew.base
    }
    fn residual(
        &self,
        x: &BasePoint,
        n: usize,
        ux: &MatrixElement,
        ufx: &MatrixElement,
    ) -> (f64, f64) {
        let d = self.product(x, n).unwrap_or(f64::NAN);
        let r = (ufx.entries[(0, 0)] - d * ux.entries[(0, 0)]).abs();
        (r, r)
    }
}

fn scalar(v: f64) -> MatrixElement {
    MatrixElement::from_rows(&[vec![v]]).expect("nonzero scalar")
}

/// Tabulates the derivative cocycle along `section` (built on `plan`),
/// checks its periodic obstructions with the section extended to periodic
/// points by saturation, solves it along the forward plan orbit and
/// audits the uniform bound on `|∂_fib Fⁿ|` along section orbits.
pub fn derivative_cocycle_along_section(
    skew: &SkewSystem,
    section: &OrbitClosureSection,
    plan: &DenseOrbitPlan,
    opts: &DerivativeOptions,
) -> Result<LinearAlongSection> {
    require_circle(skew)?;
    let sys = &skew.base;
    let values: Vec<Option<f64>> = (0..section.values.len())
        .into_par_iter()
        .map(|c| {
            let x = plan.reps[c].as_ref()?;
            Some(skew.circle_map(x).deriv(section.values[c]?))
        })
        .collect();

    let mut per_period = Vec::with_capacity(opts.solve.poo_period);
    let mut points = 0;
    for n in 1..=opts.solve.poo_period {
        let pts = sys.periodic_points(n)?;
        points += pts.len();
        let defects = pts
            .par_iter()
            .map(|p| {
                let c = plan.grid.cell(p);
                let s = section.values[c]
                    .ok_or_else(|| LabError::SparseAtlas(format!("cell {c} is not populated")))?;
                let y = saturate(skew, plan, &[s], p, &opts.leaf)?[0];
                let d = skew.fiber_derivative(
                    &(p.clone(), crate::cocycle::FiberState::Circle(y)),
                    n as i64,
                );
                Ok((d.norm() - 1.0).abs())
            })
            .collect::<Result<Vec<f64>>>()?;
        let (i, worst) = defects
            .iter()
            .cloned()
            .enumerate()
            .fold((0, 0.0f64), |a, b| if b.1 > a.1 { b } else { a });
        if worst > opts.solve.poo_tol {
            return Err(LabError::Poo {
                n,
                defect: worst,
                tol: opts.solve.poo_tol,
                witness: pts[i].label(),
            });
        }
        per_period.push((n, worst));
    }
    let poo = DerivedPoo {
        max_period: opts.solve.poo_period,
        points,
        worst_defect: per_period.iter().map(|r| r.1).fold(0.0, f64::max),
        per_period,
    };

    let y0 = section.anchor.1;
    let transfer = transport(
        sys,
        plan,
        (y0, 1.0f64),
        scalar(1.0),
        skew.cocycle.alpha,
        |_, x, (y, d)| {
            let (a, da) = skew.circle_map(x).lift_with_deriv(*y);
            *y = a;
            *d *= da;
            Ok(())
        },
        |&(_, d)| Ok(scalar(d)),
    )?;
    let eq = SectionDerivative { skew, section };
    let report = verify(&eq, &transfer, opts.solve.tolerance);

    let us: Vec<f64> = transfer
        .values
        .iter()
        .flatten()
        .map(|m| m.entries[(0, 0)])
        .collect();
    let (lo, hi) = us.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &u| {
        (lo.min(u.abs()), hi.max(u.abs()))
    });
    let constant = hi / lo;
    let cells: Vec<usize> = transfer.visited().collect();
    let stride = (cells.len() / opts.bound_samples.max(1)).max(1);
    let sampled: Vec<usize> = cells
        .iter()
        .step_by(stride)
        .take(opts.bound_samples)
        .cloned()
        .collect();
    let sups: Vec<(f64, f64)> = sampled
        .par_iter()
        .filter_map(|&c| {
            let x = transfer.points[c].as_ref()?;
            let mut y = section.values[c]?;
            let mut cur = x.clone();
            let mut d = 1.0f64;
            let (mut half, mut full) = (1.0f64, 1.0f64);
            for n in 1..=opts.horizon {
                let (a, da) = skew.circle_map(&cur).lift_with_deriv(y);
                y = a;
                d *= da;
                cur = sys.step(&cur, 1);
                full = full.max(d.abs());
                if n <= opts.horizon / 2 {
                    half = full;
                }
            }
            Some((half, full))
        })
        .collect();
    let sup_half = sups.iter().map(|s| s.0).fold(0.0, f64::max);
    let sup = sups.iter().map(|s| s.1).fold(0.0, f64::max);
    let slack = 2.0 * report.residual_c0 / lo;
    let uniform = UniformBound {
        horizon: opts.horizon,
        samples: sups.len(),
        sup_half,
        sup,
        constant,
        slack,
        pass: sup.is_finite() && sup <= constant * (1.0 + slack),
        stable: sup.is_finite() && sup <= sup_half * (1.0 + slack),
    };
    Ok(LinearAlongSection {
        anchor: section.anchor.clone(),
        values,
        transfer,
        report,
        poo,
        uniform,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sections::fixtures::{coboundary, identity, plan};
    use crate::sections::{orbit_closure_section, SectionOptions};

    #[test]
    fn identity_derivative_is_trivial() {
        let skew = identity();
        let p = plan(&skew.base, 32);
        let s = orbit_closure_section(&skew, 0.3, &p, &SectionOptions::default()).unwrap();
        let d =
            derivative_cocycle_along_section(&skew, &s, &p, &DerivativeOptions::default()).unwrap();
        assert!(d.values.iter().flatten().all(|&v| v == 1.0));
        assert!(d
            .transfer
            .values
            .iter()
            .flatten()
            .all(|u| u.entries[(0, 0)] == 1.0));
        assert_eq!(d.report.residual_c0, 0.0);
        assert_eq!(d.uniform.sup, 1.0);
        assert!(d.uniform.pass && d.uniform.stable);
    }

    #[test]
    fn coboundary_derivative_is_a_coboundary() {
        let skew = coboundary();
        let opts = DerivativeOptions::default();
        let mut residuals = Vec::new();
        for res in [64, 128] {
            let p = plan(&skew.base, res);
            let s = orbit_closure_section(&skew, 0.3, &p, &SectionOptions::default()).unwrap();
            let d = derivative_cocycle_along_section(&skew, &s, &p, &opts).unwrap();
            assert!(d.poo.worst_defect < 1e-12);
            assert!(d.uniform.pass && d.uniform.stable, "{:?}", d.uniform);
            assert!(d.uniform.constant > 1.05);
            residuals.push(d.report.residual_c0);
        }
        assert!(residuals[1] < 5e-3);
        assert!(residuals[1] < 0.6 * residuals[0], "{residuals:?}");
    }
}
