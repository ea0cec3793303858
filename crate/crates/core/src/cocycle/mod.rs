//! Cocycles over a hyperbolic base, their products, the induced skew
//! product on the trivial bundle, and the periodic orbit obstruction check.

pub mod basefn;
pub mod holder;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use basefn::{BaseFunction, FourierTerm, SymbolTerm};
pub use holder::{holder_estimate, HolderEstimate};

use crate::base::{BaseGrid, BasePoint, BaseSystem};
use crate::error::{LabError, Result};
use crate::fiber::{circ_dist, CircleDiffeo, CircleMap, FiberMap, MatrixElement, DEFAULT_GRID};

/// Smooth family `x ↦ v(x)` of bump diffeomorphisms
/// `t ↦ t + shift(x) + amp(x)/(2π)·sin(2π(t − phase(x)))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    #[serde(default)]
    pub shift: BaseFunction,
    #[serde(default)]
    pub amp: BaseFunction,
    #[serde(default)]
    pub phase: BaseFunction,
}

impl Generator {
    pub fn at(&self, sys: &BaseSystem, x: &BasePoint) -> FiberMap {
        FiberMap::Bump {
            shift: self.shift.eval(sys, x),
            amp: self.amp.eval(sys, x),
            phase: self.phase.eval(sys, x),
        }
    }

    /// `v(x) ∘ v(x₀)⁻¹ ∘ anchor`, the transfer function normalized at `x₀`.
    pub fn normalized(
        &self,
        sys: &BaseSystem,
        x: &BasePoint,
        x0: &BasePoint,
        anchor: FiberMap,
    ) -> FiberMap {
        anchor
            .then(self.at(sys, x0).inverse())
            .then(self.at(sys, x))
    }
}

#[derive(Clone, Debug)]
pub enum CircleFamily {
    Identity,
    Rotation {
        angle: BaseFunction,
    },
    ArnoldBump {
        amplitude: BaseFunction,
        shift: BaseFunction,
    },
    /// `Φ(x) = v(f x) ∘ v(x)⁻¹` for an analytic generator `v`.
    CoboundaryGenerated {
        generator: Generator,
    },
    /// `Φ(x) = u(f x) ∘ u(x)⁻¹` with `u` tabulated per grid cell.
    Tabulated {
        grid: BaseGrid,
        values: Arc<Vec<Option<Arc<CircleDiffeo>>>>,
    },
    /// One fiber map per grid cell.
    GridTable {
        grid: BaseGrid,
        maps: Vec<FiberMap>,
    },
    /// Shift cocycle depending on the symbols on the window `lo..=hi`.
    LocallyConstant {
        lo: i64,
        hi: i64,
        alphabet: usize,
        maps: Vec<FiberMap>,
    },
}

#[derive(Clone, Debug)]
pub enum LinearFamily {
    Constant(MatrixElement),
    /// `A(x) = exp(t·B(x))`.
    Exp {
        t: f64,
        generator: Vec<Vec<BaseFunction>>,
    },
    /// `A(x) = V(f x)·V(x)⁻¹` with `V(x) = exp(t·B(x))`.
    Coboundary {
        t: f64,
        generator: Vec<Vec<BaseFunction>>,
    },
    Table {
        grid: BaseGrid,
        values: Vec<Option<MatrixElement>>,
    },
}

#[derive(Clone, Debug)]
pub enum CocycleKind {
    Circle(CircleFamily),
    Linear(LinearFamily),
}

#[derive(Clone, Debug)]
pub struct CocycleSpec {
    pub kind: CocycleKind,
    pub alpha: f64,
    pub holder_norm_estimate: Option<f64>,
}

impl CocycleSpec {
    pub fn circle(family: CircleFamily) -> Self {
        Self {
            kind: CocycleKind::Circle(family),
            alpha: 1.0,
            holder_norm_estimate: None,
        }
    }

    pub fn linear(family: LinearFamily) -> Self {
        Self {
            kind: CocycleKind::Linear(family),
            alpha: 1.0,
            holder_norm_estimate: None,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn family_id(&self) -> &'static str {
        match &self.kind {
            CocycleKind::Circle(CircleFamily::Identity) => "identity",
            CocycleKind::Circle(CircleFamily::Rotation { .. }) => "rotation",
            CocycleKind::Circle(CircleFamily::ArnoldBump { .. }) => "arnold_bump",
            CocycleKind::Circle(CircleFamily::CoboundaryGenerated { .. })
            | CocycleKind::Circle(CircleFamily::Tabulated { .. }) => "coboundary_generated",
            CocycleKind::Circle(CircleFamily::GridTable { .. }) => "grid_table",
            CocycleKind::Circle(CircleFamily::LocallyConstant { .. }) => "locally_constant_sft",
            CocycleKind::Linear(_) => "linear_family",
        }
    }

    pub fn is_circle(&self) -> bool {
        matches!(self.kind, CocycleKind::Circle(_))
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            CocycleKind::Circle(_) => 1,
            CocycleKind::Linear(LinearFamily::Constant(m)) => m.dim(),
            CocycleKind::Linear(LinearFamily::Exp { generator, .. })
            | CocycleKind::Linear(LinearFamily::Coboundary { generator, .. }) => generator.len(),
            CocycleKind::Linear(LinearFamily::Table { values, .. }) => {
                values.iter().flatten().next().map_or(1, MatrixElement::dim)
            }
        }
    }
}

fn eval_generator(
    sys: &BaseSystem,
    b: &[Vec<BaseFunction>],
    x: &BasePoint,
    t: f64,
) -> DMatrix<f64> {
    let d = b.len();
    DMatrix::from_fn(d, d, |i, j| t * b[i][j].eval(sys, x))
}

/// Group element of either fiber kind.
#[derive(Clone, Debug)]
pub enum GroupElement {
    Circle(FiberMap),
    Matrix(MatrixElement),
}

impl GroupElement {
    /// Distance to the identity: circular `C⁰` distance on `grid` nodes, or
    /// the largest entry of `A − I`.
    pub fn identity_defect(&self, grid: usize) -> f64 {
        match self {
            GroupElement::Circle(g) => {
                let h = 1.0 / grid as f64;
                (0..grid)
                    .map(|i| {
                        let t = i as f64 * h;
                        circ_dist(g.lift(t), t)
                    })
                    .fold(0.0, f64::max)
            }
            GroupElement::Matrix(m) => m.distance(&MatrixElement::identity(m.dim())),
        }
    }

    pub fn circle(&self) -> &FiberMap {
        match self {
            GroupElement::Circle(g) => g,
            GroupElement::Matrix(_) => panic!("expected a circle element"),
        }
    }

    pub fn matrix(&self) -> &MatrixElement {
        match self {
            GroupElement::Matrix(m) => m,
            GroupElement::Circle(_) => panic!("expected a matrix element"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FiberState {
    Circle(f64),
    Vector(DVector<f64>),
}

impl FiberState {
    pub fn circle(&self) -> f64 {
        match self {
            FiberState::Circle(y) => *y,
            FiberState::Vector(_) => panic!("expected a circle fiber point"),
        }
    }
}

pub type State = (BasePoint, FiberState);

/// Fiber derivative `∂_fib Fⁿ`: a scalar for circle fibers, a matrix for
/// linear fibers.
#[derive(Clone, Debug)]
pub enum FiberDerivative {
    Scalar(f64),
    Matrix(MatrixElement),
}

impl FiberDerivative {
    pub fn norm(&self) -> f64 {
        match self {
            FiberDerivative::Scalar(d) => d.abs(),
            FiberDerivative::Matrix(m) => m.norm(),
        }
    }

    pub fn conorm(&self) -> f64 {
        match self {
            FiberDerivative::Scalar(d) => d.abs(),
            FiberDerivative::Matrix(m) => m.conorm(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PooReport {
    pub max_period_checked: usize,
    pub worst_defect: f64,
    pub worst_witness: Option<(usize, BasePoint)>,
    pub tolerance: f64,
    pub pass: bool,
    /// Worst defect per period.
    pub per_period: Vec<(usize, f64)>,
    pub points_checked: usize,
}

/// The skew product `F(x, y) = (f x, Φ(x) y)` on `M × N`.
#[derive(Clone, Debug)]
pub struct SkewSystem {
    pub base: BaseSystem,
    pub cocycle: CocycleSpec,
    /// Fiber grid size used for sampled maps and `C⁰` audits.
    pub fiber_grid: usize,
}

impl SkewSystem {
    pub fn new(base: BaseSystem, cocycle: CocycleSpec) -> Self {
        Self {
            base,
            cocycle,
            fiber_grid: DEFAULT_GRID,
        }
    }

    pub fn is_circle(&self) -> bool {
        self.cocycle.is_circle()
    }

    /// `Φ(x)` for circle cocycles.
    pub fn circle_map(&self, x: &BasePoint) -> FiberMap {
        let sys = &self.base;
        match &self.cocycle.kind {
            CocycleKind::Circle(fam) => match fam {
                CircleFamily::Identity => FiberMap::Identity,
                CircleFamily::Rotation { angle } => FiberMap::Rotation(angle.eval(sys, x)),
                CircleFamily::ArnoldBump { amplitude, shift } => FiberMap::Bump {
                    shift: shift.eval(sys, x),
                    amp: amplitude.eval(sys, x),
                    phase: 0.0,
                },
                CircleFamily::CoboundaryGenerated { generator } => {
                    let fx = sys.step(x, 1);
                    generator.at(sys, x).inverse().then(generator.at(sys, &fx))
                }
                CircleFamily::Tabulated { grid, values } => {
                    let fx = sys.step(x, 1);
                    let u = values[grid.cell(x)]
                        .as_ref()
                        .expect("tabulated cell populated");
                    let v = values[grid.cell(&fx)]
                        .as_ref()
                        .expect("tabulated cell populated");
                    FiberMap::Sampled(u.clone())
                        .inverse()
                        .then(FiberMap::Sampled(v.clone()))
                }
                CircleFamily::GridTable { grid, maps } => maps[grid.cell(x)].clone(),
                CircleFamily::LocallyConstant {
                    lo,
                    hi,
                    alphabet,
                    maps,
                } => {
                    let p = x.symbolic();
                    let idx =
                        (*lo..=*hi).fold(0usize, |acc, i| acc * alphabet + p.symbol(i) as usize);
                    maps[idx].clone()
                }
            },
            CocycleKind::Linear(_) => panic!("circle map requested from a linear cocycle"),
        }
    }

    /// `A(x)` for linear cocycles.
    pub fn matrix(&self, x: &BasePoint) -> MatrixElement {
        let sys = &self.base;
        match &self.cocycle.kind {
            CocycleKind::Linear(fam) => match fam {
                LinearFamily::Constant(m) => m.clone(),
                LinearFamily::Exp { t, generator } => {
                    MatrixElement::exp(&eval_generator(sys, generator, x, *t))
                }
                LinearFamily::Coboundary { t, generator } => {
                    let fx = sys.step(x, 1);
                    let v = MatrixElement::exp(&eval_generator(sys, generator, x, *t));
                    let vf = MatrixElement::exp(&eval_generator(sys, generator, &fx, *t));
                    vf.mul(&v.inverse())
                }
                LinearFamily::Table { grid, values } => values[grid.cell(x)]
                    .clone()
                    .expect("tabulated cell populated"),
            },
            CocycleKind::Circle(_) => panic!("matrix requested from a circle cocycle"),
        }
    }

    pub fn element(&self, x: &BasePoint) -> GroupElement {
        if self.is_circle() {
            GroupElement::Circle(self.circle_map(x))
        } else {
            GroupElement::Matrix(self.matrix(x))
        }
    }

    /// `Φ⁽ⁿ⁾(x)`: `Φ(f^{n−1}x)⋯Φ(x)` for `n > 0`, identity for `n = 0`,
    /// and `(Φ⁽⁻ⁿ⁾(fⁿx))⁻¹` for `n < 0`.
    pub fn cocycle_product(&self, x: &BasePoint, n: i64) -> GroupElement {
        if n < 0 {
            let y = self.base.step(x, n);
            return match self.cocycle_product(&y, -n) {
                GroupElement::Circle(g) => GroupElement::Circle(g.inverse()),
                GroupElement::Matrix(m) => GroupElement::Matrix(m.inverse()),
            };
        }
        let mut cur = x.clone();
        if self.is_circle() {
            let mut maps = Vec::with_capacity(n as usize);
            for _ in 0..n {
                maps.push(self.circle_map(&cur));
                cur = self.base.step(&cur, 1);
            }
            GroupElement::Circle(if maps.is_empty() {
                FiberMap::Identity
            } else {
                FiberMap::Chain(maps)
            })
        } else {
            let mut m = MatrixElement::identity(self.cocycle.dim());
            for _ in 0..n {
                m = self.matrix(&cur).mul(&m);
                cur = self.base.step(&cur, 1);
            }
            GroupElement::Matrix(m)
        }
    }

    /// `F^k(state)`.
    pub fn skew_step(&self, state: &State, k: i64) -> State {
        let (mut x, mut y) = state.clone();
        if k >= 0 {
            for _ in 0..k {
                y = match y {
                    FiberState::Circle(t) => FiberState::Circle(self.circle_map(&x).lift(t)),
                    FiberState::Vector(v) => FiberState::Vector(&self.matrix(&x).entries * v),
                };
                x = self.base.step(&x, 1);
            }
        } else {
            for _ in 0..(-k) {
                x = self.base.step(&x, -1);
                y = match y {
                    FiberState::Circle(t) => FiberState::Circle(self.circle_map(&x).inv_lift(t)),
                    FiberState::Vector(v) => {
                        FiberState::Vector(&self.matrix(&x).inverse().entries * v)
                    }
                };
            }
        }
        (x, y)
    }

    /// `∂_fib Fⁿ` at `state`, by the chain rule along the orbit.
    pub fn fiber_derivative(&self, state: &State, n: i64) -> FiberDerivative {
        let (mut x, y) = state.clone();
        if self.is_circle() {
            let mut t = y.circle();
            let mut d = 1.0;
            if n >= 0 {
                for _ in 0..n {
                    let (v, dv) = self.circle_map(&x).lift_with_deriv(t);
                    d *= dv;
                    t = v;
                    x = self.base.step(&x, 1);
                }
            } else {
                for _ in 0..(-n) {
                    x = self.base.step(&x, -1);
                    let g = self.circle_map(&x);
                    let u = g.inv_lift(t);
                    d /= g.deriv(u);
                    t = u;
                }
            }
            FiberDerivative::Scalar(d)
        } else {
            FiberDerivative::Matrix(self.cocycle_product(&x, n).matrix().clone())
        }
    }

    /// Periodic orbit obstructions: distance of `Φ⁽ⁿ⁾(p)` to the identity
    /// over every `p ∈ Fix(fⁿ)`, `n ≤ max_period`.
    pub fn poo_check(&self, max_period: usize, tol: f64) -> Result<PooReport> {
        if max_period > self.base.n_max() {
            return Err(LabError::Precondition(format!(
                "period {max_period} exceeds the enumeration limit {}",
                self.base.n_max()
            )));
        }
        let grid = self.fiber_grid;
        let mut worst = 0.0f64;
        let mut witness = None;
        let mut per_period = Vec::with_capacity(max_period);
        let mut checked = 0usize;
        for n in 1..=max_period {
            let pts = self.base.periodic_points(n)?;
            let defects: Vec<f64> = pts
                .par_iter()
                .map(|p| self.cocycle_product(p, n as i64).identity_defect(grid))
                .collect();
            checked += pts.len();
            let mut period_worst = 0.0f64;
            for (p, &d) in pts.iter().zip(&defects) {
                period_worst = period_worst.max(d);
                if d > worst {
                    worst = d;
                    witness = Some((n, p.clone()));
                }
            }
            per_period.push((n, period_worst));
        }
        Ok(PooReport {
            max_period_checked: max_period,
            worst_defect: worst,
            worst_witness: witness,
            tolerance: tol,
            pass: worst <= tol,
            per_period,
            points_checked: checked,
        })
    }

    /// Fails with the worst witness unless the obstructions vanish.
    pub fn require_poo(&self, max_period: usize, tol: f64) -> Result<PooReport> {
        let report = self.poo_check(max_period, tol)?;
        if !report.pass {
            let (n, p) = report
                .worst_witness
                .clone()
                .expect("failing report has a witness");
            return Err(LabError::Poo {
                n,
                defect: report.worst_defect,
                tol,
                witness: p.label(),
            });
        }
        Ok(report)
    }
}

/// `Φ(x) := u(f x) ∘ u(x)⁻¹` from a tabulated transfer function.
pub fn make_coboundary(
    base: &BaseSystem,
    grid: BaseGrid,
    values: Vec<Option<Arc<CircleDiffeo>>>,
) -> Result<CocycleSpec> {
    if values.len() != grid.cell_count() {
        return Err(LabError::GridMismatch(format!(
            "{} values for {} cells of {}",
            values.len(),
            grid.cell_count(),
            grid.describe()
        )));
    }
    let admissible = grid.admissible_cells(base);
    if let Some(c) = (0..values.len()).find(|&c| admissible[c] && values[c].is_none()) {
        return Err(LabError::GridMismatch(format!("cell {c} has no value")));
    }
    Ok(CocycleSpec::circle(CircleFamily::Tabulated {
        grid,
        values: Arc::new(values),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::TorusPoint;

    fn cat() -> BaseSystem {
        BaseSystem::cat([[2, 1], [1, 1]]).unwrap()
    }

    fn bump_system(a: f64) -> SkewSystem {
        SkewSystem::new(
            cat(),
            CocycleSpec::circle(CircleFamily::ArnoldBump {
                amplitude: BaseFunction::Const(a),
                shift: BaseFunction::Const(0.0),
            }),
        )
    }

    #[test]
    fn product_of_rotations_adds_angles() {
        let sys = cat();
        let tau = BaseFunction::cos_mode([1, 0], 0.1);
        let skew = SkewSystem::new(
            sys.clone(),
            CocycleSpec::circle(CircleFamily::Rotation { angle: tau.clone() }),
        );
        let x = BasePoint::Torus(TorusPoint::new(0.3, 0.7));
        let total: f64 = (0..3).map(|k| tau.eval(&sys, &sys.step(&x, k))).sum();
        let g = skew.cocycle_product(&x, 3);
        assert!((g.circle().lift(0.2) - 0.2 - total).abs() < 1e-14);
        assert!(skew.cocycle_product(&x, 0).identity_defect(64) == 0.0);
    }

    #[test]
    fn bump_fixed_state_and_derivative() {
        let skew = bump_system(0.5);
        let o = BasePoint::Torus(TorusPoint::new(0.0, 0.0));
        let s = (o.clone(), FiberState::Circle(0.5));
        let next = skew.skew_step(&s, 1);
        assert_eq!(next.0, o);
        assert!((next.1.circle() - 0.5).abs() < 1e-15);
        let d = skew.fiber_derivative(&s, 4);
        assert!((d.norm() - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn poo_of_constant_bump_fails_with_predicted_defect() {
        let skew = bump_system(0.5);
        let rep = skew.poo_check(1, 1e-4).unwrap();
        assert!(!rep.pass);
        let expect = 0.5 / std::f64::consts::TAU;
        assert!((rep.worst_defect - expect).abs() < 1e-6);
        assert!(skew.require_poo(1, 1e-4).is_err());
    }

    #[test]
    fn make_coboundary_requires_full_table() {
        let sys = cat();
        let grid = BaseGrid::Torus { res: 2 };
        assert!(make_coboundary(&sys, grid, vec![None; 4]).is_err());
        assert!(make_coboundary(&sys, grid, vec![None; 3]).is_err());
    }
}
