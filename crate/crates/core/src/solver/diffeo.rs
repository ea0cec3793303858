//! Circle-diffeomorphism transfer functions.

use rayon::prelude::*;

use super::{transport, verify, Cohomology, SolveOptions, SolveReport, TransferFunction};
use crate::base::{BasePoint, BaseSystem, DenseOrbitPlan};
use crate::cocycle::SkewSystem;
use crate::error::{LabError, Result};
use crate::fiber::{circ_dist, CircleDiffeo, CircleMap, FiberMap};

/// Steps between renormalizations of the composition chain.
pub const REFRESH_EVERY: usize = 512;

/// Node images `u(i/G)` and derivatives `u′(i/G)` of the running
/// composition, advanced exactly by evaluating each `Φ(x_k)` on them.
#[derive(Clone)]
struct NodeChain {
    lift: Vec<f64>,
    deriv: Vec<f64>,
}

impl NodeChain {
    fn advance(&mut self, g: &FiberMap) {
        self.lift
            .par_chunks_mut(256)
            .zip(self.deriv.par_chunks_mut(256))
            .for_each(|(l, d)| {
                for (v, dv) in l.iter_mut().zip(d.iter_mut()) {
                    let (a, b) = g.lift_with_deriv(*v);
                    *v = a;
                    *dv *= b;
                }
            });
    }

    /// Renormalizes the degree and counts order violations.
    fn refresh(&mut self) -> usize {
        let shift = self.lift[0].floor();
        for v in self.lift.iter_mut() {
            *v -= shift;
        }
        let g = self.lift.len();
        let mut bad = self.lift.windows(2).filter(|w| w[1] <= w[0]).count();
        if self.lift[g - 1] >= self.lift[0] + 1.0 {
            bad += 1;
        }
        bad
    }

    fn to_diffeo(&self) -> Result<CircleDiffeo> {
        CircleDiffeo::from_samples(self.lift.clone(), self.deriv.clone())
    }
}

/// `u(fⁿx) = Φ⁽ⁿ⁾(x) ∘ u(x)` for circle cocycles, audited on the nodes of
/// `u(x)` so that no inverse is interpolated.
pub struct DiffeoEquation<'a>(pub &'a SkewSystem);

impl Cohomology for DiffeoEquation<'_> {
    type Value = CircleDiffeo;
    fn base(&self) -> &BaseSystem {
        &self.0.base
    }
    fn residual(
        &self,
        x: &BasePoint,
        n: usize,
        ux: &CircleDiffeo,
        ufx: &CircleDiffeo,
    ) -> (f64, f64) {
        let mut maps = Vec::with_capacity(n);
        let mut cur = x.clone();
        for _ in 0..n {
            maps.push(self.0.circle_map(&cur));
            cur = self.0.base.step(&cur, 1);
        }
        let (ul, ud) = (ux.lift_samples(), ux.derivative_samples());
        let (vl, vd) = (ufx.lift_samples(), ufx.derivative_samples());
        let mut c0 = 0.0f64;
        let mut c1 = 0.0f64;
        for i in 0..ul.len() {
            let mut t = ul[i];
            let mut d = 1.0;
            for g in &maps {
                let (a, b) = g.lift_with_deriv(t);
                t = a;
                d *= b;
            }
            c0 = c0.max(circ_dist(t, vl[i]));
            c1 = c1.max((d - vd[i] / ud[i]).abs());
        }
        (c0, c0.max(c1))
    }
}

/// `u(fᵏx₀) = Φ⁽ᵏ⁾(x₀) ∘ anchor`, one composition per orbit step.
pub fn solve_diffeo(
    skew: &SkewSystem,
    plan: &DenseOrbitPlan,
    anchor: &CircleDiffeo,
    opts: &SolveOptions,
) -> Result<(TransferFunction<CircleDiffeo>, SolveReport)> {
    if !skew.is_circle() {
        return Err(LabError::Invalid(
            "solve_diffeo requires a circle cocycle".into(),
        ));
    }
    skew.require_poo(opts.poo_period, opts.poo_tol)?;
    let g = anchor.grid_size();
    let chain = NodeChain {
        lift: anchor.lift_samples().to_vec(),
        deriv: anchor.derivative_samples().to_vec(),
    };
    let u = transport(
        &skew.base,
        plan,
        chain,
        anchor.clone(),
        skew.cocycle.alpha,
        |k, x, chain| {
            chain.advance(&skew.circle_map(x));
            if (k + 1) % REFRESH_EVERY == 0 {
                let bad = chain.refresh();
                if bad > g / 8 {
                    return Err(LabError::MonotoneRepair(format!(
                        "{bad} of {g} nodes out of order after {} steps",
                        k + 1
                    )));
                }
            }
            Ok(())
        },
        NodeChain::to_diffeo,
    )?;
    let report = verify(&DiffeoEquation(skew), &u, opts.tolerance);
    Ok((u, report))
}

/// Residual audit of a circle transfer function.
pub fn verify_coboundary(
    skew: &SkewSystem,
    u: &TransferFunction<CircleDiffeo>,
    tolerance: f64,
) -> SolveReport {
    verify(&DiffeoEquation(skew), u, tolerance)
}
