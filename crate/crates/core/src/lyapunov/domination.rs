//! Empirical `(u,β)`/`(s,β)`-domination test.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::{lyapunov_periodic, PeriodicOptions};
use crate::base::{BaseGrid, BasePoint, BaseSystem};
use crate::cocycle::SkewSystem;
use crate::fiber::CircleMap;

/// Sampling for the domination sup: base cell samples times fiber points,
/// plus periodic fiber cycles over base periods `≤ periodic_period`.
#[derive(Clone, Debug, Serialize)]
pub struct DominationGrid {
    pub base: BaseGrid,
    pub fiber_points: usize,
    pub periodic_period: usize,
}

impl DominationGrid {
    pub fn standard(sys: &BaseSystem) -> Self {
        Self {
            base: BaseGrid::standard(sys, 32, 3),
            fiber_points: 32,
            periodic_period: 2,
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "{} x {} fiber points + periodic cycles up to period {}",
            self.base.describe(),
            self.fiber_points,
            self.periodic_period
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationReport {
    pub beta: f64,
    pub ell_max: usize,
    pub ell_found: Option<usize>,
    /// Worst ratio against the bound at `ell_found`, or the smallest worst
    /// ratio over all tested `ℓ` when none passes.
    pub margin: f64,
    pub side: &'static str,
    pub grid_spec: String,
    /// Worst `‖∂F^ℓ‖ / (ν_u^{βℓ}/2)` for `ℓ = 1..=ell_max`.
    pub u_ratios: Vec<f64>,
    /// Worst `2ν_s^{βℓ} / ‖(∂F^ℓ)⁻¹‖⁻¹` for `ℓ = 1..=ell_max`.
    pub s_ratios: Vec<f64>,
    pub samples: usize,
}

impl DominationReport {
    pub fn dominated(&self) -> bool {
        self.ell_found.is_some()
    }
}

/// `(log norm, log conorm)` of `∂_fib F^ℓ` for `ℓ = 1..=ell_max`.
fn circle_profile(skew: &SkewSystem, x: &BasePoint, t: f64, ell_max: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(ell_max);
    let (mut x, mut t) = (x.clone(), t);
    let mut log_d = 0.0;
    for _ in 0..ell_max {
        let (v, d) = skew.circle_map(&x).lift_with_deriv(t);
        log_d += d.abs().ln();
        t = v;
        x = skew.base.step(&x, 1);
        out.push((log_d, log_d));
    }
    out
}

fn linear_profile(skew: &SkewSystem, x: &BasePoint, ell_max: usize) -> Vec<(f64, f64)> {
    let d = skew.cocycle.dim();
    let mut out = Vec::with_capacity(ell_max);
    let mut x = x.clone();
    let mut m = DMatrix::<f64>::identity(d, d);
    // rescale to keep the product representable
    let mut log_scale = 0.0;
    for _ in 0..ell_max {
        m = &skew.matrix(&x).entries * m;
        x = skew.base.step(&x, 1);
        let s = m.amax();
        m /= s;
        log_scale += s.ln();
        let sv = m.clone().singular_values();
        let hi = sv.iter().cloned().fold(0.0, f64::max);
        let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        out.push((hi.ln() + log_scale, lo.ln() + log_scale));
    }
    out
}

/// Smallest `ℓ ≤ ell_max` with `‖∂F^ℓ‖ ≤ ν_u^{βℓ}/2` and
/// `‖(∂F^ℓ)⁻¹‖⁻¹ ≥ 2ν_s^{βℓ}` on every sample.
pub fn domination_test(
    skew: &SkewSystem,
    beta: f64,
    ell_max: usize,
    grid: &DominationGrid,
) -> DominationReport {
    assert!(beta > 0.0 && beta <= 1.0 && ell_max >= 1);
    let hyp = skew.base.hyp();
    let mut starts: Vec<(BasePoint, f64)> = Vec::new();
    let samples = grid.base.cell_samples(&skew.base);
    if skew.is_circle() {
        let fp = grid.fiber_points.max(1);
        for (_, x) in &samples {
            for j in 0..fp {
                starts.push((x.clone(), j as f64 / fp as f64));
            }
        }
        let opts = PeriodicOptions {
            fiber_grid: 256,
            ..Default::default()
        };
        for n in 1..=grid.periodic_period {
            for p in skew.base.periodic_points(n).unwrap_or_default() {
                if let Ok(cycles) = lyapunov_periodic(skew, &p, n, &opts) {
                    for c in cycles {
                        starts.push((p.clone(), c.points[0]));
                    }
                }
            }
        }
    } else {
        for (_, x) in &samples {
            starts.push((x.clone(), 0.0));
        }
    }
    let profiles: Vec<Vec<(f64, f64)>> = starts
        .par_iter()
        .map(|(x, t)| {
            if skew.is_circle() {
                circle_profile(skew, x, *t, ell_max)
            } else {
                linear_profile(skew, x, ell_max)
            }
        })
        .collect();
    let ln2 = 2f64.ln();
    let mut u_ratios = Vec::with_capacity(ell_max);
    let mut s_ratios = Vec::with_capacity(ell_max);
    for l in 0..ell_max {
        let ell = (l + 1) as f64;
        let log_u = beta * ell * hyp.nu_u.ln() - ln2;
        let log_s = beta * ell * hyp.nu_s.ln() + ln2;
        let mut worst_u = f64::NEG_INFINITY;
        let mut worst_s = f64::NEG_INFINITY;
        for p in &profiles {
            worst_u = worst_u.max(p[l].0 - log_u);
            worst_s = worst_s.max(log_s - p[l].1);
        }
        u_ratios.push(worst_u.exp());
        s_ratios.push(worst_s.exp());
    }
    let worst = |l: usize| u_ratios[l].max(s_ratios[l]);
    let found = (0..ell_max).find(|&l| worst(l) <= 1.0);
    let l = found.unwrap_or_else(|| {
        (0..ell_max)
            .min_by(|&a, &b| worst(a).partial_cmp(&worst(b)).unwrap())
            .unwrap()
    });
    let (u, s) = (u_ratios[l], s_ratios[l]);
    let side = if (u - s).abs() <= 1e-12 * u.max(s) {
        "both"
    } else if u > s {
        "u"
    } else {
        "s"
    };
    DominationReport {
        beta,
        ell_max,
        ell_found: found.map(|l| l + 1),
        margin: worst(l),
        side,
        grid_spec: grid.describe(),
        u_ratios,
        s_ratios,
        samples: starts.len(),
    }
}
