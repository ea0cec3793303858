//! Search for fiberwise-contracting periodic points by recurrence and
//! closing.

use std::collections::HashSet;

use serde::Serialize;

use super::{lyapunov_periodic, PeriodicOptions};
use crate::base::{BasePoint, BaseSystem, NearReturnHash, MAX_EXACT_CLOSING_PERIOD};
use crate::cocycle::{SkewSystem, State};
use crate::error::{LabError, Result};

#[derive(Clone, Debug, Serialize)]
pub struct ContractingPoint {
    pub p: BasePoint,
    pub n: usize,
    pub fiber_cycle: Vec<f64>,
    pub multiplier: f64,
    /// Orbit index at which the near-return was detected.
    pub found_at: usize,
    pub return_distance: f64,
    pub closings_tried: usize,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FinderOptions {
    /// Longest near-return accepted.
    pub max_period: usize,
    pub periodic: PeriodicOptions,
}

impl Default for FinderOptions {
    fn default() -> Self {
        Self {
            max_period: 12,
            periodic: PeriodicOptions {
                fiber_grid: 256,
                ..Default::default()
            },
        }
    }
}

/// Iterates the skew product from `seed`, closes base near-returns
/// `d(x, fⁿx) < δ₁` and returns the first fiber cycle over the closed
/// periodic point with `|multiplier| < 1`.
pub fn find_contracting_periodic(
    skew: &SkewSystem,
    seed: &State,
    steps: usize,
    opts: &FinderOptions,
) -> Result<ContractingPoint> {
    let sys = &skew.base;
    let delta1 = sys.hyp().delta1;
    let max_period = match sys {
        BaseSystem::Cat(_) => opts.max_period.min(MAX_EXACT_CLOSING_PERIOD),
        BaseSystem::Shift(_) => opts.max_period,
    };
    let mut hash: NearReturnHash<()> = NearReturnHash::new(sys, delta1);
    let mut tried = 0usize;
    let mut seen: HashSet<(usize, String)> = HashSet::new();
    let mut state = seed.clone();
    for k in 0..=steps {
        let x = state.0.clone();
        let mut candidates: Vec<(usize, BasePoint)> = hash
            .neighbors(&x)
            .into_iter()
            .filter(|(j, xj, _)| k - j <= max_period && sys.distance(xj, &x) < delta1)
            .map(|(j, xj, _)| (k - j, xj.clone()))
            .collect();
        candidates.sort_by_key(|c| c.0);
        for (n, xj) in candidates {
            // the shift closing is the periodic extension of x₀ … x_{n−1}
            if matches!(xj, BasePoint::Symbolic(_)) && seen.contains(&(n, periodic_key(&xj, n))) {
                continue;
            }
            let Ok(closing) = sys.anosov_closing(&xj, n) else {
                continue;
            };
            let p = closing.p;
            if !seen.insert((n, periodic_key(&p, n))) {
                continue;
            }
            tried += 1;
            let Ok(cycles) = lyapunov_periodic(skew, &p, n, &opts.periodic) else {
                continue;
            };
            if let Some(c) = cycles.into_iter().find(|c| c.multiplier.abs() < 1.0) {
                return Ok(ContractingPoint {
                    p,
                    n,
                    fiber_cycle: c.points,
                    multiplier: c.multiplier,
                    found_at: k,
                    return_distance: closing.return_distance,
                    closings_tried: tried,
                });
            }
        }
        hash.insert(k, x, ());
        if k < steps {
            state = skew.skew_step(&state, 1);
        }
    }
    Err(LabError::NotFound(steps))
}

/// Orbit label: shift words up to rotation, so each cycle is tried once.
fn periodic_key(p: &BasePoint, n: usize) -> String {
    match p {
        BasePoint::Torus(_) => p.label(),
        BasePoint::Symbolic(s) => {
            let w = s.window(0, n as i64 - 1);
            (0..n)
                .map(|r| {
                    w[r..]
                        .iter()
                        .chain(&w[..r])
                        .map(|c| format!("{c}."))
                        .collect::<String>()
                })
                .min()
                .unwrap_or_default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::TorusPoint;
    use crate::cocycle::{BaseFunction, CircleFamily, CocycleSpec, FiberState};

    fn seed() -> State {
        (
            BasePoint::Torus(TorusPoint::new(1e-3, 2e-3)),
            FiberState::Circle(0.5),
        )
    }

    #[test]
    fn bump_contracts_at_fixed_point() {
        let skew = SkewSystem::new(
            BaseSystem::cat([[2, 1], [1, 1]]).unwrap(),
            CocycleSpec::circle(CircleFamily::ArnoldBump {
                amplitude: BaseFunction::Const(0.5),
                shift: BaseFunction::Const(0.0),
            }),
        );
        let c = find_contracting_periodic(&skew, &seed(), 1000, &FinderOptions::default()).unwrap();
        assert_eq!(c.n, 1);
        assert!(c.p.torus().coords[0] == 0.0 && c.p.torus().coords[1] == 0.0);
        assert!((c.multiplier - 0.5).abs() < 1e-6);
        assert!((c.fiber_cycle[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn identity_not_found() {
        let skew = SkewSystem::new(
            BaseSystem::cat([[2, 1], [1, 1]]).unwrap(),
            CocycleSpec::circle(CircleFamily::Identity),
        );
        let err =
            find_contracting_periodic(&skew, &seed(), 5000, &FinderOptions::default()).unwrap_err();
        assert_eq!(err, LabError::NotFound(5000));
    }
}
