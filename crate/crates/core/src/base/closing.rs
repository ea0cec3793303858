//! Near-return harvesting and a joint fit of the closing constants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{BasePoint, BaseSystem, ClosingResult, MAX_EXACT_CLOSING_PERIOD};
use crate::error::{LabError, Result};

/// Orbit steps scanned before the harvest gives up.
pub const HARVEST_CAP: usize = 10_000_000;

const SHIFT_CENTER: usize = 1 << 16;

#[derive(Clone, Debug, Serialize)]
pub struct HarvestedReturn {
    pub x: BasePoint,
    pub n: usize,
    pub return_distance: f64,
}

/// Scans random orbits for `0 < d(x, fⁿx) < δ₁` with `n ≤ max_period`.
/// After a hit the scan jumps past the segment so harvested segments do
/// not overlap.
pub fn harvest_near_returns(
    sys: &BaseSystem,
    count: usize,
    max_period: usize,
    seed: u64,
) -> Result<Vec<HarvestedReturn>> {
    let max_period = max_period.clamp(1, MAX_EXACT_CLOSING_PERIOD);
    let delta1 = sys.hyp().delta1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fresh = |rng: &mut ChaCha8Rng| match sys {
        BaseSystem::Shift(s) => BasePoint::Symbolic(s.random_point(rng, SHIFT_CENTER)),
        _ => sys.random_point(rng),
    };
    let restart = match sys {
        BaseSystem::Shift(_) => SHIFT_CENTER - max_period,
        _ => usize::MAX,
    };
    let mut out = Vec::with_capacity(count);
    let mut x = fresh(&mut rng);
    let mut since = 0usize;
    let mut steps = 0usize;
    while out.len() < count {
        if steps >= HARVEST_CAP {
            return Err(LabError::Closing(format!(
                "only {} near-returns below δ₁ = {delta1:.3e} in {HARVEST_CAP} steps",
                out.len()
            )));
        }
        if since >= restart {
            x = fresh(&mut rng);
            since = 0;
        }
        let mut fx = x.clone();
        let mut hit = None;
        for n in 1..=max_period {
            fx = sys.step(&fx, 1);
            let d = sys.distance(&x, &fx);
            if d > 0.0 && d < delta1 {
                hit = Some((n, d));
                break;
            }
        }
        let jump = match hit {
            Some((n, d)) => {
                out.push(HarvestedReturn {
                    x: x.clone(),
                    n,
                    return_distance: d,
                });
                n
            }
            None => 1,
        };
        x = sys.step(&x, jump as i64);
        since += jump;
        steps += jump;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosingFit {
    pub samples: usize,
    pub rows: usize,
    /// Decay rate from a least-squares fit of `log(distance/d)` against the
    /// exponent variable, pooled over the three bounds.
    pub lambda: f64,
    /// Smallest `c` for which every row obeys `distance ≤ c·d·e^{−λm}`.
    pub c: f64,
    pub c_apriori: f64,
    pub lambda_apriori: f64,
    /// Every trace satisfies the bounds with the a-priori constants.
    pub apriori_hold: bool,
}

impl ClosingFit {
    pub fn lambda_ratio(&self) -> f64 {
        self.lambda / self.lambda_apriori
    }

    pub fn c_ratio(&self) -> f64 {
        self.c / self.c_apriori
    }
}

pub fn fit_closing(sys: &BaseSystem, results: &[ClosingResult]) -> ClosingFit {
    let hyp = sys.hyp();
    let mut pts: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut apriori_hold = true;
    for r in results {
        for row in &r.bound_trace {
            let m = r.exponents(row.i);
            for k in 0..3 {
                if row.distances[k] > row.bounds[k] * (1.0 + 1e-9) + 1e-12 {
                    apriori_hold = false;
                }
                if row.distances[k] > 0.0 && r.return_distance > 0.0 {
                    pts.push((
                        m[k],
                        (row.distances[k] / r.return_distance).ln(),
                        row.distances[k],
                        r.return_distance,
                    ));
                }
            }
        }
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| {
        (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2))
    });
    let lambda = if sxx > 0.0 { -sxy / sxx } else { f64::NAN };
    let c = pts
        .iter()
        .map(|&(m, _, dist, d)| dist / (d * (-lambda * m).exp()))
        .fold(0.0, f64::max);
    ClosingFit {
        samples: results.len(),
        rows: pts.len(),
        lambda,
        c,
        c_apriori: hyp.c,
        lambda_apriori: hyp.lambda,
        apriori_hold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harvested_returns_are_below_delta1() {
        let cat = BaseSystem::cat([[2, 1], [1, 1]]).unwrap();
        let h = harvest_near_returns(&cat, 10, 12, 3).unwrap();
        assert_eq!(h.len(), 10);
        for r in &h {
            let d = cat.distance(&r.x, &cat.step(&r.x, r.n as i64));
            assert_eq!(d, r.return_distance);
            assert!(d < cat.hyp().delta1);
        }
    }

    #[test]
    fn shift_fit_recovers_log_inverse_theta() {
        let sft = BaseSystem::full_shift(2, 0.5).unwrap();
        let h = harvest_near_returns(&sft, 40, 12, 1).unwrap();
        let res: Vec<_> = h
            .iter()
            .map(|r| sft.anosov_closing(&r.x, r.n).unwrap())
            .collect();
        let fit = fit_closing(&sft, &res);
        assert!(fit.apriori_hold);
        assert!((fit.lambda_ratio() - 1.0).abs() < 0.5, "{fit:?}");
    }
}
