//! Fibered Lyapunov exponents along orbits and periodic fiber cycles.

pub mod domination;
pub mod finder;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use domination::{domination_test, DominationGrid, DominationReport};
pub use finder::{find_contracting_periodic, ContractingPoint, FinderOptions};

use crate::base::BasePoint;
use crate::cocycle::{FiberState, GroupElement, SkewSystem, State};
use crate::error::{LabError, Result};
use crate::fiber::{circ, circ_dist, CircleMap, FiberMap};

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovEstimate {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub orbit_length: usize,
    pub start: String,
    /// `(n, λ⁺_n, λ⁻_n)` running averages at checkpoints.
    pub convergence_trace: Vec<(usize, f64, f64)>,
}

impl LyapunovEstimate {
    /// Spread of the running averages over the second half of the trace,
    /// a proxy for the Birkhoff convergence error.
    pub fn trace_spread(&self) -> f64 {
        let half = self.convergence_trace.len() / 2;
        let tail = &self.convergence_trace[half..];
        let hi = tail.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        let lo = tail.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        if tail.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }
}

const CHECKPOINTS: usize = 10;

/// Extremal exponents `(1/N)·log‖∂_fib F^N‖` and `(1/N)·log‖(∂_fib F^N)⁻¹‖⁻¹`,
/// accumulated in log-space (QR re-orthonormalization for matrices).
/// Negative `n` runs the inverse skew product.
pub fn lyapunov_forward(skew: &SkewSystem, state: &State, n: i64) -> Result<LyapunovEstimate> {
    if n == 0 {
        return Err(LabError::Precondition(
            "orbit length must be at least 1".into(),
        ));
    }
    let len = n.unsigned_abs() as usize;
    let every = (len / CHECKPOINTS).max(1);
    let mut trace = Vec::with_capacity(CHECKPOINTS + 1);
    let (mut x, y) = state.clone();
    let (plus, minus) = if skew.is_circle() {
        let mut t = y.circle();
        let mut sum = 0.0;
        for k in 1..=len {
            if n > 0 {
                let (v, d) = skew.circle_map(&x).lift_with_deriv(t);
                sum += d.ln();
                t = v;
                x = skew.base.step(&x, 1);
            } else {
                x = skew.base.step(&x, -1);
                let g = skew.circle_map(&x);
                let u = g.inv_lift(t);
                sum -= g.deriv(u).ln();
                t = u;
            }
            if k % every == 0 || k == len {
                let a = sum / k as f64;
                trace.push((k, a, a));
            }
        }
        (sum / len as f64, sum / len as f64)
    } else {
        let d = skew.cocycle.dim();
        let mut q = DMatrix::<f64>::identity(d, d);
        let mut sums = vec![0.0; d];
        for k in 1..=len {
            let a = if n > 0 {
                let m = skew.matrix(&x);
                x = skew.base.step(&x, 1);
                m.entries
            } else {
                x = skew.base.step(&x, -1);
                skew.matrix(&x).inverse().entries
            };
            let qr = (a * &q).qr();
            let r = qr.r();
            q = qr.q();
            for (i, s) in sums.iter_mut().enumerate() {
                *s += r[(i, i)].abs().ln();
            }
            if k % every == 0 || k == len {
                let hi = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / k as f64;
                let lo = sums.iter().cloned().fold(f64::INFINITY, f64::min) / k as f64;
                trace.push((k, hi, lo));
            }
        }
        let hi = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / len as f64;
        let lo = sums.iter().cloned().fold(f64::INFINITY, f64::min) / len as f64;
        (hi, lo)
    };
    Ok(LyapunovEstimate {
        lambda_plus: plus,
        lambda_minus: minus,
        orbit_length: len,
        start: state.0.label(),
        convergence_trace: trace,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PeriodicOptions {
    /// Grid on which sign changes of the displacement are located.
    pub fiber_grid: usize,
    /// Fiber maps within this `C⁰` distance of the identity are degenerate.
    pub degenerate_tol: f64,
    /// Fiber periods `q` searched (cycles of `(Φ⁽ⁿ⁾(p))^q`).
    pub max_fiber_period: usize,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        Self {
            fiber_grid: 1024,
            degenerate_tol: 1e-6,
            max_fiber_period: 1,
        }
    }
}

/// A periodic orbit of the skew product over a periodic base orbit.
#[derive(Clone, Debug, Serialize)]
pub struct FiberCycle {
    pub base_period: usize,
    pub fiber_period: usize,
    /// Fiber coordinates along the skew orbit, `base_period·fiber_period`
    /// values in `[0, 1)`.
    pub points: Vec<f64>,
    /// Derivative of the return map around the cycle.
    pub multiplier: f64,
    /// Set when the return map is the identity, so every point is periodic
    /// and the reported cycle is a representative.
    pub rigid: bool,
}

impl FiberCycle {
    /// Exponent `log|multiplier| / (n·q)`.
    pub fn exponent(&self) -> f64 {
        self.multiplier.abs().ln() / (self.base_period * self.fiber_period) as f64
    }
}

/// Output for linear fibers: eigenvalue moduli of `A⁽ⁿ⁾(p)`.
#[derive(Clone, Debug, Serialize)]
pub struct PeriodicSpectrum {
    pub period: usize,
    pub moduli: Vec<f64>,
}

fn return_maps(skew: &SkewSystem, p: &BasePoint, n: usize) -> Vec<FiberMap> {
    let mut cur = p.clone();
    let mut maps = Vec::with_capacity(n);
    for _ in 0..n {
        maps.push(skew.circle_map(&cur));
        cur = skew.base.step(&cur, 1);
    }
    maps
}

fn apply_chain(maps: &[FiberMap], q: usize, t: f64) -> (f64, f64) {
    let mut v = t;
    let mut d = 1.0;
    for _ in 0..q {
        for g in maps {
            let (a, b) = g.lift_with_deriv(v);
            v = a;
            d *= b;
        }
    }
    (v, d)
}

/// Periodic points of the fiber return map `Φ⁽ⁿ⁾(p)` with their
/// multipliers, located by sign changes of the lifted displacement and
/// refined by bisection on the exact map.
pub fn lyapunov_periodic(
    skew: &SkewSystem,
    p: &BasePoint,
    n: usize,
    opts: &PeriodicOptions,
) -> Result<Vec<FiberCycle>> {
    if n == 0 || !skew.base.is_periodic(p, n) {
        return Err(LabError::Precondition(format!(
            "{} is not a point of period {n}",
            p.label()
        )));
    }
    if !skew.is_circle() {
        return Err(LabError::Invalid(
            "fiber cycles require circle fibers".into(),
        ));
    }
    let maps = return_maps(skew, p, n);
    let grid = opts.fiber_grid;
    let h = 1.0 / grid as f64;
    let mut cycles: Vec<FiberCycle> = Vec::new();
    let mut seen: Vec<f64> = Vec::new();
    for q in 1..=opts.max_fiber_period.max(1) {
        let disp: Vec<f64> = (0..=grid)
            .map(|i| {
                let t = i as f64 * h;
                apply_chain(&maps, q, t).0 - t
            })
            .collect();
        let defect = disp[..grid]
            .iter()
            .map(|d| (d - d.round()).abs())
            .fold(0.0, f64::max);
        if defect <= opts.degenerate_tol {
            if q == 1 {
                return Err(LabError::Degenerate(format!(
                    "return map over {} is within {defect:.1e} of the identity",
                    p.label()
                )));
            }
            let mult = apply_chain(&maps, q, 0.0).1;
            cycles.push(make_cycle(&maps, n, q, 0.0, mult, true));
            break;
        }
        let lo = disp.iter().cloned().fold(f64::INFINITY, f64::min).floor() as i64;
        let hi = disp
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            .ceil() as i64;
        for m in lo..=hi {
            let mf = m as f64;
            for i in 0..grid {
                let a = disp[i] - mf;
                let b = disp[i + 1] - mf;
                let root = if a == 0.0 {
                    Some(i as f64 * h)
                } else if a * b < 0.0 {
                    Some(bisect(&maps, q, mf, i as f64 * h, (i + 1) as f64 * h))
                } else {
                    None
                };
                let Some(t) = root else { continue };
                if seen.iter().any(|&s| circ_dist(s, t) < 1e-9) {
                    continue;
                }
                let mult = apply_chain(&maps, q, t).1;
                let cycle = make_cycle(&maps, n, q, t, mult, false);
                // points of the same fiber orbit over the base point p
                let mut v = t;
                for _ in 0..q {
                    seen.push(circ(v));
                    v = apply_chain(&maps, 1, v).0;
                }
                cycles.push(cycle);
            }
        }
    }
    Ok(cycles)
}

fn bisect(maps: &[FiberMap], q: usize, m: f64, mut a: f64, mut b: f64) -> f64 {
    let f = |t: f64| apply_chain(maps, q, t).0 - t - m;
    let fa = f(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn make_cycle(maps: &[FiberMap], n: usize, q: usize, t: f64, mult: f64, rigid: bool) -> FiberCycle {
    let mut points = Vec::with_capacity(n * q);
    let mut v = t;
    for _ in 0..q {
        for g in maps {
            points.push(circ(v));
            v = g.lift(v);
        }
    }
    FiberCycle {
        base_period: n,
        fiber_period: q,
        points,
        multiplier: mult,
        rigid,
    }
}

/// Eigenvalue moduli of `A⁽ⁿ⁾(p)` for linear fibers.
pub fn periodic_spectrum(skew: &SkewSystem, p: &BasePoint, n: usize) -> Result<PeriodicSpectrum> {
    if !skew.base.is_periodic(p, n) {
        return Err(LabError::Precondition(format!(
            "{} is not a point of period {n}",
            p.label()
        )));
    }
    match skew.cocycle_product(p, n as i64) {
        GroupElement::Matrix(m) => Ok(PeriodicSpectrum {
            period: n,
            moduli: m.eigen_moduli(),
        }),
        GroupElement::Circle(_) => Err(LabError::Invalid("spectrum requires linear fibers".into())),
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SweepRow {
    /// Period for periodic rows, run index for generic rows.
    pub id: usize,
    pub kind: &'static str,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub length: usize,
    pub multiplier: Option<f64>,
    pub point: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub envelope: (f64, f64),
    pub periodic_orbits: usize,
    pub random_orbits: usize,
}

impl SweepSummary {
    pub fn from_rows(rows: Vec<SweepRow>) -> Self {
        let lo = rows
            .iter()
            .map(|r| r.lambda_minus)
            .fold(f64::INFINITY, f64::min);
        let hi = rows
            .iter()
            .map(|r| r.lambda_plus)
            .fold(f64::NEG_INFINITY, f64::max);
        let periodic_orbits = rows.iter().filter(|r| r.kind == "periodic").count();
        let random_orbits = rows.len() - periodic_orbits;
        let envelope = if rows.is_empty() {
            (0.0, 0.0)
        } else {
            (lo, hi)
        };
        Self {
            rows,
            envelope,
            periodic_orbits,
            random_orbits,
        }
    }

    /// Whether the envelope contains `v` within `tol`.
    pub fn contains(&self, v: f64, tol: f64) -> bool {
        self.rows
            .iter()
            .any(|r| (r.lambda_plus - v).abs() <= tol || (r.lambda_minus - v).abs() <= tol)
    }
}

fn periodic_rows(
    skew: &SkewSystem,
    p: &BasePoint,
    n: usize,
    opts: &PeriodicOptions,
) -> Result<Vec<SweepRow>> {
    let label = p.label();
    if !skew.is_circle() {
        let s = periodic_spectrum(skew, p, n)?;
        let hi = s.moduli[0];
        let lo = s.moduli[s.moduli.len() - 1];
        return Ok(vec![SweepRow {
            id: n,
            kind: "periodic",
            lambda_plus: hi.ln() / n as f64,
            lambda_minus: lo.ln() / n as f64,
            length: n,
            multiplier: Some(hi),
            point: label,
        }]);
    }
    match lyapunov_periodic(skew, p, n, opts) {
        Ok(cycles) if !cycles.is_empty() => Ok(cycles
            .iter()
            .map(|c| SweepRow {
                id: n,
                kind: "periodic",
                lambda_plus: c.exponent(),
                lambda_minus: c.exponent(),
                length: n * c.fiber_period,
                multiplier: Some(c.multiplier),
                point: label.clone(),
            })
            .collect()),
        Ok(_) => {
            // no fiber periodic points: Birkhoff average of the return map
            let maps = return_maps(skew, p, n);
            let reps = 2000;
            let mut t = 0.0;
            let mut sum = 0.0;
            for _ in 0..reps {
                let (v, d) = apply_chain(&maps, 1, t);
                sum += d.ln();
                t = v;
            }
            let lam = sum / (reps * n) as f64;
            Ok(vec![SweepRow {
                id: n,
                kind: "periodic",
                lambda_plus: lam,
                lambda_minus: lam,
                length: reps * n,
                multiplier: None,
                point: label,
            }])
        }
        Err(LabError::Degenerate(_)) => {
            // every fiber point is periodic; exponents are log-derivatives
            let maps = return_maps(skew, p, n);
            let grid = opts.fiber_grid;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..grid {
                let d = apply_chain(&maps, 1, i as f64 / grid as f64).1.ln() / n as f64;
                lo = lo.min(d);
                hi = hi.max(d);
            }
            Ok(vec![SweepRow {
                id: n,
                kind: "periodic",
                lambda_plus: hi,
                lambda_minus: lo,
                length: n,
                multiplier: None,
                point: label,
            }])
        }
        Err(e) => Err(e),
    }
}

/// Exponents over all periodic orbits of period `≤ max_period` and over
/// `random_orbits` Birkhoff runs of length `n`, with their envelope.
pub fn exponent_sweep(
    skew: &SkewSystem,
    max_period: usize,
    random_orbits: usize,
    n: usize,
    seed: u64,
    opts: &PeriodicOptions,
) -> Result<SweepSummary> {
    let mut rows = Vec::new();
    for period in 1..=max_period {
        let pts = skew.base.periodic_points(period)?;
        let chunks: Vec<Result<Vec<SweepRow>>> = pts
            .par_iter()
            .map(|p| periodic_rows(skew, p, period, opts))
            .collect();
        for c in chunks {
            rows.extend(c?);
        }
    }
    let generic: Vec<Result<SweepRow>> = (0..random_orbits)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(run as u64 + 1);
            let x = skew.base.random_orbit_start(&mut rng, n);
            let y = if skew.is_circle() {
                FiberState::Circle(rng.gen())
            } else {
                FiberState::Vector(nalgebra::DVector::from_element(skew.cocycle.dim(), 1.0))
            };
            let est = lyapunov_forward(skew, &(x.clone(), y), n as i64)?;
            Ok(SweepRow {
                id: run,
                kind: "generic",
                lambda_plus: est.lambda_plus,
                lambda_minus: est.lambda_minus,
                length: n,
                multiplier: None,
                point: x.label(),
            })
        })
        .collect();
    for r in generic {
        rows.push(r?);
    }
    Ok(SweepSummary::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{BaseSystem, Rational2, TorusPoint};
    use crate::cocycle::{BaseFunction, CircleFamily, CocycleSpec};

    fn bump(a: f64) -> SkewSystem {
        SkewSystem::new(
            BaseSystem::cat([[2, 1], [1, 1]]).unwrap(),
            CocycleSpec::circle(CircleFamily::ArnoldBump {
                amplitude: BaseFunction::Const(a),
                shift: BaseFunction::Const(0.0),
            }),
        )
    }

    fn origin() -> BasePoint {
        BasePoint::Torus(TorusPoint::from_rational(Rational2::new([0, 0], 1)))
    }

    #[test]
    fn bump_fixed_points() {
        let skew = bump(0.5);
        let cycles = lyapunov_periodic(&skew, &origin(), 1, &PeriodicOptions::default()).unwrap();
        let mut found: Vec<(f64, f64)> =
            cycles.iter().map(|c| (c.points[0], c.multiplier)).collect();
        found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert_eq!(found.len(), 2);
        assert!(found[0].0.abs() < 1e-12 && (found[0].1 - 1.5).abs() < 1e-9);
        assert!((found[1].0 - 0.5).abs() < 1e-12 && (found[1].1 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn identity_is_degenerate() {
        let skew = SkewSystem::new(
            BaseSystem::cat([[2, 1], [1, 1]]).unwrap(),
            CocycleSpec::circle(CircleFamily::Identity),
        );
        let err = lyapunov_periodic(&skew, &origin(), 1, &PeriodicOptions::default()).unwrap_err();
        assert!(matches!(err, LabError::Degenerate(_)));
    }

    #[test]
    fn rational_rotation_cycles_are_neutral() {
        let skew = SkewSystem::new(
            BaseSystem::cat([[2, 1], [1, 1]]).unwrap(),
            CocycleSpec::circle(CircleFamily::Rotation {
                angle: BaseFunction::Const(0.25),
            }),
        );
        let opts = PeriodicOptions {
            max_fiber_period: 4,
            ..Default::default()
        };
        let cycles = lyapunov_periodic(&skew, &origin(), 1, &opts).unwrap();
        assert!(!cycles.is_empty());
        assert!(cycles.iter().all(|c| (c.multiplier - 1.0).abs() < 1e-12));
    }

    #[test]
    fn birkhoff_on_fixed_cycle() {
        let skew = bump(0.5);
        let est = lyapunov_forward(&skew, &(origin(), FiberState::Circle(0.5)), 1000).unwrap();
        assert!((est.lambda_plus - 0.5f64.ln()).abs() < 1e-12);
        let rot = SkewSystem::new(
            BaseSystem::cat([[2, 1], [1, 1]]).unwrap(),
            CocycleSpec::circle(CircleFamily::Rotation {
                angle: BaseFunction::cos_mode([1, 1], 0.1),
            }),
        );
        let s = (
            BasePoint::Torus(TorusPoint::new(0.1, 0.2)),
            FiberState::Circle(0.3),
        );
        let est = lyapunov_forward(&rot, &s, 10_000).unwrap();
        assert_eq!(est.lambda_plus, 0.0);
        assert_eq!(est.lambda_minus, 0.0);
    }
}
