//! Concrete transitive hyperbolic homeomorphisms: toral automorphisms and
//! subshifts of finite type, with their hyperbolicity constants, the
//! bracket, exact periodic points and a constructive closing lemma.

pub mod cat;
pub mod closing;
pub mod grid;
pub mod hash;
pub mod lattice;
pub mod leaf;
pub mod sft;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use cat::{CatMap, Rational2, TorusPoint, MAX_EXACT_CLOSING_PERIOD};
pub use closing::{fit_closing, harvest_near_returns, ClosingFit, HarvestedReturn};
pub use grid::{transitive_point, BaseGrid, DenseOrbitPlan};
pub use hash::NearReturnHash;
pub use leaf::{LeafPair, Side, LEAF_TOL};
pub use sft::{Sft, SftPoint};

use crate::error::{LabError, Result};

/// Constants of the hyperbolic structure. Both concrete bases have
/// constant rates, so `nu_s`, `nu_u` are numbers rather than functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityData {
    pub eps0: f64,
    pub delta0: f64,
    pub k0: f64,
    pub lambda: f64,
    pub nu_s: f64,
    pub nu_u: f64,
    /// Closing constant in the shadowing bounds.
    pub c: f64,
    /// Largest return distance accepted by the closing lemma.
    pub delta1: f64,
}

impl HyperbolicityData {
    /// Data for the snowflaked metric `d^α`: rates and constants raised to
    /// the power `α`, exponential rate scaled by `α`.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            eps0: self.eps0.powf(alpha),
            delta0: self.delta0.powf(alpha),
            k0: self.k0.powf(alpha),
            lambda: self.lambda * alpha,
            nu_s: self.nu_s.powf(alpha),
            nu_u: self.nu_u.powf(alpha),
            c: self.c.powf(alpha),
            delta1: self.delta1.powf(alpha),
        }
    }

    /// Non-strict contraction/expansion bounds `ν_s^n ≤ K₀e^{−λn}` and
    /// `ν_u^n ≥ K₀e^{λn}`, checked for `n ≤ n_check`.
    pub fn rates_consistent(&self, n_check: usize) -> bool {
        let slack = 1e-12;
        (1..=n_check).all(|n| {
            let n = n as f64;
            self.nu_s.powf(n) <= self.k0 * (-self.lambda * n).exp() * (1.0 + slack)
                && self.nu_u.powf(n) >= self.k0 * (self.lambda * n).exp() * (1.0 - slack)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BasePoint {
    Torus(TorusPoint),
    Symbolic(SftPoint),
}

impl BasePoint {
    pub fn torus(&self) -> &TorusPoint {
        match self {
            BasePoint::Torus(p) => p,
            BasePoint::Symbolic(_) => panic!("expected a torus point"),
        }
    }

    pub fn symbolic(&self) -> &SftPoint {
        match self {
            BasePoint::Symbolic(p) => p,
            BasePoint::Torus(_) => panic!("expected a symbolic point"),
        }
    }

    /// Compact human-readable label; torus coordinates or the window −4..=4.
    pub fn label(&self) -> String {
        match self {
            BasePoint::Torus(p) => match p.exact {
                Some(r) => format!("({}/{}, {}/{})", r.num[0], r.den, r.num[1], r.den),
                None => format!("({:.12}, {:.12})", p.coords[0], p.coords[1]),
            },
            BasePoint::Symbolic(p) => {
                let w: String = p.window(-4, 4).iter().map(|s| s.to_string()).collect();
                format!("{}.{}", &w[..4], &w[4..])
            }
        }
    }

    /// Numeric coordinates for tables: torus coordinates, or the symbols on
    /// the window −4..=4.
    pub fn coordinates(&self) -> Vec<f64> {
        match self {
            BasePoint::Torus(p) => p.coords.to_vec(),
            BasePoint::Symbolic(p) => p.window(-4, 4).iter().map(|&s| s as f64).collect(),
        }
    }
}

/// Output of a system-specific closing step, before the bound audit.
#[derive(Clone, Debug)]
pub struct ClosingRecord<P> {
    pub p: P,
    pub y: P,
    pub return_distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub i: usize,
    /// `d(fⁱx, fⁱp)`, `d(fⁱp, fⁱy)`, `d(fⁱx, fⁱy)`.
    pub distances: [f64; 3],
    pub bounds: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosingResult {
    pub p: BasePoint,
    pub y: BasePoint,
    pub n: usize,
    pub c: f64,
    pub lambda: f64,
    pub return_distance: f64,
    pub bound_trace: Vec<BoundRow>,
}

impl ClosingResult {
    /// Exponent variable of each bound at iterate `i`.
    pub fn exponents(&self, i: usize) -> [f64; 3] {
        let n = self.n;
        [i.min(n - i) as f64, i as f64, (n - i) as f64]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum BaseSystem {
    Cat(CatMap),
    Shift(Sft),
}

impl BaseSystem {
    pub fn cat(matrix: [[i64; 2]; 2]) -> Result<Self> {
        CatMap::new(matrix).map(BaseSystem::Cat)
    }

    pub fn full_shift(k: usize, theta: f64) -> Result<Self> {
        Sft::full_shift(k, theta).map(BaseSystem::Shift)
    }

    pub fn sft(transition: Vec<Vec<u8>>, theta: f64) -> Result<Self> {
        Sft::new(transition, theta).map(BaseSystem::Shift)
    }

    pub fn hyp(&self) -> &HyperbolicityData {
        match self {
            BaseSystem::Cat(c) => &c.hyp,
            BaseSystem::Shift(s) => &s.hyp,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BaseSystem::Cat(_) => "cat",
            BaseSystem::Shift(_) => "sft",
        }
    }

    pub fn n_max(&self) -> usize {
        match self {
            BaseSystem::Cat(c) => c.n_max,
            BaseSystem::Shift(s) => s.n_max,
        }
    }

    pub fn set_limits(&mut self, n_max: usize, cap: usize) {
        match self {
            BaseSystem::Cat(c) => {
                c.n_max = n_max;
                c.enumeration_cap = cap;
            }
            BaseSystem::Shift(s) => {
                s.n_max = n_max;
                s.enumeration_cap = cap;
            }
        }
    }

    /// Upper bound for distances in the base.
    pub fn diameter(&self) -> f64 {
        match self {
            BaseSystem::Cat(_) => std::f64::consts::FRAC_1_SQRT_2,
            BaseSystem::Shift(_) => 1.0,
        }
    }

    pub fn step(&self, x: &BasePoint, k: i64) -> BasePoint {
        match (self, x) {
            (BaseSystem::Cat(c), BasePoint::Torus(p)) => BasePoint::Torus(c.step(p, k)),
            (BaseSystem::Shift(s), BasePoint::Symbolic(p)) => BasePoint::Symbolic(s.step(p, k)),
            _ => panic!("base point does not belong to this system"),
        }
    }

    pub fn distance(&self, x: &BasePoint, y: &BasePoint) -> f64 {
        match (self, x, y) {
            (BaseSystem::Cat(c), BasePoint::Torus(a), BasePoint::Torus(b)) => c.distance(a, b),
            (BaseSystem::Shift(s), BasePoint::Symbolic(a), BasePoint::Symbolic(b)) => {
                s.distance(a, b)
            }
            _ => panic!("base points do not belong to this system"),
        }
    }

    /// `d(x, y)^α`.
    pub fn distance_alpha(&self, x: &BasePoint, y: &BasePoint, alpha: f64) -> f64 {
        self.distance(x, y).powf(alpha)
    }

    pub fn bracket(&self, x: &BasePoint, y: &BasePoint) -> Result<BasePoint> {
        match (self, x, y) {
            (BaseSystem::Cat(c), BasePoint::Torus(a), BasePoint::Torus(b)) => {
                c.bracket(a, b).map(BasePoint::Torus)
            }
            (BaseSystem::Shift(s), BasePoint::Symbolic(a), BasePoint::Symbolic(b)) => {
                s.bracket(a, b).map(BasePoint::Symbolic)
            }
            _ => panic!("base points do not belong to this system"),
        }
    }

    pub fn periodic_points(&self, n: usize) -> Result<Vec<BasePoint>> {
        match self {
            BaseSystem::Cat(c) => Ok(c
                .periodic_points(n)?
                .into_iter()
                .map(BasePoint::Torus)
                .collect()),
            BaseSystem::Shift(s) => Ok(s
                .periodic_points(n)?
                .into_iter()
                .map(BasePoint::Symbolic)
                .collect()),
        }
    }

    pub fn periodic_count(&self, n: usize) -> Result<u128> {
        match self {
            BaseSystem::Cat(c) => c.periodic_count(n),
            BaseSystem::Shift(s) => Ok(s.periodic_count(n)),
        }
    }

    /// Whether `fⁿx = x` exactly (symbolically, or in rational arithmetic).
    pub fn is_periodic(&self, x: &BasePoint, n: usize) -> bool {
        match (self, x) {
            (BaseSystem::Cat(c), BasePoint::Torus(p)) => c.is_fixed(p, n),
            (BaseSystem::Shift(s), BasePoint::Symbolic(p)) => s.step(p, n as i64) == *p,
            _ => false,
        }
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> BasePoint {
        match self {
            BaseSystem::Cat(_) => BasePoint::Torus(TorusPoint::new(rng.gen(), rng.gen())),
            BaseSystem::Shift(s) => BasePoint::Symbolic(s.random_point(rng, 4096)),
        }
    }

    /// Random start for an orbit segment of `steps` iterates in either
    /// direction. Shift points carry a fresh walk over the whole segment
    /// instead of running into their periodic tails.
    pub fn random_orbit_start<R: Rng + ?Sized>(&self, rng: &mut R, steps: usize) -> BasePoint {
        match self {
            BaseSystem::Shift(s) => BasePoint::Symbolic(s.random_point(rng, 2 * steps + 4096)),
            BaseSystem::Cat(_) => self.random_point(rng),
        }
    }

    /// Closing lemma: periodic point `p ∈ Fix(fⁿ)` and `y = [x, p]` for a
    /// near-return `d(x, fⁿx) < δ₁`, with every shadowing bound audited.
    pub fn anosov_closing(&self, x: &BasePoint, n: usize) -> Result<ClosingResult> {
        let (p, y, d) = match (self, x) {
            (BaseSystem::Cat(c), BasePoint::Torus(t)) => {
                let r = c.close(t, n)?;
                (
                    BasePoint::Torus(r.p),
                    BasePoint::Torus(r.y),
                    r.return_distance,
                )
            }
            (BaseSystem::Shift(s), BasePoint::Symbolic(t)) => {
                let r = s.close(t, n)?;
                (
                    BasePoint::Symbolic(r.p),
                    BasePoint::Symbolic(r.y),
                    r.return_distance,
                )
            }
            _ => panic!("base point does not belong to this system"),
        };
        let hyp = self.hyp();
        let (c, lambda) = (hyp.c, hyp.lambda);
        let mut trace = Vec::with_capacity(n + 1);
        let (mut xi, mut pi, mut yi) = (x.clone(), p.clone(), y.clone());
        let mut ok = true;
        for i in 0..=n {
            let distances = [
                self.distance(&xi, &pi),
                self.distance(&pi, &yi),
                self.distance(&xi, &yi),
            ];
            let m = [i.min(n - i) as f64, i as f64, (n - i) as f64];
            let bounds = m.map(|e| c * d * (-lambda * e).exp());
            for k in 0..3 {
                if distances[k] > bounds[k] * (1.0 + 1e-9) + 1e-12 {
                    ok = false;
                }
            }
            trace.push(BoundRow {
                i,
                distances,
                bounds,
            });
            xi = self.step(&xi, 1);
            pi = self.step(&pi, 1);
            yi = self.step(&yi, 1);
        }
        if !ok {
            return Err(LabError::Closing(
                "no candidate periodic point satisfies the shadowing bounds".into(),
            ));
        }
        Ok(ClosingResult {
            p,
            y,
            n,
            c,
            lambda,
            return_distance: d,
            bound_trace: trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_hold_non_strictly() {
        let cat = BaseSystem::cat([[2, 1], [1, 1]]).unwrap();
        assert!(cat.hyp().rates_consistent(50));
        let sft = BaseSystem::full_shift(2, 0.5).unwrap();
        assert!(sft.hyp().rates_consistent(50));
        let snow = sft.hyp().with_alpha(0.5);
        assert!((snow.nu_s - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(snow.rates_consistent(50));
    }

    #[test]
    fn closing_trace_on_periodic_point() {
        let cat = BaseSystem::cat([[2, 1], [1, 1]]).unwrap();
        let p = &cat.periodic_points(4).unwrap()[7];
        let r = cat.anosov_closing(p, 4).unwrap();
        assert_eq!(&r.p, p);
        assert!(r.bound_trace.iter().all(|row| row.distances == [0.0; 3]));
    }
}
