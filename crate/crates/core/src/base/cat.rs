//! Hyperbolic toral automorphisms of ℝ²/ℤ².
//!
//! Points carry optional exact rational coordinates so that periodic
//! points and closing outputs are exact fixed points of `f^n`.

use serde::{Deserialize, Serialize};

use super::lattice::{self, IMat, SolutionLattice};
use super::{ClosingRecord, HyperbolicityData};
use crate::error::{LabError, Result};

/// Points closer than this are considered equal on the torus.
pub const TORUS_TOLERANCE: f64 = 1e-9;

/// Longest period for which the closing lemma is solved exactly.
pub const MAX_EXACT_CLOSING_PERIOD: usize = 30;

/// Rational point `num / den` of the torus, kept in lowest terms with
/// `0 ≤ num < den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rational2 {
    pub num: [i128; 2],
    pub den: i128,
}

impl Rational2 {
    pub fn new(num: [i128; 2], den: i128) -> Self {
        assert!(den > 0, "denominator must be positive");
        let n0 = num[0].rem_euclid(den);
        let n1 = num[1].rem_euclid(den);
        let g = lattice::gcd(lattice::gcd(n0, n1), den).max(1);
        Self {
            num: [n0 / g, n1 / g],
            den: den / g,
        }
    }

    pub fn to_f64(&self) -> [f64; 2] {
        [
            self.num[0] as f64 / self.den as f64,
            self.num[1] as f64 / self.den as f64,
        ]
    }

    fn apply(&self, m: &IMat) -> Self {
        let d = self.den;
        let x =
            lattice::mul_mod(m[0][0], self.num[0], d) + lattice::mul_mod(m[0][1], self.num[1], d);
        let y =
            lattice::mul_mod(m[1][0], self.num[0], d) + lattice::mul_mod(m[1][1], self.num[1], d);
        Self {
            num: [x % d, y % d],
            den: d,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TorusPoint {
    pub coords: [f64; 2],
    pub exact: Option<Rational2>,
}

impl TorusPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            coords: [frac(x), frac(y)],
            exact: None,
        }
    }

    pub fn from_rational(r: Rational2) -> Self {
        Self {
            coords: r.to_f64(),
            exact: Some(r),
        }
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }
}

impl PartialEq for TorusPoint {
    fn eq(&self, other: &Self) -> bool {
        match (self.exact, other.exact) {
            (Some(a), Some(b)) => a == b,
            _ => torus_distance(self.coords, other.coords) < TORUS_TOLERANCE,
        }
    }
}

/// Fractional part in `[0, 1)`.
pub fn frac(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Representative of `d mod 1` in `[-1/2, 1/2]`.
pub fn wrap(d: f64) -> f64 {
    d - d.round()
}

pub fn torus_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = wrap(a[0] - b[0]);
    let dy = wrap(a[1] - b[1]);
    dx.hypot(dy)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CatMap {
    pub matrix: [[i64; 2]; 2],
    inverse: [[i64; 2]; 2],
    pub det: i64,
    /// Signed eigenvalues.
    pub mu_u: f64,
    pub mu_s: f64,
    pub lambda_u: f64,
    pub lambda_s: f64,
    pub e_u: [f64; 2],
    pub e_s: [f64; 2],
    /// Inverse of the eigenvector matrix `[e_u e_s]`.
    chart_inv: [[f64; 2]; 2],
    pub sin_angle: f64,
    pub hyp: HyperbolicityData,
    pub n_max: usize,
    pub enumeration_cap: usize,
}

impl CatMap {
    pub fn new(matrix: [[i64; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = matrix;
        let det = a * d - b * c;
        let trace = a + d;
        if det.abs() != 1 {
            return Err(LabError::InvalidBase(format!(
                "not invertible over the integers: det = {det}"
            )));
        }
        if trace.abs() <= 2 {
            return Err(LabError::InvalidBase(format!(
                "not hyperbolic: |trace| ≤ 2 (trace = {trace})"
            )));
        }
        let (t, dt) = (trace as f64, det as f64);
        let disc = (t * t - 4.0 * dt).sqrt();
        let r1 = 0.5 * (t + disc);
        let r2 = 0.5 * (t - disc);
        let (mu_u, mu_s) = if r1.abs() > r2.abs() {
            (r1, r2)
        } else {
            (r2, r1)
        };
        let eig = |mu: f64| -> [f64; 2] {
            let v = if b != 0 {
                [b as f64, mu - a as f64]
            } else {
                [mu - d as f64, c as f64]
            };
            let n = v[0].hypot(v[1]);
            let mut u = [v[0] / n, v[1] / n];
            if u[0] < 0.0 || (u[0] == 0.0 && u[1] < 0.0) {
                u = [-u[0], -u[1]];
            }
            u
        };
        let e_u = eig(mu_u);
        let e_s = eig(mu_s);
        let cross = e_u[0] * e_s[1] - e_u[1] * e_s[0];
        let chart_inv = [
            [e_s[1] / cross, -e_s[0] / cross],
            [-e_u[1] / cross, e_u[0] / cross],
        ];
        let sin_angle = cross.abs();
        let lambda_u = mu_u.abs();
        let lambda_s = mu_s.abs();
        // eigen-chart boxes of half-width 1/4 are injective
        let margin = 0.25;
        let eps0 = margin / 2.0;
        let delta0 = margin / 4.0 * sin_angle;
        let c_close = 2.0 / sin_angle * lambda_u / (lambda_u - 1.0);
        let hyp = HyperbolicityData {
            eps0,
            delta0,
            k0: 1.0,
            lambda: lambda_u.ln(),
            nu_s: lambda_s,
            nu_u: lambda_u,
            c: c_close,
            delta1: delta0 / (2.0 * c_close),
        };
        Ok(Self {
            matrix,
            inverse: [[d * det, -b * det], [-c * det, a * det]],
            det,
            mu_u,
            mu_s,
            lambda_u,
            lambda_s,
            e_u,
            e_s,
            chart_inv,
            sin_angle,
            hyp,
            n_max: 12,
            enumeration_cap: 1_000_000,
        })
    }

    fn imat(m: &[[i64; 2]; 2]) -> IMat {
        [
            [m[0][0] as i128, m[0][1] as i128],
            [m[1][0] as i128, m[1][1] as i128],
        ]
    }

    pub fn matrix_i128(&self) -> IMat {
        Self::imat(&self.matrix)
    }

    /// Eigen-coordinates `(a, b)` of a vector `v = a e_u + b e_s`.
    pub fn eigen_coords(&self, v: [f64; 2]) -> [f64; 2] {
        let m = &self.chart_inv;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    fn apply_f64(m: &[[i64; 2]; 2], p: [f64; 2]) -> [f64; 2] {
        [
            frac(m[0][0] as f64 * p[0] + m[0][1] as f64 * p[1]),
            frac(m[1][0] as f64 * p[0] + m[1][1] as f64 * p[1]),
        ]
    }

    pub fn step(&self, x: &TorusPoint, k: i64) -> TorusPoint {
        let (m, n) = if k >= 0 {
            (&self.matrix, k as u64)
        } else {
            (&self.inverse, k.unsigned_abs())
        };
        match x.exact {
            Some(r) => {
                let mi = Self::imat(m);
                let mut r = r;
                for _ in 0..n {
                    r = r.apply(&mi);
                }
                TorusPoint::from_rational(r)
            }
            None => {
                let mut p = x.coords;
                for _ in 0..n {
                    p = Self::apply_f64(m, p);
                }
                TorusPoint {
                    coords: p,
                    exact: None,
                }
            }
        }
    }

    pub fn distance(&self, x: &TorusPoint, y: &TorusPoint) -> f64 {
        if let (Some(a), Some(b)) = (x.exact, y.exact) {
            if a == b {
                return 0.0;
            }
        }
        torus_distance(x.coords, y.coords)
    }

    pub fn bracket(&self, x: &TorusPoint, y: &TorusPoint) -> Result<TorusPoint> {
        let d = self.distance(x, y);
        if d > self.hyp.delta0 {
            return Err(LabError::Bracket(format!(
                "d(x, y) = {d:.3e} exceeds δ₀ = {:.3e}",
                self.hyp.delta0
            )));
        }
        let v = [
            wrap(y.coords[0] - x.coords[0]),
            wrap(y.coords[1] - x.coords[1]),
        ];
        let [a, _] = self.eigen_coords(v);
        Ok(TorusPoint::new(
            x.coords[0] + a * self.e_u[0],
            x.coords[1] + a * self.e_u[1],
        ))
    }

    /// Exact enumeration of `Fix(f^n)`.
    pub fn periodic_points(&self, n: usize) -> Result<Vec<TorusPoint>> {
        if n == 0 || n > self.n_max {
            return Err(LabError::Precondition(format!(
                "period {n} outside 1..={}",
                self.n_max
            )));
        }
        let lat = self.fixed_lattice(n)?;
        if lat.modulus as u128 > self.enumeration_cap as u128 {
            return Err(LabError::EnumerationCap {
                n,
                count: lat.modulus as u128,
                cap: self.enumeration_cap,
            });
        }
        Ok(lat
            .numerators()
            .into_iter()
            .map(|q| TorusPoint::from_rational(Rational2::new(q, lat.modulus)))
            .collect())
    }

    /// `|det(A^n − I)|`, the number of points of period dividing `n`.
    pub fn periodic_count(&self, n: usize) -> Result<u128> {
        let m = self.power_minus_identity(n)?;
        Ok(lattice::det(&m).unsigned_abs())
    }

    fn power_minus_identity(&self, n: usize) -> Result<IMat> {
        if n > 60 {
            return Err(LabError::Precondition(format!(
                "period {n} too large for exact integer arithmetic"
            )));
        }
        let p = lattice::pow(&self.matrix_i128(), n as u32);
        Ok([[p[0][0] - 1, p[0][1]], [p[1][0], p[1][1] - 1]])
    }

    fn fixed_lattice(&self, n: usize) -> Result<SolutionLattice> {
        let m = self.power_minus_identity(n)?;
        SolutionLattice::new(&m).ok_or_else(|| LabError::InvalidBase("A^n − I is singular".into()))
    }

    /// Periodic point shadowing the near-return `x, f^n x`, solved exactly:
    /// with `w` the wrapped return displacement, `p̃ = x̃ − (A^n − I)⁻¹ w`.
    pub fn close(&self, x: &TorusPoint, n: usize) -> Result<ClosingRecord<TorusPoint>> {
        if n == 0 {
            return Err(LabError::Precondition("period must be positive".into()));
        }
        if n > MAX_EXACT_CLOSING_PERIOD {
            return Err(LabError::Precondition(format!(
                "period {n} exceeds the exact closing limit {MAX_EXACT_CLOSING_PERIOD}"
            )));
        }
        let fnx = self.step(x, n as i64);
        let d = self.distance(x, &fnx);
        if d >= self.hyp.delta1 {
            return Err(LabError::Precondition(format!(
                "return distance {d:.3e} is not below δ₁ = {:.3e}",
                self.hyp.delta1
            )));
        }
        if x.exact.is_some() && fnx == *x {
            return Ok(ClosingRecord {
                p: *x,
                y: *x,
                return_distance: 0.0,
            });
        }
        let m = self.power_minus_identity(n)?;
        let det = lattice::det(&m);
        let p = {
            let w = [
                wrap(fnx.coords[0] - x.coords[0]),
                wrap(fnx.coords[1] - x.coords[1]),
            ];
            let mx = [
                m[0][0] as f64 * x.coords[0] + m[0][1] as f64 * x.coords[1],
                m[1][0] as f64 * x.coords[0] + m[1][1] as f64 * x.coords[1],
            ];
            let k = [
                (mx[0] - w[0]).round() as i128,
                (mx[1] - w[1]).round() as i128,
            ];
            let adj = lattice::adjugate(&m);
            let modulus = det.abs();
            let sign = det.signum();
            let q0 = lattice::mul_mod(adj[0][0], k[0], modulus)
                + lattice::mul_mod(adj[0][1], k[1], modulus);
            let q1 = lattice::mul_mod(adj[1][0], k[0], modulus)
                + lattice::mul_mod(adj[1][1], k[1], modulus);
            TorusPoint::from_rational(Rational2::new([sign * q0, sign * q1], modulus))
        };
        let y = self.bracket(x, &p)?;
        Ok(ClosingRecord {
            p,
            y,
            return_distance: d,
        })
    }

    /// Whether `f^n x = x`, exactly for rational points.
    pub fn is_fixed(&self, x: &TorusPoint, n: usize) -> bool {
        match x.exact {
            Some(_) => self.step(x, n as i64) == *x,
            None => self.distance(x, &self.step(x, n as i64)) < TORUS_TOLERANCE,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat() -> CatMap {
        CatMap::new([[2, 1], [1, 1]]).unwrap()
    }

    #[test]
    fn eigen_data() {
        let c = cat();
        let golden = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((c.lambda_u - golden).abs() < 1e-14);
        assert!((c.lambda_u * c.lambda_s - 1.0).abs() < 1e-14);
        assert!((c.sin_angle - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_step_quarter_point() {
        let c = cat();
        let x = TorusPoint::new(0.25, 0.25);
        let y = c.step(&x, 1);
        assert!(torus_distance(y.coords, [0.75, 0.5]) < 1e-15);
        let r = TorusPoint::from_rational(Rational2::new([1, 1], 4));
        assert_eq!(c.step(&r, 1).exact, Some(Rational2::new([3, 2], 4)));
    }

    #[test]
    fn origin_is_fixed() {
        let c = cat();
        let o = TorusPoint::from_rational(Rational2::new([0, 0], 1));
        assert_eq!(c.step(&o, 5), o);
    }

    #[test]
    fn rejects_parabolic() {
        let err = CatMap::new([[1, 1], [0, 1]]).unwrap_err();
        assert!(err.to_string().contains("not hyperbolic"));
    }

    #[test]
    fn bracket_of_nearby_points() {
        let c = cat();
        let x = TorusPoint::new(0.0, 0.0);
        let y = TorusPoint::new(0.01, 0.01);
        let z = c.bracket(&x, &y).unwrap();
        // z lies on the unstable line of x and the stable line of y
        let vx = [
            wrap(z.coords[0] - x.coords[0]),
            wrap(z.coords[1] - x.coords[1]),
        ];
        let vy = [
            wrap(z.coords[0] - y.coords[0]),
            wrap(z.coords[1] - y.coords[1]),
        ];
        assert!(c.eigen_coords(vx)[1].abs() < 1e-14);
        assert!(c.eigen_coords(vy)[0].abs() < 1e-14);
        for k in 0..20 {
            assert!(c.distance(&c.step(&z, k), &c.step(&y, k)) <= c.hyp.eps0);
            assert!(c.distance(&c.step(&z, -k), &c.step(&x, -k)) <= c.hyp.eps0);
        }
    }

    #[test]
    fn closing_exact_periodic_input() {
        let c = cat();
        for p in c.periodic_points(3).unwrap() {
            let rec = c.close(&p, 3).unwrap();
            assert_eq!(rec.p, p);
            assert_eq!(rec.y, p);
        }
    }
}
