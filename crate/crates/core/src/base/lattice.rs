//! Exact 2×2 integer linear algebra used by the toral automorphism:
//! matrix powers, adjugates and the enumeration of the finite group
//! `M⁻¹ℤ² / ℤ²` through a two-dimensional Hermite normal form.

pub type IMat = [[i128; 2]; 2];

pub const IDENTITY: IMat = [[1, 0], [0, 1]];

pub fn mul(a: &IMat, b: &IMat) -> IMat {
    let mut out = [[0i128; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `a^n` by repeated squaring. Entries must stay within `i128`, which the
/// callers guarantee by bounding `n`.
pub fn pow(a: &IMat, n: u32) -> IMat {
    let mut result = IDENTITY;
    let mut base = *a;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result = mul(&result, &base);
        }
        e >>= 1;
        if e > 0 {
            base = mul(&base, &base);
        }
    }
    result
}

pub fn det(a: &IMat) -> i128 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn adjugate(a: &IMat) -> IMat {
    [[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]]
}

pub fn apply(a: &IMat, v: [i128; 2]) -> [i128; 2] {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

pub fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `a·b mod m` without overflow for `0 ≤ a, b < m < 2^126`.
pub fn mul_mod(a: i128, b: i128, m: i128) -> i128 {
    let a = a.rem_euclid(m);
    let b = b.rem_euclid(m);
    if let Some(p) = a.checked_mul(b) {
        return p % m;
    }
    // double-and-add fallback; only reached for huge moduli
    let mut result = 0i128;
    let mut x = a;
    let mut y = b;
    while y > 0 {
        if y & 1 == 1 {
            result = (result + x) % m;
        }
        x = (x * 2) % m;
        y >>= 1;
    }
    result
}

/// Lattice generated by `adj(M)ℤ² + |det M|ℤ²` in Hermite form
/// `{ i(α, β) + j(0, γ) }`. The quotient by `|det M|ℤ²` is exactly the set of
/// numerators `q` with `M q ≡ 0 (mod |det M|)`, i.e. the solutions of
/// `M x ∈ ℤ²` on the torus written as `x = q / |det M|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolutionLattice {
    pub modulus: i128,
    pub alpha: i128,
    pub beta: i128,
    pub gamma: i128,
}

impl SolutionLattice {
    pub fn new(m: &IMat) -> Option<Self> {
        let d = det(m).abs();
        if d == 0 {
            return None;
        }
        let adj = adjugate(m);
        let mut vs: Vec<[i128; 2]> = vec![
            [adj[0][0], adj[1][0]],
            [adj[0][1], adj[1][1]],
            [d, 0],
            [0, d],
        ];
        // Euclid on the first coordinate until a single vector carries it.
        let pivot = loop {
            let p = vs
                .iter()
                .enumerate()
                .filter(|(_, v)| v[0] != 0)
                .min_by_key(|(_, v)| v[0].abs())
                .map(|(i, _)| i)
                .expect("lattice contains (d, 0)");
            let pv = vs[p];
            let mut done = true;
            for (i, v) in vs.iter_mut().enumerate() {
                if i == p || v[0] == 0 {
                    continue;
                }
                let q = v[0].div_euclid(pv[0]);
                v[0] -= q * pv[0];
                v[1] -= q * pv[1];
                v[1] = v[1].rem_euclid(d);
                if v[0] != 0 {
                    done = false;
                }
            }
            if done {
                break p;
            }
        };
        let mut pv = vs[pivot];
        if pv[0] < 0 {
            pv = [-pv[0], -pv[1]];
        }
        let gamma = vs
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != pivot)
            .fold(0i128, |g, (_, v)| gcd(g, v[1]));
        let gamma = if gamma == 0 { d } else { gamma };
        let beta = pv[1].rem_euclid(gamma);
        Some(Self {
            modulus: d,
            alpha: pv[0],
            beta,
            gamma,
        })
    }

    /// Number of points of the quotient; equals `|det M|`.
    pub fn count(&self) -> i128 {
        (self.modulus / self.alpha) * (self.modulus / self.gamma)
    }

    /// All numerators `q ∈ [0, d)²`, ordered by `(i, j)`.
    pub fn numerators(&self) -> Vec<[i128; 2]> {
        let d = self.modulus;
        let ni = d / self.alpha;
        let nj = d / self.gamma;
        let mut out = Vec::with_capacity((ni * nj) as usize);
        for i in 0..ni {
            let x = i * self.alpha;
            let y0 = mul_mod(i, self.beta, d);
            for j in 0..nj {
                out.push([x, (y0 + j * self.gamma) % d]);
            }
        }
        out
    }
}
