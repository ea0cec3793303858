//! Two-sided subshifts of finite type with the θ-metric.
//!
//! A point is stored as `…LLL C RRR…`: a left period repeated to −∞, a
//! finite center and a right period repeated to +∞. The shift only moves
//! the offset, so orbits of a point share the same symbol storage.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClosingRecord, HyperbolicityData};
use crate::error::{LabError, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SftPoint {
    pub left: Arc<[u8]>,
    pub center: Arc<[u8]>,
    pub right: Arc<[u8]>,
    /// Coordinate `i` is stored at sequence index `i + offset`; the center
    /// occupies sequence indices `0..center.len()`.
    pub offset: i64,
}

impl SftPoint {
    pub fn new(left: Vec<u8>, center: Vec<u8>, right: Vec<u8>, offset: i64) -> Self {
        assert!(
            !left.is_empty() && !right.is_empty(),
            "periods must be nonempty"
        );
        Self {
            left: left.into(),
            center: center.into(),
            right: right.into(),
            offset,
        }
    }

    /// The periodic point `…www.www…` with `x_0 = w[0]`.
    pub fn periodic(word: &[u8]) -> Self {
        Self::new(word.to_vec(), Vec::new(), word.to_vec(), 0)
    }

    pub fn symbol(&self, i: i64) -> u8 {
        let j = i + self.offset;
        let c = self.center.len() as i64;
        if j >= 0 && j < c {
            self.center[j as usize]
        } else if j >= c {
            let r = self.right.len() as i64;
            self.right[(j - c).rem_euclid(r) as usize]
        } else {
            let l = self.left.len() as i64;
            self.left[(l - 1 - (-j - 1).rem_euclid(l)) as usize]
        }
    }

    /// Symbols on the coordinate window `lo..=hi`.
    pub fn window(&self, lo: i64, hi: i64) -> Vec<u8> {
        let mut out = Vec::with_capacity((hi - lo + 1).max(0) as usize);
        let c = self.center.len() as i64;
        let mut i = lo;
        while i <= hi {
            let j = i + self.offset;
            if (0..c).contains(&j) {
                let end = (hi + self.offset).min(c - 1);
                out.extend_from_slice(&self.center[j as usize..=end as usize]);
                i = end - self.offset + 1;
            } else {
                out.push(self.symbol(i));
                i += 1;
            }
        }
        out
    }

    pub fn shifted(&self, k: i64) -> Self {
        let mut out = self.clone();
        out.offset += k;
        out
    }

    /// Number of coordinates beyond which both tails are periodic.
    fn span(&self) -> i64 {
        self.offset.abs() + self.center.len() as i64
    }

    /// Canonical representative: primitive periods, maximally absorbed
    /// center, and offset reduced modulo the period for periodic points.
    pub fn canonical(&self) -> Self {
        let mut left = primitive(&self.left);
        let mut right = primitive(&self.right);
        let mut center: Vec<u8> = self.center.to_vec();
        let mut offset = self.offset;
        while let Some(&last) = center.last() {
            if last != right[right.len() - 1] {
                break;
            }
            center.pop();
            right.rotate_right(1);
        }
        let l = left.len();
        let absorbed = center
            .iter()
            .enumerate()
            .take_while(|&(i, &s)| s == left[i % l])
            .count();
        center.drain(..absorbed);
        left.rotate_left(absorbed % l);
        offset -= absorbed as i64;
        if center.is_empty() && left == right {
            let p = right.len() as i64;
            right.rotate_left(offset.rem_euclid(p) as usize);
            left = right.clone();
            offset = 0;
        }
        Self::new(left, center, right, offset)
    }

    /// Smallest `n ≥ 1` with `σⁿ x = x`, if the point is periodic.
    pub fn period(&self) -> Option<usize> {
        let c = self.canonical();
        (c.center.is_empty() && c.left == c.right).then(|| c.right.len())
    }
}

impl PartialEq for SftPoint {
    fn eq(&self, other: &Self) -> bool {
        let a = self.canonical();
        let b = other.canonical();
        a.left == b.left && a.right == b.right && a.center == b.center && a.offset == b.offset
    }
}

fn primitive(word: &[u8]) -> Vec<u8> {
    let n = word.len();
    for p in 1..=n {
        if n.is_multiple_of(p) && (p..n).all(|i| word[i] == word[i - p]) {
            return word[..p].to_vec();
        }
    }
    word.to_vec()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sft {
    pub alphabet_size: usize,
    pub transition: Vec<Vec<bool>>,
    pub theta: f64,
    pub hyp: HyperbolicityData,
    pub n_max: usize,
    pub enumeration_cap: usize,
    /// Shortest cycle `s → … → s` through each symbol, listed from `s`.
    cycles: Vec<Vec<u8>>,
}

impl Sft {
    pub fn full_shift(alphabet_size: usize, theta: f64) -> Result<Self> {
        Self::new(vec![vec![1; alphabet_size]; alphabet_size], theta)
    }

    pub fn new(transition: Vec<Vec<u8>>, theta: f64) -> Result<Self> {
        let k = transition.len();
        if k == 0 || k > 255 {
            return Err(LabError::InvalidBase(format!(
                "alphabet size {k} outside 1..=255"
            )));
        }
        if transition.iter().any(|row| row.len() != k) {
            return Err(LabError::InvalidBase(
                "transition matrix is not square".into(),
            ));
        }
        if transition.iter().flatten().any(|&v| v > 1) {
            return Err(LabError::InvalidBase(
                "transition matrix must be 0/1".into(),
            ));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(LabError::InvalidBase(format!(
                "metric base θ = {theta} outside (0,1)"
            )));
        }
        let t: Vec<Vec<bool>> = transition
            .iter()
            .map(|row| row.iter().map(|&v| v == 1).collect())
            .collect();
        if !is_primitive(&t) {
            return Err(LabError::InvalidBase(
                "transition matrix is reducible or periodic (not primitive)".into(),
            ));
        }
        let cycles = (0..k).map(|s| shortest_cycle(&t, s as u8)).collect();
        let hyp = HyperbolicityData {
            eps0: theta,
            delta0: theta,
            k0: 1.0,
            lambda: (1.0 / theta).ln(),
            nu_s: theta,
            nu_u: 1.0 / theta,
            c: 1.0 / theta,
            delta1: theta * theta / 2.0,
        };
        Ok(Self {
            alphabet_size: k,
            transition: t,
            theta,
            hyp,
            n_max: 12,
            enumeration_cap: 1_000_000,
            cycles,
        })
    }

    pub fn admissible(&self, a: u8, b: u8) -> bool {
        self.transition[a as usize][b as usize]
    }

    pub fn word_admissible(&self, w: &[u8]) -> bool {
        w.iter().all(|&s| (s as usize) < self.alphabet_size)
            && w.windows(2).all(|p| self.admissible(p[0], p[1]))
    }

    /// Whether every junction of the representation is admissible.
    pub fn point_admissible(&self, x: &SftPoint) -> bool {
        let l = &x.left;
        let r = &x.right;
        let c = &x.center;
        let mut seq: Vec<u8> = Vec::with_capacity(2 * l.len() + c.len() + 2 * r.len());
        seq.extend_from_slice(l);
        seq.extend_from_slice(l);
        seq.extend_from_slice(c);
        seq.extend_from_slice(r);
        seq.extend_from_slice(r);
        self.word_admissible(&seq)
    }

    pub fn step(&self, x: &SftPoint, k: i64) -> SftPoint {
        x.shifted(k)
    }

    /// `θ^{n*}` where `n*` is the largest radius on which the points agree,
    /// and `1` when they differ at a coordinate of modulus ≤ 1.
    pub fn distance(&self, x: &SftPoint, y: &SftPoint) -> f64 {
        match first_difference(x, y) {
            None => 0.0,
            Some(n) => self.theta.powi((n.max(1) - 1) as i32),
        }
    }

    /// Splice of `x` on negative coordinates with `y` on the rest.
    pub fn bracket(&self, x: &SftPoint, y: &SftPoint) -> Result<SftPoint> {
        let d = self.distance(x, y);
        if d > self.hyp.delta0 {
            return Err(LabError::Bracket(format!(
                "d(x, y) = {d:.3e} exceeds δ₀ = {:.3e}",
                self.hyp.delta0
            )));
        }
        if !self.admissible(x.symbol(-1), y.symbol(0)) {
            return Err(LabError::Bracket(
                "splice transition is inadmissible".into(),
            ));
        }
        Ok(splice(x, y))
    }

    /// Number of points of `Fix(σⁿ)`, the trace of the `n`-th power.
    pub fn periodic_count(&self, n: usize) -> u128 {
        let k = self.alphabet_size;
        let mut m: Vec<Vec<u128>> = (0..k)
            .map(|i| (0..k).map(|j| (i == j) as u128).collect())
            .collect();
        for _ in 0..n {
            let mut next = vec![vec![0u128; k]; k];
            for i in 0..k {
                for l in 0..k {
                    if m[i][l] == 0 {
                        continue;
                    }
                    for j in 0..k {
                        if self.transition[l][j] {
                            next[i][j] = next[i][j].saturating_add(m[i][l]);
                        }
                    }
                }
            }
            m = next;
        }
        (0..k).fold(0u128, |acc, i| acc.saturating_add(m[i][i]))
    }

    /// All admissible cyclic words of length `n`, as periodic points.
    pub fn periodic_points(&self, n: usize) -> Result<Vec<SftPoint>> {
        if n == 0 || n > self.n_max {
            return Err(LabError::Precondition(format!(
                "period {n} outside 1..={}",
                self.n_max
            )));
        }
        let count = self.periodic_count(n);
        if count > self.enumeration_cap as u128 {
            return Err(LabError::EnumerationCap {
                n,
                count,
                cap: self.enumeration_cap,
            });
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut word = Vec::with_capacity(n);
        self.cyclic_words(n, &mut word, &mut out);
        Ok(out)
    }

    fn cyclic_words(&self, n: usize, word: &mut Vec<u8>, out: &mut Vec<SftPoint>) {
        if word.len() == n {
            if self.admissible(word[n - 1], word[0]) {
                out.push(SftPoint::periodic(word));
            }
            return;
        }
        for s in 0..self.alphabet_size as u8 {
            if word.last().is_none_or(|&l| self.admissible(l, s)) {
                word.push(s);
                self.cyclic_words(n, word, out);
                word.pop();
            }
        }
    }

    /// All admissible words of length `len`, in lexicographic order.
    pub fn admissible_words(&self, len: usize) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        let mut word = Vec::with_capacity(len);
        self.words_rec(len, &mut word, &mut out);
        out
    }

    fn words_rec(&self, len: usize, word: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if word.len() == len {
            out.push(word.clone());
            return;
        }
        for s in 0..self.alphabet_size as u8 {
            if word.last().is_none_or(|&l| self.admissible(l, s)) {
                word.push(s);
                self.words_rec(len, word, out);
                word.pop();
            }
        }
    }

    /// Shortest admissible path strictly between `a` and `b`, so that
    /// `a, path…, b` is admissible.
    pub fn connector(&self, a: u8, b: u8) -> Vec<u8> {
        if self.admissible(a, b) {
            return Vec::new();
        }
        let k = self.alphabet_size;
        let mut prev = vec![usize::MAX; k];
        let mut queue = std::collections::VecDeque::new();
        for s in 0..k {
            if self.transition[a as usize][s] {
                prev[s] = k;
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            if self.transition[s][b as usize] {
                let mut path = vec![s as u8];
                let mut cur = s;
                while prev[cur] != k {
                    cur = prev[cur];
                    path.push(cur as u8);
                }
                path.reverse();
                return path;
            }
            for t in 0..k {
                if self.transition[s][t] && prev[t] == usize::MAX {
                    prev[t] = s;
                    queue.push_back(t);
                }
            }
        }
        unreachable!("irreducible transition matrix connects every pair")
    }

    /// Point whose coordinates `0..center.len()` are `center`, continued by
    /// the shortest cycles through its end symbols.
    pub fn point_with_center(&self, center: &[u8], offset: i64) -> SftPoint {
        assert!(!center.is_empty());
        let first = center[0];
        let last = center[center.len() - 1];
        let left = self.cycles[first as usize].clone();
        let mut right = self.cycles[last as usize].clone();
        right.rotate_left(1);
        SftPoint::new(left, center.to_vec(), right, offset)
    }

    /// Random admissible point: a uniform walk of `len` symbols around the
    /// origin, closed off by cycles.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> SftPoint {
        let len = len.max(1);
        let mut word = Vec::with_capacity(len);
        word.push(rng.gen_range(0..self.alphabet_size) as u8);
        while word.len() < len {
            let last = word[word.len() - 1] as usize;
            let choices: Vec<u8> = (0..self.alphabet_size)
                .filter(|&s| self.transition[last][s])
                .map(|s| s as u8)
                .collect();
            word.push(choices[rng.gen_range(0..choices.len())]);
        }
        self.point_with_center(&word, (len / 2) as i64)
    }

    /// Periodic point shadowing `x, σⁿx`: the periodic extension of
    /// `x_0 … x_{n−1}`.
    pub fn close(&self, x: &SftPoint, n: usize) -> Result<ClosingRecord<SftPoint>> {
        if n == 0 {
            return Err(LabError::Precondition("period must be positive".into()));
        }
        let fnx = x.shifted(n as i64);
        let d = self.distance(x, &fnx);
        if d >= self.hyp.delta1 {
            return Err(LabError::Precondition(format!(
                "return distance {d:.3e} is not below δ₁ = {:.3e}",
                self.hyp.delta1
            )));
        }
        let word = x.window(0, n as i64 - 1);
        if !self.admissible(word[n - 1], word[0]) {
            return Err(LabError::Closing("cyclic word is inadmissible".into()));
        }
        let p = SftPoint::periodic(&word);
        let y = self.bracket(x, &p)?;
        Ok(ClosingRecord {
            p,
            y,
            return_distance: d,
        })
    }
}

/// Smallest `|i|` at which the points differ, or `None` if equal.
pub fn first_difference(x: &SftPoint, y: &SftPoint) -> Option<i64> {
    let periods = lcm(x.right.len(), y.right.len()).max(lcm(x.left.len(), y.left.len()));
    let bound = x.span().max(y.span()) + periods as i64 + 1;
    if x.symbol(0) != y.symbol(0) {
        return Some(0);
    }
    (1..=bound).find(|&i| x.symbol(i) != y.symbol(i) || x.symbol(-i) != y.symbol(-i))
}

/// Sequence equal to `x` on negative coordinates and to `y` elsewhere.
pub fn splice(x: &SftPoint, y: &SftPoint) -> SftPoint {
    // x is in its left tail below -x.offset, y in its right tail from
    // center.len() - y.offset on
    let lo = (-x.offset).min(0) - 1;
    let hi = (y.center.len() as i64 - y.offset).max(0) + 1;
    let mut center = x.window(lo, -1);
    center.extend(y.window(0, hi));
    let left: Vec<u8> = x.window(lo - x.left.len() as i64, lo - 1);
    let right: Vec<u8> = y.window(hi + 1, hi + y.right.len() as i64);
    SftPoint::new(left, center, right, -lo).canonical()
}

fn is_primitive(t: &[Vec<bool>]) -> bool {
    let k = t.len();
    let limit = (k - 1) * (k - 1) + 1;
    let mut m: Vec<Vec<bool>> = t.to_vec();
    for _ in 0..limit.max(1) {
        if m.iter().flatten().all(|&v| v) {
            return true;
        }
        let mut next = vec![vec![false; k]; k];
        for i in 0..k {
            for l in 0..k {
                if m[i][l] {
                    for j in 0..k {
                        next[i][j] |= t[l][j];
                    }
                }
            }
        }
        m = next;
    }
    m.iter().flatten().all(|&v| v)
}

fn shortest_cycle(t: &[Vec<bool>], s: u8) -> Vec<u8> {
    let k = t.len();
    let s = s as usize;
    if t[s][s] {
        return vec![s as u8];
    }
    let mut prev = vec![usize::MAX; k];
    let mut queue = std::collections::VecDeque::new();
    for j in 0..k {
        if t[s][j] {
            prev[j] = s;
            queue.push_back(j);
        }
    }
    while let Some(j) = queue.pop_front() {
        if t[j][s] {
            let mut path = vec![j];
            let mut cur = j;
            while prev[cur] != s {
                cur = prev[cur];
                path.push(cur);
            }
            path.push(s);
            path.reverse();
            return path.into_iter().map(|v| v as u8).collect();
        }
        for l in 0..k {
            if t[j][l] && prev[l] == usize::MAX && l != s {
                prev[l] = j;
                queue.push_back(l);
            }
        }
    }
    unreachable!("irreducible transition matrix has a cycle through every symbol")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_shift() -> Sft {
        Sft::full_shift(2, 0.5).unwrap()
    }

    #[test]
    fn period_two_point_returns() {
        let s = two_shift();
        let x = SftPoint::periodic(&[0, 1]);
        assert_eq!(s.step(&x, 2), x);
        assert_ne!(s.step(&x, 1), x);
        assert_eq!(x.period(), Some(2));
    }

    #[test]
    fn metric_example() {
        let s = two_shift();
        let x = SftPoint::periodic(&[0]);
        let mut c = vec![0u8; 9];
        c[0] = 1;
        c[8] = 1;
        // coordinates −4..=4 stored at sequence 0..9
        let y = SftPoint::new(vec![0], c, vec![0], 4);
        assert_eq!(s.distance(&x, &y), 0.125);
        let ones = SftPoint::periodic(&[1]);
        assert_eq!(s.distance(&x, &ones), 1.0);
        assert_eq!(s.distance(&x, &x), 0.0);
    }

    #[test]
    fn canonical_forms_agree() {
        let a = SftPoint::new(vec![0, 1], vec![0, 1, 0, 1], vec![0, 1, 0, 1], 3);
        let b = SftPoint::periodic(&[1, 0]);
        assert_eq!(a, b);
        let c = SftPoint::new(vec![0], vec![0, 0, 1, 1], vec![1], 2);
        let d = SftPoint::new(vec![0], vec![0, 1], vec![1], 1);
        assert_eq!(c, d);
        assert_eq!(c.symbol(0), 1);
        assert_eq!(c.symbol(-1), 0);
    }

    #[test]
    fn cyclic_word_counts() {
        let s = two_shift();
        assert_eq!(s.periodic_points(3).unwrap().len(), 8);
        let golden = Sft::new(vec![vec![1, 1], vec![1, 0]], 0.5).unwrap();
        // Lucas numbers
        let counts: Vec<usize> = (1..=6)
            .map(|n| golden.periodic_points(n).unwrap().len())
            .collect();
        assert_eq!(counts, vec![1, 3, 4, 7, 11, 18]);
        assert_eq!(golden.periodic_count(6), 18);
    }

    #[test]
    fn reducible_rejected() {
        assert!(Sft::new(vec![vec![1, 0], vec![0, 1]], 0.5).is_err());
        assert!(Sft::new(vec![vec![0, 1], vec![1, 0]], 0.5).is_err());
    }

    #[test]
    fn bracket_splices() {
        let s = two_shift();
        let x = SftPoint::new(vec![0], vec![1, 0, 1, 1], vec![1], 2);
        let y = SftPoint::new(vec![1], vec![0, 0, 1, 0], vec![0], 2);
        assert!(s.bracket(&x, &y).is_err());
        let y = SftPoint::new(vec![1], vec![1, 0, 1, 1, 0], vec![0], 2);
        let z = s.bracket(&x, &y).unwrap();
        for i in -10..0 {
            assert_eq!(z.symbol(i), x.symbol(i));
        }
        for i in 0..10 {
            assert_eq!(z.symbol(i), y.symbol(i));
        }
        assert_eq!(s.bracket(&x, &x).unwrap(), x);
        let zeros = SftPoint::periodic(&[0]);
        let ones = SftPoint::periodic(&[1]);
        assert!(s.bracket(&zeros, &ones).is_err());
    }

    #[test]
    fn closing_repeats_center_word() {
        let s = two_shift();
        let w = [0u8, 1, 1];
        let mut c = Vec::new();
        for _ in 0..6 {
            c.extend_from_slice(&w);
        }
        let x = SftPoint::new(vec![0], c, vec![1], 9);
        let rec = s.close(&x, 3).unwrap();
        assert_eq!(rec.p, SftPoint::periodic(&w));
    }

    #[test]
    fn connector_path() {
        // golden mean shift: 1 → 1 forbidden
        let g = Sft::new(vec![vec![1, 1], vec![1, 0]], 0.5).unwrap();
        assert_eq!(g.connector(1, 1), vec![0]);
        assert!(g.connector(0, 1).is_empty());
    }
}
