//! Spatial hash of orbit points for near-return detection.

use std::collections::HashMap;

use super::{BasePoint, BaseSystem};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Bucket {
    Cell(i64, i64),
    Word(Vec<u8>),
}

/// Latest visitor per bucket. Torus buckets have side `radius/2`; shift
/// buckets are cylinders fine enough that a shared bucket implies distance
/// below `radius`.
pub struct NearReturnHash<T> {
    h: f64,
    n: i64,
    depth: i64,
    buckets: HashMap<Bucket, (usize, BasePoint, T)>,
}

impl<T> NearReturnHash<T> {
    pub fn new(sys: &BaseSystem, radius: f64) -> Self {
        let depth = match sys {
            BaseSystem::Shift(s) => {
                let mut r = 0;
                while s.theta.powi(r) >= radius {
                    r += 1;
                }
                r as i64
            }
            BaseSystem::Cat(_) => 0,
        };
        let h = radius / 2.0;
        Self {
            h,
            n: (1.0 / h).ceil() as i64,
            depth,
            buckets: HashMap::new(),
        }
    }

    fn cell(&self, c: f64) -> i64 {
        ((c / self.h).floor() as i64).rem_euclid(self.n)
    }

    fn own_key(&self, x: &BasePoint) -> Bucket {
        match x {
            BasePoint::Torus(t) => Bucket::Cell(self.cell(t.coords[0]), self.cell(t.coords[1])),
            BasePoint::Symbolic(p) => Bucket::Word(p.window(-self.depth, self.depth)),
        }
    }

    /// Stored visitors of every bucket that can hold a point within the
    /// hash radius of `x`.
    pub fn neighbors(&self, x: &BasePoint) -> Vec<&(usize, BasePoint, T)> {
        match x {
            BasePoint::Torus(t) => {
                let (i, j) = (self.cell(t.coords[0]), self.cell(t.coords[1]));
                let mut out = Vec::new();
                for di in -2..=2 {
                    for dj in -2..=2 {
                        let key =
                            Bucket::Cell((i + di).rem_euclid(self.n), (j + dj).rem_euclid(self.n));
                        if let Some(v) = self.buckets.get(&key) {
                            out.push(v);
                        }
                    }
                }
                out
            }
            BasePoint::Symbolic(_) => self.buckets.get(&self.own_key(x)).into_iter().collect(),
        }
    }

    pub fn insert(&mut self, index: usize, x: BasePoint, payload: T) {
        self.buckets.insert(self.own_key(&x), (index, x, payload));
    }
}
