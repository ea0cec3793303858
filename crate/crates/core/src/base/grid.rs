//! Experiment grids on the base and dense-orbit plans covering them.

use serde::{Deserialize, Serialize};

use super::{BasePoint, BaseSystem, TorusPoint};
use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseGrid {
    /// A single cell covering the whole base.
    Trivial,
    /// `res × res` squares of the unit torus.
    Torus { res: usize },
    /// Cylinders fixed on the coordinate window `−radius..=radius`.
    Cylinder { radius: usize, alphabet: usize },
}

impl BaseGrid {
    /// Coarsest grid at `resolution`: squares of side `resolution` on the
    /// torus, cylinders of diameter at most `resolution` on the shift.
    pub fn for_resolution(sys: &BaseSystem, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(LabError::Invalid(format!(
                "resolution {resolution} must be positive"
            )));
        }
        if resolution >= sys.diameter() {
            return Ok(BaseGrid::Trivial);
        }
        Ok(match sys {
            BaseSystem::Cat(_) => BaseGrid::Torus {
                res: (1.0 / resolution - 1e-9).ceil().max(1.0) as usize,
            },
            BaseSystem::Shift(s) => {
                let mut r = 0usize;
                while s.theta.powi(r as i32) > resolution * (1.0 + 1e-12) {
                    r += 1;
                }
                BaseGrid::Cylinder {
                    radius: r,
                    alphabet: s.alphabet_size,
                }
            }
        })
    }

    /// Default experiment grid: `res²` squares or radius-`r` cylinders.
    pub fn standard(sys: &BaseSystem, torus_res: usize, radius: usize) -> Self {
        match sys {
            BaseSystem::Cat(_) => BaseGrid::Torus { res: torus_res },
            BaseSystem::Shift(s) => BaseGrid::Cylinder {
                radius,
                alphabet: s.alphabet_size,
            },
        }
    }

    pub fn cell_count(&self) -> usize {
        match *self {
            BaseGrid::Trivial => 1,
            BaseGrid::Torus { res } => res * res,
            BaseGrid::Cylinder { radius, alphabet } => alphabet.pow(2 * radius as u32 + 1),
        }
    }

    pub fn cell(&self, x: &BasePoint) -> usize {
        match *self {
            BaseGrid::Trivial => 0,
            BaseGrid::Torus { res } => {
                let p = x.torus().coords;
                let ix = ((p[0] * res as f64) as usize).min(res - 1);
                let iy = ((p[1] * res as f64) as usize).min(res - 1);
                ix + res * iy
            }
            BaseGrid::Cylinder { radius, alphabet } => {
                let p = x.symbolic();
                let r = radius as i64;
                (-r..=r).fold(0usize, |acc, i| acc * alphabet + p.symbol(i) as usize)
            }
        }
    }

    /// Window word of a cylinder cell, most significant symbol first.
    pub fn cylinder_word(&self, cell: usize) -> Option<Vec<u8>> {
        match *self {
            BaseGrid::Cylinder { radius, alphabet } => {
                let len = 2 * radius + 1;
                let mut w = vec![0u8; len];
                let mut c = cell;
                for slot in w.iter_mut().rev() {
                    *slot = (c % alphabet) as u8;
                    c /= alphabet;
                }
                Some(w)
            }
            _ => None,
        }
    }

    /// Upper bound for the diameter of a cell.
    pub fn cell_diameter(&self, sys: &BaseSystem) -> f64 {
        match (*self, sys) {
            (BaseGrid::Trivial, _) => sys.diameter(),
            (BaseGrid::Torus { res }, _) => std::f64::consts::SQRT_2 / res as f64,
            (BaseGrid::Cylinder { radius, .. }, BaseSystem::Shift(s)) => {
                s.theta.powi(radius as i32)
            }
            _ => sys.diameter(),
        }
    }

    /// Which cells contain points of the base.
    pub fn admissible_cells(&self, sys: &BaseSystem) -> Vec<bool> {
        match (*self, sys) {
            (BaseGrid::Cylinder { .. }, BaseSystem::Shift(s)) => (0..self.cell_count())
                .map(|c| s.word_admissible(&self.cylinder_word(c).unwrap()))
                .collect(),
            _ => vec![true; self.cell_count()],
        }
    }

    /// A representative point of every admissible cell: square centers, or
    /// points whose window is the cylinder word.
    pub fn cell_samples(&self, sys: &BaseSystem) -> Vec<(usize, BasePoint)> {
        match (*self, sys) {
            (BaseGrid::Trivial, BaseSystem::Cat(_)) => {
                vec![(0, BasePoint::Torus(TorusPoint::new(0.5, 0.5)))]
            }
            (BaseGrid::Torus { res }, _) => {
                let h = 1.0 / res as f64;
                (0..res * res)
                    .map(|c| {
                        let (ix, iy) = (c % res, c / res);
                        let p = TorusPoint::new((ix as f64 + 0.5) * h, (iy as f64 + 0.5) * h);
                        (c, BasePoint::Torus(p))
                    })
                    .collect()
            }
            (BaseGrid::Cylinder { radius, .. }, BaseSystem::Shift(s)) => {
                let adm = self.admissible_cells(sys);
                (0..self.cell_count())
                    .filter(|&c| adm[c])
                    .map(|c| {
                        let w = self.cylinder_word(c).unwrap();
                        (
                            c,
                            BasePoint::Symbolic(s.point_with_center(&w, radius as i64)),
                        )
                    })
                    .collect()
            }
            (BaseGrid::Trivial, BaseSystem::Shift(s)) => {
                vec![(0, BasePoint::Symbolic(s.point_with_center(&[0], 0)))]
            }
            _ => Vec::new(),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            BaseGrid::Trivial => "trivial".into(),
            BaseGrid::Torus { res } => format!("torus {res}x{res}"),
            BaseGrid::Cylinder { radius, alphabet } => {
                format!("cylinders radius {radius} over {alphabet} symbols")
            }
        }
    }
}

/// Orbit indices in the order they are visited: `0, 1, −1, 2, −2, …`,
/// truncated to `0..n_forward` and `−n_backward..0`.
pub fn visit_order(n_forward: usize, n_backward: usize) -> impl Iterator<Item = i64> {
    let top = n_forward.max(n_backward + 1);
    (0..top as i64).flat_map(move |k| {
        let fwd = (k < n_forward as i64).then_some(k);
        let bwd = (k >= 1 && k <= n_backward as i64).then_some(-k);
        fwd.into_iter().chain(bwd)
    })
}

/// A start point whose orbit segment visits every admissible grid cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DenseOrbitPlan {
    pub start: BasePoint,
    /// Orbit indices `0..n_forward` are used forward.
    pub n_forward: usize,
    /// Orbit indices `−n_backward..0` are used backward.
    pub n_backward: usize,
    pub grid: BaseGrid,
    /// First visiting orbit index of each cell (`None` for empty cells).
    pub first_visit: Vec<Option<i64>>,
    /// The orbit point at the first visit.
    pub reps: Vec<Option<BasePoint>>,
    pub seed: u64,
}

impl DenseOrbitPlan {
    /// Total number of orbit points used.
    pub fn len(&self) -> usize {
        self.n_forward + self.n_backward
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn two_sided(&self) -> bool {
        self.n_backward > 0
    }

    pub fn visited_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.first_visit
            .iter()
            .enumerate()
            .filter_map(|(c, v)| v.map(|_| c))
    }

    pub fn visited_count(&self) -> usize {
        self.first_visit.iter().filter(|v| v.is_some()).count()
    }

    /// Cell of the start point.
    pub fn anchor_cell(&self) -> usize {
        self.grid.cell(&self.start)
    }

    /// Forward orbit points `x_0, x_1, …, x_{n_forward−1}`.
    pub fn forward<'a>(&'a self, sys: &'a BaseSystem) -> impl Iterator<Item = BasePoint> + 'a {
        let mut cur = self.start.clone();
        (0..self.n_forward).map(move |k| {
            if k > 0 {
                cur = sys.step(&cur, 1);
            }
            cur.clone()
        })
    }

    /// Backward orbit points `x_{−1}, x_{−2}, …`.
    pub fn backward<'a>(&'a self, sys: &'a BaseSystem) -> impl Iterator<Item = BasePoint> + 'a {
        let mut cur = self.start.clone();
        (0..self.n_backward).map(move |_| {
            cur = sys.step(&cur, -1);
            cur.clone()
        })
    }

    /// Plan over `grid` starting at `start`, extended until every admissible
    /// cell is visited or `cap` orbit points are used.
    pub fn cover(
        sys: &BaseSystem,
        grid: BaseGrid,
        start: BasePoint,
        two_sided: bool,
        cap: usize,
        seed: u64,
    ) -> Result<Self> {
        let admissible = grid.admissible_cells(sys);
        let cells = admissible.iter().filter(|&&a| a).count();
        let mut first_visit = vec![None; grid.cell_count()];
        let mut reps: Vec<Option<BasePoint>> = vec![None; grid.cell_count()];
        let mut visited = 0usize;
        let mut fwd = start.clone();
        let mut bwd = start.clone();
        let (mut n_forward, mut n_backward) = (0usize, 0usize);
        let mut used = 0usize;
        let mut record = |k: i64, x: &BasePoint, visited: &mut usize| {
            let c = grid.cell(x);
            if first_visit[c].is_none() {
                first_visit[c] = Some(k);
                reps[c] = Some(x.clone());
                *visited += 1;
            }
        };
        while visited < cells {
            if used >= cap {
                return Err(LabError::Coverage {
                    visited,
                    cells,
                    steps: used,
                });
            }
            if n_forward > 0 {
                fwd = sys.step(&fwd, 1);
            }
            record(n_forward as i64, &fwd, &mut visited);
            n_forward += 1;
            used += 1;
            if two_sided && visited < cells {
                bwd = sys.step(&bwd, -1);
                n_backward += 1;
                used += 1;
                record(-(n_backward as i64), &bwd, &mut visited);
            }
        }
        Ok(Self {
            start,
            n_forward,
            n_backward,
            grid,
            first_visit,
            reps,
            seed,
        })
    }
}

/// Start point with an orbit visiting every `resolution`-cell.
///
/// On the shift the start point is the concatenation of all admissible
/// cylinder words (length-lexicographic, joined by shortest connecting
/// paths); two-sided plans place a second copy on the negative side. On the
/// torus the start point is drawn from `seed` and coverage is verified by
/// iteration.
pub fn transitive_point(
    sys: &BaseSystem,
    resolution: f64,
    two_sided: bool,
    seed: u64,
) -> Result<DenseOrbitPlan> {
    let grid = BaseGrid::for_resolution(sys, resolution)?;
    plan_for_grid(sys, grid, two_sided, seed)
}

pub fn plan_for_grid(
    sys: &BaseSystem,
    grid: BaseGrid,
    two_sided: bool,
    seed: u64,
) -> Result<DenseOrbitPlan> {
    let start = match (sys, grid) {
        (BaseSystem::Shift(s), BaseGrid::Cylinder { radius, .. }) => {
            let words = s.admissible_words(2 * radius + 1);
            let mut w: Vec<u8> = Vec::new();
            for word in &words {
                if let Some(&last) = w.last() {
                    w.extend(s.connector(last, word[0]));
                }
                w.extend_from_slice(word);
            }
            if two_sided {
                let mut center = w.clone();
                center.extend(s.connector(w[w.len() - 1], w[0]));
                let shift = center.len() as i64;
                center.extend_from_slice(&w);
                BasePoint::Symbolic(s.point_with_center(&center, shift + radius as i64))
            } else {
                BasePoint::Symbolic(s.point_with_center(&w, radius as i64))
            }
        }
        (BaseSystem::Shift(s), _) => BasePoint::Symbolic(s.point_with_center(&[0], 0)),
        (BaseSystem::Cat(_), _) => BasePoint::Torus(torus_start(seed)),
    };
    let cap = 2000 * grid.cell_count().max(16);
    DenseOrbitPlan::cover(sys, grid, start, two_sided, cap, seed)
}

/// Generic start point on the torus derived from a seed.
pub fn torus_start(seed: u64) -> TorusPoint {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    TorusPoint::new(rng.gen(), rng.gen())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_alternates() {
        let v: Vec<i64> = visit_order(4, 2).collect();
        assert_eq!(v, vec![0, 1, -1, 2, -2, 3]);
        let v: Vec<i64> = visit_order(3, 0).collect();
        assert_eq!(v, vec![0, 1, 2]);
    }

    #[test]
    fn shift_plan_covers_by_construction() {
        let sys = BaseSystem::full_shift(2, 0.5).unwrap();
        let plan = transitive_point(&sys, 0.125, false, 0).unwrap();
        assert_eq!(
            plan.grid,
            BaseGrid::Cylinder {
                radius: 3,
                alphabet: 2
            }
        );
        assert_eq!(plan.visited_count(), 128);
        let two = transitive_point(&sys, 0.125, true, 0).unwrap();
        assert_eq!(two.visited_count(), 128);
        assert!(two.first_visit.iter().any(|v| v.is_some_and(|k| k < 0)));
    }

    #[test]
    fn degenerate_resolution() {
        let sys = BaseSystem::cat([[2, 1], [1, 1]]).unwrap();
        let plan = transitive_point(&sys, 1.0, false, 0).unwrap();
        assert_eq!(plan.n_forward, 1);
        let sys = BaseSystem::full_shift(2, 0.5).unwrap();
        let plan = transitive_point(&sys, 2.0, false, 0).unwrap();
        assert_eq!(plan.len(), 1);
    }

    #[test]
    fn torus_plan_covers() {
        let sys = BaseSystem::cat([[2, 1], [1, 1]]).unwrap();
        let plan = plan_for_grid(&sys, BaseGrid::Torus { res: 16 }, true, 3).unwrap();
        assert_eq!(plan.visited_count(), 256);
        for (c, rep) in plan.reps.iter().enumerate() {
            assert_eq!(plan.grid.cell(rep.as_ref().unwrap()), c);
        }
    }
}
