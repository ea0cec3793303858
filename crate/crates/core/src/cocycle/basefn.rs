//! Real-valued functions on the base, used as cocycle parameters.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::base::{BaseGrid, BasePoint, BaseSystem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    /// Frequency vector `(k₁, k₂)`.
    pub k: [i32; 2],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolTerm {
    /// Coordinate the term reads.
    pub index: i64,
    /// Value contributed for each symbol.
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFunction {
    Const(f64),
    /// `Σ cos·cos(2π k·x) + sin·sin(2π k·x)` on the torus.
    Fourier(Vec<FourierTerm>),
    /// `Σ values[x_index]` on the shift.
    Symbols(Vec<SymbolTerm>),
    Sum(Vec<BaseFunction>),
    Scaled(f64, Box<BaseFunction>),
    /// `ψ ∘ f − ψ`.
    Coboundary(Box<BaseFunction>),
    /// One value per grid cell.
    Table {
        grid: BaseGrid,
        values: Vec<f64>,
    },
}

impl Default for BaseFunction {
    fn default() -> Self {
        BaseFunction::Const(0.0)
    }
}

impl BaseFunction {
    pub fn eval(&self, sys: &BaseSystem, x: &BasePoint) -> f64 {
        match self {
            BaseFunction::Const(c) => *c,
            BaseFunction::Fourier(terms) => {
                let p = x.torus().coords;
                terms
                    .iter()
                    .map(|t| {
                        let arg = TAU * (t.k[0] as f64 * p[0] + t.k[1] as f64 * p[1]);
                        t.cos * arg.cos() + t.sin * arg.sin()
                    })
                    .sum()
            }
            BaseFunction::Symbols(terms) => {
                let p = x.symbolic();
                terms
                    .iter()
                    .map(|t| {
                        t.values
                            .get(p.symbol(t.index) as usize)
                            .copied()
                            .unwrap_or(0.0)
                    })
                    .sum()
            }
            BaseFunction::Sum(v) => v.iter().map(|f| f.eval(sys, x)).sum(),
            BaseFunction::Scaled(a, f) => a * f.eval(sys, x),
            BaseFunction::Coboundary(psi) => psi.eval(sys, &sys.step(x, 1)) - psi.eval(sys, x),
            BaseFunction::Table { grid, values } => values[grid.cell(x)],
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            BaseFunction::Const(_) => true,
            BaseFunction::Fourier(t) => t
                .iter()
                .all(|t| t.k == [0, 0] || (t.cos == 0.0 && t.sin == 0.0)),
            BaseFunction::Symbols(t) => t.iter().all(|t| {
                t.values
                    .iter()
                    .all(|&v| v == t.values.first().copied().unwrap_or(0.0))
            }),
            BaseFunction::Sum(v) => v.iter().all(BaseFunction::is_constant),
            BaseFunction::Scaled(a, f) => *a == 0.0 || f.is_constant(),
            BaseFunction::Coboundary(psi) => psi.is_constant(),
            BaseFunction::Table { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// Sup-norm bound.
    pub fn sup_bound(&self) -> f64 {
        match self {
            BaseFunction::Const(c) => c.abs(),
            BaseFunction::Fourier(t) => t.iter().map(|t| t.cos.abs() + t.sin.abs()).sum(),
            BaseFunction::Symbols(t) => t
                .iter()
                .map(|t| t.values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
                .sum(),
            BaseFunction::Sum(v) => v.iter().map(BaseFunction::sup_bound).sum(),
            BaseFunction::Scaled(a, f) => a.abs() * f.sup_bound(),
            BaseFunction::Coboundary(psi) => 2.0 * psi.sup_bound(),
            BaseFunction::Table { values, .. } => values.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }

    pub fn scaled(self, a: f64) -> Self {
        BaseFunction::Scaled(a, Box::new(self))
    }

    /// `cos(2π x₁)`-type single Fourier mode.
    pub fn cos_mode(k: [i32; 2], amplitude: f64) -> Self {
        BaseFunction::Fourier(vec![FourierTerm {
            k,
            cos: amplitude,
            sin: 0.0,
        }])
    }

    pub fn sin_mode(k: [i32; 2], amplitude: f64) -> Self {
        BaseFunction::Fourier(vec![FourierTerm {
            k,
            cos: 0.0,
            sin: amplitude,
        }])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{SftPoint, TorusPoint};

    #[test]
    fn coboundary_of_cosine() {
        let sys = BaseSystem::cat([[2, 1], [1, 1]]).unwrap();
        let psi = BaseFunction::cos_mode([1, 0], 1.0);
        let phi = BaseFunction::Coboundary(Box::new(psi));
        let x = BasePoint::Torus(TorusPoint::new(0.25, 0.25));
        // f(x) = (0.75, 0.5): cos(1.5π) − cos(0.5π) = 0
        assert!(phi.eval(&sys, &x).abs() < 1e-12);
        let x = BasePoint::Torus(TorusPoint::new(0.0, 0.25));
        // f(x) = (0.25, 0.25): cos(π/2) − cos(0) = −1
        assert!((phi.eval(&sys, &x) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn symbol_terms() {
        let sys = BaseSystem::full_shift(2, 0.5).unwrap();
        let f = BaseFunction::Symbols(vec![
            SymbolTerm {
                index: 0,
                values: vec![0.0, 1.0],
            },
            SymbolTerm {
                index: 1,
                values: vec![0.0, 0.5],
            },
        ]);
        let x = BasePoint::Symbolic(SftPoint::periodic(&[1, 0]));
        assert_eq!(f.eval(&sys, &x), 1.0);
        assert_eq!(f.eval(&sys, &sys.step(&x, 1)), 0.5);
        assert!(!f.is_constant());
    }
}
