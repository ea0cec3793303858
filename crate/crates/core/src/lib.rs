//! Numerical laboratory for Livšic-type cocycle theory over hyperbolic
//! bases: toral automorphisms and subshifts of finite type carrying
//! circle-diffeomorphism and matrix cocycles.

pub mod base;
pub mod cocycle;
pub mod error;
pub mod fiber;
pub mod lyapunov;
pub mod sections;
pub mod solver;

pub use error::{LabError, Result};
