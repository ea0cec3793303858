//! Lifted laminations, orbit-closure sections, holonomies and the
//! trivializing conjugacy.

pub mod derivative;
pub mod holonomy;
pub mod leaf;
pub mod section;
pub mod trivialize;

use serde::Serialize;

pub use derivative::{
    derivative_cocycle_along_section, DerivativeOptions, DerivedPoo, LinearAlongSection,
    UniformBound,
};
pub use holonomy::{
    cell_holonomy, groupoid_check, holonomy, holonomy_smoothness_check, Approximant,
    GroupoidReport, HolonomyMap, Knots, SmoothnessOptions, SmoothnessReport, HOLONOMY_GRID,
};
pub use leaf::{
    leaf_bound, leaf_invariance, leaf_lift, leaf_transport, lift_at_depth, lifted_leaf,
    stable_lift, unstable_lift, LeafBound, LeafInvarianceReport, LeafOptions, LeafTransport,
    LeafValue, LiftedLeaf,
};
pub use section::{
    build_atlas, orbit_closure_section, return_claim_check, saturate, saturation_check,
    section_invariance, section_lipschitz, Atlas, InvarianceReport, NearReturn,
    OrbitClosureSection, ReturnClaim, Rung, SaturationReport, SectionOptions, SectionRow,
};
pub use trivialize::{
    solver_agreement, trivialize, trivialize_refining, Trivialization, TrivializeOptions,
};

use crate::error::LabError;

/// Outcome of the section machinery for one cocycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseVerdict {
    CoboundaryConsistent,
    ReturnClaimViolated,
}

impl PhaseVerdict {
    pub fn label(self) -> &'static str {
        match self {
            PhaseVerdict::CoboundaryConsistent => "coboundary-consistent",
            PhaseVerdict::ReturnClaimViolated => "return-claim-violated",
        }
    }

    /// Verdict for the result of a section build.
    pub fn of<T>(result: &Result<T, LabError>) -> Option<Self> {
        match result {
            Ok(_) => Some(PhaseVerdict::CoboundaryConsistent),
            Err(LabError::ReturnClaim(_)) => Some(PhaseVerdict::ReturnClaimViolated),
            Err(_) => None,
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use std::sync::{Arc, OnceLock};

    use super::{build_atlas, Atlas, SectionOptions};
    use crate::base::grid::plan_for_grid;
    use crate::base::{BaseGrid, BaseSystem, DenseOrbitPlan};
    use crate::cocycle::{BaseFunction, CircleFamily, CocycleSpec, Generator, SkewSystem};

    pub fn cat() -> BaseSystem {
        BaseSystem::cat([[2, 1], [1, 1]]).unwrap()
    }

    pub fn generator() -> Generator {
        Generator {
            shift: BaseFunction::cos_mode([1, 0], 0.02),
            amp: BaseFunction::Sum(vec![
                BaseFunction::Const(0.1),
                BaseFunction::cos_mode([1, 1], 0.05),
            ]),
            phase: BaseFunction::sin_mode([0, 1], 0.1),
        }
    }

    pub fn plan(sys: &BaseSystem, res: usize) -> Arc<DenseOrbitPlan> {
        Arc::new(plan_for_grid(sys, BaseGrid::Torus { res }, true, 7).unwrap())
    }

    pub fn coboundary() -> SkewSystem {
        SkewSystem::new(
            cat(),
            CocycleSpec::circle(CircleFamily::CoboundaryGenerated {
                generator: generator(),
            }),
        )
    }

    pub fn identity() -> SkewSystem {
        SkewSystem::new(cat(), CocycleSpec::circle(CircleFamily::Identity))
    }

    fn build(skew: &SkewSystem, m: usize) -> Atlas {
        build_atlas(skew, plan(&skew.base, 32), m, &SectionOptions::default()).unwrap()
    }

    pub fn coboundary_atlas() -> &'static (SkewSystem, Atlas) {
        static A: OnceLock<(SkewSystem, Atlas)> = OnceLock::new();
        A.get_or_init(|| {
            let s = coboundary();
            let a = build(&s, 32);
            (s, a)
        })
    }

    pub fn identity_atlas() -> &'static (SkewSystem, Atlas) {
        static A: OnceLock<(SkewSystem, Atlas)> = OnceLock::new();
        A.get_or_init(|| {
            let s = identity();
            let a = build(&s, 8);
            (s, a)
        })
    }
}
