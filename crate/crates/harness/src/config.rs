//! Scenario documents: parsing, validation and construction of the skew
//! system they describe.

use std::fmt;
use std::path::PathBuf;

use livsic_core::base::{BaseGrid, BaseSystem};
use livsic_core::cocycle::{
    BaseFunction, CircleFamily, CocycleSpec, Generator, LinearFamily, SkewSystem,
};
use livsic_core::fiber::{FiberMap, MatrixElement};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub base: BaseConfig,
    pub cocycle: CocycleConfig,
    pub experiment: Experiment,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseConfig {
    Cat {
        matrix: [[i64; 2]; 2],
    },
    Sft {
        transition: Vec<Vec<u8>>,
        theta: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyId {
    Identity,
    Rotation,
    ArnoldBump,
    CoboundaryGenerated,
    GridTable,
    LocallyConstantSft,
    LinearFamily,
}

impl FamilyId {
    pub fn is_circle(self) -> bool {
        self != FamilyId::LinearFamily
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CocycleConfig {
    pub family_id: FamilyId,
    #[serde(default = "empty_params")]
    pub params: Value,
    #[serde(default = "one")]
    pub alpha: f64,
    /// Fiber grid `G` of sampled diffeomorphisms.
    #[serde(default = "default_fiber_grid")]
    pub fiber_grid: usize,
}

fn empty_params() -> Value {
    Value::Object(Default::default())
}

fn one() -> f64 {
    1.0
}

fn default_fiber_grid() -> usize {
    1024
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RotationParams {
    angle: BaseFunction,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BumpParams {
    amplitude: BaseFunction,
    #[serde(default)]
    shift: BaseFunction,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoboundaryParams {
    generator: Generator,
}

/// `t ↦ t + shift + amp/(2π)·sin(2π(t − phase))`.
#[derive(Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct BumpMap {
    #[serde(default)]
    shift: f64,
    #[serde(default)]
    amp: f64,
    #[serde(default)]
    phase: f64,
}

impl From<BumpMap> for FiberMap {
    fn from(b: BumpMap) -> Self {
        FiberMap::Bump {
            shift: b.shift,
            amp: b.amp,
            phase: b.phase,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridTableParams {
    /// Torus side length or cylinder radius.
    resolution: usize,
    maps: Vec<BumpMap>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LocallyConstantParams {
    lo: i64,
    hi: i64,
    maps: Vec<BumpMap>,
}

#[derive(Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
enum LinearParams {
    Constant {
        matrix: Vec<Vec<f64>>,
    },
    Exp {
        t: f64,
        generator: Vec<Vec<BaseFunction>>,
    },
    Coboundary {
        t: f64,
        generator: Vec<Vec<BaseFunction>>,
    },
}

/// Per-experiment parameters; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Poo {
        #[serde(default = "d_period")]
        max_period: usize,
    },
    Lyapunov {
        #[serde(default = "d_period")]
        max_period: usize,
        #[serde(default = "d_random_orbits")]
        random_orbits: usize,
        #[serde(default = "d_orbit_length")]
        orbit_length: usize,
    },
    Domination {
        /// Defaults to the cocycle's `α`.
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default = "d_ell_max")]
        ell_max: usize,
    },
    Solve {
        /// Torus side lengths or cylinder radii, coarse to fine.
        #[serde(default = "d_resolutions")]
        resolutions: Vec<usize>,
        #[serde(default = "d_period")]
        poo_period: usize,
        /// Fiber points per cell in the exported transfer table.
        #[serde(default = "d_export_grid")]
        export_grid: usize,
        /// Parameters of a linear family sweep `t ↦ exp(t·B)`.
        #[serde(default)]
        family_ts: Vec<f64>,
    },
    ClosingDemo {
        #[serde(default = "d_samples")]
        samples: usize,
        #[serde(default = "d_closing_period")]
        max_period: usize,
    },
    Sections {
        #[serde(default = "d_section_resolution")]
        resolution: usize,
        #[serde(default = "d_anchors")]
        anchors: usize,
        #[serde(default = "d_samples")]
        leaves: usize,
        #[serde(default = "d_leaf_samples")]
        leaf_samples: usize,
        #[serde(default = "d_triples")]
        triples: usize,
        /// Grid of the derivative-cocycle solve; `None` skips it.
        #[serde(default)]
        derivative_resolution: Option<usize>,
        #[serde(default = "d_horizon")]
        horizon: usize,
    },
    ContractingSearch {
        #[serde(default = "d_steps")]
        steps: usize,
        #[serde(default)]
        start: Option<[f64; 2]>,
        #[serde(default)]
        fiber_start: Option<f64>,
        #[serde(default)]
        expect: Option<SearchOutcome>,
    },
    Theorem31Suite {
        #[serde(default = "d_period")]
        max_period: usize,
        #[serde(default = "d_random_orbits")]
        random_orbits: usize,
        #[serde(default = "d_orbit_length")]
        orbit_length: usize,
        #[serde(default = "d_ell_max")]
        ell_max: usize,
        #[serde(default = "d_section_resolution")]
        resolution: usize,
        #[serde(default = "d_anchors")]
        anchors: usize,
    },
}

pub const EXPERIMENTS: [(&str, &str); 8] = [
    ("poo", "periodic orbit obstructions up to a period"),
    (
        "lyapunov",
        "fibered exponents over periodic orbits and Birkhoff runs",
    ),
    (
        "domination",
        "smallest domination iterate at an exponent beta",
    ),
    (
        "solve",
        "transfer function along a dense orbit, per resolution",
    ),
    (
        "closing_demo",
        "harvested near-returns, closing bounds and fitted constants",
    ),
    (
        "sections",
        "leaves, orbit-closure atlas, holonomies, trivialization",
    ),
    (
        "contracting_search",
        "contracting periodic point along a skew orbit",
    ),
    (
        "theorem31_suite",
        "exponents-zero, dominated and coboundary verdicts",
    ),
];

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Poo { .. } => "poo",
            Experiment::Lyapunov { .. } => "lyapunov",
            Experiment::Domination { .. } => "domination",
            Experiment::Solve { .. } => "solve",
            Experiment::ClosingDemo { .. } => "closing_demo",
            Experiment::Sections { .. } => "sections",
            Experiment::ContractingSearch { .. } => "contracting_search",
            Experiment::Theorem31Suite { .. } => "theorem31_suite",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchOutcome {
    Found,
    NotFound,
}

fn d_period() -> usize {
    6
}
fn d_random_orbits() -> usize {
    20
}
fn d_orbit_length() -> usize {
    100_000
}
fn d_ell_max() -> usize {
    20
}
fn d_resolutions() -> Vec<usize> {
    vec![16, 32, 64]
}
fn d_export_grid() -> usize {
    32
}
fn d_samples() -> usize {
    100
}
fn d_closing_period() -> usize {
    12
}
fn d_section_resolution() -> usize {
    32
}
fn d_anchors() -> usize {
    32
}
fn d_leaf_samples() -> usize {
    8
}
fn d_triples() -> usize {
    32
}
fn d_horizon() -> usize {
    1000
}
fn d_steps() -> usize {
    1_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub poo: f64,
    pub residual: f64,
    pub exponent_envelope: f64,
    pub conjugacy: f64,
    pub linear: f64,
    pub generator_match: f64,
    pub leaf: f64,
    pub groupoid: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            poo: 1e-4,
            residual: 5e-3,
            exponent_envelope: 1e-2,
            conjugacy: 1e-2,
            linear: 1e-3,
            generator_match: 5e-3,
            leaf: 1e-6,
            groupoid: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigError {
    pub path: String,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() {
            "."
        } else {
            &self.path
        };
        write!(f, "{path}: {}", self.reason)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

fn err(path: impl Into<String>, reason: impl fmt::Display) -> ConfigError {
    ConfigError {
        path: path.into(),
        reason: reason.to_string(),
    }
}

/// Parses and validates a JSON scenario document.
pub fn parse_config(document: &str) -> Result<ScenarioConfig, ConfigErrors> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigErrors(vec![err(
            if path == "." { String::new() } else { path },
            e.into_inner(),
        )])
    })?;
    cfg.build()?;
    Ok(cfg)
}

/// Pretty JSON with every default made explicit.
pub fn emit_config(cfg: &ScenarioConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("configs serialize")
}

fn typed<T: DeserializeOwned>(v: &Value, path: &str) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let sub = e.path().to_string();
        let full = if sub == "." {
            path.to_string()
        } else {
            format!("{path}.{sub}")
        };
        err(full, e.into_inner())
    })
}

fn check_function(f: &BaseFunction, base: &BaseSystem, path: &str, errs: &mut Vec<ConfigError>) {
    match (f, base) {
        (BaseFunction::Fourier(_), BaseSystem::Shift(_)) => {
            errs.push(err(path, "fourier terms need a torus base"));
        }
        (BaseFunction::Symbols(_), BaseSystem::Cat(_)) => {
            errs.push(err(path, "symbol terms need a shift base"));
        }
        (BaseFunction::Sum(v), _) => {
            for (i, g) in v.iter().enumerate() {
                check_function(g, base, &format!("{path}.sum[{i}]"), errs);
            }
        }
        (BaseFunction::Scaled(_, g), _) => {
            check_function(g, base, &format!("{path}.scaled[1]"), errs)
        }
        (BaseFunction::Coboundary(g), _) => {
            check_function(g, base, &format!("{path}.coboundary"), errs)
        }
        (BaseFunction::Table { grid, values }, _) => {
            let ok = matches!(
                (grid, base),
                (BaseGrid::Trivial, _)
                    | (BaseGrid::Torus { .. }, BaseSystem::Cat(_))
                    | (BaseGrid::Cylinder { .. }, BaseSystem::Shift(_))
            );
            if !ok {
                errs.push(err(
                    path,
                    format!("grid {} does not fit the base", grid.describe()),
                ));
            } else if values.len() != grid.cell_count() {
                errs.push(err(
                    path,
                    format!("{} values for {} cells", values.len(), grid.cell_count()),
                ));
            }
        }
        _ => {}
    }
}

fn check_amplitude(sup: f64, path: &str, errs: &mut Vec<ConfigError>) {
    if !(sup < 1.0) {
        errs.push(err(
            path,
            format!("amplitude bound {sup} must be below 1 for a diffeomorphism"),
        ));
    }
}

impl ScenarioConfig {
    /// The base system, with the constructor's error at `base`.
    pub fn base_system(&self) -> Result<BaseSystem, ConfigError> {
        match &self.base {
            BaseConfig::Cat { matrix } => {
                BaseSystem::cat(*matrix).map_err(|e| err("base.matrix", e))
            }
            BaseConfig::Sft { transition, theta } => {
                if !(*theta > 0.0 && *theta < 1.0) {
                    return Err(err("base.theta", format!("θ = {theta} must lie in (0, 1)")));
                }
                BaseSystem::sft(transition.clone(), *theta).map_err(|e| err("base.transition", e))
            }
        }
    }

    /// Validates the whole document and builds the skew system.
    pub fn build(&self) -> Result<SkewSystem, ConfigErrors> {
        let mut errs = Vec::new();
        let base = self.base_system();
        let c = &self.cocycle;
        if !(c.alpha > 0.0 && c.alpha <= 1.0) {
            errs.push(err(
                "cocycle.alpha",
                format!("α = {} must lie in (0, 1]", c.alpha),
            ));
        }
        if c.fiber_grid < 16 || !c.fiber_grid.is_power_of_two() {
            errs.push(err(
                "cocycle.fiber_grid",
                "must be a power of two, at least 16",
            ));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("poo", t.poo),
            ("residual", t.residual),
            ("exponent_envelope", t.exponent_envelope),
            ("conjugacy", t.conjugacy),
            ("linear", t.linear),
            ("generator_match", t.generator_match),
            ("leaf", t.leaf),
            ("groupoid", t.groupoid),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(err(format!("tolerances.{name}"), "must be positive"));
            }
        }
        self.check_experiment(&mut errs);
        let base = match base {
            Ok(b) => b,
            Err(e) => {
                errs.push(e);
                return Err(ConfigErrors(errs));
            }
        };
        let spec = self.cocycle_spec(&base, &mut errs);
        match spec {
            Some(spec) if errs.is_empty() => {
                let mut skew = SkewSystem::new(base, spec.with_alpha(c.alpha));
                skew.fiber_grid = c.fiber_grid;
                Ok(skew)
            }
            _ => Err(ConfigErrors(errs)),
        }
    }

    fn check_experiment(&self, errs: &mut Vec<ConfigError>) {
        let circle = self.cocycle.family_id.is_circle();
        let kind = self.experiment.kind();
        let circle_only = matches!(
            self.experiment,
            Experiment::Sections { .. }
                | Experiment::ContractingSearch { .. }
                | Experiment::Theorem31Suite { .. }
        );
        if circle_only && !circle {
            errs.push(err(
                "experiment.kind",
                format!("{kind} needs a circle cocycle"),
            ));
        }
        let positive = |name: &str, v: usize, errs: &mut Vec<ConfigError>| {
            if v == 0 {
                errs.push(err(format!("experiment.{name}"), "must be positive"));
            }
        };
        match &self.experiment {
            Experiment::Poo { max_period } => positive("max_period", *max_period, errs),
            Experiment::Lyapunov {
                random_orbits,
                orbit_length,
                ..
            } => {
                if *random_orbits > 0 {
                    positive("orbit_length", *orbit_length, errs);
                }
            }
            Experiment::Domination { beta, ell_max } => {
                positive("ell_max", *ell_max, errs);
                if let Some(b) = beta {
                    if !(*b > 0.0 && *b <= 1.0) {
                        errs.push(err(
                            "experiment.beta",
                            format!("β = {b} must lie in (0, 1]"),
                        ));
                    }
                }
            }
            Experiment::Solve {
                resolutions,
                family_ts,
                export_grid,
                ..
            } => {
                if resolutions.is_empty() {
                    errs.push(err(
                        "experiment.resolutions",
                        "needs at least one resolution",
                    ));
                }
                for (i, &r) in resolutions.iter().enumerate() {
                    positive(&format!("resolutions[{i}]"), r, errs);
                }
                positive("export_grid", *export_grid, errs);
                if !family_ts.is_empty() && circle {
                    errs.push(err(
                        "experiment.family_ts",
                        "family sweeps need a linear family",
                    ));
                }
                if family_ts.len() == 1 {
                    errs.push(err(
                        "experiment.family_ts",
                        "a sweep needs at least two parameters",
                    ));
                }
            }
            Experiment::ClosingDemo {
                samples,
                max_period,
            } => {
                positive("samples", *samples, errs);
                positive("max_period", *max_period, errs);
            }
            Experiment::Sections {
                resolution,
                anchors,
                ..
            }
            | Experiment::Theorem31Suite {
                resolution,
                anchors,
                ..
            } => {
                positive("resolution", *resolution, errs);
                if *anchors < 4 {
                    errs.push(err(
                        "experiment.anchors",
                        "an atlas needs at least 4 anchors",
                    ));
                }
            }
            Experiment::ContractingSearch {
                steps,
                start,
                fiber_start,
                ..
            } => {
                positive("steps", *steps, errs);
                if fiber_start.is_some_and(|y| !y.is_finite()) {
                    errs.push(err("experiment.fiber_start", "must be finite"));
                }
                if start.is_some() && !matches!(self.base, BaseConfig::Cat { .. }) {
                    errs.push(err(
                        "experiment.start",
                        "explicit start points need a torus base",
                    ));
                }
            }
        }
    }

    fn cocycle_spec(&self, base: &BaseSystem, errs: &mut Vec<ConfigError>) -> Option<CocycleSpec> {
        let p = &self.cocycle.params;
        let path = "cocycle.params";
        let parsed = |r: Result<CocycleSpec, ConfigError>, errs: &mut Vec<ConfigError>| match r {
            Ok(s) => Some(s),
            Err(e) => {
                errs.push(e);
                None
            }
        };
        match self.cocycle.family_id {
            FamilyId::Identity => parsed(
                typed::<NoParams>(p, path).map(|_| CocycleSpec::circle(CircleFamily::Identity)),
                errs,
            ),
            FamilyId::Rotation => {
                let r = typed::<RotationParams>(p, path).map(|q| {
                    check_function(&q.angle, base, "cocycle.params.angle", errs);
                    CocycleSpec::circle(CircleFamily::Rotation { angle: q.angle })
                });
                parsed(r, errs)
            }
            FamilyId::ArnoldBump => {
                let r = typed::<BumpParams>(p, path).map(|q| {
                    check_function(&q.amplitude, base, "cocycle.params.amplitude", errs);
                    check_function(&q.shift, base, "cocycle.params.shift", errs);
                    check_amplitude(q.amplitude.sup_bound(), "cocycle.params.amplitude", errs);
                    CocycleSpec::circle(CircleFamily::ArnoldBump {
                        amplitude: q.amplitude,
                        shift: q.shift,
                    })
                });
                parsed(r, errs)
            }
            FamilyId::CoboundaryGenerated => {
                let r = typed::<CoboundaryParams>(p, path).map(|q| {
                    let g = q.generator;
                    for (name, f) in [("shift", &g.shift), ("amp", &g.amp), ("phase", &g.phase)] {
                        check_function(f, base, &format!("cocycle.params.generator.{name}"), errs);
                    }
                    check_amplitude(g.amp.sup_bound(), "cocycle.params.generator.amp", errs);
                    CocycleSpec::circle(CircleFamily::CoboundaryGenerated { generator: g })
                });
                parsed(r, errs)
            }
            FamilyId::GridTable => {
                let r = typed::<GridTableParams>(p, path).and_then(|q| {
                    let grid = BaseGrid::standard(base, q.resolution, q.resolution);
                    if q.maps.len() != grid.cell_count() {
                        return Err(err(
                            "cocycle.params.maps",
                            format!(
                                "{} maps for the {} cells of {}",
                                q.maps.len(),
                                grid.cell_count(),
                                grid.describe()
                            ),
                        ));
                    }
                    for (i, m) in q.maps.iter().enumerate() {
                        check_amplitude(
                            m.amp.abs(),
                            &format!("cocycle.params.maps[{i}].amp"),
                            errs,
                        );
                    }
                    Ok(CocycleSpec::circle(CircleFamily::GridTable {
                        grid,
                        maps: q.maps.into_iter().map(FiberMap::from).collect(),
                    }))
                });
                parsed(r, errs)
            }
            FamilyId::LocallyConstantSft => {
                let r = typed::<LocallyConstantParams>(p, path).and_then(|q| {
                    let BaseSystem::Shift(s) = base else {
                        return Err(err(
                            "cocycle.family_id",
                            "locally_constant_sft needs a shift base",
                        ));
                    };
                    if q.hi < q.lo {
                        return Err(err("cocycle.params.hi", "window end precedes its start"));
                    }
                    let width = (q.hi - q.lo + 1) as u32;
                    let need = s.alphabet_size.checked_pow(width).unwrap_or(usize::MAX);
                    if q.maps.len() != need {
                        return Err(err(
                            "cocycle.params.maps",
                            format!("{} maps for {need} words of length {width}", q.maps.len()),
                        ));
                    }
                    for (i, m) in q.maps.iter().enumerate() {
                        check_amplitude(
                            m.amp.abs(),
                            &format!("cocycle.params.maps[{i}].amp"),
                            errs,
                        );
                    }
                    Ok(CocycleSpec::circle(CircleFamily::LocallyConstant {
                        lo: q.lo,
                        hi: q.hi,
                        alphabet: s.alphabet_size,
                        maps: q.maps.into_iter().map(FiberMap::from).collect(),
                    }))
                });
                parsed(r, errs)
            }
            FamilyId::LinearFamily => {
                let r = typed::<LinearParams>(p, path).and_then(|q| {
                    let check_square = |g: &Vec<Vec<BaseFunction>>, errs: &mut Vec<ConfigError>| {
                        if g.is_empty() || g.iter().any(|row| row.len() != g.len()) {
                            return Err(err(
                                "cocycle.params.generator",
                                "generator must be a nonempty square matrix",
                            ));
                        }
                        for (i, row) in g.iter().enumerate() {
                            for (j, f) in row.iter().enumerate() {
                                check_function(
                                    f,
                                    base,
                                    &format!("cocycle.params.generator[{i}][{j}]"),
                                    errs,
                                );
                            }
                        }
                        Ok(())
                    };
                    let fam = match q {
                        LinearParams::Constant { matrix } => LinearFamily::Constant(
                            MatrixElement::from_rows(&matrix)
                                .map_err(|e| err("cocycle.params.matrix", e))?,
                        ),
                        LinearParams::Exp { t, generator } => {
                            check_square(&generator, errs)?;
                            LinearFamily::Exp { t, generator }
                        }
                        LinearParams::Coboundary { t, generator } => {
                            check_square(&generator, errs)?;
                            LinearFamily::Coboundary { t, generator }
                        }
                    };
                    Ok(CocycleSpec::linear(fam))
                });
                parsed(r, errs)
            }
        }
    }

    /// The same scenario with the linear generator scaled to parameter `t`.
    pub fn linear_at(&self, t: f64) -> Option<ScenarioConfig> {
        let mut next = self.clone();
        let obj = next.cocycle.params.as_object_mut()?;
        if !matches!(
            obj.get("form").and_then(Value::as_str),
            Some("exp" | "coboundary")
        ) {
            return None;
        }
        obj.insert("t".into(), serde_json::json!(t));
        Some(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "minimal",
        "base": {"kind": "cat", "matrix": [[2, 1], [1, 1]]},
        "cocycle": {"family_id": "identity"},
        "experiment": {"kind": "poo"}
    }"#;

    #[test]
    fn minimal_document_parses_with_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.experiment, Experiment::Poo { max_period: 6 });
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.cocycle.alpha, 1.0);
        assert_eq!(cfg.seed, 0);
        let again = parse_config(&emit_config(&cfg)).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn parabolic_matrix_is_rejected() {
        let doc = MINIMAL.replace("[[2, 1], [1, 1]]", "[[1, 1], [0, 1]]");
        let e = parse_config(&doc).unwrap_err();
        assert_eq!(e.0.len(), 1);
        assert_eq!(e.0[0].path, "base.matrix");
        assert!(e.0[0].reason.contains("not hyperbolic: |trace| ≤ 2"), "{e}");
    }

    #[test]
    fn non_unimodular_matrix_is_rejected() {
        let doc = MINIMAL.replace("[[2, 1], [1, 1]]", "[[3, 1], [1, 1]]");
        let e = parse_config(&doc).unwrap_err();
        assert!(e.0[0].reason.contains("det = 2"), "{e}");
    }

    #[test]
    fn reducible_transition_is_rejected() {
        let doc = MINIMAL.replace(
            r#"{"kind": "cat", "matrix": [[2, 1], [1, 1]]}"#,
            r#"{"kind": "sft", "transition": [[1, 0], [0, 1]], "theta": 0.5}"#,
        );
        let e = parse_config(&doc).unwrap_err();
        assert_eq!(e.0[0].path, "base.transition");
        assert!(e.0[0].reason.contains("not primitive"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let doc = MINIMAL.replace(r#""kind": "poo""#, r#""kind": "poo", "max_perod": 3"#);
        let e = parse_config(&doc).unwrap_err();
        assert_eq!(e.0[0].path, "experiment");
        assert!(e.0[0].reason.contains("max_perod"), "{e}");
        let doc = MINIMAL.replace(r#""name""#, r#""colour": 1, "name""#);
        assert!(parse_config(&doc).unwrap_err().0[0]
            .reason
            .contains("colour"));
    }

    #[test]
    fn unknown_experiment_kind_is_rejected() {
        let doc = MINIMAL.replace(r#""kind": "poo""#, r#""kind": "spectral_gap""#);
        let e = parse_config(&doc).unwrap_err();
        assert_eq!(e.0[0].path, "experiment.kind");
        assert!(
            e.0[0].reason.contains("unknown variant `spectral_gap`"),
            "{e}"
        );
    }

    #[test]
    fn family_parameters_are_checked_per_family() {
        let doc = MINIMAL.replace(
            r#"{"family_id": "identity"}"#,
            r#"{"family_id": "arnold_bump", "params": {"amplitude": {"const": 0.5}, "shfit": {"const": 0}}}"#,
        );
        let e = parse_config(&doc).unwrap_err();
        assert_eq!(e.0[0].path, "cocycle.params.shfit");
        assert!(e.0[0].reason.contains("unknown field"));

        let doc = MINIMAL.replace(
            r#"{"family_id": "identity"}"#,
            r#"{"family_id": "arnold_bump", "params": {"amplitude": {"const": 1.5}}}"#,
        );
        let e = parse_config(&doc).unwrap_err();
        assert_eq!(e.0[0].path, "cocycle.params.amplitude");

        let doc = MINIMAL.replace(
            r#"{"family_id": "identity"}"#,
            r#"{"family_id": "rotation", "params": {"angle": {"symbols": [{"index": 0, "values": [0.1, 0.2]}]}}}"#,
        );
        let e = parse_config(&doc).unwrap_err();
        assert_eq!(e.0[0].path, "cocycle.params.angle");
    }

    #[test]
    fn several_errors_are_reported_together() {
        let doc = MINIMAL
            .replace(
                r#""family_id": "identity""#,
                r#""family_id": "identity", "alpha": 0"#,
            )
            .replace(r#""kind": "poo""#, r#""kind": "poo", "max_period": 0"#);
        let e = parse_config(&doc).unwrap_err();
        let paths: Vec<&str> = e.0.iter().map(|e| e.path.as_str()).collect();
        assert_eq!(paths, ["cocycle.alpha", "experiment.max_period"]);
    }

    #[test]
    fn circle_experiments_reject_linear_families() {
        let doc = MINIMAL
            .replace(
                r#"{"family_id": "identity"}"#,
                r#"{"family_id": "linear_family", "params": {"form": "constant", "matrix": [[1, 0], [0, 1]]}}"#,
            )
            .replace(r#""kind": "poo""#, r#""kind": "sections""#);
        let e = parse_config(&doc).unwrap_err();
        assert_eq!(e.0[0].path, "experiment.kind");
    }
}
