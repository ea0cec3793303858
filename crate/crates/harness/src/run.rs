//! Dispatch of a validated scenario to the library operations.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use livsic_core::base::grid::plan_for_grid;
use livsic_core::base::{
    fit_closing, harvest_near_returns, BaseGrid, BasePoint, BaseSystem, DenseOrbitPlan, TorusPoint,
};
use livsic_core::cocycle::{CircleFamily, CocycleKind, FiberState, SkewSystem};
use livsic_core::fiber::{c0_distance, CircleDiffeo, CircleMap, FiberMap, MatrixElement};
use livsic_core::lyapunov::{
    domination_test, exponent_sweep, find_contracting_periodic, DominationGrid, DominationReport,
    FinderOptions, PeriodicOptions, SweepSummary,
};
use livsic_core::sections::{
    build_atlas, derivative_cocycle_along_section, groupoid_check, leaf_invariance,
    orbit_closure_section, trivialize, Atlas, DerivativeOptions, LeafOptions, PhaseVerdict,
    SectionOptions, TrivializeOptions,
};
use livsic_core::solver::{
    continuity_in_parameter, holder_bound_check, rebase, solve_diffeo, solve_linear, sup_distance,
    SolveOptions, SolveReport, TransferFunction,
};
use livsic_core::LabError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{ConfigErrors, Experiment, ScenarioConfig, SearchOutcome, Tolerances};

/// Random pairs in Hölder quotients of transfer functions.
const HOLDER_PAIRS: usize = 2000;
/// Fiber points per holonomy comparison.
const FIBER_POINTS: usize = 16;
/// Leaf depth bound for saturation and lifted leaves.
const LEAF: LeafOptions = LeafOptions {
    max_depth: 200,
    tol: 1e-8,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub outcome: String,
    pub pass: bool,
    /// Whether the verdict enters the run status.
    pub gating: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
}

/// A CSV table held in memory until emission.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    /// Leading `# key=value` lines.
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Self {
            file: file.into(),
            comments: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Plot-ready `(x, series, value)` table.
fn long_table(file: &str) -> Table {
    Table::new(file, &["x", "series", "value"])
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Artifacts {
    pub tables: Vec<Table>,
    /// JSON documents by file name.
    pub documents: Vec<(String, Value)>,
    /// Plain text files by name.
    pub texts: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    /// Data rows for CSV files.
    pub rows: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub scenario: String,
    pub experiment: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub status: Status,
    pub verdicts: Vec<Verdict>,
    pub metrics: BTreeMap<String, f64>,
    pub tolerances: Tolerances,
    pub files: Vec<FileEntry>,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub artifacts: Artifacts,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigErrors),
    Lab { context: String, error: LabError },
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "invalid configuration:\n{e}"),
            RunError::Lab { context, error } => write!(f, "{context}: {error}"),
        }
    }
}

impl std::error::Error for RunError {}

trait Context<T> {
    fn ctx(self, context: &str) -> Result<T, RunError>;
}

impl<T> Context<T> for livsic_core::Result<T> {
    fn ctx(self, context: &str) -> Result<T, RunError> {
        self.map_err(|error| RunError::Lab {
            context: context.into(),
            error,
        })
    }
}

/// Seed of the named sub-task, derived from the scenario seed alone so that
/// scheduling cannot change it.
pub fn sub_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// SHA-256 of the canonical JSON of the scenario, output directory excluded.
pub fn scenario_hash(cfg: &ScenarioConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir = Default::default();
    let canon = serde_json::to_string(&c).expect("configs serialize");
    hex(&Sha256::digest(canon.as_bytes()))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

struct Run<'a> {
    cfg: &'a ScenarioConfig,
    skew: SkewSystem,
    verdicts: Vec<Verdict>,
    metrics: BTreeMap<String, f64>,
    art: Artifacts,
}

impl Run<'_> {
    fn sys(&self) -> &BaseSystem {
        &self.skew.base
    }

    fn tol(&self) -> &Tolerances {
        &self.cfg.tolerances
    }

    fn seed(&self, label: &str) -> u64 {
        sub_seed(self.cfg.seed, label)
    }

    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.into(), v);
    }

    fn verdict(&mut self, name: &str, pass: bool, outcome: impl Into<String>, gating: bool) {
        self.verdicts.push(Verdict {
            name: name.into(),
            outcome: outcome.into(),
            pass,
            gating,
        });
    }

    fn document<T: Serialize>(&mut self, file: &str, v: &T) {
        let v = serde_json::to_value(v).expect("reports serialize");
        self.art.documents.push((file.into(), v));
    }

    fn grid(&self, res: usize) -> BaseGrid {
        BaseGrid::standard(self.sys(), res, res)
    }

    fn plan(
        &self,
        res: usize,
        two_sided: bool,
        label: &str,
    ) -> Result<Arc<DenseOrbitPlan>, RunError> {
        let grid = self.grid(res);
        plan_for_grid(self.sys(), grid, two_sided, self.seed(label))
            .map(Arc::new)
            .ctx(&format!("dense orbit plan on {}", grid.describe()))
    }

    fn family_id(&self) -> &'static str {
        self.skew.cocycle.family_id()
    }

    fn poo_failure(&mut self, e: &LabError) -> bool {
        if let LabError::Poo { n, defect, .. } = e {
            let outcome = format!("defect {defect:.3e} at period {n}");
            self.verdict("poo", false, outcome, true);
            self.metric("poo_worst_defect", *defect);
            self.metric("poo_failing_period", *n as f64);
            true
        } else {
            false
        }
    }
}

/// Runs the scenario and collects verdicts, metrics and artifacts. Module
/// errors that are scientific outcomes (obstructions, return claims) become
/// failing verdicts; every other error aborts the run.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult, RunError> {
    let clock = Instant::now();
    let skew = cfg.build().map_err(RunError::Config)?;
    let mut run = Run {
        cfg,
        skew,
        verdicts: Vec::new(),
        metrics: BTreeMap::new(),
        art: Artifacts::default(),
    };
    match &cfg.experiment {
        Experiment::Poo { max_period } => poo(&mut run, *max_period)?,
        Experiment::Lyapunov {
            max_period,
            random_orbits,
            orbit_length,
        } => {
            let s = sweep(&mut run, *max_period, *random_orbits, *orbit_length)?;
            exponents_verdict(&mut run, &s, false);
        }
        Experiment::Domination { beta, ell_max } => {
            let beta = beta.unwrap_or(cfg.cocycle.alpha);
            let r = domination(&mut run, beta, *ell_max);
            run.verdict("dominated", r.dominated(), domination_outcome(&r), false);
        }
        Experiment::Solve {
            resolutions,
            poo_period,
            export_grid,
            family_ts,
        } => {
            if run.skew.is_circle() {
                solve_circle(&mut run, resolutions, *poo_period, *export_grid)?;
            } else {
                solve_matrix(&mut run, resolutions, *poo_period, family_ts)?;
            }
        }
        Experiment::ClosingDemo {
            samples,
            max_period,
        } => closing(&mut run, *samples, *max_period)?,
        Experiment::Sections {
            resolution,
            anchors,
            leaves,
            leaf_samples,
            triples,
            derivative_resolution,
            horizon,
        } => {
            leaves_check(&mut run, *leaves, *leaf_samples)?;
            if let Some(atlas) = atlas(&mut run, *resolution, *anchors)? {
                holonomies(&mut run, &atlas, *triples)?;
            }
            if let Some(r) = derivative_resolution {
                derivative(&mut run, *r, *horizon)?;
            }
        }
        Experiment::ContractingSearch {
            steps,
            start,
            fiber_start,
            expect,
        } => contracting(&mut run, *steps, *start, *fiber_start, *expect)?,
        Experiment::Theorem31Suite {
            max_period,
            random_orbits,
            orbit_length,
            ell_max,
            resolution,
            anchors,
        } => {
            let s = sweep(&mut run, *max_period, *random_orbits, *orbit_length)?;
            exponents_verdict(&mut run, &s, true);
            let r = domination(&mut run, cfg.cocycle.alpha, *ell_max);
            run.verdict("dominated", r.dominated(), domination_outcome(&r), true);
            atlas(&mut run, *resolution, *anchors)?;
        }
    }
    let status = if run.verdicts.iter().all(|v| v.pass || !v.gating) {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(RunResult {
        scenario: cfg.name.clone(),
        experiment: cfg.experiment.kind().into(),
        scenario_hash: scenario_hash(cfg),
        seed: cfg.seed,
        status,
        verdicts: run.verdicts,
        metrics: run.metrics,
        tolerances: cfg.tolerances.clone(),
        files: Vec::new(),
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        artifacts: run.art,
    })
}

fn point_header(sys: &BaseSystem) -> Vec<String> {
    match sys {
        BaseSystem::Cat(_) => vec!["x".into(), "y".into()],
        BaseSystem::Shift(_) => (-4..=4).map(|i| format!("s{i}")).collect(),
    }
}

fn with_point(mut row: Vec<String>, p: &BasePoint) -> Vec<String> {
    row.extend(p.coordinates().into_iter().map(num));
    row
}

fn poo(run: &mut Run, max_period: usize) -> Result<(), RunError> {
    let report = run
        .skew
        .poo_check(max_period, run.tol().poo)
        .ctx("periodic orbit obstructions")?;
    let mut header = vec!["n".to_string(), "index".to_string()];
    header.extend(point_header(run.sys()));
    let mut points = Table {
        header,
        ..Table::new("periodic_points.csv", &[])
    };
    for n in 1..=max_period {
        let pts = run.sys().periodic_points(n).ctx("periodic points")?;
        for (i, p) in pts.iter().enumerate() {
            points.push(with_point(vec![n.to_string(), i.to_string()], p));
        }
    }
    let mut t = Table::new("poo.csv", &["n", "worst_defect", "pass"]);
    for &(n, d) in &report.per_period {
        t.push(vec![
            n.to_string(),
            num(d),
            (d <= report.tolerance).to_string(),
        ]);
    }
    run.metric("worst_defect", report.worst_defect);
    run.metric("points_checked", report.points_checked as f64);
    run.metric("max_period", max_period as f64);
    let outcome = match &report.worst_witness {
        Some((n, p)) if !report.pass => format!(
            "defect {:.3e} at period {n}, {}",
            report.worst_defect,
            p.label()
        ),
        _ => format!("worst defect {:.3e}", report.worst_defect),
    };
    run.verdict("poo", report.pass, outcome, true);
    run.document("poo_report.json", &report);
    run.art.tables.push(points);
    run.art.tables.push(t);
    Ok(())
}

fn sweep(
    run: &mut Run,
    max_period: usize,
    random_orbits: usize,
    n: usize,
) -> Result<SweepSummary, RunError> {
    let opts = PeriodicOptions::default();
    let s = exponent_sweep(
        &run.skew,
        max_period,
        random_orbits,
        n,
        run.seed("sweep"),
        &opts,
    )
    .ctx("exponent sweep")?;
    run.art.tables.push(sweep_table(&s));
    let mut long = long_table("sweep_long.csv");
    for (i, r) in s.rows.iter().enumerate() {
        long.push(vec![
            i.to_string(),
            "lambda_plus".into(),
            num(r.lambda_plus),
        ]);
        long.push(vec![
            i.to_string(),
            "lambda_minus".into(),
            num(r.lambda_minus),
        ]);
    }
    run.art.tables.push(long);
    run.metric("envelope_lo", s.envelope.0);
    run.metric("envelope_hi", s.envelope.1);
    run.metric("periodic_orbits", s.periodic_orbits as f64);
    run.metric("random_orbits", s.random_orbits as f64);
    Ok(s)
}

/// `id, type, lambda_plus, lambda_minus, length, multiplier`; `id` is the
/// period of periodic rows and the run index of generic rows.
pub fn sweep_table(s: &SweepSummary) -> Table {
    let mut t = Table::new(
        "sweep.csv",
        &[
            "id",
            "type",
            "lambda_plus",
            "lambda_minus",
            "length",
            "multiplier",
        ],
    );
    for r in &s.rows {
        t.push(vec![
            r.id.to_string(),
            r.kind.into(),
            num(r.lambda_plus),
            num(r.lambda_minus),
            r.length.to_string(),
            opt(r.multiplier),
        ]);
    }
    t
}

fn exponents_verdict(run: &mut Run, s: &SweepSummary, gating: bool) {
    let tol = run.tol().exponent_envelope;
    let (lo, hi) = s.envelope;
    let pass = !s.rows.is_empty() && lo > -tol && hi < tol;
    run.verdict(
        "exponents-zero",
        pass,
        format!("envelope [{lo:.4e}, {hi:.4e}]"),
        gating,
    );
}

fn domination(run: &mut Run, beta: f64, ell_max: usize) -> DominationReport {
    let grid = DominationGrid::standard(run.sys());
    let r = domination_test(&run.skew, beta, ell_max, &grid);
    let mut t = Table::new("domination.csv", &["beta", "ell", "margin", "side"]);
    t.push(vec![
        num(r.beta),
        r.ell_found.map(|l| l.to_string()).unwrap_or_default(),
        num(r.margin),
        r.side.into(),
    ]);
    let mut long = long_table("domination_long.csv");
    for (i, (u, s)) in r.u_ratios.iter().zip(&r.s_ratios).enumerate() {
        long.push(vec![(i + 1).to_string(), "u_ratio".into(), num(*u)]);
        long.push(vec![(i + 1).to_string(), "s_ratio".into(), num(*s)]);
    }
    run.art.tables.push(t);
    run.art.tables.push(long);
    run.metric("beta", r.beta);
    run.metric("domination_margin", r.margin);
    if let Some(l) = r.ell_found {
        run.metric("domination_ell", l as f64);
    }
    r
}

fn domination_outcome(r: &DominationReport) -> String {
    match r.ell_found {
        Some(l) => format!("pass at ell = {l}"),
        None => format!("fail at beta = {}", r.beta),
    }
}

fn transfer_comments(
    run: &Run,
    g: usize,
    res: usize,
    report: &SolveReport,
    u_anchor_cell: usize,
    plan: &DenseOrbitPlan,
) -> Vec<String> {
    vec![
        format!("G={g}"),
        format!("resolution={}", run.grid(res).describe()),
        format!("family_id={}", run.family_id()),
        format!("alpha={}", run.skew.cocycle.alpha),
        format!("anchor_cell={u_anchor_cell}"),
        format!("plan_seed={}", plan.seed),
        format!("N={}", plan.len()),
        format!("residual_c0={}", report.residual_c0),
        format!("residual_c1={}", report.residual_c1),
    ]
}

fn solve_options(run: &Run, poo_period: usize, tolerance: f64) -> SolveOptions {
    SolveOptions {
        poo_period,
        poo_tol: run.tol().poo,
        tolerance,
    }
}

/// `sup` over visited cells of the `C⁰` distance between the solution and
/// the generator normalized at the plan start.
fn generator_match(
    run: &Run,
    u: &TransferFunction<CircleDiffeo>,
    plan: &DenseOrbitPlan,
) -> Option<f64> {
    let CocycleKind::Circle(CircleFamily::CoboundaryGenerated { generator }) =
        &run.skew.cocycle.kind
    else {
        return None;
    };
    let sys = run.sys();
    let cells: Vec<usize> = u.visited().collect();
    let d = cells
        .par_iter()
        .map(|&c| {
            let x = u.points[c].as_ref().unwrap();
            let v = generator.normalized(sys, x, &plan.start, FiberMap::Identity);
            c0_distance(&v, u.values[c].as_ref().unwrap(), 256)
        })
        .reduce(|| 0.0, f64::max);
    Some(d)
}

fn solve_circle(
    run: &mut Run,
    resolutions: &[usize],
    poo_period: usize,
    export: usize,
) -> Result<(), RunError> {
    let opts = solve_options(run, poo_period, run.tol().residual);
    let g = run.skew.fiber_grid;
    let mut table = Table::new(
        "solve.csv",
        &[
            "resolution",
            "cells_visited",
            "orbit_length",
            "residual_c0",
            "residual_c1",
            "holder_ratio",
            "generator_match",
        ],
    );
    let mut long = long_table("residual_long.csv");
    let mut last = None;
    for &res in resolutions {
        let plan = run.plan(res, false, &format!("plan/{res}"))?;
        let (u, report) = match solve_diffeo(&run.skew, &plan, &CircleDiffeo::identity(g), &opts) {
            Err(e) if run.poo_failure(&e) => break,
            r => r.ctx(&format!("transfer function at resolution {res}"))?,
        };
        let holder = holder_bound_check(
            &u,
            &run.skew,
            HOLDER_PAIRS,
            run.seed(&format!("holder/{res}")),
        );
        let gm = generator_match(run, &u, &plan);
        table.push(vec![
            res.to_string(),
            u.visited_count().to_string(),
            plan.len().to_string(),
            num(report.residual_c0),
            num(report.residual_c1),
            opt(holder.ratio),
            opt(gm),
        ]);
        long.push(vec![
            res.to_string(),
            "residual_c0".into(),
            num(report.residual_c0),
        ]);
        long.push(vec![
            res.to_string(),
            "residual_c1".into(),
            num(report.residual_c1),
        ]);
        if let Some(m) = gm {
            long.push(vec![res.to_string(), "generator_match".into(), num(m)]);
        }
        last = Some((res, plan, u, report, gm));
    }
    run.art.tables.push(table);
    run.art.tables.push(long);
    let Some((res, plan, u, report, gm)) = last else {
        return Ok(());
    };
    run.verdict(
        "poo",
        true,
        format!("periods up to {poo_period} pass"),
        true,
    );
    let mut t = Table::new("transfer.csv", &["cell", "index", "lift", "derivative"]);
    t.comments = transfer_comments(run, export, res, &report, u.anchor_cell, &plan);
    for c in u.visited() {
        let uc = u.values[c].as_ref().unwrap();
        for i in 0..export {
            let s = i as f64 / export as f64;
            let (l, d) = uc.lift_with_deriv(s);
            t.push(vec![c.to_string(), i.to_string(), num(l), num(d)]);
        }
    }
    run.art.tables.push(t);
    run.metric("residual_c0", report.residual_c0);
    run.metric("residual_c1", report.residual_c1);
    run.metric("cells_visited", u.visited_count() as f64);
    run.verdict(
        "residual",
        report.residual_c0 < run.tol().residual,
        format!("residual_c0 {:.3e}", report.residual_c0),
        true,
    );
    if let Some(m) = gm {
        run.metric("generator_match", m);
        run.verdict(
            "generator-match",
            m < run.tol().generator_match,
            format!("sup distance {m:.3e}"),
            true,
        );
    }
    run.document("solve_report.json", &report);
    Ok(())
}

fn matrix_table(
    run: &Run,
    res: usize,
    u: &TransferFunction<MatrixElement>,
    report: &SolveReport,
    plan: &DenseOrbitPlan,
) -> Table {
    let mut t = Table::new("transfer.csv", &["cell", "row", "col", "value"]);
    t.comments = transfer_comments(run, 0, res, report, u.anchor_cell, plan);
    t.comments[0] = format!("d={}", run.skew.cocycle.dim());
    for c in u.visited() {
        let m = &u.values[c].as_ref().unwrap().entries;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                t.push(vec![
                    c.to_string(),
                    i.to_string(),
                    j.to_string(),
                    num(m[(i, j)]),
                ]);
            }
        }
    }
    t
}

fn solve_matrix(
    run: &mut Run,
    resolutions: &[usize],
    poo_period: usize,
    ts: &[f64],
) -> Result<(), RunError> {
    let opts = solve_options(run, poo_period, run.tol().linear);
    let anchor = MatrixElement::identity(run.skew.cocycle.dim());
    let mut table = Table::new(
        "solve.csv",
        &[
            "resolution",
            "cells_visited",
            "orbit_length",
            "residual_c0",
            "residual_c1",
            "holder_ratio",
            "generator_match",
        ],
    );
    let mut long = long_table("residual_long.csv");
    let mut ratios = Vec::new();
    let mut last = None;
    let mut coarse = None;
    for &res in resolutions {
        let plan = run.plan(res, false, &format!("plan/{res}"))?;
        if coarse.is_none() {
            coarse = Some((res, plan.clone()));
        }
        let (u, report) = match solve_linear(&run.skew, &plan, &anchor, &opts) {
            Err(e) if run.poo_failure(&e) => break,
            r => r.ctx(&format!("linear transfer function at resolution {res}"))?,
        };
        let holder = holder_bound_check(
            &u,
            &run.skew,
            HOLDER_PAIRS,
            run.seed(&format!("holder/{res}")),
        );
        ratios.push((res, holder.ratio));
        table.push(vec![
            res.to_string(),
            u.visited_count().to_string(),
            plan.len().to_string(),
            num(report.residual_c0),
            num(report.residual_c1),
            opt(holder.ratio),
            String::new(),
        ]);
        long.push(vec![
            res.to_string(),
            "residual_c0".into(),
            num(report.residual_c0),
        ]);
        if let Some(r) = holder.ratio {
            long.push(vec![res.to_string(), "holder_ratio".into(), num(r)]);
        }
        last = Some((res, plan, u, report));
    }
    run.art.tables.push(table);
    run.art.tables.push(long);
    let Some((res, plan, u, report)) = last else {
        return Ok(());
    };
    run.verdict(
        "poo",
        true,
        format!("periods up to {poo_period} pass"),
        true,
    );
    run.art
        .tables
        .push(matrix_table(run, res, &u, &report, &plan));
    run.metric("residual_c0", report.residual_c0);
    run.metric("cells_visited", u.visited_count() as f64);
    run.verdict(
        "residual",
        report.residual_c0 < run.tol().linear,
        format!("entrywise residual {:.3e}", report.residual_c0),
        true,
    );
    run.document("solve_report.json", &report);

    // a second plan with its own start point, both normalized at one cell
    let plan_b = run.plan(res, false, &format!("plan-b/{res}"))?;
    let (u_b, report_b) =
        solve_linear(&run.skew, &plan_b, &anchor, &opts).ctx("second-plan transfer function")?;
    let pivot = u.anchor_cell;
    let spread = sup_distance(
        &rebase(&u, pivot).ctx("normalization")?,
        &rebase(&u_b, pivot).ctx("normalization")?,
    );
    let transport_error = report.residual_c0.max(report_b.residual_c0);
    run.metric("anchor_spread", spread);
    run.metric("transport_error", transport_error);
    run.verdict(
        "anchor-uniqueness",
        spread < 2.0 * transport_error,
        format!("spread {spread:.3e} vs transport error {transport_error:.3e}"),
        true,
    );

    let known: Vec<(usize, f64)> = ratios.iter().filter_map(|&(r, q)| Some((r, q?))).collect();
    if known.len() >= 2 {
        let worst = known
            .windows(2)
            .map(|w| (w[1].1 / w[0].1 - 1.0).abs())
            .fold(0.0, f64::max);
        run.metric("holder_ratio_drift", worst);
        run.verdict(
            "holder-ratio-stable",
            worst <= 0.2,
            format!("largest relative change {worst:.3}"),
            true,
        );
    }

    if let (false, Some((coarse_res, coarse))) = (ts.is_empty(), coarse) {
        run.metric("family_resolution", coarse_res as f64);
        family_sweep(run, &coarse, &anchor, &opts, ts)?;
    }
    Ok(())
}

/// Solves `t ↦ exp(t·B)`-type members on one plan and fits the decay of
/// consecutive variations against the parameter step.
fn family_sweep(
    run: &mut Run,
    plan: &DenseOrbitPlan,
    anchor: &MatrixElement,
    opts: &SolveOptions,
    ts: &[f64],
) -> Result<(), RunError> {
    let members: Vec<(f64, SkewSystem)> = ts
        .iter()
        .map(|&t| {
            let cfg = run.cfg.linear_at(t).ok_or_else(|| RunError::Lab {
                context: "family sweep".into(),
                error: LabError::Invalid("family sweeps need an exp or coboundary form".into()),
            })?;
            Ok((t, cfg.build().map_err(RunError::Config)?))
        })
        .collect::<Result<_, RunError>>()?;
    let (_, report) = continuity_in_parameter(ts, |t| {
        let skew = &members.iter().find(|m| m.0 == t).unwrap().1;
        solve_linear(skew, plan, anchor, opts).map(|r| r.0)
    })
    .ctx("family sweep")?;
    let mut long = long_table("family_long.csv");
    let steps: Vec<f64> = ts.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    for (i, (&v, &m)) in report.variations.iter().zip(&report.moduli).enumerate() {
        long.push(vec![num(steps[i]), "variation".into(), num(v)]);
        long.push(vec![num(steps[i]), "modulus".into(), num(m)]);
    }
    run.art.tables.push(long);
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .zip(&report.variations)
        .filter(|(s, v)| **s > 0.0 && **v > 0.0)
        .map(|(s, v)| (s.ln(), v.ln()))
        .collect();
    let slope = log_slope(&pts);
    run.metric("family_variation_slope", slope);
    run.metric("family_max_variation", report.max_variation);
    run.verdict(
        "family-continuity",
        (slope - 1.0).abs() <= 0.2,
        format!("variation ~ step^{slope:.3}"),
        true,
    );
    run.document("family_report.json", &report);
    Ok(())
}

pub fn log_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| {
        (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2))
    });
    if sxx > 0.0 {
        sxy / sxx
    } else {
        f64::NAN
    }
}

fn closing(run: &mut Run, samples: usize, max_period: usize) -> Result<(), RunError> {
    let sys = run.sys();
    let harvested = harvest_near_returns(sys, samples, max_period, run.seed("harvest"))
        .ctx("near-return harvest")?;
    let results = harvested
        .par_iter()
        .map(|h| sys.anosov_closing(&h.x, h.n))
        .collect::<livsic_core::Result<Vec<_>>>()
        .ctx("closing")?;
    let fit = fit_closing(sys, &results);
    let mut t = Table::new(
        "closing.csv",
        &[
            "sample",
            "n",
            "return_distance",
            "worst_bound_ratio",
            "periodic_point",
        ],
    );
    let mut label = Table::new("closing_points.csv", &["sample"]);
    label.header.extend(point_header(sys));
    for (i, r) in results.iter().enumerate() {
        let worst = r
            .bound_trace
            .iter()
            .flat_map(|row| (0..3).map(move |k| row.distances[k] / row.bounds[k]))
            .fold(0.0, f64::max);
        t.push(vec![
            i.to_string(),
            r.n.to_string(),
            num(r.return_distance),
            num(worst),
            r.p.label(),
        ]);
        label.push(with_point(vec![i.to_string()], &r.p));
    }
    run.art.tables.push(t);
    run.art.tables.push(label);
    run.metric("lambda_fit", fit.lambda);
    run.metric("c_fit", fit.c);
    run.metric("lambda_apriori", fit.lambda_apriori);
    run.metric("c_apriori", fit.c_apriori);
    run.metric("bound_rows", fit.rows as f64);
    run.verdict(
        "closing-bounds",
        fit.apriori_hold,
        format!(
            "{} samples at c = {:.4}, lambda = {:.4}",
            fit.samples, fit.c_apriori, fit.lambda_apriori
        ),
        true,
    );
    let ratio = fit.lambda_ratio();
    run.verdict(
        "closing-rate",
        (0.5..=2.0).contains(&ratio),
        format!(
            "fitted lambda {:.4} ({ratio:.3} of the a-priori rate)",
            fit.lambda
        ),
        true,
    );
    run.document("closing_fit.json", &fit);
    Ok(())
}

fn leaves_check(run: &mut Run, leaves: usize, samples: usize) -> Result<(), RunError> {
    let r = leaf_invariance(&run.skew, leaves, samples, run.seed("leaves"), &LEAF)
        .ctx("leaf invariance")?;
    run.metric("leaf_max_deviation", r.max_deviation);
    run.metric("leaf_max_lipschitz", r.max_empirical_lipschitz);
    run.metric("leaf_max_depth", r.max_depth as f64);
    let dev_ok = r.all_converged && r.max_deviation < run.tol().leaf;
    run.verdict(
        "leaf-invariance",
        dev_ok,
        format!("deviation {:.3e}", r.max_deviation),
        true,
    );
    run.verdict(
        "leaf-lipschitz",
        r.uniform,
        format!(
            "{} leaves, largest quotient {:.4}",
            r.leaves, r.max_empirical_lipschitz
        ),
        true,
    );
    run.document("leaves.json", &r);
    Ok(())
}

/// Builds the orbit-closure atlas and the trivializing conjugacy. A
/// violated return claim ends this part with the phase verdict.
fn atlas(run: &mut Run, res: usize, anchors: usize) -> Result<Option<Atlas>, RunError> {
    let plan = run.plan(res, true, &format!("atlas/{res}"))?;
    let built = build_atlas(&run.skew, plan, anchors, &SectionOptions::default());
    let phase = PhaseVerdict::of(&built);
    let atlas = match built {
        Err(LabError::ReturnClaim(msg)) => {
            run.art.texts.push((
                "phase.txt".into(),
                format!("{}\n", PhaseVerdict::ReturnClaimViolated.label()),
            ));
            run.verdict(
                "coboundary",
                false,
                PhaseVerdict::ReturnClaimViolated.label(),
                true,
            );
            run.document(
                "phase.json",
                &json!({"phase": "return-claim-violated", "detail": msg}),
            );
            return Ok(None);
        }
        r => r.ctx("orbit-closure atlas")?,
    };
    let t = trivialize(
        &run.skew,
        &atlas,
        &TrivializeOptions {
            seed: run.seed("trivialize"),
            ..TrivializeOptions::default()
        },
    )
    .ctx("trivialization")?;
    let label = phase.map_or("coboundary-consistent", |p| p.label());
    run.art
        .texts
        .push(("phase.txt".into(), format!("{label}\n")));
    run.metric("conjugacy_residual", t.conjugacy_residual);
    run.metric("conjugated_exponent", t.conjugated_exponent);
    run.metric("atlas_anchors", atlas.m() as f64);
    run.verdict(
        "coboundary",
        t.conjugacy_residual < run.tol().conjugacy,
        format!("{label}, conjugacy residual {:.3e}", t.conjugacy_residual),
        true,
    );
    let mut table = Table::new(
        "trivialization.csv",
        &["cell", "index", "lift", "derivative"],
    );
    table.comments = vec![
        format!("G={FIBER_POINTS}"),
        format!("resolution={}", atlas.plan.grid.describe()),
        format!("family_id={}", run.family_id()),
        format!("alpha={}", run.skew.cocycle.alpha),
        format!("anchor_cell={}", t.anchor_cell),
    ];
    for (c, h) in t.h_values.iter().enumerate() {
        let Some(h) = h else { continue };
        for i in 0..FIBER_POINTS {
            let (l, d) = h.lift_with_deriv(i as f64 / FIBER_POINTS as f64);
            table.push(vec![c.to_string(), i.to_string(), num(l), num(d)]);
        }
    }
    let mut section = Table::new("section.csv", &["cell", "value", "interpolated"]);
    section.header.splice(1..1, point_header(run.sys()));
    for row in atlas.sections[0].report_rows(run.sys(), &atlas.plan) {
        let mut r = vec![row.cell.to_string()];
        r.extend(row.coordinates.into_iter().map(num));
        r.push(num(row.value));
        r.push(row.interpolated.to_string());
        section.push(r);
    }
    run.art.tables.push(table);
    run.art.tables.push(section);
    run.document("trivialization.json", &t);
    Ok(Some(atlas))
}

fn holonomies(run: &mut Run, atlas: &Atlas, triples: usize) -> Result<(), RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed("groupoid"));
    let sys = run.sys().clone();
    let pts: Vec<_> = (0..triples)
        .map(|_| {
            (
                sys.random_point(&mut rng),
                sys.random_point(&mut rng),
                sys.random_point(&mut rng),
            )
        })
        .collect();
    let g = groupoid_check(&run.skew, atlas, &pts, FIBER_POINTS).ctx("holonomy groupoid")?;
    run.metric("groupoid_composition", g.composition);
    run.metric("groupoid_identity", g.identity);
    run.verdict(
        "groupoid",
        g.composition < run.tol().groupoid && g.identity < run.tol().groupoid,
        format!(
            "composition {:.3e}, identity {:.3e}",
            g.composition, g.identity
        ),
        true,
    );
    run.document("groupoid.json", &g);
    Ok(())
}

fn derivative(run: &mut Run, res: usize, horizon: usize) -> Result<(), RunError> {
    let plan = run.plan(res, true, &format!("derivative/{res}"))?;
    let y0 = ChaCha8Rng::seed_from_u64(run.seed("derivative-fiber")).gen::<f64>();
    let section = orbit_closure_section(&run.skew, y0, &plan, &SectionOptions::default())
        .ctx("derivative section")?;
    let opts = DerivativeOptions {
        solve: SolveOptions {
            poo_tol: run.tol().poo,
            tolerance: run.tol().linear,
            ..SolveOptions::default()
        },
        horizon,
        leaf: LEAF,
        ..DerivativeOptions::default()
    };
    let d = match derivative_cocycle_along_section(&run.skew, &section, &plan, &opts) {
        Err(e) if run.poo_failure(&e) => return Ok(()),
        r => r.ctx("derivative cocycle along the section")?,
    };
    run.metric("derivative_residual", d.report.residual_c0);
    run.metric("derivative_poo", d.poo.worst_defect);
    run.metric("uniform_sup", d.uniform.sup);
    run.metric("uniform_sup_half", d.uniform.sup_half);
    run.metric("uniform_constant", d.uniform.constant);
    run.verdict(
        "derivative-residual",
        d.report.residual_c0 < run.tol().linear,
        format!("residual {:.3e}", d.report.residual_c0),
        true,
    );
    run.verdict(
        "uniform-bound",
        d.uniform.pass && d.uniform.stable,
        format!(
            "sup {:.4} against C = {:.4}",
            d.uniform.sup, d.uniform.constant
        ),
        true,
    );
    let mut t = Table::new("derivative.csv", &["cell", "derivative", "transfer"]);
    for c in d.transfer.visited() {
        let u = d.transfer.values[c].as_ref().unwrap().entries[(0, 0)];
        t.push(vec![c.to_string(), opt(d.values[c]), num(u)]);
    }
    run.art.tables.push(t);
    run.document("derivative.json", &d);
    Ok(())
}

fn contracting(
    run: &mut Run,
    steps: usize,
    start: Option<[f64; 2]>,
    fiber_start: Option<f64>,
    expect: Option<SearchOutcome>,
) -> Result<(), RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed("search"));
    let x = match start {
        Some([a, b]) => BasePoint::Torus(TorusPoint::new(a, b)),
        None => run.sys().random_orbit_start(&mut rng, steps),
    };
    let y = fiber_start.unwrap_or_else(|| rng.gen());
    let found = find_contracting_periodic(
        &run.skew,
        &(x, FiberState::Circle(y)),
        steps,
        &FinderOptions::default(),
    );
    let mut t = Table::new(
        "contracting.csv",
        &[
            "outcome",
            "period",
            "multiplier",
            "found_at",
            "return_distance",
            "point",
        ],
    );
    let outcome = match found {
        Ok(c) => {
            t.push(vec![
                "found".into(),
                c.n.to_string(),
                num(c.multiplier),
                c.found_at.to_string(),
                num(c.return_distance),
                c.p.label(),
            ]);
            run.metric("multiplier", c.multiplier);
            run.metric("period", c.n as f64);
            run.metric("found_at", c.found_at as f64);
            run.document("contracting.json", &c);
            SearchOutcome::Found
        }
        Err(LabError::NotFound(n)) => {
            t.push(vec![
                "not_found".into(),
                String::new(),
                String::new(),
                n.to_string(),
                String::new(),
                String::new(),
            ]);
            SearchOutcome::NotFound
        }
        Err(e) => return Err(e).ctx("contracting periodic search"),
    };
    run.art.tables.push(t);
    let label = match outcome {
        SearchOutcome::Found => "found",
        SearchOutcome::NotFound => "not-found",
    };
    let pass = expect.is_none_or(|e| e == outcome);
    run.verdict("contracting-point", pass, label, expect.is_some());
    Ok(())
}
