//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the
//! process exits nonzero if any fails. Positional arguments select
//! criteria by id (`AC3`, `3`).

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use livsic_core::base::BaseSystem;
use livsic_harness::{parse_config, Experiment, ScenarioConfig};
use serde_json::Value;

const CAT_COUNTS: [u128; 8] = [1, 5, 16, 45, 121, 320, 841, 2205];

struct Outcome {
    code: i32,
    summary: Value,
    dir: PathBuf,
    seconds: f64,
}

impl Outcome {
    fn metric(&self, key: &str) -> f64 {
        self.summary["metrics"][key].as_f64().unwrap_or(f64::NAN)
    }

    fn verdict(&self, name: &str) -> Option<bool> {
        self.summary["verdicts"]
            .as_array()?
            .iter()
            .find(|v| v["name"] == name)
            .and_then(|v| v["pass"].as_bool())
    }

    fn table(&self, file: &str) -> Vec<BTreeMap<String, String>> {
        let Ok(mut r) = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(self.dir.join(file))
        else {
            return Vec::new();
        };
        let header = r.headers().unwrap().clone();
        r.records()
            .map(|rec| {
                let rec = rec.unwrap();
                header
                    .iter()
                    .map(String::from)
                    .zip(rec.iter().map(String::from))
                    .collect()
            })
            .collect()
    }
}

/// Runs corpus scenarios through the `livsic` binary, once per
/// (scenario, jobs) pair.
struct Lab {
    root: tempfile::TempDir,
    runs: BTreeMap<(String, usize), Outcome>,
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn config(name: &str) -> ScenarioConfig {
    let text = fs::read_to_string(scenarios().join(format!("{name}.json"))).unwrap();
    parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

impl Lab {
    fn new() -> Self {
        Lab {
            root: tempfile::tempdir().unwrap(),
            runs: BTreeMap::new(),
        }
    }

    fn run(&mut self, name: &str, jobs: usize) -> &Outcome {
        let key = (name.to_string(), jobs);
        if !self.runs.contains_key(&key) {
            let dir = self.root.path().join(format!("jobs{jobs}")).join(name);
            let cfg = scenarios().join(format!("{name}.json"));
            let clock = Instant::now();
            let out = Command::new(env!("CARGO_BIN_EXE_livsic"))
                .args(["run", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()])
                .args(["--jobs", &jobs.to_string()])
                .output()
                .unwrap();
            let seconds = clock.elapsed().as_secs_f64();
            let summary = fs::read(dir.join("summary.json"))
                .ok()
                .and_then(|b| serde_json::from_slice(&b).ok())
                .unwrap_or(Value::Null);
            let code = out.status.code().unwrap_or(-1);
            self.runs.insert(
                key.clone(),
                Outcome {
                    code,
                    summary,
                    dir,
                    seconds,
                },
            );
        }
        &self.runs[&key]
    }
}

#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn require(&mut self, ok: bool, what: impl Display) {
        if !ok {
            self.failures.push(what.to_string());
        }
    }

    fn note(&mut self, what: impl Display) {
        self.notes.push(what.to_string());
    }

    fn budget(&mut self, seconds: f64, limit: f64) {
        self.require(
            seconds < limit,
            format!("took {seconds:.1} s, budget {limit} s"),
        );
    }
}

fn cat_power(n: usize) -> [[i64; 2]; 2] {
    let mut m = [[1, 0], [0, 1]];
    for _ in 0..n {
        m = [
            [2 * m[0][0] + m[0][1], m[0][0] + m[0][1]],
            [2 * m[1][0] + m[1][1], m[1][0] + m[1][1]],
        ];
    }
    m
}

/// Brute force over `(1/D)ℤ²`: iterates the map `n` times in exact integer
/// arithmetic mod `D` and counts the points that come back.
fn lattice_count(n: usize) -> u128 {
    let m = cat_power(n);
    let d = ((m[0][0] - 1) * (m[1][1] - 1) - m[0][1] * m[1][0]).abs();
    let mut count = 0;
    for p in 0..d {
        for q in 0..d {
            let (mut a, mut b) = (p, q);
            for _ in 0..n {
                (a, b) = ((2 * a + b) % d, (a + b) % d);
            }
            if (a, b) == (p, q) {
                count += 1;
            }
        }
    }
    count
}

fn closed_form(n: usize) -> u128 {
    let lu = (3.0 + 5f64.sqrt()) / 2.0;
    (lu.powi(n as i32) + lu.powi(-(n as i32)) - 2.0).round() as u128
}

fn ac1(_: &mut Lab, c: &mut Checks) {
    let clock = Instant::now();
    let cat = BaseSystem::cat([[2, 1], [1, 1]]).unwrap();
    for n in 1..=8 {
        let frozen = CAT_COUNTS[n - 1];
        let brute = lattice_count(n);
        c.require(brute == frozen, format!("lattice count {brute} at n={n}"));
        c.require(closed_form(n) == frozen, format!("closed form at n={n}"));
        let counted = cat.periodic_count(n).unwrap();
        let points = cat.periodic_points(n).unwrap();
        c.require(
            counted == frozen,
            format!("periodic_count {counted} at n={n}"),
        );
        c.require(
            points.len() as u128 == frozen,
            format!("{} points at n={n}", points.len()),
        );
        c.require(
            points.iter().all(|p| cat.is_periodic(p, n)),
            format!("non-periodic point at n={n}"),
        );
    }
    c.note("n=1..8 counts 1, 5, 16, 45, 121, 320, 841, 2205");
    c.budget(clock.elapsed().as_secs_f64(), 5.0);
}

fn ac2(lab: &mut Lab, c: &mut Checks) {
    let mut total = 0.0;
    for name in ["closing_cat", "closing_shift", "closing_golden_mean"] {
        let r = lab.run(name, 1);
        total += r.seconds;
        c.require(r.code == 0, format!("{name} exit {}", r.code));
        let rows = r.table("closing.csv");
        c.require(rows.len() == 100, format!("{name}: {} samples", rows.len()));
        let worst = rows
            .iter()
            .map(|row| {
                row["worst_bound_ratio"]
                    .parse::<f64>()
                    .unwrap_or(f64::INFINITY)
            })
            .fold(0.0, f64::max);
        c.require(worst <= 1.0, format!("{name}: bound ratio {worst}"));
        let rate = r.metric("lambda_fit") / r.metric("lambda_apriori");
        c.require(
            (0.5..=2.0).contains(&rate),
            format!("{name}: rate ratio {rate}"),
        );
        c.require(
            r.verdict("closing-bounds") == Some(true),
            format!("{name}: closing-bounds"),
        );
        c.note(format!("{name} worst ratio {worst:.3}, rate {rate:.3}"));
    }
    c.budget(total, 30.0);
}

const BASES: [&str; 2] = ["cat", "shift"];

fn ac3(lab: &mut Lab, c: &mut Checks) {
    for base in BASES {
        let mut generators = Vec::new();
        for g in 1..=5 {
            let name = format!("solve_roundtrip_{base}_g{g}");
            let cfg = config(&name);
            generators.push(serde_json::to_string(&cfg.cocycle.params).unwrap());
            c.require(
                cfg.cocycle.fiber_grid == 1024,
                format!("{name}: fiber grid {}", cfg.cocycle.fiber_grid),
            );
            if let Experiment::Solve {
                resolutions,
                poo_period,
                ..
            } = &cfg.experiment
            {
                let finest = if base == "cat" { 64 } else { 6 };
                c.require(
                    resolutions.last() == Some(&finest),
                    format!("{name}: resolutions {resolutions:?}"),
                );
                c.require(*poo_period == 6, format!("{name}: poo period {poo_period}"));
            }
            let r = lab.run(&name, 1);
            c.require(r.code == 0, format!("{name} exit {}", r.code));
            c.require(
                r.summary["tolerances"]["poo"] == 1e-4,
                format!("{name}: poo tolerance"),
            );
            c.require(r.verdict("poo") == Some(true), format!("{name}: poo"));
            let (res, gm) = (r.metric("residual_c0"), r.metric("generator_match"));
            c.require(res < 5e-3, format!("{name}: residual {res:.3e}"));
            c.require(gm < 5e-3, format!("{name}: generator match {gm:.3e}"));
            c.budget(r.seconds, 300.0);
            c.note(format!("{name} {res:.2e}"));
        }
        generators.sort();
        generators.dedup();
        c.require(
            generators.len() == 5,
            format!("{base}: generators not distinct"),
        );
    }
}

fn ac4(lab: &mut Lab, c: &mut Checks) {
    let mut total = 0.0;
    for base in BASES {
        for g in 1..=5 {
            let name = format!("suite_roundtrip_{base}_g{g}");
            let alpha = config(&name).cocycle.alpha;
            let r = lab.run(&name, 1);
            total += r.seconds;
            c.require(r.code == 0, format!("{name} exit {}", r.code));
            let (lo, hi) = (r.metric("envelope_lo"), r.metric("envelope_hi"));
            c.require(
                lo > -1e-2 && hi < 1e-2,
                format!("{name}: envelope [{lo:.3e}, {hi:.3e}]"),
            );
            c.require(
                r.metric("random_orbits") == 20.0,
                format!("{name}: random orbits"),
            );
            c.require(
                r.metric("beta") == alpha,
                format!("{name}: beta {}", r.metric("beta")),
            );
            let ell = r.metric("domination_ell");
            c.require(ell <= 20.0, format!("{name}: ell {ell}"));
            let conj = r.metric("conjugacy_residual");
            c.require(
                conj < 1e-2,
                format!("{name}: conjugacy residual {conj:.3e}"),
            );
        }
    }
    let r = lab.run("suite_bump_cat", 1);
    total += r.seconds;
    let (lo, hi) = (r.metric("envelope_lo"), r.metric("envelope_hi"));
    c.require((lo + 0.69).abs() < 5e-2, format!("bump envelope low {lo}"));
    c.require((hi - 0.40).abs() < 5e-2, format!("bump envelope high {hi}"));
    let phase = fs::read_to_string(r.dir.join("phase.txt")).unwrap_or_default();
    c.require(
        phase.trim() == "return-claim-violated",
        format!("bump phase {:?}", phase.trim()),
    );
    c.note(format!(
        "bump envelope [{lo:.4}, {hi:.4}], {}",
        phase.trim()
    ));
    c.budget(total, 600.0);
}

fn ac5(lab: &mut Lab, c: &mut Checks) {
    let r = lab.run("contracting_bump_cat", 1);
    let mut total = r.seconds;
    let rows = r.table("contracting.csv");
    match rows.first() {
        Some(row) => {
            let mult: f64 = row["multiplier"].parse().unwrap_or(f64::NAN);
            c.require(row["outcome"] == "found", "bump: no contracting point");
            c.require(
                row["period"] == "1",
                format!("bump period {}", row["period"]),
            );
            c.require((mult - 0.5).abs() < 1e-6, format!("bump multiplier {mult}"));
            c.require(
                row["point"] == "(0/1, 0/1)",
                format!("bump point {}", row["point"]),
            );
            c.note(format!("bump multiplier {mult} at {}", row["point"]));
        }
        None => c.require(false, "bump: empty contracting table"),
    }
    for base in BASES {
        for g in 1..=5 {
            let name = format!("contracting_roundtrip_{base}_g{g}");
            if let Experiment::ContractingSearch { steps, .. } = config(&name).experiment {
                c.require(steps == 1_000_000, format!("{name}: {steps} steps"));
            }
            let r = lab.run(&name, 1);
            total += r.seconds;
            let outcome = r
                .table("contracting.csv")
                .first()
                .map(|row| row["outcome"].clone());
            c.require(
                outcome.as_deref() == Some("not_found"),
                format!("{name}: {outcome:?}"),
            );
        }
    }
    c.budget(total, 120.0);
}

fn ac6(lab: &mut Lab, c: &mut Checks) {
    let mut total = 0.0;
    for name in ["solve_linear_cat", "solve_linear_shift"] {
        let r = lab.run(name, 1);
        total += r.seconds;
        c.require(r.code == 0, format!("{name} exit {}", r.code));
        let res = r.metric("residual_c0");
        c.require(res < 1e-3, format!("{name}: residual {res:.3e}"));
        let (spread, err) = (r.metric("anchor_spread"), r.metric("transport_error"));
        c.require(
            spread < 2.0 * err,
            format!("{name}: spread {spread:.3e} vs {err:.3e}"),
        );
        let drift = r.metric("holder_ratio_drift");
        c.require(drift <= 0.2, format!("{name}: holder drift {drift:.3}"));
        let slope = r.metric("family_variation_slope");
        c.require(
            (slope - 1.0).abs() <= 0.2,
            format!("{name}: variation slope {slope:.3}"),
        );
        c.note(format!("{name} {res:.2e}, slope {slope:.3}"));
    }
    c.budget(total, 300.0);
}

fn ac7(lab: &mut Lab, c: &mut Checks) {
    let name = "sections_generator_cat";
    if let Experiment::Sections {
        leaves, horizon, ..
    } = config(name).experiment
    {
        c.require(
            leaves == 100 && horizon == 1000,
            format!("{leaves} leaves, horizon {horizon}"),
        );
    }
    let r = lab.run(name, 1);
    c.require(r.code == 0, format!("exit {}", r.code));
    let dev = r.metric("leaf_max_deviation");
    c.require(dev < 1e-6, format!("leaf deviation {dev:.3e}"));
    c.require(
        r.verdict("leaf-invariance") == Some(true),
        "leaf depth did not converge",
    );
    c.require(
        r.verdict("leaf-lipschitz") == Some(true),
        "leaf Lipschitz bound not uniform",
    );
    let comp = r.metric("groupoid_composition");
    c.require(comp < 1e-2, format!("groupoid composition {comp:.3e}"));
    let res = r.metric("derivative_residual");
    c.require(res < 1e-3, format!("derivative residual {res:.3e}"));
    let (sup, half, bound) = (
        r.metric("uniform_sup"),
        r.metric("uniform_sup_half"),
        r.metric("uniform_constant"),
    );
    c.require(
        sup.is_finite() && sup <= bound,
        format!("sup {sup} against C = {bound}"),
    );
    c.require(
        r.verdict("uniform-bound") == Some(true),
        format!("uniform bound unstable ({half} to {sup})"),
    );
    c.note(format!("derivative residual {res:.2e}, sup {sup:.4}"));
    c.budget(r.seconds, 600.0);
}

fn ac8(lab: &mut Lab, c: &mut Checks) {
    let mut names: Vec<String> = fs::read_dir(scenarios())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "json")
                .then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    let (mut serial, mut parallel) = (0.0, 0.0);
    for name in &names {
        let a = lab.run(name, 1);
        serial += a.seconds;
        let (code, s) = (a.code, a.summary.clone());
        let b = lab.run(name, 8);
        parallel += b.seconds;
        c.require(code == b.code, format!("{name}: exit {code} vs {}", b.code));
        c.require(!s.is_null(), format!("{name}: no summary"));
        for key in ["metrics", "verdicts", "files", "scenario_hash", "status"] {
            c.require(s[key] == b.summary[key], format!("{name}: {key} differ"));
        }
    }
    c.note(format!(
        "{} scenarios, {serial:.0} s at --jobs 1, {parallel:.0} s at --jobs 8",
        names.len()
    ));
    c.budget(serial + parallel, 45.0 * 60.0);
}

type Criterion = fn(&mut Lab, &mut Checks);

fn main() -> ExitCode {
    let criteria: [(&str, &str, Criterion); 8] = [
        ("AC1", "periodic-point oracle", ac1),
        ("AC2", "Anosov closing bounds", ac2),
        ("AC3", "round trip over ten generators", ac3),
        ("AC4", "exponents, domination and trivialization", ac4),
        ("AC5", "contracting periodic points", ac5),
        ("AC6", "linear cocycle suite", ac6),
        ("AC7", "lamination engine", ac7),
        ("AC8", "determinism across worker counts", ac8),
    ];
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .map(|a| a.trim_start_matches("AC").to_string())
        .collect();
    let mut lab = Lab::new();
    let mut failed = 0;
    for (id, title, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| f == id.trim_start_matches("AC")) {
            continue;
        }
        let clock = Instant::now();
        let mut c = Checks::default();
        check(&mut lab, &mut c);
        let secs = clock.elapsed().as_secs_f64();
        let pass = c.failures.is_empty();
        let detail = if pass {
            c.notes.join("; ")
        } else {
            c.failures.join("; ")
        };
        println!(
            "{} {id} {title} ({secs:.1} s): {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        failed += usize::from(!pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
