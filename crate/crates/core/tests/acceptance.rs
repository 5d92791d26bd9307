//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Exits non-zero on any failure only when `ACCEPTANCE_STRICT=1`.

mod common;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::checks::{cut_is_lossless, index_grid, monotone_case, random_table, split_is_lossless};
use common::gen::random_vtd;
use common::{route_type_walk, same_answers, values_where, Fixture, FIXTURES};
use tabular_obda::pipeline::{select_annotations, select_sources};
use tabular_obda::run::StepTimes;
use tabular_obda::{run, Mode};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn motivating() -> Outcome {
    let start = Instant::now();
    let f = Fixture::new("motivating");
    let q = f.query_path("shared_closures");
    let cfg = f.config(&q);
    let e = run(&cfg).map_err(|e| e.to_string())?;
    let b = run(&cfg.with_mode(Mode::Baseline)).map_err(|e| e.to_string())?;
    // Hand count over the fixture: noviciado 24/12, colonia_jardin 24/12
    // and 31/12, plaza_de_castilla 01/01, sol 06/01.
    let hand = 5;
    let oracle = f.oracle(&q).len();
    let secs = start.elapsed().as_secs_f64();
    check(
        b.answer_count == 1 && e.answer_count > 1 && e.answer_count == hand && oracle == hand && secs < 5.0,
        format!(
            "baseline {}, enhanced {}, hand count {hand}, oracle {oracle}, {secs:.2}s",
            b.answer_count, e.answer_count
        ),
    )
}

fn selection() -> Outcome {
    let f = Fixture::new("gtfs");
    let vtd = f.vtd();
    let q = f.query(&f.query_path("q01_trips_routes_frequencies"));
    let (_, _, plan) = select_annotations(&q, &vtd.mapping, &vtd.metadata).map_err(|e| e.to_string())?;
    let kept = select_sources(&vtd.sources, &plan).map_err(|e| e.to_string())?;
    let gone = |p: &str| plan.discarded_sources.contains(p) && kept.iter().all(|s| s.path != p);
    check(
        plan.kept_tm_ids.len() == 3 && gone("agency.csv") && gone("stops.csv"),
        format!(
            "kept maps {:?}, join-only parents {:?}, discarded {:?}",
            plan.kept_tm_ids, plan.join_dependencies, plan.discarded_sources
        ),
    )
}

fn normalization() -> Outcome {
    let walk = route_type_walk();
    let label = walk.prepared.columns.len() - 1;
    let subway = values_where(&walk.prepared, "route_type", "1", label);
    check(
        walk.cut_sources == ["route_type.csv"]
            && walk.rows_after_duplicates == 2
            && !subway.is_empty()
            && subway.iter().all(|v| v.as_deref() == Some("Subway")),
        format!(
            "cut emitted {:?}, {} rows after duplicates, label for type 1: {subway:?}",
            walk.cut_sources, walk.rows_after_duplicates
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut pairs = 0;
    let mut failed = Vec::new();
    for name in FIXTURES {
        let f = Fixture::new(name);
        for path in f.queries() {
            pairs += 1;
            let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
            match run(&f.config(&path)) {
                Ok(r) if same_answers(&f.query(&path), &r.results, &f.oracle(&path)) => {}
                Ok(_) => failed.push(format!("{name}/{stem}: answers differ")),
                Err(e) => failed.push(format!("{name}/{stem}: {e}")),
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        failed.is_empty() && pairs >= 12 && secs < 60.0,
        format!(
            "{pairs} fixture/query pairs, {} mismatches {failed:?}, {secs:.2}s",
            failed.len()
        ),
    )
}

fn monotonicity() -> Outcome {
    let cases = 200;
    let (mut held, mut held_without_markers, mut errors) = (0, 0, Vec::new());
    for seed in 0..cases {
        let v = random_vtd(&mut ChaCha8Rng::seed_from_u64(seed));
        match monotone_case(&v) {
            Ok(o) => {
                held += usize::from(o.enhanced >= o.baseline);
                held_without_markers += usize::from(o.enhanced >= o.baseline_without_markers);
            }
            Err(e) => errors.push(format!("seed {seed}: {e}")),
        }
    }
    check(
        held == cases as usize,
        format!(
            "enhanced >= baseline in {held}/{cases} random datasets; {held_without_markers}/{cases} once baseline \
             answers binding a declared null marker are set aside; {} errors {errors:?}",
            errors.len()
        ),
    )
}

fn lossless() -> Outcome {
    let cases = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..cases {
        let sep = [';', '|', ','][i % 3];
        let t = random_table(&mut rng, sep);
        split_is_lossless(&t, sep)?;
        cut_is_lossless(&t)?;
    }
    Ok(format!("{cases} random tables split and cut without loss"))
}

fn index_rule() -> Outcome {
    let taus = [0.0, 0.05, 0.1, 0.2, 0.5, 0.9, 1.0];
    index_grid(40, &taus).map(|n| format!("{n} decisions over a 40-row grid and {} thresholds", taus.len()))
}

fn io_reduction() -> Outcome {
    let f = Fixture::new("gtfs");
    let cfg = f.config(&f.query_path("q01_trips_routes_frequencies"));
    let e = run(&cfg).map_err(|e| e.to_string())?;
    let b = run(&cfg.with_mode(Mode::Baseline)).map_err(|e| e.to_string())?;
    let n = run(&cfg.with_mode(Mode::Noselect)).map_err(|e| e.to_string())?;
    check(
        e.bytes_read < b.bytes_read && e.bytes_read <= n.bytes_read,
        format!(
            "bytes enhanced {} / baseline {} / noselect {}; total seconds {:.4} / {:.4} / {:.4}",
            e.bytes_read, b.bytes_read, n.bytes_read, e.steps.total, b.steps.total, n.steps.total
        ),
    )
}

fn report_contract() -> Outcome {
    let mut want: Vec<&str> = StepTimes::KEYS.to_vec();
    want.sort();
    let mut runs = 0;
    for name in FIXTURES {
        let f = Fixture::new(name);
        for mode in Mode::ALL {
            let mut cfg = f.config(&f.queries()[0]).with_mode(mode);
            cfg.repetitions = 3;
            let r = run(&cfg).map_err(|e| format!("{name} {mode}: {e}"))?;
            let json: serde_json::Value = serde_json::from_str(&r.to_json()).map_err(|e| e.to_string())?;
            let mut keys: Vec<&str> = json["steps"]
                .as_object()
                .ok_or("report has no steps object")?
                .keys()
                .map(String::as_str)
                .collect();
            keys.sort();
            if keys != want {
                return Err(format!("{name} {mode}: step keys {keys:?}"));
            }
            let s = &r.steps;
            if (s.total - (s.step_sum() + r.residue)).abs() > 0.01 * s.total {
                return Err(format!(
                    "{name} {mode}: total {} vs steps {} + residue {}",
                    s.total,
                    s.step_sum(),
                    r.residue
                ));
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} reports carry the seven step keys and add up"))
}

fn determinism() -> Outcome {
    let mut compared = 0;
    for name in FIXTURES {
        let f = Fixture::new(name);
        for path in f.queries() {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let mut cfg = f.config(&path);
            cfg.workdir = Some(dir.path().to_path_buf());
            cfg.db_url = None;
            let a = run(&cfg).map_err(|e| e.to_string())?;
            let b = run(&cfg).map_err(|e| e.to_string())?;
            let csv = |r: &tabular_obda::RunReport| r.results.to_csv().map_err(|e| e.to_string());
            if a.ddl != b.ddl || a.translated_mapping != b.translated_mapping || csv(&a)? != csv(&b)? {
                return Err(format!("{} differs between runs", path.display()));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} query pairs give identical DDL, mapping and CSV"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("motivating example completeness", motivating),
        ("selection structure", selection),
        ("normalization walk-through", normalization),
        ("oracle equivalence", oracle_equivalence),
        ("monotonicity", monotonicity),
        ("lossless normalization", lossless),
        ("index rule", index_rule),
        ("I/O reduction", io_reduction),
        ("report contract", report_contract),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
