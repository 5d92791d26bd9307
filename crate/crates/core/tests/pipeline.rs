mod common;

use common::{route_type_walk, values_where, Fixture};
use tabular_obda::pipeline::{select_annotations, select_sources};
use tabular_obda::{run, Mode};

#[test]
fn selection_keeps_one_map_per_star() {
    let f = Fixture::new("gtfs");
    let vtd = f.vtd();
    let q = f.query(&f.query_path("q01_trips_routes_frequencies"));
    let (mapping, _, plan) = select_annotations(&q, &vtd.mapping, &vtd.metadata).unwrap();
    let kept: Vec<&str> = plan.kept_tm_ids.iter().map(String::as_str).collect();
    assert_eq!(kept, ["frequencies", "routes", "trips"]);
    assert_eq!(
        plan.join_dependencies.iter().map(String::as_str).collect::<Vec<_>>(),
        ["route_type"]
    );
    assert!(plan.discarded_sources.contains("agency.csv"));
    assert!(plan.discarded_sources.contains("stops.csv"));
    let kept_sources = select_sources(&vtd.sources, &plan).unwrap();
    let paths: Vec<&str> = kept_sources.iter().map(|s| s.path.as_str()).collect();
    assert!(!paths.contains(&"agency.csv") && !paths.contains(&"stops.csv"));
    assert!(mapping.get("agency").is_none());
}

#[test]
fn route_types_are_cut_deduplicated_and_labelled() {
    let walk = route_type_walk();
    assert_eq!(walk.cut_sources, ["route_type.csv"]);
    assert_eq!(walk.rows_after_duplicates, 2);
    let s = &walk.prepared;
    assert_eq!(s.rows.len(), 2);
    let label = s.columns.len() - 1;
    assert_eq!(values_where(s, "route_type", "1", label), [Some("Subway".to_string())]);
    assert_eq!(
        values_where(s, "route_type", "0", label),
        [Some("LightRail".to_string())]
    );
}

#[test]
fn enhanced_reads_fewer_bytes() {
    let f = Fixture::new("gtfs");
    let cfg = f.config(&f.query_path("q01_trips_routes_frequencies"));
    let e = run(&cfg).unwrap();
    let b = run(&cfg.with_mode(Mode::Baseline)).unwrap();
    let n = run(&cfg.with_mode(Mode::Noselect)).unwrap();
    assert!(e.bytes_read < b.bytes_read);
    assert!(e.bytes_read <= n.bytes_read);
}

#[test]
fn motivating_example_gains_answers() {
    let f = Fixture::new("motivating");
    let q = f.query_path("shared_closures");
    let cfg = f.config(&q);
    let e = run(&cfg).unwrap();
    let b = run(&cfg.with_mode(Mode::Baseline)).unwrap();
    assert_eq!(b.answer_count, 1);
    assert_eq!(e.answer_count, 5);
    assert_eq!(f.oracle(&q).len(), 5);
}

#[test]
fn repeated_runs_are_byte_identical() {
    for name in common::FIXTURES {
        let f = Fixture::new(name);
        let q = &f.queries()[0];
        let a = run(&f.config(q)).unwrap();
        let b = run(&f.config(q)).unwrap();
        assert_eq!(a.ddl, b.ddl);
        assert_eq!(a.translated_mapping, b.translated_mapping);
        assert_eq!(a.results.to_csv().unwrap(), b.results.to_csv().unwrap());
    }
}

#[test]
fn report_has_exactly_the_step_keys() {
    let f = Fixture::new("bsbm");
    let mut cfg = f.config(&f.query_path("b02_product_details_optional"));
    cfg.repetitions = 3;
    let report = run(&cfg).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    let keys: Vec<&str> = json["steps"].as_object().unwrap().keys().map(String::as_str).collect();
    let mut want = tabular_obda::run::StepTimes::KEYS.to_vec();
    want.sort();
    let mut got = keys.clone();
    got.sort();
    assert_eq!(got, want);
    let s = &report.steps;
    assert!((s.total - (s.step_sum() + report.residue)).abs() <= 0.01 * s.total);
}

#[test]
fn compare_treats_unanswerable_baseline_as_empty() {
    let f = Fixture::new("bsbm");
    let report = tabular_obda::compare_modes(&f.config(&f.query_path("b05_numeric_arithmetic"))).unwrap();
    assert!(report.baseline.is_none());
    assert!(report.baseline_error.as_deref().unwrap().contains("untyped"));
    assert_eq!(report.baseline_answers, 0);
    assert_eq!(report.enhanced.answer_count, 3);
}
