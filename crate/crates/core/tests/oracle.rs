mod common;

use common::{same_answers, Fixture, FIXTURES};
use tabular_obda::run;

#[test]
fn enhanced_answers_match_the_materialized_oracle() {
    let mut pairs = 0;
    for name in FIXTURES {
        let f = Fixture::new(name);
        for path in f.queries() {
            let report = run(&f.config(&path)).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let want = f.oracle(&path);
            let q = f.query(&path);
            assert!(
                same_answers(&q, &report.results, &want),
                "{}\nengine: {:#?}\noracle: {:#?}",
                path.display(),
                report.results.sorted_rows(),
                want.sorted_rows()
            );
            pairs += 1;
        }
    }
    assert!(pairs >= 12, "only {pairs} fixture/query pairs");
}

#[test]
fn noselect_agrees_with_enhanced() {
    for name in FIXTURES {
        let f = Fixture::new(name);
        for path in f.queries() {
            let cfg = f.config(&path);
            let a = run(&cfg).unwrap();
            let b = run(&cfg.with_mode(tabular_obda::Mode::Noselect)).unwrap();
            assert!(
                same_answers(&f.query(&path), &a.results, &b.results),
                "{}",
                path.display()
            );
            assert!(a.bytes_read <= b.bytes_read, "{}", path.display());
        }
    }
}
