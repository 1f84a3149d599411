use iihs_core::corpus::{list, run_example};

#[test]
fn every_bundle_meets_its_expectations() {
    let mut failures = Vec::new();
    for id in list() {
        let run = run_example(id).unwrap();
        for c in &run.checks {
            println!(
                "{id:18} {:40} expected {:.6} got {:?} ({})",
                c.metric,
                c.expected,
                c.actual,
                if c.pass { "ok" } else { "FAIL" }
            );
            if !c.pass {
                failures.push(format!("{id} {} {:?} {:?}", c.metric, c.actual, c.error));
            }
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}
