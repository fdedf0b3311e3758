use inexact_pep::verify::{run_check, CHECKS};

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    for (id, _) in CHECKS {
        let result = run_check(id).unwrap();
        println!("{result}");
        if !result.passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
