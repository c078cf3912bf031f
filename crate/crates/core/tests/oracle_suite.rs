use peerfx_core::oracle::suite::run_suite;

#[test]
fn standard_suite_passes() {
    let checks = run_suite("standard", 7).unwrap();
    assert!(!checks.is_empty());
    let mut failed = Vec::new();
    for c in &checks {
        if !c.passed {
            failed.push(format!("{} {} err={:e} tol={:e}", c.name, c.instance, c.max_error, c.tolerance));
        }
    }
    assert!(failed.is_empty(), "{} of {} checks failed:\n{}", failed.len(), checks.len(), failed.join("\n"));
}

#[test]
#[ignore]
fn dump_suite() {
    for c in run_suite("standard", 7).unwrap() {
        println!("{:<12} {:<28} compared={:<4} err={:.3e} pass={}", c.name, c.instance, c.compared, c.max_error, c.passed);
    }
}
