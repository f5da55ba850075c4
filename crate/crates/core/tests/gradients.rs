use std::time::Instant;

use arma_core::gradcheck::run_gradient_suite;

#[test]
fn every_backward_op_matches_central_differences() {
    let start = Instant::now();
    let results = run_gradient_suite(2024).unwrap();
    let mut failed = Vec::new();
    for (case, report) in &results {
        if !report.passed() {
            failed.push((case, report.mismatches.iter().take(3).cloned().collect::<Vec<_>>()));
        }
    }
    let checked: usize = results.iter().map(|(_, r)| r.checked).sum();
    eprintln!("{checked} partial derivatives checked in {:.1?}", start.elapsed());
    assert!(failed.is_empty(), "{failed:#?}");
}
