//! The acceptance gate: runs every verification criterion at its pinned
//! tolerance and prints one pass/fail line per criterion.

use logistic_rayknight::acceptance::{run_all, AcceptanceConfig};

#[test]
fn all_acceptance_criteria_pass() {
    let reports = run_all(&AcceptanceConfig::default());
    assert_eq!(reports.len(), 11);
    let mut failed = Vec::new();
    for r in &reports {
        let status = if r.pass { "PASS" } else { "FAIL" };
        let p = r.p_value.map_or(String::new(), |p| format!(" p={p:.4}"));
        println!(
            "{status} {} (statistic {:.3e}, threshold {:.3e}{p}) — {}",
            r.name, r.statistic, r.threshold, r.notes
        );
        if !r.pass {
            failed.push(r.name.clone());
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
