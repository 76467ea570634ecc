#![cfg(feature = "validation")]

use fracwave::harness::validation::{run_criterion, Tolerances};

// criteria 13 and 14 run full ensembles; the cheap ones suffice here
const CHEAP: [usize; 13] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 15];

#[test]
fn tampered_tolerance_fails_only_its_criterion() {
    let tol = Tolerances { closed_form: 1e-300, ..Tolerances::default() };
    for id in CHEAP {
        let r = run_criterion(id, &tol);
        assert_eq!(r.passed, id != 8, "{}", r.line());
    }
}

#[test]
fn tampered_budget_fails_on_time() {
    let mut tol = Tolerances::default();
    tol.budgets[8] = 0.0;
    let r = run_criterion(9, &tol);
    assert!(!r.passed);
    assert!(r.detail.contains("budget"));
    assert!(run_criterion(10, &tol).passed);
}

#[test]
fn report_lines_carry_runtime_and_measurements() {
    let r = run_criterion(2, &Tolerances::default());
    assert!(r.runtime_s >= 0.0 && r.budget_s == 1.0);
    assert!(r.measured.iter().any(|m| m.name == "series_rel_err"));
    assert!(r.line().starts_with("[PASS] 02 ml-half-order-oracle"));
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["id"], 2);
}
