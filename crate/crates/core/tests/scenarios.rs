use std::path::PathBuf;

use xchain_core::checker::{verify, Property};
use xchain_core::scenario::{Scenario, ScenarioError, Severity};
use xchain_core::swap::{swap_scenario, SwapParams};

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

#[test]
fn shipped_scenarios_validate_cleanly() {
    for name in ["swap", "swap-broken-timeout", "swap-short-deadline", "swap-greedy-utility", "giveaway"] {
        let s = Scenario::load(&shipped(name)).unwrap();
        let errors: Vec<_> = s.validate().into_iter().filter(|d| d.severity == Severity::Error).collect();
        assert!(errors.is_empty(), "{name}: {errors:?}");
    }
}

#[test]
fn shipped_swap_is_the_built_in() {
    let file = Scenario::load(&shipped("swap.toml")).unwrap();
    assert_eq!(file, swap_scenario(&SwapParams::default()));
}

#[test]
fn giveaway_breaks_nash() {
    let (p, c) = Scenario::load(&shipped("giveaway")).unwrap().compile().unwrap();
    let report = verify(&p, &c).unwrap();
    assert!(report.verdict(Property::Liveness).pass);
    assert!(!report.verdict(Property::CoalitionNash).pass);
}

fn diagnostics(text: &str) -> Vec<String> {
    Scenario::from_toml_str(text)
        .unwrap()
        .validate()
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| d.message)
        .collect()
}

#[test]
fn missing_utility_cell_is_named() {
    let text = swap_scenario(&SwapParams::default()).to_toml_string();
    let cut = text.replace("[[task.utility]]\ncell = [0, 0, 2]\nvalues = [0, 0]\n", "");
    assert_ne!(cut, text);
    let errs = diagnostics(&cut);
    assert!(errs.iter().any(|e| e.contains("(0, 0, 2)")), "{errs:?}");
}

#[test]
fn undeclared_party_binding_is_named() {
    let text = swap_scenario(&SwapParams::default()).to_toml_string();
    let broken = text.replace("B = \"responder\"", "B = \"responder\"\nCarol = \"responder\"");
    let errs = diagnostics(&broken);
    assert!(errs.iter().any(|e| e.contains("Carol")), "{errs:?}");
}

#[test]
fn all_diagnostics_are_reported_together() {
    let text = swap_scenario(&SwapParams::default()).to_toml_string();
    let broken = text
        .replace("[[task.utility]]\ncell = [0, 0, 2]\nvalues = [0, 0]\n", "")
        .replace("B = \"responder\"", "B = \"responder\"\nCarol = \"responder\"");
    assert!(diagnostics(&broken).len() >= 2);
}

#[test]
fn parse_errors_carry_a_position() {
    match Scenario::from_toml_str("name = \"x\"\n[[party]]\nname = \n") {
        Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
}
