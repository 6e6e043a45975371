mod common;

use common::equivalence;

#[test]
fn gp_matches_dense_oracle() {
    equivalence::gp().unwrap();
}

#[test]
fn expected_improvement_matches_monte_carlo() {
    equivalence::expected_improvement_checks().unwrap();
}

#[test]
fn ridge_matches_normal_equations() {
    equivalence::ridge().unwrap();
}

#[test]
fn reservoir_matches_reference_loop() {
    equivalence::reservoir().unwrap();
}
