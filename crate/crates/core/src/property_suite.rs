//! Randomized invariants, one test per property.

#[path = "../tests/common/properties.rs"]
mod shared;

#[test]
fn lambda_identities() {
    shared::lambda_identities().unwrap();
}

#[test]
fn decay_time_ratio() {
    shared::decay_time_ratio().unwrap();
}

#[test]
fn constants_deterministic() {
    shared::constants_deterministic().unwrap();
}

#[test]
fn parseval() {
    shared::parseval().unwrap();
}

#[test]
fn transform_round_trips() {
    shared::transform_round_trips().unwrap();
}

#[test]
fn position_diagonal_real() {
    shared::position_diagonal_real().unwrap();
}

#[test]
fn builders() {
    shared::builders().unwrap();
}

#[test]
fn initial_partners() {
    shared::initial_partners().unwrap();
}

#[test]
fn semigroup() {
    shared::semigroup().unwrap();
}

#[test]
fn conjugation_symmetry() {
    shared::conjugation_symmetry().unwrap();
}

#[test]
fn trace_conservation() {
    shared::trace_conservation().unwrap();
}

#[test]
fn oracle_matches_closed_form() {
    shared::oracle_matches_closed_form().unwrap();
}

#[test]
fn zero_splitting_reduction() {
    shared::zero_splitting_reduction().unwrap();
}

#[test]
fn pde_trace_conservation() {
    shared::pde_trace_conservation().unwrap();
}

#[test]
fn purity_bounded() {
    shared::purity_bounded().unwrap();
}

#[test]
fn representation_invariance() {
    shared::representation_invariance().unwrap();
}

#[test]
fn series_monotone() {
    shared::series_monotone().unwrap();
}

#[test]
fn late_pointer_states() {
    shared::late_pointer_states().unwrap();
}
