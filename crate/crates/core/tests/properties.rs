mod common;

use common::props::{self, CASES};

#[test]
fn weights_stay_in_domain() {
    props::weight_bounds(CASES).unwrap();
}

#[test]
fn depression_without_pre_spike() {
    props::depression_default(CASES).unwrap();
}

#[test]
fn learning_rate_decreases_with_spike_count() {
    props::learning_rate_monotone(CASES).unwrap();
}

#[test]
fn membrane_potential_stays_bounded() {
    props::membrane_bounds(CASES).unwrap();
}

#[test]
fn spike_resets_the_circuit() {
    props::reset_completeness(CASES).unwrap();
}

#[test]
fn excitation_is_nonnegative() {
    props::excitation_nonnegative(CASES).unwrap();
}

#[test]
fn one_active_neuron_per_pixel() {
    props::population_code_exclusivity(CASES).unwrap();
}

#[test]
fn posterior_ignores_common_shift() {
    props::softmax_shift_invariance(CASES).unwrap();
}

#[test]
fn networks_replay_bit_identically() {
    props::determinism(CASES).unwrap();
}

#[test]
fn checkpoints_round_trip() {
    props::checkpoint_round_trip(CASES).unwrap();
}

#[test]
fn evaluation_invariants() {
    props::evaluation_properties(CASES).unwrap();
}

#[test]
fn single_spike_samples_follow_softmax() {
    let (p, events) = props::sampling_matches_softmax(100_000, 11);
    assert!(events >= 100_000);
    assert!(p > 0.01, "chi-square p = {p}");
}
