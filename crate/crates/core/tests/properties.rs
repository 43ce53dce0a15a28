//! Invariants over generated models, parser fuzzing and round trips.

mod support;

use support::props;

#[test]
fn random_models_conserve_servers() {
    let completed = props::conservation(1000).unwrap();
    println!("{completed} of 1000 generated models ran to completion");
    // the replay check is only meaningful if most runs finish
    assert!(completed >= 800, "only {completed} of 1000 runs completed");
}

#[test]
fn bundled_models_round_trip() {
    props::round_trip().unwrap();
}

#[test]
fn parser_survives_fuzzing() {
    let parsed = props::fuzz(100_000).unwrap();
    println!("100000 fuzz inputs, {parsed} parsed");
    assert!(parsed > 0);
}
