use edhoc_core::harness::{all_vectors_json, vectors};

const PINNED: &str = include_str!("vectors/pinned.json");

#[test]
fn pinned_vectors_reproduce() {
    let now = all_vectors_json().unwrap();
    // Regenerate with `edhoc vectors > crates/core/tests/vectors/pinned.json`
    // after a deliberate wire or key-schedule change.
    assert!(now == PINNED, "vectors drifted from tests/vectors/pinned.json");
}

#[test]
fn consecutive_runs_identical() {
    assert_eq!(all_vectors_json().unwrap(), all_vectors_json().unwrap());
}

#[test]
fn single_vector_matches_pinned_entry() {
    let pinned: Vec<serde_json::Value> = serde_json::from_str(PINNED).unwrap();
    let v = serde_json::to_value(vectors(2, 3).unwrap()).unwrap();
    assert!(pinned.contains(&v));
}

#[test]
fn pinned_set_covers_methods_and_suites() {
    let pinned: Vec<serde_json::Value> = serde_json::from_str(PINNED).unwrap();
    assert_eq!(pinned.len(), 12);
    for suite in [0, 2, 3] {
        for method in 0..=3 {
            assert!(pinned.iter().any(|v| v["suite"] == suite && v["method"] == method));
        }
    }
}
