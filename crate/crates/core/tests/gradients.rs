//! Finite-difference checks of every differentiable operation, the encoder and the joint loss.

mod common;

use common::grad::{self, Named, TOL};

fn assert_all(results: Vec<Named>) {
    assert!(!results.is_empty());
    for (name, r) in results {
        assert!(r.checked > 0, "{name}: nothing checked");
        assert!(r.max_rel_error < TOL, "{name}: {r:?}");
    }
}

#[test]
fn elementwise_and_matrix_ops() {
    assert_all(grad::elementwise_and_matrix_ops(1, 5));
}

#[test]
fn binary_cross_entropy() {
    assert_all(grad::binary_cross_entropy(2));
}

#[test]
fn soft_alignment_on_sequences_of_one_to_seven_tokens() {
    assert_all(grad::soft_alignment(3));
}

#[test]
fn embedding_lookup() {
    assert_all(grad::embedding_lookup(4));
}

#[test]
fn bilstm_hidden_eight_lengths_one_to_seven() {
    assert_all(grad::bilstm(5));
}

#[test]
fn joint_loss_end_to_end() {
    assert_all(grad::joint_loss());
}
