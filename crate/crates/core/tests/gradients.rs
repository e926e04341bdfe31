//! Analytic gradients against central finite differences, in f64.

mod common;

use common::grad::{self, TOL};

fn check(cases: Vec<(&'static str, f64)>) {
    for (label, err) in cases {
        assert!(err < TOL, "{label}: relative error {err}");
    }
}

#[test]
fn encoder() {
    check(grad::encoder());
}

#[test]
fn decoder_teacher_forced() {
    check(grad::decoder(true));
}

#[test]
fn decoder_autoregressive() {
    check(grad::decoder(false));
}

#[test]
fn feature_critic() {
    check(grad::feature_critic());
}

#[test]
fn offset_critic() {
    check(grad::offset_critic());
}

#[test]
fn adaptor_away_from_identity() {
    check(grad::adaptor());
}

#[test]
fn penalty_and_critic_objective() {
    check(grad::penalty());
}

#[test]
fn checker_rejects_scaled_gradient() {
    let err = grad::scaled_gradient_error();
    assert!(err > TOL, "a 1% gradient error went unnoticed ({err})");
}
