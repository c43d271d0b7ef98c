use rand::{Rng, RngCore};

use super::Adversary;
use crate::dynamics::Spin;

/// Eve measures Bob's particle along z and forwards the eigenstate she found.
#[derive(Debug, Clone, Default)]
pub struct InterceptResendEve;

impl Adversary for InterceptResendEve {
    fn name(&self) -> &str {
        "intercept-resend"
    }

    fn test_round(&self, alpha: f64, beta: f64, rng: &mut dyn RngCore) -> (Spin, Spin) {
        intercept_resend_round(alpha, beta, rng)
    }
}

/// Joint outcomes after a z-basis intercept of particle 2.
///
/// Eve's result `e` is uniform; Alice's particle collapses to `-e`, so
/// `P(a) = (1 - a e cos α)/2`, and Bob receives `e`, so
/// `P(b) = (1 + b e cos β)/2`.
pub fn intercept_resend_round<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> (Spin, Spin) {
    let e = if rng.random::<bool>() {
        Spin::Up
    } else {
        Spin::Down
    };
    let alice = if rng.random::<f64>() < 0.5 * (1.0 + alpha.cos()) {
        e.flipped()
    } else {
        e
    };
    let bob = if rng.random::<f64>() < 0.5 * (1.0 + beta.cos()) {
        e
    } else {
        e.flipped()
    };
    (alice, bob)
}
