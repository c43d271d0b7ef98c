//! Eavesdropper models.
//!
//! Each model implements [`Adversary`] and is registered by name in an
//! [`AdversaryRegistry`]; sessions pick one at runtime from configuration.
//! The built-in models are
//!
//! * `none`: no eavesdropper.
//! * `hidden-variable`: Eve reads the initial hidden positions exactly but
//!   does not know the sign of Bob's κ.
//! * `hidden-variable-with-kappa`: as above, and she also learns the sign.
//! * `intercept-resend`: Eve measures Bob's particle along z and resends
//!   an eigenstate, disturbing the Bell test.

mod hidden_variable;
mod intercept_resend;
mod registry;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::analysis::Proportion;
use crate::dynamics::{analytic_outcome, HiddenState, Kappa, Sign, Spin};
use crate::error::{Error, Result};
use crate::protocol::{singlet_pair, SiftedKey};

pub use hidden_variable::{HiddenVariableEve, Predictor};
pub use intercept_resend::{intercept_resend_round, InterceptResendEve};
pub use registry::{AdversaryFactory, AdversaryOptions, AdversaryRegistry, NoEve};

/// What Eve knows about a key round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveKnowledge {
    pub knows_hidden: bool,
    pub knows_kappa_sign: bool,
    pub knows_kappa_magnitude: bool,
}

impl EveKnowledge {
    /// Exact hidden positions, secret κ sign.
    pub const THREAT_MODEL: EveKnowledge = EveKnowledge {
        knows_hidden: true,
        knows_kappa_sign: false,
        knows_kappa_magnitude: true,
    };

    pub const FULL: EveKnowledge = EveKnowledge {
        knows_hidden: true,
        knows_kappa_sign: true,
        knows_kappa_magnitude: true,
    };
}

impl Default for EveKnowledge {
    fn default() -> Self {
        Self::THREAT_MODEL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvePrediction {
    pub round_index: u64,
    pub predicted_alice_bit: u8,
    /// Bob's raw measured bit, before sifting.
    pub predicted_bob_bit: u8,
    /// Both κ-sign hypotheses give the same Alice outcome.
    pub is_forced: bool,
}

/// Everything about a key round an adversary may look at. Whether it uses
/// the true κ sign is up to its knowledge model.
#[derive(Debug, Clone, Copy)]
pub struct KeyRoundView {
    pub round_index: u64,
    pub hidden: HiddenState,
    pub kappa: Kappa,
    /// The protocol never flips κ, so its sign is public.
    pub kappa_public: bool,
}

pub trait Adversary: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;

    /// Prediction for a key round; `None` if this model does not predict.
    fn predict_key_round(
        &self,
        _view: &KeyRoundView,
        _rng: &mut dyn RngCore,
    ) -> Result<Option<EvePrediction>> {
        Ok(None)
    }

    /// Joint outcome of a Bell-test round at angles `(alpha, beta)`.
    fn test_round(&self, alpha: f64, beta: f64, rng: &mut dyn RngCore) -> (Spin, Spin) {
        singlet_pair(alpha, beta, rng)
    }

    /// Expected Alice-bit accuracy for the given |κ|, if known in closed form.
    fn expected_accuracy(&self, _kappa_magnitude: f64, _kappa_public: bool) -> Option<f64> {
        None
    }
}

/// Predicts one key round from Eve's two κ-sign hypotheses.
pub fn eve_predict_key_round<R: Rng + ?Sized>(
    round_index: u64,
    hidden: HiddenState,
    kappa_magnitude: f64,
    actual_sign: Sign,
    knowledge: &EveKnowledge,
    rng: &mut R,
) -> Result<EvePrediction> {
    let hypothesis = |sign: Sign| -> Result<(Spin, Spin)> {
        if knowledge.knows_kappa_magnitude {
            analytic_outcome(hidden, Kappa::new(kappa_magnitude, sign)?)
        } else {
            large_kappa_outcome(hidden, sign)
        }
    };
    predict_from_hypotheses(round_index, hypothesis, actual_sign, knowledge, rng)
}

/// Outcomes in the `|κ| → ∞` limit, where only `z2` matters.
fn large_kappa_outcome(hidden: HiddenState, sign: Sign) -> Result<(Spin, Spin)> {
    let tie = Error::Tie {
        z1: hidden.z1,
        z2: hidden.z2,
    };
    let bob = Spin::from_sign(hidden.z2).ok_or(tie)?;
    let alice = match sign {
        Sign::Plus => bob.flipped(),
        Sign::Minus => bob,
    };
    Ok((alice, bob))
}

pub(crate) fn predict_from_hypotheses<R, F>(
    round_index: u64,
    hypothesis: F,
    actual_sign: Sign,
    knowledge: &EveKnowledge,
    rng: &mut R,
) -> Result<EvePrediction>
where
    R: Rng + ?Sized,
    F: Fn(Sign) -> Result<(Spin, Spin)>,
{
    let coin_alice: bool = rng.random();
    let coin_bob: bool = rng.random();
    if !knowledge.knows_hidden {
        return Ok(EvePrediction {
            round_index,
            predicted_alice_bit: coin_alice as u8,
            predicted_bob_bit: coin_bob as u8,
            is_forced: false,
        });
    }

    let (a_plus, b_plus) = hypothesis(Sign::Plus)?;
    let (a_minus, b_minus) = hypothesis(Sign::Minus)?;
    let is_forced = a_plus == a_minus;

    let (alice, bob) = if knowledge.knows_kappa_sign {
        match actual_sign {
            Sign::Plus => (a_plus, b_plus),
            Sign::Minus => (a_minus, b_minus),
        }
    } else {
        let alice = if is_forced {
            a_plus
        } else {
            Spin::from_bit(coin_alice as u8)
        };
        let bob = if b_plus == b_minus {
            b_plus
        } else {
            Spin::from_bit(coin_bob as u8)
        };
        (alice, bob)
    };
    Ok(EvePrediction {
        round_index,
        predicted_alice_bit: alice.bit(),
        predicted_bob_bit: bob.bit(),
        is_forced,
    })
}

/// Probability that both κ hypotheses agree on Alice's outcome,
/// `P(|κ z2| < |z1|) = (2/π) arctan(1/|κ|)` for i.i.d. centred Gaussians.
pub fn analytic_forced_fraction(kappa_magnitude: f64) -> Result<f64> {
    if kappa_magnitude.is_nan() || kappa_magnitude <= 0.0 {
        return Err(Error::invalid(
            "kappa_magnitude",
            format!("must be > 0, got {kappa_magnitude}"),
        ));
    }
    Ok(2.0 / PI * (1.0 / kappa_magnitude).atan())
}

/// Threat-model accuracy on Alice's bits: forced rounds are exact, the rest
/// are coin flips, giving `1/2 + (1/π) arctan(1/|κ|)`.
pub fn analytic_eve_accuracy(kappa_magnitude: f64) -> Result<f64> {
    Ok(0.5 + 0.5 * analytic_forced_fraction(kappa_magnitude)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveAccuracy {
    pub overall: Proportion,
    pub forced: Option<Proportion>,
    pub unforced: Option<Proportion>,
    /// Fraction of scored rounds that were forced.
    pub forced_fraction: Proportion,
}

/// Scores Eve's Alice-bit predictions against the sifted key.
pub fn eve_accuracy(predictions: &[EvePrediction], key: &SiftedKey) -> Result<EveAccuracy> {
    let by_round: BTreeMap<u64, &EvePrediction> =
        predictions.iter().map(|p| (p.round_index, p)).collect();
    let (mut hits, mut forced_hits, mut forced_total) = (0u64, 0u64, 0u64);
    let n = key.alice_bits.len() as u64;
    if n == 0 {
        return Err(Error::InsufficientData("empty sifted key".into()));
    }
    for (&round, &bit) in key.round_indices.iter().zip(&key.alice_bits) {
        let p = by_round
            .get(&round)
            .ok_or_else(|| Error::InsufficientData(format!("no prediction for round {round}")))?;
        let hit = (p.predicted_alice_bit == bit) as u64;
        hits += hit;
        if p.is_forced {
            forced_total += 1;
            forced_hits += hit;
        }
    }
    Ok(EveAccuracy {
        overall: Proportion::new(hits, n)?,
        forced: Proportion::new(forced_hits, forced_total).ok(),
        unforced: Proportion::new(hits - forced_hits, n - forced_total).ok(),
        forced_fraction: Proportion::new(forced_total, n)?,
    })
}

/// Minimum length accepted by [`mutual_information`].
pub const MI_MIN_LENGTH: usize = 1000;

/// Plug-in estimate of `I(guess; key)` in bits from the 2×2 frequency table.
pub fn mutual_information(guesses: &[u8], key: &[u8]) -> Result<f64> {
    if guesses.len() != key.len() {
        return Err(Error::LengthMismatch {
            left: guesses.len(),
            right: key.len(),
        });
    }
    if guesses.len() < MI_MIN_LENGTH {
        return Err(Error::InsufficientData(format!(
            "mutual information needs >= {MI_MIN_LENGTH} symbols, got {}",
            guesses.len()
        )));
    }
    let mut joint = [[0u64; 2]; 2];
    for (&g, &k) in guesses.iter().zip(key) {
        joint[(g != 0) as usize][(k != 0) as usize] += 1;
    }
    let n = guesses.len() as f64;
    let row = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
    let col = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
    let mut mi = 0.0;
    for g in 0..2 {
        for k in 0..2 {
            let c = joint[g][k];
            if c > 0 {
                let pxy = c as f64 / n;
                let px = row[g] as f64 / n;
                let py = col[k] as f64 / n;
                mi += pxy * (pxy / (px * py)).log2();
            }
        }
    }
    Ok(mi.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{SeedSpec, StreamLabel};

    fn rng() -> crate::sampling::Substream {
        SeedSpec::new(1, StreamLabel::Eve).stream(0)
    }

    #[test]
    fn unforced_round_knows_bob_only() {
        let h = HiddenState::new(0.05, 0.8);
        let mut hits = [0u32; 2];
        for s in 0..64 {
            let mut r = SeedSpec::new(s, StreamLabel::Eve).stream(0);
            let p =
                eve_predict_key_round(0, h, 100.0, Sign::Plus, &EveKnowledge::THREAT_MODEL, &mut r)
                    .unwrap();
            assert!(!p.is_forced);
            // b = sign(z2) = +1 under both hypotheses.
            assert_eq!(p.predicted_bob_bit, 1);
            hits[p.predicted_alice_bit as usize] += 1;
        }
        assert!(hits[0] > 0 && hits[1] > 0, "Alice bit should be a guess");
    }

    #[test]
    fn forced_round_pins_alice() {
        let h = HiddenState::new(0.9, 0.004);
        let p = eve_predict_key_round(
            3,
            h,
            100.0,
            Sign::Minus,
            &EveKnowledge::THREAT_MODEL,
            &mut rng(),
        )
        .unwrap();
        assert!(p.is_forced);
        assert_eq!(p.predicted_alice_bit, 1);
        assert_eq!(p.round_index, 3);
    }

    #[test]
    fn full_knowledge_is_exact() {
        for (z1, z2, sign) in [
            (0.3, -0.2, Sign::Plus),
            (0.05, 0.8, Sign::Minus),
            (-1.2, 0.01, Sign::Plus),
        ] {
            let h = HiddenState::new(z1, z2);
            let k = Kappa::new(100.0, sign).unwrap();
            let (a, b) = analytic_outcome(h, k).unwrap();
            let p =
                eve_predict_key_round(0, h, 100.0, sign, &EveKnowledge::FULL, &mut rng()).unwrap();
            assert_eq!(
                (p.predicted_alice_bit, p.predicted_bob_bit),
                (a.bit(), b.bit())
            );
        }
    }

    #[test]
    fn analytic_accuracy_values() {
        assert!((analytic_eve_accuracy(1.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((analytic_eve_accuracy(100.0).unwrap() - 0.503_183).abs() < 1e-6);
        assert!((analytic_eve_accuracy(10.0).unwrap() - 0.531_726).abs() < 1e-6);
        assert!((analytic_eve_accuracy(1e12).unwrap() - 0.5).abs() < 1e-12);
        assert!((analytic_forced_fraction(100.0).unwrap() - 0.006_366).abs() < 1e-6);
        assert!(analytic_eve_accuracy(0.0).is_err());
    }

    #[test]
    fn mutual_information_limits() {
        let key: Vec<u8> = (0..2000).map(|i| (i % 2) as u8).collect();
        assert!((mutual_information(&key, &key).unwrap() - 1.0).abs() < 1e-12);
        let flipped: Vec<u8> = key.iter().map(|b| 1 - b).collect();
        assert!((mutual_information(&flipped, &key).unwrap() - 1.0).abs() < 1e-12);
        let constant = vec![0u8; 2000];
        assert_eq!(mutual_information(&constant, &key).unwrap(), 0.0);
        assert!(matches!(
            mutual_information(&key[..1500], &key),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(mutual_information(&key[..10], &key[..10]).is_err());
    }
}
