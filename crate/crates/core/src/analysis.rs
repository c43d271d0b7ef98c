//! Session statistics: QBER, Wilson intervals and the aggregated report.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::adversary::{
    analytic_forced_fraction, eve_accuracy, mutual_information, Adversary, MI_MIN_LENGTH,
};
use crate::error::{Error, Result};
use crate::protocol::{chsh, sift, Correlator, RoundType, SessionConfig, SessionRun};
use crate::sampling::GENERATOR;

/// Confidence level used for every interval in a report.
pub const REPORT_CONFIDENCE: f64 = 0.95;

/// A success count with its point estimate and 95 % Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Result<Self> {
        let (ci_low, ci_high) = binomial_ci(successes, trials, REPORT_CONFIDENCE)?;
        Ok(Self {
            successes,
            trials,
            estimate: successes as f64 / trials as f64,
            ci_low,
            ci_high,
        })
    }

    /// Binomial standard error `sqrt(p (1 - p) / n)` at probability `p`.
    pub fn sigma_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Hamming distance over length.
pub fn qber(alice_bits: &[u8], bob_bits: &[u8]) -> Result<f64> {
    if alice_bits.len() != bob_bits.len() {
        return Err(Error::LengthMismatch {
            left: alice_bits.len(),
            right: bob_bits.len(),
        });
    }
    if alice_bits.is_empty() {
        return Err(Error::InsufficientData("qber of empty key".into()));
    }
    let errors = alice_bits
        .iter()
        .zip(bob_bits)
        .filter(|(a, b)| a != b)
        .count();
    Ok(errors as f64 / alice_bits.len() as f64)
}

/// Wilson score interval for a binomial proportion.
pub fn binomial_ci(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::InsufficientData(
            "binomial interval with zero trials".into(),
        ));
    }
    if successes > trials {
        return Err(Error::invalid(
            "successes",
            format!("{successes} exceeds {trials} trials"),
        ));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid(
            "confidence",
            format!("must lie in (0, 1), got {confidence}"),
        ));
    }
    let z = Normal::standard().inverse_cdf(0.5 + 0.5 * confidence);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if successes == 0 {
        0.0
    } else {
        (center - half).clamp(0.0, p)
    };
    let high = if successes == trials {
        1.0
    } else {
        (center + half).clamp(p, 1.0)
    };
    Ok((low, high))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SessionReport {
    pub n_rounds: u64,
    pub n_test: u64,
    pub n_key: u64,
    pub n_committed: u64,
    /// Hidden states drawn across all key rounds, including resamples.
    pub key_attempts: u64,
    pub sifted_length: u64,
    pub qber: Option<f64>,
    pub chsh_S: Option<f64>,
    pub chsh_stderr: Option<f64>,
    pub chsh_correlators: Option<[Correlator; 4]>,
    pub adversary: String,
    /// Sifted key bits Eve made a prediction for.
    pub eve_scored_bits: u64,
    pub eve_accuracy: Option<f64>,
    pub eve_accuracy_ci: Option<[f64; 2]>,
    pub eve_accuracy_expected: Option<f64>,
    pub eve_accuracy_forced: Option<Proportion>,
    pub eve_accuracy_unforced: Option<Proportion>,
    pub eve_mutual_information: Option<f64>,
    pub forced_round_fraction: Option<f64>,
    pub forced_round_fraction_expected: f64,
    pub config: SessionConfig,
    pub generator: String,
}

/// Folds a finished session into its report.
pub fn summarize(
    run: &SessionRun,
    config: &SessionConfig,
    adversary: &dyn Adversary,
) -> Result<SessionReport> {
    let n_rounds = run.records.len() as u64;
    let n_test = run
        .records
        .iter()
        .filter(|r| r.round_type == RoundType::Test)
        .count() as u64;
    let key_rounds = || {
        run.records
            .iter()
            .filter(|r| r.round_type == RoundType::Key)
    };
    let n_key = key_rounds().count() as u64;
    let n_committed = key_rounds().filter(|r| r.committed).count() as u64;
    let key_attempts = key_rounds().map(|r| r.attempts as u64).sum();

    let key = sift(&run.records);
    let qber = if key.is_empty() {
        None
    } else {
        Some(qber(&key.alice_bits, &key.bob_bits)?)
    };

    let chsh_estimate = match chsh(&run.records) {
        Ok(est) => Some(est),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };

    let scored = !run.predictions.is_empty() && !key.is_empty();
    let accuracy = if scored {
        Some(eve_accuracy(&run.predictions, &key)?)
    } else {
        None
    };
    let eve_mutual_information = if scored && key.len() >= MI_MIN_LENGTH {
        let guesses: Vec<u8> = {
            let by_round: std::collections::BTreeMap<u64, u8> = run
                .predictions
                .iter()
                .map(|p| (p.round_index, p.predicted_alice_bit))
                .collect();
            key.round_indices.iter().map(|i| by_round[i]).collect()
        };
        Some(mutual_information(&guesses, &key.alice_bits)?)
    } else {
        None
    };

    Ok(SessionReport {
        n_rounds,
        n_test,
        n_key,
        n_committed,
        key_attempts,
        sifted_length: key.len() as u64,
        qber,
        chsh_S: chsh_estimate.as_ref().map(|e| e.s),
        chsh_stderr: chsh_estimate.as_ref().map(|e| e.stderr),
        chsh_correlators: chsh_estimate.map(|e| e.correlators),
        adversary: adversary.name().to_string(),
        eve_scored_bits: accuracy.as_ref().map_or(0, |a| a.overall.trials),
        eve_accuracy: accuracy.as_ref().map(|a| a.overall.estimate),
        eve_accuracy_ci: accuracy
            .as_ref()
            .map(|a| [a.overall.ci_low, a.overall.ci_high]),
        eve_accuracy_expected: scored
            .then(|| adversary.expected_accuracy(config.kappa_magnitude, !config.flip_kappa))
            .flatten(),
        eve_accuracy_forced: accuracy.as_ref().and_then(|a| a.forced),
        eve_accuracy_unforced: accuracy.as_ref().and_then(|a| a.unforced),
        eve_mutual_information,
        forced_round_fraction: accuracy.map(|a| a.forced_fraction.estimate),
        forced_round_fraction_expected: analytic_forced_fraction(config.kappa_magnitude)?,
        config: *config,
        generator: GENERATOR.to_string(),
    })
}
