//! Batch experiments behind the CLI: outcome ensembles, |κ| sweeps and the
//! single-particle demonstration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    analytic_eve_accuracy, analytic_forced_fraction, eve_predict_key_round, EveKnowledge,
};
use crate::analysis::Proportion;
use crate::dynamics::{
    analytic_outcome, integrate_pair, single_particle_outcome, Kappa, PhysicalParams, Sign, Spin,
};
use crate::error::{Error, Result};
use crate::protocol::{run_key_round, Execution, RoundPlan, SessionConfig};
use crate::sampling::{substream, EquilibriumSampler, SeedSpec, StreamLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub kappa: f64,
    pub n_samples: u64,
    pub n_ties: u64,
    pub n_committed: u64,
    pub alice_up: Option<Proportion>,
    pub bob_up: Option<Proportion>,
    /// Committed samples whose outcome product differs from `-sign(κ)`.
    pub correlation_violations: u64,
    /// Committed samples where the integrator disagrees with the sign rule.
    pub oracle_disagreements: u64,
}

/// Integrates `n` equilibrium samples at a fixed κ, without resampling.
/// Sample `i` is the first draw of the key-physics substream `i`.
pub fn ensemble(
    cfg: &SessionConfig,
    kappa: Kappa,
    n: u64,
    exec: Execution,
) -> Result<EnsembleStats> {
    if n == 0 {
        return Err(Error::invalid("samples", "must be >= 1"));
    }
    cfg.validate()?;
    let sampler = cfg.sampler()?;
    let indices: Vec<u64> = (0..n).collect();
    let seed = cfg.seed_spec(StreamLabel::KeyPhysics);
    let outcomes = exec.map(&indices, |&i| {
        let hidden = sampler.draw(&mut substream(seed, i));
        if hidden.separation(kappa) == 0.0 {
            return Ok(None);
        }
        let traj = integrate_pair(hidden, kappa, &cfg.physics, &cfg.integrator)?;
        let oracle = analytic_outcome(hidden, kappa)?;
        Ok(Some((traj.outcomes().ok(), oracle)))
    })?;

    let mut stats = EnsembleStats {
        kappa: kappa.value(),
        n_samples: n,
        n_ties: 0,
        n_committed: 0,
        alice_up: None,
        bob_up: None,
        correlation_violations: 0,
        oracle_disagreements: 0,
    };
    let (mut alice_up, mut bob_up) = (0, 0);
    let expected_product = match kappa.sign() {
        Sign::Plus => Spin::Down,
        Sign::Minus => Spin::Up,
    };
    for o in outcomes {
        let Some((committed, oracle)) = o else {
            stats.n_ties += 1;
            continue;
        };
        let Some((a, b)) = committed else { continue };
        stats.n_committed += 1;
        alice_up += (a == Spin::Up) as u64;
        bob_up += (b == Spin::Up) as u64;
        stats.correlation_violations += (a * b != expected_product) as u64;
        stats.oracle_disagreements += ((a, b) != oracle) as u64;
    }
    if stats.n_committed > 0 {
        stats.alice_up = Some(Proportion::new(alice_up, stats.n_committed)?);
        stats.bob_up = Some(Proportion::new(bob_up, stats.n_committed)?);
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kappa_magnitude: f64,
    pub n_key: u64,
    pub eve_accuracy: Proportion,
    pub analytic_prediction: f64,
    /// Rounds where Bob's outcome is the same under both κ signs, measured
    /// by integrating both.
    pub bob_bit_invariance: Proportion,
    pub bob_bit_invariance_expected: f64,
}

/// Runs `cfg.n_rounds` key rounds at `|κ| = magnitude` against the
/// threat-model Eve. Each row reuses the same per-round seeds.
pub fn sweep_row(cfg: &SessionConfig, magnitude: f64, exec: Execution) -> Result<SweepRow> {
    let cfg = SessionConfig {
        kappa_magnitude: magnitude,
        flip_kappa: true,
        ..*cfg
    };
    cfg.validate()?;
    let indices: Vec<u64> = (0..cfg.n_rounds).collect();
    let rows = exec.map(&indices, |&i| {
        let sign = if substream(cfg.seed_spec(StreamLabel::BobKappa), i).random::<bool>() {
            Sign::Minus
        } else {
            Sign::Plus
        };
        let record = run_key_round(&RoundPlan::key(i, sign), &cfg)?;
        let hidden = record.hidden.expect("key record has hidden state");
        let mut eve_rng = substream(cfg.seed_spec(StreamLabel::Eve), i);
        let prediction = eve_predict_key_round(
            i,
            hidden,
            magnitude,
            sign,
            &EveKnowledge::THREAT_MODEL,
            &mut eve_rng,
        )?;
        let eve_hit = prediction.predicted_alice_bit == record.outcome_alice.bit();

        let flipped = Kappa::new(magnitude, sign.flipped())?;
        let other = integrate_pair(hidden, flipped, &cfg.physics, &cfg.integrator)?;
        let invariant = other.outcomes().ok().map(|(_, b)| b == record.outcome_bob);
        Ok((eve_hit, invariant))
    })?;

    let hits = rows.iter().filter(|(h, _)| *h).count() as u64;
    let inv_trials = rows.iter().filter(|(_, inv)| inv.is_some()).count() as u64;
    let inv_hits = rows.iter().filter(|(_, inv)| *inv == Some(true)).count() as u64;
    Ok(SweepRow {
        kappa_magnitude: magnitude,
        n_key: cfg.n_rounds,
        eve_accuracy: Proportion::new(hits, cfg.n_rounds)?,
        analytic_prediction: analytic_eve_accuracy(magnitude)?,
        bob_bit_invariance: Proportion::new(inv_hits, inv_trials)?,
        bob_bit_invariance_expected: 1.0 - analytic_forced_fraction(magnitude)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bb84Report {
    pub n_rounds: u64,
    pub knows_hidden: bool,
    /// Eve's predictions of Bob's measured bit over all rounds.
    pub eve_accuracy: f64,
    pub eve_accuracy_ci: [f64; 2],
    /// Same, restricted to rounds where Bob's basis differs from Alice's,
    /// so the outcome is decided by the packet position alone.
    pub eve_accuracy_mismatched_basis: Option<f64>,
    pub sifted_length: u64,
    pub sifted_qber: Option<f64>,
}

/// Single-particle rounds with random bases. Alice prepares a basis state,
/// Bob measures in a random basis, and the outcome follows the quantile rule
/// from the packet position `z0`. Eve sees `z0` and the measurement context
/// (basis announcements are public) and applies the same rule.
pub fn bb84_demo(
    n: u64,
    seed: u64,
    params: &PhysicalParams,
    knows_hidden: bool,
    exec: Execution,
) -> Result<Bb84Report> {
    if n == 0 {
        return Err(Error::invalid("session.n_rounds", "must be >= 1"));
    }
    params.validate()?;
    let sampler = EquilibriumSampler::from_params(params, 1.0)?;
    let indices: Vec<u64> = (0..n).collect();
    let rounds = exec.map(&indices, |&i| {
        let mut sched = substream(SeedSpec::new(seed, StreamLabel::Schedule), i);
        let alice_basis: bool = sched.random();
        let alice_bit: bool = sched.random();
        let bob_basis: bool = sched.random();
        let z0 = sampler
            .draw(&mut substream(
                SeedSpec::new(seed, StreamLabel::KeyPhysics),
                i,
            ))
            .z1;
        let p_up = match (alice_basis == bob_basis, alice_bit) {
            (true, true) => 1.0,
            (true, false) => 0.0,
            (false, _) => 0.5,
        };
        let bob = single_particle_outcome(z0, p_up, params.halfwidth)?;
        let eve = if knows_hidden {
            single_particle_outcome(z0, p_up, params.halfwidth)?
        } else if substream(SeedSpec::new(seed, StreamLabel::Eve), i).random::<bool>() {
            Spin::Up
        } else {
            Spin::Down
        };
        Ok((alice_basis == bob_basis, alice_bit, bob, eve))
    })?;

    let hits = rounds.iter().filter(|r| r.2 == r.3).count() as u64;
    let mismatched: Vec<_> = rounds.iter().filter(|r| !r.0).collect();
    let mismatched_hits = mismatched.iter().filter(|r| r.2 == r.3).count() as u64;
    let sifted: Vec<_> = rounds.iter().filter(|r| r.0).collect();
    let sifted_errors = sifted.iter().filter(|r| (r.2 == Spin::Up) != r.1).count();
    let overall = Proportion::new(hits, n)?;
    Ok(Bb84Report {
        n_rounds: n,
        knows_hidden,
        eve_accuracy: overall.estimate,
        eve_accuracy_ci: [overall.ci_low, overall.ci_high],
        eve_accuracy_mismatched_basis: (!mismatched.is_empty())
            .then(|| mismatched_hits as f64 / mismatched.len() as f64),
        sifted_length: sifted.len() as u64,
        sifted_qber: (!sifted.is_empty()).then(|| sifted_errors as f64 / sifted.len() as f64),
    })
}
