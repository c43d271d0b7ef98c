//! Ekert-style session with the extra `(C, -C)` key setting.
//!
//! Test rounds use the four Bell settings `(A|A', B|B')` and are drawn from
//! singlet statistics. Key rounds put both devices on the z axis; Bob
//! secretly picks the sign of κ, integrating the hidden trajectories to get
//! both outcomes. Bob recovers Alice's bit by flipping his own whenever
//! his field was parallel to hers.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{Adversary, EvePrediction, KeyRoundView};
use crate::dynamics::{
    integrate_pair, HiddenState, IntegratorConfig, Kappa, PhysicalParams, Sign, Spin,
};
use crate::error::{Error, Result};
use crate::sampling::{substream, EquilibriumSampler, SeedSpec, StreamLabel};

/// Retries after the first attempt before a key round gives up.
pub const MAX_KEY_RETRIES: u32 = 10;

/// Minimum rounds per setting pair for a CHSH estimate.
pub const CHSH_MIN_ROUNDS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    A,
    APrime,
    B,
    BPrime,
    /// z axis, field parallel to Alice's.
    C,
    /// z axis, Bob's field reversed (κ < 0).
    MinusC,
}

impl Setting {
    /// Measurement angle in the x-z plane, measured from z.
    pub fn angle(self) -> f64 {
        match self {
            Setting::A | Setting::C => 0.0,
            Setting::APrime => FRAC_PI_2,
            Setting::B => FRAC_PI_4,
            Setting::BPrime => 3.0 * FRAC_PI_4,
            Setting::MinusC => PI,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Setting::A => "A",
            Setting::APrime => "A'",
            Setting::B => "B",
            Setting::BPrime => "B'",
            Setting::C => "C",
            Setting::MinusC => "-C",
        }
    }

    pub fn allowed_for(self, party: Party) -> bool {
        match party {
            Party::Alice => matches!(self, Setting::A | Setting::APrime | Setting::C),
            Party::Bob => matches!(
                self,
                Setting::B | Setting::BPrime | Setting::C | Setting::MinusC
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundType {
    Test,
    Key,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundPlan {
    pub round_index: u64,
    pub round_type: RoundType,
    pub alice_setting: Setting,
    pub bob_setting: Setting,
    pub kappa_sign: Option<Sign>,
}

impl RoundPlan {
    pub fn key(round_index: u64, sign: Sign) -> Self {
        Self {
            round_index,
            round_type: RoundType::Key,
            alice_setting: Setting::C,
            bob_setting: match sign {
                Sign::Plus => Setting::C,
                Sign::Minus => Setting::MinusC,
            },
            kappa_sign: Some(sign),
        }
    }

    pub fn test(round_index: u64, alice_setting: Setting, bob_setting: Setting) -> Self {
        Self {
            round_index,
            round_type: RoundType::Test,
            alice_setting,
            bob_setting,
            kappa_sign: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: u64,
    pub round_type: RoundType,
    pub alice_setting: Setting,
    pub bob_setting: Setting,
    pub kappa_sign: Option<Sign>,
    pub hidden: Option<HiddenState>,
    pub outcome_alice: Spin,
    pub outcome_bob: Spin,
    pub committed: bool,
    /// Hidden states drawn before one committed (key rounds only).
    pub attempts: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub n_rounds: u64,
    pub test_fraction: f64,
    pub kappa_magnitude: f64,
    /// When false Bob keeps κ > 0 on every key round, which is the standard
    /// protocol.
    pub flip_kappa: bool,
    pub physics: PhysicalParams,
    pub integrator: IntegratorConfig,
    pub seed: u64,
    /// Standard deviation of the equilibrium density in units of σ0.
    pub equilibrium_width_factor: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            n_rounds: 10_000,
            test_fraction: 0.5,
            kappa_magnitude: 100.0,
            flip_kappa: true,
            physics: PhysicalParams::default(),
            integrator: IntegratorConfig::default(),
            seed: 0,
            equilibrium_width_factor: 1.0,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds < 1 {
            return Err(Error::invalid("session.n_rounds", "must be >= 1"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid(
                "session.test_fraction",
                format!("must lie in (0, 1), got {}", self.test_fraction),
            ));
        }
        if !(self.kappa_magnitude.is_finite() && self.kappa_magnitude > 0.0) {
            return Err(Error::invalid(
                "session.kappa_magnitude",
                format!("must be finite and > 0, got {}", self.kappa_magnitude),
            ));
        }
        if !(self.equilibrium_width_factor.is_finite() && self.equilibrium_width_factor > 0.0) {
            return Err(Error::invalid(
                "session.equilibrium_width_factor",
                format!(
                    "must be finite and > 0, got {}",
                    self.equilibrium_width_factor
                ),
            ));
        }
        self.physics.validate()?;
        self.integrator.validate()
    }

    pub fn seed_spec(&self, label: StreamLabel) -> SeedSpec {
        SeedSpec::new(self.seed, label)
    }

    pub fn sampler(&self) -> Result<EquilibriumSampler> {
        EquilibriumSampler::from_params(&self.physics, self.equilibrium_width_factor)
    }
}

/// Plan of a single round; depends only on `(seed, round_index)`.
pub fn plan_round(cfg: &SessionConfig, round_index: u64) -> RoundPlan {
    let mut sched = substream(cfg.seed_spec(StreamLabel::Schedule), round_index);
    let is_test = sched.random::<f64>() < cfg.test_fraction;
    if is_test {
        let alice = if sched.random::<bool>() {
            Setting::APrime
        } else {
            Setting::A
        };
        let bob = if sched.random::<bool>() {
            Setting::BPrime
        } else {
            Setting::B
        };
        RoundPlan::test(round_index, alice, bob)
    } else {
        let sign = if cfg.flip_kappa
            && substream(cfg.seed_spec(StreamLabel::BobKappa), round_index).random::<bool>()
        {
            Sign::Minus
        } else {
            Sign::Plus
        };
        RoundPlan::key(round_index, sign)
    }
}

pub fn plan_session(cfg: &SessionConfig) -> Result<Vec<RoundPlan>> {
    cfg.validate()?;
    Ok((0..cfg.n_rounds).map(|i| plan_round(cfg, i)).collect())
}

/// Samples a hidden state and integrates it with `κ = sign · |κ|`,
/// resampling on ties and uncommitted trajectories.
pub fn run_key_round(plan: &RoundPlan, cfg: &SessionConfig) -> Result<RoundRecord> {
    let sign = match (plan.round_type, plan.kappa_sign) {
        (RoundType::Key, Some(s)) => s,
        _ => return Err(Error::invalid("plan", "not a key round")),
    };
    let kappa = Kappa::new(cfg.kappa_magnitude, sign)?;
    let sampler = cfg.sampler()?;
    let mut rng = substream(cfg.seed_spec(StreamLabel::KeyPhysics), plan.round_index);
    for attempt in 1..=MAX_KEY_RETRIES + 1 {
        let hidden = sampler.draw(&mut rng);
        if hidden.separation(kappa) == 0.0 {
            continue;
        }
        let traj = integrate_pair(hidden, kappa, &cfg.physics, &cfg.integrator)?;
        if let Ok((a, b)) = traj.outcomes() {
            return Ok(RoundRecord {
                round_index: plan.round_index,
                round_type: RoundType::Key,
                alice_setting: plan.alice_setting,
                bob_setting: plan.bob_setting,
                kappa_sign: Some(sign),
                hidden: Some(hidden),
                outcome_alice: a,
                outcome_bob: b,
                committed: true,
                attempts: attempt,
            });
        }
    }
    Err(Error::CommitmentFailure {
        round_index: plan.round_index,
        attempts: MAX_KEY_RETRIES + 1,
    })
}

/// Singlet statistics `P(a, b) = (1 - a b cos(α - β)) / 4`.
pub fn singlet_pair<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> (Spin, Spin) {
    let alice = if rng.random::<bool>() {
        Spin::Up
    } else {
        Spin::Down
    };
    let p_anti = 0.5 * (1.0 + (alpha - beta).cos());
    let bob = if rng.random::<f64>() < p_anti {
        alice.flipped()
    } else {
        alice
    };
    (alice, bob)
}

/// Test round with outcomes produced by `adversary` (singlet unless it
/// disturbs the state).
pub fn run_test_round(
    plan: &RoundPlan,
    adversary: &dyn Adversary,
    rng: &mut dyn RngCore,
) -> Result<RoundRecord> {
    if plan.round_type != RoundType::Test {
        return Err(Error::invalid("plan", "not a test round"));
    }
    let (a, b) = adversary.test_round(plan.alice_setting.angle(), plan.bob_setting.angle(), rng);
    Ok(RoundRecord {
        round_index: plan.round_index,
        round_type: RoundType::Test,
        alice_setting: plan.alice_setting,
        bob_setting: plan.bob_setting,
        kappa_sign: None,
        hidden: None,
        outcome_alice: a,
        outcome_bob: b,
        committed: true,
        attempts: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SiftedKey {
    pub alice_bits: Vec<u8>,
    pub bob_bits: Vec<u8>,
    pub round_indices: Vec<u64>,
}

impl SiftedKey {
    pub fn len(&self) -> usize {
        self.alice_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alice_bits.is_empty()
    }
}

/// Alice keeps her bit; Bob flips his on κ > 0 rounds.
pub fn sift(records: &[RoundRecord]) -> SiftedKey {
    let mut key = SiftedKey::default();
    for r in records {
        let sign = match (r.round_type, r.kappa_sign, r.committed) {
            (RoundType::Key, Some(s), true) => s,
            _ => continue,
        };
        let bob = match sign {
            Sign::Plus => r.outcome_bob.flipped(),
            Sign::Minus => r.outcome_bob,
        };
        key.alice_bits.push(r.outcome_alice.bit());
        key.bob_bits.push(bob.bit());
        key.round_indices.push(r.round_index);
    }
    key
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlator {
    pub alice_setting: Setting,
    pub bob_setting: Setting,
    pub rounds: u64,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshEstimate {
    pub s: f64,
    pub stderr: f64,
    /// In the order (A,B), (A,B'), (A',B), (A',B').
    pub correlators: [Correlator; 4],
}

/// `S = |E(A,B) - E(A,B') + E(A',B) + E(A',B')|` over test rounds.
pub fn chsh(records: &[RoundRecord]) -> Result<ChshEstimate> {
    const PAIRS: [(Setting, Setting); 4] = [
        (Setting::A, Setting::B),
        (Setting::A, Setting::BPrime),
        (Setting::APrime, Setting::B),
        (Setting::APrime, Setting::BPrime),
    ];
    const SIGNS: [f64; 4] = [1.0, -1.0, 1.0, 1.0];

    let mut counts = [0u64; 4];
    let mut sums = [0i64; 4];
    for r in records.iter().filter(|r| r.round_type == RoundType::Test) {
        if let Some(k) = PAIRS
            .iter()
            .position(|&p| p == (r.alice_setting, r.bob_setting))
        {
            counts[k] += 1;
            sums[k] += (r.outcome_alice.value() * r.outcome_bob.value()) as i64;
        }
    }
    if let Some(k) = counts.iter().position(|&c| c < CHSH_MIN_ROUNDS) {
        return Err(Error::InsufficientData(format!(
            "setting pair ({}, {}) has {} test rounds, need {CHSH_MIN_ROUNDS}",
            PAIRS[k].0.label(),
            PAIRS[k].1.label(),
            counts[k]
        )));
    }

    let correlators: [Correlator; 4] = std::array::from_fn(|k| {
        let n = counts[k] as f64;
        let value = sums[k] as f64 / n;
        Correlator {
            alice_setting: PAIRS[k].0,
            bob_setting: PAIRS[k].1,
            rounds: counts[k],
            value,
            stderr: ((1.0 - value * value).max(0.0) / n).sqrt(),
        }
    });
    let s = correlators
        .iter()
        .zip(SIGNS)
        .map(|(c, w)| w * c.value)
        .sum::<f64>()
        .abs();
    let stderr = correlators
        .iter()
        .map(|c| c.stderr * c.stderr)
        .sum::<f64>()
        .sqrt();
    Ok(ChshEstimate {
        s,
        stderr,
        correlators,
    })
}

/// How rounds are scheduled onto threads. Results do not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Serial,
    /// `threads == 0` uses every available core.
    Parallel { threads: usize },
}

impl Execution {
    /// Maps `f` over `items` preserving order.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Result<Vec<U>>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> Result<U> + Sync + Send,
    {
        match self {
            Execution::Serial => items.iter().map(f).collect(),
            Execution::Parallel { threads } => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| Error::invalid("threads", e.to_string()))?;
                pool.install(|| items.par_iter().map(f).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRun {
    pub records: Vec<RoundRecord>,
    /// Eve's key-round predictions, ordered by round index.
    pub predictions: Vec<EvePrediction>,
}

pub fn run_session(
    cfg: &SessionConfig,
    adversary: &dyn Adversary,
    exec: Execution,
) -> Result<SessionRun> {
    let plans = plan_session(cfg)?;
    let rounds = exec.map(&plans, |plan| run_round(plan, cfg, adversary))?;
    let mut records = Vec::with_capacity(rounds.len());
    let mut predictions = Vec::new();
    for (record, prediction) in rounds {
        records.push(record);
        predictions.extend(prediction);
    }
    Ok(SessionRun {
        records,
        predictions,
    })
}

fn run_round(
    plan: &RoundPlan,
    cfg: &SessionConfig,
    adversary: &dyn Adversary,
) -> Result<(RoundRecord, Option<EvePrediction>)> {
    match plan.round_type {
        RoundType::Test => {
            let mut rng = substream(cfg.seed_spec(StreamLabel::TestSampling), plan.round_index);
            Ok((run_test_round(plan, adversary, &mut rng)?, None))
        }
        RoundType::Key => {
            let record = run_key_round(plan, cfg)?;
            let view = KeyRoundView {
                round_index: plan.round_index,
                hidden: record.hidden.expect("key rounds carry their hidden state"),
                kappa: Kappa::new(
                    cfg.kappa_magnitude,
                    record.kappa_sign.expect("key round sign"),
                )?,
                kappa_public: !cfg.flip_kappa,
            };
            let mut rng = substream(cfg.seed_spec(StreamLabel::Eve), plan.round_index);
            let prediction = adversary.predict_key_round(&view, &mut rng)?;
            Ok((record, prediction))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::NoEve;
    use crate::dynamics::analytic_outcome;

    fn small(n: u64, seed: u64) -> SessionConfig {
        SessionConfig {
            n_rounds: n,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn settings_belong_to_parties() {
        assert!(Setting::MinusC.allowed_for(Party::Bob));
        assert!(!Setting::MinusC.allowed_for(Party::Alice));
        assert!(Setting::C.allowed_for(Party::Alice) && Setting::C.allowed_for(Party::Bob));
        assert!(!Setting::B.allowed_for(Party::Alice));
    }

    #[test]
    fn plans_use_party_settings() {
        for p in plan_session(&small(2000, 5)).unwrap() {
            assert!(p.alice_setting.allowed_for(Party::Alice));
            assert!(p.bob_setting.allowed_for(Party::Bob));
            match p.round_type {
                RoundType::Key => {
                    assert_eq!(p.alice_setting, Setting::C);
                    assert_eq!(
                        p.bob_setting == Setting::MinusC,
                        p.kappa_sign == Some(Sign::Minus)
                    );
                }
                RoundType::Test => assert!(p.kappa_sign.is_none()),
            }
        }
    }

    #[test]
    fn plan_counts_are_binomial() {
        let plans = plan_session(&small(10_000, 11)).unwrap();
        let n_test = plans
            .iter()
            .filter(|p| p.round_type == RoundType::Test)
            .count();
        assert!((4850..=5150).contains(&n_test), "{n_test}");
        let n_key = plans.len() - n_test;
        let plus = plans
            .iter()
            .filter(|p| p.kappa_sign == Some(Sign::Plus))
            .count() as f64;
        let half = n_key as f64 / 2.0;
        assert!((plus - half).abs() <= 3.0 * (n_key as f64 * 0.25).sqrt());
        assert_eq!(plans, plan_session(&small(10_000, 11)).unwrap());
    }

    #[test]
    fn fixed_kappa_never_flips() {
        let cfg = SessionConfig {
            flip_kappa: false,
            ..small(500, 2)
        };
        assert!(plan_session(&cfg)
            .unwrap()
            .iter()
            .all(|p| p.kappa_sign != Some(Sign::Minus)));
    }

    #[test]
    fn key_round_correlation_rules() {
        let cfg = small(1, 0);
        for i in 0..50 {
            for sign in [Sign::Plus, Sign::Minus] {
                let r = run_key_round(&RoundPlan::key(i, sign), &cfg).unwrap();
                let product = r.outcome_alice * r.outcome_bob;
                match sign {
                    Sign::Plus => assert_eq!(product, Spin::Down),
                    Sign::Minus => assert_eq!(product, Spin::Up),
                }
                // Same round index draws the same hidden state for either sign.
                let kappa = Kappa::new(cfg.kappa_magnitude, sign).unwrap();
                assert_eq!(
                    analytic_outcome(r.hidden.unwrap(), kappa).unwrap(),
                    (r.outcome_alice, r.outcome_bob)
                );
            }
        }
    }

    #[test]
    fn key_round_rejects_test_plan() {
        let plan = RoundPlan::test(0, Setting::A, Setting::B);
        assert!(run_key_round(&plan, &small(1, 0)).is_err());
    }

    #[test]
    fn hopeless_integrator_reports_commitment_failure() {
        let cfg = SessionConfig {
            integrator: IntegratorConfig {
                t_end: 0.01,
                ..Default::default()
            },
            ..small(1, 0)
        };
        assert!(matches!(
            run_key_round(&RoundPlan::key(0, Sign::Plus), &cfg),
            Err(Error::CommitmentFailure { attempts: 11, .. })
        ));
    }

    #[test]
    fn sift_examples() {
        let rec = |a, b, s| RoundRecord {
            round_index: 0,
            round_type: RoundType::Key,
            alice_setting: Setting::C,
            bob_setting: Setting::C,
            kappa_sign: Some(s),
            hidden: None,
            outcome_alice: a,
            outcome_bob: b,
            committed: true,
            attempts: 1,
        };
        let key = sift(&[
            rec(Spin::Up, Spin::Down, Sign::Plus),
            rec(Spin::Up, Spin::Up, Sign::Minus),
        ]);
        assert_eq!(key.alice_bits, vec![1, 1]);
        assert_eq!(key.bob_bits, vec![1, 1]);
    }

    #[test]
    fn equal_angles_are_anticorrelated() {
        let mut rng = SeedSpec::new(0, StreamLabel::TestSampling).stream(0);
        for _ in 0..1000 {
            let (a, b) = singlet_pair(0.3, 0.3, &mut rng);
            assert_eq!(a, b.flipped());
        }
    }

    #[test]
    fn deterministic_local_data_gives_two() {
        let records: Vec<RoundRecord> = (0..400)
            .map(|i| {
                let alice = if i % 2 == 0 {
                    Setting::A
                } else {
                    Setting::APrime
                };
                let bob = if (i / 2) % 2 == 0 {
                    Setting::B
                } else {
                    Setting::BPrime
                };
                RoundRecord {
                    outcome_alice: Spin::Up,
                    outcome_bob: Spin::Down,
                    ..run_test_round(
                        &RoundPlan::test(i, alice, bob),
                        &NoEve,
                        &mut SeedSpec::new(0, StreamLabel::TestSampling).stream(i),
                    )
                    .unwrap()
                }
            })
            .collect();
        let est = chsh(&records).unwrap();
        assert_eq!(est.s, 2.0);
        assert_eq!(est.stderr, 0.0);
        assert!(matches!(
            chsh(&records[..300]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn session_is_execution_independent() {
        let cfg = small(600, 77);
        let serial = run_session(&cfg, &NoEve, Execution::Serial).unwrap();
        let parallel = run_session(&cfg, &NoEve, Execution::Parallel { threads: 4 }).unwrap();
        assert_eq!(serial, parallel);
        let key = sift(&serial.records);
        assert_eq!(key.alice_bits, key.bob_bits);
    }
}
