//! Quantum-equilibrium initial positions and counter-based random substreams.
//!
//! Every random quantity in a session is drawn from a substream addressed by
//! `(master_seed, label, round_index)`. The substream is a ChaCha20 keystream
//! whose key encodes the master seed and label and whose stream id is the
//! round index, so any round can be regenerated without touching the others.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{HiddenState, PhysicalParams};
use crate::error::{Error, Result};

/// Recorded in reports so results can be tied to the generator that made them.
pub const GENERATOR: &str =
    "ChaCha20 (rand_chacha 0.9): key = master_seed(le64) || label(le64) || 0^16, stream = round_index";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamLabel {
    /// Round type and test-setting choices.
    Schedule,
    /// Hidden positions for key rounds.
    KeyPhysics,
    /// Outcomes of test rounds.
    TestSampling,
    /// Bob's private κ signs.
    BobKappa,
    /// Eve's coin flips and measurement outcomes.
    Eve,
}

impl StreamLabel {
    fn tag(self) -> u64 {
        match self {
            StreamLabel::Schedule => 1,
            StreamLabel::KeyPhysics => 2,
            StreamLabel::TestSampling => 3,
            StreamLabel::BobKappa => 4,
            StreamLabel::Eve => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub label: StreamLabel,
}

impl SeedSpec {
    pub fn new(master_seed: u64, label: StreamLabel) -> Self {
        Self { master_seed, label }
    }

    pub fn stream(&self, round_index: u64) -> Substream {
        substream(*self, round_index)
    }
}

/// Random stream for one `(seed, label, round)` triple.
#[derive(Debug, Clone)]
pub struct Substream(ChaCha20Rng);

impl RngCore for Substream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

pub fn substream(seed: SeedSpec, round_index: u64) -> Substream {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&seed.label.tag().to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(round_index);
    Substream(rng)
}

/// Independent centred Gaussians for `z1` and `z2`.
#[derive(Debug, Clone, Copy)]
pub struct EquilibriumSampler {
    normal: Normal<f64>,
}

impl EquilibriumSampler {
    pub fn new(std_dev: f64) -> Result<Self> {
        let normal = Normal::new(0.0, std_dev)
            .ok()
            .filter(|_| std_dev > 0.0)
            .ok_or_else(|| Error::invalid("std_dev", format!("must be > 0, got {std_dev}")))?;
        Ok(Self { normal })
    }

    /// Standard deviation `width_factor · σ0`.
    pub fn from_params(params: &PhysicalParams, width_factor: f64) -> Result<Self> {
        Self::new(params.halfwidth * width_factor)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> HiddenState {
        let z1 = self.normal.sample(rng);
        let z2 = self.normal.sample(rng);
        HiddenState::new(z1, z2)
    }
}

/// `n` equilibrium states; state `i` is the first draw of substream `i`.
pub fn sample_equilibrium(
    n: usize,
    params: &PhysicalParams,
    seed: SeedSpec,
) -> Result<Vec<HiddenState>> {
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    let sampler = EquilibriumSampler::from_params(params, 1.0)?;
    Ok((0..n as u64)
        .map(|i| sampler.draw(&mut substream(seed, i)))
        .collect())
}
