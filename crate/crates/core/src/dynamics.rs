//! Two-particle Stern-Gerlach dynamics in the Bohmian picture.
//!
//! Alice's magnet produces the field `(0, 0, B0 + B z1)`, Bob's produces
//! `kappa * (0, 0, B0 + B z2)`. Only the z coordinates of the two hidden
//! trajectories are dynamical. Their velocities are
//!
//! ```text
//! dz1/dt = hbar² t z1 / (4 m² σ0⁴ ε(t)) + BμT/(m ε(t)) · tanh(u BμT t / (m σ0² ε(t)))
//! dz2/dt = hbar² t z2 / (4 m² σ0⁴ ε(t)) − κ BμT/(m ε(t)) · tanh(u BμT t / (m σ0² ε(t)))
//! ε(t)   = 1 + hbar² t² / (4 σ0⁴ m²),      u = z1 − κ z2
//! ```
//!
//! The measured spins are the signs of `z1` and `z2` once the packets have
//! separated. Because `du/dt` always has the sign of `u`, the outcomes are
//! fixed by `sign(z1(0) − κ z2(0))` and the sign of `κ`; see
//! [`analytic_outcome`].

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::ode::rk4_step;

/// Above this magnitude `tanh` is returned as exactly ±1.
pub const TANH_SATURATION: f64 = 40.0;

/// A measured spin, `+1` (up) or `-1` (down).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    /// `None` for an exact zero.
    pub fn from_sign(x: f64) -> Option<Spin> {
        if x > 0.0 {
            Some(Spin::Up)
        } else if x < 0.0 {
            Some(Spin::Down)
        } else {
            None
        }
    }

    pub fn value(self) -> i8 {
        match self {
            Spin::Up => 1,
            Spin::Down => -1,
        }
    }

    /// Key bit convention: up is 1, down is 0.
    pub fn bit(self) -> u8 {
        match self {
            Spin::Up => 1,
            Spin::Down => 0,
        }
    }

    pub fn from_bit(bit: u8) -> Spin {
        if bit == 0 {
            Spin::Down
        } else {
            Spin::Up
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

impl std::ops::Mul for Spin {
    type Output = Spin;

    fn mul(self, rhs: Spin) -> Spin {
        if self == rhs {
            Spin::Up
        } else {
            Spin::Down
        }
    }
}

/// Sign of Bob's field scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// Physical constants of the two Stern-Gerlach magnets and the particles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    pub mass: f64,
    pub moment: f64,
    pub gradient: f64,
    /// Uniform part `B0` of the field. It does not enter the z-dynamics.
    pub offset: f64,
    pub interaction_time: f64,
    /// Initial Gaussian half-width, used as the standard deviation of the
    /// position density.
    pub halfwidth: f64,
    pub hbar: f64,
}

impl Default for PhysicalParams {
    /// Dimensionless units with kick strength `BμT = 5`.
    fn default() -> Self {
        Self {
            mass: 1.0,
            moment: 1.0,
            gradient: 5.0,
            offset: 0.0,
            interaction_time: 1.0,
            halfwidth: 1.0,
            hbar: 1.0,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        positive("physics.mass", self.mass)?;
        positive("physics.halfwidth", self.halfwidth)?;
        positive("physics.hbar", self.hbar)?;
        positive("physics.interaction_time", self.interaction_time)?;
        nonzero("physics.gradient", self.gradient)?;
        nonzero("physics.moment", self.moment)?;
        if !(self.offset.is_finite() && self.offset >= 0.0) {
            return Err(Error::invalid(
                "physics.offset",
                format!("must be finite and >= 0, got {}", self.offset),
            ));
        }
        Ok(())
    }

    /// `g = B μ T`.
    pub fn kick_strength(&self) -> f64 {
        self.gradient * self.moment * self.interaction_time
    }

    /// Packet width `σ0 √ε(t)` at time `t`.
    pub fn spread(&self, t: f64) -> f64 {
        self.halfwidth * epsilon(t, self).sqrt()
    }
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be finite and > 0, got {x}"),
        ))
    }
}

fn nonzero(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x != 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be finite and nonzero, got {x}"),
        ))
    }
}

/// Initial hidden positions `(z1, z2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiddenState {
    pub z1: f64,
    pub z2: f64,
}

impl HiddenState {
    pub fn new(z1: f64, z2: f64) -> Self {
        Self { z1, z2 }
    }

    pub fn is_finite(&self) -> bool {
        self.z1.is_finite() && self.z2.is_finite()
    }

    /// `z1 − κ z2`, whose sign is conserved by the dynamics.
    pub fn separation(&self, kappa: Kappa) -> f64 {
        self.z1 - kappa.value() * self.z2
    }
}

/// Bob's field scale `κ = sign · magnitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    magnitude: f64,
    sign: Sign,
}

impl Kappa {
    pub fn new(magnitude: f64, sign: Sign) -> Result<Self> {
        positive("kappa.magnitude", magnitude)?;
        Ok(Self { magnitude, sign })
    }

    pub fn from_value(value: f64) -> Result<Self> {
        let sign = if value < 0.0 { Sign::Minus } else { Sign::Plus };
        Self::new(value.abs(), sign)
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn value(&self) -> f64 {
        self.sign.value() * self.magnitude
    }

    pub fn flipped(&self) -> Kappa {
        Kappa {
            magnitude: self.magnitude,
            sign: self.sign.flipped(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub t_end: f64,
    pub n_steps: usize,
    /// Fraction of the final steps over which both signs must stay fixed.
    pub commitment_window: f64,
    /// Required `|z_i(t_end)| / (σ0 √ε(t_end))`.
    pub commitment_margin: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            t_end: 5.0,
            n_steps: 500,
            commitment_window: 0.2,
            commitment_margin: 2.0,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        positive("integrator.t_end", self.t_end)?;
        if self.n_steps < 10 {
            return Err(Error::invalid(
                "integrator.n_steps",
                format!("must be >= 10, got {}", self.n_steps),
            ));
        }
        if !(self.commitment_window > 0.0 && self.commitment_window < 1.0) {
            return Err(Error::invalid(
                "integrator.commitment_window",
                format!("must lie in (0, 1), got {}", self.commitment_window),
            ));
        }
        positive("integrator.commitment_margin", self.commitment_margin)
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    /// Number of final steps checked for sign stability (at least one).
    pub fn window_steps(&self) -> usize {
        ((self.commitment_window * self.n_steps as f64).ceil() as usize).clamp(1, self.n_steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub times: Vec<f64>,
    pub z1_path: Vec<f64>,
    pub z2_path: Vec<f64>,
    /// `None` only if `z1(t_end)` is exactly zero.
    pub outcome_alice: Option<Spin>,
    pub outcome_bob: Option<Spin>,
    pub committed: bool,
}

impl TrajectoryResult {
    /// The `(Alice, Bob)` outcomes, or [`Error::NotCommitted`].
    pub fn outcomes(&self) -> Result<(Spin, Spin)> {
        match (self.committed, self.outcome_alice, self.outcome_bob) {
            (true, Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::NotCommitted {
                t_end: self.times.last().copied().unwrap_or(0.0),
            }),
        }
    }

    pub fn final_state(&self) -> HiddenState {
        HiddenState::new(
            *self.z1_path.last().expect("non-empty path"),
            *self.z2_path.last().expect("non-empty path"),
        )
    }
}

/// Packet spreading factor `ε(t) = 1 + hbar² t² / (4 σ0⁴ m²)`.
pub fn epsilon(t: f64, params: &PhysicalParams) -> f64 {
    let s2 = params.halfwidth * params.halfwidth;
    1.0 + params.hbar * params.hbar * t * t / (4.0 * s2 * s2 * params.mass * params.mass)
}

/// `tanh` that returns exactly ±1 beyond [`TANH_SATURATION`].
pub fn saturating_tanh(x: f64) -> f64 {
    if x > TANH_SATURATION {
        1.0
    } else if x < -TANH_SATURATION {
        -1.0
    } else {
        x.tanh()
    }
}

/// Argument of the shared `tanh` term.
pub fn tanh_argument(state: [f64; 2], t: f64, kappa: Kappa, params: &PhysicalParams) -> f64 {
    let eps = epsilon(t, params);
    let u = state[0] - kappa.value() * state[1];
    u * params.kick_strength() * t / (params.mass * params.halfwidth * params.halfwidth * eps)
}

/// Velocities `(dz1/dt, dz2/dt)`.
pub fn velocity(state: [f64; 2], t: f64, kappa: Kappa, params: &PhysicalParams) -> [f64; 2] {
    let eps = epsilon(t, params);
    let s2 = params.halfwidth * params.halfwidth;
    let spread_rate =
        params.hbar * params.hbar * t / (4.0 * params.mass * params.mass * s2 * s2 * eps);
    let kick = params.kick_strength() / (params.mass * eps);
    let th = saturating_tanh(tanh_argument(state, t, kappa, params));
    [
        spread_rate * state[0] + kick * th,
        spread_rate * state[1] - kappa.value() * kick * th,
    ]
}

/// Integrates the pair with fixed-step RK4 from `t = 0` to `cfg.t_end`.
///
/// A result that fails the commitment test is still returned, with
/// `committed = false`; [`TrajectoryResult::outcomes`] turns it into
/// [`Error::NotCommitted`].
pub fn integrate_pair(
    initial: HiddenState,
    kappa: Kappa,
    params: &PhysicalParams,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryResult> {
    params.validate()?;
    cfg.validate()?;
    if !initial.is_finite() {
        return Err(Error::invalid("initial", "hidden state must be finite"));
    }

    let n = cfg.n_steps;
    let h = cfg.step();
    let mut times = Vec::with_capacity(n + 1);
    let mut z1_path = Vec::with_capacity(n + 1);
    let mut z2_path = Vec::with_capacity(n + 1);

    let mut y = [initial.z1, initial.z2];
    times.push(0.0);
    z1_path.push(y[0]);
    z2_path.push(y[1]);
    for k in 0..n {
        let t = k as f64 * h;
        y = rk4_step(|t, y| velocity(*y, t, kappa, params), t, &y, h);
        times.push((k + 1) as f64 * h);
        z1_path.push(y[0]);
        z2_path.push(y[1]);
    }

    let outcome_alice = Spin::from_sign(y[0]);
    let outcome_bob = Spin::from_sign(y[1]);
    let committed = is_committed(&z1_path, &z2_path, params, cfg);
    Ok(TrajectoryResult {
        times,
        z1_path,
        z2_path,
        outcome_alice,
        outcome_bob,
        committed,
    })
}

fn is_committed(
    z1_path: &[f64],
    z2_path: &[f64],
    params: &PhysicalParams,
    cfg: &IntegratorConfig,
) -> bool {
    let start = z1_path.len() - 1 - cfg.window_steps();
    let threshold = cfg.commitment_margin * params.spread(cfg.t_end);
    [z1_path, z2_path].iter().all(|path| {
        let window = &path[start..];
        let last = window[window.len() - 1];
        let stable = match Spin::from_sign(last) {
            Some(s) => window.iter().all(|&z| Spin::from_sign(z) == Some(s)),
            None => false,
        };
        stable && last.abs() >= threshold
    })
}

/// Closed-form outcomes: Alice gets `sign(z1 − κ z2)`, Bob gets
/// `−sign(κ)` times Alice's result.
pub fn analytic_outcome(initial: HiddenState, kappa: Kappa) -> Result<(Spin, Spin)> {
    let alice = Spin::from_sign(initial.separation(kappa)).ok_or(Error::Tie {
        z1: initial.z1,
        z2: initial.z2,
    })?;
    let bob = match kappa.sign() {
        Sign::Plus => alice.flipped(),
        Sign::Minus => alice,
    };
    Ok((alice, bob))
}

/// Single-particle stand-in: the particle deflects up iff it sits in the
/// upper `p_up` quantile of its packet, `Φ(z0/σ0) > 1 − p_up`.
pub fn single_particle_outcome(z0: f64, p_up: f64, halfwidth: f64) -> Result<Spin> {
    if !(0.0..=1.0).contains(&p_up) {
        return Err(Error::invalid(
            "p_up",
            format!("must lie in [0, 1], got {p_up}"),
        ));
    }
    if !z0.is_finite() {
        return Err(Error::invalid("z0", "must be finite"));
    }
    positive("halfwidth", halfwidth)?;
    if p_up == 1.0 {
        return Ok(Spin::Up);
    }
    let phi = Normal::standard().cdf(z0 / halfwidth);
    Ok(if phi > 1.0 - p_up {
        Spin::Up
    } else {
        Spin::Down
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> PhysicalParams {
        PhysicalParams::default()
    }

    fn kappa(v: f64) -> Kappa {
        Kappa::from_value(v).unwrap()
    }

    #[test]
    fn epsilon_values() {
        let p = unit();
        assert_eq!(epsilon(0.0, &p), 1.0);
        assert_eq!(epsilon(2.0, &p), 2.0);
        assert_eq!(epsilon(4.0, &p), 5.0);
        let other = PhysicalParams {
            mass: 3.0,
            halfwidth: 0.4,
            hbar: 2.0,
            ..unit()
        };
        assert_eq!(epsilon(0.0, &other), 1.0);
        assert!(epsilon(1.0, &other) < epsilon(1.5, &other));
    }

    #[test]
    fn origin_and_initial_time_are_still() {
        let p = unit();
        for k in [-100.0, -1.0, 0.5, 10.0] {
            assert_eq!(velocity([0.0, 0.0], 3.0, kappa(k), &p), [0.0, 0.0]);
            let v = velocity([0.7, -1.3], 0.0, kappa(k), &p);
            assert_eq!(v[0], 0.0);
            assert_eq!(v[1].abs(), 0.0);
        }
    }

    #[test]
    fn velocity_matches_term_by_term_evaluation() {
        // hbar = m = σ0 = μ = T = 1, B = 5, z = (0.3, -0.2), κ = 1, t = 1.
        // ε = 1.25, u = 0.5, arg = 0.5 * 5 / 1.25 = 2,
        // v1 = 0.3/5 + 4 tanh 2, v2 = -0.2/5 - 4 tanh 2.
        let v = velocity([0.3, -0.2], 1.0, kappa(1.0), &unit());
        let t2 = 2.0_f64.tanh();
        assert_relative_eq!(v[0], 0.06 + 4.0 * t2, max_relative = 1e-12);
        assert_relative_eq!(v[1], -0.04 - 4.0 * t2, max_relative = 1e-12);
    }

    #[test]
    fn saturation_is_exact() {
        assert_eq!(saturating_tanh(1e300), 1.0);
        assert_eq!(saturating_tanh(-1e300), -1.0);
        assert_eq!(saturating_tanh(f64::MAX), 1.0);
        assert_eq!(saturating_tanh(0.3), 0.3_f64.tanh());
    }

    #[test]
    fn worked_outcome_examples() {
        let p = unit();
        let cfg = IntegratorConfig::default();
        let cases = [
            ((0.3, -0.2), 1.0, (Spin::Up, Spin::Down)),
            ((-0.1, 0.4), 1.0, (Spin::Down, Spin::Up)),
            ((0.3, -0.2), -1.0, (Spin::Up, Spin::Up)),
        ];
        for ((z1, z2), k, expected) in cases {
            let s = HiddenState::new(z1, z2);
            let traj = integrate_pair(s, kappa(k), &p, &cfg).unwrap();
            assert_eq!(traj.outcomes().unwrap(), expected);
            assert_eq!(analytic_outcome(s, kappa(k)).unwrap(), expected);
        }
    }

    #[test]
    fn path_lengths_match_grid() {
        let cfg = IntegratorConfig {
            n_steps: 37,
            ..Default::default()
        };
        let traj = integrate_pair(HiddenState::new(0.1, 0.2), kappa(2.0), &unit(), &cfg).unwrap();
        assert_eq!(traj.times.len(), 38);
        assert_eq!(traj.z1_path.len(), 38);
        assert_eq!(traj.z2_path.len(), 38);
        assert_eq!(*traj.times.last().unwrap(), cfg.t_end);
    }

    #[test]
    fn origin_is_a_fixed_point_and_never_commits() {
        let traj = integrate_pair(
            HiddenState::new(0.0, 0.0),
            kappa(1.0),
            &unit(),
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(traj.z1_path.iter().chain(&traj.z2_path).all(|&z| z == 0.0));
        assert!(!traj.committed);
        assert_eq!(traj.outcome_alice, None);
        assert!(matches!(traj.outcomes(), Err(Error::NotCommitted { .. })));
    }

    #[test]
    fn short_run_is_not_committed() {
        let cfg = IntegratorConfig {
            t_end: 0.05,
            ..Default::default()
        };
        let traj = integrate_pair(HiddenState::new(0.3, -0.2), kappa(1.0), &unit(), &cfg).unwrap();
        assert!(!traj.committed);
    }

    #[test]
    fn offset_has_no_effect() {
        let s = HiddenState::new(0.42, -0.77);
        let cfg = IntegratorConfig::default();
        let base = integrate_pair(s, kappa(-10.0), &unit(), &cfg).unwrap();
        for b0 in [1.0, 10.0] {
            let p = PhysicalParams {
                offset: b0,
                ..unit()
            };
            assert_eq!(integrate_pair(s, kappa(-10.0), &p, &cfg).unwrap(), base);
        }
    }

    #[test]
    fn analytic_tie_is_an_error() {
        assert!(matches!(
            analytic_outcome(HiddenState::new(0.2, 0.2), kappa(1.0)),
            Err(Error::Tie { .. })
        ));
        assert!(matches!(
            analytic_outcome(HiddenState::new(0.2, -0.1), kappa(-2.0)),
            Err(Error::Tie { .. })
        ));
    }

    #[test]
    fn large_kappa_flip_keeps_bob() {
        // |100 z2| > |z1|: flipping κ flips Alice and leaves Bob.
        let s = HiddenState::new(0.05, 0.8);
        let (ap, bp) = analytic_outcome(s, kappa(100.0)).unwrap();
        let (am, bm) = analytic_outcome(s, kappa(-100.0)).unwrap();
        assert_eq!(bp, bm);
        assert_eq!(ap, am.flipped());
    }

    #[test]
    fn single_particle_rule() {
        for z in [-50.0, -1.0, 0.0, 3.0] {
            assert_eq!(single_particle_outcome(z, 1.0, 1.0).unwrap(), Spin::Up);
            assert_eq!(single_particle_outcome(z, 0.0, 1.0).unwrap(), Spin::Down);
        }
        assert_eq!(single_particle_outcome(0.7, 0.5, 1.0).unwrap(), Spin::Up);
        assert_eq!(single_particle_outcome(-0.7, 0.5, 1.0).unwrap(), Spin::Down);
        // Φ(0.7/2) < 0.7, so z0 = 0.7 at σ0 = 2 lies below the top 30 %.
        assert_eq!(single_particle_outcome(0.7, 0.3, 2.0).unwrap(), Spin::Down);
        assert!(single_particle_outcome(0.0, 1.5, 1.0).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = PhysicalParams {
            mass: 0.0,
            ..unit()
        };
        assert!(bad.validate().is_err());
        let bad = PhysicalParams {
            moment: 0.0,
            ..unit()
        };
        assert!(bad.validate().is_err());
        let bad = IntegratorConfig {
            n_steps: 9,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = IntegratorConfig {
            commitment_window: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(Kappa::from_value(0.0).is_err());
    }
}
