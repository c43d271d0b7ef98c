use rand::RngCore;

use super::{
    analytic_eve_accuracy, predict_from_hypotheses, Adversary, EveKnowledge, EvePrediction,
    KeyRoundView,
};
use crate::dynamics::{
    analytic_outcome, integrate_pair, IntegratorConfig, Kappa, PhysicalParams, Sign, Spin,
};
use crate::error::Result;

/// How Eve turns hidden positions into outcome hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Predictor {
    /// Closed-form sign rule.
    Analytic,
    /// Re-integrate the trajectories for both κ signs. Falls back to the
    /// sign rule when a hypothetical trajectory does not commit.
    Integrate {
        params: PhysicalParams,
        integrator: IntegratorConfig,
    },
}

/// Eve who reads the initial hidden positions `(z1, z2)`.
#[derive(Debug, Clone)]
pub struct HiddenVariableEve {
    name: &'static str,
    knowledge: EveKnowledge,
    predictor: Predictor,
}

impl HiddenVariableEve {
    pub fn new(name: &'static str, knowledge: EveKnowledge, predictor: Predictor) -> Self {
        Self {
            name,
            knowledge,
            predictor,
        }
    }

    pub fn knowledge(&self) -> &EveKnowledge {
        &self.knowledge
    }

    fn hypothesis(&self, view: &KeyRoundView, sign: Sign) -> Result<(Spin, Spin)> {
        let kappa = Kappa::new(view.kappa.magnitude(), sign)?;
        match &self.predictor {
            Predictor::Analytic => analytic_outcome(view.hidden, kappa),
            Predictor::Integrate { params, integrator } => {
                let traj = integrate_pair(view.hidden, kappa, params, integrator)?;
                traj.outcomes()
                    .or_else(|_| analytic_outcome(view.hidden, kappa))
            }
        }
    }
}

impl Adversary for HiddenVariableEve {
    fn name(&self) -> &str {
        self.name
    }

    fn predict_key_round(
        &self,
        view: &KeyRoundView,
        rng: &mut dyn RngCore,
    ) -> Result<Option<EvePrediction>> {
        let mut knowledge = self.knowledge;
        knowledge.knows_kappa_sign |= view.kappa_public;
        let prediction = if matches!(self.predictor, Predictor::Analytic) {
            super::eve_predict_key_round(
                view.round_index,
                view.hidden,
                view.kappa.magnitude(),
                view.kappa.sign(),
                &knowledge,
                rng,
            )?
        } else {
            predict_from_hypotheses(
                view.round_index,
                |s| self.hypothesis(view, s),
                view.kappa.sign(),
                &knowledge,
                rng,
            )?
        };
        Ok(Some(prediction))
    }

    fn expected_accuracy(&self, kappa_magnitude: f64, kappa_public: bool) -> Option<f64> {
        let k = &self.knowledge;
        if !k.knows_hidden {
            Some(0.5)
        } else if k.knows_kappa_sign || kappa_public {
            Some(1.0)
        } else if k.knows_kappa_magnitude {
            analytic_eve_accuracy(kappa_magnitude).ok()
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::HiddenState;
    use crate::sampling::{SeedSpec, StreamLabel};

    #[test]
    fn integrate_predictor_agrees_with_analytic() {
        let params = PhysicalParams::default();
        let integrator = IntegratorConfig::default();
        let analytic = HiddenVariableEve::new("a", EveKnowledge::THREAT_MODEL, Predictor::Analytic);
        let full = HiddenVariableEve::new(
            "i",
            EveKnowledge::THREAT_MODEL,
            Predictor::Integrate { params, integrator },
        );
        for (i, (z1, z2)) in [(0.3, -0.2), (0.9, 0.004), (-0.4, 1.1), (1.5, -0.01)]
            .into_iter()
            .enumerate()
        {
            let view = KeyRoundView {
                round_index: i as u64,
                hidden: HiddenState::new(z1, z2),
                kappa: Kappa::new(100.0, Sign::Minus).unwrap(),
                kappa_public: false,
            };
            let seed = SeedSpec::new(9, StreamLabel::Eve);
            let p1 = analytic
                .predict_key_round(&view, &mut seed.stream(i as u64))
                .unwrap();
            let p2 = full
                .predict_key_round(&view, &mut seed.stream(i as u64))
                .unwrap();
            assert_eq!(p1, p2);
        }
    }

    #[test]
    fn public_sign_makes_eve_exact() {
        let eve = HiddenVariableEve::new("a", EveKnowledge::THREAT_MODEL, Predictor::Analytic);
        let hidden = HiddenState::new(0.05, 0.8);
        let kappa = Kappa::new(100.0, Sign::Plus).unwrap();
        let view = KeyRoundView {
            round_index: 0,
            hidden,
            kappa,
            kappa_public: true,
        };
        let p = eve
            .predict_key_round(&view, &mut SeedSpec::new(0, StreamLabel::Eve).stream(0))
            .unwrap()
            .unwrap();
        let (a, _) = analytic_outcome(hidden, kappa).unwrap();
        assert_eq!(p.predicted_alice_bit, a.bit());
        assert_eq!(eve.expected_accuracy(100.0, true), Some(1.0));
    }
}
