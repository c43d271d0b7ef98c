use std::collections::BTreeMap;

use super::{Adversary, EveKnowledge, HiddenVariableEve, InterceptResendEve, Predictor};
use crate::dynamics::{IntegratorConfig, PhysicalParams};
use crate::error::{Error, Result};

/// Construction options shared by all registered models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversaryOptions {
    pub params: PhysicalParams,
    pub integrator: IntegratorConfig,
    /// Use full trajectory integration instead of the sign rule.
    pub integrate: bool,
    pub knows_hidden: bool,
    pub knows_kappa_magnitude: bool,
}

impl Default for AdversaryOptions {
    fn default() -> Self {
        Self {
            params: PhysicalParams::default(),
            integrator: IntegratorConfig::default(),
            integrate: false,
            knows_hidden: true,
            knows_kappa_magnitude: true,
        }
    }
}

impl AdversaryOptions {
    fn predictor(&self) -> Predictor {
        if self.integrate {
            Predictor::Integrate {
                params: self.params,
                integrator: self.integrator,
            }
        } else {
            Predictor::Analytic
        }
    }
}

pub type AdversaryFactory = fn(&AdversaryOptions) -> Box<dyn Adversary>;

struct Entry {
    description: &'static str,
    factory: AdversaryFactory,
}

/// Adversary models keyed by name.
pub struct AdversaryRegistry {
    entries: BTreeMap<&'static str, Entry>,
}

impl AdversaryRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("none", "no eavesdropper", |_| Box::new(NoEve));
        r.register(
            "hidden-variable",
            "reads initial hidden positions; kappa sign secret",
            |o| {
                Box::new(HiddenVariableEve::new(
                    "hidden-variable",
                    EveKnowledge {
                        knows_hidden: o.knows_hidden,
                        knows_kappa_sign: false,
                        knows_kappa_magnitude: o.knows_kappa_magnitude,
                    },
                    o.predictor(),
                ))
            },
        );
        r.register(
            "hidden-variable-with-kappa",
            "reads initial hidden positions and Bob's kappa sign",
            |o| {
                Box::new(HiddenVariableEve::new(
                    "hidden-variable-with-kappa",
                    EveKnowledge {
                        knows_hidden: o.knows_hidden,
                        knows_kappa_sign: true,
                        knows_kappa_magnitude: o.knows_kappa_magnitude,
                    },
                    o.predictor(),
                ))
            },
        );
        r.register(
            "intercept-resend",
            "measures Bob's particle along z and resends the eigenstate",
            |_| Box::new(InterceptResendEve),
        );
        r
    }

    /// Adds or replaces a model.
    pub fn register(
        &mut self,
        name: &'static str,
        description: &'static str,
        factory: AdversaryFactory,
    ) {
        self.entries.insert(
            name,
            Entry {
                description,
                factory,
            },
        );
    }

    pub fn create(&self, name: &str, options: &AdversaryOptions) -> Result<Box<dyn Adversary>> {
        self.entries
            .get(name)
            .map(|e| (e.factory)(options))
            .ok_or_else(|| Error::UnknownAdversary {
                name: name.to_string(),
                known: self.names().collect::<Vec<_>>().join(", "),
            })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn describe(&self) -> impl Iterator<Item = (&'static str, &'static str)> + '_ {
        self.entries.iter().map(|(k, e)| (*k, e.description))
    }
}

impl Default for AdversaryRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// No eavesdropper.
#[derive(Debug, Clone, Default)]
pub struct NoEve;

impl Adversary for NoEve {
    fn name(&self) -> &str {
        "none"
    }
}
