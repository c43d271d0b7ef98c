use std::path::Path;

use kappa_qkd::{
    AdversaryOptions, AdversaryRegistry, IntegratorConfig, PhysicalParams, SessionConfig,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// On-disk run configuration. Every section is optional and falls back to
/// the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub physics: PhysicalParams,
    pub integrator: IntegratorConfig,
    pub session: SessionSection,
    pub adversary: AdversarySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSection {
    pub n_rounds: u64,
    pub test_fraction: f64,
    pub kappa_magnitude: f64,
    pub seed: u64,
    /// Bob randomizes the sign of κ per key round.
    pub flip_kappa: bool,
    pub equilibrium_width_factor: f64,
}

impl Default for SessionSection {
    fn default() -> Self {
        let d = SessionConfig::default();
        Self {
            n_rounds: d.n_rounds,
            test_fraction: d.test_fraction,
            kappa_magnitude: d.kappa_magnitude,
            seed: d.seed,
            flip_kappa: d.flip_kappa,
            equilibrium_width_factor: d.equilibrium_width_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversarySection {
    pub model: String,
    /// Predict by integrating trajectories rather than the sign rule.
    pub integrate: bool,
    pub knows_hidden: bool,
    pub knows_kappa_magnitude: bool,
}

impl Default for AdversarySection {
    fn default() -> Self {
        let d = AdversaryOptions::default();
        Self {
            model: "none".into(),
            integrate: d.integrate,
            knows_hidden: d.knows_hidden,
            knows_kappa_magnitude: d.knows_kappa_magnitude,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            n_rounds: self.session.n_rounds,
            test_fraction: self.session.test_fraction,
            kappa_magnitude: self.session.kappa_magnitude,
            flip_kappa: self.session.flip_kappa,
            physics: self.physics,
            integrator: self.integrator,
            seed: self.session.seed,
            equilibrium_width_factor: self.session.equilibrium_width_factor,
        }
    }

    pub fn adversary_options(&self) -> AdversaryOptions {
        AdversaryOptions {
            params: self.physics,
            integrator: self.integrator,
            integrate: self.adversary.integrate,
            knows_hidden: self.adversary.knows_hidden,
            knows_kappa_magnitude: self.adversary.knows_kappa_magnitude,
        }
    }

    /// Checks every section, including the adversary name.
    pub fn validate(&self, registry: &AdversaryRegistry) -> Result<(), CliError> {
        self.session_config().validate()?;
        if !registry.contains(&self.adversary.model) {
            let known: Vec<_> = registry.names().collect();
            return Err(CliError::Config(format!(
                "unknown adversary model `{}` (known: {})",
                self.adversary.model,
                known.join(", ")
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::parse("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.session_config(), SessionConfig::default());
    }

    #[test]
    fn unknown_keys_are_named() {
        for doc in [
            r#"{"sesion": {}}"#,
            r#"{"physics": {"mas": 1.0}}"#,
            r#"{"session": {"rounds": 5}}"#,
            r#"{"adversary": {"model": "none", "extra": 1}}"#,
        ] {
            let CliError::Config(msg) = RunConfig::parse(doc).unwrap_err() else {
                panic!("expected config error for {doc}");
            };
            assert!(msg.contains("unknown field"), "{msg}");
        }
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg =
            RunConfig::parse(r#"{"physics": {"mass": 2.0}, "session": {"seed": 9}}"#).unwrap();
        assert_eq!(cfg.physics.mass, 2.0);
        assert_eq!(cfg.physics.gradient, PhysicalParams::default().gradient);
        assert_eq!(cfg.session.seed, 9);
        assert_eq!(cfg.session.n_rounds, SessionConfig::default().n_rounds);
    }

    #[test]
    fn validation_catches_bad_values_and_models() {
        let registry = AdversaryRegistry::builtin();
        let mut cfg = RunConfig::default();
        cfg.physics.mass = -1.0;
        assert!(matches!(cfg.validate(&registry), Err(CliError::Config(_))));
        let mut cfg = RunConfig::default();
        cfg.adversary.model = "oracle".into();
        assert!(matches!(cfg.validate(&registry), Err(CliError::Config(_))));
        assert!(RunConfig::default().validate(&registry).is_ok());
    }
}
