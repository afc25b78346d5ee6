use std::path::Path;

use detstab_core::limits::{StudyConfig, WaveSetup};
use detstab_core::model::ModelSpec;
use detstab_core::profile::{gas_state_from_pressure, DetonationOptions, ShockOptions, ZndOptions};
use detstab_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub profile: ProfileSection,
    /// Study knobs; the viscosity list comes from the profile section.
    #[serde(default)]
    pub study: StudyConfig,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    /// Front speed; defaults to 1 (Majda) or 3 (ideal gas).
    pub s: Option<f64>,
    /// Unburned state; defaults to 0 (Majda) or (tau, v, E) at unit
    /// density and pressure at rest (ideal gas).
    pub u_plus: Option<Vec<f64>>,
    pub eps: Vec<f64>,
    pub znd: ZndOptions,
    pub shock: ShockOptions,
    pub detonation: DetonationOptions,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection {
            s: None,
            u_plus: None,
            eps: vec![0.1, 0.05, 0.025],
            znd: ZndOptions::default(),
            shock: ShockOptions::default(),
            detonation: DetonationOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.model.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(s) = cfg.profile.s {
            if !(s > 0.0) {
                return Err(Error::Config(format!("front speed s = {s} must be positive")));
            }
        }
        if let Some(u) = &cfg.profile.u_plus {
            if u.len() != cfg.model.n() {
                return Err(Error::Config(format!(
                    "u_plus has {} components, the model has {}",
                    u.len(),
                    cfg.model.n()
                )));
            }
        }
        Ok(cfg)
    }

    pub fn setup(&self) -> Result<WaveSetup> {
        let (s, u_plus) = match &self.model {
            ModelSpec::Majda(_) => (self.profile.s.unwrap_or(1.0), self.profile.u_plus.clone().unwrap_or(vec![0.0])),
            ModelSpec::IdealGas(_) => {
                let u = match &self.profile.u_plus {
                    Some(u) => u.clone(),
                    None => gas_state_from_pressure(&self.model, 1.0, 0.0, 1.0)?,
                };
                (self.profile.s.unwrap_or(3.0), u)
            }
        };
        Ok(WaveSetup {
            u_plus,
            s,
            znd: self.profile.znd,
            shock: self.profile.shock,
            detonation: self.profile.detonation,
        })
    }

    /// Study settings with the viscosity list of the profile section.
    pub fn study(&self) -> StudyConfig {
        let mut s = self.study.clone();
        s.eps = self.profile.eps.clone();
        s.eps_max = self.profile.detonation.eps_max;
        s
    }

    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_majda_config() {
        let text = r#"{"model": {"kind": "majda", "q": 0.3, "k": 1.0, "u_ig": 0.5, "activation": 1.0, "b": 1.0, "c": 1.0}}"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        let setup = cfg.setup().unwrap();
        assert_eq!(setup.u_plus, vec![0.0]);
        assert_eq!(setup.s, 1.0);
        assert_eq!(cfg.study().eps, vec![0.1, 0.05, 0.025]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"model": {"kind": "majda", "q": 0.3, "k": 1.0, "u_ig": 0.5, "activation": 1.0, "b": 1.0, "c": 1.0}, "extra": 1}"#;
        assert!(matches!(ExperimentConfig::parse(text), Err(Error::Config(_))));
    }

    #[test]
    fn wrong_state_length_is_rejected() {
        let text = r#"{"model": {"kind": "majda", "q": 0.3, "k": 1.0, "u_ig": 0.5, "activation": 1.0, "b": 1.0, "c": 1.0},
            "profile": {"u_plus": [0.0, 1.0]}}"#;
        assert!(ExperimentConfig::parse(text).is_err());
    }
}
