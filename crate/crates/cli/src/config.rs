//! TOML configuration with named profiles.
//!
//! ```toml
//! [profiles.quick.dataset]
//! frames_per_sequence = 5
//!
//! [profiles.quick.scenario]
//! trials = 2
//! epochs = 5
//!
//! [profiles.quick.scenario.overrides]
//! removal_threshold = 1.0
//! ```
//!
//! A profile's tables are laid over the built-in defaults; command-line flags
//! are applied last.

use std::collections::BTreeMap;
use std::path::Path;

use gdm_core::datagen::CollectionSpec;
use gdm_core::scenarios::{ScenarioConfig, ScenarioKind};
use gdm_core::{GdmError, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const DEFAULT_PROFILE: &str = "default";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub profiles: BTreeMap<String, ProfileSection>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub dataset: Option<toml::Table>,
    pub scenario: Option<toml::Table>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| GdmError::Config(format!("{}: {}", path.display(), one_line(&e.to_string()))))
    }

    /// The named profile, or `default` when present and no name is given.
    pub fn section(&self, name: Option<&str>) -> Result<ProfileSection> {
        match name {
            Some(n) => self.profiles.get(n).cloned().ok_or_else(|| {
                let known: Vec<&str> = self.profiles.keys().map(String::as_str).collect();
                GdmError::Config(format!("profile '{n}' not found (available: {})", known.join(", ")))
            }),
            None => Ok(self.profiles.get(DEFAULT_PROFILE).cloned().unwrap_or_default()),
        }
    }
}

pub fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lays `table` over the serialised `defaults`.
fn overlay<T: Serialize + DeserializeOwned + Clone>(defaults: &T, table: Option<&toml::Table>, what: &str) -> Result<T> {
    let Some(table) = table else {
        return Ok(defaults.clone());
    };
    let mut base = serde_json::to_value(defaults).expect("defaults serialise");
    let top = serde_json::to_value(table).map_err(|e| GdmError::Config(format!("{what}: {e}")))?;
    merge_json(&mut base, &top);
    serde_json::from_value(base).map_err(|e| GdmError::Config(format!("{what}: {e}")))
}

fn merge_json(base: &mut serde_json::Value, top: &serde_json::Value) {
    match (base, top) {
        (serde_json::Value::Object(b), serde_json::Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(k) {
                    Some(slot @ serde_json::Value::Object(_)) if v.is_object() => merge_json(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, t) => *b = t.clone(),
    }
}

pub fn dataset_spec(section: &ProfileSection) -> Result<CollectionSpec> {
    overlay(&CollectionSpec::default(), section.dataset.as_ref(), "[dataset]")
}

pub fn scenario_config(section: &ProfileSection, kind: ScenarioKind) -> Result<ScenarioConfig> {
    if section.scenario.as_ref().is_some_and(|t| t.contains_key("kind")) {
        return Err(GdmError::Config("[scenario] must not set 'kind'; pass it on the command line".into()));
    }
    let mut cfg: ScenarioConfig = overlay(&ScenarioConfig::new(kind), section.scenario.as_ref(), "[scenario]")?;
    cfg.kind = kind;
    Ok(cfg)
}
