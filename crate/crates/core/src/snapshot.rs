//! Versioned policy snapshots: trained tables plus config and a scenario
//! fingerprint, reloadable for evaluation without retraining.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flat_agent::FlatPolicy;
use crate::hrl_agent::HierarchicalPolicy;
use crate::scenario::Scenario;

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "policy", rename_all = "snake_case")]
pub enum PolicySnapshot {
    Hrl(HierarchicalPolicy),
    Flat(FlatPolicy),
}

impl PolicySnapshot {
    pub fn kind(&self) -> &'static str {
        match self {
            PolicySnapshot::Hrl(_) => "hrl",
            PolicySnapshot::Flat(_) => "flat",
        }
    }

    pub fn scenario_fingerprint(&self) -> &str {
        match self {
            PolicySnapshot::Hrl(p) => &p.scenario_fingerprint,
            PolicySnapshot::Flat(p) => &p.scenario_fingerprint,
        }
    }

    /// Errors when the snapshot was trained on a different scenario.
    pub fn check_scenario(&self, scenario: &Scenario) -> Result<()> {
        let fp = scenario.fingerprint();
        if self.scenario_fingerprint() != fp {
            return Err(Error::validation(format!(
                "policy snapshot was trained on a scenario with fingerprint {}, got {fp}",
                self.scenario_fingerprint()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotFile {
    format_version: u32,
    snapshot: PolicySnapshot,
}

pub fn save_policy(snapshot: &PolicySnapshot, path: impl AsRef<Path>) -> Result<()> {
    let file = SnapshotFile {
        format_version: SNAPSHOT_FORMAT_VERSION,
        snapshot: snapshot.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<PolicySnapshot> {
    let text = std::fs::read_to_string(&path)?;
    let file: SnapshotFile = serde_json::from_str(&text)
        .map_err(|e| Error::validation(format!("policy snapshot: {e}")))?;
    if file.format_version != SNAPSHOT_FORMAT_VERSION {
        return Err(Error::validation(format!(
            "policy snapshot: unsupported format_version {}",
            file.format_version
        )));
    }
    Ok(file.snapshot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hrl_agent::{train, LearningConfig};
    use crate::scenario::builtin_scenario;

    #[test]
    fn snapshot_round_trip_and_fingerprint_check() {
        let sc = builtin_scenario("toy_two_task").unwrap();
        let config = LearningConfig {
            episodes: 30,
            seed: 4,
            ..LearningConfig::default()
        };
        let policy = train(&sc, &config, None).unwrap();
        let snap = PolicySnapshot::Hrl(policy);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        save_policy(&snap, &path).unwrap();
        let back = load_policy(&path).unwrap();
        assert_eq!(back, snap);
        back.check_scenario(&sc).unwrap();

        let other = builtin_scenario("study_six_instance").unwrap();
        assert!(back.check_scenario(&other).is_err());

        // Saving twice is byte-identical.
        let a = std::fs::read(&path).unwrap();
        save_policy(&back, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), a);
    }
}
