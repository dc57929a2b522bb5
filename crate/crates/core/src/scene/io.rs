use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_scenario, Labels, Scenario, ScenarioError, Snapshot};

pub const SCHEMA_VERSION: u32 = 2;

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    version: u32,
    id: String,
    labels: Labels,
    snapshots: Vec<Snapshot>,
}

/// Parses a version-2 scenario document and validates it.
pub fn parse_scenario(raw: &[u8]) -> Result<Scenario, ScenarioError> {
    let text = std::str::from_utf8(raw).map_err(|e| ScenarioError::Syntax {
        line: 0,
        column: e.valid_up_to(),
        message: "input is not valid UTF-8".into(),
    })?;
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let probe: VersionProbe = serde_path_to_error::deserialize(&value).map_err(schema_error)?;
    if probe.version != SCHEMA_VERSION {
        return Err(ScenarioError::UnsupportedVersion {
            found: probe.version,
            expected: SCHEMA_VERSION,
        });
    }
    let file: ScenarioFile = serde_path_to_error::deserialize(&value).map_err(schema_error)?;
    let scenario = Scenario {
        id: file.id,
        snapshots: file.snapshots,
        labels: file.labels,
    };
    let violations = validate_scenario(&scenario);
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Semantic(violations))
    }
}

fn schema_error(e: serde_path_to_error::Error<serde_json::Error>) -> ScenarioError {
    let path = e.path().to_string();
    ScenarioError::Schema {
        path,
        message: e.into_inner().to_string(),
    }
}

pub fn to_json(scenario: &Scenario) -> String {
    let file = ScenarioFile {
        version: SCHEMA_VERSION,
        id: scenario.id.clone(),
        labels: scenario.labels,
        snapshots: scenario.snapshots.clone(),
    };
    serde_json::to_string_pretty(&file).expect("scenario serialization is infallible")
}

pub fn read_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let bytes = std::fs::read(path)?;
    parse_scenario(&bytes)
}

pub fn write_scenario(path: impl AsRef<Path>, scenario: &Scenario) -> Result<(), ScenarioError> {
    std::fs::write(path, to_json(scenario))?;
    Ok(())
}
