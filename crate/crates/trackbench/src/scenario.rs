//! Scenario files in TOML.

use std::fmt;
use std::path::Path;

use thiserror::Error;
use trackbench_core::controllers::ControlError;
use trackbench_core::faults::FaultError;
use trackbench_core::planner::PlannerError;
use trackbench_core::sim::{Scenario, SimError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioErrorKind {
    #[error("cannot read file: {0}")]
    Io(String),
    #[error("{line}:{column}: {field}: {message}")]
    Syntax { line: usize, column: usize, field: String, message: String },
    #[error("{field}: unknown controller id `{id}`")]
    UnknownController { field: String, id: String },
    #[error("waypoints[{index}].t: waypoint times must be strictly increasing")]
    NonMonotoneWaypoints { index: usize },
    #[error("faults[{index}]: {reason}")]
    InvalidFault { index: usize, reason: String },
    #[error("gains.{field}: {reason}")]
    InvalidGain { field: String, reason: String },
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
}

/// A scenario problem together with the file (or label) it came from.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ScenarioError {
    pub origin: String,
    pub kind: ScenarioErrorKind,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.origin, self.kind)
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn validation_kind(err: SimError) -> ScenarioErrorKind {
    match err {
        SimError::Gains(ControlError::InvalidGain { field, reason }) => {
            // pid gains live at the top level, the rest under `gains`
            if let Some(rest) = field.strip_prefix("pid.") {
                ScenarioErrorKind::Invalid { field: format!("pid.{rest}"), reason: reason.to_string() }
            } else {
                ScenarioErrorKind::InvalidGain { field: field.to_string(), reason: reason.to_string() }
            }
        }
        SimError::Gains(ControlError::UnknownController(id)) => {
            ScenarioErrorKind::UnknownController { field: "controller".into(), id }
        }
        SimError::Faults(FaultError::InvalidEvent { index, reason }) => {
            ScenarioErrorKind::InvalidFault { index, reason: reason.to_string() }
        }
        SimError::Faults(FaultError::Unsorted { index }) => {
            ScenarioErrorKind::InvalidFault { index, reason: "events must be sorted by t_start_s".into() }
        }
        SimError::Faults(other) => ScenarioErrorKind::Invalid { field: "faults".into(), reason: other.to_string() },
        SimError::Planner(PlannerError::NonMonotoneTime { index }) => ScenarioErrorKind::NonMonotoneWaypoints { index },
        SimError::Planner(other) => ScenarioErrorKind::Invalid { field: "waypoints".into(), reason: other.to_string() },
        SimError::Invalid { field, reason } => ScenarioErrorKind::Invalid { field: field.to_string(), reason },
        other => ScenarioErrorKind::Invalid { field: "scenario".into(), reason: other.to_string() },
    }
}

/// Parses and validates scenario text. `origin` labels error messages.
pub fn parse_scenario_str(text: &str, origin: &str) -> Result<Scenario, ScenarioError> {
    let wrap = |kind| ScenarioError { origin: origin.to_string(), kind };
    let syntax = |err: &toml::de::Error, field: String| {
        let (line, column) = err.span().map_or((0, 0), |s| line_col(text, s.start));
        ScenarioErrorKind::Syntax { line, column, field, message: err.message().trim().to_string() }
    };
    let de = toml::Deserializer::parse(text).map_err(|e| wrap(syntax(&e, "<document>".into())))?;
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.inner();
        if field == "controller" && inner.message().contains("unknown variant") {
            let id = inner.message().split('`').nth(1).unwrap_or_default().to_string();
            return wrap(ScenarioErrorKind::UnknownController { field, id });
        }
        wrap(syntax(inner, field))
    })?;
    scenario.validate().map_err(|e| wrap(validation_kind(e)))?;
    Ok(scenario)
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError { origin: origin.clone(), kind: ScenarioErrorKind::Io(e.to_string()) })?;
    parse_scenario_str(&text, &origin)
}

pub fn serialize_scenario(scenario: &Scenario) -> Result<String, toml::ser::Error> {
    toml::to_string(scenario)
}
