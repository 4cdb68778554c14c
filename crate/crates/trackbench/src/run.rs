//! One invocation of the `run` command: load scenarios, expand them over the
//! selected controllers, simulate, and write the requested outputs.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;
use trackbench_core::controllers::ControllerKind;
use trackbench_core::eval::{rank_controllers, EvalError, MetricsReport, RankTable};
use trackbench_core::sim::{PlantMode, Scenario, SimTrace};

use crate::batch::{run_batch, Execution};
use crate::plotdata::emit_plotdata;
use crate::report::{metrics_csv, rank_csv, rank_text};
use crate::scenario::{parse_scenario, ScenarioError, ScenarioErrorKind};
use crate::trace::{emit_trace, TraceIoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub trace: bool,
    pub metrics: bool,
    pub plotdata: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Self { trace: true, metrics: true, plotdata: false }
    }
}

impl FromStr for Emit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut emit = Emit { trace: false, metrics: false, plotdata: false };
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            match item {
                "trace" => emit.trace = true,
                "metrics" => emit.metrics = true,
                "plotdata" => emit.plotdata = true,
                other => return Err(format!("unknown output `{other}` (expected trace, metrics, plotdata)")),
            }
        }
        Ok(emit)
    }
}

/// Which controllers to run each scenario with.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ControllerFilter {
    /// The controller named in each scenario file.
    #[default]
    FromScenario,
    All,
    Only(Vec<ControllerKind>),
}

impl FromStr for ControllerFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(ControllerFilter::All);
        }
        s.split(',')
            .map(|id| id.trim().parse::<ControllerKind>().map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()
            .map(ControllerFilter::Only)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub rates: Option<(f64, f64)>,
    pub plant: Option<PlantMode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenarios: Vec<PathBuf>,
    pub out: PathBuf,
    pub controllers: ControllerFilter,
    pub overrides: Overrides,
    pub emit: Emit,
    pub execution: Execution,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("no scenario given")]
    NoScenario,
    #[error("{0}")]
    Scenario(#[from] ScenarioError),
    #[error("{count} simulation(s) aborted: {summary}")]
    Simulation { count: usize, summary: String },
    #[error("{0}")]
    Trace(#[from] TraceIoError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl RunError {
    /// 1 for invalid input, 2 for a simulation that aborted.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::NoScenario | RunError::Scenario(_) => 1,
            RunError::Simulation { .. } | RunError::Trace(_) | RunError::Io { .. } => 2,
        }
    }
}

/// Applies overrides and the controller filter; every resulting scenario is
/// validated again.
pub fn expand(scenarios: &[Scenario], filter: &ControllerFilter, overrides: &Overrides) -> Result<Vec<Scenario>, ScenarioError> {
    let mut out = Vec::new();
    for base in scenarios {
        let mut s = base.clone();
        if let Some(seed) = overrides.seed {
            s.seed = seed;
        }
        if let Some((outer, inner)) = overrides.rates {
            s.outer_rate_hz = outer;
            s.inner_rate_hz = inner;
        }
        if let Some(plant) = overrides.plant {
            s.plant = plant;
        }
        s.validate().map_err(|e| ScenarioError {
            origin: s.name.clone(),
            kind: ScenarioErrorKind::Invalid { field: "overrides".into(), reason: e.to_string() },
        })?;
        let kinds = match filter {
            ControllerFilter::FromScenario => vec![s.controller],
            ControllerFilter::All => ControllerKind::ALL.to_vec(),
            ControllerFilter::Only(k) => k.clone(),
        };
        for kind in kinds {
            out.push(Scenario { controller: kind, ..s.clone() });
        }
    }
    Ok(out)
}

/// Ranks over every scenario, using the first fault-free scenario as the
/// tie-break baseline.
pub fn rank_all(scenarios: &[Scenario], reports: &[MetricsReport]) -> Option<Result<RankTable, EvalError>> {
    let baseline = scenarios.iter().find(|s| s.faults.events.is_empty())?;
    Some(rank_controllers(reports, &baseline.name))
}

pub fn trace_file_name(trace: &SimTrace) -> String {
    format!("{}__{}.csv", trace.scenario, trace.controller.id())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub written: Vec<PathBuf>,
    pub traces: Vec<SimTrace>,
    pub reports: Vec<MetricsReport>,
    pub rank: Option<RankTable>,
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    std::fs::write(path, contents).map_err(|source| RunError::Io { path: path.display().to_string(), source })
}

/// Simulates and writes outputs; partial outputs are written even when some
/// runs abort, and the aborts are then reported as the error.
pub fn execute(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    if cfg.scenarios.is_empty() {
        return Err(RunError::NoScenario);
    }
    let loaded = cfg.scenarios.iter().map(|p| parse_scenario(p)).collect::<Result<Vec<_>, _>>()?;
    let expanded = expand(&loaded, &cfg.controllers, &cfg.overrides)?;
    let batch = run_batch(&expanded, cfg.execution);
    std::fs::create_dir_all(&cfg.out).map_err(|source| RunError::Io { path: cfg.out.display().to_string(), source })?;

    let mut written = Vec::new();
    let mut traces = Vec::new();
    let mut reports = Vec::new();
    for (scn, trace) in expanded.iter().zip(&batch.traces) {
        let Some(trace) = trace else { continue };
        if cfg.emit.trace {
            let dir = cfg.out.join("traces");
            std::fs::create_dir_all(&dir).map_err(|source| RunError::Io { path: dir.display().to_string(), source })?;
            let path = dir.join(trace_file_name(trace));
            emit_trace(trace, scn, &path)?;
            written.push(path);
        }
        if let Ok(report) = MetricsReport::from_trace(trace) {
            reports.push(report);
        }
        traces.push(trace.clone());
    }
    let mut rank = None;
    if cfg.emit.metrics {
        let path = cfg.out.join("metrics.csv");
        write(&path, &metrics_csv(&reports))?;
        written.push(path);
        if batch.failures.is_empty() {
            if let Some(Ok(table)) = rank_all(&loaded, &reports) {
                if table.controllers.len() > 1 {
                    for (name, body) in [("rank.txt", rank_text(&table)), ("rank.csv", rank_csv(&table))] {
                        let path = cfg.out.join(name);
                        write(&path, &body)?;
                        written.push(path);
                    }
                }
                rank = Some(table);
            }
        }
    }
    if cfg.emit.plotdata && !traces.is_empty() {
        let dir = cfg.out.join("plotdata");
        let files = emit_plotdata(&traces, &reports, &dir).map_err(|source| RunError::Io { path: dir.display().to_string(), source })?;
        written.extend(files);
    }
    if !batch.failures.is_empty() {
        let summary = batch
            .failures
            .iter()
            .map(|f| format!("{} [{}]: {}", f.scenario, f.controller.id(), f.error))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(RunError::Simulation { count: batch.failures.len(), summary });
    }
    Ok(RunSummary { written, traces, reports, rank })
}
