use rayon::prelude::*;
use trackbench_core::controllers::ControllerKind;
use trackbench_core::sim::{run_scenario, Scenario, SimError, SimTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchFailure {
    pub index: usize,
    pub scenario: String,
    pub controller: ControllerKind,
    pub error: SimError,
}

/// Results in input order; `traces[i]` is `None` exactly when a failure with
/// `index == i` is listed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchReport {
    pub traces: Vec<Option<SimTrace>>,
    pub failures: Vec<BatchFailure>,
}

impl BatchReport {
    pub fn completed(&self) -> impl Iterator<Item = &SimTrace> {
        self.traces.iter().flatten()
    }
}

pub fn run_batch(scenarios: &[Scenario], execution: Execution) -> BatchReport {
    let results: Vec<Result<SimTrace, SimError>> = match execution {
        Execution::Sequential => scenarios.iter().map(run_scenario).collect(),
        Execution::Parallel => scenarios.par_iter().map(run_scenario).collect(),
    };
    let mut report = BatchReport::default();
    for (index, (result, scn)) in results.into_iter().zip(scenarios).enumerate() {
        match result {
            Ok(trace) => report.traces.push(Some(trace)),
            Err(error) => {
                report.traces.push(None);
                report.failures.push(BatchFailure { index, scenario: scn.name.clone(), controller: scn.controller, error });
            }
        }
    }
    report
}
