//! Tracking metrics, controller ranking by averaged RMSE, and deviation
//! summaries over fault windows.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::controllers::ControllerKind;
use crate::math::{hypot, sqrt};
use crate::sim::SimTrace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("empty input")]
    Empty,
    #[error("missing cell: controller `{controller}` has no report for `{condition}`")]
    MissingCell { controller: String, condition: String },
    #[error("duplicate cell: controller `{controller}` has two reports for `{condition}`")]
    DuplicateCell { controller: String, condition: String },
}

pub fn rmse(series: &[f64]) -> Result<f64, EvalError> {
    if series.is_empty() {
        return Err(EvalError::Empty);
    }
    let ss: f64 = series.iter().map(|x| x * x).sum();
    Ok(sqrt(ss / series.len() as f64))
}

pub fn max_abs(series: &[f64]) -> Result<f64, EvalError> {
    if series.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(series.iter().fold(0.0, |m, x| m.max(x.abs())))
}

/// Distance between true and desired position at every record.
pub fn euclidean_deviation(trace: &SimTrace) -> Vec<f64> {
    trace.records.iter().map(|r| hypot(r.truth.x - r.reference.x, r.truth.y - r.reference.y)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub controller: ControllerKind,
    pub scenario: String,
    pub rmse_x_e: f64,
    pub rmse_y_e: f64,
    pub rmse_phi_e: f64,
    pub max_abs_x_e: f64,
    pub max_abs_y_e: f64,
    pub max_abs_phi_e: f64,
    pub deviation_peak: f64,
    pub deviation_mean: f64,
}

impl MetricsReport {
    /// Metrics over the whole run, transients included.
    pub fn from_trace(trace: &SimTrace) -> Result<Self, EvalError> {
        let xs: Vec<f64> = trace.records.iter().map(|r| r.error.x_e).collect();
        let ys: Vec<f64> = trace.records.iter().map(|r| r.error.y_e).collect();
        let ps: Vec<f64> = trace.records.iter().map(|r| r.error.phi_e).collect();
        let dev = euclidean_deviation(trace);
        let deviation_mean = if dev.is_empty() { 0.0 } else { dev.iter().sum::<f64>() / dev.len() as f64 };
        Ok(Self {
            controller: trace.controller,
            scenario: trace.scenario.clone(),
            rmse_x_e: rmse(&xs)?,
            rmse_y_e: rmse(&ys)?,
            rmse_phi_e: rmse(&ps)?,
            max_abs_x_e: max_abs(&xs)?,
            max_abs_y_e: max_abs(&ys)?,
            max_abs_phi_e: max_abs(&ps)?,
            deviation_peak: max_abs(&dev)?,
            deviation_mean,
        })
    }

    pub fn rmse(&self, metric: Metric) -> f64 {
        match metric {
            Metric::XE => self.rmse_x_e,
            Metric::YE => self.rmse_y_e,
            Metric::PhiE => self.rmse_phi_e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    XE,
    YE,
    PhiE,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::XE, Metric::YE, Metric::PhiE];

    pub fn id(self) -> &'static str {
        match self {
            Metric::XE => "x_e",
            Metric::YE => "y_e",
            Metric::PhiE => "phi_e",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRanking {
    pub metric: Metric,
    /// Best first.
    pub order: Vec<ControllerKind>,
    /// Average RMSE per controller, in `RankTable::controllers` order.
    pub averages: Vec<f64>,
}

impl MetricRanking {
    /// 1-based rank of `c`.
    pub fn rank_of(&self, c: ControllerKind) -> Option<usize> {
        self.order.iter().position(|&o| o == c).map(|i| i + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub controllers: Vec<ControllerKind>,
    pub conditions: Vec<String>,
    /// `cells[c][k]` is the report of controller `c` under condition `k`.
    pub cells: Vec<Vec<MetricsReport>>,
    pub rankings: Vec<MetricRanking>,
    pub average_rank: Vec<f64>,
}

impl RankTable {
    pub fn ranking(&self, metric: Metric) -> &MetricRanking {
        self.rankings.iter().find(|r| r.metric == metric).expect("every metric is ranked")
    }
}

/// Ranks controllers per metric by their RMSE averaged over all conditions,
/// lower first. Ties fall back to the RMSE under `baseline`, then to the
/// controller id.
pub fn rank_controllers(reports: &[MetricsReport], baseline: &str) -> Result<RankTable, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut controllers: Vec<ControllerKind> = reports.iter().map(|r| r.controller).collect();
    controllers.sort_by_key(|c| c.id());
    controllers.dedup();
    let mut conditions: Vec<String> = Vec::new();
    for r in reports {
        if !conditions.contains(&r.scenario) {
            conditions.push(r.scenario.clone());
        }
    }
    if !conditions.iter().any(|c| c == baseline) {
        return Err(EvalError::MissingCell { controller: controllers[0].id().to_string(), condition: baseline.to_string() });
    }
    let mut cells = Vec::with_capacity(controllers.len());
    for &c in &controllers {
        let mut row = Vec::with_capacity(conditions.len());
        for k in &conditions {
            let mut found = reports.iter().filter(|r| r.controller == c && &r.scenario == k);
            let cell = found.next().ok_or_else(|| EvalError::MissingCell { controller: c.id().to_string(), condition: k.clone() })?;
            if found.next().is_some() {
                return Err(EvalError::DuplicateCell { controller: c.id().to_string(), condition: k.clone() });
            }
            row.push(cell.clone());
        }
        cells.push(row);
    }
    let base = conditions.iter().position(|k| k == baseline).expect("checked above");
    let mut rankings = Vec::with_capacity(Metric::ALL.len());
    for metric in Metric::ALL {
        let averages: Vec<f64> =
            cells.iter().map(|row| row.iter().map(|r| r.rmse(metric)).sum::<f64>() / row.len() as f64).collect();
        let mut idx: Vec<usize> = (0..controllers.len()).collect();
        idx.sort_by(|&a, &b| {
            averages[a]
                .total_cmp(&averages[b])
                .then_with(|| cells[a][base].rmse(metric).total_cmp(&cells[b][base].rmse(metric)))
                .then_with(|| controllers[a].id().cmp(controllers[b].id()))
        });
        rankings.push(MetricRanking { metric, order: idx.iter().map(|&i| controllers[i]).collect(), averages });
    }
    let average_rank = controllers
        .iter()
        .map(|&c| rankings.iter().map(|r| r.rank_of(c).expect("ranked") as f64).sum::<f64>() / rankings.len() as f64)
        .collect();
    Ok(RankTable { controllers, conditions, cells, rankings, average_rank })
}

/// Deviation behaviour between consecutive fault onsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSummary {
    pub start: f64,
    pub end: f64,
    pub peak: f64,
    pub mean: f64,
    /// Longest run of consecutive samples with strictly decreasing deviation.
    pub longest_decrease: usize,
}

/// Length (in samples) of the longest strictly decreasing run.
pub fn longest_decreasing_run(series: &[f64]) -> usize {
    let mut best = usize::from(!series.is_empty());
    let mut run = best;
    for w in series.windows(2) {
        run = if w[1] < w[0] { run + 1 } else { 1 };
        best = best.max(run);
    }
    best
}

/// Splits the deviation series at `boundaries` (sorted times) and summarizes
/// each window `[b_i, b_{i+1})`; the last window runs to the end of the trace.
pub fn window_summaries(trace: &SimTrace, boundaries: &[f64]) -> Vec<WindowSummary> {
    let dev = euclidean_deviation(trace);
    let t_end = trace.records.last().map_or(0.0, |r| r.t);
    boundaries
        .iter()
        .enumerate()
        .map(|(i, &start)| {
            let end = boundaries.get(i + 1).copied().unwrap_or(f64::INFINITY);
            let part: Vec<f64> = trace
                .records
                .iter()
                .zip(&dev)
                .filter(|(r, _)| r.t >= start && r.t < end)
                .map(|(_, d)| *d)
                .collect();
            let peak = part.iter().fold(0.0, |m: f64, d| m.max(*d));
            let mean = if part.is_empty() { 0.0 } else { part.iter().sum::<f64>() / part.len() as f64 };
            WindowSummary { start, end: end.min(t_end), peak, mean, longest_decrease: longest_decreasing_run(&part) }
        })
        .collect()
}
