//! Metric and rank tables. Heading errors are converted to degrees only in
//! the human-readable table.

use std::fmt::Write as _;

use trackbench_core::controllers::ControllerKind;
use trackbench_core::eval::{Metric, MetricsReport, RankTable};

use crate::trace::fmt_f64;

pub const METRICS_COLUMNS: [&str; 10] = [
    "controller",
    "scenario",
    "rmse_x_e",
    "rmse_y_e",
    "rmse_phi_e",
    "max_abs_x_e",
    "max_abs_y_e",
    "max_abs_phi_e",
    "deviation_peak",
    "deviation_mean",
];

pub fn metrics_csv(reports: &[MetricsReport]) -> String {
    let mut out = METRICS_COLUMNS.join(",");
    out.push('\n');
    for r in reports {
        let nums = [
            r.rmse_x_e,
            r.rmse_y_e,
            r.rmse_phi_e,
            r.max_abs_x_e,
            r.max_abs_y_e,
            r.max_abs_phi_e,
            r.deviation_peak,
            r.deviation_mean,
        ];
        let cells: Vec<String> = nums.iter().map(|&x| fmt_f64(x)).collect();
        let _ = writeln!(out, "{},{},{}", r.controller.id(), r.scenario, cells.join(","));
    }
    out
}

/// Rows in the conventional order of the benchmark table.
fn display_order(table: &RankTable) -> Vec<(usize, ControllerKind)> {
    ControllerKind::ALL
        .iter()
        .filter_map(|&c| table.controllers.iter().position(|&k| k == c).map(|i| (i, c)))
        .collect()
}

pub fn rank_text(table: &RankTable) -> String {
    let mut out = String::new();
    let width = table.conditions.iter().map(String::len).max().unwrap_or(0).max(10);
    let _ = write!(out, "{:<14}", "controller");
    for k in &table.conditions {
        let _ = write!(out, " {k:>width$}");
    }
    let _ = writeln!(out, " {:>10} {:>5}", "average", "rank");
    for ranking in &table.rankings {
        let (title, scale) = match ranking.metric {
            Metric::PhiE => ("phi_e RMSE [deg]", 180.0 / std::f64::consts::PI),
            Metric::XE => ("x_e RMSE [m]", 1.0),
            Metric::YE => ("y_e RMSE [m]", 1.0),
        };
        let _ = writeln!(out, "{title}");
        for (i, c) in display_order(table) {
            let _ = write!(out, "{:<14}", c.label());
            for cell in &table.cells[i] {
                let _ = write!(out, " {:>width$.4}", cell.rmse(ranking.metric) * scale);
            }
            let rank = ranking.rank_of(c).unwrap_or(0);
            let _ = writeln!(out, " {:>10.4} {rank:>5}", ranking.averages[i] * scale);
        }
    }
    let _ = writeln!(out, "average rank");
    for (i, c) in display_order(table) {
        let _ = writeln!(out, "{:<14} {:.3}", c.label(), table.average_rank[i]);
    }
    out
}

pub fn rank_csv(table: &RankTable) -> String {
    let mut out = format!("metric,controller,{},average,rank\n", table.conditions.join(","));
    for ranking in &table.rankings {
        for (i, c) in display_order(table) {
            let cells: Vec<String> = table.cells[i].iter().map(|r| fmt_f64(r.rmse(ranking.metric))).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                ranking.metric.id(),
                c.id(),
                cells.join(","),
                fmt_f64(ranking.averages[i]),
                ranking.rank_of(c).unwrap_or(0)
            );
        }
    }
    out
}
