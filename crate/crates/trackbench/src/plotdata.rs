//! Whitespace-separated column files for plotting. The first line of each
//! file is a `#` comment naming the columns.
//!
//! * `trajectory_<scenario>.dat`: reference and every controller's path.
//! * `velocity_<scenario>_<controller>.dat`: desired, commanded and realized
//!   speed and yaw rate, then their accelerations.
//! * `errors_<scenario>_<controller>.dat`: tracking errors.
//! * `average_errors.dat`: RMSE per controller averaged over the scenarios
//!   with faults.
//! * `deviation_<scenario>.dat`: Euclidean deviation per controller.

use std::io;
use std::path::{Path, PathBuf};

use trackbench_core::eval::{euclidean_deviation, MetricsReport};
use trackbench_core::sim::SimTrace;

use crate::trace::fmt_f64;

fn write_columns(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> io::Result<()> {
    let mut out = format!("# {}\n", header.join(" "));
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out)
}

/// Backward difference with a zero first entry.
fn rate(values: &[f64], t: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for i in 1..values.len() {
        out[i] = (values[i] - values[i - 1]) / (t[i] - t[i - 1]);
    }
    out
}

fn group_by_scenario(traces: &[SimTrace]) -> Vec<(&str, Vec<&SimTrace>)> {
    let mut groups: Vec<(&str, Vec<&SimTrace>)> = Vec::new();
    for tr in traces {
        match groups.iter_mut().find(|(name, _)| *name == tr.scenario) {
            Some((_, g)) => g.push(tr),
            None => groups.push((&tr.scenario, vec![tr])),
        }
    }
    groups
}

fn has_faults(tr: &SimTrace) -> bool {
    tr.records.iter().any(|r| !r.faults.is_empty())
}

fn overlay(path: &Path, group: &[&SimTrace]) -> io::Result<()> {
    let base = group[0];
    let mut header: Vec<String> = ["t", "x_d", "y_d"].map(String::from).to_vec();
    for tr in group {
        header.push(format!("x_{}", tr.controller.id()));
        header.push(format!("y_{}", tr.controller.id()));
    }
    let rows = (0..base.records.len()).map(|i| {
        let r = &base.records[i];
        let mut row = vec![r.t, r.reference.x, r.reference.y];
        for tr in group {
            let o = &tr.records[i];
            row.extend([o.truth.x, o.truth.y]);
        }
        row
    });
    write_columns(path, &header, rows)
}

fn velocity(path: &Path, tr: &SimTrace) -> io::Result<()> {
    let header = [
        "t", "v_d", "v_c", "v_r", "w_d", "w_c", "w_r", "dv_d", "dv_c", "dv_r", "dw_d", "dw_c", "dw_r",
    ]
    .map(String::from);
    let t: Vec<f64> = tr.records.iter().map(|r| r.t).collect();
    let w_c: Vec<f64> = tr.records.iter().map(|r| r.command.omega_c).collect();
    let v_r: Vec<f64> = tr.records.iter().map(|r| r.v_r).collect();
    let w_r: Vec<f64> = tr.records.iter().map(|r| r.omega_r).collect();
    let (dw_c, dv_r, dw_r) = (rate(&w_c, &t), rate(&v_r, &t), rate(&w_r, &t));
    let rows = tr.records.iter().enumerate().map(|(i, r)| {
        vec![
            r.t,
            r.reference.v,
            r.command.v_c,
            r.v_r,
            r.reference.omega,
            r.command.omega_c,
            r.omega_r,
            r.reference.dv,
            r.command.dv_c,
            dv_r[i],
            r.reference.domega,
            dw_c[i],
            dw_r[i],
        ]
    });
    write_columns(path, &header, rows)
}

fn errors(path: &Path, tr: &SimTrace) -> io::Result<()> {
    let header = ["t", "x_e", "y_e", "phi_e"].map(String::from);
    write_columns(path, &header, tr.records.iter().map(|r| vec![r.t, r.error.x_e, r.error.y_e, r.error.phi_e]))
}

fn deviation(path: &Path, group: &[&SimTrace]) -> io::Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(group.iter().map(|tr| format!("dev_{}", tr.controller.id())));
    let devs: Vec<Vec<f64>> = group.iter().map(|tr| euclidean_deviation(tr)).collect();
    let rows = group[0].records.iter().enumerate().map(|(i, r)| {
        let mut row = vec![r.t];
        row.extend(devs.iter().map(|d| d[i]));
        row
    });
    write_columns(path, &header, rows)
}

fn average_errors(path: &Path, faulted: &[&str], metrics: &[MetricsReport]) -> io::Result<()> {
    let mut out = String::from("# controller rmse_x_e rmse_y_e rmse_phi_e\n");
    let mut controllers: Vec<_> = metrics.iter().map(|m| m.controller).collect();
    controllers.sort();
    controllers.dedup();
    for c in controllers {
        let rows: Vec<&MetricsReport> =
            metrics.iter().filter(|m| m.controller == c && faulted.contains(&m.scenario.as_str())).collect();
        if rows.is_empty() {
            continue;
        }
        let n = rows.len() as f64;
        let avg = |f: fn(&MetricsReport) -> f64| rows.iter().map(|m| f(m)).sum::<f64>() / n;
        out.push_str(&format!(
            "{} {} {} {}\n",
            c.id(),
            fmt_f64(avg(|m| m.rmse_x_e)),
            fmt_f64(avg(|m| m.rmse_y_e)),
            fmt_f64(avg(|m| m.rmse_phi_e))
        ));
    }
    std::fs::write(path, out)
}

/// Writes every figure file into `outdir` and returns their paths in order.
/// Traces of one scenario must share their time base.
pub fn emit_plotdata(traces: &[SimTrace], metrics: &[MetricsReport], outdir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(outdir)?;
    let mut written = Vec::new();
    let mut faulted = Vec::new();
    for (name, group) in group_by_scenario(traces) {
        let n = group[0].records.len();
        if group.iter().any(|tr| tr.records.len() != n) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, format!("traces of `{name}` differ in length")));
        }
        if n == 0 {
            continue;
        }
        if group.iter().any(|tr| has_faults(tr)) {
            faulted.push(name);
        }
        let path = outdir.join(format!("trajectory_{name}.dat"));
        overlay(&path, &group)?;
        written.push(path);
        for tr in &group {
            let path = outdir.join(format!("velocity_{name}_{}.dat", tr.controller.id()));
            velocity(&path, tr)?;
            written.push(path);
            let path = outdir.join(format!("errors_{name}_{}.dat", tr.controller.id()));
            errors(&path, tr)?;
            written.push(path);
        }
        let path = outdir.join(format!("deviation_{name}.dat"));
        deviation(&path, &group)?;
        written.push(path);
    }
    if !faulted.is_empty() && !metrics.is_empty() {
        let path = outdir.join("average_errors.dat");
        average_errors(&path, &faulted, metrics)?;
        written.push(path);
    }
    Ok(written)
}
