//! Trace CSV: a `#` comment header with the run settings, one header row and
//! one row per outer step.

use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;
use trackbench_core::controllers::{ControlCommand, ControllerKind, TrackingError};
use trackbench_core::faults::FaultKind;
use trackbench_core::flags::Flags;
use trackbench_core::planner::ReferenceSample;
use trackbench_core::sim::{PlantMode, Scenario, SimTrace, TraceRecord};
use trackbench_core::vehicle::Pose;

pub const COLUMNS: [&str; 21] = [
    "t", "x_r", "y_r", "phi_r", "x_d", "y_d", "phi_d", "x_e", "y_e", "phi_e", "v_c", "w_c", "v_r", "w_r", "s1", "s2",
    "V", "Vdot", "fault_active", "diagnosis", "flags",
];

/// Nine significant digits, the precision of every recorded value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

fn faults_cell(faults: &[FaultKind]) -> String {
    if faults.is_empty() {
        "none".to_string()
    } else {
        faults.iter().map(|k| k.id()).collect::<Vec<_>>().join("+")
    }
}

fn gains_toml(scenario: &Scenario) -> String {
    let g = &scenario.gains;
    let text = match scenario.controller {
        ControllerKind::Antifragile => toml::to_string(&g.antifragile),
        ControllerKind::Robust => toml::to_string(&g.robust),
        ControllerKind::Adaptive => toml::to_string(&g.adaptive),
        ControllerKind::Resilient => toml::to_string(&g.resilient),
    };
    text.unwrap_or_default()
}

pub fn write_trace<W: Write>(trace: &SimTrace, scenario: &Scenario, mut w: W) -> io::Result<()> {
    writeln!(w, "# scenario: {}", trace.scenario)?;
    writeln!(w, "# controller: {}", trace.controller.id())?;
    writeln!(w, "# seed: {}", trace.seed)?;
    writeln!(w, "# plant: {}", trace.plant.id())?;
    writeln!(w, "# outer_rate_hz: {}", trace.outer_rate_hz)?;
    writeln!(w, "# inner_rate_hz: {}", trace.inner_rate_hz)?;
    for line in gains_toml(scenario).lines().filter(|l| !l.trim().is_empty()) {
        writeln!(w, "# gains: {line}")?;
    }
    for line in toml::to_string(&scenario.pid).unwrap_or_default().lines() {
        writeln!(w, "# pid: {line}")?;
    }
    writeln!(w, "{}", COLUMNS.join(","))?;
    for r in &trace.records {
        let nums = [
            r.t,
            r.truth.x,
            r.truth.y,
            r.truth.phi,
            r.reference.x,
            r.reference.y,
            r.reference.phi,
            r.error.x_e,
            r.error.y_e,
            r.error.phi_e,
            r.command.v_c,
            r.command.omega_c,
            r.v_r,
            r.omega_r,
            r.s1,
            r.s2,
            r.lyapunov,
            r.lyapunov_rate,
        ];
        let mut row: Vec<String> = nums.iter().map(|&x| fmt_f64(x)).collect();
        row.push(faults_cell(&r.faults));
        row.push(r.diagnosis.id().to_string());
        row.push(r.flags.bits().to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub fn emit_trace(trace: &SimTrace, scenario: &Scenario, path: &Path) -> Result<(), TraceIoError> {
    let io_err = |source| TraceIoError::Io { path: path.display().to_string(), source };
    let mut buf = Vec::new();
    write_trace(trace, scenario, &mut buf).map_err(io_err)?;
    std::fs::write(path, buf).map_err(io_err)
}

/// Rebuilds a trace from its CSV. Columns absent from the file (error
/// rates, wheel setpoints, reference velocities) come back as zero.
pub fn parse_trace(text: &str) -> Result<SimTrace, TraceIoError> {
    let mut trace = SimTrace {
        scenario: String::new(),
        controller: ControllerKind::Antifragile,
        seed: 0,
        outer_rate_hz: 0.0,
        inner_rate_hz: 0.0,
        plant: PlantMode::Dynamic,
        records: Vec::new(),
    };
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let bad = |message: String| TraceIoError::Parse { line: lineno, message };
        if let Some(comment) = line.strip_prefix("# ") {
            let Some((key, value)) = comment.split_once(": ") else { continue };
            match key {
                "scenario" => trace.scenario = value.to_string(),
                "controller" => trace.controller = value.parse().map_err(|e| bad(format!("{e}")))?,
                "seed" => trace.seed = value.parse().map_err(|e| bad(format!("seed: {e}")))?,
                "plant" => trace.plant = value.parse().map_err(bad)?,
                "outer_rate_hz" => trace.outer_rate_hz = value.parse().map_err(|e| bad(format!("outer_rate_hz: {e}")))?,
                "inner_rate_hz" => trace.inner_rate_hz = value.parse().map_err(|e| bad(format!("inner_rate_hz: {e}")))?,
                _ => {}
            }
            continue;
        }
        if !seen_header {
            if line != COLUMNS.join(",") {
                return Err(bad("unexpected column header".into()));
            }
            seen_header = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != COLUMNS.len() {
            return Err(bad(format!("expected {} columns, found {}", COLUMNS.len(), cells.len())));
        }
        let mut n = [0.0; 18];
        for (k, cell) in cells[..18].iter().enumerate() {
            n[k] = cell.parse().map_err(|_| bad(format!("{}: not a number: {cell}", COLUMNS[k])))?;
        }
        let faults = if cells[18] == "none" {
            Vec::new()
        } else {
            cells[18].split('+').map(|id| id.parse::<FaultKind>().map_err(|e| bad(format!("{e}")))).collect::<Result<_, _>>()?
        };
        let diagnosis = cells[19].parse::<FaultKind>().map_err(|e| bad(format!("{e}")))?;
        let bits: u32 = cells[20].parse().map_err(|_| bad(format!("flags: not an integer: {}", cells[20])))?;
        trace.records.push(TraceRecord {
            t: n[0],
            truth: Pose { x: n[1], y: n[2], phi: n[3] },
            measured: Pose { x: n[1], y: n[2], phi: n[3] },
            reference: ReferenceSample { t: n[0], x: n[4], y: n[5], phi: n[6], ..Default::default() },
            error: TrackingError { x_e: n[7], y_e: n[8], phi_e: n[9], ..Default::default() },
            command: ControlCommand { v_c: n[10], omega_c: n[11], ..Default::default() },
            v_r: n[12],
            omega_r: n[13],
            s1: n[14],
            s2: n[15],
            lyapunov: n[16],
            lyapunov_rate: n[17],
            faults,
            diagnosis,
            flags: Flags::from_bits_retain(bits),
        });
    }
    if !seen_header {
        return Err(TraceIoError::Parse { line: text.lines().count(), message: "missing column header".into() });
    }
    Ok(trace)
}
