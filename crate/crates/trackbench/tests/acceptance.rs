//! Acceptance checks for the benchmark as a whole. Each check prints one
//! PASS/FAIL line; the process fails if any check fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trackbench::batch::Execution;
use trackbench::bundled_scenarios_dir;
use trackbench::run::{execute, ControllerFilter, Emit, Overrides, RunConfig};
use trackbench::scenario::parse_scenario;
use trackbench_core::controllers::{
    hurwitz_check, lyapunov_rate, reaching_time, AntifragileGains, ControllerKind, PidGains, WheelPid,
};
use trackbench_core::eval::{window_summaries, Metric};
use trackbench_core::faults::FaultKind;
use trackbench_core::planner::{fit_quintic, BoundaryState, ReferenceTrajectory};
use trackbench_core::sim::{run_scenario, Scenario};
use trackbench_core::vehicle::{motor_step_full, motor_step_reduced, MotorParams, MotorState};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scenario_path(name: &str) -> PathBuf {
    bundled_scenarios_dir().join(format!("{name}.toml"))
}

const CONDITIONS: [&str; 5] = [
    "double_loop_faultfree",
    "double_loop_bump_left",
    "double_loop_bump_right",
    "double_loop_flat_left",
    "double_loop_flat_right",
];

fn run_config(scenarios: Vec<PathBuf>, out: &Path, emit: Emit) -> RunConfig {
    RunConfig {
        scenarios,
        out: out.to_path_buf(),
        controllers: ControllerFilter::All,
        overrides: Overrides::default(),
        emit,
        execution: Execution::Parallel,
    }
}

fn labels(order: &[ControllerKind]) -> String {
    order.iter().map(|c| c.label()).collect::<Vec<_>>().join(" < ")
}

fn rank_reproduction() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let paths = CONDITIONS.iter().map(|n| scenario_path(n)).collect();
    let start = Instant::now();
    let summary = execute(&run_config(paths, dir.path(), Emit { trace: false, metrics: true, plotdata: false }))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let table = summary.rank.ok_or("no rank table")?;
    let x = &table.ranking(Metric::XE).order;
    let y = &table.ranking(Metric::YE).order;
    use ControllerKind::*;
    let x_ok = x.as_slice() == [Antifragile, Adaptive, Robust, Resilient];
    let y_ok = y.first() == Some(&Antifragile) && y.last() == Some(&Resilient);
    ensure(
        x_ok && y_ok && elapsed < Duration::from_secs(120),
        format!("x_e: {}; y_e: {}; {:.1} s", labels(x), labels(y), elapsed.as_secs_f64()),
    )
}

fn fault_free_bounds() -> Check {
    let scn = parse_scenario(&scenario_path("double_loop_faultfree")).map_err(|e| e.to_string())?;
    let scn = Scenario { controller: ControllerKind::Antifragile, ..scn };
    let start = Instant::now();
    let trace = run_scenario(&scn).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let max = |f: &dyn Fn(&trackbench_core::sim::TraceRecord) -> f64| trace.records.iter().map(f).fold(0.0, f64::max);
    let x = max(&|r| r.error.x_e.abs());
    let dev = max(&|r| r.deviation());
    let phi = max(&|r| r.error.phi_e.abs()).to_degrees();
    ensure(
        x <= 0.06 && dev <= 0.10 && phi <= 8.0 && elapsed < Duration::from_secs(10),
        format!("max|x_e| {x:.4} m, max deviation {dev:.4} m, max|phi_e| {phi:.2} deg; {:.2} s", elapsed.as_secs_f64()),
    )
}

fn lyapunov_property() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let start = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    let mut max_gap: f64 = 0.0;
    for _ in 0..10_000 {
        let g = AntifragileGains {
            q1: rng.random_range(0.0..10.0),
            q2: rng.random_range(0.0..10.0),
            p1: rng.random_range(0.0..10.0),
            p2: rng.random_range(0.0..10.0),
            ..Default::default()
        };
        let (s1, s2) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let rate = lyapunov_rate(s1, s2, &g);
        // V' = s . s' with s' from the reaching law
        let ds = |s: f64, q: f64, p: f64| -q * s - p * s.signum();
        let oracle = s1 * ds(s1, g.q1, g.p1) + s2 * ds(s2, g.q2, g.p2);
        worst = worst.max(rate);
        max_gap = max_gap.max((rate - oracle).abs());
    }
    let elapsed = start.elapsed();
    ensure(
        worst <= 0.0 && max_gap < 1e-9 && elapsed < Duration::from_secs(1),
        format!("max V' {worst:.3e}, max |V' - s.s'| {max_gap:.1e}; {:.3} s", elapsed.as_secs_f64()),
    )
}

fn reaching_time_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let start = Instant::now();
    let dt = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p = rng.random_range(0.2..5.0);
        let q = rng.random_range(0.2..5.0);
        let s0 = rng.random_range(0.1..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let mut s: f64 = s0;
        let mut t = 0.0;
        while s.signum() == s0.signum() && s != 0.0 {
            s += dt * (-p * s - q * s.signum());
            t += dt;
        }
        let expect = reaching_time(p, q, s0).map_err(|e| e.to_string())?;
        worst = worst.max((t - expect).abs() / expect);
    }
    let elapsed = start.elapsed();
    ensure(
        worst < 0.01 && elapsed < Duration::from_secs(5),
        format!("worst relative error {:.2e}; {:.2} s", worst, elapsed.as_secs_f64()),
    )
}

/// Largest speed gap between the full and reduced motor over a 1 V step.
fn motor_gap(inductance: f64) -> f64 {
    let p = MotorParams { inductance_h: inductance, ..Default::default() };
    let dt = p.max_full_step();
    let mut full = MotorState::default();
    let mut reduced = 0.0;
    let mut sup: f64 = 0.0;
    for _ in 0..(1.0 / dt).round() as usize {
        full = motor_step_full(&full, 1.0, &p, dt).expect("step within bound");
        reduced = motor_step_reduced(reduced, 1.0, &p, dt);
        sup = sup.max((full.speed - reduced).abs());
    }
    sup
}

fn singular_perturbation() -> Check {
    let start = Instant::now();
    let mut ratios = Vec::new();
    for l in [1e-2, 1e-3, 1e-4] {
        ratios.push(motor_gap(l) / motor_gap(l / 2.0));
    }
    let elapsed = start.elapsed();
    ensure(
        ratios.iter().all(|&r| r >= 1.5) && elapsed < Duration::from_secs(5),
        format!("sup-gap ratios on halving L: {:.3?}; {:.2} s", ratios, elapsed.as_secs_f64()),
    )
}

fn inner_loop() -> Check {
    let g = PidGains::default();
    let gate = hurwitz_check(g.k1, g.k2)
        && !hurwitz_check(g.k1, -g.k2)
        && !hurwitz_check(0.0, g.k2)
        && PidGains { k2: -g.k2, ..g }.validate().is_err()
        && g.validate().is_ok();

    let motor = MotorParams::default();
    let mut pid = WheelPid::new(g);
    let dt = 1e-3;
    let setpoint = 3.0;
    let mut speed = 0.0;
    let mut settled_at = None;
    for k in 1..=(8.0 / dt) as usize {
        let (u, _) = pid.update(setpoint, speed, dt);
        speed = motor_step_reduced(speed, u, &motor, dt);
        let e: f64 = setpoint - speed;
        match (e.abs() < 1e-3, settled_at) {
            (true, None) => settled_at = Some(k as f64 * dt),
            (false, _) => settled_at = None,
            _ => {}
        }
    }

    // fast subsystem z'' + k2 z' + k1 z = 0 in stretched time
    let h: f64 = 1e-3;
    let f = |z: [f64; 2]| [z[1], -g.k1 * z[0] - g.k2 * z[1]];
    let mut z: [f64; 2] = [1.0, 0.0];
    for _ in 0..((10.0 / g.k2) / h).round() as usize {
        let a = f(z);
        let b = f([z[0] + 0.5 * h * a[0], z[1] + 0.5 * h * a[1]]);
        let c = f([z[0] + 0.5 * h * b[0], z[1] + 0.5 * h * b[1]]);
        let d = f([z[0] + h * c[0], z[1] + h * c[1]]);
        z = [
            z[0] + h / 6.0 * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0]),
            z[1] + h / 6.0 * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1]),
        ];
    }
    let layer = z[0].hypot(z[1]);
    ensure(
        gate && settled_at.is_some_and(|t| t <= 5.0) && layer < 0.1,
        format!(
            "gate {}, |e| < 1e-3 from t = {}, fast-state norm at 10/k2 = {layer:.4}",
            if gate { "ok" } else { "broken" },
            settled_at.map_or("never".to_string(), |t| format!("{t:.3} s")),
        ),
    )
}

/// The flat scenario cut down to the first 26 s.
fn short_flat(name: &str, seed: u64) -> Result<Scenario, String> {
    let mut scn = parse_scenario(&scenario_path(name)).map_err(|e| e.to_string())?;
    scn.waypoints.retain(|w| w.t <= 26.0);
    scn.duration_s = 26.0;
    scn.seed = seed;
    Ok(scn)
}

/// Whether the diagnosis switches to `kind` within 5 s of onset and holds
/// through the end of that window.
fn diagnosed(trace: &trackbench_core::sim::SimTrace, kind: FaultKind, onset: f64) -> bool {
    let window: Vec<_> = trace.records.iter().filter(|r| r.t >= onset && r.t <= onset + 5.0).collect();
    let Some(last_wrong) = window.iter().rposition(|r| r.diagnosis != kind) else { return !window.is_empty() };
    last_wrong + 1 < window.len()
}

fn fault_diagnosis() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, kind) in [("double_loop_flat_left", FaultKind::FlatLeft), ("double_loop_flat_right", FaultKind::FlatRight)] {
        let onset = parse_scenario(&scenario_path(name)).map_err(|e| e.to_string())?.faults.events[0].t_start_s;
        let scenarios = (1..=20).map(|seed| short_flat(name, seed)).collect::<Result<Vec<_>, _>>()?;
        let report = trackbench::batch::run_batch(&scenarios, Execution::Parallel);
        if !report.failures.is_empty() {
            return Err(format!("{} runs aborted", report.failures.len()));
        }
        let hits = report.completed().filter(|tr| diagnosed(tr, kind, onset)).count();
        ok &= hits * 100 >= 95 * 20;
        lines.push(format!("{} {hits}/20", kind.id()));
    }
    ensure(ok, lines.join(", "))
}

fn cascade() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = scenario_path("cascade");
    let scn = parse_scenario(&path).map_err(|e| e.to_string())?;
    let summary = execute(&run_config(vec![path], dir.path(), Emit { trace: false, metrics: false, plotdata: false }))
        .map_err(|e| e.to_string())?;
    let peak = |c: ControllerKind| {
        summary
            .traces
            .iter()
            .find(|t| t.controller == c)
            .map(|t| t.records.iter().map(|r| r.deviation()).fold(0.0, f64::max))
            .unwrap_or(f64::NAN)
    };
    use ControllerKind::*;
    let (af, r, ad, res) = (peak(Antifragile), peak(Robust), peak(Adaptive), peak(Resilient));
    let ordered = af.max(r) < ad && ad < res;

    // windows between consecutive fault onsets, the last closing when the
    // final fault clears
    let mut bounds: Vec<f64> = scn.faults.events.iter().map(|e| e.t_start_s).collect();
    bounds.extend(scn.faults.events.last().and_then(|e| e.t_end_s));
    let af_trace = summary.traces.iter().find(|t| t.controller == Antifragile).ok_or("missing antifragile trace")?;
    let runs: Vec<usize> =
        window_summaries(af_trace, &bounds).iter().take(bounds.len() - 1).map(|w| w.longest_decrease).collect();
    // at least 10 consecutive outer steps (0.2 s at 50 Hz)
    let decreasing = runs.iter().all(|&n| n >= 10);
    ensure(
        ordered && decreasing,
        format!(
            "peaks AF {af:.4} R {r:.4} AD {ad:.4} RES {res:.4}; AF longest decreasing runs per window {runs:?} at {bounds:?}"
        ),
    )
}

fn spline_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_bc: f64 = 0.0;
    for _ in 0..200 {
        let t0 = rng.random_range(0.0..10.0);
        let state = |rng: &mut ChaCha8Rng, t: f64| BoundaryState {
            t,
            pos: [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)],
            vel: [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
            acc: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        };
        let a = state(&mut rng, t0);
        let t1 = t0 + rng.random_range(0.5..5.0);
        let b = state(&mut rng, t1);
        let seg = fit_quintic(&a, &b).map_err(|e| e.to_string())?;
        for s in [a, b] {
            let (x, y) = seg.eval(s.t);
            for (got, want) in [
                (x.p, s.pos[0]),
                (y.p, s.pos[1]),
                (x.d1, s.vel[0]),
                (y.d1, s.vel[1]),
                (x.d2, s.acc[0]),
                (y.d2, s.acc[1]),
            ] {
                worst_bc = worst_bc.max((got - want).abs());
            }
        }
    }

    let scn = parse_scenario(&scenario_path("double_loop_faultfree")).map_err(|e| e.to_string())?;
    let traj = ReferenceTrajectory::from_waypoints(&scn.waypoints, 50.0).map_err(|e| e.to_string())?;
    let segs = traj.segments();
    let mut worst_knot: f64 = 0.0;
    for (i, seg) in segs.iter().enumerate().take(segs.len() - 1) {
        let t = seg.t_end;
        let (lx, ly) = traj.eval_segment(i, t);
        let (rx, ry) = traj.eval_segment(i + 1, t);
        for (l, r) in [(lx.p, rx.p), (lx.d1, rx.d1), (lx.d2, rx.d2), (ly.p, ry.p), (ly.d1, ry.d1), (ly.d2, ry.d2)] {
            worst_knot = worst_knot.max((l - r).abs());
        }
    }
    for w in &scn.waypoints {
        let s = traj.sample(w.t).map_err(|e| e.to_string())?;
        worst_knot = worst_knot.max((s.x - w.x).abs()).max((s.y - w.y).abs());
    }

    // circle of radius 3 traversed in 20 s, one quintic per knot interval
    let (radius, period, knots) = (3.0, 20.0, 64);
    let w = 2.0 * std::f64::consts::PI / period;
    let at = |i: usize| {
        let t = period * i as f64 / knots as f64;
        let th = w * t;
        BoundaryState {
            t,
            pos: [radius * th.cos(), radius * th.sin()],
            vel: [-radius * w * th.sin(), radius * w * th.cos()],
            acc: [-radius * w * w * th.cos(), -radius * w * w * th.sin()],
        }
    };
    let circle = (0..knots).map(|i| fit_quintic(&at(i), &at(i + 1))).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let circle = ReferenceTrajectory::new(circle, 50.0).map_err(|e| e.to_string())?;
    let mut worst_k: f64 = 0.0;
    for i in 0..=1000 {
        let s = circle.sample(period * i as f64 / 1000.0).map_err(|e| e.to_string())?;
        worst_k = worst_k.max((s.curvature - 1.0 / radius).abs());
    }
    ensure(
        worst_bc < 1e-9 && worst_knot < 1e-9 && worst_k < 1e-6,
        format!("boundary {worst_bc:.1e}, knots {worst_knot:.1e}, circle curvature {worst_k:.1e}"),
    )
}

fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if let Ok(bytes) = std::fs::read(&path) {
                files.insert(path.strip_prefix(root).unwrap_or(&path).to_path_buf(), bytes);
            }
        }
    }
    files
}

fn determinism() -> Check {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(bundled_scenarios_dir())
        .map_err(|e| e.to_string())?
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    let mut trees = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        execute(&run_config(paths.clone(), dir.path(), Emit::default())).map_err(|e| e.to_string())?;
        trees.push(read_tree(dir.path()));
    }
    let differing: Vec<_> =
        trees[0].iter().filter(|(k, v)| trees[1].get(*k) != Some(v)).map(|(k, _)| k.display().to_string()).collect();
    ensure(
        differing.is_empty() && trees[0].len() == trees[1].len() && !trees[0].is_empty(),
        format!("{} files compared, {} differ {:?}", trees[0].len(), differing.len(), differing),
    )
}

fn main() {
    let checks: [Criterion; 10] = [
        ("rank reproduction", rank_reproduction),
        ("fault-free antifragile bounds", fault_free_bounds),
        ("lyapunov rate non-positive", lyapunov_property),
        ("reaching time", reaching_time_oracle),
        ("full vs reduced motor", singular_perturbation),
        ("inner loop gate and boundary layer", inner_loop),
        ("flat tire diagnosis", fault_diagnosis),
        ("cascade ordering", cascade),
        ("spline suite", spline_suite),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} acceptance checks passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
