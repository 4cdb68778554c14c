//! Scenario files, batch execution and output writers around
//! `trackbench-core`.

pub mod batch;
pub mod plotdata;
pub mod report;
pub mod run;
pub mod scenario;
pub mod trace;

/// Directory holding the bundled scenario files.
pub fn bundled_scenarios_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}
