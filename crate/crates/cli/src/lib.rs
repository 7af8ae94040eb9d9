//! Scenario runner for the rectangle study: sweeps over the height `a`,
//! the six shear cases and a list of correctors.

pub mod config;
pub mod sweep;
pub mod validate;

pub use config::{ConfigError, CorrectorId, OnlyFilter, ScenarioConfig};

/// Worker-count variable; `0` or unset means one worker per core.
pub const THREADS_ENV: &str = "NEHARI_SHAPE_THREADS";

pub fn thread_count(value: Option<&str>) -> Result<usize, String> {
    match value.map(str::trim) {
        None | Some("") => Ok(0),
        Some(v) => v
            .parse()
            .map_err(|_| format!("{THREADS_ENV} must be a non-negative integer, got `{v}`")),
    }
}

pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())
}
