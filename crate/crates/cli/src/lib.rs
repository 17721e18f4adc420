//! Deterministic experiment harness over `stripes-core`: configuration,
//! execution and tabular reports.

pub mod config;
pub mod run;
pub mod table;

pub use config::{ExperimentConfig, Kind};
pub use run::{run_experiment, Manifest};

use stripes_core::Error;

/// Exit status and the single-line JSON record reported for `e`: 3 for
/// audit failures, 2 for everything else.
pub fn error_record(e: &Error) -> (u8, String) {
    let (code, kind, message) = match e {
        Error::Audit(msg) => (3, "audit", msg.clone()),
        Error::Config(msg) => (2, "config", msg.clone()),
        other => (2, "input", other.to_string()),
    };
    (code, serde_json::json!({ "error": kind, "message": message }).to_string())
}
