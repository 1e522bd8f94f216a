//! Library side of the `deformcl` executable: configuration, the end-to-end
//! pipeline and the error contract.

pub mod config;
pub mod pipeline;

use centerline::Error;
use serde_json::json;

pub use config::PipelineConfig;
pub use pipeline::{run_pipeline, PipelineMetrics, PipelineOutcome};

/// Exit status for any failed command.
pub const EXIT_FAILURE: i32 = 2;

pub const THREADS_ENV: &str = "DEFORMCL_THREADS";

/// `{"error": {"kind", "message", "path"?}}`.
pub fn error_json(e: &Error) -> serde_json::Value {
    let mut body = json!({
        "kind": e.kind(),
        "message": e.to_string(),
    });
    if let Some(p) = e.path() {
        body["path"] = json!(p.display().to_string());
    }
    json!({ "error": body })
}

/// `--threads` wins over the environment; zero or unset leaves rayon's
/// default.
pub fn resolve_threads(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>, Error> {
    let n = match (flag, env) {
        (Some(n), _) => n,
        (None, Some(v)) => v.trim().parse().map_err(|_| {
            Error::InvalidArgument(format!("{THREADS_ENV}={v:?} is not a thread count"))
        })?,
        (None, None) => 0,
    };
    Ok((n > 0).then_some(n))
}
