use launchcurve::breakeven::BreakevenError;
use launchcurve::curve::CurveError;
use launchcurve::estimate::EstimateError;
use launchcurve::ingest::IngestError;
use launchcurve::synth::SynthError;
use serde_json::json;

/// An operational failure, printed to stderr as one JSON object so callers
/// can dispatch on the code without scraping prose.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> CliError {
        CliError { code, message: message.into() }
    }

    pub fn bad_args(message: impl Into<String>) -> CliError {
        CliError::new("bad-args", message)
    }

    pub fn causality(message: impl Into<String>) -> CliError {
        CliError::new("causality", message)
    }

    pub fn io(context: &str, err: std::io::Error) -> CliError {
        CliError::new("io", format!("{context}: {err}"))
    }

    pub fn to_json(&self) -> String {
        json!({ "error": { "code": self.code, "message": self.message } }).to_string()
    }
}

impl From<IngestError> for CliError {
    fn from(err: IngestError) -> CliError {
        CliError::new("parse", err.to_string())
    }
}

impl From<EstimateError> for CliError {
    fn from(err: EstimateError) -> CliError {
        let code = match err {
            EstimateError::EmptySet(_) => "empty-set",
            _ => "bad-args",
        };
        CliError::new(code, err.to_string())
    }
}

impl From<BreakevenError> for CliError {
    fn from(err: BreakevenError) -> CliError {
        CliError::bad_args(err.to_string())
    }
}

impl From<CurveError> for CliError {
    fn from(err: CurveError) -> CliError {
        CliError::bad_args(err.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(err: SynthError) -> CliError {
        CliError::new("config", err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> CliError {
        CliError::new("internal", format!("serializing output: {err}"))
    }
}
