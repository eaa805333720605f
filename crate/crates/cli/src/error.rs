use std::fmt;

use rebalance_core::dense::NetError;
use rebalance_core::experiment::ExperimentError;
use rebalance_core::io::FormatError;
use rebalance_core::resample::ResampleError;
use rebalance_core::vae::VaeError;
use rebalance_core::Error;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_METHOD: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

/// A failure printed as `error:<category>: <message>` with a fixed exit code.
#[derive(Debug)]
pub struct CliError {
    pub category: &'static str,
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(category: &'static str, code: i32, message: impl Into<String>) -> Self {
        Self { category, code, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("usage", EXIT_INPUT, message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config", EXIT_INPUT, message)
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Self::new("precondition", EXIT_METHOD, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line = self.message.replace('\n', " ");
        write!(f, "error:{}: {}", self.category, line)
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        let category = if matches!(e, FormatError::Io { .. }) { "io" } else { "format" };
        Self::new(category, EXIT_INPUT, e.to_string())
    }
}

impl From<ResampleError> for CliError {
    fn from(e: ResampleError) -> Self {
        Self::new("method", EXIT_METHOD, e.to_string())
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Checkpoint(m) => Self::new("format", EXIT_INPUT, m),
            NetError::InvalidConfig(m) => Self::config(m),
            other => Self::precondition(other.to_string()),
        }
    }
}

impl From<VaeError> for CliError {
    fn from(e: VaeError) -> Self {
        Self::precondition(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidSweep(m) | ExperimentError::InvalidBenchmark(m) => Self::config(m),
            ExperimentError::Resample(r) => r.into(),
            ExperimentError::Net(n) => n.into(),
            other => Self::precondition(other.to_string()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Format(f) => f.into(),
            Error::Resample(r) => r.into(),
            Error::Net(n) => n.into(),
            Error::Vae(v) => v.into(),
            Error::Experiment(x) => x.into(),
            Error::Dataset(d) => Self::precondition(d.to_string()),
            Error::Neighbors(n) => Self::precondition(n.to_string()),
        }
    }
}
