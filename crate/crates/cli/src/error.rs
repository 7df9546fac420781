use std::fmt;

/// Failure of a command, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config; exit status 1.
    Usage(String),
    /// The inputs could not be processed; exit status 2.
    Data(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        CliError::Data(anyhow::anyhow!("{msg}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Data(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

macro_rules! data_errors {
    ($($t:ty),* $(,)?) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.into())
            }
        })*
    };
}

data_errors!(
    std::io::Error,
    serde_json::Error,
    vibetap::ingest::IngestError,
    vibetap::dsp::DspError,
    vibetap::segment::SegmentError,
    vibetap::features::FeatureError,
    vibetap::ml::MlError,
    vibetap::simulate::SimError,
);
