use std::process::ExitCode;

/// Failure of a command-line verb. Validation problems exit with 1,
/// everything that goes wrong at run time with 2.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configInvalid: {0}")]
    ConfigInvalid(String),
    #[error("parseError: {0}")]
    ParseError(String),
    #[error("validationFailed: {0}")]
    ValidationFailed(String),
    #[error("scenarioInvalid: {0}")]
    ScenarioInvalid(String),
    #[error("portInUse: {0}")]
    PortInUse(String),
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::ConfigInvalid(_) => "configInvalid",
            Self::ParseError(_) => "parseError",
            Self::ValidationFailed(_) => "validationFailed",
            Self::ScenarioInvalid(_) => "scenarioInvalid",
            Self::PortInUse(_) => "portInUse",
            Self::Runtime(_) => "runtime",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::ConfigInvalid(_)
            | Self::ParseError(_)
            | Self::ValidationFailed(_)
            | Self::ScenarioInvalid(_) => 1,
            Self::PortInUse(_) | Self::Runtime(_) => 2,
        }
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<HarnessError> for ExitCode {
    fn from(e: HarnessError) -> Self {
        ExitCode::from(e.exit_code())
    }
}
