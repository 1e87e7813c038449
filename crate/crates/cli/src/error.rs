use channelforge::carver::CarveError;
use channelforge::geometry::GeometryError;
use channelforge::graspsim::GraspError;
use channelforge::router::RouterError;
use channelforge::sensemodel::SenseError;
use channelforge::sigproc::SigError;

use crate::store::Stage;

/// Failures shared by the command line and the HTTP service. Each variant
/// maps to one exit code and one status code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// The input was well formed but failed a domain check.
    #[error("{0}")]
    Invalid(String),
    #[error("missing {} artifact; run `{}` first", .0.name(), .0.producer())]
    MissingStage(Stage),
    #[error("unknown project `{0}`")]
    NotFound(String),
    #[error("project `{0}` is busy with another change")]
    Busy(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Internal(String),
}

impl AppError {
    /// 2 for validation failures and missing prerequisites, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Invalid(_) | AppError::MissingStage(_) => 2,
            _ => 1,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> AppError {
        let context = context.into();
        move |source| AppError::Io { context, source }
    }
}

macro_rules! invalid_from {
    ($($t:ty),*) => {$(
        impl From<$t> for AppError {
            fn from(e: $t) -> Self {
                AppError::Invalid(e.to_string())
            }
        }
    )*};
}

invalid_from!(GeometryError, RouterError, SenseError, SigError, GraspError);

impl From<CarveError> for AppError {
    fn from(e: CarveError) -> Self {
        match e {
            CarveError::Inconsistent(_) => AppError::Internal(e.to_string()),
            other => AppError::Invalid(other.to_string()),
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
