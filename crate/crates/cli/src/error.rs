use smogcast::eval::EvalError;
use smogcast::ingest::IngestError;
use smogcast::models::ModelError;
use smogcast::pipeline::PipelineError;
use smogcast::search::SearchError;
use smogcast::train::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("training: {0}")]
    Train(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Train(_) => 4,
            Self::Io(_) => 5,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io(e) => e.into(),
            e => Self::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Io(e) => e.into(),
            PipelineError::Ingest(e) => e.into(),
            e @ PipelineError::InvalidGeometry(_) => Self::Config(e.to_string()),
            e => Self::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io(e) => e.into(),
            e @ (ModelError::InvalidSpec(_) | ModelError::UnknownGroup(_)) => Self::Config(e.to_string()),
            e => Self::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Io(e) => e.into(),
            TrainError::Model(e) => e.into(),
            e @ TrainError::InvalidConfig(_) => Self::Config(e.to_string()),
            e => Self::Train(e.to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Io(e) => e.into(),
            SearchError::Model(e) => e.into(),
            e @ (SearchError::EmptyAxis(_) | SearchError::InvalidScheme(_)) => Self::Config(e.to_string()),
            e => Self::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io(e) => e.into(),
            EvalError::Model(e) => e.into(),
            EvalError::Train(e) => e.into(),
            e => Self::Data(e.to_string()),
        }
    }
}
