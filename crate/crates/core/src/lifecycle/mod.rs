//! Evaluation execution: the state machine, submissions and the runtime that
//! turns commands into logged events.

mod engine;
mod events;
mod rules;
mod state;
mod submission;
mod view;

use thiserror::Error;

use crate::ids::{RequestId, TeamId};
use crate::judgement::JudgementError;
use crate::model::ValidationReport;
use crate::persistence::StorageError;

pub use engine::EvaluationRuntime;
pub use events::{ApplyError, Event, EventRecord, SubmissionPart, SYSTEM_ACTOR};
pub use rules::check_end_conditions;
pub use state::{
    transition_allowed, Answer, AnswerRecord, AnswerSetRecord, EndReason, Evaluation,
    EvaluationMode, EvaluationState, Submission, TaskRun, TaskState,
};
pub use submission::{
    AnswerSetReceipt, AnswerSetStatus, SubmissionDocument, SubmissionReceipt, WireAnswer,
    WireAnswerSet,
};
pub use view::{AdminView, AgentView, TaskSummary, TaskView, ViewerView};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid template: {0}")]
    InvalidTemplate(ValidationReport),
    #[error("wrong state: {0}")]
    WrongState(String),
    #[error("not authorized: {0}")]
    NotAuthorized(String),
    #[error("unknown team {0}")]
    UnknownTeam(TeamId),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("unknown task template {0}")]
    UnknownTemplate(String),
    #[error("no active task")]
    NoActiveTask,
    #[error("a task is still running")]
    TaskStillActive,
    #[error("{0} task(s) have not ended")]
    TasksStillActive(usize),
    #[error("team already played {0}")]
    AlreadyPlayed(String),
    #[error("malformed answer: {0}")]
    MalformedAnswer(String),
    #[error("duplicate answer {0}")]
    DuplicateAnswer(String),
    #[error("answer limit of {max} reached")]
    LimitExceeded { max: u32 },
    #[error("new duration {duration_ms} ms would end before elapsed {elapsed_ms} ms")]
    WouldEndInPast { duration_ms: i64, elapsed_ms: i64 },
    #[error("unknown judgement request {0}")]
    UnknownRequest(RequestId),
    #[error("request {0} is not assigned to this judge")]
    NotAssigned(RequestId),
    #[error("request {0} is already judged")]
    AlreadyJudged(RequestId),
    #[error("unknown answer {0}")]
    UnknownAnswer(String),
    #[error(transparent)]
    Judgement(#[from] JudgementError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Apply(#[from] ApplyError),
}

impl EngineError {
    /// Stable machine-readable name, used in API error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::InvalidTemplate(_) => "invalidTemplate",
            Self::WrongState(_) => "wrongState",
            Self::NotAuthorized(_) => "notAuthorized",
            Self::UnknownTeam(_) => "unknownTeam",
            Self::UnknownTask(_) => "unknownTask",
            Self::UnknownTemplate(_) => "unknownTemplate",
            Self::NoActiveTask => "noActiveTask",
            Self::TaskStillActive => "taskStillActive",
            Self::TasksStillActive(_) => "tasksStillActive",
            Self::AlreadyPlayed(_) => "alreadyPlayed",
            Self::MalformedAnswer(_) => "malformedAnswer",
            Self::DuplicateAnswer(_) => "duplicateAnswer",
            Self::LimitExceeded { .. } => "limitExceeded",
            Self::WouldEndInPast { .. } => "wouldEndInPast",
            Self::UnknownRequest(_) => "unknownRequest",
            Self::NotAssigned(_) => "notAssigned",
            Self::AlreadyJudged(_) => "alreadyJudged",
            Self::UnknownAnswer(_) => "unknownAnswer",
            Self::Judgement(_) => "invalidVerdict",
            Self::Storage(_) => "storageFailure",
            Self::Apply(_) => "internal",
        }
    }
}
