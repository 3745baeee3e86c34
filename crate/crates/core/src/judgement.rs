//! Relevance judgement: a-priori target matching and the a-posteriori
//! assessor queue.
//!
//! Verdicts are cached per task by the normalized answer payload, so a
//! fragment judged once is never put in front of an assessor again within the
//! same task.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{EvaluationId, RequestId, SubmissionId, TaskRunId, UserId};
use crate::model::{range_overlap, AnswerKind, AnswerPayload, JudgementMode, JudgementPolicy};

/// Assessor deadline before an assigned request can be handed to someone else.
pub const REASSIGN_AFTER_MS: i64 = 120_000;

#[derive(Debug, Error, PartialEq)]
pub enum JudgementError {
    #[error("a-priori assessment requested for a human-judged task")]
    PolicyMismatch,
    #[error("verdict value {0} is outside [0, 1]")]
    InvalidValue(f64),
}

/// Outcome of the relevance function: a value in `[0, 1]` or undecidable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum VerdictValue {
    Correct,
    Graded(f64),
    Wrong,
    Undecidable,
}

impl VerdictValue {
    /// Maps a relevance score to a verdict; `None` is undecidable.
    pub fn from_score(score: Option<f64>) -> Result<Self, JudgementError> {
        match score {
            None => Ok(Self::Undecidable),
            Some(1.0) => Ok(Self::Correct),
            Some(0.0) => Ok(Self::Wrong),
            Some(v) if v > 0.0 && v < 1.0 => Ok(Self::Graded(v)),
            Some(v) => Err(JudgementError::InvalidValue(v)),
        }
    }

    pub fn score(self) -> Option<f64> {
        match self {
            Self::Correct => Some(1.0),
            Self::Graded(v) => Some(v),
            Self::Wrong => Some(0.0),
            Self::Undecidable => None,
        }
    }

    pub fn is_correct(self) -> bool {
        self == Self::Correct
    }

    pub fn is_wrong(self) -> bool {
        self == Self::Wrong
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum VerdictSource {
    AprioriMatcher,
    HumanJudge,
    AdminOverride,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Verdict {
    pub value: VerdictValue,
    pub source: VerdictSource,
    pub judged_at: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_id: Option<UserId>,
}

impl Verdict {
    pub fn matcher(value: VerdictValue, judged_at: i64) -> Self {
        Self {
            value,
            source: VerdictSource::AprioriMatcher,
            judged_at,
            judge_id: None,
        }
    }
}

/// Case-folds, trims and collapses internal whitespace.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Cache and dedup key of a payload. Two payloads with equal keys are the
/// same answer.
pub fn payload_key(p: &AnswerPayload) -> String {
    let item = p.item_id.as_ref().map(|i| i.as_str()).unwrap_or("");
    match p.kind {
        AnswerKind::WholeItem => format!("item:{item}"),
        AnswerKind::TemporalSegment => {
            let r = p.range.unwrap_or_default();
            format!("segment:{item}:{}:{}", r.start_ms, r.end_ms)
        }
        AnswerKind::Text => format!("text:{}", normalize_text(p.text.as_deref().unwrap_or(""))),
    }
}

/// The unit an answer is "about": its item, or its normalized text. Used for
/// pooled recall.
pub fn payload_unit(p: &AnswerPayload) -> String {
    match (&p.item_id, &p.text) {
        (Some(item), _) => format!("item:{item}"),
        (None, Some(text)) => format!("text:{}", normalize_text(text)),
        (None, None) => String::new(),
    }
}

/// Judges an answer against pre-known relevant targets.
pub fn assess_apriori(
    answer: &AnswerPayload,
    policy: &JudgementPolicy,
) -> Result<VerdictValue, JudgementError> {
    if policy.mode != JudgementMode::AprioriTargets {
        return Err(JudgementError::PolicyMismatch);
    }
    if !policy.expected_answer_kind.accepts(answer.kind) || !answer.is_well_formed() {
        return Ok(VerdictValue::Undecidable);
    }
    let targets = policy.targets.as_deref().unwrap_or_default();
    let hit = targets.iter().any(|t| matches_target(answer, t));
    Ok(if hit {
        VerdictValue::Correct
    } else {
        VerdictValue::Wrong
    })
}

fn matches_target(answer: &AnswerPayload, target: &AnswerPayload) -> bool {
    match answer.kind {
        AnswerKind::Text => match (&answer.text, &target.text) {
            (Some(a), Some(t)) => normalize_text(a) == normalize_text(t),
            _ => false,
        },
        AnswerKind::WholeItem => answer.item_id.is_some() && answer.item_id == target.item_id,
        AnswerKind::TemporalSegment => {
            if answer.item_id.is_none() || answer.item_id != target.item_id {
                return false;
            }
            match (&answer.range, &target.range) {
                (Some(a), Some(t)) => range_overlap(a, t),
                // a whole-item target accepts any segment of that item
                (Some(_), None) => true,
                _ => false,
            }
        }
    }
}

/// Location of one answer: the submission and the answer's flat index across
/// all of the submission's answer sets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnswerRef {
    pub task_id: TaskRunId,
    pub submission_id: SubmissionId,
    pub answer_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RequestState {
    Open,
    Assigned,
    Judged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JudgementRequest {
    pub id: RequestId,
    pub evaluation_id: EvaluationId,
    pub task_id: TaskRunId,
    pub submission_id: SubmissionId,
    pub answer_index: u32,
    pub payload: AnswerPayload,
    pub state: RequestState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assigned_to: Option<UserId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<i64>,
    /// Further answers with the same normalized payload that arrived while
    /// this request was pending; they receive the same verdict.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub linked: Vec<AnswerRef>,
}

impl JudgementRequest {
    pub fn primary(&self) -> AnswerRef {
        AnswerRef {
            task_id: self.task_id.clone(),
            submission_id: self.submission_id.clone(),
            answer_index: self.answer_index,
        }
    }

    pub fn answers(&self) -> impl Iterator<Item = AnswerRef> + '_ {
        std::iter::once(self.primary()).chain(self.linked.iter().cloned())
    }

    pub fn key(&self) -> String {
        payload_key(&self.payload)
    }

    /// Whether `judge` may take this request at `now`.
    pub fn assignable_to(&self, judge: &UserId, now: i64) -> bool {
        match self.state {
            RequestState::Open => true,
            RequestState::Assigned => {
                self.assigned_to.as_ref() == Some(judge) || self.deadline.is_some_and(|d| now >= d)
            }
            RequestState::Judged => false,
        }
    }
}

/// FIFO of assessment requests for one evaluation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JudgementQueue {
    pub requests: Vec<JudgementRequest>,
}

impl JudgementQueue {
    pub fn get(&self, id: &RequestId) -> Option<&JudgementRequest> {
        self.requests.iter().find(|r| &r.id == id)
    }

    pub fn get_mut(&mut self, id: &RequestId) -> Option<&mut JudgementRequest> {
        self.requests.iter_mut().find(|r| &r.id == id)
    }

    /// Pending request in `task` for the same normalized payload, if any.
    pub fn pending_for(&self, task: &TaskRunId, key: &str) -> Option<&JudgementRequest> {
        self.requests
            .iter()
            .find(|r| &r.task_id == task && r.state != RequestState::Judged && r.key() == key)
    }

    /// The request `judge` should work on next: one already held by this
    /// judge, otherwise the oldest open or expired one.
    pub fn next_for(&self, judge: &UserId, now: i64) -> Option<&JudgementRequest> {
        self.requests
            .iter()
            .find(|r| {
                r.state == RequestState::Assigned
                    && r.assigned_to.as_ref() == Some(judge)
                    && r.deadline.is_none_or(|d| now < d)
            })
            .or_else(|| self.requests.iter().find(|r| r.assignable_to(judge, now)))
    }

    pub fn open_count(&self) -> usize {
        self.requests
            .iter()
            .filter(|r| r.state != RequestState::Judged)
            .count()
    }
}
