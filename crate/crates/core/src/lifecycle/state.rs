//! Execution-phase entities. An [`Evaluation`] is the fold of its event log;
//! see [`super::events`] for the only code that mutates it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{
    EvaluationId, SubmissionId, TaskRunId, TaskTemplateId, TeamId, TemplateId, UserId,
};
use crate::judgement::{payload_key, JudgementQueue, Verdict, VerdictSource, VerdictValue};
use crate::model::{AnswerPayload, EvaluationTemplate, TaskTemplate, TaskType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EvaluationMode {
    InteractiveSync,
    InteractiveAsync,
    NonInteractive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvaluationState {
    Preparing,
    Active,
    Ended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskState {
    Created,
    Preparing,
    Active,
    Ended,
}

impl fmt::Display for TaskState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for EvaluationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EndReason {
    Timeout,
    AllCorrect,
    AnswersExhausted,
    Aborted,
    EvaluationClosed,
}

/// Task-state edges the execution state machine permits. The two edges into
/// `Ended` from before `Active` are only taken when an evaluation is closed
/// by force.
pub fn transition_allowed(from: TaskState, to: TaskState, reason: Option<EndReason>) -> bool {
    use TaskState::*;
    match (from, to) {
        (Created, Preparing) | (Preparing, Active) | (Active, Ended) => true,
        (Created | Preparing, Ended) => reason == Some(EndReason::EvaluationClosed),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Answer {
    pub payload: AnswerPayload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnswerRecord {
    /// Position among all answers of the submission, across answer sets.
    pub index: u32,
    pub answer: Answer,
    /// Every verdict ever recorded for this answer, oldest first.
    #[serde(default)]
    pub verdicts: Vec<Verdict>,
}

impl AnswerRecord {
    /// The verdict in force: the latest override if there is one, else the
    /// latest verdict.
    pub fn verdict(&self) -> Option<&Verdict> {
        self.verdicts
            .iter()
            .rev()
            .find(|v| v.source == VerdictSource::AdminOverride)
            .or_else(|| self.verdicts.last())
    }

    pub fn value(&self) -> Option<VerdictValue> {
        self.verdict().map(|v| v.value)
    }

    pub fn key(&self) -> String {
        payload_key(&self.answer.payload)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnswerSetRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_hint: Option<String>,
    pub answers: Vec<AnswerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Submission {
    pub id: SubmissionId,
    pub team_id: TeamId,
    pub user_id: UserId,
    /// Milliseconds since the task became active.
    pub received_at_ms: i64,
    pub answer_sets: Vec<AnswerSetRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dedup_key: Option<String>,
}

impl Submission {
    pub fn answers(&self) -> impl Iterator<Item = &AnswerRecord> {
        self.answer_sets.iter().flat_map(|s| s.answers.iter())
    }

    pub fn answer(&self, index: u32) -> Option<&AnswerRecord> {
        self.answers().find(|a| a.index == index)
    }

    pub fn answer_mut(&mut self, index: u32) -> Option<&mut AnswerRecord> {
        self.answer_sets
            .iter_mut()
            .flat_map(|s| s.answers.iter_mut())
            .find(|a| a.index == index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskRun {
    pub id: TaskRunId,
    pub template_ref: TaskTemplateId,
    pub state: TaskState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ended_at: Option<i64>,
    pub duration_ms: i64,
    pub submissions: Vec<Submission>,
    pub readiness: BTreeSet<TeamId>,
    /// The team this run belongs to in asynchronous evaluations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<TeamId>,
    /// Non-override verdicts by normalized payload.
    #[serde(default)]
    pub verdict_cache: BTreeMap<String, Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_reason: Option<EndReason>,
}

impl TaskRun {
    pub fn elapsed_ms(&self, now: i64) -> Option<i64> {
        self.started_at.map(|s| now - s)
    }

    pub fn remaining_ms(&self, now: i64) -> Option<i64> {
        match self.state {
            TaskState::Active => self.started_at.map(|s| (s + self.duration_ms - now).max(0)),
            _ => None,
        }
    }

    pub fn submissions_of<'a>(
        &'a self,
        team: &'a TeamId,
    ) -> impl Iterator<Item = &'a Submission> + 'a {
        self.submissions.iter().filter(move |s| &s.team_id == team)
    }

    /// The team's answers in arrival order, each with its submission time.
    pub fn answers_of<'a>(
        &'a self,
        team: &'a TeamId,
    ) -> impl Iterator<Item = (i64, &'a AnswerRecord)> + 'a {
        self.submissions_of(team)
            .flat_map(|s| s.answers().map(move |a| (s.received_at_ms, a)))
    }

    pub fn find_submission(&self, id: &SubmissionId) -> Option<&Submission> {
        self.submissions.iter().find(|s| &s.id == id)
    }

    pub fn find_submission_mut(&mut self, id: &SubmissionId) -> Option<&mut Submission> {
        self.submissions.iter_mut().find(|s| &s.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Evaluation {
    pub id: EvaluationId,
    pub template_id: TemplateId,
    pub template: EvaluationTemplate,
    pub mode: EvaluationMode,
    pub state: EvaluationState,
    pub tasks: Vec<TaskRun>,
    pub per_agent_cursor: BTreeMap<TeamId, TaskRunId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ended_at: Option<i64>,
    #[serde(default)]
    pub forced_end: bool,
    pub judgements: JudgementQueue,
    pub submission_count: u64,
    /// Sequence number of the last applied event.
    pub last_seq: u64,
}

impl Evaluation {
    pub fn task(&self, id: &TaskRunId) -> Option<&TaskRun> {
        self.tasks.iter().find(|t| &t.id == id)
    }

    pub fn task_mut(&mut self, id: &TaskRunId) -> Option<&mut TaskRun> {
        self.tasks.iter_mut().find(|t| &t.id == id)
    }

    pub fn task_template(&self, task: &TaskRun) -> Option<&TaskTemplate> {
        self.template.task_template(&task.template_ref)
    }

    pub fn task_type(&self, task: &TaskRun) -> Option<&TaskType> {
        self.task_template(task)
            .and_then(|t| self.template.type_of(t))
    }

    pub fn team_ids(&self) -> impl Iterator<Item = &TeamId> {
        self.template.teams.iter().map(|t| &t.id)
    }

    pub fn is_team(&self, team: &TeamId) -> bool {
        self.template.team(team).is_some()
    }

    /// Teams whose results a task waits for: its scoped team, or everyone.
    pub fn required_teams(&self, task: &TaskRun) -> Vec<TeamId> {
        match &task.scope {
            Some(team) => vec![team.clone()],
            None => self.team_ids().cloned().collect(),
        }
    }

    /// Tasks that currently accept submissions from `team`.
    pub fn active_tasks_for<'a>(
        &'a self,
        team: &'a TeamId,
    ) -> impl Iterator<Item = &'a TaskRun> + 'a {
        self.tasks.iter().filter(move |t| {
            t.state == TaskState::Active && t.scope.as_ref().is_none_or(|s| s == team)
        })
    }

    /// The task a team is currently engaged with (preparing or active).
    pub fn current_tasks_for<'a>(
        &'a self,
        team: &'a TeamId,
    ) -> impl Iterator<Item = &'a TaskRun> + 'a {
        self.tasks.iter().filter(move |t| {
            matches!(t.state, TaskState::Preparing | TaskState::Active)
                && t.scope.as_ref().is_none_or(|s| s == team)
        })
    }

    pub fn find_submission<'a>(
        &'a self,
        id: &'a SubmissionId,
    ) -> impl Iterator<Item = (&'a TaskRun, &'a Submission)> + 'a {
        self.tasks
            .iter()
            .filter_map(move |t| t.find_submission(id).map(|s| (t, s)))
    }
}
