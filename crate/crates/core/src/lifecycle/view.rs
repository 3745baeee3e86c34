//! Role-scoped read models of an evaluation.

use serde::{Deserialize, Serialize};

use super::state::{
    EndReason, Evaluation, EvaluationMode, EvaluationState, Submission, TaskRun, TaskState,
};
use super::EngineError;
use crate::ids::{EvaluationId, TaskRunId, TaskTemplateId, TeamId};
use crate::model::{desc_at, HintChannelEntry};
use crate::scoring::{scoreboard, ScoreboardRow};

/// Public description of a task run: timing and the hints visible now.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskView {
    pub task_id: TaskRunId,
    pub template_id: TaskTemplateId,
    pub name: String,
    pub group: String,
    pub state: TaskState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<TeamId>,
    pub duration_ms: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remaining_ms: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_reason: Option<EndReason>,
    pub hints: Vec<HintChannelEntry>,
    pub ready_teams: Vec<TeamId>,
}

impl TaskView {
    pub fn build(eval: &Evaluation, task: &TaskRun, now: i64) -> Self {
        let tpl = eval.task_template(task);
        let elapsed = match task.state {
            TaskState::Active => task.elapsed_ms(now),
            _ => None,
        };
        let hints = match (tpl, elapsed) {
            (Some(tpl), Some(t)) => desc_at(&tpl.timeline, t).into_iter().cloned().collect(),
            _ => Vec::new(),
        };
        Self {
            task_id: task.id.clone(),
            template_id: task.template_ref.clone(),
            name: tpl.map(|t| t.name.clone()).unwrap_or_default(),
            group: tpl.map(|t| t.group_name.clone()).unwrap_or_default(),
            state: task.state,
            scope: task.scope.clone(),
            duration_ms: task.duration_ms,
            started_at: task.started_at,
            elapsed_ms: elapsed,
            remaining_ms: task.remaining_ms(now),
            end_reason: task.end_reason,
            hints,
            ready_teams: task.readiness.iter().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskSummary {
    pub id: TaskTemplateId,
    pub name: String,
    pub group: String,
}

/// What a participant's team may see: its current tasks with hints, its own
/// submissions, and everybody's scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentView {
    pub evaluation_id: EvaluationId,
    pub mode: EvaluationMode,
    pub state: EvaluationState,
    pub server_time_ms: i64,
    pub team_id: TeamId,
    pub tasks: Vec<TaskView>,
    pub submissions: Vec<Submission>,
    /// Task templates the team has not played yet (asynchronous mode).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub remaining: Vec<TaskSummary>,
    pub scoreboard: Vec<ScoreboardRow>,
}

impl AgentView {
    pub fn build(eval: &Evaluation, team: &TeamId, now: i64) -> Result<Self, EngineError> {
        if !eval.is_team(team) {
            return Err(EngineError::UnknownTeam(team.clone()));
        }
        let current: Vec<&TaskRun> = eval.current_tasks_for(team).collect();
        let submissions = current
            .iter()
            .flat_map(|t| t.submissions_of(team).cloned())
            .collect();
        let remaining = if eval.mode == EvaluationMode::InteractiveAsync {
            eval.template
                .task_templates
                .iter()
                .filter(|tpl| {
                    !eval
                        .tasks
                        .iter()
                        .any(|t| t.scope.as_ref() == Some(team) && t.template_ref == tpl.id)
                })
                .map(|tpl| TaskSummary {
                    id: tpl.id.clone(),
                    name: tpl.name.clone(),
                    group: tpl.group_name.clone(),
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            evaluation_id: eval.id.clone(),
            mode: eval.mode,
            state: eval.state,
            server_time_ms: now,
            team_id: team.clone(),
            tasks: current
                .iter()
                .map(|t| TaskView::build(eval, t, now))
                .collect(),
            submissions,
            remaining,
            scoreboard: scoreboard(eval),
        })
    }
}

/// Shared-screen view: running tasks and the scoreboard, no submissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ViewerView {
    pub evaluation_id: EvaluationId,
    pub mode: EvaluationMode,
    pub state: EvaluationState,
    pub server_time_ms: i64,
    pub tasks: Vec<TaskView>,
    pub scoreboard: Vec<ScoreboardRow>,
}

impl ViewerView {
    pub fn build(eval: &Evaluation, now: i64) -> Self {
        Self {
            evaluation_id: eval.id.clone(),
            mode: eval.mode,
            state: eval.state,
            server_time_ms: now,
            tasks: eval
                .tasks
                .iter()
                .filter(|t| matches!(t.state, TaskState::Preparing | TaskState::Active))
                .map(|t| TaskView::build(eval, t, now))
                .collect(),
            scoreboard: scoreboard(eval),
        }
    }
}

/// Everything, for the conductor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdminView {
    pub server_time_ms: i64,
    pub open_judgements: usize,
    pub tasks: Vec<TaskView>,
    pub scoreboard: Vec<ScoreboardRow>,
    pub evaluation: Evaluation,
}

impl AdminView {
    pub fn build(eval: &Evaluation, now: i64) -> Self {
        Self {
            server_time_ms: now,
            open_judgements: eval.judgements.open_count(),
            tasks: eval
                .tasks
                .iter()
                .map(|t| TaskView::build(eval, t, now))
                .collect(),
            scoreboard: scoreboard(eval),
            evaluation: eval.clone(),
        }
    }
}
