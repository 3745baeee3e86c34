//! Scripted evaluation runs.
//!
//! A scenario names a template, the collections it searches, the users
//! acting in it and a list of actions with their offsets from the start of
//! the run. [`simulate`] replays the actions against a fresh evaluation and
//! returns a transcript of outcomes, events and final scores.
//!
//! ```json
//! {
//!   "template": "template.json",
//!   "collections": ["vbs.json"],
//!   "mode": "interactiveSync",
//!   "judges": ["j1"],
//!   "actions": [
//!     {"atMs": 0, "actor": "admin", "action": {"type": "startEvaluation"}},
//!     {"atMs": 0, "actor": "admin", "action": {"type": "nextTask", "templateId": "kis-01"}},
//!     {"atMs": 0, "actor": "admin", "action": {"type": "startTask"}},
//!     {"atMs": 9000, "actor": "alice", "action": {"type": "submit", "body": {"answerSets": []}}}
//!   ]
//! }
//! ```
//!
//! `template` and every entry of `collections` are either inline JSON or a
//! path relative to the scenario file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use evalkit_core::clock::{Clock, ServerClock, VirtualClock};
use evalkit_core::collection::CollectionRegistry;
use evalkit_core::ids::{EvaluationId, RequestId, SubmissionId, TaskRunId, TeamId};
use evalkit_core::judgement::VerdictValue;
use evalkit_core::lifecycle::{
    EngineError, EvaluationMode, EvaluationRuntime, EventRecord, SubmissionDocument, WireAnswer,
};
use evalkit_core::model::{validate_template, Actor, EvaluationTemplate, MediaCollection, Role};
use evalkit_core::persistence::{EventLog, MemoryLog};
use evalkit_core::scoring::{score_lines, ScoreLine, ScoreboardRow};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub template: Value,
    #[serde(default = "default_mode")]
    pub mode: EvaluationMode,
    #[serde(default)]
    pub collections: Vec<Value>,
    #[serde(default = "default_admins")]
    pub admins: Vec<String>,
    #[serde(default)]
    pub judges: Vec<String>,
    #[serde(default = "default_evaluation_id")]
    pub evaluation_id: String,
    #[serde(default)]
    pub actions: Vec<ScriptedAction>,
    /// Time the run is advanced to after the last action.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_at_ms: Option<i64>,
}

fn default_mode() -> EvaluationMode {
    EvaluationMode::InteractiveSync
}

fn default_admins() -> Vec<String> {
    vec!["admin".into()]
}

fn default_evaluation_id() -> String {
    "sim".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScriptedAction {
    pub at_ms: i64,
    pub actor: String,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "type",
    rename_all = "camelCase",
    rename_all_fields = "camelCase"
)]
pub enum Action {
    StartEvaluation,
    NextTask {
        template_id: String,
    },
    /// Marks the actor's team ready, or `teamId` when an admin does it.
    MarkReady {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        team_id: Option<String>,
    },
    StartTask {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        task_id: Option<String>,
    },
    AbortTask {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        task_id: Option<String>,
    },
    AdjustDuration {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        task_id: Option<String>,
        delta_ms: i64,
    },
    EndEvaluation {
        #[serde(default)]
        force: bool,
    },
    OverrideVerdict {
        submission_id: String,
        answer_index: u32,
        verdict: Option<f64>,
    },
    Submit {
        body: SubmissionDocument,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dedup_key: Option<String>,
    },
    /// Takes the next request from the queue and renders `verdict` on it
    /// (`null` is undecidable). With `expect`, the request's answer must
    /// equal it.
    Judge {
        verdict: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<WireAnswer>,
    },
    /// Only advances the clock.
    Wait,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::StartEvaluation => "startEvaluation",
            Action::NextTask { .. } => "nextTask",
            Action::MarkReady { .. } => "markReady",
            Action::StartTask { .. } => "startTask",
            Action::AbortTask { .. } => "abortTask",
            Action::AdjustDuration { .. } => "adjustDuration",
            Action::EndEvaluation { .. } => "endEvaluation",
            Action::OverrideVerdict { .. } => "overrideVerdict",
            Action::Submit { .. } => "submit",
            Action::Judge { .. } => "judge",
            Action::Wait => "wait",
        }
    }
}

/// A scenario with its references loaded and checked.
#[derive(Debug, Clone)]
pub struct Plan {
    pub evaluation_id: EvaluationId,
    pub mode: EvaluationMode,
    pub template: EvaluationTemplate,
    pub collections: Arc<CollectionRegistry>,
    pub roles: BTreeMap<String, Role>,
    pub creator: Actor,
    pub actions: Vec<ScriptedAction>,
    pub end_at_ms: Option<i64>,
}

fn resolve<T: DeserializeOwned>(value: &Value, base: &Path, what: &str) -> Result<T, HarnessError> {
    match value {
        Value::String(path) => {
            let path = base.join(path);
            let text = std::fs::read_to_string(&path).map_err(|e| {
                HarnessError::ScenarioInvalid(format!("{what} {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                HarnessError::ScenarioInvalid(format!("{what} {}: {e}", path.display()))
            })
        }
        inline => serde_json::from_value(inline.clone())
            .map_err(|e| HarnessError::ScenarioInvalid(format!("inline {what}: {e}"))),
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::ScenarioInvalid(e.to_string()))
    }

    /// Reads a scenario file; relative references resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf), HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::ScenarioInvalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_json(&text)?, base))
    }

    pub fn plan(&self, base: &Path) -> Result<Plan, HarnessError> {
        let mut registry = CollectionRegistry::new();
        for c in &self.collections {
            registry.insert(resolve::<MediaCollection>(c, base, "collection")?);
        }
        let template: EvaluationTemplate = resolve(&self.template, base, "template")?;
        let report = validate_template(&template, &registry);
        if !report.is_empty() {
            return Err(HarnessError::ValidationFailed(report.to_string()));
        }

        let mut roles = BTreeMap::new();
        let mut add = |user: &str, role: Role| match roles.insert(user.to_owned(), role) {
            Some(previous) if previous != role => Err(HarnessError::ScenarioInvalid(format!(
                "user {user} is both {previous} and {role}"
            ))),
            _ => Ok(()),
        };
        for a in &self.admins {
            add(a, Role::Admin)?;
        }
        for j in &self.judges {
            add(j, Role::Judge)?;
        }
        for team in &template.teams {
            for u in &team.user_ids {
                add(u.as_str(), Role::Participant)?;
            }
        }
        let creator = self
            .admins
            .first()
            .map(|a| Actor::new(a.as_str(), Role::Admin))
            .ok_or_else(|| {
                HarnessError::ScenarioInvalid("a scenario needs at least one admin".into())
            })?;

        let mut last = 0;
        for (i, a) in self.actions.iter().enumerate() {
            if a.at_ms < last {
                return Err(HarnessError::ScenarioInvalid(format!(
                    "action {i}: atMs {} is before the previous action at {last}",
                    a.at_ms
                )));
            }
            last = a.at_ms;
            if !roles.contains_key(&a.actor) {
                return Err(HarnessError::ScenarioInvalid(format!(
                    "action {i}: unknown actor {}",
                    a.actor
                )));
            }
        }
        if let Some(end) = self.end_at_ms {
            if end < last {
                return Err(HarnessError::ScenarioInvalid(format!(
                    "endAtMs {end} is before the last action at {last}"
                )));
            }
        }

        Ok(Plan {
            evaluation_id: EvaluationId::new(self.evaluation_id.clone()),
            mode: self.mode,
            template,
            collections: Arc::new(registry),
            roles,
            creator,
            actions: self.actions.clone(),
            end_at_ms: self.end_at_ms,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    /// Time jumps straight to each action's offset.
    Virtual,
    /// Offsets are waited out on the system clock.
    Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OutcomeError {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Outcome {
    pub index: usize,
    pub at_ms: i64,
    pub actor: String,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<OutcomeError>,
}

impl Outcome {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Transcript {
    pub evaluation_id: EvaluationId,
    pub mode: EvaluationMode,
    pub outcomes: Vec<Outcome>,
    pub events: Vec<EventRecord>,
    pub scoreboard: Vec<ScoreboardRow>,
    pub scores: Vec<ScoreLine>,
}

impl Transcript {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes") + "\n"
    }
}

enum Driver {
    Virtual(VirtualClock),
    Wall { clock: ServerClock, base: i64 },
}

impl Driver {
    fn new(mode: ClockMode) -> Self {
        match mode {
            ClockMode::Virtual => Driver::Virtual(VirtualClock::new(0)),
            ClockMode::Wall => {
                let clock = ServerClock::new();
                let base = clock.now_ms();
                Driver::Wall { clock, base }
            }
        }
    }

    fn clock(&self) -> Arc<dyn Clock> {
        match self {
            Driver::Virtual(c) => Arc::new(c.clone()),
            Driver::Wall { clock, .. } => Arc::new(clock.clone()),
        }
    }

    fn advance_to(&self, offset_ms: i64) {
        match self {
            Driver::Virtual(c) => c.set(offset_ms),
            Driver::Wall { clock, base } => {
                let wait = base + offset_ms - clock.now_ms();
                if wait > 0 {
                    std::thread::sleep(Duration::from_millis(wait as u64));
                }
            }
        }
    }
}

/// Runs `plan` over an in-memory log.
pub fn simulate(plan: &Plan, clock: ClockMode) -> Result<Transcript, HarnessError> {
    simulate_with(plan, clock, Box::new(MemoryLog::new()), |_, _| {})
}

/// Runs `plan` over `log`, calling `observe` after every action.
pub fn simulate_with(
    plan: &Plan,
    clock: ClockMode,
    log: Box<dyn EventLog>,
    mut observe: impl FnMut(&Outcome, &EvaluationRuntime),
) -> Result<Transcript, HarnessError> {
    let driver = Driver::new(clock);
    let mut rt = EvaluationRuntime::create(
        plan.evaluation_id.clone(),
        plan.template.clone(),
        plan.mode,
        &plan.creator,
        log,
        driver.clock(),
        plan.collections.clone(),
    )
    .map_err(|e| match e {
        EngineError::InvalidTemplate(report) => HarnessError::ValidationFailed(report.to_string()),
        other => HarnessError::runtime(other),
    })?;

    let mut outcomes = Vec::with_capacity(plan.actions.len());
    for (index, step) in plan.actions.iter().enumerate() {
        driver.advance_to(step.at_ms);
        rt.tick().map_err(HarnessError::runtime)?;
        let actor = Actor::new(step.actor.as_str(), plan.roles[&step.actor]);
        let (result, error) = match perform(&mut rt, plan, &actor, &step.action, index)? {
            Ok(v) => (Some(v), None),
            Err(e) => (
                None,
                Some(OutcomeError {
                    kind: e.kind().into(),
                    message: e.to_string(),
                }),
            ),
        };
        let outcome = Outcome {
            index,
            at_ms: step.at_ms,
            actor: step.actor.clone(),
            action: step.action.name().into(),
            result,
            error,
        };
        observe(&outcome, &rt);
        outcomes.push(outcome);
    }
    if let Some(end) = plan.end_at_ms {
        driver.advance_to(end);
        rt.tick().map_err(HarnessError::runtime)?;
    }

    let events = rt.log().read_all().map_err(HarnessError::runtime)?;
    Ok(Transcript {
        evaluation_id: rt.id().clone(),
        mode: plan.mode,
        outcomes,
        events,
        scoreboard: rt.scoreboard(),
        scores: score_lines(rt.state()),
    })
}

fn task_ref(id: &Option<String>) -> Option<TaskRunId> {
    id.as_deref().map(TaskRunId::from)
}

/// Executes one action. The outer error aborts the run, the inner one is
/// recorded as the action's outcome.
fn perform(
    rt: &mut EvaluationRuntime,
    plan: &Plan,
    actor: &Actor,
    action: &Action,
    index: usize,
) -> Result<Result<Value, EngineError>, HarnessError> {
    let outcome = match action {
        Action::StartEvaluation => rt.start_evaluation(actor).map(|_| Value::Null),
        Action::NextTask { template_id } => rt
            .next_task(actor, &template_id.as_str().into())
            .map(|id| json!({ "taskId": id })),
        Action::MarkReady { team_id } => {
            let team = match team_id {
                Some(t) => Some(TeamId::from(t.as_str())),
                None => plan
                    .template
                    .team_of_user(&actor.user_id)
                    .map(|t| t.id.clone()),
            };
            match team {
                Some(team) => rt
                    .mark_ready(actor, &team)
                    .map(|id| json!({ "taskId": id })),
                None => Err(EngineError::UnknownTeam(TeamId::from(
                    actor.user_id.as_str(),
                ))),
            }
        }
        Action::StartTask { task_id } => rt
            .start_task(actor, task_ref(task_id).as_ref())
            .map(|id| json!({ "taskId": id })),
        Action::AbortTask { task_id } => rt
            .abort_task(actor, task_ref(task_id).as_ref())
            .map(|id| json!({ "taskId": id })),
        Action::AdjustDuration { task_id, delta_ms } => rt
            .adjust_duration(actor, task_ref(task_id).as_ref(), *delta_ms)
            .map(|d| json!({ "durationMs": d })),
        Action::EndEvaluation { force } => rt.end_evaluation(actor, *force).map(|_| Value::Null),
        Action::OverrideVerdict {
            submission_id,
            answer_index,
            verdict,
        } => VerdictValue::from_score(*verdict)
            .map_err(EngineError::from)
            .and_then(|v| {
                rt.override_verdict(
                    actor,
                    &SubmissionId::from(submission_id.as_str()),
                    *answer_index,
                    v,
                )
            })
            .map(|v| json!(v)),
        Action::Submit { body, dedup_key } => rt
            .accept_submission(actor, body, dedup_key.as_deref())
            .map(|r| json!(r)),
        Action::Judge { verdict, expect } => {
            return judge(rt, actor, *verdict, expect.as_ref(), index)
        }
        Action::Wait => Ok(Value::Null),
    };
    Ok(outcome)
}

fn judge(
    rt: &mut EvaluationRuntime,
    actor: &Actor,
    verdict: Option<f64>,
    expect: Option<&WireAnswer>,
    index: usize,
) -> Result<Result<Value, EngineError>, HarnessError> {
    let value = match VerdictValue::from_score(verdict) {
        Ok(v) => v,
        Err(e) => return Ok(Err(e.into())),
    };
    let request = match rt.dequeue_next(actor) {
        Ok(Some(r)) => r,
        Ok(None) => {
            return Err(HarnessError::ScenarioInvalid(format!(
                "action {index}: the judgement queue is empty"
            )))
        }
        Err(e) => return Ok(Err(e)),
    };
    if let Some(expected) = expect {
        let got = WireAnswer::from(&request.payload);
        let expected = WireAnswer {
            weight: None,
            ..expected.clone()
        };
        if got != expected {
            return Err(HarnessError::ScenarioInvalid(format!(
                "action {index}: next request {} is {}, expected {}",
                request.id,
                json!(got),
                json!(expected)
            )));
        }
    }
    let id: RequestId = request.id.clone();
    Ok(rt
        .render_verdict(actor, &id, value)
        .map(|v| json!({ "requestId": id, "verdict": v })))
}
