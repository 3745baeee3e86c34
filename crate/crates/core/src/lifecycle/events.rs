//! Audited mutations and the fold that turns them into an [`Evaluation`].
//!
//! `apply` checks each event against the current state before touching it,
//! so a record that does not fit is reported instead of half-applied.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::state::{
    transition_allowed, EndReason, Evaluation, EvaluationMode, EvaluationState, Submission,
    TaskRun, TaskState,
};
use crate::ids::{EvaluationId, RequestId, TaskRunId, TaskTemplateId, TeamId, UserId};
use crate::judgement::{
    AnswerRef, JudgementQueue, JudgementRequest, RequestState, Verdict, VerdictSource,
};
use crate::model::EvaluationTemplate;

/// Actor recorded for mutations the server performs on its own (timeouts).
pub const SYSTEM_ACTOR: &str = "system";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubmissionPart {
    pub task_id: TaskRunId,
    pub submission: Submission,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "camelCase")]
pub enum Event {
    #[serde(rename_all = "camelCase")]
    EvaluationCreated {
        evaluation_id: EvaluationId,
        template: EvaluationTemplate,
        mode: EvaluationMode,
    },
    EvaluationStarted,
    #[serde(rename_all = "camelCase")]
    TaskCreated {
        task_id: TaskRunId,
        template_id: TaskTemplateId,
        duration_ms: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scope: Option<TeamId>,
    },
    #[serde(rename_all = "camelCase")]
    StateTransition {
        task_id: TaskRunId,
        to: TaskState,
        /// Time the transition takes effect; a timeout ends a task at its
        /// deadline even when noticed later.
        at: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<EndReason>,
    },
    #[serde(rename_all = "camelCase")]
    TeamReady {
        task_id: TaskRunId,
        team_id: TeamId,
    },
    #[serde(rename_all = "camelCase")]
    SubmissionReceived {
        parts: Vec<SubmissionPart>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        requests: Vec<JudgementRequest>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        links: Vec<(RequestId, AnswerRef)>,
    },
    #[serde(rename_all = "camelCase")]
    JudgementAssigned {
        request_id: RequestId,
        judge_id: UserId,
        deadline: i64,
    },
    #[serde(rename_all = "camelCase")]
    VerdictRendered {
        request_id: RequestId,
        verdict: Verdict,
    },
    #[serde(rename_all = "camelCase")]
    VerdictOverridden {
        answer: AnswerRef,
        verdict: Verdict,
    },
    #[serde(rename_all = "camelCase")]
    DurationAdjusted {
        task_id: TaskRunId,
        delta_ms: i64,
        duration_ms: i64,
    },
    #[serde(rename_all = "camelCase")]
    EvaluationEnded {
        forced: bool,
    },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::EvaluationCreated { .. } => "evaluationCreated",
            Event::EvaluationStarted => "evaluationStarted",
            Event::TaskCreated { .. } => "taskCreated",
            Event::StateTransition { .. } => "stateTransition",
            Event::TeamReady { .. } => "teamReady",
            Event::SubmissionReceived { .. } => "submissionReceived",
            Event::JudgementAssigned { .. } => "judgementAssigned",
            Event::VerdictRendered { .. } => "verdictRendered",
            Event::VerdictOverridden { .. } => "verdictOverridden",
            Event::DurationAdjusted { .. } => "durationAdjusted",
            Event::EvaluationEnded { .. } => "evaluationEnded",
        }
    }
}

/// One entry of an evaluation's append-only log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EventRecord {
    pub seq: u64,
    pub wall_clock: i64,
    pub actor: String,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ApplyError {
    #[error("event {seq}: expected sequence number {expected}")]
    OutOfSequence { seq: u64, expected: u64 },
    #[error("event {seq}: log must start with evaluationCreated")]
    MissingGenesis { seq: u64 },
    #[error("event {seq} ({kind}): {reason}")]
    Inconsistent {
        seq: u64,
        kind: &'static str,
        reason: String,
    },
}

impl Evaluation {
    /// Builds the initial state from the first record of a log.
    pub fn genesis(record: &EventRecord) -> Result<Self, ApplyError> {
        if record.seq != 1 {
            return Err(ApplyError::OutOfSequence {
                seq: record.seq,
                expected: 1,
            });
        }
        let Event::EvaluationCreated {
            evaluation_id,
            template,
            mode,
        } = &record.event
        else {
            return Err(ApplyError::MissingGenesis { seq: record.seq });
        };
        Ok(Evaluation {
            id: evaluation_id.clone(),
            template_id: template.id.clone(),
            template: template.clone(),
            mode: *mode,
            state: EvaluationState::Preparing,
            tasks: Vec::new(),
            per_agent_cursor: Default::default(),
            started_at: None,
            ended_at: None,
            forced_end: false,
            judgements: JudgementQueue::default(),
            submission_count: 0,
            last_seq: 1,
        })
    }

    /// Folds a full log into state.
    pub fn replay<'a>(
        records: impl IntoIterator<Item = &'a EventRecord>,
    ) -> Result<Self, ApplyError> {
        let mut it = records.into_iter();
        let first = it.next().ok_or(ApplyError::MissingGenesis { seq: 0 })?;
        let mut eval = Self::genesis(first)?;
        for r in it {
            eval.apply(r)?;
        }
        Ok(eval)
    }

    pub fn apply(&mut self, record: &EventRecord) -> Result<(), ApplyError> {
        let expected = self.last_seq + 1;
        if record.seq != expected {
            return Err(ApplyError::OutOfSequence {
                seq: record.seq,
                expected,
            });
        }
        let kind = record.event.name();
        let fail = |reason: String| ApplyError::Inconsistent {
            seq: record.seq,
            kind,
            reason,
        };
        let at = record.wall_clock;

        match &record.event {
            Event::EvaluationCreated { .. } => {
                return Err(fail("evaluation already exists".into()))
            }
            Event::EvaluationStarted => {
                if self.state != EvaluationState::Preparing {
                    return Err(fail(format!("evaluation is {}", self.state)));
                }
                self.state = EvaluationState::Active;
                self.started_at = Some(at);
            }
            Event::TaskCreated {
                task_id,
                template_id,
                duration_ms,
                scope,
            } => {
                self.require_active().map_err(fail)?;
                if self.task(task_id).is_some() {
                    return Err(fail(format!("task {task_id} exists")));
                }
                if self.template.task_template(template_id).is_none() {
                    return Err(fail(format!("unknown task template {template_id}")));
                }
                if let Some(team) = scope {
                    self.per_agent_cursor.insert(team.clone(), task_id.clone());
                }
                self.tasks.push(TaskRun {
                    id: task_id.clone(),
                    template_ref: template_id.clone(),
                    state: TaskState::Created,
                    started_at: None,
                    ended_at: None,
                    duration_ms: *duration_ms,
                    submissions: Vec::new(),
                    readiness: Default::default(),
                    scope: scope.clone(),
                    verdict_cache: Default::default(),
                    end_reason: None,
                });
            }
            Event::StateTransition {
                task_id,
                to,
                at,
                reason,
            } => {
                let task = self
                    .task_mut(task_id)
                    .ok_or_else(|| fail(format!("unknown task {task_id}")))?;
                if !transition_allowed(task.state, *to, *reason) {
                    return Err(fail(format!("illegal transition {} -> {}", task.state, to)));
                }
                task.state = *to;
                match to {
                    TaskState::Active => task.started_at = Some(*at),
                    TaskState::Ended => {
                        task.ended_at = Some(*at);
                        task.end_reason = *reason;
                    }
                    _ => {}
                }
            }
            Event::TeamReady { task_id, team_id } => {
                let task = self
                    .task_mut(task_id)
                    .ok_or_else(|| fail(format!("unknown task {task_id}")))?;
                if task.state != TaskState::Preparing {
                    return Err(fail(format!("task is {}", task.state)));
                }
                task.readiness.insert(team_id.clone());
            }
            Event::SubmissionReceived {
                parts,
                requests,
                links,
            } => {
                self.require_active().map_err(fail)?;
                for part in parts {
                    let task = self
                        .task(&part.task_id)
                        .ok_or_else(|| fail(format!("unknown task {}", part.task_id)))?;
                    if task.state != TaskState::Active {
                        return Err(fail(format!("task {} is {}", part.task_id, task.state)));
                    }
                }
                for (request, _) in links {
                    if self.judgements.get(request).is_none()
                        && !requests.iter().any(|r| &r.id == request)
                    {
                        return Err(fail(format!("unknown request {request}")));
                    }
                }
                for part in parts {
                    let task = self.task_mut(&part.task_id).expect("checked above");
                    for answer in part.submission.answers() {
                        if let Some(v) = answer.verdicts.last() {
                            task.verdict_cache
                                .entry(answer.key())
                                .or_insert_with(|| v.clone());
                        }
                    }
                    task.submissions.push(part.submission.clone());
                }
                self.judgements.requests.extend(requests.iter().cloned());
                for (request, answer) in links {
                    let r = self.judgements.get_mut(request).expect("checked above");
                    r.linked.push(answer.clone());
                }
                self.submission_count += 1;
            }
            Event::JudgementAssigned {
                request_id,
                judge_id,
                deadline,
            } => {
                let r = self
                    .judgements
                    .get_mut(request_id)
                    .ok_or_else(|| fail(format!("unknown request {request_id}")))?;
                if r.state == RequestState::Judged {
                    return Err(fail("request already judged".into()));
                }
                r.state = RequestState::Assigned;
                r.assigned_to = Some(judge_id.clone());
                r.deadline = Some(*deadline);
            }
            Event::VerdictRendered {
                request_id,
                verdict,
            } => {
                let request = self
                    .judgements
                    .get(request_id)
                    .ok_or_else(|| fail(format!("unknown request {request_id}")))?;
                if request.state == RequestState::Judged {
                    return Err(fail("request already judged".into()));
                }
                let key = request.key();
                let refs: Vec<AnswerRef> = request.answers().collect();
                for r in &refs {
                    self.answer_exists(r).map_err(fail)?;
                }
                for r in &refs {
                    let task = self.task_mut(&r.task_id).expect("checked above");
                    task.verdict_cache.insert(key.clone(), verdict.clone());
                    let answer = task
                        .find_submission_mut(&r.submission_id)
                        .and_then(|s| s.answer_mut(r.answer_index))
                        .expect("checked above");
                    answer.verdicts.push(verdict.clone());
                }
                self.judgements
                    .get_mut(request_id)
                    .expect("checked above")
                    .state = RequestState::Judged;
            }
            Event::VerdictOverridden { answer, verdict } => {
                if verdict.source != VerdictSource::AdminOverride {
                    return Err(fail("override must carry an adminOverride verdict".into()));
                }
                self.answer_exists(answer).map_err(fail)?;
                let record = self
                    .task_mut(&answer.task_id)
                    .and_then(|t| t.find_submission_mut(&answer.submission_id))
                    .and_then(|s| s.answer_mut(answer.answer_index))
                    .expect("checked above");
                record.verdicts.push(verdict.clone());
            }
            Event::DurationAdjusted {
                task_id,
                duration_ms,
                ..
            } => {
                let task = self
                    .task_mut(task_id)
                    .ok_or_else(|| fail(format!("unknown task {task_id}")))?;
                if task.state != TaskState::Active {
                    return Err(fail(format!("task is {}", task.state)));
                }
                task.duration_ms = *duration_ms;
            }
            Event::EvaluationEnded { forced } => {
                self.require_active().map_err(fail)?;
                if let Some(t) = self.tasks.iter().find(|t| t.state != TaskState::Ended) {
                    return Err(fail(format!("task {} is still {}", t.id, t.state)));
                }
                self.state = EvaluationState::Ended;
                self.ended_at = Some(at);
                self.forced_end = *forced;
            }
        }
        self.last_seq = record.seq;
        Ok(())
    }

    fn require_active(&self) -> Result<(), String> {
        if self.state == EvaluationState::Active {
            Ok(())
        } else {
            Err(format!("evaluation is {}", self.state))
        }
    }

    fn answer_exists(&self, r: &AnswerRef) -> Result<(), String> {
        self.task(&r.task_id)
            .and_then(|t| t.find_submission(&r.submission_id))
            .and_then(|s| s.answer(r.answer_index))
            .map(|_| ())
            .ok_or_else(|| format!("unknown answer {}#{}", r.submission_id, r.answer_index))
    }
}
