//! Command side of an evaluation. Every command validates against the current
//! state, turns into one or more events, and each event is appended to the
//! log before it is folded into the state.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use tracing::debug;

use super::events::{Event, EventRecord, SubmissionPart, SYSTEM_ACTOR};
use super::rules::check_end_conditions;
use super::state::{
    Answer, AnswerRecord, AnswerSetRecord, EndReason, Evaluation, EvaluationMode, EvaluationState,
    Submission, TaskState,
};
use super::submission::{AnswerSetReceipt, AnswerSetStatus, SubmissionDocument, SubmissionReceipt};
use super::view::{AdminView, AgentView, ViewerView};
use super::EngineError;
use crate::clock::Clock;
use crate::collection::CollectionRegistry;
use crate::ids::{EvaluationId, RequestId, SubmissionId, TaskRunId, TaskTemplateId, TeamId};
use crate::judgement::{
    assess_apriori, payload_key, AnswerRef, JudgementRequest, RequestState, Verdict, VerdictSource,
    VerdictValue, REASSIGN_AFTER_MS,
};
use crate::model::{
    validate_template, Actor, AnswerPayload, EvaluationTemplate, HintContent, JudgementMode,
    JudgementPolicy, Role,
};
use crate::persistence::EventLog;
use crate::scoring::{scoreboard, ScoreboardRow};

/// A live evaluation: state, its log and the clock it runs on.
pub struct EvaluationRuntime {
    eval: Evaluation,
    log: Box<dyn EventLog>,
    clock: Arc<dyn Clock>,
    collections: Arc<CollectionRegistry>,
    dedup: HashMap<(TeamId, String), SubmissionId>,
}

impl EvaluationRuntime {
    /// Validates `template` and starts a new log with the genesis event.
    pub fn create(
        id: EvaluationId,
        template: EvaluationTemplate,
        mode: EvaluationMode,
        actor: &Actor,
        mut log: Box<dyn EventLog>,
        clock: Arc<dyn Clock>,
        collections: Arc<CollectionRegistry>,
    ) -> Result<Self, EngineError> {
        require_admin(actor)?;
        let report = validate_template(&template, &collections);
        if !report.is_empty() {
            return Err(EngineError::InvalidTemplate(report));
        }
        let mut template = template;
        canonicalize_items(&mut template, &collections);
        let record = EventRecord {
            seq: 1,
            wall_clock: clock.now_ms(),
            actor: actor.user_id.to_string(),
            event: Event::EvaluationCreated {
                evaluation_id: id,
                template,
                mode,
            },
        };
        log.append(&record)?;
        let eval = Evaluation::genesis(&record)?;
        log.after_apply(&eval)?;
        Ok(Self {
            eval,
            log,
            clock,
            collections,
            dedup: HashMap::new(),
        })
    }

    /// Wraps state recovered from `log`.
    pub fn resume(
        eval: Evaluation,
        log: Box<dyn EventLog>,
        clock: Arc<dyn Clock>,
        collections: Arc<CollectionRegistry>,
    ) -> Self {
        let mut dedup = HashMap::new();
        for task in &eval.tasks {
            for s in &task.submissions {
                if let Some(key) = &s.dedup_key {
                    dedup.insert((s.team_id.clone(), key.clone()), s.id.clone());
                }
            }
        }
        Self {
            eval,
            log,
            clock,
            collections,
            dedup,
        }
    }

    pub fn state(&self) -> &Evaluation {
        &self.eval
    }

    pub fn id(&self) -> &EvaluationId {
        &self.eval.id
    }

    pub fn now(&self) -> i64 {
        self.clock.now_ms()
    }

    pub fn log(&self) -> &dyn EventLog {
        self.log.as_ref()
    }

    pub fn collections(&self) -> &CollectionRegistry {
        &self.collections
    }

    fn commit(&mut self, actor: &str, event: Event) -> Result<(), EngineError> {
        let record = EventRecord {
            seq: self.eval.last_seq + 1,
            wall_clock: self.clock.now_ms(),
            actor: actor.to_owned(),
            event,
        };
        debug!(seq = record.seq, kind = record.event.name(), "commit");
        self.log.append(&record)?;
        self.eval.apply(&record)?;
        self.log.after_apply(&self.eval)?;
        Ok(())
    }

    fn ensure_open(&self) -> Result<(), EngineError> {
        match self.eval.state {
            EvaluationState::Ended => Err(EngineError::WrongState("evaluation has ended".into())),
            _ => Ok(()),
        }
    }

    fn ensure_active(&self) -> Result<(), EngineError> {
        match self.eval.state {
            EvaluationState::Active => Ok(()),
            s => Err(EngineError::WrongState(format!("evaluation is {s}"))),
        }
    }

    /// Ends every active task whose end condition holds at the current time.
    /// A timed-out task is recorded as ending at its deadline.
    pub fn tick(&mut self) -> Result<usize, EngineError> {
        if self.eval.state != EvaluationState::Active {
            return Ok(0);
        }
        let now = self.clock.now_ms();
        let mut due = Vec::new();
        for task in self
            .eval
            .tasks
            .iter()
            .filter(|t| t.state == TaskState::Active)
        {
            let Some(ty) = self.eval.task_type(task) else {
                continue;
            };
            let required = self.eval.required_teams(task);
            if let Some(reason) = check_end_conditions(task, ty, &required, now) {
                let at = match reason {
                    EndReason::Timeout => task.started_at.map_or(now, |s| s + task.duration_ms),
                    _ => now,
                };
                due.push((task.id.clone(), at, reason));
            }
        }
        let n = due.len();
        for (task_id, at, reason) in due {
            self.commit(
                SYSTEM_ACTOR,
                Event::StateTransition {
                    task_id,
                    to: TaskState::Ended,
                    at,
                    reason: Some(reason),
                },
            )?;
        }
        Ok(n)
    }

    pub fn start_evaluation(&mut self, actor: &Actor) -> Result<(), EngineError> {
        require_admin(actor)?;
        if self.eval.state != EvaluationState::Preparing {
            return Err(EngineError::WrongState(format!(
                "evaluation is {}",
                self.eval.state
            )));
        }
        let who = actor.user_id.to_string();
        self.commit(&who, Event::EvaluationStarted)?;
        if self.eval.mode == EvaluationMode::NonInteractive {
            let templates: Vec<_> = self
                .eval
                .template
                .task_templates
                .iter()
                .map(|t| t.id.clone())
                .collect();
            for tpl in templates {
                let task_id = self.create_task(&who, &tpl, None)?;
                self.transition(&who, &task_id, TaskState::Active, None)?;
            }
        }
        Ok(())
    }

    fn next_task_id(&self) -> TaskRunId {
        TaskRunId::new(format!("task-{}", self.eval.tasks.len() + 1))
    }

    fn create_task(
        &mut self,
        who: &str,
        tpl: &TaskTemplateId,
        scope: Option<TeamId>,
    ) -> Result<TaskRunId, EngineError> {
        let duration_ms = self
            .eval
            .template
            .task_template(tpl)
            .ok_or_else(|| EngineError::UnknownTemplate(tpl.to_string()))?
            .duration_ms;
        let task_id = self.next_task_id();
        self.commit(
            who,
            Event::TaskCreated {
                task_id: task_id.clone(),
                template_id: tpl.clone(),
                duration_ms,
                scope,
            },
        )?;
        self.transition(who, &task_id, TaskState::Preparing, None)?;
        Ok(task_id)
    }

    fn transition(
        &mut self,
        who: &str,
        task_id: &TaskRunId,
        to: TaskState,
        reason: Option<EndReason>,
    ) -> Result<(), EngineError> {
        let at = self.clock.now_ms();
        self.commit(
            who,
            Event::StateTransition {
                task_id: task_id.clone(),
                to,
                at,
                reason,
            },
        )
    }

    /// Instantiates the next task. Synchronous runs are driven by an admin;
    /// in asynchronous runs every participant's team advances on its own.
    pub fn next_task(
        &mut self,
        actor: &Actor,
        template: &TaskTemplateId,
    ) -> Result<TaskRunId, EngineError> {
        self.tick()?;
        self.ensure_active()?;
        if self.eval.template.task_template(template).is_none() {
            return Err(EngineError::UnknownTemplate(template.to_string()));
        }
        let who = actor.user_id.to_string();
        match self.eval.mode {
            EvaluationMode::NonInteractive => Err(EngineError::WrongState(
                "non-interactive evaluations instantiate all tasks at start".into(),
            )),
            EvaluationMode::InteractiveSync => {
                require_admin(actor)?;
                if self.eval.tasks.iter().any(|t| t.state != TaskState::Ended) {
                    return Err(EngineError::TaskStillActive);
                }
                self.create_task(&who, template, None)
            }
            EvaluationMode::InteractiveAsync => {
                let team = self.team_of(actor)?;
                if let Some(current) = self
                    .eval
                    .per_agent_cursor
                    .get(&team)
                    .and_then(|id| self.eval.task(id))
                {
                    if current.state != TaskState::Ended {
                        return Err(EngineError::TaskStillActive);
                    }
                }
                if self
                    .eval
                    .tasks
                    .iter()
                    .any(|t| t.scope.as_ref() == Some(&team) && &t.template_ref == template)
                {
                    return Err(EngineError::AlreadyPlayed(template.to_string()));
                }
                self.create_task(&who, template, Some(team))
            }
        }
    }

    fn team_of(&self, actor: &Actor) -> Result<TeamId, EngineError> {
        if actor.role != Role::Participant {
            return Err(EngineError::NotAuthorized(format!(
                "{} is not a participant",
                actor.user_id
            )));
        }
        self.eval
            .template
            .team_of_user(&actor.user_id)
            .map(|t| t.id.clone())
            .ok_or_else(|| {
                EngineError::NotAuthorized(format!("{} belongs to no team", actor.user_id))
            })
    }

    /// Records that `team` is ready for its preparing task, activating the
    /// task once every required team is ready.
    pub fn mark_ready(&mut self, actor: &Actor, team: &TeamId) -> Result<TaskRunId, EngineError> {
        self.tick()?;
        self.ensure_active()?;
        if !self.eval.is_team(team) {
            return Err(EngineError::UnknownTeam(team.clone()));
        }
        if !actor.is_admin() && self.team_of(actor)? != *team {
            return Err(EngineError::NotAuthorized(format!(
                "{} is not in team {team}",
                actor.user_id
            )));
        }
        let task = self
            .eval
            .tasks
            .iter()
            .find(|t| t.state == TaskState::Preparing && t.scope.as_ref().is_none_or(|s| s == team))
            .ok_or_else(|| EngineError::WrongState("no task is waiting for readiness".into()))?;
        let task_id = task.id.clone();
        let who = actor.user_id.to_string();
        if !task.readiness.contains(team) {
            self.commit(
                &who,
                Event::TeamReady {
                    task_id: task_id.clone(),
                    team_id: team.clone(),
                },
            )?;
        }
        let task = self.eval.task(&task_id).expect("present");
        let required = self.eval.required_teams(task);
        if required.iter().all(|t| task.readiness.contains(t)) {
            self.transition(&who, &task_id, TaskState::Active, None)?;
        }
        Ok(task_id)
    }

    fn single_task(
        &self,
        id: Option<&TaskRunId>,
        state: TaskState,
    ) -> Result<TaskRunId, EngineError> {
        match id {
            Some(id) => {
                let task = self
                    .eval
                    .task(id)
                    .ok_or_else(|| EngineError::UnknownTask(id.to_string()))?;
                if task.state != state {
                    return Err(EngineError::WrongState(format!(
                        "task {id} is {}",
                        task.state
                    )));
                }
                Ok(id.clone())
            }
            None => {
                let mut it = self.eval.tasks.iter().filter(|t| t.state == state);
                match (it.next(), it.next()) {
                    (Some(t), None) => Ok(t.id.clone()),
                    (None, _) if state == TaskState::Active => Err(EngineError::NoActiveTask),
                    (None, _) => Err(EngineError::WrongState(format!("no {state} task"))),
                    _ => Err(EngineError::WrongState(format!(
                        "several {state} tasks; name one"
                    ))),
                }
            }
        }
    }

    /// Activates a preparing task without waiting for the remaining teams.
    pub fn start_task(
        &mut self,
        actor: &Actor,
        task: Option<&TaskRunId>,
    ) -> Result<TaskRunId, EngineError> {
        require_admin(actor)?;
        self.tick()?;
        self.ensure_active()?;
        let id = self.single_task(task, TaskState::Preparing)?;
        self.transition(actor.user_id.as_str(), &id, TaskState::Active, None)?;
        Ok(id)
    }

    pub fn abort_task(
        &mut self,
        actor: &Actor,
        task: Option<&TaskRunId>,
    ) -> Result<TaskRunId, EngineError> {
        require_admin(actor)?;
        self.tick()?;
        self.ensure_active()?;
        let id = self.single_task(task, TaskState::Active)?;
        self.transition(
            actor.user_id.as_str(),
            &id,
            TaskState::Ended,
            Some(EndReason::Aborted),
        )?;
        Ok(id)
    }

    /// Lengthens or shortens a running task. The new duration must leave the
    /// task running.
    pub fn adjust_duration(
        &mut self,
        actor: &Actor,
        task: Option<&TaskRunId>,
        delta_ms: i64,
    ) -> Result<i64, EngineError> {
        require_admin(actor)?;
        self.tick()?;
        self.ensure_active()?;
        let id = self.single_task(task, TaskState::Active)?;
        let now = self.clock.now_ms();
        let run = self.eval.task(&id).expect("present");
        let elapsed_ms = run.elapsed_ms(now).unwrap_or(0);
        let duration_ms = run.duration_ms.saturating_add(delta_ms);
        if duration_ms <= elapsed_ms {
            return Err(EngineError::WouldEndInPast {
                duration_ms,
                elapsed_ms,
            });
        }
        self.commit(
            actor.user_id.as_str(),
            Event::DurationAdjusted {
                task_id: id,
                delta_ms,
                duration_ms,
            },
        )?;
        Ok(duration_ms)
    }

    /// Closes the evaluation. Without `force` every task must have ended;
    /// with it, unfinished tasks are ended first.
    pub fn end_evaluation(&mut self, actor: &Actor, force: bool) -> Result<(), EngineError> {
        require_admin(actor)?;
        self.tick()?;
        self.ensure_active()?;
        let open: Vec<TaskRunId> = self
            .eval
            .tasks
            .iter()
            .filter(|t| t.state != TaskState::Ended)
            .map(|t| t.id.clone())
            .collect();
        if !open.is_empty() && !force {
            return Err(EngineError::TasksStillActive(open.len()));
        }
        let who = actor.user_id.to_string();
        for id in &open {
            self.transition(
                &who,
                id,
                TaskState::Ended,
                Some(EndReason::EvaluationClosed),
            )?;
        }
        self.commit(&who, Event::EvaluationEnded { forced: force })
    }

    /// Accepts a submission document from a member of `team`.
    ///
    /// Answer sets are routed to tasks, item references are resolved to
    /// item names, and every answer is judged a priori, answered from the
    /// task's verdict cache, linked to a pending request for the same payload,
    /// or queued for an assessor. With `dedup_key`, a repeated key returns
    /// the original receipt and stores nothing.
    pub fn accept_submission(
        &mut self,
        actor: &Actor,
        doc: &SubmissionDocument,
        dedup_key: Option<&str>,
    ) -> Result<SubmissionReceipt, EngineError> {
        let team = self.team_of(actor)?;
        self.tick()?;
        self.ensure_open()?;

        if let Some(key) = dedup_key {
            if let Some(id) = self.dedup.get(&(team.clone(), key.to_owned())) {
                let mut receipt = self.receipt_for(id);
                receipt.replayed = true;
                return Ok(receipt);
            }
        }
        if self.eval.state != EvaluationState::Active {
            return Err(EngineError::NoActiveTask);
        }
        if doc.answer_sets.is_empty() {
            return Err(EngineError::MalformedAnswer(
                "submission has no answer sets".into(),
            ));
        }

        let now = self.clock.now_ms();
        let submission_id = SubmissionId::new(format!("sub-{}", self.eval.submission_count + 1));
        let mut next_request = self.eval.judgements.requests.len();
        let mut parts: Vec<SubmissionPart> = Vec::new();
        let mut requests: Vec<JudgementRequest> = Vec::new();
        let mut links: Vec<(RequestId, AnswerRef)> = Vec::new();
        let mut seen_keys: HashMap<TaskRunId, BTreeSet<String>> = HashMap::new();
        let mut counts: HashMap<TaskRunId, usize> = HashMap::new();
        let mut index = 0u32;

        for set in &doc.answer_sets {
            if set.answers.is_empty() {
                return Err(EngineError::MalformedAnswer(
                    "answer set has no answers".into(),
                ));
            }
            let task_id = self.route(&team, set.hint())?;
            let task = self.eval.task(&task_id).expect("routed");
            let tpl = self.eval.task_template(task).expect("template of task");
            let ty = self.eval.task_type(task).expect("type of task");

            let keys = seen_keys
                .entry(task_id.clone())
                .or_insert_with(|| task.answers_of(&team).map(|(_, a)| a.key()).collect());
            let count = counts
                .entry(task_id.clone())
                .or_insert_with(|| task.answers_of(&team).count());

            let mut records = Vec::with_capacity(set.answers.len());
            for wire in &set.answers {
                let mut payload = wire.to_payload().map_err(EngineError::MalformedAnswer)?;
                if let Some(item) = &payload.item_id {
                    let resolved = self
                        .collections
                        .get_item(&tpl.collection_id, item.as_str())
                        .map_err(|_| {
                            EngineError::MalformedAnswer(format!("unknown media item {item}"))
                        })?;
                    payload.item_id = Some(resolved.name.as_str().into());
                }
                let key = payload_key(&payload);
                if !keys.insert(key.clone()) {
                    return Err(EngineError::DuplicateAnswer(key));
                }
                *count += 1;
                if let Some(max) = ty.max_answers_per_agent {
                    if *count > max as usize {
                        return Err(EngineError::LimitExceeded { max });
                    }
                }

                let here = AnswerRef {
                    task_id: task_id.clone(),
                    submission_id: submission_id.clone(),
                    answer_index: index,
                };
                let mut verdicts = Vec::new();
                if tpl.judgement.mode == JudgementMode::AprioriTargets
                    || !tpl.judgement.expected_answer_kind.accepts(payload.kind)
                {
                    let policy = JudgementPolicy {
                        mode: JudgementMode::AprioriTargets,
                        ..tpl.judgement.clone()
                    };
                    verdicts.push(Verdict::matcher(assess_apriori(&payload, &policy)?, now));
                } else if let Some(cached) = task.verdict_cache.get(&key) {
                    verdicts.push(cached.clone());
                } else if let Some(pending) = self.eval.judgements.pending_for(&task_id, &key) {
                    links.push((pending.id.clone(), here));
                } else if let Some(fresh) = requests
                    .iter()
                    .find(|r| r.task_id == task_id && r.key() == key)
                {
                    links.push((fresh.id.clone(), here));
                } else {
                    next_request += 1;
                    requests.push(JudgementRequest {
                        id: RequestId::new(format!("req-{next_request}")),
                        evaluation_id: self.eval.id.clone(),
                        task_id: task_id.clone(),
                        submission_id: submission_id.clone(),
                        answer_index: index,
                        payload: payload.clone(),
                        state: RequestState::Open,
                        assigned_to: None,
                        deadline: None,
                        linked: Vec::new(),
                    });
                }
                records.push(AnswerRecord {
                    index,
                    answer: Answer {
                        payload,
                        weight: wire.weight,
                    },
                    verdicts,
                });
                index += 1;
            }

            let record = AnswerSetRecord {
                task_hint: set.hint().map(str::to_owned),
                answers: records,
            };
            match parts.iter_mut().find(|p| p.task_id == task_id) {
                Some(part) => part.submission.answer_sets.push(record),
                None => {
                    let started = task.started_at.unwrap_or(now);
                    parts.push(SubmissionPart {
                        task_id: task_id.clone(),
                        submission: Submission {
                            id: submission_id.clone(),
                            team_id: team.clone(),
                            user_id: actor.user_id.clone(),
                            received_at_ms: (now - started).max(0),
                            answer_sets: vec![record],
                            dedup_key: dedup_key.map(str::to_owned),
                        },
                    });
                }
            }
        }

        self.commit(
            actor.user_id.as_str(),
            Event::SubmissionReceived {
                parts,
                requests,
                links,
            },
        )?;
        if let Some(key) = dedup_key {
            self.dedup
                .insert((team, key.to_owned()), submission_id.clone());
        }
        let receipt = self.receipt_for(&submission_id);
        self.tick()?;
        Ok(receipt)
    }

    /// Picks the task an answer set belongs to.
    fn route(&self, team: &TeamId, hint: Option<&str>) -> Result<TaskRunId, EngineError> {
        let visible = |t: &&super::state::TaskRun| t.scope.as_ref().is_none_or(|s| s == team);
        match hint {
            Some(hint) => {
                let matching: Vec<_> = self
                    .eval
                    .tasks
                    .iter()
                    .filter(visible)
                    .filter(|t| {
                        t.id.as_str() == hint
                            || self
                                .eval
                                .task_template(t)
                                .is_some_and(|tpl| tpl.name == hint)
                    })
                    .collect();
                if matching.is_empty() {
                    return Err(EngineError::UnknownTask(hint.to_owned()));
                }
                matching
                    .into_iter()
                    .find(|t| t.state == TaskState::Active)
                    .map(|t| t.id.clone())
                    .ok_or(EngineError::NoActiveTask)
            }
            None => {
                let mut active = self.eval.active_tasks_for(team);
                match (active.next(), active.next()) {
                    (Some(t), None) => Ok(t.id.clone()),
                    (None, _) => Err(EngineError::NoActiveTask),
                    _ => Err(EngineError::MalformedAnswer(
                        "several tasks are active; answer sets need taskId or taskName".into(),
                    )),
                }
            }
        }
    }

    fn receipt_for(&self, id: &SubmissionId) -> SubmissionReceipt {
        let mut answer_sets = Vec::new();
        for (task, s) in self.eval.find_submission(id) {
            for set in &s.answer_sets {
                answer_sets.push((
                    set.answers.first().map(|a| a.index).unwrap_or(0),
                    AnswerSetReceipt {
                        task_id: task.id.clone(),
                        status: AnswerSetStatus::summarize(set.answers.iter().map(|a| a.value())),
                    },
                ));
            }
        }
        answer_sets.sort_by_key(|(i, _)| *i);
        SubmissionReceipt {
            submission_id: id.clone(),
            answer_sets: answer_sets.into_iter().map(|(_, r)| r).collect(),
            replayed: false,
        }
    }

    /// Hands `judge` the next request: one they already hold, or the oldest
    /// open or expired one, which is then assigned to them.
    pub fn dequeue_next(&mut self, judge: &Actor) -> Result<Option<JudgementRequest>, EngineError> {
        require_judge(judge)?;
        self.tick()?;
        self.ensure_open()?;
        let now = self.clock.now_ms();
        let Some(request) = self.eval.judgements.next_for(&judge.user_id, now) else {
            return Ok(None);
        };
        let held = request.state == RequestState::Assigned
            && request.assigned_to.as_ref() == Some(&judge.user_id)
            && request.deadline.is_none_or(|d| now < d);
        let id = request.id.clone();
        if !held {
            self.commit(
                judge.user_id.as_str(),
                Event::JudgementAssigned {
                    request_id: id.clone(),
                    judge_id: judge.user_id.clone(),
                    deadline: now + REASSIGN_AFTER_MS,
                },
            )?;
        }
        Ok(self.eval.judgements.get(&id).cloned())
    }

    /// Records a judge's verdict for a request assigned to them.
    pub fn render_verdict(
        &mut self,
        judge: &Actor,
        request: &RequestId,
        value: VerdictValue,
    ) -> Result<Verdict, EngineError> {
        require_judge(judge)?;
        self.tick()?;
        self.ensure_open()?;
        let r = self
            .eval
            .judgements
            .get(request)
            .ok_or_else(|| EngineError::UnknownRequest(request.clone()))?;
        match r.state {
            RequestState::Judged => return Err(EngineError::AlreadyJudged(request.clone())),
            RequestState::Open => return Err(EngineError::NotAssigned(request.clone())),
            RequestState::Assigned if r.assigned_to.as_ref() != Some(&judge.user_id) => {
                return Err(EngineError::NotAssigned(request.clone()))
            }
            RequestState::Assigned => {}
        }
        let verdict = Verdict {
            value,
            source: VerdictSource::HumanJudge,
            judged_at: self.clock.now_ms(),
            judge_id: Some(judge.user_id.clone()),
        };
        self.commit(
            judge.user_id.as_str(),
            Event::VerdictRendered {
                request_id: request.clone(),
                verdict: verdict.clone(),
            },
        )?;
        self.tick()?;
        Ok(verdict)
    }

    /// Replaces the verdict in force for one answer; earlier verdicts are kept.
    pub fn override_verdict(
        &mut self,
        actor: &Actor,
        submission: &SubmissionId,
        answer_index: u32,
        value: VerdictValue,
    ) -> Result<Verdict, EngineError> {
        require_admin(actor)?;
        self.tick()?;
        self.ensure_open()?;
        let task_id = self
            .eval
            .find_submission(submission)
            .find(|(_, s)| s.answer(answer_index).is_some())
            .map(|(t, _)| t.id.clone())
            .ok_or_else(|| EngineError::UnknownAnswer(format!("{submission}#{answer_index}")))?;
        let verdict = Verdict {
            value,
            source: VerdictSource::AdminOverride,
            judged_at: self.clock.now_ms(),
            judge_id: Some(actor.user_id.clone()),
        };
        self.commit(
            actor.user_id.as_str(),
            Event::VerdictOverridden {
                answer: AnswerRef {
                    task_id,
                    submission_id: submission.clone(),
                    answer_index,
                },
                verdict: verdict.clone(),
            },
        )?;
        self.tick()?;
        Ok(verdict)
    }

    pub fn scoreboard(&self) -> Vec<ScoreboardRow> {
        scoreboard(&self.eval)
    }

    pub fn agent_view(&self, team: &TeamId) -> Result<AgentView, EngineError> {
        AgentView::build(&self.eval, team, self.clock.now_ms())
    }

    pub fn viewer_view(&self) -> ViewerView {
        ViewerView::build(&self.eval, self.clock.now_ms())
    }

    pub fn admin_view(&self) -> AdminView {
        AdminView::build(&self.eval, self.clock.now_ms())
    }

    /// The payload as a judge sees it, for a request of this evaluation.
    pub fn request_payload(&self, id: &RequestId) -> Option<&AnswerPayload> {
        self.eval.judgements.get(id).map(|r| &r.payload)
    }
}

/// Rewrites item references in targets and hints to item names, the form
/// submitted answers are stored in.
fn canonicalize_items(template: &mut EvaluationTemplate, collections: &CollectionRegistry) {
    for task in &mut template.task_templates {
        let col = task.collection_id.clone();
        let fix = |p: &mut AnswerPayload| {
            if let Some(item) = &p.item_id {
                if let Ok(found) = collections.get_item(&col, item.as_str()) {
                    p.item_id = Some(found.name.as_str().into());
                }
            }
        };
        for target in task.judgement.targets.iter_mut().flatten() {
            fix(target);
        }
        for entry in &mut task.timeline.entries {
            if let HintContent::Fragment(p) = &mut entry.payload {
                fix(p);
            }
        }
    }
}

fn require_admin(actor: &Actor) -> Result<(), EngineError> {
    if actor.is_admin() {
        Ok(())
    } else {
        Err(EngineError::NotAuthorized(format!(
            "{} is not an admin",
            actor.user_id
        )))
    }
}

fn require_judge(actor: &Actor) -> Result<(), EngineError> {
    match actor.role {
        Role::Judge | Role::Admin => Ok(()),
        _ => Err(EngineError::NotAuthorized(format!(
            "{} is not a judge",
            actor.user_id
        ))),
    }
}
