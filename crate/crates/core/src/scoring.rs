//! Task metrics, evaluation aggregation and the live scoreboard.
//!
//! Scores are always derived from verdicts and never stored, so an
//! overridden verdict shows up in the next scoreboard read.
//!
//! Counting rules shared by all scorers: the scoring unit is an answer, timed
//! by its submission; undecidable and still-pending verdicts count as neither
//! correct nor wrong.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{TaskRunId, TeamId};
use crate::judgement::{payload_unit, VerdictValue};
use crate::lifecycle::{Evaluation, EvaluationMode, TaskRun};

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("task is scored with {actual:?}, not {expected:?}")]
    ScorerMismatch {
        expected: ScorerKind,
        actual: ScorerKind,
    },
    #[error("recall needs the total number of relevant units")]
    MissingRelevantTotal,
    #[error("unknown task {0}")]
    UnknownTask(TaskRunId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ScorerKind {
    KisTimePenalized,
    AvsPooled,
    RawCount,
}

fn default_max_score() -> f64 {
    100.0
}
fn default_time_fraction() -> f64 {
    0.5
}
fn default_wrong_penalty() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScorerSpec {
    pub kind: ScorerKind,
    #[serde(default = "default_max_score")]
    pub max_score: f64,
    #[serde(default = "default_time_fraction")]
    pub time_fraction: f64,
    #[serde(default = "default_wrong_penalty")]
    pub wrong_penalty: f64,
}

impl Default for ScorerSpec {
    fn default() -> Self {
        Self::new(ScorerKind::KisTimePenalized)
    }
}

impl ScorerSpec {
    pub fn new(kind: ScorerKind) -> Self {
        Self {
            kind,
            max_score: default_max_score(),
            time_fraction: default_time_fraction(),
            wrong_penalty: default_wrong_penalty(),
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.max_score.is_nan() || self.max_score <= 0.0 {
            return Err("maxScore must be positive".into());
        }
        if self.wrong_penalty.is_nan() || self.wrong_penalty < 0.0 {
            return Err("wrongPenalty must not be negative".into());
        }
        if !(0.0..=1.0).contains(&self.time_fraction) {
            return Err("timeFraction must lie in [0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoreComponents {
    pub correct: f64,
    pub wrong: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solved_at_ms: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_bonus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooled_recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskScore {
    pub team_id: TeamId,
    pub value: f64,
    pub components: ScoreComponents,
}

/// One judged answer as seen by a scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredAnswer {
    pub received_at_ms: i64,
    /// Item or normalized text the answer is about.
    pub unit: String,
    pub verdict: Option<VerdictValue>,
}

/// Known-item search: a time-decaying reward for the first correct answer,
/// minus a fixed penalty per wrong answer before it, floored at 0.
pub fn kis_value(
    spec: &ScorerSpec,
    duration_ms: i64,
    answers: &[ScoredAnswer],
) -> (f64, ScoreComponents) {
    let mut wrong = 0u32;
    for a in answers {
        match a.verdict {
            Some(VerdictValue::Correct) => {
                let ratio = if duration_ms > 0 {
                    (a.received_at_ms as f64 / duration_ms as f64).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                let base = spec.max_score * (1.0 - spec.time_fraction);
                let time_bonus = spec.max_score * spec.time_fraction * (1.0 - ratio);
                let penalty = spec.wrong_penalty * wrong as f64;
                let value = (base + time_bonus - penalty).max(0.0);
                return (
                    value,
                    ScoreComponents {
                        correct: 1.0,
                        wrong: wrong as f64,
                        solved_at_ms: Some(a.received_at_ms),
                        time_bonus: Some(time_bonus),
                        penalty: Some(penalty),
                        pooled_recall: None,
                    },
                );
            }
            Some(VerdictValue::Wrong) => wrong += 1,
            _ => {}
        }
    }
    (
        0.0,
        ScoreComponents {
            wrong: wrong as f64,
            ..Default::default()
        },
    )
}

/// Ad-hoc search: pooled recall times a precision-like factor in which a
/// wrong answer weighs half a correct one. Graded verdicts count `v` towards
/// correct and `1 - v` towards wrong.
pub fn avs_value(
    spec: &ScorerSpec,
    answers: &[ScoredAnswer],
    pool_size: usize,
) -> (f64, ScoreComponents) {
    let mut correct = 0.0;
    let mut wrong = 0.0;
    let mut found = BTreeSet::new();
    for a in answers {
        match a.verdict {
            Some(VerdictValue::Correct) => {
                correct += 1.0;
                found.insert(a.unit.as_str());
            }
            Some(VerdictValue::Graded(v)) => {
                correct += v;
                wrong += 1.0 - v;
            }
            Some(VerdictValue::Wrong) => wrong += 1.0,
            _ => {}
        }
    }
    let mut components = ScoreComponents {
        correct,
        wrong,
        ..Default::default()
    };
    if pool_size == 0 || correct <= 0.0 {
        return (0.0, components);
    }
    let recall = found.len() as f64 / pool_size as f64;
    components.pooled_recall = Some(recall);
    let value = spec.max_score * recall * (correct / (correct + wrong / 2.0));
    (value.max(0.0), components)
}

/// Sum of verdict scores (correct = 1, graded = v).
pub fn raw_count_value(answers: &[ScoredAnswer]) -> (f64, ScoreComponents) {
    let mut correct = 0.0;
    let mut wrong = 0.0;
    for a in answers {
        if let Some(s) = a.verdict.and_then(|v| v.score()) {
            correct += s;
            wrong += 1.0 - s;
        }
    }
    (
        correct,
        ScoreComponents {
            correct,
            wrong,
            ..Default::default()
        },
    )
}

fn scored_answers(task: &TaskRun, team: &TeamId) -> Vec<ScoredAnswer> {
    task.answers_of(team)
        .map(|(at, a)| ScoredAnswer {
            received_at_ms: at,
            unit: payload_unit(&a.answer.payload),
            verdict: a.value(),
        })
        .collect()
}

/// Runs whose correct answers form the recall pool of `task`: the run itself,
/// or in asynchronous mode every run of the same template.
fn pool_runs<'a>(eval: &'a Evaluation, task: &'a TaskRun) -> Vec<&'a TaskRun> {
    match eval.mode {
        EvaluationMode::InteractiveAsync => eval
            .tasks
            .iter()
            .filter(|t| t.template_ref == task.template_ref)
            .collect(),
        _ => vec![task],
    }
}

fn pool_size(runs: &[&TaskRun]) -> usize {
    runs.iter()
        .flat_map(|t| t.submissions.iter())
        .flat_map(|s| s.answers())
        .filter(|a| a.value().is_some_and(|v| v.is_correct()))
        .map(|a| payload_unit(&a.answer.payload))
        .collect::<BTreeSet<_>>()
        .len()
}

fn scorer_of(eval: &Evaluation, task: &TaskRun) -> ScorerSpec {
    eval.task_type(task)
        .map(|t| t.scorer.clone())
        .unwrap_or_default()
}

/// Scores one team on one task with the task type's scorer.
pub fn score_task(eval: &Evaluation, task: &TaskRun, team: &TeamId) -> TaskScore {
    let spec = scorer_of(eval, task);
    let answers = scored_answers(task, team);
    let (value, components) = match spec.kind {
        ScorerKind::KisTimePenalized => kis_value(&spec, task.duration_ms, &answers),
        ScorerKind::AvsPooled => avs_value(&spec, &answers, pool_size(&pool_runs(eval, task))),
        ScorerKind::RawCount => raw_count_value(&answers),
    };
    TaskScore {
        team_id: team.clone(),
        value,
        components,
    }
}

fn expect_kind(
    eval: &Evaluation,
    task: &TaskRun,
    expected: ScorerKind,
) -> Result<(), ScoringError> {
    let actual = scorer_of(eval, task).kind;
    if actual == expected {
        Ok(())
    } else {
        Err(ScoringError::ScorerMismatch { expected, actual })
    }
}

pub fn score_kis(
    eval: &Evaluation,
    task: &TaskRun,
    team: &TeamId,
) -> Result<TaskScore, ScoringError> {
    expect_kind(eval, task, ScorerKind::KisTimePenalized)?;
    Ok(score_task(eval, task, team))
}

pub fn score_avs(
    eval: &Evaluation,
    task: &TaskRun,
    team: &TeamId,
) -> Result<TaskScore, ScoringError> {
    expect_kind(eval, task, ScorerKind::AvsPooled)?;
    Ok(score_task(eval, task, team))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PrecisionRecall {
    /// Absent when nothing was judged.
    pub precision: Option<f64>,
    pub recall: f64,
}

/// Correct over judged answers; undecidable and pending answers are not
/// judged. `None` when nothing was judged.
pub fn precision(answers: &[ScoredAnswer]) -> Option<f64> {
    let judged = answers
        .iter()
        .filter(|a| a.verdict.and_then(|v| v.score()).is_some())
        .count();
    let correct = answers
        .iter()
        .filter(|a| a.verdict.is_some_and(|v| v.is_correct()))
        .count();
    (judged > 0).then(|| correct as f64 / judged as f64)
}

/// Classical precision and recall. Recall counts distinct correct units
/// against the size of the complete relevant set.
pub fn precision_recall(
    answers: &[ScoredAnswer],
    relevant_total: Option<usize>,
) -> Result<PrecisionRecall, ScoringError> {
    let total = relevant_total.ok_or(ScoringError::MissingRelevantTotal)?;
    let distinct = answers
        .iter()
        .filter(|a| a.verdict.is_some_and(|v| v.is_correct()))
        .map(|a| a.unit.as_str())
        .collect::<BTreeSet<_>>()
        .len();
    Ok(PrecisionRecall {
        precision: precision(answers),
        recall: if total == 0 {
            0.0
        } else {
            distinct as f64 / total as f64
        },
    })
}

/// Tasks that count for `team`: every run in synchronous and non-interactive
/// evaluations (unplayed ones score 0), only the team's own runs in
/// asynchronous ones.
pub fn tasks_for<'a>(
    eval: &'a Evaluation,
    team: &'a TeamId,
) -> impl Iterator<Item = &'a TaskRun> + 'a {
    eval.tasks.iter().filter(move |t| match eval.mode {
        EvaluationMode::InteractiveAsync => t.scope.as_ref() == Some(team),
        _ => t.scope.is_none(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoreboardRow {
    pub team_id: TeamId,
    pub team_name: String,
    pub per_group_scores: BTreeMap<String, f64>,
    pub total: f64,
    pub rank: u32,
}

/// Group score = mean of the team's task scores in that group; total = sum
/// of group scores. The returned row has rank 0 until ranked by
/// [`scoreboard`].
pub fn aggregate_evaluation(eval: &Evaluation, team: &TeamId) -> ScoreboardRow {
    let mut sums: BTreeMap<String, (f64, u32)> = BTreeMap::new();
    for task in tasks_for(eval, team) {
        let Some(tpl) = eval.task_template(task) else {
            continue;
        };
        let score = score_task(eval, task, team).value;
        let slot = sums.entry(tpl.group_name.clone()).or_insert((0.0, 0));
        slot.0 += score;
        slot.1 += 1;
    }
    let per_group_scores: BTreeMap<String, f64> = sums
        .into_iter()
        .map(|(g, (sum, n))| (g, sum / n as f64))
        .collect();
    let total = per_group_scores.values().sum();
    ScoreboardRow {
        team_id: team.clone(),
        team_name: eval
            .template
            .team(team)
            .map(|t| t.name.clone())
            .unwrap_or_else(|| team.to_string()),
        per_group_scores,
        total,
        rank: 0,
    }
}

/// Totals closer than this share a rank.
pub const RANK_TIE_EPSILON: f64 = 1e-9;

/// One row per team, by total descending (ties by team name), with
/// competition ranking: tied totals share a rank and the next rank skips.
pub fn scoreboard(eval: &Evaluation) -> Vec<ScoreboardRow> {
    let mut rows: Vec<ScoreboardRow> = eval
        .team_ids()
        .map(|team| aggregate_evaluation(eval, team))
        .collect();
    rank_rows(&mut rows);
    rows
}

pub fn rank_rows(rows: &mut [ScoreboardRow]) {
    rows.sort_by(|a, b| {
        b.total
            .total_cmp(&a.total)
            .then_with(|| a.team_name.cmp(&b.team_name))
    });
    for i in 0..rows.len() {
        rows[i].rank = if i > 0 && (rows[i - 1].total - rows[i].total).abs() < RANK_TIE_EPSILON {
            rows[i - 1].rank
        } else {
            i as u32 + 1
        };
    }
}

/// One row per (team, task) that counts for that team.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoreLine {
    pub team_id: TeamId,
    pub group: String,
    pub task_id: TaskRunId,
    pub task_name: String,
    pub value: f64,
}

pub fn score_lines(eval: &Evaluation) -> Vec<ScoreLine> {
    let mut out = Vec::new();
    for team in eval.team_ids() {
        for task in tasks_for(eval, team) {
            let Some(tpl) = eval.task_template(task) else {
                continue;
            };
            out.push(ScoreLine {
                team_id: team.clone(),
                group: tpl.group_name.clone(),
                task_id: task.id.clone(),
                task_name: tpl.name.clone(),
                value: score_task(eval, task, team).value,
            });
        }
    }
    out
}
