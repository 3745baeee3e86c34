use super::state::{EndReason, TaskRun, TaskState};
use crate::ids::TeamId;
use crate::model::TaskType;

/// Decides whether an active task has to end at `now`.
///
/// A task ends when its duration has elapsed, when every required team holds a
/// correct verdict and the type ends on all-correct, or when every required
/// team has used up its answer allowance.
pub fn check_end_conditions(
    task: &TaskRun,
    ty: &TaskType,
    required: &[TeamId],
    now: i64,
) -> Option<EndReason> {
    if task.state != TaskState::Active {
        return None;
    }
    let started = task.started_at?;
    if now - started >= task.duration_ms {
        return Some(EndReason::Timeout);
    }
    if required.is_empty() {
        return None;
    }
    if ty.end_on_all_correct
        && required.iter().all(|team| {
            task.answers_of(team)
                .any(|(_, a)| a.value().is_some_and(|v| v.is_correct()))
        })
    {
        return Some(EndReason::AllCorrect);
    }
    if let Some(max) = ty.max_answers_per_agent {
        if required
            .iter()
            .all(|team| task.answers_of(team).count() >= max as usize)
        {
            return Some(EndReason::AnswersExhausted);
        }
    }
    None
}
