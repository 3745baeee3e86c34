//! Wire format of submissions and of the receipt returned for them.
//!
//! ```json
//! {"answerSets":[{"answers":[{"mediaItemName":"v-09679","start":15000,"end":16000}]}]}
//! ```

use serde::{Deserialize, Serialize};

use crate::ids::{SubmissionId, TaskRunId};
use crate::judgement::VerdictValue;
use crate::model::{AnswerKind, AnswerPayload, TemporalRange};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubmissionDocument {
    pub answer_sets: Vec<WireAnswerSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WireAnswerSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_name: Option<String>,
    pub answers: Vec<WireAnswer>,
}

impl WireAnswerSet {
    pub fn hint(&self) -> Option<&str> {
        self.task_id.as_deref().or(self.task_name.as_deref())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WireAnswer {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_item_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

impl WireAnswer {
    pub fn media(name: &str) -> Self {
        Self {
            media_item_name: Some(name.into()),
            ..Default::default()
        }
    }

    pub fn segment(name: &str, start: i64, end: i64) -> Self {
        Self {
            media_item_name: Some(name.into()),
            start: Some(start),
            end: Some(end),
            ..Default::default()
        }
    }

    pub fn text(text: &str) -> Self {
        Self {
            text: Some(text.into()),
            ..Default::default()
        }
    }

    /// Converts to a payload without resolving the item reference.
    pub fn to_payload(&self) -> Result<AnswerPayload, String> {
        if let Some(w) = self.weight {
            if !(0.0..=1.0).contains(&w) {
                return Err(format!("weight {w} outside [0, 1]"));
            }
        }
        match (&self.text, &self.media_item_name, self.start, self.end) {
            (Some(text), None, None, None) => Ok(AnswerPayload::text(text.clone())),
            (None, Some(item), None, None) => Ok(AnswerPayload::whole_item(item.as_str())),
            (None, Some(item), Some(start), Some(end)) => {
                let range = TemporalRange::new(start, end)
                    .ok_or_else(|| format!("invalid segment {start}..{end}"))?;
                Ok(AnswerPayload {
                    kind: AnswerKind::TemporalSegment,
                    item_id: Some(item.as_str().into()),
                    range: Some(range),
                    text: None,
                })
            }
            (None, None, _, _) => Err("answer needs either text or mediaItemName".into()),
            (Some(_), Some(_), _, _) => {
                Err("answer cannot carry both text and mediaItemName".into())
            }
            (Some(_), None, _, _) => Err("text answers cannot carry start/end".into()),
            (None, Some(_), _, _) => Err("segments need both start and end".into()),
        }
    }
}

impl From<&AnswerPayload> for WireAnswer {
    fn from(p: &AnswerPayload) -> Self {
        Self {
            text: p.text.clone(),
            media_item_name: p.item_id.as_ref().map(|i| i.to_string()),
            start: p.range.map(|r| r.start_ms),
            end: p.range.map(|r| r.end_ms),
            weight: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AnswerSetStatus {
    Correct,
    Wrong,
    Undecidable,
    /// Waiting for an assessor.
    Indeterminate,
}

impl AnswerSetStatus {
    /// Summarizes the verdicts of one answer set. Any correct or positively
    /// graded answer makes the set correct; otherwise pending answers make it
    /// indeterminate.
    pub fn summarize(values: impl IntoIterator<Item = Option<VerdictValue>>) -> Self {
        let (mut correct, mut pending, mut wrong) = (false, false, false);
        for v in values {
            match v {
                None => pending = true,
                Some(VerdictValue::Correct) => correct = true,
                Some(VerdictValue::Graded(g)) if g > 0.0 => correct = true,
                Some(VerdictValue::Graded(_)) | Some(VerdictValue::Wrong) => wrong = true,
                Some(VerdictValue::Undecidable) => {}
            }
        }
        if correct {
            Self::Correct
        } else if pending {
            Self::Indeterminate
        } else if wrong {
            Self::Wrong
        } else {
            Self::Undecidable
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnswerSetReceipt {
    pub task_id: TaskRunId,
    pub status: AnswerSetStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubmissionReceipt {
    pub submission_id: SubmissionId,
    pub answer_sets: Vec<AnswerSetReceipt>,
    /// True when the dedup key matched an earlier submission and nothing new
    /// was stored.
    #[serde(default)]
    pub replayed: bool,
}
