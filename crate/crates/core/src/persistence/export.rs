//! Result export: per-task score table and the complete JSON record.

use serde::{Deserialize, Serialize};

use super::PersistenceError;
use crate::lifecycle::{Evaluation, EventRecord};
use crate::scoring::{score_lines, scoreboard, ScoreboardRow};

const EXPORT_FORMAT: &str = "evalkit-export/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ExportFormat {
    ScoresCsv,
    FullJson,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scoresCsv" | "csv" => Ok(Self::ScoresCsv),
            "fullJson" | "json" => Ok(Self::FullJson),
            other => Err(format!("unknown export format {other}")),
        }
    }
}

/// Template, tasks, submissions, verdicts and the audit trail of one
/// evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FullExport {
    pub format: String,
    pub evaluation: Evaluation,
    pub scoreboard: Vec<ScoreboardRow>,
    pub events: Vec<EventRecord>,
}

pub fn export_full_json(
    eval: &Evaluation,
    events: &[EventRecord],
) -> Result<String, PersistenceError> {
    let doc = FullExport {
        format: EXPORT_FORMAT.into(),
        evaluation: eval.clone(),
        scoreboard: scoreboard(eval),
        events: events.to_vec(),
    };
    serde_json::to_string_pretty(&doc).map_err(|e| PersistenceError::Storage(e.into()))
}

/// Reads a full export back, replaying its events and checking that they
/// reproduce the stored state.
pub fn import_full_json(text: &str) -> Result<FullExport, PersistenceError> {
    let doc: FullExport = serde_json::from_str(text)
        .map_err(|e| PersistenceError::ImportMismatch(format!("unreadable export: {e}")))?;
    if doc.format != EXPORT_FORMAT {
        return Err(PersistenceError::ImportMismatch(format!(
            "unsupported format {}",
            doc.format
        )));
    }
    let replayed = super::replay(&doc.events, None)?;
    if replayed != doc.evaluation {
        return Err(PersistenceError::ImportMismatch(
            "events do not reproduce the exported state".into(),
        ));
    }
    Ok(doc)
}

/// One row per (team, task) with columns evaluation, team, group, task, value.
pub fn export_scores_csv(eval: &Evaluation) -> Result<String, PersistenceError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| PersistenceError::Storage(std::io::Error::other(e.to_string()).into());
    w.write_record(["evaluation", "team", "group", "task", "value"])
        .map_err(io)?;
    for line in score_lines(eval) {
        let team = eval
            .template
            .team(&line.team_id)
            .map(|t| t.name.as_str())
            .unwrap_or(line.team_id.as_str());
        w.write_record([
            eval.id.as_str(),
            team,
            &line.group,
            &line.task_name,
            &line.value.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| PersistenceError::Storage(std::io::Error::other(e.to_string()).into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
