//! Definition-phase entities: collections, answer payloads, hint timelines,
//! task and evaluation templates, teams and users.
//!
//! Everything here is plain immutable data. The JSON interchange format for
//! templates is the serde representation of [`EvaluationTemplate`].

mod timeline;
mod validate;

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::ids::{CollectionId, ItemId, TaskTemplateId, TeamId, TemplateId, UserId};
use crate::scoring::ScorerSpec;

pub use timeline::{
    desc_at, HintChannel, HintChannelEntry, HintContent, HintTimeline, ResourceRef,
};
pub use validate::{validate_template, ValidationReport, Violation};

/// A test collection: the fixed set of media items an evaluation searches over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MediaCollection {
    pub id: CollectionId,
    pub name: String,
    pub base_path: PathBuf,
    pub items: Vec<MediaItem>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum MediaKind {
    Image,
    Video,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MediaItem {
    pub id: ItemId,
    pub collection_id: CollectionId,
    pub name: String,
    pub kind: MediaKind,
    pub duration_ms: u64,
    /// Path relative to the collection's base path.
    pub location: String,
    /// Set when the item is a video whose duration could not be read from
    /// its container; `duration_ms` is then 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub duration_unknown: bool,
}

impl MediaItem {
    pub fn is_valid_name(name: &str) -> bool {
        !name.is_empty()
            && name
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
    }
}

/// Closed millisecond interval `[start_ms, end_ms]` on a video timeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TemporalRange {
    pub start_ms: i64,
    pub end_ms: i64,
}

impl TemporalRange {
    pub fn new(start_ms: i64, end_ms: i64) -> Option<Self> {
        let range = Self { start_ms, end_ms };
        range.is_valid().then_some(range)
    }

    pub fn is_valid(&self) -> bool {
        self.start_ms >= 0 && self.start_ms <= self.end_ms
    }
}

/// Returns true iff the two ranges share interior, or a zero-length range
/// lies within the other.
pub fn range_overlap(a: &TemporalRange, b: &TemporalRange) -> bool {
    let lo = a.start_ms.max(b.start_ms);
    let hi = a.end_ms.min(b.end_ms);
    if lo < hi {
        return true;
    }
    // zero-length ranges behave as points
    let point_in = |p: &TemporalRange, r: &TemporalRange| {
        p.start_ms == p.end_ms && r.start_ms <= p.start_ms && p.start_ms <= r.end_ms
    };
    point_in(a, b) || point_in(b, a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AnswerKind {
    WholeItem,
    TemporalSegment,
    Text,
}

/// A fragment of (or a derivation from) the collection.
///
/// `item_id` holds an item reference that resolves through
/// [`crate::collection::CollectionRegistry::get_item`]; evaluations store the
/// resolved item name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnswerPayload {
    pub kind: AnswerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_id: Option<ItemId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<TemporalRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl AnswerPayload {
    pub fn whole_item(item: impl Into<ItemId>) -> Self {
        Self {
            kind: AnswerKind::WholeItem,
            item_id: Some(item.into()),
            range: None,
            text: None,
        }
    }

    pub fn segment(item: impl Into<ItemId>, start_ms: i64, end_ms: i64) -> Self {
        Self {
            kind: AnswerKind::TemporalSegment,
            item_id: Some(item.into()),
            range: Some(TemporalRange { start_ms, end_ms }),
            text: None,
        }
    }

    pub fn text(text: impl Into<String>) -> Self {
        Self {
            kind: AnswerKind::Text,
            item_id: None,
            range: None,
            text: Some(text.into()),
        }
    }

    pub fn is_well_formed(&self) -> bool {
        match self.kind {
            AnswerKind::WholeItem => {
                self.item_id.is_some() && self.range.is_none() && self.text.is_none()
            }
            AnswerKind::TemporalSegment => {
                self.item_id.is_some()
                    && self.range.is_some_and(|r| r.is_valid())
                    && self.text.is_none()
            }
            AnswerKind::Text => {
                self.text.is_some() && self.item_id.is_none() && self.range.is_none()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum JudgementMode {
    AprioriTargets,
    AposterioriHuman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ExpectedAnswerKind {
    ExistingFragment,
    DerivedText,
}

impl ExpectedAnswerKind {
    pub fn accepts(self, kind: AnswerKind) -> bool {
        match self {
            Self::ExistingFragment => kind != AnswerKind::Text,
            Self::DerivedText => kind == AnswerKind::Text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JudgementPolicy {
    pub mode: JudgementMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<AnswerPayload>>,
    pub expected_answer_kind: ExpectedAnswerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskType {
    pub name: String,
    pub scorer: ScorerSpec,
    pub judgement_mode: JudgementMode,
    pub duration_default_ms: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_answers_per_agent: Option<u32>,
    #[serde(default)]
    pub end_on_all_correct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskGroup {
    pub name: String,
    pub type_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskTemplate {
    pub id: TaskTemplateId,
    pub name: String,
    pub group_name: String,
    pub timeline: HintTimeline,
    pub judgement: JudgementPolicy,
    pub duration_ms: i64,
    pub collection_id: CollectionId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TeamDef {
    pub id: TeamId,
    pub name: String,
    #[serde(default)]
    pub color: String,
    pub user_ids: BTreeSet<UserId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TeamGroup {
    pub name: String,
    pub team_ids: BTreeSet<TeamId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvaluationTemplate {
    pub id: TemplateId,
    pub name: String,
    pub task_templates: Vec<TaskTemplate>,
    pub task_types: Vec<TaskType>,
    pub task_groups: Vec<TaskGroup>,
    pub teams: Vec<TeamDef>,
    #[serde(default)]
    pub team_groups: Vec<TeamGroup>,
}

impl EvaluationTemplate {
    pub fn task_template(&self, id: &TaskTemplateId) -> Option<&TaskTemplate> {
        self.task_templates.iter().find(|t| &t.id == id)
    }

    pub fn group(&self, name: &str) -> Option<&TaskGroup> {
        self.task_groups.iter().find(|g| g.name == name)
    }

    pub fn task_type(&self, name: &str) -> Option<&TaskType> {
        self.task_types.iter().find(|t| t.name == name)
    }

    /// The task type a task template inherits its attributes from.
    pub fn type_of(&self, task: &TaskTemplate) -> Option<&TaskType> {
        self.group(&task.group_name)
            .and_then(|g| self.task_type(&g.type_name))
    }

    pub fn team(&self, id: &TeamId) -> Option<&TeamDef> {
        self.teams.iter().find(|t| &t.id == id)
    }

    pub fn team_of_user(&self, user: &UserId) -> Option<&TeamDef> {
        self.teams.iter().find(|t| t.user_ids.contains(user))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Role {
    Admin,
    Participant,
    Judge,
    Viewer,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Admin => "admin",
            Role::Participant => "participant",
            Role::Judge => "judge",
            Role::Viewer => "viewer",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UserDef {
    pub id: UserId,
    pub username: String,
    pub password_hash: String,
    pub role: Role,
}

/// The authenticated principal behind a command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Actor {
    pub user_id: UserId,
    pub role: Role,
}

impl Actor {
    pub fn new(user_id: impl Into<UserId>, role: Role) -> Self {
        Self {
            user_id: user_id.into(),
            role,
        }
    }

    pub fn system() -> Self {
        Self::new("system", Role::Admin)
    }

    pub fn is_admin(&self) -> bool {
        self.role == Role::Admin
    }
}
