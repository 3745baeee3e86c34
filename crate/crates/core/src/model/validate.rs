use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    AnswerKind, AnswerPayload, EvaluationTemplate, ExpectedAnswerKind, HintChannel, HintContent,
    JudgementMode, TaskTemplate,
};
use crate::collection::CollectionRegistry;
use crate::ids::{CollectionId, TeamId, UserId};

/// One reason a template cannot be instantiated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "camelCase")]
pub enum Violation {
    EmptyTemplate,
    NoTeams,
    DuplicateTaskName {
        name: String,
    },
    NonPositiveDuration {
        task: String,
    },
    UnresolvedGroup {
        task: String,
        group: String,
    },
    UnresolvedType {
        group: String,
        type_name: String,
    },
    InvalidTaskType {
        type_name: String,
        reason: String,
    },
    UnknownCollection {
        task: String,
        collection: CollectionId,
    },
    DanglingItem {
        task: String,
        item: String,
    },
    ChannelOverlap {
        task: String,
        channel: HintChannel,
    },
    InvalidHint {
        task: String,
        index: usize,
        reason: String,
    },
    InvalidPolicy {
        task: String,
        reason: String,
    },
    EmptyTeam {
        team: TeamId,
    },
    DuplicateTeamName {
        name: String,
    },
    UserInMultipleTeams {
        user: UserId,
    },
    UnknownTeamInGroup {
        group: String,
        team: TeamId,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyTemplate => write!(f, "emptyTemplate"),
            Violation::NoTeams => write!(f, "noTeams"),
            Violation::DuplicateTaskName { name } => write!(f, "duplicateTaskName({name})"),
            Violation::NonPositiveDuration { task } => write!(f, "nonPositiveDuration({task})"),
            Violation::UnresolvedGroup { task, group } => {
                write!(f, "unresolvedGroup({group}) in task {task}")
            }
            Violation::UnresolvedType { group, type_name } => {
                write!(f, "unresolvedType({type_name}) in group {group}")
            }
            Violation::InvalidTaskType { type_name, reason } => {
                write!(f, "invalidTaskType({type_name}): {reason}")
            }
            Violation::UnknownCollection { task, collection } => {
                write!(f, "unknownCollection({collection}) in task {task}")
            }
            Violation::DanglingItem { task, item } => {
                write!(f, "danglingItem({item}) in task {task}")
            }
            Violation::ChannelOverlap { task, channel } => {
                write!(f, "channelOverlap({channel}) in task {task}")
            }
            Violation::InvalidHint {
                task,
                index,
                reason,
            } => {
                write!(f, "invalidHint(#{index}) in task {task}: {reason}")
            }
            Violation::InvalidPolicy { task, reason } => {
                write!(f, "invalidPolicy in task {task}: {reason}")
            }
            Violation::EmptyTeam { team } => write!(f, "emptyTeam({team})"),
            Violation::DuplicateTeamName { name } => write!(f, "duplicateTeamName({name})"),
            Violation::UserInMultipleTeams { user } => write!(f, "userInMultipleTeams({user})"),
            Violation::UnknownTeamInGroup { group, team } => {
                write!(f, "unknownTeamInGroup({team}) in group {group}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, v: &Violation) -> bool {
        self.violations.contains(v)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks everything `create_evaluation` relies on. Violations are data: an
/// empty report means the template can be instantiated.
pub fn validate_template(
    tpl: &EvaluationTemplate,
    collections: &CollectionRegistry,
) -> ValidationReport {
    let mut out = Vec::new();

    if tpl.task_templates.is_empty() {
        out.push(Violation::EmptyTemplate);
    }
    if tpl.teams.is_empty() {
        out.push(Violation::NoTeams);
    }

    for ty in &tpl.task_types {
        if ty.duration_default_ms <= 0 {
            out.push(Violation::InvalidTaskType {
                type_name: ty.name.clone(),
                reason: "durationDefaultMs must be positive".into(),
            });
        }
        if let Err(reason) = ty.scorer.check() {
            out.push(Violation::InvalidTaskType {
                type_name: ty.name.clone(),
                reason,
            });
        }
    }
    for group in &tpl.task_groups {
        if tpl.task_type(&group.type_name).is_none() {
            out.push(Violation::UnresolvedType {
                group: group.name.clone(),
                type_name: group.type_name.clone(),
            });
        }
    }

    let mut names = BTreeSet::new();
    for task in &tpl.task_templates {
        if !names.insert(task.name.as_str()) {
            out.push(Violation::DuplicateTaskName {
                name: task.name.clone(),
            });
        }
        check_task(tpl, task, collections, &mut out);
    }

    let mut team_names = BTreeSet::new();
    let mut user_team: BTreeMap<&UserId, &TeamId> = BTreeMap::new();
    for team in &tpl.teams {
        if team.user_ids.is_empty() {
            out.push(Violation::EmptyTeam {
                team: team.id.clone(),
            });
        }
        if !team_names.insert(team.name.as_str()) {
            out.push(Violation::DuplicateTeamName {
                name: team.name.clone(),
            });
        }
        for user in &team.user_ids {
            if user_team.insert(user, &team.id).is_some() {
                out.push(Violation::UserInMultipleTeams { user: user.clone() });
            }
        }
    }
    for group in &tpl.team_groups {
        for team in &group.team_ids {
            if tpl.team(team).is_none() {
                out.push(Violation::UnknownTeamInGroup {
                    group: group.name.clone(),
                    team: team.clone(),
                });
            }
        }
    }

    ValidationReport { violations: out }
}

fn check_task(
    tpl: &EvaluationTemplate,
    task: &TaskTemplate,
    collections: &CollectionRegistry,
    out: &mut Vec<Violation>,
) {
    let name = || task.name.clone();

    if task.duration_ms <= 0 {
        out.push(Violation::NonPositiveDuration { task: name() });
    }
    let ty = match tpl.group(&task.group_name) {
        None => {
            out.push(Violation::UnresolvedGroup {
                task: name(),
                group: task.group_name.clone(),
            });
            None
        }
        Some(group) => tpl.task_type(&group.type_name),
    };

    let collection_known = collections.get(&task.collection_id).is_some();
    if !collection_known {
        out.push(Violation::UnknownCollection {
            task: name(),
            collection: task.collection_id.clone(),
        });
    }
    let check_item = |payload: &AnswerPayload, out: &mut Vec<Violation>| {
        if let Some(item) = &payload.item_id {
            if collection_known
                && collections
                    .get_item(&task.collection_id, item.as_str())
                    .is_err()
            {
                out.push(Violation::DanglingItem {
                    task: name(),
                    item: item.to_string(),
                });
            }
        }
    };

    for (index, entry) in task.timeline.entries.iter().enumerate() {
        if entry
            .active_until_ms
            .is_some_and(|u| u <= entry.active_from_ms)
        {
            out.push(Violation::InvalidHint {
                task: name(),
                index,
                reason: "activeUntilMs must be after activeFromMs".into(),
            });
        }
        if entry.active_from_ms < 0 {
            out.push(Violation::InvalidHint {
                task: name(),
                index,
                reason: "activeFromMs must not be negative".into(),
            });
        }
        if !entry.payload.fits(entry.channel) {
            out.push(Violation::InvalidHint {
                task: name(),
                index,
                reason: format!("payload does not fit the {} channel", entry.channel),
            });
        }
        if let HintContent::Fragment(p) = &entry.payload {
            if !p.is_well_formed() {
                out.push(Violation::InvalidHint {
                    task: name(),
                    index,
                    reason: "malformed fragment".into(),
                });
            }
            check_item(p, out);
        }
    }
    for channel in task.timeline.overlapping_channels() {
        out.push(Violation::ChannelOverlap {
            task: name(),
            channel,
        });
    }

    let policy = &task.judgement;
    let invalid = |reason: &str| Violation::InvalidPolicy {
        task: name(),
        reason: reason.into(),
    };
    if let Some(ty) = ty {
        if ty.judgement_mode != policy.mode {
            out.push(invalid("judgement mode differs from the task type"));
        }
    }
    let targets = policy.targets.as_deref().unwrap_or_default();
    match policy.mode {
        JudgementMode::AprioriTargets => {
            if targets.is_empty() {
                out.push(invalid("a-priori judgement needs at least one target"));
            }
            if policy.expected_answer_kind == ExpectedAnswerKind::DerivedText
                && targets.iter().any(|t| t.kind != AnswerKind::Text)
            {
                out.push(invalid("derived-text tasks need textual targets"));
            }
            if policy.expected_answer_kind == ExpectedAnswerKind::ExistingFragment
                && targets.iter().any(|t| t.kind == AnswerKind::Text)
            {
                out.push(invalid("fragment tasks cannot have textual targets"));
            }
        }
        JudgementMode::AposterioriHuman => {}
    }
    for target in targets {
        if !target.is_well_formed() {
            out.push(invalid("malformed target"));
        }
        check_item(target, out);
    }
}
