//! Small fixture templates shared by unit and integration tests.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::clock::VirtualClock;
use crate::collection::{collection_id_for, item_id_for, CollectionRegistry};
use crate::ids::CollectionId;
use crate::lifecycle::{EvaluationMode, EvaluationRuntime};
use crate::model::{
    Actor, AnswerPayload, EvaluationTemplate, ExpectedAnswerKind, HintChannel, HintChannelEntry,
    HintContent, HintTimeline, JudgementMode, JudgementPolicy, MediaCollection, MediaItem,
    MediaKind, ResourceRef, Role, TaskGroup, TaskTemplate, TaskType, TeamDef,
};
use crate::persistence::MemoryLog;
use crate::scoring::{ScorerKind, ScorerSpec};

pub const COLLECTION: &str = "vbs";
pub const TASK_MS: i64 = 300_000;

pub fn collection_id() -> CollectionId {
    collection_id_for(COLLECTION)
}

/// An in-memory collection of twenty videos `v-00000`..`v-00019`, plus
/// `v-09679`, and an image `img-1`. Nothing exists on disk.
pub fn collection() -> MediaCollection {
    let id = collection_id();
    let video = |name: String| MediaItem {
        id: item_id_for(&id, &format!("{name}.mp4")),
        collection_id: id.clone(),
        location: format!("{name}.mp4"),
        name,
        kind: MediaKind::Video,
        duration_ms: 600_000,
        duration_unknown: false,
    };
    let mut items: Vec<MediaItem> = (0..20).map(|i| video(format!("v-{i:05}"))).collect();
    items.push(video("v-09679".into()));
    items.push(MediaItem {
        id: item_id_for(&id, "img-1.png"),
        collection_id: id.clone(),
        name: "img-1".into(),
        kind: MediaKind::Image,
        duration_ms: 0,
        location: "img-1.png".into(),
        duration_unknown: false,
    });
    MediaCollection {
        id,
        name: COLLECTION.into(),
        base_path: "/nonexistent".into(),
        items,
    }
}

pub fn registry() -> CollectionRegistry {
    let mut reg = CollectionRegistry::new();
    reg.insert(collection());
    reg
}

pub fn text_hint(from: i64, until: Option<i64>, text: &str) -> HintChannelEntry {
    HintChannelEntry {
        channel: HintChannel::Text,
        active_from_ms: from,
        active_until_ms: until,
        payload: HintContent::Fragment(AnswerPayload::text(text)),
    }
}

pub fn resource_hint(
    channel: HintChannel,
    from: i64,
    until: Option<i64>,
    resource: &str,
) -> HintChannelEntry {
    HintChannelEntry {
        channel,
        active_from_ms: from,
        active_until_ms: until,
        payload: HintContent::Resource(ResourceRef {
            resource: resource.into(),
            mime_type: "application/octet-stream".into(),
        }),
    }
}

pub fn task_type(name: &str, kind: ScorerKind, mode: JudgementMode) -> TaskType {
    TaskType {
        name: name.into(),
        scorer: ScorerSpec::new(kind),
        judgement_mode: mode,
        duration_default_ms: TASK_MS,
        max_answers_per_agent: None,
        end_on_all_correct: false,
    }
}

pub fn kis_task(name: &str, item: &str, start: i64, end: i64) -> TaskTemplate {
    TaskTemplate {
        id: name.into(),
        name: name.into(),
        group_name: "kis".into(),
        timeline: HintTimeline {
            entries: vec![text_hint(0, None, &format!("find the scene in {name}"))],
        },
        judgement: JudgementPolicy {
            mode: JudgementMode::AprioriTargets,
            targets: Some(vec![AnswerPayload::segment(item, start, end)]),
            expected_answer_kind: ExpectedAnswerKind::ExistingFragment,
        },
        duration_ms: TASK_MS,
        collection_id: collection_id(),
    }
}

pub fn avs_task(name: &str) -> TaskTemplate {
    TaskTemplate {
        id: name.into(),
        name: name.into(),
        group_name: "avs".into(),
        timeline: HintTimeline {
            entries: vec![text_hint(0, None, "shots of a wooden door")],
        },
        judgement: JudgementPolicy {
            mode: JudgementMode::AposterioriHuman,
            targets: None,
            expected_answer_kind: ExpectedAnswerKind::ExistingFragment,
        },
        duration_ms: TASK_MS,
        collection_id: collection_id(),
    }
}

pub fn qa_task(name: &str, answer: &str) -> TaskTemplate {
    TaskTemplate {
        id: name.into(),
        name: name.into(),
        group_name: "qa".into(),
        timeline: HintTimeline {
            entries: vec![text_hint(0, None, "what colour is the door?")],
        },
        judgement: JudgementPolicy {
            mode: JudgementMode::AprioriTargets,
            targets: Some(vec![AnswerPayload::text(answer)]),
            expected_answer_kind: ExpectedAnswerKind::DerivedText,
        },
        duration_ms: TASK_MS,
        collection_id: collection_id(),
    }
}

pub fn team(id: &str, users: &[&str]) -> TeamDef {
    TeamDef {
        id: id.into(),
        name: id.into(),
        color: String::new(),
        user_ids: users.iter().map(|u| (*u).into()).collect::<BTreeSet<_>>(),
    }
}

fn base_template(tasks: Vec<TaskTemplate>, teams: Vec<TeamDef>) -> EvaluationTemplate {
    EvaluationTemplate {
        id: "tpl-test".into(),
        name: "test".into(),
        task_templates: tasks,
        task_types: vec![
            task_type(
                "kis",
                ScorerKind::KisTimePenalized,
                JudgementMode::AprioriTargets,
            ),
            task_type(
                "avs",
                ScorerKind::AvsPooled,
                JudgementMode::AposterioriHuman,
            ),
            task_type(
                "qa",
                ScorerKind::KisTimePenalized,
                JudgementMode::AprioriTargets,
            ),
        ],
        task_groups: vec![
            TaskGroup {
                name: "kis".into(),
                type_name: "kis".into(),
            },
            TaskGroup {
                name: "avs".into(),
                type_name: "avs".into(),
            },
            TaskGroup {
                name: "qa".into(),
                type_name: "qa".into(),
            },
        ],
        teams,
        team_groups: Vec::new(),
    }
}

/// One KIS and one AVS task, teams `team-a` (user `alice`) and `team-b`
/// (user `bob`).
pub fn two_task_template() -> (EvaluationTemplate, CollectionRegistry) {
    (
        base_template(
            vec![
                kis_task("kis-01", "v-09679", 14_500, 17_000),
                avs_task("avs-01"),
            ],
            vec![team("team-a", &["alice"]), team("team-b", &["bob"])],
        ),
        registry(),
    )
}

/// Two KIS, one AVS and one derived-text task; teams `team-a`, `team-b`,
/// `team-c` with users `alice`, `bob`, `carol`.
pub fn four_task_template() -> (EvaluationTemplate, CollectionRegistry) {
    (
        base_template(
            vec![
                kis_task("kis-01", "v-09679", 14_500, 17_000),
                kis_task("kis-02", "v-00003", 0, 10_000),
                avs_task("avs-01"),
                qa_task("qa-01", "Red"),
            ],
            vec![
                team("team-a", &["alice"]),
                team("team-b", &["bob"]),
                team("team-c", &["carol"]),
            ],
        ),
        registry(),
    )
}

pub fn admin() -> Actor {
    Actor::new("admin", Role::Admin)
}

pub fn judge(id: &str) -> Actor {
    Actor::new(id, Role::Judge)
}

pub fn participant(id: &str) -> Actor {
    Actor::new(id, Role::Participant)
}

/// A runtime over a shared memory log and a virtual clock starting at 0.
pub fn runtime(
    template: EvaluationTemplate,
    registry: CollectionRegistry,
    mode: EvaluationMode,
) -> (EvaluationRuntime, MemoryLog, VirtualClock) {
    let log = MemoryLog::new();
    let clock = VirtualClock::new(0);
    let rt = EvaluationRuntime::create(
        "eval-test".into(),
        template,
        mode,
        &admin(),
        Box::new(log.clone()),
        Arc::new(clock.clone()),
        Arc::new(registry),
    )
    .expect("fixture template is valid");
    (rt, log, clock)
}
