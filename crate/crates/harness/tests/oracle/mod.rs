//! Reference score calculator for synchronous scenarios.
//!
//! Reads the scenario and template as plain JSON and recomputes every task
//! score from the scripted actions alone: which task runs when, which
//! submissions land in it, how each answer is judged and what it is worth.
//! It shares no code with the engine.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Judged {
    Correct,
    Wrong,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Item(String),
    Segment(String, i64, i64),
    Text(String),
}

impl Key {
    fn unit(&self) -> String {
        match self {
            Key::Item(i) | Key::Segment(i, _, _) => format!("item {i}"),
            Key::Text(t) => format!("text {t}"),
        }
    }
}

#[derive(Debug, Clone)]
struct Given {
    team: String,
    at: i64,
    key: Key,
}

#[derive(Debug, Clone)]
struct Run {
    template: String,
    ready: BTreeSet<String>,
    start: Option<i64>,
    duration: i64,
    closed_at: Option<i64>,
    answers: Vec<Given>,
}

impl Run {
    fn end(&self) -> Option<i64> {
        let timeout = self.start.map(|s| s + self.duration);
        match (self.closed_at, timeout) {
            (Some(c), Some(t)) => Some(c.min(t)),
            (c, t) => c.or(t),
        }
    }

    fn running_at(&self, t: i64) -> bool {
        match self.start {
            Some(s) => t >= s && self.end().is_none_or(|e| t < e),
            None => false,
        }
    }

    fn waiting_at(&self, t: i64) -> bool {
        self.start.is_none() && self.closed_at.is_none_or(|c| t < c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub team: String,
    pub name: String,
    pub groups: BTreeMap<String, f64>,
    pub total: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Expected {
    /// Score per (team id, task name).
    pub tasks: BTreeMap<(String, String), f64>,
    pub board: Vec<Row>,
    pub accepted_submissions: usize,
}

fn norm(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn key_of(answer: &Value) -> Option<Key> {
    if let Some(t) = answer.get("text").and_then(Value::as_str) {
        return Some(Key::Text(norm(t)));
    }
    let item = answer.get("mediaItemName")?.as_str()?.to_owned();
    match (
        answer.get("start").and_then(Value::as_i64),
        answer.get("end").and_then(Value::as_i64),
    ) {
        (Some(s), Some(e)) => Some(Key::Segment(item, s, e)),
        (None, None) => Some(Key::Item(item)),
        _ => None,
    }
}

fn target_key(t: &Value) -> Key {
    if let Some(text) = t.get("text").and_then(Value::as_str) {
        return Key::Text(norm(text));
    }
    let item = t["itemId"].as_str().unwrap().to_owned();
    match t.get("range") {
        Some(r) => Key::Segment(
            item,
            r["startMs"].as_i64().unwrap(),
            r["endMs"].as_i64().unwrap(),
        ),
        None => Key::Item(item),
    }
}

/// Whether two closed intervals overlap by more than a point, or one of
/// them is a point inside the other.
fn overlaps(a: (i64, i64), b: (i64, i64)) -> bool {
    if a.0.max(b.0) < a.1.min(b.1) {
        return true;
    }
    (a.0 == a.1 && b.0 <= a.0 && a.0 <= b.1) || (b.0 == b.1 && a.0 <= b.0 && b.0 <= a.1)
}

fn matches(answer: &Key, target: &Key) -> bool {
    match (answer, target) {
        (Key::Text(a), Key::Text(b)) => a == b,
        (Key::Item(a), Key::Item(b) | Key::Segment(b, _, _)) => a == b,
        (Key::Segment(a, s, e), Key::Segment(b, ts, te)) => {
            a == b && overlaps((*s, *e), (*ts, *te))
        }
        (Key::Segment(a, _, _), Key::Item(b)) => a == b,
        _ => false,
    }
}

struct TaskInfo {
    group: String,
    scorer: Value,
    apriori: bool,
    wants_text: bool,
    targets: Vec<Key>,
    duration: i64,
}

fn task_info(template: &Value, name: &str) -> TaskInfo {
    let task = template["taskTemplates"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["id"] == name || t["name"] == name)
        .unwrap_or_else(|| panic!("no task {name}"));
    let group = task["groupName"].as_str().unwrap().to_owned();
    let type_name = template["taskGroups"]
        .as_array()
        .unwrap()
        .iter()
        .find(|g| g["name"] == group.as_str())
        .unwrap()["typeName"]
        .clone();
    let ty = template["taskTypes"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["name"] == type_name)
        .unwrap();
    let policy = &task["judgement"];
    TaskInfo {
        group,
        scorer: ty["scorer"].clone(),
        apriori: policy["mode"] == "aprioriTargets",
        wants_text: policy["expectedAnswerKind"] == "derivedText",
        targets: policy["targets"]
            .as_array()
            .map(|ts| ts.iter().map(target_key).collect())
            .unwrap_or_default(),
        duration: task["durationMs"].as_i64().unwrap(),
    }
}

fn param(scorer: &Value, name: &str, default: f64) -> f64 {
    scorer.get(name).and_then(Value::as_f64).unwrap_or(default)
}

fn kis(scorer: &Value, duration: i64, answers: &[(i64, Judged)]) -> f64 {
    let max = param(scorer, "maxScore", 100.0);
    let frac = param(scorer, "timeFraction", 0.5);
    let pen = param(scorer, "wrongPenalty", 10.0);
    let mut wrong = 0.0;
    for (at, j) in answers {
        match j {
            Judged::Wrong => wrong += 1.0,
            Judged::Correct => {
                let ratio = (*at as f64 / duration as f64).clamp(0.0, 1.0);
                return (max * (1.0 - frac) + max * frac * (1.0 - ratio) - pen * wrong).max(0.0);
            }
            Judged::Unknown => {}
        }
    }
    0.0
}

fn avs(scorer: &Value, answers: &[(Key, Judged)], pool: usize) -> f64 {
    let max = param(scorer, "maxScore", 100.0);
    let c = answers
        .iter()
        .filter(|(_, j)| *j == Judged::Correct)
        .count() as f64;
    let w = answers.iter().filter(|(_, j)| *j == Judged::Wrong).count() as f64;
    let found: BTreeSet<String> = answers
        .iter()
        .filter(|(_, j)| *j == Judged::Correct)
        .map(|(k, _)| k.unit())
        .collect();
    if pool == 0 || c == 0.0 {
        return 0.0;
    }
    max * (found.len() as f64 / pool as f64) * (c / (c + w / 2.0))
}

fn team_of(template: &Value, user: &str) -> Option<String> {
    template["teams"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["userIds"].as_array().unwrap().iter().any(|u| u == user))
        .map(|t| t["id"].as_str().unwrap().to_owned())
}

/// Scores a synchronous scenario. Judge actions must carry `expect`; each
/// one settles the oldest run holding an unjudged answer equal to it.
pub fn score(scenario: &Value, template: &Value) -> Expected {
    assert_eq!(
        scenario
            .get("mode")
            .and_then(Value::as_str)
            .unwrap_or("interactiveSync"),
        "interactiveSync"
    );
    let teams: Vec<(String, String)> = template["teams"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| {
            (
                t["id"].as_str().unwrap().to_owned(),
                t["name"].as_str().unwrap().to_owned(),
            )
        })
        .collect();
    let all: BTreeSet<String> = teams.iter().map(|(id, _)| id.clone()).collect();

    let mut started = false;
    let mut closed: Option<i64> = None;
    let mut runs: Vec<Run> = Vec::new();
    let mut verdicts: BTreeMap<(usize, Key), Judged> = BTreeMap::new();
    let mut accepted = 0;

    for step in scenario["actions"].as_array().unwrap() {
        let t = step["atMs"].as_i64().unwrap();
        let actor = step["actor"].as_str().unwrap();
        let a = &step["action"];
        if closed.is_some() {
            continue;
        }
        let current = runs.len().checked_sub(1);
        match a["type"].as_str().unwrap() {
            "startEvaluation" => started = true,
            "nextTask" if started => {
                let free = runs.last().is_none_or(|r| r.end().is_some_and(|e| e <= t));
                if free {
                    let name = a["templateId"].as_str().unwrap().to_owned();
                    let duration = task_info(template, &name).duration;
                    runs.push(Run {
                        template: name,
                        ready: BTreeSet::new(),
                        start: None,
                        duration,
                        closed_at: None,
                        answers: Vec::new(),
                    });
                }
            }
            "markReady" => {
                if let (Some(i), Some(team)) = (current, team_of(template, actor)) {
                    let run = &mut runs[i];
                    if run.waiting_at(t) {
                        run.ready.insert(team);
                        if run.ready == all {
                            run.start = Some(t);
                        }
                    }
                }
            }
            "startTask" => {
                if let Some(i) = current {
                    if runs[i].waiting_at(t) {
                        runs[i].start = Some(t);
                    }
                }
            }
            "abortTask" => {
                if let Some(i) = current {
                    if runs[i].running_at(t) {
                        runs[i].closed_at = Some(t);
                    }
                }
            }
            "adjustDuration" => {
                if let Some(i) = current {
                    let run = &mut runs[i];
                    if run.running_at(t) {
                        let d = run.duration + a["deltaMs"].as_i64().unwrap();
                        if d > t - run.start.unwrap() {
                            run.duration = d;
                        }
                    }
                }
            }
            "submit" => {
                let (Some(i), Some(team)) = (current, team_of(template, actor)) else {
                    continue;
                };
                let run = &runs[i];
                if !run.running_at(t) {
                    continue;
                }
                let at = t - run.start.unwrap();
                let mut seen: BTreeSet<Key> = run
                    .answers
                    .iter()
                    .filter(|g| g.team == team)
                    .map(|g| g.key.clone())
                    .collect();
                let mut fresh = Vec::new();
                let mut ok = true;
                for set in a["body"]["answerSets"].as_array().unwrap() {
                    let hint = set
                        .get("taskId")
                        .or(set.get("taskName"))
                        .and_then(Value::as_str);
                    if hint.is_some_and(|h| h != run.template) {
                        ok = false;
                    }
                    let answers = set["answers"].as_array().unwrap();
                    ok &= !answers.is_empty();
                    for ans in answers {
                        match key_of(ans) {
                            Some(k) if seen.insert(k.clone()) => fresh.push(k),
                            _ => ok = false,
                        }
                    }
                }
                if ok && !fresh.is_empty() {
                    accepted += 1;
                    let run = &mut runs[i];
                    run.answers.extend(fresh.into_iter().map(|key| Given {
                        team: team.clone(),
                        at,
                        key,
                    }));
                }
            }
            "judge" => {
                let key = key_of(&a["expect"]).expect("judge actions need expect");
                let value = match a["verdict"].as_f64() {
                    Some(1.0) => Judged::Correct,
                    Some(0.0) => Judged::Wrong,
                    None => Judged::Unknown,
                    Some(v) => panic!("graded verdict {v} is not supported here"),
                };
                let run = (0..runs.len())
                    .find(|i| {
                        !verdicts.contains_key(&(*i, key.clone()))
                            && runs[*i].answers.iter().any(|g| g.key == key)
                    })
                    .expect("judged answer exists");
                verdicts.insert((run, key), value);
            }
            "endEvaluation" => {
                let forced = a.get("force").and_then(Value::as_bool).unwrap_or(false);
                let open = runs.iter().any(|r| r.end().is_none_or(|e| e > t));
                if forced || !open {
                    for r in &mut runs {
                        if r.end().is_none_or(|e| e > t) {
                            r.closed_at = Some(t);
                        }
                    }
                    closed = Some(t);
                }
            }
            _ => {}
        }
    }

    let mut expected = Expected {
        accepted_submissions: accepted,
        ..Default::default()
    };
    let mut group_scores: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for (i, run) in runs.iter().enumerate() {
        let info = task_info(template, &run.template);
        let judge = |k: &Key| -> Judged {
            let is_text = matches!(k, Key::Text(_));
            if is_text != info.wants_text {
                Judged::Unknown
            } else if info.apriori {
                if info.targets.iter().any(|target| matches(k, target)) {
                    Judged::Correct
                } else {
                    Judged::Wrong
                }
            } else {
                verdicts
                    .get(&(i, k.clone()))
                    .copied()
                    .unwrap_or(Judged::Unknown)
            }
        };
        let kind = info.scorer["kind"].as_str().unwrap();
        let pool: BTreeSet<String> = run
            .answers
            .iter()
            .filter(|g| judge(&g.key) == Judged::Correct)
            .map(|g| g.key.unit())
            .collect();
        for (team, _) in &teams {
            let mine: Vec<&Given> = run.answers.iter().filter(|g| &g.team == team).collect();
            let value = match kind {
                "kisTimePenalized" => {
                    let seq: Vec<(i64, Judged)> =
                        mine.iter().map(|g| (g.at, judge(&g.key))).collect();
                    kis(&info.scorer, run.duration, &seq)
                }
                "avsPooled" => {
                    let seq: Vec<(Key, Judged)> = mine
                        .iter()
                        .map(|g| (g.key.clone(), judge(&g.key)))
                        .collect();
                    avs(&info.scorer, &seq, pool.len())
                }
                "rawCount" => mine
                    .iter()
                    .filter(|g| judge(&g.key) == Judged::Correct)
                    .count() as f64,
                other => panic!("unknown scorer {other}"),
            };
            expected
                .tasks
                .insert((team.clone(), run.template.clone()), value);
            group_scores
                .entry(team.clone())
                .or_default()
                .entry(info.group.clone())
                .or_default()
                .push(value);
        }
    }

    let mut board: Vec<Row> = teams
        .iter()
        .map(|(id, name)| {
            let groups: BTreeMap<String, f64> = group_scores
                .get(id)
                .map(|g| {
                    g.iter()
                        .map(|(name, v)| (name.clone(), v.iter().sum::<f64>() / v.len() as f64))
                        .collect()
                })
                .unwrap_or_default();
            Row {
                team: id.clone(),
                name: name.clone(),
                total: groups.values().sum(),
                groups,
                rank: 0,
            }
        })
        .collect();
    board.sort_by(|a, b| {
        b.total
            .partial_cmp(&a.total)
            .unwrap()
            .then(a.name.cmp(&b.name))
    });
    for i in 0..board.len() {
        board[i].rank = if i > 0 && (board[i - 1].total - board[i].total).abs() < 1e-9 {
            board[i - 1].rank
        } else {
            i + 1
        };
    }
    expected.board = board;
    expected
}
