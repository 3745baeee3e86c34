use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use evalkit_core::clock::VirtualClock;
use evalkit_core::judgement::VerdictValue;
use evalkit_core::lifecycle::{
    Evaluation, EvaluationMode, EvaluationRuntime, EventRecord, SubmissionDocument, WireAnswer,
    WireAnswerSet,
};
use evalkit_core::persistence::{
    export_full_json, export_scores_csv, import_full_json, read_log, recover, replay, replay_dir,
    snapshot_path, write_snapshot, EventLog, FileLog, PersistenceError, LOG_FILE,
};
use evalkit_core::testutil::{self, admin, judge, participant};

fn doc(answers: Vec<WireAnswer>) -> SubmissionDocument {
    SubmissionDocument {
        answer_sets: vec![WireAnswerSet {
            task_id: None,
            task_name: None,
            answers,
        }],
    }
}

fn file_runtime(dir: &Path, snapshot_every: u64) -> (EvaluationRuntime, VirtualClock) {
    let (tpl, reg) = testutil::four_task_template();
    let clock = VirtualClock::new(0);
    let log = FileLog::create(dir)
        .unwrap()
        .with_sync(false)
        .with_snapshot_every(snapshot_every);
    let rt = EvaluationRuntime::create(
        "eval-p".into(),
        tpl,
        EvaluationMode::InteractiveSync,
        &admin(),
        Box::new(log),
        Arc::new(clock.clone()),
        Arc::new(reg),
    )
    .unwrap();
    (rt, clock)
}

/// Plays a small run with KIS, AVS and text tasks and returns the live state.
fn play(rt: &mut EvaluationRuntime, clock: &VirtualClock) -> Evaluation {
    let users = ["alice", "bob", "carol"];
    rt.start_evaluation(&admin()).unwrap();
    for (t, tpl) in ["kis-01", "avs-01", "qa-01"].iter().enumerate() {
        let base = t as i64 * 1_000_000;
        clock.set(base);
        rt.next_task(&admin(), &(*tpl).into()).unwrap();
        rt.start_task(&admin(), None).unwrap();
        for (i, u) in users.iter().enumerate() {
            clock.set(base + 10_000 * (i as i64 + 1));
            let answers = match *tpl {
                "kis-01" if i == 0 => vec![WireAnswer::segment("v-09679", 15_000, 16_000)],
                "qa-01" => vec![WireAnswer::text(if i == 1 { "red" } else { "blue" })],
                _ => vec![
                    WireAnswer::media(&format!("v-0000{i}")),
                    WireAnswer::media("v-00009"),
                ],
            };
            rt.accept_submission(&participant(u), &doc(answers), None)
                .unwrap();
        }
        while let Some(r) = rt.dequeue_next(&judge("j1")).unwrap() {
            let v = if r
                .payload
                .item_id
                .as_ref()
                .is_some_and(|i| i.as_str() == "v-00009")
            {
                VerdictValue::Correct
            } else {
                VerdictValue::Wrong
            };
            rt.render_verdict(&judge("j1"), &r.id, v).unwrap();
        }
        clock.set(base + 400_000);
        rt.tick().unwrap();
    }
    rt.end_evaluation(&admin(), false).unwrap();
    rt.state().clone()
}

#[test]
fn first_event_has_seq_one() {
    let dir = tempfile::tempdir().unwrap();
    let (_rt, _) = file_runtime(dir.path(), 0);
    let records = read_log(dir.path()).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].seq, 1);
}

#[test]
fn replay_matches_live_state() {
    let dir = tempfile::tempdir().unwrap();
    let (mut rt, clock) = file_runtime(dir.path(), 0);
    let live = play(&mut rt, &clock);
    let replayed = replay_dir(dir.path(), None).unwrap();
    assert_eq!(replayed, live);
    let a = serde_json::to_vec(&replayed).unwrap();
    let b = serde_json::to_vec(&replay_dir(dir.path(), None).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, serde_json::to_vec(&live).unwrap());
    assert_eq!(
        evalkit_core::scoring::scoreboard(&replayed),
        evalkit_core::scoring::scoreboard(&live)
    );
}

#[test]
fn replay_up_to_mid_run() {
    let dir = tempfile::tempdir().unwrap();
    let (mut rt, clock) = file_runtime(dir.path(), 0);
    play(&mut rt, &clock);
    let records = read_log(dir.path()).unwrap();
    let mid = records.len() as u64 / 2;
    let state = replay(&records, Some(mid)).unwrap();
    assert_eq!(state.last_seq, mid);
    assert_eq!(state, Evaluation::replay(&records[..mid as usize]).unwrap());
}

#[test]
fn gap_is_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let (mut rt, clock) = file_runtime(dir.path(), 0);
    play(&mut rt, &clock);
    let mut records = read_log(dir.path()).unwrap();
    records.remove(4);
    assert!(matches!(
        replay(&records, None),
        Err(PersistenceError::CorruptLog(_))
    ));
}

fn rewrite(dir: &Path, records: &[EventRecord]) {
    fs::remove_file(dir.join(LOG_FILE)).unwrap();
    let mut log = FileLog::create(dir).unwrap();
    for r in records {
        log.append(r).unwrap();
    }
}

#[test]
fn log_with_gap_on_disk_is_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let (mut rt, clock) = file_runtime(dir.path(), 0);
    play(&mut rt, &clock);
    let mut records = read_log(dir.path()).unwrap();
    records.remove(4);
    rewrite(dir.path(), &records);
    assert!(matches!(
        replay_dir(dir.path(), None),
        Err(PersistenceError::CorruptLog(_))
    ));
}

#[test]
fn checksum_mismatch_is_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let (mut rt, clock) = file_runtime(dir.path(), 0);
    play(&mut rt, &clock);
    drop(rt);
    let path = dir.path().join(LOG_FILE);
    let mut bytes = fs::read(&path).unwrap();
    let n = bytes.len();
    bytes[n / 2] ^= 0x55;
    fs::write(&path, bytes).unwrap();
    assert!(matches!(
        read_log(dir.path()),
        Err(PersistenceError::CorruptLog(_))
    ));
}

#[test]
fn torn_tail_is_dropped_on_open() {
    let dir = tempfile::tempdir().unwrap();
    let (mut rt, clock) = file_runtime(dir.path(), 0);
    let live = play(&mut rt, &clock);
    drop(rt);
    let mut f = OpenOptions::new()
        .append(true)
        .open(dir.path().join(LOG_FILE))
        .unwrap();
    f.write_all(&[200, 0, 0, 0, 1, 2, 3, 4, b'{']).unwrap();
    drop(f);
    let recovered = recover(dir.path()).unwrap();
    assert_eq!(recovered.state, live);
    assert_eq!(read_log(dir.path()).unwrap().len() as u64, live.last_seq);
}

#[test]
fn snapshot_plus_tail_equals_full_replay() {
    let dir = tempfile::tempdir().unwrap();
    let (mut rt, clock) = file_runtime(dir.path(), 10);
    let live = play(&mut rt, &clock);
    drop(rt);
    assert!(snapshot_path(dir.path(), 10).exists());
    let recovered = recover(dir.path()).unwrap();
    let snap = recovered.snapshot_seq.expect("snapshot used");
    assert!(snap >= 10 && snap.is_multiple_of(10));
    assert_eq!(recovered.state, live);
    assert_eq!(recovered.state, replay_dir(dir.path(), None).unwrap());
}

#[test]
fn snapshot_of_fresh_log_is_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let (rt, _) = file_runtime(dir.path(), 0);
    let initial = rt.state().clone();
    write_snapshot(dir.path(), &initial).unwrap();
    drop(rt);
    let r = recover(dir.path()).unwrap();
    assert_eq!(r.snapshot_seq, Some(1));
    assert_eq!(r.state, initial);
}

#[test]
fn corrupt_snapshot_falls_back_to_full_replay() {
    let dir = tempfile::tempdir().unwrap();
    let (mut rt, clock) = file_runtime(dir.path(), 10);
    let live = play(&mut rt, &clock);
    drop(rt);
    for entry in fs::read_dir(dir.path()).unwrap() {
        let p = entry.unwrap().path();
        if p.file_name()
            .unwrap()
            .to_str()
            .unwrap()
            .starts_with("snapshot-")
        {
            let mut bytes = fs::read(&p).unwrap();
            let n = bytes.len();
            bytes[n - 3] ^= 0x20;
            fs::write(&p, bytes).unwrap();
        }
    }
    let r = recover(dir.path()).unwrap();
    assert_eq!(r.snapshot_seq, None);
    assert_eq!(r.state, live);
}

#[test]
fn recovered_runtime_continues_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let (mut rt, clock) = file_runtime(dir.path(), 0);
    rt.start_evaluation(&admin()).unwrap();
    rt.next_task(&admin(), &"kis-01".into()).unwrap();
    rt.start_task(&admin(), None).unwrap();
    rt.accept_submission(
        &participant("alice"),
        &doc(vec![WireAnswer::media("v-00001")]),
        Some("k"),
    )
    .unwrap();
    let before = rt.state().clone();
    drop(rt);

    let r = recover(dir.path()).unwrap();
    assert_eq!(r.state, before);
    let mut rt = EvaluationRuntime::resume(
        r.state,
        Box::new(r.log),
        Arc::new(clock.clone()),
        Arc::new(testutil::registry()),
    );
    let again = rt
        .accept_submission(
            &participant("alice"),
            &doc(vec![WireAnswer::media("v-00001")]),
            Some("k"),
        )
        .unwrap();
    assert!(again.replayed);
    rt.accept_submission(
        &participant("bob"),
        &doc(vec![WireAnswer::media("v-00002")]),
        None,
    )
    .unwrap();
    let live = rt.state().clone();
    drop(rt);
    assert_eq!(replay_dir(dir.path(), None).unwrap(), live);
}

#[test]
fn unknown_evaluation_dir() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        read_log(&dir.path().join("missing")),
        Err(PersistenceError::UnknownEvaluation(_))
    ));
}

#[test]
fn scores_csv_has_row_per_team_and_task() {
    let dir = tempfile::tempdir().unwrap();
    let (mut rt, clock) = file_runtime(dir.path(), 0);
    let live = play(&mut rt, &clock);
    let csv = export_scores_csv(&live).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "evaluation,team,group,task,value");
    assert_eq!(lines.len(), 1 + 3 * 3);
    let kis_a: f64 = lines
        .iter()
        .find_map(|l| l.strip_prefix("eval-p,team-a,kis,kis-01,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((kis_a - (50.0 + 50.0 * (1.0 - 10_000.0 / 300_000.0))).abs() < 1e-9);
}

#[test]
fn full_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (mut rt, clock) = file_runtime(dir.path(), 0);
    let live = play(&mut rt, &clock);
    let records = rt.log().read_all().unwrap();
    let text = export_full_json(&live, &records).unwrap();
    let back = import_full_json(&text).unwrap();
    assert_eq!(back.evaluation, live);
    assert_eq!(back.events, records);

    let mut tampered: serde_json::Value = serde_json::from_str(&text).unwrap();
    tampered["evaluation"]["submissionCount"] = serde_json::json!(999);
    assert!(matches!(
        import_full_json(&tampered.to_string()),
        Err(PersistenceError::ImportMismatch(_))
    ));
}
