mod common;

use std::sync::Arc;

use axum::http::StatusCode;
use common::{users, Server};
use evalkit_core::clock::VirtualClock;
use evalkit_core::testutil;
use evalkit_server::store::DataDir;
use evalkit_server::{AppState, Options};

fn open(dir: &std::path::Path, clock: &VirtualClock) -> Server {
    let data = DataDir::open(dir).unwrap();
    let col = testutil::collection();
    let options = Options {
        snapshot_every: 4,
        fsync: true,
    };
    let state = AppState::open(data, Arc::new(clock.clone()), vec![col], options).unwrap();
    for u in users() {
        let _ = state.add_user(u);
    }
    Server::wrap(state, clock.clone())
}

#[tokio::test]
async fn acknowledged_submissions_survive_restart() {
    let tmp = tempfile::tempdir().unwrap();
    let clock = VirtualClock::new(0);
    let (eval, acked, live) = {
        let srv = open(tmp.path(), &clock);
        let (tpl, _) = testutil::four_task_template();
        let eval = srv.evaluation(&tpl, "interactiveSync").await;
        let admin = srv.login("admin").await;
        for cmd in [
            r#"{"command":"startEvaluation"}"#,
            r#"{"command":"nextTask","templateId":"avs-01"}"#,
            r#"{"command":"startTask"}"#,
        ] {
            assert_eq!(srv.admin(&eval, &admin, cmd).await.status, StatusCode::OK);
        }
        let mut acked = Vec::new();
        for (i, user) in ["alice", "bob", "carol"].iter().enumerate() {
            clock.set(1_000 * (i as i64 + 1));
            let token = srv.login(user).await;
            let body =
                format!(r#"{{"answerSets":[{{"answers":[{{"mediaItemName":"v-0000{i}"}}]}}]}}"#);
            let r = srv
                .call(
                    "POST",
                    &format!("/api/v1/evaluations/{eval}/submit"),
                    Some(&token),
                    Some(&body),
                )
                .await;
            assert_eq!(r.status, StatusCode::OK);
            acked.push(r.json()["submissionId"].as_str().unwrap().to_owned());
        }
        let live = srv
            .state
            .evaluation(&eval.as_str().into())
            .unwrap()
            .lock()
            .state()
            .clone();
        (eval, acked, live)
    };

    let srv = open(tmp.path(), &clock);
    let rt = srv
        .state
        .evaluation(&eval.as_str().into())
        .expect("recovered");
    let state = rt.lock().state().clone();
    assert_eq!(state, live);
    for id in &acked {
        assert!(
            state.find_submission(&id.as_str().into()).next().is_some(),
            "{id}"
        );
    }
    assert!(srv.state.template(&"tpl-test".into()).is_some());

    let admin = srv.login("admin").await;
    let r = srv
        .call(
            "GET",
            &format!("/api/v1/evaluations/{eval}/judge/next"),
            Some(&admin),
            None,
        )
        .await;
    assert_eq!(r.status, StatusCode::OK);
}

#[tokio::test]
async fn users_persist_and_bootstrap_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let clock = VirtualClock::new(0);
    {
        let data = DataDir::open(tmp.path()).unwrap();
        let state =
            AppState::open(data, Arc::new(clock.clone()), vec![], Options::default()).unwrap();
        assert!(state.bootstrap_admin("root", "s3cret").unwrap());
        assert!(!state.bootstrap_admin("root", "other").unwrap());
    }
    let data = DataDir::open(tmp.path()).unwrap();
    let state = AppState::open(data, Arc::new(clock), vec![], Options::default()).unwrap();
    assert!(state.users().authenticate("root", "s3cret").is_some());
    assert!(state.users().authenticate("root", "other").is_none());
}
