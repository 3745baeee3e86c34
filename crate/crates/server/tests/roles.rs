mod common;

use axum::http::StatusCode;
use common::Server;
use evalkit_core::model::Role;
use evalkit_core::testutil;
use evalkit_server::roles::{permitted, Endpoint, ROLES};

/// The access matrix, written out by hand: admin, participant, judge, viewer.
fn expected(endpoint: Endpoint) -> [bool; 4] {
    use Endpoint::*;
    match endpoint {
        Logout => [true, true, true, true],
        Whoami => [true, true, true, true],
        ListEvaluations => [true, true, true, true],
        CreateEvaluation => [true, false, false, false],
        State => [true, true, true, true],
        Submit => [false, true, false, false],
        Ready => [true, true, false, false],
        NextTask => [true, true, false, false],
        Admin => [true, false, false, false],
        JudgeNext => [true, false, true, false],
        JudgeVerdict => [true, false, true, false],
        Export => [true, false, false, false],
        ListTemplates => [true, false, false, false],
        GetTemplate => [true, false, false, false],
        ImportTemplate => [true, false, false, false],
        ListUsers => [true, false, false, false],
        CreateUser => [true, false, false, false],
        ListCollections => [true, false, false, false],
        Media => [true, true, true, true],
    }
}

fn request(endpoint: Endpoint, eval: &str, tpl: &str) -> (&'static str, String, Option<String>) {
    use Endpoint::*;
    let e = |p: &str| format!("/api/v1/evaluations/{eval}/{p}");
    match endpoint {
        Logout => ("POST", "/api/v1/logout".into(), None),
        Whoami => ("GET", "/api/v1/whoami".into(), None),
        ListEvaluations => ("GET", "/api/v1/evaluations".into(), None),
        CreateEvaluation => (
            "POST",
            "/api/v1/evaluations".into(),
            Some(r#"{"templateId":"tpl-test","mode":"interactiveSync"}"#.into()),
        ),
        State => ("GET", e("state"), None),
        Submit => (
            "POST",
            e("submit"),
            Some(r#"{"answerSets":[{"answers":[{"mediaItemName":"v-00001"}]}]}"#.into()),
        ),
        Ready => ("POST", e("ready"), Some(r#"{"teamId":"team-a"}"#.into())),
        NextTask => ("POST", e("next"), Some(r#"{"templateId":"kis-02"}"#.into())),
        Admin => (
            "POST",
            e("admin"),
            Some(r#"{"command":"adjustDuration","deltaMs":1000}"#.into()),
        ),
        JudgeNext => ("GET", e("judge/next"), None),
        JudgeVerdict => (
            "POST",
            e("judge/verdict"),
            Some(r#"{"requestId":"req-1","verdict":1.0}"#.into()),
        ),
        Export => ("GET", e("export?format=scoresCsv"), None),
        ListTemplates => ("GET", "/api/v1/templates".into(), None),
        GetTemplate => ("GET", format!("/api/v1/templates/{tpl}"), None),
        ImportTemplate => ("POST", "/api/v1/templates".into(), Some(tpl_body())),
        ListUsers => ("GET", "/api/v1/users".into(), None),
        CreateUser => (
            "POST",
            "/api/v1/users".into(),
            Some(r#"{"username":"eve","password":"pw","role":"viewer"}"#.into()),
        ),
        ListCollections => ("GET", "/api/v1/collections".into(), None),
        Media => (
            "GET",
            format!("/media/{}/v-00001", testutil::collection_id()),
            None,
        ),
    }
}

fn tpl_body() -> String {
    let (mut tpl, _) = testutil::two_task_template();
    tpl.id = "tpl-other".into();
    serde_json::to_string(&tpl).unwrap()
}

#[test]
fn table_matches_the_written_matrix() {
    for endpoint in Endpoint::ALL {
        for (i, role) in ROLES.iter().enumerate() {
            assert_eq!(
                permitted(endpoint, *role),
                expected(endpoint)[i],
                "{endpoint:?} {role}"
            );
        }
    }
}

#[tokio::test]
async fn denied_calls_are_403_and_leave_no_trace() {
    let srv = Server::new(testutil::registry());
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
    let alice = srv.login("alice").await;
    srv.call(
        "POST",
        &format!("/api/v1/evaluations/{eval}/submit"),
        Some(&alice),
        Some(r#"{"answerSets":[{"answers":[{"mediaItemName":"v-00002"}]}]}"#),
    )
    .await;

    let users = [
        (Role::Admin, "admin"),
        (Role::Participant, "bob"),
        (Role::Judge, "j1"),
        (Role::Viewer, "v1"),
    ];
    for endpoint in Endpoint::ALL {
        for (role, user) in users {
            if permitted(endpoint, role) {
                continue;
            }
            let token = srv.login(user).await;
            let before_seq = srv.last_seq(&eval);
            let before_users = srv.state.users().len();
            let before_templates = srv.state.templates().len();
            let before_evals = srv.state.evaluation_ids().len();
            let (method, path, body) = request(endpoint, &eval, "tpl-test");
            let r = srv.call(method, &path, Some(&token), body.as_deref()).await;
            assert_eq!(
                r.status,
                StatusCode::FORBIDDEN,
                "{endpoint:?} as {role}: {}",
                r.text()
            );
            assert_eq!(srv.last_seq(&eval), before_seq, "{endpoint:?} as {role}");
            assert_eq!(srv.state.users().len(), before_users);
            assert_eq!(srv.state.templates().len(), before_templates);
            assert_eq!(srv.state.evaluation_ids().len(), before_evals);
        }
    }
    let records = srv
        .state
        .evaluation(&eval.as_str().into())
        .unwrap()
        .lock()
        .log()
        .read_all()
        .unwrap();
    assert!(records
        .iter()
        .all(|r| ["admin", "alice", "system"].contains(&r.actor.as_str())));
}

#[tokio::test]
async fn permitted_calls_pass_the_gate() {
    let srv = Server::new(testutil::registry());
    let (tpl, _) = testutil::four_task_template();
    let eval = srv.evaluation(&tpl, "interactiveSync").await;
    let users = [
        (Role::Admin, "admin"),
        (Role::Participant, "bob"),
        (Role::Judge, "j1"),
        (Role::Viewer, "v1"),
    ];
    for endpoint in Endpoint::ALL {
        if endpoint == Endpoint::Logout {
            continue;
        }
        for (role, user) in users {
            if !permitted(endpoint, role) {
                continue;
            }
            let token = srv.login(user).await;
            let (method, path, body) = request(endpoint, &eval, "tpl-test");
            let r = srv.call(method, &path, Some(&token), body.as_deref()).await;
            assert_ne!(r.status, StatusCode::UNAUTHORIZED, "{endpoint:?} as {role}");
            if r.status == StatusCode::FORBIDDEN {
                assert!(!r.text().contains("may not call"), "{endpoint:?} as {role}");
            }
        }
    }
}
