#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{HeaderMap, Request, StatusCode};
use axum::Router;
use evalkit_core::clock::VirtualClock;
use evalkit_core::collection::CollectionRegistry;
use evalkit_core::model::{EvaluationTemplate, Role, UserDef};
use evalkit_server::auth::hash_password;
use evalkit_server::{router, AppState};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub const PASSWORD: &str = "pw";

pub fn users() -> Vec<UserDef> {
    [
        ("admin", Role::Admin),
        ("alice", Role::Participant),
        ("bob", Role::Participant),
        ("carol", Role::Participant),
        ("j1", Role::Judge),
        ("j2", Role::Judge),
        ("v1", Role::Viewer),
    ]
    .into_iter()
    .map(|(name, role)| UserDef {
        id: name.into(),
        username: name.into(),
        password_hash: hash_password(PASSWORD),
        role,
    })
    .collect()
}

pub struct Server {
    pub state: AppState,
    pub app: Router,
    pub clock: VirtualClock,
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| {
            panic!("{e}: {}", String::from_utf8_lossy(&self.body));
        })
    }

    pub fn text(&self) -> String {
        String::from_utf8(self.body.clone()).unwrap()
    }

    pub fn error(&self) -> String {
        self.json()["error"].as_str().unwrap_or_default().to_owned()
    }
}

impl Server {
    pub fn new(registry: CollectionRegistry) -> Self {
        let clock = VirtualClock::new(0);
        let state = AppState::in_memory(Arc::new(clock.clone()), registry, users());
        Self::wrap(state, clock)
    }

    pub fn wrap(state: AppState, clock: VirtualClock) -> Self {
        Self {
            app: router(state.clone()),
            state,
            clock,
        }
    }

    pub async fn send(&self, req: Request<Body>) -> Reply {
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let body = resp
            .into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec();
        Reply {
            status,
            headers,
            body,
        }
    }

    pub async fn call(
        &self,
        method: &str,
        path: &str,
        token: Option<&str>,
        body: Option<&str>,
    ) -> Reply {
        self.call_with(method, path, token, body, &[]).await
    }

    pub async fn call_with(
        &self,
        method: &str,
        path: &str,
        token: Option<&str>,
        body: Option<&str>,
        headers: &[(&str, &str)],
    ) -> Reply {
        let mut req = Request::builder().method(method).uri(path);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(b.to_owned()))
                .unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        self.send(req).await
    }

    pub async fn login(&self, user: &str) -> String {
        let r = self
            .call(
                "POST",
                "/api/v1/login",
                None,
                Some(&format!(
                    r#"{{"username":"{user}","password":"{PASSWORD}"}}"#
                )),
            )
            .await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text());
        r.json()["token"].as_str().unwrap().to_owned()
    }

    /// Imports `tpl` and creates an evaluation from it as admin.
    pub async fn evaluation(&self, tpl: &EvaluationTemplate, mode: &str) -> String {
        let admin = self.login("admin").await;
        let r = self
            .call(
                "POST",
                "/api/v1/templates",
                Some(&admin),
                Some(&serde_json::to_string(tpl).unwrap()),
            )
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
        let r = self
            .call(
                "POST",
                "/api/v1/evaluations",
                Some(&admin),
                Some(&format!(r#"{{"templateId":"{}","mode":"{mode}"}}"#, tpl.id)),
            )
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
        r.json()["id"].as_str().unwrap().to_owned()
    }

    pub async fn admin(&self, eval: &str, token: &str, command: &str) -> Reply {
        self.call(
            "POST",
            &format!("/api/v1/evaluations/{eval}/admin"),
            Some(token),
            Some(command),
        )
        .await
    }

    pub fn last_seq(&self, eval: &str) -> u64 {
        self.state
            .evaluation(&eval.into())
            .unwrap()
            .lock()
            .state()
            .last_seq
    }
}
