//! Machine-readable interface description (OpenAPI 3.0).

use serde_json::{json, Map, Value};

struct Op {
    method: &'static str,
    path: &'static str,
    summary: &'static str,
    body: Option<&'static str>,
    ok: (&'static str, Option<&'static str>),
    errors: &'static [&'static str],
    public: bool,
}

const OPS: &[Op] = &[
    Op {
        method: "post",
        path: "/api/v1/login",
        summary: "Open a session",
        body: Some("LoginRequest"),
        ok: ("200", Some("Session")),
        errors: &["400", "401"],
        public: true,
    },
    Op {
        method: "post",
        path: "/api/v1/logout",
        summary: "Close the current session",
        body: None,
        ok: ("204", None),
        errors: &["401"],
        public: false,
    },
    Op {
        method: "get",
        path: "/api/v1/whoami",
        summary: "The current session",
        body: None,
        ok: ("200", Some("Session")),
        errors: &["401"],
        public: false,
    },
    Op {
        method: "get",
        path: "/api/v1/openapi.json",
        summary: "This document",
        body: None,
        ok: ("200", None),
        errors: &[],
        public: true,
    },
    Op {
        method: "get",
        path: "/api/v1/evaluations",
        summary: "List evaluations",
        body: None,
        ok: ("200", Some("EvaluationSummaryList")),
        errors: &["401"],
        public: false,
    },
    Op {
        method: "post",
        path: "/api/v1/evaluations",
        summary: "Instantiate a template as an evaluation",
        body: Some("CreateEvaluation"),
        ok: ("201", Some("Created")),
        errors: &["400", "401", "403", "404", "409"],
        public: false,
    },
    Op {
        method: "get",
        path: "/api/v1/evaluations/{id}/state",
        summary: "Role-scoped evaluation state with the server clock",
        body: None,
        ok: ("200", Some("StateView")),
        errors: &["401", "403", "404"],
        public: false,
    },
    Op {
        method: "post",
        path: "/api/v1/evaluations/{id}/submit",
        summary: "Submit answers",
        body: Some("SubmissionDocument"),
        ok: ("200", Some("SubmissionReceipt")),
        errors: &["400", "401", "403", "404", "409", "412", "429"],
        public: false,
    },
    Op {
        method: "post",
        path: "/api/v1/evaluations/{id}/ready",
        summary: "Mark a team ready for the prepared task",
        body: Some("ReadyRequest"),
        ok: ("200", Some("TaskAck")),
        errors: &["400", "401", "403", "404", "409"],
        public: false,
    },
    Op {
        method: "post",
        path: "/api/v1/evaluations/{id}/next",
        summary: "Open the next task (asynchronous mode: for the caller's team)",
        body: Some("NextRequest"),
        ok: ("200", Some("TaskAck")),
        errors: &["400", "401", "403", "404", "409"],
        public: false,
    },
    Op {
        method: "post",
        path: "/api/v1/evaluations/{id}/admin",
        summary: "Conductor command",
        body: Some("AdminCommand"),
        ok: ("200", Some("AdminAck")),
        errors: &["400", "401", "403", "404", "409"],
        public: false,
    },
    Op {
        method: "get",
        path: "/api/v1/evaluations/{id}/judge/next",
        summary: "Take the next judgement request",
        body: None,
        ok: ("200", Some("JudgeAssignment")),
        errors: &["204", "401", "403", "404", "409"],
        public: false,
    },
    Op {
        method: "post",
        path: "/api/v1/evaluations/{id}/judge/verdict",
        summary: "Render a verdict on an assigned request",
        body: Some("VerdictRequest"),
        ok: ("200", Some("Verdict")),
        errors: &["400", "401", "403", "404", "409"],
        public: false,
    },
    Op {
        method: "get",
        path: "/api/v1/evaluations/{id}/export",
        summary: "Export results (format=scoresCsv or fullJson)",
        body: None,
        ok: ("200", None),
        errors: &["400", "401", "403", "404"],
        public: false,
    },
    Op {
        method: "get",
        path: "/api/v1/templates",
        summary: "List evaluation templates",
        body: None,
        ok: ("200", None),
        errors: &["401", "403"],
        public: false,
    },
    Op {
        method: "post",
        path: "/api/v1/templates",
        summary: "Import an evaluation template",
        body: Some("EvaluationTemplate"),
        ok: ("201", Some("Created")),
        errors: &["400", "401", "403"],
        public: false,
    },
    Op {
        method: "get",
        path: "/api/v1/templates/{id}",
        summary: "Export an evaluation template",
        body: None,
        ok: ("200", Some("EvaluationTemplate")),
        errors: &["401", "403", "404"],
        public: false,
    },
    Op {
        method: "get",
        path: "/api/v1/users",
        summary: "List users",
        body: None,
        ok: ("200", None),
        errors: &["401", "403"],
        public: false,
    },
    Op {
        method: "post",
        path: "/api/v1/users",
        summary: "Create a user",
        body: Some("NewUser"),
        ok: ("201", Some("Created")),
        errors: &["400", "401", "403", "409"],
        public: false,
    },
    Op {
        method: "get",
        path: "/api/v1/collections",
        summary: "List media collections",
        body: None,
        ok: ("200", None),
        errors: &["401", "403"],
        public: false,
    },
    Op {
        method: "get",
        path: "/media/{collection}/{item}",
        summary: "Media bytes of a collection item; honours Range",
        body: None,
        ok: ("200", None),
        errors: &["206", "401", "404", "416"],
        public: false,
    },
    Op {
        method: "get",
        path: "/resources/{name}",
        summary: "External hint resource; honours Range",
        body: None,
        ok: ("200", None),
        errors: &["206", "401", "404", "416"],
        public: false,
    },
];

fn describe(code: &str) -> &'static str {
    match code {
        "200" => "OK",
        "201" => "Created",
        "204" => "No content",
        "206" => "Partial content",
        "400" => "Malformed request",
        "401" => "No or expired session",
        "403" => "Role not permitted",
        "404" => "Unknown resource",
        "409" => "Conflicts with the current state",
        "412" => "No active task",
        "416" => "Range not satisfiable",
        "429" => "Answer limit reached",
        _ => "Error",
    }
}

fn schema_ref(name: &str) -> Value {
    json!({ "$ref": format!("#/components/schemas/{name}") })
}

fn schemas() -> Value {
    json!({
        "Error": {
            "type": "object",
            "required": ["error", "message"],
            "properties": { "error": { "type": "string" }, "message": { "type": "string" } }
        },
        "LoginRequest": {
            "type": "object",
            "required": ["username", "password"],
            "properties": { "username": { "type": "string" }, "password": { "type": "string" } }
        },
        "Session": {
            "type": "object",
            "properties": {
                "token": { "type": "string" },
                "userId": { "type": "string" },
                "role": { "type": "string", "enum": ["admin", "participant", "judge", "viewer"] },
                "expiresAt": { "type": "integer", "format": "int64" }
            }
        },
        "Created": { "type": "object", "properties": { "id": { "type": "string" } } },
        "EvaluationSummaryList": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "id": { "type": "string" },
                    "name": { "type": "string" },
                    "templateId": { "type": "string" },
                    "mode": { "type": "string", "enum": ["interactiveSync", "interactiveAsync", "nonInteractive"] },
                    "state": { "type": "string" }
                }
            }
        },
        "CreateEvaluation": {
            "type": "object",
            "required": ["templateId", "mode"],
            "properties": {
                "templateId": { "type": "string" },
                "mode": { "type": "string", "enum": ["interactiveSync", "interactiveAsync", "nonInteractive"] },
                "id": { "type": "string" }
            }
        },
        "StateView": {
            "type": "object",
            "description": "Agent view for participants, viewer view for judges and viewers, full state for admins. Always carries serverTimeMs.",
            "required": ["serverTimeMs"],
            "properties": { "serverTimeMs": { "type": "integer", "format": "int64" } }
        },
        "SubmissionDocument": {
            "type": "object",
            "required": ["answerSets"],
            "properties": {
                "answerSets": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["answers"],
                        "properties": {
                            "taskId": { "type": "string" },
                            "taskName": { "type": "string" },
                            "answers": {
                                "type": "array",
                                "items": {
                                    "type": "object",
                                    "properties": {
                                        "text": { "type": "string" },
                                        "mediaItemName": { "type": "string" },
                                        "start": { "type": "integer", "format": "int64" },
                                        "end": { "type": "integer", "format": "int64" },
                                        "weight": { "type": "number" }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        },
        "SubmissionReceipt": {
            "type": "object",
            "properties": {
                "submissionId": { "type": "string" },
                "replayed": { "type": "boolean" },
                "answerSets": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "taskId": { "type": "string" },
                            "status": { "type": "string", "enum": ["CORRECT", "WRONG", "UNDECIDABLE", "INDETERMINATE"] }
                        }
                    }
                }
            }
        },
        "ReadyRequest": { "type": "object", "properties": { "teamId": { "type": "string" } } },
        "NextRequest": {
            "type": "object",
            "required": ["templateId"],
            "properties": { "templateId": { "type": "string" } }
        },
        "TaskAck": { "type": "object", "properties": { "taskId": { "type": "string" } } },
        "AdminCommand": {
            "type": "object",
            "required": ["command"],
            "properties": {
                "command": {
                    "type": "string",
                    "enum": ["startEvaluation", "nextTask", "markReady", "startTask", "abortTask",
                             "adjustDuration", "endEvaluation", "overrideVerdict"]
                },
                "templateId": { "type": "string" },
                "teamId": { "type": "string" },
                "taskId": { "type": "string" },
                "deltaMs": { "type": "integer", "format": "int64" },
                "force": { "type": "boolean" },
                "submissionId": { "type": "string" },
                "answerIndex": { "type": "integer" },
                "verdict": { "type": "number", "nullable": true, "minimum": 0, "maximum": 1 }
            }
        },
        "AdminAck": {
            "type": "object",
            "properties": {
                "ok": { "type": "boolean" },
                "taskId": { "type": "string" },
                "durationMs": { "type": "integer", "format": "int64" }
            }
        },
        "JudgeAssignment": {
            "type": "object",
            "properties": {
                "request": { "type": "object" },
                "taskName": { "type": "string" },
                "description": { "type": "array", "items": { "type": "string" } },
                "mediaUrl": { "type": "string" }
            }
        },
        "VerdictRequest": {
            "type": "object",
            "required": ["requestId", "verdict"],
            "properties": {
                "requestId": { "type": "string" },
                "verdict": { "type": "number", "nullable": true, "minimum": 0, "maximum": 1 }
            }
        },
        "Verdict": { "type": "object" },
        "EvaluationTemplate": { "type": "object" },
        "NewUser": {
            "type": "object",
            "required": ["username", "password", "role"],
            "properties": {
                "id": { "type": "string" },
                "username": { "type": "string" },
                "password": { "type": "string" },
                "role": { "type": "string", "enum": ["admin", "participant", "judge", "viewer"] }
            }
        }
    })
}

fn operation(op: &Op) -> Value {
    let mut responses = Map::new();
    let ok = match op.ok.1 {
        Some(schema) => json!({
            "description": describe(op.ok.0),
            "content": { "application/json": { "schema": schema_ref(schema) } }
        }),
        None => json!({ "description": describe(op.ok.0) }),
    };
    responses.insert(op.ok.0.to_owned(), ok);
    for code in op.errors {
        let body = if code.starts_with('4') {
            json!({
                "description": describe(code),
                "content": { "application/json": { "schema": schema_ref("Error") } }
            })
        } else {
            json!({ "description": describe(code) })
        };
        responses.insert((*code).to_owned(), body);
    }

    let mut out = Map::new();
    out.insert("summary".into(), json!(op.summary));
    let params: Vec<Value> = op
        .path
        .split('/')
        .filter_map(|seg| seg.strip_prefix('{').and_then(|s| s.strip_suffix('}')))
        .map(|name| json!({ "name": name, "in": "path", "required": true, "schema": { "type": "string" } }))
        .collect();
    let mut params = params;
    if op.path.ends_with("/submit") {
        params.push(json!({
            "name": "X-Dedup-Key", "in": "header", "required": false,
            "description": "Retries with the same key return the first receipt",
            "schema": { "type": "string" }
        }));
    }
    if op.path.ends_with("/export") {
        params.push(json!({
            "name": "format", "in": "query", "required": false,
            "schema": { "type": "string", "enum": ["scoresCsv", "fullJson"] }
        }));
    }
    if op.path.starts_with("/media") || op.path.starts_with("/resources") {
        params.push(json!({ "name": "Range", "in": "header", "required": false, "schema": { "type": "string" } }));
    }
    if !params.is_empty() {
        out.insert("parameters".into(), Value::Array(params));
    }
    if let Some(body) = op.body {
        out.insert(
            "requestBody".into(),
            json!({ "required": true, "content": { "application/json": { "schema": schema_ref(body) } } }),
        );
    }
    if op.public {
        out.insert("security".into(), json!([]));
    }
    out.insert("responses".into(), Value::Object(responses));
    Value::Object(out)
}

pub fn document() -> Value {
    let mut paths = Map::new();
    for op in OPS {
        let entry = paths.entry(op.path.to_owned()).or_insert_with(|| json!({}));
        entry[op.method] = operation(op);
    }
    json!({
        "openapi": "3.0.3",
        "info": { "title": "evalkit", "version": env!("CARGO_PKG_VERSION") },
        "servers": [{ "url": "/" }],
        "security": [{ "bearer": [] }, { "cookie": [] }],
        "paths": paths,
        "components": {
            "securitySchemes": {
                "bearer": { "type": "http", "scheme": "bearer" },
                "cookie": { "type": "apiKey", "in": "cookie", "name": crate::auth::SESSION_COOKIE }
            },
            "schemas": schemas()
        }
    })
}
