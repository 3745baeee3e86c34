//! Shared server state: users, sessions, templates, collections and the
//! running evaluations, each behind its own lock.

use std::collections::BTreeMap;
use std::sync::Arc;

use evalkit_core::clock::Clock;
use evalkit_core::collection::CollectionRegistry;
use evalkit_core::ids::{EvaluationId, TemplateId};
use evalkit_core::lifecycle::{EngineError, EvaluationMode, EvaluationRuntime};
use evalkit_core::model::{validate_template, Actor, EvaluationTemplate, MediaCollection, UserDef};
use evalkit_core::persistence::{
    recover, EventLog, FileLog, MemoryLog, PersistenceError, SNAPSHOT_EVERY,
};
use parking_lot::{Mutex, RwLock};
use tracing::{info, warn};

use crate::auth::{SessionStore, UserError, UserStore};
use crate::error::ApiError;
use crate::store::{is_safe_name, DataDir, StoreError};

pub type SharedRuntime = Arc<Mutex<EvaluationRuntime>>;

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub snapshot_every: u64,
    /// Sync the log to disk on every append.
    pub fsync: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            snapshot_every: SNAPSHOT_EVERY,
            fsync: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("evaluation {id}: {source}")]
    Recovery {
        id: EvaluationId,
        #[source]
        source: PersistenceError,
    },
    #[error("evaluation {0}: recovered id does not match its directory")]
    IdMismatch(EvaluationId),
    #[error(transparent)]
    User(#[from] UserError),
}

pub struct Inner {
    clock: Arc<dyn Clock>,
    data: Option<DataDir>,
    options: Options,
    users: UserStore,
    sessions: SessionStore,
    templates: RwLock<BTreeMap<TemplateId, EvaluationTemplate>>,
    collections: RwLock<Arc<CollectionRegistry>>,
    evaluations: RwLock<BTreeMap<EvaluationId, SharedRuntime>>,
    create_lock: Mutex<()>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// A server that keeps everything in memory.
    pub fn in_memory(
        clock: Arc<dyn Clock>,
        collections: CollectionRegistry,
        users: Vec<UserDef>,
    ) -> Self {
        Self(Arc::new(Inner {
            sessions: SessionStore::new(clock.clone()),
            clock,
            data: None,
            options: Options::default(),
            users: UserStore::new(users),
            templates: RwLock::new(BTreeMap::new()),
            collections: RwLock::new(Arc::new(collections)),
            evaluations: RwLock::new(BTreeMap::new()),
            create_lock: Mutex::new(()),
        }))
    }

    /// A server backed by `data`: loads users, collections and templates and
    /// recovers every evaluation from its log.
    pub fn open(
        data: DataDir,
        clock: Arc<dyn Clock>,
        extra_collections: Vec<MediaCollection>,
        options: Options,
    ) -> Result<Self, StartupError> {
        let mut registry = CollectionRegistry::new();
        for c in data
            .load_collections()?
            .into_iter()
            .chain(extra_collections)
        {
            registry.insert(c);
        }
        let registry = Arc::new(registry);
        let templates = data
            .load_templates()?
            .into_iter()
            .map(|t| (t.id.clone(), t))
            .collect();

        let mut evaluations = BTreeMap::new();
        for id in data.evaluation_ids()? {
            let dir = data.evaluation_dir(&id)?;
            let recovered = recover(&dir).map_err(|source| StartupError::Recovery {
                id: id.clone(),
                source,
            })?;
            if recovered.state.id != id {
                return Err(StartupError::IdMismatch(id));
            }
            info!(evaluation = %id, seq = recovered.state.last_seq, snapshot = ?recovered.snapshot_seq, "recovered");
            let log = recovered
                .log
                .with_sync(options.fsync)
                .with_snapshot_every(options.snapshot_every);
            let rt = EvaluationRuntime::resume(
                recovered.state,
                Box::new(log),
                clock.clone(),
                registry.clone(),
            );
            evaluations.insert(id, Arc::new(Mutex::new(rt)));
        }

        let users = UserStore::new(data.load_users()?);
        Ok(Self(Arc::new(Inner {
            sessions: SessionStore::new(clock.clone()),
            clock,
            data: Some(data),
            options,
            users,
            templates: RwLock::new(templates),
            collections: RwLock::new(registry),
            evaluations: RwLock::new(evaluations),
            create_lock: Mutex::new(()),
        })))
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.0.clock
    }

    pub fn now(&self) -> i64 {
        self.0.clock.now_ms()
    }

    pub fn data_dir(&self) -> Option<&DataDir> {
        self.0.data.as_ref()
    }

    pub fn users(&self) -> &UserStore {
        &self.0.users
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.0.sessions
    }

    pub fn collections(&self) -> Arc<CollectionRegistry> {
        self.0.collections.read().clone()
    }

    /// Registers a user and persists the user list.
    pub fn add_user(&self, user: UserDef) -> Result<(), ApiError> {
        self.0
            .users
            .add(user)
            .map_err(|e| ApiError::conflict("userExists", e.to_string()))?;
        if let Some(data) = &self.0.data {
            data.save_users(&self.0.users.all())
                .map_err(|e| ApiError::internal(e.to_string()))?;
        }
        Ok(())
    }

    /// Adds the bootstrap admin unless a user of that name exists.
    pub fn bootstrap_admin(&self, username: &str, password: &str) -> Result<bool, ApiError> {
        if self.0.users.all().iter().any(|u| u.username == username) {
            return Ok(false);
        }
        self.add_user(UserDef {
            id: username.into(),
            username: username.into(),
            password_hash: crate::auth::hash_password(password),
            role: evalkit_core::model::Role::Admin,
        })?;
        Ok(true)
    }

    pub fn templates(&self) -> Vec<EvaluationTemplate> {
        self.0.templates.read().values().cloned().collect()
    }

    pub fn template(&self, id: &TemplateId) -> Option<EvaluationTemplate> {
        self.0.templates.read().get(id).cloned()
    }

    /// Validates and stores a template, replacing one with the same id.
    pub fn import_template(&self, tpl: EvaluationTemplate) -> Result<TemplateId, ApiError> {
        if !is_safe_name(tpl.id.as_str()) {
            return Err(ApiError::bad_request(
                "validationFailed",
                format!("bad template id {:?}", tpl.id.as_str()),
            ));
        }
        let report = validate_template(&tpl, &self.collections());
        if !report.is_empty() {
            return Err(ApiError::bad_request(
                "validationFailed",
                report.to_string(),
            ));
        }
        if let Some(data) = &self.0.data {
            data.save_template(&tpl)
                .map_err(|e| ApiError::internal(e.to_string()))?;
        }
        let id = tpl.id.clone();
        self.0.templates.write().insert(id.clone(), tpl);
        Ok(id)
    }

    pub fn evaluation(&self, id: &EvaluationId) -> Option<SharedRuntime> {
        self.0.evaluations.read().get(id).cloned()
    }

    pub fn evaluation_ids(&self) -> Vec<EvaluationId> {
        self.0.evaluations.read().keys().cloned().collect()
    }

    fn fresh_id(&self) -> EvaluationId {
        let taken = self.0.evaluations.read();
        (taken.len() + 1..)
            .map(|n| EvaluationId(format!("eval-{n}")))
            .find(|id| !taken.contains_key(id))
            .expect("unbounded range")
    }

    /// Instantiates a stored template as a new evaluation.
    pub fn create_evaluation(
        &self,
        actor: &Actor,
        template: &TemplateId,
        mode: EvaluationMode,
        id: Option<EvaluationId>,
    ) -> Result<EvaluationId, ApiError> {
        if !actor.is_admin() {
            return Err(
                EngineError::NotAuthorized(format!("{} is not an admin", actor.user_id)).into(),
            );
        }
        let tpl = self.template(template).ok_or_else(|| {
            ApiError::not_found("unknownTemplate", format!("unknown template {template}"))
        })?;
        let _guard = self.0.create_lock.lock();
        let id = match id {
            Some(id) if !is_safe_name(id.as_str()) => {
                return Err(ApiError::bad_request(
                    "malformedRequest",
                    format!("bad evaluation id {id}"),
                ))
            }
            Some(id) if self.evaluation(&id).is_some() => {
                return Err(ApiError::conflict(
                    "evaluationExists",
                    format!("evaluation {id} exists"),
                ))
            }
            Some(id) => id,
            None => self.fresh_id(),
        };
        let log: Box<dyn EventLog> = match &self.0.data {
            Some(data) => {
                let dir = data
                    .evaluation_dir(&id)
                    .map_err(|e| ApiError::internal(e.to_string()))?;
                let log = FileLog::create(&dir)
                    .map_err(|e| {
                        ApiError::new(
                            axum::http::StatusCode::INTERNAL_SERVER_ERROR,
                            "storageFailure",
                            e.to_string(),
                        )
                    })?
                    .with_sync(self.0.options.fsync)
                    .with_snapshot_every(self.0.options.snapshot_every);
                Box::new(log)
            }
            None => Box::new(MemoryLog::new()),
        };
        let rt = EvaluationRuntime::create(
            id.clone(),
            tpl,
            mode,
            actor,
            log,
            self.0.clock.clone(),
            self.collections(),
        );
        let rt = match rt {
            Ok(rt) => rt,
            Err(e) => {
                if let Some(data) = &self.0.data {
                    if let Ok(dir) = data.evaluation_dir(&id) {
                        let _ = std::fs::remove_dir_all(dir);
                    }
                }
                return Err(e.into());
            }
        };
        self.0
            .evaluations
            .write()
            .insert(id.clone(), Arc::new(Mutex::new(rt)));
        Ok(id)
    }

    /// Lets every evaluation notice timeouts and end conditions.
    pub fn sweep(&self) {
        let all: Vec<SharedRuntime> = self.0.evaluations.read().values().cloned().collect();
        for rt in all {
            let mut rt = rt.lock();
            if let Err(e) = rt.tick() {
                warn!(evaluation = %rt.id(), error = %e, "sweep failed");
            }
        }
        self.0.sessions.purge();
    }
}
