//! Users, password digests and sessions.

use std::collections::HashMap;
use std::sync::Arc;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use evalkit_core::clock::Clock;
use evalkit_core::ids::UserId;
use evalkit_core::model::{Role, UserDef};
use parking_lot::RwLock;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SESSION_TTL_MS: i64 = 12 * 60 * 60 * 1000;
pub const SESSION_COOKIE: &str = "evalkit_session";

/// Salted SHA-256 digest in the form `sha256$<salt>$<hex>`.
pub fn hash_password(password: &str) -> String {
    let mut salt = [0u8; 16];
    rand::thread_rng().fill_bytes(&mut salt);
    let salt = hex(&salt);
    format!("sha256${salt}${}", digest(&salt, password))
}

pub fn verify_password(stored: &str, password: &str) -> bool {
    let mut parts = stored.splitn(3, '$');
    let (Some("sha256"), Some(salt), Some(expected)) = (parts.next(), parts.next(), parts.next())
    else {
        return false;
    };
    let actual = digest(salt, password);
    actual.len() == expected.len()
        && actual
            .bytes()
            .zip(expected.bytes())
            .fold(0u8, |acc, (a, b)| acc | (a ^ b))
            == 0
}

fn digest(salt: &str, password: &str) -> String {
    let mut h = Sha256::new();
    h.update(salt.as_bytes());
    h.update(b"$");
    h.update(password.as_bytes());
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Registered users, unique by username.
#[derive(Debug, Default)]
pub struct UserStore {
    by_name: RwLock<HashMap<String, UserDef>>,
}

#[derive(Debug, thiserror::Error)]
pub enum UserError {
    #[error("username {0:?} is taken")]
    Taken(String),
    #[error("user id {0:?} is taken")]
    IdTaken(String),
}

impl UserStore {
    pub fn new(users: impl IntoIterator<Item = UserDef>) -> Self {
        let store = Self::default();
        {
            let mut map = store.by_name.write();
            for u in users {
                map.insert(u.username.clone(), u);
            }
        }
        store
    }

    pub fn add(&self, user: UserDef) -> Result<(), UserError> {
        let mut map = self.by_name.write();
        if map.contains_key(&user.username) {
            return Err(UserError::Taken(user.username));
        }
        if map.values().any(|u| u.id == user.id) {
            return Err(UserError::IdTaken(user.id.to_string()));
        }
        map.insert(user.username.clone(), user);
        Ok(())
    }

    /// The user whose credentials match, if any.
    pub fn authenticate(&self, username: &str, password: &str) -> Option<UserDef> {
        let map = self.by_name.read();
        let user = map.get(username)?;
        verify_password(&user.password_hash, password).then(|| user.clone())
    }

    pub fn all(&self) -> Vec<UserDef> {
        let mut users: Vec<UserDef> = self.by_name.read().values().cloned().collect();
        users.sort_by(|a, b| a.username.cmp(&b.username));
        users
    }

    pub fn len(&self) -> usize {
        self.by_name.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Session {
    pub token: String,
    pub user_id: UserId,
    pub role: Role,
    pub expires_at: i64,
}

/// Live sessions. Expired entries are rejected on lookup and dropped.
pub struct SessionStore {
    clock: Arc<dyn Clock>,
    sessions: RwLock<HashMap<String, Session>>,
}

impl SessionStore {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Self {
            clock,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn open(&self, user: &UserDef) -> Session {
        let mut raw = [0u8; 16];
        rand::thread_rng().fill_bytes(&mut raw);
        let session = Session {
            token: URL_SAFE_NO_PAD.encode(raw),
            user_id: user.id.clone(),
            role: user.role,
            expires_at: self.clock.now_ms() + SESSION_TTL_MS,
        };
        self.sessions
            .write()
            .insert(session.token.clone(), session.clone());
        session
    }

    pub fn get(&self, token: &str) -> Option<Session> {
        let now = self.clock.now_ms();
        let found = self.sessions.read().get(token).cloned()?;
        if now < found.expires_at {
            return Some(found);
        }
        self.sessions.write().remove(token);
        None
    }

    pub fn close(&self, token: &str) -> bool {
        self.sessions.write().remove(token).is_some()
    }

    /// Drops expired sessions.
    pub fn purge(&self) {
        let now = self.clock.now_ms();
        self.sessions.write().retain(|_, s| now < s.expires_at);
    }
}
