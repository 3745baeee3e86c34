//! On-disk layout of a server data directory.
//!
//! ```text
//! <root>/templates/<templateId>.json
//! <root>/collections/<name>.json
//! <root>/evaluations/<evaluationId>/events.log (+ snapshots)
//! <root>/resources/<file>
//! <root>/users.json
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use evalkit_core::ids::EvaluationId;
use evalkit_core::model::{EvaluationTemplate, MediaCollection, UserDef};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0:?} cannot be used as a file name")]
    BadName(String),
}

/// Names used as file names must be plain identifiers.
pub fn is_safe_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 128
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b'.')
        && !name.starts_with('.')
}

fn checked(name: &str) -> Result<&str, StoreError> {
    if is_safe_name(name) {
        Ok(name)
    } else {
        Err(StoreError::BadName(name.to_owned()))
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| StoreError::Parse {
        path: path.to_owned(),
        source,
    })
}

/// Writes pretty JSON through a temporary file and a rename.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| StoreError::Parse {
        path: path.to_owned(),
        source,
    })?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text + "\n").map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    /// Opens `root`, creating the directory layout if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = Self { root: root.into() };
        for sub in ["templates", "collections", "evaluations", "resources"] {
            let p = dir.root.join(sub);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        Ok(dir)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn resources_dir(&self) -> PathBuf {
        self.root.join("resources")
    }

    fn list_json<T: DeserializeOwned>(&self, sub: &str) -> Result<Vec<T>, StoreError> {
        let dir = self.root.join(sub);
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        paths.iter().map(|p| read_json(p)).collect()
    }

    pub fn template_path(&self, id: &str) -> Result<PathBuf, StoreError> {
        Ok(self
            .root
            .join("templates")
            .join(format!("{}.json", checked(id)?)))
    }

    pub fn load_templates(&self) -> Result<Vec<EvaluationTemplate>, StoreError> {
        self.list_json("templates")
    }

    pub fn load_template(&self, id: &str) -> Result<EvaluationTemplate, StoreError> {
        read_json(&self.template_path(id)?)
    }

    pub fn save_template(&self, tpl: &EvaluationTemplate) -> Result<PathBuf, StoreError> {
        let path = self.template_path(tpl.id.as_str())?;
        write_json(&path, tpl)?;
        Ok(path)
    }

    pub fn load_collections(&self) -> Result<Vec<MediaCollection>, StoreError> {
        self.list_json("collections")
    }

    pub fn save_collection(&self, col: &MediaCollection) -> Result<PathBuf, StoreError> {
        let path = self
            .root
            .join("collections")
            .join(format!("{}.json", checked(&col.name)?));
        write_json(&path, col)?;
        Ok(path)
    }

    fn users_path(&self) -> PathBuf {
        self.root.join("users.json")
    }

    pub fn load_users(&self) -> Result<Vec<UserDef>, StoreError> {
        let path = self.users_path();
        if !path.exists() {
            return Ok(Vec::new());
        }
        read_json(&path)
    }

    pub fn save_users(&self, users: &[UserDef]) -> Result<(), StoreError> {
        write_json(&self.users_path(), &users)
    }

    pub fn evaluation_dir(&self, id: &EvaluationId) -> Result<PathBuf, StoreError> {
        Ok(self.root.join("evaluations").join(checked(id.as_str())?))
    }

    /// Ids of every evaluation directory, sorted.
    pub fn evaluation_ids(&self) -> Result<Vec<EvaluationId>, StoreError> {
        let dir = self.root.join("evaluations");
        let mut ids: Vec<EvaluationId> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().to_str().map(EvaluationId::from))
            .collect();
        ids.sort();
        Ok(ids)
    }
}
