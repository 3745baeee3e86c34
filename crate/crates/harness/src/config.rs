//! Server configuration file.
//!
//! ```toml
//! bind = "127.0.0.1"
//! port = 8080
//! data_dir = "data"
//!
//! [admin]
//! username = "admin"
//! password = "change-me"
//!
//! [[collections]]
//! name = "vbs"
//! path = "/srv/media/vbs"
//! ```
//!
//! Relative paths are taken relative to the directory of the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_port")]
    pub port: u16,
    pub data_dir: PathBuf,
    #[serde(default)]
    pub admin: Option<AdminCredentials>,
    /// Media directories ingested at startup.
    #[serde(default)]
    pub collections: Vec<MediaRoot>,
    #[serde(default)]
    pub snapshot_every: Option<u64>,
    #[serde(default)]
    pub fsync: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdminCredentials {
    pub username: String,
    pub password: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediaRoot {
    pub name: String,
    pub path: PathBuf,
}

fn default_bind() -> String {
    "127.0.0.1".into()
}

fn default_port() -> u16 {
    8080
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let config: Config =
            toml::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        if config.snapshot_every == Some(0) {
            return Err(HarnessError::ConfigInvalid(
                "snapshot_every must be positive".into(),
            ));
        }
        if let Some(admin) = &config.admin {
            if admin.username.is_empty() || admin.password.is_empty() {
                return Err(HarnessError::ConfigInvalid(
                    "admin username and password must not be empty".into(),
                ));
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.data_dir = base.join(&config.data_dir);
        for c in &mut config.collections {
            c.path = base.join(&c.path);
        }
        Ok(config)
    }

    pub fn address(&self) -> String {
        format!("{}:{}", self.bind, self.port)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = Config::parse("data_dir = \"d\"\n").unwrap();
        assert_eq!(c.address(), "127.0.0.1:8080");
        assert!(c.admin.is_none());
        assert!(c.collections.is_empty());
    }

    #[test]
    fn full_config() {
        let c = Config::parse(
            "bind = \"0.0.0.0\"\nport = 9000\ndata_dir = \"d\"\nfsync = false\n\n[admin]\nusername = \"root\"\npassword = \"pw\"\n\n[[collections]]\nname = \"vbs\"\npath = \"media\"\n",
        )
        .unwrap();
        assert_eq!(c.port, 9000);
        assert_eq!(c.admin.unwrap().username, "root");
        assert_eq!(c.collections[0].name, "vbs");
        assert_eq!(c.fsync, Some(false));
    }

    #[test]
    fn errors_name_the_line() {
        let e = Config::parse("data_dir = \"d\"\nport = \"eighty\"\n").unwrap_err();
        assert_eq!(e.kind(), "configInvalid");
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = Config::parse("data_dir = \"d\"\nprot = 1\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = Config::parse("port = 1\n").unwrap_err();
        assert!(e.to_string().contains("data_dir"), "{e}");
    }
}
