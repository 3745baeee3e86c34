//! The command-line verbs, callable without going through argument parsing.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use evalkit_core::clock::ServerClock;
use evalkit_core::collection::{ingest_directory, CollectionRegistry};
use evalkit_core::ids::{EvaluationId, TemplateId};
use evalkit_core::model::{validate_template, EvaluationTemplate, MediaCollection};
use evalkit_core::persistence::{
    export_full_json, export_scores_csv, read_log, recover, ExportFormat,
};
use evalkit_server::store::DataDir;
use evalkit_server::{AppState, Options};
use tokio::net::TcpListener;
use tracing::info;

use crate::config::Config;
use crate::error::HarnessError;

fn open_data(dir: &Path) -> Result<DataDir, HarnessError> {
    DataDir::open(dir).map_err(HarnessError::runtime)
}

fn registry_of(data: &DataDir) -> Result<CollectionRegistry, HarnessError> {
    let mut registry = CollectionRegistry::new();
    for c in data.load_collections().map_err(HarnessError::runtime)? {
        registry.insert(c);
    }
    Ok(registry)
}

/// Parses a template file without validating it.
pub fn read_template(file: &Path) -> Result<EvaluationTemplate, HarnessError> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| HarnessError::ParseError(format!("{}: {e}", file.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| HarnessError::ParseError(format!("{}: {e}", file.display())))
}

/// Validates a template file against the collections of `data_dir` and
/// stores it there.
pub fn import_template(file: &Path, data_dir: &Path) -> Result<TemplateId, HarnessError> {
    let tpl = read_template(file)?;
    let data = open_data(data_dir)?;
    let report = validate_template(&tpl, &registry_of(&data)?);
    if !report.is_empty() {
        return Err(HarnessError::ValidationFailed(report.to_string()));
    }
    data.save_template(&tpl).map_err(|e| match e {
        evalkit_server::store::StoreError::BadName(name) => {
            HarnessError::ValidationFailed(format!("template id {name:?} cannot be stored"))
        }
        other => HarnessError::runtime(other),
    })?;
    Ok(tpl.id)
}

/// The stored template as pretty JSON.
pub fn export_template(id: &str, data_dir: &Path) -> Result<String, HarnessError> {
    let data = open_data(data_dir)?;
    let path = data.template_path(id).map_err(HarnessError::runtime)?;
    if !path.exists() {
        return Err(HarnessError::Runtime(format!("unknown template {id}")));
    }
    let tpl = data.load_template(id).map_err(HarnessError::runtime)?;
    Ok(serde_json::to_string_pretty(&tpl).expect("template serializes") + "\n")
}

/// Scans a media directory and stores its manifest under `name`.
pub fn ingest_collection(
    path: &Path,
    name: &str,
    data_dir: &Path,
) -> Result<MediaCollection, HarnessError> {
    let collection =
        ingest_directory(path, name).map_err(|e| HarnessError::ValidationFailed(e.to_string()))?;
    let data = open_data(data_dir)?;
    data.save_collection(&collection)
        .map_err(HarnessError::runtime)?;
    Ok(collection)
}

/// Recovers a stored evaluation and renders it in `format`.
pub fn export_results(
    data_dir: &Path,
    evaluation: &str,
    format: ExportFormat,
) -> Result<String, HarnessError> {
    let data = open_data(data_dir)?;
    let dir = data
        .evaluation_dir(&EvaluationId::from(evaluation))
        .map_err(HarnessError::runtime)?;
    if !dir.is_dir() {
        return Err(HarnessError::Runtime(format!(
            "unknown evaluation {evaluation}"
        )));
    }
    let state = recover(&dir).map_err(HarnessError::runtime)?.state;
    match format {
        ExportFormat::ScoresCsv => export_scores_csv(&state),
        ExportFormat::FullJson => {
            let events = read_log(&dir).map_err(HarnessError::runtime)?;
            export_full_json(&state, &events)
        }
    }
    .map_err(HarnessError::runtime)
}

/// Opens the data directory, ingests the configured media roots, bootstraps
/// the admin account and binds the listener.
pub async fn prepare_server(config: &Config) -> Result<(TcpListener, AppState), HarnessError> {
    let data = open_data(&config.data_dir)?;
    let mut media = Vec::new();
    for root in &config.collections {
        let c = ingest_directory(&root.path, &root.name)
            .map_err(|e| HarnessError::ConfigInvalid(format!("collection {}: {e}", root.name)))?;
        info!(collection = %c.name, items = c.items.len(), "ingested");
        media.push(c);
    }
    let mut options = Options::default();
    if let Some(n) = config.snapshot_every {
        options.snapshot_every = n;
    }
    if let Some(sync) = config.fsync {
        options.fsync = sync;
    }
    let state = AppState::open(data, Arc::new(ServerClock::new()), media, options)
        .map_err(HarnessError::runtime)?;
    if let Some(admin) = &config.admin {
        if state
            .bootstrap_admin(&admin.username, &admin.password)
            .map_err(|e| HarnessError::Runtime(e.message))?
        {
            info!(user = %admin.username, "admin account created");
        }
    }
    let listener = TcpListener::bind(config.address()).await.map_err(|e| {
        if e.kind() == std::io::ErrorKind::AddrInUse {
            HarnessError::PortInUse(config.address())
        } else {
            HarnessError::Runtime(format!("{}: {e}", config.address()))
        }
    })?;
    Ok((listener, state))
}

/// Runs the server described by `config` until the process ends.
pub async fn serve(config: &Config) -> Result<(), HarnessError> {
    let (listener, state) = prepare_server(config).await?;
    let addr: SocketAddr = listener.local_addr().map_err(HarnessError::runtime)?;
    info!(%addr, evaluations = state.evaluation_ids().len(), "listening");
    evalkit_server::serve(listener, state)
        .await
        .map_err(HarnessError::runtime)
}
