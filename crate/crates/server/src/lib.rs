//! HTTP API of the evaluation server: sessions, role gating, submission,
//! state polling, conductor commands, judging, export and media delivery.

pub mod auth;
pub mod error;
pub mod openapi;
pub mod roles;
pub mod routes;
pub mod state;
pub mod store;

use std::time::Duration;

use tokio::net::TcpListener;
use tokio::task::JoinHandle;

pub use error::ApiError;
pub use routes::router;
pub use state::{AppState, Options, StartupError};

/// How often the background sweep looks for timeouts.
pub const SWEEP_INTERVAL: Duration = Duration::from_millis(250);

/// Ticks every evaluation on a fixed interval so timeouts end tasks even
/// when nobody polls.
pub fn spawn_sweeper(state: AppState) -> JoinHandle<()> {
    tokio::spawn(async move {
        let mut interval = tokio::time::interval(SWEEP_INTERVAL);
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        loop {
            interval.tick().await;
            state.sweep();
        }
    })
}

/// Serves the API on `listener` until the process ends.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    let sweeper = spawn_sweeper(state.clone());
    let result = axum::serve(listener, router(state)).await;
    sweeper.abort();
    result
}
