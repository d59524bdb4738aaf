//! Network boundary for the simulated robot: map snapshots, goal
//! submission and a live state stream over HTTP and WebSocket.

pub mod api;
pub mod config;
pub mod document;
pub mod session;

use std::sync::Arc;

pub use api::{router, AppState};
pub use config::{bind_addr_from_env, Settings};
pub use document::{decode, encode, MapDocument};
pub use session::{EventKind, PlanSummary, RunState, StateEvent};

/// Builds the session map from `settings` and serves until the listener
/// fails.
pub async fn serve(settings: Settings, listener: tokio::net::TcpListener) -> anyhow::Result<()> {
    let (map, start) = settings.build_map()?;
    let state = AppState::new(settings, map, start);
    axum::serve(listener, router(Arc::clone(&state))).await?;
    Ok(())
}
