//! HTTP facade over the extraction pipeline: load volumes, page through
//! slices, submit seeds, launch runs and poll for their centerlines.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/volumes` | load a session, returns its geometry |
//! | GET | `/volumes/{id}` | session geometry |
//! | GET | `/volumes/{id}/slice?axis&index&wc&ww` | PNG slice |
//! | POST | `/volumes/{id}/seeds` | landmark set, returns `seed_set_id` |
//! | GET | `/volumes/{id}/seeds` | all seed sets |
//! | POST | `/runs` | start a track or minpath run |
//! | GET | `/runs/{id}` | status and centerline |
//! | GET | `/runs/{id}/centerline` | centerline document |

pub mod api;
pub mod registry;
pub mod slice;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;
use tower_http::services::ServeDir;

pub use registry::{Registry, RunStatus, Session};

#[derive(Clone, Default)]
pub struct AppState {
    pub registry: Arc<Registry>,
}

/// Routes of the API; with `static_dir`, other paths serve files from it.
pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/volumes", post(api::load))
        .route("/volumes/{id}", get(api::get_volume))
        .route("/volumes/{id}/slice", get(api::get_slice))
        .route("/volumes/{id}/seeds", post(api::post_seeds).get(api::get_seeds))
        .route("/runs", post(api::post_run))
        .route("/runs/{id}", get(api::get_run))
        .route("/runs/{id}/centerline", get(api::get_run_centerline))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::default(), static_dir)).await
}
