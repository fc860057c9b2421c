//! Local HTTP and WebSocket gateway over the authoring pipeline.
//!
//! Every endpoint is a thin wrapper over one `idi_core` call. Mutations are
//! serialized, each bumps the scene version counter and pushes an undo
//! entry. See `docs/api.md` for the endpoint table.

mod error;
mod routes;
mod session;
mod stream;

use std::net::{Ipv4Addr, SocketAddr};

pub use error::{status_for, ApiError, ApiResult};
pub use routes::router;
pub use session::{AppState, ServiceConfig, Session, Snapshot, DEFAULT_FRAME_EVERY, DEFAULT_PORT, UNDO_DEPTH};
pub use stream::{frame_message, RunHandle, RunOutcome, RunStatus};

use idi_core::IdiScene;

/// Header carrying the scene version on `GET /scene`.
pub const VERSION_HEADER: &str = "x-scene-version";

/// Binds 127.0.0.1 on the configured port (0 picks a free one) and returns
/// the bound address with the server future.
pub async fn bind(
    config: ServiceConfig,
    scene: IdiScene,
) -> std::io::Result<(SocketAddr, impl std::future::Future<Output = std::io::Result<()>>)> {
    let listener = tokio::net::TcpListener::bind((Ipv4Addr::LOCALHOST, config.port)).await?;
    let addr = listener.local_addr()?;
    let app = router(Session::new(config, scene));
    Ok((addr, async move { axum::serve(listener, app).await }))
}

/// Runs the service until the process is stopped.
pub async fn serve(config: ServiceConfig, scene: IdiScene) -> std::io::Result<()> {
    let (addr, server) = bind(config, scene).await?;
    log::info!("listening on http://{addr}");
    server.await
}
