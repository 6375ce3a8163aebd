//! WebSocket front end: one envelope per text frame.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};

use super::Bridge;
use crate::messages::Level;

/// Router serving the bridge endpoint at `/`.
pub fn router(bridge: Bridge) -> Router {
    Router::new().route("/", get(upgrade)).with_state(bridge)
}

async fn upgrade(ws: WebSocketUpgrade, State(bridge): State<Bridge>) -> Response {
    ws.on_upgrade(move |socket| serve_socket(bridge, socket))
}

/// Runs one client connection until either side closes.
pub async fn serve_socket(bridge: Bridge, socket: WebSocket) {
    let session = Arc::new(bridge.connect());
    let id = session.id();
    tracing::info!(session = id, "client connected");
    let (mut tx, mut rx) = socket.split();

    let writer_session = session.clone();
    let writer = tokio::spawn(async move {
        while let Some(d) = writer_session.recv().await {
            if tx
                .send(Message::Text(d.text.as_ref().into()))
                .await
                .is_err()
            {
                break;
            }
        }
        let _ = tx.close().await;
    });

    while let Some(frame) = rx.next().await {
        match frame {
            Ok(Message::Text(text)) => session.send_text(text.as_str()),
            Ok(Message::Binary(_)) => {
                bridge.send_status(id, Level::Error, "binary frames are not supported")
            }
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => {}
        }
    }

    bridge.drop_session(id);
    let _ = writer.await;
    tracing::info!(session = id, "client disconnected");
}

/// Binds and serves `app` until `shutdown` resolves.
pub async fn serve(
    app: Router,
    addr: SocketAddr,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
}
