pub mod commands;
pub mod config;
pub mod service;

use std::net::SocketAddr;
use std::sync::Arc;

use headscope::{Error, ErrorKind, Result};

use crate::config::{Command, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTEGRITY: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Size { .. } | Error::Range { .. } => EXIT_CONFIG,
        _ => match e.kind() {
            ErrorKind::Format | ErrorKind::Integrity => EXIT_INTEGRITY,
            ErrorKind::Request | ErrorKind::Io => EXIT_RUNTIME,
        },
    }
}

/// Builds the API session described by `c`.
pub fn session(c: &RunConfig) -> Result<service::ApiSession> {
    c.validate(Command::Serve)?;
    let bundle = commands::load_model(c.model.as_ref().expect("validated"))?;
    let vocab = commands::load_vocab(c)?;
    Ok(service::ApiSession::new(
        bundle,
        vocab,
        c.output_dir.clone(),
        c.max_pieces,
        c.cache_entries,
    ))
}

pub fn serve(c: &RunConfig, addr: SocketAddr) -> Result<()> {
    let session = Arc::new(session(c)?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Io {
        path: "tokio runtime".into(),
        source: e,
    })?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| Error::Io {
            path: addr.to_string().into(),
            source: e,
        })?;
        log::info!("listening on http://{addr}");
        axum::serve(listener, service::router(session))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Error::Io {
                path: addr.to_string().into(),
                source: e,
            })
    })
}
