//! Request handlers. Each one pays the configured processing delay before
//! its first response byte.

use burst_core::wire::{self, BurstRequest, ObjectRef};
use tokio::io::{AsyncWrite, AsyncWriteExt};

use crate::files::{self, Lookup};
use crate::ServerConfig;

/// Full response to a GET for `target`.
pub async fn handle_get(target: &str, config: &ServerConfig) -> Vec<u8> {
    pause(config).await;
    match read_object(config, target).await {
        Ok((content_type, body)) => wire::encode_get_response(200, content_type, &body),
        Err(lookup) => wire::encode_get_response(lookup.status(), "text/plain", b""),
    }
}

/// Streams one part per requested path, in request order.
///
/// The processing delay is paid once for the whole burst, or once per part
/// when `per_object_delay` is set. Objects that cannot be served become 404
/// parts.
pub async fn handle_burst<W>(req: &BurstRequest, config: &ServerConfig, out: &mut W) -> std::io::Result<()>
where
    W: AsyncWrite + Unpin,
{
    if !config.per_object_delay {
        pause(config).await;
    }
    for path in req.paths() {
        if config.per_object_delay {
            pause(config).await;
        }
        write_part(path, config, out).await?;
    }
    Ok(())
}

/// [`handle_burst`] collected into a buffer.
pub async fn handle_burst_bytes(req: &BurstRequest, config: &ServerConfig) -> Vec<u8> {
    let mut out = Vec::new();
    handle_burst(req, config, &mut out)
        .await
        .expect("writing to a Vec cannot fail");
    out
}

async fn write_part<W>(path: &ObjectRef, config: &ServerConfig, out: &mut W) -> std::io::Result<()>
where
    W: AsyncWrite + Unpin,
{
    match read_object(config, path.as_str()).await {
        Ok((content_type, body)) => {
            out.write_all(&wire::encode_part_head(path, 200, content_type, body.len()))
                .await?;
            out.write_all(&body).await
        }
        Err(lookup) => {
            tracing::debug!(%path, ?lookup, "burst part not served");
            out.write_all(&wire::encode_part_head(path, 404, "text/plain", 0)).await
        }
    }
}

async fn read_object(config: &ServerConfig, target: &str) -> Result<(&'static str, Vec<u8>), Lookup> {
    let file = files::resolve(&config.docroot, target)?;
    let body = tokio::fs::read(&file).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Lookup::NotFound,
        _ => Lookup::Unreadable,
    })?;
    Ok((files::content_type(&file), body))
}

async fn pause(config: &ServerConfig) {
    if !config.processing_delay.is_zero() {
        tokio::time::sleep(config.processing_delay).await;
    }
}
