use std::sync::Arc;

use burst_core::wire::{self, BurstRequest, RequestFrame, WireError, BURST_COUNT, BURST_METHOD};
use tokio::io::{AsyncReadExt, AsyncWriteExt, BufWriter};
use tokio::net::TcpStream;
use tokio::sync::watch;

use crate::handler::{handle_burst, handle_get};
use crate::{ServerConfig, Stats};

pub const STATS_PATH: &str = "/_stats";

/// Bytes of path list allowed per permitted burst entry before the request
/// is refused without being buffered further.
const BODY_BYTES_PER_PATH: usize = 2048;

enum Next {
    KeepAlive,
    Close,
}

/// Serves keep-alive requests on one connection, one at a time, until the
/// peer closes, a protocol error occurs, or shutdown is signalled while the
/// connection is idle.
pub(crate) async fn serve_connection(
    stream: TcpStream,
    config: Arc<ServerConfig>,
    stats: Arc<Stats>,
    mut shutdown: watch::Receiver<bool>,
) -> std::io::Result<()> {
    stream.set_nodelay(true)?;
    let (mut reader, writer) = stream.into_split();
    let mut writer = BufWriter::new(writer);
    let mut buf: Vec<u8> = Vec::with_capacity(8 * 1024);
    let limit = wire::MAX_HEAD_BYTES + config.max_burst_paths * BODY_BYTES_PER_PATH;
    let mut chunk = vec![0u8; 16 * 1024];

    loop {
        match wire::decode_request_frame(&buf) {
            Ok(Some((frame, used))) => {
                buf.drain(..used);
                let next = dispatch(frame, &config, &stats, &mut writer).await?;
                writer.flush().await?;
                if matches!(next, Next::Close) {
                    break;
                }
                continue;
            }
            Ok(None) if buf.len() > limit => {
                send_status(&mut writer, 413).await?;
                break;
            }
            Ok(None) => {}
            Err(WireError::HeadTooLarge) => {
                send_status(&mut writer, 413).await?;
                break;
            }
            Err(e) => {
                tracing::debug!(error = %e, "unparseable request");
                send_status(&mut writer, 400).await?;
                break;
            }
        }

        if *shutdown.borrow() && buf.is_empty() {
            break;
        }
        let n = tokio::select! {
            n = reader.read(&mut chunk) => n?,
            _ = shutdown.changed(), if buf.is_empty() => break,
        };
        if n == 0 {
            break;
        }
        buf.extend_from_slice(&chunk[..n]);
    }
    writer.shutdown().await.ok();
    Ok(())
}

async fn dispatch<W>(frame: RequestFrame, config: &ServerConfig, stats: &Stats, out: &mut W) -> std::io::Result<Next>
where
    W: tokio::io::AsyncWrite + Unpin,
{
    let close = frame.headers.wants_close();
    let keep = if close { Next::Close } else { Next::KeepAlive };

    match frame.method.as_str() {
        "GET" if frame.target == STATS_PATH => {
            let body = stats.render();
            out.write_all(&wire::encode_get_response(200, "text/plain", body.as_bytes()))
                .await?;
            Ok(keep)
        }
        "GET" => {
            stats.record_request();
            out.write_all(&handle_get(&frame.target, config).await).await?;
            Ok(keep)
        }
        BURST_METHOD => {
            stats.record_burst();
            let declared = frame
                .headers
                .get(BURST_COUNT)
                .and_then(|v| v.trim().parse::<usize>().ok());
            if declared.is_some_and(|k| k > config.max_burst_paths) {
                send_status(out, 413).await?;
                return Ok(keep);
            }
            let req = match BurstRequest::from_frame(&frame) {
                Ok(req) => req,
                Err(e) => {
                    tracing::debug!(error = %e, "rejected burst");
                    send_status(out, 400).await?;
                    return Ok(keep);
                }
            };
            if req.len() > config.max_burst_paths {
                send_status(out, 413).await?;
                return Ok(keep);
            }
            handle_burst(&req, config, out).await?;
            Ok(keep)
        }
        other => {
            stats.record_request();
            tracing::debug!(method = other, "unsupported method");
            send_status(out, 501).await?;
            Ok(keep)
        }
    }
}

async fn send_status<W>(out: &mut W, status: u16) -> std::io::Result<()>
where
    W: tokio::io::AsyncWrite + Unpin,
{
    out.write_all(&wire::encode_get_response(status, "text/plain", b""))
        .await?;
    out.flush().await
}
