use std::net::SocketAddr;

use burst_core::wire::{self, BurstPart, BurstRequest, BurstResponse, ObjectRef, ResponseFrame, WireError};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

use crate::FetchError;

const READ_CHUNK: usize = 64 * 1024;

/// One keep-alive connection, owned by a single worker.
#[derive(Debug)]
pub struct HttpConnection {
    stream: TcpStream,
    host: String,
    buf: Vec<u8>,
    bytes_read: u64,
    bytes_written: u64,
    requests: usize,
}

impl HttpConnection {
    pub async fn connect(addr: SocketAddr, host: &str) -> Result<Self, FetchError> {
        let stream = TcpStream::connect(addr)
            .await
            .map_err(|source| FetchError::Connect { addr, source })?;
        stream.set_nodelay(true)?;
        Ok(Self {
            stream,
            host: host.to_owned(),
            buf: Vec::with_capacity(READ_CHUNK),
            bytes_read: 0,
            bytes_written: 0,
            requests: 0,
        })
    }

    pub async fn get(&mut self, path: &ObjectRef) -> Result<ResponseFrame, FetchError> {
        self.send(&wire::encode_get_request(path, &self.host)).await?;
        self.read_frame().await
    }

    /// Sends one BURST request and reads every part of the answer.
    pub async fn burst(&mut self, req: &BurstRequest) -> Result<BurstResponse, FetchError> {
        self.send(&wire::encode_burst_request(req, &self.host)).await?;
        let mut parts = Vec::with_capacity(req.len());
        for (index, path) in req.paths().iter().enumerate() {
            let frame = self.read_frame().await?;
            parts.push(BurstPart::from_frame(frame, index, path)?);
        }
        Ok(BurstResponse { parts })
    }

    /// Bytes written plus bytes read on this connection.
    pub fn bytes_on_wire(&self) -> u64 {
        self.bytes_read + self.bytes_written
    }

    pub fn requests_sent(&self) -> usize {
        self.requests
    }

    async fn send(&mut self, bytes: &[u8]) -> Result<(), FetchError> {
        self.stream.write_all(bytes).await?;
        self.bytes_written += bytes.len() as u64;
        self.requests += 1;
        Ok(())
    }

    async fn fill(&mut self) -> Result<(), FetchError> {
        self.buf.reserve(READ_CHUNK);
        let n = self.stream.read_buf(&mut self.buf).await?;
        if n == 0 {
            return Err(WireError::IncompleteFrame.into());
        }
        self.bytes_read += n as u64;
        Ok(())
    }

    async fn read_frame(&mut self) -> Result<ResponseFrame, FetchError> {
        let head = loop {
            if let Some(head) = wire::decode_response_head(&self.buf)? {
                break head;
            }
            self.fill().await?;
        };
        let total = head.head_len + head.content_length;
        self.buf.reserve(total.saturating_sub(self.buf.len()));
        while self.buf.len() < total {
            self.fill().await?;
        }
        let body = self.buf[head.head_len..total].to_vec();
        self.buf.drain(..total);
        Ok(ResponseFrame {
            status: head.status,
            reason: head.reason,
            headers: head.headers,
            body,
        })
    }
}
