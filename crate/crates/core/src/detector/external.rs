//! Line-delimited JSON scorer adapter over TCP.
//!
//! On connect the server sends one handshake line
//! `{"protocol":"phishscan-scorer","version":1}`. Each request is a line
//! `{"id":N,"text":"..."}` answered by `{"id":N,"confidence":p}`.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};

use super::{Scorer, ScorerError};
use crate::window::Chunk;

pub const PROTOCOL: &str = "phishscan-scorer";
pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol: String,
    pub version: u32,
}

impl Handshake {
    pub fn current() -> Self {
        Handshake { protocol: PROTOCOL.to_string(), version: PROTOCOL_VERSION }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: u64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub id: u64,
    pub confidence: f64,
}

struct Conn {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

struct Pool {
    idle: Vec<Conn>,
    in_flight: usize,
}

pub struct ExternalScorer {
    addr: SocketAddr,
    timeout: Duration,
    max_in_flight: usize,
    pool: Mutex<Pool>,
    freed: Condvar,
    next_id: AtomicU64,
}

fn io_err(timeout: Duration) -> impl Fn(std::io::Error) -> ScorerError {
    move |e| match e.kind() {
        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => {
            ScorerError::Timeout(timeout.as_millis() as u64)
        }
        _ => ScorerError::Unavailable(e.to_string()),
    }
}

impl ExternalScorer {
    pub fn new(addr: impl ToSocketAddrs, timeout: Duration, max_in_flight: usize) -> Result<Self, ScorerError> {
        let addr = addr
            .to_socket_addrs()
            .map_err(|e| ScorerError::Unavailable(e.to_string()))?
            .next()
            .ok_or_else(|| ScorerError::Unavailable("address did not resolve".into()))?;
        Ok(ExternalScorer {
            addr,
            timeout,
            max_in_flight: max_in_flight.max(1),
            pool: Mutex::new(Pool { idle: Vec::new(), in_flight: 0 }),
            freed: Condvar::new(),
            next_id: AtomicU64::new(1),
        })
    }

    fn connect(&self) -> Result<Conn, ScorerError> {
        let map = io_err(self.timeout);
        let stream = TcpStream::connect_timeout(&self.addr, self.timeout).map_err(&map)?;
        stream.set_read_timeout(Some(self.timeout)).map_err(&map)?;
        stream.set_write_timeout(Some(self.timeout)).map_err(&map)?;
        stream.set_nodelay(true).map_err(&map)?;
        let mut reader = BufReader::new(stream.try_clone().map_err(&map)?);
        let mut line = String::new();
        reader.read_line(&mut line).map_err(&map)?;
        let hs: Handshake =
            serde_json::from_str(line.trim()).map_err(|e| ScorerError::Protocol(format!("handshake: {e}")))?;
        if hs.protocol != PROTOCOL || hs.version != PROTOCOL_VERSION {
            return Err(ScorerError::Protocol(format!("unsupported peer {} v{}", hs.protocol, hs.version)));
        }
        Ok(Conn { reader, writer: stream })
    }

    fn checkout(&self) -> Result<Conn, ScorerError> {
        let mut pool = self.pool.lock();
        while pool.in_flight >= self.max_in_flight {
            self.freed.wait(&mut pool);
        }
        pool.in_flight += 1;
        if let Some(c) = pool.idle.pop() {
            return Ok(c);
        }
        drop(pool);
        self.connect().inspect_err(|_| self.release(None))
    }

    fn release(&self, conn: Option<Conn>) {
        let mut pool = self.pool.lock();
        pool.in_flight -= 1;
        if let Some(c) = conn {
            pool.idle.push(c);
        }
        self.freed.notify_one();
    }

    fn exchange(&self, conn: &mut Conn, text: String) -> Result<f64, ScorerError> {
        let map = io_err(self.timeout);
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let mut line = serde_json::to_string(&ScoreRequest { id, text }).expect("request serialises");
        line.push('\n');
        conn.writer.write_all(line.as_bytes()).map_err(&map)?;
        let mut resp = String::new();
        if conn.reader.read_line(&mut resp).map_err(&map)? == 0 {
            return Err(ScorerError::Unavailable("connection closed".into()));
        }
        let r: ScoreResponse =
            serde_json::from_str(resp.trim()).map_err(|e| ScorerError::Protocol(e.to_string()))?;
        if r.id != id {
            return Err(ScorerError::Protocol(format!("response id {} for request {id}", r.id)));
        }
        if !(0.0..=1.0).contains(&r.confidence) {
            return Err(ScorerError::Protocol(format!("confidence {} out of range", r.confidence)));
        }
        Ok(r.confidence)
    }
}

impl Scorer for ExternalScorer {
    fn score(&self, chunk: &Chunk) -> Result<f64, ScorerError> {
        let mut conn = self.checkout()?;
        match self.exchange(&mut conn, chunk.text()) {
            Ok(p) => {
                self.release(Some(conn));
                Ok(p)
            }
            Err(e) => {
                self.release(None);
                Err(e)
            }
        }
    }

    fn version(&self) -> String {
        format!("external-{PROTOCOL}-v{PROTOCOL_VERSION}@{}", self.addr)
    }
}
