//! Summary exchange between nodes and a coordinator.
//!
//! Each node publishes one [`NodeSummaryMessage`], a single line of JSON:
//!
//! ```text
//! {"v":1,"node_id":"a","summary":{"n":..,"d":..,"order":4,"mean":[..],"s2":[..],"s3":[..],"s4":[..]},"digest":"..."}
//! ```
//!
//! and reads back one response line, `{"ok":true}` or
//! `{"ok":false,"error":"..."}`. The coordinator never sees raw samples; once
//! enough nodes have reported it computes the pairwise [`HMatrix`].
//!
//! Lines travel over any [`LineTransport`]. Two are provided: an in-process
//! channel pair and TCP. Connection handlers run concurrently, but every
//! registry update goes through a single writer loop.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::approx::energy_from_summaries;
use crate::error::{Error, Result};
use crate::estimate::{Flags, Method};
use crate::moments::MomentSummary;

pub const SCHEMA_VERSION: u32 = 1;

const POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummaryMessage {
    #[serde(rename = "v")]
    pub schema_version: u32,
    pub node_id: String,
    pub summary: MomentSummary,
    /// Hex SHA-256 of the source data file.
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "digest")]
    pub sample_digest: Option<String>,
}

impl NodeSummaryMessage {
    pub fn new(node_id: impl Into<String>, summary: MomentSummary) -> Self {
        Self { schema_version: SCHEMA_VERSION, node_id: node_id.into(), summary, sample_digest: None }
    }

    pub fn with_digest(mut self, digest: String) -> Self {
        self.sample_digest = Some(digest);
        self
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("message serializes")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        Ok(serde_json::from_str(line.trim_end())?)
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn ok() -> Self {
        Self { ok: true, error: None }
    }

    pub fn err(msg: impl Into<String>) -> Self {
        Self { ok: false, error: Some(msg.into()) }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("response serializes")
    }
}

/// Summaries keyed by node id, plus the reasons for every rejected message.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub summaries: BTreeMap<String, MomentSummary>,
    #[serde(default)]
    pub rejections: Vec<String>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.summaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.summaries.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.summaries.values().next().map(MomentSummary::d)
    }

    /// Validates and stores one message. Rejections leave the registry
    /// unchanged apart from the rejection log.
    pub fn submit(&mut self, msg: NodeSummaryMessage) -> Result<()> {
        let outcome = self.check(&msg);
        match outcome {
            Ok(()) => {
                self.summaries.insert(msg.node_id, msg.summary);
                Ok(())
            }
            Err(e) => {
                self.rejections.push(e.to_string());
                Err(e)
            }
        }
    }

    fn check(&self, msg: &NodeSummaryMessage) -> Result<()> {
        if msg.schema_version != SCHEMA_VERSION {
            return Err(Error::Protocol(format!(
                "schema version mismatch: got {}, expected {SCHEMA_VERSION}",
                msg.schema_version
            )));
        }
        if msg.node_id.is_empty() {
            return Err(Error::Protocol("empty node_id".into()));
        }
        if self.summaries.contains_key(&msg.node_id) {
            return Err(Error::Protocol(format!("duplicate node_id {:?}", msg.node_id)));
        }
        if let Some(d) = self.dimension() {
            if d != msg.summary.d() {
                return Err(Error::Protocol(format!(
                    "dimension mismatch: node {:?} has d={}, registry has d={d}",
                    msg.node_id,
                    msg.summary.d()
                )));
            }
        }
        Ok(())
    }

    /// Parses and submits one wire line, producing the coordinator's reply.
    pub fn handle_line(&mut self, line: &str) -> Response {
        match NodeSummaryMessage::from_line(line) {
            Err(e) => {
                let msg = format!("malformed message: {e}");
                self.rejections.push(msg.clone());
                Response::err(msg)
            }
            Ok(msg) => match self.submit(msg) {
                Ok(()) => Response::ok(),
                Err(e) => Response::err(e.to_string()),
            },
        }
    }
}

/// Builds a registry from a stream of wire lines.
pub fn collect<I, S>(lines: I) -> Registry
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut reg = Registry::new();
    for line in lines {
        reg.handle_line(line.as_ref());
    }
    reg
}

/// Pairwise energy coefficients between nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HMatrix {
    pub ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub method: Method,
    pub flags: Vec<Vec<Flags>>,
    /// Mean of the strict upper triangle.
    pub mean: f64,
    /// Population standard deviation of the strict upper triangle.
    pub sd: f64,
}

impl HMatrix {
    pub fn k(&self) -> usize {
        self.ids.len()
    }

    pub fn upper_triangle(&self) -> impl Iterator<Item = f64> + '_ {
        let k = self.k();
        (0..k).flat_map(move |i| (i + 1..k).map(move |j| self.values[i][j]))
    }
}

/// Computes H for every pair of registered nodes.
pub fn h_matrix(registry: &Registry, method: Method) -> Result<HMatrix> {
    let k = registry.len();
    if k < 2 {
        return Err(Error::Protocol(format!("need at least 2 nodes, have {k}")));
    }
    let ids: Vec<String> = registry.summaries.keys().cloned().collect();
    let sums: Vec<&MomentSummary> = registry.summaries.values().collect();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let results: Vec<_> = pairs
        .par_iter()
        .map(|&(i, j)| energy_from_summaries(sums[i], sums[j], method))
        .collect::<Result<_>>()?;

    let mut values = vec![vec![0.0; k]; k];
    let mut flags = vec![vec![Flags::new(); k]; k];
    for (&(i, j), est) in pairs.iter().zip(&results) {
        values[i][j] = est.h;
        values[j][i] = est.h;
        flags[i][j] = est.flags.clone();
        flags[j][i] = est.flags.clone();
    }
    let upper: Vec<f64> = results.iter().map(|e| e.h).collect();
    let mean = upper.iter().sum::<f64>() / upper.len() as f64;
    let sd = (upper.iter().map(|h| (h - mean) * (h - mean)).sum::<f64>() / upper.len() as f64).sqrt();
    Ok(HMatrix { ids, values, method, flags, mean, sd })
}

/// `w = λ₀ (1 − H)`: identical nodes get the full weight λ₀.
pub fn linear_penalty(lambda0: f64) -> impl Fn(f64) -> f64 {
    move |h| lambda0 * (1.0 - h)
}

/// Penalty weights with the default linear mapping.
pub fn penalty_weights(h: &HMatrix, lambda0: f64) -> Vec<Vec<f64>> {
    assert!(lambda0 > 0.0, "lambda0 must be positive");
    penalty_weights_with(h, linear_penalty(lambda0))
}

/// Penalty weights from any mapping of H.
pub fn penalty_weights_with(h: &HMatrix, map: impl Fn(f64) -> f64) -> Vec<Vec<f64>> {
    h.values.iter().map(|row| row.iter().map(|&v| map(v)).collect()).collect()
}

/// A reliable, line-oriented byte stream.
pub trait LineTransport {
    fn send_line(&mut self, line: &str) -> Result<()>;
    /// Next line without its terminator, or `None` once the peer is gone.
    fn recv_line(&mut self) -> Result<Option<String>>;
}

/// One end of an in-process duplex channel.
pub struct ChannelTransport {
    tx: Sender<String>,
    rx: Receiver<String>,
}

/// Two connected channel endpoints.
pub fn channel_pair() -> (ChannelTransport, ChannelTransport) {
    let (a_tx, b_rx) = mpsc::channel();
    let (b_tx, a_rx) = mpsc::channel();
    (ChannelTransport { tx: a_tx, rx: a_rx }, ChannelTransport { tx: b_tx, rx: b_rx })
}

impl LineTransport for ChannelTransport {
    fn send_line(&mut self, line: &str) -> Result<()> {
        self.tx.send(line.to_string()).map_err(|_| Error::Protocol("peer disconnected".into()))
    }

    fn recv_line(&mut self) -> Result<Option<String>> {
        Ok(self.rx.recv().ok())
    }
}

pub struct TcpTransport {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl TcpTransport {
    pub fn new(stream: TcpStream) -> Result<Self> {
        stream.set_nonblocking(false)?;
        let writer = stream.try_clone()?;
        Ok(Self { reader: BufReader::new(stream), writer })
    }

    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        Self::new(TcpStream::connect(addr)?)
    }
}

impl LineTransport for TcpTransport {
    fn send_line(&mut self, line: &str) -> Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }

    fn recv_line(&mut self) -> Result<Option<String>> {
        let mut buf = String::new();
        if self.reader.read_line(&mut buf)? == 0 {
            return Ok(None);
        }
        while buf.ends_with('\n') || buf.ends_with('\r') {
            buf.pop();
        }
        Ok(Some(buf))
    }
}

/// Source of incoming connections for [`run_coordinator`].
pub trait Acceptor {
    type Conn: LineTransport + Send + 'static;
    /// Waits up to `timeout` for a connection.
    fn accept_timeout(&mut self, timeout: Duration) -> Result<Option<Self::Conn>>;
}

impl Acceptor for Receiver<ChannelTransport> {
    type Conn = ChannelTransport;

    fn accept_timeout(&mut self, timeout: Duration) -> Result<Option<ChannelTransport>> {
        match self.recv_timeout(timeout) {
            Ok(c) => Ok(Some(c)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(Error::Protocol("no more connections".into())),
        }
    }
}

impl Acceptor for TcpListener {
    type Conn = TcpTransport;

    fn accept_timeout(&mut self, timeout: Duration) -> Result<Option<TcpTransport>> {
        self.set_nonblocking(true)?;
        match self.accept() {
            Ok((stream, _)) => Ok(Some(TcpTransport::new(stream)?)),
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                thread::sleep(timeout);
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }
}

struct Request {
    line: String,
    reply: Sender<Response>,
}

fn handle_connection<T: LineTransport>(mut conn: T, requests: Sender<Request>, in_flight: Arc<AtomicUsize>) {
    while let Ok(Some(line)) = conn.recv_line() {
        if line.trim().is_empty() {
            continue;
        }
        let (reply_tx, reply_rx) = mpsc::channel();
        let response = if requests.send(Request { line, reply: reply_tx }).is_ok() {
            reply_rx.recv().unwrap_or_else(|_| Response::err("session closed"))
        } else {
            Response::err("session closed")
        };
        let sent = conn.send_line(&response.to_line());
        in_flight.fetch_sub(1, AtomicOrdering::SeqCst);
        if sent.is_err() {
            break;
        }
    }
}

/// Accepts connections until `min_nodes` summaries are registered.
///
/// Each connection is served on its own thread; all registry updates happen
/// on the calling thread, in arrival order. Before returning, waits (briefly)
/// until every reply has been written back to its node.
pub fn run_coordinator<A: Acceptor>(mut acceptor: A, min_nodes: usize) -> Result<Registry> {
    let (req_tx, req_rx) = mpsc::channel::<Request>();
    let in_flight = Arc::new(AtomicUsize::new(0));
    let mut registry = Registry::new();
    let mut exhausted = false;
    let answer = |registry: &mut Registry, req: Request| {
        let resp = registry.handle_line(&req.line);
        // counted before the reply leaves so the handler's decrement cannot come first
        in_flight.fetch_add(1, AtomicOrdering::SeqCst);
        if req.reply.send(resp).is_err() {
            in_flight.fetch_sub(1, AtomicOrdering::SeqCst);
        }
    };
    while registry.len() < min_nodes {
        if exhausted {
            match req_rx.recv_timeout(POLL * 40) {
                Ok(req) => answer(&mut registry, req),
                Err(_) => {
                    return Err(Error::Protocol(format!(
                        "connections closed with {} of {min_nodes} nodes registered",
                        registry.len()
                    )))
                }
            }
            continue;
        }
        while let Ok(req) = req_rx.try_recv() {
            answer(&mut registry, req);
            if registry.len() >= min_nodes {
                break;
            }
        }
        if registry.len() >= min_nodes {
            break;
        }
        match acceptor.accept_timeout(POLL) {
            Ok(Some(conn)) => {
                let tx = req_tx.clone();
                let flight = Arc::clone(&in_flight);
                thread::spawn(move || handle_connection(conn, tx, flight));
            }
            Ok(None) => {}
            Err(Error::Protocol(_)) => exhausted = true,
            Err(e) => return Err(e),
        }
    }
    drop(req_rx);
    let deadline = Instant::now() + Duration::from_secs(2);
    while in_flight.load(AtomicOrdering::SeqCst) > 0 && Instant::now() < deadline {
        thread::sleep(Duration::from_millis(1));
    }
    Ok(registry)
}

/// Sends one summary and waits for the coordinator's reply.
pub fn publish<T: LineTransport>(conn: &mut T, msg: &NodeSummaryMessage) -> Result<Response> {
    conn.send_line(&msg.to_line())?;
    let line = conn.recv_line()?.ok_or_else(|| Error::Protocol("coordinator closed the connection".into()))?;
    Ok(serde_json::from_str(&line)?)
}

/// Registry and H matrix of a finished session, for the optional JSON dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionDump {
    pub registry: Registry,
    pub hmatrix: HMatrix,
}
