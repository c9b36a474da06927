//! Out-of-process evaluation over a JSON-lines protocol on the worker's
//! stdin/stdout.
//!
//! ```text
//! worker → engine  {"type":"hello","protocol_version":1,"name":"..."}
//! engine → worker  {"type":"evaluate","id":7,"code":"...","graph":{...},"train_epochs":5}
//! worker → engine  {"type":"result","id":7,"mae":21.3,"inference_time":4.2}
//!                  {"type":"error","id":7,"message":"..."}
//! engine → worker  {"type":"shutdown"}
//! ```
//!
//! Requests are strictly sequential. A timeout, malformed line or id
//! mismatch fails that one candidate and restarts the worker, since its
//! output stream can no longer be trusted. A worker that cannot be started
//! or does not complete the handshake makes the evaluator unavailable.

use std::io::{BufRead, BufReader, Write};
use std::marker::PhantomData;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Evaluator, EvaluatorError};
use crate::graph::{self, ProblemSignature};
use crate::objective::EvaluationResult;
use crate::scalar::Scalar;
use crate::search_space::{ArchitectureCode, ParameterCatalog};

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_TRAIN_EPOCHS: u32 = 5;

/// Engine → worker records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WorkerRequest {
    Evaluate {
        id: u64,
        code: String,
        graph: serde_json::Value,
        train_epochs: u32,
    },
    Shutdown,
}

/// Worker → engine records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WorkerResponse {
    Hello {
        protocol_version: u32,
        name: String,
    },
    Result {
        id: i64,
        mae: f64,
        inference_time: f64,
    },
    Error {
        id: i64,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerCommand {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    name: String,
}

impl Worker {
    fn spawn(cmd: &WorkerCommand, timeout: Duration) -> Result<Self, String> {
        let mut child = Command::new(&cmd.program)
            .args(&cmd.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| format!("cannot start {}: {e}", cmd.program))?;
        let stdin = child.stdin.take().ok_or("worker stdin unavailable")?;
        let stdout = child.stdout.take().ok_or("worker stdout unavailable")?;
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut w = Self {
            child,
            stdin,
            lines: rx,
            name: String::new(),
        };
        match w.lines.recv_timeout(timeout) {
            Ok(line) => match serde_json::from_str::<WorkerResponse>(&line) {
                Ok(WorkerResponse::Hello { protocol_version, name }) if protocol_version == PROTOCOL_VERSION => {
                    w.name = name;
                    Ok(w)
                }
                Ok(WorkerResponse::Hello { protocol_version, .. }) => {
                    w.kill();
                    Err(format!("unsupported protocol version {protocol_version}"))
                }
                _ => {
                    w.kill();
                    Err(format!("expected hello, got {line:?}"))
                }
            },
            Err(_) => {
                w.kill();
                Err("worker sent no hello".into())
            }
        }
    }

    fn send(&mut self, req: &WorkerRequest) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(req).expect("request serializes");
        line.push(b'\n');
        self.stdin.write_all(&line)?;
        self.stdin.flush()
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn shutdown(mut self) {
        if self.send(&WorkerRequest::Shutdown).is_ok() {
            for _ in 0..50 {
                if let Ok(Some(_)) = self.child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
        }
        self.kill();
    }
}

/// Evaluator backed by one long-lived worker process.
pub struct ExternalEvaluator<T> {
    command: WorkerCommand,
    timeout: Duration,
    catalog: ParameterCatalog,
    signature: ProblemSignature,
    train_epochs: u32,
    worker: Option<Worker>,
    next_id: u64,
    restarts: u64,
    _scalar: PhantomData<T>,
}

impl<T: Scalar> ExternalEvaluator<T> {
    /// Starts the worker and completes the handshake.
    pub fn spawn(
        command: WorkerCommand,
        timeout_ms: u64,
        catalog: ParameterCatalog,
        signature: ProblemSignature,
    ) -> Result<Self, EvaluatorError> {
        let timeout = Duration::from_millis(timeout_ms);
        let worker = Worker::spawn(&command, timeout).map_err(EvaluatorError::Unavailable)?;
        Ok(Self {
            command,
            timeout,
            catalog,
            signature,
            train_epochs: DEFAULT_TRAIN_EPOCHS,
            worker: Some(worker),
            next_id: 0,
            restarts: 0,
            _scalar: PhantomData,
        })
    }

    pub fn with_train_epochs(mut self, epochs: u32) -> Self {
        self.train_epochs = epochs;
        self
    }

    /// Name announced in the worker's hello.
    pub fn worker_name(&self) -> Option<&str> {
        self.worker.as_ref().map(|w| w.name.as_str())
    }

    pub fn restarts(&self) -> u64 {
        self.restarts
    }

    fn drop_worker(&mut self) {
        if let Some(mut w) = self.worker.take() {
            w.kill();
        }
    }

    fn ensure_worker(&mut self) -> Result<&mut Worker, EvaluatorError> {
        if self.worker.is_none() {
            let w = Worker::spawn(&self.command, self.timeout).map_err(EvaluatorError::Unavailable)?;
            self.restarts += 1;
            self.worker = Some(w);
        }
        Ok(self.worker.as_mut().expect("worker present"))
    }

    /// Sends one request and waits for its reply.
    pub fn request(&mut self, code: &ArchitectureCode) -> Result<EvaluationResult<T>, EvaluatorError> {
        let graph = match graph::build_graph(code, &self.catalog, self.signature) {
            Ok(g) => g,
            Err(e) => return Ok(EvaluationResult::failed(e.to_string())),
        };
        let graph_value: serde_json::Value =
            serde_json::from_slice(&graph::to_json(&graph)).expect("canonical graph json");
        let id = self.next_id;
        self.next_id += 1;
        let req = WorkerRequest::Evaluate {
            id,
            code: code.canonical(),
            graph: graph_value,
            train_epochs: self.train_epochs,
        };
        let timeout = self.timeout;
        let worker = self.ensure_worker()?;
        if worker.send(&req).is_err() {
            self.drop_worker();
            return Ok(EvaluationResult::failed("worker exited"));
        }
        let line = match worker.lines.recv_timeout(timeout) {
            Ok(line) => line,
            Err(RecvTimeoutError::Timeout) => {
                self.drop_worker();
                return Ok(EvaluationResult::failed("timeout"));
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.drop_worker();
                return Ok(EvaluationResult::failed("worker exited"));
            }
        };
        let expected = i64::try_from(id).unwrap_or(i64::MAX);
        let outcome = match serde_json::from_str::<WorkerResponse>(&line) {
            Ok(WorkerResponse::Result { id, mae, inference_time }) if id == expected => {
                match (T::from_f64(mae), T::from_f64(inference_time)) {
                    (Some(m), Some(t)) => Ok(EvaluationResult::ok(m, t)),
                    _ => Err("unrepresentable measurement".to_string()),
                }
            }
            Ok(WorkerResponse::Error { id, message }) if id == expected => {
                Ok(EvaluationResult::failed(format!("worker error: {message}")))
            }
            Ok(WorkerResponse::Result { id, .. } | WorkerResponse::Error { id, .. }) => {
                Err(format!("id mismatch: expected {expected}, got {id}"))
            }
            Ok(WorkerResponse::Hello { .. }) => Err("unexpected hello".to_string()),
            Err(e) => Err(format!("malformed line: {e}")),
        };
        Ok(outcome.unwrap_or_else(|reason| {
            self.drop_worker();
            EvaluationResult::failed(format!("protocol error: {reason}"))
        }))
    }

    /// Sends shutdown and waits briefly for the worker to exit.
    pub fn shutdown(&mut self) {
        if let Some(w) = self.worker.take() {
            w.shutdown();
        }
    }
}

impl<T> Drop for ExternalEvaluator<T> {
    fn drop(&mut self) {
        if let Some(w) = self.worker.take() {
            w.shutdown();
        }
    }
}

impl<T: Scalar> Evaluator<T> for ExternalEvaluator<T> {
    fn evaluate(&mut self, code: &ArchitectureCode) -> Result<EvaluationResult<T>, EvaluatorError> {
        self.request(code)
    }

    fn measures_wall_time(&self) -> bool {
        true
    }
}

/// One request/response round trip through `worker`.
pub fn external_evaluate<T: Scalar>(
    code: &ArchitectureCode,
    worker: &mut ExternalEvaluator<T>,
) -> Result<EvaluationResult<T>, EvaluatorError> {
    worker.request(code)
}
