//! Adapter for simulators run as child processes.
//!
//! Each evaluation launches the command through `sh -c`, writes one
//! newline-terminated JSON request `{"id": n, "x": [...]}` to its standard
//! input and reads one JSON response `{"id": n, "f1": .., "f2": .., "g": ..}`
//! from its standard output. Concurrent evaluations use separate children.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Outcome, Problem, VariableSpec};
use crate::error::{Error, Result};

#[derive(Serialize)]
struct Request<'a> {
    id: u64,
    x: &'a [f64],
}

#[derive(Deserialize)]
struct Response {
    id: u64,
    f1: f64,
    f2: f64,
    g: f64,
}

pub struct ExternalProblem {
    command: String,
    variables: Vec<VariableSpec>,
    timeout: Duration,
    concurrency: usize,
    next_id: AtomicU64,
}

/// Wraps `command` as a [`Problem`] of the given dimension.
pub fn external_adapter(command: &str, dimension: usize, timeout: Duration) -> Result<ExternalProblem> {
    if command.trim().is_empty() {
        return Err(Error::input("external simulator command is empty"));
    }
    if dimension == 0 {
        return Err(Error::input("external problem needs dimension >= 1"));
    }
    Ok(ExternalProblem {
        command: command.to_string(),
        variables: (1..=dimension)
            .map(|i| VariableSpec::unit_interval(format!("x{i}")))
            .collect(),
        timeout,
        concurrency: 4,
        next_id: AtomicU64::new(0),
    })
}

impl ExternalProblem {
    /// Maximum number of children alive at once.
    pub fn with_concurrency(mut self, concurrency: usize) -> Self {
        self.concurrency = concurrency.max(1);
        self
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn run_child(&self, id: u64, x: &[f64]) -> std::result::Result<Outcome, String> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| format!("failed to launch `{}`: {e}", self.command))?;

        let line = serde_json::to_string(&Request { id, x }).map_err(|e| e.to_string())?;
        {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            // A child that exits without reading closes the pipe; that
            // surfaces below as a missing response.
            let _ = stdin.write_all(line.as_bytes());
            let _ = stdin.write_all(b"\n");
        }

        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            let mut buf = String::new();
            let res = reader.read_line(&mut buf).map(|_| buf);
            let _ = tx.send(res);
        });

        let deadline = Instant::now() + self.timeout;
        let reply = match rx.recv_timeout(self.timeout) {
            Ok(Ok(text)) => text,
            Ok(Err(e)) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(format!("reading simulator output: {e}"));
            }
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(format!("simulator timed out after {:?}", self.timeout));
            }
        };

        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if Instant::now() < deadline => {
                    std::thread::sleep(Duration::from_millis(2))
                }
                Ok(None) => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err("simulator did not exit after responding".into());
                }
                Err(e) => return Err(format!("waiting for simulator: {e}")),
            }
        };
        if !status.success() {
            return Err(format!("simulator exited with {status}"));
        }

        let text = reply.trim();
        if text.is_empty() {
            return Err("simulator produced no response".into());
        }
        let resp: Response =
            serde_json::from_str(text).map_err(|e| format!("malformed response `{text}`: {e}"))?;
        if resp.id != id {
            return Err(format!("response id {} does not match request id {id}", resp.id));
        }
        if ![resp.f1, resp.f2, resp.g].iter().all(|v| v.is_finite()) {
            return Err(format!("non-finite response `{text}`"));
        }
        Ok(Outcome {
            f1: resp.f1,
            f2: resp.f2,
            g: resp.g,
        })
    }
}

impl Problem for ExternalProblem {
    fn name(&self) -> &str {
        "external"
    }

    fn dimension(&self) -> usize {
        self.variables.len()
    }

    fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    fn evaluate_unit(&self, x: &[f64]) -> Result<Outcome> {
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        self.run_child(id, x).map_err(|msg| Error::evaluation(x, msg))
    }

    fn max_concurrency(&self) -> usize {
        self.concurrency
    }
}
