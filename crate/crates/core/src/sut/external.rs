//! Adapter for predictors running as child processes.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use super::protocol::{decode_prediction, encode_request, Message, PROTOCOL_VERSION};
use super::{Sut, SutError, SutErrorKind, SutRequest};
use crate::scene::PredictionSet;

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalConfig {
    /// Shell command line that starts the predictor.
    pub command: String,
    pub timeout: Duration,
}

impl ExternalConfig {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            timeout: Duration::from_secs(120),
        }
    }
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    stderr: Arc<Mutex<String>>,
}

impl Worker {
    fn spawn(cfg: &ExternalConfig) -> Result<(Self, bool), SutErrorKind> {
        let mut child = shell(&cfg.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| SutErrorKind::Process(format!("cannot start '{}': {e}", cfg.command)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut err_pipe = child.stderr.take().expect("piped stderr");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        thread::spawn(move || {
            let mut buf = [0u8; 1024];
            while let Ok(n) = err_pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut s = sink.lock().unwrap_or_else(|p| p.into_inner());
                s.push_str(&String::from_utf8_lossy(&buf[..n]));
                if s.len() > 8192 {
                    let cut = s.len() - 4096;
                    let cut = (cut..s.len())
                        .find(|&i| s.is_char_boundary(i))
                        .unwrap_or(s.len());
                    s.drain(..cut);
                }
            }
        });
        let mut w = Self {
            child,
            stdin,
            lines,
            stderr,
        };
        w.send(&Message::Hello {
            version: PROTOCOL_VERSION,
        })?;
        let (line, msg) = w.receive(cfg.timeout)?;
        match msg {
            Message::Ready { provides_prob_map } => Ok((w, provides_prob_map)),
            _ => Err(SutErrorKind::Protocol(format!(
                "expected a ready message, got: {line}"
            ))),
        }
    }

    fn send(&mut self, msg: &Message) -> Result<(), SutErrorKind> {
        let mut line = msg.to_line();
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| self.died(format!("write failed: {e}")))
    }

    fn receive(&mut self, timeout: Duration) -> Result<(String, Message), SutErrorKind> {
        loop {
            match self.lines.recv_timeout(timeout) {
                Ok(Ok(line)) => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    return match Message::parse(&line) {
                        Ok(m) => Ok((line, m)),
                        Err(e) => Err(SutErrorKind::Protocol(format!(
                            "malformed line ({e}): {line}"
                        ))),
                    };
                }
                Ok(Err(e)) => return Err(self.died(format!("read failed: {e}"))),
                Err(RecvTimeoutError::Timeout) => {
                    let _ = self.child.kill();
                    return Err(SutErrorKind::Timeout(format!(
                        "no response within {:.1} s",
                        timeout.as_secs_f64()
                    )));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(self.died("closed its output".into()))
                }
            }
        }
    }

    fn died(&mut self, what: String) -> SutErrorKind {
        let status = match self.child.try_wait() {
            Ok(Some(s)) => format!(" ({s})"),
            _ => {
                thread::sleep(Duration::from_millis(50));
                match self.child.try_wait() {
                    Ok(Some(s)) => format!(" ({s})"),
                    _ => String::new(),
                }
            }
        };
        let err = self
            .stderr
            .lock()
            .map(|s| s.trim().to_string())
            .unwrap_or_default();
        let tail = if err.is_empty() {
            String::new()
        } else {
            format!("; stderr: {err}")
        };
        SutErrorKind::Process(format!("predictor {what}{status}{tail}"))
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn shell(command: &str) -> Command {
    if cfg!(windows) {
        let mut c = Command::new("cmd");
        c.args(["/C", command]);
        c
    } else {
        let mut c = Command::new("sh");
        c.args(["-c", command]);
        c
    }
}

/// Predictor behind the line protocol. Idle processes are pooled; a
/// concurrent caller gets a fresh process, so parallel scenes each talk to
/// their own instance. A process that misbehaves is discarded.
pub struct ExternalSut {
    config: ExternalConfig,
    idle: Mutex<Vec<Worker>>,
    provides_prob_map: bool,
}

impl ExternalSut {
    /// Starts one instance and performs the handshake.
    pub fn connect(config: ExternalConfig) -> Result<Self, SutError> {
        let (w, provides_prob_map) = Worker::spawn(&config).map_err(|k| SutError::new("", k))?;
        Ok(Self {
            config,
            idle: Mutex::new(vec![w]),
            provides_prob_map,
        })
    }

    pub fn config(&self) -> &ExternalConfig {
        &self.config
    }

    fn take_worker(&self) -> Result<Worker, SutErrorKind> {
        if let Some(w) = self.idle.lock().unwrap_or_else(|p| p.into_inner()).pop() {
            return Ok(w);
        }
        Worker::spawn(&self.config).map(|(w, _)| w)
    }
}

impl Sut for ExternalSut {
    fn name(&self) -> String {
        format!("cmd:{}", self.config.command)
    }

    fn provides_prob_map(&self) -> bool {
        self.provides_prob_map
    }

    fn predict(&self, req: &SutRequest<'_>) -> Result<PredictionSet, SutError> {
        req.validate()?;
        let err = |k| SutError::new(req.scene_id, k);
        let mut w = self.take_worker().map_err(err)?;
        w.send(&encode_request(req)).map_err(err)?;
        let (line, msg) = w.receive(self.config.timeout).map_err(err)?;
        let out = match msg {
            Message::Prediction(p) => {
                decode_prediction(&p, req).map_err(|e| e.with_raw(line.clone()))
            }
            Message::Error { message } => {
                Err(err(SutErrorKind::Remote(message)).with_raw(line.clone()))
            }
            _ => Err(err(SutErrorKind::Protocol(
                "expected a prediction or error message".into(),
            ))
            .with_raw(line.clone())),
        };
        // a well-formed reply, even an error, leaves the process usable
        if !matches!(&out, Err(e) if matches!(e.kind, SutErrorKind::Protocol(_))) {
            self.idle.lock().unwrap_or_else(|p| p.into_inner()).push(w);
        }
        out
    }
}
