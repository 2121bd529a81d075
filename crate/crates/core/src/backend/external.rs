//! Client side of the line protocol, over any reader/writer pair or a child process.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use log::debug;

use super::protocol::{self, Reply, Request};
use super::{Backend, BackendDescriptor, BackendError, FitRequest, FitResponse};

/// A protocol session. Replies are read on a helper thread so that every
/// wait can be bounded by `timeout`.
pub struct ProtocolBackend<W: Write> {
    name: String,
    remote_name: String,
    cumulative: bool,
    writer: W,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    transcript: Vec<String>,
}

impl<W: Write> ProtocolBackend<W> {
    /// Performs the hello/ready handshake.
    pub fn connect<R>(reader: R, writer: W, descriptor: &BackendDescriptor, timeout: Duration) -> Result<Self, BackendError>
    where
        R: BufRead + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in reader.lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut session = ProtocolBackend {
            name: descriptor.name.clone(),
            remote_name: String::new(),
            cumulative: descriptor.is_cumulative(),
            writer,
            lines: rx,
            timeout,
            transcript: Vec::new(),
        };
        session.send(&Request::hello(&descriptor.params))?;
        match session.recv()? {
            Reply::Ready { name } => session.remote_name = name,
            Reply::Error { message } => return Err(BackendError::Remote(message)),
            other => {
                return Err(BackendError::Malformed(format!(
                    "expected ready, got {}",
                    protocol::encode(&other)
                )))
            }
        }
        Ok(session)
    }

    /// Name the backend announced in its `ready` message.
    pub fn remote_name(&self) -> &str {
        &self.remote_name
    }

    /// Every line exchanged so far, prefixed `-> ` (sent) or `<- ` (received).
    pub fn transcript(&self) -> &[String] {
        &self.transcript
    }

    fn send(&mut self, msg: &Request) -> Result<(), BackendError> {
        let line = protocol::encode(msg);
        debug!("-> {line}");
        writeln!(self.writer, "{line}")?;
        self.writer.flush()?;
        self.transcript.push(format!("-> {line}"));
        Ok(())
    }

    fn recv(&mut self) -> Result<Reply, BackendError> {
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let line = match self.lines.recv_timeout(left) {
                Ok(line) => line?,
                Err(RecvTimeoutError::Timeout) => return Err(BackendError::Timeout(self.timeout)),
                Err(RecvTimeoutError::Disconnected) => return Err(BackendError::Exited),
            };
            if line.trim().is_empty() {
                continue;
            }
            debug!("<- {line}");
            self.transcript.push(format!("<- {line}"));
            return protocol::decode_reply(&line);
        }
    }
}

impl<W: Write> Backend for ProtocolBackend<W> {
    fn name(&self) -> &str {
        &self.name
    }

    fn cumulative(&self) -> bool {
        self.cumulative
    }

    fn fit(&mut self, request: &FitRequest) -> Result<FitResponse, BackendError> {
        self.send(&Request::fit(request))?;
        let reply = self.recv()?;
        protocol::reply_to_response(reply, request, &self.name)
    }

    fn shutdown(&mut self) -> Result<(), BackendError> {
        match self.send(&Request::Shutdown) {
            Ok(()) => Ok(()),
            // the peer may already be gone
            Err(BackendError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            Err(e) => Err(e),
        }
    }
}

/// A backend running as a child process.
pub struct ExternalBackend {
    session: ProtocolBackend<ChildStdin>,
    child: Child,
}

impl ExternalBackend {
    pub fn spawn(descriptor: &BackendDescriptor, timeout: Duration) -> Result<Self, BackendError> {
        descriptor.validate()?;
        let argv = descriptor.command.as_deref().unwrap_or_default();
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| BackendError::Spawn {
                command: argv.join(" "),
                source,
            })?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = BufReader::new(child.stdout.take().expect("stdout is piped"));
        match ProtocolBackend::connect(stdout, stdin, descriptor, timeout) {
            Ok(session) => Ok(ExternalBackend { session, child }),
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                Err(e)
            }
        }
    }

    pub fn transcript(&self) -> &[String] {
        self.session.transcript()
    }

    pub fn remote_name(&self) -> &str {
        self.session.remote_name()
    }
}

impl Backend for ExternalBackend {
    fn name(&self) -> &str {
        self.session.name()
    }

    fn cumulative(&self) -> bool {
        self.session.cumulative()
    }

    fn fit(&mut self, request: &FitRequest) -> Result<FitResponse, BackendError> {
        let result = self.session.fit(request);
        if matches!(result, Err(BackendError::Timeout(_)) | Err(BackendError::Exited)) {
            let _ = self.child.kill();
        }
        result
    }

    fn shutdown(&mut self) -> Result<(), BackendError> {
        self.session.shutdown()?;
        let deadline = Instant::now() + Duration::from_secs(5);
        loop {
            match self.child.try_wait()? {
                Some(status) if status.success() => return Ok(()),
                Some(status) => return Err(BackendError::Model(format!("backend exited with {status}"))),
                None if Instant::now() >= deadline => {
                    self.child.kill()?;
                    return Err(BackendError::Timeout(Duration::from_secs(5)));
                }
                None => thread::sleep(Duration::from_millis(10)),
            }
        }
    }
}

impl Drop for ExternalBackend {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}
