//! Length-prefixed event transport between clients and a tissue server.
//!
//! Each frame is a 4-byte big-endian length followed by one event line (no
//! trailing newline), at most [`MAX_FRAME`] bytes. Clients stream events in
//! timestamp order. The server runs one reader thread per connection; all of
//! them feed a single channel consumed by the thread that owns the engine.
//! A logical second is only ticked once every expected client has moved past
//! it, so the result does not depend on how connections interleave.

use std::collections::BTreeMap;
use std::io::{self, BufWriter, ErrorKind, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc;
use std::thread;

use crate::error::{Error, Result};
use crate::streams::engine::{EventSink, TissueEngine};
use crate::streams::event::Event;
use crate::tissue::MigrationRecord;

pub const MAX_FRAME: usize = 4096;

pub fn write_frame<W: Write>(out: &mut W, payload: &[u8]) -> Result<()> {
    if payload.len() > MAX_FRAME {
        return Err(Error::Protocol(format!(
            "frame of {} bytes exceeds {MAX_FRAME}",
            payload.len()
        )));
    }
    out.write_all(&(payload.len() as u32).to_be_bytes())?;
    out.write_all(payload)?;
    Ok(())
}

/// Reads one frame. `Ok(None)` on a clean end of stream between frames.
pub fn read_frame<R: Read>(input: &mut R, max: usize) -> Result<Option<Vec<u8>>> {
    let mut header = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match input.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(Error::Protocol("partial frame header at disconnect".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > max {
        return Err(Error::Protocol(format!("frame of {len} bytes exceeds {max}")));
    }
    let mut body = vec![0u8; len];
    input.read_exact(&mut body).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::Protocol("partial frame at disconnect".into()),
        _ => e.into(),
    })?;
    Ok(Some(body))
}

pub fn decode_event(frame: &[u8]) -> Result<Event> {
    let line = std::str::from_utf8(frame).map_err(|_| Error::Protocol("frame is not UTF-8".into()))?;
    Event::parse_line(line, 1)
}

/// Sending side of a connection.
pub struct Client {
    stream: BufWriter<TcpStream>,
    sent: usize,
}

impl Client {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Client {
            stream: BufWriter::new(stream),
            sent: 0,
        })
    }

    pub fn send(&mut self, event: &Event) -> Result<()> {
        write_frame(&mut self.stream, event.to_line().as_bytes())?;
        self.sent += 1;
        Ok(())
    }

    /// Sends raw bytes as one frame, bypassing the size check. For tests of
    /// the server's protocol handling.
    pub fn send_raw_frame(&mut self, payload: &[u8]) -> Result<()> {
        self.stream.write_all(&(payload.len() as u32).to_be_bytes())?;
        self.stream.write_all(payload)?;
        Ok(())
    }

    pub fn sent(&self) -> usize {
        self.sent
    }

    /// Flushes and half-closes, signalling end of stream to the server.
    pub fn finish(mut self) -> Result<()> {
        self.stream.flush()?;
        self.stream.get_ref().shutdown(Shutdown::Write)?;
        Ok(())
    }
}

impl EventSink for Client {
    fn deliver(&mut self, event: &Event) -> Result<()> {
        self.send(event)
    }
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    /// Connections making up one session. Ticking starts once all have connected.
    pub clients: usize,
    pub max_frame: usize,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            clients: 1,
            max_frame: MAX_FRAME,
        }
    }
}

#[derive(Debug, Default)]
pub struct SessionReport {
    pub records: Vec<MigrationRecord>,
    pub events: usize,
    /// Connections closed because of a protocol violation, with the reason.
    pub rejected: Vec<(usize, String)>,
    pub partial_frames: usize,
    pub late_events: usize,
}

enum Msg {
    Event(usize, Event),
    Closed(usize, Option<Error>),
}

fn read_client(id: usize, stream: TcpStream, max: usize, tx: mpsc::Sender<Msg>) {
    let mut reader = io::BufReader::new(&stream);
    let mut last = f64::NEG_INFINITY;
    let outcome = loop {
        let frame = match read_frame(&mut reader, max) {
            Ok(Some(f)) => f,
            Ok(None) => break None,
            Err(e) => break Some(e),
        };
        let event = match decode_event(&frame) {
            Ok(e) if e.timestamp < last => {
                break Some(Error::Protocol(format!("timestamp {} precedes {last}", e.timestamp)))
            }
            Ok(e) => e,
            Err(e) => break Some(Error::Protocol(e.to_string())),
        };
        last = event.timestamp;
        if tx.send(Msg::Event(id, event)).is_err() {
            break None;
        }
    };
    if outcome.is_some() {
        let _ = stream.shutdown(Shutdown::Both);
    }
    let _ = tx.send(Msg::Closed(id, outcome));
}

/// Serves one session: accepts `opts.clients` connections, feeds their
/// events to `engine`, and returns once all of them have closed. Every
/// migration record is passed to `on_record` as soon as it is produced.
pub fn serve_session<F>(
    listener: &TcpListener,
    mut engine: TissueEngine,
    opts: &ServeOptions,
    mut on_record: F,
) -> Result<SessionReport>
where
    F: FnMut(&MigrationRecord),
{
    if opts.clients == 0 {
        return Err(Error::InvalidConfig("a session needs at least one client".into()));
    }
    let (tx, rx) = mpsc::channel::<Msg>();
    let mut report = SessionReport::default();

    thread::scope(|scope| -> Result<()> {
        let max = opts.max_frame;
        let clients = opts.clients;
        let acceptor_tx = tx.clone();
        scope.spawn(move || {
            for id in 0..clients {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        tracing::debug!(client = id, %peer, "client connected");
                        let tx = acceptor_tx.clone();
                        thread::spawn(move || read_client(id, stream, max, tx));
                    }
                    Err(e) => {
                        let _ = acceptor_tx.send(Msg::Closed(id, Some(e.into())));
                    }
                }
            }
        });
        drop(tx);

        // Per-client watermark (latest second seen); absent = not yet closed.
        let mut watermark: BTreeMap<usize, u64> = (0..clients).map(|id| (id, 0)).collect();
        let mut buffer: Vec<Event> = Vec::new();
        let mut flush =
            |buffer: &mut Vec<Event>, upto: Option<u64>, engine: &mut TissueEngine, report: &mut SessionReport| {
                let (ready, rest): (Vec<Event>, Vec<Event>) = std::mem::take(buffer)
                    .into_iter()
                    .partition(|e| upto.is_none_or(|s| e.second() <= s));
                *buffer = rest;
                let mut ready = ready;
                ready.sort_by_key(Event::second);
                for e in ready {
                    match engine.push(e) {
                        Ok(()) => report.events += 1,
                        Err(Error::LateEvent { .. }) => report.late_events += 1,
                        Err(e) => tracing::warn!(error = %e, "event rejected"),
                    }
                }
                for r in engine.drain_records() {
                    on_record(&r);
                    report.records.push(r);
                }
            };

        while let Ok(msg) = rx.recv() {
            match msg {
                Msg::Event(id, e) => {
                    watermark.insert(id, e.second());
                    buffer.push(e);
                }
                Msg::Closed(id, reason) => {
                    watermark.remove(&id);
                    match reason {
                        Some(Error::Protocol(m)) if m.contains("partial frame") => {
                            tracing::warn!(client = id, "discarding partial frame");
                            report.partial_frames += 1;
                        }
                        Some(e) => {
                            tracing::warn!(client = id, error = %e, "connection rejected");
                            report.rejected.push((id, e.to_string()));
                        }
                        None => {}
                    }
                }
            }
            if let Some(&safe) = watermark.values().min() {
                flush(&mut buffer, Some(safe), &mut engine, &mut report);
            }
        }
        flush(&mut buffer, None, &mut engine, &mut report);
        engine.finish()?;
        for r in engine.drain_records() {
            on_record(&r);
            report.records.push(r);
        }
        Ok(())
    })?;
    Ok(report)
}
