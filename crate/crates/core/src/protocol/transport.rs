//! Ordered, reliable duplex links between the two endpoints.
//!
//! Both implementations move encoded wire lines, so the in-process link
//! exercises exactly the same decoder as a socket.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{channel, Receiver, Sender};

use thiserror::Error;

use super::wire::{decode_message, encode_message, Message, WireError};

/// Longest accepted line, terminator included.
pub const MAX_LINE_BYTES: usize = 64 << 20;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("peer closed the link")]
    Closed,
    #[error("link I/O failed: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// One end of a duplex message link. Delivery is in order, without loss or
/// duplication.
pub trait Transport {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError>;
    fn recv(&mut self) -> Result<Message, TransportError>;
}

impl<T: Transport + ?Sized> Transport for &mut T {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        (**self).send(msg)
    }

    fn recv(&mut self) -> Result<Message, TransportError> {
        (**self).recv()
    }
}

/// In-process endpoint backed by a pair of channels.
#[derive(Debug)]
pub struct QueueTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl QueueTransport {
    /// Two connected endpoints.
    pub fn pair() -> (Self, Self) {
        let (a_tx, b_rx) = channel();
        let (b_tx, a_rx) = channel();
        (Self { tx: a_tx, rx: a_rx }, Self { tx: b_tx, rx: b_rx })
    }

    /// Pushes raw bytes to the peer as one frame, bypassing the encoder.
    pub fn send_frame(&mut self, bytes: Vec<u8>) -> Result<(), TransportError> {
        self.tx.send(bytes).map_err(|_| TransportError::Closed)
    }
}

impl Transport for QueueTransport {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        self.send_frame(encode_message(msg))
    }

    fn recv(&mut self) -> Result<Message, TransportError> {
        let bytes = self.rx.recv().map_err(|_| TransportError::Closed)?;
        Ok(decode_message(&bytes)?)
    }
}

/// Newline-framed messages over any byte stream.
#[derive(Debug)]
pub struct LineTransport<R, W> {
    reader: BufReader<R>,
    writer: W,
    buf: Vec<u8>,
}

impl<R: Read, W: Write> LineTransport<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self {
            reader: BufReader::new(reader),
            writer,
            buf: Vec::new(),
        }
    }
}

impl LineTransport<TcpStream, TcpStream> {
    pub fn from_tcp(stream: TcpStream) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        Ok(Self::new(reader, stream))
    }
}

impl<R: Read, W: Write> Transport for LineTransport<R, W> {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        self.writer.write_all(&encode_message(msg))?;
        self.writer.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<Message, TransportError> {
        self.buf.clear();
        let limit = MAX_LINE_BYTES as u64 + 1;
        let n = (&mut self.reader).take(limit).read_until(b'\n', &mut self.buf)?;
        if n == 0 {
            return Err(TransportError::Closed);
        }
        if self.buf.len() > MAX_LINE_BYTES {
            return Err(WireError::Framing(format!("line exceeds {MAX_LINE_BYTES} bytes")).into());
        }
        Ok(decode_message(&self.buf)?)
    }
}
