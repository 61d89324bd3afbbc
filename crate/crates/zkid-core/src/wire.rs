//! Bit-exact frame codec and a metered in-process channel.
//!
//! Every protocol message travels as a frame laid out as
//! `[protocol:1][msg_type:1][length:2 BE][payload]`. Integers inside
//! payloads are `[length:2 BE][minimal big-endian magnitude]` with zero
//! encoding as length 0. The channel stands in for the card/reader link and
//! counts exact bytes per direction, which is the bandwidth measurement
//! basis for the benchmark harness.

use std::collections::VecDeque;

use num_bigint::BigUint;
use num_traits::Zero;
use thiserror::Error;

use crate::protocols::ProtocolId;

pub const MAX_PAYLOAD: usize = 65535;
pub const FRAME_HEADER_LEN: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("payload of {0} bytes exceeds the 65535-byte frame limit")]
    PayloadTooLarge(usize),
    #[error("input truncated")]
    Truncated,
    #[error("unknown protocol byte 0x{0:02x}")]
    UnknownProtocol(u8),
    #[error("unknown message type byte 0x{0:02x}")]
    UnknownMsgType(u8),
    #[error("trailing bytes after frame")]
    TrailingBytes,
    #[error("channel is closed")]
    ChannelClosed,
    #[error("no frame queued in this direction")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Commit = 0x01,
    Challenge = 0x02,
    Response = 0x03,
    Verdict = 0x04,
    Params = 0x05,
}

impl MsgType {
    pub fn from_byte(b: u8) -> Result<Self, WireError> {
        match b {
            0x01 => Ok(MsgType::Commit),
            0x02 => Ok(MsgType::Challenge),
            0x03 => Ok(MsgType::Response),
            0x04 => Ok(MsgType::Verdict),
            0x05 => Ok(MsgType::Params),
            other => Err(WireError::UnknownMsgType(other)),
        }
    }
}

/// One wire message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub protocol: ProtocolId,
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(protocol: ProtocolId, msg_type: MsgType, payload: Vec<u8>) -> Self {
        Frame {
            protocol,
            msg_type,
            payload,
        }
    }

    /// Length of the encoded frame: header plus payload.
    pub fn encoded_len(&self) -> usize {
        FRAME_HEADER_LEN + self.payload.len()
    }
}

pub fn encode_frame(f: &Frame) -> Result<Vec<u8>, WireError> {
    if f.payload.len() > MAX_PAYLOAD {
        return Err(WireError::PayloadTooLarge(f.payload.len()));
    }
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + f.payload.len());
    out.push(f.protocol.wire_byte());
    out.push(f.msg_type as u8);
    out.extend_from_slice(&(f.payload.len() as u16).to_be_bytes());
    out.extend_from_slice(&f.payload);
    Ok(out)
}

pub fn decode_frame(bytes: &[u8]) -> Result<Frame, WireError> {
    if bytes.len() < FRAME_HEADER_LEN {
        return Err(WireError::Truncated);
    }
    let protocol = ProtocolId::from_wire_byte(bytes[0]).ok_or(WireError::UnknownProtocol(bytes[0]))?;
    let msg_type = MsgType::from_byte(bytes[1])?;
    let len = u16::from_be_bytes([bytes[2], bytes[3]]) as usize;
    let body = &bytes[FRAME_HEADER_LEN..];
    if body.len() < len {
        return Err(WireError::Truncated);
    }
    if body.len() > len {
        return Err(WireError::TrailingBytes);
    }
    Ok(Frame {
        protocol,
        msg_type,
        payload: body.to_vec(),
    })
}

/// Appends `[length:2 BE][minimal big-endian bytes]`; zero is length 0.
pub fn put_int(out: &mut Vec<u8>, x: &BigUint) {
    if x.is_zero() {
        out.extend_from_slice(&0u16.to_be_bytes());
        return;
    }
    let bytes = x.to_bytes_be();
    debug_assert!(bytes.len() <= u16::MAX as usize);
    out.extend_from_slice(&(bytes.len() as u16).to_be_bytes());
    out.extend_from_slice(&bytes);
}

pub fn encode_int(x: &BigUint) -> Vec<u8> {
    let mut out = Vec::new();
    put_int(&mut out, x);
    out
}

/// Appends `[length:2 BE][bytes]`.
pub fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    debug_assert!(bytes.len() <= u16::MAX as usize);
    out.extend_from_slice(&(bytes.len() as u16).to_be_bytes());
    out.extend_from_slice(bytes);
}

/// Sequential reader for length-prefixed payload fields.
pub struct PayloadReader<'a> {
    rest: &'a [u8],
}

impl<'a> PayloadReader<'a> {
    pub fn new(payload: &'a [u8]) -> Self {
        PayloadReader { rest: payload }
    }

    pub fn read_int(&mut self) -> Result<BigUint, WireError> {
        Ok(BigUint::from_bytes_be(self.read_bytes()?))
    }

    pub fn read_bytes(&mut self) -> Result<&'a [u8], WireError> {
        if self.rest.len() < 2 {
            return Err(WireError::Truncated);
        }
        let len = u16::from_be_bytes([self.rest[0], self.rest[1]]) as usize;
        if self.rest.len() < 2 + len {
            return Err(WireError::Truncated);
        }
        let (field, rest) = self.rest[2..].split_at(len);
        self.rest = rest;
        Ok(field)
    }

    pub fn read_raw(&mut self, len: usize) -> Result<&'a [u8], WireError> {
        if self.rest.len() < len {
            return Err(WireError::Truncated);
        }
        let (field, rest) = self.rest.split_at(len);
        self.rest = rest;
        Ok(field)
    }

    /// Rejects payloads with unconsumed bytes.
    pub fn finish(self) -> Result<(), WireError> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(WireError::TrailingBytes)
        }
    }
}

pub fn decode_int(bytes: &[u8]) -> Result<BigUint, WireError> {
    let mut r = PayloadReader::new(bytes);
    let x = r.read_int()?;
    r.finish()?;
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Prover to verifier.
    AToB,
    /// Verifier to prover.
    BToA,
}

/// In-process frame transport with exact byte metering.
#[derive(Debug, Default)]
pub struct MeteredChannel {
    a_to_b: VecDeque<Frame>,
    b_to_a: VecDeque<Frame>,
    pub bytes_a_to_b: u64,
    pub bytes_b_to_a: u64,
    log: Vec<(Direction, Frame)>,
    closed: bool,
}

impl MeteredChannel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, direction: Direction, frame: Frame) -> Result<(), WireError> {
        if self.closed {
            return Err(WireError::ChannelClosed);
        }
        let len = encode_frame(&frame)?.len() as u64;
        match direction {
            Direction::AToB => {
                self.bytes_a_to_b += len;
                self.a_to_b.push_back(frame.clone());
            }
            Direction::BToA => {
                self.bytes_b_to_a += len;
                self.b_to_a.push_back(frame.clone());
            }
        }
        self.log.push((direction, frame));
        Ok(())
    }

    pub fn recv(&mut self, direction: Direction) -> Result<Frame, WireError> {
        if self.closed {
            return Err(WireError::ChannelClosed);
        }
        let queue = match direction {
            Direction::AToB => &mut self.a_to_b,
            Direction::BToA => &mut self.b_to_a,
        };
        queue.pop_front().ok_or(WireError::Empty)
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes_a_to_b + self.bytes_b_to_a
    }

    pub fn log(&self) -> &[(Direction, Frame)] {
        &self.log
    }

    /// Concatenated encoding of every frame sent, in order. Equal byte
    /// strings mean byte-identical runs.
    pub fn encoded_log(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (dir, frame) in &self.log {
            out.push(match dir {
                Direction::AToB => 0xa0,
                Direction::BToA => 0xb0,
            });
            out.extend_from_slice(&encode_frame(frame).expect("logged frames are valid"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_frame_bytes() {
        let f = Frame::new(ProtocolId::Qr, MsgType::Commit, vec![]);
        assert_eq!(encode_frame(&f).unwrap(), vec![0x01, 0x01, 0x00, 0x00]);
        let back = decode_frame(&[0x01, 0x01, 0x00, 0x00]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn golden_int_bytes() {
        assert_eq!(encode_int(&BigUint::zero()), vec![0x00, 0x00]);
        assert_eq!(encode_int(&BigUint::from(77u32)), vec![0x00, 0x01, 0x4d]);
        assert_eq!(
            encode_int(&BigUint::from(256u32)),
            vec![0x00, 0x02, 0x01, 0x00]
        );
        assert_eq!(decode_int(&[0x00, 0x00]).unwrap(), BigUint::zero());
        assert_eq!(
            decode_int(&[0x00, 0x02, 0x01, 0x00]).unwrap(),
            BigUint::from(256u32)
        );
    }

    #[test]
    fn decode_errors() {
        assert_eq!(decode_frame(&[0x01, 0x01, 0x00]), Err(WireError::Truncated));
        assert_eq!(
            decode_frame(&[0x01, 0x01, 0x00, 0x00, 0xff]),
            Err(WireError::TrailingBytes)
        );
        assert_eq!(
            decode_frame(&[0x7f, 0x01, 0x00, 0x00]),
            Err(WireError::UnknownProtocol(0x7f))
        );
        assert_eq!(
            decode_frame(&[0x01, 0x09, 0x00, 0x00]),
            Err(WireError::UnknownMsgType(0x09))
        );
        assert_eq!(
            decode_frame(&[0x01, 0x01, 0x00, 0x02, 0xaa]),
            Err(WireError::Truncated)
        );
        assert_eq!(decode_int(&[0x00]), Err(WireError::Truncated));
    }

    #[test]
    fn payload_size_bounds() {
        let ok = Frame::new(ProtocolId::Fs, MsgType::Response, vec![0u8; MAX_PAYLOAD]);
        assert!(encode_frame(&ok).is_ok());
        let too_big = Frame::new(ProtocolId::Fs, MsgType::Response, vec![0u8; MAX_PAYLOAD + 1]);
        assert_eq!(
            encode_frame(&too_big),
            Err(WireError::PayloadTooLarge(MAX_PAYLOAD + 1))
        );
    }

    #[test]
    fn channel_fifo_and_metering() {
        let mut ch = MeteredChannel::new();
        let f1 = Frame::new(ProtocolId::Qr, MsgType::Commit, vec![0xaa]);
        let f2 = Frame::new(ProtocolId::Qr, MsgType::Response, vec![0xbb, 0xcc]);
        ch.send(Direction::AToB, f1.clone()).unwrap();
        ch.send(Direction::AToB, f2.clone()).unwrap();
        assert_eq!(ch.bytes_a_to_b, 5 + 6);
        assert_eq!(ch.recv(Direction::AToB).unwrap(), f1);
        assert_eq!(ch.recv(Direction::AToB).unwrap(), f2);
        assert_eq!(ch.recv(Direction::AToB), Err(WireError::Empty));
        assert_eq!(ch.bytes_b_to_a, 0);
        assert_eq!(ch.log().len(), 2);

        ch.close();
        assert_eq!(
            ch.send(Direction::BToA, Frame::new(ProtocolId::Qr, MsgType::Verdict, vec![])),
            Err(WireError::ChannelClosed)
        );
    }

    #[test]
    fn multi_field_payload_reader() {
        let mut payload = Vec::new();
        put_int(&mut payload, &BigUint::from(1234u32));
        put_bytes(&mut payload, b"id");
        put_int(&mut payload, &BigUint::zero());
        let mut r = PayloadReader::new(&payload);
        assert_eq!(r.read_int().unwrap(), BigUint::from(1234u32));
        assert_eq!(r.read_bytes().unwrap(), b"id");
        assert_eq!(r.read_int().unwrap(), BigUint::zero());
        r.finish().unwrap();
    }
}
