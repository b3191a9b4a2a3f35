//! Bit-exact wire format for the draft/verify exchange.
//!
//! Little-endian layout:
//!
//! ```text
//! DraftBlockMsg   magic u8 = 0xD1 | session u32 | offset u64 | count u16 | count x token u16
//! VerifyResultMsg magic u8 = 0xD2 | session u32 | offset u64 | accepted u16 | correction u16
//! ```
//!
//! A draft block therefore costs `15 + 2 * count` bytes on the wire, which is
//! what the uplink term of the latency model charges for when
//! `header_bits = 120` and `token_bits = 16`. For use over a byte stream each
//! message can be wrapped in a u32 big-endian length-prefixed frame.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::Token;

pub const DRAFT_MAGIC: u8 = 0xD1;
pub const VERIFY_MAGIC: u8 = 0xD2;

/// Fixed bytes of a draft block before the token payload.
pub const DRAFT_HEADER_BYTES: usize = 15;
/// Total bytes of a verification result.
pub const VERIFY_MSG_BYTES: usize = 17;
/// Wire width of one token index, in bits.
pub const TOKEN_BITS: u32 = 16;
/// Draft header size in bits, as consumed by the latency model.
pub const HEADER_BITS: u32 = (DRAFT_HEADER_BYTES as u32) * 8;

/// Edge-to-cloud block of speculative tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DraftBlockMsg {
    pub session_id: u32,
    /// Tokens already committed on both sides when this block was drafted.
    pub seq_offset: u64,
    pub tokens: Vec<Token>,
}

impl DraftBlockMsg {
    pub fn count(&self) -> usize {
        self.tokens.len()
    }

    /// Exact encoded size in bytes.
    pub fn encoded_len(&self) -> usize {
        DRAFT_HEADER_BYTES + 2 * self.tokens.len()
    }
}

/// Cloud-to-edge verification outcome: accepted prefix length plus the
/// correction token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyResultMsg {
    pub session_id: u32,
    pub seq_offset: u64,
    pub accepted: u16,
    pub correction: Token,
}

/// Any protocol message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Draft(DraftBlockMsg),
    Verify(VerifyResultMsg),
}

/// Serializes a message to its wire bytes.
pub fn encode(msg: &Message) -> Result<Vec<u8>> {
    match msg {
        Message::Draft(d) => {
            if d.tokens.is_empty() {
                return Err(Error::Codec("draft block must carry at least one token".into()));
            }
            if d.tokens.len() > u16::MAX as usize {
                return Err(Error::Codec(format!(
                    "draft block of {} tokens exceeds the u16 count field",
                    d.tokens.len()
                )));
            }
            let mut out = Vec::with_capacity(d.encoded_len());
            out.push(DRAFT_MAGIC);
            out.extend_from_slice(&d.session_id.to_le_bytes());
            out.extend_from_slice(&d.seq_offset.to_le_bytes());
            out.extend_from_slice(&(d.tokens.len() as u16).to_le_bytes());
            for &t in &d.tokens {
                out.extend_from_slice(&t.to_le_bytes());
            }
            Ok(out)
        }
        Message::Verify(v) => {
            let mut out = Vec::with_capacity(VERIFY_MSG_BYTES);
            out.push(VERIFY_MAGIC);
            out.extend_from_slice(&v.session_id.to_le_bytes());
            out.extend_from_slice(&v.seq_offset.to_le_bytes());
            out.extend_from_slice(&v.accepted.to_le_bytes());
            out.extend_from_slice(&v.correction.to_le_bytes());
            Ok(out)
        }
    }
}

fn take<const N: usize>(bytes: &[u8], at: usize) -> [u8; N] {
    let mut buf = [0u8; N];
    buf.copy_from_slice(&bytes[at..at + N]);
    buf
}

/// Parses wire bytes back into a message. Rejects unknown magic, short
/// buffers, and trailing bytes.
pub fn decode(bytes: &[u8]) -> Result<Message> {
    let magic = *bytes
        .first()
        .ok_or_else(|| Error::Codec("empty buffer".into()))?;
    match magic {
        DRAFT_MAGIC => {
            if bytes.len() < DRAFT_HEADER_BYTES {
                return Err(Error::Codec(format!(
                    "draft block truncated: {} bytes, header needs {DRAFT_HEADER_BYTES}",
                    bytes.len()
                )));
            }
            let session_id = u32::from_le_bytes(take(bytes, 1));
            let seq_offset = u64::from_le_bytes(take(bytes, 5));
            let count = u16::from_le_bytes(take(bytes, 13)) as usize;
            if count == 0 {
                return Err(Error::Codec("draft block with zero tokens".into()));
            }
            let expected = DRAFT_HEADER_BYTES + 2 * count;
            if bytes.len() != expected {
                return Err(Error::Codec(format!(
                    "draft block of count {count} must be {expected} bytes, got {}",
                    bytes.len()
                )));
            }
            let tokens = (0..count)
                .map(|i| u16::from_le_bytes(take(bytes, DRAFT_HEADER_BYTES + 2 * i)))
                .collect();
            Ok(Message::Draft(DraftBlockMsg { session_id, seq_offset, tokens }))
        }
        VERIFY_MAGIC => {
            if bytes.len() != VERIFY_MSG_BYTES {
                return Err(Error::Codec(format!(
                    "verify result must be {VERIFY_MSG_BYTES} bytes, got {}",
                    bytes.len()
                )));
            }
            Ok(Message::Verify(VerifyResultMsg {
                session_id: u32::from_le_bytes(take(bytes, 1)),
                seq_offset: u64::from_le_bytes(take(bytes, 5)),
                accepted: u16::from_le_bytes(take(bytes, 13)),
                correction: u16::from_le_bytes(take(bytes, 15)),
            }))
        }
        other => Err(Error::Codec(format!("unknown magic byte 0x{other:02X}"))),
    }
}

/// Writes one message as a u32 big-endian length-prefixed frame. Returns the
/// total bytes written including the prefix.
pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> Result<usize> {
    let body = encode(msg)?;
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(&body)?;
    Ok(4 + body.len())
}

/// Reads one length-prefixed frame and decodes it.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Message> {
    let mut len_buf = [0u8; 4];
    r.read_exact(&mut len_buf)?;
    let len = u32::from_be_bytes(len_buf) as usize;
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    decode(&body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draft(count: usize) -> DraftBlockMsg {
        DraftBlockMsg {
            session_id: 0xAABBCCDD,
            seq_offset: 0x1122334455667788,
            tokens: (0..count as u16).map(|i| i * 3 % 64).collect(),
        }
    }

    #[test]
    fn draft_block_layout_arithmetic() {
        let msg = draft(5);
        let bytes = encode(&Message::Draft(msg.clone())).unwrap();
        assert_eq!(bytes.len(), 25); // 15 header + 10 payload
        assert_eq!(bytes.len(), msg.encoded_len());
        assert_eq!(bytes[0], DRAFT_MAGIC);
        assert_eq!(u16::from_le_bytes([bytes[13], bytes[14]]), 5);
    }

    #[test]
    fn verify_msg_is_seventeen_bytes() {
        let msg = VerifyResultMsg {
            session_id: 1,
            seq_offset: 2,
            accepted: 3,
            correction: 4,
        };
        let bytes = encode(&Message::Verify(msg)).unwrap();
        assert_eq!(bytes.len(), VERIFY_MSG_BYTES);
        assert_eq!(bytes[0], VERIFY_MAGIC);
    }

    #[test]
    fn round_trip_identity() {
        let d = Message::Draft(draft(7));
        assert_eq!(decode(&encode(&d).unwrap()).unwrap(), d);
        let v = Message::Verify(VerifyResultMsg {
            session_id: u32::MAX,
            seq_offset: u64::MAX,
            accepted: u16::MAX,
            correction: u16::MAX,
        });
        assert_eq!(decode(&encode(&v).unwrap()).unwrap(), v);
    }

    #[test]
    fn rejects_bad_magic() {
        let mut bytes = encode(&Message::Draft(draft(2))).unwrap();
        bytes[0] = 0x00;
        assert!(matches!(decode(&bytes), Err(Error::Codec(_))));
    }

    #[test]
    fn rejects_truncated_and_trailing() {
        let bytes = encode(&Message::Draft(draft(3))).unwrap();
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(Error::Codec(_))));
        let mut extended = bytes.clone();
        extended.push(0);
        assert!(matches!(decode(&extended), Err(Error::Codec(_))));
        assert!(matches!(decode(&[]), Err(Error::Codec(_))));
    }

    #[test]
    fn rejects_empty_draft_block() {
        let msg = DraftBlockMsg { session_id: 0, seq_offset: 0, tokens: vec![] };
        assert!(matches!(encode(&Message::Draft(msg)), Err(Error::Codec(_))));
        // Hand-built zero-count wire bytes are rejected on decode as well.
        let mut bytes = vec![DRAFT_MAGIC];
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&0u64.to_le_bytes());
        bytes.extend_from_slice(&0u16.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::Codec(_))));
    }

    #[test]
    fn frames_round_trip_over_a_stream() {
        let mut pipe = Vec::new();
        let msgs = vec![
            Message::Draft(draft(1)),
            Message::Verify(VerifyResultMsg { session_id: 9, seq_offset: 10, accepted: 0, correction: 42 }),
            Message::Draft(draft(8)),
        ];
        for m in &msgs {
            write_frame(&mut pipe, m).unwrap();
        }
        let mut cursor = std::io::Cursor::new(pipe);
        for m in &msgs {
            assert_eq!(&read_frame(&mut cursor).unwrap(), m);
        }
    }
}
