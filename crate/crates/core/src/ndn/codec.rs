//! Minimal big-endian TLV wire format.
//!
//! ```text
//! packet        := type_octet(1) total_len(u16) body
//! type_octet    := 0x05 Interest | 0x06 Data | 0x80 PAM | 0x81 NAM
//! name          := count(u8) { comp_len(u8) comp_bytes }*
//! Interest body := name nonce(u32) lifetime_ms(u32)
//! Data body     := name payload_len(u16) payload topics_count(u8) name*
//!                  names_count(u8) name*
//! PAM body      := prefix:name cp_id(u16) rank(u8) version(u16)
//! NAM body      := name prefix:name
//! ```
//!
//! `total_len` covers the body only.

use thiserror::Error;

use super::name::{MAX_COMPONENTS, MAX_COMPONENT_LEN};
use super::{Data, Interest, Nam, Name, Packet, Pam};

pub const TYPE_INTEREST: u8 = 0x05;
pub const TYPE_DATA: u8 = 0x06;
pub const TYPE_PAM: u8 = 0x80;
pub const TYPE_NAM: u8 = 0x81;

/// Largest encoded packet, header included.
pub const MAX_PACKET_LEN: usize = 1024;
pub const HEADER_LEN: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("encoded packet of {0} bytes exceeds {MAX_PACKET_LEN}")]
    Oversize(usize),
    #[error("invalid packet: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MalformedError {
    #[error("empty input")]
    Empty,
    #[error("unknown type octet {0:#04x}")]
    UnknownType(u8),
    #[error("truncated packet")]
    Truncated,
    #[error("length field says {declared} body bytes, found {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("{0} trailing bytes inside body")]
    TrailingBytes(usize),
    #[error("invariant violated: {0}")]
    Invariant(&'static str),
}

/// Size of the encoding of `p` without building it.
pub fn encoded_len(p: &Packet) -> usize {
    HEADER_LEN
        + match p {
            Packet::Interest(i) => i.name.encoded_len() + 8,
            Packet::Data(d) => {
                d.name.encoded_len()
                    + 2
                    + d.payload.len()
                    + 1
                    + d.meta_topics.iter().map(Name::encoded_len).sum::<usize>()
                    + 1
                    + d.meta_names.iter().map(Name::encoded_len).sum::<usize>()
            }
            Packet::Pam(p) => p.prefix.encoded_len() + 5,
            Packet::Nam(n) => n.name.encoded_len() + n.prefix.encoded_len(),
        }
}

pub fn encode_packet(p: &Packet) -> Result<Vec<u8>, EncodeError> {
    validate(p).map_err(EncodeError::Invalid)?;
    let len = encoded_len(p);
    if len > MAX_PACKET_LEN {
        return Err(EncodeError::Oversize(len));
    }
    let mut out = Vec::with_capacity(len);
    out.push(p.type_octet());
    out.extend_from_slice(&((len - HEADER_LEN) as u16).to_be_bytes());
    match p {
        Packet::Interest(i) => {
            put_name(&mut out, &i.name);
            out.extend_from_slice(&i.nonce.to_be_bytes());
            out.extend_from_slice(&i.lifetime_ms.to_be_bytes());
        }
        Packet::Data(d) => {
            put_name(&mut out, &d.name);
            out.extend_from_slice(&(d.payload.len() as u16).to_be_bytes());
            out.extend_from_slice(&d.payload);
            out.push(d.meta_topics.len() as u8);
            d.meta_topics.iter().for_each(|n| put_name(&mut out, n));
            out.push(d.meta_names.len() as u8);
            d.meta_names.iter().for_each(|n| put_name(&mut out, n));
        }
        Packet::Pam(p) => {
            put_name(&mut out, &p.prefix);
            out.extend_from_slice(&p.cp_id.to_be_bytes());
            out.push(p.rank);
            out.extend_from_slice(&p.version.to_be_bytes());
        }
        Packet::Nam(n) => {
            put_name(&mut out, &n.name);
            put_name(&mut out, &n.prefix);
        }
    }
    debug_assert_eq!(out.len(), len);
    Ok(out)
}

fn validate(p: &Packet) -> Result<(), &'static str> {
    match p {
        Packet::Interest(i) => {
            if i.name.is_empty() {
                return Err("interest with empty name");
            }
            if i.lifetime_ms == 0 {
                return Err("interest lifetime must be positive");
            }
        }
        Packet::Data(d) => {
            if d.name.is_empty() {
                return Err("data with empty name");
            }
            if d.payload.len() > u16::MAX as usize {
                return Err("payload too long");
            }
            if d.meta_topics.len() > u8::MAX as usize || d.meta_names.len() > u8::MAX as usize {
                return Err("too many metadata names");
            }
            if d.meta_topics.iter().chain(&d.meta_names).any(Name::is_empty) {
                return Err("empty metadata name");
            }
        }
        Packet::Pam(p) => {
            if p.prefix.is_empty() && !p.is_solicitation() {
                return Err("advertisement with empty prefix");
            }
        }
        Packet::Nam(n) => {
            if n.name.is_empty() || n.prefix.is_empty() {
                return Err("NAM with empty name or prefix");
            }
        }
    }
    Ok(())
}

fn put_name(out: &mut Vec<u8>, name: &Name) {
    out.push(name.len() as u8);
    for c in name.components() {
        out.push(c.len() as u8);
        out.extend_from_slice(c);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MalformedError> {
        if self.buf.len() < n {
            return Err(MalformedError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, MalformedError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, MalformedError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, MalformedError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn name(&mut self) -> Result<Name, MalformedError> {
        let count = self.u8()? as usize;
        if count > MAX_COMPONENTS {
            return Err(MalformedError::Invariant("too many name components"));
        }
        let mut comps = Vec::with_capacity(count);
        for _ in 0..count {
            let len = self.u8()? as usize;
            if len == 0 || len > MAX_COMPONENT_LEN {
                return Err(MalformedError::Invariant("bad component length"));
            }
            comps.push(self.take(len)?.to_vec());
        }
        Name::from_components(comps).map_err(|_| MalformedError::Invariant("bad name"))
    }

    fn names(&mut self) -> Result<Vec<Name>, MalformedError> {
        let count = self.u8()?;
        (0..count).map(|_| self.name()).collect()
    }
}

/// Decodes one packet. Never panics; any input that is not exactly the
/// image of a valid packet under [`encode_packet`] is rejected.
pub fn decode_packet(bytes: &[u8]) -> Result<Packet, MalformedError> {
    if bytes.is_empty() {
        return Err(MalformedError::Empty);
    }
    if bytes.len() < HEADER_LEN {
        return Err(MalformedError::Truncated);
    }
    let ty = bytes[0];
    if !matches!(ty, TYPE_INTEREST | TYPE_DATA | TYPE_PAM | TYPE_NAM) {
        return Err(MalformedError::UnknownType(ty));
    }
    let declared = u16::from_be_bytes([bytes[1], bytes[2]]) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != declared {
        return Err(MalformedError::LengthMismatch {
            declared,
            actual: body.len(),
        });
    }
    if bytes.len() > MAX_PACKET_LEN {
        return Err(MalformedError::Invariant("packet exceeds frame cap"));
    }
    let mut r = Reader { buf: body };
    let packet = match ty {
        TYPE_INTEREST => Packet::Interest(Interest {
            name: r.name()?,
            nonce: r.u32()?,
            lifetime_ms: r.u32()?,
        }),
        TYPE_DATA => {
            let name = r.name()?;
            let payload_len = r.u16()? as usize;
            let payload = r.take(payload_len)?.to_vec();
            let meta_topics = r.names()?;
            let meta_names = r.names()?;
            Packet::Data(Data {
                name,
                payload,
                meta_topics,
                meta_names,
            })
        }
        TYPE_PAM => Packet::Pam(Pam {
            prefix: r.name()?,
            cp_id: r.u16()?,
            rank: r.u8()?,
            version: r.u16()?,
        }),
        _ => Packet::Nam(Nam {
            name: r.name()?,
            prefix: r.name()?,
        }),
    };
    if !r.buf.is_empty() {
        return Err(MalformedError::TrailingBytes(r.buf.len()));
    }
    validate(&packet).map_err(MalformedError::Invariant)?;
    Ok(packet)
}
