//! OSC 1.0 codec limited to the `i`, `f`, `s` and `b` argument types.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OscError {
    #[error("malformed packet at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("unknown type tag '{tag}' at byte {offset}")]
    UnknownTypeTag { tag: char, offset: usize },
    #[error("cannot encode: {0}")]
    Unencodable(String),
}

fn malformed(offset: usize, reason: &str) -> OscError {
    OscError::Malformed {
        offset,
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OscArg {
    Int(i32),
    Float(f32),
    Str(String),
    Blob(Vec<u8>),
}

impl OscArg {
    pub fn tag(&self) -> char {
        match self {
            OscArg::Int(_) => 'i',
            OscArg::Float(_) => 'f',
            OscArg::Str(_) => 's',
            OscArg::Blob(_) => 'b',
        }
    }

    pub fn as_f32(&self) -> Option<f32> {
        match *self {
            OscArg::Float(v) => Some(v),
            OscArg::Int(v) => Some(v as f32),
            _ => None,
        }
    }

    pub fn as_i32(&self) -> Option<i32> {
        match *self {
            OscArg::Int(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for OscArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OscArg::Int(v) => write!(f, "i:{v}"),
            OscArg::Float(v) => write!(f, "f:{v:?}"),
            OscArg::Str(s) => write!(f, "s:{s:?}"),
            OscArg::Blob(b) => write!(f, "b:{}", hex::encode(b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscMessage {
    pub address: String,
    pub args: Vec<OscArg>,
}

impl OscMessage {
    pub fn new(address: impl Into<String>, args: Vec<OscArg>) -> Self {
        Self {
            address: address.into(),
            args,
        }
    }
}

impl fmt::Display for OscMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.address)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

/// 64-bit NTP-style time tag: seconds in the high word, fraction in the low.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Timetag(pub u64);

impl Timetag {
    pub const IMMEDIATE: Timetag = Timetag(1);

    pub fn from_seconds(s: f64) -> Self {
        let s = s.max(0.0);
        let whole = s.floor();
        let frac = ((s - whole) * 4_294_967_296.0).floor() as u64;
        Timetag(((whole as u64) << 32) | frac.min(u32::MAX as u64))
    }

    pub fn seconds(self) -> f64 {
        (self.0 >> 32) as f64 + (self.0 & 0xFFFF_FFFF) as f64 / 4_294_967_296.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscBundle {
    pub timetag: Timetag,
    pub elements: Vec<OscPacket>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OscPacket {
    Message(OscMessage),
    Bundle(OscBundle),
}

impl From<OscMessage> for OscPacket {
    fn from(m: OscMessage) -> Self {
        OscPacket::Message(m)
    }
}

impl OscPacket {
    /// Indented multi-line rendering; bundles nest by two spaces.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        self.pretty_into(0, &mut out);
        out
    }

    fn pretty_into(&self, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        match self {
            OscPacket::Message(m) => out.push_str(&format!("{pad}{m}\n")),
            OscPacket::Bundle(b) => {
                out.push_str(&format!("{pad}#bundle t={:.6}\n", b.timetag.seconds()));
                for e in &b.elements {
                    e.pretty_into(depth + 1, out);
                }
            }
        }
    }

    /// All messages, depth first.
    pub fn messages(&self) -> Vec<&OscMessage> {
        match self {
            OscPacket::Message(m) => vec![m],
            OscPacket::Bundle(b) => b.elements.iter().flat_map(|e| e.messages()).collect(),
        }
    }
}

fn pad4(out: &mut Vec<u8>) {
    while out.len() % 4 != 0 {
        out.push(0);
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<(), OscError> {
    if s.contains('\0') {
        return Err(OscError::Unencodable(format!("string {s:?} contains NUL")));
    }
    out.extend_from_slice(s.as_bytes());
    out.push(0);
    pad4(out);
    Ok(())
}

fn encode_message(m: &OscMessage, out: &mut Vec<u8>) -> Result<(), OscError> {
    if !m.address.starts_with('/') {
        return Err(OscError::Unencodable(format!("address {:?} must start with '/'", m.address)));
    }
    put_str(out, &m.address)?;
    let tags: String = std::iter::once(',').chain(m.args.iter().map(OscArg::tag)).collect();
    put_str(out, &tags)?;
    for a in &m.args {
        match a {
            OscArg::Int(v) => out.extend_from_slice(&v.to_be_bytes()),
            OscArg::Float(v) => out.extend_from_slice(&v.to_be_bytes()),
            OscArg::Str(s) => put_str(out, s)?,
            OscArg::Blob(b) => {
                let len = i32::try_from(b.len()).map_err(|_| OscError::Unencodable("blob too large".into()))?;
                out.extend_from_slice(&len.to_be_bytes());
                out.extend_from_slice(b);
                pad4(out);
            }
        }
    }
    Ok(())
}

fn encode_into(p: &OscPacket, out: &mut Vec<u8>) -> Result<(), OscError> {
    match p {
        OscPacket::Message(m) => encode_message(m, out),
        OscPacket::Bundle(b) => {
            out.extend_from_slice(b"#bundle\0");
            out.extend_from_slice(&b.timetag.0.to_be_bytes());
            for e in &b.elements {
                let at = out.len();
                out.extend_from_slice(&[0; 4]);
                encode_into(e, out)?;
                let size = (out.len() - at - 4) as u32;
                out[at..at + 4].copy_from_slice(&size.to_be_bytes());
            }
            Ok(())
        }
    }
}

pub fn encode(p: &OscPacket) -> Result<Vec<u8>, OscError> {
    let mut out = Vec::new();
    encode_into(p, &mut out)?;
    Ok(out)
}

pub fn encode_message_bytes(m: &OscMessage) -> Result<Vec<u8>, OscError> {
    let mut out = Vec::new();
    encode_message(m, &mut out)?;
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    /// Offset of `buf[0]` in the outermost packet, for error reporting.
    base: usize,
}

impl<'a> Reader<'a> {
    fn at(&self) -> usize {
        self.base + self.pos
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], OscError> {
        if self.buf.len() - self.pos < n {
            return Err(malformed(self.at(), &format!("truncated {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn padding(&mut self) -> Result<(), OscError> {
        while self.pos % 4 != 0 {
            let at = self.at();
            match self.buf.get(self.pos) {
                None => return Err(malformed(at, "truncated padding")),
                Some(0) => self.pos += 1,
                Some(_) => return Err(malformed(at, "non-zero padding byte")),
            }
        }
        Ok(())
    }

    fn string(&mut self, what: &str) -> Result<String, OscError> {
        let start = self.at();
        let rest = &self.buf[self.pos..];
        let nul = rest
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| malformed(start, &format!("{what} is missing its NUL terminator")))?;
        let s = std::str::from_utf8(&rest[..nul]).map_err(|_| malformed(start, &format!("{what} is not UTF-8")))?;
        self.pos += nul + 1;
        self.padding()?;
        Ok(s.to_string())
    }

    fn u32(&mut self, what: &str) -> Result<u32, OscError> {
        Ok(u32::from_be_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

fn decode_message(r: &mut Reader) -> Result<OscMessage, OscError> {
    let addr_at = r.at();
    let address = r.string("address")?;
    if !address.starts_with('/') {
        return Err(malformed(addr_at, "address must start with '/'"));
    }
    let tags_at = r.at();
    if r.pos == r.buf.len() {
        return Err(malformed(tags_at, "truncated type tags"));
    }
    let tags = r.string("type tags")?;
    let Some(tags) = tags.strip_prefix(',') else {
        return Err(malformed(tags_at, "type tags must start with ','"));
    };
    let mut args = Vec::with_capacity(tags.len());
    for (i, tag) in tags.chars().enumerate() {
        let arg = match tag {
            'i' => OscArg::Int(r.u32("int32 argument")? as i32),
            'f' => OscArg::Float(f32::from_bits(r.u32("float32 argument")?)),
            's' => OscArg::Str(r.string("string argument")?),
            'b' => {
                let len = r.u32("blob size")? as usize;
                let data = r.take(len, "blob")?.to_vec();
                r.padding()?;
                OscArg::Blob(data)
            }
            other => {
                return Err(OscError::UnknownTypeTag {
                    tag: other,
                    offset: tags_at + 1 + i,
                })
            }
        };
        args.push(arg);
    }
    if r.pos != r.buf.len() {
        return Err(malformed(r.at(), "trailing bytes after message"));
    }
    Ok(OscMessage { address, args })
}

fn decode_at(buf: &[u8], base: usize) -> Result<OscPacket, OscError> {
    if buf.len() % 4 != 0 {
        return Err(malformed(base + buf.len() - buf.len() % 4, "packet size is not a multiple of 4"));
    }
    let mut r = Reader { buf, pos: 0, base };
    if buf.starts_with(b"#bundle\0") {
        r.pos = 8;
        let timetag = Timetag(u64::from_be_bytes(r.take(8, "timetag")?.try_into().unwrap()));
        let mut elements = Vec::new();
        while r.pos < buf.len() {
            let size_at = r.at();
            let size = r.u32("element size")? as usize;
            if size % 4 != 0 {
                return Err(malformed(size_at, "element size is not a multiple of 4"));
            }
            let start = r.at();
            let body = r.take(size, "bundle element")?;
            elements.push(decode_at(body, start)?);
        }
        return Ok(OscPacket::Bundle(OscBundle { timetag, elements }));
    }
    if buf.first() == Some(&b'#') {
        return Err(malformed(base, "bad bundle header"));
    }
    Ok(OscPacket::Message(decode_message(&mut r)?))
}

pub fn decode(bytes: &[u8]) -> Result<OscPacket, OscError> {
    if bytes.is_empty() {
        return Err(malformed(0, "empty packet"));
    }
    decode_at(bytes, 0)
}
