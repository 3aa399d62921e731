//! Two-dimensional NPY arrays (format versions 1.0 and 2.0).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::map::{SegmentationMask, UncertaintyMap};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";
const HEADER_ALIGN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    Float(Vec<f64>),
    Int(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: (usize, usize),
    pub data: NpyData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dtype {
    F4,
    F8,
    I4,
    I8,
    U1,
}

impl Dtype {
    fn parse(descr: &str) -> Result<Self> {
        Ok(match descr {
            "<f4" => Dtype::F4,
            "<f8" => Dtype::F8,
            "<i4" => Dtype::I4,
            "<i8" => Dtype::I8,
            "|u1" | "<u1" => Dtype::U1,
            other => return Err(Error::UnsupportedDtype(other.to_string())),
        })
    }

    fn size(self) -> usize {
        match self {
            Dtype::F4 | Dtype::I4 => 4,
            Dtype::F8 | Dtype::I8 => 8,
            Dtype::U1 => 1,
        }
    }
}

#[derive(Debug, PartialEq)]
enum Literal {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

/// Parser for the header's dictionary literal. Only string keys and
/// string, boolean or integer-tuple values are accepted.
struct HeaderParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> HeaderParser<'a> {
    fn err<T>(&self, what: &str) -> Result<T> {
        Err(Error::BadHeader(format!("{what} at offset {}", self.pos)))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && matches!(self.s[self.pos], b' ' | b'\t' | b'\n' | b'\r') {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&format!("expected `{}`", c as char))
        }
    }

    fn string(&mut self) -> Result<String> {
        let quote = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => return self.err("expected string"),
        };
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos] != quote {
            if self.s[self.pos] == b'\\' {
                return self.err("escape sequences are not supported");
            }
            self.pos += 1;
        }
        if self.pos >= self.s.len() {
            return self.err("unterminated string");
        }
        let text = std::str::from_utf8(&self.s[start..self.pos])
            .map_err(|_| Error::BadHeader("string is not UTF-8".into()))?
            .to_string();
        self.pos += 1;
        Ok(text)
    }

    fn integer(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected integer");
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::BadHeader("integer out of range".into()))
    }

    fn value(&mut self) -> Result<Literal> {
        match self.peek() {
            Some(b'\'' | b'"') => self.string().map(Literal::Str),
            Some(b'(') => {
                self.pos += 1;
                let mut dims = Vec::new();
                loop {
                    if self.peek() == Some(b')') {
                        self.pos += 1;
                        break;
                    }
                    dims.push(self.integer()?);
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b')') => {}
                        _ => return self.err("expected `,` or `)`"),
                    }
                }
                Ok(Literal::Tuple(dims))
            }
            _ => {
                let rest = &self.s[self.pos..];
                for (word, v) in [(&b"True"[..], true), (&b"False"[..], false)] {
                    if rest.starts_with(word) {
                        self.pos += word.len();
                        return Ok(Literal::Bool(v));
                    }
                }
                self.err("unsupported value")
            }
        }
    }

    fn dict(&mut self) -> Result<Vec<(String, Literal)>> {
        self.expect(b'{')?;
        let mut entries: Vec<(String, Literal)> = Vec::new();
        loop {
            if self.peek() == Some(b'}') {
                self.pos += 1;
                break;
            }
            let key = self.string()?;
            self.expect(b':')?;
            let value = self.value()?;
            if entries.iter().any(|(k, _)| *k == key) {
                return Err(Error::BadHeader(format!("duplicate key `{key}`")));
            }
            entries.push((key, value));
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {}
                _ => return self.err("expected `,` or `}`"),
            }
        }
        if self.peek().is_some() {
            return self.err("trailing characters");
        }
        Ok(entries)
    }
}

struct Header {
    dtype: Dtype,
    shape: (usize, usize),
}

fn parse_header(text: &[u8]) -> Result<Header> {
    let entries = HeaderParser { s: text, pos: 0 }.dict()?;
    let get = |k: &str| {
        entries
            .iter()
            .find(|(key, _)| key == k)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::BadHeader(format!("missing key `{k}`")))
    };
    if entries.len() != 3 {
        return Err(Error::BadHeader("expected exactly descr, fortran_order and shape".into()));
    }
    let descr = match get("descr")? {
        Literal::Str(s) => s.clone(),
        _ => return Err(Error::BadHeader("descr must be a string".into())),
    };
    let fortran = match get("fortran_order")? {
        Literal::Bool(b) => *b,
        _ => return Err(Error::BadHeader("fortran_order must be a boolean".into())),
    };
    let dims = match get("shape")? {
        Literal::Tuple(d) => d.clone(),
        _ => return Err(Error::BadHeader("shape must be a tuple".into())),
    };
    let dtype = Dtype::parse(&descr)?;
    if fortran {
        return Err(Error::FortranOrderUnsupported);
    }
    if dims.len() != 2 {
        return Err(Error::NonTwoDimensional(dims.len()));
    }
    Ok(Header {
        dtype,
        shape: (dims[0], dims[1]),
    })
}

/// Decodes an in-memory NPY file.
pub fn parse_npy(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < 8 || &bytes[..6] != MAGIC {
        return Err(Error::BadMagic);
    }
    let (header_len, start) = match (bytes[6], bytes[7]) {
        (1, 0) => {
            let b = bytes.get(8..10).ok_or_else(|| Error::BadHeader("truncated length".into()))?;
            (usize::from(u16::from_le_bytes([b[0], b[1]])), 10usize)
        }
        (2, 0) => {
            let b = bytes.get(8..12).ok_or_else(|| Error::BadHeader("truncated length".into()))?;
            (u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize, 12)
        }
        (major, minor) => return Err(Error::BadHeader(format!("unsupported version {major}.{minor}"))),
    };
    let end = start
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::BadHeader("header extends past end of file".into()))?;
    let header = parse_header(&bytes[start..end])?;
    let payload = &bytes[end..];
    let (h, w) = header.shape;
    let size = header.dtype.size();
    let expected = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(size))
        .ok_or_else(|| Error::BadHeader("shape overflows".into()))?;
    if payload.len() != expected {
        return Err(Error::TruncatedPayload {
            expected,
            got: payload.len(),
        });
    }
    let chunks = payload.chunks_exact(size);
    let data = match header.dtype {
        Dtype::F4 => NpyData::Float(chunks.map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap()))).collect()),
        Dtype::F8 => NpyData::Float(chunks.map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
        Dtype::I4 => NpyData::Int(chunks.map(|c| i64::from(i32::from_le_bytes(c.try_into().unwrap()))).collect()),
        Dtype::I8 => NpyData::Int(chunks.map(|c| i64::from_le_bytes(c.try_into().unwrap())).collect()),
        Dtype::U1 => NpyData::Int(payload.iter().map(|&b| i64::from(b)).collect()),
    };
    Ok(NpyArray {
        shape: header.shape,
        data,
    })
}

pub fn read_npy(path: impl AsRef<Path>) -> Result<NpyArray> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_npy(&bytes)
}

/// Version 1.0 encoding with the header padded to a 64-byte boundary.
fn encode(descr: &str, shape: (usize, usize), payload: Vec<u8>) -> Vec<u8> {
    let mut dict = format!(
        "{{'descr': '{descr}', 'fortran_order': False, 'shape': ({}, {}), }}",
        shape.0, shape.1
    );
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    let pad = (HEADER_ALIGN - unpadded % HEADER_ALIGN) % HEADER_ALIGN;
    dict.push_str(&" ".repeat(pad));
    dict.push('\n');
    let mut out = Vec::with_capacity(MAGIC.len() + 4 + dict.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.extend(payload);
    out
}

pub fn encode_f64(shape: (usize, usize), values: &[f64]) -> Result<Vec<u8>> {
    check_len(shape, values.len())?;
    Ok(encode("<f8", shape, values.iter().flat_map(|v| v.to_le_bytes()).collect()))
}

pub fn encode_i64(shape: (usize, usize), values: &[i64]) -> Result<Vec<u8>> {
    check_len(shape, values.len())?;
    Ok(encode("<i8", shape, values.iter().flat_map(|v| v.to_le_bytes()).collect()))
}

fn check_len(shape: (usize, usize), len: usize) -> Result<()> {
    if shape.0 * shape.1 != len {
        return Err(Error::InvalidParam(format!(
            "buffer of length {len} does not match shape {shape:?}"
        )));
    }
    Ok(())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_npy(path: impl AsRef<Path>, array: &NpyArray) -> Result<()> {
    let bytes = match &array.data {
        NpyData::Float(v) => encode_f64(array.shape, v)?,
        NpyData::Int(v) => encode_i64(array.shape, v)?,
    };
    write_bytes(path.as_ref(), &bytes)
}

pub fn write_map(path: impl AsRef<Path>, map: &UncertaintyMap) -> Result<()> {
    write_bytes(path.as_ref(), &encode_f64(map.shape(), map.values())?)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &SegmentationMask) -> Result<()> {
    let labels: Vec<i64> = mask.labels().iter().map(|&l| i64::from(l)).collect();
    write_bytes(path.as_ref(), &encode_i64(mask.shape(), &labels)?)
}

/// Loads an uncertainty map; integer arrays are accepted and converted.
pub fn read_map(path: impl AsRef<Path>) -> Result<UncertaintyMap> {
    let a = read_npy(path)?;
    let values = match a.data {
        NpyData::Float(v) => v,
        NpyData::Int(v) => v.into_iter().map(|x| x as f64).collect(),
    };
    UncertaintyMap::new(a.shape.0, a.shape.1, values)
}

/// Loads a label mask; the array must hold non-negative integers.
pub fn read_mask(path: impl AsRef<Path>) -> Result<SegmentationMask> {
    let a = read_npy(path)?;
    let labels = match a.data {
        NpyData::Int(v) => v
            .into_iter()
            .map(|x| u32::try_from(x).map_err(|_| Error::InvalidParam(format!("mask label {x} is not a valid class"))))
            .collect::<Result<Vec<u32>>>()?,
        NpyData::Float(_) => return Err(Error::UnsupportedDtype("floating-point mask".into())),
    };
    SegmentationMask::new(a.shape.0, a.shape.1, labels)
}
