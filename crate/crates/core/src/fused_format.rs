//! The `.fus` fused-tensor file format.
//!
//! Little-endian throughout:
//!
//! | field          | type                          |
//! |----------------|-------------------------------|
//! | magic          | `b"FUSE"`                     |
//! | version        | `u16` = 1                     |
//! | channels `C`   | `u32`                         |
//! | height `H`     | `u32`                         |
//! | width `W`      | `u32`                         |
//! | name table     | `C` x (`u16` length, UTF-8)   |
//! | payload        | `C*H*W` x `f32`, planar, row-major per channel |
//! | footer         | CRC-32 (IEEE) of all preceding bytes |

use std::path::Path;

use crate::error::{Error, Result};
use crate::fusion::FusedTensor;

pub const MAGIC: &[u8; 4] = b"FUSE";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 4;

pub fn encode(tensor: &FusedTensor) -> Result<Vec<u8>> {
    let names = tensor.channel_names();
    let names_len: usize = names.iter().map(|n| 2 + n.len()).sum();
    let mut out = Vec::with_capacity(HEADER_LEN + names_len + tensor.data().len() * 4 + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [tensor.channels(), tensor.height(), tensor.width()] {
        let v = u32::try_from(v)
            .map_err(|_| Error::Shape(format!("dimension {v} does not fit in u32")))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    for name in names {
        let len = u16::try_from(name.len()).map_err(|_| {
            Error::Input(format!("channel name of {} bytes is too long", name.len()))
        })?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for v in tensor.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format {
                offset: self.pos as u64,
                message: format!("truncated file while reading {what}"),
            }),
        }
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode(buf: &[u8]) -> Result<FusedTensor> {
    let mut cur = Cursor { buf, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "bad magic, expected \"FUSE\"".into(),
        });
    }
    let version = cur.u16("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let channels = cur.u32("channel count")? as usize;
    let height = cur.u32("height")? as usize;
    let width = cur.u32("width")? as usize;

    let mut names = Vec::with_capacity(channels.min(1024));
    for c in 0..channels {
        let at = cur.pos;
        let len = cur.u16("channel name length")? as usize;
        let bytes = cur.take(len, "channel name")?;
        let name = std::str::from_utf8(bytes).map_err(|_| Error::Format {
            offset: at as u64,
            message: format!("channel {c} name is not UTF-8"),
        })?;
        names.push(name.to_string());
    }

    let payload_at = cur.pos;
    let count = channels
        .checked_mul(height)
        .and_then(|v| v.checked_mul(width))
        .filter(|v| v.checked_mul(4).is_some())
        .ok_or_else(|| Error::Format {
            offset: payload_at as u64,
            message: "payload size overflows".into(),
        })?;
    let payload = cur.take(count * 4, "payload")?;
    let body_len = cur.pos;
    let stored = cur.u32("CRC footer")?;
    if cur.pos != buf.len() {
        return Err(Error::Format {
            offset: cur.pos as u64,
            message: format!("{} trailing bytes after footer", buf.len() - cur.pos),
        });
    }
    let actual = crc32fast::hash(&buf[..body_len]);
    if stored != actual {
        return Err(Error::Format {
            offset: body_len as u64,
            message: format!("CRC mismatch: stored {stored:08x}, computed {actual:08x}"),
        });
    }

    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    FusedTensor::new(names, height, width, data).map_err(|e| Error::Format {
        offset: HEADER_LEN as u64,
        message: e.to_string(),
    })
}

pub fn write_fused(tensor: &FusedTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(tensor)?).map_err(|e| Error::io(path, e))
}

pub fn read_fused(path: impl AsRef<Path>) -> Result<FusedTensor> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf)
}
