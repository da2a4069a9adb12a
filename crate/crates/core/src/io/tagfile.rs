//! Binary time-tag files.
//!
//! Header, 32 bytes, little-endian:
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `PTAG` |
//! | 4 | 2 | version (1) |
//! | 6 | 2 | channel count (highest channel + 1) |
//! | 8 | 4 | resolution in ps (1) |
//! | 12 | 4 | reserved, zero |
//! | 16 | 8 | duration, ps |
//! | 24 | 8 | record count |
//!
//! Each record is 16 bytes: u64 time (ps), u8 channel, 7 zero bytes.

use std::path::Path;

use crate::model::{TimeTag, TimeTagStream};

pub const MAGIC: [u8; 4] = *b"PTAG";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;
pub const RECORD_LEN: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum TagFileError {
    #[error("not a tag file (bad magic {0:02x?})")]
    BadMagic([u8; 4]),
    #[error("unsupported tag file version {0}")]
    BadVersion(u16),
    #[error("unsupported resolution {0} ps")]
    BadResolution(u32),
    #[error("file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("{extra} trailing bytes after the last record")]
    TrailingBytes { extra: u64 },
    #[error("record at byte offset {offset} is earlier than its predecessor")]
    Unsorted { offset: u64 },
    #[error("record at byte offset {offset} has nonzero reserved bytes or an undeclared channel")]
    BadRecord { offset: u64 },
    #[error("record at byte offset {offset} lies beyond the declared duration")]
    PastDuration { offset: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TagFileError {
    /// Stable numeric code for each failure kind.
    pub fn code(&self) -> u8 {
        match self {
            TagFileError::BadMagic(_) => 1,
            TagFileError::BadVersion(_) => 2,
            TagFileError::BadResolution(_) => 3,
            TagFileError::Truncated { .. } => 4,
            TagFileError::TrailingBytes { .. } => 5,
            TagFileError::Unsorted { .. } => 6,
            TagFileError::BadRecord { .. } => 7,
            TagFileError::PastDuration { .. } => 8,
            TagFileError::Io(_) => 9,
        }
    }
}

/// Serializes a stream.
pub fn write_tags(stream: &TimeTagStream) -> Vec<u8> {
    let tags = stream.tags();
    let channels = tags.iter().map(|t| t.channel as u16 + 1).max().unwrap_or(0);
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * tags.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&stream.duration().to_le_bytes());
    out.extend_from_slice(&(tags.len() as u64).to_le_bytes());
    for t in tags {
        out.extend_from_slice(&t.time.to_le_bytes());
        out.push(t.channel);
        out.extend_from_slice(&[0; 7]);
    }
    out
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes(b[at..at + 2].try_into().expect("2 bytes"))
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

/// Parses and validates a tag file image.
pub fn read_tags(bytes: &[u8]) -> Result<TimeTagStream, TagFileError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(TagFileError::BadMagic(bytes[..4].try_into().expect("4 bytes")));
        }
        return Err(TagFileError::Truncated { expected: HEADER_LEN as u64, found: bytes.len() as u64 });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(TagFileError::BadMagic(magic));
    }
    let version = u16_at(bytes, 4);
    if version != VERSION {
        return Err(TagFileError::BadVersion(version));
    }
    let channels = u16_at(bytes, 6);
    let resolution = u32_at(bytes, 8);
    if resolution != 1 {
        return Err(TagFileError::BadResolution(resolution));
    }
    let duration = u64_at(bytes, 16);
    let count = u64_at(bytes, 24);
    let expected = count
        .checked_mul(RECORD_LEN as u64)
        .and_then(|b| b.checked_add(HEADER_LEN as u64))
        .unwrap_or(u64::MAX);
    let found = bytes.len() as u64;
    if found < expected {
        return Err(TagFileError::Truncated { expected, found });
    }
    if found > expected {
        return Err(TagFileError::TrailingBytes { extra: found - expected });
    }

    let mut tags = Vec::with_capacity(count as usize);
    let mut last = 0u64;
    for (k, rec) in bytes[HEADER_LEN..].chunks_exact(RECORD_LEN).enumerate() {
        let offset = (HEADER_LEN + k * RECORD_LEN) as u64;
        let time = u64_at(rec, 0);
        let channel = rec[8];
        if rec[9..].iter().any(|&b| b != 0) || channel as u16 >= channels {
            return Err(TagFileError::BadRecord { offset });
        }
        if time < last {
            return Err(TagFileError::Unsorted { offset });
        }
        if time > duration {
            return Err(TagFileError::PastDuration { offset });
        }
        last = time;
        tags.push(TimeTag::new(time, channel));
    }
    Ok(TimeTagStream::new(tags, duration).expect("validated order and duration"))
}

pub fn write_tag_file(path: &Path, stream: &TimeTagStream) -> Result<(), TagFileError> {
    Ok(super::write_atomic(path, &write_tags(stream))?)
}

pub fn read_tag_file(path: &Path) -> Result<TimeTagStream, TagFileError> {
    read_tags(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream() -> TimeTagStream {
        TimeTagStream::new(vec![TimeTag::new(1, 2), TimeTag::new(5, 0), TimeTag::new(5, 3)], 10).unwrap()
    }

    #[test]
    fn record_layout() {
        let s = TimeTagStream::new(vec![TimeTag::new(1, 2)], 1).unwrap();
        let b = write_tags(&s);
        assert_eq!(b.len(), HEADER_LEN + RECORD_LEN);
        assert_eq!(&b[HEADER_LEN..], &[1, 0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&b[..4], b"PTAG");
        assert_eq!(u16_at(&b, 6), 3);
        assert_eq!(u32_at(&b, 8), 1);
    }

    #[test]
    fn round_trip() {
        let s = stream();
        let b = write_tags(&s);
        let back = read_tags(&b).unwrap();
        assert_eq!(back, s);
        assert_eq!(write_tags(&back), b);
        let empty = TimeTagStream::empty(42);
        assert_eq!(read_tags(&write_tags(&empty)).unwrap(), empty);
    }

    #[test]
    fn distinct_errors() {
        let good = write_tags(&stream());
        let mut b = good.clone();
        b[0] = b'X';
        assert!(matches!(read_tags(&b), Err(TagFileError::BadMagic(_))));
        let mut b = good.clone();
        b[4] = 9;
        assert!(matches!(read_tags(&b), Err(TagFileError::BadVersion(9))));
        let mut b = good.clone();
        b[8] = 4;
        assert!(matches!(read_tags(&b), Err(TagFileError::BadResolution(4))));
        assert!(matches!(read_tags(&good[..good.len() - 3]), Err(TagFileError::Truncated { .. })));
        assert!(matches!(read_tags(&good[..10]), Err(TagFileError::Truncated { .. })));
        let mut b = good.clone();
        b.push(0);
        assert!(matches!(read_tags(&b), Err(TagFileError::TrailingBytes { extra: 1 })));
        // Second record earlier than the first.
        let mut b = good.clone();
        b[HEADER_LEN + RECORD_LEN] = 0;
        assert!(matches!(read_tags(&b), Err(TagFileError::Unsorted { offset: 48 })));
        let mut b = good.clone();
        b[HEADER_LEN + 12] = 1;
        assert!(matches!(read_tags(&b), Err(TagFileError::BadRecord { offset: 32 })));
        let mut b = good.clone();
        b[16] = 2;
        assert!(matches!(read_tags(&b), Err(TagFileError::PastDuration { offset: 48 })));
        let codes: std::collections::BTreeSet<u8> = [
            TagFileError::BadMagic([0; 4]),
            TagFileError::BadVersion(0),
            TagFileError::Truncated { expected: 0, found: 0 },
            TagFileError::Unsorted { offset: 0 },
        ]
        .iter()
        .map(|e| e.code())
        .collect();
        assert_eq!(codes.len(), 4);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ptag");
        write_tag_file(&path, &stream()).unwrap();
        write_tag_file(&path, &stream()).unwrap();
        assert_eq!(read_tag_file(&path).unwrap(), stream());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
