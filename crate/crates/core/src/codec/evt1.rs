//! EVT1 binary container.
//!
//! ```text
//! header (25 bytes, little-endian)
//!   0..4    magic        b"EVT1"
//!   4       version      u8 = 1
//!   5..7    width        u16
//!   7..9    height       u16
//!   9..17   epoch_us     u64   timestamp of the first event (0 when empty)
//!   17..25  event_count  u64
//! record (8 bytes, little-endian), repeated event_count times
//!   0..4    t_delta      u32   t - epoch_us
//!   4..8    packed       u32   bits 0..14 x, 14..28 y, 28 polarity (1 = on), 29..32 reserved (0)
//! ```

use thiserror::Error;

use crate::event::{Event, EventStream, Polarity, SensorGeometry};

pub const MAGIC: [u8; 4] = *b"EVT1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 25;
pub const RECORD_LEN: usize = 8;

const COORD_MASK: u32 = (1 << 14) - 1;
const Y_SHIFT: u32 = 14;
const P_BIT: u32 = 1 << 28;
const RESERVED_MASK: u32 = 0b111 << 29;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Evt1Error {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated header: {0} bytes")]
    TruncatedHeader(usize),
    #[error("invalid geometry {width}x{height}")]
    InvalidGeometry { width: u16, height: u16 },
    #[error("truncated body: header declares {declared} events, body holds {available}")]
    TruncatedBody { declared: u64, available: u64 },
    #[error("{extra} trailing bytes after {declared} records")]
    TrailingBytes { declared: u64, extra: usize },
    #[error("coordinates ({x}, {y}) out of bounds at record {index}")]
    OutOfBounds { index: usize, x: u16, y: u16 },
    #[error("reserved bits set at record {index}")]
    ReservedBits { index: usize },
    #[error("timestamp decreases at record {index}")]
    NonMonotone { index: usize },
    #[error("timestamp offset of event {index} exceeds 32 bits; split the stream")]
    DeltaOverflow { index: usize },
    #[error("stream invalid: {0}")]
    InvalidStream(crate::event::Violation),
}

/// Exact encoded length of a stream of `n` events.
pub const fn encoded_len(n: usize) -> usize {
    HEADER_LEN + RECORD_LEN * n
}

pub fn encode(stream: &EventStream) -> Result<Vec<u8>, Evt1Error> {
    if let Some(v) = stream.validate().violation {
        return Err(Evt1Error::InvalidStream(v));
    }
    let epoch = stream.first_t().unwrap_or(0);
    let mut out = Vec::with_capacity(encoded_len(stream.len()));
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&stream.geometry.width().to_le_bytes());
    out.extend_from_slice(&stream.geometry.height().to_le_bytes());
    out.extend_from_slice(&epoch.to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for (index, e) in stream.events.iter().enumerate() {
        let delta = u32::try_from(e.t - epoch).map_err(|_| Evt1Error::DeltaOverflow { index })?;
        let mut packed = u32::from(e.x) | (u32::from(e.y) << Y_SHIFT);
        if e.p == Polarity::On {
            packed |= P_BIT;
        }
        out.extend_from_slice(&delta.to_le_bytes());
        out.extend_from_slice(&packed.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<EventStream, Evt1Error> {
    let header: &[u8; HEADER_LEN] = bytes
        .get(..HEADER_LEN)
        .and_then(|h| h.try_into().ok())
        .ok_or(Evt1Error::TruncatedHeader(bytes.len()))?;
    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Evt1Error::BadMagic(magic));
    }
    if header[4] != VERSION {
        return Err(Evt1Error::UnsupportedVersion(header[4]));
    }
    let width = u16::from_le_bytes([header[5], header[6]]);
    let height = u16::from_le_bytes([header[7], header[8]]);
    let geometry = SensorGeometry::new(width.into(), height.into())
        .map_err(|_| Evt1Error::InvalidGeometry { width, height })?;
    let epoch = u64::from_le_bytes(header[9..17].try_into().unwrap());
    let declared = u64::from_le_bytes(header[17..25].try_into().unwrap());

    let body = &bytes[HEADER_LEN..];
    let available = (body.len() / RECORD_LEN) as u64;
    if available < declared {
        return Err(Evt1Error::TruncatedBody {
            declared,
            available,
        });
    }
    // declared <= available, so this fits in usize
    let body_len = declared as usize * RECORD_LEN;
    if body.len() > body_len {
        return Err(Evt1Error::TrailingBytes {
            declared,
            extra: body.len() - body_len,
        });
    }

    let mut events = Vec::with_capacity(declared as usize);
    let mut prev = 0u32;
    for (index, rec) in body.chunks_exact(RECORD_LEN).enumerate() {
        let delta = u32::from_le_bytes([rec[0], rec[1], rec[2], rec[3]]);
        let packed = u32::from_le_bytes([rec[4], rec[5], rec[6], rec[7]]);
        if delta < prev {
            return Err(Evt1Error::NonMonotone { index });
        }
        if packed & RESERVED_MASK != 0 {
            return Err(Evt1Error::ReservedBits { index });
        }
        let x = (packed & COORD_MASK) as u16;
        let y = ((packed >> Y_SHIFT) & COORD_MASK) as u16;
        if !geometry.contains(x, y) {
            return Err(Evt1Error::OutOfBounds { index, x, y });
        }
        let p = if packed & P_BIT != 0 {
            Polarity::On
        } else {
            Polarity::Off
        };
        let t = epoch
            .checked_add(u64::from(delta))
            .ok_or(Evt1Error::NonMonotone { index })?;
        events.push(Event { t, x, y, p });
        prev = delta;
    }
    Ok(EventStream::new(geometry, events))
}
