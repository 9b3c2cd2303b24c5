use std::path::Path;

use super::{read_file, write_file, Reader};
use crate::error::{Error, Result};
use crate::event::{validate_stream, Event, EventStream, Polarity};

pub const EVENTS_MAGIC: &[u8; 4] = b"EVS1";
const VERSION: u32 = 1;
/// Magic plus the fixed header fields.
pub const EVENTS_HEADER_LEN: usize = 40;
pub const EVENT_RECORD_LEN: usize = 16;

pub fn encode_events(stream: &EventStream) -> Result<Vec<u8>> {
    validate_stream(stream).map_err(Error::InvalidStream)?;
    let mut out = Vec::with_capacity(EVENTS_HEADER_LEN + stream.len() * EVENT_RECORD_LEN);
    out.extend_from_slice(EVENTS_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&stream.width.to_le_bytes());
    out.extend_from_slice(&stream.height.to_le_bytes());
    out.extend_from_slice(&stream.t_start.to_le_bytes());
    out.extend_from_slice(&stream.t_end.to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in &stream.events {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.p.as_i8() as u8);
        out.extend_from_slice(&[0; 3]);
    }
    Ok(out)
}

/// Parses an event file, rejecting bad headers, truncation, out-of-range
/// values and ordering violations.
pub fn decode_events(bytes: &[u8], path: &Path) -> Result<EventStream> {
    let mut r = Reader::new(bytes, path);
    if &r.take::<4>()? != EVENTS_MAGIC {
        return Err(r.format_err("bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.format_err(format!("unsupported version {version}")));
    }
    let width = r.u32()?;
    let height = r.u32()?;
    let t_start = r.i64()?;
    let t_end = r.i64()?;
    let count = r.u64()?;
    let expected = (count as u128) * EVENT_RECORD_LEN as u128;
    if expected != r.remaining() as u128 {
        return Err(r.corrupt(format!(
            "header declares {count} events but {} payload bytes follow",
            r.remaining()
        )));
    }
    let mut events = Vec::with_capacity(count as usize);
    for i in 0..count as usize {
        let t = r.i64()?;
        let x = u16::from_le_bytes(r.take()?);
        let y = u16::from_le_bytes(r.take()?);
        let [p] = r.take::<1>()?;
        let pad = r.take::<3>()?;
        let p = Polarity::from_i8(p as i8)
            .ok_or_else(|| r.corrupt(format!("record {i}: polarity byte {p:#04x}")))?;
        if pad != [0; 3] {
            return Err(r.corrupt(format!("record {i}: non-zero padding")));
        }
        events.push(Event::new(x, y, t, p));
    }
    let stream = EventStream {
        events,
        width,
        height,
        t_start,
        t_end,
    };
    validate_stream(&stream).map_err(|v| r.corrupt(v.to_string()))?;
    Ok(stream)
}

pub fn write_events(path: impl AsRef<Path>, stream: &EventStream) -> Result<()> {
    write_file(path.as_ref(), &encode_events(stream)?)
}

pub fn read_events(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    decode_events(&read_file(path)?, path)
}
