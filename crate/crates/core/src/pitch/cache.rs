//! PTK1 pitch cache: "PTK1", u32 frame count, then per frame f32 f0 and
//! u8 voiced flag, little-endian.

use std::path::Path;

use super::PitchTrack;
use crate::io::{label_of, read_file, write_file, ByteReader, ByteWriter, FormatError};

const MAGIC: &[u8; 4] = b"PTK1";

pub fn encode_track(track: &PitchTrack) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.magic(MAGIC);
    w.u32(track.len() as u32);
    for (&f, &v) in track.f0_hz.iter().zip(&track.voiced) {
        w.f32(f);
        w.u8(v as u8);
    }
    w.buf
}

/// The format does not store the hop; the caller supplies it.
pub fn decode_track(bytes: &[u8], label: &str, hop_s: f64) -> Result<PitchTrack, FormatError> {
    let mut r = ByteReader::new(bytes, label);
    r.expect_magic(MAGIC)?;
    let n = r.u32()? as usize;
    r.require(n.saturating_mul(5))?;
    let mut track = PitchTrack::unvoiced(n, hop_s);
    for i in 0..n {
        let f = r.f32()?;
        let v = match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(r.invalid(format!("frame {i}: voicing byte {b}"))),
        };
        if !f.is_finite() || (v && f <= 0.0) || (!v && f != 0.0) {
            return Err(r.invalid(format!("frame {i}: f0 {f} inconsistent with voicing {v}")));
        }
        track.f0_hz[i] = f;
        track.voiced[i] = v;
    }
    r.finish()?;
    Ok(track)
}

pub fn write_track(path: &Path, track: &PitchTrack) -> Result<(), FormatError> {
    write_file(path, &encode_track(track))
}

pub fn read_track(path: &Path, hop_s: f64) -> Result<PitchTrack, FormatError> {
    decode_track(&read_file(path)?, &label_of(path), hop_s)
}
