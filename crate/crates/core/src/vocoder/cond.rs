//! CND1 conditioning frames: "CND1", u32 T, u32 D, then T·D f32 values
//! row-major, little-endian.

use std::path::Path;

use crate::io::{label_of, read_file, u32_len, write_file, ByteReader, ByteWriter, FormatError};
use crate::nn::Mat;

const MAGIC: &[u8; 4] = b"CND1";

pub fn encode_conditioning(frames: &Mat<f32>) -> Result<Vec<u8>, FormatError> {
    let mut w = ByteWriter::new();
    w.magic(MAGIC);
    w.u32(u32_len(frames.rows, "frame count")?);
    w.u32(u32_len(frames.cols, "dimension")?);
    w.f32s(&frames.data);
    Ok(w.buf)
}

pub fn decode_conditioning(bytes: &[u8], label: &str) -> Result<Mat<f32>, FormatError> {
    let mut r = ByteReader::new(bytes, label);
    r.expect_magic(MAGIC)?;
    let t = r.u32()? as usize;
    let d = r.u32()? as usize;
    let n = t.checked_mul(d).ok_or_else(|| r.invalid("size overflow"))?;
    let data = r.f32s(n)?;
    r.finish()?;
    Ok(Mat { rows: t, cols: d, data })
}

pub fn export_conditioning(path: &Path, frames: &Mat<f32>) -> Result<(), FormatError> {
    write_file(path, &encode_conditioning(frames)?)
}

pub fn import_conditioning(path: &Path) -> Result<Mat<f32>, FormatError> {
    decode_conditioning(&read_file(path)?, &label_of(path))
}
