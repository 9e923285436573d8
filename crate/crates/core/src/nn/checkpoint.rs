//! `NNC1` checkpoints: magic, `u32` tensor count, then per tensor a `u32`
//! name length, UTF-8 name, `u32` rank, `u32` dims and an `f32` payload.
//! All integers and floats are little-endian.

use std::path::Path;

use super::{NnError, NnResult, Parameterized};
use crate::io::{label_of, read_file, u32_len, write_file, ByteReader, ByteWriter, FormatError};

const MAGIC: &[u8; 4] = b"NNC1";

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

pub fn encode(tensors: &[NamedTensor]) -> Result<Vec<u8>, FormatError> {
    let mut w = ByteWriter::new();
    w.magic(MAGIC);
    w.u32(u32_len(tensors.len(), "tensor count")?);
    for t in tensors {
        w.u32(u32_len(t.name.len(), "name length")?);
        w.bytes(t.name.as_bytes());
        w.u32(u32_len(t.shape.len(), "rank")?);
        for &d in &t.shape {
            w.u32(u32_len(d, "dimension")?);
        }
        w.f32s(&t.data);
    }
    Ok(w.buf)
}

pub fn decode(bytes: &[u8], label: &str) -> Result<Vec<NamedTensor>, FormatError> {
    let mut r = ByteReader::new(bytes, label);
    r.expect_magic(MAGIC)?;
    let n = r.u32()? as usize;
    let mut out = Vec::with_capacity(n.min(4096));
    for _ in 0..n {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.bytes(len)?)
            .map_err(|_| r.invalid("tensor name is not UTF-8"))?
            .to_string();
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(16));
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let count = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| r.invalid("tensor size overflow"))?;
        let data = r.f32s(count)?;
        out.push(NamedTensor { name, shape, data });
    }
    r.finish()?;
    Ok(out)
}

pub fn write_tensors(path: &Path, tensors: &[NamedTensor]) -> Result<(), FormatError> {
    write_file(path, &encode(tensors)?)
}

pub fn read_tensors(path: &Path) -> Result<Vec<NamedTensor>, FormatError> {
    decode(&read_file(path)?, &label_of(path))
}

pub fn snapshot<M: Parameterized<f32> + ?Sized>(model: &M) -> Vec<NamedTensor> {
    let mut out = Vec::new();
    model.visit_params(&mut |t| {
        out.push(NamedTensor {
            name: t.name.clone(),
            shape: t.shape.clone(),
            data: t.data.clone(),
        })
    });
    out
}

/// Copies tensors into a model whose structure already matches; names and
/// shapes must agree one-to-one in visitation order.
pub fn restore<M: Parameterized<f32> + ?Sized>(model: &mut M, tensors: &[NamedTensor]) -> NnResult<()> {
    let mut k = 0;
    let mut err = None;
    model.visit_params_mut(&mut |t| {
        if err.is_some() {
            return;
        }
        match tensors.get(k) {
            Some(src) if src.name == t.name && src.shape == t.shape => {
                t.data.copy_from_slice(&src.data);
                t.zero_grad();
            }
            Some(src) => {
                err = Some(format!(
                    "expected {} {:?}, checkpoint has {} {:?}",
                    t.name, t.shape, src.name, src.shape
                ))
            }
            None => err = Some(format!("checkpoint ends before {}", t.name)),
        }
        k += 1;
    });
    if let Some(e) = err {
        return Err(NnError::Checkpoint(e));
    }
    if k != tensors.len() {
        return Err(NnError::Checkpoint(format!(
            "checkpoint has {} tensors, model has {k}",
            tensors.len()
        )));
    }
    Ok(())
}

pub fn save<M: Parameterized<f32> + ?Sized>(model: &M, path: &Path) -> NnResult<()> {
    Ok(write_tensors(path, &snapshot(model))?)
}

pub fn load_into<M: Parameterized<f32> + ?Sized>(model: &mut M, path: &Path) -> NnResult<()> {
    let tensors = read_tensors(path)?;
    restore(model, &tensors)
}
