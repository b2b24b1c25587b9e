//! Two-file volume container: `<name>.json` header plus `<name>.raw`
//! little-endian payload in x-fastest order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Geometry, ValueKind, Volume};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    I16,
    F64,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::I16 => 2,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
    pub dtype: Dtype,
    pub value_kind: ValueKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

/// Header path for a container given either the header itself, the payload,
/// or the bare stem.
pub fn header_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn payload_path(path: &Path) -> PathBuf {
    path.with_extension("raw")
}

/// Loads a volume. `.nhdr` / `.nrrd` paths are routed to the NRRD importer;
/// anything else is treated as the JSON + raw container.
pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    if matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("nhdr") | Some("nrrd")
    ) {
        return super::load_nrrd(path);
    }
    let hpath = header_path(path);
    let text = fs::read_to_string(&hpath).map_err(|e| Error::io(&hpath, e))?;
    let header: VolumeHeader =
        serde_json::from_str(&text).map_err(|e| Error::Header(format!("{}: {e}", hpath.display())))?;
    let ppath = payload_path(path);
    let bytes = fs::read(&ppath).map_err(|e| Error::io(&ppath, e))?;
    volume_from_parts(header, &bytes)
}

/// Builds a volume from a parsed header and its little-endian payload.
pub fn volume_from_parts(header: VolumeHeader, bytes: &[u8]) -> Result<Volume> {
    let geometry = Geometry {
        dims: header.dims,
        spacing_mm: header.spacing_mm,
        origin_mm: header.origin_mm,
    };
    geometry.validate()?;
    let width = header.dtype.width();
    if bytes.len() != geometry.len() * width {
        return Err(Error::PayloadSizeMismatch {
            expected: geometry.len(),
            found: bytes.len() / width,
        });
    }
    let data = decode(bytes, header.dtype);
    let mut v = Volume::new(geometry, data, header.value_kind)?;
    v.set_metadata(header.metadata);
    Ok(v)
}

/// Writes `<stem>.json` and `<stem>.raw`. Values are written as `f32` when
/// every value survives the conversion exactly, otherwise as `f64`.
pub fn save_volume(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dtype = if v.data().iter().all(|&x| (x as f32) as f64 == x || x.is_nan()) {
        Dtype::F32
    } else {
        Dtype::F64
    };
    let g = v.geometry();
    let header = VolumeHeader {
        dims: g.dims,
        spacing_mm: g.spacing_mm,
        origin_mm: g.origin_mm,
        dtype,
        value_kind: v.kind(),
        metadata: v.metadata().clone(),
    };
    let mut payload = Vec::with_capacity(v.data().len() * dtype.width());
    match dtype {
        Dtype::F32 => v
            .data()
            .iter()
            .for_each(|&x| payload.extend_from_slice(&(x as f32).to_le_bytes())),
        Dtype::F64 => v
            .data()
            .iter()
            .for_each(|&x| payload.extend_from_slice(&x.to_le_bytes())),
        Dtype::I16 => unreachable!(),
    }
    let hpath = header_path(path);
    let ppath = payload_path(path);
    let mut text = serde_json::to_string_pretty(&header)?;
    text.push('\n');
    fs::write(&hpath, text).map_err(|e| Error::io(&hpath, e))?;
    fs::write(&ppath, payload).map_err(|e| Error::io(&ppath, e))?;
    Ok(())
}

fn decode(bytes: &[u8], dtype: Dtype) -> Vec<f64> {
    match dtype {
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        Dtype::I16 => bytes
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        Dtype::F64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    }
}
