//! Import of the detached-header NRRD subset: raw encoding, three
//! dimensions, axis-aligned (diagonal) space directions.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{Geometry, ValueKind, Volume};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum NrrdType {
    U8,
    I8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl NrrdType {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "uchar" | "unsigned char" | "uint8" | "uint8_t" => NrrdType::U8,
            "signed char" | "int8" | "int8_t" => NrrdType::I8,
            "short" | "short int" | "signed short" | "signed short int" | "int16" | "int16_t" => {
                NrrdType::I16
            }
            "ushort" | "unsigned short" | "unsigned short int" | "uint16" | "uint16_t" => {
                NrrdType::U16
            }
            "int" | "signed int" | "int32" | "int32_t" => NrrdType::I32,
            "uint" | "unsigned int" | "uint32" | "uint32_t" => NrrdType::U32,
            "float" => NrrdType::F32,
            "double" => NrrdType::F64,
            other => return Err(Error::Header(format!("unsupported NRRD type '{other}'"))),
        })
    }

    fn width(self) -> usize {
        match self {
            NrrdType::U8 | NrrdType::I8 => 1,
            NrrdType::I16 | NrrdType::U16 => 2,
            NrrdType::I32 | NrrdType::U32 | NrrdType::F32 => 4,
            NrrdType::F64 => 8,
        }
    }

    fn decode(self, c: &[u8], little: bool) -> f64 {
        macro_rules! rd {
            ($t:ty) => {{
                let arr = c.try_into().unwrap();
                if little {
                    <$t>::from_le_bytes(arr) as f64
                } else {
                    <$t>::from_be_bytes(arr) as f64
                }
            }};
        }
        match self {
            NrrdType::U8 => c[0] as f64,
            NrrdType::I8 => c[0] as i8 as f64,
            NrrdType::I16 => rd!(i16),
            NrrdType::U16 => rd!(u16),
            NrrdType::I32 => rd!(i32),
            NrrdType::U32 => rd!(u32),
            NrrdType::F32 => rd!(f32),
            NrrdType::F64 => rd!(f64),
        }
    }
}

fn parse_vector(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    let inner = s
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::Header(format!("malformed NRRD vector '{s}'")))?;
    inner
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Header(format!("malformed NRRD vector '{s}'")))
        })
        .collect()
}

fn parse_numbers<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| Error::Header(format!("malformed NRRD {what} '{s}'")))
        })
        .collect()
}

/// Loads a NRRD volume as `raw-stored` values.
pub fn load_nrrd(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;

    // Header ends at the first blank line (or end of file for .nhdr).
    let mut header_end = bytes.len();
    let mut data_start = bytes.len();
    for i in 0..bytes.len().saturating_sub(1) {
        if bytes[i] == b'\n' && bytes[i + 1] == b'\n' {
            header_end = i;
            data_start = i + 2;
            break;
        }
        if bytes[i] == b'\n' && bytes[i + 1] == b'\r' && bytes.get(i + 2) == Some(&b'\n') {
            header_end = i;
            data_start = i + 3;
            break;
        }
    }
    let text = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::Header("NRRD header is not UTF-8".into()))?;
    let mut lines = text.lines();
    let magic = lines.next().unwrap_or_default();
    if !magic.starts_with("NRRD") {
        return Err(Error::Header("missing NRRD magic".into()));
    }
    let mut fields: HashMap<String, String> = HashMap::new();
    for line in lines {
        let line = line.trim_end_matches('\r');
        if line.starts_with('#') || line.trim().is_empty() || line.contains(":=") {
            continue;
        }
        if let Some((k, v)) = line.split_once(':') {
            fields.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
    }
    let field = |k: &str| {
        fields
            .get(k)
            .ok_or_else(|| Error::Header(format!("NRRD header lacks '{k}'")))
    };

    let dimension: usize = field("dimension")?
        .parse()
        .map_err(|_| Error::Header("malformed NRRD dimension".into()))?;
    if dimension != 3 {
        return Err(Error::Header(format!("only 3D NRRD supported, got {dimension}")));
    }
    let ty = NrrdType::parse(field("type")?)?;
    let sizes: Vec<usize> = parse_numbers(field("sizes")?, "sizes")?;
    if sizes.len() != 3 {
        return Err(Error::Header("NRRD sizes must list 3 values".into()));
    }
    let encoding = fields.get("encoding").map(String::as_str).unwrap_or("raw");
    if encoding != "raw" {
        return Err(Error::Header(format!("unsupported NRRD encoding '{encoding}'")));
    }
    let little = match fields.get("endian").map(String::as_str) {
        None | Some("little") => true,
        Some("big") => false,
        Some(other) => return Err(Error::Header(format!("unknown endian '{other}'"))),
    };

    let spacing: [f64; 3] = if let Some(dirs) = fields.get("space directions") {
        let vecs: Vec<&str> = dirs.split(')').filter(|s| !s.trim().is_empty()).collect();
        if vecs.len() != 3 {
            return Err(Error::Header("NRRD space directions must list 3 vectors".into()));
        }
        let mut sp = [0.0; 3];
        for (a, raw) in vecs.iter().enumerate() {
            let v = parse_vector(&format!("{})", raw.trim()))?;
            if v.len() != 3 {
                return Err(Error::Header("NRRD space direction must be 3D".into()));
            }
            for (b, &x) in v.iter().enumerate() {
                if b != a && x != 0.0 {
                    return Err(Error::Header(
                        "only diagonal NRRD space directions are supported".into(),
                    ));
                }
            }
            sp[a] = v[a].abs();
        }
        sp
    } else if let Some(s) = fields.get("spacings") {
        let v: Vec<f64> = parse_numbers(s, "spacings")?;
        if v.len() != 3 {
            return Err(Error::Header("NRRD spacings must list 3 values".into()));
        }
        [v[0], v[1], v[2]]
    } else {
        [1.0; 3]
    };
    let origin = match fields.get("space origin") {
        Some(s) => {
            let v = parse_vector(s)?;
            if v.len() != 3 {
                return Err(Error::Header("NRRD space origin must be 3D".into()));
            }
            [v[0], v[1], v[2]]
        }
        None => [0.0; 3],
    };
    let geometry = Geometry::new([sizes[0], sizes[1], sizes[2]], spacing, origin)?;

    let payload = match fields.get("data file").or_else(|| fields.get("datafile")) {
        Some(name) => {
            let dpath = path.parent().unwrap_or(Path::new(".")).join(name);
            fs::read(&dpath).map_err(|e| Error::io(&dpath, e))?
        }
        None => bytes[data_start.min(bytes.len())..].to_vec(),
    };
    let width = ty.width();
    if payload.len() != geometry.len() * width {
        return Err(Error::PayloadSizeMismatch {
            expected: geometry.len(),
            found: payload.len() / width,
        });
    }
    let data = payload
        .chunks_exact(width)
        .map(|c| ty.decode(c, little))
        .collect();
    Volume::new(geometry, data, ValueKind::RawStored)
}
