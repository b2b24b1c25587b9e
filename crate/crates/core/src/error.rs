use std::path::PathBuf;

use crate::volume::ValueKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid header: {0}")]
    Header(String),

    #[error("payload size mismatch: expected {expected} values, found {found}")]
    PayloadSizeMismatch { expected: usize, found: usize },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("geometry mismatch between volumes")]
    GeometryMismatch,

    #[error("expected a {expected} volume, got {found}")]
    ValueKind { expected: ValueKind, found: ValueKind },

    #[error("point ({:.3}, {:.3}, {:.3}) mm is outside the volume", .0[0], .0[1], .0[2])]
    OutOfBounds([f64; 3]),

    #[error("under-resolved scale: sigma {sigma} mm is below half the smallest spacing ({min_spacing} mm)")]
    UnderResolvedScale { sigma: f64, min_spacing: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("too few gradient samples: {0} (at least 6 required)")]
    TooFewGradients(usize),

    #[error("seed not on vessel: vesselness {vesselness:.4} below threshold {threshold}")]
    SeedNotOnVessel { vesselness: f64, threshold: f64 },

    #[error("cross-section out of volume (coverage {0:.2})")]
    CrossSectionOutOfVolume(f64),

    #[error("goal voxel unreachable from start")]
    Unreachable,

    #[error("curve out of bounds: {0}")]
    CurveOutOfBounds(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the inputs (files, headers, parameters,
    /// out-of-range coordinates) rather than by a computation that could not
    /// complete.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            Error::UnderResolvedScale { .. }
                | Error::TooFewGradients(_)
                | Error::CrossSectionOutOfVolume(_)
                | Error::Unreachable
        )
    }
}
