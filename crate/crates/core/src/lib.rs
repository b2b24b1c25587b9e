//! Centerline extraction for small vessels in anisotropic 3D volumes.
//!
//! The crate is organised around the processing chain:
//!
//! 1. [`volume`] – the voxel grid, its file container, HU windowing and
//!    differential sampling (trilinear interpolation, gradients, Gaussian
//!    Hessians).
//! 2. [`vesselness`] – Hessian eigen-analysis ([`eigen`]) and Frangi's
//!    vesselness measure.
//! 3. [`tracker`] – gradient-field centerline tracking with periodic
//!    ridge-based re-centering and a bound on the turn angle per step.
//! 4. [`minpath`] – terrain costs and A* minimum-cost paths, with a Dijkstra
//!    oracle.
//! 5. [`metrics`] – directed landmark-to-path distances.
//! 6. [`phantom`] – synthetic tubes with analytic axes for verification.
//!
//! All positions are in millimetres in the physical frame of the volume
//! unless a function explicitly takes voxel indices.

pub mod centerline;
pub mod eigen;
pub mod error;
pub mod metrics;
pub mod minpath;
pub mod phantom;
pub mod pipeline;
pub mod tracker;
pub mod vesselness;
pub mod volume;

pub use centerline::{Centerline, Termination};
pub use error::{Error, Result};
pub use volume::{Geometry, PointMm, ValueKind, Volume, WindowParams};
