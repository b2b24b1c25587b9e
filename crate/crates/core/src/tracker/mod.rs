//! Gradient-field centerline tracking.
//!
//! Each iteration collects vesselness gradients on a lattice inside a cube
//! around the current point, takes the direction that is most orthogonal to
//! them, bounds the turn against the previous direction, and advances one
//! step. Every `correction_interval` iterations the new point is moved
//! in-plane to the ridge of the vesselness cross-section.

mod cross_section;
mod direction;
mod ridge;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::centerline::{Centerline, Termination};
use crate::error::{Error, Result};
use crate::volume::{PointMm, Volume};

pub use cross_section::{extract_cross_section, plane_basis, CrossSection, Patch};
pub use direction::{
    angle_deg, clamp_direction, estimate_direction, gradient_correlation, DirectionEstimate,
    DEGENERACY_RATIO, MIN_GRADIENTS,
};
pub use ridge::{correlation_response, orientation_field, ridge_correct, template_vector};

/// Consecutive sub-threshold iterations that end a track.
pub const LOW_VESSELNESS_RUN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Advance per iteration (mm).
    pub step_delta_mm: f64,
    /// Side of the cube from which gradients are gathered (mm).
    pub window_side_mm: f64,
    /// Ridge correction every N iterations.
    pub correction_interval: usize,
    /// Largest angle between consecutive directions (degrees).
    pub max_turn_deg: f64,
    pub cross_section_side_mm: f64,
    pub cross_section_resolution_mm: f64,
    pub min_vesselness: f64,
    pub max_iterations: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            step_delta_mm: 1.0,
            window_side_mm: 4.0,
            correction_interval: 3,
            max_turn_deg: 60.0,
            cross_section_side_mm: 6.0,
            cross_section_resolution_mm: 0.25,
            min_vesselness: 0.01,
            max_iterations: 500,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step_delta_mm", self.step_delta_mm),
            ("window_side_mm", self.window_side_mm),
            ("cross_section_side_mm", self.cross_section_side_mm),
            ("cross_section_resolution_mm", self.cross_section_resolution_mm),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.correction_interval == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "correction_interval and max_iterations must be positive".into(),
            ));
        }
        if !(self.max_turn_deg > 0.0 && self.max_turn_deg <= 90.0) {
            return Err(Error::InvalidParameter(format!(
                "max_turn_deg must lie in (0, 90], got {}",
                self.max_turn_deg
            )));
        }
        if self.cross_section_resolution_mm > self.cross_section_side_mm / 8.0 {
            return Err(Error::InvalidParameter(
                "cross-section resolution must be at most 1/8 of its side".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.min_vesselness) {
            return Err(Error::InvalidParameter("min_vesselness must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Largest in-plane correction: half the window, and never so far that
    /// a step exceeds twice `step_delta_mm`.
    pub fn max_correction_mm(&self) -> f64 {
        (0.5 * self.window_side_mm).min(3f64.sqrt() * self.step_delta_mm)
    }
}

/// Binary label volume: 1 on the muscle side of the fascia.
#[derive(Debug, Clone)]
pub struct FasciaMask {
    labels: Volume,
}

impl FasciaMask {
    pub fn new(labels: Volume) -> Self {
        FasciaMask { labels }
    }

    /// Everything on the `positive_side` of the plane `axis = position_mm`.
    pub fn half_space(
        like: &Volume,
        axis: usize,
        position_mm: f64,
        positive_side: bool,
    ) -> Result<Self> {
        if axis > 2 {
            return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
        }
        let labels = Volume::from_fn(*like.geometry(), crate::volume::ValueKind::NormalizedUnit, |p| {
            let above = p[axis] >= position_mm;
            if above == positive_side {
                1.0
            } else {
                0.0
            }
        })?;
        Ok(FasciaMask { labels })
    }

    pub fn volume(&self) -> &Volume {
        &self.labels
    }

    /// Interpolated label of at least one half; false outside the grid.
    pub fn contains(&self, p: &PointMm) -> bool {
        self.labels.try_sample(p).is_some_and(|v| v >= 0.5)
    }
}

/// Tracks centerlines through a vesselness volume.
#[derive(Debug, Clone)]
pub struct Tracker<'a> {
    vesselness: &'a Volume,
    fascia: Option<&'a FasciaMask>,
    cfg: TrackerConfig,
    lattice: Vec<Vector3<f64>>,
    gradient_step: f64,
}

impl<'a> Tracker<'a> {
    pub fn new(vesselness: &'a Volume, cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        let g = vesselness.geometry();
        let step = g.min_spacing();
        let n = (cfg.window_side_mm / step).floor() as usize + 1;
        let half = (n as f64 - 1.0) / 2.0;
        let mut lattice = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    lattice.push(Vector3::new(
                        (i as f64 - half) * step,
                        (j as f64 - half) * step,
                        (k as f64 - half) * step,
                    ));
                }
            }
        }
        Ok(Tracker {
            vesselness,
            fascia: None,
            cfg,
            lattice,
            gradient_step: vesselness.default_gradient_step(),
        })
    }

    /// Checks that an intensity volume shares the vesselness geometry.
    pub fn with_intensity(self, intensity: &Volume) -> Result<Self> {
        self.vesselness.ensure_same_geometry(intensity)?;
        Ok(self)
    }

    pub fn with_fascia(mut self, fascia: &'a FasciaMask) -> Result<Self> {
        self.vesselness.ensure_same_geometry(fascia.volume())?;
        self.fascia = Some(fascia);
        Ok(self)
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Number of lattice offsets in the gradient window.
    pub fn lattice_len(&self) -> usize {
        self.lattice.len()
    }

    /// Vesselness gradients on the window lattice around `centre`; lattice
    /// points whose stencil leaves the volume are skipped.
    pub fn window_gradients(&self, centre: &PointMm) -> Vec<Vector3<f64>> {
        self.lattice
            .iter()
            .filter_map(|off| self.vesselness.gradient_at(&(centre + off), self.gradient_step).ok())
            .collect()
    }

    /// Direction at `seed` from the local gradient field, oriented towards
    /// the volume centre.
    pub fn initial_direction(&self, seed: &PointMm) -> Result<Vector3<f64>> {
        let (lo, hi) = self.vesselness.geometry().bounds_mm();
        let inward = nalgebra::center(&lo, &hi) - seed;
        let reference = if inward.norm() > 0.0 { inward } else { Vector3::z() };
        let est = estimate_direction(&self.window_gradients(seed), Some(&reference))?;
        if est.degenerate {
            return Err(Error::InvalidParameter(
                "gradient field at the seed has no dominant direction; give a second landmark".into(),
            ));
        }
        Ok(est.direction)
    }

    /// Tracks from `seed` starting along `initial_dir`.
    pub fn track(&self, seed: &PointMm, initial_dir: &Vector3<f64>) -> Result<Centerline> {
        let cfg = &self.cfg;
        let seed_v = self.vesselness.sample_trilinear(seed)?;
        if seed_v < cfg.min_vesselness {
            return Err(Error::SeedNotOnVessel {
                vesselness: seed_v,
                threshold: cfg.min_vesselness,
            });
        }
        let n0 = initial_dir.norm();
        if !(n0 > 0.0) || !n0.is_finite() {
            return Err(Error::InvalidParameter("initial direction must be non-zero".into()));
        }
        let mut prev = initial_dir / n0;
        let mut current = *seed;
        let mut points = vec![current];
        let mut directions = vec![prev];
        let mut vesselness = vec![seed_v];
        let mut low_run = 0usize;

        let finish = |termination, points, directions, vesselness| {
            Ok(Centerline {
                points,
                directions,
                vesselness,
                termination,
                stats: None,
            })
        };

        if self.fascia.is_some_and(|f| f.contains(&current)) {
            return finish(Termination::FasciaReached, points, directions, vesselness);
        }

        for iteration in 1..=cfg.max_iterations {
            let grads = self.window_gradients(&current);
            if grads.len() < MIN_GRADIENTS {
                return finish(Termination::OutOfBounds, points, directions, vesselness);
            }
            let est = estimate_direction(&grads, Some(&prev))?;
            let candidate = if est.degenerate { prev } else { est.direction };
            let dir = clamp_direction(&candidate, &prev, cfg.max_turn_deg);

            let mut next = current + dir * cfg.step_delta_mm;
            if !self.vesselness.contains(&next) {
                return finish(Termination::OutOfBounds, points, directions, vesselness);
            }
            if iteration % cfg.correction_interval == 0 {
                next = self.recentre(&next, &dir);
            }
            let Some(v) = self.vesselness.try_sample(&next) else {
                return finish(Termination::OutOfBounds, points, directions, vesselness);
            };

            points.push(next);
            directions.push(dir);
            vesselness.push(v);
            current = next;
            prev = dir;

            if self.fascia.is_some_and(|f| f.contains(&current)) {
                return finish(Termination::FasciaReached, points, directions, vesselness);
            }
            if v < cfg.min_vesselness {
                low_run += 1;
                if low_run >= LOW_VESSELNESS_RUN {
                    return finish(Termination::LowVesselness, points, directions, vesselness);
                }
            } else {
                low_run = 0;
            }
        }
        finish(Termination::MaxIterations, points, directions, vesselness)
    }

    /// Moves `p` within the plane orthogonal to `dir` onto the cross-section
    /// ridge. Leaves `p` unchanged when the plane is mostly outside the
    /// volume or when the move would lower the vesselness.
    fn recentre(&self, p: &PointMm, dir: &Vector3<f64>) -> PointMm {
        let cfg = &self.cfg;
        let Ok(cs) = extract_cross_section(
            self.vesselness,
            p,
            dir,
            cfg.cross_section_side_mm,
            cfg.cross_section_resolution_mm,
        ) else {
            return *p;
        };
        let Ok(mut offset) = ridge_correct(&cs.patch) else {
            return *p;
        };
        let limit = cfg.max_correction_mm();
        let norm = offset.norm();
        if norm > limit {
            offset *= limit / norm;
        }
        let moved = cs.to_world(offset.x, offset.y);
        match (self.vesselness.try_sample(&moved), self.vesselness.try_sample(p)) {
            (Some(after), Some(before)) if after >= before => moved,
            _ => *p,
        }
    }
}

/// Convenience wrapper: track one seed with optional fascia mask.
pub fn track(
    vesselness: &Volume,
    intensity: Option<&Volume>,
    seed: &PointMm,
    initial_dir: Option<&Vector3<f64>>,
    fascia: Option<&FasciaMask>,
    cfg: &TrackerConfig,
) -> Result<Centerline> {
    let mut tracker = Tracker::new(vesselness, *cfg)?;
    if let Some(i) = intensity {
        tracker = tracker.with_intensity(i)?;
    }
    if let Some(f) = fascia {
        tracker = tracker.with_fascia(f)?;
    }
    let dir = match initial_dir {
        Some(d) => *d,
        None => tracker.initial_direction(seed)?,
    };
    tracker.track(seed, &dir)
}
