//! Single entry points for the track and minimum-path runs, shared by the
//! command line and the HTTP service so both produce identical results.

use serde::{Deserialize, Serialize};

use crate::centerline::Centerline;
use crate::error::{Error, Result};
use crate::minpath::{astar, build_cost_volume, refine_path, SigmoidParams};
use crate::tracker::{FasciaMask, Tracker, TrackerConfig};
use crate::volume::{PointMm, Volume};

/// Tracks from `seed`. With `toward`, the first direction points from the
/// seed to that landmark; otherwise it is estimated at the seed.
pub fn run_track(
    vesselness: &Volume,
    intensity: Option<&Volume>,
    fascia: Option<&FasciaMask>,
    seed: &PointMm,
    toward: Option<&PointMm>,
    cfg: &TrackerConfig,
) -> Result<Centerline> {
    if !vesselness.contains(seed) {
        return Err(Error::OutOfBounds([seed.x, seed.y, seed.z]));
    }
    let mut tracker = Tracker::new(vesselness, *cfg)?;
    if let Some(i) = intensity {
        tracker = tracker.with_intensity(i)?;
    }
    if let Some(f) = fascia {
        tracker = tracker.with_fascia(f)?;
    }
    let dir = match toward {
        Some(t) => (t - seed)
            .try_normalize(0.0)
            .ok_or_else(|| Error::InvalidParameter("second landmark coincides with the seed".into()))?,
        None => tracker.initial_direction(seed)?,
    };
    tracker.track(seed, &dir)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinpathOptions {
    pub sigmoid: SigmoidParams,
    /// Record the search time in the output; off gives byte-reproducible
    /// documents.
    pub timing: bool,
}

impl Default for MinpathOptions {
    fn default() -> Self {
        MinpathOptions {
            sigmoid: SigmoidParams::default(),
            timing: true,
        }
    }
}

/// Minimum-cost path between the voxels nearest to `start` and `goal`.
pub fn run_minpath(
    vness_norm: &Volume,
    intensity_norm: &Volume,
    start: &PointMm,
    goal: &PointMm,
    opts: &MinpathOptions,
) -> Result<Centerline> {
    let g = vness_norm.geometry();
    let voxel = |p: &PointMm| g.nearest_voxel(p).ok_or(Error::OutOfBounds([p.x, p.y, p.z]));
    let (s, t) = (voxel(start)?, voxel(goal)?);
    let costs = build_cost_volume(vness_norm, intensity_norm, &opts.sigmoid)?;
    let path = astar(&costs, s, t)?;
    let mut line = refine_path(&path, &costs)?;
    if !opts.timing {
        if let Some(stats) = line.stats.as_mut() {
            stats.elapsed_ms = 0.0;
        }
    }
    Ok(line)
}
