//! In-memory sessions and runs. Volumes are immutable once loaded; the maps
//! themselves are the only shared mutable state.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use parking_lot::RwLock;
use serde::Serialize;
use vessel_core::metrics::LandmarkSet;
use vessel_core::tracker::FasciaMask;
use vessel_core::vesselness::{enhance_volume, normalize_vesselness, FrangiParams};
use vessel_core::volume::normalize_hu;
use vessel_core::{Centerline, Result, ValueKind, Volume, WindowParams};

/// A loaded volume and everything derived from or attached to it.
#[derive(Debug)]
pub struct Session {
    pub id: String,
    /// The volume as loaded; slices are rendered from it.
    pub volume: Arc<Volume>,
    /// Working-unit intensities.
    pub normalized: Arc<Volume>,
    track_vesselness: OnceLock<Arc<Volume>>,
    minpath_vesselness: OnceLock<Arc<Volume>>,
    pub fascia: Option<Arc<FasciaMask>>,
    seeds: RwLock<Vec<LandmarkSet>>,
}

impl Session {
    /// Raw-stored volumes are windowed with the default abdominal window;
    /// normalised ones are used as they are. Provided vesselness volumes
    /// must share the geometry.
    pub fn new(
        id: String,
        volume: Volume,
        track_vesselness: Option<Volume>,
        minpath_vesselness: Option<Volume>,
        fascia: Option<Volume>,
    ) -> Result<Self> {
        let normalized = match volume.kind() {
            ValueKind::RawStored => normalize_hu(&volume, &WindowParams::default())?,
            _ => {
                volume.ensure_kind(ValueKind::NormalizedUnit)?;
                volume.clone()
            }
        };
        let s = Session {
            id,
            volume: Arc::new(volume),
            normalized: Arc::new(normalized),
            track_vesselness: OnceLock::new(),
            minpath_vesselness: OnceLock::new(),
            fascia: None,
            seeds: RwLock::new(Vec::new()),
        };
        let fascia = fascia
            .map(|f| s.volume.ensure_same_geometry(&f).map(|_| Arc::new(FasciaMask::new(f))))
            .transpose()?;
        for (slot, v) in [
            (&s.track_vesselness, track_vesselness),
            (&s.minpath_vesselness, minpath_vesselness),
        ] {
            if let Some(v) = v {
                s.volume.ensure_same_geometry(&v)?;
                let _ = slot.set(Arc::new(v));
            }
        }
        Ok(Session { fascia, ..s })
    }

    /// Tracker vesselness: the provided volume, or the subcutaneous preset
    /// computed on first use.
    pub fn track_vesselness(&self) -> Result<Arc<Volume>> {
        lazy(&self.track_vesselness, &self.normalized, &FrangiParams::subcutaneous())
    }

    /// Minimum-path vesselness: the provided volume, or the intramuscular
    /// preset computed on first use.
    pub fn minpath_vesselness(&self) -> Result<Arc<Volume>> {
        lazy(&self.minpath_vesselness, &self.normalized, &FrangiParams::intramuscular())
    }

    /// Stores a seed set and returns its id.
    pub fn add_seeds(&self, set: LandmarkSet) -> String {
        let mut seeds = self.seeds.write();
        seeds.push(set);
        (seeds.len() - 1).to_string()
    }

    pub fn seeds(&self, id: &str) -> Option<LandmarkSet> {
        let i: usize = id.parse().ok()?;
        self.seeds.read().get(i).cloned()
    }

    pub fn seed_sets(&self) -> Vec<LandmarkSet> {
        self.seeds.read().clone()
    }
}

fn lazy(slot: &OnceLock<Arc<Volume>>, normalized: &Volume, p: &FrangiParams) -> Result<Arc<Volume>> {
    if let Some(v) = slot.get() {
        return Ok(v.clone());
    }
    let v = Arc::new(normalize_vesselness(&enhance_volume(normalized, p)?)?);
    // A concurrent first use may have won the race; both results are equal.
    Ok(slot.get_or_init(|| v).clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Pending,
    Done,
    Error,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub id: String,
    pub session: String,
    pub status: RunStatus,
    pub centerline: Option<Centerline>,
    pub error: Option<String>,
}

#[derive(Debug, Default)]
pub struct Registry {
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    runs: RwLock<HashMap<String, Run>>,
}

pub fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

impl Registry {
    pub fn insert_session(&self, s: Session) -> Arc<Session> {
        let s = Arc::new(s);
        self.sessions.write().insert(s.id.clone(), s.clone());
        s
    }

    pub fn session(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.read().get(id).cloned()
    }

    pub fn start_run(&self, session: &str) -> String {
        let id = new_id();
        self.runs.write().insert(
            id.clone(),
            Run {
                id: id.clone(),
                session: session.to_string(),
                status: RunStatus::Pending,
                centerline: None,
                error: None,
            },
        );
        id
    }

    pub fn finish_run(&self, id: &str, outcome: std::result::Result<Centerline, String>) {
        if let Some(run) = self.runs.write().get_mut(id) {
            match outcome {
                Ok(c) => {
                    run.status = RunStatus::Done;
                    run.centerline = Some(c);
                }
                Err(e) => {
                    run.status = RunStatus::Error;
                    run.error = Some(e);
                }
            }
        }
    }

    pub fn run(&self, id: &str) -> Option<Run> {
        self.runs.read().get(id).cloned()
    }
}
