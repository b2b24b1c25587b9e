use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{astar, build_cost_volume, refine_path, SigmoidParams};
use crate::error::Result;
use crate::metrics::evaluate_points;
use crate::volume::{PointMm, Volume};

pub const SWEEP_CSV_HEADER: &str = "a_s,b_s,mean_euclidean_mm,hausdorff_mm,elapsed_s";

/// The 6 × 7 grid of sigmoid parameters: `a_s` from 7.5 to 45 in steps of
/// 7.5 and `b_s` from 0.50 to 0.80 in steps of 0.05.
pub fn sweep_grid() -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(42);
    for i in 1..=6 {
        for j in 0..=6 {
            out.push((7.5 * i as f64, (50 + 5 * j) as f64 / 100.0));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub a_s: f64,
    pub b_s: f64,
    pub mean_euclidean_mm: f64,
    pub hausdorff_mm: f64,
    pub elapsed_s: f64,
    pub expanded_nodes: u64,
    pub total_cost: f64,
}

/// Runs one search per grid cell (in parallel) and scores each path against
/// the landmarks. `base` supplies ε and the sigmoid orientation.
pub fn run_sweep(
    vness_norm: &Volume,
    intensity_norm: &Volume,
    start: [usize; 3],
    goal: [usize; 3],
    landmarks: &[PointMm],
    base: &SigmoidParams,
    grid: &[(f64, f64)],
) -> Result<Vec<SweepRow>> {
    grid.par_iter()
        .map(|&(a_s, b_s)| {
            let p = SigmoidParams { a_s, b_s, ..*base };
            let costs = build_cost_volume(vness_norm, intensity_norm, &p)?;
            let path = astar(&costs, start, goal)?;
            let line = refine_path(&path, &costs)?;
            let m = evaluate_points(landmarks, &line.points)?;
            Ok(SweepRow {
                a_s,
                b_s,
                mean_euclidean_mm: m.mean_distance_mm,
                hausdorff_mm: m.hausdorff_mm,
                elapsed_s: path.elapsed.as_secs_f64(),
                expanded_nodes: path.expanded_nodes,
                total_cost: path.total_cost,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.2},{:.6},{:.6},{:.6}",
            r.a_s, r.b_s, r.mean_euclidean_mm, r.hausdorff_mm, r.elapsed_s
        );
    }
    out
}
