use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::volume::{Geometry, ValueKind, Volume};

/// A 26-connected chain of voxels from start to goal.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelPath {
    pub voxels: Vec<[usize; 3]>,
    pub total_cost: f64,
    /// Nodes settled (popped and closed) by the search.
    pub expanded_nodes: u64,
    pub elapsed: Duration,
}

/// Open-list entry; the heap pops the smallest key, ties going to the
/// lexicographically smallest voxel index.
#[derive(Debug, Clone, Copy)]
struct Entry {
    key: f64,
    idx: [usize; 3],
    offset: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

struct Neighbour {
    delta: [i64; 3],
    length_mm: f64,
}

fn neighbours(g: &Geometry) -> Vec<Neighbour> {
    let mut out = Vec::with_capacity(26);
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 && dz == 0 {
                    continue;
                }
                let s = g.spacing_mm;
                let length_mm = ((dx as f64 * s[0]).powi(2)
                    + (dy as f64 * s[1]).powi(2)
                    + (dz as f64 * s[2]).powi(2))
                .sqrt();
                out.push(Neighbour {
                    delta: [dx, dy, dz],
                    length_mm,
                });
            }
        }
    }
    out
}

fn step(g: &Geometry, idx: [usize; 3], delta: [i64; 3]) -> Option<[usize; 3]> {
    let mut out = [0usize; 3];
    for a in 0..3 {
        let v = idx[a] as i64 + delta[a];
        if v < 0 || v >= g.dims[a] as i64 {
            return None;
        }
        out[a] = v as usize;
    }
    Some(out)
}

/// Euclidean distance in mm between two voxel centres, shrunk by a few
/// parts in 10¹² so it stays below path sums that round downwards.
pub fn heuristic_mm(g: &Geometry, a: [usize; 3], b: [usize; 3]) -> f64 {
    (g.voxel_to_mm(a) - g.voxel_to_mm(b)).norm() * HEURISTIC_SHRINK
}

const HEURISTIC_SHRINK: f64 = 1.0 - 4e-12;

fn check_index(g: &Geometry, idx: [usize; 3], what: &str) -> Result<()> {
    if (0..3).all(|a| idx[a] < g.dims[a]) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} voxel {idx:?} is outside dims {:?}",
            g.dims
        )))
    }
}

fn search(costs: &Volume, start: [usize; 3], goal: [usize; 3], guided: bool) -> Result<VoxelPath> {
    let t0 = Instant::now();
    costs.ensure_kind(ValueKind::Cost)?;
    let g = *costs.geometry();
    check_index(&g, start, "start")?;
    check_index(&g, goal, "goal")?;
    let c = costs.data();
    let nbrs = neighbours(&g);
    let h = |idx: [usize; 3]| if guided { heuristic_mm(&g, idx, goal) } else { 0.0 };

    let n = g.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let s = g.offset(start);
    let goal_offset = g.offset(goal);
    dist[s] = 0.0;
    open.push(Entry {
        key: h(start),
        idx: start,
        offset: s,
    });
    let mut expanded = 0u64;

    while let Some(Entry { idx, offset, .. }) = open.pop() {
        if closed[offset] {
            continue;
        }
        closed[offset] = true;
        expanded += 1;
        if offset == goal_offset {
            let mut voxels = vec![goal];
            let mut cur = offset;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                voxels.push(g.index_of(cur));
            }
            voxels.reverse();
            return Ok(VoxelPath {
                voxels,
                total_cost: dist[offset],
                expanded_nodes: expanded,
                elapsed: t0.elapsed(),
            });
        }
        let base = dist[offset];
        for nb in &nbrs {
            let Some(next) = step(&g, idx, nb.delta) else {
                continue;
            };
            let o = g.offset(next);
            if closed[o] || !c[o].is_finite() {
                continue;
            }
            let cand = base + c[o] * nb.length_mm;
            if cand < dist[o] {
                dist[o] = cand;
                parent[o] = offset;
                open.push(Entry {
                    key: cand + h(next),
                    idx: next,
                    offset: o,
                });
            }
        }
    }
    Err(Error::Unreachable)
}

/// A* search with the Euclidean-distance heuristic.
pub fn astar(costs: &Volume, start: [usize; 3], goal: [usize; 3]) -> Result<VoxelPath> {
    search(costs, start, goal, true)
}

/// Plain Dijkstra search, stopping when the goal is settled.
pub fn dijkstra_oracle(costs: &Volume, start: [usize; 3], goal: [usize; 3]) -> Result<VoxelPath> {
    search(costs, start, goal, false)
}

/// Exact remaining cost from every voxel to `goal` (infinite when
/// unreachable), by Dijkstra on the reversed graph.
pub fn distances_to_goal(costs: &Volume, goal: [usize; 3]) -> Result<Vec<f64>> {
    costs.ensure_kind(ValueKind::Cost)?;
    let g = *costs.geometry();
    check_index(&g, goal, "goal")?;
    let c = costs.data();
    let nbrs = neighbours(&g);
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut closed = vec![false; g.len()];
    let mut open = BinaryHeap::new();
    let s = g.offset(goal);
    dist[s] = 0.0;
    open.push(Entry {
        key: 0.0,
        idx: goal,
        offset: s,
    });
    while let Some(Entry { idx, offset, .. }) = open.pop() {
        if closed[offset] {
            continue;
        }
        closed[offset] = true;
        // Entering `offset` is what costs c[offset]; blocked voxels can be
        // left but never entered.
        if !c[offset].is_finite() {
            continue;
        }
        for nb in &nbrs {
            let Some(prev) = step(&g, idx, nb.delta) else {
                continue;
            };
            let o = g.offset(prev);
            let cand = dist[offset] + c[offset] * nb.length_mm;
            if !closed[o] && cand < dist[o] {
                dist[o] = cand;
                open.push(Entry {
                    key: cand,
                    idx: prev,
                    offset: o,
                });
            }
        }
    }
    Ok(dist)
}
