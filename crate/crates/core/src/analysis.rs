//! Instrumentation over recorded traces: proximity islands, the frontier of
//! the informed region, and first-visit times of a tessellation.

use petgraph::unionfind::UnionFind;
use serde::Serialize;

use crate::engine::{Snapshot, Trace};
use crate::placement::Placement;
use crate::topology::{Coord, NodeId, Topology, TopologyKind};
use crate::{Error, Result};

/// Island parameter `√(n / (4 e³ m))` used for static agents at `t = 0`.
pub fn static_island_gamma(n: usize, m: usize) -> f64 {
    (n as f64 / (4.0 * 3f64.exp() * m as f64)).sqrt()
}

/// Island parameter `√(n / (4 e⁶ m))` used while agents move.
pub fn moving_island_gamma(n: usize, m: usize) -> f64 {
    (n as f64 / (4.0 * 6f64.exp() * m as f64)).sqrt()
}

/// Partition of agents into connected components of the graph joining
/// agents at L1 distance `<= gamma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IslandDecomposition {
    pub gamma: f64,
    /// Sorted components, each sorted, ordered by smallest member.
    pub components: Vec<Vec<usize>>,
    pub max_size: usize,
}

impl IslandDecomposition {
    fn from_labels(gamma: f64, labels: Vec<usize>) -> Self {
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); labels.len()];
        for (i, &r) in labels.iter().enumerate() {
            by_root[r].push(i);
        }
        // Agents are visited in index order, so each component is already
        // sorted and the first-seen order is by smallest member.
        let mut components: Vec<Vec<usize>> = by_root.into_iter().filter(|c| !c.is_empty()).collect();
        components.sort_by_key(|c| c[0]);
        let max_size = components.iter().map(Vec::len).max().unwrap_or(0);
        IslandDecomposition {
            gamma,
            components,
            max_size,
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Islands via cell bucketing (cell side `⌈γ⌉`) and union-find. Only agents
/// in neighboring buckets are compared.
pub fn islands(topo: &Topology, positions: &[NodeId], gamma: f64) -> Result<IslandDecomposition> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    let m = positions.len();
    let side = topo.side();
    let cell = (gamma.ceil().min(side as f64) as u32).max(1);
    let per_axis = side.div_ceil(cell);
    let planar = topo.kind().is_planar();
    let rows = if planar { per_axis } else { 1 };
    let wraps = topo.kind() != TopologyKind::GridSelfloop;
    let reach: i64 = if wraps && !side.is_multiple_of(cell) { 2 } else { 1 };

    let bucket_of = |v: NodeId| {
        let c = topo.coord(v);
        ((c.x - 1) / cell, (c.y - 1) / cell)
    };
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); (per_axis * rows) as usize];
    for (i, &v) in positions.iter().enumerate() {
        let (bx, by) = bucket_of(v);
        buckets[(by * per_axis + bx) as usize].push(i);
    }

    let mut uf = UnionFind::<usize>::new(m);
    let mut neighbors: Vec<usize> = Vec::with_capacity(25);
    let axis = |b: u32, d: i64, count: u32| -> Option<u32> {
        let t = b as i64 + d;
        if wraps {
            Some(t.rem_euclid(count as i64) as u32)
        } else if (0..count as i64).contains(&t) {
            Some(t as u32)
        } else {
            None
        }
    };
    for (i, &v) in positions.iter().enumerate() {
        let (bx, by) = bucket_of(v);
        neighbors.clear();
        let dys = if planar { -reach..=reach } else { 0..=0 };
        for dy in dys {
            let Some(ny) = (if planar { axis(by, dy, rows) } else { Some(0) }) else {
                continue;
            };
            for dx in -reach..=reach {
                if let Some(nx) = axis(bx, dx, per_axis) {
                    neighbors.push((ny * per_axis + nx) as usize);
                }
            }
        }
        neighbors.sort_unstable();
        neighbors.dedup();
        for &b in &neighbors {
            for &j in &buckets[b] {
                if j > i && topo.node_distance(v, positions[j]) as f64 <= gamma {
                    uf.union(i, j);
                }
            }
        }
    }
    let labels = (0..m).map(|i| uf.find(i)).collect();
    Ok(IslandDecomposition::from_labels(gamma, labels))
}

pub fn islands_of_coords(topo: &Topology, coords: &[Coord], gamma: f64) -> Result<IslandDecomposition> {
    let nodes = coords.iter().map(|&c| topo.node(c)).collect::<Result<Vec<_>>>()?;
    islands(topo, &nodes, gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IslandStat {
    pub t: u64,
    pub max_island: usize,
    pub num_islands: usize,
}

pub fn max_island_over_time(topo: &Topology, trace: &Trace, gamma: f64) -> Result<Vec<IslandStat>> {
    trace
        .snapshots
        .iter()
        .map(|s| {
            let d = islands(topo, &s.positions, gamma)?;
            Ok(IslandStat {
                t: s.t,
                max_island: d.max_size,
                num_islands: d.len(),
            })
        })
        .collect()
}

/// Position of the rightmost informed agent over time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrontierRecord {
    pub times: Vec<u64>,
    pub xbar: Vec<Coord>,
    /// Agent standing at `xbar[k]`.
    pub agent: Vec<usize>,
}

/// Rightmost informed agent: largest x, then largest y, then lowest index.
pub fn rightmost_informed(topo: &Topology, snapshot: &Snapshot) -> Option<(usize, Coord)> {
    let mut best: Option<(usize, Coord)> = None;
    for (i, (&v, &inf)) in snapshot.positions.iter().zip(&snapshot.informed).enumerate() {
        if !inf {
            continue;
        }
        let c = topo.coord(v);
        match best {
            Some((_, b)) if (c.x, c.y) <= (b.x, b.y) => {}
            _ => best = Some((i, c)),
        }
    }
    best
}

pub fn frontier_series(topo: &Topology, trace: &Trace) -> Result<FrontierRecord> {
    if topo.kind() != TopologyKind::GridSelfloop {
        return Err(Error::UnsupportedTopology(topo.kind().to_string()));
    }
    let mut rec = FrontierRecord {
        times: Vec::new(),
        xbar: Vec::new(),
        agent: Vec::new(),
    };
    for s in &trace.snapshots {
        if let Some((i, c)) = rightmost_informed(topo, s) {
            rec.times.push(s.t);
            rec.xbar.push(c);
            rec.agent.push(i);
        }
    }
    Ok(rec)
}

/// Window length `γ² / (36 ln n)` with `γ` the moving-agent island
/// parameter, rounded up to a whole step.
pub fn slow_frontier_window(n: usize, m: usize) -> u64 {
    let g = moving_island_gamma(n, m);
    ((g * g / (36.0 * (n as f64).ln())).ceil() as u64).max(1)
}

/// Advance bound `γ ln n / 2` for one window.
pub fn slow_frontier_bound(n: usize, m: usize) -> f64 {
    moving_island_gamma(n, m) * (n as f64).ln() / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierAdvance {
    pub window: u64,
    /// `‖x̄(t + window) − x̄(t)‖₁` for every recorded `t` whose partner time
    /// is also recorded.
    pub advances: Vec<u32>,
    pub max_advance: u32,
}

impl FrontierAdvance {
    pub fn violation_fraction(&self, bound: f64) -> f64 {
        if self.advances.is_empty() {
            return 0.0;
        }
        self.advances.iter().filter(|&&a| a as f64 > bound).count() as f64 / self.advances.len() as f64
    }
}

pub fn frontier_advance(topo: &Topology, record: &FrontierRecord, window: u64) -> FrontierAdvance {
    let mut advances = Vec::new();
    let mut j = 0;
    for (k, &t0) in record.times.iter().enumerate() {
        let target = t0 + window;
        while j < record.times.len() && record.times[j] < target {
            j += 1;
        }
        if j < record.times.len() && record.times[j] == target {
            advances.push(topo.coord_distance(record.xbar[k], record.xbar[j]));
        }
    }
    let max_advance = advances.iter().copied().max().unwrap_or(0);
    FrontierAdvance {
        window,
        advances,
        max_advance,
    }
}

/// Largest L1 distance from the source to any agent.
pub fn initial_max_distance(topo: &Topology, placement: &Placement) -> Result<u32> {
    let src = placement.source().ok_or(Error::EmptyPlacement)?;
    Ok(placement
        .positions
        .iter()
        .map(|&v| topo.node_distance(src, v))
        .max()
        .unwrap_or(0))
}

/// First-reached and first-conquered times of a tessellation into square
/// cells of side `cell_side` (the last row and column may be partial).
///
/// A cell is reached when an informed agent first stands in it; it is
/// conquered once every agent that was inside it at that instant is
/// informed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub cell_side: u32,
    pub cells_x: u32,
    pub cells_y: u32,
    pub first_reached: Vec<Option<u64>>,
    pub first_conquered: Vec<Option<u64>>,
}

impl CellRecord {
    pub fn index(&self, cx: u32, cy: u32) -> usize {
        (cy * self.cells_x + cx) as usize
    }

    /// Per reached cell: the largest delay until each in-range 4-neighbor
    /// cell is reached (0 if it was reached first), or `None` if some
    /// neighbor never was.
    pub fn neighbor_reach_delays(&self) -> Vec<Option<u64>> {
        let mut out = Vec::new();
        for cy in 0..self.cells_y {
            for cx in 0..self.cells_x {
                let Some(t) = self.first_reached[self.index(cx, cy)] else {
                    continue;
                };
                let mut worst = Some(0u64);
                let nbrs = [
                    (cx.checked_add(1).filter(|&x| x < self.cells_x), Some(cy)),
                    (cx.checked_sub(1), Some(cy)),
                    (Some(cx), cy.checked_add(1).filter(|&y| y < self.cells_y)),
                    (Some(cx), cy.checked_sub(1)),
                ];
                for (nx, ny) in nbrs {
                    let (Some(nx), Some(ny)) = (nx, ny) else { continue };
                    worst = match (worst, self.first_reached[self.index(nx, ny)]) {
                        (Some(w), Some(tn)) => Some(w.max(tn.saturating_sub(t))),
                        _ => None,
                    };
                }
                out.push(worst);
            }
        }
        out
    }
}

/// Incremental form of [`cell_diagnostics`], fed one snapshot at a time.
#[derive(Debug, Clone)]
pub struct CellTracker {
    topo: Topology,
    record: CellRecord,
    pending: Vec<(usize, Vec<usize>)>,
}

impl CellTracker {
    pub fn new(topo: &Topology, cell_side: u32) -> Result<Self> {
        if cell_side == 0 {
            return Err(Error::invalid("cell side must be positive"));
        }
        let cells_x = topo.side().div_ceil(cell_side);
        let cells_y = if topo.kind().is_planar() { cells_x } else { 1 };
        let count = (cells_x * cells_y) as usize;
        Ok(CellTracker {
            topo: *topo,
            record: CellRecord {
                cell_side,
                cells_x,
                cells_y,
                first_reached: vec![None; count],
                first_conquered: vec![None; count],
            },
            pending: Vec::new(),
        })
    }

    fn cell_of(&self, v: NodeId) -> usize {
        let c = self.topo.coord(v);
        let s = self.record.cell_side;
        self.record.index((c.x - 1) / s, (c.y - 1) / s)
    }

    pub fn observe(&mut self, snapshot: &Snapshot) {
        let cells: Vec<usize> = snapshot.positions.iter().map(|&v| self.cell_of(v)).collect();
        let mut newly: Vec<usize> = Vec::new();
        for (i, &q) in cells.iter().enumerate() {
            if snapshot.informed[i] && self.record.first_reached[q].is_none() {
                self.record.first_reached[q] = Some(snapshot.t);
                newly.push(q);
            }
        }
        if !newly.is_empty() {
            newly.sort_unstable();
            for q in newly {
                let residents = cells
                    .iter()
                    .enumerate()
                    .filter(|&(_, &c)| c == q)
                    .map(|(i, _)| i)
                    .collect();
                self.pending.push((q, residents));
            }
        }
        let record = &mut self.record;
        self.pending.retain(|(q, residents)| {
            if residents.iter().all(|&i| snapshot.informed[i]) {
                record.first_conquered[*q] = Some(snapshot.t);
                false
            } else {
                true
            }
        });
    }

    pub fn finish(self) -> CellRecord {
        self.record
    }
}

pub fn cell_diagnostics(topo: &Topology, trace: &Trace, cell_side: u32) -> Result<CellRecord> {
    let mut tracker = CellTracker::new(topo, cell_side)?;
    for s in &trace.snapshots {
        tracker.observe(s);
    }
    Ok(tracker.finish())
}
