//! Node sets, the degree-regular move rule, and L1 distances.
//!
//! Nodes are addressed two ways: a 1-based [`Coord`] for the public surface
//! and a dense row-major [`NodeId`] (`(y - 1) * side + (x - 1)`) for the hot
//! paths of the simulator and the exact oracles.
//!
//! Every node exposes a fixed number of *move slots*: four on the 2-D kinds
//! and two on the ring. Slots are ordered `[x+1, x-1, y+1, y-1]` (ring:
//! `[x+1, x-1]`). On [`TopologyKind::GridSelfloop`] a slot that would leave
//! the grid points back at the node itself, so a corner carries two
//! self-loops and an edge node one. That regularization makes the uniform
//! distribution stationary.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    #[serde(rename = "grid")]
    GridSelfloop,
    Torus,
    Ring,
}

impl TopologyKind {
    pub fn is_planar(self) -> bool {
        !matches!(self, TopologyKind::Ring)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TopologyKind::GridSelfloop => "grid",
            TopologyKind::Torus => "torus",
            TopologyKind::Ring => "ring",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" | "grid_selfloop" => Ok(TopologyKind::GridSelfloop),
            "torus" => Ok(TopologyKind::Torus),
            "ring" => Ok(TopologyKind::Ring),
            other => Err(Error::invalid(format!("unknown topology `{other}`"))),
        }
    }
}

/// A node position, 1-based. `y` is always 1 on the ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub x: u32,
    pub y: u32,
}

impl Coord {
    pub const fn new(x: u32, y: u32) -> Self {
        Coord { x, y }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

impl FromStr for Coord {
    type Err = Error;

    /// Parses `x,y` (or a bare `x` for ring positions).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("malformed coordinate `{s}`"));
        let mut parts = s.split(',').map(str::trim);
        let x = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let y = match parts.next() {
            Some(p) => p.parse().map_err(|_| bad())?,
            None => 1,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(Coord { x, y })
    }
}

/// Immutable description of the walk domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Topology {
    kind: TopologyKind,
    side: u32,
    lazy_prob: f64,
    // A move stays put iff the first draw is below this threshold.
    lazy_threshold: u64,
}

const MAX_SIDE: u32 = 1 << 15;

impl Topology {
    pub fn new(kind: TopologyKind, side: u32) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("side must be positive"));
        }
        let limit = if kind.is_planar() { MAX_SIDE } else { u32::MAX / 2 };
        if side > limit {
            return Err(Error::Capacity {
                what: "side",
                requested: side as usize,
                limit: limit as usize,
            });
        }
        Ok(Topology {
            kind,
            side,
            lazy_prob: 0.0,
            lazy_threshold: 0,
        })
    }

    pub fn grid(side: u32) -> Result<Self> {
        Self::new(TopologyKind::GridSelfloop, side)
    }

    pub fn torus(side: u32) -> Result<Self> {
        Self::new(TopologyKind::Torus, side)
    }

    pub fn ring(n: u32) -> Result<Self> {
        Self::new(TopologyKind::Ring, n)
    }

    /// Builds a topology from its node count; 2-D kinds need a perfect square.
    pub fn from_node_count(kind: TopologyKind, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        if kind.is_planar() {
            let side = (n as f64).sqrt().round() as u64;
            if side * side != n {
                return Err(Error::invalid(format!(
                    "n = {n} is not a perfect square, required for {kind}"
                )));
            }
            Self::new(kind, u32::try_from(side).map_err(|_| Error::invalid("n too large"))?)
        } else {
            Self::new(kind, u32::try_from(n).map_err(|_| Error::invalid("n too large"))?)
        }
    }

    /// Sets the probability that a move keeps the agent in place.
    pub fn with_lazy(mut self, p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid(format!("lazy probability {p} not in [0, 1)")));
        }
        self.lazy_prob = p;
        // 2^64 * p, saturating; p < 1 keeps this strictly below 2^64.
        self.lazy_threshold = (p * 18_446_744_073_709_551_616.0) as u64;
        Ok(self)
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn lazy_prob(&self) -> f64 {
        self.lazy_prob
    }

    pub fn node_count(&self) -> usize {
        if self.kind.is_planar() {
            self.side as usize * self.side as usize
        } else {
            self.side as usize
        }
    }

    pub fn slot_count(&self) -> usize {
        if self.kind.is_planar() {
            4
        } else {
            2
        }
    }

    /// Largest L1 distance between two nodes.
    pub fn diameter(&self) -> u32 {
        let s = self.side;
        match self.kind {
            TopologyKind::GridSelfloop => 2 * (s - 1),
            TopologyKind::Torus => 2 * (s / 2),
            TopologyKind::Ring => s / 2,
        }
    }

    pub fn contains(&self, c: Coord) -> bool {
        let y_max = if self.kind.is_planar() { self.side } else { 1 };
        (1..=self.side).contains(&c.x) && (1..=y_max).contains(&c.y)
    }

    fn check(&self, c: Coord) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "coordinate {c} out of range for {} with side {}",
                self.kind, self.side
            )))
        }
    }

    pub fn node(&self, c: Coord) -> Result<NodeId> {
        self.check(c)?;
        Ok(self.node_unchecked(c))
    }

    #[inline]
    pub fn node_unchecked(&self, c: Coord) -> NodeId {
        (c.y - 1) * self.side + (c.x - 1)
    }

    #[inline]
    pub fn coord(&self, v: NodeId) -> Coord {
        Coord {
            x: v % self.side + 1,
            y: v / self.side + 1,
        }
    }

    /// Target of move slot `slot` (see the module docs for the slot order).
    #[inline]
    pub fn slot_target(&self, v: NodeId, slot: usize) -> NodeId {
        let s = self.side;
        let (x, y) = (v % s, v / s);
        match self.kind {
            TopologyKind::GridSelfloop => match slot {
                0 if x + 1 < s => v + 1,
                1 if x > 0 => v - 1,
                2 if y + 1 < s => v + s,
                3 if y > 0 => v - s,
                _ => v,
            },
            TopologyKind::Torus => {
                let (nx, ny) = match slot {
                    0 => ((x + 1) % s, y),
                    1 => ((x + s - 1) % s, y),
                    2 => (x, (y + 1) % s),
                    _ => (x, (y + s - 1) % s),
                };
                ny * s + nx
            }
            TopologyKind::Ring => {
                if slot == 0 {
                    (x + 1) % s
                } else {
                    (x + s - 1) % s
                }
            }
        }
    }

    /// The multiset of move targets of `v`, in slot order.
    pub fn move_slots(&self, v: Coord) -> Result<Vec<Coord>> {
        let id = self.node(v)?;
        Ok((0..self.slot_count())
            .map(|k| self.coord(self.slot_target(id, k)))
            .collect())
    }

    pub fn l1_distance(&self, u: Coord, v: Coord) -> Result<u32> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.coord_distance(u, v))
    }

    #[inline]
    pub(crate) fn coord_distance(&self, u: Coord, v: Coord) -> u32 {
        let dx = u.x.abs_diff(v.x);
        let dy = u.y.abs_diff(v.y);
        match self.kind {
            TopologyKind::GridSelfloop => dx + dy,
            TopologyKind::Torus => dx.min(self.side - dx) + dy.min(self.side - dy),
            TopologyKind::Ring => dx.min(self.side - dx),
        }
    }

    #[inline]
    pub fn node_distance(&self, a: NodeId, b: NodeId) -> u32 {
        self.coord_distance(self.coord(a), self.coord(b))
    }

    /// One step of the walk from `v`.
    ///
    /// Draw pattern: when `lazy_prob > 0`, one `next_u64` decides laziness
    /// (stay iff the value is below `lazy_prob * 2^64`). Otherwise, or if the
    /// agent does not stay, one more `next_u64` picks the slot from its top
    /// bits (`>> 62` for four slots, `>> 63` for two).
    #[inline]
    pub fn sample_move<R: RngCore + ?Sized>(&self, v: NodeId, rng: &mut R) -> NodeId {
        if self.lazy_threshold > 0 && rng.next_u64() < self.lazy_threshold {
            return v;
        }
        let shift = if self.kind.is_planar() { 62 } else { 63 };
        let slot = (rng.next_u64() >> shift) as usize;
        self.slot_target(v, slot)
    }

    pub fn sample_move_coord<R: RngCore + ?Sized>(&self, v: Coord, rng: &mut R) -> Result<Coord> {
        let id = self.node(v)?;
        Ok(self.coord(self.sample_move(id, rng)))
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.node_count() as NodeId
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use std::collections::VecDeque;

    fn sorted(mut v: Vec<Coord>) -> Vec<Coord> {
        v.sort();
        v
    }

    fn c(x: u32, y: u32) -> Coord {
        Coord::new(x, y)
    }

    #[test]
    fn interior_grid_node_has_four_neighbors() {
        let g = Topology::grid(3).unwrap();
        assert_eq!(
            sorted(g.move_slots(c(2, 2)).unwrap()),
            sorted(vec![c(1, 2), c(3, 2), c(2, 1), c(2, 3)])
        );
    }

    #[test]
    fn corner_is_padded_with_two_self_loops() {
        let g = Topology::grid(2).unwrap();
        assert_eq!(
            sorted(g.move_slots(c(1, 1)).unwrap()),
            sorted(vec![c(2, 1), c(1, 2), c(1, 1), c(1, 1)])
        );
    }

    #[test]
    fn torus_wraps() {
        let t = Topology::torus(4).unwrap();
        assert_eq!(
            sorted(t.move_slots(c(1, 1)).unwrap()),
            sorted(vec![c(2, 1), c(4, 1), c(1, 2), c(1, 4)])
        );
    }

    #[test]
    fn ring_has_two_slots() {
        let r = Topology::ring(5).unwrap();
        assert_eq!(sorted(r.move_slots(c(1, 1)).unwrap()), vec![c(2, 1), c(5, 1)]);
    }

    #[test]
    fn out_of_range_is_rejected() {
        let g = Topology::grid(3).unwrap();
        assert!(matches!(g.move_slots(c(4, 1)), Err(Error::InvalidArgument(_))));
        assert!(matches!(g.move_slots(c(0, 1)), Err(Error::InvalidArgument(_))));
        let r = Topology::ring(3).unwrap();
        assert!(r.move_slots(c(1, 2)).is_err());
        assert!(g.l1_distance(c(1, 1), c(1, 9)).is_err());
    }

    #[test]
    fn perfect_square_required_for_planar_kinds() {
        assert!(Topology::from_node_count(TopologyKind::GridSelfloop, 10).is_err());
        assert_eq!(Topology::from_node_count(TopologyKind::Torus, 64).unwrap().side(), 8);
        assert_eq!(Topology::from_node_count(TopologyKind::Ring, 10).unwrap().side(), 10);
    }

    #[test]
    fn grid_distances() {
        let g = Topology::grid(8).unwrap();
        assert_eq!(g.l1_distance(c(1, 1), c(1, 1)).unwrap(), 0);
        assert_eq!(g.l1_distance(c(1, 1), c(3, 4)).unwrap(), 5);
    }

    fn bfs(t: &Topology, from: NodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; t.node_count()];
        dist[from as usize] = 0;
        let mut q = VecDeque::from([from]);
        while let Some(v) = q.pop_front() {
            for k in 0..t.slot_count() {
                let w = t.slot_target(v, k);
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dist[v as usize] + 1;
                    q.push_back(w);
                }
            }
        }
        dist
    }

    #[test]
    fn torus_corner_to_corner_is_two() {
        let t = Topology::torus(8).unwrap();
        let a = t.node(c(1, 1)).unwrap();
        let b = t.node(c(8, 8)).unwrap();
        assert_eq!(bfs(&t, a)[b as usize], 2);
        assert_eq!(t.l1_distance(c(1, 1), c(8, 8)).unwrap(), 2);
    }

    #[test]
    fn l1_matches_bfs_everywhere() {
        for kind in [TopologyKind::GridSelfloop, TopologyKind::Torus, TopologyKind::Ring] {
            for side in [1u32, 2, 3, 5, 8] {
                let t = Topology::new(kind, side).unwrap();
                for a in t.nodes() {
                    let d = bfs(&t, a);
                    for b in t.nodes() {
                        assert_eq!(t.node_distance(a, b), d[b as usize], "{kind} side {side}");
                    }
                }
            }
        }
    }

    #[test]
    fn l1_is_a_metric_on_small_sides() {
        for kind in [TopologyKind::GridSelfloop, TopologyKind::Torus, TopologyKind::Ring] {
            for side in 1..=8u32 {
                let t = Topology::new(kind, side).unwrap();
                let n = t.node_count() as NodeId;
                for a in 0..n {
                    assert_eq!(t.node_distance(a, a), 0);
                    for b in 0..n {
                        let ab = t.node_distance(a, b);
                        assert_eq!(ab, t.node_distance(b, a));
                        assert_eq!(ab == 0, a == b);
                        for m in 0..n {
                            assert!(ab <= t.node_distance(a, m) + t.node_distance(m, b));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn slot_targets_are_adjacent() {
        for kind in [TopologyKind::GridSelfloop, TopologyKind::Torus, TopologyKind::Ring] {
            for side in [1u32, 2, 3, 6] {
                let t = Topology::new(kind, side).unwrap();
                for v in t.nodes() {
                    for k in 0..t.slot_count() {
                        assert!(t.node_distance(v, t.slot_target(v, k)) <= 1);
                    }
                }
            }
        }
    }

    #[test]
    fn slot_multiplicity_is_symmetric() {
        // P(u -> v) == P(v -> u) is what makes the uniform law stationary.
        for kind in [TopologyKind::GridSelfloop, TopologyKind::Torus, TopologyKind::Ring] {
            for side in [1u32, 2, 3, 4, 7] {
                let t = Topology::new(kind, side).unwrap();
                let n = t.node_count();
                let mut count = vec![0u32; n * n];
                for v in t.nodes() {
                    for k in 0..t.slot_count() {
                        count[v as usize * n + t.slot_target(v, k) as usize] += 1;
                    }
                }
                for u in 0..n {
                    for v in 0..n {
                        assert_eq!(count[u * n + v], count[v * n + u]);
                    }
                }
            }
        }
    }

    #[test]
    fn sample_move_is_uniform_over_interior_slots() {
        let g = Topology::grid(5).unwrap();
        let v = g.node(c(3, 3)).unwrap();
        let mut rng = substream(11, 0);
        let draws = 1_000_000u32;
        let mut hist = std::collections::HashMap::new();
        for _ in 0..draws {
            *hist.entry(g.sample_move(v, &mut rng)).or_insert(0u32) += 1;
        }
        assert_eq!(hist.len(), 4);
        let p = 0.25;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for target in g.move_slots(c(3, 3)).unwrap() {
            let got = hist[&g.node(target).unwrap()] as f64;
            assert!((got - draws as f64 * p).abs() < 4.0 * sd, "{target}: {got}");
        }
    }

    fn stay_frequency(t: &Topology, v: Coord, draws: u32) -> f64 {
        let id = t.node(v).unwrap();
        let mut rng = substream(3, 9);
        let stays = (0..draws).filter(|_| t.sample_move(id, &mut rng) == id).count();
        stays as f64 / draws as f64
    }

    #[test]
    fn corner_stays_half_the_time() {
        let g = Topology::grid(2).unwrap();
        let f = stay_frequency(&g, c(1, 1), 200_000);
        assert!((f - 0.5).abs() < 4.0 * (0.25f64 / 200_000.0).sqrt(), "{f}");
    }

    #[test]
    fn lazy_interior_stays_one_fifth() {
        let g = Topology::grid(5).unwrap().with_lazy(0.2).unwrap();
        let f = stay_frequency(&g, c(3, 3), 200_000);
        assert!((f - 0.2).abs() < 4.0 * (0.16f64 / 200_000.0).sqrt(), "{f}");
    }

    #[test]
    fn lazy_must_be_below_one() {
        let g = Topology::grid(5).unwrap();
        assert!(g.with_lazy(1.0).is_err());
        assert!(g.with_lazy(-0.1).is_err());
    }

    #[test]
    fn coord_parsing() {
        assert_eq!("3,4".parse::<Coord>().unwrap(), c(3, 4));
        assert_eq!("7".parse::<Coord>().unwrap(), c(7, 1));
        assert!("1,2,3".parse::<Coord>().is_err());
        assert!("a,b".parse::<Coord>().is_err());
    }
}
