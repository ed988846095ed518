//! Dense finite-chain computations.
//!
//! The move rule has symmetric slot multiplicities, so the transition
//! matrix is symmetric and one step can be written in pull form:
//!
//! ```text
//! p'(v) = lazy * p(v) + (1 - lazy) / S * sum_k p(slot_k(v))
//! ```
//!
//! Pair chains store the joint law of two independent walks as an `n × n`
//! matrix and apply the single-walk step to rows and then to columns, which
//! equals one synchronous move of both walks. The diagonal is absorbing.

use crate::par::{for_each_row, Execution};
use crate::topology::{Coord, NodeId, Topology, TopologyKind};
use crate::{Error, Result};

/// Largest node count for single-walk vectors.
pub const MAX_SINGLE_NODES: usize = 1 << 16;
/// Largest node count for the pair chain (`n²` states).
pub const MAX_PAIR_NODES: usize = 1 << 12;

fn check_capacity(topo: &Topology, limit: usize, what: &'static str) -> Result<()> {
    let n = topo.node_count();
    if n > limit {
        return Err(Error::Capacity {
            what,
            requested: n,
            limit,
        });
    }
    Ok(())
}

/// A probability distribution over the nodes of a topology.
#[derive(Debug, Clone, PartialEq)]
pub struct DistVector {
    topo: Topology,
    probs: Vec<f64>,
}

impl DistVector {
    pub fn uniform(topo: &Topology) -> Result<Self> {
        check_capacity(topo, MAX_SINGLE_NODES, "node count")?;
        let n = topo.node_count();
        Ok(DistVector {
            topo: *topo,
            probs: vec![1.0 / n as f64; n],
        })
    }

    pub fn point(topo: &Topology, at: Coord) -> Result<Self> {
        check_capacity(topo, MAX_SINGLE_NODES, "node count")?;
        let v = topo.node(at)?;
        let mut probs = vec![0.0; topo.node_count()];
        probs[v as usize] = 1.0;
        Ok(DistVector { topo: *topo, probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, at: Coord) -> Result<f64> {
        Ok(self.probs[self.topo.node(at)? as usize])
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// The law after `steps` moves.
    pub fn evolve(&self, steps: usize) -> DistVector {
        let mut cur = self.probs.clone();
        let mut next = vec![0.0; cur.len()];
        for _ in 0..steps {
            step_into(&self.topo, &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        DistVector {
            topo: self.topo,
            probs: cur,
        }
    }

    pub fn evolve_in_place(&mut self, scratch: &mut Vec<f64>) {
        scratch.resize(self.probs.len(), 0.0);
        step_into(&self.topo, &self.probs, scratch);
        std::mem::swap(&mut self.probs, scratch);
    }
}

#[inline]
fn pull(topo: &Topology, v: NodeId, src: &[f64]) -> f64 {
    let slots = topo.slot_count();
    let mut s = 0.0;
    for k in 0..slots {
        s += src[topo.slot_target(v, k) as usize];
    }
    let lazy = topo.lazy_prob();
    lazy * src[v as usize] + (1.0 - lazy) / slots as f64 * s
}

fn step_into(topo: &Topology, src: &[f64], dst: &mut [f64]) {
    for (v, out) in dst.iter_mut().enumerate() {
        *out = pull(topo, v as NodeId, src);
    }
}

/// Cumulative probability that a walk from `v0` has visited `v` by each time
/// `0..=horizon`.
pub fn visit_probability_series(topo: &Topology, v0: Coord, v: Coord, horizon: usize) -> Result<Vec<f64>> {
    let mut dist = DistVector::point(topo, v0)?;
    let target = topo.node(v)? as usize;
    let mut series = Vec::with_capacity(horizon + 1);
    let mut absorbed = dist.probs[target];
    dist.probs[target] = 0.0;
    series.push(absorbed);
    let mut scratch = Vec::new();
    for _ in 0..horizon {
        dist.evolve_in_place(&mut scratch);
        absorbed += dist.probs[target];
        dist.probs[target] = 0.0;
        series.push(absorbed.min(1.0));
    }
    Ok(series)
}

/// Probability that a walk from `v0` visits `v` within `horizon` steps.
pub fn visit_probability_exact(topo: &Topology, v0: Coord, v: Coord, horizon: usize) -> Result<f64> {
    Ok(*visit_probability_series(topo, v0, v, horizon)?.last().unwrap())
}

/// First-meeting CDF of two independent walks.
#[derive(Debug, Clone, PartialEq)]
pub struct PairChainResult {
    /// `meet_prob_by_t[t]` = P(the walks shared a node at some time <= t).
    pub meet_prob_by_t: Vec<f64>,
    pub horizon: usize,
}

impl PairChainResult {
    pub fn at_horizon(&self) -> f64 {
        *self.meet_prob_by_t.last().unwrap()
    }
}

pub fn meeting_probability_exact(topo: &Topology, a0: Coord, b0: Coord, horizon: usize) -> Result<PairChainResult> {
    meeting_probability_exact_with(topo, a0, b0, horizon, Execution::default())
}

pub fn meeting_probability_exact_with(
    topo: &Topology,
    a0: Coord,
    b0: Coord,
    horizon: usize,
    exec: Execution,
) -> Result<PairChainResult> {
    check_capacity(topo, MAX_PAIR_NODES, "pair-chain node count")?;
    let (a, b) = (topo.node(a0)? as usize, topo.node(b0)? as usize);
    let n = topo.node_count();
    let mut joint = vec![0.0f64; n * n];
    let mut tmp = vec![0.0f64; n * n];
    let mut met = 0.0;
    if a == b {
        met = 1.0;
    } else {
        joint[a * n + b] = 1.0;
    }
    let mut cdf = Vec::with_capacity(horizon + 1);
    cdf.push(met);
    let slots = topo.slot_count();
    let lazy = topo.lazy_prob();
    let w = (1.0 - lazy) / slots as f64;
    for _ in 0..horizon {
        if met >= 1.0 {
            cdf.push(1.0);
            continue;
        }
        // First walk: row a' pulls from the rows of its slot targets.
        {
            let src = &joint;
            for_each_row(exec, &mut tmp, n, |row_a, out| {
                let v = row_a as NodeId;
                let own = &src[row_a * n..(row_a + 1) * n];
                for (o, &p) in out.iter_mut().zip(own) {
                    *o = lazy * p;
                }
                for k in 0..slots {
                    let t = topo.slot_target(v, k) as usize;
                    for (o, &p) in out.iter_mut().zip(&src[t * n..(t + 1) * n]) {
                        *o += w * p;
                    }
                }
            });
        }
        // Second walk, within each row; then absorb the diagonal.
        {
            let src = &tmp;
            for_each_row(exec, &mut joint, n, |row_a, out| {
                let row = &src[row_a * n..(row_a + 1) * n];
                for (b, o) in out.iter_mut().enumerate() {
                    *o = pull(topo, b as NodeId, row);
                }
            });
        }
        let mut hit = 0.0;
        for d in 0..n {
            hit += joint[d * n + d];
            joint[d * n + d] = 0.0;
        }
        met = (met + hit).min(1.0);
        cdf.push(met);
    }
    Ok(PairChainResult {
        meet_prob_by_t: cdf,
        horizon,
    })
}

/// `R(w, u, s) = Σ_{t=0}^{s} Σ_x P_t(w, x) P_t(u, x)`, the expected number of
/// co-locations of two independent walks started at `w` and `u`.
pub fn collision_count_exact(topo: &Topology, w: Coord, u: Coord, s: usize) -> Result<f64> {
    let mut pw = DistVector::point(topo, w)?;
    let mut pu = DistVector::point(topo, u)?;
    let mut scratch = Vec::new();
    let dot = |a: &DistVector, b: &DistVector| a.probs.iter().zip(&b.probs).map(|(x, y)| x * y).sum::<f64>();
    let mut total = dot(&pw, &pu);
    for _ in 0..s {
        pw.evolve_in_place(&mut scratch);
        pu.evolve_in_place(&mut scratch);
        total += dot(&pw, &pu);
    }
    Ok(total)
}

/// Test pairs at L1 distance `d`: horizontal, vertical and split-diagonal
/// offsets from the center, from a corner and from an edge midpoint, kept
/// when both endpoints are in range.
pub fn pairs_at_distance(topo: &Topology, d: u32) -> Vec<(Coord, Coord)> {
    let s = topo.side();
    let mid = s.div_ceil(2);
    let ring = topo.kind() == TopologyKind::Ring;
    let starts: Vec<Coord> = if ring {
        vec![Coord::new(1, 1), Coord::new(mid, 1)]
    } else {
        vec![Coord::new(mid, mid), Coord::new(1, 1), Coord::new(1, mid)]
    };
    let offsets: Vec<(i64, i64)> = if ring {
        vec![(d as i64, 0)]
    } else {
        let h = (d / 2) as i64;
        vec![(d as i64, 0), (0, d as i64), (h, d as i64 - h), (-(d as i64), 0)]
    };
    let mut out = Vec::new();
    for a in &starts {
        for &(dx, dy) in &offsets {
            let (x, y) = (a.x as i64 + dx, a.y as i64 + dy);
            if x < 1 || y < 1 || x > s as i64 || y > if ring { 1 } else { s as i64 } {
                continue;
            }
            let b = Coord::new(x as u32, y as u32);
            if topo.coord_distance(*a, b) == d && !out.contains(&(*a, b)) {
                out.push((*a, b));
            }
        }
    }
    out
}

fn fitted_constant<F>(topo: &Topology, pairs: &[(Coord, Coord)], prob: F) -> Result<f64>
where
    F: Fn(Coord, Coord, usize) -> Result<f64>,
{
    if pairs.is_empty() {
        return Err(Error::EmptySample("no pairs to fit a constant over"));
    }
    let mut best = f64::INFINITY;
    for &(a, b) in pairs {
        let d = topo.l1_distance(a, b)?;
        let p = prob(a, b, (d as usize).pow(2))?;
        best = best.min(super::log_scaled_constant(p, d));
    }
    Ok(best)
}

/// `min over pairs of P(visit within d²) · max(1, ln d)`.
pub fn fitted_visit_constant(topo: &Topology, pairs: &[(Coord, Coord)]) -> Result<f64> {
    fitted_constant(topo, pairs, |a, b, t| visit_probability_exact(topo, a, b, t))
}

/// `min over pairs of P(meet within d²) · max(1, ln d)`.
pub fn fitted_meeting_constant(topo: &Topology, pairs: &[(Coord, Coord)]) -> Result<f64> {
    fitted_constant(topo, pairs, |a, b, t| {
        meeting_probability_exact(topo, a, b, t).map(|r| r.at_horizon())
    })
}
