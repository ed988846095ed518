//! Initial agent positions under the exact and binomial models.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::rng::{substream, PLACEMENT_KEY};
use crate::topology::{NodeId, Topology};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementKind {
    /// `m` independent uniform node draws.
    #[default]
    Exact,
    /// Every node independently holds `B(m, 1/n)` agents.
    Binomial,
}

impl fmt::Display for PlacementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlacementKind::Exact => "exact",
            PlacementKind::Binomial => "binomial",
        })
    }
}

impl FromStr for PlacementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(PlacementKind::Exact),
            "binomial" => Ok(PlacementKind::Binomial),
            other => Err(Error::invalid(format!("unknown placement model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlacementModel {
    kind: PlacementKind,
    m: u64,
}

impl PlacementModel {
    pub fn new(kind: PlacementKind, m: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("agent budget m must be at least 1"));
        }
        Ok(PlacementModel { kind, m })
    }

    pub fn exact(m: u64) -> Result<Self> {
        Self::new(PlacementKind::Exact, m)
    }

    pub fn binomial(m: u64) -> Result<Self> {
        Self::new(PlacementKind::Binomial, m)
    }

    pub fn kind(&self) -> PlacementKind {
        self.kind
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// Expected agents per node, `m / n`.
    pub fn density(&self, topo: &Topology) -> f64 {
        self.m as f64 / topo.node_count() as f64
    }
}

/// One position per agent. Agent 0 is the broadcast source.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Placement {
    pub positions: Vec<NodeId>,
}

impl Placement {
    pub const SOURCE: usize = 0;

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn source(&self) -> Option<NodeId> {
        self.positions.first().copied()
    }
}

/// Samples a placement.
///
/// Exact: `m` calls to `random_range(0..n)`. Binomial: one `B(m, 1/n)`
/// draw per node in row-major order, expanded into a position list in the
/// same order, so the source is the first agent of the lowest-indexed
/// occupied node.
pub fn place<R: Rng + ?Sized>(topo: &Topology, model: PlacementModel, rng: &mut R) -> Result<Placement> {
    let n = topo.node_count() as NodeId;
    let positions = match model.kind {
        PlacementKind::Exact => (0..model.m).map(|_| rng.random_range(0..n)).collect(),
        PlacementKind::Binomial => {
            let law = node_law(topo, model.m)?;
            let mut positions = Vec::with_capacity(model.m as usize);
            for v in 0..n {
                let k = law.sample(rng);
                positions.extend(std::iter::repeat_n(v, k as usize));
            }
            positions
        }
    };
    if positions.is_empty() {
        return Err(Error::EmptyPlacement);
    }
    Ok(Placement { positions })
}

/// Placement of trial `seed`, drawn from the placement substream.
pub fn place_seeded(topo: &Topology, model: PlacementModel, seed: u64) -> Result<Placement> {
    place(topo, model, &mut substream(seed, PLACEMENT_KEY))
}

fn node_law(topo: &Topology, m: u64) -> Result<Binomial> {
    Binomial::new(m, 1.0 / topo.node_count() as f64).map_err(|e| Error::invalid(e.to_string()))
}

/// Realized agent count of one binomial-model instance.
pub fn realized_count<R: Rng + ?Sized>(topo: &Topology, m: u64, rng: &mut R) -> Result<u64> {
    let law = node_law(topo, m)?;
    Ok((0..topo.node_count()).map(|_| law.sample(rng)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Concentration {
    /// Fraction of trials with `m/2 <= m̃ <= 3m/2`.
    pub frequency: f64,
    pub trials: usize,
    /// False when `m < 17 ln n`, outside the regime where concentration
    /// with probability `1 - 1/n^2` is expected.
    pub hypothesis_holds: bool,
}

pub fn realized_count_concentration(topo: &Topology, m: u64, trials: usize, seed: u64) -> Result<Concentration> {
    if trials == 0 {
        return Err(Error::EmptySample("concentration needs at least one trial"));
    }
    if m == 0 {
        return Err(Error::invalid("agent budget m must be at least 1"));
    }
    let n = topo.node_count() as f64;
    let mut rng = substream(seed, PLACEMENT_KEY);
    let (lo, hi) = (m as f64 / 2.0, 1.5 * m as f64);
    let mut inside = 0usize;
    for _ in 0..trials {
        let k = realized_count(topo, m, &mut rng)? as f64;
        if (lo..=hi).contains(&k) {
            inside += 1;
        }
    }
    Ok(Concentration {
        frequency: inside as f64 / trials as f64,
        trials,
        hypothesis_holds: m as f64 >= 17.0 * n.ln(),
    })
}
