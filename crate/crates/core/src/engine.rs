//! Synchronous-time broadcasting and gossiping simulations.
//!
//! A trial is a [`Simulation`]: agent positions, a rumor bit-matrix, a
//! mobility mask and one RNG [`Stream`] per agent. Each step moves every
//! mobile agent once and then runs the *closure*: every agent at a node
//! receives the union of the rumor sets present at that node. Meetings are
//! node co-locations only; agents swapping across an edge exchange nothing.
//!
//! Broadcasting carries a single rumor and implements the frog model: an
//! agent is mobile iff it is informed, and a freshly informed agent starts
//! walking at the next step. Gossiping gives agent `i` rumor `i` and keeps
//! everybody mobile from `t = 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::placement::{place_seeded, Placement, PlacementModel};
use crate::rng::{substream, Stream};
use crate::topology::{NodeId, Topology, TopologyKind};
use crate::{Error, Result};

/// Largest rumor count a gossip trial will allocate a bit-matrix for.
pub const MAX_GOSSIP_AGENTS: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Broadcast,
    Gossip,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Broadcast => "broadcast",
            Scenario::Gossip => "gossip",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "broadcast" => Ok(Scenario::Broadcast),
            "gossip" => Ok(Scenario::Gossip),
            other => Err(Error::invalid(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Laziness used when none is given explicitly.
///
/// Gossip on a torus or ring is lazy with probability 1/5: without it two
/// walks whose coordinate-sum parities differ on an even side can never
/// share a node. Everything else moves every step.
pub fn default_lazy_prob(kind: TopologyKind, scenario: Scenario) -> f64 {
    match (kind, scenario) {
        (TopologyKind::Torus | TopologyKind::Ring, Scenario::Gossip) => 0.2,
        _ => 0.0,
    }
}

/// `⌈8 n ln² n⌉`, at least 1.
pub fn default_max_steps(n: usize) -> u64 {
    let n = n as f64;
    ((8.0 * n * n.ln().powi(2)).ceil() as u64).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RecordSet {
    pub positions: bool,
    pub islands: bool,
    pub frontier: bool,
    pub cells: bool,
}

impl RecordSet {
    pub fn any(&self) -> bool {
        self.positions || self.islands || self.frontier || self.cells
    }
}

impl FromStr for RecordSet {
    type Err = Error;

    /// Comma-separated subset of `positions,islands,frontier,cells`.
    fn from_str(s: &str) -> Result<Self> {
        let mut set = RecordSet::default();
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            match item {
                "positions" => set.positions = true,
                "islands" => set.islands = true,
                "frontier" => set.frontier = true,
                "cells" => set.cells = true,
                other => return Err(Error::invalid(format!("unknown record option `{other}`"))),
            }
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub topology: Topology,
    pub placement: PlacementModel,
    pub scenario: Scenario,
    pub max_steps: u64,
    pub record: RecordSet,
    pub record_stride: u64,
}

impl ScenarioConfig {
    /// Config with the default horizon and no recording.
    pub fn new(topology: Topology, placement: PlacementModel, scenario: Scenario) -> Self {
        ScenarioConfig {
            max_steps: default_max_steps(topology.node_count()),
            topology,
            placement,
            scenario,
            record: RecordSet::default(),
            record_stride: 1,
        }
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_record(mut self, record: RecordSet, stride: u64) -> Self {
        self.record = record;
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps must be at least 1"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record stride must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Completion {
    Finished(u64),
    Timeout,
}

impl Completion {
    pub fn time(self) -> Option<u64> {
        match self {
            Completion::Finished(t) => Some(t),
            Completion::Timeout => None,
        }
    }

    pub fn is_timeout(self) -> bool {
        self == Completion::Timeout
    }
}

/// Agent positions and knowledge of rumor 0 at one instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub t: u64,
    pub positions: Vec<NodeId>,
    pub informed: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub stride: u64,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialResult {
    pub completion: Completion,
    /// Gossip only: first time rumor `i` has reached every agent.
    pub per_rumor_times: Vec<Option<u64>>,
    pub realized_m: usize,
    pub trace: Option<Trace>,
}

/// Rumor sets, one fixed-width row of 64-bit words per agent.
#[derive(Debug, Clone, PartialEq, Eq)]
struct RumorMatrix {
    words: usize,
    bits: Vec<u64>,
}

impl RumorMatrix {
    fn new(agents: usize, rumors: usize) -> Self {
        let words = rumors.div_ceil(64).max(1);
        RumorMatrix {
            words,
            bits: vec![0; agents * words],
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    #[inline]
    fn row_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.bits[i * self.words..(i + 1) * self.words]
    }

    #[inline]
    fn get(&self, i: usize, r: usize) -> bool {
        self.row(i)[r / 64] >> (r % 64) & 1 == 1
    }
}

const NIL: u32 = u32::MAX;

/// Per-node agent lists as intrusive linked lists over an O(n) head table.
/// Only the heads touched in the last rebuild are reset.
#[derive(Debug, Clone)]
struct Occupancy {
    head: Vec<u32>,
    next: Vec<u32>,
    touched: Vec<NodeId>,
}

impl Occupancy {
    fn new(nodes: usize, agents: usize) -> Self {
        Occupancy {
            head: vec![NIL; nodes],
            next: vec![NIL; agents],
            touched: Vec::with_capacity(agents),
        }
    }

    fn rebuild(&mut self, positions: &[NodeId]) {
        for &v in &self.touched {
            self.head[v as usize] = NIL;
        }
        self.touched.clear();
        for (i, &v) in positions.iter().enumerate() {
            let h = &mut self.head[v as usize];
            if *h == NIL {
                self.touched.push(v);
            }
            self.next[i] = *h;
            *h = i as u32;
        }
    }

    fn agents_at(&self, v: NodeId, out: &mut Vec<usize>) {
        out.clear();
        let mut i = self.head[v as usize];
        while i != NIL {
            out.push(i as usize);
            i = self.next[i as usize];
        }
    }
}

/// Mutable state of one trial.
#[derive(Debug, Clone)]
pub struct Simulation {
    topo: Topology,
    scenario: Scenario,
    t: u64,
    positions: Vec<NodeId>,
    mobile: Vec<bool>,
    streams: Vec<Stream>,
    rumors: RumorMatrix,
    rumor_count: usize,
    holders: Vec<usize>,
    per_rumor_times: Vec<Option<u64>>,
    informed_pairs: u64,
    occupancy: Occupancy,
    scratch_agents: Vec<usize>,
    scratch_union: Vec<u64>,
}

impl Simulation {
    /// Samples the placement of trial `seed` and applies the `t = 0` closure.
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let placement = place_seeded(&cfg.topology, cfg.placement, seed)?;
        Self::from_placement(cfg.topology, cfg.scenario, &placement, seed)
    }

    /// Starts from an explicit placement; agent `i` draws from stream key `i`.
    pub fn from_placement(topo: Topology, scenario: Scenario, placement: &Placement, seed: u64) -> Result<Self> {
        let keys: Vec<u64> = (0..placement.len() as u64).collect();
        Self::from_placement_with_keys(topo, scenario, placement, seed, &keys)
    }

    /// Like [`Simulation::from_placement`] with agent `i` drawing from
    /// stream key `keys[i]`. Permuting placement and keys together relabels
    /// agents without changing any trajectory.
    pub fn from_placement_with_keys(
        topo: Topology,
        scenario: Scenario,
        placement: &Placement,
        seed: u64,
        keys: &[u64],
    ) -> Result<Self> {
        let m = placement.len();
        if m == 0 {
            return Err(Error::EmptyPlacement);
        }
        let rumor_sets: Vec<Vec<usize>> = match scenario {
            Scenario::Broadcast => (0..m).map(|i| if i == 0 { vec![0] } else { vec![] }).collect(),
            Scenario::Gossip => (0..m).map(|i| vec![i]).collect(),
        };
        let mobile = match scenario {
            Scenario::Broadcast => (0..m).map(|i| i == 0).collect(),
            Scenario::Gossip => vec![true; m],
        };
        let mut sim = Self::build(
            topo,
            scenario,
            placement.positions.clone(),
            &rumor_sets,
            mobile,
            seed,
            keys,
        )?;
        sim.closure();
        Ok(sim)
    }

    /// Builds an arbitrary state without running the initial closure.
    ///
    /// `rumor_sets[i]` lists the rumors agent `i` knows. Broadcast states
    /// carry rumor 0 only; gossip states have one rumor per agent.
    pub fn from_parts(
        topo: Topology,
        scenario: Scenario,
        positions: Vec<NodeId>,
        rumor_sets: &[Vec<usize>],
        mobile: Vec<bool>,
        seed: u64,
    ) -> Result<Self> {
        let keys: Vec<u64> = (0..positions.len() as u64).collect();
        Self::build(topo, scenario, positions, rumor_sets, mobile, seed, &keys)
    }

    fn build(
        topo: Topology,
        scenario: Scenario,
        positions: Vec<NodeId>,
        rumor_sets: &[Vec<usize>],
        mobile: Vec<bool>,
        seed: u64,
        keys: &[u64],
    ) -> Result<Self> {
        let m = positions.len();
        if m == 0 {
            return Err(Error::EmptyPlacement);
        }
        if rumor_sets.len() != m || mobile.len() != m || keys.len() != m {
            return Err(Error::invalid("per-agent arrays must have equal length"));
        }
        if m >= NIL as usize {
            return Err(Error::Capacity {
                what: "agent count",
                requested: m,
                limit: NIL as usize - 1,
            });
        }
        if positions.iter().any(|&v| v as usize >= topo.node_count()) {
            return Err(Error::invalid("agent position out of range"));
        }
        let rumor_count = match scenario {
            Scenario::Broadcast => 1,
            Scenario::Gossip => {
                if m > MAX_GOSSIP_AGENTS {
                    return Err(Error::Capacity {
                        what: "gossip agent count",
                        requested: m,
                        limit: MAX_GOSSIP_AGENTS,
                    });
                }
                m
            }
        };
        let mut rumors = RumorMatrix::new(m, rumor_count);
        let mut holders = vec![0usize; rumor_count];
        let mut informed_pairs = 0u64;
        for (i, set) in rumor_sets.iter().enumerate() {
            for &r in set {
                if r >= rumor_count {
                    return Err(Error::invalid(format!("rumor {r} out of range")));
                }
                let word = &mut rumors.row_mut(i)[r / 64];
                let bit = 1u64 << (r % 64);
                if *word & bit == 0 {
                    *word |= bit;
                    holders[r] += 1;
                    informed_pairs += 1;
                }
            }
        }
        let per_rumor_times = holders.iter().map(|&h| (h == m).then_some(0)).collect();
        let words = rumors.words;
        Ok(Simulation {
            topo,
            scenario,
            t: 0,
            streams: keys.iter().map(|&k| substream(seed, k)).collect(),
            occupancy: Occupancy::new(topo.node_count(), m),
            positions,
            mobile,
            rumors,
            rumor_count,
            holders,
            per_rumor_times,
            informed_pairs,
            scratch_agents: Vec::new(),
            scratch_union: vec![0; words],
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn agent_count(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[NodeId] {
        &self.positions
    }

    pub fn mobile(&self) -> &[bool] {
        &self.mobile
    }

    pub fn knows(&self, agent: usize, rumor: usize) -> bool {
        self.rumors.get(agent, rumor)
    }

    pub fn rumors_of(&self, agent: usize) -> Vec<usize> {
        (0..self.rumor_count).filter(|&r| self.rumors.get(agent, r)).collect()
    }

    /// Number of (agent, rumor) pairs with the agent informed of the rumor.
    pub fn informed_pairs(&self) -> u64 {
        self.informed_pairs
    }

    /// Value of [`Simulation::informed_pairs`] at completion.
    pub fn target_pairs(&self) -> u64 {
        (self.agent_count() * self.rumor_count) as u64
    }

    pub fn is_complete(&self) -> bool {
        self.informed_pairs == self.target_pairs()
    }

    pub fn per_rumor_times(&self) -> &[Option<u64>] {
        &self.per_rumor_times
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            t: self.t,
            positions: self.positions.clone(),
            informed: (0..self.agent_count()).map(|i| self.rumors.get(i, 0)).collect(),
        }
    }

    /// Unions rumor sets per node; returns the number of new informed pairs.
    pub fn closure(&mut self) -> u64 {
        self.occupancy.rebuild(&self.positions);
        let mut agents = std::mem::take(&mut self.scratch_agents);
        let mut union = std::mem::take(&mut self.scratch_union);
        let m = self.agent_count();
        let mut gained = 0u64;
        for k in 0..self.occupancy.touched.len() {
            let v = self.occupancy.touched[k];
            self.occupancy.agents_at(v, &mut agents);
            if agents.len() < 2 {
                continue;
            }
            union.fill(0);
            for &i in &agents {
                for (u, w) in union.iter_mut().zip(self.rumors.row(i)) {
                    *u |= w;
                }
            }
            for &i in &agents {
                let row = self.rumors.row_mut(i);
                for (w, (word, &u)) in row.iter_mut().zip(&union).enumerate() {
                    let mut new = u & !*word;
                    if new == 0 {
                        continue;
                    }
                    *word |= new;
                    gained += new.count_ones() as u64;
                    while new != 0 {
                        let r = w * 64 + new.trailing_zeros() as usize;
                        new &= new - 1;
                        self.holders[r] += 1;
                        if self.holders[r] == m {
                            self.per_rumor_times[r] = Some(self.t);
                        }
                    }
                }
                if self.scenario == Scenario::Broadcast && !self.mobile[i] && self.rumors.get(i, 0) {
                    self.mobile[i] = true;
                }
            }
        }
        self.scratch_agents = agents;
        self.scratch_union = union;
        self.informed_pairs += gained;
        gained
    }

    /// Moves all mobile agents once, then runs the closure.
    pub fn step(&mut self) {
        self.t += 1;
        let topo = self.topo;
        for ((pos, &mobile), stream) in self.positions.iter_mut().zip(&self.mobile).zip(&mut self.streams) {
            if mobile {
                *pos = topo.sample_move(*pos, stream);
            }
        }
        self.closure();
    }

    /// Steps until completion or until `max_steps` is reached.
    pub fn run(mut self, max_steps: u64, record: RecordSet, stride: u64) -> TrialResult {
        let stride = stride.max(1);
        let mut snapshots = Vec::new();
        if record.any() {
            snapshots.push(self.snapshot());
        }
        while !self.is_complete() && self.t < max_steps {
            self.step();
            if record.any() && (self.t.is_multiple_of(stride) || self.is_complete()) {
                snapshots.push(self.snapshot());
            }
        }
        let completion = if self.is_complete() {
            Completion::Finished(self.t)
        } else {
            Completion::Timeout
        };
        TrialResult {
            completion,
            per_rumor_times: match self.scenario {
                Scenario::Broadcast => Vec::new(),
                Scenario::Gossip => self.per_rumor_times,
            },
            realized_m: self.positions.len(),
            trace: record.any().then_some(Trace { stride, snapshots }),
        }
    }
}

fn run_checked(cfg: &ScenarioConfig, seed: u64, expected: Scenario) -> Result<TrialResult> {
    if cfg.scenario != expected {
        return Err(Error::invalid(format!(
            "config scenario is {}, expected {expected}",
            cfg.scenario
        )));
    }
    run_trial(cfg, seed)
}

pub fn run_broadcast(cfg: &ScenarioConfig, seed: u64) -> Result<TrialResult> {
    run_checked(cfg, seed, Scenario::Broadcast)
}

pub fn run_gossip(cfg: &ScenarioConfig, seed: u64) -> Result<TrialResult> {
    run_checked(cfg, seed, Scenario::Gossip)
}

/// Runs one trial of whichever scenario `cfg` names.
pub fn run_trial(cfg: &ScenarioConfig, seed: u64) -> Result<TrialResult> {
    let sim = Simulation::new(cfg, seed)?;
    Ok(sim.run(cfg.max_steps, cfg.record, cfg.record_stride))
}
