//! Monte Carlo estimators for single and paired walks.
//!
//! Trial `i` of an estimator draws from `substream(seed, i)`, so results are
//! independent of the execution strategy.

use rand::Rng;
use serde::Serialize;

use crate::par::{map_indexed, Execution};
use crate::rng::substream;
use crate::stats::{Estimate, Quantiles};
use crate::topology::{Coord, Topology};
use crate::{Error, Result};

/// Frequency of a first meeting by `horizon`. Each step draws the move of
/// the walk from `a0` before the move of the walk from `b0`.
pub fn meeting_probability_mc(
    topo: &Topology,
    a0: Coord,
    b0: Coord,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::EmptySample("meeting estimate needs at least one trial"));
    }
    let (a0, b0) = (topo.node(a0)?, topo.node(b0)?);
    let met = map_indexed(Execution::default(), trials, |i| {
        let mut rng = substream(seed, i as u64);
        let (mut a, mut b) = (a0, b0);
        if a == b {
            return true;
        }
        for _ in 0..horizon {
            a = topo.sample_move(a, &mut rng);
            b = topo.sample_move(b, &mut rng);
            if a == b {
                return true;
            }
        }
        false
    });
    Ok(Estimate::from_successes(met.iter().filter(|&&m| m).count(), trials))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExceedFrequency {
    pub lambda: f64,
    /// Threshold `λ √ℓ` on the L1 distance.
    pub threshold: f64,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct WalkStatistics {
    pub steps: usize,
    /// Per λ: fraction of walks that were at distance `>= λ √ℓ` from the
    /// start at some step `1..=ℓ`.
    pub exceed: Vec<ExceedFrequency>,
    /// Distinct nodes visited in steps `0..=ℓ`.
    pub distinct_nodes: Quantiles,
}

pub fn walk_statistics_mc(
    topo: &Topology,
    v0: Coord,
    steps: usize,
    lambdas: &[f64],
    trials: usize,
    seed: u64,
) -> Result<WalkStatistics> {
    if steps < 2 {
        return Err(Error::invalid("walk statistics need at least 2 steps"));
    }
    if trials == 0 {
        return Err(Error::EmptySample("walk statistics need at least one trial"));
    }
    let start = topo.node(v0)?;
    let n = topo.node_count();
    let per_trial = map_indexed(Execution::default(), trials, |i| {
        let mut rng = substream(seed, i as u64);
        let mut seen = vec![0u64; n.div_ceil(64)];
        seen[start as usize / 64] |= 1 << (start % 64);
        let mut distinct = 1u32;
        let mut max_dist = 0u32;
        let mut v = start;
        for _ in 0..steps {
            v = topo.sample_move(v, &mut rng);
            max_dist = max_dist.max(topo.node_distance(start, v));
            let (w, bit) = (v as usize / 64, 1u64 << (v % 64));
            if seen[w] & bit == 0 {
                seen[w] |= bit;
                distinct += 1;
            }
        }
        (max_dist, distinct)
    });
    let root = (steps as f64).sqrt();
    let exceed = lambdas
        .iter()
        .map(|&lambda| {
            let threshold = lambda * root;
            let hits = per_trial.iter().filter(|(d, _)| *d as f64 >= threshold).count();
            ExceedFrequency {
                lambda,
                threshold,
                estimate: Estimate::from_successes(hits, trials),
            }
        })
        .collect();
    let distinct: Vec<f64> = per_trial.iter().map(|&(_, k)| k as f64).collect();
    Ok(WalkStatistics {
        steps,
        exceed,
        distinct_nodes: Quantiles::from_values(&distinct),
    })
}

/// Cover times of single walks started at a uniform node (first draw of
/// the trial stream is `random_range(0..n)`).
pub fn cover_time_mc(topo: &Topology, trials: usize, seed: u64) -> Result<(Quantiles, Vec<u64>)> {
    if trials == 0 {
        return Err(Error::EmptySample("cover time needs at least one trial"));
    }
    let n = topo.node_count();
    let times = map_indexed(Execution::default(), trials, |i| {
        let mut rng = substream(seed, i as u64);
        let mut v = rng.random_range(0..n as u32);
        let mut seen = vec![false; n];
        seen[v as usize] = true;
        let mut left = n - 1;
        let mut t = 0u64;
        while left > 0 {
            v = topo.sample_move(v, &mut rng);
            t += 1;
            if !seen[v as usize] {
                seen[v as usize] = true;
                left -= 1;
            }
        }
        t
    });
    let as_f64: Vec<f64> = times.iter().map(|&t| t as f64).collect();
    Ok((Quantiles::from_values(&as_f64), times))
}
