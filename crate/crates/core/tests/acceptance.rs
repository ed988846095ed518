//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! The binary exits 0 after printing the report so that the rest of the
//! workspace tests gate the build. Set `FROGWALK_ACCEPTANCE_STRICT=1` to turn
//! any FAIL into a non-zero exit. `FROGWALK_ACCEPTANCE_ONLY=1,4` runs a subset.

use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

use frogwalk::analysis::{islands, static_island_gamma};
use frogwalk::engine::{RecordSet, Scenario, ScenarioConfig, Simulation};
use frogwalk::experiments::{
    compare_models, fit_power_law, run_sweep, summarize, GroupKey, MaxSteps, Response, ScalingModel, SweepPlan,
    SweepRow,
};
use frogwalk::oracles::{
    collision_count_exact, fitted_meeting_constant, fitted_visit_constant, meeting_probability_exact,
    meeting_probability_mc, pairs_at_distance, walk_statistics_mc,
};
use frogwalk::placement::{place_seeded, PlacementModel};
use frogwalk::rng::substream;
use frogwalk::{Coord, NodeId, Topology, TopologyKind};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn sweep(kind: TopologyKind, scenario: Scenario, n: &[u64], m: &[u64], max_steps: MaxSteps) -> Vec<SweepRow> {
    let mut plan = SweepPlan::new(kind, scenario, n.to_vec(), m.to_vec(), 20).with_seed(1);
    plan.max_steps = max_steps;
    run_sweep(&plan).expect("sweep")
}

fn pow2(exps: impl IntoIterator<Item = u32>) -> Vec<u64> {
    exps.into_iter().map(|e| 1u64 << e).collect()
}

fn in_band(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn timeouts(rows: &[SweepRow]) -> usize {
    summarize(rows, &[GroupKey::N, GroupKey::M])
        .map(|s| s.iter().map(|r| r.timeout_count).sum())
        .unwrap_or(0)
}

fn beta_check(rows: &[SweepRow], lo: f64, hi: f64) -> Outcome {
    match fit_power_law(rows, Response::Median) {
        Ok(fit) => {
            let b = fit.beta.unwrap_or(f64::NAN);
            outcome(
                in_band(b, lo, hi),
                format!(
                    "beta = {b:.3} (95% ci ±{:.3}), want [{lo}, {hi}]",
                    fit.ci_beta.unwrap_or(f64::NAN)
                ),
            )
        }
        Err(e) => outcome(false, format!("fit failed: {e} ({} timeouts)", timeouts(rows))),
    }
}

fn m_exponent(rows: &[SweepRow]) -> Outcome {
    beta_check(rows, -0.6, -0.4)
}

fn n_exponent() -> Outcome {
    let rows = sweep(
        TopologyKind::GridSelfloop,
        Scenario::Broadcast,
        &pow2([12, 14, 16]),
        &[256],
        MaxSteps::Horizon,
    );
    match fit_power_law(&rows, Response::Median) {
        Ok(fit) => {
            let a = fit.alpha.unwrap_or(f64::NAN);
            outcome(
                in_band(a, 0.85, 1.15),
                format!(
                    "alpha = {a:.3} (95% ci ±{:.3}), want [0.85, 1.15]",
                    fit.ci_alpha.unwrap_or(f64::NAN)
                ),
            )
        }
        Err(e) => outcome(false, format!("fit failed: {e}")),
    }
}

fn gossip_exponent() -> Outcome {
    let rows = sweep(
        TopologyKind::GridSelfloop,
        Scenario::Gossip,
        &[1 << 16],
        &pow2([4, 6, 8, 10]),
        MaxSteps::Horizon,
    );
    beta_check(&rows, -0.6, -0.4)
}

fn refutation(rows: &[SweepRow]) -> Outcome {
    match compare_models(rows) {
        Ok(c) => {
            let ratio = c.residual_ratio();
            outcome(
                c.preferred == ScalingModel::Sqrt && ratio >= 5.0,
                format!(
                    "preferred = {:?}, residuals sqrt {:.4} / wang {:.4}, ratio {ratio:.2}, want sqrt with ratio >= 5",
                    c.preferred, c.residual_sqrt_model, c.residual_wang_model
                ),
            )
        }
        Err(e) => outcome(false, format!("comparison failed: {e}")),
    }
}

fn ring_law() -> Outcome {
    // The default horizon 8 n ln^2 n is below n^2/m for small m on the ring.
    let n = 1u64 << 12;
    let rows = sweep(
        TopologyKind::Ring,
        Scenario::Broadcast,
        &[n],
        &pow2(3..=9),
        MaxSteps::Fixed(8 * n * n),
    );
    beta_check(&rows, -1.1, -0.9)
}

fn meeting_oracle() -> Outcome {
    let topo = Topology::grid(16).unwrap();
    let mut rng = substream(2024, 0);
    let trials = 100_000;
    let mut worst = 0.0f64;
    let mut failures = 0;
    for k in 0..20u64 {
        let mut c = || Coord::new(rng.random_range(1..=16), rng.random_range(1..=16));
        let (a, b) = (c(), c());
        let t = rng.random_range(1..=64usize);
        let exact = meeting_probability_exact(&topo, a, b, t).unwrap().at_horizon();
        let est = meeting_probability_mc(&topo, a, b, t, trials, 100 + k).unwrap();
        let se = (exact * (1.0 - exact) / trials as f64).sqrt();
        let dev = (est.mean - exact).abs();
        let ok = if se > 0.0 { dev <= 3.0 * se } else { dev == 0.0 };
        if se > 0.0 {
            worst = worst.max(dev / se);
        }
        failures += usize::from(!ok);
    }
    outcome(
        failures == 0,
        format!("{failures}/20 triples outside 3 SE; worst |z| = {worst:.2}"),
    )
}

fn r_growth() -> Outcome {
    let topo = Topology::torus(64).unwrap();
    let x = Coord::new(32, 32);
    let ratios: Vec<f64> = (6..=12)
        .map(|e| {
            let t = 1usize << e;
            collision_count_exact(&topo, x, x, t).unwrap() / (t as f64).ln()
        })
        .collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    let band = hi / lo;
    outcome(
        band <= 2.0,
        format!("R/ln T in [{lo:.3}, {hi:.3}], band ratio {band:.3}, want <= 2"),
    )
}

fn visit_meeting_constants() -> Outcome {
    let topo = Topology::grid(32).unwrap();
    let ds = [2u32, 4, 8, 16];
    let mut c1 = Vec::new();
    let mut c3 = Vec::new();
    for &d in &ds {
        let pairs = pairs_at_distance(&topo, d);
        c1.push(fitted_visit_constant(&topo, &pairs).unwrap());
        c3.push(fitted_meeting_constant(&topo, &pairs).unwrap());
    }
    let stable = |c: &[f64]| {
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        c.iter().all(|&x| x > 0.0 && (x - mean).abs() <= 0.5 * mean)
    };
    let fmt = |c: &[f64]| c.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
    outcome(
        stable(&c1) && stable(&c3),
        format!(
            "c1 = [{}], c3 = [{}] for d = 2, 4, 8, 16; want > 0 and within ±50% of the mean",
            fmt(&c1),
            fmt(&c3)
        ),
    )
}

fn brute_islands(topo: &Topology, positions: &[NodeId], gamma: f64) -> Vec<Vec<usize>> {
    let m = positions.len();
    let mut seen = vec![false; m];
    let mut out = Vec::new();
    for s in 0..m {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut k = 0;
        while k < comp.len() {
            let i = comp[k];
            k += 1;
            for j in 0..m {
                if !seen[j] && topo.node_distance(positions[i], positions[j]) as f64 <= gamma {
                    seen[j] = true;
                    comp.push(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out.sort();
    out
}

fn island_sizes() -> Outcome {
    let n = 1usize << 16;
    let m = 1u64 << 10;
    let topo = Topology::grid(256).unwrap();
    let gamma = static_island_gamma(n, m as usize);
    let limit = 2.0 * (n as f64).ln();
    let good = (0..100u64)
        .filter(|&seed| {
            let p = place_seeded(&topo, PlacementModel::exact(m).unwrap(), seed).unwrap();
            islands(&topo, &p.positions, gamma).unwrap().max_size as f64 <= limit
        })
        .count();

    let mut rng = substream(99, 0);
    let mut mismatches = 0;
    for _ in 0..200 {
        let kind = [TopologyKind::GridSelfloop, TopologyKind::Torus, TopologyKind::Ring][rng.random_range(0..3)];
        let side = match kind {
            TopologyKind::Ring => rng.random_range(1..=4096),
            _ => rng.random_range(1..=64),
        };
        let topo = Topology::new(kind, side).unwrap();
        let m = rng.random_range(1..=256usize);
        let positions: Vec<NodeId> = (0..m)
            .map(|_| rng.random_range(0..topo.node_count() as NodeId))
            .collect();
        let gamma = rng.random_range(0.1..24.0f64);
        let mut fast = islands(&topo, &positions, gamma).unwrap().components;
        fast.sort();
        mismatches += usize::from(fast != brute_islands(&topo, &positions, gamma));
    }
    outcome(
        good >= 99 && mismatches == 0,
        format!(
            "gamma = {gamma:.3}: max island <= 2 ln n in {good}/100 trials (want >= 99); bucketed vs brute force: {mismatches}/200 mismatches"
        ),
    )
}

fn deviation_bound() -> Outcome {
    let topo = Topology::grid(256).unwrap();
    let steps = 1024;
    let trials = 10_000;
    let lambdas = [2.0, 3.0, 4.0];
    let stats = walk_statistics_mc(&topo, Coord::new(128, 128), steps, &lambdas, trials, 5).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for ex in &stats.exceed {
        let bound = 2.0 * (-ex.lambda * ex.lambda / 2.0).exp();
        let b = bound.min(1.0);
        let sigma = (b * (1.0 - b) / trials as f64).sqrt();
        let ok = ex.estimate.mean <= bound + 3.0 * sigma;
        pass &= ok;
        parts.push(format!(
            "λ={}: {:.4} vs {:.4}",
            ex.lambda,
            ex.estimate.mean,
            bound + 3.0 * sigma
        ));
    }
    outcome(pass, format!("ℓ = {steps}, {trials} walks; {}", parts.join("; ")))
}

#[derive(Debug, Clone)]
struct Case {
    kind: TopologyKind,
    side: u32,
    lazy: bool,
    m: u64,
    scenario: Scenario,
    seed: u64,
}

fn case() -> impl Strategy<Value = Case> {
    (
        prop_oneof![
            Just(TopologyKind::GridSelfloop),
            Just(TopologyKind::Torus),
            Just(TopologyKind::Ring)
        ],
        2u32..12,
        any::<bool>(),
        1u64..24,
        prop_oneof![Just(Scenario::Broadcast), Just(Scenario::Gossip)],
        any::<u64>(),
    )
        .prop_map(|(kind, side, lazy, m, scenario, seed)| Case {
            kind,
            side,
            lazy,
            m,
            scenario,
            seed,
        })
}

fn check_invariants(c: Case) -> Result<(), TestCaseError> {
    let side = if c.kind == TopologyKind::Ring {
        c.side * c.side
    } else {
        c.side
    };
    let topo = Topology::new(c.kind, side)
        .unwrap()
        .with_lazy(if c.lazy { 0.2 } else { 0.0 })
        .unwrap();
    let all = RecordSet {
        positions: true,
        islands: true,
        frontier: true,
        cells: true,
    };
    let cfg = ScenarioConfig::new(topo, PlacementModel::exact(c.m).unwrap(), c.scenario)
        .with_max_steps(2_000)
        .with_record(all, 1);
    let first = frogwalk::engine::run_trial(&cfg, c.seed).unwrap();
    let second = frogwalk::engine::run_trial(&cfg, c.seed).unwrap();
    prop_assert_eq!(&first, &second, "same seed, different result");

    let mut sim = Simulation::new(&cfg, c.seed).unwrap();
    let knowledge = |s: &Simulation| (0..s.agent_count()).map(|i| s.rumors_of(i)).collect::<Vec<_>>();
    for _ in 0..cfg.max_steps {
        if sim.is_complete() {
            break;
        }
        let before_pairs = sim.informed_pairs();
        let before_pos = sim.positions().to_vec();
        let before_informed: Vec<bool> = (0..sim.agent_count()).map(|i| sim.knows(i, 0)).collect();
        sim.step();
        prop_assert!(sim.informed_pairs() >= before_pairs, "informed pairs decreased");
        if c.scenario == Scenario::Broadcast {
            for i in 0..sim.agent_count() {
                if !before_informed[i] {
                    prop_assert_eq!(sim.positions()[i], before_pos[i], "uninformed frog {} moved", i);
                }
            }
        }
        let mut again = sim.clone();
        prop_assert_eq!(again.closure(), 0, "second closure added pairs");
        prop_assert_eq!(knowledge(&again), knowledge(&sim));
        prop_assert_eq!(again.positions(), sim.positions());
    }
    Ok(())
}

fn property_suite() -> Outcome {
    let cases = 256;
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    match runner.run(&case(), check_invariants) {
        Ok(()) => outcome(
            true,
            format!("{cases} random configurations: determinism, monotonicity, frog freeze, closure idempotence"),
        ),
        Err(e) => outcome(false, format!("{e}")),
    }
}

fn main() {
    let only: Option<HashSet<u32>> = std::env::var("FROGWALK_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |k: u32| only.as_ref().is_none_or(|o| o.contains(&k));
    let strict = std::env::var("FROGWALK_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut timed = |k: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        if wanted(k) {
            let t0 = Instant::now();
            let o = f();
            let secs = t0.elapsed().as_secs_f64();
            println!(
                "{} [{k}] {name}: {} ({secs:.1}s)",
                if o.pass { "PASS" } else { "FAIL" },
                o.detail
            );
            results.push((k, name, o, secs));
        }
    };

    let mut first: Option<Vec<SweepRow>> = None;
    let rows_for_m = |cache: &mut Option<Vec<SweepRow>>| {
        cache
            .get_or_insert_with(|| {
                sweep(
                    TopologyKind::GridSelfloop,
                    Scenario::Broadcast,
                    &[1 << 16],
                    &pow2([4, 6, 8, 10, 12]),
                    MaxSteps::Horizon,
                )
            })
            .clone()
    };
    timed(1, "m-exponent (broadcast)", &mut || m_exponent(&rows_for_m(&mut first)));
    timed(2, "n-exponent (broadcast)", &mut n_exponent);
    timed(3, "gossip m-exponent", &mut gossip_exponent);
    timed(4, "sqrt law preferred over m^-1 law", &mut || {
        refutation(&rows_for_m(&mut first))
    });
    timed(5, "ring law", &mut ring_law);
    timed(6, "meeting-probability oracle", &mut meeting_oracle);
    timed(7, "R growth", &mut r_growth);
    timed(8, "visit/meeting constants", &mut visit_meeting_constants);
    timed(9, "islands", &mut island_sizes);
    timed(10, "deviation bound", &mut deviation_bound);
    timed(11, "determinism and monotonicity", &mut property_suite);

    let failed: BTreeSet<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed: {failed:?}")
        }
    );
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
