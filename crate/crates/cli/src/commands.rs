use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;

use frogwalk::analysis::{cell_diagnostics, frontier_series, max_island_over_time, static_island_gamma, CellRecord};
use frogwalk::engine::{default_lazy_prob, run_trial, Completion, RecordSet, Scenario, ScenarioConfig, Trace};
use frogwalk::experiments::{
    compare_models, fit_power_law, read_sweep_csv, run_sweep, summarize, write_sweep_csv, GroupKey, MaxSteps, Response,
    SweepPlan, SweepRow,
};
use frogwalk::oracles::{
    collision_count_exact, cover_time_mc, meeting_probability_exact, meeting_probability_mc, visit_probability_exact,
    walk_statistics_mc,
};
use frogwalk::placement::{PlacementKind, PlacementModel};
use frogwalk::{Coord, Topology, TopologyKind};

use crate::args::{
    AnalyzeArgs, Command, CommonArgs, FitArgs, OracleArgs, OracleKind, PlacementArg, ScenarioArg, SimulateArgs,
    SweepArgs, TopologyArg,
};
use crate::CliError;

type CmdResult = Result<(), CliError>;

pub fn dispatch(cmd: Command) -> CmdResult {
    match cmd {
        Command::Simulate(a) => simulate(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Oracle(a) => oracle(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Fit(a) => fit(&a),
    }
}

/// The one place output leaves the process: a summary line on stdout and
/// whole files written in one go.
struct Output {
    stdout: std::io::Stdout,
}

impl Output {
    fn new() -> Self {
        Output {
            stdout: std::io::stdout(),
        }
    }

    fn summary(&mut self, fields: &[(&str, String)]) -> CmdResult {
        let line = fields
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(self.stdout.lock(), "{line}")?;
        Ok(())
    }

    fn file(&mut self, path: &Path, contents: &[u8]) -> CmdResult {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

fn kind(t: TopologyArg) -> TopologyKind {
    match t {
        TopologyArg::Grid => TopologyKind::GridSelfloop,
        TopologyArg::Torus => TopologyKind::Torus,
        TopologyArg::Ring => TopologyKind::Ring,
    }
}

fn scenario(s: ScenarioArg) -> Scenario {
    match s {
        ScenarioArg::Broadcast => Scenario::Broadcast,
        ScenarioArg::Gossip => Scenario::Gossip,
    }
}

fn placement(p: PlacementArg) -> PlacementKind {
    match p {
        PlacementArg::Exact => PlacementKind::Exact,
        PlacementArg::Binomial => PlacementKind::Binomial,
    }
}

fn single(values: &[u64], flag: &str) -> Result<u64, CliError> {
    match values {
        [v] => Ok(*v),
        [] => Err(CliError::usage(flag, "required")),
        _ => Err(CliError::usage(flag, "expects a single value for this command")),
    }
}

fn topology(c: &CommonArgs, n: u64) -> Result<Topology, CliError> {
    let k = kind(c.topology);
    let topo = Topology::from_node_count(k, n).map_err(|e| CliError::usage("--n", e))?;
    let lazy = c.lazy.unwrap_or_else(|| default_lazy_prob(k, scenario(c.scenario)));
    topo.with_lazy(lazy).map_err(|e| CliError::usage("--lazy", e))
}

fn max_steps(c: &CommonArgs) -> Result<Option<u64>, CliError> {
    match c.max_steps {
        Some(0) => Err(CliError::usage("--max-steps", "must be at least 1")),
        other => Ok(other),
    }
}

fn record_set(c: &CommonArgs, default: &str) -> Result<RecordSet, CliError> {
    c.record
        .as_deref()
        .unwrap_or(default)
        .parse()
        .map_err(|e| CliError::usage("--record", e))
}

fn stride(c: &CommonArgs) -> Result<u64, CliError> {
    if c.stride == 0 {
        return Err(CliError::usage("--stride", "must be at least 1"));
    }
    Ok(c.stride)
}

fn scenario_config(c: &CommonArgs, record: RecordSet) -> Result<(ScenarioConfig, u64, u64), CliError> {
    let n = single(&c.n, "--n")?;
    let m = single(&c.m, "--m")?;
    let topo = topology(c, n)?;
    let model = PlacementModel::new(placement(c.placement), m).map_err(|e| CliError::usage("--m", e))?;
    let mut cfg = ScenarioConfig::new(topo, model, scenario(c.scenario)).with_record(record, stride(c)?);
    if let Some(s) = max_steps(c)? {
        cfg = cfg.with_max_steps(s);
    }
    Ok((cfg, n, m))
}

fn completion_field(c: Completion) -> String {
    c.time().map(|t| t.to_string()).unwrap_or_else(|| "TIMEOUT".into())
}

fn simulate(a: &SimulateArgs) -> CmdResult {
    let c = &a.common;
    let (cfg, n, m) = scenario_config(c, RecordSet::default())?;
    let res = run_trial(&cfg, c.seed).map_err(|e| CliError::usage("--m", e))?;
    let mut out = Output::new();
    if let Some(path) = &c.out {
        let row = SweepRow {
            topology: cfg.topology.kind(),
            scenario: cfg.scenario,
            n,
            m,
            trial: 0,
            seed: c.seed,
            completion_time: res.completion.time(),
            timeout: res.completion.is_timeout(),
            realized_m: res.realized_m,
            wall_ms: None,
        };
        let mut buf = Vec::new();
        write_sweep_csv(&[row], &mut buf)?;
        out.file(path, &buf)?;
    }
    out.summary(&[
        ("topology", cfg.topology.kind().to_string()),
        ("scenario", cfg.scenario.to_string()),
        ("n", n.to_string()),
        ("m", m.to_string()),
        ("realized_m", res.realized_m.to_string()),
        ("seed", c.seed.to_string()),
        ("completion_time", completion_field(res.completion)),
    ])?;
    if c.strict && res.completion.is_timeout() {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "trial timed out after {} steps",
            cfg.max_steps
        )));
    }
    Ok(())
}

fn sweep(a: &SweepArgs) -> CmdResult {
    let c = &a.common;
    if c.n.is_empty() {
        return Err(CliError::usage("--n", "required"));
    }
    if c.m.is_empty() {
        return Err(CliError::usage("--m", "required"));
    }
    let mut plan = SweepPlan::new(
        kind(c.topology),
        scenario(c.scenario),
        c.n.clone(),
        c.m.clone(),
        c.trials,
    )
    .with_seed(c.seed);
    plan.placement = placement(c.placement);
    plan.lazy_prob = c.lazy;
    plan.measure_wall_time = a.timing;
    if let Some(s) = max_steps(c)? {
        plan.max_steps = MaxSteps::Fixed(s);
    }
    if c.trials == 0 {
        return Err(CliError::usage("--trials", "must be at least 1"));
    }
    for &n in &plan.n_values {
        topology(c, n)?;
    }
    plan.validate().map_err(|e| CliError::usage("--m", e))?;

    let start = Instant::now();
    let rows = run_sweep(&plan)?;
    let elapsed = start.elapsed();
    let path = c.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf)?;
    let mut out = Output::new();
    out.file(&path, &buf)?;

    let cells = summarize(&rows, &[GroupKey::N, GroupKey::M])?;
    let timeouts: usize = cells.iter().map(|s| s.timeout_count).sum();
    let dead: Vec<String> = cells
        .iter()
        .filter(|s| s.timeout_count == s.trials)
        .map(|s| format!("n={},m={}", s.group.n.unwrap_or(0), s.group.m.unwrap_or(0)))
        .collect();
    out.summary(&[
        ("rows", rows.len().to_string()),
        ("cells", cells.len().to_string()),
        ("timeouts", timeouts.to_string()),
        ("seconds", format!("{:.3}", elapsed.as_secs_f64())),
        ("out", path.display().to_string()),
    ])?;
    if c.strict && !dead.is_empty() {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "cells with only timeouts: {}",
            dead.join(" ")
        )));
    }
    Ok(())
}

fn coord(value: Option<&str>, flag: &str, topo: &Topology) -> Result<Coord, CliError> {
    let s = value.ok_or_else(|| CliError::usage(flag, "required"))?;
    let c: Coord = s.parse().map_err(|e| CliError::usage(flag, e))?;
    topo.node(c).map_err(|e| CliError::usage(flag, e))?;
    Ok(c)
}

fn horizon(a: &OracleArgs) -> Result<usize, CliError> {
    a.horizon.ok_or_else(|| CliError::usage("--T", "required"))
}

fn oracle(a: &OracleArgs) -> CmdResult {
    let c = &a.common;
    let n = single(&c.n, "--n")?;
    let topo = topology(c, n)?;
    let center = Coord::new(
        topo.side().div_ceil(2),
        if topo.kind() == TopologyKind::Ring {
            1
        } else {
            topo.side().div_ceil(2)
        },
    );
    let mut fields: Vec<(&str, String)> =
        vec![("oracle", format!("{:?}", a.kind).to_lowercase()), ("n", n.to_string())];
    let trials = || {
        if c.trials == 0 {
            Err(CliError::usage("--trials", "must be at least 1"))
        } else {
            Ok(c.trials)
        }
    };
    let limit = |e: frogwalk::Error| CliError::usage("--n", e);
    match a.kind {
        OracleKind::Meet | OracleKind::MeetMc | OracleKind::Visit | OracleKind::Collisions => {
            let p = coord(a.a.as_deref(), "--a", &topo)?;
            let q = coord(a.b.as_deref(), "--b", &topo)?;
            let t = horizon(a)?;
            fields.push(("a", a.a.clone().unwrap_or_default()));
            fields.push(("b", a.b.clone().unwrap_or_default()));
            fields.push(("T", t.to_string()));
            match a.kind {
                OracleKind::Meet => {
                    let r = meeting_probability_exact(&topo, p, q, t).map_err(limit)?;
                    fields.push(("p", r.at_horizon().to_string()));
                }
                OracleKind::MeetMc => {
                    let e = meeting_probability_mc(&topo, p, q, t, trials()?, c.seed)?;
                    fields.push(("p", e.mean.to_string()));
                    fields.push(("se", e.std_error.to_string()));
                    fields.push(("trials", e.trials.to_string()));
                }
                OracleKind::Visit => {
                    let v = visit_probability_exact(&topo, p, q, t).map_err(limit)?;
                    fields.push(("p", v.to_string()));
                }
                _ => {
                    let r = collision_count_exact(&topo, p, q, t).map_err(limit)?;
                    fields.push(("R", r.to_string()));
                }
            }
        }
        OracleKind::Walk => {
            let v0 = match a.a.as_deref() {
                Some(s) => coord(Some(s), "--a", &topo)?,
                None => center,
            };
            let t = horizon(a)?;
            let s = walk_statistics_mc(&topo, v0, t, &a.lambda, trials()?, c.seed)
                .map_err(|e| CliError::usage("--T", e))?;
            fields.push(("a", format!("{},{}", v0.x, v0.y)));
            fields.push(("T", t.to_string()));
            for ex in &s.exceed {
                let bound = 2.0 * (-ex.lambda * ex.lambda / 2.0).exp();
                fields.push(("lambda", ex.lambda.to_string()));
                fields.push(("exceed", ex.estimate.mean.to_string()));
                fields.push(("bound", bound.to_string()));
            }
            fields.push(("distinct_median", opt(s.distinct_nodes.median)));
        }
        OracleKind::Cover => {
            let (q, _) = cover_time_mc(&topo, trials()?, c.seed)?;
            fields.push(("trials", c.trials.to_string()));
            fields.push(("q25", opt(q.q25)));
            fields.push(("median", opt(q.median)));
            fields.push(("q75", opt(q.q75)));
            fields.push(("max", opt(q.max)));
        }
    }
    let mut out = Output::new();
    if let Some(path) = &c.out {
        let header: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
        let values: Vec<&str> = fields.iter().map(|(_, v)| v.as_str()).collect();
        out.file(path, format!("{}\n{}\n", header.join(","), values.join(",")).as_bytes())?;
    }
    out.summary(&fields)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn analyze(a: &AnalyzeArgs) -> CmdResult {
    let c = &a.common;
    let record = record_set(c, "islands,frontier,cells")?;
    if !record.any() {
        return Err(CliError::usage("--record", "nothing to record"));
    }
    let (cfg, n, m) = scenario_config(c, record)?;
    if record.frontier && cfg.topology.kind() != TopologyKind::GridSelfloop {
        return Err(CliError::usage("--record", "frontier tracking needs --topology grid"));
    }
    if record.cells && cfg.topology.kind() == TopologyKind::Ring {
        return Err(CliError::usage("--record", "cells need a 2-D topology"));
    }
    let gamma = c.gamma.unwrap_or_else(|| static_island_gamma(n as usize, m as usize));
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(CliError::usage("--gamma", "must be a positive number"));
    }
    let side = cfg.topology.side();
    let cell_side = c.cell_side.unwrap_or_else(|| default_cell_side(n, m, side));
    if cell_side == 0 || cell_side > side {
        return Err(CliError::usage("--cell-side", format!("must be in 1..={side}")));
    }

    let res = run_trial(&cfg, c.seed).map_err(|e| CliError::usage("--m", e))?;
    let trace = res.trace.as_ref().context("trial produced no trace")?;
    let topo = &cfg.topology;
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut out = Output::new();
    let mut written = Vec::new();
    let mut fields = vec![
        ("n", n.to_string()),
        ("m", m.to_string()),
        ("seed", c.seed.to_string()),
        ("completion_time", completion_field(res.completion)),
        ("snapshots", trace.snapshots.len().to_string()),
    ];

    if record.islands {
        let stats = max_island_over_time(topo, trace, gamma)?;
        let mut s = String::from("n,m,gamma,t,max_island,num_islands\n");
        for st in &stats {
            writeln!(s, "{n},{m},{gamma},{},{},{}", st.t, st.max_island, st.num_islands).unwrap();
        }
        let largest = stats.iter().map(|s| s.max_island).max().unwrap_or(0);
        fields.push(("gamma", gamma.to_string()));
        fields.push(("max_island", largest.to_string()));
        written.push(write_table(&mut out, &dir, "islands.csv", s)?);
    }
    if record.frontier {
        let rec = frontier_series(topo, trace)?;
        let mut s = String::from("n,m,t,xbar_x,xbar_y\n");
        for (t, x) in rec.times.iter().zip(&rec.xbar) {
            writeln!(s, "{n},{m},{t},{},{}", x.x, x.y).unwrap();
        }
        written.push(write_table(&mut out, &dir, "frontier.csv", s)?);
    }
    if record.cells {
        let rec = cell_diagnostics(topo, trace, cell_side)?;
        fields.push(("cell_side", cell_side.to_string()));
        written.push(write_table(&mut out, &dir, "cells.csv", cells_table(n, m, &rec))?);
    }
    if record.positions {
        written.push(write_table(
            &mut out,
            &dir,
            "positions.csv",
            positions_table(topo, trace),
        )?);
    }
    fields.push(("out", written.join(",")));
    out.summary(&fields)?;
    if c.strict && res.completion.is_timeout() {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "trial timed out after {} steps",
            cfg.max_steps
        )));
    }
    Ok(())
}

/// Typical spacing between agents, `⌈√(n/m)⌉`, clamped to the side.
fn default_cell_side(n: u64, m: u64, side: u32) -> u32 {
    (((n as f64 / m as f64).sqrt().ceil()) as u32).clamp(1, side)
}

fn write_table(out: &mut Output, dir: &Path, name: &str, contents: String) -> Result<String, CliError> {
    let path = dir.join(name);
    out.file(&path, contents.as_bytes())?;
    Ok(path.display().to_string())
}

fn cells_table(n: u64, m: u64, rec: &CellRecord) -> String {
    let cell = |v: Option<u64>| v.map(|t| t.to_string()).unwrap_or_default();
    let mut s = String::from("n,m,cell_side,cell_x,cell_y,first_reached,first_conquered\n");
    for cy in 0..rec.cells_y {
        for cx in 0..rec.cells_x {
            let i = rec.index(cx, cy);
            writeln!(
                s,
                "{n},{m},{},{cx},{cy},{},{}",
                rec.cell_side,
                cell(rec.first_reached[i]),
                cell(rec.first_conquered[i])
            )
            .unwrap();
        }
    }
    s
}

fn positions_table(topo: &Topology, trace: &Trace) -> String {
    let mut s = String::from("t,agent,x,y,informed\n");
    for snap in &trace.snapshots {
        for (i, (&v, &inf)) in snap.positions.iter().zip(&snap.informed).enumerate() {
            let c = topo.coord(v);
            writeln!(s, "{},{i},{},{},{}", snap.t, c.x, c.y, inf).unwrap();
        }
    }
    s
}

fn fit(a: &FitArgs) -> CmdResult {
    let file = fs::File::open(&a.input).map_err(|e| CliError::usage("--in", format!("{}: {e}", a.input.display())))?;
    let rows = read_sweep_csv(file).map_err(|e| CliError::usage("--in", e))?;
    let fit = fit_power_law(&rows, Response::Median)?;
    let mut out = Output::new();
    if let Some(path) = &a.common.out {
        out.file(path, fit.to_flat_text().as_bytes())?;
    }
    let mut fields = vec![
        ("alpha", opt(fit.alpha)),
        ("beta", opt(fit.beta)),
        ("intercept", fit.intercept.to_string()),
        ("residual", fit.residual_sum.to_string()),
        ("ci_alpha", opt(fit.ci_alpha)),
        ("ci_beta", opt(fit.ci_beta)),
        ("points", fit.points.to_string()),
    ];
    if let Ok(cmp) = compare_models(&rows) {
        fields.push(("preferred", format!("{:?}", cmp.preferred).to_lowercase()));
        fields.push(("residual_ratio", cmp.residual_ratio().to_string()));
    }
    out.summary(&fields)
}
