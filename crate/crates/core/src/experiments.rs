//! Parameter sweeps, aggregation and scaling-law fits.

use std::collections::BTreeMap;
use std::io;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::engine::{default_lazy_prob, default_max_steps, run_trial, Scenario, ScenarioConfig};
use crate::par::{map_indexed, Execution};
use crate::placement::{PlacementKind, PlacementModel};
use crate::rng::trial_seed;
use crate::stats::Quantiles;
use crate::topology::{Topology, TopologyKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaxSteps {
    /// `⌈8 n ln² n⌉` per cell.
    #[default]
    Horizon,
    Fixed(u64),
}

impl MaxSteps {
    pub fn resolve(self, n: usize) -> u64 {
        match self {
            MaxSteps::Horizon => default_max_steps(n),
            MaxSteps::Fixed(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub topology: TopologyKind,
    /// `None` applies [`default_lazy_prob`].
    pub lazy_prob: Option<f64>,
    pub n_values: Vec<u64>,
    pub m_values: Vec<u64>,
    pub scenario: Scenario,
    pub placement: PlacementKind,
    pub trials: usize,
    pub base_seed: u64,
    pub max_steps: MaxSteps,
    /// Record per-trial wall time. Off by default so tables are reproducible
    /// byte for byte.
    pub measure_wall_time: bool,
}

impl SweepPlan {
    pub fn new(
        topology: TopologyKind,
        scenario: Scenario,
        n_values: Vec<u64>,
        m_values: Vec<u64>,
        trials: usize,
    ) -> Self {
        SweepPlan {
            topology,
            lazy_prob: None,
            n_values,
            m_values,
            scenario,
            placement: PlacementKind::Exact,
            trials,
            base_seed: 0,
            max_steps: MaxSteps::Horizon,
            measure_wall_time: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.n_values.is_empty() || self.m_values.is_empty() {
            return Err(Error::invalid("sweep needs at least one n and one m"));
        }
        for &n in &self.n_values {
            Topology::from_node_count(self.topology, n)?;
        }
        for &m in &self.m_values {
            PlacementModel::new(self.placement, m)?;
        }
        if let Some(p) = self.lazy_prob {
            Topology::new(self.topology, 1)?.with_lazy(p)?;
        }
        Ok(())
    }

    pub fn topology_for(&self, n: u64) -> Result<Topology> {
        let lazy = self
            .lazy_prob
            .unwrap_or_else(|| default_lazy_prob(self.topology, self.scenario));
        Topology::from_node_count(self.topology, n)?.with_lazy(lazy)
    }

    fn jobs(&self) -> Vec<(u64, u64, usize)> {
        let mut jobs = Vec::new();
        for &n in &self.n_values {
            for &m in &self.m_values {
                for trial in 0..self.trials {
                    jobs.push((n, m, trial));
                }
            }
        }
        jobs
    }
}

/// One trial of a sweep, in the `sweep.csv` schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub topology: TopologyKind,
    pub scenario: Scenario,
    pub n: u64,
    pub m: u64,
    pub trial: usize,
    pub seed: u64,
    pub completion_time: Option<u64>,
    pub timeout: bool,
    pub realized_m: usize,
    pub wall_ms: Option<f64>,
}

pub const SWEEP_HEADER: &str = "topology,scenario,n,m,trial,seed,completion_time,timeout,realized_m,wall_ms";

pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<SweepRow>> {
    run_sweep_with(plan, Execution::default())
}

/// Runs every (n, m, trial) job. Rows come back sorted by `(n, m, trial)`
/// in plan order regardless of the execution strategy.
pub fn run_sweep_with(plan: &SweepPlan, exec: Execution) -> Result<Vec<SweepRow>> {
    plan.validate()?;
    let jobs = plan.jobs();
    let rows = map_indexed(exec, jobs.len(), |k| {
        let (n, m, trial) = jobs[k];
        let topo = plan.topology_for(n)?;
        let cfg = ScenarioConfig::new(topo, PlacementModel::new(plan.placement, m)?, plan.scenario)
            .with_max_steps(plan.max_steps.resolve(topo.node_count()));
        let seed = trial_seed(plan.base_seed, n, m, trial as u64);
        let start = Instant::now();
        let result = run_trial(&cfg, seed)?;
        let wall_ms = plan.measure_wall_time.then(|| start.elapsed().as_secs_f64() * 1e3);
        Ok(SweepRow {
            topology: plan.topology,
            scenario: plan.scenario,
            n,
            m,
            trial,
            seed,
            completion_time: result.completion.time(),
            timeout: result.completion.is_timeout(),
            realized_m: result.realized_m,
            wall_ms,
        })
    });
    rows.into_iter().collect()
}

pub fn write_sweep_csv<W: io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(SWEEP_HEADER.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

pub fn read_sweep_csv<R: io::Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let expected: Vec<&str> = SWEEP_HEADER.split(',').collect();
    if header != expected {
        return Err(Error::Csv(format!(
            "unexpected header `{}`, expected `{SWEEP_HEADER}`",
            header.join(",")
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Median completion time per `(n, m)` cell. Cells with a censored median
/// map to `None`.
pub fn cell_medians(rows: &[SweepRow]) -> BTreeMap<(u64, u64), Option<f64>> {
    let mut cells: BTreeMap<(u64, u64), Vec<Option<f64>>> = BTreeMap::new();
    for r in rows {
        cells
            .entry((r.n, r.m))
            .or_default()
            .push(r.completion_time.map(|t| t as f64));
    }
    cells
        .into_iter()
        .map(|(k, v)| (k, Quantiles::from_censored(&v).median))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Response {
    #[default]
    Median,
}

/// OLS fit of `ln T = intercept + α ln n + β ln m`. An exponent is `None`
/// when its axis was not varied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub intercept: f64,
    pub residual_sum: f64,
    /// 95% confidence half-widths; NaN without residual degrees of freedom.
    pub ci_alpha: Option<f64>,
    pub ci_beta: Option<f64>,
    pub points: usize,
}

impl PowerLawFit {
    pub const HEADER: &'static str = "alpha,beta,intercept,residual,ci_alpha,ci_beta";

    /// Two-line `key,...` / `value,...` text.
    pub fn to_flat_text(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
        format!(
            "{}\n{},{},{},{},{},{}\n",
            Self::HEADER,
            opt(self.alpha),
            opt(self.beta),
            self.intercept,
            self.residual_sum,
            opt(self.ci_alpha),
            opt(self.ci_beta)
        )
    }
}

/// Fits the power law to `(n, m, T)` points.
pub fn fit_points(points: &[(f64, f64, f64)]) -> Result<PowerLawFit> {
    let distinct = |f: fn(&(f64, f64, f64)) -> f64| {
        let mut v: Vec<f64> = points.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    };
    let (dn, dm) = (distinct(|p| p.0), distinct(|p| p.1));
    if dn.max(dm) < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 distinct values on a swept axis, got {dn} n and {dm} m values"
        )));
    }
    if points.iter().any(|p| p.0 <= 0.0 || p.1 <= 0.0 || p.2 <= 0.0) {
        return Err(Error::Fit("n, m and the response must be positive".into()));
    }
    let use_n = dn > 1;
    let use_m = dm > 1;
    let cols = 1 + use_n as usize + use_m as usize;
    let rows = points.len();
    if rows < cols {
        return Err(Error::Fit("fewer points than parameters".into()));
    }
    let mut x = DMatrix::<f64>::zeros(rows, cols);
    let mut y = DVector::<f64>::zeros(rows);
    for (i, &(n, m, t)) in points.iter().enumerate() {
        let mut c = 0;
        x[(i, c)] = 1.0;
        if use_n {
            c += 1;
            x[(i, c)] = n.ln();
        }
        if use_m {
            c += 1;
            x[(i, c)] = m.ln();
        }
        y[i] = t.ln();
    }
    let xtx = x.transpose() * &x;
    let inv = xtx
        .clone()
        .try_inverse()
        .filter(|_| xtx.determinant().abs() > 1e-12)
        .ok_or_else(|| Error::Fit("degenerate design matrix".into()))?;
    let coef = &inv * x.transpose() * &y;
    let resid = &y - &x * &coef;
    let rss = resid.norm_squared();
    let df = rows - cols;
    let half_width = |j: usize| {
        if df == 0 {
            return f64::NAN;
        }
        let sigma2 = rss / df as f64;
        let t = StudentsT::new(0.0, 1.0, df as f64)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::NAN);
        t * (sigma2 * inv[(j, j)]).sqrt()
    };
    let mut j = 0;
    let mut next = |used: bool| {
        used.then(|| {
            j += 1;
            (coef[j], half_width(j))
        })
    };
    let a = next(use_n);
    let b = next(use_m);
    Ok(PowerLawFit {
        alpha: a.map(|p| p.0),
        beta: b.map(|p| p.0),
        intercept: coef[0],
        residual_sum: rss,
        ci_alpha: a.map(|p| p.1),
        ci_beta: b.map(|p| p.1),
        points: rows,
    })
}

fn response_points(rows: &[SweepRow], response: Response) -> Result<Vec<(f64, f64, f64)>> {
    if rows.iter().any(|r| r.timeout) {
        return Err(Error::Fit("fitted rows contain TIMEOUT trials".into()));
    }
    let Response::Median = response;
    cell_medians(rows)
        .into_iter()
        .map(|((n, m), med)| {
            let med = med.ok_or_else(|| Error::Fit(format!("no median for n={n}, m={m}")))?;
            Ok((n as f64, m as f64, med))
        })
        .collect()
}

pub fn fit_power_law(rows: &[SweepRow], response: Response) -> Result<PowerLawFit> {
    fit_points(&response_points(rows, response)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingModel {
    /// `T ∝ n / √m`
    Sqrt,
    /// `T ∝ n ln n ln m / m`
    Wang,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelComparison {
    pub residual_sqrt_model: f64,
    pub residual_wang_model: f64,
    pub preferred: ScalingModel,
}

impl ModelComparison {
    /// Residual of the rejected model over the preferred one.
    pub fn residual_ratio(&self) -> f64 {
        let (a, b) = (self.residual_sqrt_model, self.residual_wang_model);
        a.max(b) / a.min(b)
    }
}

fn offset_residual(points: &[(f64, f64, f64)], predictor: impl Fn(f64, f64) -> f64) -> f64 {
    let diffs: Vec<f64> = points.iter().map(|&(n, m, t)| t.ln() - predictor(n, m)).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    diffs.iter().map(|d| (d - mean).powi(2)).sum()
}

/// Residual sums of `ln T` against each candidate law with a free
/// intercept.
pub fn compare_points(points: &[(f64, f64, f64)]) -> Result<ModelComparison> {
    if points.len() < 4 {
        return Err(Error::Comparison(format!(
            "need at least 4 cells, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| p.1 < 2.0 || p.0 < 2.0 || p.2 <= 0.0) {
        return Err(Error::Comparison("needs n >= 2, m >= 2 and positive times".into()));
    }
    let sqrt = offset_residual(points, |n, m| n.ln() - 0.5 * m.ln());
    let wang = offset_residual(points, |n, m| (n * n.ln() * m.ln() / m).ln());
    Ok(ModelComparison {
        residual_sqrt_model: sqrt,
        residual_wang_model: wang,
        preferred: if sqrt <= wang {
            ScalingModel::Sqrt
        } else {
            ScalingModel::Wang
        },
    })
}

pub fn compare_models(rows: &[SweepRow]) -> Result<ModelComparison> {
    let points = response_points(rows, Response::Median).map_err(|e| Error::Comparison(e.to_string()))?;
    compare_points(&points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupKey {
    Topology,
    Scenario,
    N,
    M,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct GroupId {
    pub topology: Option<TopologyKind>,
    pub scenario: Option<Scenario>,
    pub n: Option<u64>,
    pub m: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub group: GroupId,
    pub trials: usize,
    pub quantiles: Quantiles,
    pub timeout_count: usize,
}

/// Grouped five-number summaries, sorted by group.
pub fn summarize(rows: &[SweepRow], keys: &[GroupKey]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::EmptySample("nothing to summarize"));
    }
    let has = |k| keys.contains(&k);
    let mut groups: BTreeMap<GroupId, Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        let id = GroupId {
            topology: has(GroupKey::Topology).then_some(r.topology),
            scenario: has(GroupKey::Scenario).then_some(r.scenario),
            n: has(GroupKey::N).then_some(r.n),
            m: has(GroupKey::M).then_some(r.m),
        };
        groups.entry(id).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|(group, members)| {
            let values: Vec<Option<f64>> = members.iter().map(|r| r.completion_time.map(|t| t as f64)).collect();
            SummaryRow {
                group,
                trials: members.len(),
                quantiles: Quantiles::from_censored(&values),
                timeout_count: members.iter().filter(|r| r.timeout).count(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(law: impl Fn(f64, f64) -> f64, ns: &[u64], ms: &[u64]) -> Vec<SweepRow> {
        let mut rows = Vec::new();
        for &n in ns {
            for &m in ms {
                let t = law(n as f64, m as f64);
                rows.push(SweepRow {
                    topology: TopologyKind::GridSelfloop,
                    scenario: Scenario::Broadcast,
                    n,
                    m,
                    trial: 0,
                    seed: 0,
                    // Times are stored as integers; scale up to keep rounding
                    // far below the asserted tolerance.
                    completion_time: Some(t.round() as u64),
                    timeout: false,
                    realized_m: m as usize,
                    wall_ms: None,
                });
            }
        }
        rows
    }

    fn exact_points(law: impl Fn(f64, f64) -> f64, ns: &[u64], ms: &[u64]) -> Vec<(f64, f64, f64)> {
        let mut pts = Vec::new();
        for &n in ns {
            for &m in ms {
                pts.push((n as f64, m as f64, law(n as f64, m as f64)));
            }
        }
        pts
    }

    const NS: [u64; 3] = [1 << 12, 1 << 14, 1 << 16];
    const MS: [u64; 5] = [1 << 4, 1 << 6, 1 << 8, 1 << 10, 1 << 12];

    #[test]
    fn recovers_sqrt_law_exactly() {
        let f = fit_points(&exact_points(|n, m| 10.0 * n / m.sqrt(), &NS, &MS)).unwrap();
        assert!((f.alpha.unwrap() - 1.0).abs() < 1e-9);
        assert!((f.beta.unwrap() + 0.5).abs() < 1e-9);
        assert!((f.intercept - 10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn recovers_ring_law_exactly() {
        let f = fit_points(&exact_points(|n, m| n * n / m, &NS, &MS)).unwrap();
        assert!((f.alpha.unwrap() - 2.0).abs() < 1e-9);
        assert!((f.beta.unwrap() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_axis_fit() {
        let rows = synthetic(|n, m| 1000.0 * n / m.sqrt(), &[1 << 16], &MS);
        let f = fit_power_law(&rows, Response::Median).unwrap();
        assert_eq!(f.alpha, None);
        assert!((f.beta.unwrap() + 0.5).abs() < 1e-6);
        assert!(f.ci_beta.unwrap() >= 0.0);
    }

    #[test]
    fn too_few_axis_values() {
        let rows = synthetic(|n, m| n / m, &[1 << 16], &[16, 64]);
        assert!(matches!(fit_power_law(&rows, Response::Median), Err(Error::Fit(_))));
    }

    #[test]
    fn timeouts_block_fitting() {
        let mut rows = synthetic(|n, m| n / m.sqrt(), &[1 << 16], &MS);
        rows[0].timeout = true;
        rows[0].completion_time = None;
        assert!(fit_power_law(&rows, Response::Median).is_err());
    }

    #[test]
    fn zero_times_are_rejected() {
        let rows = synthetic(|_, _| 0.0, &[1 << 16], &MS);
        assert!(fit_power_law(&rows, Response::Median).is_err());
    }

    #[test]
    fn comparison_prefers_the_generating_law() {
        let ns = [1 << 16];
        let sqrt = compare_points(&exact_points(|n, m| n / m.sqrt(), &ns, &MS)).unwrap();
        assert_eq!(sqrt.preferred, ScalingModel::Sqrt);
        let wang = compare_points(&exact_points(|n, m| n * n.ln() * m.ln() / m, &ns, &MS)).unwrap();
        assert_eq!(wang.preferred, ScalingModel::Wang);
    }

    #[test]
    fn comparison_is_scale_invariant() {
        let ns = [1 << 14, 1 << 16];
        let law = |n: f64, m: f64| n.powf(0.9) / m.powf(0.6);
        let a = compare_points(&exact_points(law, &ns, &MS)).unwrap();
        let b = compare_points(&exact_points(|n, m| 37.5 * law(n, m), &ns, &MS)).unwrap();
        assert!((a.residual_sqrt_model - b.residual_sqrt_model).abs() < 1e-9);
        assert!((a.residual_wang_model - b.residual_wang_model).abs() < 1e-9);
        assert_eq!(a.preferred, b.preferred);
    }

    #[test]
    fn comparison_needs_four_cells() {
        let pts = exact_points(|n, m| n / m, &[1 << 16], &[4, 8, 16]);
        assert!(compare_points(&pts).is_err());
    }

    #[test]
    fn summarize_single_and_censored() {
        let rows = synthetic(|_, _| 42.0, &[16], &[4]);
        let s = summarize(&rows, &[GroupKey::N, GroupKey::M]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].quantiles.min, Some(42.0));
        assert_eq!(s[0].quantiles.max, Some(42.0));

        let mut rows = synthetic(|_, _| 1.0, &[16], &[4]);
        rows.extend(rows.clone());
        for r in &mut rows {
            r.completion_time = None;
            r.timeout = true;
        }
        let s = summarize(&rows, &[GroupKey::N]).unwrap();
        assert_eq!(s[0].timeout_count, 2);
        assert_eq!(s[0].quantiles.median, None);
        assert!(summarize(&[], &[]).is_err());
    }

    #[test]
    fn one_cell_one_trial() {
        let plan = SweepPlan::new(TopologyKind::GridSelfloop, Scenario::Broadcast, vec![64], vec![4], 1).with_seed(3);
        let rows = run_sweep(&plan).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].seed, trial_seed(3, 64, 4, 0));
    }

    #[test]
    fn single_agent_cells_finish_at_zero() {
        for scenario in [Scenario::Broadcast, Scenario::Gossip] {
            let plan = SweepPlan::new(TopologyKind::Torus, scenario, vec![64, 256], vec![1], 3);
            for r in run_sweep(&plan).unwrap() {
                assert_eq!(r.completion_time, Some(0));
            }
        }
    }

    #[test]
    fn plan_validation() {
        let bad_n = SweepPlan::new(TopologyKind::GridSelfloop, Scenario::Broadcast, vec![10], vec![4], 1);
        assert!(run_sweep(&bad_n).is_err());
        let no_trials = SweepPlan::new(TopologyKind::Ring, Scenario::Broadcast, vec![10], vec![4], 0);
        assert!(run_sweep(&no_trials).is_err());
    }

    #[test]
    fn csv_round_trip_and_header() {
        let plan = SweepPlan::new(TopologyKind::Ring, Scenario::Gossip, vec![32], vec![2, 3], 2).with_seed(9);
        let mut rows = run_sweep(&plan).unwrap();
        rows[0].completion_time = None;
        rows[0].timeout = true;
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), SWEEP_HEADER);
        assert!(text.lines().nth(1).unwrap().starts_with("ring,gossip,32,2,0,"));
        assert_eq!(read_sweep_csv(&buf[..]).unwrap(), rows);
        assert!(read_sweep_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn flat_fit_text() {
        let f = fit_points(&exact_points(|n, m| n / m.sqrt(), &[1 << 16], &MS)).unwrap();
        let text = f.to_flat_text();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), PowerLawFit::HEADER);
        let values: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(values.len(), 6);
        assert_eq!(values[0], "");
        assert!((values[1].parse::<f64>().unwrap() + 0.5).abs() < 1e-9);
    }
}
