//! Monte-Carlo drivers and metrics.
//!
//! Level-1 nodes see the base anchors directly and are localized once per
//! instant by the level-1 MLE; every method then runs its own cascade over
//! levels two and up, each level using that method's estimates of the level
//! below.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::crlb::anchor_crlb_for_localization;
use crate::error::{Error, Result};
use crate::hierarchy::{assign_levels, dynamic_anchor_set, LevelMap};
use crate::localize::{locate, AnchorBelief, Estimate, LocalizeOptions, LocalizeProblem, Method, MotionPenalty};
use crate::mobility::{step, MobilityParams};
use crate::model::{synthesize_measurements, MeasurementSet, NodeId, NoiseParams, Position2D, Scenario};
use crate::report::{MetricsReport, ReportRow};
use crate::rng::{derive_seed, label_hash, substream, Purpose};
use crate::scenarios::{manet_scenario, ManetLayout};

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// `√(mean ‖p̂ − p‖²)`.
pub fn rmse(estimates: &[Position2D], truth: Position2D) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::InvalidInput("RMSE of an empty list".into()));
    }
    let ss: f64 = estimates.iter().map(|e| (e.x - truth.x).powi(2) + (e.y - truth.y).powi(2)).sum();
    Ok((ss / estimates.len() as f64).sqrt())
}

/// Root mean square of a list of error magnitudes.
pub fn rms(errors: &[f64]) -> Option<f64> {
    if errors.is_empty() {
        return None;
    }
    Some((errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
}

/// Mean RMSE over the level-2 nodes present in `per_node`; `None` if none are.
pub fn level2_avg_rmse(per_node: &BTreeMap<NodeId, f64>, levels: &LevelMap) -> Option<f64> {
    let vals: Vec<f64> = per_node.iter().filter(|(id, _)| levels.level(id.as_str()) == Some(2)).map(|(_, &v)| v).collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Empirical CDF: sorted values with cumulative fractions `k/n`.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter().enumerate().map(|(k, x)| (x, (k + 1) as f64 / n)).collect()
}

/// Linear-interpolated quantile, `q ∈ [0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub fn to_db(rmse_m: f64) -> Option<f64> {
    (rmse_m > 0.0).then(|| 10.0 * rmse_m.log10())
}

/// Row summarising a list of per-trial outcomes (`None` = failure).
pub fn summary_row(method: Method, sigma: f64, outcomes: &[Option<f64>], crlb_sqrt: Option<f64>) -> ReportRow {
    let ok: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let rmse_m = rms(&ok);
    let failure_rate = if outcomes.is_empty() { 0.0 } else { (outcomes.len() - ok.len()) as f64 / outcomes.len() as f64 };
    ReportRow {
        method: method.name().into(),
        sigma_m: sigma,
        v_mean_mps: None,
        eta: None,
        time_s: None,
        rmse_m,
        rmse_db: rmse_m.and_then(to_db),
        crlb_sqrt_m: crlb_sqrt,
        median_m: quantile(&ok, 0.5),
        p90_m: quantile(&ok, 0.9),
        failure_rate,
        cdf: empirical_cdf(&ok),
    }
}

// ---------------------------------------------------------------------------
// One instant of a network
// ---------------------------------------------------------------------------

/// Estimates of every localized node for one method and one instant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NetworkEstimates {
    pub estimates: BTreeMap<NodeId, Estimate>,
    pub failures: BTreeMap<NodeId, Error>,
}

impl NetworkEstimates {
    pub fn positions(&self) -> BTreeMap<NodeId, Position2D> {
        self.estimates.iter().map(|(id, e)| (id.clone(), e.pos)).collect()
    }

    pub fn error(&self, scenario: &Scenario, id: &str) -> Option<f64> {
        let e = self.estimates.get(id)?;
        Some(e.pos.distance(scenario.position(id).ok()?))
    }
}

/// Previous-instant estimates for the motion penalty.
#[derive(Debug, Clone, Copy)]
pub struct Motion<'a> {
    pub prev: &'a BTreeMap<NodeId, Position2D>,
    pub v_mean: f64,
    pub dt: f64,
    pub eta: f64,
}

/// CRLB carried by every leveled node when it serves as an anchor.
pub fn anchor_crlbs(scenario: &Scenario, levels: &LevelMap) -> BTreeMap<NodeId, f64> {
    levels
        .levels
        .keys()
        .filter_map(|id| anchor_crlb_for_localization(scenario, levels, id.as_str()).ok().map(|c| (id.clone(), c.value)))
        .collect()
}

/// Everything needed to localize one instant of a network.
pub struct Cascade<'a> {
    /// Scenario at true positions (levels and anchor CRLBs come from it).
    pub scenario: &'a Scenario,
    pub levels: &'a LevelMap,
    pub measurements: &'a MeasurementSet,
    pub anchor_crlbs: &'a BTreeMap<NodeId, f64>,
    pub options: LocalizeOptions,
    /// Root of the per-node swarm seeds.
    pub seed: u64,
}

impl Cascade<'_> {
    /// Localization problem of `node` against the anchors known so far.
    pub fn problem(&self, node: &str, known: &NetworkEstimates) -> Result<LocalizeProblem> {
        let set = dynamic_anchor_set(self.scenario, self.levels, node)?;
        let mut anchors = Vec::new();
        let mut ranges = Vec::new();
        for a in &set.anchors {
            let belief = if self.levels.level(a.as_str()) == Some(0) {
                self.measurements.anchor(a.as_str()).map(|pos| AnchorBelief::new(a.clone(), pos, self.scenario.noise.delta.powi(2)))
            } else {
                match (known.estimates.get(a), self.anchor_crlbs.get(a)) {
                    (Some(e), Some(&crlb)) => Some(AnchorBelief::new(a.clone(), e.pos, crlb)),
                    _ => None,
                }
            };
            if let (Some(b), Some(r)) = (belief, self.measurements.range(&set.target, a)) {
                anchors.push(b);
                ranges.push(r);
            }
        }
        if anchors.len() < self.scenario.dimension + 1 {
            return Err(Error::DegenerateGeometry(format!("`{node}` has only {} usable anchors", anchors.len())));
        }
        Ok(LocalizeProblem::new(anchors, ranges, self.scenario.noise.sigma))
    }

    fn options_for(&self, node: &str) -> LocalizeOptions {
        let mut o = self.options;
        o.swarm.seed = derive_seed(self.seed, &[label_hash(node)]);
        o
    }

    fn localize_node(&self, node: &NodeId, method: Method, known: &NetworkEstimates, motion: Option<&Motion>) -> Result<Estimate> {
        let problem = self.problem(node.as_str(), known)?;
        let level = self.levels.level(node.as_str()).unwrap_or(0);
        // level-1 nodes see base anchors directly; every method shares the MLE there
        let method = if level == 1 { Method::Level1Mle } else { method };
        let penalty = match (method, motion) {
            (Method::TwoStepDynamic, Some(m)) => match m.prev.get(node) {
                Some(&prev) => Some(MotionPenalty::new(prev, m.v_mean, m.dt, m.eta)?),
                None => None,
            },
            _ => None,
        };
        locate(method, &problem, &self.options_for(node.as_str()), penalty)
    }

    /// Level-1 fits shared by the swarm-based methods.
    pub fn level1(&self) -> NetworkEstimates {
        let mut out = NetworkEstimates::default();
        for id in self.levels.at_level(1) {
            match self.localize_node(&id, Method::Level1Mle, &out, None) {
                Ok(e) => {
                    out.estimates.insert(id, e);
                }
                Err(e) => {
                    out.failures.insert(id, e);
                }
            }
        }
        out
    }

    /// Localize every leveled node, lowest level first, ties by id.
    pub fn run(&self, method: Method, motion: Option<&Motion>, shared_level1: Option<&NetworkEstimates>) -> NetworkEstimates {
        let mut out = NetworkEstimates::default();
        for level in 1..=self.levels.max_level() {
            if level == 1 {
                if let Some(shared) = shared_level1 {
                    out.estimates.extend(shared.estimates.iter().map(|(k, v)| (k.clone(), v.clone())));
                    out.failures.extend(shared.failures.iter().map(|(k, v)| (k.clone(), v.clone())));
                    continue;
                }
            }
            for id in self.levels.at_level(level) {
                match self.localize_node(&id, method, &out, motion) {
                    Ok(e) => {
                        out.estimates.insert(id, e);
                    }
                    Err(e) => {
                        out.failures.insert(id, e);
                    }
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Static sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub scenario: Scenario,
    pub target: NodeId,
    pub sigmas: Vec<f64>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub options: LocalizeOptions,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidInput("trials must be >= 1".into()));
        }
        if self.sigmas.is_empty() {
            return Err(Error::InvalidInput("sigma sweep is empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods selected".into()));
        }
        for &s in &self.sigmas {
            NoiseParams::new(s, self.scenario.noise.delta)?;
        }
        self.scenario.index_of(self.target.as_str())?;
        Ok(())
    }
}

/// All methods on one set of measurements.
#[derive(Debug, Clone)]
pub struct StaticTrial {
    pub measurements: MeasurementSet,
    pub results: BTreeMap<Method, NetworkEstimates>,
}

/// Seed of one sweep cell; the same for every method so trials are paired.
pub fn cell_seed(root: u64, sigma: f64) -> u64 {
    derive_seed(root, &[sigma.to_bits()])
}

/// One static trial: draw measurements and run every method's cascade.
pub fn run_static_trial(
    scenario: &Scenario,
    levels: &LevelMap,
    crlbs: &BTreeMap<NodeId, f64>,
    methods: &[Method],
    options: LocalizeOptions,
    seed: u64,
    trial: u64,
) -> StaticTrial {
    let measurements = synthesize_measurements(scenario, &mut substream(seed, trial, Purpose::Measurements));
    let cascade = Cascade {
        scenario,
        levels,
        measurements: &measurements,
        anchor_crlbs: crlbs,
        options,
        seed: derive_seed(seed, &[trial]),
    };
    let shared = cascade.level1();
    let results = methods.iter().map(|&m| (m, cascade.run(m, None, Some(&shared)))).collect();
    StaticTrial { measurements, results }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub method: Method,
    pub sigma: f64,
    /// Target error per trial; `None` when that trial failed.
    pub errors: Vec<Option<f64>>,
    pub crlb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub cells: Vec<SweepCell>,
    pub report: MetricsReport,
}

impl SweepOutcome {
    pub fn cell(&self, method: Method, sigma: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.method == method && c.sigma == sigma)
    }
}

pub fn run_static_sweep(config: &SweepConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let mut cells = Vec::new();
    let mut report = MetricsReport::default();
    for &sigma in &config.sigmas {
        let scenario = config.scenario.with_noise(NoiseParams::new(sigma, config.scenario.noise.delta)?)?;
        let levels = assign_levels(&scenario);
        let crlbs = anchor_crlbs(&scenario, &levels);
        let seed = cell_seed(config.seed, sigma);
        let target = config.target.as_str();
        let errors: Vec<BTreeMap<Method, Option<f64>>> = (0..config.trials as u64)
            .into_par_iter()
            .map(|t| {
                let trial = run_static_trial(&scenario, &levels, &crlbs, &config.methods, config.options, seed, t);
                trial.results.iter().map(|(&m, est)| (m, est.error(&scenario, target))).collect()
            })
            .collect();
        let crlb = crlbs.get(target).copied();
        for &m in &config.methods {
            let errs: Vec<Option<f64>> = errors.iter().map(|e| e[&m]).collect();
            report.rows.push(summary_row(m, sigma, &errs, crlb.map(f64::sqrt)));
            cells.push(SweepCell { method: m, sigma, errors: errs, crlb });
        }
    }
    Ok(SweepOutcome { cells, report })
}

// ---------------------------------------------------------------------------
// Tracking a mobile scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrackingConfig {
    pub scenario: Scenario,
    pub target: NodeId,
    pub trajectories: usize,
    /// Instants per trajectory; the first only seeds the motion penalty.
    pub instants: usize,
    pub mobility: MobilityParams,
    pub eta: f64,
    pub options: LocalizeOptions,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingOutcome {
    /// One entry per recorded (trajectory, instant ≥ 1).
    pub static_errors: Vec<Option<f64>>,
    pub dynamic_errors: Vec<Option<f64>>,
    pub crlbs: Vec<Option<f64>>,
}

impl TrackingOutcome {
    pub fn report(&self, sigma: f64, mobility: &MobilityParams, eta: f64) -> MetricsReport {
        let mean_crlb = {
            let v: Vec<f64> = self.crlbs.iter().flatten().map(|c| c.sqrt()).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let mut rows = vec![
            summary_row(Method::TwoStepStatic, sigma, &self.static_errors, mean_crlb),
            summary_row(Method::TwoStepDynamic, sigma, &self.dynamic_errors, mean_crlb),
        ];
        for r in &mut rows {
            r.v_mean_mps = Some(mobility.v_mean);
            r.eta = Some(eta);
        }
        MetricsReport { rows }
    }
}

/// Move every node of the scenario one step.
fn advance(scenario: &mut Scenario, mobility: &MobilityParams, rng: &mut crate::rng::SimRng) -> Result<()> {
    let next: Vec<Position2D> = scenario.nodes().iter().map(|n| step(n.true_pos, mobility, rng)).collect();
    scenario.set_positions(&next)
}

fn merge_prev(prev: &mut BTreeMap<NodeId, Position2D>, est: &NetworkEstimates) {
    for (id, e) in &est.estimates {
        prev.insert(id.clone(), e.pos);
    }
}

/// Static and motion-penalised two-step localization along random walks of
/// a scenario.
pub fn run_tracking(config: &TrackingConfig) -> Result<TrackingOutcome> {
    config.mobility.validate()?;
    if config.instants < 2 || config.trajectories < 1 {
        return Err(Error::InvalidInput("tracking needs >= 1 trajectory and >= 2 instants".into()));
    }
    let target = config.target.as_str();
    config.scenario.index_of(target)?;
    let per_traj: Vec<Vec<(Option<f64>, Option<f64>, Option<f64>)>> = (0..config.trajectories as u64)
        .into_par_iter()
        .map(|j| -> Result<_> {
            let mut scenario = config.scenario.clone();
            let mut walk = substream(config.seed, j, Purpose::Mobility);
            let mut prev = BTreeMap::new();
            let mut rows = Vec::new();
            for k in 0..config.instants as u64 {
                if k > 0 {
                    advance(&mut scenario, &config.mobility, &mut walk)?;
                }
                let levels = assign_levels(&scenario);
                let crlbs = anchor_crlbs(&scenario, &levels);
                let instant_seed = derive_seed(config.seed, &[j, k]);
                let meas = synthesize_measurements(&scenario, &mut substream(instant_seed, 0, Purpose::Measurements));
                let cascade = Cascade {
                    scenario: &scenario,
                    levels: &levels,
                    measurements: &meas,
                    anchor_crlbs: &crlbs,
                    options: LocalizeOptions { area: config.options.area.or(Some(config.mobility.bounds)), ..config.options },
                    seed: instant_seed,
                };
                let shared = cascade.level1();
                let stat = cascade.run(Method::TwoStepStatic, None, Some(&shared));
                let motion = Motion { prev: &prev, v_mean: config.mobility.v_mean, dt: config.mobility.dt, eta: config.eta };
                let dynamic = cascade.run(Method::TwoStepDynamic, Some(&motion), Some(&shared));
                if k > 0 {
                    rows.push((stat.error(&scenario, target), dynamic.error(&scenario, target), crlbs.get(target).copied()));
                }
                merge_prev(&mut prev, &dynamic);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let flat: Vec<_> = per_traj.into_iter().flatten().collect();
    Ok(TrackingOutcome {
        static_errors: flat.iter().map(|r| r.0).collect(),
        dynamic_errors: flat.iter().map(|r| r.1).collect(),
        crlbs: flat.iter().map(|r| r.2).collect(),
    })
}

// ---------------------------------------------------------------------------
// Mobile network
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ManetConfig {
    pub layout: ManetLayout,
    pub comm_radius: f64,
    pub noise: NoiseParams,
    pub mobility: MobilityParams,
    pub duration: f64,
    pub methods: Vec<Method>,
    pub eta: f64,
    pub options: LocalizeOptions,
    pub seed: u64,
    /// Independent runs (fresh placement each).
    pub runs: usize,
}

impl ManetConfig {
    pub fn instants(&self) -> usize {
        ((self.duration / self.mobility.dt) + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.mobility.validate()?;
        self.noise.validate()?;
        if !(self.duration > 0.0 && self.duration.is_finite()) || self.instants() < 1 {
            return Err(Error::InvalidInput("duration must cover at least one sampling interval".into()));
        }
        if self.runs < 1 {
            return Err(Error::InvalidInput("runs must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods selected".into()));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::InvalidInput("eta must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstantRecord {
    pub run: usize,
    pub time_s: f64,
    pub level2_nodes: usize,
    /// Mean level-2 error per method; `None` when no level-2 node was localized.
    pub epsilon: BTreeMap<Method, Option<f64>>,
    /// Level-2 node errors per method.
    pub errors: BTreeMap<Method, Vec<f64>>,
    pub failures: BTreeMap<Method, usize>,
    /// Mean √CRLB over level-2 nodes.
    pub crlb_sqrt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManetOutcome {
    pub instants: Vec<InstantRecord>,
    pub report: MetricsReport,
}

impl ManetOutcome {
    /// Per-instant ε_level2 of `method`, absent instants skipped.
    pub fn epsilons(&self, method: Method) -> Vec<f64> {
        self.instants.iter().filter_map(|r| r.epsilon.get(&method).copied().flatten()).collect()
    }

    pub fn median(&self, method: Method) -> Option<f64> {
        quantile(&self.epsilons(method), 0.5)
    }
}

fn manet_instant(
    config: &ManetConfig,
    run: usize,
    k: usize,
    scenario: &Scenario,
    prev: &mut BTreeMap<NodeId, Position2D>,
) -> InstantRecord {
    let levels = assign_levels(scenario);
    let crlbs = anchor_crlbs(scenario, &levels);
    let seed = derive_seed(config.seed, &[run as u64, k as u64]);
    let meas = synthesize_measurements(scenario, &mut substream(seed, 0, Purpose::Measurements));
    let cascade = Cascade {
        scenario,
        levels: &levels,
        measurements: &meas,
        anchor_crlbs: &crlbs,
        options: LocalizeOptions { area: config.options.area.or(Some(config.layout.area)), ..config.options },
        seed,
    };
    let level2 = levels.at_level(2);
    let shared = cascade.level1();
    let mut record = InstantRecord {
        run,
        time_s: k as f64 * config.mobility.dt,
        level2_nodes: level2.len(),
        epsilon: BTreeMap::new(),
        errors: BTreeMap::new(),
        failures: BTreeMap::new(),
        crlb_sqrt: {
            let v: Vec<f64> = level2.iter().filter_map(|id| crlbs.get(id)).map(|c| c.sqrt()).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        },
    };
    let snapshot = prev.clone();
    for &m in &config.methods {
        let motion = Motion { prev: &snapshot, v_mean: config.mobility.v_mean, dt: config.mobility.dt, eta: config.eta };
        let est = cascade.run(m, (m == Method::TwoStepDynamic).then_some(&motion), Some(&shared));
        let per_node: BTreeMap<NodeId, f64> =
            level2.iter().filter_map(|id| est.error(scenario, id.as_str()).map(|e| (id.clone(), e))).collect();
        record.failures.insert(m, level2.len() - per_node.len());
        record.epsilon.insert(m, level2_avg_rmse(&per_node, &levels));
        record.errors.insert(m, per_node.values().copied().collect());
        if m == Method::TwoStepDynamic {
            merge_prev(prev, &est);
        }
    }
    record
}

/// Time-stepped run of the random mobile network.
pub fn run_manet(config: &ManetConfig) -> Result<ManetOutcome> {
    config.validate()?;
    let mobility = MobilityParams { bounds: config.layout.area, ..config.mobility };
    let mut instants = Vec::new();
    for run in 0..config.runs {
        let mut scenario = manet_scenario(&config.layout, config.comm_radius, config.noise, derive_seed(config.seed, &[run as u64]))?;
        let mut walk = substream(config.seed, run as u64, Purpose::Mobility);
        let mut prev = BTreeMap::new();
        for k in 0..config.instants() {
            if k > 0 {
                advance(&mut scenario, &mobility, &mut walk)?;
            }
            instants.push(manet_instant(config, run, k, &scenario, &mut prev));
        }
    }
    let report = manet_report(config, &instants);
    Ok(ManetOutcome { instants, report })
}

fn manet_report(config: &ManetConfig, instants: &[InstantRecord]) -> MetricsReport {
    let mut report = MetricsReport::default();
    let tag = |mut r: ReportRow| {
        r.v_mean_mps = Some(config.mobility.v_mean);
        r.eta = Some(config.eta);
        r
    };
    for &m in &config.methods {
        // summary over instants: the distribution of ε_level2
        let eps: Vec<Option<f64>> = instants.iter().map(|r| r.epsilon.get(&m).copied().flatten()).collect();
        let present: Vec<f64> = eps.iter().flatten().copied().collect();
        let attempts: usize = instants.iter().map(|r| r.level2_nodes).sum();
        let failed: usize = instants.iter().map(|r| r.failures.get(&m).copied().unwrap_or(0)).sum();
        let crlb: Vec<f64> = instants.iter().filter_map(|r| r.crlb_sqrt).collect();
        let mean = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
        let mut row = summary_row(m, config.noise.sigma, &eps, (!crlb.is_empty()).then(|| crlb.iter().sum::<f64>() / crlb.len() as f64));
        row.rmse_m = mean;
        row.rmse_db = mean.and_then(to_db);
        row.failure_rate = if attempts == 0 { 0.0 } else { failed as f64 / attempts as f64 };
        report.rows.push(tag(row));
    }
    for rec in instants {
        for &m in &config.methods {
            let errs = &rec.errors[&m];
            let eps = rec.epsilon[&m];
            let row = ReportRow {
                method: m.name().into(),
                sigma_m: config.noise.sigma,
                v_mean_mps: None,
                eta: None,
                time_s: Some(rec.time_s),
                rmse_m: eps,
                rmse_db: eps.and_then(to_db),
                crlb_sqrt_m: rec.crlb_sqrt,
                median_m: quantile(errs, 0.5),
                p90_m: quantile(errs, 0.9),
                failure_rate: if rec.level2_nodes == 0 { 0.0 } else { rec.failures[&m] as f64 / rec.level2_nodes as f64 },
                cdf: Vec::new(),
            };
            report.rows.push(tag(row));
        }
    }
    report
}
