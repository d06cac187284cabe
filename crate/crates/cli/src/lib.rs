//! Config handling and subcommands behind the `cascade-toa` binary.
//!
//! A config file is JSON. It either lists the nodes explicitly or carries a
//! `generator` block for the random 50-node network; everything else is
//! optional and falls back to the defaults in [`defaults`]. Command-line
//! flags override file values.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use cascade_toa::crlb::{anchor_crlb_for_localization, updated_crlb};
use cascade_toa::hierarchy::{assign_levels, dynamic_anchor_set, LevelMap};
use cascade_toa::ichan::IchanConfig;
use cascade_toa::localize::{locate, MotionPenalty};
use cascade_toa::mobility::MobilityParams;
use cascade_toa::model::{synthesize_measurements, Node, Role};
use cascade_toa::pso::SwarmConfig;
use cascade_toa::report::{emit, Format, MetricsReport};
use cascade_toa::rng::{derive_seed, substream, Purpose};
use cascade_toa::scenarios::{manet_scenario, ManetLayout};
use cascade_toa::sim::{anchor_crlbs, run_manet, run_static_sweep, Cascade, ManetConfig, SweepConfig};
use cascade_toa::{Estimate, LocalizeOptions, Method, NodeId, NoiseParams, Position2D, Scenario};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bundled configs, addressable as `builtin:<name>`.
pub const BUILTIN_CONFIGS: [(&str, &str); 2] =
    [("nine-node", include_str!("../configs/nine-node.json")), ("manet50", include_str!("../configs/manet50.json"))];

/// Defaults applied when neither the file nor a flag sets a value.
pub mod defaults {
    pub const COMM_RADIUS: f64 = 500.0;
    pub const SIGMA: f64 = 5.0;
    pub const DELTA: f64 = 3.0;
    pub const SEED: u64 = 0;
    pub const SWEEP_SIGMAS: [f64; 4] = [3.0, 5.0, 8.0, 10.0];
    pub const TRIALS: usize = 500;
    pub const ETA: f64 = 0.1;
    pub const DURATION_S: f64 = 20.0;
    pub const V_MEAN: f64 = 20.0;
    pub const V_N_MAX: f64 = 5.0;
    pub const DT: f64 = 0.2;
    /// Solver failure rate above which `sweep` and `simulate` exit with 3.
    pub const MAX_FAILURE_RATE: f64 = 0.5;
}

/// A validation problem tied to one config field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {}", join(.0))]
    Config(Vec<FieldError>),
    #[error("solver failure rate {rate:.2} for `{method}` exceeds {limit}")]
    ExcessFailures { method: String, rate: f64, limit: f64 },
    #[error(transparent)]
    Core(#[from] cascade_toa::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn join(errors: &[FieldError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl CliError {
    pub fn field(field: &str, reason: impl Into<String>) -> Self {
        CliError::Config(vec![FieldError { field: field.into(), reason: reason.into() }])
    }

    /// Process exit status: 2 for config problems, 3 for excess solver
    /// failures, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::ExcessFailures { .. } => 3,
            CliError::Core(cascade_toa::Error::InvalidInput(_) | cascade_toa::Error::InvalidScenario(_))
            | CliError::Core(cascade_toa::Error::InvalidNoise(_) | cascade_toa::Error::UnknownNode(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------------------
// File schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub comm_radius: Option<f64>,
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
    /// Node reported by `locate` and `sweep`; defaults to the first node of
    /// the highest level.
    pub target: Option<String>,
    /// Deployment rectangle `[x0, y0, x1, y1]` the estimates must stay in.
    pub area: Option<[f64; 4]>,
    pub nodes: Option<Vec<NodeSpec>>,
    pub generator: Option<ManetLayout>,
    pub pso: Option<SwarmConfig>,
    pub ichan: Option<IchanConfig>,
    pub mobility: Option<MobilityFile>,
    pub sim: Option<SimFile>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub role: Role,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityFile {
    pub v_mean: Option<f64>,
    pub v_n_max: Option<f64>,
    pub dt: Option<f64>,
    pub bounds: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    pub sigmas: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub methods: Option<Vec<Method>>,
    pub eta: Option<f64>,
    pub duration: Option<f64>,
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    pub eta: Option<f64>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub particles: Option<usize>,
    pub iterations: Option<usize>,
    pub ichan_max_iter: Option<usize>,
    pub ichan_eps: Option<f64>,
}

// ---------------------------------------------------------------------------
// Merged config
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub scenario: Scenario,
    /// Present when the nodes came from the random-network generator.
    pub layout: Option<ManetLayout>,
    pub target: Option<NodeId>,
    pub options: LocalizeOptions,
    pub mobility: MobilityParams,
    pub sigmas: Vec<f64>,
    pub trials: usize,
    pub methods: Option<Vec<Method>>,
    pub eta: f64,
    pub duration: f64,
    pub seed: u64,
}

/// Read a config from a path or `builtin:<name>`.
pub fn read_config_text(source: &str) -> Result<String> {
    if let Some(name) = source.strip_prefix("builtin:") {
        return BUILTIN_CONFIGS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| (*text).to_owned())
            .ok_or_else(|| CliError::field("config", format!("no bundled config named `{name}`")));
    }
    std::fs::read_to_string(source).map_err(|e| CliError::field("config", format!("cannot read `{source}`: {e}")))
}

pub fn parse_config_file(text: &str) -> Result<ConfigFile> {
    serde_json::from_str(text).map_err(|e| CliError::field(&json_field(&e.to_string()), e.to_string()))
}

/// Best-effort field name out of a serde_json message.
fn json_field(message: &str) -> String {
    message
        .split('`')
        .nth(1)
        .filter(|_| message.starts_with("unknown field") || message.starts_with("missing field"))
        .unwrap_or("config")
        .to_owned()
}

fn check(errors: &mut Vec<FieldError>, ok: bool, field: &str, reason: &str) {
    if !ok {
        errors.push(FieldError { field: field.into(), reason: reason.into() });
    }
}

fn nonneg(v: f64) -> bool {
    v >= 0.0 && v.is_finite()
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn rect_ok(r: &[f64; 4]) -> bool {
    r.iter().all(|v| v.is_finite()) && r[2] > r[0] && r[3] > r[1]
}

/// Merge file and flags, apply defaults, validate every field.
pub fn parse_and_validate(file: ConfigFile, flags: &Overrides) -> Result<CliConfig> {
    let mut errors = Vec::new();
    let sigma = flags.sigma.or(file.sigma).unwrap_or(defaults::SIGMA);
    let delta = flags.delta.or(file.delta).unwrap_or(defaults::DELTA);
    let comm_radius = file.comm_radius.unwrap_or(defaults::COMM_RADIUS);
    let seed = flags.seed.or(file.seed).unwrap_or(defaults::SEED);
    let sim = file.sim.unwrap_or_default();
    let eta = flags.eta.or(sim.eta).unwrap_or(defaults::ETA);
    let trials = flags.trials.or(sim.trials).unwrap_or(defaults::TRIALS);
    let duration = sim.duration.unwrap_or(defaults::DURATION_S);
    let sigmas = match (flags.sigma, sim.sigmas) {
        (Some(s), _) => vec![s],
        (None, Some(v)) => v,
        (None, None) => defaults::SWEEP_SIGMAS.to_vec(),
    };

    check(&mut errors, nonneg(sigma), "sigma", "must be ≥ 0");
    check(&mut errors, nonneg(delta), "delta", "must be ≥ 0");
    check(&mut errors, positive(comm_radius), "comm_radius", "must be > 0");
    check(&mut errors, nonneg(eta), "eta", "must be ≥ 0");
    check(&mut errors, trials >= 1, "trials", "must be ≥ 1");
    check(&mut errors, positive(duration), "sim.duration", "must be > 0");
    check(&mut errors, !sigmas.is_empty(), "sim.sigmas", "must not be empty");
    check(&mut errors, sigmas.iter().all(|&s| nonneg(s)), "sim.sigmas", "every value must be ≥ 0");
    if let Some(methods) = &sim.methods {
        check(&mut errors, !methods.is_empty(), "sim.methods", "must not be empty");
    }
    if let Some(area) = &file.area {
        check(&mut errors, rect_ok(area), "area", "must be [x0, y0, x1, y1] with x1 > x0 and y1 > y0");
    }

    let mut swarm = file.pso.unwrap_or_default();
    if let Some(p) = flags.particles {
        swarm.particles = p;
    }
    if let Some(i) = flags.iterations {
        swarm.iterations = i;
    }
    check(&mut errors, swarm.particles >= 2, "pso.particles", "must be ≥ 2");
    check(&mut errors, swarm.iterations >= 1, "pso.iterations", "must be ≥ 1");
    check(&mut errors, swarm.inertia > 0.0 && swarm.inertia < 1.0, "pso.inertia", "must be in (0, 1)");
    check(&mut errors, positive(swarm.cognitive), "pso.cognitive", "must be > 0");
    check(&mut errors, positive(swarm.social), "pso.social", "must be > 0");

    let mut ichan = file.ichan.unwrap_or_default();
    if let Some(m) = flags.ichan_max_iter {
        ichan.max_iter = m;
    }
    if let Some(e) = flags.ichan_eps {
        ichan.eps = e;
    }
    check(&mut errors, ichan.max_iter >= 1, "ichan.max_iter", "must be ≥ 1");
    check(&mut errors, positive(ichan.eps), "ichan.eps", "must be > 0");

    let layout = file.generator.clone();
    if let Some(l) = &layout {
        check(&mut errors, l.nodes >= 1, "generator.nodes", "must be ≥ 1");
        check(&mut errors, l.base_nodes <= l.nodes, "generator.base_nodes", "must not exceed generator.nodes");
        check(&mut errors, rect_ok(&l.area), "generator.area", "must be [x0, y0, x1, y1] with x1 > x0 and y1 > y0");
        check(&mut errors, rect_ok(&l.base_region), "generator.base_region", "must be [x0, y0, x1, y1] with x1 > x0 and y1 > y0");
    }
    match (&file.nodes, &layout) {
        (None, None) => check(&mut errors, false, "nodes", "missing scenario: give `nodes` or `generator`"),
        (Some(_), Some(_)) => check(&mut errors, false, "nodes", "give either `nodes` or `generator`, not both"),
        (Some(nodes), None) => {
            for (i, n) in nodes.iter().enumerate() {
                check(&mut errors, n.x.is_finite() && n.y.is_finite(), &format!("nodes[{i}]"), "coordinates must be finite");
            }
        }
        _ => {}
    }

    let mobility_file = file.mobility.unwrap_or_default();
    let default_bounds = layout.as_ref().map(|l| l.area).or(file.area).unwrap_or(ManetLayout::default().area);
    let mobility = MobilityParams {
        v_mean: mobility_file.v_mean.unwrap_or(defaults::V_MEAN),
        v_n_max: mobility_file.v_n_max.unwrap_or(defaults::V_N_MAX),
        dt: mobility_file.dt.unwrap_or(defaults::DT),
        bounds: mobility_file.bounds.unwrap_or(default_bounds),
    };
    check(&mut errors, nonneg(mobility.v_mean), "mobility.v_mean", "must be ≥ 0");
    check(&mut errors, nonneg(mobility.v_n_max), "mobility.v_n_max", "must be ≥ 0");
    check(&mut errors, positive(mobility.dt), "mobility.dt", "must be > 0");
    check(&mut errors, rect_ok(&mobility.bounds), "mobility.bounds", "must be [x0, y0, x1, y1] with x1 > x0 and y1 > y0");

    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }

    let noise = NoiseParams { sigma, delta };
    let scenario = match (&file.nodes, &layout) {
        (Some(nodes), _) => {
            let nodes = nodes.iter().map(|n| Node::new(n.id.clone(), Position2D::new(n.x, n.y), n.role)).collect();
            Scenario::new(nodes, comm_radius, noise, seed).map_err(|e| CliError::field("nodes", e.to_string()))?
        }
        (None, Some(l)) => manet_scenario(l, comm_radius, noise, seed).map_err(|e| CliError::field("generator", e.to_string()))?,
        (None, None) => unreachable!("checked above"),
    };
    let target = match file.target {
        Some(t) => {
            scenario.index_of(&t).map_err(|_| CliError::field("target", format!("no node with id `{t}`")))?;
            Some(NodeId::new(t))
        }
        None => None,
    };
    let options = LocalizeOptions { swarm, ichan, area: file.area, ..LocalizeOptions::default() };
    Ok(CliConfig {
        scenario,
        layout,
        target,
        options,
        mobility,
        sigmas,
        trials,
        methods: sim.methods,
        eta,
        duration,
        seed,
    })
}

/// Read, parse and validate in one go.
pub fn load(source: &str, flags: &Overrides) -> Result<CliConfig> {
    parse_and_validate(parse_config_file(&read_config_text(source)?)?, flags)
}

impl CliConfig {
    /// The configured target, else the first node of the highest level.
    pub fn target_or_default(&self, levels: &LevelMap, flag: Option<&str>) -> Result<NodeId> {
        if let Some(t) = flag {
            self.scenario.index_of(t).map_err(|_| CliError::field("target", format!("no node with id `{t}`")))?;
            return Ok(NodeId::new(t));
        }
        if let Some(t) = &self.target {
            return Ok(t.clone());
        }
        levels
            .at_level(levels.max_level())
            .into_iter()
            .find(|id| levels.max_level() > 0 && levels.level(id.as_str()).is_some())
            .ok_or_else(|| CliError::field("target", "scenario has no localizable blind node"))
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct CrlbRow {
    pub id: NodeId,
    pub level: Option<u32>,
    /// Trace CRLB (m²) the node carries as an anchor; `null` when unleveled.
    pub crlb_m2: Option<f64>,
    /// Updated CRLB of each of this node's anchors after localizing it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub updated_anchors: Option<BTreeMap<NodeId, f64>>,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serialises");
    s.push('\n');
    s
}

pub fn levels_command(config: &CliConfig) -> String {
    to_json(&assign_levels(&config.scenario))
}

pub fn crlb_command(config: &CliConfig, with_updated: bool) -> Result<String> {
    let sc = &config.scenario;
    let lm = assign_levels(sc);
    let mut rows = Vec::with_capacity(sc.len());
    for node in sc.nodes() {
        let id = node.id.as_str();
        let level = lm.level(id);
        let crlb_m2 = match level {
            Some(_) => Some(anchor_crlb_for_localization(sc, &lm, id)?.value),
            None => None,
        };
        let updated_anchors = match (with_updated, level) {
            (true, Some(l)) if l > 0 => {
                let set = dynamic_anchor_set(sc, &lm, id)?;
                let mut m = BTreeMap::new();
                for a in set.anchors {
                    let v = updated_crlb(sc, &lm, a.as_str(), id)?.value;
                    m.insert(a, v);
                }
                Some(m)
            }
            (true, _) => Some(BTreeMap::new()),
            _ => None,
        };
        rows.push(CrlbRow { id: node.id.clone(), level, crlb_m2, updated_anchors });
    }
    Ok(to_json(&rows))
}

/// Where the target was at the previous instant, for `--method dynamic`.
#[derive(Debug, Clone, Copy)]
pub struct PreviousFix(pub Position2D);

impl std::str::FromStr for PreviousFix {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (x, y) = s.split_once(',').ok_or("expected X,Y")?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
        Ok(PreviousFix(Position2D::new(parse(x)?, parse(y)?)))
    }
}

#[derive(Debug, Serialize)]
pub struct LocateOutput {
    pub target: NodeId,
    #[serde(flatten)]
    pub estimate: Estimate,
    pub error_m: f64,
}

/// One seeded measurement draw; lower levels are localized by the static
/// two-step cascade, then the target by `method`.
pub fn locate_command(config: &CliConfig, target: Option<&str>, method: Method, prev: Option<PreviousFix>) -> Result<String> {
    let sc = &config.scenario;
    let lm = assign_levels(sc);
    let target = config.target_or_default(&lm, target)?;
    let level = lm.level(target.as_str()).ok_or_else(|| CliError::field("target", format!("`{target}` is not localizable")))?;
    if level == 0 {
        return Err(CliError::field("target", format!("`{target}` is a base anchor")));
    }
    let penalty = match (method, prev) {
        (Method::TwoStepDynamic, Some(PreviousFix(p))) => {
            Some(MotionPenalty::new(p, config.mobility.v_mean, config.mobility.dt, config.eta).map_err(|e| CliError::field("prev", e.to_string()))?)
        }
        (Method::TwoStepDynamic, None) => return Err(CliError::field("prev", "`--method dynamic` needs `--prev X,Y`")),
        _ => None,
    };
    let measurements = synthesize_measurements(sc, &mut substream(config.seed, 0, Purpose::Measurements));
    let crlbs = anchor_crlbs(sc, &lm);
    let cascade = Cascade {
        scenario: sc,
        levels: &lm,
        measurements: &measurements,
        anchor_crlbs: &crlbs,
        options: config.options,
        seed: derive_seed(config.seed, &[0]),
    };
    let shared = cascade.level1();
    let known = cascade.run(Method::TwoStepStatic, None, Some(&shared));
    let problem = cascade.problem(target.as_str(), &known)?;
    let mut options = config.options;
    options.swarm.seed = derive_seed(config.seed, &[1]);
    let estimate = locate(method, &problem, &options, penalty)?;
    let error_m = estimate.pos.distance(sc.position(target.as_str())?);
    Ok(to_json(&LocateOutput { target, estimate, error_m }))
}

/// Fails when any method's overall solver failure rate exceeds `limit`.
pub fn guard_failures(report: &MetricsReport, limit: f64) -> Result<()> {
    match report.rows.iter().find(|r| r.time_s.is_none() && r.failure_rate > limit) {
        Some(r) => Err(CliError::ExcessFailures { method: r.method.clone(), rate: r.failure_rate, limit }),
        None => Ok(()),
    }
}

const SWEEP_METHODS: [Method; 5] = [Method::TwoStepStatic, Method::DirectPso, Method::Cwlls, Method::Lls, Method::Ichan];
const MANET_METHODS: [Method; 4] = [Method::TwoStepDynamic, Method::DirectPso, Method::Cwlls, Method::Lls];

/// Static Monte-Carlo sweep over the configured sigmas.
pub fn sweep_command(config: &CliConfig, target: Option<&str>) -> Result<MetricsReport> {
    let lm = assign_levels(&config.scenario);
    let target = config.target_or_default(&lm, target)?;
    let sweep = SweepConfig {
        scenario: config.scenario.clone(),
        target,
        sigmas: config.sigmas.clone(),
        trials: config.trials,
        methods: config.methods.clone().unwrap_or_else(|| SWEEP_METHODS.to_vec()),
        options: config.options,
        seed: config.seed,
    };
    let out = run_static_sweep(&sweep)?;
    Ok(out.report)
}

/// Mobile-network simulation; `trials` counts independent runs.
pub fn simulate_command(config: &CliConfig) -> Result<MetricsReport> {
    let layout = config.layout.clone().ok_or_else(|| CliError::field("generator", "`simulate` needs a `generator` block"))?;
    let manet = ManetConfig {
        layout,
        comm_radius: config.scenario.comm_radius,
        noise: config.scenario.noise,
        mobility: config.mobility,
        duration: config.duration,
        methods: config.methods.clone().unwrap_or_else(|| MANET_METHODS.to_vec()),
        eta: config.eta,
        options: config.options,
        seed: config.seed,
        runs: config.trials,
    };
    manet.validate().map_err(|e| CliError::field("sim", e.to_string()))?;
    Ok(run_manet(&manet)?.report)
}

/// Render a report to `out`, or return the text for stdout.
pub fn render_report(report: &MetricsReport, format: Format, out: Option<&Path>) -> Result<Option<String>> {
    let text = emit(report, format);
    match out {
        Some(path) => {
            std::fs::write(path, &text)?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}
