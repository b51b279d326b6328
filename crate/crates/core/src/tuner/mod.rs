//! Group-based greedy dataflow tuning.
//!
//! Layers that share a kernel map form a group and must use one dataflow, so
//! the search runs over groups. Groups are tuned one at a time in order of
//! first appearance: every candidate of the space is measured end to end
//! with earlier groups at their chosen configs and later groups at the
//! default (gather-GEMM-scatter). Ties on latency go to lower modeled traffic,
//! then to the earlier space entry. One pass costs `groups × |space|`
//! measurements.
//!
//! Training runs two such passes. The workload-pattern scheme binds forward
//! and dgrad in the first pass and tunes wgrad in the second; the
//! sparse-mapping scheme tunes forward first and then binds dgrad with wgrad.
//! Each pass times only its own phases.

mod measure;
mod network;

pub use measure::{AdditiveOracle, WallClock};
pub use network::{
    partition_groups, plan, run_network, toy_unet, train_step, GroupConfig, GroupTiming, LayerGroup, LayerKind, LayerSpec,
    NetworkSpec, Phase, Phases, Plan, PlannedLayer, RunOutput, RunTiming, TrainOutput, INPUT,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bench::Clock;
use crate::error::invalid;
use crate::exec::{DataflowConfig, TilePreset};
use crate::Result;

/// Gather-GEMM-scatter and fetch-on-demand with the default tile, plus
/// implicit GEMM with 0 to 4 splits under both tile presets.
pub fn default_space() -> Vec<DataflowConfig> {
    let mut space = vec![DataflowConfig::gather_gemm_scatter(), DataflowConfig::fetch_on_demand()];
    for tile in [TilePreset::SMALL, TilePreset::LARGE] {
        for s in 0..=4 {
            space.push(DataflowConfig::implicit_gemm(s, tile));
        }
    }
    space
}

/// End-to-end latency of an assignment, as seen by the tuner.
pub trait Measure {
    /// Member layer names of each group.
    fn group_layers(&self) -> Vec<Vec<String>>;

    /// Latency in milliseconds of the phases in `phases` with `assignment`.
    fn measure(&mut self, assignment: &[GroupConfig], phases: Phases) -> Result<f64>;

    /// Modeled DRAM bytes of `group` under `config`; breaks latency ties.
    fn traffic(&self, _group: usize, _config: &DataflowConfig) -> u64 {
        0
    }

    /// Whether `config` can run `group`. Unsupported candidates are skipped.
    fn supports(&self, _group: usize, _config: &DataflowConfig) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneMode {
    Inference,
    Training,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Forward and dgrad share a config; wgrad is tuned separately.
    WorkloadPattern,
    /// Forward is tuned alone; dgrad and wgrad share a config.
    SparseMapping,
}

impl Scheme {
    /// Bound phases of the first and second pass.
    pub fn passes(self) -> [&'static [Phase]; 2] {
        match self {
            Scheme::WorkloadPattern => [&[Phase::Forward, Phase::Dgrad], &[Phase::Wgrad]],
            Scheme::SparseMapping => [&[Phase::Forward], &[Phase::Dgrad, Phase::Wgrad]],
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::WorkloadPattern => "workload_pattern",
            Scheme::SparseMapping => "sparse_mapping",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "workload" | "workload_pattern" => Ok(Scheme::WorkloadPattern),
            "mapping" | "sparse_mapping" => Ok(Scheme::SparseMapping),
            o => Err(format!("unknown scheme `{o}` (workload or mapping)")),
        }
    }
}

/// One measurement of the tuning session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub pass: usize,
    pub group: usize,
    /// Index into the design space.
    pub candidate: usize,
    pub config: DataflowConfig,
    pub phases: Vec<Phase>,
    pub latency_ms: f64,
    pub traffic_bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub id: usize,
    pub layers: Vec<String>,
    pub forward: DataflowConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dgrad: Option<DataflowConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wgrad: Option<DataflowConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub mode: TuneMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    pub groups: Vec<GroupResult>,
    /// Sum over passes of the winning latency of each pass's last group,
    /// which is the latency of the final assignment for that pass's phases.
    pub latency_ms: f64,
    pub log: Vec<LogEntry>,
    pub seed: u64,
    pub tuning_wall_ms: f64,
}

impl TuneResult {
    pub fn assignment(&self) -> Vec<GroupConfig> {
        self.groups
            .iter()
            .map(|g| GroupConfig {
                forward: g.forward,
                dgrad: g.dgrad.unwrap_or(g.forward),
                wgrad: g.wgrad.unwrap_or(g.forward),
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tune result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: TuneResult = serde_json::from_str(text)?;
        for g in &r.groups {
            for c in [Some(g.forward), g.dgrad, g.wgrad].into_iter().flatten() {
                c.validate()?;
            }
        }
        Ok(r)
    }
}

/// Default assignment: gather-GEMM-scatter for every phase of every group.
pub fn default_assignment(groups: usize) -> Vec<GroupConfig> {
    vec![GroupConfig::default(); groups]
}

fn set_phases(g: &mut GroupConfig, bind: &[Phase], c: DataflowConfig) {
    for p in bind {
        match p {
            Phase::Forward => g.forward = c,
            Phase::Dgrad => g.dgrad = c,
            Phase::Wgrad => g.wgrad = c,
        }
    }
}

/// One greedy pass. Returns the winning latency of the last group.
fn greedy_pass(
    measure: &mut impl Measure,
    space: &[DataflowConfig],
    assignment: &mut [GroupConfig],
    pass: usize,
    bind: &[Phase],
    log: &mut Vec<LogEntry>,
) -> Result<f64> {
    let timed = Phases::only(bind);
    let mut last = 0.0;
    for g in 0..assignment.len() {
        let mut best: Option<(f64, u64, usize)> = None;
        for (i, c) in space.iter().enumerate() {
            if !measure.supports(g, c) {
                continue;
            }
            set_phases(&mut assignment[g], bind, *c);
            let latency = measure.measure(assignment, timed)?;
            if !latency.is_finite() {
                return Err(invalid!("measurement returned {latency}"));
            }
            let traffic = measure.traffic(g, c);
            log.push(LogEntry {
                pass,
                group: g,
                candidate: i,
                config: *c,
                phases: bind.to_vec(),
                latency_ms: latency,
                traffic_bytes: traffic,
            });
            let better = match best {
                None => true,
                Some((bl, bt, _)) => latency < bl || (latency == bl && traffic < bt),
            };
            if better {
                best = Some((latency, traffic, i));
            }
        }
        let (latency, _, i) = best.ok_or_else(|| invalid!("no config in the space supports group {g}"))?;
        set_phases(&mut assignment[g], bind, space[i]);
        last = latency;
    }
    Ok(last)
}

fn check_space(space: &[DataflowConfig]) -> Result<()> {
    if space.is_empty() {
        return Err(invalid!("design space is empty"));
    }
    space.iter().try_for_each(DataflowConfig::validate)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    mode: TuneMode,
    scheme: Option<Scheme>,
    names: Vec<Vec<String>>,
    assignment: &[GroupConfig],
    latency_ms: f64,
    log: Vec<LogEntry>,
    seed: u64,
    clock: &Clock,
) -> TuneResult {
    let groups = names
        .into_iter()
        .zip(assignment)
        .enumerate()
        .map(|(id, (layers, a))| GroupResult {
            id,
            layers,
            forward: a.forward,
            dgrad: (mode == TuneMode::Training).then_some(a.dgrad),
            wgrad: (mode == TuneMode::Training).then_some(a.wgrad),
        })
        .collect();
    TuneResult {
        mode,
        scheme,
        groups,
        latency_ms,
        log,
        seed,
        tuning_wall_ms: clock.elapsed_ms(),
    }
}

pub fn tune_inference(measure: &mut impl Measure, space: &[DataflowConfig], seed: u64) -> Result<TuneResult> {
    check_space(space)?;
    let clock = Clock::start();
    let names = measure.group_layers();
    let mut assignment = default_assignment(names.len());
    let mut log = Vec::new();
    let latency = greedy_pass(measure, space, &mut assignment, 0, &[Phase::Forward], &mut log)?;
    Ok(finish(TuneMode::Inference, None, names, &assignment, latency, log, seed, &clock))
}

pub fn tune_training(measure: &mut impl Measure, space: &[DataflowConfig], scheme: Scheme, seed: u64) -> Result<TuneResult> {
    check_space(space)?;
    let clock = Clock::start();
    let names = measure.group_layers();
    let mut assignment = default_assignment(names.len());
    let mut log = Vec::new();
    let mut latency = 0.0;
    for (pass, bind) in scheme.passes().into_iter().enumerate() {
        latency += greedy_pass(measure, space, &mut assignment, pass, bind, &mut log)?;
    }
    Ok(finish(TuneMode::Training, Some(scheme), names, &assignment, latency, log, seed, &clock))
}

/// Baseline that binds all three training phases to one config per group in
/// a single pass timing the whole step.
pub fn tune_training_bound(measure: &mut impl Measure, space: &[DataflowConfig], seed: u64) -> Result<TuneResult> {
    check_space(space)?;
    let clock = Clock::start();
    let names = measure.group_layers();
    let mut assignment = default_assignment(names.len());
    let mut log = Vec::new();
    let bind = [Phase::Forward, Phase::Dgrad, Phase::Wgrad];
    let latency = greedy_pass(measure, space, &mut assignment, 0, &bind, &mut log)?;
    Ok(finish(TuneMode::Training, None, names, &assignment, latency, log, seed, &clock))
}
