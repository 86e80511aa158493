//! Parameter sweeps over structure, method, N, p, b and seed.
//!
//! Each combination builds a fresh network, runs the matching protocol and
//! records one [`ResultRow`]. Combinations are independent, so they run on a
//! rayon pool; the output order is fixed by sorting the combinations before
//! dispatch, which makes the CSV independent of the thread count.

mod csv;
mod plot;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::TensorNetworkLayer;
use crate::norm::Method;
use crate::renorm::{renormalize, RenormConfig, Status, StepCounts};
use crate::renorm::{DEFAULT_MAX_STEPS, DEFAULT_RANGE_HI, DEFAULT_RANGE_LO};
use crate::seed::mix_seed;
use crate::tensor::InitParams;

pub use self::csv::{read_csv, read_csv_str, write_csv, write_csv_string, CSV_HEADER};
pub use self::plot::{plot_steps, render_steps_svg, Axis, SeriesKey};

/// Default per-node memory cap, in tensor entries (128 MiB of `f64`).
pub const DEFAULT_NODE_MEMORY_CAP: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SweepStructure {
    #[serde(rename = "TT")]
    Tt,
    #[serde(rename = "TTM")]
    Ttm,
}

impl SweepStructure {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepStructure::Tt => "TT",
            SweepStructure::Ttm => "TTM",
        }
    }

    /// Largest node of an `n`-node layer, in entries.
    pub fn max_node_entries(self, n: usize, p: usize, b: usize) -> u128 {
        let phys = match self {
            SweepStructure::Tt => p as u128,
            SweepStructure::Ttm => (p as u128) * (p as u128),
        };
        let bonds = match n {
            1 => 1,
            2 => b as u128,
            _ => (b as u128) * (b as u128),
        };
        phys * bonds
    }

    pub fn build(
        self,
        n: usize,
        p: usize,
        b: usize,
        init: &InitParams,
    ) -> Result<TensorNetworkLayer> {
        match self {
            SweepStructure::Tt => TensorNetworkLayer::build_tt(n, p, b, init),
            SweepStructure::Ttm => TensorNetworkLayer::build_ttm(n, p, p, b, init),
        }
    }
}

impl fmt::Display for SweepStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "").as_str() {
            "TT" => Ok(SweepStructure::Tt),
            "TTM" => Ok(SweepStructure::Ttm),
            _ => Err(Error::InvalidArgument(format!(
                "unknown sweep structure {s:?}, expected TT or TTM"
            ))),
        }
    }
}

/// How the normalization target is chosen for each combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetRule {
    /// `p^N`.
    #[default]
    Auto,
    Fixed(f64),
}

impl TargetRule {
    pub fn target(self, n: usize, p: usize) -> f64 {
        match self {
            TargetRule::Auto => (p as f64).powi(n as i32),
            TargetRule::Fixed(f) => f,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub structures: Vec<SweepStructure>,
    pub methods: Vec<Method>,
    pub nodes: Vec<usize>,
    pub phys: Vec<usize>,
    pub bond: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_mean")]
    pub mean: f64,
    #[serde(default = "default_std")]
    pub std: f64,
    /// Absolute-value init for Frobenius runs.
    #[serde(default)]
    pub positive_frobenius: bool,
    /// Absolute-value init for linear runs. The linear norm is only a norm on
    /// non-negative tensors, hence the default.
    #[serde(default = "default_true")]
    pub positive_linear: bool,
    #[serde(default)]
    pub target: TargetRule,
    #[serde(default = "default_range_lo")]
    pub range_lo: f64,
    #[serde(default = "default_range_hi")]
    pub range_hi: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_node_memory_cap")]
    pub node_memory_cap: usize,
    /// Fill `wall_ms`. Off by default so identical specs give identical bytes.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_mean() -> f64 {
    1.0
}
fn default_std() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_range_lo() -> f64 {
    DEFAULT_RANGE_LO
}
fn default_range_hi() -> f64 {
    DEFAULT_RANGE_HI
}
fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}
fn default_node_memory_cap() -> usize {
    DEFAULT_NODE_MEMORY_CAP
}

impl SweepSpec {
    /// A spec with the given grid and every other field at its default.
    pub fn new(
        structures: Vec<SweepStructure>,
        methods: Vec<Method>,
        nodes: Vec<usize>,
        phys: Vec<usize>,
        bond: Vec<usize>,
        seeds: Vec<u64>,
    ) -> Self {
        SweepSpec {
            structures,
            methods,
            nodes,
            phys,
            bond,
            seeds,
            mean: default_mean(),
            std: default_std(),
            positive_frobenius: false,
            positive_linear: true,
            target: TargetRule::Auto,
            range_lo: DEFAULT_RANGE_LO,
            range_hi: DEFAULT_RANGE_HI,
            max_steps: DEFAULT_MAX_STEPS,
            node_memory_cap: DEFAULT_NODE_MEMORY_CAP,
            record_timing: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SweepSpec =
            serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep spec always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("structures", self.structures.is_empty()),
            ("methods", self.methods.is_empty()),
            ("nodes", self.nodes.is_empty()),
            ("phys", self.phys.is_empty()),
            ("bond", self.bond.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        if let Some((name, _)) = lists.iter().find(|(_, empty)| *empty) {
            return Err(Error::InvalidArgument(format!(
                "sweep {name} list is empty"
            )));
        }
        for (name, values) in [
            ("nodes", &self.nodes),
            ("phys", &self.phys),
            ("bond", &self.bond),
        ] {
            if values.contains(&0) {
                return Err(Error::InvalidArgument(format!("sweep {name} contains 0")));
            }
        }
        if !self.mean.is_finite() || !self.std.is_finite() || self.std < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "init needs a finite mean and a finite non-negative std, got ({}, {})",
                self.mean, self.std
            )));
        }
        if let TargetRule::Fixed(f) = self.target {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "fixed target {f} is not positive"
                )));
            }
        }
        RenormConfig::new(Method::Frobenius, 1.0)
            .with_range(self.range_lo, self.range_hi)
            .with_max_steps(self.max_steps)
            .validate()
    }

    /// Every distinct combination, in canonical order.
    pub fn combinations(&self) -> Vec<Combination> {
        let mut set = BTreeSet::new();
        for &structure in &self.structures {
            for &method in &self.methods {
                for &nodes in &self.nodes {
                    for &phys in &self.phys {
                        for &bond in &self.bond {
                            for &seed in &self.seeds {
                                set.insert(Combination {
                                    structure,
                                    method,
                                    nodes,
                                    phys,
                                    bond,
                                    seed,
                                });
                            }
                        }
                    }
                }
            }
        }
        set.into_iter().collect()
    }

    pub fn init_for(&self, method: Method, seed: u64) -> InitParams {
        let positive = match method {
            Method::Frobenius => self.positive_frobenius,
            Method::Linear => self.positive_linear,
        };
        InitParams::gaussian(self.mean, self.std, seed).with_positive(positive)
    }
}

/// One point of the sweep grid. The derived ordering is the canonical row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Combination {
    pub structure: SweepStructure,
    pub method: Method,
    pub nodes: usize,
    pub phys: usize,
    pub bond: usize,
    pub seed: u64,
}

impl Combination {
    /// Seed of the protocol's random rescue, decorrelated across combinations.
    pub fn xi_seed(&self) -> u64 {
        mix_seed(&[
            self.seed,
            self.structure as u64,
            self.method as u64,
            self.nodes as u64,
            self.phys as u64,
            self.bond as u64,
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowStatus {
    Success,
    Failed,
    /// Not run because a node would exceed the memory cap.
    Skipped,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Success => "Success",
            RowStatus::Failed => "Failed",
            RowStatus::Skipped => "Skipped",
        }
    }
}

impl FromStr for RowStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Success" => Ok(RowStatus::Success),
            "Failed" => Ok(RowStatus::Failed),
            "Skipped" => Ok(RowStatus::Skipped),
            _ => Err(Error::Malformed(format!("unknown row status {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub structure: SweepStructure,
    pub method: Method,
    pub nodes: usize,
    pub phys: usize,
    pub bond: usize,
    pub seed: u64,
    pub status: RowStatus,
    pub steps_total: usize,
    pub steps_by_cause: StepCounts,
    /// Natural log of the method norm after the run.
    pub final_norm_log: f64,
    /// Sum of the natural logs of every per-node factor applied.
    pub cumulative_log_scale: f64,
    pub wall_ms: f64,
}

impl ResultRow {
    pub fn combination(&self) -> Combination {
        Combination {
            structure: self.structure,
            method: self.method,
            nodes: self.nodes,
            phys: self.phys,
            bond: self.bond,
            seed: self.seed,
        }
    }

    fn empty(c: &Combination, status: RowStatus) -> Self {
        ResultRow {
            structure: c.structure,
            method: c.method,
            nodes: c.nodes,
            phys: c.phys,
            bond: c.bond,
            seed: c.seed,
            status,
            steps_total: 0,
            steps_by_cause: StepCounts::default(),
            final_norm_log: 0.0,
            cumulative_log_scale: 0.0,
            wall_ms: 0.0,
        }
    }
}

/// The freshly built network and protocol configuration of a combination.
pub fn prepare_combination(
    spec: &SweepSpec,
    c: &Combination,
) -> Result<(TensorNetworkLayer, RenormConfig)> {
    let init = spec.init_for(c.method, c.seed);
    let cfg = RenormConfig::new(c.method, spec.target.target(c.nodes, c.phys))
        .with_range(spec.range_lo, spec.range_hi)
        .with_max_steps(spec.max_steps)
        .with_xi_seed(c.xi_seed());
    let tn = c.structure.build(c.nodes, c.phys, c.bond, &init)?;
    Ok((tn, cfg))
}

/// Builds, normalizes and records a single combination.
pub fn run_combination(spec: &SweepSpec, c: &Combination) -> ResultRow {
    let entries = c.structure.max_node_entries(c.nodes, c.phys, c.bond);
    if entries > spec.node_memory_cap as u128 {
        return ResultRow::empty(c, RowStatus::Skipped);
    }
    let start = Instant::now();
    let outcome = prepare_combination(spec, c).and_then(|(mut tn, cfg)| renormalize(&mut tn, &cfg));
    let mut row = match outcome {
        Ok(report) => ResultRow {
            status: match report.status {
                Status::Success => RowStatus::Success,
                Status::Failed => RowStatus::Failed,
            },
            steps_total: report.steps_total,
            steps_by_cause: report.steps_by_cause,
            final_norm_log: report.final_norm.ln(),
            cumulative_log_scale: report.cumulative_log_scale,
            ..ResultRow::empty(c, RowStatus::Failed)
        },
        // A spec that passed validation only fails here on an unrepresentable
        // target; record it rather than abort the sweep.
        Err(_) => ResultRow::empty(c, RowStatus::Failed),
    };
    if spec.record_timing {
        row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    row
}

/// Runs every combination on the global rayon pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    Ok(spec
        .combinations()
        .par_iter()
        .map(|c| run_combination(spec, c))
        .collect())
}

/// Runs every combination on a dedicated pool of `threads` workers.
pub fn run_sweep_with_threads(spec: &SweepSpec, threads: usize) -> Result<Vec<ResultRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep(spec))
}

/// Median of a non-empty sample; the mean of the middle pair for even sizes.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}
