//! Sweeps over (planner, budget, maze seed, repetition) cells with CSV output,
//! resume support and a JSON summary.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{online_episode, DEFAULT_STEP_CAP};
use super::HarnessError;
use crate::env::{Maze, DEFAULT_HORIZON};
use crate::oracles::{CorruptedPredictor, FixedSigmaQuery, GtSigmaQuery, PerturbedSigma, QueryProvider};
use crate::planners::PlannerConfig;
use crate::seeding::derive_seed;

/// Cells computed between two CSV flushes.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// Gaussian with the predictor's exact absolute error as its std.
    #[default]
    GtSigma,
    /// Gaussian with the same std for every state-action pair.
    FixedSigma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSpec {
    pub kind: OracleKind,
    pub error_scale: f64,
    /// Std of the fixed-sigma provider.
    pub sigma: f64,
    /// Percent perturbation of every std, in `[0, 100]`.
    pub rho: f64,
    pub seed: u64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec {
            kind: OracleKind::GtSigma,
            error_scale: 0.3,
            sigma: 1.0,
            rho: 0.0,
            seed: 0,
        }
    }
}

pub type MazeOracle = Box<dyn QueryProvider<Maze> + Send + Sync>;

impl OracleSpec {
    /// Provider for the maze generated from `env_seed`. The predictor's errors
    /// depend only on the oracle seed and the maze, so every planner in a
    /// sweep sees the same predictions.
    pub fn build(&self, env_seed: u64) -> Result<MazeOracle, HarnessError> {
        let seed = derive_seed(&[self.seed, env_seed]);
        let predictor = CorruptedPredictor::new(self.error_scale, seed)?;
        let base: MazeOracle = match self.kind {
            OracleKind::GtSigma => Box::new(GtSigmaQuery { predictor }),
            OracleKind::FixedSigma => Box::new(FixedSigmaQuery::new(predictor, self.sigma)?),
        };
        if self.rho == 0.0 {
            Ok(base)
        } else {
            let noise_seed = derive_seed(&[seed, 0x5157]);
            Ok(Box::new(PerturbedSigma::new(base, self.rho, noise_seed)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSet {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl SeedSet {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSet::List(v) => v.clone(),
            SeedSet::Range { start, count } => (*start..start + count).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub env_seeds: SeedSet,
    #[serde(default = "default_side")]
    pub width: usize,
    #[serde(default = "default_side")]
    pub height: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub budgets: Vec<usize>,
    #[serde(default = "default_step_cap")]
    pub step_cap: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Record wall-clock times. Off by default so that reruns produce
    /// byte-identical files.
    #[serde(default)]
    pub timing: bool,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_side() -> usize {
    15
}
fn default_horizon() -> usize {
    DEFAULT_HORIZON
}
fn default_step_cap() -> usize {
    DEFAULT_STEP_CAP
}
fn default_repetitions() -> usize {
    1
}

/// A `[[planner]]` table: planner config keys plus an optional label and
/// oracle override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "toml::Table")]
pub struct PlannerEntry {
    /// Label in the output; defaults to the algorithm name.
    pub name: Option<String>,
    /// Overrides the experiment-wide oracle for this planner.
    pub oracle: Option<OracleSpec>,
    #[serde(flatten)]
    pub config: PlannerConfig,
}

impl TryFrom<toml::Table> for PlannerEntry {
    type Error = String;

    // serde's flatten cannot reject unknown keys, so split the table by hand
    fn try_from(mut table: toml::Table) -> Result<Self, Self::Error> {
        let name = match table.remove("name") {
            Some(toml::Value::String(s)) => Some(s),
            Some(other) => return Err(format!("planner name must be a string, got {other}")),
            None => None,
        };
        let oracle = table
            .remove("oracle")
            .map(|v| v.try_into::<OracleSpec>())
            .transpose()
            .map_err(|e| e.to_string())?;
        let config = toml::Value::Table(table)
            .try_into::<PlannerConfig>()
            .map_err(|e| e.to_string())?;
        Ok(PlannerEntry { name, oracle, config })
    }
}

impl PlannerEntry {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.config.algorithm.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(rename = "planner")]
    pub planners: Vec<PlannerEntry>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| HarnessError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Spec(m));
        if self.planners.is_empty() {
            return bad("at least one [[planner]] is required".into());
        }
        if self.experiment.budgets.is_empty() || self.experiment.budgets.contains(&0) {
            return bad("budgets must be a nonempty list of positive counts".into());
        }
        if self.experiment.env_seeds.seeds().is_empty() {
            return bad("env_seeds is empty".into());
        }
        if self.experiment.repetitions == 0 {
            return bad("repetitions must be positive".into());
        }
        let mut labels = HashSet::new();
        for p in &self.planners {
            if !labels.insert(p.label()) {
                return bad(format!("duplicate planner label `{}`", p.label()));
            }
            p.config.validate()?;
        }
        Ok(())
    }

    /// Cells in their canonical order: planner, budget, maze seed, repetition.
    pub fn cells(&self) -> Vec<Cell> {
        let seeds = self.experiment.env_seeds.seeds();
        let mut cells = Vec::new();
        for (planner, _) in self.planners.iter().enumerate() {
            for &budget in &self.experiment.budgets {
                for &env_seed in &seeds {
                    for rep in 0..self.experiment.repetitions {
                        cells.push(Cell {
                            planner,
                            budget,
                            env_seed,
                            rep,
                        });
                    }
                }
            }
        }
        cells
    }

    /// Runs one cell: a full online episode on its maze.
    pub fn run_cell(&self, cell: &Cell) -> Result<ResultRecord, HarnessError> {
        let x = &self.experiment;
        let entry = &self.planners[cell.planner];
        let maze = Maze::generate(cell.env_seed, x.width, x.height)?.with_horizon(x.horizon);
        let oracle = entry.oracle.as_ref().unwrap_or(&self.oracle).build(cell.env_seed)?;
        let key = [x.seed, cell.env_seed, cell.planner as u64, cell.rep as u64];
        let cfg = PlannerConfig {
            budget: cell.budget,
            seed: derive_seed(&[derive_seed(&key), entry.config.seed]),
            ..entry.config.clone()
        };
        let started = Instant::now();
        let episode = online_episode(&maze, &oracle, &cfg, x.step_cap, derive_seed(&key))?;
        let wall_ms = if x.timing {
            started.elapsed().as_millis() as u64
        } else {
            0
        };
        Ok(ResultRecord {
            planner: entry.label(),
            budget: cell.budget,
            env_seed: cell.env_seed,
            rep: cell.rep,
            solved: episode.solved,
            steps: episode.steps_taken,
            mean_regret: episode.mean_regret,
            wall_ms,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub planner: usize,
    pub budget: usize,
    pub env_seed: u64,
    pub rep: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub planner: String,
    pub budget: usize,
    pub env_seed: u64,
    pub rep: usize,
    pub solved: bool,
    pub steps: usize,
    pub mean_regret: f64,
    pub wall_ms: u64,
}

impl ResultRecord {
    fn key(&self) -> (String, usize, u64, usize) {
        (self.planner.clone(), self.budget, self.env_seed, self.rep)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub planner: String,
    pub budget: usize,
    pub episodes: usize,
    pub success_rate: f64,
    pub success_stderr: f64,
    pub mean_steps: f64,
    pub mean_regret: f64,
    pub regret_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub new_rows: usize,
    pub total_rows: usize,
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub cells: Vec<CellSummary>,
}

/// Path of the JSON summary written next to `csv`.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

pub fn read_records(path: &Path) -> Result<Vec<ResultRecord>, HarnessError> {
    if !path.exists() || std::fs::metadata(path)?.len() == 0 {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<Result<Vec<ResultRecord>, _>>()?)
}

/// Runs every cell of `spec` not already present in `output`, appending rows
/// in canonical cell order, then rewrites the summary.
///
/// Rows depend only on the spec, never on `workers` or on scheduling.
pub fn run_experiment(spec: &ExperimentSpec, output: &Path, workers: usize) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    // fail on an unwritable path before doing any work
    OpenOptions::new().create(true).append(true).open(output)?;
    let existing = read_records(output)?;
    let done: HashSet<_> = existing.iter().map(ResultRecord::key).collect();
    let pending: Vec<Cell> = spec
        .cells()
        .into_iter()
        .filter(|c| {
            let label = spec.planners[c.planner].label();
            !done.contains(&(label, c.budget, c.env_seed, c.rep))
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Spec(e.to_string()))?;
    let mut write_header = existing.is_empty() && std::fs::metadata(output)?.len() == 0;
    for chunk in pending.chunks(CHUNK) {
        let rows = pool.install(|| {
            chunk
                .par_iter()
                .map(|c| spec.run_cell(c))
                .collect::<Result<Vec<_>, _>>()
        })?;
        let file = OpenOptions::new().append(true).open(output)?;
        let mut writer = csv::WriterBuilder::new().has_headers(write_header).from_writer(file);
        for row in &rows {
            writer.serialize(row)?;
        }
        writer.flush()?;
        write_header = false;
    }

    let records = read_records(output)?;
    let cells = summarize(spec, &records);
    let summary = summary_path(output);
    let report = ExperimentReport {
        name: spec.experiment.name.clone(),
        new_rows: pending.len(),
        total_rows: records.len(),
        csv: output.to_path_buf(),
        summary: summary.clone(),
        cells,
    };
    serde_json::to_writer_pretty(File::create(&summary)?, &report)?;
    Ok(report)
}

/// Mean and standard error per (planner, budget), in spec order.
pub fn summarize(spec: &ExperimentSpec, records: &[ResultRecord]) -> Vec<CellSummary> {
    let mut out = Vec::new();
    for entry in &spec.planners {
        let label = entry.label();
        for &budget in &spec.experiment.budgets {
            let rows: Vec<&ResultRecord> = records
                .iter()
                .filter(|r| r.planner == label && r.budget == budget)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let solved: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r.solved))).collect();
            let regret: Vec<f64> = rows.iter().map(|r| r.mean_regret).collect();
            let (success_rate, success_stderr) = mean_stderr(&solved);
            let (mean_regret, regret_stderr) = mean_stderr(&regret);
            out.push(CellSummary {
                planner: label.clone(),
                budget,
                episodes: rows.len(),
                success_rate,
                success_stderr,
                mean_steps: rows.iter().map(|r| r.steps as f64).sum::<f64>() / rows.len() as f64,
                mean_regret,
                regret_stderr,
            });
        }
    }
    out
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
