use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bayes_plan::env::{DecisionProcess, Maze, NeedlePrior, DEFAULT_HORIZON};
use bayes_plan::harness::{
    attach_regret, bound_check, online_episode, run_experiment, BoundSpec, ExperimentSpec, LeafSelector, MazeOracle,
    OracleKind, OracleSpec, DEFAULT_STEP_CAP,
};
use bayes_plan::planners::{commit, run_search, Algorithm, Commitment, PlannerConfig, SearchOutcome};
use bayes_plan::posterior::Approximation;
use bayes_plan::seeding::rng_for;

#[derive(Parser)]
#[command(name = "bayes-plan", version, about = "Bayesian online planning with Thompson sampling and Bayes-UCB tree search")]
struct Cli {
    /// Seed for every random choice; required by the stochastic commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for experiments.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one search from a maze's start and print the root posteriors.
    Plan(PlanArgs),
    /// Play one online episode on a maze.
    Episode {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
        step_cap: usize,
    },
    /// Run a sweep described by a TOML spec and write CSV + JSON summary.
    Experiment {
        spec: PathBuf,
        /// Output CSV; defaults to the spec's `output` or `<spec>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record wall-clock times (output is then no longer reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Print a generated maze in text form.
    GenMaze {
        #[arg(long, default_value_t = 15)]
        width: usize,
        #[arg(long, default_value_t = 15)]
        height: usize,
    },
    /// Compare empirical needle-tree regret with the Thompson-sampling bound.
    BoundCheck {
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 2)]
        branching: usize,
        /// `uniform` or `concentrated:<edge>:<mass>`.
        #[arg(long, default_value = "uniform")]
        prior: String,
        /// thompson, fixed-order, random-order or adversarial.
        #[arg(long, default_value = "thompson")]
        selector: String,
        #[arg(long, default_value_t = 10_000)]
        repetitions: usize,
        #[arg(long)]
        json: bool,
    },
    /// Run one search and dump the resulting tree.
    DumpTree {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, default_value = "json")]
        format: String,
    },
}

#[derive(Args, Clone)]
struct PlanArgs {
    /// Maze generation seed.
    #[arg(long, conflicts_with = "maze_file")]
    maze_seed: Option<u64>,
    /// Maze in text form (`#` wall, `.` floor, `S` start, `G` goal).
    #[arg(long)]
    maze_file: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    width: usize,
    #[arg(long, default_value_t = 15)]
    height: usize,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: usize,

    #[arg(long, default_value = "bts")]
    algorithm: String,
    #[arg(long, default_value_t = 50)]
    budget: usize,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    puct_c: Option<f64>,
    #[arg(long)]
    softmax_temp: Option<f64>,
    /// `mcts`, `quantile:<alpha>` or `softmax:<temp>`.
    #[arg(long, default_value = "mcts")]
    commitment: String,
    /// Re-seed the planner identically at every step.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    bins: Option<usize>,
    /// Use tabulated CDFs for quantiles and samples instead of Gaussians.
    #[arg(long)]
    exact: bool,

    /// `gt-sigma` or `fixed-sigma`.
    #[arg(long, default_value = "gt-sigma")]
    oracle: String,
    #[arg(long, default_value_t = 0.05)]
    error_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Percent perturbation of the oracle stds.
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    oracle_seed: u64,
    #[arg(long)]
    json: bool,
}

impl PlanArgs {
    fn maze(&self, seed: u64) -> Result<Maze> {
        let maze = match &self.maze_file {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Maze::from_text(&text)?
            }
            None => Maze::generate(self.maze_seed.unwrap_or(seed), self.width, self.height)?,
        };
        Ok(maze.with_horizon(self.horizon))
    }

    fn maze_seed(&self, seed: u64) -> u64 {
        self.maze_seed.unwrap_or(seed)
    }

    fn config(&self, seed: u64) -> Result<PlannerConfig> {
        let defaults = PlannerConfig::default();
        let cfg = PlannerConfig {
            algorithm: self.algorithm.parse::<Algorithm>()?,
            budget: self.budget,
            alpha0: self.alpha0.unwrap_or(defaults.alpha0),
            beta: self.beta,
            puct_c: self.puct_c.unwrap_or(defaults.puct_c),
            softmax_temp: self.softmax_temp.unwrap_or(defaults.softmax_temp),
            commitment: self.commitment.parse::<Commitment>()?,
            seed,
            deterministic_mode: self.deterministic,
            bins: self.bins.unwrap_or(defaults.bins),
            approximation: if self.exact {
                Approximation::Exact
            } else {
                Approximation::MomentMatched
            },
            ..defaults
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn oracle(&self, seed: u64) -> Result<MazeOracle> {
        let kind = match self.oracle.replace('-', "_").as_str() {
            "gt_sigma" => OracleKind::GtSigma,
            "fixed_sigma" => OracleKind::FixedSigma,
            other => bail!("unknown oracle `{other}`"),
        };
        let spec = OracleSpec {
            kind,
            error_scale: self.error_scale,
            sigma: self.sigma,
            rho: self.rho,
            seed: self.oracle_seed,
        };
        Ok(spec.build(self.maze_seed(seed))?)
    }

    fn search(&self, seed: u64) -> Result<(Maze, SearchOutcome<bayes_plan::env::Cell>, usize)> {
        let maze = self.maze(seed)?;
        let oracle = self.oracle(seed)?;
        let cfg = self.config(seed)?;
        let mut rng = rng_for(&[seed]);
        let mut outcome = run_search(&maze, maze.root(), &oracle, &cfg, &mut rng)?;
        attach_regret(&maze, &mut outcome);
        let action = commit(&outcome, cfg.commitment, &mut rng);
        Ok((maze, outcome, action))
    }
}

fn need_seed(seed: Option<u64>, command: &str) -> Result<u64> {
    seed.with_context(|| format!("`{command}` needs --seed"))
}

fn parse_prior(s: &str) -> Result<NeedlePrior> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["uniform"] => Ok(NeedlePrior::Uniform),
        ["concentrated", edge, mass] => Ok(NeedlePrior::Concentrated {
            edge: edge.parse()?,
            mass: mass.parse()?,
        }),
        _ => bail!("unknown prior `{s}`"),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Plan(args) => {
            let seed = need_seed(cli.seed, "plan")?;
            let (maze, outcome, action) = args.search(seed)?;
            if args.json {
                let out = serde_json::json!({
                    "state": maze.root(),
                    "root_posteriors": outcome.root_posteriors.iter().map(|p| {
                        let (m, v) = p.mean_var();
                        serde_json::json!({"mean": m, "std": v.sqrt()})
                    }).collect::<Vec<_>>(),
                    "root_backed_values": outcome.root_backed_values,
                    "stats": outcome.stats,
                    "regret_trace": outcome.regret_trace,
                    "action": action,
                });
                println!("{}", serde_json::to_string_pretty(&out)?);
            } else {
                println!("state {:?}  nodes {}  explored {}", maze.root(), outcome.stats.nodes, outcome.explored_leaves.len());
                println!("{:<6} {:>10} {:>10} {:>10}", "action", "mean", "std", "branch");
                for (a, p) in outcome.root_posteriors.iter().enumerate() {
                    let (m, v) = p.mean_var();
                    let name = bayes_plan::env::Action::ALL[a];
                    println!("{:<6} {:>10.4} {:>10.4} {:>10.4}", name.to_string(), m, v.sqrt(), outcome.root_backed_values[a]);
                }
                println!("commit {}", bayes_plan::env::Action::ALL[action]);
            }
        }
        Command::Episode { plan, step_cap } => {
            let seed = need_seed(cli.seed, "episode")?;
            let maze = plan.maze(seed)?;
            let oracle = plan.oracle(seed)?;
            let cfg = plan.config(seed)?;
            let result = online_episode(&maze, &oracle, &cfg, step_cap, seed)?;
            if plan.json {
                println!("{}", serde_json::to_string_pretty(&result)?);
            } else {
                println!(
                    "solved {}  steps {}  reward {}  mean_regret {:.4}",
                    result.solved, result.steps_taken, result.total_reward, result.mean_regret
                );
            }
        }
        Command::Experiment { spec, out, timing } => {
            let mut parsed = ExperimentSpec::load(&spec)?;
            if let Some(seed) = cli.seed {
                parsed.experiment.seed = seed;
            }
            parsed.experiment.timing |= timing;
            let output = out
                .or_else(|| parsed.experiment.output.clone())
                .unwrap_or_else(|| spec.with_extension("csv"));
            let report = run_experiment(&parsed, &output, cli.workers)?;
            eprintln!(
                "{}: {} new rows, {} total -> {}",
                report.name,
                report.new_rows,
                report.total_rows,
                report.csv.display()
            );
            for c in &report.cells {
                println!(
                    "{:<16} T={:<5} success {:.3} ± {:.3}  steps {:.1}  regret {:.4}",
                    c.planner, c.budget, c.success_rate, c.success_stderr, c.mean_steps, c.mean_regret
                );
            }
        }
        Command::GenMaze { width, height } => {
            let seed = need_seed(cli.seed, "gen-maze")?;
            print!("{}", Maze::generate(seed, width, height)?.to_text());
        }
        Command::BoundCheck {
            depth,
            branching,
            prior,
            selector,
            repetitions,
            json,
        } => {
            let seed = need_seed(cli.seed, "bound-check")?;
            let report = bound_check(&BoundSpec {
                depth,
                branching,
                prior: parse_prior(&prior)?,
                selector: selector.parse::<LeafSelector>()?,
                repetitions,
                seed,
            })?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("{report}");
            }
            if !report.pass {
                return Ok(ExitCode::from(2));
            }
        }
        Command::DumpTree { plan, format } => {
            let seed = need_seed(cli.seed, "dump-tree")?;
            let (_, outcome, _) = plan.search(seed)?;
            let dump = outcome.tree.dump();
            match format.as_str() {
                "json" => println!("{}", serde_json::to_string_pretty(&dump)?),
                "text" => print!("{}", dump.to_text()),
                other => bail!("unknown format `{other}`"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
