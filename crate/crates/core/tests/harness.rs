use bayes_plan::env::{DecisionProcess, Maze, NeedlePrior, NeedleTree};
use bayes_plan::harness::*;
use bayes_plan::oracles::{CorruptedPredictor, GtSigmaQuery};
use bayes_plan::planners::{Algorithm, PlannerConfig};
use bayes_plan::seeding::rng_for;

const SPEC: &str = r#"
[experiment]
name = "cardinality"
seed = 11
env_seeds = { start = 100, count = 10 }
width = 7
height = 7
budgets = [2, 4, 8]
step_cap = 25
repetitions = 2

[oracle]
error_scale = 0.2

[[planner]]
algorithm = "tsts"

[[planner]]
name = "puct-fixed"
algorithm = "puct"
oracle = { kind = "fixed_sigma", sigma = 1.0, error_scale = 0.2 }
"#;

fn spec() -> ExperimentSpec {
    ExperimentSpec::from_toml(SPEC).unwrap()
}

#[test]
fn experiment_writes_one_row_per_cell_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs.csv");
    let report = run_experiment(&spec(), &out, 2).unwrap();
    assert_eq!(report.new_rows, 120);
    assert_eq!(report.total_rows, 120);
    let rows = read_records(&out).unwrap();
    assert_eq!(rows.len(), 2 * 3 * 10 * 2);
    assert!(rows.iter().all(|r| r.steps <= 25 && r.wall_ms == 0));
    assert!(rows.iter().filter(|r| r.solved).all(|r| r.steps >= 1));
    let header = std::fs::read_to_string(&out).unwrap();
    assert!(header.starts_with("planner,budget,env_seed,rep,solved,steps,mean_regret,wall_ms\n"));
    assert!(summary_path(&out).exists());
    assert_eq!(report.cells.len(), 6);

    let before = std::fs::read(&out).unwrap();
    let again = run_experiment(&spec(), &out, 1).unwrap();
    assert_eq!(again.new_rows, 0);
    assert_eq!(std::fs::read(&out).unwrap(), before);
}

#[test]
fn interrupted_runs_resume_to_the_same_file() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full.csv");
    run_experiment(&spec(), &full, 1).unwrap();
    // keep the header and the first 37 rows, as if the run had been killed
    let text = std::fs::read_to_string(&full).unwrap();
    let partial: String = text.lines().take(38).map(|l| format!("{l}\n")).collect();
    let resumed = dir.path().join("resumed.csv");
    std::fs::write(&resumed, partial).unwrap();
    let report = run_experiment(&spec(), &resumed, 3).unwrap();
    assert_eq!(report.new_rows, 120 - 37);
    assert_eq!(std::fs::read(&resumed).unwrap(), std::fs::read(&full).unwrap());
}

#[test]
fn output_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    run_experiment(&spec(), &a, 1).unwrap();
    run_experiment(&spec(), &b, 4).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let cells = |p: &std::path::Path| {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(summary_path(p)).unwrap()).unwrap();
        v["cells"].to_string()
    };
    assert_eq!(cells(&a), cells(&b));
}

#[test]
fn unwritable_output_fails_before_any_work() {
    let err = run_experiment(&spec(), std::path::Path::new("/nonexistent-dir/x/out.csv"), 1).unwrap_err();
    assert!(matches!(err, HarnessError::Io(_)), "{err:?}");
}

#[test]
fn single_cell_spec() {
    let text = r#"
[experiment]
seed = 1
env_seeds = [5]
width = 5
height = 5
budgets = [4]
[oracle]
[[planner]]
algorithm = "bts"
"#;
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one.csv");
    let report = run_experiment(&ExperimentSpec::from_toml(text).unwrap(), &out, 1).unwrap();
    assert_eq!(report.total_rows, 1);
}

#[test]
fn bad_specs_are_rejected() {
    assert!(ExperimentSpec::from_toml(&SPEC.replace("budgets = [2, 4, 8]", "budgets = []")).is_err());
    assert!(ExperimentSpec::from_toml(&SPEC.replace("algorithm = \"tsts\"", "algorithm = \"tsts\"\nbogus = 1")).is_err());
    assert!(ExperimentSpec::from_toml(&SPEC.replace("algorithm = \"tsts\"", "algorithm = \"nope\"")).is_err());
}

#[test]
fn commitment_rules_parse() {
    let text = SPEC.replace("algorithm = \"tsts\"", "algorithm = \"bts\"\ncommitment = { quantile = 0.25 }");
    let spec = ExperimentSpec::from_toml(&text).unwrap();
    assert_eq!(spec.planners[0].config.commitment, bayes_plan::planners::Commitment::Quantile(0.25));
}

#[test]
fn random_order_exhaustive_search_pays_half_the_edges() {
    let n = NeedleTree::edge_count(4, 2);
    assert_eq!(n, 30);
    let mut rng = rng_for(&[21]);
    let reps = 10_000;
    let totals: Vec<f64> = (0..reps)
        .map(|_| {
            let t = NeedleTree::sample_with(&mut rng, 4, 2, &NeedlePrior::Uniform).unwrap();
            exploration_regret(&t, LeafSelector::RandomOrder, n, &mut rng).iter().sum()
        })
        .collect();
    let (mean, stderr) = mean_stderr(&totals);
    assert!((mean - n as f64 / 2.0).abs() <= 3.0 * stderr + 1e-9, "{mean} ± {stderr}");
}

#[test]
fn regret_trace_with_a_constant_gap() {
    let maze = Maze::from_text("S..G\n").unwrap();
    // Right is optimal; Left bumps and loses exactly one step
    let trace = regret_trace(&maze, &maze.root(), [2, 2, 3]);
    assert_eq!(trace, vec![1.0, 1.0, 0.0]);
}

#[test]
fn bound_check_reports() {
    let spec = |prior, selector| BoundSpec {
        depth: 3,
        branching: 2,
        prior,
        selector,
        repetitions: 2000,
        seed: 4,
    };
    let zero = bound_check(&spec(NeedlePrior::Concentrated { edge: 5, mass: 1.0 }, LeafSelector::Thompson)).unwrap();
    assert!(zero.pass);
    assert!(zero.rows.iter().all(|r| r.mean_regret == 0.0 && r.bound == 0.0));
    let uniform = bound_check(&spec(NeedlePrior::Uniform, LeafSelector::Thompson)).unwrap();
    assert!(uniform.pass, "{uniform}");
    assert_eq!(uniform.rows.len(), 14);
    let adversarial = bound_check(&spec(NeedlePrior::Concentrated { edge: 0, mass: 0.99 }, LeafSelector::Adversarial)).unwrap();
    assert!(!adversarial.pass);
    assert!(adversarial.to_string().trim_end().ends_with("FAIL"));
}

#[test]
fn solved_episodes_end_on_the_goal() {
    let oracle = GtSigmaQuery {
        predictor: CorruptedPredictor::new(0.05, 3).unwrap(),
    };
    for seed in 0..5 {
        let maze = Maze::generate(seed, 9, 9).unwrap();
        let cfg = PlannerConfig::new(Algorithm::Tsts, 20);
        let r = online_episode(&maze, &oracle, &cfg, 80, seed).unwrap();
        assert!(r.steps_taken <= 80);
        let mut s = maze.root();
        for &a in &r.committed_actions {
            s = maze.step(&s, a).0;
        }
        assert_eq!(r.solved, maze.is_terminal(&s));
        assert_eq!(r.total_reward, -(r.steps_taken as f64));
    }
}
