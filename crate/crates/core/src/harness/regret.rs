use crate::env::GroundTruth;
use crate::planners::SearchOutcome;

/// Instantaneous root regret `Q(s0, a*) - Q(s0, a_t)` for each root action
/// in `root_actions`, measured with exact values at `root`.
pub fn regret_trace<E, I>(env: &E, root: &E::State, root_actions: I) -> Vec<f64>
where
    E: GroundTruth,
    I: IntoIterator<Item = usize>,
{
    let q = env.ground_truth_q(root);
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    root_actions.into_iter().map(|a| best - q[a]).collect()
}

/// Fills `outcome.regret_trace` from its explored leaves.
pub fn attach_regret<E: GroundTruth>(env: &E, outcome: &mut SearchOutcome<E::State>) {
    let root = outcome.tree.root().state.clone();
    let trace = regret_trace(env, &root, outcome.explored_root_actions());
    outcome.regret_trace = Some(trace);
}
