//! The discovered search tree, leaf expansion and max-backup.
//!
//! Nodes live in an arena and are addressed by [`NodeId`]. Node identity is
//! the path from the root, so two routes to the same environment state yield
//! two nodes. Every edge keeps both the posterior the oracle returned when it
//! was created (`query`) and its current backed-up posterior.

use serde::Serialize;
use thiserror::Error;

use crate::env::DecisionProcess;
use crate::oracles::{OracleError, QueryProvider};
use crate::planners::DngNodeStat;
use crate::posterior::{max_of_independent, PosteriorDist, PosteriorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("edge ({node}, {action}) already has an expanded child")]
    AlreadyExpanded { node: usize, action: usize },
    #[error("edge ({node}, {action}) leads to a terminal or horizon state")]
    NotExpandable { node: usize, action: usize },
    #[error("oracle returned {got} posteriors for {expected} actions")]
    OracleArity { expected: usize, got: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Leads to a non-terminal state that can be expanded.
    Open,
    /// Leads to a terminal state; its value is exactly the reward.
    Terminal,
    /// Leads to a state at the horizon; it keeps its oracle posterior.
    Horizon,
}

#[derive(Debug, Clone)]
pub struct EdgeStat {
    pub action: usize,
    pub reward: f64,
    pub kind: EdgeKind,
    /// Posterior returned by the oracle when the edge was created.
    pub query: PosteriorDist,
    posterior: PosteriorDist,
    table: PosteriorDist,
    moments: (f64, f64),
    pub child: Option<NodeId>,
    pub visit_count: u32,
    /// Best discovered branch value through this edge: rewards along the
    /// branch plus the oracle mean at its frontier edge.
    pub value: f64,
    pub dng: DngNodeStat,
}

impl EdgeStat {
    fn new(action: usize, reward: f64, kind: EdgeKind, query: PosteriorDist, bins: usize) -> Result<Self, TreeError> {
        let table = query.discretize(bins)?;
        let moments = query.mean_var();
        Ok(EdgeStat {
            action,
            reward,
            kind,
            posterior: query.clone(),
            query,
            table,
            moments,
            child: None,
            visit_count: 0,
            value: moments.0,
            dng: DngNodeStat::default(),
        })
    }

    pub fn posterior(&self) -> &PosteriorDist {
        &self.posterior
    }

    /// Cached `(mean, variance)` of the current posterior.
    pub fn moments(&self) -> (f64, f64) {
        self.moments
    }

    pub fn is_frontier(&self) -> bool {
        self.kind == EdgeKind::Open && self.child.is_none()
    }

    fn set_posterior(&mut self, posterior: PosteriorDist, bins: usize) -> Result<(), TreeError> {
        self.table = posterior.discretize(bins)?;
        self.moments = posterior.mean_var();
        self.posterior = posterior;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SearchNode<S> {
    pub state: S,
    pub depth: usize,
    pub edges: Vec<EdgeStat>,
    pub visit_count: u32,
    pub parent: Option<(NodeId, usize)>,
}

/// Where a forward pass through the tree ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Descent {
    /// An edge whose child is not yet known; expanding it reveals a leaf.
    Frontier { node: NodeId, action: usize, root_action: usize },
    /// An edge into a terminal or horizon state. Nothing new can be learned
    /// below it; the iteration still consumes budget.
    Dead { node: NodeId, action: usize, root_action: usize },
}

impl Descent {
    pub fn edge(&self) -> (NodeId, usize) {
        match *self {
            Descent::Frontier { node, action, .. } | Descent::Dead { node, action, .. } => (node, action),
        }
    }

    pub fn root_action(&self) -> usize {
        match *self {
            Descent::Frontier { root_action, .. } | Descent::Dead { root_action, .. } => root_action,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchTree<S> {
    nodes: Vec<SearchNode<S>>,
    horizon: usize,
    bins: usize,
    distributional: bool,
    /// Completed search iterations.
    pub iteration: usize,
}

impl<S: Clone> SearchTree<S> {
    /// Creates a tree holding only the expanded root. With `distributional`
    /// off, backups maintain scalar branch values only.
    pub fn new<E, P>(
        env: &E,
        root: S,
        oracle: &P,
        bins: usize,
        distributional: bool,
    ) -> Result<Self, TreeError>
    where
        E: DecisionProcess<State = S>,
        P: QueryProvider<E> + ?Sized,
    {
        let mut tree = SearchTree {
            nodes: Vec::new(),
            horizon: env.horizon(),
            bins,
            distributional,
            iteration: 0,
        };
        let node = tree.make_node(env, root, 0, None, oracle)?;
        tree.nodes.push(node);
        Ok(tree)
    }

    fn make_node<E, P>(
        &self,
        env: &E,
        state: S,
        depth: usize,
        parent: Option<(NodeId, usize)>,
        oracle: &P,
    ) -> Result<SearchNode<S>, TreeError>
    where
        E: DecisionProcess<State = S>,
        P: QueryProvider<E> + ?Sized,
    {
        let n = env.num_actions();
        let query = oracle.query(env, &state)?;
        if query.len() != n {
            return Err(TreeError::OracleArity {
                expected: n,
                got: query.len(),
            });
        }
        let edges = query
            .into_iter()
            .enumerate()
            .map(|(a, q)| {
                let (next, reward) = env.step(&state, a);
                if env.is_terminal(&next) {
                    EdgeStat::new(a, reward, EdgeKind::Terminal, PosteriorDist::point_mass(reward), self.bins)
                } else if depth + 1 >= self.horizon {
                    EdgeStat::new(a, reward, EdgeKind::Horizon, q, self.bins)
                } else {
                    EdgeStat::new(a, reward, EdgeKind::Open, q, self.bins)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SearchNode {
            state,
            depth,
            edges,
            visit_count: 0,
            parent,
        })
    }

    pub fn root(&self) -> &SearchNode<S> {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &SearchNode<S> {
        &self.nodes[id.0]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut SearchNode<S> {
        &mut self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[SearchNode<S>] {
        &self.nodes
    }

    /// Number of known (expanded) states, root included.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn is_distributional(&self) -> bool {
        self.distributional
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Adds the child of `(node, action)` to the known set, querying the
    /// oracle for its edge posteriors.
    pub fn expand<E, P>(&mut self, node: NodeId, action: usize, env: &E, oracle: &P) -> Result<NodeId, TreeError>
    where
        E: DecisionProcess<State = S>,
        P: QueryProvider<E> + ?Sized,
    {
        let parent = &self.nodes[node.0];
        let edge = &parent.edges[action];
        if edge.child.is_some() {
            return Err(TreeError::AlreadyExpanded { node: node.0, action });
        }
        if edge.kind != EdgeKind::Open {
            return Err(TreeError::NotExpandable { node: node.0, action });
        }
        let (next, _) = env.step(&parent.state, action);
        let depth = parent.depth + 1;
        let child = self.make_node(env, next, depth, Some((node, action)), oracle)?;
        let id = NodeId(self.nodes.len());
        self.nodes.push(child);
        self.nodes[node.0].edges[action].child = Some(id);
        Ok(id)
    }

    /// Max-backup from `node` to the root: every ancestor edge `(s, a)` gets
    /// `r(s, a) + max_a' Q(s', a')` over the edges of its child `s'`.
    pub fn backup_path(&mut self, node: NodeId) -> Result<(), TreeError> {
        let mut current = node;
        while let Some((parent, action)) = self.nodes[current.0].parent {
            self.refresh_edge(parent, action)?;
            current = parent;
        }
        Ok(())
    }

    fn refresh_edge(&mut self, parent: NodeId, action: usize) -> Result<(), TreeError> {
        let child = self.nodes[parent.0].edges[action].child.expect("backup through an unexpanded edge");
        let reward = self.nodes[parent.0].edges[action].reward;
        let children = &self.nodes[child.0].edges;
        let best = children.iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max);
        let posterior = if self.distributional {
            Some(max_of_independent(children.iter().map(|e| &e.table), self.bins)?.shift(reward))
        } else {
            None
        };
        let edge = &mut self.nodes[parent.0].edges[action];
        edge.value = reward + best;
        if let Some(p) = posterior {
            edge.set_posterior(p, self.bins)?;
        }
        Ok(())
    }

    /// Recomputes the backed-up posterior of `(parent, action)` from its
    /// child's current edges without storing it.
    pub fn recomputed_posterior(&self, parent: NodeId, action: usize) -> Option<PosteriorDist> {
        let edge = &self.nodes[parent.0].edges[action];
        let child = edge.child?;
        let children = &self.nodes[child.0].edges;
        max_of_independent(children.iter().map(|e| &e.table), self.bins)
            .ok()
            .map(|p| p.shift(edge.reward))
    }

    /// Walks from the root, choosing an edge with `select` at every known
    /// node and counting the visit before the choice is made.
    pub fn descend<R: ?Sized, F>(&mut self, rng: &mut R, mut select: F) -> Descent
    where
        F: FnMut(&SearchNode<S>, &mut R) -> usize,
    {
        let mut node = NodeId::ROOT;
        let mut root_action = None;
        loop {
            let n = &mut self.nodes[node.0];
            n.visit_count += 1;
            let action = select(n, rng);
            let root_action = *root_action.get_or_insert(action);
            let edge = &mut self.nodes[node.0].edges[action];
            edge.visit_count += 1;
            match (edge.kind, edge.child) {
                (EdgeKind::Open, Some(child)) => node = child,
                (EdgeKind::Open, None) => return Descent::Frontier { node, action, root_action },
                _ => return Descent::Dead { node, action, root_action },
            }
        }
    }

    /// Like [`SearchTree::descend`] but with the root action fixed.
    pub fn descend_from_root_action<R: ?Sized, F>(&mut self, root_action: usize, rng: &mut R, mut select: F) -> Descent
    where
        F: FnMut(&SearchNode<S>, &mut R) -> usize,
    {
        let mut first = true;
        self.descend(rng, |n, r| {
            if std::mem::take(&mut first) {
                root_action
            } else {
                select(n, r)
            }
        })
    }

    /// Path of edges from the root to `node`, root first.
    pub fn path_to(&self, node: NodeId) -> Vec<(NodeId, usize)> {
        let mut path = Vec::new();
        let mut current = node;
        while let Some((p, a)) = self.nodes[current.0].parent {
            path.push((p, a));
            current = p;
        }
        path.reverse();
        path
    }

    /// Value of the best discovered branch through each root action, scoring
    /// every frontier edge (and every terminal or horizon edge) with
    /// `leaf_score` and adding the rewards above it.
    pub fn root_branch_values<F>(&self, leaf_score: F) -> Vec<f64>
    where
        F: Fn(&EdgeStat) -> f64 + Copy,
    {
        (0..self.root().edges.len())
            .map(|a| self.branch_value(NodeId::ROOT, a, leaf_score))
            .collect()
    }

    fn branch_value<F>(&self, node: NodeId, action: usize, leaf_score: F) -> f64
    where
        F: Fn(&EdgeStat) -> f64 + Copy,
    {
        let edge = &self.nodes[node.0].edges[action];
        match edge.child {
            None => leaf_score(edge),
            Some(child) => {
                let best = (0..self.nodes[child.0].edges.len())
                    .map(|a| self.branch_value(child, a, leaf_score))
                    .fold(f64::NEG_INFINITY, f64::max);
                edge.reward + best
            }
        }
    }
}

/// Serializable snapshot of a tree for offline analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeDump {
    pub horizon: usize,
    pub iteration: usize,
    pub nodes: Vec<NodeDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeDump {
    pub id: usize,
    pub state: String,
    pub depth: usize,
    pub parent: Option<(usize, usize)>,
    pub visit_count: u32,
    pub edges: Vec<EdgeDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeDump {
    pub action: usize,
    pub kind: EdgeKind,
    pub reward: f64,
    pub query_mean: f64,
    pub query_std: f64,
    pub posterior_mean: f64,
    pub posterior_std: f64,
    pub value: f64,
    pub visit_count: u32,
    pub child: Option<usize>,
}

impl<S: Clone + std::fmt::Debug> SearchTree<S> {
    pub fn dump(&self) -> TreeDump {
        TreeDump {
            horizon: self.horizon,
            iteration: self.iteration,
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(id, n)| NodeDump {
                    id,
                    state: format!("{:?}", n.state),
                    depth: n.depth,
                    parent: n.parent.map(|(p, a)| (p.0, a)),
                    visit_count: n.visit_count,
                    edges: n
                        .edges
                        .iter()
                        .map(|e| {
                            let (qm, qv) = e.query.mean_var();
                            let (pm, pv) = e.moments;
                            EdgeDump {
                                action: e.action,
                                kind: e.kind,
                                reward: e.reward,
                                query_mean: qm,
                                query_std: qv.sqrt(),
                                posterior_mean: pm,
                                posterior_std: pv.sqrt(),
                                value: e.value,
                                visit_count: e.visit_count,
                                child: e.child.map(|c| c.0),
                            }
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl TreeDump {
    /// Indented plain-text rendering, one line per edge.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.nodes.is_empty() {
            self.write_node(0, 0, &mut out);
        }
        out
    }

    fn write_node(&self, id: usize, indent: usize, out: &mut String) {
        use std::fmt::Write;
        let node = &self.nodes[id];
        let _ = writeln!(out, "{:indent$}node {} {} N={}", "", id, node.state, node.visit_count, indent = indent);
        for e in &node.edges {
            let _ = writeln!(
                out,
                "{:indent$}  a={} r={:.3} Q~N({:.3}, {:.3}) query=N({:.3}, {:.3}) value={:.3} N={} {:?}",
                "",
                e.action,
                e.reward,
                e.posterior_mean,
                e.posterior_std,
                e.query_mean,
                e.query_std,
                e.value,
                e.visit_count,
                e.kind,
                indent = indent
            );
            if let Some(c) = e.child {
                self.write_node(c, indent + 4, out);
            }
        }
    }
}
