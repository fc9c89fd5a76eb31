#![allow(dead_code)]

use bayes_plan::env::{DecisionProcess, GroundTruth};
use bayes_plan::oracles::{OracleError, QueryProvider};
use bayes_plan::posterior::PosteriorDist;
use bayes_plan::seeding::{derive_seed, stable_hash};

/// Full tree with pseudo-random rewards in [-1, 1] on every edge.
#[derive(Debug, Clone)]
pub struct RandomTree {
    pub depth: usize,
    pub branching: usize,
    pub seed: u64,
}

fn unit(seed: u64, key: &(usize, usize, usize)) -> f64 {
    (stable_hash(seed, key) >> 11) as f64 / (1u64 << 53) as f64
}

impl RandomTree {
    pub fn reward(&self, s: &(usize, usize), a: usize) -> f64 {
        2.0 * unit(self.seed, &(s.0, s.1, a)) - 1.0
    }

    /// Number of edges in the full tree.
    pub fn num_edges(&self) -> usize {
        (1..=self.depth).map(|d| self.branching.pow(d as u32)).sum()
    }

    fn value(&self, s: &(usize, usize)) -> f64 {
        if s.0 >= self.depth {
            return 0.0;
        }
        self.ground_truth_q(s).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl DecisionProcess for RandomTree {
    type State = (usize, usize);

    fn root(&self) -> (usize, usize) {
        (0, 0)
    }

    fn num_actions(&self) -> usize {
        self.branching
    }

    fn step(&self, s: &(usize, usize), a: usize) -> ((usize, usize), f64) {
        ((s.0 + 1, s.1 * self.branching + a), self.reward(s, a))
    }

    fn is_terminal(&self, s: &(usize, usize)) -> bool {
        s.0 >= self.depth
    }

    fn horizon(&self) -> usize {
        self.depth + 1
    }

    fn r_max(&self) -> f64 {
        1.0
    }
}

impl GroundTruth for RandomTree {
    fn ground_truth_q(&self, s: &(usize, usize)) -> Vec<f64> {
        (0..self.branching)
            .map(|a| {
                let (next, r) = self.step(s, a);
                r + self.value(&next)
            })
            .collect()
    }
}

/// Pseudo-random Gaussian posteriors, fixed per state.
pub struct NoisyOracle {
    pub seed: u64,
    pub max_std: f64,
}

impl QueryProvider<RandomTree> for NoisyOracle {
    fn query(&self, env: &RandomTree, s: &(usize, usize)) -> Result<Vec<PosteriorDist>, OracleError> {
        (0..env.branching)
            .map(|a| {
                let k = derive_seed(&[self.seed, s.0 as u64, s.1 as u64, a as u64]);
                let mean = 4.0 * unit(k, &(0, 0, 0)) - 2.0;
                let std = self.max_std * unit(k, &(1, 1, 1));
                Ok(PosteriorDist::gaussian(mean, std)?)
            })
            .collect()
    }
}

/// Point masses at the exact values.
pub struct ExactOracle;

impl<E: GroundTruth> QueryProvider<E> for ExactOracle {
    fn query(&self, env: &E, s: &E::State) -> Result<Vec<PosteriorDist>, OracleError> {
        Ok(env.ground_truth_q(s).into_iter().map(PosteriorDist::point_mass).collect())
    }
}

/// Two-sided Kolmogorov-Smirnov distance between a sample and a CDF.
pub fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Standard normal CDF by Simpson integration of the density, independent of
/// the crate's erf-based implementation.
pub fn normal_cdf_oracle(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - normal_cdf_oracle(-x);
    }
    let n = 2000;
    let h = x / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut sum = pdf(0.0) + pdf(x);
    for i in 1..n {
        sum += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + sum * h / 3.0
}

/// A maze re-read from its text form, with its own movement rules.
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub wall: Vec<bool>,
    pub start: (usize, usize),
    pub goal: (usize, usize),
}

/// Up, Down, Left, Right.
pub const MOVES: [(i64, i64); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

impl Grid {
    pub fn parse(text: &str) -> Grid {
        let rows: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
        let (width, height) = (rows[0].len(), rows.len());
        let mut g = Grid {
            width,
            height,
            wall: vec![false; width * height],
            start: (0, 0),
            goal: (0, 0),
        };
        for (y, row) in rows.iter().enumerate() {
            for (x, ch) in row.bytes().enumerate() {
                match ch {
                    b'#' => g.wall[y * width + x] = true,
                    b'S' => g.start = (x, y),
                    b'G' => g.goal = (x, y),
                    _ => {}
                }
            }
        }
        g
    }

    pub fn step(&self, (x, y): (usize, usize), a: usize) -> (usize, usize) {
        let (dx, dy) = MOVES[a];
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            return (x, y);
        }
        let (nx, ny) = (nx as usize, ny as usize);
        if self.wall[ny * self.width + nx] {
            (x, y)
        } else {
            (nx, ny)
        }
    }

    pub fn floor(&self) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .filter(|&(x, y)| !self.wall[y * self.width + x])
            .collect()
    }

    /// Forward BFS from `src`.
    pub fn bfs(&self, src: (usize, usize)) -> Vec<Option<u64>> {
        let mut dist = vec![None; self.wall.len()];
        dist[src.1 * self.width + src.0] = Some(0);
        let mut q = std::collections::VecDeque::from([src]);
        while let Some(c) = q.pop_front() {
            let d = dist[c.1 * self.width + c.0].unwrap();
            for a in 0..4 {
                let n = self.step(c, a);
                if dist[n.1 * self.width + n.0].is_none() {
                    dist[n.1 * self.width + n.0] = Some(d + 1);
                    q.push_back(n);
                }
            }
        }
        dist
    }

    /// Dijkstra towards the goal over the reversed move graph.
    pub fn dijkstra_to_goal(&self) -> Vec<Option<u64>> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let mut preds: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.wall.len()];
        for c in self.floor() {
            for a in 0..4 {
                let n = self.step(c, a);
                preds[n.1 * self.width + n.0].push(c);
            }
        }
        let mut dist = vec![None; self.wall.len()];
        let mut heap = BinaryHeap::from([Reverse((0u64, self.goal))]);
        while let Some(Reverse((d, c))) = heap.pop() {
            let slot = &mut dist[c.1 * self.width + c.0];
            if slot.is_some() {
                continue;
            }
            *slot = Some(d);
            for &p in &preds[c.1 * self.width + c.0] {
                if dist[p.1 * self.width + p.0].is_none() {
                    heap.push(Reverse((d + 1, p)));
                }
            }
        }
        dist
    }
}
