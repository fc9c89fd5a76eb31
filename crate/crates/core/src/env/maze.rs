use std::collections::VecDeque;
use std::fmt;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DecisionProcess, GroundTruth};

pub const DEFAULT_HORIZON: usize = 50;
const PLACEMENT_RETRIES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MazeError {
    #[error("maze dimensions must be odd and >= 3, got {0}x{1}")]
    BadDimensions(usize, usize),
    #[error("could not place start and goal at distance >= {0} after {1} draws")]
    Placement(usize, usize),
    #[error("malformed maze text: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: u16,
    pub y: u16,
}

impl Cell {
    pub fn new(x: usize, y: usize) -> Self {
        Cell {
            x: x as u16,
            y: y as u16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    fn delta(self) -> (i64, i64) {
        match self {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Action::Up => "Up",
            Action::Down => "Down",
            Action::Left => "Left",
            Action::Right => "Right",
        };
        f.write_str(name)
    }
}

/// A grid maze. Rooms sit on even coordinates, walls on the odd lattice
/// between them, and the grid edge is solid. Every step costs -1 and the goal
/// cell is terminal. Moving into a wall leaves the agent in place.
#[derive(Debug, Clone, PartialEq)]
pub struct Maze {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    start: Cell,
    goal: Cell,
    seed: Option<u64>,
    horizon: usize,
    // BFS distance to the goal, None if unreachable
    dist: Vec<Option<u32>>,
}

impl Maze {
    /// Carves a perfect maze with a seeded recursive backtracker, then draws
    /// start and goal among floor cells until their shortest-path distance is
    /// at least `(width + height) / 2`.
    pub fn generate(seed: u64, width: usize, height: usize) -> Result<Maze, MazeError> {
        if width < 3 || height < 3 || width % 2 == 0 || height % 2 == 0 {
            return Err(MazeError::BadDimensions(width, height));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut walls = vec![true; width * height];
        let (rooms_x, rooms_y) = ((width + 1) / 2, (height + 1) / 2);
        let mut visited = vec![false; rooms_x * rooms_y];
        let mut stack = vec![(0usize, 0usize)];
        visited[0] = true;
        walls[0] = false;
        while let Some(&(rx, ry)) = stack.last() {
            let mut options: Vec<(usize, usize)> = Vec::with_capacity(4);
            if ry > 0 && !visited[(ry - 1) * rooms_x + rx] {
                options.push((rx, ry - 1));
            }
            if ry + 1 < rooms_y && !visited[(ry + 1) * rooms_x + rx] {
                options.push((rx, ry + 1));
            }
            if rx > 0 && !visited[ry * rooms_x + rx - 1] {
                options.push((rx - 1, ry));
            }
            if rx + 1 < rooms_x && !visited[ry * rooms_x + rx + 1] {
                options.push((rx + 1, ry));
            }
            match options.choose(&mut rng) {
                None => {
                    stack.pop();
                }
                Some(&(nx, ny)) => {
                    visited[ny * rooms_x + nx] = true;
                    walls[(ny * 2) * width + nx * 2] = false;
                    // knock out the wall between the two rooms
                    walls[(ry + ny) * width + (rx + nx)] = false;
                    stack.push((nx, ny));
                }
            }
        }

        let floor: Vec<Cell> = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .filter(|&(x, y)| !walls[y * width + x])
            .map(|(x, y)| Cell::new(x, y))
            .collect();
        let min_distance = (width + height) / 2;
        let mut maze = Maze {
            width,
            height,
            walls,
            start: floor[0],
            goal: floor[0],
            seed: Some(seed),
            horizon: DEFAULT_HORIZON,
            dist: Vec::new(),
        };
        for _ in 0..PLACEMENT_RETRIES {
            let goal = floor[rng.random_range(0..floor.len())];
            let start = floor[rng.random_range(0..floor.len())];
            let dist = maze.bfs_from(goal);
            if let Some(d) = dist[maze.index(start)] {
                if d as usize >= min_distance {
                    maze.start = start;
                    maze.goal = goal;
                    maze.dist = dist;
                    return Ok(maze);
                }
            }
        }
        Err(MazeError::Placement(min_distance, PLACEMENT_RETRIES))
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn is_wall(&self, x: usize, y: usize) -> bool {
        self.walls[y * self.width + x]
    }

    pub fn floor_cells(&self) -> Vec<Cell> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| Cell::new(x, y)))
            .filter(|c| !self.is_wall(c.x as usize, c.y as usize))
            .collect()
    }

    fn index(&self, c: Cell) -> usize {
        c.y as usize * self.width + c.x as usize
    }

    /// Cell reached by `action`; walls and the grid edge leave it unchanged.
    pub fn move_from(&self, cell: Cell, action: Action) -> Cell {
        let (dx, dy) = action.delta();
        let nx = cell.x as i64 + dx;
        let ny = cell.y as i64 + dy;
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            return cell;
        }
        let next = Cell::new(nx as usize, ny as usize);
        if self.walls[self.index(next)] {
            cell
        } else {
            next
        }
    }

    fn bfs_from(&self, source: Cell) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.walls.len()];
        dist[self.index(source)] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(c) = queue.pop_front() {
            let d = dist[self.index(c)].unwrap();
            for a in Action::ALL {
                let n = self.move_from(c, a);
                if dist[self.index(n)].is_none() {
                    dist[self.index(n)] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// Shortest-path length to the goal.
    pub fn distance_to_goal(&self, cell: Cell) -> Option<u32> {
        self.dist[self.index(cell)]
    }

    /// Integer ground-truth values: `-(1 + d)` where `d` is the goal distance
    /// after the move, clamped at `-horizon`. Terminal cells have no future.
    pub fn gt_q_steps(&self, cell: Cell) -> [i64; 4] {
        let h = self.horizon as i64;
        if cell == self.goal {
            return [0; 4];
        }
        Action::ALL.map(|a| match self.distance_to_goal(self.move_from(cell, a)) {
            Some(d) => (-(1 + d as i64)).max(-h),
            None => -h,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let c = Cell::new(x, y);
                out.push(if c == self.start {
                    'S'
                } else if c == self.goal {
                    'G'
                } else if self.is_wall(x, y) {
                    '#'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Maze, MazeError> {
        let rows: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        if rows.is_empty() {
            return Err(MazeError::Parse("empty input".into()));
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut walls = Vec::with_capacity(width * height);
        let (mut start, mut goal) = (None, None);
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(MazeError::Parse(format!("row {y} has a different width")));
            }
            for (x, ch) in row.chars().enumerate() {
                match ch {
                    '#' => walls.push(true),
                    '.' => walls.push(false),
                    'S' | 'G' => {
                        walls.push(false);
                        let slot = if ch == 'S' { &mut start } else { &mut goal };
                        if slot.replace(Cell::new(x, y)).is_some() {
                            return Err(MazeError::Parse(format!("more than one '{ch}'")));
                        }
                    }
                    other => return Err(MazeError::Parse(format!("unexpected character {other:?}"))),
                }
            }
        }
        let start = start.ok_or_else(|| MazeError::Parse("missing 'S'".into()))?;
        let goal = goal.ok_or_else(|| MazeError::Parse("missing 'G'".into()))?;
        let mut maze = Maze {
            width,
            height,
            walls,
            start,
            goal,
            seed: None,
            horizon: DEFAULT_HORIZON,
            dist: Vec::new(),
        };
        maze.dist = maze.bfs_from(goal);
        Ok(maze)
    }
}

impl DecisionProcess for Maze {
    type State = Cell;

    fn root(&self) -> Cell {
        self.start
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn step(&self, state: &Cell, action: usize) -> (Cell, f64) {
        (self.move_from(*state, Action::ALL[action]), -1.0)
    }

    fn is_terminal(&self, state: &Cell) -> bool {
        *state == self.goal
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn r_max(&self) -> f64 {
        1.0
    }
}

impl GroundTruth for Maze {
    fn ground_truth_q(&self, state: &Cell) -> Vec<f64> {
        self.gt_q_steps(*state).iter().map(|&q| q as f64).collect()
    }
}
