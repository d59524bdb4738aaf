use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::io::{self, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{search, Heuristic, OpenSetKind, PlanError, PlannedPath, SearchStats};
use crate::mapping::{GridCell, GridWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlannerMethod {
    AStarHeap,
    AStarList,
    Dijkstra,
}

impl PlannerMethod {
    pub const ALL: [PlannerMethod; 3] = [PlannerMethod::AStarHeap, PlannerMethod::AStarList, PlannerMethod::Dijkstra];

    pub fn params(self) -> (OpenSetKind, Heuristic) {
        match self {
            PlannerMethod::AStarHeap => (OpenSetKind::BinaryHeap, Heuristic::Manhattan),
            PlannerMethod::AStarList => (OpenSetKind::List, Heuristic::Manhattan),
            PlannerMethod::Dijkstra => (OpenSetKind::List, Heuristic::Zero),
        }
    }

    pub fn plan(
        self,
        start: GridCell,
        end: GridCell,
        window: &GridWindow,
    ) -> Result<(PlannedPath, SearchStats), PlanError> {
        let (open, heur) = self.params();
        search(start, end, window, open, heur)
    }
}

impl FromStr for PlannerMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "astar_heap" | "heap" => Ok(PlannerMethod::AStarHeap),
            "astar_list" | "list" => Ok(PlannerMethod::AStarList),
            "dijkstra" => Ok(PlannerMethod::Dijkstra),
            _ => Err(format!("unknown planner {s:?}; expected astar_heap, astar_list or dijkstra")),
        }
    }
}

impl fmt::Display for PlannerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlannerMethod::AStarHeap => "astar_heap",
            PlannerMethod::AStarList => "astar_list",
            PlannerMethod::Dijkstra => "dijkstra",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// `(width, height)` in cells.
    pub sizes: Vec<(usize, usize)>,
    pub pairs: usize,
    pub obstacle_density: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![(168, 120), (336, 240), (672, 480)],
            pairs: 50,
            obstacle_density: 0.25,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub width: usize,
    pub height: usize,
    pub method: PlannerMethod,
    pub pairs: usize,
    pub mean_seconds: f64,
    pub mean_expanded: f64,
    pub mean_cost: f64,
}

/// Uniform random obstacles; each cell is blocked with probability `density`.
pub fn random_window(width: usize, height: usize, density: f64, rng: &mut impl Rng) -> GridWindow {
    let blocked = (0..width * height).map(|_| rng.random_bool(density)).collect();
    GridWindow::from_blocked(width, height, blocked)
}

/// Labels 4-connected free components; blocked cells get `u32::MAX`.
fn components(window: &GridWindow) -> Vec<u32> {
    let mut label = vec![u32::MAX; window.len()];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for seed in 0..window.len() {
        if window.is_blocked_index(seed) || label[seed] != u32::MAX {
            continue;
        }
        label[seed] = next;
        queue.push_back(seed);
        while let Some(i) = queue.pop_front() {
            for nb in window.cell(i).neighbors() {
                if let Some(j) = window.index(nb) {
                    if !window.is_blocked_index(j) && label[j] == u32::MAX {
                        label[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
        next += 1;
    }
    label
}

/// Draws `n` distinct-endpoint pairs that are connected in `window`,
/// re-drawing any pair that is not.
pub fn solvable_pairs(window: &GridWindow, n: usize, rng: &mut impl Rng) -> Vec<(GridCell, GridCell)> {
    let label = components(window);
    let free: Vec<usize> = (0..window.len()).filter(|&i| !window.is_blocked_index(i)).collect();
    assert!(free.len() >= 2, "map has fewer than two free cells");
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let a = free[rng.random_range(0..free.len())];
        let b = free[rng.random_range(0..free.len())];
        if a != b && label[a] == label[b] {
            out.push((window.cell(a), window.cell(b)));
        }
    }
    out
}

/// Mean wall time per method and map size, all methods on the same pairs.
pub fn benchmark_planners(cfg: &BenchConfig) -> Vec<BenchRow> {
    assert!(cfg.pairs >= 1, "need at least one pair");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    for &(width, height) in &cfg.sizes {
        let window = random_window(width, height, cfg.obstacle_density, &mut rng);
        let pairs = solvable_pairs(&window, cfg.pairs, &mut rng);
        for method in PlannerMethod::ALL {
            let (mut secs, mut expanded, mut cost) = (0.0, 0usize, 0usize);
            for &(s, e) in &pairs {
                let t0 = Instant::now();
                let (path, stats) = method.plan(s, e, &window).expect("pair was drawn as solvable");
                secs += t0.elapsed().as_secs_f64();
                expanded += stats.expanded;
                cost += path.cost();
            }
            let n = pairs.len() as f64;
            rows.push(BenchRow {
                width,
                height,
                method,
                pairs: pairs.len(),
                mean_seconds: secs / n,
                mean_expanded: expanded as f64 / n,
                mean_cost: cost as f64 / n,
            });
        }
    }
    rows
}

pub fn write_bench_csv(rows: &[BenchRow], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "width,height,method,pairs,mean_seconds,mean_expanded,mean_cost")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{:.9},{:.1},{:.2}",
            r.width, r.height, r.method, r.pairs, r.mean_seconds, r.mean_expanded, r.mean_cost
        )?;
    }
    Ok(())
}
