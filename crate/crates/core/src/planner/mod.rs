//! Grid path planning: A* with a binary-heap or list open set, and Dijkstra.
//!
//! Moves are 4-connected with unit cost, so the Manhattan distance is an
//! admissible and consistent heuristic and the path cost is its length.

mod bench;
mod open_set;

pub use bench::{
    benchmark_planners, random_window, solvable_pairs, write_bench_csv, BenchConfig, BenchRow,
    PlannerMethod,
};
pub use open_set::{HeapOpenSet, ListOpenSet, OpenEntry, OpenSet};

use std::fmt;
use std::str::FromStr;

use crate::mapping::{GridCell, GridWindow};

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("endpoint {0} is outside the map or not reachable")]
    InvalidEndpoint(GridCell),
    #[error("no path from {start} to {end}")]
    Unreachable { start: GridCell, end: GridCell },
    #[error("father chain broken while rebuilding the path")]
    BrokenChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpenSetKind {
    BinaryHeap,
    List,
}

impl FromStr for OpenSetKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "heap" => Ok(OpenSetKind::BinaryHeap),
            "list" => Ok(OpenSetKind::List),
            other => Err(format!("unknown open set {other:?} (expected heap or list)")),
        }
    }
}

impl fmt::Display for OpenSetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpenSetKind::BinaryHeap => "heap",
            OpenSetKind::List => "list",
        })
    }
}

/// Ordered cells from start to end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedPath {
    pub cells: Vec<GridCell>,
}

impl PlannedPath {
    /// Number of unit moves.
    pub fn cost(&self) -> usize {
        self.cells.len().saturating_sub(1)
    }

    pub fn start(&self) -> Option<GridCell> {
        self.cells.first().copied()
    }

    pub fn end(&self) -> Option<GridCell> {
        self.cells.last().copied()
    }

    /// Consecutive cells adjacent and every cell free in `window`.
    pub fn is_valid_in(&self, window: &GridWindow) -> bool {
        !self.cells.is_empty()
            && self.cells.iter().all(|&c| window.is_free(c))
            && self.cells.windows(2).all(|w| w[0].is_adjacent(w[1]))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expanded: usize,
    pub pushed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heuristic {
    Manhattan,
    Zero,
}

pub fn manhattan(a: GridCell, b: GridCell) -> u32 {
    ((a.h - b.h).abs() + (a.v - b.v).abs()) as u32
}

pub fn astar_search(
    start: GridCell,
    end: GridCell,
    window: &GridWindow,
    open_set: OpenSetKind,
) -> Result<PlannedPath, PlanError> {
    search(start, end, window, open_set, Heuristic::Manhattan).map(|(p, _)| p)
}

/// Uniform-cost search over a list open set (A* with a zero heuristic).
pub fn dijkstra_search(start: GridCell, end: GridCell, window: &GridWindow) -> Result<PlannedPath, PlanError> {
    search(start, end, window, OpenSetKind::List, Heuristic::Zero).map(|(p, _)| p)
}

pub fn search(
    start: GridCell,
    end: GridCell,
    window: &GridWindow,
    open_set: OpenSetKind,
    heuristic: Heuristic,
) -> Result<(PlannedPath, SearchStats), PlanError> {
    match open_set {
        OpenSetKind::BinaryHeap => run(start, end, window, HeapOpenSet::default(), heuristic),
        OpenSetKind::List => run(start, end, window, ListOpenSet::default(), heuristic),
    }
}

fn run<O: OpenSet>(
    start: GridCell,
    end: GridCell,
    window: &GridWindow,
    mut open: O,
    heuristic: Heuristic,
) -> Result<(PlannedPath, SearchStats), PlanError> {
    let free_index = |c: GridCell| window.index(c).filter(|&i| !window.is_blocked_index(i));
    let s = free_index(start).ok_or(PlanError::InvalidEndpoint(start))?;
    let e = free_index(end).ok_or(PlanError::InvalidEndpoint(end))?;
    let h = |c: GridCell| match heuristic {
        Heuristic::Manhattan => manhattan(c, end),
        Heuristic::Zero => 0,
    };

    let n = window.len();
    let mut g = vec![u32::MAX; n];
    let mut parent = vec![NO_PARENT; n];
    let mut closed = vec![false; n];
    let mut in_open = vec![false; n];
    let mut stats = SearchStats::default();
    let mut seq = 0u64;

    g[s] = 0;
    in_open[s] = true;
    open.push(OpenEntry {
        f: h(start),
        g: 0,
        seq,
        node: s as u32,
    });
    stats.pushed += 1;

    while let Some(entry) = open.pop_min() {
        let i = entry.node as usize;
        if closed[i] || entry.g > g[i] {
            continue; // superseded heap entry
        }
        in_open[i] = false;
        closed[i] = true;
        stats.expanded += 1;
        if i == e {
            return Ok((reconstruct_path(window, &parent, s, e)?, stats));
        }
        let cell = window.cell(i);
        let cost = g[i] + 1;
        for nb in cell.neighbors() {
            let Some(j) = free_index(nb) else { continue };
            if closed[j] {
                continue;
            }
            if in_open[j] && cost >= g[j] {
                continue;
            }
            seq += 1;
            let reopened = in_open[j];
            g[j] = cost;
            parent[j] = i as u32;
            in_open[j] = true;
            let entry = OpenEntry {
                f: cost + h(nb),
                g: cost,
                seq,
                node: j as u32,
            };
            if reopened {
                open.replace(entry);
            } else {
                open.push(entry);
            }
            stats.pushed += 1;
        }
    }
    Err(PlanError::Unreachable { start, end })
}

/// Follows father pointers from `end` back to `start`.
pub fn reconstruct_path(
    window: &GridWindow,
    parents: &[u32],
    start: usize,
    end: usize,
) -> Result<PlannedPath, PlanError> {
    let mut cells = vec![window.cell(end)];
    let mut cur = end;
    while cur != start {
        let p = *parents.get(cur).ok_or(PlanError::BrokenChain)?;
        if p == NO_PARENT || cells.len() > parents.len() {
            return Err(PlanError::BrokenChain);
        }
        cur = p as usize;
        cells.push(window.cell(cur));
    }
    cells.reverse();
    Ok(PlannedPath { cells })
}
