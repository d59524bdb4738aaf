//! Synthetic maps built through the same point-cloud pipeline as real ones:
//! points are scattered over obstacle cells, projected and rasterized.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mapping::{project_to_plane, GridCell, OccupancyGridMap, WorldPointCloud};

/// Point-count threshold used by the synthetic maps.
pub const SYNTHETIC_THRESHOLD: u32 = 5;
const POINTS_PER_OBSTACLE_CELL: usize = 12;
/// Stays at or below the threshold, so clutter cells remain reachable.
const POINTS_PER_CLUTTER_CELL: usize = 3;

/// Inclusive rectangle of cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRect {
    pub h: (i64, i64),
    pub v: (i64, i64),
}

impl CellRect {
    pub fn cells(&self) -> impl Iterator<Item = GridCell> + '_ {
        (self.v.0..=self.v.1).flat_map(move |v| (self.h.0..=self.h.1).map(move |h| GridCell::new(h, v)))
    }
}

/// Walled room description in cell indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomLayout {
    /// Outer wall cells lie on these bounds.
    pub h_range: (i64, i64),
    pub v_range: (i64, i64),
    pub obstacles: Vec<CellRect>,
    /// Sparse below-threshold points scattered over this fraction of the
    /// interior.
    pub clutter: f64,
}

impl RoomLayout {
    fn obstacle_cells(&self) -> Vec<GridCell> {
        let (h0, h1) = self.h_range;
        let (v0, v1) = self.v_range;
        let mut cells: Vec<GridCell> = Vec::new();
        for h in h0..=h1 {
            cells.push(GridCell::new(h, v0));
            cells.push(GridCell::new(h, v1));
        }
        for v in v0 + 1..v1 {
            cells.push(GridCell::new(h0, v));
            cells.push(GridCell::new(h1, v));
        }
        for r in &self.obstacles {
            cells.extend(r.cells());
        }
        cells.sort();
        cells.dedup();
        cells
    }
}

fn scatter(cell: GridCell, n: usize, cell_h: f64, cell_v: f64, rng: &mut impl Rng, out: &mut Vec<Vector3<f64>>) {
    for _ in 0..n {
        // Keep clear of cell borders so flooring is unambiguous.
        let x = (cell.h as f64 + rng.random_range(0.05..0.95)) * cell_h;
        let z = (cell.v as f64 + rng.random_range(0.05..0.95)) * cell_v;
        let y = rng.random_range(-0.3..0.3);
        out.push(Vector3::new(x, y, z));
    }
}

/// The world point cloud that a survey of `layout` would produce.
pub fn room_cloud(layout: &RoomLayout, cell_h: f64, cell_v: f64, seed: u64) -> WorldPointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let obstacles = layout.obstacle_cells();
    for &c in &obstacles {
        scatter(c, POINTS_PER_OBSTACLE_CELL, cell_h, cell_v, &mut rng, &mut points);
    }
    if layout.clutter > 0.0 {
        for v in layout.v_range.0 + 1..layout.v_range.1 {
            for h in layout.h_range.0 + 1..layout.h_range.1 {
                let c = GridCell::new(h, v);
                if rng.random_bool(layout.clutter) && obstacles.binary_search(&c).is_err() {
                    let n = rng.random_range(1..=POINTS_PER_CLUTTER_CELL);
                    scatter(c, n, cell_h, cell_v, &mut rng, &mut points);
                }
            }
        }
    }
    WorldPointCloud { points }
}

pub fn room_map(layout: &RoomLayout, cell_h: f64, cell_v: f64, seed: u64) -> OccupancyGridMap {
    let planar = project_to_plane(&room_cloud(layout, cell_h, cell_v, seed));
    OccupancyGridMap::from_planar(&planar, cell_h, cell_v, SYNTHETIC_THRESHOLD).expect("positive cell size")
}

/// Straight corridor whose free cells are `(0, 0) … (length − 1, 0)`.
pub fn corridor_map(length: usize, cell: f64, seed: u64) -> OccupancyGridMap {
    let layout = RoomLayout {
        h_range: (-1, length as i64),
        v_range: (-1, 1),
        obstacles: Vec::new(),
        clutter: 0.0,
    };
    room_map(&layout, cell, cell, seed)
}

/// A storage room at the scale of the larger surveyed room (cells of 0.02,
/// 110 × 180 cells) with two rows of shelving.
#[derive(Debug, Clone)]
pub struct WarehouseScenario {
    pub map: OccupancyGridMap,
    pub start: GridCell,
    pub goal: GridCell,
}

pub fn warehouse_layout() -> RoomLayout {
    RoomLayout {
        h_range: (-44, 65),
        v_range: (-37, 142),
        obstacles: vec![
            CellRect { h: (-20, -14), v: (-37, 90) },
            CellRect { h: (18, 24), v: (10, 142) },
            CellRect { h: (40, 52), v: (30, 40) },
        ],
        clutter: 0.05,
    }
}

pub fn warehouse_scenario(seed: u64) -> WarehouseScenario {
    WarehouseScenario {
        map: room_map(&warehouse_layout(), 0.02, 0.02, seed),
        start: GridCell::new(-38, -30),
        goal: GridCell::new(58, 130),
    }
}
