//! Occupancy grid mapping: keyframe depths → world points → motion plane →
//! signed-index point-count grid → reachability.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};

use nalgebra::Vector3;

use crate::vision::{CameraIntrinsics, KeyframeChain};

#[derive(Debug, thiserror::Error)]
pub enum MapError {
    #[error("cell sizes must be positive (H = {0}, V = {1})")]
    InvalidCellSize(f64, f64),
    #[error("map has zero extent along {0}")]
    DegenerateMap(&'static str),
    #[error("scale factors must be positive (k_sh = {0}, k_sv = {1})")]
    InvalidScale(f64, f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Signed grid index `(h, v)`; `h` along world x, `v` along world z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridCell {
    pub h: i64,
    pub v: i64,
}

impl GridCell {
    pub const fn new(h: i64, v: i64) -> Self {
        GridCell { h, v }
    }

    /// 4-connected neighbours.
    pub fn neighbors(self) -> [GridCell; 4] {
        [
            GridCell::new(self.h + 1, self.v),
            GridCell::new(self.h - 1, self.v),
            GridCell::new(self.h, self.v + 1),
            GridCell::new(self.h, self.v - 1),
        ]
    }

    pub fn is_adjacent(self, other: GridCell) -> bool {
        (self.h - other.h).abs() + (self.v - other.v).abs() == 1
    }
}

impl fmt::Display for GridCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.h, self.v)
    }
}

impl std::str::FromStr for GridCell {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (h, v) = s
            .split_once(',')
            .ok_or_else(|| format!("expected h,v but got {s:?}"))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<i64>()
                .map_err(|e| format!("bad index {x:?}: {e}"))
        };
        Ok(GridCell::new(parse(h)?, parse(v)?))
    }
}

/// World points (camera-scale units), the set of all back-projected keyframe
/// pixels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorldPointCloud {
    pub points: Vec<Vector3<f64>>,
}

impl WorldPointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Parses whitespace-separated `x y z` lines; blank lines and `#`
    /// comments are skipped.
    pub fn read_xyz(reader: impl BufRead) -> Result<Self, MapError> {
        let mut points = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            match vals {
                Ok(v) if v.len() == 3 && v.iter().all(|c| c.is_finite()) => {
                    points.push(Vector3::new(v[0], v[1], v[2]))
                }
                _ => {
                    return Err(MapError::Parse {
                        line: i + 1,
                        msg: format!("expected three finite numbers, got {line:?}"),
                    })
                }
            }
        }
        Ok(WorldPointCloud { points })
    }

    pub fn write_xyz(&self, mut w: impl Write) -> io::Result<()> {
        for p in &self.points {
            writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
        }
        Ok(())
    }
}

/// Back-projects every selected pixel of every keyframe and moves it into the
/// first keyframe's frame through the chained inverse transforms.
pub fn collect_world_points(chain: &KeyframeChain, camera: &CameraIntrinsics) -> WorldPointCloud {
    let mut points = Vec::new();
    let mut to_world = crate::geometry::SE3Transform::identity();
    for kf in chain.frames() {
        for px in &kf.pixels {
            if let Ok(p) = camera.backproject(px.pixel, px.depth.mean) {
                points.push(to_world.transform_point(&p));
            }
        }
        if let Some(t) = kf.to_next {
            to_world = to_world.compose(&t.inverse());
        }
    }
    WorldPointCloud { points }
}

/// Drops the y coordinate: `(x, y, z) ↦ (x, z)`.
pub fn project_to_plane(cloud: &WorldPointCloud) -> Vec<[f64; 2]> {
    cloud.points.iter().map(|p| [p.x, p.z]).collect()
}

/// Bounding box of the planar points and the extents in cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarExtents {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// `(X_max − X_min) / H`
    pub h_span: f64,
    /// `(Z_max − Z_min) / V`
    pub v_span: f64,
}

/// Per-cell point counts produced by [`rasterize`].
#[derive(Debug, Clone, PartialEq)]
pub struct CellCounts {
    pub cell_h: f64,
    pub cell_v: f64,
    pub counts: HashMap<GridCell, u32>,
    pub extents: Option<PlanarExtents>,
}

impl CellCounts {
    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }
}

#[inline]
pub fn cell_of(x: f64, z: f64, cell_h: f64, cell_v: f64) -> GridCell {
    GridCell::new((x / cell_h).floor() as i64, (z / cell_v).floor() as i64)
}

/// `h = ⌊x/H⌋, v = ⌊z/V⌋`, anchored at the world origin.
pub fn rasterize(planar: &[[f64; 2]], cell_h: f64, cell_v: f64) -> Result<CellCounts, MapError> {
    if !(cell_h > 0.0 && cell_v > 0.0) {
        return Err(MapError::InvalidCellSize(cell_h, cell_v));
    }
    let mut counts: HashMap<GridCell, u32> = HashMap::new();
    let mut ext: Option<PlanarExtents> = None;
    for &[x, z] in planar {
        *counts.entry(cell_of(x, z, cell_h, cell_v)).or_default() += 1;
        let e = ext.get_or_insert(PlanarExtents {
            x_min: x,
            x_max: x,
            z_min: z,
            z_max: z,
            h_span: 0.0,
            v_span: 0.0,
        });
        e.x_min = e.x_min.min(x);
        e.x_max = e.x_max.max(x);
        e.z_min = e.z_min.min(z);
        e.z_max = e.z_max.max(z);
    }
    if let Some(e) = ext.as_mut() {
        e.h_span = (e.x_max - e.x_min) / cell_h;
        e.v_span = (e.z_max - e.z_min) / cell_v;
    }
    Ok(CellCounts {
        cell_h,
        cell_v,
        counts,
        extents: ext,
    })
}

/// Sparse point-count grid with a reachability threshold. A cell is
/// unreachable when its count exceeds the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGridMap {
    pub cell_h: f64,
    pub cell_v: f64,
    pub threshold: u32,
    h_range: (i64, i64),
    v_range: (i64, i64),
    counts: HashMap<GridCell, u32>,
    extents: Option<PlanarExtents>,
}

pub fn threshold_occupancy(counts: CellCounts, threshold: u32) -> OccupancyGridMap {
    let mut map = OccupancyGridMap::empty(counts.cell_h, counts.cell_v, threshold);
    if !counts.counts.is_empty() {
        let hs = counts.counts.keys().map(|c| c.h);
        let vs = counts.counts.keys().map(|c| c.v);
        map.h_range = (hs.clone().min().unwrap(), hs.max().unwrap());
        map.v_range = (vs.clone().min().unwrap(), vs.max().unwrap());
    }
    map.counts = counts.counts;
    map.counts.retain(|_, c| *c > 0);
    map.extents = counts.extents;
    map
}

impl OccupancyGridMap {
    /// Map with no points and a single-cell window at the origin.
    pub fn empty(cell_h: f64, cell_v: f64, threshold: u32) -> Self {
        OccupancyGridMap {
            cell_h,
            cell_v,
            threshold,
            h_range: (0, 0),
            v_range: (0, 0),
            counts: HashMap::new(),
            extents: None,
        }
    }

    /// Rasterizes and thresholds a planar point set in one go.
    pub fn from_planar(
        planar: &[[f64; 2]],
        cell_h: f64,
        cell_v: f64,
        threshold: u32,
    ) -> Result<Self, MapError> {
        Ok(threshold_occupancy(rasterize(planar, cell_h, cell_v)?, threshold))
    }

    pub fn h_range(&self) -> (i64, i64) {
        self.h_range
    }

    pub fn v_range(&self) -> (i64, i64) {
        self.v_range
    }

    pub fn extents(&self) -> Option<&PlanarExtents> {
        self.extents.as_ref()
    }

    /// Grows the index window so it covers both ranges.
    pub fn expand_window(&mut self, h_range: (i64, i64), v_range: (i64, i64)) {
        self.h_range = (self.h_range.0.min(h_range.0), self.h_range.1.max(h_range.1));
        self.v_range = (self.v_range.0.min(v_range.0), self.v_range.1.max(v_range.1));
    }

    pub fn set_window(&mut self, h_range: (i64, i64), v_range: (i64, i64)) {
        self.h_range = h_range;
        self.v_range = v_range;
        self.expand_to_counts();
    }

    fn expand_to_counts(&mut self) {
        for c in self.counts.keys() {
            self.h_range = (self.h_range.0.min(c.h), self.h_range.1.max(c.h));
            self.v_range = (self.v_range.0.min(c.v), self.v_range.1.max(c.v));
        }
    }

    pub fn count(&self, cell: GridCell) -> u32 {
        self.counts.get(&cell).copied().unwrap_or(0)
    }

    pub fn set_count(&mut self, cell: GridCell, count: u32) {
        if count == 0 {
            self.counts.remove(&cell);
        } else {
            self.counts.insert(cell, count);
            self.expand_window((cell.h, cell.h), (cell.v, cell.v));
        }
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = (GridCell, u32)> + '_ {
        self.counts.iter().map(|(&c, &n)| (c, n))
    }

    pub fn contains(&self, cell: GridCell) -> bool {
        (self.h_range.0..=self.h_range.1).contains(&cell.h)
            && (self.v_range.0..=self.v_range.1).contains(&cell.v)
    }

    pub fn is_reachable(&self, cell: GridCell) -> bool {
        self.count(cell) <= self.threshold
    }

    pub fn cell_of(&self, x: f64, z: f64) -> GridCell {
        cell_of(x, z, self.cell_h, self.cell_v)
    }

    /// Dense reachability window over the map's index ranges. Cells whose
    /// centre lies within `inflation` (camera units) of an unreachable cell's
    /// centre are blocked as well.
    pub fn window(&self, inflation: f64) -> GridWindow {
        let width = (self.h_range.1 - self.h_range.0 + 1) as usize;
        let height = (self.v_range.1 - self.v_range.0 + 1) as usize;
        let mut window = GridWindow {
            h_min: self.h_range.0,
            v_min: self.v_range.0,
            width,
            height,
            blocked: vec![false; width * height],
        };
        let rh = (inflation / self.cell_h).floor() as i64;
        let rv = (inflation / self.cell_v).floor() as i64;
        for (&cell, &count) in &self.counts {
            if count <= self.threshold {
                continue;
            }
            for dv in -rv..=rv {
                for dh in -rh..=rh {
                    let (dx, dz) = (dh as f64 * self.cell_h, dv as f64 * self.cell_v);
                    if (dh, dv) != (0, 0) && (dx * dx + dz * dz).sqrt() > inflation {
                        continue;
                    }
                    if let Some(i) = window.index(GridCell::new(cell.h + dh, cell.v + dv)) {
                        window.blocked[i] = true;
                    }
                }
            }
        }
        window
    }

    /// Text format: a header `ogm v1 H V T1 hmin hmax vmin vmax`, then one
    /// `h v count` line per cell with a non-zero count, sorted by (v, h).
    pub fn write_text(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(
            w,
            "ogm v1 {} {} {} {} {} {} {}",
            self.cell_h, self.cell_v, self.threshold, self.h_range.0, self.h_range.1, self.v_range.0, self.v_range.1
        )?;
        let mut cells: Vec<_> = self.counts.iter().collect();
        cells.sort_by_key(|(c, _)| (c.v, c.h));
        for (c, n) in cells {
            writeln!(w, "{} {} {}", c.h, c.v, n)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("map text is ASCII")
    }

    pub fn read_text(reader: impl BufRead) -> Result<Self, MapError> {
        let mut lines = reader.lines().enumerate();
        let perr = |line: usize, msg: String| MapError::Parse { line, msg };
        let (_, header) = lines.next().ok_or_else(|| perr(1, "empty map file".into()))?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 9 || fields[0] != "ogm" || fields[1] != "v1" {
            return Err(perr(1, format!("bad header {header:?}")));
        }
        let f = |i: usize| {
            fields[i]
                .parse::<f64>()
                .map_err(|e| perr(1, format!("field {}: {e}", fields[i])))
        };
        let int = |i: usize| {
            fields[i]
                .parse::<i64>()
                .map_err(|e| perr(1, format!("field {}: {e}", fields[i])))
        };
        let (cell_h, cell_v) = (f(2)?, f(3)?);
        if !(cell_h > 0.0 && cell_v > 0.0) {
            return Err(MapError::InvalidCellSize(cell_h, cell_v));
        }
        let threshold = fields[4]
            .parse::<u32>()
            .map_err(|e| perr(1, format!("threshold: {e}")))?;
        let mut map = OccupancyGridMap::empty(cell_h, cell_v, threshold);
        map.h_range = (int(5)?, int(6)?);
        map.v_range = (int(7)?, int(8)?);
        if map.h_range.0 > map.h_range.1 || map.v_range.0 > map.v_range.1 {
            return Err(perr(1, "empty index range".into()));
        }
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                [h, v, n] => h
                    .parse::<i64>()
                    .and_then(|h| Ok((h, v.parse::<i64>()?)))
                    .ok()
                    .zip(n.parse::<u32>().ok()),
                _ => None,
            };
            let ((h, v), n) = parsed.ok_or_else(|| perr(i + 1, format!("expected `h v count`, got {line:?}")))?;
            let cell = GridCell::new(h, v);
            if !map.contains(cell) {
                return Err(perr(i + 1, format!("cell {cell} outside the header's index range")));
            }
            if n > 0 {
                map.counts.insert(cell, n);
            }
        }
        Ok(map)
    }
}

/// Dense reachability over a rectangular index window.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWindow {
    pub h_min: i64,
    pub v_min: i64,
    pub width: usize,
    pub height: usize,
    blocked: Vec<bool>,
}

impl GridWindow {
    pub fn open(h_min: i64, v_min: i64, width: usize, height: usize) -> Self {
        GridWindow {
            h_min,
            v_min,
            width,
            height,
            blocked: vec![false; width * height],
        }
    }

    /// Window anchored at (0, 0); `blocked[v * width + h]`.
    pub fn from_blocked(width: usize, height: usize, blocked: Vec<bool>) -> Self {
        assert_eq!(blocked.len(), width * height, "blocked mask size");
        GridWindow {
            h_min: 0,
            v_min: 0,
            width,
            height,
            blocked,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty()
    }

    #[inline]
    pub fn index(&self, cell: GridCell) -> Option<usize> {
        let dh = cell.h - self.h_min;
        let dv = cell.v - self.v_min;
        if dh < 0 || dv < 0 || dh >= self.width as i64 || dv >= self.height as i64 {
            return None;
        }
        Some(dv as usize * self.width + dh as usize)
    }

    #[inline]
    pub fn cell(&self, index: usize) -> GridCell {
        GridCell::new(
            self.h_min + (index % self.width) as i64,
            self.v_min + (index / self.width) as i64,
        )
    }

    #[inline]
    pub fn is_blocked_index(&self, index: usize) -> bool {
        self.blocked[index]
    }

    /// Reachable and inside the window.
    pub fn is_free(&self, cell: GridCell) -> bool {
        self.index(cell).is_some_and(|i| !self.blocked[i])
    }

    pub fn set_blocked(&mut self, cell: GridCell, blocked: bool) {
        if let Some(i) = self.index(cell) {
            self.blocked[i] = blocked;
        }
    }

    pub fn blocked_mask(&self) -> &[bool] {
        &self.blocked
    }

    pub fn free_count(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }
}

/// Built-map dimensions converted to meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapStats {
    /// `(h_max, h_min)`
    pub h_extent: (i64, i64),
    /// `(v_max, v_min)`
    pub v_extent: (i64, i64),
    pub length_m: f64,
    pub width_m: f64,
    pub ratio: f64,
}

/// Metric size of the map's index window.
///
/// The x-index span is scaled by `k_sv` and the z-index span by `k_sh`; this
/// pairing is the one that reproduces the published room survey (129 and 122
/// cells of 0.02 giving 9.804 m × 8.35 m).
pub fn map_stats(map: &OccupancyGridMap, k_sh: f64, k_sv: f64) -> Result<MapStats, MapError> {
    if !(k_sh > 0.0 && k_sv > 0.0) {
        return Err(MapError::InvalidScale(k_sh, k_sv));
    }
    let (h_min, h_max) = map.h_range;
    let (v_min, v_max) = map.v_range;
    if h_max == h_min {
        return Err(MapError::DegenerateMap("h"));
    }
    if v_max == v_min {
        return Err(MapError::DegenerateMap("v"));
    }
    let length_m = (h_max - h_min) as f64 * map.cell_h / k_sv;
    let width_m = (v_max - v_min) as f64 * map.cell_v / k_sh;
    Ok(MapStats {
        h_extent: (h_max, h_min),
        v_extent: (v_max, v_min),
        length_m,
        width_m,
        ratio: length_m / width_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SE3Transform;
    use crate::vision::{GrayImage, InverseDepthEstimate, KeyFrame, TrackedPixel};
    use nalgebra::Vector2;
    use proptest::prelude::*;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 50.0, 40.0).unwrap()
    }

    fn kf_with(points: &[(f64, f64, f64)]) -> KeyFrame {
        let img = GrayImage::from_fn(4, 4, |_, _| 0.5).unwrap();
        let pixels = points
            .iter()
            .map(|&(u, v, d)| TrackedPixel {
                pixel: Vector2::new(u, v),
                depth: InverseDepthEstimate::new(d, 1.0).unwrap(),
            })
            .collect();
        KeyFrame::with_pixels(img, pixels, SE3Transform::identity())
    }

    #[test]
    fn single_keyframe_points_are_local_backprojections() {
        let chain = KeyframeChain::new(kf_with(&[(50.0, 40.0, 1.0), (60.0, 30.0, 0.5)]));
        let cloud = collect_world_points(&chain, &cam());
        assert_eq!(cloud.points[0], Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(cloud.points[1], cam().backproject(Vector2::new(60.0, 30.0), 0.5).unwrap());
    }

    #[test]
    fn second_keyframe_uses_inverse_transform() {
        let mut chain = KeyframeChain::new(kf_with(&[]));
        let t = SE3Transform::from_translation(Vector3::new(0.0, 0.0, 0.5));
        chain.push(t, kf_with(&[(50.0, 40.0, 1.0)])).unwrap();
        let cloud = collect_world_points(&chain, &cam());
        let expected = t.inverse().transform_point(&Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(cloud.points, vec![expected]);
        assert_eq!(expected, Vector3::new(0.0, 0.0, 0.5));
    }

    #[test]
    fn identity_chain_is_union_of_local_clouds() {
        let mut chain = KeyframeChain::new(kf_with(&[(50.0, 40.0, 1.0)]));
        chain.push(SE3Transform::identity(), kf_with(&[(10.0, 10.0, 2.0)])).unwrap();
        let cloud = collect_world_points(&chain, &cam());
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.points[1], cam().backproject(Vector2::new(10.0, 10.0), 2.0).unwrap());
    }

    #[test]
    fn projection_drops_y() {
        let cloud = WorldPointCloud {
            points: vec![Vector3::new(1.0, 7.0, 2.0)],
        };
        assert_eq!(project_to_plane(&cloud), vec![[1.0, 2.0]]);
        assert!(project_to_plane(&WorldPointCloud::default()).is_empty());
    }

    #[test]
    fn rasterize_floors_toward_negative_infinity() {
        let c = rasterize(&[[0.05, 0.03], [-0.01, 0.0]], 0.02, 0.02).unwrap();
        assert_eq!(c.counts[&GridCell::new(2, 1)], 1);
        assert_eq!(c.counts[&GridCell::new(-1, 0)], 1);
        assert_eq!(c.total(), 2);
        let e = c.extents.unwrap();
        assert!((e.h_span - 3.0).abs() < 1e-12);
        assert!((e.v_span - 1.5).abs() < 1e-12);
        assert!(rasterize(&[], 0.0, 1.0).is_err());
    }

    #[test]
    fn threshold_boundary_is_strict() {
        let mut pts = vec![[0.01, 0.01]; 201];
        pts.extend(vec![[0.03, 0.01]; 200]);
        let map = OccupancyGridMap::from_planar(&pts, 0.02, 0.02, 200).unwrap();
        assert!(!map.is_reachable(GridCell::new(0, 0)));
        assert!(map.is_reachable(GridCell::new(1, 0)));
        assert!(map.is_reachable(GridCell::new(5, 5)));
        let empty = OccupancyGridMap::from_planar(&[], 0.02, 0.02, 200).unwrap();
        assert!(empty.window(0.0).blocked_mask().iter().all(|b| !b));
    }

    #[test]
    fn room1_stats() {
        let mut map = OccupancyGridMap::empty(0.02, 0.02, 200);
        map.set_window((-59, 70), (-31, 91));
        let s = map_stats(&map, 0.2921, 0.2628).unwrap();
        assert_eq!(s.h_extent, (70, -59));
        assert!((s.length_m - 9.804).abs() / 9.804 < 0.005);
        assert!((s.width_m - 8.35).abs() / 8.35 < 0.005);
        assert!((s.ratio - 1.174).abs() / 1.174 < 0.005);
    }

    #[test]
    fn stats_scale_linearly_and_reject_degenerate_maps() {
        let mut map = OccupancyGridMap::empty(0.02, 0.02, 200);
        map.set_window((0, 10), (0, 5));
        let a = map_stats(&map, 0.3, 0.25).unwrap();
        map.cell_h *= 2.0;
        let b = map_stats(&map, 0.3, 0.25).unwrap();
        assert_eq!(b.length_m, 2.0 * a.length_m);
        let single = OccupancyGridMap::empty(0.02, 0.02, 200);
        assert!(matches!(map_stats(&single, 0.3, 0.3), Err(MapError::DegenerateMap(_))));
        assert!(map_stats(&map, 0.0, 0.3).is_err());
    }

    #[test]
    fn inflation_blocks_neighbours() {
        let mut map = OccupancyGridMap::empty(0.02, 0.02, 0);
        map.set_window((0, 6), (0, 6));
        map.set_count(GridCell::new(3, 3), 5);
        let w0 = map.window(0.0);
        assert_eq!(w0.len() - w0.free_count(), 1);
        let w1 = map.window(0.02);
        assert_eq!(w1.len() - w1.free_count(), 5);
        assert!(!w1.is_free(GridCell::new(3, 4)));
        assert!(w1.is_free(GridCell::new(4, 4)));
    }

    #[test]
    fn map_text_round_trip_is_bit_exact() {
        let pts: Vec<[f64; 2]> = (0..500)
            .map(|i| [((i * 37) % 101) as f64 * 0.013 - 0.6, ((i * 53) % 97) as f64 * 0.011 - 0.4])
            .collect();
        let map = OccupancyGridMap::from_planar(&pts, 0.0213, 0.0175, 3).unwrap();
        let text = map.to_text();
        let back = OccupancyGridMap::read_text(text.as_bytes()).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.window(0.0), map.window(0.0));
    }

    #[test]
    fn map_text_rejects_garbage() {
        assert!(OccupancyGridMap::read_text("ogm v2 1 1 1 0 0 0 0\n".as_bytes()).is_err());
        assert!(OccupancyGridMap::read_text("ogm v1 0.02 0.02 1 0 1 0 1\n5 5 3\n".as_bytes()).is_err());
        assert!(OccupancyGridMap::read_text("ogm v1 0.02 0.02 1 0 1 0 1\n0 x 3\n".as_bytes()).is_err());
    }

    #[test]
    fn xyz_ingestion() {
        let text = "# header\n1 2 3\n\n-0.5 0 4e-1\n";
        let cloud = WorldPointCloud::read_xyz(text.as_bytes()).unwrap();
        assert_eq!(cloud.points[1], Vector3::new(-0.5, 0.0, 0.4));
        assert!(WorldPointCloud::read_xyz("1 2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn rasterize_conserves_points(pts in prop::collection::vec(prop::array::uniform2(-5.0..5.0f64), 0..300)) {
            let c = rasterize(&pts, 0.02, 0.03).unwrap();
            prop_assert_eq!(c.total(), pts.len() as u64);
        }

        #[test]
        fn y_never_affects_indices(
            pts in prop::collection::vec(prop::array::uniform3(-5.0..5.0f64), 1..100),
            ys in prop::collection::vec(-100.0..100.0f64, 100),
        ) {
            let a = WorldPointCloud { points: pts.iter().map(|p| Vector3::from(*p)).collect() };
            let b = WorldPointCloud {
                points: pts.iter().zip(&ys).map(|(p, y)| Vector3::new(p[0], *y, p[2])).collect(),
            };
            let ca = rasterize(&project_to_plane(&a), 0.02, 0.02).unwrap();
            let cb = rasterize(&project_to_plane(&b), 0.02, 0.02).unwrap();
            prop_assert_eq!(ca.counts, cb.counts);
        }

        #[test]
        fn indices_shift_with_whole_cell_translation(
            cells in prop::collection::vec((-200i64..200, -200i64..200, 0.05..0.95f64, 0.05..0.95f64), 1..50),
            m in -50i64..50, k in -50i64..50,
        ) {
            let (h, v) = (0.25, 0.5); // dyadic sizes keep the shift exact
            for (ch, cv, fx, fz) in cells {
                let (x, z) = ((ch as f64 + fx) * h, (cv as f64 + fz) * v);
                let a = cell_of(x, z, h, v);
                let b = cell_of(x + m as f64 * h, z + k as f64 * v, h, v);
                prop_assert_eq!(b, GridCell::new(a.h + m, a.v + k));
            }
        }

        #[test]
        fn reachability_monotone_in_threshold(
            pts in prop::collection::vec(prop::array::uniform2(-0.1..0.1f64), 0..400),
            t1 in 0u32..20, extra in 0u32..20,
        ) {
            let lo = OccupancyGridMap::from_planar(&pts, 0.02, 0.02, t1).unwrap();
            let hi = OccupancyGridMap::from_planar(&pts, 0.02, 0.02, t1 + extra).unwrap();
            for (cell, _) in lo.occupied_cells() {
                if lo.is_reachable(cell) {
                    prop_assert!(hi.is_reachable(cell));
                }
            }
        }
    }
}
