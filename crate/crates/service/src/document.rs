//! JSON map document served to the console: cell size, index ranges and
//! run-length-encoded reachability rows.
//!
//! Rows are ordered by ascending `v`. Each row is a list of run lengths that
//! alternate reachable, unreachable, reachable, ... starting with a reachable
//! run (which is `0` when the row opens with a blocked cell). Every run after
//! the first is positive and the runs sum to the row width, so each grid has
//! exactly one encoding.

use omninav::mapping::GridWindow;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub version: u64,
    pub cell_h: f64,
    pub cell_v: f64,
    /// Inclusive index ranges.
    pub h_range: [i64; 2],
    pub v_range: [i64; 2],
    pub rows: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DocumentError {
    #[error("invalid cell size {0} x {1}")]
    CellSize(f64, f64),
    #[error("empty or inverted index range")]
    Range,
    #[error("expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("row {row}: runs sum to {sum}, expected {width}")]
    RowWidth { row: usize, sum: u64, width: usize },
    #[error("row {row}: zero-length run at position {pos}")]
    EmptyRun { row: usize, pos: usize },
}

/// A decoded document: metadata plus the dense reachability window.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedMap {
    pub version: u64,
    pub cell_h: f64,
    pub cell_v: f64,
    pub window: GridWindow,
}

pub fn encode_row(blocked: &[bool]) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u32;
    for &b in blocked {
        if b != current {
            runs.push(len);
            current = b;
            len = 0;
        }
        len += 1;
    }
    if len > 0 || runs.is_empty() {
        runs.push(len);
    }
    runs
}

pub fn encode(version: u64, cell_h: f64, cell_v: f64, window: &GridWindow) -> MapDocument {
    let mask = window.blocked_mask();
    let rows = mask
        .chunks(window.width.max(1))
        .take(window.height)
        .map(encode_row)
        .collect();
    MapDocument {
        version,
        cell_h,
        cell_v,
        h_range: [window.h_min, window.h_min + window.width as i64 - 1],
        v_range: [window.v_min, window.v_min + window.height as i64 - 1],
        rows,
    }
}

pub fn decode(doc: &MapDocument) -> Result<DecodedMap, DocumentError> {
    if !(doc.cell_h > 0.0 && doc.cell_v > 0.0 && doc.cell_h.is_finite() && doc.cell_v.is_finite()) {
        return Err(DocumentError::CellSize(doc.cell_h, doc.cell_v));
    }
    let [h0, h1] = doc.h_range;
    let [v0, v1] = doc.v_range;
    if h0 > h1 || v0 > v1 {
        return Err(DocumentError::Range);
    }
    let width = (h1 - h0 + 1) as usize;
    let height = (v1 - v0 + 1) as usize;
    if doc.rows.len() != height {
        return Err(DocumentError::RowCount {
            expected: height,
            found: doc.rows.len(),
        });
    }
    let mut blocked = Vec::with_capacity(width * height);
    for (row, runs) in doc.rows.iter().enumerate() {
        let sum: u64 = runs.iter().map(|&r| r as u64).sum();
        if sum != width as u64 {
            return Err(DocumentError::RowWidth { row, sum, width });
        }
        if let Some(pos) = runs.iter().skip(1).position(|&r| r == 0) {
            return Err(DocumentError::EmptyRun { row, pos: pos + 1 });
        }
        for (i, &r) in runs.iter().enumerate() {
            blocked.extend(std::iter::repeat_n(i % 2 == 1, r as usize));
        }
    }
    let mut window = GridWindow::from_blocked(width, height, blocked);
    window.h_min = h0;
    window.v_min = v0;
    Ok(DecodedMap {
        version: doc.version,
        cell_h: doc.cell_h,
        cell_v: doc.cell_v,
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use omninav::GridCell;
    use proptest::prelude::*;

    #[test]
    fn empty_map_is_one_reachable_run_per_row() {
        let w = GridWindow::open(-2, 5, 4, 3);
        let doc = encode(1, 0.02, 0.02, &w);
        assert_eq!(doc.rows, vec![vec![4]; 3]);
        assert_eq!(doc.h_range, [-2, 1]);
        assert_eq!(doc.v_range, [5, 7]);
    }

    #[test]
    fn single_blocked_cell_gives_one_unreachable_run() {
        let mut w = GridWindow::open(0, 0, 5, 2);
        w.set_blocked(GridCell::new(2, 1), true);
        let doc = encode(1, 0.02, 0.02, &w);
        assert_eq!(doc.rows, vec![vec![5], vec![2, 1, 2]]);
    }

    #[test]
    fn row_starting_blocked_opens_with_zero() {
        assert_eq!(encode_row(&[true, true, false]), vec![0, 2, 1]);
        assert_eq!(encode_row(&[false, true]), vec![1, 1]);
    }

    #[test]
    fn non_canonical_rows_are_rejected() {
        let mut doc = encode(1, 1.0, 1.0, &GridWindow::open(0, 0, 3, 1));
        doc.rows[0] = vec![1, 0, 2];
        assert_eq!(decode(&doc), Err(DocumentError::EmptyRun { row: 0, pos: 1 }));
        doc.rows[0] = vec![2];
        assert!(matches!(decode(&doc), Err(DocumentError::RowWidth { .. })));
        doc.rows.push(vec![3]);
        assert!(matches!(decode(&doc), Err(DocumentError::RowCount { .. })));
    }

    fn arb_window() -> impl Strategy<Value = GridWindow> {
        (1usize..20, 1usize..12, -50i64..50, -50i64..50).prop_flat_map(|(w, h, h0, v0)| {
            prop::collection::vec(any::<bool>(), w * h).prop_map(move |blocked| {
                let mut g = GridWindow::from_blocked(w, h, blocked);
                g.h_min = h0;
                g.v_min = v0;
                g
            })
        })
    }

    proptest! {
        #[test]
        fn document_round_trip_is_byte_identical(w in arb_window(), version in 0u64..1000, cell in 0.001f64..1.0) {
            let json = serde_json::to_string(&encode(version, cell, cell * 1.5, &w)).unwrap();
            let parsed: MapDocument = serde_json::from_str(&json).unwrap();
            let decoded = decode(&parsed).unwrap();
            prop_assert_eq!(&decoded.window, &w);
            let again = serde_json::to_string(&encode(decoded.version, decoded.cell_h, decoded.cell_v, &decoded.window)).unwrap();
            prop_assert_eq!(json, again);
        }

        #[test]
        fn runs_alternate_and_cover_the_row(row in prop::collection::vec(any::<bool>(), 1..40)) {
            let runs = encode_row(&row);
            prop_assert_eq!(runs.iter().sum::<u32>() as usize, row.len());
            prop_assert!(runs.iter().skip(1).all(|&r| r > 0));
        }
    }
}
