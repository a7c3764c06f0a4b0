//! Track-to-annotation assignment on inverse-IoU costs.

mod hungarian;

use alloc::vec::Vec;

use crate::curation::{deduplicate_indexed, DEFAULT_DEDUP_IOU};
use crate::geometry::{iou, BoundingBox};
use crate::track::{AnnotationGroup, Track};
use crate::{Error, Result};

/// Default minimum IoU for a track/annotation pair.
pub const DEFAULT_THETA_IOU: f64 = 0.3;

/// Dense row-major cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(alloc::format!(
                "cost matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged cost matrix".into()));
        }
        Self::new(rows.len(), cols, rows.iter().flatten().copied().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// The same problem with rows reordered: row `k` of the result is row
    /// `order[k]` of `self`.
    pub fn permute_rows(&self, order: &[usize]) -> CostMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for &r in order {
            data.extend_from_slice(&self.data[r * self.cols..(r + 1) * self.cols]);
        }
        CostMatrix {
            rows: order.len(),
            cols: self.cols,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_annotations: Vec<usize>,
    /// Matched cost plus `max_cost` for every slot of the square-padded
    /// problem left without a valid pair.
    pub total_cost: f64,
}

impl AssignmentResult {
    fn from_pairs(cost: &CostMatrix, mut pairs: Vec<(usize, usize)>, max_cost: f64) -> Self {
        pairs.sort_unstable();
        let mut row_used = alloc::vec![false; cost.rows];
        let mut col_used = alloc::vec![false; cost.cols];
        for &(r, c) in &pairs {
            row_used[r] = true;
            col_used[c] = true;
        }
        let total_cost = assignment_objective(cost, &pairs, max_cost);
        AssignmentResult {
            unmatched_tracks: (0..cost.rows).filter(|&r| !row_used[r]).collect(),
            unmatched_annotations: (0..cost.cols).filter(|&c| !col_used[c]).collect(),
            pairs,
            total_cost,
        }
    }

    fn empty(rows: usize, cols: usize) -> Self {
        AssignmentResult {
            pairs: Vec::new(),
            unmatched_tracks: (0..rows).collect(),
            unmatched_annotations: (0..cols).collect(),
            total_cost: 0.0,
        }
    }

    /// Sum of the costs of matched pairs only.
    pub fn matched_cost(&self, cost: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(r, c)| cost.get(r, c)).sum()
    }
}

/// Objective shared by every solver: pair costs summed in row order plus
/// `max_cost` per unfilled slot of the `max(n, m)` square.
pub fn assignment_objective(cost: &CostMatrix, pairs: &[(usize, usize)], max_cost: f64) -> f64 {
    let matched: f64 = pairs.iter().map(|&(r, c)| cost.get(r, c)).sum();
    let slots = cost.rows.max(cost.cols);
    matched + max_cost * (slots - pairs.len()) as f64
}

/// `C[i][j] = 1 - IoU(track_i, annotation_j)`.
pub fn build_cost_matrix(tracks: &[BoundingBox], annotations: &[BoundingBox]) -> CostMatrix {
    let mut data = Vec::with_capacity(tracks.len() * annotations.len());
    for t in tracks {
        for a in annotations {
            data.push(1.0 - iou(t, a));
        }
    }
    CostMatrix {
        rows: tracks.len(),
        cols: annotations.len(),
        data,
    }
}

/// Globally optimal assignment restricted to pairs with `cost < max_cost`.
///
/// Rectangular problems are handled as if padded to a square with
/// forbidden entries, so the minimised quantity is
/// [`AssignmentResult::total_cost`]. Among equal optima the result is the
/// lexicographically smallest per-row choice, with "unmatched" ordered after
/// every column.
///
/// Fails on non-finite costs or if the solver exceeds its iteration budget.
pub fn hungarian_assign(cost: &CostMatrix, max_cost: f64) -> Result<AssignmentResult> {
    if cost.rows == 0 || cost.cols == 0 {
        return Ok(AssignmentResult::empty(cost.rows, cost.cols));
    }
    let rows = hungarian::solve(&cost.data, cost.rows, cost.cols, max_cost)?;
    let pairs = rows
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| (r, c)))
        .collect();
    Ok(AssignmentResult::from_pairs(cost, pairs, max_cost))
}

/// Repeatedly takes the cheapest remaining valid pair (ties by row, then
/// column).
pub fn greedy_assign(cost: &CostMatrix, max_cost: f64) -> AssignmentResult {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for r in 0..cost.rows {
        for c in 0..cost.cols {
            let v = cost.get(r, c);
            if v < max_cost {
                candidates.push((v, r, c));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut row_used = alloc::vec![false; cost.rows];
    let mut col_used = alloc::vec![false; cost.cols];
    let mut pairs = Vec::new();
    for (_, r, c) in candidates {
        if row_used[r] || col_used[c] {
            continue;
        }
        row_used[r] = true;
        col_used[c] = true;
        pairs.push((r, c));
    }
    AssignmentResult::from_pairs(cost, pairs, max_cost)
}

/// Result of [`match_tracks_to_annotations`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrackMatch {
    /// Indices refer to the caller's track and annotation lists. Annotations
    /// removed as duplicates are listed as unmatched.
    pub assignment: AssignmentResult,
    /// `(removed, survivor)` annotation indices.
    pub duplicate_of: Vec<(usize, usize)>,
    /// `true` if the Hungarian solver failed and the greedy rule was used.
    pub used_greedy_fallback: bool,
}

/// Assigns tracks to annotation boxes at `frame`.
///
/// Each track is represented by its latest observation at or before `frame`;
/// tracks with none stay unmatched. Annotations are de-duplicated first,
/// pairs across annotation groups are forbidden, and the Hungarian solution is
/// used unless the solver fails, in which case the greedy rule takes over.
pub fn match_tracks_to_annotations(
    tracks: &[Track],
    annotations: &[(AnnotationGroup, BoundingBox)],
    frame: u32,
    theta_iou: f64,
) -> TrackMatch {
    let dedup = deduplicate_indexed(annotations, DEFAULT_DEDUP_IOU);
    let eligible: Vec<(usize, &BoundingBox, AnnotationGroup)> = tracks
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.at_or_before(frame).map(|o| (i, &o.bbox, t.class().group())))
        .collect();

    let max_cost = 1.0 - theta_iou;
    let mut data = Vec::with_capacity(eligible.len() * dedup.kept.len());
    for &(_, tbox, group) in &eligible {
        for &a in &dedup.kept {
            let (agroup, abox) = &annotations[a];
            data.push(if *agroup == group { 1.0 - iou(tbox, abox) } else { 1.0 });
        }
    }
    let cost = CostMatrix {
        rows: eligible.len(),
        cols: dedup.kept.len(),
        data,
    };
    let (local, used_greedy_fallback) = match hungarian_assign(&cost, max_cost) {
        Ok(result) => (result, false),
        Err(_) => (greedy_assign(&cost, max_cost), true),
    };

    let pairs: Vec<(usize, usize)> = local
        .pairs
        .iter()
        .map(|&(r, c)| (eligible[r].0, dedup.kept[c]))
        .collect();
    let mut track_used = alloc::vec![false; tracks.len()];
    let mut ann_used = alloc::vec![false; annotations.len()];
    for &(t, a) in &pairs {
        track_used[t] = true;
        ann_used[a] = true;
    }
    let mut pairs = pairs;
    pairs.sort_unstable();
    TrackMatch {
        assignment: AssignmentResult {
            pairs,
            unmatched_tracks: (0..tracks.len()).filter(|&t| !track_used[t]).collect(),
            unmatched_annotations: (0..annotations.len()).filter(|&a| !ann_used[a]).collect(),
            total_cost: local.total_cost,
        },
        duplicate_of: dedup.duplicate_of,
        used_greedy_fallback,
    }
}
