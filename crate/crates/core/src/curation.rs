//! Per-frame selection of salient person / bicycle / cyclist detections.
//!
//! The stages run in the order [`associate_cyclists`] then [`filter_frame`]:
//! person and bicycle boxes that ride together are fused into a cyclist box,
//! then size, visibility and per-class caps decide what survives.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::geometry::{iou, visible_fraction, BoundingBox, FrameSize};
use crate::track::ObjectClass;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub class: ObjectClass,
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub frame: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurationConfig {
    /// Minimum box height as a fraction of the frame height.
    pub min_height_frac: f64,
    /// Minimum box width as a fraction of the frame width.
    pub min_width_frac: f64,
    /// Minimum fraction of the box that must lie inside the frame.
    pub min_visible_frac: f64,
    pub max_per_class: usize,
    /// Person/bicycle pairs must overlap strictly more than this.
    pub cyclist_pair_iou: f64,
    pub cyclist_max_vertical_offset_px: f64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            min_height_frac: 0.08,
            min_width_frac: 0.01,
            min_visible_frac: 0.5,
            max_per_class: 3,
            cyclist_pair_iou: 0.3,
            cyclist_max_vertical_offset_px: 160.0,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<()> {
        let fractions = [
            ("min_height_frac", self.min_height_frac),
            ("min_width_frac", self.min_width_frac),
            ("min_visible_frac", self.min_visible_frac),
            ("cyclist_pair_iou", self.cyclist_pair_iou),
        ];
        for (name, value) in fractions {
            if !(value > 0.0 && value <= 1.0) {
                return Err(Error::InvalidInput(alloc::format!(
                    "{name} = {value} must lie in (0, 1]"
                )));
            }
        }
        if self.max_per_class == 0 {
            return Err(Error::InvalidInput("max_per_class must be >= 1".into()));
        }
        if self.cyclist_max_vertical_offset_px.is_nan() || self.cyclist_max_vertical_offset_px < 0.0 {
            return Err(Error::InvalidInput(
                "cyclist_max_vertical_offset_px must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Fuses person + bicycle pairs into cyclist detections.
///
/// A pair qualifies when its IoU exceeds `cyclist_pair_iou`, the person's
/// centre lies above the bicycle's centre and the vertical centre offset is at
/// most `cyclist_max_vertical_offset_px`. Qualifying pairs are accepted
/// greedily by descending IoU (ties by person index, then bicycle index), so
/// every input takes part in at most one pair. The fused box is the union of
/// the pair and carries the smaller of the two confidences.
///
/// Returns `(cyclists, remaining)`; `remaining` keeps input order.
pub fn associate_cyclists(
    detections: &[Detection],
    config: &CurationConfig,
) -> (Vec<Detection>, Vec<Detection>) {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (pi, person) in detections.iter().enumerate() {
        if person.class != ObjectClass::Person {
            continue;
        }
        let (_, person_cy) = person.bbox.center();
        for (bi, bike) in detections.iter().enumerate() {
            if bike.class != ObjectClass::Bicycle {
                continue;
            }
            let overlap = iou(&person.bbox, &bike.bbox);
            let (_, bike_cy) = bike.bbox.center();
            if overlap > config.cyclist_pair_iou
                && person_cy < bike_cy
                && bike_cy - person_cy <= config.cyclist_max_vertical_offset_px
            {
                pairs.push((overlap, pi, bi));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut used = alloc::vec![false; detections.len()];
    let mut cyclists = Vec::new();
    for (_, pi, bi) in pairs {
        if used[pi] || used[bi] {
            continue;
        }
        used[pi] = true;
        used[bi] = true;
        let person = &detections[pi];
        let bike = &detections[bi];
        cyclists.push(Detection {
            class: ObjectClass::Cyclist,
            bbox: person.bbox.union_box(&bike.bbox),
            confidence: person.confidence.min(bike.confidence),
            frame: person.frame,
        });
    }
    let remaining = detections
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(d, _)| *d)
        .collect();
    (cyclists, remaining)
}

fn passes_size_and_visibility(det: &Detection, frame: FrameSize, config: &CurationConfig) -> bool {
    det.bbox.height() >= config.min_height_frac * f64::from(frame.height())
        && det.bbox.width() >= config.min_width_frac * f64::from(frame.width())
        && visible_fraction(&det.bbox, frame) >= config.min_visible_frac
}

/// Priority used by the per-class cap: confidence, then area, then leftmost.
fn cap_order(a: &Detection, b: &Detection) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(b.bbox.area().total_cmp(&a.bbox.area()))
        .then(a.bbox.x1().total_cmp(&b.bbox.x1()))
}

/// Applies the size, visibility and per-class count rules to one frame.
///
/// The result is a subset of the input in input order.
pub fn filter_frame(
    detections: &[Detection],
    frame: FrameSize,
    config: &CurationConfig,
) -> Vec<Detection> {
    let candidates: Vec<usize> = (0..detections.len())
        .filter(|&i| passes_size_and_visibility(&detections[i], frame, config))
        .collect();

    let mut keep = alloc::vec![false; detections.len()];
    for class in [ObjectClass::Person, ObjectClass::Bicycle, ObjectClass::Cyclist] {
        let mut of_class: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&i| detections[i].class == class)
            .collect();
        of_class.sort_by(|&a, &b| cap_order(&detections[a], &detections[b]).then(a.cmp(&b)));
        for &i in of_class.iter().take(config.max_per_class) {
            keep[i] = true;
        }
    }
    detections
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(d, _)| *d)
        .collect()
}

/// Cyclist association followed by frame filtering.
pub fn curate_frame(
    detections: &[Detection],
    frame: FrameSize,
    config: &CurationConfig,
) -> Vec<Detection> {
    let (mut merged, remaining) = associate_cyclists(detections, config);
    merged.extend(remaining);
    filter_frame(&merged, frame, config)
}

/// Default IoU above which two same-class annotation boxes are duplicates.
pub const DEFAULT_DEDUP_IOU: f64 = 0.9;

/// Outcome of [`deduplicate_indexed`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dedup {
    /// Indices of surviving boxes, ascending.
    pub kept: Vec<usize>,
    /// `(removed, survivor)` pairs, ascending by removed index.
    pub duplicate_of: Vec<(usize, usize)>,
}

/// Index-level duplicate removal.
///
/// Boxes are visited from largest to smallest area (earlier index first on
/// ties); a box is dropped when a kept box of the same class overlaps it with
/// IoU strictly above `dedup_iou`.
pub fn deduplicate_indexed<C: PartialEq>(boxes: &[(C, BoundingBox)], dedup_iou: f64) -> Dedup {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| {
        boxes[b].1
            .area()
            .total_cmp(&boxes[a].1.area())
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    let mut duplicate_of = Vec::new();
    for i in order {
        let survivor = kept.iter().copied().find(|&k| {
            boxes[k].0 == boxes[i].0 && iou(&boxes[k].1, &boxes[i].1) > dedup_iou
        });
        match survivor {
            Some(k) => duplicate_of.push((i, k)),
            None => kept.push(i),
        }
    }
    kept.sort_unstable();
    duplicate_of.sort_unstable();
    Dedup { kept, duplicate_of }
}

/// Removes near-identical same-class boxes, keeping the largest of each group.
pub fn deduplicate_annotations<C: PartialEq + Clone>(
    boxes: &[(C, BoundingBox)],
    dedup_iou: f64,
) -> Vec<(C, BoundingBox)> {
    deduplicate_indexed(boxes, dedup_iou)
        .kept
        .into_iter()
        .map(|i| boxes[i].clone())
        .collect()
}
