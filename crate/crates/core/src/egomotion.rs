//! Camera-motion estimation from dense optical flow.
//!
//! The camera displacement between frames `t` and `t + 1` is the aggregate
//! (median by default) of the flow vectors in a ring around the object. Road
//! relative object motion is the tracked displacement minus that estimate.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::geometry::{BoundingBox, FrameSize};
use crate::{Error, Result};

/// Dense per-pixel displacement `(dx, dy)` from one frame to the next.
///
/// Clones share the vector buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: u32,
    height: u32,
    vectors: Arc<[[f32; 2]]>,
}

impl FlowField {
    pub fn new(width: u32, height: u32, vectors: Vec<[f32; 2]>) -> Result<Self> {
        if vectors.len() != width as usize * height as usize {
            return Err(Error::InvalidInput(format!(
                "flow {width}x{height} needs {} vectors, got {}",
                width as usize * height as usize,
                vectors.len()
            )));
        }
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("flow contains non-finite components".into()));
        }
        Ok(Self {
            width,
            height,
            vectors: vectors.into(),
        })
    }

    /// Every pixel moves by `(dx, dy)`.
    pub fn uniform(width: u32, height: u32, dx: f32, dy: f32) -> Result<Self> {
        if !(dx.is_finite() && dy.is_finite()) {
            return Err(Error::InvalidInput("flow contains non-finite components".into()));
        }
        Ok(Self {
            width,
            height,
            vectors: core::iter::repeat_n([dx, dy], width as usize * height as usize).collect(),
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn size(&self) -> Result<FrameSize> {
        FrameSize::new(self.width, self.height)
    }

    pub fn vectors(&self) -> &[[f32; 2]] {
        &self.vectors
    }

    pub fn get(&self, x: u32, y: u32) -> [f32; 2] {
        self.vectors[y as usize * self.width as usize + x as usize]
    }
}

/// 8-bit single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::InvalidInput(format!(
                "image {width}x{height} needs {} pixels, got {}",
                width as usize * height as usize,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }
}

/// Disjoint in-frame rectangles sampled for the camera estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRegion {
    rects: Vec<BoundingBox>,
}

impl FlowRegion {
    pub fn new(rects: Vec<BoundingBox>) -> Result<Self> {
        if rects.is_empty() {
            return Err(Error::DegenerateRegion("region has no rectangles".into()));
        }
        Ok(Self { rects })
    }

    pub fn rects(&self) -> &[BoundingBox] {
        &self.rects
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CameraDisplacement {
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregator {
    #[default]
    Median,
    Mean,
}

pub const DEFAULT_MARGIN_FRAC: f64 = 0.5;

/// Ring around `object` of width `margin_frac * max(w, h)`, minus the object.
///
/// The ring is split into a full-width top strip, a full-width bottom strip
/// and left / right strips spanning the object's rows; each strip is clipped
/// to the frame and empty strips are dropped.
pub fn adjacent_region(
    object: &BoundingBox,
    frame: FrameSize,
    margin_frac: f64,
) -> Result<FlowRegion> {
    if object.clip(frame).is_none() {
        return Err(Error::DegenerateRegion("object box lies outside the frame".into()));
    }
    let margin = margin_frac * object.width().max(object.height());
    let (x1, y1, x2, y2) = (object.x1(), object.y1(), object.x2(), object.y2());
    let (ex1, ey1, ex2, ey2) = (x1 - margin, y1 - margin, x2 + margin, y2 + margin);
    let strips = [
        [ex1, ey1, ex2, y1],
        [ex1, y2, ex2, ey2],
        [ex1, y1, x1, y2],
        [x2, y1, ex2, y2],
    ];
    let rects: Vec<BoundingBox> = strips
        .iter()
        .filter_map(|s| BoundingBox::from_array(*s).ok())
        .filter_map(|r| r.clip(frame))
        .filter(|r| pixel_span(r.x1(), r.x2()).is_some() && pixel_span(r.y1(), r.y2()).is_some())
        .collect();
    if rects.is_empty() {
        return Err(Error::DegenerateRegion(format!(
            "no in-frame area around [{x1}, {y1}, {x2}, {y2}]"
        )));
    }
    Ok(FlowRegion { rects })
}

/// Pixel indices whose centres fall in `[lo, hi)`.
fn pixel_span(lo: f64, hi: f64) -> Option<(u32, u32)> {
    let first = libm::ceil(lo - 0.5).max(0.0);
    let end = libm::ceil(hi - 0.5).max(0.0);
    (end > first).then_some((first as u32, end as u32))
}

/// Component-wise aggregate of the flow over the region's pixels.
pub fn camera_displacement(
    flow: &FlowField,
    region: &FlowRegion,
    aggregator: Aggregator,
) -> Result<CameraDisplacement> {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for rect in &region.rects {
        let (Some((cx0, cx1)), Some((cy0, cy1))) =
            (pixel_span(rect.x1(), rect.x2()), pixel_span(rect.y1(), rect.y2()))
        else {
            continue;
        };
        let cx1 = cx1.min(flow.width);
        let cy1 = cy1.min(flow.height);
        for y in cy0..cy1 {
            let row = y as usize * flow.width as usize;
            for x in cx0..cx1 {
                let [dx, dy] = flow.vectors[row + x as usize];
                xs.push(f64::from(dx));
                ys.push(f64::from(dy));
            }
        }
    }
    if xs.is_empty() {
        return Err(Error::DegenerateRegion("region covers no flow pixels".into()));
    }
    let (dx, dy) = match aggregator {
        Aggregator::Mean => (mean(&xs), mean(&ys)),
        Aggregator::Median => (median(&mut xs), median(&mut ys)),
    };
    Ok(CameraDisplacement { dx, dy })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median of a non-empty slice; even lengths average the two middle values.
fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    }
}

/// Object displacement with the camera displacement removed.
pub fn road_relative_displacement(object: (f64, f64), camera: CameraDisplacement) -> (f64, f64) {
    (object.0 - camera.dx, object.1 - camera.dy)
}

pub const DEFAULT_BLOCK: u32 = 16;
pub const DEFAULT_SEARCH_RADIUS: u32 = 12;

/// Exhaustive sum-of-absolute-differences block matching.
///
/// The frame is tiled into `block x block` tiles (clipped at the right and
/// bottom edges). For each tile the integer displacement within
/// `search_radius` that minimises SAD against `next` is broadcast to the
/// tile's pixels; displacements that push the tile outside the frame are not
/// considered. Ties prefer the smaller displacement magnitude, then the
/// smaller `(dx, dy)`.
pub fn estimate_flow_block_matching(
    prev: &GrayImage,
    next: &GrayImage,
    block: u32,
    search_radius: u32,
) -> Result<FlowField> {
    if prev.width != next.width || prev.height != next.height {
        return Err(Error::InvalidInput(format!(
            "frame sizes differ: {}x{} vs {}x{}",
            prev.width, prev.height, next.width, next.height
        )));
    }
    if block == 0 {
        return Err(Error::InvalidInput("block size must be positive".into()));
    }
    if prev.width < block || prev.height < block {
        return Err(Error::InvalidInput(format!(
            "frames {}x{} are smaller than one {block}x{block} block",
            prev.width, prev.height
        )));
    }
    let (w, h) = (prev.width as i64, prev.height as i64);
    let r = i64::from(search_radius);
    let mut vectors = alloc::vec![[0.0f32; 2]; (w * h) as usize];

    let mut by = 0i64;
    while by < h {
        let bh = (i64::from(block)).min(h - by);
        let mut bx = 0i64;
        while bx < w {
            let bw = (i64::from(block)).min(w - bx);
            let mut best: Option<(u64, i64, i64, i64)> = None;
            for dy in -r..=r {
                if by + dy < 0 || by + dy + bh > h {
                    continue;
                }
                for dx in -r..=r {
                    if bx + dx < 0 || bx + dx + bw > w {
                        continue;
                    }
                    let limit = best.map_or(u64::MAX, |b| b.0);
                    let Some(sad) = block_sad(prev, next, bx, by, bw, bh, dx, dy, limit) else {
                        continue;
                    };
                    let key = (sad, dx * dx + dy * dy, dx, dy);
                    if best.is_none_or(|b| key < b) {
                        best = Some(key);
                    }
                }
            }
            let (_, _, dx, dy) = best.expect("zero displacement is always in range");
            for y in by..by + bh {
                let row = (y * w) as usize;
                for x in bx..bx + bw {
                    vectors[row + x as usize] = [dx as f32, dy as f32];
                }
            }
            bx += i64::from(block);
        }
        by += i64::from(block);
    }
    FlowField::new(prev.width, prev.height, vectors)
}

/// SAD of one tile, or `None` once it exceeds `limit`.
#[allow(clippy::too_many_arguments)]
fn block_sad(
    prev: &GrayImage,
    next: &GrayImage,
    bx: i64,
    by: i64,
    bw: i64,
    bh: i64,
    dx: i64,
    dy: i64,
    limit: u64,
) -> Option<u64> {
    let w = prev.width as usize;
    let mut sad = 0u64;
    for y in 0..bh {
        let a = ((by + y) as usize) * w + bx as usize;
        let b = ((by + y + dy) as usize) * w + (bx + dx) as usize;
        let row_a = &prev.pixels[a..a + bw as usize];
        let row_b = &next.pixels[b..b + bw as usize];
        sad += row_a
            .iter()
            .zip(row_b)
            .map(|(p, q)| u64::from(p.abs_diff(*q)))
            .sum::<u64>();
        if sad > limit {
            return None;
        }
    }
    Some(sad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn frame(w: u32, h: u32) -> FrameSize {
        FrameSize::new(w, h).unwrap()
    }

    #[test]
    fn ring_around_centered_box() {
        let b = BoundingBox::new(40.0, 40.0, 60.0, 60.0).unwrap();
        let region = adjacent_region(&b, frame(100, 100), 0.5).unwrap();
        assert_eq!(region.rects().len(), 4);
        let total: f64 = region.rects().iter().map(BoundingBox::area).sum();
        assert_eq!(total, 40.0 * 40.0 - 20.0 * 20.0);
    }

    #[test]
    fn ring_clipped_at_left_edge() {
        let b = BoundingBox::new(0.0, 40.0, 20.0, 60.0).unwrap();
        let region = adjacent_region(&b, frame(100, 100), 0.5).unwrap();
        assert_eq!(region.rects().len(), 3);
        assert!(region.rects().iter().all(|r| r.x1() >= 0.0));
    }

    #[test]
    fn whole_frame_box_is_degenerate() {
        let b = BoundingBox::new(0.0, 0.0, 100.0, 100.0).unwrap();
        assert!(matches!(
            adjacent_region(&b, frame(100, 100), 0.5),
            Err(Error::DegenerateRegion(_))
        ));
        let outside = BoundingBox::new(200.0, 0.0, 210.0, 10.0).unwrap();
        assert!(adjacent_region(&outside, frame(100, 100), 0.5).is_err());
    }

    #[test]
    fn constant_field_aggregates_exactly() {
        let flow = FlowField::uniform(50, 40, 3.0, -1.0).unwrap();
        let b = BoundingBox::new(10.0, 10.0, 20.0, 20.0).unwrap();
        let region = adjacent_region(&b, frame(50, 40), 0.5).unwrap();
        for agg in [Aggregator::Median, Aggregator::Mean] {
            let d = camera_displacement(&flow, &region, agg).unwrap();
            assert_eq!((d.dx, d.dy), (3.0, -1.0));
        }
        let zero = FlowField::uniform(50, 40, 0.0, 0.0).unwrap();
        let d = camera_displacement(&zero, &region, Aggregator::Median).unwrap();
        assert_eq!((d.dx, d.dy), (0.0, 0.0));
    }

    #[test]
    fn median_resists_outliers_mean_does_not() {
        // 10 x 10 region: 90 pixels at (1, 0), 10 at (100, 0).
        let mut v = vec![[1.0f32, 0.0]; 100];
        for p in v.iter_mut().take(10) {
            *p = [100.0, 0.0];
        }
        let flow = FlowField::new(10, 10, v).unwrap();
        let region = FlowRegion::new(vec![BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap()]).unwrap();
        let med = camera_displacement(&flow, &region, Aggregator::Median).unwrap();
        assert_eq!((med.dx, med.dy), (1.0, 0.0));
        let mean = camera_displacement(&flow, &region, Aggregator::Mean).unwrap();
        assert!((mean.dx - 10.9).abs() < 1e-12);
        assert_eq!(mean.dy, 0.0);
    }

    #[test]
    fn even_median_averages_middle_pair() {
        let mut v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&mut v), 2.5);
        let mut odd = [5.0, 1.0, 3.0];
        assert_eq!(median(&mut odd), 3.0);
    }

    #[test]
    fn road_relative_examples() {
        let cam = |dx, dy| CameraDisplacement { dx, dy };
        assert_eq!(road_relative_displacement((10.0, 0.0), cam(10.0, 0.0)), (0.0, 0.0));
        assert_eq!(road_relative_displacement((0.0, 0.0), cam(-5.0, 0.0)), (5.0, 0.0));
        assert_eq!(road_relative_displacement((7.0, 3.0), cam(2.0, 1.0)), (5.0, 2.0));
    }

    fn texture(w: u32, h: u32, seed: u32) -> Vec<u8> {
        // xorshift noise; enough texture for SAD to have a unique minimum
        let mut s = seed.wrapping_mul(2_654_435_761).max(1);
        (0..w * h)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 17;
                s ^= s << 5;
                (s >> 24) as u8
            })
            .collect()
    }

    fn shifted_pair(w: u32, h: u32, tx: i64, ty: i64) -> (GrayImage, GrayImage) {
        let pad = 16u32;
        let (bw, bh) = (w + 2 * pad, h + 2 * pad);
        let big = texture(bw, bh, 99);
        let crop = |ox: i64, oy: i64| {
            let mut px = Vec::with_capacity((w * h) as usize);
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    px.push(big[((y + oy) * bw as i64 + x + ox) as usize]);
                }
            }
            GrayImage::new(w, h, px).unwrap()
        };
        let p = i64::from(pad);
        (crop(p, p), crop(p - tx, p - ty))
    }

    #[test]
    fn block_matching_recovers_translation() {
        for (tx, ty) in [(5, 0), (-3, 2), (0, 0), (12, -12)] {
            let (a, b) = shifted_pair(96, 80, tx, ty);
            let flow = estimate_flow_block_matching(&a, &b, 16, 12).unwrap();
            // interior blocks: those whose displaced tile stays in frame
            for by in (16..64).step_by(16) {
                for bx in (16..80).step_by(16) {
                    assert_eq!(flow.get(bx, by), [tx as f32, ty as f32]);
                }
            }
        }
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let img = GrayImage::new(40, 30, texture(40, 30, 3)).unwrap();
        let flow = estimate_flow_block_matching(&img, &img, 16, 4).unwrap();
        assert!(flow.vectors().iter().all(|v| *v == [0.0, 0.0]));
    }

    #[test]
    fn block_matching_rejects_bad_input() {
        let a = GrayImage::new(32, 32, vec![0; 1024]).unwrap();
        let b = GrayImage::new(32, 16, vec![0; 512]).unwrap();
        assert!(estimate_flow_block_matching(&a, &b, 16, 4).is_err());
        assert!(estimate_flow_block_matching(&b, &b, 17, 4).is_err());
    }

    #[test]
    fn flow_field_validation() {
        assert!(FlowField::new(2, 2, vec![[0.0, 0.0]; 3]).is_err());
        assert!(FlowField::new(1, 1, vec![[f32::NAN, 0.0]]).is_err());
        assert!(FlowRegion::new(Vec::new()).is_err());
    }
}
