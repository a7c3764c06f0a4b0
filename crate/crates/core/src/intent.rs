//! Short-term lateral / vertical intent from road-relative displacement.
//!
//! Each configured window looks back from the track's last observation,
//! measures the centre displacement, removes the accumulated camera motion
//! and votes on a lateral and a vertical label. The per-axis label is the
//! majority vote; ties go to the longest window.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::egomotion::CameraDisplacement;
use crate::geometry::FrameSize;
use crate::labels::{IntentLabel, LateralIntent, RelativePosition, VerticalIntent};
use crate::track::Track;
use crate::{Error, Result};

/// Per-frame camera displacement, keyed by the frame the motion starts from.
pub type CameraTrack = BTreeMap<u32, CameraDisplacement>;

#[derive(Debug, Clone, PartialEq)]
pub struct IntentConfig {
    /// Look-back lengths in frames.
    pub windows: Vec<u32>,
    pub lateral_deadband_px: f64,
    pub lateral_deadband_frac_of_width: f64,
    pub vertical_scale_ratio_eps: f64,
    pub vertical_deadband_px: f64,
    /// Shorter tracks are labelled stationary on both axes.
    pub min_track_len: usize,
    pub left_boundary_frac: f64,
    pub right_boundary_frac: f64,
}

impl Default for IntentConfig {
    fn default() -> Self {
        Self {
            windows: alloc::vec![5, 10, 15],
            lateral_deadband_px: 2.0,
            lateral_deadband_frac_of_width: 0.05,
            vertical_scale_ratio_eps: 0.02,
            vertical_deadband_px: 2.0,
            min_track_len: 3,
            left_boundary_frac: 1.0 / 3.0,
            right_boundary_frac: 2.0 / 3.0,
        }
    }
}

impl IntentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.windows.is_empty() || self.windows.iter().any(|w| *w < 2) {
            return Err(Error::InvalidInput(format!(
                "intent windows {:?} must be non-empty and each >= 2",
                self.windows
            )));
        }
        let deadbands = [
            self.lateral_deadband_px,
            self.lateral_deadband_frac_of_width,
            self.vertical_scale_ratio_eps,
            self.vertical_deadband_px,
        ];
        if deadbands.iter().any(|d| d.is_nan() || *d < 0.0) {
            return Err(Error::InvalidInput("intent deadbands must be >= 0".into()));
        }
        if !(0.0 < self.left_boundary_frac
            && self.left_boundary_frac < self.right_boundary_frac
            && self.right_boundary_frac < 1.0)
        {
            return Err(Error::InvalidInput(format!(
                "position boundaries {} / {} must satisfy 0 < left < right < 1",
                self.left_boundary_frac, self.right_boundary_frac
            )));
        }
        Ok(())
    }

    pub fn longest_window(&self) -> u32 {
        self.windows.iter().copied().max().unwrap_or(0)
    }

    pub fn shortest_window(&self) -> u32 {
        self.windows.iter().copied().min().unwrap_or(0)
    }

    /// Lateral deadband for a box of the given width.
    pub fn lateral_deadband(&self, box_width: f64) -> f64 {
        self.lateral_deadband_px
            .max(self.lateral_deadband_frac_of_width * box_width)
    }
}

/// Measurements over one look-back window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowDisplacement {
    pub window: u32,
    pub first_frame: u32,
    pub last_frame: u32,
    /// Road-relative displacement over the window.
    pub dx_road: f64,
    pub dy_road: f64,
    /// Box height at the window end over box height at the window start.
    pub scale_ratio: f64,
    /// Box width at the window end.
    pub box_width: f64,
    /// At least one frame in the span had no camera estimate (taken as zero).
    pub missing_camera: bool,
}

/// Displacement over the last `window` frames of the track.
///
/// The window covers observations with frame index `>= last - window`. The
/// camera entries summed are those keyed `first..last`, i.e. the motion
/// between consecutive frames of the span. Returns `None` (window skipped)
/// when fewer than two observations fall inside the window.
pub fn window_displacement(
    track: &Track,
    window: u32,
    camera: &CameraTrack,
) -> Option<WindowDisplacement> {
    let obs = track.observations();
    let last = track.last();
    let start = last.frame.saturating_sub(window);
    let first_idx = obs.partition_point(|o| o.frame < start);
    let first = &obs[first_idx];
    if first.frame == last.frame {
        return None;
    }
    let (fx, fy) = first.bbox.center();
    let (lx, ly) = last.bbox.center();
    let mut cam_x = 0.0;
    let mut cam_y = 0.0;
    let mut missing_camera = false;
    for frame in first.frame..last.frame {
        match camera.get(&frame) {
            Some(d) => {
                cam_x += d.dx;
                cam_y += d.dy;
            }
            None => missing_camera = true,
        }
    }
    Some(WindowDisplacement {
        window,
        first_frame: first.frame,
        last_frame: last.frame,
        dx_road: (lx - fx) - cam_x,
        dy_road: (ly - fy) - cam_y,
        scale_ratio: last.bbox.height() / first.bbox.height(),
        box_width: last.bbox.width(),
        missing_camera,
    })
}

/// Sign of the horizontal displacement outside the deadband; image right is +x.
pub fn classify_lateral(dx_road: f64, box_width: f64, config: &IntentConfig) -> LateralIntent {
    if dx_road.abs() < config.lateral_deadband(box_width) {
        LateralIntent::Stationary
    } else if dx_road > 0.0 {
        LateralIntent::GoesToTheRight
    } else {
        LateralIntent::GoesToTheLeft
    }
}

/// Growth of the box means approach; failing a clear scale change, moving
/// down the image means approach. Scale takes precedence over `dy_road`.
pub fn classify_vertical(
    dy_road: f64,
    scale_ratio: f64,
    config: &IntentConfig,
) -> Result<VerticalIntent> {
    if !scale_ratio.is_finite() || scale_ratio <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "scale ratio {scale_ratio} must be positive and finite"
        )));
    }
    let eps = config.vertical_scale_ratio_eps;
    Ok(if scale_ratio > 1.0 + eps {
        VerticalIntent::MovesTowardsEgoVehicle
    } else if scale_ratio < 1.0 - eps {
        VerticalIntent::MovesAwayFromEgoVehicle
    } else if dy_road > config.vertical_deadband_px {
        VerticalIntent::MovesTowardsEgoVehicle
    } else if dy_road < -config.vertical_deadband_px {
        VerticalIntent::MovesAwayFromEgoVehicle
    } else {
        VerticalIntent::Stationary
    })
}

/// Left / Front / Right by thirds of the frame width (configurable).
pub fn classify_position(center_x: f64, frame: FrameSize, config: &IntentConfig) -> RelativePosition {
    let width = f64::from(frame.width());
    if center_x < config.left_boundary_frac * width {
        RelativePosition::Left
    } else if center_x > config.right_boundary_frac * width {
        RelativePosition::Right
    } else {
        RelativePosition::Front
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowVote {
    pub window: u32,
    pub lateral: LateralIntent,
    pub vertical: VerticalIntent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntentResult {
    pub label: IntentLabel,
    pub position: RelativePosition,
    pub per_window_votes: Vec<WindowVote>,
    /// Road-relative displacement over the longest evaluated window.
    pub road_relative_dx: f64,
    pub road_relative_dy: f64,
    pub missing_camera: bool,
}

/// Majority vote; ties go to the label chosen by the longest window that
/// voted for one of the tied labels. `votes` is ordered by ascending window.
pub fn majority<T: Copy + PartialEq>(votes: &[T]) -> Option<T> {
    let mut counts: Vec<(T, usize)> = Vec::new();
    for v in votes {
        match counts.iter_mut().find(|(label, _)| label == v) {
            Some((_, n)) => *n += 1,
            None => counts.push((*v, 1)),
        }
    }
    let top = counts.iter().map(|(_, n)| *n).max()?;
    votes
        .iter()
        .rev()
        .find(|v| counts.iter().any(|(label, n)| label == *v && *n == top))
        .copied()
}

/// Labels one track.
pub fn infer_intent(
    track: &Track,
    camera: &CameraTrack,
    frame: FrameSize,
    config: &IntentConfig,
) -> IntentResult {
    let (final_x, _) = track.last().bbox.center();
    let position = classify_position(final_x, frame, config);
    let stationary = IntentResult {
        label: IntentLabel::STATIONARY,
        position,
        per_window_votes: Vec::new(),
        road_relative_dx: 0.0,
        road_relative_dy: 0.0,
        missing_camera: false,
    };
    if track.len() < config.min_track_len {
        return stationary;
    }

    let mut windows = config.windows.clone();
    windows.sort_unstable();
    windows.dedup();
    let measured: Vec<WindowDisplacement> = windows
        .iter()
        .filter_map(|&w| window_displacement(track, w, camera))
        .collect();
    let votes: Vec<WindowVote> = measured
        .iter()
        .map(|m| WindowVote {
            window: m.window,
            lateral: classify_lateral(m.dx_road, m.box_width, config),
            // scale ratio of two valid boxes is positive and finite
            vertical: classify_vertical(m.dy_road, m.scale_ratio, config)
                .unwrap_or(VerticalIntent::Stationary),
        })
        .collect();
    let Some(longest) = measured.last() else {
        return stationary;
    };
    let lateral: Vec<LateralIntent> = votes.iter().map(|v| v.lateral).collect();
    let vertical: Vec<VerticalIntent> = votes.iter().map(|v| v.vertical).collect();
    IntentResult {
        label: IntentLabel {
            lateral: majority(&lateral).unwrap_or(LateralIntent::Stationary),
            vertical: majority(&vertical).unwrap_or(VerticalIntent::Stationary),
        },
        position,
        road_relative_dx: longest.dx_road,
        road_relative_dy: longest.dy_road,
        missing_camera: measured.iter().any(|m| m.missing_camera),
        per_window_votes: votes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use crate::track::{ObjectClass, Observation};
    use alloc::vec;

    fn linear_track(n: u32, vx: f64, vy: f64, growth: f64) -> Track {
        let obs = (0..n)
            .map(|f| {
                let s = libm::pow(1.0 + growth, f64::from(f));
                let b = BoundingBox::from_center(
                    500.0 + vx * f64::from(f),
                    400.0 + vy * f64::from(f),
                    40.0 * s,
                    100.0 * s,
                )
                .unwrap();
                Observation::new(f, b, 1.0)
            })
            .collect();
        Track::new("t", ObjectClass::Person, obs).unwrap()
    }

    fn uniform_camera(n: u32, dx: f64, dy: f64) -> CameraTrack {
        (0..n).map(|f| (f, CameraDisplacement { dx, dy })).collect()
    }

    #[test]
    fn window_displacement_compensates_camera() {
        let t = linear_track(11, 3.0, 0.0, 0.0);
        let pure_ego = window_displacement(&t, 10, &uniform_camera(11, 3.0, 0.0)).unwrap();
        assert_eq!(pure_ego.dx_road, 0.0);
        let static_cam = window_displacement(&t, 10, &CameraTrack::new());
        assert_eq!(static_cam.unwrap().dx_road, 30.0);
        assert!(static_cam.unwrap().missing_camera);
        let t = linear_track(11, 1.0, 0.0, 0.0);
        let opposite = window_displacement(&t, 10, &uniform_camera(11, -1.0, 0.0)).unwrap();
        assert_eq!(opposite.dx_road, 20.0);
        assert!(!opposite.missing_camera);
    }

    #[test]
    fn single_observation_window_is_skipped() {
        let t = linear_track(1, 1.0, 0.0, 0.0);
        assert!(window_displacement(&t, 5, &CameraTrack::new()).is_none());
    }

    #[test]
    fn lateral_examples() {
        let cfg = IntentConfig::default();
        assert_eq!(classify_lateral(0.0, 60.0, &cfg), LateralIntent::Stationary);
        assert_eq!(classify_lateral(20.0, 60.0, &cfg), LateralIntent::GoesToTheRight);
        assert_eq!(classify_lateral(-20.0, 60.0, &cfg), LateralIntent::GoesToTheLeft);
        assert_eq!(classify_lateral(-1.5, 100.0, &cfg), LateralIntent::Stationary);
        // 4.9 < max(2, 5)
        assert_eq!(classify_lateral(4.9, 100.0, &cfg), LateralIntent::Stationary);
    }

    #[test]
    fn vertical_examples() {
        let cfg = IntentConfig::default();
        assert_eq!(classify_vertical(0.0, 1.0, &cfg).unwrap(), VerticalIntent::Stationary);
        assert_eq!(
            classify_vertical(0.0, 1.10, &cfg).unwrap(),
            VerticalIntent::MovesTowardsEgoVehicle
        );
        assert_eq!(
            classify_vertical(5.0, 0.95, &cfg).unwrap(),
            VerticalIntent::MovesAwayFromEgoVehicle
        );
        assert_eq!(
            classify_vertical(-3.0, 1.0, &cfg).unwrap(),
            VerticalIntent::MovesAwayFromEgoVehicle
        );
        assert!(classify_vertical(0.0, 0.0, &cfg).is_err());
        assert!(classify_vertical(0.0, -1.0, &cfg).is_err());
    }

    #[test]
    fn position_thirds() {
        let cfg = IntentConfig::default();
        let f = FrameSize::new(1928, 1280).unwrap();
        assert_eq!(classify_position(400.0, f, &cfg), RelativePosition::Left);
        assert_eq!(classify_position(964.0, f, &cfg), RelativePosition::Front);
        assert_eq!(classify_position(1500.0, f, &cfg), RelativePosition::Right);
    }

    #[test]
    fn majority_tie_breaks_to_longest() {
        assert_eq!(majority(&[1, 2, 2]), Some(2));
        assert_eq!(majority(&[1, 1, 2]), Some(1));
        assert_eq!(majority(&[1, 2, 3]), Some(3));
        assert_eq!(majority(&[1, 2]), Some(2));
        assert_eq!(majority(&[1, 1, 2, 2, 3]), Some(2));
        assert_eq!(majority::<u8>(&[]), None);
    }

    #[test]
    fn walking_right_with_static_camera() {
        let frame = FrameSize::new(1928, 1280).unwrap();
        let t = linear_track(20, 4.0, 0.0, 0.0);
        let r = infer_intent(&t, &uniform_camera(20, 0.0, 0.0), frame, &IntentConfig::default());
        assert_eq!(
            r.label,
            IntentLabel::new(LateralIntent::GoesToTheRight, VerticalIntent::Stationary)
        );
        assert_eq!(r.per_window_votes.len(), 3);
        assert_eq!(r.road_relative_dx, 60.0);
        // final centre x = 576 < 1928 / 3
        assert_eq!(r.position, RelativePosition::Left);
    }

    #[test]
    fn panning_camera_is_cancelled() {
        let frame = FrameSize::new(1928, 1280).unwrap();
        let t = linear_track(20, 4.0, 0.0, 0.0);
        let r = infer_intent(&t, &uniform_camera(20, 4.0, 0.0), frame, &IntentConfig::default());
        assert_eq!(r.label, IntentLabel::STATIONARY);
    }

    #[test]
    fn growing_box_approaches() {
        let frame = FrameSize::new(1928, 1280).unwrap();
        let t = linear_track(20, 0.0, 0.0, 0.01);
        let r = infer_intent(&t, &uniform_camera(20, 0.0, 0.0), frame, &IntentConfig::default());
        assert_eq!(r.label.vertical, VerticalIntent::MovesTowardsEgoVehicle);
    }

    #[test]
    fn short_tracks_are_stationary() {
        let frame = FrameSize::new(1928, 1280).unwrap();
        let t = linear_track(2, 50.0, 50.0, 0.0);
        let r = infer_intent(&t, &CameraTrack::new(), frame, &IntentConfig::default());
        assert_eq!(r.label, IntentLabel::STATIONARY);
        assert!(r.per_window_votes.is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(IntentConfig::default().validate().is_ok());
        let bad = IntentConfig {
            windows: vec![1, 5],
            ..IntentConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = IntentConfig {
            left_boundary_frac: 0.7,
            ..IntentConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
