//! Repair of fragmented tracks.
//!
//! Every (end of track i, start of track j) pair of the same class is scored
//! with a spatiotemporal affinity
//!
//! ```text
//! S     = clamp01(1 - d_spatial / D_max) * w_s + clamp01(1 - dt / T_max) * w_t
//! S_hat = S * (0.5 + 0.5 * alpha)
//! ```
//!
//! where `d_spatial` is the distance between the constant-velocity prediction
//! of track i at the start frame of j and the first centre of j,
//! `D_max = d_base + d_per_frame * dt`, and `alpha` is the R^2 of the motion
//! fit used for the prediction. A pair is a candidate only when
//! `1 <= dt <= T_max` and `d_spatial < D_max`; it is accepted when `S_hat`
//! exceeds `theta_short` (gaps up to `short_gap_frames`) or `theta_long`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::track::Track;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub w_s: f64,
    pub w_t: f64,
    pub d_base: f64,
    pub d_per_frame: f64,
    pub t_max: u32,
    pub theta_short: f64,
    pub theta_long: f64,
    pub short_gap_frames: u32,
    pub motion_fit_window: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            w_s: 0.6,
            w_t: 0.4,
            d_base: 50.0,
            d_per_frame: 20.0,
            t_max: 30,
            theta_short: 0.2,
            theta_long: 0.3,
            short_gap_frames: 3,
            motion_fit_window: 5,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if !((self.w_s + self.w_t - 1.0).abs() <= 1e-9 && self.w_s >= 0.0 && self.w_t >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "link weights w_s={} w_t={} must be non-negative and sum to 1",
                self.w_s, self.w_t
            )));
        }
        for (name, v) in [("theta_short", self.theta_short), ("theta_long", self.theta_long)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("{name} = {v} must lie in [0, 1]")));
            }
        }
        if self.t_max == 0 {
            return Err(Error::InvalidInput("t_max must be >= 1".into()));
        }
        if !(self.d_base > 0.0 && self.d_per_frame >= 0.0) {
            return Err(Error::InvalidInput("d_base must be > 0 and d_per_frame >= 0".into()));
        }
        if self.motion_fit_window < 2 {
            return Err(Error::InvalidInput("motion_fit_window must be >= 2".into()));
        }
        Ok(())
    }

    /// Spatial tolerance for a gap of `delta_t` frames.
    pub fn d_max(&self, delta_t: u32) -> f64 {
        self.d_base + self.d_per_frame * f64::from(delta_t)
    }

    /// Acceptance threshold for a gap of `delta_t` frames.
    pub fn threshold(&self, delta_t: u32) -> f64 {
        if delta_t <= self.short_gap_frames {
            self.theta_short
        } else {
            self.theta_long
        }
    }
}

/// Extrapolated track end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub x: f64,
    pub y: f64,
    /// Goodness of the motion fit in `[0, 1]`.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkCandidate {
    pub from_track: String,
    pub to_track: String,
    pub d_spatial: f64,
    pub delta_t: u32,
    pub alpha: f64,
    pub score: f64,
    pub adjusted_score: f64,
}

/// Constant-velocity extrapolation of the track centre `delta_t` frames past
/// its last observation.
///
/// Velocity and intercept come from an ordinary least-squares fit of centre
/// against frame index over the last `fit_window` observations; `alpha` is the
/// joint R^2 of the x and y fits. A track whose centre never moves is a
/// perfect fit. Tracks with fewer than three observations fall back to the
/// last centre with `alpha = 0.5`.
pub fn predict_track_end(track: &Track, delta_t: u32, fit_window: usize) -> Prediction {
    let obs = track.observations();
    let last = track.last();
    let (lx, ly) = last.bbox.center();
    if obs.len() < 3 {
        return Prediction {
            x: lx,
            y: ly,
            alpha: 0.5,
        };
    }
    let tail = &obs[obs.len().saturating_sub(fit_window.max(2))..];
    let n = tail.len() as f64;
    let origin = f64::from(last.frame);
    let ts: Vec<f64> = tail.iter().map(|o| f64::from(o.frame) - origin).collect();
    let xs: Vec<f64> = tail.iter().map(|o| o.bbox.center().0).collect();
    let ys: Vec<f64> = tail.iter().map(|o| o.bbox.center().1).collect();

    let t_mean = ts.iter().sum::<f64>() / n;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut stt = 0.0;
    let mut stx = 0.0;
    let mut sty = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..tail.len() {
        let dt = ts[i] - t_mean;
        let dx = xs[i] - x_mean;
        let dy = ys[i] - y_mean;
        stt += dt * dt;
        stx += dt * dx;
        sty += dt * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let vx = stx / stt;
    let vy = sty / stt;
    let ss_tot = sxx + syy;
    // Residual sum of squares of the LS line: S_vv - S_tv^2 / S_tt per axis.
    let ss_res = (sxx - stx * vx).max(0.0) + (syy - sty * vy).max(0.0);
    let alpha = if ss_tot <= 1e-12 * (1.0 + x_mean * x_mean + y_mean * y_mean) {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    let t_pred = f64::from(delta_t) - t_mean;
    Prediction {
        x: x_mean + vx * t_pred,
        y: y_mean + vy * t_pred,
        alpha,
    }
}

/// Raw and confidence-adjusted affinity for a known spatial distance.
///
/// Each bracketed term is clamped to `[0, 1]` before weighting.
pub fn affinity(d_spatial: f64, delta_t: u32, alpha: f64, config: &LinkConfig) -> (f64, f64) {
    let spatial = (1.0 - d_spatial / config.d_max(delta_t)).clamp(0.0, 1.0);
    let temporal = (1.0 - f64::from(delta_t) / f64::from(config.t_max)).clamp(0.0, 1.0);
    let score = spatial * config.w_s + temporal * config.w_t;
    let alpha = alpha.clamp(0.0, 1.0);
    (score, score * (0.5 + 0.5 * alpha))
}

/// Scores linking the end of `from` to the start of `to`.
pub fn link_score(from: &Track, to: &Track, config: &LinkConfig) -> Result<LinkCandidate> {
    let delta_t = i64::from(to.first_frame()) - i64::from(from.last_frame());
    if delta_t < 1 {
        return Err(Error::NotLinkable { delta_t });
    }
    let delta_t = delta_t as u32;
    let prediction = predict_track_end(from, delta_t, config.motion_fit_window);
    let (sx, sy) = to.first().bbox.center();
    let d_spatial = libm::hypot(prediction.x - sx, prediction.y - sy);
    let (score, adjusted_score) = affinity(d_spatial, delta_t, prediction.alpha, config);
    Ok(LinkCandidate {
        from_track: from.id().into(),
        to_track: to.id().into(),
        d_spatial,
        delta_t,
        alpha: prediction.alpha,
        score,
        adjusted_score,
    })
}

/// A link accepted by [`link_tracks_detailed`].
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedLink {
    /// Identity carried by the merged track.
    pub kept_id: String,
    pub candidate: LinkCandidate,
}

/// Links fragments until no acceptable candidate remains.
pub fn link_tracks(tracks: &[Track], config: &LinkConfig) -> Vec<Track> {
    link_tracks_detailed(tracks, config).0
}

/// [`link_tracks`] that also reports each accepted link.
///
/// Each round scores every same-class (end, start) pair inside the gating
/// limits, sorts candidates by descending adjusted score and accepts them
/// greedily so that each end and each start is used at most once. Linked
/// fragments are concatenated under the earlier fragment's id and the next
/// round starts from the merged set. Output order follows the first
/// appearance of each surviving id in the input.
pub fn link_tracks_detailed(tracks: &[Track], config: &LinkConfig) -> (Vec<Track>, Vec<AcceptedLink>) {
    let mut current: Vec<Track> = tracks.to_vec();
    let mut accepted = Vec::new();
    loop {
        let mut candidates: Vec<(usize, usize, LinkCandidate)> = Vec::new();
        for (i, from) in current.iter().enumerate() {
            for (j, to) in current.iter().enumerate() {
                if i == j || from.class() != to.class() {
                    continue;
                }
                let Ok(candidate) = link_score(from, to, config) else {
                    continue;
                };
                if candidate.delta_t > config.t_max
                    || candidate.d_spatial >= config.d_max(candidate.delta_t)
                    || candidate.adjusted_score <= config.threshold(candidate.delta_t)
                {
                    continue;
                }
                candidates.push((i, j, candidate));
            }
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| {
            b.2.adjusted_score
                .total_cmp(&a.2.adjusted_score)
                .then(a.0.cmp(&b.0))
                .then(a.1.cmp(&b.1))
        });

        let n = current.len();
        let mut next_of: Vec<Option<usize>> = alloc::vec![None; n];
        let mut has_prev = alloc::vec![false; n];
        let mut round: Vec<(usize, LinkCandidate)> = Vec::new();
        for (i, j, candidate) in candidates {
            if next_of[i].is_some() || has_prev[j] {
                continue;
            }
            next_of[i] = Some(j);
            has_prev[j] = true;
            round.push((i, candidate));
        }

        // Chains cannot be cyclic: each link strictly advances in time.
        let mut head_of = alloc::vec![0usize; n];
        let mut slots: Vec<Option<Track>> = current.into_iter().map(Some).collect();
        let mut merged = Vec::with_capacity(n);
        for head in 0..n {
            if has_prev[head] {
                continue;
            }
            let mut chain = slots[head].take().expect("chain head visited once");
            head_of[head] = merged.len();
            let mut cursor = head;
            while let Some(next) = next_of[cursor] {
                let tail = slots[next].take().expect("chain member visited once");
                chain = chain
                    .concat(tail)
                    .expect("accepted links have a positive frame gap");
                cursor = next;
                head_of[cursor] = merged.len();
            }
            merged.push(chain);
        }
        for (i, candidate) in round {
            accepted.push(AcceptedLink {
                kept_id: String::from(merged[head_of[i]].id()),
                candidate,
            });
        }
        current = merged;
    }
    (current, accepted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use crate::track::{ObjectClass, Observation};

    fn track_from_centers(id: &str, start: u32, centers: &[(f64, f64)]) -> Track {
        let obs = centers
            .iter()
            .enumerate()
            .map(|(k, &(x, y))| {
                Observation::new(
                    start + k as u32,
                    BoundingBox::from_center(x, y, 20.0, 40.0).unwrap(),
                    1.0,
                )
            })
            .collect();
        Track::new(id, ObjectClass::Person, obs).unwrap()
    }

    #[test]
    fn exact_linear_motion_extrapolates() {
        let t = track_from_centers(
            "a",
            0,
            &[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)],
        );
        let p = predict_track_end(&t, 2, 5);
        assert!((p.x - 6.0).abs() < 1e-12 && p.y.abs() < 1e-12);
        assert_eq!(p.alpha, 1.0);
    }

    #[test]
    fn short_tracks_fall_back() {
        let t = track_from_centers("a", 0, &[(10.0, 10.0)]);
        let p = predict_track_end(&t, 5, 5);
        assert_eq!((p.x, p.y, p.alpha), (10.0, 10.0, 0.5));
        let t2 = track_from_centers("a", 0, &[(10.0, 10.0), (20.0, 10.0)]);
        assert_eq!(predict_track_end(&t2, 5, 5).alpha, 0.5);
    }

    #[test]
    fn stationary_track_is_a_perfect_fit() {
        let t = track_from_centers("a", 0, &[(7.0, 3.0); 6]);
        let p = predict_track_end(&t, 4, 5);
        assert_eq!(p.alpha, 1.0);
        assert!((p.x - 7.0).abs() < 1e-12);
    }

    #[test]
    fn affinity_examples() {
        let cfg = LinkConfig::default();
        let (s, s_hat) = affinity(0.0, 1, 1.0, &cfg);
        assert!((s - (0.6 + 0.4 * (1.0 - 1.0 / 30.0))).abs() < 1e-15);
        assert!((s - 0.986_666_666_666_666_7).abs() < 1e-12);
        assert_eq!(s, s_hat);

        let (s, _) = affinity(cfg.d_max(4), 4, 1.0, &cfg);
        assert!((s - 0.4 * (1.0 - 4.0 / 30.0)).abs() < 1e-15);

        let (s, s_hat) = affinity(10.0, 2, 0.0, &cfg);
        assert!((s_hat - 0.5 * s).abs() < 1e-15);
    }

    #[test]
    fn thresholds_switch_after_three_frames() {
        let cfg = LinkConfig::default();
        assert_eq!(cfg.threshold(1), 0.2);
        assert_eq!(cfg.threshold(3), 0.2);
        assert_eq!(cfg.threshold(4), 0.3);
        assert_eq!(cfg.d_max(2), 90.0);
    }

    #[test]
    fn overlapping_tracks_are_not_linkable() {
        let a = track_from_centers("a", 0, &[(0.0, 0.0), (1.0, 0.0)]);
        let b = track_from_centers("b", 1, &[(2.0, 0.0)]);
        assert!(matches!(
            link_score(&a, &b, &LinkConfig::default()),
            Err(Error::NotLinkable { delta_t: 0 })
        ));
    }

    #[test]
    fn relinks_split_trajectory() {
        let centers: Vec<(f64, f64)> = (0..21).map(|f| (100.0 + 3.0 * f as f64, 200.0)).collect();
        let a = track_from_centers("a", 0, &centers[..10]);
        let b = track_from_centers("b", 12, &centers[12..]);
        let (out, links) = link_tracks_detailed(&[b, a], &LinkConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id(), "a");
        assert_eq!(out[0].len(), 19);
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].kept_id, "a");
        assert_eq!(links[0].candidate.delta_t, 3);
    }

    #[test]
    fn distant_pedestrians_are_not_cross_linked() {
        let left: Vec<(f64, f64)> = (0..20).map(|f| (100.0 + 2.0 * f as f64, 300.0)).collect();
        let right: Vec<(f64, f64)> = (0..20).map(|f| (600.0 + 2.0 * f as f64, 300.0)).collect();
        let a = track_from_centers("a", 0, &left[..8]);
        let b = track_from_centers("b", 11, &right[11..]);
        let c = link_score(&a, &b, &LinkConfig::default()).unwrap();
        assert!(c.d_spatial >= 500.0);
        let out = link_tracks(&[a, b], &LinkConfig::default());
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn empty_input() {
        assert!(link_tracks(&[], &LinkConfig::default()).is_empty());
    }

    #[test]
    fn chains_of_three_fragments_merge() {
        let centers: Vec<(f64, f64)> = (0..30).map(|f| (50.0 + 2.0 * f as f64, 80.0)).collect();
        let a = track_from_centers("a", 0, &centers[..8]);
        let b = track_from_centers("b", 10, &centers[10..18]);
        let c = track_from_centers("c", 20, &centers[20..]);
        let out = link_tracks(&[c, a, b], &LinkConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id(), "a");
        assert_eq!(out[0].len(), 26);
    }

    #[test]
    fn config_validation() {
        assert!(LinkConfig::default().validate().is_ok());
        let bad = LinkConfig {
            w_s: 0.7,
            ..LinkConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
