//! Synthetic scenes with known kinematics, used as ground-truth oracles.
//!
//! Agents move with a constant road velocity and a constant per-frame scale
//! rate; the camera adds a constant image-plane translation. Because the flow
//! fields are the uniform camera field, ego-motion compensation is exactly
//! recoverable and truth labels follow analytically from the kinematics.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{ObjectAnnotation, Risk, SceneAnnotation};
use crate::egomotion::{FlowField, GrayImage};
use crate::geometry::{BoundingBox, FrameSize};
use crate::intent::{majority, IntentConfig};
use crate::labels::{IntentLabel, LateralIntent, RelativePosition, VerticalIntent};
use crate::track::{AnnotationGroup, ObjectClass, Observation, Track};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub class: ObjectClass,
    pub initial_box: BoundingBox,
    /// Road-relative image velocity in px/frame.
    pub road_velocity: (f64, f64),
    /// Relative size change per frame (0.01 = +1 % per frame).
    pub scale_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fragmentation {
    pub split_frame: u32,
    pub gap: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScenario {
    pub seed: u64,
    pub frame: FrameSize,
    pub n_frames: u32,
    pub camera_velocity: (f64, f64),
    pub agents: Vec<AgentSpec>,
    pub fragmentation: Option<Fragmentation>,
    pub noise_sigma: f64,
}

/// Analytic ground truth for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTruth {
    pub agent: usize,
    pub class: ObjectClass,
    /// Ids of the tracks emitted for this agent (two when fragmented).
    pub track_ids: Vec<String>,
    pub label: IntentLabel,
    pub position: RelativePosition,
    /// Noise-free box at the agent's last observed frame.
    pub final_box: BoundingBox,
    pub last_frame: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub tracks: Vec<Track>,
    /// `flow_fields[t]` maps frame `t` to frame `t + 1`.
    pub flow_fields: Vec<FlowField>,
    pub truth: Vec<AgentTruth>,
    /// Camera velocity actually rendered (rounded to `f32`).
    pub camera_velocity: (f64, f64),
}

impl SynthScenario {
    pub fn validate(&self, config: &IntentConfig) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::ScenarioInvalid("scenario has no agents".into()));
        }
        if self.n_frames < config.longest_window() || self.n_frames < 2 {
            return Err(Error::ScenarioInvalid(format!(
                "{} frames cannot cover the longest intent window ({})",
                self.n_frames,
                config.longest_window()
            )));
        }
        if let Some(f) = self.fragmentation {
            if f.gap == 0 {
                return Err(Error::ScenarioInvalid("fragmentation gap must be >= 1".into()));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::ScenarioInvalid(format!(
                "noise sigma {} must be finite and >= 0",
                self.noise_sigma
            )));
        }
        let finite = |v: (f64, f64)| v.0.is_finite() && v.1.is_finite();
        if !finite(self.camera_velocity) {
            return Err(Error::ScenarioInvalid("camera velocity must be finite".into()));
        }
        for (k, a) in self.agents.iter().enumerate() {
            if !finite(a.road_velocity) || !(a.scale_rate > -1.0 && a.scale_rate.is_finite()) {
                return Err(Error::ScenarioInvalid(format!("agent {k} has invalid kinematics")));
            }
        }
        Ok(())
    }
}

fn round_f32(v: f64) -> f64 {
    f64::from(v as f32)
}

/// Noise-free box of `agent` at `frame` given the rendered camera velocity.
fn ideal_box(agent: &AgentSpec, camera: (f64, f64), frame: u32) -> Result<BoundingBox> {
    let t = f64::from(frame);
    let scale = libm::pow(1.0 + agent.scale_rate, t);
    let (cx, cy) = agent.initial_box.center();
    BoundingBox::from_center(
        cx + (agent.road_velocity.0 + camera.0) * t,
        cy + (agent.road_velocity.1 + camera.1) * t,
        agent.initial_box.width() * scale,
        agent.initial_box.height() * scale,
    )
}

/// Track id used for agent `k`.
pub fn agent_track_id(k: usize) -> String {
    format!("agent-{k}")
}

/// Renders the scenario.
///
/// Observations exist while the noise-free box overlaps the frame. An agent
/// that is gone before the shortest intent window has elapsed makes the
/// scenario invalid. Noise draws happen in agent-major, frame-minor order.
pub fn generate(scenario: &SynthScenario, config: &IntentConfig) -> Result<SynthOutput> {
    scenario.validate(config)?;
    let camera = (
        round_f32(scenario.camera_velocity.0),
        round_f32(scenario.camera_velocity.1),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = Normal::new(0.0, scenario.noise_sigma)
        .map_err(|e| Error::ScenarioInvalid(format!("noise distribution: {e}")))?;

    let mut tracks = Vec::new();
    let mut truth = Vec::new();
    for (k, agent) in scenario.agents.iter().enumerate() {
        let mut frames: Vec<u32> = Vec::new();
        let mut boxes: Vec<BoundingBox> = Vec::new();
        for f in 0..scenario.n_frames {
            let ideal = ideal_box(agent, camera, f)?;
            if ideal.clip(scenario.frame).is_none() {
                break;
            }
            frames.push(f);
            boxes.push(ideal);
        }
        if frames.len() <= config.shortest_window() as usize {
            return Err(Error::ScenarioInvalid(format!(
                "agent {k} leaves the frame after {} frames",
                frames.len()
            )));
        }

        let observations: Vec<Observation> = frames
            .iter()
            .zip(&boxes)
            .map(|(&f, ideal)| {
                let (nx, ny) = if scenario.noise_sigma > 0.0 {
                    (noise.sample(&mut rng), noise.sample(&mut rng))
                } else {
                    (0.0, 0.0)
                };
                let noisy = ideal.translate(nx, ny)?;
                Ok(Observation::new(f, noisy, 1.0))
            })
            .collect::<Result<_>>()?;
        let whole = Track::new(agent_track_id(k), agent.class, observations)?;

        let emitted = match scenario.fragmentation {
            Some(frag) => {
                let (a, b) = fragment(&whole, frag.split_frame, frag.gap)?;
                alloc::vec![a, b]
            }
            None => alloc::vec![whole],
        };
        let observed: Vec<u32> = emitted
            .iter()
            .flat_map(|t| t.observations().iter().map(|o| o.frame))
            .collect();
        let last_frame = *observed.last().expect("tracks are non-empty");
        let final_box = ideal_box(agent, camera, last_frame)?;
        truth.push(AgentTruth {
            agent: k,
            class: agent.class,
            track_ids: emitted.iter().map(|t| String::from(t.id())).collect(),
            label: analytic_label(agent, &observed, config),
            position: analytic_position(final_box.center().0, scenario.frame, config),
            final_box,
            last_frame,
        });
        tracks.extend(emitted);
    }

    let field = FlowField::uniform(
        scenario.frame.width(),
        scenario.frame.height(),
        camera.0 as f32,
        camera.1 as f32,
    )?;
    let flow_fields = alloc::vec![field; scenario.n_frames.saturating_sub(1) as usize];

    Ok(SynthOutput {
        tracks,
        flow_fields,
        truth,
        camera_velocity: camera,
    })
}

/// Labels implied by the kinematics over the observed frames.
///
/// Mirrors the look-back windows of the classifier: for each window the span
/// `s` between the last observed frame and the first observed frame inside
/// the window gives road displacement `v * s` and scale ratio `(1 + r)^s`.
fn analytic_label(agent: &AgentSpec, observed: &[u32], config: &IntentConfig) -> IntentLabel {
    if observed.len() < config.min_track_len {
        return IntentLabel::STATIONARY;
    }
    let last = *observed.last().expect("non-empty");
    let end_width = agent.initial_box.width() * libm::pow(1.0 + agent.scale_rate, f64::from(last));
    let mut windows = config.windows.clone();
    windows.sort_unstable();
    windows.dedup();

    let mut lateral = Vec::new();
    let mut vertical = Vec::new();
    for w in windows {
        let start = last.saturating_sub(w);
        let first = observed.iter().copied().find(|&f| f >= start).unwrap_or(last);
        let span = f64::from(last - first);
        if span == 0.0 {
            continue;
        }
        let dx = agent.road_velocity.0 * span;
        let dy = agent.road_velocity.1 * span;
        let ratio = libm::pow(1.0 + agent.scale_rate, span);

        let deadband = config
            .lateral_deadband_px
            .max(config.lateral_deadband_frac_of_width * end_width);
        lateral.push(if dx.abs() < deadband {
            LateralIntent::Stationary
        } else if dx > 0.0 {
            LateralIntent::GoesToTheRight
        } else {
            LateralIntent::GoesToTheLeft
        });

        let eps = config.vertical_scale_ratio_eps;
        let db = config.vertical_deadband_px;
        vertical.push(if ratio > 1.0 + eps {
            VerticalIntent::MovesTowardsEgoVehicle
        } else if ratio < 1.0 - eps {
            VerticalIntent::MovesAwayFromEgoVehicle
        } else if dy > db {
            VerticalIntent::MovesTowardsEgoVehicle
        } else if dy < -db {
            VerticalIntent::MovesAwayFromEgoVehicle
        } else {
            VerticalIntent::Stationary
        });
    }
    IntentLabel {
        lateral: majority(&lateral).unwrap_or(LateralIntent::Stationary),
        vertical: majority(&vertical).unwrap_or(VerticalIntent::Stationary),
    }
}

fn analytic_position(x: f64, frame: FrameSize, config: &IntentConfig) -> RelativePosition {
    let width = f64::from(frame.width());
    if x < config.left_boundary_frac * width {
        RelativePosition::Left
    } else if x > config.right_boundary_frac * width {
        RelativePosition::Right
    } else {
        RelativePosition::Front
    }
}

/// Splits a track at `split_frame`, dropping `gap` frames.
///
/// The first fragment keeps frames `< split_frame`, the second frames
/// `>= split_frame + gap`. Each side must keep at least two observations.
/// Fragments are named `<id>.0` and `<id>.1`.
pub fn fragment(track: &Track, split_frame: u32, gap: u32) -> Result<(Track, Track)> {
    let resume = split_frame.saturating_add(gap);
    let (head, rest): (Vec<Observation>, Vec<Observation>) = track
        .observations()
        .iter()
        .partition(|o| o.frame < split_frame);
    let tail: Vec<Observation> = rest.into_iter().filter(|o| o.frame >= resume).collect();
    if head.len() < 2 || tail.len() < 2 {
        return Err(Error::InvalidSplit(format!(
            "split of {:?} at {split_frame} with gap {gap} leaves {} + {} observations",
            track.id(),
            head.len(),
            tail.len()
        )));
    }
    Ok((
        Track::new(format!("{}.0", track.id()), track.class(), head)?,
        Track::new(format!("{}.1", track.id()), track.class(), tail)?,
    ))
}

/// Ground-truth sample for a rendered scenario: one object per agent, keyed
/// `1..`, with the noise-free final box and analytic labels.
pub fn truth_sample(output: &SynthOutput, sample_id: &str) -> SceneAnnotation {
    let mut sample = SceneAnnotation::new(sample_id, Risk::Yes);
    sample.image_path = format!("synth/{sample_id}.png");
    sample.video_path = format!("synth/{sample_id}.mp4");
    sample.suggested_action = "be aware or cautious".into();
    for t in &output.truth {
        let mut obj = ObjectAnnotation::new(t.final_box);
        obj.intent = Some(t.label);
        obj.position = Some(t.position);
        sample
            .group_mut(t.class.group())
            .insert(format!("{}", t.agent + 1), obj);
    }
    sample
}

/// The same sample with intents and positions cleared, as handed to the
/// annotation pipeline.
pub fn unlabeled(sample: &SceneAnnotation) -> SceneAnnotation {
    let mut out = sample.clone();
    for group in [AnnotationGroup::Pedestrian, AnnotationGroup::Cyclist] {
        for obj in out.group_mut(group).values_mut() {
            obj.intent = None;
            obj.position = None;
        }
    }
    out
}

/// Knobs for [`sample_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSampler {
    pub frame: FrameSize,
    pub n_frames: u32,
    pub max_agents: usize,
    /// Agents are placed in distinct horizontal lanes centred on these rows.
    pub lanes: Vec<f64>,
    /// Initial centre x is drawn uniformly from this range.
    pub x_range: (f64, f64),
    pub height_range: (f64, f64),
    /// Probability that a velocity component / scale rate is exactly zero.
    pub p_still: f64,
    pub lateral_speed: (f64, f64),
    pub vertical_speed: (f64, f64),
    pub scale_rate: (f64, f64),
    pub p_cyclist: f64,
    pub camera_velocity: (f64, f64),
    pub p_fragmented: f64,
    pub max_gap: u32,
    pub noise_sigma: f64,
}

impl Default for ScenarioSampler {
    fn default() -> Self {
        Self {
            frame: FrameSize::new(960, 720).expect("non-zero"),
            n_frames: 20,
            max_agents: 3,
            lanes: alloc::vec![150.0, 360.0, 570.0],
            x_range: (350.0, 610.0),
            height_range: (60.0, 110.0),
            p_still: 0.2,
            lateral_speed: (1.5, 4.0),
            vertical_speed: (1.0, 2.5),
            scale_rate: (0.006, 0.015),
            p_cyclist: 0.2,
            camera_velocity: (0.0, 0.0),
            p_fragmented: 0.5,
            max_gap: 3,
            noise_sigma: 0.0,
        }
    }
}

/// Draws a scenario from the sampler's family; deterministic in `seed`.
pub fn sample_scenario(seed: u64, sampler: &ScenarioSampler) -> Result<SynthScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let lanes = sampler.lanes.len().min(sampler.max_agents).max(1);
    let n_agents = rng.random_range(1..=lanes);
    let mut lane_order: Vec<usize> = (0..sampler.lanes.len()).collect();
    for i in (1..lane_order.len()).rev() {
        lane_order.swap(i, rng.random_range(0..=i));
    }

    let signed = |rng: &mut ChaCha8Rng, range: (f64, f64)| -> f64 {
        if rng.random_bool(sampler.p_still) {
            0.0
        } else {
            let magnitude = rng.random_range(range.0..=range.1);
            if rng.random_bool(0.5) {
                magnitude
            } else {
                -magnitude
            }
        }
    };

    let mut agents = Vec::with_capacity(n_agents);
    for &lane in lane_order.iter().take(n_agents) {
        let cyclist = rng.random_bool(sampler.p_cyclist);
        let height = rng.random_range(sampler.height_range.0..=sampler.height_range.1);
        let width = height * if cyclist { 0.7 } else { 0.4 };
        let cx = rng.random_range(sampler.x_range.0..=sampler.x_range.1);
        let vx = signed(&mut rng, sampler.lateral_speed);
        let vy = signed(&mut rng, sampler.vertical_speed);
        let rate = signed(&mut rng, sampler.scale_rate);
        agents.push(AgentSpec {
            class: if cyclist { ObjectClass::Cyclist } else { ObjectClass::Person },
            initial_box: BoundingBox::from_center(cx, sampler.lanes[lane], width, height)?,
            road_velocity: (vx, vy),
            scale_rate: rate,
        });
    }

    let fragmentation = if sampler.max_gap > 0 && rng.random_bool(sampler.p_fragmented) {
        let gap = rng.random_range(1..=sampler.max_gap);
        let split = rng.random_range(2..=sampler.n_frames.saturating_sub(gap + 2).max(2));
        Some(Fragmentation {
            split_frame: split,
            gap,
        })
    } else {
        None
    };

    Ok(SynthScenario {
        seed,
        frame: sampler.frame,
        n_frames: sampler.n_frames,
        camera_velocity: sampler.camera_velocity,
        agents,
        fragmentation,
        noise_sigma: sampler.noise_sigma,
    })
}

/// Textured frame pair where every pixel of `prev` moves by `(tx, ty)`.
///
/// Both frames are crops of one larger noise texture, so no wrap-around or
/// padding artefacts enter the frame.
pub fn textured_pair(seed: u64, width: u32, height: u32, tx: i32, ty: i32) -> Result<(GrayImage, GrayImage)> {
    let pad = tx.unsigned_abs().max(ty.unsigned_abs());
    let (bw, bh) = (width + 2 * pad, height + 2 * pad);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texture: Vec<u8> = (0..bw as usize * bh as usize).map(|_| rng.random()).collect();
    let crop = |ox: i64, oy: i64| -> Result<GrayImage> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..i64::from(height) {
            let row = ((y + oy) * i64::from(bw)) as usize;
            let start = row + ox as usize;
            pixels.extend_from_slice(&texture[start..start + width as usize]);
        }
        GrayImage::new(width, height, pixels)
    };
    let p = i64::from(pad);
    Ok((crop(p, p)?, crop(p - i64::from(tx), p - i64::from(ty))?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_agent(velocity: (f64, f64), camera: (f64, f64), scale_rate: f64) -> SynthScenario {
        SynthScenario {
            seed: 1,
            frame: FrameSize::new(960, 720).unwrap(),
            n_frames: 20,
            camera_velocity: camera,
            agents: alloc::vec![AgentSpec {
                class: ObjectClass::Person,
                initial_box: BoundingBox::from_center(480.0, 360.0, 40.0, 100.0).unwrap(),
                road_velocity: velocity,
                scale_rate,
            }],
            fragmentation: None,
            noise_sigma: 0.0,
        }
    }

    #[test]
    fn truth_by_construction() {
        let cfg = IntentConfig::default();
        let out = generate(&single_agent((4.0, 0.0), (0.0, 0.0), 0.0), &cfg).unwrap();
        assert_eq!(
            out.truth[0].label,
            IntentLabel::new(LateralIntent::GoesToTheRight, VerticalIntent::Stationary)
        );
        let out = generate(&single_agent((0.0, 0.0), (4.0, 0.0), 0.0), &cfg).unwrap();
        assert_eq!(out.truth[0].label, IntentLabel::STATIONARY);
        // apparent motion is the camera's
        let t = &out.tracks[0];
        assert_eq!(t.last().bbox.center().0 - t.first().bbox.center().0, 4.0 * 19.0);
        assert_eq!(out.flow_fields.len(), 19);
        assert_eq!(out.flow_fields[0].get(0, 0), [4.0, 0.0]);
    }

    #[test]
    fn compounded_growth_reads_as_approach() {
        // 1.01^15 ~= 1.161 > 1.02
        assert!(libm::pow(1.01, 15.0) > 1.16);
        let out = generate(&single_agent((0.0, 0.0), (0.0, 0.0), 0.01), &IntentConfig::default()).unwrap();
        assert_eq!(out.truth[0].label.vertical, VerticalIntent::MovesTowardsEgoVehicle);
    }

    #[test]
    fn generation_is_deterministic() {
        let mut s = single_agent((1.0, 2.0), (0.5, 0.0), 0.0);
        s.noise_sigma = 1.0;
        let cfg = IntentConfig::default();
        assert_eq!(generate(&s, &cfg).unwrap(), generate(&s, &cfg).unwrap());
        let mut other = s.clone();
        other.seed = 2;
        assert_ne!(generate(&s, &cfg).unwrap().tracks, generate(&other, &cfg).unwrap().tracks);
    }

    #[test]
    fn fragment_examples() {
        let out = generate(&single_agent((1.0, 0.0), (0.0, 0.0), 0.0), &IntentConfig::default()).unwrap();
        let (a, b) = fragment(&out.tracks[0], 10, 2).unwrap();
        assert_eq!((a.first_frame(), a.last_frame()), (0, 9));
        assert_eq!((b.first_frame(), b.last_frame()), (12, 19));
        assert_ne!(a.id(), b.id());
        assert!(matches!(fragment(&out.tracks[0], 1, 2), Err(Error::InvalidSplit(_))));
        assert!(fragment(&out.tracks[0], 17, 2).is_err());
    }

    #[test]
    fn agent_leaving_early_is_invalid() {
        let s = single_agent((-200.0, 0.0), (0.0, 0.0), 0.0);
        assert!(matches!(
            generate(&s, &IntentConfig::default()),
            Err(Error::ScenarioInvalid(_))
        ));
    }

    #[test]
    fn scenario_validation() {
        let cfg = IntentConfig::default();
        let mut s = single_agent((1.0, 0.0), (0.0, 0.0), 0.0);
        s.n_frames = 10;
        assert!(s.validate(&cfg).is_err());
        let mut s = single_agent((1.0, 0.0), (0.0, 0.0), 0.0);
        s.agents.clear();
        assert!(s.validate(&cfg).is_err());
        let mut s = single_agent((1.0, 0.0), (0.0, 0.0), 0.0);
        s.fragmentation = Some(Fragmentation { split_frame: 5, gap: 0 });
        assert!(s.validate(&cfg).is_err());
    }

    #[test]
    fn textured_pair_is_a_translation() {
        let (a, b) = textured_pair(3, 40, 30, 5, -2).unwrap();
        for y in 2..28 {
            for x in 0..35 {
                assert_eq!(a.get(x, y), b.get(x + 5, y - 2));
            }
        }
    }

    #[test]
    fn sampler_is_deterministic_and_valid() {
        let sampler = ScenarioSampler::default();
        let cfg = IntentConfig::default();
        for seed in 0..50 {
            let s = sample_scenario(seed, &sampler).unwrap();
            assert_eq!(s, sample_scenario(seed, &sampler).unwrap());
            generate(&s, &cfg).unwrap();
        }
    }
}
