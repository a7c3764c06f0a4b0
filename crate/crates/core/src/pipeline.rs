//! End-to-end annotation of a sample and dataset-level evaluation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::curation::{CurationConfig, Detection, DEFAULT_DEDUP_IOU};
use crate::dataset::{Dataset, ObjectAnnotation, SceneAnnotation};
use crate::egomotion::{
    adjacent_region, camera_displacement, Aggregator, FlowField, DEFAULT_BLOCK, DEFAULT_MARGIN_FRAC,
    DEFAULT_SEARCH_RADIUS,
};
use crate::geometry::{iou, BoundingBox, FrameSize};
use crate::intent::{classify_position, infer_intent, CameraTrack, IntentConfig};
use crate::labels::{IntentLabel, RelativePosition};
use crate::matching::{match_tracks_to_annotations, DEFAULT_THETA_IOU};
use crate::metrics::{
    action_similarity, intent_accuracy, od_match, risk_metrics, ConfusionCounts, DetectionEvalInput,
    TokenF1, DEFAULT_OD_IOU,
};
use crate::track::{AnnotationGroup, Track};
use crate::tracklink::{link_tracks_detailed, LinkConfig};
use crate::{Error, Result};

/// Where per-frame flow comes from. The core only consumes flow fields; the
/// command-line front end resolves this setting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum FlowSource {
    #[default]
    Precomputed,
    BlockMatching { block: u32, search_radius: u32 },
}

impl FlowSource {
    pub fn block_matching() -> Self {
        FlowSource::BlockMatching {
            block: DEFAULT_BLOCK,
            search_radius: DEFAULT_SEARCH_RADIUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub curation: CurationConfig,
    pub link: LinkConfig,
    pub theta_iou: f64,
    pub intent: IntentConfig,
    pub flow_source: FlowSource,
    pub aggregator: Aggregator,
    pub margin_frac: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            curation: CurationConfig::default(),
            link: LinkConfig::default(),
            theta_iou: DEFAULT_THETA_IOU,
            intent: IntentConfig::default(),
            flow_source: FlowSource::default(),
            aggregator: Aggregator::default(),
            margin_frac: DEFAULT_MARGIN_FRAC,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.curation.validate()?;
        self.link.validate()?;
        self.intent.validate()?;
        if !(self.theta_iou > 0.0 && self.theta_iou <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "theta_iou {} must lie in (0, 1]",
                self.theta_iou
            )));
        }
        if !(self.margin_frac > 0.0 && self.margin_frac.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "margin_frac {} must be positive",
                self.margin_frac
            )));
        }
        if let FlowSource::BlockMatching { block, .. } = self.flow_source {
            if block == 0 {
                return Err(Error::InvalidInput("block size must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Per-run switches for [`annotate_sample`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnnotateOptions {
    /// Overwrite intents that are already filled in.
    pub force: bool,
    /// Frame at which annotation boxes are valid; defaults to the latest
    /// frame seen by any track.
    pub key_frame: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SampleFlag {
    /// No tracks were supplied; every object was labelled stationary.
    DegradedInput,
    /// The Hungarian solver failed and greedy matching was used.
    GreedyFallback,
    Unmatched { group: AnnotationGroup, id: String },
    Duplicate { group: AnnotationGroup, id: String, of: String },
    /// The object already carried an intent and `force` was off.
    Skipped { group: AnnotationGroup, id: String },
    /// Some frames had no usable flow around the object.
    MissingCamera { group: AnnotationGroup, id: String },
}

fn group_name(g: AnnotationGroup) -> &'static str {
    match g {
        AnnotationGroup::Pedestrian => "pedestrians",
        AnnotationGroup::Cyclist => "cyclists",
    }
}

impl fmt::Display for SampleFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleFlag::DegradedInput => f.write_str("degraded-input"),
            SampleFlag::GreedyFallback => f.write_str("greedy-fallback"),
            SampleFlag::Unmatched { group, id } => write!(f, "unmatched:{}/{id}", group_name(*group)),
            SampleFlag::Duplicate { group, id, of } => {
                write!(f, "duplicate:{}/{id}->{of}", group_name(*group))
            }
            SampleFlag::Skipped { group, id } => write!(f, "skipped:{}/{id}", group_name(*group)),
            SampleFlag::MissingCamera { group, id } => {
                write!(f, "missing-camera:{}/{id}", group_name(*group))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleReport {
    pub sample_id: String,
    pub tracks_in: usize,
    pub tracks_linked: usize,
    pub links_accepted: usize,
    pub matched: usize,
    pub key_frame: Option<u32>,
    pub flags: Vec<SampleFlag>,
}

/// Camera displacement per frame near `track`, over the frames the intent
/// windows can reach. Frames without flow or with a degenerate region are
/// left out (the intent stage then flags them).
pub fn camera_track_for(
    track: &Track,
    flows: &[FlowField],
    frame: FrameSize,
    config: &PipelineConfig,
) -> CameraTrack {
    let last = track.last_frame();
    let start = track
        .first_frame()
        .max(last.saturating_sub(config.intent.longest_window()));
    let mut cam = CameraTrack::new();
    for t in start..last {
        let (Some(flow), Some(obs)) = (flows.get(t as usize), track.at_or_before(t)) else {
            continue;
        };
        let Ok(region) = adjacent_region(&obs.bbox, frame, config.margin_frac) else {
            continue;
        };
        if let Ok(d) = camera_displacement(flow, &region, config.aggregator) {
            cam.insert(t, d);
        }
    }
    cam
}

/// Fills Intent and Position for every object of `sample`.
///
/// Tracks are linked, matched to the annotation boxes at the key frame within
/// each class group, and each matched object's intent is inferred from its
/// track with camera motion measured in the ring around the object. Boxes are
/// never modified.
pub fn annotate_sample(
    sample: &SceneAnnotation,
    tracks: &[Track],
    flows: &[FlowField],
    frame: FrameSize,
    config: &PipelineConfig,
    options: AnnotateOptions,
) -> Result<(SceneAnnotation, SampleReport)> {
    config.validate()?;
    let mut out = sample.clone();
    let mut report = SampleReport {
        sample_id: sample.sample_id.clone(),
        tracks_in: tracks.len(),
        ..SampleReport::default()
    };
    if sample.object_count() == 0 {
        return Ok((out, report));
    }

    let objects: Vec<(AnnotationGroup, String, BoundingBox)> = sample
        .objects()
        .map(|(g, id, o)| (g, id.clone(), o.bbox))
        .collect();
    let mut results: Vec<Option<(IntentLabel, RelativePosition, bool)>> =
        alloc::vec![None; objects.len()];

    if tracks.is_empty() {
        report.flags.push(SampleFlag::DegradedInput);
    } else {
        let (linked, accepted) = link_tracks_detailed(tracks, &config.link);
        report.tracks_linked = linked.len();
        report.links_accepted = accepted.len();
        let key_frame = options
            .key_frame
            .unwrap_or_else(|| linked.iter().map(Track::last_frame).max().unwrap_or(0));
        report.key_frame = Some(key_frame);

        let annotations: Vec<(AnnotationGroup, BoundingBox)> =
            objects.iter().map(|(g, _, b)| (*g, *b)).collect();
        let m = match_tracks_to_annotations(&linked, &annotations, key_frame, config.theta_iou);
        if m.used_greedy_fallback {
            report.flags.push(SampleFlag::GreedyFallback);
        }
        report.matched = m.assignment.pairs.len();
        for &(t, a) in &m.assignment.pairs {
            let cam = camera_track_for(&linked[t], flows, frame, config);
            let r = infer_intent(&linked[t], &cam, frame, &config.intent);
            results[a] = Some((r.label, r.position, r.missing_camera));
        }
        for &(removed, survivor) in &m.duplicate_of {
            results[removed] = results[survivor];
            let (g, id, _) = &objects[removed];
            report.flags.push(SampleFlag::Duplicate {
                group: *g,
                id: id.clone(),
                of: objects[survivor].1.clone(),
            });
        }
    }

    for (k, (group, id, bbox)) in objects.iter().enumerate() {
        let target = out
            .group_mut(*group)
            .get_mut(id)
            .expect("object ids come from the sample");
        if target.intent.is_some() && !options.force {
            report.flags.push(SampleFlag::Skipped {
                group: *group,
                id: id.clone(),
            });
            continue;
        }
        let (label, position) = match results[k] {
            Some((label, position, missing)) => {
                if missing {
                    report.flags.push(SampleFlag::MissingCamera {
                        group: *group,
                        id: id.clone(),
                    });
                }
                (label, position)
            }
            None => {
                let is_duplicate = report
                    .flags
                    .iter()
                    .any(|f| matches!(f, SampleFlag::Duplicate { group: g, id: i, .. } if g == group && i == id));
                if !is_duplicate && !tracks.is_empty() {
                    report.flags.push(SampleFlag::Unmatched {
                        group: *group,
                        id: id.clone(),
                    });
                }
                (
                    IntentLabel::STATIONARY,
                    classify_position(bbox.center().0, frame, &config.intent),
                )
            }
        };
        target.intent = Some(label);
        target.position = Some(position);
    }
    report.flags.sort();
    Ok((out, report))
}

/// Adds curated detections that no existing annotation box covers.
///
/// Union-then-deduplicate: a detection is dropped when a box of the same
/// group overlaps it with IoU above `dedup_iou`; survivors become new objects
/// with fresh numeric ids. Returns the number of objects added.
pub fn merge_detections(sample: &mut SceneAnnotation, detections: &[Detection], dedup_iou: f64) -> usize {
    let mut added = 0;
    for d in detections {
        let group = d.class.group();
        let covered = sample
            .group(group)
            .values()
            .any(|o| iou(&o.bbox, &d.bbox) > dedup_iou);
        if covered {
            continue;
        }
        let map = sample.group_mut(group);
        let mut next = map.len() + 1;
        while map.contains_key(&next.to_string()) {
            next += 1;
        }
        map.insert(next.to_string(), ObjectAnnotation::new(d.bbox));
        added += 1;
    }
    added
}

/// Dedup threshold used by [`merge_detections`] unless configured otherwise.
pub const DEFAULT_MERGE_IOU: f64 = DEFAULT_DEDUP_IOU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Intent pairs come from detection matching; unmatched objects are wrong.
    Full,
    /// Ground-truth boxes are given; objects pair by id.
    GtBoxes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub od: Option<f64>,
    pub lip: Option<f64>,
    pub vip: Option<f64>,
    pub combined: Option<f64>,
    pub ra_ba: Option<f64>,
    pub ra_f1: Option<f64>,
    pub action_similarity: Option<f64>,
    pub n_samples: usize,
    pub flags: Vec<String>,
}

/// Scores `pred` against `gt` on the samples both contain.
///
/// `external_scores` (sample id to similarity) replaces the token-F1 scorer
/// for the action task when given.
pub fn run_evaluation(
    gt: &Dataset,
    pred: &Dataset,
    mode: EvalMode,
    external_scores: Option<&BTreeMap<String, f64>>,
) -> Result<EvaluationReport> {
    let common: Vec<(&SceneAnnotation, &SceneAnnotation)> = gt
        .iter()
        .filter_map(|(id, g)| pred.get(id).map(|p| (g, p)))
        .collect();
    if common.is_empty() {
        return Err(Error::EvaluationImpossible(
            "ground truth and predictions share no sample ids".into(),
        ));
    }
    let mut flags = Vec::new();
    let gt_only = gt.len() - common.len();
    let pred_only = pred.len() - common.len();
    if gt_only > 0 {
        flags.push(format!("samples-missing-prediction:{gt_only}"));
    }
    if pred_only > 0 {
        flags.push(format!("samples-without-ground-truth:{pred_only}"));
    }

    let mut matched = 0usize;
    let mut n_gt = 0usize;
    let mut intent_pairs = Vec::new();
    let mut unlabeled_gt = 0usize;
    let mut counts = ConfusionCounts::default();
    let mut action_pairs: Vec<(&str, &str)> = Vec::new();
    let mut external: Vec<f64> = Vec::new();
    let mut missing_scores = 0usize;

    for (g, p) in &common {
        let g_objs: Vec<(AnnotationGroup, &String, &ObjectAnnotation)> = g.objects().collect();
        let p_objs: Vec<(AnnotationGroup, &String, &ObjectAnnotation)> = p.objects().collect();
        let od = od_match(&DetectionEvalInput {
            ground_truth: g_objs.iter().map(|o| o.2.bbox).collect(),
            predictions: p_objs.iter().map(|o| o.2.bbox).collect(),
            iou_threshold: DEFAULT_OD_IOU,
        });
        matched += od.matched;
        n_gt += od.n_gt;

        let mut partner: Vec<Option<&ObjectAnnotation>> = alloc::vec![None; g_objs.len()];
        match mode {
            EvalMode::Full => {
                for &(gi, pi) in &od.pairs {
                    partner[gi] = Some(p_objs[pi].2);
                }
            }
            EvalMode::GtBoxes => {
                for (gi, (group, id, _)) in g_objs.iter().enumerate() {
                    partner[gi] = p.group(*group).get(*id);
                }
            }
        }
        for (gi, (_, _, obj)) in g_objs.iter().enumerate() {
            match obj.intent {
                Some(truth) => intent_pairs.push((partner[gi].and_then(|o| o.intent), truth)),
                None => unlabeled_gt += 1,
            }
        }

        counts.record(p.risk.is_positive(), g.risk.is_positive());

        match external_scores {
            Some(scores) => match scores.get(&g.sample_id) {
                Some(&s) => external.push(s.clamp(0.0, 1.0)),
                None => missing_scores += 1,
            },
            None => action_pairs.push((p.suggested_action.as_str(), g.suggested_action.as_str())),
        }
    }

    let od = if n_gt == 0 {
        flags.push("od:empty-ground-truth".into());
        Some(1.0)
    } else {
        Some(matched as f64 / n_gt as f64)
    };
    if unlabeled_gt > 0 {
        flags.push(format!("gt-objects-without-intent:{unlabeled_gt}"));
    }
    let (lip, vip, combined) = match intent_accuracy(&intent_pairs) {
        Ok(a) => (Some(a.lateral), Some(a.vertical), Some(a.combined)),
        Err(e) => {
            flags.push(format!("ip:{e}"));
            (None, None, None)
        }
    };
    let risk = risk_metrics(&counts);
    let ra_ba = risk.balanced_accuracy.map_err(|e| flags.push(format!("ra.ba:{e}"))).ok();
    let ra_f1 = risk.f1.map_err(|e| flags.push(format!("ra.f1:{e}"))).ok();
    let action = match external_scores {
        Some(_) => {
            if missing_scores > 0 {
                flags.push(format!("as:missing-external-scores:{missing_scores}"));
            }
            if external.is_empty() {
                flags.push("as:no-scores".into());
                None
            } else {
                Some(external.iter().sum::<f64>() / external.len() as f64)
            }
        }
        None => action_similarity(&action_pairs, &TokenF1)
            .map_err(|e| flags.push(format!("as:{e}")))
            .ok(),
    };

    Ok(EvaluationReport {
        od,
        lip,
        vip,
        combined,
        ra_ba,
        ra_f1,
        action_similarity: action,
        n_samples: common.len(),
        flags,
    })
}
