//! Per-sample clip directories and batch annotation.
//!
//! A clip directory `<clips>/<sample_id>/` may contain:
//!
//! * `tracks.json`: tracker output (see [`crate::formats::read_tracks`]);
//!   absent means no tracks.
//! * `clip.json`: `{"width", "height", "key_frame"?, "n_frames"?, "uniform_flow"?: [dx, dy]}`.
//!   `uniform_flow` stands in for `n_frames - 1` identical flow fields.
//! * `flow/NNNNNN.flo`: flow from frame `N` to `N + 1`, numbered from 0.
//! * `frames/NNNNNN.pgm`: greyscale frames, used when the configured flow
//!   source is block matching.
//! * `detections.jsonl`: raw detections (see [`crate::formats::read_detections`]).
//!   Curated person and cyclist detections at the key frame that no existing
//!   box covers are added to the sample before annotation.
//!
//! The frame size comes from `clip.json`, else the first flow file, else the
//! first frame.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use vruik_core::curation::{curate_frame, Detection};
use vruik_core::dataset::{Dataset, SceneAnnotation};
use vruik_core::egomotion::{estimate_flow_block_matching, FlowField};
use vruik_core::pipeline::{
    annotate_sample, merge_detections, AnnotateOptions, FlowSource, PipelineConfig, SampleReport, DEFAULT_MERGE_IOU,
};
use vruik_core::{FrameSize, ObjectClass, Track};

use crate::error::{json_error, Result, VruikError};
use crate::formats::{read_detections, read_flo, read_pgm, read_tracks};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipMeta {
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_frame: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_frames: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_flow: Option<[f32; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub tracks: Vec<Track>,
    pub flows: Vec<FlowField>,
    pub frame: FrameSize,
    pub key_frame: Option<u32>,
    pub detections: Vec<Detection>,
}

impl Clip {
    /// Adds curated key-frame detections not already covered by a box of
    /// the same group. Returns the number of objects added.
    pub fn recover_missed(&self, sample: &mut SceneAnnotation, config: &PipelineConfig) -> usize {
        let Some(key) = self
            .key_frame
            .or_else(|| self.tracks.iter().map(Track::last_frame).max())
        else {
            return 0;
        };
        let at_key: Vec<Detection> = self.detections.iter().filter(|d| d.frame == key).copied().collect();
        let vru: Vec<Detection> = curate_frame(&at_key, self.frame, &config.curation)
            .into_iter()
            .filter(|d| d.class != ObjectClass::Bicycle)
            .collect();
        merge_detections(sample, &vru, DEFAULT_MERGE_IOU)
    }
}

/// Files in `dir` with extension `ext`, which must be numbered 0, 1, 2, ...
fn numbered_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut files: Vec<(u32, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| VruikError::io(dir, e))? {
        let path = entry.map_err(|e| VruikError::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        let index = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| VruikError::invalid(format!("{}: file name is not a frame number", path.display())))?;
        files.push((index, path));
    }
    files.sort();
    for (expected, (index, path)) in files.iter().enumerate() {
        if *index as usize != expected {
            return Err(VruikError::invalid(format!(
                "{}: expected frame {expected}; numbering must be contiguous from 0",
                path.display()
            )));
        }
    }
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

pub fn read_clip_meta(path: &Path) -> Result<Option<ClipMeta>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|e| VruikError::io(path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| json_error(path, &text, &e))
}

pub fn load_clip(dir: &Path, config: &PipelineConfig) -> Result<Clip> {
    if !dir.is_dir() {
        return Err(VruikError::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "clip directory not found"),
        ));
    }
    let tracks_path = dir.join("tracks.json");
    let tracks = if tracks_path.exists() {
        read_tracks(&tracks_path)?
    } else {
        Vec::new()
    };
    let meta = read_clip_meta(&dir.join("clip.json"))?;
    let detections_path = dir.join("detections.jsonl");
    let detections = if detections_path.exists() {
        read_detections(&detections_path)?
    } else {
        Vec::new()
    };

    let mut flows = Vec::new();
    let mut size = meta.as_ref().map(|m| FrameSize::new(m.width, m.height)).transpose()?;
    match config.flow_source {
        FlowSource::Precomputed => {
            for p in numbered_files(&dir.join("flow"), "flo")? {
                flows.push(read_flo(&p)?);
            }
            if flows.is_empty() {
                if let Some(ClipMeta {
                    width,
                    height,
                    n_frames: Some(n),
                    uniform_flow: Some([dx, dy]),
                    ..
                }) = meta
                {
                    let field = FlowField::uniform(width, height, dx, dy)?;
                    flows = vec![field; n.saturating_sub(1) as usize];
                }
            }
        }
        FlowSource::BlockMatching { block, search_radius } => {
            let frames = numbered_files(&dir.join("frames"), "pgm")?
                .iter()
                .map(read_pgm)
                .collect::<Result<Vec<_>>>()?;
            if size.is_none() {
                if let Some(f) = frames.first() {
                    size = Some(FrameSize::new(f.width(), f.height())?);
                }
            }
            for pair in frames.windows(2) {
                flows.push(estimate_flow_block_matching(&pair[0], &pair[1], block, search_radius)?);
            }
        }
    }
    if size.is_none() {
        if let Some(f) = flows.first() {
            size = Some(f.size()?);
        }
    }
    let frame = size.ok_or_else(|| {
        VruikError::invalid(format!(
            "{}: frame size unknown (add clip.json, flow or frames)",
            dir.display()
        ))
    })?;
    for (t, f) in flows.iter().enumerate() {
        if f.width() != frame.width() || f.height() != frame.height() {
            return Err(VruikError::invalid(format!(
                "{}: flow {t} is {}x{}, frame is {}x{}",
                dir.display(),
                f.width(),
                f.height(),
                frame.width(),
                frame.height()
            )));
        }
    }
    Ok(Clip {
        tracks,
        flows,
        frame,
        key_frame: meta.and_then(|m| m.key_frame),
        detections,
    })
}

/// Annotates every sample of `dataset` from `<clips>/<sample_id>/`.
///
/// Samples run on a pool of `jobs` workers; results are keyed by sample id,
/// so the output does not depend on scheduling.
pub fn annotate_dataset(
    dataset: &Dataset,
    clips: &Path,
    config: &PipelineConfig,
    force: bool,
    jobs: usize,
) -> Result<(Dataset, Vec<SampleReport>)> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| VruikError::invalid(format!("worker pool: {e}")))?;
    let results: Vec<Result<(String, vruik_core::dataset::SceneAnnotation, SampleReport)>> = pool.install(|| {
        dataset
            .par_iter()
            .map(|(id, sample)| {
                let clip = load_clip(&clips.join(id), config)?;
                let mut sample = sample.clone();
                clip.recover_missed(&mut sample, config);
                let options = AnnotateOptions {
                    force,
                    key_frame: clip.key_frame,
                };
                let (out, report) =
                    annotate_sample(&sample, &clip.tracks, &clip.flows, clip.frame, config, options)?;
                Ok((id.clone(), out, report))
            })
            .collect()
    });
    let mut out = Dataset::new();
    let mut reports = BTreeMap::new();
    for r in results {
        let (id, sample, report) = r?;
        out.insert(id.clone(), sample);
        reports.insert(id, report);
    }
    Ok((out, reports.into_values().collect()))
}

/// JSON run report: one entry per sample with its flags.
pub fn run_report_to_string(reports: &[SampleReport]) -> String {
    let entries: Vec<serde_json::Value> = reports
        .iter()
        .map(|r| {
            serde_json::json!({
                "sample_id": r.sample_id,
                "tracks_in": r.tracks_in,
                "tracks_linked": r.tracks_linked,
                "links_accepted": r.links_accepted,
                "matched": r.matched,
                "key_frame": r.key_frame,
                "flags": r.flags.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&entries).expect("plain data serializes");
    s.push('\n');
    s
}
