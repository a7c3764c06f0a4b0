//! Pipeline configuration files.
//!
//! Every key is optional; missing keys keep their defaults and unknown keys
//! are rejected.
//!
//! ```toml
//! [curation]
//! min_height_frac = 0.08
//! [link]
//! theta_short = 0.2
//! [matching]
//! theta_iou = 0.3
//! [intent]
//! windows = [5, 10, 15]
//! [egomotion]
//! flow_source = "block_matching"   # or "precomputed"
//! aggregator = "median"            # or "mean"
//! ```

use std::fs;
use std::path::Path;

use serde::Deserialize;

use vruik_core::egomotion::{Aggregator, DEFAULT_BLOCK, DEFAULT_SEARCH_RADIUS};
use vruik_core::pipeline::{FlowSource, PipelineConfig};

use crate::error::{Result, VruikError};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurationSection {
    min_height_frac: Option<f64>,
    min_width_frac: Option<f64>,
    min_visible_frac: Option<f64>,
    max_per_class: Option<usize>,
    cyclist_pair_iou: Option<f64>,
    cyclist_max_vertical_offset_px: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSection {
    w_s: Option<f64>,
    w_t: Option<f64>,
    d_base: Option<f64>,
    d_per_frame: Option<f64>,
    t_max: Option<u32>,
    theta_short: Option<f64>,
    theta_long: Option<f64>,
    short_gap_frames: Option<u32>,
    motion_fit_window: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatchingSection {
    theta_iou: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntentSection {
    windows: Option<Vec<u32>>,
    lateral_deadband_px: Option<f64>,
    lateral_deadband_frac_of_width: Option<f64>,
    vertical_scale_ratio_eps: Option<f64>,
    vertical_deadband_px: Option<f64>,
    min_track_len: Option<usize>,
    left_boundary_frac: Option<f64>,
    right_boundary_frac: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EgomotionSection {
    flow_source: Option<String>,
    block: Option<u32>,
    search_radius: Option<u32>,
    aggregator: Option<String>,
    margin_frac: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    curation: CurationSection,
    #[serde(default)]
    link: LinkSection,
    #[serde(default)]
    matching: MatchingSection,
    #[serde(default)]
    intent: IntentSection,
    #[serde(default)]
    egomotion: EgomotionSection,
}

macro_rules! apply {
    ($target:expr, $section:expr, $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $section.$field { $target.$field = v; })+
    };
}

pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| VruikError::invalid(format!("config: {e}")))?;
    let mut cfg = PipelineConfig::default();
    apply!(
        cfg.curation,
        file.curation,
        min_height_frac,
        min_width_frac,
        min_visible_frac,
        max_per_class,
        cyclist_pair_iou,
        cyclist_max_vertical_offset_px,
    );
    apply!(
        cfg.link,
        file.link,
        w_s,
        w_t,
        d_base,
        d_per_frame,
        t_max,
        theta_short,
        theta_long,
        short_gap_frames,
        motion_fit_window,
    );
    if let Some(t) = file.matching.theta_iou {
        cfg.theta_iou = t;
    }
    let intent = file.intent;
    apply!(
        cfg.intent,
        intent,
        windows,
        lateral_deadband_px,
        lateral_deadband_frac_of_width,
        vertical_scale_ratio_eps,
        vertical_deadband_px,
        min_track_len,
        left_boundary_frac,
        right_boundary_frac,
    );

    let ego = file.egomotion;
    let block = ego.block.unwrap_or(DEFAULT_BLOCK);
    let search_radius = ego.search_radius.unwrap_or(DEFAULT_SEARCH_RADIUS);
    cfg.flow_source = match ego.flow_source.as_deref() {
        None | Some("precomputed") => FlowSource::Precomputed,
        Some("block_matching") => FlowSource::BlockMatching { block, search_radius },
        Some(other) => {
            return Err(VruikError::invalid(format!(
                "config: egomotion.flow_source must be \"precomputed\" or \"block_matching\", found {other:?}"
            )))
        }
    };
    cfg.aggregator = match ego.aggregator.as_deref() {
        None | Some("median") => Aggregator::Median,
        Some("mean") => Aggregator::Mean,
        Some(other) => {
            return Err(VruikError::invalid(format!(
                "config: egomotion.aggregator must be \"median\" or \"mean\", found {other:?}"
            )))
        }
    };
    if let Some(m) = ego.margin_frac {
        cfg.margin_frac = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| VruikError::io(p, e))?;
            parse_config(&text)
        }
    }
}
