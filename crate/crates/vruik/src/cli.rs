//! Command-line interface.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use vruik_core::curation::curate_frame;
use vruik_core::dataset::dataset_stats;
use vruik_core::matching::match_tracks_to_annotations;
use vruik_core::pipeline::{run_evaluation, EvalMode, PipelineConfig};
use vruik_core::synth::{generate, sample_scenario, truth_sample, unlabeled, ScenarioSampler, SynthScenario};
use vruik_core::track::AnnotationGroup;
use vruik_core::tracklink::link_tracks_detailed;
use vruik_core::{iou, FrameSize, LateralIntent, VerticalIntent};

use crate::clip::{annotate_dataset, load_clip, run_report_to_string, ClipMeta};
use crate::config::load_config;
use crate::datasetio::{load_dataset, load_dataset_with, write_dataset, LoadOptions};
use crate::error::{Result, VruikError};
use crate::formats::{
    detections_to_string, read_detections, read_scenario, read_scores, read_tracks, report_to_string, scenario_to_string,
    tracks_to_string, write_flo, write_tracks,
};
use crate::plot::render_svg;

#[derive(Debug, Parser)]
#[command(name = "vruik", version, about = "VRU intent annotation pipeline and benchmark evaluation")]
pub struct Cli {
    /// TOML configuration file (sections: curation, link, matching, intent, egomotion).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Random seed for commands that sample.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for batch commands.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Overwrite intents that are already filled in.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Curate raw per-frame detections (cyclist pairing, size / visibility / count filters).
    Filter(FilterArgs),
    /// Repair fragmented tracks.
    Link(LinkArgs),
    /// Match tracks to one sample's annotation boxes.
    Match(MatchArgs),
    /// Fill Intent and Position for every sample of a dataset.
    Annotate(AnnotateArgs),
    /// Generate synthetic scenes with known intents.
    Synth(SynthArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Summarise a dataset.
    Stats(StatsArgs),
    /// Draw trajectories and intents as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Detections, one JSON object per line.
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub width: u32,
    #[arg(long)]
    pub height: u32,
    /// Output JSON Lines file (stdout if omitted).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LinkArgs {
    #[arg(long)]
    pub tracks: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Also write the accepted links with their scores.
    #[arg(long)]
    pub links: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub tracks: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub sample: String,
    /// Key frame (defaults to the latest frame of any track).
    #[arg(long)]
    pub frame: Option<u32>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory holding one clip directory per sample id.
    #[arg(long)]
    pub clips: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Per-sample run report (flags for unmatched, skipped, degraded...).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Stop at the first invalid sample when loading.
    #[arg(long)]
    pub fail_fast: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scenario description (JSON). Without it, `--count` scenarios are drawn
    /// from the built-in family.
    #[arg(long, conflicts_with = "count")]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Observation noise for sampled scenarios, in pixels.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Constant camera velocity for sampled scenarios, as `dx,dy`.
    #[arg(long, value_parser = parse_pair, default_value = "0,0")]
    pub camera: (f64, f64),
    /// Write dense `.flo` files instead of the compact uniform-flow entry.
    #[arg(long)]
    pub write_flow: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Full,
    GtBoxes,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    pub mode: ModeArg,
    /// External action-similarity scores (JSON Lines `{"id", "score"}`).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub tracks: Option<PathBuf>,
    /// Clip directory; supplies tracks and frame size.
    #[arg(long)]
    pub clip: Option<PathBuf>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    #[arg(long, requires = "sample")]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub sample: Option<String>,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected dx,dy")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| VruikError::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| VruikError::io("<stdout>", e)),
    }
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| VruikError::io(p, e))
}

fn to_pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

fn group_key(g: AnnotationGroup) -> &'static str {
    match g {
        AnnotationGroup::Pedestrian => "Pedestrians",
        AnnotationGroup::Cyclist => "Cyclists",
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Filter(a) => filter(a, &config),
        Command::Link(a) => link(a, &config),
        Command::Match(a) => match_cmd(a, &config),
        Command::Annotate(a) => annotate(a, &config, cli.force, cli.jobs),
        Command::Synth(a) => synth(a, &config, cli.seed, cli.jobs),
        Command::Eval(a) => eval(a),
        Command::Stats(a) => stats(a),
        Command::Plot(a) => plot(a, &config),
    }
}

fn filter(a: &FilterArgs, config: &PipelineConfig) -> Result<()> {
    let frame = FrameSize::new(a.width, a.height)?;
    let detections = read_detections(&a.detections)?;
    let mut by_frame: BTreeMap<u32, Vec<_>> = BTreeMap::new();
    for d in detections {
        by_frame.entry(d.frame).or_default().push(d);
    }
    let kept: Vec<_> = by_frame
        .values()
        .flat_map(|dets| curate_frame(dets, frame, &config.curation))
        .collect();
    emit(a.output.as_deref(), &detections_to_string(&kept))
}

fn link(a: &LinkArgs, config: &PipelineConfig) -> Result<()> {
    let tracks = read_tracks(&a.tracks)?;
    let (linked, accepted) = link_tracks_detailed(&tracks, &config.link);
    if let Some(p) = &a.links {
        let entries: Vec<_> = accepted
            .iter()
            .map(|l| {
                json!({
                    "kept_id": l.kept_id,
                    "from": l.candidate.from_track,
                    "to": l.candidate.to_track,
                    "delta_t": l.candidate.delta_t,
                    "d_spatial": l.candidate.d_spatial,
                    "alpha": l.candidate.alpha,
                    "score": l.candidate.score,
                    "adjusted_score": l.candidate.adjusted_score,
                })
            })
            .collect();
        emit(Some(p), &to_pretty(&json!(entries)))?;
    }
    match &a.output {
        Some(p) => write_tracks(&linked, p),
        None => emit(None, &tracks_to_string(&linked)),
    }
}

fn match_cmd(a: &MatchArgs, config: &PipelineConfig) -> Result<()> {
    let tracks = read_tracks(&a.tracks)?;
    let dataset = load_dataset(&a.dataset)?.samples;
    let sample = dataset
        .get(&a.sample)
        .ok_or_else(|| VruikError::invalid(format!("sample {:?} not in {}", a.sample, a.dataset.display())))?;
    let objects: Vec<_> = sample.objects().map(|(g, id, o)| (g, id.clone(), o.bbox)).collect();
    let key_frame = a
        .frame
        .unwrap_or_else(|| tracks.iter().map(|t| t.last_frame()).max().unwrap_or(0));
    let anns: Vec<_> = objects.iter().map(|(g, _, b)| (*g, *b)).collect();
    let m = match_tracks_to_annotations(&tracks, &anns, key_frame, config.theta_iou);
    let obj_ref = |i: usize| json!({"group": group_key(objects[i].0), "id": objects[i].1});
    let pairs: Vec<_> = m
        .assignment
        .pairs
        .iter()
        .map(|&(t, o)| {
            let tb = tracks[t].at_or_before(key_frame).expect("matched tracks have a box").bbox;
            json!({"track": tracks[t].id(), "object": obj_ref(o), "iou": iou(&tb, &objects[o].2)})
        })
        .collect();
    let report = json!({
        "key_frame": key_frame,
        "pairs": pairs,
        "unmatched_tracks": m.assignment.unmatched_tracks.iter().map(|&t| tracks[t].id()).collect::<Vec<_>>(),
        "unmatched_objects": m.assignment.unmatched_annotations.iter().map(|&o| obj_ref(o)).collect::<Vec<_>>(),
        "duplicates": m.duplicate_of.iter().map(|&(r, s)| json!({"object": obj_ref(r), "of": obj_ref(s)})).collect::<Vec<_>>(),
        "greedy_fallback": m.used_greedy_fallback,
    });
    emit(a.output.as_deref(), &to_pretty(&report))
}

fn annotate(a: &AnnotateArgs, config: &PipelineConfig, force: bool, jobs: usize) -> Result<()> {
    let loaded = load_dataset_with(&a.dataset, LoadOptions { fail_fast: a.fail_fast })?;
    let (out, reports) = annotate_dataset(&loaded.samples, &a.clips, config, force, jobs)?;
    write_dataset(&out, &a.output)?;
    if let Some(p) = &a.report {
        emit(Some(p), &run_report_to_string(&reports))?;
    }
    let flagged = reports.iter().filter(|r| !r.flags.is_empty()).count();
    eprintln!(
        "annotated {} sample(s); {flagged} with flags",
        out.len()
    );
    Ok(())
}

fn write_scene(
    dir: &Path,
    id: &str,
    scenario: &SynthScenario,
    config: &PipelineConfig,
    write_flow: bool,
) -> Result<(vruik_core::dataset::SceneAnnotation, vruik_core::dataset::SceneAnnotation)> {
    let output = generate(scenario, &config.intent)?;
    let clip_dir = dir.join("clips").join(id);
    create_dir(&clip_dir)?;
    write_tracks(&output.tracks, clip_dir.join("tracks.json"))?;
    let mut meta = ClipMeta {
        width: scenario.frame.width(),
        height: scenario.frame.height(),
        key_frame: None,
        n_frames: Some(scenario.n_frames),
        uniform_flow: None,
    };
    if write_flow {
        let flow_dir = clip_dir.join("flow");
        create_dir(&flow_dir)?;
        for (t, f) in output.flow_fields.iter().enumerate() {
            write_flo(f, flow_dir.join(format!("{t:06}.flo")))?;
        }
    } else {
        meta.uniform_flow = Some([output.camera_velocity.0 as f32, output.camera_velocity.1 as f32]);
    }
    let meta_path = clip_dir.join("clip.json");
    emit(Some(&meta_path), &to_pretty(&serde_json::to_value(&meta).expect("plain data")))?;
    emit(Some(&dir.join("scenarios").join(format!("{id}.json"))), &scenario_to_string(scenario))?;
    let truth = truth_sample(&output, id);
    let input = unlabeled(&truth);
    Ok((truth, input))
}

fn synth(a: &SynthArgs, config: &PipelineConfig, seed: Option<u64>, jobs: usize) -> Result<()> {
    create_dir(&a.output)?;
    create_dir(&a.output.join("scenarios"))?;
    let scenarios: Vec<(String, SynthScenario)> = match &a.scenario {
        Some(p) => {
            let mut s = read_scenario(p)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let id = p
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("scenario")
                .to_string();
            vec![(id, s)]
        }
        None => {
            let sampler = ScenarioSampler {
                noise_sigma: a.noise,
                camera_velocity: a.camera,
                ..ScenarioSampler::default()
            };
            let base = seed.unwrap_or(0);
            (0..a.count)
                .map(|i| {
                    let s = sample_scenario(base.wrapping_add(i as u64), &sampler)?;
                    Ok((format!("synth-{i:04}"), s))
                })
                .collect::<Result<_>>()?
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| VruikError::invalid(format!("worker pool: {e}")))?;
    let scenes: Vec<Result<_>> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|(id, s)| write_scene(&a.output, id, s, config, a.write_flow).map(|r| (id.clone(), r)))
            .collect()
    });
    let mut truth = vruik_core::dataset::Dataset::new();
    let mut input = vruik_core::dataset::Dataset::new();
    for scene in scenes {
        let (id, (t, i)) = scene?;
        truth.insert(id.clone(), t);
        input.insert(id, i);
    }
    write_dataset(&truth, a.output.join("truth.json"))?;
    write_dataset(&input, a.output.join("input.json"))?;
    eprintln!("wrote {} scenario(s) to {}", truth.len(), a.output.display());
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let gt = load_dataset(&a.gt)?.samples;
    let pred = load_dataset(&a.pred)?.samples;
    let scores = a.scores.as_ref().map(read_scores).transpose()?;
    let mode = match a.mode {
        ModeArg::Full => EvalMode::Full,
        ModeArg::GtBoxes => EvalMode::GtBoxes,
    };
    let report = run_evaluation(&gt, &pred, mode, scores.as_ref())?;
    emit(a.output.as_deref(), &report_to_string(&report))
}

fn stats(a: &StatsArgs) -> Result<()> {
    let loaded = load_dataset(&a.dataset)?;
    let s = dataset_stats(&loaded.samples);
    let lateral: serde_json::Map<String, serde_json::Value> = LateralIntent::ALL
        .iter()
        .map(|l| (l.as_str().to_string(), json!(s.lateral[l.index()])))
        .collect();
    let vertical: serde_json::Map<String, serde_json::Value> = VerticalIntent::ALL
        .iter()
        .map(|v| (v.as_str().to_string(), json!(s.vertical[v.index()])))
        .collect();
    if a.json {
        let v = json!({
            "samples": s.samples,
            "pedestrians": s.pedestrians,
            "cyclists": s.cyclists,
            "samples_with_pedestrians": s.samples_with_pedestrians,
            "samples_with_cyclists": s.samples_with_cyclists,
            "risk": {"Yes": s.risk_yes, "No": s.risk_no},
            "lateral": lateral,
            "vertical": vertical,
            "intent_empty": s.intent_empty,
            "position": {"Left": s.position[0], "Right": s.position[1], "Front": s.position[2]},
        });
        return emit(None, &to_pretty(&v));
    }
    let mut text = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(text, "samples            {}", s.samples);
    let _ = writeln!(text, "pedestrians        {} (in {} samples)", s.pedestrians, s.samples_with_pedestrians);
    let _ = writeln!(text, "cyclists           {} (in {} samples)", s.cyclists, s.samples_with_cyclists);
    let _ = writeln!(text, "risk Yes / No      {} / {}", s.risk_yes, s.risk_no);
    for l in LateralIntent::ALL {
        let _ = writeln!(text, "lateral  {:<26}{}", l.as_str(), s.lateral[l.index()]);
    }
    for v in VerticalIntent::ALL {
        let _ = writeln!(text, "vertical {:<26}{}", v.as_str(), s.vertical[v.index()]);
    }
    let _ = writeln!(text, "intent empty       {}", s.intent_empty);
    let _ = writeln!(
        text,
        "position L / R / F {} / {} / {}",
        s.position[0], s.position[1], s.position[2]
    );
    emit(None, &text)
}

fn plot(a: &PlotArgs, config: &PipelineConfig) -> Result<()> {
    let (mut tracks, mut frame) = (Vec::new(), None);
    if let Some(dir) = &a.clip {
        let clip = load_clip(dir, config)?;
        tracks = clip.tracks;
        frame = Some(clip.frame);
    }
    if let Some(p) = &a.tracks {
        tracks = read_tracks(p)?;
    }
    if let (Some(w), Some(h)) = (a.width, a.height) {
        frame = Some(FrameSize::new(w, h)?);
    }
    let frame = frame.ok_or_else(|| VruikError::invalid("plot needs --clip or --width/--height"))?;
    let sample = match (&a.dataset, &a.sample) {
        (Some(d), Some(id)) => {
            let ds = load_dataset(d)?.samples;
            Some(
                ds.get(id)
                    .cloned()
                    .ok_or_else(|| VruikError::invalid(format!("sample {id:?} not in {}", d.display())))?,
            )
        }
        _ => None,
    };
    emit(Some(&a.output), &render_svg(frame, &tracks, sample.as_ref()))
}
