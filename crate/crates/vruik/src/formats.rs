//! Side-car file formats: detections, tracks, flow, frames, scenarios,
//! similarity scores and evaluation reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use vruik_core::curation::Detection;
use vruik_core::egomotion::{FlowField, GrayImage};
use vruik_core::pipeline::EvaluationReport;
use vruik_core::synth::{AgentSpec, Fragmentation, SynthScenario};
use vruik_core::{BoundingBox, FrameSize, ObjectClass, Observation, Track};

use crate::error::{json_error, Result, VruikError};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| VruikError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| VruikError::io(path, e))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| json_error(path, text, &e))
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionRecord {
    frame: u32,
    class: String,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    #[serde(rename = "conf", alias = "confidence")]
    confidence: f64,
}

/// One detection per line: `{"frame", "class", "box", "conf"}`.
pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DetectionRecord = serde_json::from_str(line).map_err(|e| {
            VruikError::invalid(format!("{}:{}: {e}", path.display(), n + 1))
        })?;
        let located = |e: vruik_core::Error| VruikError::invalid(format!("{}:{}: {e}", path.display(), n + 1));
        let class: ObjectClass = rec.class.parse().map_err(located)?;
        let bbox = BoundingBox::from_array(rec.bbox).map_err(located)?;
        if !(0.0..=1.0).contains(&rec.confidence) {
            return Err(VruikError::invalid(format!(
                "{}:{}: confidence {} outside [0, 1]",
                path.display(),
                n + 1,
                rec.confidence
            )));
        }
        out.push(Detection {
            class,
            bbox,
            confidence: rec.confidence,
            frame: rec.frame,
        });
    }
    Ok(out)
}

pub fn detections_to_string(detections: &[Detection]) -> String {
    let mut text = String::new();
    for d in detections {
        let rec = DetectionRecord {
            frame: d.frame,
            class: d.class.as_str().into(),
            bbox: d.bbox.to_array(),
            confidence: d.confidence,
        };
        text.push_str(&serde_json::to_string(&rec).expect("plain data serializes"));
        text.push('\n');
    }
    text
}

pub fn write_detections(detections: &[Detection], path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), detections_to_string(detections).as_bytes())
}

#[derive(Debug, Serialize, Deserialize)]
struct ObservationRecord {
    frame: u32,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    #[serde(rename = "conf", alias = "confidence", default = "full_confidence")]
    confidence: f64,
}

fn full_confidence() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackRecord {
    #[serde(rename = "track_id", alias = "id")]
    id: String,
    class: String,
    #[serde(rename = "obs", alias = "observations")]
    observations: Vec<ObservationRecord>,
}

/// A JSON array of `{"track_id", "class", "obs": [{"frame", "box", "conf"}]}`.
/// `conf` defaults to 1 when absent.
pub fn read_tracks(path: impl AsRef<Path>) -> Result<Vec<Track>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let records: Vec<TrackRecord> = parse_json(path, &text)?;
    records
        .into_iter()
        .map(|r| {
            let located = |e: vruik_core::Error| VruikError::invalid(format!("{}: track {:?}: {e}", path.display(), r.id));
            let class: ObjectClass = r.class.parse().map_err(located)?;
            let obs = r
                .observations
                .iter()
                .map(|o| Ok(Observation::new(o.frame, BoundingBox::from_array(o.bbox)?, o.confidence)))
                .collect::<vruik_core::Result<Vec<_>>>()
                .map_err(located)?;
            Track::new(r.id.clone(), class, obs).map_err(located)
        })
        .collect()
}

pub fn tracks_to_string(tracks: &[Track]) -> String {
    let records: Vec<TrackRecord> = tracks
        .iter()
        .map(|t| TrackRecord {
            id: t.id().into(),
            class: t.class().as_str().into(),
            observations: t
                .observations()
                .iter()
                .map(|o| ObservationRecord {
                    frame: o.frame,
                    bbox: o.bbox.to_array(),
                    confidence: o.confidence,
                })
                .collect(),
        })
        .collect();
    pretty(&records)
}

pub fn write_tracks(tracks: &[Track], path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), tracks_to_string(tracks).as_bytes())
}

/// Middlebury `.flo` magic: the bytes "PIEH", i.e. 202021.25 as little-endian f32.
const FLO_MAGIC: &[u8; 4] = b"PIEH";

pub fn decode_flo(bytes: &[u8]) -> std::result::Result<FlowField, String> {
    if bytes.len() < 12 || &bytes[..4] != FLO_MAGIC {
        return Err("not a .flo file (bad magic)".into());
    }
    let dim = |at: usize| i32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let (w, h) = (dim(4), dim(8));
    if w <= 0 || h <= 0 || w > 1 << 15 || h > 1 << 15 {
        return Err(format!("implausible flow size {w}x{h}"));
    }
    let (w, h) = (w as u32, h as u32);
    let expected = 12 + 8 * w as usize * h as usize;
    if bytes.len() != expected {
        return Err(format!("expected {expected} bytes for {w}x{h} flow, found {}", bytes.len()));
    }
    let vectors = bytes[12..]
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes(c[..4].try_into().expect("4 bytes")),
                f32::from_le_bytes(c[4..].try_into().expect("4 bytes")),
            ]
        })
        .collect();
    FlowField::new(w, h, vectors).map_err(|e| e.to_string())
}

pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * flow.vectors().len());
    out.extend_from_slice(FLO_MAGIC);
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for [dx, dy] in flow.vectors() {
        out.extend_from_slice(&dx.to_le_bytes());
        out.extend_from_slice(&dy.to_le_bytes());
    }
    out
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| VruikError::io(path, e))?;
    decode_flo(&bytes).map_err(|m| VruikError::invalid(format!("{}: {m}", path.display())))
}

pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_flo(flow))
}

/// Binary greymap (`P5`, maxval <= 255).
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let mut pos = 0usize;
    let mut token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PGM header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err("only binary PGM (P5) is supported".into());
    }
    let mut num = |what: &str| -> std::result::Result<u32, String> {
        token()?.parse().map_err(|_| format!("bad PGM {what}"))
    };
    let (w, h, maxval) = (num("width")?, num("height")?, num("maxval")?);
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported PGM maxval {maxval}"));
    }
    let data = &bytes[(pos + 1).min(bytes.len())..];
    let n = w as usize * h as usize;
    if data.len() < n {
        return Err(format!("PGM holds {} of {n} pixels", data.len()));
    }
    GrayImage::new(w, h, data[..n].to_vec()).map_err(|e| e.to_string())
}

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| VruikError::io(path, e))?;
    decode_pgm(&bytes).map_err(|m| VruikError::invalid(format!("{}: {m}", path.display())))
}

pub fn write_pgm(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pgm(image))
}

#[derive(Debug, Deserialize)]
struct ScoreRecord {
    id: String,
    score: f64,
}

/// External action-similarity scores, one `{"id", "score"}` per line.
pub fn read_scores(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("{}:{}", path.display(), n + 1);
        let rec: ScoreRecord =
            serde_json::from_str(line).map_err(|e| VruikError::invalid(format!("{}: {e}", at())))?;
        if !(0.0..=1.0).contains(&rec.score) {
            return Err(VruikError::invalid(format!("{}: score {} outside [0, 1]", at(), rec.score)));
        }
        if out.insert(rec.id.clone(), rec.score).is_some() {
            return Err(VruikError::invalid(format!("{}: duplicate id {:?}", at(), rec.id)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentRecord {
    class: String,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    road_velocity: [f64; 2],
    #[serde(default)]
    scale_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FragmentationRecord {
    split_frame: u32,
    gap: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioRecord {
    seed: u64,
    width: u32,
    height: u32,
    n_frames: u32,
    #[serde(default)]
    camera_velocity: [f64; 2],
    agents: Vec<AgentRecord>,
    #[serde(default)]
    fragmentation: Option<FragmentationRecord>,
    #[serde(default)]
    noise_sigma: f64,
}

pub fn scenario_from_str(path: &Path, text: &str) -> Result<SynthScenario> {
    let rec: ScenarioRecord = parse_json(path, text)?;
    Ok(SynthScenario {
        seed: rec.seed,
        frame: FrameSize::new(rec.width, rec.height)?,
        n_frames: rec.n_frames,
        camera_velocity: (rec.camera_velocity[0], rec.camera_velocity[1]),
        agents: rec
            .agents
            .iter()
            .map(|a| {
                Ok(AgentSpec {
                    class: a.class.parse()?,
                    initial_box: BoundingBox::from_array(a.bbox)?,
                    road_velocity: (a.road_velocity[0], a.road_velocity[1]),
                    scale_rate: a.scale_rate,
                })
            })
            .collect::<vruik_core::Result<_>>()?,
        fragmentation: rec.fragmentation.map(|f| Fragmentation {
            split_frame: f.split_frame,
            gap: f.gap,
        }),
        noise_sigma: rec.noise_sigma,
    })
}

pub fn read_scenario(path: impl AsRef<Path>) -> Result<SynthScenario> {
    let path = path.as_ref();
    scenario_from_str(path, &read_text(path)?)
}

pub fn scenario_to_string(s: &SynthScenario) -> String {
    pretty(&ScenarioRecord {
        seed: s.seed,
        width: s.frame.width(),
        height: s.frame.height(),
        n_frames: s.n_frames,
        camera_velocity: [s.camera_velocity.0, s.camera_velocity.1],
        agents: s
            .agents
            .iter()
            .map(|a| AgentRecord {
                class: a.class.as_str().into(),
                bbox: a.initial_box.to_array(),
                road_velocity: [a.road_velocity.0, a.road_velocity.1],
                scale_rate: a.scale_rate,
            })
            .collect(),
        fragmentation: s.fragmentation.map(|f| FragmentationRecord {
            split_frame: f.split_frame,
            gap: f.gap,
        }),
        noise_sigma: s.noise_sigma,
    })
}

/// `{"od", "lip", "vip", "combined", "ra": {"ba", "f1"}, "as", "n_samples", "flags"}`;
/// undefined metrics are `null`.
pub fn report_to_json(r: &EvaluationReport) -> serde_json::Value {
    json!({
        "od": r.od,
        "lip": r.lip,
        "vip": r.vip,
        "combined": r.combined,
        "ra": {"ba": r.ra_ba, "f1": r.ra_f1},
        "as": r.action_similarity,
        "n_samples": r.n_samples,
        "flags": r.flags,
    })
}

pub fn report_to_string(r: &EvaluationReport) -> String {
    pretty(&report_to_json(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flo_roundtrip_and_rejects() {
        let flow = FlowField::new(3, 2, vec![[0.5, -1.0], [2.0, 3.0], [0.0, 0.0], [1.0, 1.0], [-4.5, 2.25], [9.0, 8.0]]).unwrap();
        let bytes = encode_flo(&flow);
        assert_eq!(&bytes[..4], b"PIEH");
        assert_eq!(f32::from_le_bytes(bytes[..4].try_into().unwrap()), 202021.25);
        assert_eq!(bytes.len(), 12 + 6 * 8);
        assert_eq!(decode_flo(&bytes).unwrap(), flow);
        assert!(decode_flo(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_flo(&bad).is_err());
    }

    #[test]
    fn pgm_roundtrip_with_comment() {
        let img = GrayImage::new(2, 2, vec![0, 64, 128, 255]).unwrap();
        assert_eq!(decode_pgm(&encode_pgm(&img)).unwrap(), img);
        let mut commented = b"P5\n# made by hand\n2 2\n255\n".to_vec();
        commented.extend_from_slice(&[0, 64, 128, 255]);
        assert_eq!(decode_pgm(&commented).unwrap(), img);
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
    }

    #[test]
    fn tracks_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.json");
        let b = BoundingBox::new(1.0, 2.0, 3.5, 4.0).unwrap();
        let t = Track::new("a", ObjectClass::Cyclist, vec![Observation::new(3, b, 0.75), Observation::new(5, b, 1.0)]).unwrap();
        write_tracks(std::slice::from_ref(&t), &p).unwrap();
        assert_eq!(read_tracks(&p).unwrap(), vec![t]);
        fs::write(&p, r#"[{"track_id": "x", "class": "car", "obs": []}]"#).unwrap();
        assert!(read_tracks(&p).is_err());
    }

    #[test]
    fn detections_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let d = Detection {
            class: ObjectClass::Bicycle,
            bbox: BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap(),
            confidence: 0.5,
            frame: 7,
        };
        write_detections(&[d], &p).unwrap();
        assert_eq!(read_detections(&p).unwrap(), vec![d]);
    }

    #[test]
    fn scores_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        fs::write(&p, "{\"id\": \"a\", \"score\": 0.25}\n\n{\"id\": \"b\", \"score\": 1}\n").unwrap();
        let s = read_scores(&p).unwrap();
        assert_eq!(s["a"], 0.25);
        fs::write(&p, "{\"id\": \"a\", \"score\": 1.5}\n").unwrap();
        assert!(read_scores(&p).is_err());
        fs::write(&p, "{\"id\": \"a\", \"score\": 1}\n{\"id\": \"a\", \"score\": 1}\n").unwrap();
        assert!(read_scores(&p).is_err());
    }

    #[test]
    fn scenario_roundtrip() {
        let text = r#"{"seed": 3, "width": 640, "height": 480, "n_frames": 20,
            "camera_velocity": [2, 0],
            "agents": [{"class": "person", "box": [100, 100, 140, 200], "road_velocity": [4, 0]}],
            "fragmentation": {"split_frame": 10, "gap": 2}}"#;
        let s = scenario_from_str(Path::new("s.json"), text).unwrap();
        assert_eq!(s.agents[0].scale_rate, 0.0);
        let again = scenario_from_str(Path::new("s.json"), &scenario_to_string(&s)).unwrap();
        assert_eq!(again, s);
        assert!(scenario_from_str(Path::new("s.json"), r#"{"seed": 1}"#).is_err());
    }

    #[test]
    fn report_shape() {
        let r = EvaluationReport {
            od: Some(1.0),
            lip: Some(0.5),
            vip: None,
            combined: None,
            ra_ba: Some(0.7),
            ra_f1: None,
            action_similarity: Some(0.25),
            n_samples: 4,
            flags: vec!["x".into()],
        };
        let v = report_to_json(&r);
        assert_eq!(v["ra"]["ba"], 0.7);
        assert!(v["vip"].is_null());
        assert_eq!(v["n_samples"], 4);
        assert_eq!(v["as"], 0.25);
    }
}
