//! Reading, validating and canonically writing annotation datasets.
//!
//! A dataset file is a JSON object keyed by sample id:
//!
//! ```json
//! {
//!     "sample_n": {
//!         "image_path": "...",
//!         "video_path": "...",
//!         "Risk": "Yes",
//!         "Pedestrians": {
//!             "1": {"Box": [1085, 782, 1148, 935], "Intent": [], "Position": "", "Description": ""}
//!         },
//!         "Cyclists": {},
//!         "suggested_action": "..."
//!     }
//! }
//! ```
//!
//! Loading collects every violation with its field path instead of stopping
//! at the first one (unless fail-fast is requested). Writing is canonical:
//! sorted sample and object ids, fixed field order, four-space indent,
//! integral coordinates written without a fraction, trailing newline.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use serde::de::{Deserialize, Deserializer, MapAccess, SeqAccess, Visitor};

use vruik_core::dataset::{Dataset, ObjectAnnotation, Risk, SceneAnnotation};
use vruik_core::{BoundingBox, IntentLabel, LateralIntent, RelativePosition, VerticalIntent};

use crate::error::{json_error, Issue, Result, VruikError};

/// JSON tree that keeps object entries in document order, duplicates included.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Json {
    Null,
    Bool(bool),
    Number(f64),
    String(String),
    Array(Vec<Json>),
    Object(Vec<(String, Json)>),
}

impl Json {
    fn kind(&self) -> &'static str {
        match self {
            Json::Null => "null",
            Json::Bool(_) => "a boolean",
            Json::Number(_) => "a number",
            Json::String(_) => "a string",
            Json::Array(_) => "an array",
            Json::Object(_) => "an object",
        }
    }
}

struct JsonVisitor;

impl<'de> Visitor<'de> for JsonVisitor {
    type Value = Json;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("any JSON value")
    }
    fn visit_unit<E>(self) -> Result<Json, E> {
        Ok(Json::Null)
    }
    fn visit_bool<E>(self, v: bool) -> Result<Json, E> {
        Ok(Json::Bool(v))
    }
    fn visit_i64<E>(self, v: i64) -> Result<Json, E> {
        Ok(Json::Number(v as f64))
    }
    fn visit_u64<E>(self, v: u64) -> Result<Json, E> {
        Ok(Json::Number(v as f64))
    }
    fn visit_f64<E>(self, v: f64) -> Result<Json, E> {
        Ok(Json::Number(v))
    }
    fn visit_str<E>(self, v: &str) -> Result<Json, E> {
        Ok(Json::String(v.to_owned()))
    }
    fn visit_string<E>(self, v: String) -> Result<Json, E> {
        Ok(Json::String(v))
    }
    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Json, A::Error> {
        let mut items = Vec::new();
        while let Some(item) = seq.next_element()? {
            items.push(item);
        }
        Ok(Json::Array(items))
    }
    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Json, A::Error> {
        let mut entries = Vec::new();
        while let Some((k, v)) = map.next_entry::<String, Json>()? {
            entries.push((k, v));
        }
        Ok(Json::Object(entries))
    }
}

impl<'de> Deserialize<'de> for Json {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(JsonVisitor)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Stop at the first invalid sample.
    pub fail_fast: bool,
}

/// A validated dataset plus non-fatal observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub samples: Dataset,
    /// Sample ids containing at least one object whose Intent is still empty.
    pub intent_empty: Vec<String>,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Loaded> {
    load_dataset_with(path, LoadOptions::default())
}

pub fn load_dataset_with(path: impl AsRef<Path>, options: LoadOptions) -> Result<Loaded> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| VruikError::io(path, e))?;
    parse_dataset(&text, options).map_err(|e| match e {
        ParseFailure::Json(err) => json_error(path, &text, &err),
        ParseFailure::Invalid(issues) => VruikError::Validation {
            path: path.to_path_buf(),
            issues,
        },
    })
}

#[derive(Debug)]
pub(crate) enum ParseFailure {
    Json(serde_json::Error),
    Invalid(Vec<Issue>),
}

pub(crate) fn parse_dataset(text: &str, options: LoadOptions) -> Result<Loaded, ParseFailure> {
    let root: Json = serde_json::from_str(text).map_err(ParseFailure::Json)?;
    let mut issues = Vec::new();
    let Json::Object(entries) = root else {
        return Err(ParseFailure::Invalid(vec![Issue {
            field: "$".into(),
            message: format!("expected an object keyed by sample id, found {}", root.kind()),
        }]));
    };
    check_unique(&entries, "$", &mut issues);
    let mut samples = Dataset::new();
    let mut intent_empty = Vec::new();
    for (id, value) in &entries {
        let before = issues.len();
        if let Some(sample) = parse_sample(id, value, &mut issues) {
            if issues.len() == before {
                if sample.objects().any(|(_, _, o)| o.intent.is_none()) {
                    intent_empty.push(id.clone());
                }
                samples.insert(id.clone(), sample);
            }
        }
        if options.fail_fast && !issues.is_empty() {
            break;
        }
    }
    if issues.is_empty() {
        intent_empty.sort();
        Ok(Loaded {
            samples,
            intent_empty,
        })
    } else {
        Err(ParseFailure::Invalid(issues))
    }
}

fn check_unique(entries: &[(String, Json)], at: &str, issues: &mut Vec<Issue>) {
    let mut seen: Vec<&str> = entries.iter().map(|(k, _)| k.as_str()).collect();
    seen.sort_unstable();
    for pair in seen.windows(2) {
        if pair[0] == pair[1] {
            issues.push(Issue {
                field: format!("{at}.{}", pair[0]),
                message: "duplicate key".into(),
            });
        }
    }
}

fn field<'a>(entries: &'a [(String, Json)], name: &str) -> Option<&'a Json> {
    entries.iter().find(|(k, _)| k == name).map(|(_, v)| v)
}

fn string_field(entries: &[(String, Json)], name: &str, at: &str, issues: &mut Vec<Issue>) -> String {
    match field(entries, name) {
        None => String::new(),
        Some(Json::String(s)) => s.clone(),
        Some(other) => {
            issues.push(Issue {
                field: format!("{at}.{name}"),
                message: format!("expected a string, found {}", other.kind()),
            });
            String::new()
        }
    }
}

fn parse_sample(id: &str, value: &Json, issues: &mut Vec<Issue>) -> Option<SceneAnnotation> {
    let Json::Object(entries) = value else {
        issues.push(Issue {
            field: id.into(),
            message: format!("expected an object, found {}", value.kind()),
        });
        return None;
    };
    check_unique(entries, id, issues);
    let risk = match field(entries, "Risk") {
        Some(Json::String(s)) if s == "Yes" => Some(Risk::Yes),
        Some(Json::String(s)) if s == "No" => Some(Risk::No),
        Some(other) => {
            let shown = match other {
                Json::String(s) => format!("{s:?}"),
                o => o.kind().into(),
            };
            issues.push(Issue {
                field: format!("{id}.Risk"),
                message: format!("must be \"Yes\" or \"No\", found {shown}"),
            });
            None
        }
        None => {
            issues.push(Issue {
                field: format!("{id}.Risk"),
                message: "missing".into(),
            });
            None
        }
    };
    let mut sample = SceneAnnotation::new(id, risk.unwrap_or(Risk::No));
    sample.image_path = string_field(entries, "image_path", id, issues);
    sample.video_path = string_field(entries, "video_path", id, issues);
    sample.suggested_action = string_field(entries, "suggested_action", id, issues);
    for (name, target) in [("Pedestrians", &mut sample.pedestrians), ("Cyclists", &mut sample.cyclists)] {
        let at = format!("{id}.{name}");
        match field(entries, name) {
            None => {}
            Some(Json::Object(objs)) => {
                check_unique(objs, &at, issues);
                for (oid, o) in objs {
                    if let Some(obj) = parse_object(&format!("{at}.{oid}"), o, issues) {
                        target.insert(oid.clone(), obj);
                    }
                }
            }
            Some(other) => issues.push(Issue {
                field: at,
                message: format!("expected an object keyed by object id, found {}", other.kind()),
            }),
        }
    }
    risk.map(|_| sample)
}

fn parse_object(at: &str, value: &Json, issues: &mut Vec<Issue>) -> Option<ObjectAnnotation> {
    let Json::Object(entries) = value else {
        issues.push(Issue {
            field: at.into(),
            message: format!("expected an object, found {}", value.kind()),
        });
        return None;
    };
    check_unique(entries, at, issues);
    let bbox = match field(entries, "Box") {
        Some(Json::Array(items)) if items.len() == 4 => {
            let coords: Option<Vec<f64>> = items
                .iter()
                .map(|v| match v {
                    Json::Number(n) => Some(*n),
                    _ => None,
                })
                .collect();
            match coords {
                Some(c) => BoundingBox::new(c[0], c[1], c[2], c[3])
                    .map_err(|e| issues.push(Issue {
                        field: format!("{at}.Box"),
                        message: e.to_string(),
                    }))
                    .ok(),
                None => {
                    issues.push(Issue {
                        field: format!("{at}.Box"),
                        message: "coordinates must be numbers".into(),
                    });
                    None
                }
            }
        }
        Some(Json::Array(items)) => {
            issues.push(Issue {
                field: format!("{at}.Box"),
                message: format!("expected 4 coordinates, found {}", items.len()),
            });
            None
        }
        Some(other) => {
            issues.push(Issue {
                field: format!("{at}.Box"),
                message: format!("expected [x1, y1, x2, y2], found {}", other.kind()),
            });
            None
        }
        None => {
            issues.push(Issue {
                field: format!("{at}.Box"),
                message: "missing".into(),
            });
            None
        }
    };

    let intent = match field(entries, "Intent") {
        None => None,
        Some(Json::Array(items)) if items.is_empty() => None,
        Some(Json::Array(items)) if items.len() == 2 => {
            let lateral = match &items[0] {
                Json::String(s) => s.parse::<LateralIntent>().ok(),
                _ => None,
            };
            let vertical = match &items[1] {
                Json::String(s) => s.parse::<VerticalIntent>().ok(),
                _ => None,
            };
            if lateral.is_none() {
                issues.push(Issue {
                    field: format!("{at}.Intent[0]"),
                    message: "not a lateral intent label".into(),
                });
            }
            if vertical.is_none() {
                issues.push(Issue {
                    field: format!("{at}.Intent[1]"),
                    message: "not a vertical intent label".into(),
                });
            }
            lateral.zip(vertical).map(|(l, v)| IntentLabel::new(l, v))
        }
        Some(Json::Array(items)) => {
            issues.push(Issue {
                field: format!("{at}.Intent"),
                message: format!("must hold 0 or 2 labels, found {}", items.len()),
            });
            None
        }
        Some(other) => {
            issues.push(Issue {
                field: format!("{at}.Intent"),
                message: format!("expected an array, found {}", other.kind()),
            });
            None
        }
    };

    let position = match field(entries, "Position") {
        None => None,
        Some(Json::String(s)) if s.is_empty() => None,
        Some(Json::String(s)) => match s.parse::<RelativePosition>() {
            Ok(p) => Some(p),
            Err(_) => {
                issues.push(Issue {
                    field: format!("{at}.Position"),
                    message: format!("must be \"\", \"Left\", \"Right\" or \"Front\", found {s:?}"),
                });
                None
            }
        },
        Some(other) => {
            issues.push(Issue {
                field: format!("{at}.Position"),
                message: format!("expected a string, found {}", other.kind()),
            });
            None
        }
    };
    let description = string_field(entries, "Description", at, issues);
    bbox.map(|bbox| ObjectAnnotation {
        bbox,
        intent,
        position,
        description,
    })
}

/// Serializes the dataset in canonical form.
pub fn to_canonical_string(samples: &Dataset) -> String {
    let mut out = String::new();
    if samples.is_empty() {
        out.push_str("{}\n");
        return out;
    }
    out.push_str("{\n");
    let n = samples.len();
    for (i, (id, s)) in samples.iter().enumerate() {
        let _ = writeln!(out, "    {}: {{", quote(id));
        let _ = writeln!(out, "        \"image_path\": {},", quote(&s.image_path));
        let _ = writeln!(out, "        \"video_path\": {},", quote(&s.video_path));
        let _ = writeln!(out, "        \"Risk\": {},", quote(s.risk.as_str()));
        write_group(&mut out, "Pedestrians", &s.pedestrians);
        write_group(&mut out, "Cyclists", &s.cyclists);
        let _ = writeln!(out, "        \"suggested_action\": {}", quote(&s.suggested_action));
        out.push_str(if i + 1 == n { "    }\n" } else { "    },\n" });
    }
    out.push_str("}\n");
    out
}

fn write_group(
    out: &mut String,
    name: &str,
    objects: &std::collections::BTreeMap<String, ObjectAnnotation>,
) {
    if objects.is_empty() {
        let _ = writeln!(out, "        \"{name}\": {{}},");
        return;
    }
    let _ = writeln!(out, "        \"{name}\": {{");
    let n = objects.len();
    for (i, (id, o)) in objects.iter().enumerate() {
        let _ = writeln!(out, "            {}: {{", quote(id));
        out.push_str("                \"Box\": [\n");
        let coords = o.bbox.to_array();
        for (k, c) in coords.iter().enumerate() {
            let sep = if k + 1 == coords.len() { "" } else { "," };
            let _ = writeln!(out, "                    {}{sep}", number(*c));
        }
        out.push_str("                ],\n");
        match o.intent {
            None => out.push_str("                \"Intent\": [],\n"),
            Some(label) => {
                out.push_str("                \"Intent\": [\n");
                let _ = writeln!(out, "                    {},", quote(label.lateral.as_str()));
                let _ = writeln!(out, "                    {}", quote(label.vertical.as_str()));
                out.push_str("                ],\n");
            }
        }
        let position = o.position.map(|p| p.as_str()).unwrap_or("");
        let _ = writeln!(out, "                \"Position\": {},", quote(position));
        let _ = writeln!(out, "                \"Description\": {}", quote(&o.description));
        out.push_str(if i + 1 == n { "            }\n" } else { "            },\n" });
    }
    out.push_str("        },\n");
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Integral values print without a fraction; others use the shortest
/// representation that parses back to the same `f64`.
pub(crate) fn number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        serde_json::to_string(&v).expect("finite numbers serialize")
    }
}

pub fn write_dataset(samples: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_canonical_string(samples)).map_err(|e| VruikError::io(path, e))
}
