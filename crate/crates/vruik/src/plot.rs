//! SVG overlays of trajectories and annotated intents.

use std::fmt::Write as _;

use vruik_core::dataset::SceneAnnotation;
use vruik_core::{BoundingBox, FrameSize, LateralIntent, Track, VerticalIntent};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn rect(out: &mut String, b: &BoundingBox, stroke: &str, dashed: bool) {
    let _ = writeln!(
        out,
        r#"  <rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="{stroke}" stroke-width="2"{}/>"#,
        b.x1(),
        b.y1(),
        b.width(),
        b.height(),
        if dashed { r#" stroke-dasharray="6 4""# } else { "" }
    );
}

/// Track centres as polylines with the final box outlined, plus, when a
/// sample is given, its annotation boxes with intent arrows and labels.
pub fn render_svg(frame: FrameSize, tracks: &[Track], sample: Option<&SceneAnnotation>) -> String {
    let (w, h) = (frame.width(), frame.height());
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    out.push_str("  <defs><marker id=\"head\" markerWidth=\"8\" markerHeight=\"8\" refX=\"6\" refY=\"4\" orient=\"auto\"><path d=\"M0,0 L8,4 L0,8 z\" fill=\"#000\"/></marker></defs>\n");
    let _ = writeln!(out, r##"  <rect width="{w}" height="{h}" fill="#f7f7f7"/>"##);
    for third in [1.0 / 3.0, 2.0 / 3.0] {
        let x = f64::from(w) * third;
        let _ = writeln!(
            out,
            r##"  <line x1="{x:.1}" y1="0" x2="{x:.1}" y2="{h}" stroke="#bbb" stroke-dasharray="4 4"/>"##
        );
    }

    for (k, t) in tracks.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = t
            .observations()
            .iter()
            .map(|o| {
                let (x, y) = o.bbox.center();
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"  <polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        );
        let last = t.last().bbox;
        rect(&mut out, &last, color, false);
        let _ = writeln!(
            out,
            r#"  <text x="{:.1}" y="{:.1}" font-size="12" fill="{color}">{}</text>"#,
            last.x1(),
            last.y2() + 14.0,
            escape(t.id())
        );
    }

    if let Some(s) = sample {
        for (group, id, obj) in s.objects() {
            rect(&mut out, &obj.bbox, "#000", true);
            let (cx, cy) = obj.bbox.center();
            let mut caption = format!("{}/{id}", match group {
                vruik_core::track::AnnotationGroup::Pedestrian => "ped",
                vruik_core::track::AnnotationGroup::Cyclist => "cyc",
            });
            if let Some(label) = obj.intent {
                let len = 0.6 * obj.bbox.width().max(20.0);
                let dx = match label.lateral {
                    LateralIntent::GoesToTheLeft => -len,
                    LateralIntent::GoesToTheRight => len,
                    LateralIntent::Stationary => 0.0,
                };
                // towards the ego vehicle is drawn downwards (nearer the camera)
                let dy = match label.vertical {
                    VerticalIntent::MovesTowardsEgoVehicle => len,
                    VerticalIntent::MovesAwayFromEgoVehicle => -len,
                    VerticalIntent::Stationary => 0.0,
                };
                if dx != 0.0 || dy != 0.0 {
                    let _ = writeln!(
                        out,
                        r##"  <line x1="{cx:.1}" y1="{cy:.1}" x2="{:.1}" y2="{:.1}" stroke="#000" stroke-width="2" marker-end="url(#head)"/>"##,
                        cx + dx,
                        cy + dy
                    );
                }
                let _ = write!(caption, ": {} / {}", label.lateral, label.vertical);
            }
            if let Some(p) = obj.position {
                let _ = write!(caption, " [{p}]");
            }
            let _ = writeln!(
                out,
                r##"  <text x="{:.1}" y="{:.1}" font-size="12" fill="#000">{}</text>"##,
                obj.bbox.x1(),
                obj.bbox.y1() - 4.0,
                escape(&caption)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use vruik_core::dataset::{ObjectAnnotation, Risk};
    use vruik_core::{IntentLabel, ObjectClass, Observation};

    #[test]
    fn svg_contains_tracks_and_labels() {
        let b = |x: f64| BoundingBox::new(x, 10.0, x + 10.0, 40.0).unwrap();
        let t = Track::new(
            "t<1>",
            ObjectClass::Person,
            vec![Observation::new(0, b(10.0), 1.0), Observation::new(1, b(20.0), 1.0)],
        )
        .unwrap();
        let mut s = SceneAnnotation::new("s", Risk::Yes);
        let mut o = ObjectAnnotation::new(b(20.0));
        o.intent = Some(IntentLabel::new(LateralIntent::GoesToTheRight, VerticalIntent::Stationary));
        s.pedestrians.insert("1".into(), o);
        let svg = render_svg(FrameSize::new(100, 60).unwrap(), &[t], Some(&s));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polyline points=\"15.0,25.0 25.0,25.0\""));
        assert!(svg.contains("t&lt;1&gt;"));
        assert!(svg.contains("goes to the right"));
        assert!(svg.contains("marker-end"));
    }
}
