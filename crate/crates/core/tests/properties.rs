use proptest::prelude::*;

use vruik_core::curation::{deduplicate_indexed, filter_frame, CurationConfig, Detection};
use vruik_core::egomotion::{camera_displacement, Aggregator, FlowField, FlowRegion};
use vruik_core::intent::{infer_intent, CameraTrack, IntentConfig};
use vruik_core::metrics::{
    balanced_accuracy, intent_accuracy, od_accuracy, ConfusionCounts, DetectionEvalInput,
};
use vruik_core::synth::fragment;
use vruik_core::tracklink::{affinity, link_tracks, LinkConfig};
use vruik_core::{
    iou, BoundingBox, FrameSize, IntentLabel, LateralIntent, ObjectClass, Observation, Track,
    VerticalIntent,
};

fn int_box() -> impl Strategy<Value = BoundingBox> {
    (0i32..48, 0i32..48, 1i32..17, 1i32..17).prop_map(|(x, y, w, h)| {
        BoundingBox::new(x as f64, y as f64, (x + w) as f64, (y + h) as f64).unwrap()
    })
}

fn real_box() -> impl Strategy<Value = BoundingBox> {
    (-50.0..500.0f64, -50.0..500.0f64, 0.5..200.0f64, 0.5..200.0f64)
        .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, x + w, y + h).unwrap())
}

fn raster_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let mut inter = 0u32;
    let mut union = 0u32;
    for y in 0..80 {
        for x in 0..80 {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let inside = |r: &BoundingBox| px > r.x1() && px < r.x2() && py > r.y1() && py < r.y2();
            let ina = inside(a);
            let inb = inside(b);
            inter += u32::from(ina && inb);
            union += u32::from(ina || inb);
        }
    }
    f64::from(inter) / f64::from(union)
}

fn lateral() -> impl Strategy<Value = LateralIntent> {
    prop::sample::select(LateralIntent::ALL.to_vec())
}

fn vertical() -> impl Strategy<Value = VerticalIntent> {
    prop::sample::select(VerticalIntent::ALL.to_vec())
}

fn label() -> impl Strategy<Value = IntentLabel> {
    (lateral(), vertical()).prop_map(|(l, v)| IntentLabel::new(l, v))
}

fn detection() -> impl Strategy<Value = Detection> {
    (
        prop::sample::select(vec![ObjectClass::Person, ObjectClass::Bicycle, ObjectClass::Cyclist]),
        real_box(),
        0.0..=1.0f64,
    )
        .prop_map(|(class, bbox, confidence)| Detection {
            class,
            bbox,
            confidence,
            frame: 0,
        })
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(a in real_box(), b in real_box()) {
        let ab = iou(&a, &b);
        prop_assert_eq!(ab, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iou_agrees_with_pixel_count(a in int_box(), b in int_box()) {
        prop_assert!((iou(&a, &b) - raster_iou(&a, &b)).abs() < 1e-6);
    }

    #[test]
    fn affinity_is_monotone(
        d in 0.0..200.0f64, dd in 0.0..50.0f64,
        dt in 1u32..40, ddt in 0u32..10,
        alpha in 0.0..=1.0f64,
    ) {
        let cfg = LinkConfig::default();
        let (s, adj) = affinity(d, dt, alpha, &cfg);
        prop_assert!(adj <= s);
        prop_assert!(affinity(d + dd, dt, alpha, &cfg).0 <= s);
        // spatial term uses a horizon growing with the gap, so compare at
        // fixed horizon through the temporal component only
        let (far, _) = affinity(0.0, dt + ddt, alpha, &cfg);
        prop_assert!(far <= affinity(0.0, dt, alpha, &cfg).0);
    }

    #[test]
    fn frame_filter_is_idempotent(dets in prop::collection::vec(detection(), 0..12)) {
        let frame = FrameSize::new(640, 480).unwrap();
        let cfg = CurationConfig { max_per_class: 3, ..CurationConfig::default() };
        let once = filter_frame(&dets, frame, &cfg);
        prop_assert_eq!(filter_frame(&once, frame, &cfg), once);
    }

    #[test]
    fn dedup_leaves_no_close_pair(boxes in prop::collection::vec((0u8..2, real_box()), 0..10)) {
        let d = deduplicate_indexed(&boxes, 0.5);
        for (i, &a) in d.kept.iter().enumerate() {
            for &b in &d.kept[i + 1..] {
                prop_assert!(boxes[a].0 != boxes[b].0 || iou(&boxes[a].1, &boxes[b].1) <= 0.5);
            }
        }
        prop_assert_eq!(d.kept.len() + d.duplicate_of.len(), boxes.len());
    }

    #[test]
    fn median_ignores_minority_outliers(
        tx in -12.0..12.0f32, ty in -12.0..12.0f32,
        outliers in prop::collection::vec((0usize..400, -80.0..80.0f32, -80.0..80.0f32), 0..150),
    ) {
        let mut vectors = vec![[tx, ty]; 400];
        for (i, dx, dy) in outliers {
            vectors[i] = [dx, dy];
        }
        let flow = FlowField::new(20, 20, vectors).unwrap();
        let region = FlowRegion::new(vec![BoundingBox::new(0.0, 0.0, 20.0, 20.0).unwrap()]).unwrap();
        let d = camera_displacement(&flow, &region, Aggregator::Median).unwrap();
        // fewer than half replaced: the median is pinned to the inlier value
        prop_assert_eq!((d.dx, d.dy), (f64::from(tx), f64::from(ty)));
    }

    #[test]
    fn mirroring_swaps_lateral_only(
        vx in -6.0..6.0f64, vy in -3.0..3.0f64, growth in -0.02..0.02f64,
        cam in -5.0..5.0f64, x0 in 300.0..600.0f64,
    ) {
        let frame = FrameSize::new(900, 600).unwrap();
        let make = |sign: f64| {
            let obs = (0..20u32).map(|f| {
                let t = f64::from(f);
                let s = (1.0 + growth).powf(t);
                let cx = x0 + (vx + cam) * t;
                let cx = if sign > 0.0 { cx } else { 900.0 - cx };
                Observation::new(f, BoundingBox::from_center(cx, 300.0 + vy * t, 40.0 * s, 90.0 * s).unwrap(), 1.0)
            }).collect();
            Track::new("m", ObjectClass::Person, obs).unwrap()
        };
        let camera = |sign: f64| -> CameraTrack {
            (0..19).map(|f| (f, vruik_core::egomotion::CameraDisplacement { dx: sign * cam, dy: 0.0 })).collect()
        };
        let cfg = IntentConfig::default();
        let a = infer_intent(&make(1.0), &camera(1.0), frame, &cfg);
        let b = infer_intent(&make(-1.0), &camera(-1.0), frame, &cfg);
        prop_assert_eq!(b.label.lateral, a.label.lateral.mirrored());
        prop_assert_eq!(b.label.vertical, a.label.vertical);
    }

    #[test]
    fn combined_never_exceeds_either_axis(pairs in prop::collection::vec((prop::option::of(label()), label()), 1..40)) {
        let acc = intent_accuracy(&pairs).unwrap();
        prop_assert!(acc.combined <= acc.lateral.min(acc.vertical));
        for v in [acc.lateral, acc.vertical, acc.combined] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn od_ignores_prediction_order(
        gt in prop::collection::vec(real_box(), 0..6),
        mut pred in prop::collection::vec(real_box(), 0..6),
    ) {
        let a = od_accuracy(&DetectionEvalInput { ground_truth: gt.clone(), predictions: pred.clone(), iou_threshold: 0.5 });
        pred.reverse();
        let b = od_accuracy(&DetectionEvalInput { ground_truth: gt, predictions: pred, iou_threshold: 0.5 });
        prop_assert_eq!(a, b);
    }

    #[test]
    fn constant_predictor_has_chance_balanced_accuracy(pos in 1u64..500, neg in 1u64..500, yes in any::<bool>()) {
        let mut c = ConfusionCounts::default();
        for i in 0..pos + neg {
            c.record(yes, i < pos);
        }
        prop_assert_eq!(balanced_accuracy(&c).unwrap(), 0.5);
    }

    #[test]
    fn fragments_relink(vx in -5.0..5.0f64, vy in -3.0..3.0f64, split in 4u32..15, gap in 1u32..=3) {
        let obs = (0..20u32).map(|f| {
            let t = f64::from(f);
            Observation::new(f, BoundingBox::from_center(400.0 + vx * t, 300.0 + vy * t, 40.0, 100.0).unwrap(), 1.0)
        }).collect();
        let whole = Track::new("w", ObjectClass::Person, obs).unwrap();
        let (a, b) = fragment(&whole, split, gap).unwrap();
        let linked = link_tracks(&[b, a.clone()], &LinkConfig::default());
        prop_assert_eq!(linked.len(), 1);
        prop_assert_eq!(linked[0].id(), a.id());
        prop_assert_eq!(linked[0].len(), 20 - gap as usize);
    }
}
