use std::path::Path;

use vruik::datasetio::{load_dataset, to_canonical_string, write_dataset};
use vruik_core::dataset::dataset_stats;
use vruik_core::{LateralIntent, VerticalIntent};

const FIXTURE: &str = "tests/fixtures/twenty_samples.json";

fn path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(FIXTURE)
}

#[test]
fn fixture_rewrites_to_identical_bytes() {
    let bytes = std::fs::read_to_string(path()).unwrap();
    let loaded = load_dataset(path()).unwrap();
    assert_eq!(to_canonical_string(&loaded.samples), bytes);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("copy.json");
    write_dataset(&loaded.samples, &out).unwrap();
    let again = load_dataset(&out).unwrap();
    assert_eq!(again.samples, loaded.samples);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), bytes);
}

#[test]
fn fixture_counts_match_hand_tally() {
    let loaded = load_dataset(path()).unwrap();
    let s = dataset_stats(&loaded.samples);
    assert_eq!(s.samples, 20);
    assert_eq!((s.risk_yes, s.risk_no), (17, 3));
    assert_eq!((s.pedestrians, s.cyclists), (23, 7));
    assert_eq!((s.samples_with_pedestrians, s.samples_with_cyclists), (17, 6));
    assert_eq!(s.intent_empty, 2);
    assert_eq!(loaded.intent_empty.len(), 2);

    assert_eq!(s.lateral[LateralIntent::GoesToTheLeft.index()], 10);
    assert_eq!(s.lateral[LateralIntent::GoesToTheRight.index()], 9);
    assert_eq!(s.lateral[LateralIntent::Stationary.index()], 9);
    assert_eq!(s.vertical[VerticalIntent::MovesTowardsEgoVehicle.index()], 11);
    assert_eq!(s.vertical[VerticalIntent::MovesAwayFromEgoVehicle.index()], 8);
    assert_eq!(s.vertical[VerticalIntent::Stationary.index()], 9);
    assert_eq!(s.position, [11, 7, 10]);

    let cafe = &loaded.samples["s11"];
    assert!(cafe.objects().any(|(_, _, o)| o.description.contains("café")));
    let frac = &loaded.samples["s08"];
    assert_eq!(frac.pedestrians.values().next().unwrap().bbox.x1(), 512.5);
}
