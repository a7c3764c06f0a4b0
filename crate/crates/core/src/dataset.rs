//! In-memory benchmark samples and dataset summaries.
//!
//! Serialization lives in the `vruik` crate; the types here already enforce
//! the sample invariants (valid boxes, two-part intents, closed position and
//! risk vocabularies).

use alloc::collections::BTreeMap;
use alloc::string::String;

use crate::geometry::BoundingBox;
use crate::labels::{IntentLabel, RelativePosition};
use crate::track::AnnotationGroup;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Risk {
    Yes,
    No,
}

impl Risk {
    pub fn as_str(&self) -> &'static str {
        match self {
            Risk::Yes => "Yes",
            Risk::No => "No",
        }
    }

    pub fn is_positive(&self) -> bool {
        matches!(self, Risk::Yes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectAnnotation {
    pub bbox: BoundingBox,
    /// `None` before annotation (stored as an empty list).
    pub intent: Option<IntentLabel>,
    /// `None` before annotation (stored as an empty string).
    pub position: Option<RelativePosition>,
    pub description: String,
}

impl ObjectAnnotation {
    pub fn new(bbox: BoundingBox) -> Self {
        Self {
            bbox,
            intent: None,
            position: None,
            description: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneAnnotation {
    pub sample_id: String,
    pub image_path: String,
    pub video_path: String,
    pub risk: Risk,
    pub pedestrians: BTreeMap<String, ObjectAnnotation>,
    pub cyclists: BTreeMap<String, ObjectAnnotation>,
    pub suggested_action: String,
}

/// Samples keyed by sample id.
pub type Dataset = BTreeMap<String, SceneAnnotation>;

impl SceneAnnotation {
    pub fn new(sample_id: impl Into<String>, risk: Risk) -> Self {
        Self {
            sample_id: sample_id.into(),
            image_path: String::new(),
            video_path: String::new(),
            risk,
            pedestrians: BTreeMap::new(),
            cyclists: BTreeMap::new(),
            suggested_action: String::new(),
        }
    }

    /// All objects, pedestrians first, each group in id order.
    pub fn objects(&self) -> impl Iterator<Item = (AnnotationGroup, &String, &ObjectAnnotation)> {
        self.pedestrians
            .iter()
            .map(|(id, o)| (AnnotationGroup::Pedestrian, id, o))
            .chain(self.cyclists.iter().map(|(id, o)| (AnnotationGroup::Cyclist, id, o)))
    }

    pub fn group(&self, group: AnnotationGroup) -> &BTreeMap<String, ObjectAnnotation> {
        match group {
            AnnotationGroup::Pedestrian => &self.pedestrians,
            AnnotationGroup::Cyclist => &self.cyclists,
        }
    }

    pub fn group_mut(&mut self, group: AnnotationGroup) -> &mut BTreeMap<String, ObjectAnnotation> {
        match group {
            AnnotationGroup::Pedestrian => &mut self.pedestrians,
            AnnotationGroup::Cyclist => &mut self.cyclists,
        }
    }

    pub fn object_count(&self) -> usize {
        self.pedestrians.len() + self.cyclists.len()
    }

    pub fn has_intents(&self) -> bool {
        self.objects().any(|(_, _, o)| o.intent.is_some())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetStats {
    pub samples: usize,
    pub pedestrians: usize,
    pub cyclists: usize,
    pub samples_with_pedestrians: usize,
    pub samples_with_cyclists: usize,
    pub risk_yes: usize,
    pub risk_no: usize,
    /// Indexed by `LateralIntent::index()`.
    pub lateral: [usize; 3],
    /// Indexed by `VerticalIntent::index()`.
    pub vertical: [usize; 3],
    /// Objects whose intent has not been filled in.
    pub intent_empty: usize,
    /// Left, Right, Front.
    pub position: [usize; 3],
}

pub fn dataset_stats(samples: &Dataset) -> DatasetStats {
    let mut s = DatasetStats {
        samples: samples.len(),
        ..DatasetStats::default()
    };
    for sample in samples.values() {
        s.pedestrians += sample.pedestrians.len();
        s.cyclists += sample.cyclists.len();
        s.samples_with_pedestrians += usize::from(!sample.pedestrians.is_empty());
        s.samples_with_cyclists += usize::from(!sample.cyclists.is_empty());
        match sample.risk {
            Risk::Yes => s.risk_yes += 1,
            Risk::No => s.risk_no += 1,
        }
        for (_, _, obj) in sample.objects() {
            match obj.intent {
                Some(label) => {
                    s.lateral[label.lateral.index()] += 1;
                    s.vertical[label.vertical.index()] += 1;
                }
                None => s.intent_empty += 1,
            }
            match obj.position {
                Some(RelativePosition::Left) => s.position[0] += 1,
                Some(RelativePosition::Right) => s.position[1] += 1,
                Some(RelativePosition::Front) => s.position[2] += 1,
                None => {}
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{LateralIntent, VerticalIntent};

    #[test]
    fn empty_dataset_has_zero_stats() {
        assert_eq!(dataset_stats(&Dataset::new()), DatasetStats::default());
    }

    #[test]
    fn stats_count_objects_and_labels() {
        let b = BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let mut a = SceneAnnotation::new("a", Risk::Yes);
        let mut labelled = ObjectAnnotation::new(b);
        labelled.intent = Some(IntentLabel::new(
            LateralIntent::GoesToTheLeft,
            VerticalIntent::MovesTowardsEgoVehicle,
        ));
        labelled.position = Some(RelativePosition::Left);
        a.pedestrians.insert("1".into(), labelled);
        a.pedestrians.insert("2".into(), ObjectAnnotation::new(b));
        let mut c = SceneAnnotation::new("c", Risk::No);
        c.cyclists.insert("1".into(), ObjectAnnotation::new(b));
        let ds: Dataset = [("a".into(), a), ("c".into(), c)].into_iter().collect();
        let s = dataset_stats(&ds);
        assert_eq!((s.samples, s.pedestrians, s.cyclists), (2, 2, 1));
        assert_eq!((s.risk_yes, s.risk_no), (1, 1));
        assert_eq!((s.samples_with_pedestrians, s.samples_with_cyclists), (1, 1));
        assert_eq!(s.lateral, [0, 1, 0]);
        assert_eq!(s.vertical, [0, 1, 0]);
        assert_eq!(s.intent_empty, 2);
        assert_eq!(s.position, [1, 0, 0]);
    }
}
