//! Object classes and time-indexed tracks.

use core::fmt;
use core::str::FromStr;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::BoundingBox;
use crate::{Error, Result};

/// Detector / tracker class vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectClass {
    Person,
    Bicycle,
    Cyclist,
}

/// The two annotation groups a class can be matched against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnnotationGroup {
    Pedestrian,
    Cyclist,
}

impl ObjectClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectClass::Person => "person",
            ObjectClass::Bicycle => "bicycle",
            ObjectClass::Cyclist => "cyclist",
        }
    }

    /// Bicycle and cyclist tracks are both matched against cyclist annotations.
    pub fn group(&self) -> AnnotationGroup {
        match self {
            ObjectClass::Person => AnnotationGroup::Pedestrian,
            ObjectClass::Bicycle | ObjectClass::Cyclist => AnnotationGroup::Cyclist,
        }
    }
}

impl FromStr for ObjectClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "person" | "pedestrian" => Ok(ObjectClass::Person),
            "bicycle" | "cycle" => Ok(ObjectClass::Bicycle),
            "cyclist" => Ok(ObjectClass::Cyclist),
            _ => Err(Error::InvalidInput(format!("unknown object class {s:?}"))),
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub frame: u32,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

impl Observation {
    pub fn new(frame: u32, bbox: BoundingBox, confidence: f64) -> Self {
        Self {
            frame,
            bbox,
            confidence,
        }
    }
}

/// A non-empty run of observations with strictly increasing frame indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    id: String,
    class: ObjectClass,
    observations: Vec<Observation>,
}

impl Track {
    pub fn new(
        id: impl Into<String>,
        class: ObjectClass,
        observations: Vec<Observation>,
    ) -> Result<Self> {
        let id = id.into();
        if observations.is_empty() {
            return Err(Error::InvalidInput(format!("track {id:?} has no observations")));
        }
        for pair in observations.windows(2) {
            if pair[1].frame <= pair[0].frame {
                return Err(Error::InvalidInput(format!(
                    "track {id:?}: frame {} does not follow frame {}",
                    pair[1].frame, pair[0].frame
                )));
            }
        }
        if let Some(bad) = observations
            .iter()
            .find(|o| !(0.0..=1.0).contains(&o.confidence))
        {
            return Err(Error::InvalidInput(format!(
                "track {id:?}: confidence {} outside [0, 1] at frame {}",
                bad.confidence, bad.frame
            )));
        }
        Ok(Self {
            id,
            class,
            observations,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn class(&self) -> ObjectClass {
        self.class
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> &Observation {
        &self.observations[0]
    }

    pub fn last(&self) -> &Observation {
        &self.observations[self.observations.len() - 1]
    }

    pub fn first_frame(&self) -> u32 {
        self.first().frame
    }

    pub fn last_frame(&self) -> u32 {
        self.last().frame
    }

    /// Latest observation at or before `frame`.
    pub fn at_or_before(&self, frame: u32) -> Option<&Observation> {
        let idx = self.observations.partition_point(|o| o.frame <= frame);
        idx.checked_sub(1).map(|i| &self.observations[i])
    }

    /// Appends `other` after this track, keeping this track's identity.
    pub fn concat(mut self, other: Track) -> Result<Track> {
        if other.first_frame() <= self.last_frame() {
            return Err(Error::NotLinkable {
                delta_t: i64::from(other.first_frame()) - i64::from(self.last_frame()),
            });
        }
        self.observations.extend(other.observations);
        Ok(self)
    }
}
