//! Annotation and evaluation primitives for vulnerable-road-user (VRU) intent
//! benchmarks.
//!
//! The crate is `no_std` (with `alloc`) so the geometry, assignment, motion
//! and metric code can be reused outside a hosted environment. File formats,
//! configuration files and the command line live in the companion `vruik`
//! crate.
//!
//! Stage overview:
//!
//! * [`curation`] selects salient person / bicycle / cyclist detections per frame.
//! * [`tracklink`] repairs fragmented tracks with a spatiotemporal affinity score.
//! * [`matching`] assigns tracks to annotation boxes (Hungarian on inverse IoU).
//! * [`egomotion`] estimates camera displacement from dense flow around an object.
//! * [`intent`] turns road-relative displacement into lateral / vertical labels.
//! * [`metrics`] scores detection, intent, risk and action-suggestion outputs.
//! * [`dataset`], [`synth`] and [`pipeline`] tie the stages together.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod curation;
pub mod dataset;
pub mod egomotion;
mod error;
pub mod geometry;
pub mod intent;
pub mod labels;
pub mod matching;
pub mod metrics;
pub mod pipeline;
pub mod synth;
pub mod track;
pub mod tracklink;

pub use error::{Error, Result};
pub use geometry::{center, iou, visible_fraction, BoundingBox, FrameSize};
pub use labels::{IntentLabel, LateralIntent, RelativePosition, VerticalIntent};
pub use track::{ObjectClass, Observation, Track};
