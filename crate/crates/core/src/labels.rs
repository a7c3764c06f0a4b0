//! Intent and relative-position vocabularies.
//!
//! Labels render as the phrases used in annotation files ("goes to the left",
//! "moves towards ego vehicle"). Parsing also accepts the snake_case
//! spellings (`goes_to_the_left`).

use core::fmt;
use core::str::FromStr;

use alloc::format;

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LateralIntent {
    Stationary,
    GoesToTheLeft,
    GoesToTheRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VerticalIntent {
    Stationary,
    MovesTowardsEgoVehicle,
    MovesAwayFromEgoVehicle,
}

/// Horizontal placement of an object relative to the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelativePosition {
    Left,
    Right,
    Front,
}

/// One cell of the 3x3 lateral x vertical intent grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntentLabel {
    pub lateral: LateralIntent,
    pub vertical: VerticalIntent,
}

impl IntentLabel {
    pub const STATIONARY: IntentLabel = IntentLabel {
        lateral: LateralIntent::Stationary,
        vertical: VerticalIntent::Stationary,
    };

    pub fn new(lateral: LateralIntent, vertical: VerticalIntent) -> Self {
        Self { lateral, vertical }
    }

    /// Index into the nine combined classes, `lateral * 3 + vertical`.
    pub fn class_index(&self) -> usize {
        self.lateral.index() * 3 + self.vertical.index()
    }
}

impl LateralIntent {
    pub const ALL: [LateralIntent; 3] = [
        LateralIntent::Stationary,
        LateralIntent::GoesToTheLeft,
        LateralIntent::GoesToTheRight,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LateralIntent::Stationary => "stationary",
            LateralIntent::GoesToTheLeft => "goes to the left",
            LateralIntent::GoesToTheRight => "goes to the right",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }

    /// Left and right swap under a horizontal flip of the image.
    pub fn mirrored(&self) -> Self {
        match self {
            LateralIntent::Stationary => LateralIntent::Stationary,
            LateralIntent::GoesToTheLeft => LateralIntent::GoesToTheRight,
            LateralIntent::GoesToTheRight => LateralIntent::GoesToTheLeft,
        }
    }
}

impl VerticalIntent {
    pub const ALL: [VerticalIntent; 3] = [
        VerticalIntent::Stationary,
        VerticalIntent::MovesTowardsEgoVehicle,
        VerticalIntent::MovesAwayFromEgoVehicle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            VerticalIntent::Stationary => "stationary",
            VerticalIntent::MovesTowardsEgoVehicle => "moves towards ego vehicle",
            VerticalIntent::MovesAwayFromEgoVehicle => "moves away from ego vehicle",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

impl RelativePosition {
    pub fn as_str(&self) -> &'static str {
        match self {
            RelativePosition::Left => "Left",
            RelativePosition::Right => "Right",
            RelativePosition::Front => "Front",
        }
    }

    pub fn mirrored(&self) -> Self {
        match self {
            RelativePosition::Left => RelativePosition::Right,
            RelativePosition::Right => RelativePosition::Left,
            RelativePosition::Front => RelativePosition::Front,
        }
    }
}

fn normalize(s: &str) -> alloc::string::String {
    s.trim().to_ascii_lowercase().replace('_', " ")
}

impl FromStr for LateralIntent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match normalize(s).as_str() {
            "stationary" => Ok(LateralIntent::Stationary),
            "goes to the left" => Ok(LateralIntent::GoesToTheLeft),
            "goes to the right" => Ok(LateralIntent::GoesToTheRight),
            _ => Err(Error::InvalidInput(format!("unknown lateral intent {s:?}"))),
        }
    }
}

impl FromStr for VerticalIntent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match normalize(s).as_str() {
            "stationary" => Ok(VerticalIntent::Stationary),
            "moves towards ego vehicle" => Ok(VerticalIntent::MovesTowardsEgoVehicle),
            "moves away from ego vehicle" => Ok(VerticalIntent::MovesAwayFromEgoVehicle),
            _ => Err(Error::InvalidInput(format!("unknown vertical intent {s:?}"))),
        }
    }
}

impl FromStr for RelativePosition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "Left" => Ok(RelativePosition::Left),
            "Right" => Ok(RelativePosition::Right),
            "Front" => Ok(RelativePosition::Front),
            _ => Err(Error::InvalidInput(format!("unknown position {s:?}"))),
        }
    }
}

impl fmt::Display for LateralIntent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for VerticalIntent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for RelativePosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for IntentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lateral, self.vertical)
    }
}
