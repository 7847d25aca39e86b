use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 4;

/// Grade of a jujube. The integer encoding doubles as the severity order
/// used to break exact ties (lower index wins).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    Invalid = 0,
    Rotten = 1,
    Wizened = 2,
    Normal = 3,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] =
        [Self::Invalid, Self::Rotten, Self::Wizened, Self::Normal];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Precondition {
                op: "class_label",
                msg: format!("class index {i} is outside 0..{NUM_CLASSES}"),
            })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Invalid => "invalid",
            Self::Rotten => "rotten",
            Self::Wizened => "wizened",
            Self::Normal => "normal",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Precondition {
                op: "class_label",
                msg: format!("unknown label `{s}` (expected invalid, rotten, wizened or normal)"),
            })
    }
}
