use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Diagnostic class. The declaration order is the fixed class order used for
/// confusion-matrix axes, decision-score vectors and argmax tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Covid,
    Normal,
    Pneumonia,
}

pub const NUM_CLASSES: usize = 3;

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] =
        [ClassLabel::Covid, ClassLabel::Normal, ClassLabel::Pneumonia];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Covid => "covid",
            ClassLabel::Normal => "normal",
            ClassLabel::Pneumonia => "pneumonia",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    /// Case-insensitive; `covid-19` and `covid19` are accepted as aliases.
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "covid" | "covid-19" | "covid19" => Ok(ClassLabel::Covid),
            "normal" => Ok(ClassLabel::Normal),
            "pneumonia" => Ok(ClassLabel::Pneumonia),
            other => Err(Error::Dataset(format!("unknown label `{other}`"))),
        }
    }
}
