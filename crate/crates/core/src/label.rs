use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// Binary clarification-need label.
///
/// `Specific` (0) means the query can be answered directly; `Ambiguous` (1)
/// means the system should ask a clarifying question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Specific,
    Ambiguous,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Specific => 0,
            Label::Ambiguous => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Specific),
            1 => Some(Label::Ambiguous),
            _ => None,
        }
    }

    /// The other label; specific and ambiguous are each other's counterfactual.
    pub fn flipped(self) -> Label {
        match self {
            Label::Specific => Label::Ambiguous,
            Label::Ambiguous => Label::Specific,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

// Serialized as the bare integer 0/1 so corpus files match the documented
// line format exactly.
impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct LabelVisitor;

        impl Visitor<'_> for LabelVisitor {
            type Value = Label;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a clarification-need label, 0 or 1")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Label, E> {
                match v {
                    0 => Ok(Label::Specific),
                    1 => Ok(Label::Ambiguous),
                    other => Err(E::custom(format!("label out of range: {other}"))),
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Label, E> {
                u64::try_from(v)
                    .map_err(|_| E::custom(format!("label out of range: {v}")))
                    .and_then(|v| self.visit_u64(v))
            }
        }

        deserializer.deserialize_u64(LabelVisitor)
    }
}
