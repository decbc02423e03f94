//! Recognition of driver logs against the hours-of-service tree.
//!
//! [`label_log`] annotates every record with the Week, Day, DayType,
//! Sequence, BreakType, Token and Legal contexts. Regions that admit no legal
//! parse still receive the lower-level contexts that can be recovered locally.

mod explain;
mod fallback;
mod io;
mod recognizer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::activity_log::{ActivityRecord, DriverLog};
use crate::error::{Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::regulation::{RegulationParameters, Token};

pub use explain::explain_parse;
pub use io::{parse_labelled, write_labelled, LABELLED_HEADER};

macro_rules! context_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                // The published tables spell it "unkown" in places.
                let s = if s == "unkown" { "unknown" } else { s };
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == s)
                    .ok_or_else(|| Error::invalid(format!("unknown {} value '{s}'", stringify!($name))))
            }
        }
    };
}

context_enum!(DayType { Ndd => "ndd", Edd => "edd", Unknown => "unknown" });
context_enum!(SequencePosition {
    First => "first",
    Second => "second",
    Third => "third",
    Unique => "unique",
    Unknown => "unknown",
});
context_enum!(BreakType {
    Uninterrupted => "uninterrupted",
    Split1 => "split_1",
    Split2 => "split_2",
    Unknown => "unknown",
});

impl SequencePosition {
    pub(crate) fn of(index: usize, count: usize) -> Self {
        match (count, index) {
            (1, _) => SequencePosition::Unique,
            (_, 0) => SequencePosition::First,
            (_, 1) => SequencePosition::Second,
            (_, 2) => SequencePosition::Third,
            _ => SequencePosition::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextSet {
    pub week: u32,
    pub day: u32,
    pub day_type: DayType,
    pub sequence: SequencePosition,
    pub break_type: BreakType,
    pub token: Option<Token>,
    pub legal: bool,
}

impl ContextSet {
    /// True when none of the categorical contexts is unknown.
    pub fn fully_resolved(&self) -> bool {
        self.day_type != DayType::Unknown
            && self.sequence != SequencePosition::Unknown
            && self.break_type != BreakType::Unknown
            && self.token.is_some()
    }

    pub fn token_str(&self) -> &'static str {
        self.token.map_or("unknown", Token::as_str)
    }

    pub fn legal_str(&self) -> &'static str {
        if self.legal {
            "yes"
        } else {
            "no"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledActivity {
    pub record: ActivityRecord,
    pub contexts: ContextSet,
    pub infraction: Option<String>,
}

/// Labels one driver's log. The log should already be validated and merged.
pub fn label_log(log: &DriverLog, params: &RegulationParameters) -> Vec<LabeledActivity> {
    let steps = recognizer::recognize(&log.records, params);
    recognizer::assemble(&log.records, &steps, params)
}

/// Labels many logs, one per driver, keeping input order.
pub fn label_logs(
    logs: &[DriverLog],
    params: &RegulationParameters,
    exec: Execution,
) -> Vec<Vec<LabeledActivity>> {
    map_ordered(logs, exec, |log| label_log(log, params))
}

/// True when every record of the labelled log is legal.
pub fn is_fully_legal(labels: &[LabeledActivity]) -> bool {
    labels.iter().all(|l| l.contexts.legal)
}

/// Rebuilds the raw driver log underlying a labelled log.
pub fn raw_log(labels: &[LabeledActivity]) -> Option<DriverLog> {
    let first = labels.first()?;
    Some(DriverLog {
        driver_id: first.record.driver_id.clone(),
        records: labels.iter().map(|l| l.record.clone()).collect(),
    })
}

#[cfg(test)]
mod tests;
