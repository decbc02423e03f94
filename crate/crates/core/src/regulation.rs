//! Duration boundaries and count limits of the hours-of-service tree.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::activity_log::ActivityKind;
use crate::error::{Error, Result};

/// Finest-grain activity category in the hours-of-service tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Token {
    A,
    #[serde(rename = "B_T0")]
    BT0,
    #[serde(rename = "B_T1")]
    BT1,
    #[serde(rename = "B_T2")]
    BT2,
    #[serde(rename = "B_T3")]
    BT3,
    #[serde(rename = "DR_T1")]
    DrT1,
    #[serde(rename = "DR_T2")]
    DrT2,
    #[serde(rename = "DR_T3")]
    DrT3,
    #[serde(rename = "DR_T4")]
    DrT4,
    #[serde(rename = "WR_T1")]
    WrT1,
    #[serde(rename = "WR_T2")]
    WrT2,
}

impl Token {
    pub const ALL: [Token; 11] = [
        Token::A,
        Token::BT0,
        Token::BT1,
        Token::BT2,
        Token::BT3,
        Token::DrT1,
        Token::DrT2,
        Token::DrT3,
        Token::DrT4,
        Token::WrT1,
        Token::WrT2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Token::A => "A",
            Token::BT0 => "B_T0",
            Token::BT1 => "B_T1",
            Token::BT2 => "B_T2",
            Token::BT3 => "B_T3",
            Token::DrT1 => "DR_T1",
            Token::DrT2 => "DR_T2",
            Token::DrT3 => "DR_T3",
            Token::DrT4 => "DR_T4",
            Token::WrT1 => "WR_T1",
            Token::WrT2 => "WR_T2",
        }
    }

    pub fn is_daily_rest(self) -> bool {
        matches!(self, Token::DrT1 | Token::DrT2 | Token::DrT3 | Token::DrT4)
    }

    pub fn is_weekly_rest(self) -> bool {
        matches!(self, Token::WrT1 | Token::WrT2)
    }

    pub fn is_rest(self) -> bool {
        self.is_daily_rest() || self.is_weekly_rest()
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Token {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Token::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown token '{s}'")))
    }
}

/// Position a break occupies in the grammar; decides which tokens it may take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BreakRole {
    /// Short pause inside a basic driving sequence.
    InSequence,
    /// First part of a split break.
    SplitFirst,
    /// Second part of a split break, closing the sequence.
    SplitSecond,
    /// Full break closing the sequence in one piece.
    Uninterrupted,
    /// Daily rest closing a daily period.
    DayTerminal,
    /// Second part of a split daily rest.
    SplitRestSecond,
    /// Weekly rest closing a weekly period.
    WeekTerminal,
    /// Union of every role.
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegulationParameters {
    pub short_break_max: u32,
    pub split1_break_min: u32,
    pub split2_break_min: u32,
    pub full_break_min: u32,
    pub seq_driving_max: u32,
    pub ndd_driving_max: u32,
    pub edd_driving_max: u32,
    pub edd_per_week_max: u32,
    pub daily_rest_regular_min: u32,
    pub daily_rest_reduced_min: u32,
    pub daily_rest_reduced_per_week_max: u32,
    pub split_rest_first_min: u32,
    pub split_rest_second_min: u32,
    pub weekly_rest_regular_min: u32,
    pub weekly_rest_reduced_min: u32,
    pub daily_rest_deadline: u32,
    pub weekly_rest_deadline_days: u32,
}

impl Default for RegulationParameters {
    fn default() -> Self {
        RegulationParameters {
            short_break_max: 15,
            split1_break_min: 15,
            split2_break_min: 30,
            full_break_min: 45,
            seq_driving_max: 270,
            ndd_driving_max: 540,
            edd_driving_max: 600,
            edd_per_week_max: 2,
            daily_rest_regular_min: 660,
            daily_rest_reduced_min: 540,
            daily_rest_reduced_per_week_max: 3,
            split_rest_first_min: 180,
            split_rest_second_min: 540,
            weekly_rest_regular_min: 2700,
            weekly_rest_reduced_min: 1440,
            daily_rest_deadline: 1440,
            weekly_rest_deadline_days: 6,
        }
    }
}

impl RegulationParameters {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let params: RegulationParameters =
            toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mins = [
            self.split1_break_min,
            self.split2_break_min,
            self.full_break_min,
            self.daily_rest_regular_min,
            self.daily_rest_reduced_min,
            self.split_rest_first_min,
            self.split_rest_second_min,
            self.weekly_rest_regular_min,
            self.weekly_rest_reduced_min,
        ];
        let checks = [
            (
                mins.iter().all(|&m| m > 0),
                "every lower bound must be positive",
            ),
            (
                self.daily_rest_reduced_min < self.daily_rest_regular_min,
                "reduced daily rest must be shorter than regular",
            ),
            (
                self.weekly_rest_reduced_min < self.weekly_rest_regular_min,
                "reduced weekly rest must be shorter than regular",
            ),
            (
                self.split1_break_min < self.split2_break_min
                    && self.split2_break_min < self.full_break_min,
                "split break parts must satisfy split1 < split2 < full",
            ),
            (
                self.ndd_driving_max < self.edd_driving_max,
                "ndd driving limit must be below edd limit",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Config((*msg).to_owned())),
            None => Ok(()),
        }
    }

    /// Softens every bound by `epsilon_min`: maxima grow, minima shrink (floored at 1).
    /// Count limits are untouched.
    pub fn relax(&self, epsilon_min: u32) -> RegulationParameters {
        let up = |v: u32| v.saturating_add(epsilon_min);
        let down = |v: u32| v.saturating_sub(epsilon_min).max(1);
        RegulationParameters {
            short_break_max: up(self.short_break_max),
            split1_break_min: down(self.split1_break_min),
            split2_break_min: down(self.split2_break_min),
            full_break_min: down(self.full_break_min),
            seq_driving_max: up(self.seq_driving_max),
            ndd_driving_max: up(self.ndd_driving_max),
            edd_driving_max: up(self.edd_driving_max),
            edd_per_week_max: self.edd_per_week_max,
            daily_rest_regular_min: down(self.daily_rest_regular_min),
            daily_rest_reduced_min: down(self.daily_rest_reduced_min),
            daily_rest_reduced_per_week_max: self.daily_rest_reduced_per_week_max,
            split_rest_first_min: down(self.split_rest_first_min),
            split_rest_second_min: down(self.split_rest_second_min),
            weekly_rest_regular_min: down(self.weekly_rest_regular_min),
            weekly_rest_reduced_min: down(self.weekly_rest_reduced_min),
            daily_rest_deadline: up(self.daily_rest_deadline),
            weekly_rest_deadline_days: self.weekly_rest_deadline_days,
        }
    }

    /// Half-open admissible duration interval `[lo, hi)` of a break or rest token.
    /// `A` has no duration constraint.
    pub fn interval(&self, token: Token) -> (u32, Option<u32>) {
        match token {
            Token::A => (1, None),
            Token::BT0 => (1, Some(self.short_break_max)),
            Token::BT2 => (self.split1_break_min, Some(self.full_break_min)),
            Token::BT3 => (self.split2_break_min, Some(self.daily_rest_reduced_min)),
            Token::BT1 => (self.full_break_min, Some(self.daily_rest_reduced_min)),
            Token::DrT3 => (self.split_rest_first_min, Some(self.daily_rest_reduced_min)),
            Token::DrT2 => (
                self.daily_rest_reduced_min,
                Some(self.daily_rest_regular_min),
            ),
            Token::DrT1 => (
                self.daily_rest_regular_min,
                Some(self.weekly_rest_reduced_min),
            ),
            Token::DrT4 => (
                self.split_rest_second_min,
                Some(self.weekly_rest_reduced_min),
            ),
            Token::WrT2 => (
                self.weekly_rest_reduced_min,
                Some(self.weekly_rest_regular_min),
            ),
            Token::WrT1 => (self.weekly_rest_regular_min, None),
        }
    }

    pub fn admits(&self, token: Token, duration_min: u32) -> bool {
        let (lo, hi) = self.interval(token);
        duration_min >= lo && hi.is_none_or(|h| duration_min < h)
    }

    /// Minutes of a rest that must be completed before the daily deadline.
    pub fn rest_requirement(&self, token: Token) -> u32 {
        match token {
            Token::DrT2 => self.daily_rest_reduced_min,
            Token::DrT4 => self.split_rest_second_min,
            _ => self.daily_rest_regular_min,
        }
    }
}

fn role_tokens(role: BreakRole) -> &'static [Token] {
    match role {
        BreakRole::InSequence => &[Token::BT0],
        BreakRole::SplitFirst => &[Token::BT2],
        BreakRole::SplitSecond => &[Token::BT3],
        BreakRole::Uninterrupted => &[Token::BT1],
        BreakRole::DayTerminal => &[Token::DrT1, Token::DrT2, Token::DrT3],
        BreakRole::SplitRestSecond => &[Token::DrT4],
        BreakRole::WeekTerminal => &[Token::WrT1, Token::WrT2],
        BreakRole::Any => &[
            Token::BT0,
            Token::BT1,
            Token::BT2,
            Token::BT3,
            Token::DrT1,
            Token::DrT2,
            Token::DrT3,
            Token::DrT4,
            Token::WrT1,
            Token::WrT2,
        ],
    }
}

/// Tokens a record of `kind` and `duration_min` may take in `role`.
pub fn admissible_tokens(
    kind: ActivityKind,
    duration_min: u32,
    role: BreakRole,
    params: &RegulationParameters,
) -> BTreeSet<Token> {
    if kind.is_work() {
        return BTreeSet::from([Token::A]);
    }
    role_tokens(role)
        .iter()
        .copied()
        .filter(|&t| params.admits(t, duration_min))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn relax_examples() {
        let p = RegulationParameters::default();
        assert_eq!(p.relax(0), p);
        assert_eq!(p.relax(2).short_break_max, 17);
        assert_eq!(p.relax(2).full_break_min, 43);
        assert_eq!(p.relax(2).edd_per_week_max, 2);
        assert_eq!(p.relax(5000).split1_break_min, 1);
    }

    #[test]
    fn admissible_examples() {
        let p = RegulationParameters::default();
        assert!(
            admissible_tokens(ActivityKind::Break, 39, BreakRole::SplitFirst, &p)
                .contains(&Token::BT2)
        );
        assert_eq!(
            admissible_tokens(ActivityKind::Break, 3, BreakRole::InSequence, &p),
            BTreeSet::from([Token::BT0])
        );
        assert_eq!(
            admissible_tokens(ActivityKind::Break, 572, BreakRole::DayTerminal, &p),
            BTreeSet::from([Token::DrT2])
        );
        assert_eq!(
            admissible_tokens(ActivityKind::Break, 665, BreakRole::DayTerminal, &p),
            BTreeSet::from([Token::DrT1])
        );
        assert_eq!(
            admissible_tokens(ActivityKind::Driving, 300, BreakRole::Any, &p),
            BTreeSet::from([Token::A])
        );
        assert!(admissible_tokens(ActivityKind::Break, 20, BreakRole::SplitSecond, &p).is_empty());
        assert!(admissible_tokens(ActivityKind::Break, 16, BreakRole::InSequence, &p).is_empty());
        assert!(
            admissible_tokens(ActivityKind::Break, 16, BreakRole::InSequence, &p.relax(2))
                .contains(&Token::BT0)
        );
    }

    #[test]
    fn defaults_are_valid_and_config_rejects_unknown_keys() {
        RegulationParameters::default().validate().unwrap();
        let p = RegulationParameters::from_toml_str("seq_driving_max = 280").unwrap();
        assert_eq!(p.seq_driving_max, 280);
        assert_eq!(p.ndd_driving_max, 540);
        assert!(RegulationParameters::from_toml_str("bogus = 1").is_err());
        assert!(RegulationParameters::from_toml_str("daily_rest_reduced_min = 700").is_err());
    }

    fn bounds(p: &RegulationParameters) -> (Vec<u32>, Vec<u32>) {
        let maxima = vec![
            p.short_break_max,
            p.seq_driving_max,
            p.ndd_driving_max,
            p.edd_driving_max,
            p.daily_rest_deadline,
        ];
        let minima = vec![
            p.split1_break_min,
            p.split2_break_min,
            p.full_break_min,
            p.daily_rest_regular_min,
            p.daily_rest_reduced_min,
            p.split_rest_first_min,
            p.split_rest_second_min,
            p.weekly_rest_regular_min,
            p.weekly_rest_reduced_min,
        ];
        (maxima, minima)
    }

    proptest! {
        #[test]
        fn relax_is_monotone(e1 in 0u32..3000, extra in 0u32..3000) {
            let p = RegulationParameters::default();
            let (max1, min1) = bounds(&p.relax(e1));
            let (max2, min2) = bounds(&p.relax(e1 + extra));
            prop_assert!(max1.iter().zip(&max2).all(|(a, b)| a <= b));
            prop_assert!(min1.iter().zip(&min2).all(|(a, b)| a >= b && *b >= 1));
            prop_assert_eq!(p.relax(e1).edd_per_week_max, p.edd_per_week_max);
        }
    }
}
