//! Local labelling of records the recognizer could not place.
//!
//! Such a block has no day type or sequence position, but its tokens and
//! break types can usually be recovered by reading it as a run of basic
//! driving sequences, ignoring daily and weekly limits.

use crate::activity_log::ActivityRecord;
use crate::regulation::{RegulationParameters, Token};

use super::BreakType;

const REST_PREFERENCE: [Token; 5] = [
    Token::WrT1,
    Token::WrT2,
    Token::DrT1,
    Token::DrT2,
    Token::DrT3,
];

/// Returns the break type and token of each record in an unplaced block.
pub(crate) fn label_unknown_block(
    records: &[&ActivityRecord],
    p: &RegulationParameters,
) -> Vec<(BreakType, Option<Token>)> {
    let mut out = Vec::with_capacity(records.len());
    let mut seq_start = 0usize;
    let mut split_at: Option<usize> = None;
    let mut driving = 0u32;
    let mut has_work = false;
    let mut invalid = false;

    let close = |out: &mut Vec<(BreakType, Option<Token>)>,
                 start: usize,
                 split_at: Option<usize>,
                 valid: bool,
                 complete: bool| {
        for (k, slot) in out.iter_mut().enumerate().skip(start) {
            slot.0 = match split_at {
                Some(s) if valid || !complete => {
                    if k <= s {
                        BreakType::Split1
                    } else {
                        BreakType::Split2
                    }
                }
                None if valid && complete => BreakType::Uninterrupted,
                _ => BreakType::Unknown,
            };
        }
    };

    for rec in records {
        let d = rec.duration_min;
        let idx = out.len();
        if rec.kind.is_work() {
            if rec.kind == crate::activity_log::ActivityKind::Driving {
                driving += d;
            }
            has_work = true;
            out.push((BreakType::Unknown, Some(Token::A)));
            continue;
        }
        if p.admits(Token::BT0, d) {
            out.push((BreakType::Unknown, Some(Token::BT0)));
            continue;
        }
        let ends_with = if d >= p.split_rest_first_min {
            let token = REST_PREFERENCE.iter().copied().find(|&t| p.admits(t, d));
            out.push((BreakType::Unknown, token));
            true
        } else if split_at.is_none() && p.admits(Token::BT2, d) {
            out.push((BreakType::Unknown, Some(Token::BT2)));
            split_at = Some(idx);
            false
        } else if split_at.is_some() && p.admits(Token::BT3, d) {
            out.push((BreakType::Unknown, Some(Token::BT3)));
            true
        } else if split_at.is_none() && p.admits(Token::BT1, d) {
            out.push((BreakType::Unknown, Some(Token::BT1)));
            true
        } else {
            out.push((BreakType::Unknown, Some(Token::BT2)));
            invalid = true;
            false
        };
        if ends_with {
            let valid = has_work && !invalid && driving <= p.seq_driving_max;
            close(&mut out, seq_start, split_at, valid, true);
            seq_start = out.len();
            split_at = None;
            driving = 0;
            has_work = false;
            invalid = false;
        }
    }
    if seq_start < out.len() {
        let valid = !invalid && driving <= p.seq_driving_max;
        close(&mut out, seq_start, split_at, valid, false);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity_log::ActivityKind::{Break, Driving};
    use crate::activity_log::{parse_timestamp, DriverLog};

    fn t0() -> chrono::NaiveDateTime {
        parse_timestamp("2017-01-01T00:00").unwrap()
    }

    #[test]
    fn incomplete_split_keeps_parts() {
        let p = RegulationParameters::default();
        let log = DriverLog::from_durations(
            "d",
            t0(),
            &[(Driving, 57), (Break, 3), (Driving, 2), (Break, 16)],
        );
        let recs: Vec<&ActivityRecord> = log.records.iter().collect();
        let got = label_unknown_block(&recs, &p);
        let tokens: Vec<_> = got.iter().map(|g| g.1.unwrap()).collect();
        assert_eq!(tokens, [Token::A, Token::BT0, Token::A, Token::BT2]);
        assert!(got.iter().all(|g| g.0 == BreakType::Split1));
    }

    #[test]
    fn long_break_is_rest() {
        let p = RegulationParameters::default();
        let log = DriverLog::from_durations("d", t0(), &[(Driving, 300), (Break, 700)]);
        let recs: Vec<&ActivityRecord> = log.records.iter().collect();
        let got = label_unknown_block(&recs, &p);
        assert_eq!(got[1].1, Some(Token::DrT1));
        assert!(got.iter().all(|g| g.0 == BreakType::Unknown));
    }
}
