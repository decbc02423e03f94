//! Day documents: each daily period becomes a sequence of categorical words.
//!
//! A word joins the codes of (Activity, DayType, BreakType, Token) with `|`;
//! words of illegal days also carry the Infraction code. Code tables are fixed
//! enumerations, so a word means the same thing in every corpus.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::activity_log::ActivityKind;
use crate::error::{Error, Result};
use crate::labeller::{BreakType, DayType, LabeledActivity};
use crate::regulation::Token;

pub const SEPARATOR: char = '|';

/// Infraction column values, in code order. Custom test texts map to "other".
pub const INFRACTION_CODES: [&str; 8] = [
    "none",
    "Surpassed sequence driving time",
    "Surpassed NDD driving time",
    "Surpassed EDD driving time",
    "Missing second part of split daily rest",
    "Rest taken past the deadline",
    "Unexplained illegal activity",
    "other",
];

const COLUMNS: [&str; 5] = ["Activity", "DayType", "BreakType", "Token", "Infraction"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word {
    pub codes: Vec<usize>,
}

impl Word {
    pub fn render(&self) -> String {
        let parts: Vec<String> = self.codes.iter().map(usize::to_string).collect();
        parts.join(&SEPARATOR.to_string())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let codes = s
            .split(SEPARATOR)
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| Error::invalid(format!("malformed word '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        if !(4..=5).contains(&codes.len()) {
            return Err(Error::invalid(format!("word '{s}' must have 4 or 5 codes")));
        }
        Ok(Word { codes })
    }
}

/// Readable form of a word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedWord {
    pub activity: ActivityKind,
    pub day_type: DayType,
    pub break_type: BreakType,
    pub token: Option<Token>,
    pub infraction: Option<String>,
}

impl fmt::Display for DecodedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {}",
            self.activity,
            self.day_type,
            self.break_type,
            self.token.map_or("unknown", Token::as_str)
        )?;
        if let Some(i) = &self.infraction {
            write!(f, ", {i}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayDocument {
    pub driver_id: String,
    pub week: u32,
    pub day: u32,
    pub words: Vec<Word>,
    /// No activity of the day is illegal.
    pub legal: bool,
}

fn index_of<T: PartialEq>(all: &[T], v: &T) -> usize {
    all.iter()
        .position(|x| x == v)
        .expect("value belongs to its enumeration")
}

fn infraction_code(text: Option<&str>) -> usize {
    let Some(text) = text else { return 0 };
    let first = text.split("; ").next().unwrap_or(text);
    INFRACTION_CODES[1..INFRACTION_CODES.len() - 1]
        .iter()
        .position(|c| *c == first)
        .map_or(INFRACTION_CODES.len() - 1, |p| p + 1)
}

/// Encodes one labelled activity; `with_infraction` adds the fifth code.
pub fn encode_word(l: &LabeledActivity, with_infraction: bool) -> Word {
    let c = &l.contexts;
    let mut codes = vec![
        index_of(&ActivityKind::ALL, &l.record.kind),
        index_of(DayType::ALL, &c.day_type),
        index_of(BreakType::ALL, &c.break_type),
        c.token
            .map_or(Token::ALL.len(), |t| index_of(&Token::ALL, &t)),
    ];
    if with_infraction {
        codes.push(infraction_code(l.infraction.as_deref()));
    }
    Word { codes }
}

pub fn decode_word(word: &Word) -> Result<DecodedWord> {
    let get = |col: usize, limit: usize| -> Result<usize> {
        let code = *word
            .codes
            .get(col)
            .ok_or_else(|| Error::invalid(format!("word '{word}' has no {} code", COLUMNS[col])))?;
        if code >= limit {
            return Err(Error::UnknownCode {
                column: COLUMNS[col],
                code,
            });
        }
        Ok(code)
    };
    let token_code = get(3, Token::ALL.len() + 1)?;
    let infraction = if word.codes.len() > 4 {
        let code = get(4, INFRACTION_CODES.len())?;
        (code > 0).then(|| INFRACTION_CODES[code].to_owned())
    } else {
        None
    };
    Ok(DecodedWord {
        activity: ActivityKind::ALL[get(0, ActivityKind::ALL.len())?],
        day_type: DayType::ALL[get(1, DayType::ALL.len())?],
        break_type: BreakType::ALL[get(2, BreakType::ALL.len())?],
        token: Token::ALL.get(token_code).copied(),
        infraction,
    })
}

/// Number of distinct words possible, an upper bound on any vocabulary.
pub fn vocabulary_bound(with_infraction: bool) -> usize {
    let base = ActivityKind::ALL.len()
        * DayType::ALL.len()
        * BreakType::ALL.len()
        * (Token::ALL.len() + 1);
    if with_infraction {
        base * INFRACTION_CODES.len()
    } else {
        base
    }
}

/// Splits one driver's labelled log into legal and illegal day documents.
pub fn encode_corpus(labels: &[LabeledActivity]) -> (Vec<DayDocument>, Vec<DayDocument>) {
    let mut legal = Vec::new();
    let mut illegal = Vec::new();
    let mut start = 0;
    while start < labels.len() {
        let key = (labels[start].contexts.week, labels[start].contexts.day);
        let end = labels[start..]
            .iter()
            .position(|l| (l.contexts.week, l.contexts.day) != key)
            .map_or(labels.len(), |p| start + p);
        let day = &labels[start..end];
        let is_legal = day.iter().all(|l| l.contexts.legal);
        let doc = DayDocument {
            driver_id: day[0].record.driver_id.clone(),
            week: key.0,
            day: key.1,
            words: day.iter().map(|l| encode_word(l, !is_legal)).collect(),
            legal: is_legal,
        };
        if is_legal {
            legal.push(doc);
        } else {
            illegal.push(doc);
        }
        start = end;
    }
    (legal, illegal)
}

/// Encodes many drivers; documents come out ordered by (driver, week, day).
pub fn encode_corpora(logs: &[Vec<LabeledActivity>]) -> (Vec<DayDocument>, Vec<DayDocument>) {
    let mut legal = Vec::new();
    let mut illegal = Vec::new();
    for log in logs {
        let (l, i) = encode_corpus(log);
        legal.extend(l);
        illegal.extend(i);
    }
    let key = |d: &DayDocument| (d.driver_id.clone(), d.week, d.day);
    legal.sort_by_key(key);
    illegal.sort_by_key(key);
    (legal, illegal)
}

/// One line per document: `driver,week,day,legal_flag,` then the words.
pub fn write_corpus<W: Write>(docs: &[DayDocument], mut sink: W) -> Result<()> {
    for d in docs {
        let words: Vec<String> = d.words.iter().map(Word::render).collect();
        writeln!(
            sink,
            "{},{},{},{},{}",
            d.driver_id,
            d.week,
            d.day,
            if d.legal { "yes" } else { "no" },
            words.join(" ")
        )?;
    }
    Ok(())
}

pub fn read_corpus<R: BufRead>(source: R) -> Result<Vec<DayDocument>> {
    let mut docs = Vec::new();
    for (n, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || {
            Error::validation(
                Some(n + 1),
                None,
                format!("line {}: malformed corpus line", n + 1),
            )
        };
        let mut parts = line.splitn(5, ',');
        let mut next = || parts.next().ok_or_else(bad);
        let driver_id = next()?.to_owned();
        let week = next()?.parse().map_err(|_| bad())?;
        let day = next()?.parse().map_err(|_| bad())?;
        let legal = match next()? {
            "yes" => true,
            "no" => false,
            _ => return Err(bad()),
        };
        let words = next()?
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<Word>>>()?;
        docs.push(DayDocument {
            driver_id,
            week,
            day,
            words,
            legal,
        });
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity_log::{parse_timestamp, ActivityRecord};
    use crate::labeller::{ContextSet, SequencePosition};

    fn activity(
        kind: ActivityKind,
        day_type: DayType,
        break_type: BreakType,
        token: Option<Token>,
    ) -> LabeledActivity {
        LabeledActivity {
            record: ActivityRecord::spanning(
                "d",
                parse_timestamp("2017-01-01T00:00").unwrap(),
                5,
                kind,
            ),
            contexts: ContextSet {
                week: 1,
                day: 1,
                day_type,
                sequence: SequencePosition::Unique,
                break_type,
                token,
                legal: true,
            },
            infraction: None,
        }
    }

    #[test]
    fn round_trip() {
        let l = activity(
            ActivityKind::Driving,
            DayType::Ndd,
            BreakType::Uninterrupted,
            Some(Token::A),
        );
        let w = encode_word(&l, false);
        assert_eq!(w.render(), "0|0|0|0");
        let d = decode_word(&w.render().parse().unwrap()).unwrap();
        assert_eq!(
            (d.activity, d.day_type, d.break_type, d.token),
            (
                ActivityKind::Driving,
                DayType::Ndd,
                BreakType::Uninterrupted,
                Some(Token::A)
            )
        );
    }

    #[test]
    fn rest_word_decodes() {
        let l = activity(
            ActivityKind::Break,
            DayType::Ndd,
            BreakType::Uninterrupted,
            Some(Token::DrT3),
        );
        let d = decode_word(&encode_word(&l, false)).unwrap();
        assert_eq!(d.to_string(), "(Break, ndd, uninterrupted, DR_T3)");
    }

    #[test]
    fn out_of_range_code_names_column() {
        let err = decode_word(&Word {
            codes: vec![0, 9, 0, 0],
        })
        .unwrap_err();
        assert!(matches!(
            err,
            Error::UnknownCode {
                column: "DayType",
                code: 9
            }
        ));
        assert!(decode_word(&Word {
            codes: vec![0, 0, 0, 0, 99]
        })
        .is_err());
    }

    #[test]
    fn infraction_codes() {
        let mut l = activity(
            ActivityKind::Driving,
            DayType::Unknown,
            BreakType::Unknown,
            None,
        );
        l.infraction = Some("Surpassed NDD driving time; Rest taken past the deadline".into());
        let w = encode_word(&l, true);
        assert_eq!(w.codes, vec![0, 2, 3, 11, 2]);
        assert_eq!(
            decode_word(&w).unwrap().infraction.as_deref(),
            Some("Surpassed NDD driving time")
        );
        l.infraction = Some("custom".into());
        assert_eq!(encode_word(&l, true).codes[4], 7);
    }

    #[test]
    fn corpus_file_round_trip() {
        let l = activity(
            ActivityKind::Driving,
            DayType::Ndd,
            BreakType::Uninterrupted,
            Some(Token::A),
        );
        let (legal, illegal) = encode_corpus(&[l.clone(), l]);
        assert_eq!((legal.len(), illegal.len()), (1, 0));
        let mut buf = Vec::new();
        write_corpus(&legal, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "d,1,1,yes,0|0|0|0 0|0|0|0\n"
        );
        assert_eq!(read_corpus(buf.as_slice()).unwrap(), legal);
        assert_eq!(encode_corpus(&[]), (vec![], vec![]));
    }
}
