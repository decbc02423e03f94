//! Raw tachograph activity logs: parsing, validation and normalisation.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 5] = ["Driver", "Start", "End", "Duration", "Activity"];

const ISO_FORMAT: &str = "%Y-%m-%dT%H:%M";
const TABLE_FORMAT: &str = "%d/%m/%Y %H:%M";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActivityKind {
    Driving,
    Other,
    Break,
    Idle,
}

impl ActivityKind {
    pub const ALL: [ActivityKind; 4] = [
        ActivityKind::Driving,
        ActivityKind::Other,
        ActivityKind::Break,
        ActivityKind::Idle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityKind::Driving => "Driving",
            ActivityKind::Other => "Other",
            ActivityKind::Break => "Break",
            ActivityKind::Idle => "Idle",
        }
    }

    /// Work-like activities carry the `A` token.
    pub fn is_work(self) -> bool {
        !matches!(self, ActivityKind::Break)
    }
}

impl fmt::Display for ActivityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ActivityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown activity kind '{}'", s.trim())))
    }
}

/// Parses either `DD/MM/YYYY HH:MM` or `YYYY-MM-DDTHH:MM`.
pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, ISO_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(s, TABLE_FORMAT))
        .map_err(|_| Error::invalid(format!("malformed timestamp '{s}'")))
}

pub fn format_timestamp(t: &NaiveDateTime) -> String {
    t.format(ISO_FORMAT).to_string()
}

/// Whole minutes since the Unix epoch.
pub fn epoch_minutes(t: &NaiveDateTime) -> i64 {
    t.and_utc().timestamp().div_euclid(60)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivityRecord {
    pub driver_id: String,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub duration_min: u32,
    pub kind: ActivityKind,
}

impl ActivityRecord {
    /// Builds a record from a start time and a duration, deriving the end.
    pub fn spanning(
        driver_id: &str,
        start: NaiveDateTime,
        duration_min: u32,
        kind: ActivityKind,
    ) -> Self {
        ActivityRecord {
            driver_id: driver_id.to_owned(),
            start,
            end: start + chrono::Duration::minutes(i64::from(duration_min)),
            duration_min,
            kind,
        }
    }

    pub fn start_min(&self) -> i64 {
        epoch_minutes(&self.start)
    }

    pub fn end_min(&self) -> i64 {
        epoch_minutes(&self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DriverLog {
    pub driver_id: String,
    pub records: Vec<ActivityRecord>,
}

impl DriverLog {
    /// Builds a contiguous log from (kind, minutes) pairs starting at `start`.
    pub fn from_durations(
        driver_id: &str,
        start: NaiveDateTime,
        items: &[(ActivityKind, u32)],
    ) -> Self {
        let mut t = start;
        let records = items
            .iter()
            .map(|&(kind, dur)| {
                let r = ActivityRecord::spanning(driver_id, t, dur, kind);
                t = r.end;
                r
            })
            .collect();
        DriverLog {
            driver_id: driver_id.to_owned(),
            records,
        }
    }

    pub fn total_minutes(&self) -> u64 {
        self.records.iter().map(|r| u64::from(r.duration_min)).sum()
    }

    /// Checks the ordering, contiguity and ownership invariants.
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if r.driver_id != self.driver_id {
                return Err(Error::validation(
                    Some(i + 1),
                    Some(&self.driver_id),
                    "record belongs to another driver",
                ));
            }
            check_duration(r, Some(i + 1))?;
        }
        for (i, w) in self.records.windows(2).enumerate() {
            if w[0].end != w[1].start {
                return Err(Error::validation(
                    Some(i + 2),
                    Some(&self.driver_id),
                    format!(
                        "records are not contiguous: {} then {}",
                        format_timestamp(&w[0].end),
                        format_timestamp(&w[1].start)
                    ),
                ));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_duration(r: &ActivityRecord, row: Option<usize>) -> Result<()> {
    if r.end <= r.start {
        return Err(Error::validation(
            row,
            Some(&r.driver_id),
            "end must be after start",
        ));
    }
    let span = r.end_min() - r.start_min();
    if span != i64::from(r.duration_min) {
        return Err(Error::validation(
            row,
            Some(&r.driver_id),
            format!(
                "duration mismatch: Duration={} but End-Start={span}",
                r.duration_min
            ),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Insert synthetic Idle records into gaps instead of rejecting them.
    pub fill_gaps: bool,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    #[serde(rename = "Driver")]
    driver: String,
    #[serde(rename = "Start")]
    start: String,
    #[serde(rename = "End")]
    end: String,
    #[serde(rename = "Duration")]
    duration: String,
    #[serde(rename = "Activity")]
    activity: String,
}

/// Parses a CSV log into one validated [`DriverLog`] per driver, sorted by driver id.
pub fn parse_log<R: Read>(source: R, options: ParseOptions) -> Result<Vec<DriverLog>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    for col in CSV_HEADER {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::validation(
                None,
                None,
                format!("missing column '{col}'"),
            ));
        }
    }
    let mut per_driver: BTreeMap<String, Vec<(usize, ActivityRecord)>> = BTreeMap::new();
    for (idx, row) in reader.deserialize::<RawRow>().enumerate() {
        let line = idx + 2;
        let row =
            row.map_err(|e| Error::validation(Some(line), None, format!("line {line}: {e}")))?;
        let record = parse_row(&row).map_err(|e| {
            Error::validation(
                Some(line),
                Some(&row.driver),
                format!("line {line} (driver {}): {e}", row.driver),
            )
        })?;
        per_driver
            .entry(record.driver_id.clone())
            .or_default()
            .push((line, record));
    }

    let mut logs = Vec::with_capacity(per_driver.len());
    for (driver_id, mut rows) in per_driver {
        rows.sort_by_key(|(_, r)| r.start);
        let mut records: Vec<ActivityRecord> = Vec::with_capacity(rows.len());
        for (line, r) in rows {
            if let Some(prev) = records.last() {
                if r.start < prev.end {
                    return Err(Error::validation(
                        Some(line),
                        Some(&driver_id),
                        format!("line {line} (driver {driver_id}): overlaps the previous record"),
                    ));
                }
                if r.start > prev.end {
                    if !options.fill_gaps {
                        return Err(Error::validation(
                            Some(line),
                            Some(&driver_id),
                            format!(
                                "line {line} (driver {driver_id}): gap between {} and {}",
                                format_timestamp(&prev.end),
                                format_timestamp(&r.start)
                            ),
                        ));
                    }
                    let gap = (epoch_minutes(&r.start) - prev.end_min()) as u32;
                    records.push(ActivityRecord::spanning(
                        &driver_id,
                        prev.end,
                        gap,
                        ActivityKind::Idle,
                    ));
                }
            }
            records.push(r);
        }
        logs.push(DriverLog { driver_id, records });
    }
    Ok(logs)
}

fn parse_row(row: &RawRow) -> Result<ActivityRecord> {
    let start = parse_timestamp(&row.start)?;
    let end = parse_timestamp(&row.end)?;
    let duration_min: u32 = row
        .duration
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("malformed duration '{}'", row.duration)))?;
    let kind: ActivityKind = row.activity.parse()?;
    let record = ActivityRecord {
        driver_id: row.driver.trim().to_owned(),
        start,
        end,
        duration_min,
        kind,
    };
    check_duration(&record, None)?;
    Ok(record)
}

pub fn record_fields(r: &ActivityRecord) -> [String; 5] {
    [
        r.driver_id.clone(),
        format_timestamp(&r.start),
        format_timestamp(&r.end),
        r.duration_min.to_string(),
        r.kind.to_string(),
    ]
}

/// Writes logs back out with the input column layout and ISO timestamps.
pub fn serialize_log<W: Write>(logs: &[DriverLog], sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(CSV_HEADER)?;
    for r in logs.iter().flat_map(|l| &l.records) {
        writer.write_record(record_fields(r))?;
    }
    writer.flush()?;
    Ok(())
}

/// Merges runs of consecutive records with the same kind into one record.
pub fn merge_contiguous(log: &DriverLog) -> DriverLog {
    let mut records: Vec<ActivityRecord> = Vec::with_capacity(log.records.len());
    for r in &log.records {
        match records.last_mut() {
            Some(prev) if prev.kind == r.kind && prev.end == r.start => {
                prev.end = r.end;
                prev.duration_min += r.duration_min;
            }
            _ => records.push(r.clone()),
        }
    }
    DriverLog {
        driver_id: log.driver_id.clone(),
        records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "Driver,Start,End,Duration,Activity\n";

    fn ts(s: &str) -> NaiveDateTime {
        parse_timestamp(s).unwrap()
    }

    #[test]
    fn parses_table_row() {
        let src = format!("{HEADER}driver1,11/01/2017 17:33,11/01/2017 17:37,4,Driving\n");
        let logs = parse_log(src.as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(logs.len(), 1);
        let r = &logs[0].records[0];
        assert_eq!(r.duration_min, 4);
        assert_eq!(r.kind, ActivityKind::Driving);
        assert_eq!(format_timestamp(&r.start), "2017-01-11T17:33");
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_log(HEADER.as_bytes(), ParseOptions::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn duration_mismatch_names_the_row() {
        let src = format!("{HEADER}driver1,11/01/2017 17:33,11/01/2017 17:37,5,Driving\n");
        let err = parse_log(src.as_bytes(), ParseOptions::default()).unwrap_err();
        match err {
            Error::Validation { row, message, .. } => {
                assert_eq!(row, Some(2));
                assert!(message.contains("duration mismatch"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_kind_and_bad_timestamp() {
        let src = format!("{HEADER}d,2017-01-11T17:33,2017-01-11T17:37,4,Sleeping\n");
        assert!(parse_log(src.as_bytes(), ParseOptions::default())
            .unwrap_err()
            .to_string()
            .contains("unknown activity"));
        let src = format!("{HEADER}d,2017-13-11T17:33,2017-01-11T17:37,4,Driving\n");
        assert!(parse_log(src.as_bytes(), ParseOptions::default())
            .unwrap_err()
            .to_string()
            .contains("malformed timestamp"));
    }

    #[test]
    fn overlap_and_gap_handling() {
        let overlap = format!("{HEADER}d,2017-01-11T10:00,2017-01-11T10:10,10,Driving\nd,2017-01-11T10:05,2017-01-11T10:15,10,Break\n");
        let err = parse_log(overlap.as_bytes(), ParseOptions::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("overlaps") && err.contains("line 3"), "{err}");

        let gap = format!("{HEADER}d,2017-01-11T10:00,2017-01-11T10:10,10,Driving\nd,2017-01-11T10:20,2017-01-11T10:30,10,Break\n");
        assert!(parse_log(gap.as_bytes(), ParseOptions::default())
            .unwrap_err()
            .to_string()
            .contains("gap"));
        let filled = parse_log(gap.as_bytes(), ParseOptions { fill_gaps: true }).unwrap();
        let kinds: Vec<_> = filled[0]
            .records
            .iter()
            .map(|r| (r.kind, r.duration_min))
            .collect();
        assert_eq!(
            kinds,
            vec![
                (ActivityKind::Driving, 10),
                (ActivityKind::Idle, 10),
                (ActivityKind::Break, 10)
            ]
        );
        filled[0].validate().unwrap();
    }

    #[test]
    fn rows_are_sorted_per_driver() {
        let src = format!(
            "{HEADER}b,2017-01-11T10:10,2017-01-11T10:20,10,Break\na,2017-01-11T10:00,2017-01-11T10:05,5,Other\nb,2017-01-11T10:00,2017-01-11T10:10,10,Driving\n"
        );
        let logs = parse_log(src.as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(logs[0].driver_id, "a");
        assert_eq!(logs[1].records[0].kind, ActivityKind::Driving);
    }

    #[test]
    fn merge_examples() {
        use ActivityKind::*;
        let t = ts("2017-01-11T10:00");
        let log = DriverLog::from_durations("d", t, &[(Driving, 10), (Driving, 5), (Break, 20)]);
        let merged = merge_contiguous(&log);
        let got: Vec<_> = merged
            .records
            .iter()
            .map(|r| (r.kind, r.duration_min))
            .collect();
        assert_eq!(got, vec![(Driving, 15), (Break, 20)]);
        merged.validate().unwrap();

        let log = DriverLog::from_durations("d", t, &[(Driving, 10), (Break, 5), (Driving, 10)]);
        assert_eq!(merge_contiguous(&log), log);
    }

    fn arb_log() -> impl Strategy<Value = DriverLog> {
        let kind = prop_oneof![
            Just(ActivityKind::Driving),
            Just(ActivityKind::Other),
            Just(ActivityKind::Break),
            Just(ActivityKind::Idle)
        ];
        prop::collection::vec((kind, 1u32..2000), 0..40).prop_map(|items| {
            DriverLog::from_durations("drv", parse_timestamp("2017-01-09T06:00").unwrap(), &items)
        })
    }

    proptest! {
        #[test]
        fn merge_conserves_duration(log in arb_log()) {
            let merged = merge_contiguous(&log);
            prop_assert_eq!(merged.total_minutes(), log.total_minutes());
            prop_assert!(merged.validate().is_ok());
            for w in merged.records.windows(2) {
                prop_assert_ne!(w[0].kind, w[1].kind);
            }
        }

        #[test]
        fn serialize_then_parse_is_identity(log in arb_log()) {
            let mut buf = Vec::new();
            serialize_log(std::slice::from_ref(&log), &mut buf).unwrap();
            let parsed = parse_log(buf.as_slice(), ParseOptions::default()).unwrap();
            if log.records.is_empty() {
                prop_assert!(parsed.is_empty());
            } else {
                prop_assert_eq!(&parsed[0], &log);
            }
        }
    }
}
