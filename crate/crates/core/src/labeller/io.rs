//! CSV form of labelled logs.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::activity_log::{check_duration, parse_timestamp, record_fields, ActivityRecord};
use crate::error::{Error, Result};
use crate::regulation::Token;

use super::{ContextSet, LabeledActivity};

pub const LABELLED_HEADER: [&str; 12] = [
    "Driver",
    "Start",
    "End",
    "Duration",
    "Activity",
    "Week",
    "Day",
    "DayType",
    "Sequence",
    "BreakType",
    "Token",
    "Legal",
];

const INFRACTION_COLUMN: &str = "Infraction";

/// Writes labelled logs. The `Infraction` column is added when `with_infraction` is set.
pub fn write_labelled<W: Write>(
    logs: &[Vec<LabeledActivity>],
    with_infraction: bool,
    sink: W,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    let mut header: Vec<&str> = LABELLED_HEADER.to_vec();
    if with_infraction {
        header.push(INFRACTION_COLUMN);
    }
    writer.write_record(&header)?;
    for l in logs.iter().flatten() {
        let c = &l.contexts;
        let mut row: Vec<String> = record_fields(&l.record).into();
        row.extend([
            c.week.to_string(),
            c.day.to_string(),
            c.day_type.to_string(),
            c.sequence.to_string(),
            c.break_type.to_string(),
            c.token_str().to_owned(),
            c.legal_str().to_owned(),
        ]);
        if with_infraction {
            row.push(l.infraction.clone().unwrap_or_default());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a labelled CSV back, one log per driver, sorted by driver id.
pub fn parse_labelled<R: Read>(source: R) -> Result<Vec<Vec<LabeledActivity>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 12];
    for (slot, name) in idx.iter_mut().zip(LABELLED_HEADER) {
        *slot = column(name)
            .ok_or_else(|| Error::validation(None, None, format!("missing column '{name}'")))?;
    }
    let infraction_idx = column(INFRACTION_COLUMN);

    let mut per_driver: BTreeMap<String, Vec<LabeledActivity>> = BTreeMap::new();
    for (n, row) in reader.records().enumerate() {
        let line = n + 2;
        let row = row?;
        let field = |k: usize| row.get(idx[k]).unwrap_or("");
        let parsed = parse_row(&field, infraction_idx.and_then(|i| row.get(i))).map_err(|e| {
            Error::validation(Some(line), Some(field(0)), format!("line {line}: {e}"))
        })?;
        per_driver
            .entry(parsed.record.driver_id.clone())
            .or_default()
            .push(parsed);
    }
    let mut logs: Vec<Vec<LabeledActivity>> = per_driver.into_values().collect();
    for log in &mut logs {
        log.sort_by_key(|l| l.record.start);
    }
    Ok(logs)
}

fn parse_row<'a>(
    field: &dyn Fn(usize) -> &'a str,
    infraction: Option<&str>,
) -> Result<LabeledActivity> {
    let number = |k: usize, what: &str| -> Result<u32> {
        field(k)
            .parse()
            .map_err(|_| Error::invalid(format!("malformed {what} '{}'", field(k))))
    };
    let record = ActivityRecord {
        driver_id: field(0).to_owned(),
        start: parse_timestamp(field(1))?,
        end: parse_timestamp(field(2))?,
        duration_min: number(3, "duration")?,
        kind: field(4).parse()?,
    };
    check_duration(&record, None)?;
    let token = match field(10) {
        "unknown" | "unkown" => None,
        t => Some(t.parse::<Token>()?),
    };
    let legal = match field(11) {
        "yes" => true,
        "no" => false,
        other => return Err(Error::invalid(format!("malformed legal flag '{other}'"))),
    };
    let contexts = ContextSet {
        week: number(5, "week")?,
        day: number(6, "day")?,
        day_type: field(7).parse()?,
        sequence: field(8).parse()?,
        break_type: field(9).parse()?,
        token,
        legal,
    };
    let infraction = infraction.filter(|s| !s.is_empty()).map(str::to_owned);
    Ok(LabeledActivity {
        record,
        contexts,
        infraction,
    })
}
