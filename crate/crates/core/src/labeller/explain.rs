//! Indented text rendering of a labelled log as weeks, days and sequences.

use std::fmt::Write;

use super::{DayType, LabeledActivity, SequencePosition};

/// Renders the labelled log as a tree. An empty log renders as an empty string.
pub fn explain_parse(labels: &[LabeledActivity]) -> String {
    let mut out = String::new();
    let mut i = 0;
    let mut current_week = None;
    while i < labels.len() {
        let c = &labels[i].contexts;
        if current_week != Some(c.week) {
            current_week = Some(c.week);
            let _ = writeln!(out, "week {}", c.week);
        }
        if c.day_type == DayType::Unknown {
            let end = run_end(labels, i, |l| {
                l.contexts.day_type == DayType::Unknown && l.contexts.week == c.week
            });
            let _ = writeln!(out, "  unrecognised block ({} activities)", end - i);
            for l in &labels[i..end] {
                activity_line(&mut out, l, 4);
            }
            i = end;
            continue;
        }
        let end = run_end(labels, i, |l| {
            l.contexts.week == c.week
                && l.contexts.day == c.day
                && l.contexts.day_type != DayType::Unknown
        });
        let _ = writeln!(out, "  day {}: {}", c.day, c.day_type);
        let mut j = i;
        while j < end {
            let seq = labels[j].contexts.sequence;
            let seq_end = run_end(&labels[..end], j, |l| l.contexts.sequence == seq);
            if seq != SequencePosition::Unknown {
                let _ = writeln!(out, "    sequence: {seq}");
            }
            for l in &labels[j..seq_end] {
                activity_line(&mut out, l, 6);
            }
            j = seq_end;
        }
        i = end;
    }
    out
}

fn run_end(
    labels: &[LabeledActivity],
    start: usize,
    same: impl Fn(&LabeledActivity) -> bool,
) -> usize {
    labels[start..]
        .iter()
        .position(|l| !same(l))
        .map_or(labels.len(), |p| start + p)
}

fn activity_line(out: &mut String, l: &LabeledActivity, indent: usize) {
    let c = &l.contexts;
    let legal = if c.legal { "" } else { " [illegal]" };
    let _ = writeln!(
        out,
        "{:indent$}{} {} min {} {}{legal}",
        "",
        l.record.kind,
        l.record.duration_min,
        c.token_str(),
        c.break_type,
    );
}
