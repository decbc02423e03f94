use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::activity_log::format_timestamp;
use crate::labeller::LabeledActivity;

use super::evaluate::UNEXPLAINED;
use super::relabel::{LabelChange, RegionFlip};
use super::Infraction;

/// Type given to findings of the relaxation search.
pub const BORDERLINE: &str = "Borderline duration";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FindingSource {
    Test,
    Relaxation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub first_start: String,
    pub last_end: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    #[serde(rename = "type")]
    pub finding_type: String,
    pub source: FindingSource,
    pub week: u32,
    pub day: u32,
    pub span: Span,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub changes: Option<Vec<LabelChange>>,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverReport {
    pub driver: String,
    pub findings: Vec<Finding>,
}

fn span_of(labels: &[LabeledActivity], range: &std::ops::Range<usize>) -> Span {
    Span {
        first_start: format_timestamp(&labels[range.start].record.start),
        last_end: format_timestamp(&labels[range.end - 1].record.end),
    }
}

fn describe_changes(labels: &[LabeledActivity], changes: &[LabelChange]) -> String {
    let tokens: Vec<String> = changes
        .iter()
        .filter(|c| c.field == "Token")
        .map(|c| {
            let r = &labels[c.index].record;
            format!(
                "{} {} min at {}: {} -> {}",
                r.kind,
                r.duration_min,
                format_timestamp(&r.start),
                c.before,
                c.after
            )
        })
        .collect();
    if tokens.is_empty() {
        "no token changes".to_owned()
    } else {
        tokens.join(", ")
    }
}

/// Combines test infractions and relaxation flips into one driver report.
/// An unexplained region is dropped when a relaxation explains it.
pub fn build_report(
    labels: &[LabeledActivity],
    infractions: &[Infraction],
    flips: &[RegionFlip],
) -> DriverReport {
    let driver = labels
        .first()
        .map(|l| l.record.driver_id.clone())
        .unwrap_or_default();
    let mut keyed: Vec<(usize, u8, Finding)> = Vec::new();
    for inf in infractions {
        let overlaps_flip = flips
            .iter()
            .any(|f| f.region.start < inf.span.end && inf.span.start < f.region.end);
        if inf.infraction_type == UNEXPLAINED && overlaps_flip {
            continue;
        }
        let first = &labels[inf.span.start].contexts;
        keyed.push((
            inf.span.start,
            0,
            Finding {
                finding_type: inf.infraction_type.clone(),
                source: FindingSource::Test,
                week: first.week,
                day: first.day,
                span: span_of(labels, &inf.span),
                test_name: inf.test_name.clone(),
                epsilon: None,
                changes: None,
                explanation: format!("{} ({})", inf.explanation, inf.detail),
            },
        ));
    }
    for flip in flips {
        let first = &labels[flip.region.start].contexts;
        keyed.push((
            flip.region.start,
            1,
            Finding {
                finding_type: BORDERLINE.to_owned(),
                source: FindingSource::Relaxation,
                week: first.week,
                day: first.day,
                span: span_of(labels, &flip.region),
                test_name: None,
                epsilon: Some(flip.epsilon),
                changes: Some(flip.changes.clone()),
                explanation: format!(
                    "Legal with bounds relaxed by {} min; {}",
                    flip.epsilon,
                    describe_changes(labels, &flip.changes)
                ),
            },
        ));
    }
    keyed.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    DriverReport {
        driver,
        findings: keyed.into_iter().map(|(_, _, f)| f).collect(),
    }
}

/// Plain-text rendering grouped by driver, day and finding type.
pub fn render_text(reports: &[DriverReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(out, "{}", r.driver);
        if r.findings.is_empty() {
            let _ = writeln!(out, "  no findings");
        }
        let mut day = None;
        for f in &r.findings {
            if day != Some((f.week, f.day)) {
                day = Some((f.week, f.day));
                let _ = writeln!(out, "  week {} day {}", f.week, f.day);
            }
            let _ = writeln!(
                out,
                "    {} [{} .. {}]: {}",
                f.finding_type, f.span.first_start, f.span.last_end, f.explanation
            );
        }
    }
    out
}
