use std::collections::BTreeSet;
use std::ops::Range;

use crate::activity_log::ActivityKind;
use crate::labeller::{DayType, LabeledActivity};
use crate::regulation::{RegulationParameters, Token};

use super::{param_value, Clause, ConstraintTest, Infraction, Measure, Op, Threshold, Window};

/// Type given to illegal regions that no test explains.
pub const UNEXPLAINED: &str = "Unexplained";

/// Maximal runs of records labelled illegal.
pub fn illegal_regions(labels: &[LabeledActivity]) -> Vec<Range<usize>> {
    let mut regions = Vec::new();
    let mut start = None;
    for (i, l) in labels.iter().enumerate() {
        match (l.contexts.legal, start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                regions.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        regions.push(s..labels.len());
    }
    regions
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Observed {
    Number(f64),
    Token(Option<Token>),
    Flag(bool),
}

impl std::fmt::Display for Observed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Observed::Number(n) => write!(f, "{n}"),
            Observed::Token(t) => f.write_str(t.map_or("none", Token::as_str)),
            Observed::Flag(b) => write!(f, "{b}"),
        }
    }
}

/// One candidate window: the span it reports and what its measures see.
struct Candidate {
    span: Range<usize>,
    /// Records the measures are computed over.
    body: Range<usize>,
    region: Range<usize>,
}

fn is_rest(l: &LabeledActivity) -> bool {
    l.contexts.token.is_some_and(Token::is_rest)
}

fn driving(labels: &[LabeledActivity], range: Range<usize>) -> u32 {
    labels[range]
        .iter()
        .filter(|l| l.record.kind == ActivityKind::Driving)
        .map(|l| l.record.duration_min)
        .sum()
}

/// Cuts a region into driving sequences using break durations alone.
/// Each sequence excludes the break that closes it.
fn scan_sequences(
    labels: &[LabeledActivity],
    region: Range<usize>,
    p: &RegulationParameters,
) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = region.start;
    let mut split_first = false;
    for i in region.clone() {
        let r = &labels[i].record;
        if r.kind.is_work() {
            continue;
        }
        let d = r.duration_min;
        if d >= p.full_break_min || (split_first && d >= p.split2_break_min) {
            if labels[start..i].iter().any(|l| l.record.kind.is_work()) {
                out.push(start..i);
            }
            start = i + 1;
            split_first = false;
        } else if d >= p.split1_break_min {
            split_first = true;
        }
    }
    if labels[start..region.end]
        .iter()
        .any(|l| l.record.kind.is_work())
    {
        out.push(start..region.end);
    }
    out
}

/// Daily periods touching the region: records sharing Week/Day, cut after each rest.
fn day_segments(labels: &[LabeledActivity], region: Range<usize>) -> Vec<Range<usize>> {
    let keys: BTreeSet<(u32, u32)> = labels[region.clone()]
        .iter()
        .map(|l| (l.contexts.week, l.contexts.day))
        .collect();
    let mut out = Vec::new();
    for (week, day) in keys {
        let same = |l: &LabeledActivity| l.contexts.week == week && l.contexts.day == day;
        let Some(first) = labels.iter().position(same) else {
            continue;
        };
        let last = labels.iter().rposition(same).expect("first exists");
        let mut start = first;
        for i in first..=last {
            if is_rest(&labels[i]) || i == last {
                let seg = start..i + 1;
                if seg.start < region.end && region.start < seg.end {
                    out.push(seg);
                }
                start = i + 1;
            }
        }
    }
    out
}

fn candidates(
    labels: &[LabeledActivity],
    region: &Range<usize>,
    window: Window,
    p: &RegulationParameters,
) -> Vec<Candidate> {
    let make = |span: Range<usize>| Candidate {
        body: span.clone(),
        span,
        region: region.clone(),
    };
    match window {
        Window::Sequence => scan_sequences(labels, region.clone(), p)
            .into_iter()
            .map(make)
            .collect(),
        Window::Day => day_segments(labels, region.clone())
            .into_iter()
            .map(make)
            .collect(),
        Window::DayBeforeAndCurrent => {
            let next = (region.start..labels.len()).find(|&i| is_rest(&labels[i]));
            let end = next.map_or(region.end, |n| (n + 1).max(region.end));
            vec![Candidate {
                span: region.start..end,
                body: region.start..end,
                region: region.clone(),
            }]
        }
        Window::Rest => region
            .clone()
            .filter(|&i| is_rest(&labels[i]))
            .map(|i| make(i..i + 1))
            .collect(),
    }
}

fn observe(labels: &[LabeledActivity], c: &Candidate, measure: Measure) -> Observed {
    match measure {
        Measure::SequenceDriving | Measure::DayDriving => {
            Observed::Number(f64::from(driving(labels, c.body.clone())))
        }
        Measure::EddCountWithDay => {
            let here = &labels[c.body.start].contexts;
            let others: BTreeSet<u32> = labels
                .iter()
                .filter(|l| l.contexts.week == here.week && l.contexts.day != here.day)
                .filter(|l| l.contexts.day_type == DayType::Edd)
                .map(|l| l.contexts.day)
                .collect();
            Observed::Number(others.len() as f64 + 1.0)
        }
        Measure::PreviousRestToken => {
            let prev = labels[..c.region.start].iter().rev().find(|l| is_rest(l));
            Observed::Token(prev.and_then(|l| l.contexts.token))
        }
        Measure::NextRestToken => {
            let next = labels[c.region.start..].iter().find(|l| is_rest(l));
            Observed::Token(next.and_then(|l| l.contexts.token))
        }
        Measure::RestToken => Observed::Token(labels[c.body.start].contexts.token),
        Measure::Legal => Observed::Flag(labels[c.body.start].contexts.legal),
        Measure::ContextsResolved => Observed::Flag(labels[c.body.start].contexts.fully_resolved()),
    }
}

fn holds(observed: Observed, clause: &Clause, p: &RegulationParameters) -> bool {
    match (observed, &clause.threshold) {
        (Observed::Number(v), Threshold::Param(_) | Threshold::Number(_)) => {
            let t = match &clause.threshold {
                Threshold::Param(name) => param_value(p, name).unwrap_or(f64::NAN),
                Threshold::Number(n) => *n,
                _ => unreachable!(),
            };
            match clause.op {
                Op::Gt => v > t,
                Op::Lt => v < t,
                Op::Ge => v >= t,
                Op::Le => v <= t,
                Op::Eq => v == t,
                Op::Ne => v != t,
                Op::In | Op::NotIn => false,
            }
        }
        (Observed::Token(tok), Threshold::Tokens(set)) => {
            let member = tok.is_some_and(|t| set.contains(&t));
            match clause.op {
                Op::In | Op::Eq => member,
                Op::NotIn | Op::Ne => !member,
                _ => false,
            }
        }
        (Observed::Flag(v), Threshold::Flag(t)) => match clause.op {
            Op::Eq => v == *t,
            Op::Ne => v != *t,
            _ => false,
        },
        _ => false,
    }
}

/// Runs the tests over every illegal region. Regions no test explains yield
/// one [`UNEXPLAINED`] infraction.
pub fn evaluate_tests(
    labels: &[LabeledActivity],
    tests: &[ConstraintTest],
    params: &RegulationParameters,
) -> Vec<Infraction> {
    let mut out: Vec<Infraction> = Vec::new();
    for region in illegal_regions(labels) {
        let mut explained = false;
        for test in tests {
            for cand in candidates(labels, &region, test.window, params) {
                let mut detail = Vec::with_capacity(test.clauses.len());
                let fired = test.clauses.iter().all(|clause| {
                    let seen = observe(labels, &cand, clause.measure);
                    detail.push(format!(
                        "{:?} {seen} {} {}",
                        clause.measure, clause.op, clause.threshold
                    ));
                    holds(seen, clause, params)
                });
                if !fired {
                    continue;
                }
                explained = true;
                let duplicate = out.iter().any(|i| {
                    i.test_name.as_deref() == Some(test.name.as_str()) && i.span == cand.span
                });
                if !duplicate {
                    out.push(Infraction {
                        infraction_type: test.infraction_type.clone(),
                        test_name: Some(test.name.clone()),
                        span: cand.span,
                        explanation: test.explanation.clone(),
                        detail: detail.join(" and "),
                    });
                }
            }
        }
        if !explained {
            out.push(Infraction {
                infraction_type: UNEXPLAINED.to_owned(),
                test_name: None,
                span: region.clone(),
                explanation: "Unexplained illegal activity".to_owned(),
                detail: format!("{} illegal activities matched no test", region.len()),
            });
        }
    }
    out
}

/// Writes infraction texts onto the spanned activities; several texts are joined with "; ".
pub fn annotate(labels: &mut [LabeledActivity], infractions: &[Infraction]) {
    let mut texts: Vec<Vec<&str>> = vec![Vec::new(); labels.len()];
    for inf in infractions {
        for slot in &mut texts[inf.span.clone()] {
            if !slot.contains(&inf.explanation.as_str()) {
                slot.push(&inf.explanation);
            }
        }
    }
    for (l, t) in labels.iter_mut().zip(texts) {
        l.infraction = (!t.is_empty()).then(|| t.join("; "));
    }
}
