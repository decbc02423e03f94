use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::activity_log::DriverLog;
use crate::labeller::{label_log, ContextSet, LabeledActivity};
use crate::regulation::RegulationParameters;

use super::evaluate::illegal_regions;

/// Epsilons tried, in minutes, when searching for the smallest relaxation
/// that makes a region legal.
pub const DEFAULT_EPSILONS: [u32; 4] = [1, 2, 5, 10];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelChange {
    pub index: usize,
    pub field: String,
    pub before: String,
    pub after: String,
    /// The record was illegal originally and is legal under relaxation.
    pub legality_flip: bool,
}

fn fields(c: &ContextSet) -> [(&'static str, String); 5] {
    [
        ("DayType", c.day_type.to_string()),
        ("Sequence", c.sequence.to_string()),
        ("BreakType", c.break_type.to_string()),
        ("Token", c.token_str().to_owned()),
        ("Legal", c.legal_str().to_owned()),
    ]
}

/// Field-by-field differences, aligning records by start timestamp.
pub(crate) fn diff(original: &[LabeledActivity], relaxed: &[LabeledActivity]) -> Vec<LabelChange> {
    let by_start: HashMap<_, &LabeledActivity> =
        relaxed.iter().map(|l| (l.record.start, l)).collect();
    let mut out = Vec::new();
    for (index, o) in original.iter().enumerate() {
        let Some(r) = by_start.get(&o.record.start) else {
            continue;
        };
        let flip = !o.contexts.legal && r.contexts.legal;
        for ((field, before), (_, after)) in
            fields(&o.contexts).into_iter().zip(fields(&r.contexts))
        {
            if before != after {
                out.push(LabelChange {
                    index,
                    field: field.to_owned(),
                    before,
                    after,
                    legality_flip: flip,
                });
            }
        }
    }
    out
}

/// Labels `log` under bounds relaxed by `epsilon_min` and diffs against the strict labelling.
pub fn relabel_relaxed(
    log: &DriverLog,
    params: &RegulationParameters,
    epsilon_min: u32,
) -> (Vec<LabeledActivity>, Vec<LabelChange>) {
    let original = label_log(log, params);
    if epsilon_min == 0 {
        return (original, Vec::new());
    }
    let relaxed = label_log(log, &params.relax(epsilon_min));
    let changes = diff(&original, &relaxed);
    (relaxed, changes)
}

/// An illegal region that becomes legal under some relaxation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionFlip {
    pub region: Range<usize>,
    pub epsilon: u32,
    /// Changes on records of the region.
    pub changes: Vec<LabelChange>,
}

/// For each illegal region of `original`, the smallest epsilon of `epsilons`
/// under which all of its records are legal.
pub fn smallest_flips(
    log: &DriverLog,
    original: &[LabeledActivity],
    params: &RegulationParameters,
    epsilons: &[u32],
) -> Vec<RegionFlip> {
    let regions = illegal_regions(original);
    if regions.is_empty() {
        return Vec::new();
    }
    let mut sorted: Vec<u32> = epsilons.iter().copied().filter(|&e| e > 0).collect();
    sorted.sort_unstable();
    sorted.dedup();
    let mut pending: Vec<Range<usize>> = regions;
    let mut out = Vec::new();
    for eps in sorted {
        if pending.is_empty() {
            break;
        }
        let relaxed = label_log(log, &params.relax(eps));
        let changes = diff(original, &relaxed);
        let legal_at: HashMap<_, bool> = relaxed
            .iter()
            .map(|l| (l.record.start, l.contexts.legal))
            .collect();
        pending.retain(|region| {
            let flipped = original[region.clone()]
                .iter()
                .all(|l| legal_at.get(&l.record.start).copied().unwrap_or(false));
            if flipped {
                let inside = changes
                    .iter()
                    .filter(|c| region.contains(&c.index))
                    .cloned()
                    .collect();
                out.push(RegionFlip {
                    region: region.clone(),
                    epsilon: eps,
                    changes: inside,
                });
            }
            !flipped
        });
    }
    out.sort_by_key(|f| f.region.start);
    out
}
