//! Deterministic backtracking recognizer for the hours-of-service grammar.
//!
//! The log is parsed left to right over a layered state graph: every record
//! boundary holds the set of grammar states reachable there (weekly counters,
//! position inside the daily period, accumulated driving). A backward pass
//! picks, for each state, the continuation with the best score; the forward
//! walk along those choices yields one parse of the whole log.
//!
//! Score order: legally covered records, then records with resolved
//! contexts, then fewer daily periods, then fewer reduced or split rests.
//! Unparseable records are skipped one at a time, only at daily-period
//! boundaries.

use std::collections::HashMap;

use crate::activity_log::{ActivityKind, ActivityRecord};
use crate::regulation::{RegulationParameters, Token};

use super::fallback::label_unknown_block;
use super::{BreakType, ContextSet, DayType, LabeledActivity, SequencePosition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
struct WeekState {
    edd_used: u8,
    reduced_used: u8,
    /// Completed daily periods in the current weekly period.
    days: u8,
    /// The previous daily period ended with the first part of a split rest.
    split_rest_pending: bool,
    /// End (epoch minutes) of the last full daily or weekly rest.
    anchor: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
struct DayState {
    completed: u8,
    seq_driving: u32,
    day_driving: u32,
    split_pending: bool,
    seq_has_work: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct State {
    week: WeekState,
    day: Option<DayState>,
}

/// Grammar role chosen for one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Step {
    Skip,
    Work,
    ShortBreak,
    SplitFirst,
    SplitSecond,
    FullBreak,
    Terminal {
        token: Token,
        extended: bool,
        late: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
struct Score {
    legal: i32,
    resolved: i32,
    neg_days: i32,
    neg_reduced: i32,
}

impl std::ops::Add for Score {
    type Output = Score;

    fn add(self, o: Score) -> Score {
        Score {
            legal: self.legal + o.legal,
            resolved: self.resolved + o.resolved,
            neg_days: self.neg_days + o.neg_days,
            neg_reduced: self.neg_reduced + o.neg_reduced,
        }
    }
}

const LEGAL: Score = Score {
    legal: 1,
    resolved: 1,
    neg_days: 0,
    neg_reduced: 0,
};
const NOTHING: Score = Score {
    legal: 0,
    resolved: 0,
    neg_days: 0,
    neg_reduced: 0,
};

struct Edge {
    step: Step,
    next: usize,
    gain: Score,
}

const TERMINAL_ORDER: [Token; 7] = [
    Token::DrT1,
    Token::DrT4,
    Token::WrT1,
    Token::DrT2,
    Token::WrT2,
    Token::DrT3,
    Token::DrT2,
];

fn transitions(
    state: &State,
    rec: &ActivityRecord,
    p: &RegulationParameters,
    out: &mut Vec<(Step, State, Score)>,
) {
    let week = state.week;
    let day = state.day.unwrap_or_default();
    let dur = rec.duration_min;

    if rec.kind.is_work() {
        if day.completed >= 3 && !day.seq_has_work {
            return;
        }
        let drive = if rec.kind == ActivityKind::Driving {
            dur
        } else {
            0
        };
        let seq_driving = day.seq_driving + drive;
        let day_driving = day.day_driving + drive;
        if seq_driving <= p.seq_driving_max && day_driving <= p.edd_driving_max {
            let next = DayState {
                seq_driving,
                day_driving,
                seq_has_work: true,
                ..day
            };
            out.push((
                Step::Work,
                State {
                    week,
                    day: Some(next),
                },
                LEGAL,
            ));
        }
    } else {
        if p.admits(Token::BT0, dur) {
            out.push((
                Step::ShortBreak,
                State {
                    week,
                    day: Some(day),
                },
                LEGAL,
            ));
        }
        if !day.split_pending && day.seq_has_work && p.admits(Token::BT2, dur) {
            let next = DayState {
                split_pending: true,
                ..day
            };
            out.push((
                Step::SplitFirst,
                State {
                    week,
                    day: Some(next),
                },
                LEGAL,
            ));
        }
        let closes_sequence = if day.split_pending {
            p.admits(Token::BT3, dur).then_some(Step::SplitSecond)
        } else if day.seq_has_work {
            p.admits(Token::BT1, dur).then_some(Step::FullBreak)
        } else {
            None
        };
        if let Some(step) = closes_sequence {
            if day.completed < 3 {
                let next = DayState {
                    completed: day.completed + 1,
                    seq_driving: 0,
                    split_pending: false,
                    seq_has_work: false,
                    ..day
                };
                out.push((
                    step,
                    State {
                        week,
                        day: Some(next),
                    },
                    LEGAL,
                ));
            }
        }
        if day.seq_has_work {
            terminal_transitions(week, day, rec, p, out);
        }
    }
    if state.day.is_none() {
        out.push((Step::Skip, *state, NOTHING));
    }
}

fn classify_day(
    sequences: u8,
    driving: u32,
    edd_available: bool,
    p: &RegulationParameters,
) -> Option<bool> {
    if sequences <= 2 && driving <= p.ndd_driving_max {
        Some(false)
    } else if (2..=3).contains(&sequences) && driving <= p.edd_driving_max && edd_available {
        Some(true)
    } else {
        None
    }
}

fn terminal_transitions(
    week: WeekState,
    day: DayState,
    rec: &ActivityRecord,
    p: &RegulationParameters,
    out: &mut Vec<(Step, State, Score)>,
) {
    let sequences = day.completed + 1;
    let Some(extended) = classify_day(
        sequences,
        day.day_driving,
        u32::from(week.edd_used) < p.edd_per_week_max,
        p,
    ) else {
        return;
    };
    let dur = rec.duration_min;
    let mut seen = [false; 11];
    for token in TERMINAL_ORDER {
        let idx = token as usize;
        if seen[idx] {
            continue;
        }
        seen[idx] = true;
        let allowed = match token {
            Token::DrT4 => week.split_rest_pending,
            Token::DrT1 | Token::DrT3 => !week.split_rest_pending,
            Token::DrT2 => {
                !week.split_rest_pending
                    && u32::from(week.reduced_used) < p.daily_rest_reduced_per_week_max
            }
            _ => true,
        };
        if !allowed || !p.admits(token, dur) {
            continue;
        }
        let weekly = token.is_weekly_rest();
        let closes_period = token != Token::DrT3;
        let days_after = u32::from(week.days) + u32::from(closes_period);
        let weekly_late = if weekly {
            days_after > p.weekly_rest_deadline_days
        } else {
            closes_period && days_after >= p.weekly_rest_deadline_days
        };
        let daily_late = closes_period
            && week.anchor.is_some_and(|a| {
                rec.start_min() + i64::from(p.rest_requirement(token))
                    > a + i64::from(p.daily_rest_deadline)
            });
        let late = weekly_late || daily_late;
        let next_week = if weekly {
            WeekState {
                anchor: Some(rec.end_min()),
                ..WeekState::default()
            }
        } else {
            WeekState {
                edd_used: week.edd_used + u8::from(extended),
                reduced_used: week.reduced_used + u8::from(token == Token::DrT2),
                days: week.days.saturating_add(u8::from(closes_period)),
                split_rest_pending: token == Token::DrT3,
                anchor: if closes_period {
                    Some(rec.end_min())
                } else {
                    week.anchor
                },
            }
        };
        let gain = Score {
            legal: i32::from(!late),
            resolved: 1,
            neg_days: -1,
            neg_reduced: -i32::from(matches!(token, Token::DrT2 | Token::DrT3 | Token::WrT2)),
        };
        out.push((
            Step::Terminal {
                token,
                extended,
                late,
            },
            State {
                week: next_week,
                day: None,
            },
            gain,
        ));
    }
}

/// An unfinished daily period at the end of the log is legal when it is a
/// viable prefix of some legal daily period.
fn open_day_viable(state: &State, p: &RegulationParameters) -> bool {
    let Some(day) = state.day else { return true };
    let sequences = day.completed + u8::from(day.seq_has_work);
    if sequences > 3 {
        return false;
    }
    let edd_available = u32::from(state.week.edd_used) < p.edd_per_week_max;
    classify_day(sequences.max(1), day.day_driving, edd_available, p).is_some()
        || (sequences < 2 && day.day_driving <= p.edd_driving_max && edd_available)
}

/// Chooses one grammar step per record.
pub(crate) fn recognize(records: &[ActivityRecord], p: &RegulationParameters) -> Vec<Step> {
    let n = records.len();
    let initial = State {
        week: WeekState::default(),
        day: None,
    };
    let mut layers: Vec<Vec<State>> = vec![vec![initial]];
    let mut edges: Vec<Vec<Vec<Edge>>> = Vec::with_capacity(n);
    let mut buf = Vec::new();

    for rec in records {
        let current = layers.last().expect("layer");
        let mut next_states: Vec<State> = Vec::new();
        let mut index: HashMap<State, usize> = HashMap::new();
        let mut layer_edges = Vec::with_capacity(current.len());
        for state in current {
            buf.clear();
            transitions(state, rec, p, &mut buf);
            let out = buf
                .iter()
                .map(|&(step, next, gain)| {
                    let id = *index.entry(next).or_insert_with(|| {
                        next_states.push(next);
                        next_states.len() - 1
                    });
                    Edge {
                        step,
                        next: id,
                        gain,
                    }
                })
                .collect();
            layer_edges.push(out);
        }
        edges.push(layer_edges);
        layers.push(next_states);
    }

    // Backward pass: best completion score per state.
    let mut value: Vec<Option<Score>> = layers[n]
        .iter()
        .map(|s| open_day_viable(s, p).then_some(Score::default()))
        .collect();
    let mut choice: Vec<Vec<Option<usize>>> = vec![Vec::new(); n];
    for i in (0..n).rev() {
        let mut layer_value = Vec::with_capacity(layers[i].len());
        let mut layer_choice = Vec::with_capacity(layers[i].len());
        for out in &edges[i] {
            let mut best: Option<(Score, usize)> = None;
            for (k, e) in out.iter().enumerate() {
                if let Some(v) = value[e.next] {
                    let total = v + e.gain;
                    if best.is_none_or(|(b, _)| total > b) {
                        best = Some((total, k));
                    }
                }
            }
            layer_value.push(best.map(|(s, _)| s));
            layer_choice.push(best.map(|(_, k)| k));
        }
        value = layer_value;
        choice[i] = layer_choice;
    }

    let mut steps = Vec::with_capacity(n);
    let mut state = 0usize;
    for i in 0..n {
        let k = choice[i][state].expect("boundary states can always skip");
        let e = &edges[i][state][k];
        steps.push(e.step);
        state = e.next;
    }
    steps
}

#[derive(Default)]
struct Counters {
    week: u32,
    day: u32,
}

/// Turns the chosen steps into labelled activities.
pub(crate) fn assemble(
    records: &[ActivityRecord],
    steps: &[Step],
    p: &RegulationParameters,
) -> Vec<LabeledActivity> {
    let mut labels: Vec<Option<ContextSet>> = vec![None; records.len()];
    let mut counters = Counters { week: 1, day: 1 };
    let mut unknown: Vec<usize> = Vec::new();
    let mut day: Vec<usize> = Vec::new();

    for (i, step) in steps.iter().enumerate() {
        match step {
            Step::Skip => unknown.push(i),
            Step::Terminal { token, .. } => {
                day.push(i);
                flush_unknown(&mut unknown, records, &counters, p, &mut labels);
                label_day(&day, steps, records, &counters, p, &mut labels);
                day.clear();
                counters.day += 1;
                if token.is_weekly_rest() {
                    counters.week += 1;
                }
            }
            _ => {
                if !unknown.is_empty() && day.is_empty() {
                    flush_unknown(&mut unknown, records, &counters, p, &mut labels);
                }
                day.push(i);
            }
        }
    }
    flush_unknown(&mut unknown, records, &counters, p, &mut labels);
    if !day.is_empty() {
        label_day(&day, steps, records, &counters, p, &mut labels);
    }

    records
        .iter()
        .zip(labels)
        .map(|(r, c)| LabeledActivity {
            record: r.clone(),
            contexts: c.expect("every record labelled"),
            infraction: None,
        })
        .collect()
}

fn flush_unknown(
    block: &mut Vec<usize>,
    records: &[ActivityRecord],
    counters: &Counters,
    p: &RegulationParameters,
    labels: &mut [Option<ContextSet>],
) {
    if block.is_empty() {
        return;
    }
    let recs: Vec<&ActivityRecord> = block.iter().map(|&i| &records[i]).collect();
    for (&i, (break_type, token)) in block.iter().zip(label_unknown_block(&recs, p)) {
        labels[i] = Some(ContextSet {
            week: counters.week,
            day: counters.day,
            day_type: DayType::Unknown,
            sequence: SequencePosition::Unknown,
            break_type,
            token,
            legal: false,
        });
    }
    block.clear();
}

fn step_token(step: Step) -> Token {
    match step {
        Step::Work | Step::Skip => Token::A,
        Step::ShortBreak => Token::BT0,
        Step::SplitFirst => Token::BT2,
        Step::SplitSecond => Token::BT3,
        Step::FullBreak => Token::BT1,
        Step::Terminal { token, .. } => token,
    }
}

fn label_day(
    day: &[usize],
    steps: &[Step],
    records: &[ActivityRecord],
    counters: &Counters,
    p: &RegulationParameters,
    labels: &mut [Option<ContextSet>],
) {
    // Split the day into sequences; a sequence ends at the record closing it.
    let mut sequences: Vec<&[usize]> = Vec::new();
    let mut start = 0;
    for (k, &i) in day.iter().enumerate() {
        if matches!(
            steps[i],
            Step::SplitSecond | Step::FullBreak | Step::Terminal { .. }
        ) {
            sequences.push(&day[start..=k]);
            start = k + 1;
        }
    }
    if start < day.len() {
        sequences.push(&day[start..]);
    }
    // Trailing breaks after the last closed sequence with no work do not form a sequence of their own.
    let counted: Vec<&[usize]> = sequences
        .iter()
        .copied()
        .filter(|s| s.iter().any(|&i| records[i].kind.is_work()))
        .collect();
    let count = counted.len().max(1);

    let day_type = match day.last().map(|&i| steps[i]) {
        Some(Step::Terminal { extended, .. }) => {
            if extended {
                DayType::Edd
            } else {
                DayType::Ndd
            }
        }
        _ => {
            let driving: u32 = day
                .iter()
                .filter(|&&i| records[i].kind == ActivityKind::Driving)
                .map(|&i| records[i].duration_min)
                .sum();
            if count <= 2 && driving <= p.ndd_driving_max {
                DayType::Ndd
            } else {
                DayType::Edd
            }
        }
    };

    let mut seq_index = 0usize;
    for seq in &sequences {
        let has_work = seq.iter().any(|&i| records[i].kind.is_work());
        let position = SequencePosition::of(seq_index.min(count - 1), count);
        let split_at = seq.iter().position(|&i| steps[i] == Step::SplitFirst);
        for (k, &i) in seq.iter().enumerate() {
            let step = steps[i];
            let break_type = match split_at {
                Some(s) if k <= s => BreakType::Split1,
                Some(_) => BreakType::Split2,
                None => BreakType::Uninterrupted,
            };
            let late = matches!(step, Step::Terminal { late: true, .. });
            labels[i] = Some(ContextSet {
                week: counters.week,
                day: counters.day,
                day_type,
                sequence: position,
                break_type,
                token: Some(step_token(step)),
                legal: !late,
            });
        }
        if has_work {
            seq_index += 1;
        }
    }
}
