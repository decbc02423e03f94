//! Synthetic driver logs built from legal day templates, with optional
//! injected infractions and a ground-truth sidecar.
//!
//! Templates are written for the default regulation parameters. Jittered days
//! are checked against the bounds (with a one-minute margin) and resampled
//! when they fall outside; after a few failures the unjittered template is used.

use std::ops::Range;

use chrono::{NaiveDate, NaiveDateTime};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activity_log::{format_timestamp, ActivityKind, DriverLog};
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::infraction::BORDERLINE;
use crate::labeller::DayType;
use crate::regulation::{RegulationParameters, Token};

use ActivityKind::{Break as B, Driving as D, Other as O};

const JITTER: f64 = 0.10;
const MAX_RESAMPLES: usize = 25;
const WEEKLY_REST: u32 = 2880;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RestKind {
    #[serde(rename = "DR_T1")]
    Regular,
    #[serde(rename = "DR_T2")]
    Reduced,
}

impl RestKind {
    fn token(self) -> Token {
        match self {
            RestKind::Regular => Token::DrT1,
            RestKind::Reduced => Token::DrT2,
        }
    }

    fn nominal(self) -> u32 {
        match self {
            RestKind::Regular => 720,
            RestKind::Reduced => 600,
        }
    }
}

/// Role of a break inside a template, used to keep jittered durations inside
/// the token's interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Work(ActivityKind),
    Short,
    SplitFirst,
    SplitSecond,
    Full,
}

#[derive(Debug, Clone)]
pub struct DayTemplate {
    pub name: &'static str,
    pub day_type: DayType,
    pub split_breaks: bool,
    pub rest: RestKind,
    sequences: Vec<Vec<(Slot, u32)>>,
}

fn plan(seqs: &[&[(Slot, u32)]]) -> Vec<Vec<(Slot, u32)>> {
    seqs.iter().map(|s| s.to_vec()).collect()
}

/// The eight built-in templates: {ndd, edd} x {uninterrupted, split breaks} x
/// {regular, reduced rest}. Every day ends with other work before its rest.
pub fn templates() -> Vec<DayTemplate> {
    use Slot::*;
    let ndd_plain = plan(&[
        &[
            (Work(D), 150),
            (Short, 10),
            (Work(D), 90),
            (Work(O), 20),
            (Full, 50),
        ],
        &[(Work(D), 160), (Short, 5), (Work(D), 40), (Work(O), 30)],
    ]);
    let split_first: &[(Slot, u32)] = &[
        (Work(D), 100),
        (Short, 5),
        (Work(D), 40),
        (SplitFirst, 20),
        (Work(D), 90),
        (Work(O), 15),
        (SplitSecond, 36),
    ];
    let ndd_split = plan(&[
        split_first,
        &[(Work(D), 150), (Short, 8), (Work(D), 50), (Work(O), 25)],
    ]);
    let edd_plain = plan(&[
        &[(Work(D), 120), (Short, 5), (Work(D), 120), (Full, 50)],
        &[(Work(D), 200), (Work(O), 15), (Full, 50)],
        &[(Work(D), 130), (Work(O), 20)],
    ]);
    let edd_split = plan(&[
        split_first,
        &[
            (Work(D), 180),
            (SplitFirst, 22),
            (Work(D), 40),
            (SplitSecond, 38),
        ],
        &[(Work(D), 120), (Work(O), 20)],
    ]);
    let mut out = Vec::new();
    for (day_type, split_breaks, seqs) in [
        (DayType::Ndd, false, &ndd_plain),
        (DayType::Ndd, true, &ndd_split),
        (DayType::Edd, false, &edd_plain),
        (DayType::Edd, true, &edd_split),
    ] {
        for rest in [RestKind::Regular, RestKind::Reduced] {
            let name = match (day_type, split_breaks, rest) {
                (DayType::Ndd, false, RestKind::Regular) => "ndd-uninterrupted-regular",
                (DayType::Ndd, false, RestKind::Reduced) => "ndd-uninterrupted-reduced",
                (DayType::Ndd, true, RestKind::Regular) => "ndd-split-regular",
                (DayType::Ndd, true, RestKind::Reduced) => "ndd-split-reduced",
                (_, false, RestKind::Regular) => "edd-uninterrupted-regular",
                (_, false, RestKind::Reduced) => "edd-uninterrupted-reduced",
                (_, true, RestKind::Regular) => "edd-split-regular",
                (_, true, RestKind::Reduced) => "edd-split-reduced",
            };
            out.push(DayTemplate {
                name,
                day_type,
                split_breaks,
                rest,
                sequences: seqs.clone(),
            });
        }
    }
    out
}

pub fn template_index(name: &str) -> Option<usize> {
    templates().iter().position(|t| t.name == name)
}

/// Bounds a jittered duration must respect, given the slot.
fn slot_bounds(slot: Slot, p: &RegulationParameters) -> (u32, u32) {
    match slot {
        Slot::Work(_) => (1, p.seq_driving_max - 1),
        Slot::Short => (1, p.short_break_max - 2),
        Slot::SplitFirst => (
            p.split1_break_min + 1,
            p.split2_break_min.min(p.full_break_min) - 2,
        ),
        Slot::SplitSecond => (p.split2_break_min + 1, p.full_break_min - 2),
        Slot::Full => (p.full_break_min + 1, p.split_rest_first_min - 2),
    }
}

fn day_fits(
    t: &DayTemplate,
    seqs: &[Vec<(Slot, u32)>],
    rest: u32,
    p: &RegulationParameters,
) -> bool {
    let mut day_driving = 0;
    let mut span = 0;
    for seq in seqs {
        let mut seq_driving = 0;
        for &(slot, d) in seq {
            let (lo, hi) = slot_bounds(slot, p);
            if d < lo || d > hi {
                return false;
            }
            if slot == Slot::Work(D) {
                seq_driving += d;
            }
            span += d;
        }
        if seq_driving + 1 > p.seq_driving_max {
            return false;
        }
        day_driving += seq_driving;
    }
    let driving_ok = match t.day_type {
        DayType::Edd => day_driving > p.ndd_driving_max + 1 && day_driving < p.edd_driving_max,
        _ => day_driving < p.ndd_driving_max,
    };
    let (rest_lo, rest_hi) = match t.rest {
        RestKind::Regular => (p.daily_rest_regular_min + 1, p.weekly_rest_reduced_min - 2),
        RestKind::Reduced => (p.daily_rest_reduced_min + 1, p.daily_rest_regular_min - 2),
    };
    let requirement = p.rest_requirement(t.rest.token());
    driving_ok && rest >= rest_lo && rest <= rest_hi && span + requirement < p.daily_rest_deadline
}

fn jitter(d: u32, rng: &mut ChaCha8Rng) -> u32 {
    let f: f64 = rng.random_range(1.0 - JITTER..=1.0 + JITTER);
    ((d as f64 * f).round() as u32).max(1)
}

/// One generated (or injected) day: its sequences, each non-final one
/// carrying its closing break as last item, followed by the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct DayPlan {
    pub template: String,
    pub sequences: Vec<Vec<(ActivityKind, u32)>>,
    pub rest: u32,
}

impl DayPlan {
    fn record_count(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum::<usize>() + 1
    }

    fn span(&self) -> u32 {
        self.sequences.iter().flatten().map(|&(_, d)| d).sum()
    }

    fn is_edd(&self) -> bool {
        self.template.starts_with("edd")
    }
}

fn instantiate(t: &DayTemplate, rng: &mut ChaCha8Rng, p: &RegulationParameters) -> DayPlan {
    let mut chosen = None;
    for _ in 0..MAX_RESAMPLES {
        let seqs: Vec<Vec<(Slot, u32)>> = t
            .sequences
            .iter()
            .map(|s| s.iter().map(|&(slot, d)| (slot, jitter(d, rng))).collect())
            .collect();
        let rest = jitter(t.rest.nominal(), rng);
        if day_fits(t, &seqs, rest, p) {
            chosen = Some((seqs, rest));
            break;
        }
    }
    let (seqs, rest) = chosen.unwrap_or_else(|| (t.sequences.clone(), t.rest.nominal()));
    let sequences = seqs
        .into_iter()
        .map(|s| {
            s.into_iter()
                .map(|(slot, d)| match slot {
                    Slot::Work(k) => (k, d),
                    _ => (B, d),
                })
                .collect()
        })
        .collect();
    DayPlan {
        template: t.name.to_owned(),
        sequences,
        rest,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriverPlan {
    pub driver_id: String,
    pub start: NaiveDateTime,
    pub weeks: Vec<Vec<DayPlan>>,
}

impl DriverPlan {
    fn items(&self) -> Vec<(ActivityKind, u32)> {
        let mut items = Vec::new();
        for (wi, week) in self.weeks.iter().enumerate() {
            for (di, day) in week.iter().enumerate() {
                items.extend(day.sequences.iter().flatten().copied());
                let weekly = di + 1 == week.len() && wi + 1 < self.weeks.len();
                items.push((
                    B,
                    if weekly {
                        day.rest.max(WEEKLY_REST)
                    } else {
                        day.rest
                    },
                ));
            }
        }
        items
    }

    pub fn log(&self) -> DriverLog {
        DriverLog::from_durations(&self.driver_id, self.start, &self.items())
    }

    /// Record index range of the given day (0-based week and day).
    fn day_records(&self, week: usize, day: usize) -> Range<usize> {
        let mut offset = 0;
        for (wi, w) in self.weeks.iter().enumerate() {
            for (di, d) in w.iter().enumerate() {
                if wi == week && di == day {
                    return offset..offset + d.record_count();
                }
                offset += d.record_count();
            }
        }
        offset..offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateMix {
    pub weights: [f64; 8],
}

impl Default for TemplateMix {
    fn default() -> Self {
        TemplateMix { weights: [1.0; 8] }
    }
}

impl TemplateMix {
    pub fn only(name: &str) -> Result<Self> {
        let i = template_index(name)
            .ok_or_else(|| Error::invalid(format!("unknown template '{name}'")))?;
        let mut weights = [0.0; 8];
        weights[i] = 1.0;
        Ok(TemplateMix { weights })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub drivers: usize,
    pub weeks: usize,
    /// Working days per week; at most the weekly rest deadline in days.
    pub days_per_week: usize,
    pub mix: TemplateMix,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            drivers: 290,
            weeks: 2,
            days_per_week: 5,
            mix: TemplateMix::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTruth {
    pub week: u32,
    pub day: u32,
    pub template: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverTruth {
    pub driver: String,
    pub days: Vec<DayTruth>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionKind {
    SequenceDriving,
    NddDriving,
    EddDriving,
    MissingSplitRest,
    RestDeadline,
    BorderlineBreak,
}

impl InjectionKind {
    pub const ALL: [InjectionKind; 6] = [
        InjectionKind::SequenceDriving,
        InjectionKind::NddDriving,
        InjectionKind::EddDriving,
        InjectionKind::MissingSplitRest,
        InjectionKind::RestDeadline,
        InjectionKind::BorderlineBreak,
    ];

    /// Infraction type the engine should report for this injection.
    pub fn infraction_type(self) -> &'static str {
        match self {
            InjectionKind::SequenceDriving => "Excessive Driving without breaks",
            InjectionKind::NddDriving => "Excessive Driving in day (NDD)",
            InjectionKind::EddDriving => "Excessive Driving in day (EDD)",
            InjectionKind::MissingSplitRest => "Missing other half of split daily rest",
            InjectionKind::RestDeadline => "Rest past the daily/weekly deadline",
            InjectionKind::BorderlineBreak => BORDERLINE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionSpec {
    pub kind: InjectionKind,
    pub driver: usize,
    /// 0-based week and day within the driver's plan.
    pub week: usize,
    pub day: usize,
    pub magnitude: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedFinding {
    pub driver: String,
    pub kind: InjectionKind,
    pub infraction_type: String,
    pub week: usize,
    pub day: usize,
    pub records: Range<usize>,
    pub first_start: String,
    pub last_end: String,
    /// Smallest relaxation that should explain a borderline injection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_epsilon: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub drivers: Vec<DriverTruth>,
    pub injections: Vec<ExpectedFinding>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub seed: u64,
    pub drivers: Vec<DriverPlan>,
    pub injections: Vec<ExpectedFinding>,
}

fn driver_name(i: usize) -> String {
    format!("driver{:03}", i + 1)
}

fn corpus_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2017, 1, 2)
        .and_then(|d| d.and_hms_opt(6, 0, 0))
        .expect("valid date")
}

fn generate_driver(
    index: usize,
    cfg: &GeneratorConfig,
    seed: u64,
    tpls: &[DayTemplate],
    dist: &WeightedIndex<f64>,
    p: &RegulationParameters,
) -> DriverPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    let mut weeks = Vec::with_capacity(cfg.weeks);
    for _ in 0..cfg.weeks {
        let mut edd = 0;
        let mut reduced = 0;
        let mut days = Vec::with_capacity(cfg.days_per_week);
        for _ in 0..cfg.days_per_week {
            let mut t = &tpls[dist.sample(&mut rng)];
            // Swap to the neighbouring template once a weekly allowance is used up.
            if t.day_type == DayType::Edd && edd >= p.edd_per_week_max {
                t = tpls
                    .iter()
                    .find(|c| {
                        c.day_type == DayType::Ndd
                            && c.split_breaks == t.split_breaks
                            && c.rest == t.rest
                    })
                    .expect("ndd twin");
            }
            if t.rest == RestKind::Reduced && reduced >= p.daily_rest_reduced_per_week_max {
                t = tpls
                    .iter()
                    .find(|c| {
                        c.day_type == t.day_type
                            && c.split_breaks == t.split_breaks
                            && c.rest == RestKind::Regular
                    })
                    .expect("regular twin");
            }
            edd += u32::from(t.day_type == DayType::Edd);
            reduced += u32::from(t.rest == RestKind::Reduced);
            days.push(instantiate(t, &mut rng, p));
        }
        weeks.push(days);
    }
    DriverPlan {
        driver_id: driver_name(index),
        start: corpus_start(),
        weeks,
    }
}

/// Generates a legal corpus. Each driver draws from its own ChaCha stream, so
/// the result does not depend on the execution mode.
pub fn generate_corpus(
    cfg: &GeneratorConfig,
    seed: u64,
    exec: Execution,
) -> Result<SyntheticCorpus> {
    let p = RegulationParameters::default();
    if cfg.days_per_week == 0 || cfg.days_per_week as u32 > p.weekly_rest_deadline_days {
        return Err(Error::invalid(format!(
            "days_per_week must be in 1..={}, got {}",
            p.weekly_rest_deadline_days, cfg.days_per_week
        )));
    }
    if cfg
        .mix
        .weights
        .iter()
        .any(|w| !(w.is_finite() && *w >= 0.0))
    {
        return Err(Error::invalid(
            "template weights must be finite and non-negative",
        ));
    }
    let dist = WeightedIndex::new(cfg.mix.weights)
        .map_err(|_| Error::invalid("template mix has no positive weight"))?;
    let tpls = templates();
    let drivers = map_range(cfg.drivers, exec, |i| {
        generate_driver(i, cfg, seed, &tpls, &dist, &p)
    });
    Ok(SyntheticCorpus {
        seed,
        drivers,
        injections: Vec::new(),
    })
}

impl SyntheticCorpus {
    pub fn logs(&self) -> Vec<DriverLog> {
        self.drivers.iter().map(DriverPlan::log).collect()
    }

    /// Template of each day, numbered the way the labeller counts weeks and days.
    pub fn truth(&self) -> Truth {
        let drivers = self
            .drivers
            .iter()
            .map(|d| {
                let mut day_no = 0;
                let mut days = Vec::new();
                for (wi, w) in d.weeks.iter().enumerate() {
                    for day in w {
                        day_no += 1;
                        days.push(DayTruth {
                            week: wi as u32 + 1,
                            day: day_no,
                            template: day.template.clone(),
                        });
                    }
                }
                DriverTruth {
                    driver: d.driver_id.clone(),
                    days,
                }
            })
            .collect();
        Truth {
            seed: self.seed,
            drivers,
            injections: self.injections.clone(),
        }
    }

    /// Applies one injection and records the finding it should produce.
    pub fn inject(&mut self, spec: &InjectionSpec) -> Result<ExpectedFinding> {
        let p = RegulationParameters::default();
        let unrealizable =
            |why: &str| Error::invalid(format!("{:?} cannot be injected here: {why}", spec.kind));
        if spec.magnitude == 0 {
            return Err(Error::invalid("injection magnitude must be at least 1"));
        }
        let plan = self
            .drivers
            .get_mut(spec.driver)
            .ok_or_else(|| unrealizable("no such driver"))?;
        let week = plan
            .weeks
            .get(spec.week)
            .ok_or_else(|| unrealizable("no such week"))?;
        if spec.day >= week.len() {
            return Err(unrealizable("no such day"));
        }
        if week[spec.day].template == "injected" {
            return Err(unrealizable("day already injected"));
        }
        let earlier_edd = week[..spec.day].iter().filter(|d| d.is_edd()).count() as u32;
        let other_edd = week
            .iter()
            .enumerate()
            .filter(|(i, d)| *i != spec.day && d.is_edd())
            .count() as u32;
        let m = spec.magnitude;
        let (wi, di) = (spec.week, spec.day);
        let mut min_epsilon = None;

        let records = match spec.kind {
            InjectionKind::SequenceDriving => {
                let day = &mut plan.weeks[wi][di];
                if day.is_edd() || m > 60 {
                    return Err(unrealizable("needs an ndd day and magnitude <= 60"));
                }
                // One driving record past the sequence limit, then a little
                // other work so the rest of the sequence stays legal.
                let closing = *day.sequences[0].last().expect("non-empty sequence");
                day.sequences[0] = vec![(D, p.seq_driving_max + m), (O, 15), closing];
                let start = plan.day_records(wi, di).start;
                start..start + 1
            }
            InjectionKind::NddDriving => {
                if earlier_edd < p.edd_per_week_max || m > 59 {
                    return Err(unrealizable(
                        "needs the weekly edd allowance used earlier and magnitude < 60",
                    ));
                }
                let day = &mut plan.weeks[wi][di];
                if day.is_edd() {
                    return Err(unrealizable("target is an edd day"));
                }
                day.sequences = vec![
                    vec![(D, 180), (B, 46)],
                    vec![(D, 120), (B, 5), (D, 80), (B, 48)],
                    vec![(D, 160 + m), (O, 20)],
                ];
                plan.day_records(wi, di)
            }
            InjectionKind::EddDriving => {
                if other_edd >= p.edd_per_week_max || m > 40 {
                    return Err(unrealizable("needs edd allowance left and magnitude <= 40"));
                }
                let day = &mut plan.weeks[wi][di];
                day.sequences = vec![
                    vec![(D, 200), (B, 46)],
                    vec![(D, 120), (B, 5), (D, 100), (B, 48)],
                    vec![(D, 180 + m), (O, 20)],
                ];
                plan.day_records(wi, di)
            }
            InjectionKind::MissingSplitRest => {
                // The target is the day whose rest is too short to be the
                // second part; the day before is rewritten to end in a first part.
                let len = plan.weeks[wi].len();
                if di == 0 || di + 1 >= len {
                    return Err(unrealizable(
                        "needs a day before and after in the same week",
                    ));
                }
                let week = &plan.weeks[wi];
                let edd_before = week[..di - 1].iter().filter(|d| d.is_edd()).count() as u32;
                if edd_before < p.edd_per_week_max
                    || week[di - 1].is_edd()
                    || week[di].is_edd()
                    || week[di + 1].is_edd()
                {
                    return Err(unrealizable(
                        "needs the edd allowance used before two ndd days",
                    ));
                }
                if week[di + 1].sequences.len() < 2 {
                    return Err(unrealizable("following day needs two sequences"));
                }
                let short = p
                    .split_rest_second_min
                    .checked_sub(m)
                    .filter(|&r| r > p.split_rest_first_min);
                let Some(short) = short else {
                    return Err(unrealizable(
                        "magnitude must leave the rest inside the first-part range",
                    ));
                };
                let before = &mut plan.weeks[wi][di - 1];
                before.sequences = vec![vec![(D, 120), (B, 5), (D, 60), (O, 10)]];
                before.rest = p.split_rest_first_min + 20;
                before.template = "injected".to_owned();
                let day = &mut plan.weeks[wi][di];
                day.sequences = vec![vec![(D, 150), (B, p.full_break_min), (D, 150)]];
                day.rest = short;
                plan.day_records(wi, di)
            }
            InjectionKind::RestDeadline => {
                if wi == 0 && di == 0 {
                    return Err(unrealizable("the first day has no deadline"));
                }
                let is_weekly = di + 1 == plan.weeks[wi].len() && wi + 1 < plan.weeks.len();
                let day = &mut plan.weeks[wi][di];
                let token = if is_weekly {
                    Token::WrT1
                } else if day.rest >= p.daily_rest_regular_min {
                    Token::DrT1
                } else {
                    Token::DrT2
                };
                let needed = (p.daily_rest_deadline + m)
                    .saturating_sub(day.span() + p.rest_requirement(token));
                let last = day
                    .sequences
                    .last_mut()
                    .and_then(|s| s.last_mut())
                    .filter(|(k, _)| *k == O);
                let Some(last) = last else {
                    return Err(unrealizable("day must end with other work"));
                };
                last.1 += needed;
                let r = plan.day_records(wi, di);
                r.end - 1..r.end
            }
            InjectionKind::BorderlineBreak => {
                let day = &mut plan.weeks[wi][di];
                if !day.template.contains("split") {
                    return Err(unrealizable("needs a split-break template"));
                }
                if m + p.short_break_max >= p.split2_break_min {
                    return Err(unrealizable("magnitude too large for a borderline break"));
                }
                // Second item of the first sequence is the short break ahead of the split pair.
                day.sequences[0][1].1 = p.short_break_max + m;
                min_epsilon = crate::infraction::DEFAULT_EPSILONS
                    .iter()
                    .copied()
                    .find(|&e| e > m);
                let start = plan.day_records(wi, di).start;
                start..start + 2
            }
        };
        plan.weeks[wi][di].template = "injected".to_owned();
        let log = plan.log();
        let found = ExpectedFinding {
            driver: plan.driver_id.clone(),
            kind: spec.kind,
            infraction_type: spec.kind.infraction_type().to_owned(),
            week: wi,
            day: di,
            first_start: format_timestamp(&log.records[records.start].start),
            last_end: format_timestamp(&log.records[records.end - 1].end),
            records,
            min_epsilon,
        };
        self.injections.push(found.clone());
        Ok(found)
    }

    /// Tries every driver from `first` onwards (and every day) until the
    /// injection is realizable. Drivers already injected are skipped.
    pub fn inject_anywhere(
        &mut self,
        kind: InjectionKind,
        first: usize,
        magnitude: u32,
    ) -> Result<ExpectedFinding> {
        let n = self.drivers.len();
        for offset in 0..n {
            let driver = (first + offset) % n;
            let name = &self.drivers[driver].driver_id;
            if self.injections.iter().any(|f| &f.driver == name) {
                continue;
            }
            let shape: Vec<usize> = self.drivers[driver].weeks.iter().map(Vec::len).collect();
            for (week, &days) in shape.iter().enumerate() {
                for day in 0..days {
                    let spec = InjectionSpec {
                        kind,
                        driver,
                        week,
                        day,
                        magnitude,
                    };
                    let backup = self.drivers[driver].clone();
                    match self.inject(&spec) {
                        Ok(f) => return Ok(f),
                        Err(_) => self.drivers[driver] = backup,
                    }
                }
            }
        }
        Err(Error::invalid(format!(
            "no driver admits a {kind:?} injection"
        )))
    }
}

/// Default magnitude used by the bulk injector for each kind.
pub fn default_magnitude(kind: InjectionKind) -> u32 {
    match kind {
        InjectionKind::SequenceDriving => 30,
        InjectionKind::NddDriving => 20,
        InjectionKind::EddDriving => 15,
        InjectionKind::MissingSplitRest => 300,
        InjectionKind::RestDeadline => 10,
        InjectionKind::BorderlineBreak => 1,
    }
}

/// Injects each of `kinds` once per block of `per_drivers` drivers, each on a
/// different driver.
pub fn inject_per_block(
    corpus: &mut SyntheticCorpus,
    kinds: &[InjectionKind],
    per_drivers: usize,
) -> Result<Vec<ExpectedFinding>> {
    let mut out = Vec::new();
    let blocks = corpus.drivers.len().div_ceil(per_drivers.max(1));
    for b in 0..blocks {
        for (i, &kind) in kinds.iter().enumerate() {
            let first = b * per_drivers + i;
            out.push(corpus.inject_anywhere(kind, first, default_magnitude(kind))?);
        }
    }
    Ok(out)
}
