//! Shared test support: fixtures, a brute-force grammar oracle and naive
//! reference implementations.
#![allow(dead_code)]

use hos_core::activity_log::{
    merge_contiguous, parse_log, parse_timestamp, ActivityKind, DriverLog, ParseOptions,
};
use hos_core::profiler::FrequencyTable;
use hos_core::RegulationParameters;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Dirichlet;

pub const TABLE2: &str = include_str!("../fixtures/table2.csv");
pub const TABLE4: &str = include_str!("../fixtures/table4.csv");
pub const TABLE5: &str = include_str!("../fixtures/table5.csv");

pub fn fixture(csv: &str) -> DriverLog {
    parse_log(csv.as_bytes(), ParseOptions::default())
        .unwrap()
        .remove(0)
}

/// Week, Day, DayType, Sequence, BreakType, Token, Legal joined by commas.
pub fn context_row(l: &hos_core::LabeledActivity) -> String {
    let c = &l.contexts;
    format!(
        "{},{},{},{},{},{},{}",
        c.week,
        c.day,
        c.day_type,
        c.sequence,
        c.break_type,
        c.token_str(),
        c.legal_str()
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tok {
    A,
    B0,
    B1,
    B2,
    B3,
    Dr1,
    Dr2,
    Dr3,
    Dr4,
    Wr1,
    Wr2,
}

/// Interval table written out directly from the parameter meanings.
fn candidates(kind: ActivityKind, d: u32, p: &RegulationParameters) -> Vec<Tok> {
    if kind != ActivityKind::Break {
        return vec![Tok::A];
    }
    let within = |lo: u32, hi: Option<u32>| d >= lo && hi.map_or(true, |h| d < h);
    let table = [
        (Tok::B0, 1, Some(p.short_break_max)),
        (Tok::B2, p.split1_break_min, Some(p.full_break_min)),
        (Tok::B3, p.split2_break_min, Some(p.daily_rest_reduced_min)),
        (Tok::B1, p.full_break_min, Some(p.daily_rest_reduced_min)),
        (
            Tok::Dr3,
            p.split_rest_first_min,
            Some(p.daily_rest_reduced_min),
        ),
        (
            Tok::Dr2,
            p.daily_rest_reduced_min,
            Some(p.daily_rest_regular_min),
        ),
        (
            Tok::Dr1,
            p.daily_rest_regular_min,
            Some(p.weekly_rest_reduced_min),
        ),
        (
            Tok::Dr4,
            p.split_rest_second_min,
            Some(p.weekly_rest_reduced_min),
        ),
        (
            Tok::Wr2,
            p.weekly_rest_reduced_min,
            Some(p.weekly_rest_regular_min),
        ),
        (Tok::Wr1, p.weekly_rest_regular_min, None),
    ];
    table
        .iter()
        .filter(|(_, lo, hi)| within(*lo, *hi))
        .map(|(t, _, _)| *t)
        .collect()
}

fn is_rest(t: Tok) -> bool {
    matches!(
        t,
        Tok::Dr1 | Tok::Dr2 | Tok::Dr3 | Tok::Dr4 | Tok::Wr1 | Tok::Wr2
    )
}

struct Week {
    edd: u32,
    reduced: u32,
    days: u32,
    split_rest: bool,
    anchor: Option<i64>,
}

/// Checks one complete token assignment against every grammar rule.
fn assignment_is_legal(log: &DriverLog, toks: &[Tok], p: &RegulationParameters) -> bool {
    let mut week = Week {
        edd: 0,
        reduced: 0,
        days: 0,
        split_rest: false,
        anchor: None,
    };
    let mut start = 0;
    while start < toks.len() {
        let rest = (start..toks.len()).find(|&i| is_rest(toks[i]));
        let body_end = rest.unwrap_or(toks.len());
        // Split the day body into sequences.
        let mut seqs: Vec<u32> = Vec::new();
        let (mut driving, mut work, mut split) = (0u32, false, false);
        for i in start..body_end {
            let r = &log.records[i];
            match toks[i] {
                Tok::A => {
                    work = true;
                    if r.kind == ActivityKind::Driving {
                        driving += r.duration_min;
                    }
                }
                Tok::B0 => {}
                Tok::B2 => {
                    if split || !work {
                        return false;
                    }
                    split = true;
                }
                Tok::B3 | Tok::B1 => {
                    if (toks[i] == Tok::B3) != split || !work {
                        return false;
                    }
                    seqs.push(driving);
                    (driving, work, split) = (0, false, false);
                }
                _ => unreachable!(),
            }
        }
        let open_has_work = work;
        if open_has_work {
            seqs.push(driving);
        }
        if seqs.iter().any(|&s| s > p.seq_driving_max) {
            return false;
        }
        let total: u32 = seqs.iter().sum();
        let n = seqs.len() as u32;
        let edd_left = week.edd < p.edd_per_week_max;
        let Some(r) = rest else {
            // Unfinished final day: must still be completable.
            if n > 3 || total > p.edd_driving_max {
                return false;
            }
            let ndd_ok = n <= 2 && total <= p.ndd_driving_max;
            return ndd_ok || edd_left;
        };
        if !open_has_work {
            return false;
        }
        let extended = if n <= 2 && total <= p.ndd_driving_max {
            false
        } else if (2..=3).contains(&n) && total <= p.edd_driving_max && edd_left {
            true
        } else {
            return false;
        };
        let t = toks[r];
        let allowed = match t {
            Tok::Dr4 => week.split_rest,
            Tok::Dr1 | Tok::Dr3 => !week.split_rest,
            Tok::Dr2 => !week.split_rest && week.reduced < p.daily_rest_reduced_per_week_max,
            _ => true,
        };
        if !allowed {
            return false;
        }
        let rec = &log.records[r];
        let closes = t != Tok::Dr3;
        let weekly = matches!(t, Tok::Wr1 | Tok::Wr2);
        let after = week.days + u32::from(closes);
        if weekly && after > p.weekly_rest_deadline_days {
            return false;
        }
        if !weekly && closes && after >= p.weekly_rest_deadline_days {
            return false;
        }
        let need = match t {
            Tok::Dr2 => p.daily_rest_reduced_min,
            Tok::Dr4 => p.split_rest_second_min,
            _ => p.daily_rest_regular_min,
        };
        if closes {
            if let Some(a) = week.anchor {
                if rec.start_min() + i64::from(need) > a + i64::from(p.daily_rest_deadline) {
                    return false;
                }
            }
        }
        if weekly {
            week = Week {
                edd: 0,
                reduced: 0,
                days: 0,
                split_rest: false,
                anchor: Some(rec.end_min()),
            };
        } else {
            week.edd += u32::from(extended);
            week.reduced += u32::from(t == Tok::Dr2);
            week.days += u32::from(closes);
            week.split_rest = t == Tok::Dr3;
            if closes {
                week.anchor = Some(rec.end_min());
            }
        }
        start = r + 1;
    }
    true
}

/// True when some assignment of admissible tokens yields a fully legal parse.
pub fn oracle_fully_legal(log: &DriverLog, p: &RegulationParameters) -> bool {
    let options: Vec<Vec<Tok>> = log
        .records
        .iter()
        .map(|r| candidates(r.kind, r.duration_min, p))
        .collect();
    if options.iter().any(Vec::is_empty) {
        return false;
    }
    let mut pick = vec![0usize; options.len()];
    loop {
        let toks: Vec<Tok> = pick.iter().zip(&options).map(|(&i, o)| o[i]).collect();
        if assignment_is_legal(log, &toks, p) {
            return true;
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == pick.len() {
                return false;
            }
            pick[k] += 1;
            if pick[k] < options[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
    }
}

/// Random merged log of at most `max_len` records with durations clustered near the bounds.
pub fn random_small_log(rng: &mut ChaCha8Rng, max_len: usize) -> DriverLog {
    let len = rng.random_range(1..=max_len);
    let mut items = Vec::with_capacity(len);
    let mut work_next = rng.random_bool(0.8);
    for _ in 0..len {
        if work_next {
            let kind = match rng.random_range(0..10) {
                0..=6 => ActivityKind::Driving,
                7 | 8 => ActivityKind::Other,
                _ => ActivityKind::Idle,
            };
            let base = [20, 60, 130, 200, 250, 268, 290, 400][rng.random_range(0..8)];
            items.push((kind, base + rng.random_range(0..6)));
        } else {
            let (lo, hi) = [
                (1, 20),
                (12, 50),
                (40, 60),
                (170, 200),
                (530, 560),
                (640, 700),
                (1420, 1460),
                (2690, 2720),
            ][rng.random_range(0..8)];
            items.push((ActivityKind::Break, rng.random_range(lo..=hi)));
        }
        work_next = if work_next {
            rng.random_bool(0.3)
        } else {
            true
        };
    }
    let start = parse_timestamp("2017-01-02T06:00").unwrap();
    merge_contiguous(&DriverLog::from_durations("r", start, &items))
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// True when some finding of `report` has the expected type and its span
/// covers the injected records.
pub fn detects(
    report: &hos_core::infraction::DriverReport,
    e: &hos_core::synth::ExpectedFinding,
) -> bool {
    report.findings.iter().any(|f| {
        f.finding_type == e.infraction_type
            && f.span.first_start <= e.first_start
            && f.span.last_end >= e.last_end
            && e.min_epsilon.is_none_or(|eps| f.epsilon == Some(eps))
    })
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Naive reference indices, straight from the textbook definitions.
pub fn reference_indices(points: &[Vec<f64>], labels: &[i64]) -> (f64, f64, f64) {
    let ids: Vec<i64> = {
        let mut v: Vec<i64> = labels.iter().copied().filter(|&l| l >= 0).collect();
        v.sort();
        v.dedup();
        v
    };
    let idx: Vec<usize> = (0..points.len()).filter(|&i| labels[i] >= 0).collect();
    let of = |c: i64| -> Vec<usize> { idx.iter().copied().filter(|&i| labels[i] == c).collect() };
    let mut s_total = 0.0;
    for &i in &idx {
        let own = of(labels[i]);
        if own.len() == 1 {
            continue;
        }
        let a = own
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| euclid(&points[i], &points[j]))
            .sum::<f64>()
            / (own.len() - 1) as f64;
        let mut b = f64::INFINITY;
        for &c in &ids {
            if c == labels[i] {
                continue;
            }
            let o = of(c);
            b = b.min(
                o.iter()
                    .map(|&j| euclid(&points[i], &points[j]))
                    .sum::<f64>()
                    / o.len() as f64,
            );
        }
        s_total += (b - a) / a.max(b);
    }
    let sil = s_total / idx.len() as f64;
    let dim = points[0].len();
    let mean_of = |m: &[usize]| -> Vec<f64> {
        (0..dim)
            .map(|k| m.iter().map(|&i| points[i][k]).sum::<f64>() / m.len() as f64)
            .collect()
    };
    let grand = mean_of(&idx);
    let (mut bss, mut wss) = (0.0, 0.0);
    let mut cents = Vec::new();
    let mut spreads = Vec::new();
    for &c in &ids {
        let m = of(c);
        let cen = mean_of(&m);
        bss += m.len() as f64 * euclid(&cen, &grand).powi(2);
        wss += m
            .iter()
            .map(|&i| euclid(&points[i], &cen).powi(2))
            .sum::<f64>();
        spreads.push(m.iter().map(|&i| euclid(&points[i], &cen)).sum::<f64>() / m.len() as f64);
        cents.push(cen);
    }
    let (n, k) = (idx.len() as f64, ids.len() as f64);
    let ch = bss / (k - 1.0) / (wss / (n - k));
    let db = (0..cents.len())
        .map(|i| {
            (0..cents.len())
                .filter(|&j| j != i)
                .map(|j| (spreads[i] + spreads[j]) / euclid(&cents[i], &cents[j]))
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / k;
    (sil, ch, db)
}

pub const MEANS: [[f64; 4]; 3] = [
    [0.6, 0.2, 0.1, 0.1],
    [0.1, 0.6, 0.2, 0.1],
    [0.1, 0.1, 0.2, 0.6],
];
pub const CONCENTRATION: f64 = 60.0;

/// Rows drawn from three Dirichlet components with the given means.
pub fn dirichlet_table(n: usize, seed: u64) -> FrequencyTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists: Vec<Dirichlet<f64, 4>> = MEANS
        .iter()
        .map(|m| Dirichlet::new(m.map(|x| x * CONCENTRATION)).unwrap())
        .collect();
    let values: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = dists[i % 3].sample(&mut rng).to_vec();
            // Renormalise so the row sums to one to within float rounding.
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
            row
        })
        .collect();
    FrequencyTable {
        drivers: (0..n).map(|i| format!("d{i:03}")).collect(),
        day_categories: (0..4).map(|c| format!("legal:{c}")).collect(),
        values,
    }
}

pub fn linf_after_matching(found: &[Vec<f64>], truth: &[[f64; 4]]) -> f64 {
    // Three components: try all 6 permutations.
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    perms
        .iter()
        .map(|p| {
            (0..3)
                .flat_map(|i| (0..4).map(move |c| (i, c)))
                .map(|(i, c)| (found[p[i]][c] - truth[i][c]).abs())
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}
