use super::*;
use crate::activity_log::ActivityKind::{Break, Driving, Other};
use crate::activity_log::{parse_log, parse_timestamp, ActivityKind, ParseOptions};

fn t0() -> chrono::NaiveDateTime {
    parse_timestamp("2017-01-02T06:00").unwrap()
}

fn label(items: &[(ActivityKind, u32)]) -> Vec<LabeledActivity> {
    label_log(
        &DriverLog::from_durations("d", t0(), items),
        &RegulationParameters::default(),
    )
}

fn fixture(csv: &str) -> DriverLog {
    parse_log(csv.as_bytes(), ParseOptions::default())
        .unwrap()
        .remove(0)
}

fn columns(l: &LabeledActivity) -> String {
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

#[test]
fn single_sequence_day() {
    let got = label(&[(Driving, 60), (Break, 665)]);
    let rows: Vec<String> = got.iter().map(columns).collect();
    assert_eq!(
        rows,
        [
            "1,1,ndd,unique,uninterrupted,A,yes",
            "1,1,ndd,unique,uninterrupted,DR_T1,yes"
        ]
    );
}

#[test]
fn published_legal_day() {
    let log = fixture(include_str!("../../tests/fixtures/table2.csv"));
    let labels = label_log(&log, &RegulationParameters::default());
    let tail: Vec<String> = labels[labels.len() - 9..].iter().map(columns).collect();
    let tokens = ["A", "B_T2", "A", "A", "A", "B_T0", "A", "A", "DR_T1"];
    for (k, (row, token)) in tail.iter().zip(tokens).enumerate() {
        let split = if k < 2 { "split_1" } else { "split_2" };
        assert_eq!(row, &format!("1,4,ndd,second,{split},{token},yes"));
    }
    assert!(is_fully_legal(&labels));
}

#[test]
fn published_partial_day() {
    let log = fixture(include_str!("../../tests/fixtures/table4.csv"));
    let labels = label_log(&log, &RegulationParameters::default());
    let tail: Vec<String> = labels[labels.len() - 12..].iter().map(columns).collect();
    let expected = [
        "1,5,unknown,unknown,split_1,A,no",
        "1,5,unknown,unknown,split_1,B_T2,no",
        "1,5,unknown,unknown,split_2,A,no",
        "1,5,unknown,unknown,split_2,B_T3,no",
        "1,5,ndd,first,split_1,A,yes",
        "1,5,ndd,first,split_1,B_T2,yes",
        "1,5,ndd,first,split_2,A,yes",
        "1,5,ndd,first,split_2,B_T0,yes",
        "1,5,ndd,first,split_2,A,yes",
        "1,5,ndd,first,split_2,B_T3,yes",
        "1,5,ndd,second,uninterrupted,A,yes",
        "1,5,ndd,second,uninterrupted,DR_T2,yes",
    ];
    assert_eq!(tail, expected);
    assert!(labels[..labels.len() - 12].iter().all(|l| l.contexts.legal));
}

#[test]
fn borderline_break_block() {
    let log = fixture(include_str!("../../tests/fixtures/table5.csv"));
    let strict = label_log(&log, &RegulationParameters::default());
    let head: Vec<String> = strict[..4].iter().map(columns).collect();
    assert_eq!(
        head,
        [
            "1,1,unknown,unknown,split_1,A,no",
            "1,1,unknown,unknown,split_1,B_T0,no",
            "1,1,unknown,unknown,split_1,A,no",
            "1,1,unknown,unknown,split_1,B_T2,no",
        ]
    );
    let relaxed = label_log(&log, &RegulationParameters::default().relax(2));
    let head: Vec<String> = relaxed[..4].iter().map(columns).collect();
    assert_eq!(
        head,
        [
            "1,1,ndd,first,split_1,A,yes",
            "1,1,ndd,first,split_1,B_T0,yes",
            "1,1,ndd,first,split_1,A,yes",
            "1,1,ndd,first,split_1,B_T0,yes",
        ]
    );
}

#[test]
fn long_sequence_is_unknown() {
    let got = label(&[(Driving, 300), (Break, 700)]);
    assert!(got.iter().all(|l| !l.contexts.legal));
    assert_eq!(got[0].contexts.day_type, DayType::Unknown);
    assert_eq!(got[1].contexts.token, Some(Token::DrT1));
}

#[test]
fn weekly_rest_advances_week() {
    let day = [(Driving, 200), (Break, 45), (Other, 100)];
    let mut items = Vec::new();
    items.extend(day);
    items.push((Break, 700));
    items.extend(day);
    items.push((Break, 2800));
    items.extend(day);
    items.push((Break, 700));
    let got = label(&items);
    assert!(is_fully_legal(&got));
    let weeks: Vec<(u32, u32)> = got
        .iter()
        .map(|l| (l.contexts.week, l.contexts.day))
        .collect();
    assert_eq!(weeks[3], (1, 1));
    assert_eq!(weeks[7], (1, 2));
    assert_eq!(weeks[8], (2, 3));
    assert_eq!(got[7].contexts.token, Some(Token::WrT1));
}

#[test]
fn third_edd_in_week_is_illegal() {
    let edd = [
        (Driving, 250),
        (Break, 45),
        (Driving, 250),
        (Break, 45),
        (Driving, 70),
        (Break, 760),
    ];
    let mut items = Vec::new();
    for _ in 0..3 {
        items.extend(edd);
    }
    let got = label(&items);
    assert!(got[..12]
        .iter()
        .all(|l| l.contexts.legal && l.contexts.day_type == DayType::Edd));
    // The cheapest repair drops the first sequence of the third day.
    let illegal: Vec<bool> = got[12..].iter().map(|l| !l.contexts.legal).collect();
    assert_eq!(illegal, [true, true, false, false, false, false]);
    assert_eq!(got[14].contexts.day_type, DayType::Ndd);
}

#[test]
fn split_daily_rest() {
    let items = [
        (Driving, 250),
        (Break, 45),
        (Driving, 250),
        (Break, 200),
        (Driving, 200),
        (Break, 600),
    ];
    let got = label(&items);
    assert!(is_fully_legal(&got));
    assert_eq!(got[3].contexts.token, Some(Token::DrT3));
    assert_eq!(got[5].contexts.token, Some(Token::DrT4));
}

#[test]
fn rest_after_deadline_is_flagged() {
    let items = [
        (Driving, 200),
        (Break, 700),
        (Driving, 250),
        (Break, 45),
        (Other, 600),
        (Break, 700),
    ];
    let got = label(&items);
    let last = &got[5].contexts;
    assert!(!last.legal);
    assert!(last.fully_resolved());
    assert!(got[..5].iter().all(|l| l.contexts.legal));
}

#[test]
fn open_trailing_day_is_legal() {
    let got = label(&[(Driving, 100), (Break, 10), (Driving, 50)]);
    assert!(is_fully_legal(&got));
    assert_eq!(got[0].contexts.sequence, SequencePosition::Unique);
}

#[test]
fn explain_renders_tree() {
    let log = fixture(include_str!("../../tests/fixtures/table2.csv"));
    let text = explain_parse(&label_log(&log, &RegulationParameters::default()));
    assert!(text.contains("day 4: ndd\n"));
    assert!(text.contains("    sequence: second\n"));
    assert_eq!(explain_parse(&[]), "");

    let log = fixture(include_str!("../../tests/fixtures/table4.csv"));
    let text = explain_parse(&label_log(&log, &RegulationParameters::default()));
    let block = text.find("unrecognised block (4 activities)").unwrap();
    assert!(block < text.find("day 5: ndd").unwrap());
}

#[test]
fn labelled_csv_round_trip() {
    let log = fixture(include_str!("../../tests/fixtures/table4.csv"));
    let mut labels = label_log(&log, &RegulationParameters::default());
    labels[0].infraction = Some("something".into());
    let mut buf = Vec::new();
    write_labelled(&[labels.clone()], true, &mut buf).unwrap();
    let back = parse_labelled(buf.as_slice()).unwrap();
    assert_eq!(back, vec![labels]);
}

#[test]
fn unkown_spelling_accepted() {
    assert_eq!("unkown".parse::<DayType>().unwrap(), DayType::Unknown);
    assert!("sideways".parse::<BreakType>().is_err());
}
