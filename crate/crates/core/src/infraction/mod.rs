//! Explanation of illegal regions in labelled logs.
//!
//! Two complementary mechanisms: declarative constraint tests evaluated over
//! the illegal regions (and the days around them), and re-labelling under
//! relaxed bounds to expose borderline durations.

mod evaluate;
mod relabel;
mod report;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regulation::{RegulationParameters, Token};

pub use evaluate::{annotate, evaluate_tests, illegal_regions, UNEXPLAINED};
pub use relabel::{relabel_relaxed, smallest_flips, LabelChange, RegionFlip, DEFAULT_EPSILONS};
pub use report::{
    build_report, render_text, DriverReport, Finding, FindingSource, Span, BORDERLINE,
};

/// Which activities a test looks at, relative to an illegal region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// Each driving sequence found in the region by a duration-only scan.
    Sequence,
    /// Each daily period (records sharing Week/Day, cut at rests) touching the region.
    Day,
    /// The region together with the rests just before and after it.
    DayBeforeAndCurrent,
    /// Each rest record inside the region.
    Rest,
}

/// Quantity computed over a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Driving minutes of the sequence.
    SequenceDriving,
    /// Driving minutes of the daily period.
    DayDriving,
    /// Extended days labelled elsewhere in the same week, plus this one.
    EddCountWithDay,
    /// Token of the last rest before the window.
    PreviousRestToken,
    /// Token of the first rest at or after the start of the window.
    NextRestToken,
    /// Token of the rest record.
    RestToken,
    /// Legal flag of the rest record.
    Legal,
    /// Whether DayType, Sequence, BreakType and Token are all known.
    ContextsResolved,
}

impl Measure {
    fn windows(self) -> &'static [Window] {
        match self {
            Measure::SequenceDriving => &[Window::Sequence],
            Measure::DayDriving | Measure::EddCountWithDay => &[Window::Day],
            Measure::PreviousRestToken | Measure::NextRestToken => &[Window::DayBeforeAndCurrent],
            Measure::RestToken | Measure::Legal | Measure::ContextsResolved => &[Window::Rest],
        }
    }

    fn kind(self) -> ValueKind {
        match self {
            Measure::SequenceDriving | Measure::DayDriving | Measure::EddCountWithDay => {
                ValueKind::Number
            }
            Measure::PreviousRestToken | Measure::NextRestToken | Measure::RestToken => {
                ValueKind::Token
            }
            Measure::Legal | Measure::ContextsResolved => ValueKind::Flag,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ValueKind {
    Number,
    Token,
    Flag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "in")]
    In,
    #[serde(rename = "not_in")]
    NotIn,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Gt => ">",
            Op::Lt => "<",
            Op::Ge => ">=",
            Op::Le => "<=",
            Op::Eq => "=",
            Op::Ne => "!=",
            Op::In => "in",
            Op::NotIn => "not in",
        })
    }
}

/// Right-hand side of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// A regulation parameter, looked up by field name.
    Param(String),
    Number(f64),
    Tokens(Vec<Token>),
    Flag(bool),
}

impl Threshold {
    fn kind(&self) -> ValueKind {
        match self {
            Threshold::Param(_) | Threshold::Number(_) => ValueKind::Number,
            Threshold::Tokens(_) => ValueKind::Token,
            Threshold::Flag(_) => ValueKind::Flag,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Param(p) => f.write_str(p),
            Threshold::Number(n) => write!(f, "{n}"),
            Threshold::Tokens(ts) => {
                let names: Vec<&str> = ts.iter().map(|t| t.as_str()).collect();
                write!(f, "{{{}}}", names.join(", "))
            }
            Threshold::Flag(b) => write!(f, "{b}"),
        }
    }
}

/// One comparison `measure op threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clause {
    pub measure: Measure,
    pub op: Op,
    pub threshold: Threshold,
}

/// A named rule over a window of activities. Clauses are a conjunction,
/// evaluated left to right with short-circuiting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintTest {
    pub name: String,
    pub window: Window,
    pub clauses: Vec<Clause>,
    pub infraction_type: String,
    /// Text written into the Infraction column.
    pub explanation: String,
}

impl ConstraintTest {
    /// Checks that every clause fits the window and compares like with like.
    pub fn validate(&self, params: &RegulationParameters) -> Result<()> {
        if self.clauses.is_empty() {
            return Err(Error::Config(format!(
                "test '{}' has no clauses",
                self.name
            )));
        }
        for c in &self.clauses {
            if !c.measure.windows().contains(&self.window) {
                return Err(Error::Config(format!(
                    "test '{}': measure {:?} is not available in window {:?}",
                    self.name, c.measure, self.window
                )));
            }
            if c.measure.kind() != c.threshold.kind() {
                return Err(Error::Config(format!(
                    "test '{}': threshold type does not match {:?}",
                    self.name, c.measure
                )));
            }
            let ordering = matches!(c.op, Op::Gt | Op::Lt | Op::Ge | Op::Le);
            let membership = matches!(c.op, Op::In | Op::NotIn);
            let op_ok = match c.measure.kind() {
                ValueKind::Number => !membership,
                ValueKind::Token => membership,
                ValueKind::Flag => !ordering && !membership,
            };
            if !op_ok {
                return Err(Error::Config(format!(
                    "test '{}': operator {} not valid for {:?}",
                    self.name, c.op, c.measure
                )));
            }
            if let Threshold::Param(name) = &c.threshold {
                param_value(params, name)?;
            }
        }
        Ok(())
    }
}

/// Looks up a regulation parameter by field name.
pub(crate) fn param_value(params: &RegulationParameters, name: &str) -> Result<f64> {
    let value = serde_json::to_value(params)?;
    value
        .get(name)
        .and_then(serde_json::Value::as_f64)
        .ok_or_else(|| Error::Config(format!("unknown regulation parameter '{name}'")))
}

fn clause(measure: Measure, op: Op, threshold: Threshold) -> Clause {
    Clause {
        measure,
        op,
        threshold,
    }
}

fn param(name: &str) -> Threshold {
    Threshold::Param(name.to_owned())
}

/// The five standard tests.
pub fn builtin_tests() -> Vec<ConstraintTest> {
    let test =
        |name: &str, window, clauses, infraction_type: &str, explanation: &str| ConstraintTest {
            name: name.to_owned(),
            window,
            clauses,
            infraction_type: infraction_type.to_owned(),
            explanation: explanation.to_owned(),
        };
    vec![
        test(
            "sequence_driving",
            Window::Sequence,
            vec![clause(
                Measure::SequenceDriving,
                Op::Gt,
                param("seq_driving_max"),
            )],
            "Excessive Driving without breaks",
            "Surpassed sequence driving time",
        ),
        test(
            "ndd_driving",
            Window::Day,
            vec![
                clause(Measure::DayDriving, Op::Gt, param("ndd_driving_max")),
                clause(Measure::EddCountWithDay, Op::Gt, param("edd_per_week_max")),
            ],
            "Excessive Driving in day (NDD)",
            "Surpassed NDD driving time",
        ),
        test(
            "edd_driving",
            Window::Day,
            vec![clause(
                Measure::DayDriving,
                Op::Gt,
                param("edd_driving_max"),
            )],
            "Excessive Driving in day (EDD)",
            "Surpassed EDD driving time",
        ),
        test(
            "split_rest_second_part",
            Window::DayBeforeAndCurrent,
            vec![
                clause(
                    Measure::PreviousRestToken,
                    Op::In,
                    Threshold::Tokens(vec![Token::DrT3]),
                ),
                clause(
                    Measure::NextRestToken,
                    Op::NotIn,
                    Threshold::Tokens(vec![Token::DrT4, Token::WrT1, Token::WrT2]),
                ),
            ],
            "Missing other half of split daily rest",
            "Missing second part of split daily rest",
        ),
        test(
            "rest_deadline",
            Window::Rest,
            vec![
                clause(
                    Measure::RestToken,
                    Op::In,
                    Threshold::Tokens(vec![
                        Token::DrT1,
                        Token::DrT2,
                        Token::DrT3,
                        Token::DrT4,
                        Token::WrT1,
                        Token::WrT2,
                    ]),
                ),
                clause(Measure::Legal, Op::Eq, Threshold::Flag(false)),
                clause(Measure::ContextsResolved, Op::Eq, Threshold::Flag(true)),
            ],
            "Rest past the daily/weekly deadline",
            "Rest taken past the deadline",
        ),
    ]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TestFile {
    #[serde(default)]
    test: Vec<ConstraintTest>,
}

/// Parses tests from TOML (`[[test]]` tables) and validates them.
pub fn tests_from_toml(s: &str, params: &RegulationParameters) -> Result<Vec<ConstraintTest>> {
    let file: TestFile = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
    for t in &file.test {
        t.validate(params)?;
    }
    Ok(file.test)
}

pub fn tests_from_file(path: &Path, params: &RegulationParameters) -> Result<Vec<ConstraintTest>> {
    tests_from_toml(&std::fs::read_to_string(path)?, params)
}

/// A detected violation. `span` indexes the labelled log, end exclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Infraction {
    pub infraction_type: String,
    pub test_name: Option<String>,
    pub span: std::ops::Range<usize>,
    /// Column text, e.g. "Surpassed NDD driving time".
    pub explanation: String,
    /// The comparison that fired, with observed values.
    pub detail: String,
}

/// Full infraction analysis of one raw log: strict labels annotated with
/// test infractions, plus the combined report including relaxation findings.
pub fn analyze_log(
    log: &crate::activity_log::DriverLog,
    params: &RegulationParameters,
    tests: &[ConstraintTest],
    epsilons: &[u32],
) -> (Vec<crate::labeller::LabeledActivity>, DriverReport) {
    let mut labels = crate::labeller::label_log(log, params);
    let infractions = evaluate_tests(&labels, tests, params);
    let flips = smallest_flips(log, &labels, params, epsilons);
    annotate(&mut labels, &infractions);
    let report = build_report(&labels, &infractions, &flips);
    (labels, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        let p = RegulationParameters::default();
        let tests = builtin_tests();
        assert_eq!(tests.len(), 5);
        for t in &tests {
            t.validate(&p).unwrap();
        }
    }

    #[test]
    fn toml_round_trip() {
        let p = RegulationParameters::default();
        #[derive(Serialize)]
        struct Out {
            test: Vec<ConstraintTest>,
        }
        let text = toml::to_string(&Out {
            test: builtin_tests(),
        })
        .unwrap();
        assert_eq!(tests_from_toml(&text, &p).unwrap(), builtin_tests());
    }

    #[test]
    fn rejects_mismatched_clause() {
        let p = RegulationParameters::default();
        let text = r#"
            [[test]]
            name = "bad"
            window = "rest"
            infraction_type = "x"
            explanation = "x"
            clauses = [{ measure = "day_driving", op = ">", threshold = { number = 5.0 } }]
        "#;
        assert!(tests_from_toml(text, &p).is_err());
        let text = text.replace("day_driving", "rest_token");
        assert!(tests_from_toml(&text, &p).is_err());
    }

    #[test]
    fn custom_test_parses() {
        let p = RegulationParameters::default();
        let text = r#"
            [[test]]
            name = "long_day"
            window = "day"
            infraction_type = "Long day"
            explanation = "Drove more than eight hours"
            clauses = [{ measure = "day_driving", op = ">=", threshold = { number = 480.0 } }]
        "#;
        let tests = tests_from_toml(text, &p).unwrap();
        assert_eq!(tests[0].clauses[0].op, Op::Ge);
        assert!(param_value(&p, "nope").is_err());
        assert_eq!(param_value(&p, "seq_driving_max").unwrap(), 270.0);
    }
}
