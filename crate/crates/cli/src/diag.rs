//! Machine-readable diagnostics: one JSON object per line on stderr.

use serde::Serialize;

pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Serialize)]
pub struct Diagnostic {
    pub level: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub code: Option<i32>,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub driver: Option<String>,
}

fn emit(d: &Diagnostic) {
    eprintln!(
        "{}",
        serde_json::to_string(d).expect("diagnostics serialize")
    );
}

pub fn warn(message: impl Into<String>) {
    emit(&Diagnostic {
        level: "warning",
        code: None,
        message: message.into(),
        row: None,
        driver: None,
    });
}

pub fn info(message: impl Into<String>) {
    emit(&Diagnostic {
        level: "info",
        code: None,
        message: message.into(),
        row: None,
        driver: None,
    });
}

/// A failed run and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    pub row: Option<usize>,
    pub driver: Option<String>,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
            row: None,
            driver: None,
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INTERNAL,
            message: message.into(),
            row: None,
            driver: None,
        }
    }

    pub fn report(&self) {
        emit(&Diagnostic {
            level: "error",
            code: Some(self.code),
            message: self.message.clone(),
            row: self.row,
            driver: self.driver.clone(),
        });
    }
}

impl From<hos_core::Error> for Failure {
    fn from(e: hos_core::Error) -> Self {
        let code = if e.is_validation() {
            EXIT_INPUT
        } else {
            EXIT_INTERNAL
        };
        let (row, driver) = match &e {
            hos_core::Error::Validation { row, driver, .. } => (*row, driver.clone()),
            _ => (None, None),
        };
        Failure {
            code,
            message: e.to_string(),
            row,
            driver,
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::internal(e.to_string())
    }
}
