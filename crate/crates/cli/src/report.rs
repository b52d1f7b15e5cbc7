use std::fmt;

use eqg_core::C64;
use serde::Serialize;
use serde_json::{json, Value};

/// Process exit codes.
pub const EXIT_PASS: u8 = 0;
pub const EXIT_TOLERANCE: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_CONFIG: u8 = 4;

pub fn pair(x: C64) -> Value {
    json!([x.re, x.im])
}

pub fn pairs(xs: &[C64]) -> Value {
    Value::Array(xs.iter().map(|&x| pair(x)).collect())
}

/// One asserted residual.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value < tolerance }
    }
}

/// A run that could not produce a report.
#[derive(Debug, Clone)]
pub struct Failure {
    pub code: &'static str,
    pub exit: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: "invalid_config", exit: EXIT_CONFIG, message: message.into() }
    }

    pub fn solver(message: impl Into<String>) -> Self {
        Self { code: "solver_failure", exit: EXIT_SOLVER, message: message.into() }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "code": self.code, "exit_code": self.exit, "message": self.message } })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl From<eqg_core::Error> for Failure {
    fn from(e: eqg_core::Error) -> Self {
        use eqg_core::Error::*;
        let (code, exit) = match &e {
            InvalidParams(_) | TooLarge(_) => ("invalid_config", EXIT_CONFIG),
            Pole(_) | Singular(_) => ("singular_parameter", EXIT_CONFIG),
            Solver(_) | Degenerate(_) | Leakage { .. } => ("solver_failure", EXIT_SOLVER),
        };
        Self { code, exit, message: e.to_string() }
    }
}

/// Finished command: a JSON body plus the residual checks that decide the exit code.
pub struct Report {
    pub command: &'static str,
    pub checks: Vec<Check>,
    pub data: Value,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> u8 {
        if self.passed() {
            EXIT_PASS
        } else {
            EXIT_TOLERANCE
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "command": self.command,
            "passed": self.passed(),
            "checks": self.checks,
            "data": self.data,
        })
    }
}
