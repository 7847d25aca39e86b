//! Self-check suites: golden channel plans, parameter-count oracle and
//! finite-difference gradient checks.

use std::fmt;

mod gradcheck;
mod params;
mod plan;

pub use gradcheck::{
    end_to_end_gradcheck, gradcheck_suite, precision_agreement, primitive_gradchecks, GradCheck,
    E2E_TOLERANCE, PRIMITIVE_TOLERANCE,
};
pub use params::{enumerate_parameters, params_suite, REPORTED_KB};
pub use plan::{golden_cells, plan_cells, plan_suite, plan_suite_with};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Outcome of one suite; `Display` prints one line per check.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {} {}: {}",
                self.suite,
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        let failed = self.failures().count();
        write!(
            f,
            "[{}] {} checks, {} failed",
            self.suite,
            self.checks.len(),
            failed
        )
    }
}
