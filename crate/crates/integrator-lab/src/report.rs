//! Outcome types for property checks: per-check reports with the worst
//! observed margin and a replayable witness, plus suite aggregation.

use std::fmt;

/// Result of running one inequality or identity check over some number of
/// trials.
///
/// Margin convention: for an inequality LHS >= RHS the margin is
/// (LHS - RHS) normalized as documented by the check; for an equality it is
/// minus the relative error. Either way larger is better and the check
/// passes exactly when `worst_margin >= -tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub check: String,
    pub passed: bool,
    pub trials: u64,
    pub worst_margin: f64,
    pub tolerance: f64,
    /// Serialized inputs achieving `worst_margin`, for replay.
    pub witness: Option<String>,
    /// Master seed of the trial stream, when the check is randomized.
    pub seed: Option<u64>,
}

impl VerifyReport {
    /// Builds the report, deriving `passed` from the margin so the two can
    /// never disagree.
    pub fn from_margin(
        check: impl Into<String>,
        trials: u64,
        worst_margin: f64,
        tolerance: f64,
        witness: Option<String>,
        seed: Option<u64>,
    ) -> VerifyReport {
        VerifyReport {
            check: check.into(),
            passed: worst_margin >= -tolerance,
            trials,
            worst_margin,
            tolerance,
            witness,
            seed,
        }
    }

    /// One CSV data row: check name, trials, worst margin, seed.
    /// The seed field is empty for deterministic checks.
    pub fn csv_row(&self) -> String {
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_default();
        format!("{},{},{},{}", self.check, self.trials, self.worst_margin, seed)
    }

    pub const CSV_HEADER: &'static str = "check,trials,worst_margin,seed";
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{verdict} {} (trials {}, worst margin {:.3e}, tolerance {:.1e})",
            self.check, self.trials, self.worst_margin, self.tolerance
        )?;
        if !self.passed {
            if let Some(w) = &self.witness {
                write!(f, " witness: {w}")?;
            }
        }
        Ok(())
    }
}

/// A batch of check reports, e.g. one full verify run.
#[derive(Debug, Clone, Default)]
pub struct SuiteResult {
    pub reports: Vec<VerifyReport>,
}

impl SuiteResult {
    pub fn new(reports: Vec<VerifyReport>) -> SuiteResult {
        SuiteResult { reports }
    }

    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    /// Data rows only; callers prepend header and provenance comments.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for r in &self.reports {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.reports {
            writeln!(f, "{r}")?;
        }
        let n_fail = self.reports.iter().filter(|r| !r.passed).count();
        write!(f, "{} checks, {} failed", self.reports.len(), n_fail)
    }
}
