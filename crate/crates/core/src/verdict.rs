use std::fmt;

use serde::{Deserialize, Serialize};

/// Outcome of a sampled falsifier. A falsifier can exhibit a violation but
/// never prove its absence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Fail,
    NoViolationFound,
}

impl Verdict {
    pub fn is_fail(self) -> bool {
        self == Verdict::Fail
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Fail => "FAIL",
            Verdict::NoViolationFound => "NO_VIOLATION_FOUND",
        })
    }
}
