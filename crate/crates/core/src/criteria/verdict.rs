//! Sufficient conditions for similarity to a normal operator, evaluated as
//! a conjunction of sub-tests.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
    Inapplicable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Inapplicable => "inapplicable",
        }
    }

    /// Conjunction: any failure fails, otherwise any doubt is doubt.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Inapplicable, _) | (_, Inapplicable) => Inapplicable,
            (Fails, _) | (_, Fails) => Fails,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Holds,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sub-test with its outcome and a human-readable explanation.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerdictReport {
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    pub reasons: Vec<String>,
}

impl VerdictReport {
    pub fn inapplicable(reason: impl Into<String>) -> Self {
        Self {
            verdict: Verdict::Inapplicable,
            checks: Vec::new(),
            reasons: vec![reason.into()],
        }
    }

    /// Conjunction of `checks`; every check that is not `Holds` becomes a
    /// reason.
    pub fn all(checks: Vec<Check>) -> Self {
        let verdict = checks.iter().fold(Verdict::Holds, |v, c| v.and(c.verdict));
        let reasons = checks
            .iter()
            .filter(|c| c.verdict != Verdict::Holds)
            .map(|c| format!("{}: {} ({})", c.name, c.verdict, c.detail))
            .collect();
        Self {
            verdict,
            checks,
            reasons,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjunction_order() {
        use Verdict::*;
        assert_eq!(Holds.and(Holds), Holds);
        assert_eq!(Holds.and(Inconclusive), Inconclusive);
        assert_eq!(Inconclusive.and(Fails), Fails);
        assert_eq!(Fails.and(Inapplicable), Inapplicable);
        let r = VerdictReport::all(vec![
            Check {
                name: "a",
                verdict: Holds,
                detail: String::new(),
            },
            Check {
                name: "b",
                verdict: Fails,
                detail: "x".into(),
            },
        ]);
        assert_eq!(r.verdict, Fails);
        assert_eq!(r.reasons, vec!["b: fails (x)".to_string()]);
    }
}
