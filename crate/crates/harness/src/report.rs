use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Claim tags a record may carry, with a one-line description each.
pub const CLAIMS: &[(&str, &str)] = &[
    ("operator-normalization", "discrete restricted fractional Laplacian reproduces the Getoor profile"),
    ("comparison-principle", "M-matrix structure and ordered data give ordered solutions"),
    ("subsolution-scaling", "pure singular solutions scale as lambda^(1/(delta+1))"),
    ("boundary-rates", "boundary exponent of the pure singular solution by regime"),
    ("hs-threshold", "energy finiteness iff 2 beta + delta (2s - 1) < 1 + 2s"),
    ("holder-regularity", "Holder exponent of solutions by regime"),
    ("minimal-branch", "minimal solutions exist below the extremal parameter and are stable"),
    ("fold-bending", "the branch turns back at the extremal parameter with lambda'' < 0"),
    ("multiplicity", "two distinct solutions below the extremal parameter"),
    ("asymptotic-bifurcation", "the upper branch blows up only as lambda tends to 0"),
    ("operator-derivatives", "first and second derivatives of the solution map A(lambda, h)"),
    ("small-lambda-uniqueness", "uniqueness of the small solution for small lambda"),
];

pub fn is_known_claim(tag: &str) -> bool {
    CLAIMS.iter().any(|(t, _)| *t == tag)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub claim: String,
    pub params: String,
    pub expected: String,
    pub measured: String,
    pub tolerance: String,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, claim: &str) -> Self {
        debug_assert!(is_known_claim(claim), "unknown claim tag {claim}");
        CheckRecord {
            name: name.into(),
            claim: claim.to_string(),
            params: String::new(),
            expected: String::new(),
            measured: String::new(),
            tolerance: String::new(),
            pass: false,
        }
    }

    pub fn params(mut self, p: impl Into<String>) -> Self {
        self.params = p.into();
        self
    }

    pub fn expected(mut self, e: impl Into<String>) -> Self {
        self.expected = e.into();
        self
    }

    pub fn measured(mut self, m: impl Into<String>) -> Self {
        self.measured = m.into();
        self
    }

    pub fn tolerance(mut self, t: impl Into<String>) -> Self {
        self.tolerance = t.into();
        self
    }

    pub fn pass(mut self, ok: bool) -> Self {
        self.pass = ok;
        self
    }

    /// A module error turned into a failed record.
    pub fn failed(name: impl Into<String>, claim: &str, err: impl std::fmt::Display) -> Self {
        CheckRecord::new(name, claim).measured(format!("error: {err}")).pass(false)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub records: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let w = self.records.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
        let _ = writeln!(out, "{:<4}  {:<w$}  {:<24}  {:<28}  measured", "pass", "name", "claim", "expected");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{:<4}  {:<w$}  {:<24}  {:<28}  {}",
                if r.pass { "ok" } else { "FAIL" },
                r.name,
                r.claim,
                r.expected,
                r.measured
            );
        }
        out
    }
}
