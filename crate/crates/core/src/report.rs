//! Structured outcome of a statistical or exact check.
//!
//! Every component stores the statistic together with the decision rule it
//! was judged by, so a report can be re-judged from its own contents via
//! [`VerificationReport::rejudge`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    /// Pass iff the p-value exceeds `alpha`.
    PValueAbove { alpha: f64 },
    /// Pass iff the statistic does not exceed `bound`.
    StatisticAtMost { bound: f64 },
    /// Reported only; never fails.
    Informational,
}

impl Rule {
    pub fn judge(&self, statistic: f64, p_value: Option<f64>) -> bool {
        match *self {
            Rule::PValueAbove { alpha } => p_value.is_some_and(|p| p > alpha),
            Rule::StatisticAtMost { bound } => statistic <= bound,
            Rule::Informational => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(flatten)]
    pub rule: Rule,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Component {
    pub fn new(name: impl Into<String>, statistic: f64, p_value: Option<f64>, rule: Rule) -> Self {
        let passed = rule.judge(statistic, p_value);
        Self {
            name: name.into(),
            statistic,
            reference: None,
            p_value,
            rule,
            passed,
            note: None,
        }
    }

    pub fn with_reference(mut self, reference: f64) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub check: String,
    /// Headline statistic (for multi-part checks, the most extreme component).
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    pub passed: bool,
    pub seeds: Vec<u64>,
    pub sample_sizes: BTreeMap<String, u64>,
    pub components: Vec<Component>,
    pub caveats: Vec<String>,
}

impl VerificationReport {
    pub fn new(check: impl Into<String>) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            check: check.into(),
            statistic: 0.0,
            reference: None,
            p_value: None,
            level: None,
            passed: true,
            seeds: Vec::new(),
            sample_sizes: BTreeMap::new(),
            components: Vec::new(),
            caveats: Vec::new(),
        }
    }

    pub fn push(&mut self, component: Component) {
        self.passed &= component.passed;
        self.components.push(component);
    }

    pub fn caveat(&mut self, text: impl Into<String>) {
        self.caveats.push(text.into());
    }

    pub fn size(&mut self, key: &str, value: u64) {
        self.sample_sizes.insert(key.to_string(), value);
    }

    /// Recomputes every pass/fail flag from the recorded statistics and
    /// rules; returns whether the stored flags agree.
    pub fn rejudge(&self) -> bool {
        let mut all = true;
        for c in &self.components {
            let verdict = c.rule.judge(c.statistic, c.p_value);
            if verdict != c.passed {
                return false;
            }
            all &= verdict;
        }
        all == self.passed
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{}: {}  (statistic {:.6e}{})",
            self.check,
            if self.passed { "PASS" } else { "FAIL" },
            self.statistic,
            self.p_value.map(|p| format!(", p = {p:.4}")).unwrap_or_default()
        );
        let _ = writeln!(out, "  {:<40} {:>14} {:>12} {:>14}  verdict", "component", "statistic", "p-value", "bound/alpha");
        for c in &self.components {
            let bound = match c.rule {
                Rule::PValueAbove { alpha } => format!("a={alpha:.3e}"),
                Rule::StatisticAtMost { bound } => format!("<={bound:.4e}"),
                Rule::Informational => "info".to_string(),
            };
            let _ = writeln!(
                out,
                "  {:<40} {:>14.6e} {:>12} {:>14}  {}",
                c.name,
                c.statistic,
                c.p_value.map(|p| format!("{p:.4}")).unwrap_or_else(|| "-".into()),
                bound,
                if c.passed { "ok" } else { "FAIL" }
            );
        }
        for cav in &self.caveats {
            let _ = writeln!(out, "  note: {cav}");
        }
        out
    }
}
