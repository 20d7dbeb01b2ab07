//! Verdicts, fit records and the run report with its text rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::ScenarioConfig;

/// Non-finite values are stored as JSON strings so reports round-trip.
mod lossless {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// How `observed` is compared with `predicted`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// `|observed − predicted| ≤ tolerance`
    Within,
    /// `|observed − predicted| ≤ tolerance·|predicted|`
    Relative,
    /// `observed ≤ predicted + tolerance`
    AtMost,
    /// `observed ≥ predicted − tolerance`
    AtLeast,
}

impl Rule {
    pub fn holds(self, observed: f64, predicted: f64, tolerance: f64) -> bool {
        match self {
            Rule::Within => (observed - predicted).abs() <= tolerance,
            Rule::Relative => (observed - predicted).abs() <= tolerance * predicted.abs(),
            Rule::AtMost => observed <= predicted + tolerance,
            Rule::AtLeast => observed >= predicted - tolerance,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Rule::Within => "±",
            Rule::Relative => "±rel",
            Rule::AtMost => "<=",
            Rule::AtLeast => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub quantity: String,
    #[serde(with = "lossless")]
    pub observed: f64,
    #[serde(with = "lossless")]
    pub predicted: f64,
    #[serde(with = "lossless")]
    pub tolerance: f64,
    pub rule: Rule,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    pub fn check(quantity: impl Into<String>, observed: f64, predicted: f64, tolerance: f64, rule: Rule) -> Self {
        Verdict {
            quantity: quantity.into(),
            observed,
            predicted,
            tolerance,
            rule,
            passed: rule.holds(observed, predicted, tolerance),
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// A slope fit as stored in `fits.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub quantity: String,
    #[serde(with = "lossless")]
    pub slope: f64,
    #[serde(with = "lossless")]
    pub predicted: f64,
    #[serde(with = "lossless")]
    pub tolerance: f64,
    #[serde(with = "lossless")]
    pub residual: f64,
    pub window: [f64; 2],
    pub abscissa: String,
    pub samples: usize,
    /// `pass`, `fail` or `poor-fit`.
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub run: String,
    pub config: ScenarioConfig,
    /// Settings that move a run outside the plain scheme (hyperviscosity,
    /// validation-only parameter modes).
    pub flags: Vec<String>,
    pub verdicts: Vec<Verdict>,
    pub fits: Vec<FitRecord>,
    /// Files written next to the report, relative to the run directory.
    pub files: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, quantity: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.quantity == quantity)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(out, "run       {}", self.run);
        let _ = writeln!(
            out,
            "params    n={} lambda={} mu={} gamma={} delta={}",
            c.n,
            c.damping.lambda,
            c.damping.mu,
            c.gas.gamma,
            c.delta()
        );
        for f in &self.flags {
            let _ = writeln!(out, "flag      {f}");
        }
        let _ = writeln!(out);
        let width = self.verdicts.iter().map(|v| v.quantity.len()).max().unwrap_or(8).max(8);
        for v in &self.verdicts {
            let _ = writeln!(
                out,
                "{:<4}  {:<width$}  observed {:>12.5e}  predicted {:>12.5e} {} {:.3e}{}",
                if v.passed { "PASS" } else { "FAIL" },
                v.quantity,
                v.observed,
                v.predicted,
                v.rule.symbol(),
                v.tolerance,
                v.note.as_ref().map(|n| format!("  ({n})")).unwrap_or_default(),
            );
        }
        if !self.fits.is_empty() {
            let _ = writeln!(out);
            for f in &self.fits {
                let _ = writeln!(
                    out,
                    "fit   {:<width$}  slope {:>9.4} vs {:>9.4}  rms {:.3e}  over [{}, {}] in {} ({} samples, {})",
                    f.quantity,
                    f.slope,
                    f.predicted,
                    f.residual,
                    f.window[0],
                    f.window[1],
                    f.abscissa,
                    f.samples,
                    f.verdict
                );
            }
        }
        let passed = self.verdicts.iter().filter(|v| v.passed).count();
        let _ = writeln!(out);
        let _ = writeln!(out, "{passed}/{} verdicts pass", self.verdicts.len());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules() {
        assert!(Rule::Within.holds(-0.27, -0.25, 0.05));
        assert!(!Rule::Within.holds(-0.74, -0.25, 0.08));
        assert!(Rule::AtMost.holds(-2.0, -1.25, 0.15));
        assert!(Rule::AtLeast.holds(0.96, 1.0, 0.05));
        assert!(Rule::Relative.holds(1.1, 1.0, 0.2));
        assert!(!Rule::Within.holds(f64::NAN, 0.0, 1.0));
    }

    #[test]
    fn non_finite_values_round_trip() {
        let v = Verdict::check("x", f64::INFINITY, 1.0, 0.1, Rule::AtMost);
        let text = serde_json::to_string(&v).unwrap();
        let back: Verdict = serde_json::from_str(&text).unwrap();
        assert_eq!(back.observed, f64::INFINITY);
        assert!(!back.passed);
    }
}
