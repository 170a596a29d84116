//! Run configuration. Later sources win: defaults, `HYPERORBIT_PRECISION`,
//! command-line flags, config file. The effective configuration is echoed
//! into every output.

use hyperorbit_core::ext::DEFAULT_DIGITS;
use hyperorbit_core::search::SearchBudget;
use hyperorbit_core::systems::ValidationOptions;
use hyperorbit_core::verify::LemmaOptions;
use hyperorbit_core::{ExtReal, Precision};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PRECISION_ENV: &str = "HYPERORBIT_PRECISION";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Unset means: the system file's precision, or the default.
    pub precision_digits: Option<u32>,
    pub eps: String,
    pub tau_zero: Option<String>,
    pub delta_cmp: Option<String>,
    pub budget: Budget,
    /// Seed for randomized target sets.
    pub rng_seed: u64,
    pub lemmas: LemmaSettings,
    pub density: DensitySettings,
    pub coverage: CoverageSettings,
    pub outputs: Outputs,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            precision_digits: None,
            eps: String::from("1e-3"),
            tau_zero: None,
            delta_cmp: None,
            budget: Budget::default(),
            rng_seed: 1,
            lemmas: LemmaSettings::default(),
            density: DensitySettings::default(),
            coverage: CoverageSettings::default(),
            outputs: Outputs::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    /// Per-stage cap on both exponents; unset means the system's own cap.
    pub max_exponent: Option<u64>,
    pub max_nodes: u64,
    /// Cap on enumerated words in coverage runs.
    pub word_cap: u64,
}

impl Default for Budget {
    fn default() -> Self {
        let d = SearchBudget::default();
        Budget { max_exponent: None, max_nodes: d.max_nodes, word_cap: 10_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaSettings {
    pub depth: u64,
    pub cone_max: u64,
    pub cone_bound: String,
    pub escape_level: String,
}

impl Default for LemmaSettings {
    fn default() -> Self {
        LemmaSettings { depth: 50, cone_max: 500, cone_bound: String::from("1000"), escape_level: String::from("-100") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Targets {
    /// Every real axis runs over `lo, lo + step, ..., hi`.
    Grid { lo: String, hi: String, step: String },
    /// Uniform on `[lo, hi]` per real axis, from `rng_seed`.
    Random { count: usize, lo: String, hi: String },
    /// Explicit targets, one comma-separated vector each.
    List { points: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensitySettings {
    pub targets: Targets,
    pub min_fraction: String,
}

impl Default for DensitySettings {
    fn default() -> Self {
        DensitySettings {
            targets: Targets::Grid { lo: String::from("-1"), hi: String::from("1"), step: String::from("0.1") },
            min_fraction: String::from("1"),
        }
    }
}

/// Unset fields take defaults that depend on the system (quadrant runs use
/// the demo box and expect positivity).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageSettings {
    pub stages: Option<usize>,
    pub k_max: Option<u64>,
    pub l_max: Option<u64>,
    pub lo: Option<String>,
    pub hi: Option<String>,
    pub cell: Option<String>,
    pub min_fraction: Option<String>,
    pub expect_positive: Option<bool>,
}

impl CoverageSettings {
    pub fn resolved(&self, quadrant: bool) -> CoverageSettings {
        let s = |x: &Option<String>, q: &str, g: &str| Some(x.clone().unwrap_or_else(|| String::from(if quadrant { q } else { g })));
        CoverageSettings {
            stages: Some(self.stages.unwrap_or(if quadrant { 2 } else { 1 })),
            k_max: Some(self.k_max.unwrap_or(if quadrant { 40 } else { 60 })),
            l_max: Some(self.l_max.unwrap_or(if quadrant { 40 } else { 60 })),
            lo: s(&self.lo, "0.1", "-5"),
            hi: s(&self.hi, "2", "5"),
            cell: s(&self.cell, "0.1", "0.1"),
            min_fraction: s(&self.min_fraction, "0.9", "0"),
            expect_positive: Some(self.expect_positive.unwrap_or(quadrant)),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub report: Option<String>,
    pub svg: Option<String>,
    pub points_csv: Option<String>,
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    // tagged values (`kind`) are replaced whole
                    Some(slot) if slot.is_object() && v.is_object() && v.get("kind").is_none() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

impl RunConfig {
    /// Applies the environment precision override.
    pub fn with_env(mut self, env: Option<&str>) -> Result<Self, String> {
        if let Some(v) = env {
            let d = v.trim().parse::<u32>().map_err(|_| format!("{PRECISION_ENV} must be a positive integer, got {v:?}"))?;
            self.precision_digits = Some(d);
        }
        Ok(self)
    }

    /// Overlays a (partial) JSON config file.
    pub fn with_file(self, text: &str) -> Result<Self, String> {
        let over: Value = serde_json::from_str(text).map_err(|e| format!("config: {e}"))?;
        if !over.is_object() {
            return Err(String::from("config: expected a JSON object"));
        }
        let mut base = serde_json::to_value(&self).expect("config serializes");
        merge(&mut base, over);
        serde_json::from_value(base).map_err(|e| format!("config: {e}"))
    }

    /// Checks that numeric fields parse and are positive where required.
    pub fn check(&self) -> Result<(), String> {
        let prec = self.precision();
        let positive = |name: &str, s: &str| -> Result<(), String> {
            let x = ExtReal::parse(s, prec).map_err(|e| format!("{name}: {e}"))?;
            if x.is_positive() {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {s:?}"))
            }
        };
        let number = |name: &str, s: &str| ExtReal::parse(s, prec).map(|_| ()).map_err(|e| format!("{name}: {e}"));
        if self.precision_digits == Some(0) {
            return Err(String::from("precision_digits must be positive"));
        }
        positive("eps", &self.eps)?;
        for (name, v) in [("tau_zero", &self.tau_zero), ("delta_cmp", &self.delta_cmp)] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if self.budget.max_exponent == Some(0) || self.budget.max_nodes == 0 || self.budget.word_cap == 0 {
            return Err(String::from("budget fields must be positive"));
        }
        if self.lemmas.depth == 0 || self.lemmas.cone_max == 0 {
            return Err(String::from("lemma depth and cone_max must be positive"));
        }
        positive("lemmas.cone_bound", &self.lemmas.cone_bound)?;
        number("lemmas.escape_level", &self.lemmas.escape_level)?;
        match &self.density.targets {
            Targets::Grid { lo, hi, step } => {
                number("density.targets.lo", lo)?;
                number("density.targets.hi", hi)?;
                positive("density.targets.step", step)?;
            }
            Targets::Random { count, lo, hi } => {
                if *count == 0 {
                    return Err(String::from("density.targets.count must be positive"));
                }
                number("density.targets.lo", lo)?;
                number("density.targets.hi", hi)?;
            }
            Targets::List { .. } => {}
        }
        number("density.min_fraction", &self.density.min_fraction)?;
        let c = &self.coverage;
        if let Some(cell) = &c.cell {
            positive("coverage.cell", cell)?;
        }
        for (name, v) in [("coverage.lo", &c.lo), ("coverage.hi", &c.hi), ("coverage.min_fraction", &c.min_fraction)] {
            if let Some(v) = v {
                number(name, v)?;
            }
        }
        Ok(())
    }

    pub fn precision(&self) -> Precision {
        Precision::from_digits(self.precision_digits.unwrap_or(DEFAULT_DIGITS))
    }

    pub fn eps(&self) -> ExtReal {
        ExtReal::parse(&self.eps, self.precision()).expect("checked")
    }

    pub fn validation_options(&self) -> ValidationOptions {
        let prec = self.precision();
        let mut opts = ValidationOptions::for_precision(prec);
        if let Some(t) = &self.tau_zero {
            opts.tau_zero = ExtReal::parse(t, prec).expect("checked");
        }
        if let Some(d) = &self.delta_cmp {
            opts.delta_cmp = ExtReal::parse(d, prec).expect("checked");
        }
        opts
    }

    pub fn search_budget(&self) -> SearchBudget {
        let mut b = match self.budget.max_exponent {
            Some(m) => SearchBudget::exponents(m),
            None => SearchBudget::default(),
        };
        b.max_nodes = self.budget.max_nodes;
        b
    }

    pub fn lemma_options(&self) -> LemmaOptions {
        let prec = self.precision();
        let mut o = LemmaOptions::new(self.lemmas.depth, prec);
        o.cone_max = self.lemmas.cone_max;
        o.cone_bound = ExtReal::parse(&self.lemmas.cone_bound, prec).expect("checked");
        o.escape_level = ExtReal::parse(&self.lemmas.escape_level, prec).expect("checked");
        o
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layering() {
        let c = RunConfig::default().with_env(Some("40")).unwrap();
        assert_eq!(c.precision_digits, Some(40));
        let c = c.with_file(r#"{"eps": "0.05", "lemmas": {"depth": 7}}"#).unwrap();
        assert_eq!((c.eps.as_str(), c.lemmas.depth, c.lemmas.cone_max), ("0.05", 7, 500));
        assert_eq!(c.precision_digits, Some(40));
        assert!(c.clone().with_file(r#"{"epsilon": "1"}"#).is_err());
        assert!(c.clone().with_file(r#"{"density": {"targets": {"kind": "random", "count": 3, "lo": "0", "hi": "1"}}}"#).is_ok());
        assert!(RunConfig::default().with_env(Some("x")).is_err());
        let bad = RunConfig { eps: String::from("-1"), ..RunConfig::default() };
        assert!(bad.check().is_err());
        assert!(RunConfig::default().check().is_ok());
    }

    #[test]
    fn coverage_defaults() {
        let q = CoverageSettings::default().resolved(true);
        assert_eq!((q.stages, q.k_max, q.expect_positive), (Some(2), Some(40), Some(true)));
        let g = CoverageSettings { lo: Some(String::from("-1")), ..Default::default() }.resolved(false);
        assert_eq!((g.lo.as_deref(), g.hi.as_deref()), (Some("-1"), Some("5")));
    }
}
