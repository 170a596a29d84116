//! JSON views of core results. Keys are emitted sorted, numbers as strings.

use hyperorbit_core::scalar::GeneratingPair;
use hyperorbit_core::steering::{AffineSteering, OrbitWord, SteeringResult, SteeringStage};
use hyperorbit_core::systems::ValidationReport;
use hyperorbit_core::verify::{CoverageReport, DensitySummary, LemmaReport, TargetOutcome};
use hyperorbit_core::Scalar;
use serde_json::{json, Value};

use crate::schema::{decimal, values, Element, Value as Num};

fn fraction((num, den): (u64, u64)) -> Value {
    json!({ "numerator": num, "denominator": den })
}

pub fn word(w: &OrbitWord) -> Value {
    json!(w.stages.iter().map(|&(k, l)| [k, l]).collect::<Vec<_>>())
}

fn pair(p: &GeneratingPair) -> Value {
    json!({
        "a": Element::from_field(&p.a),
        "b": Element::from_field(&p.b),
        "log_ratio": decimal(&p.log_ratio),
        "certificate": p.certificate.name(),
        "reason": p.reason,
        "annulus_coverage": p.coverage.as_ref().map(|c| json!({
            "samples": c.samples,
            "cells_total": c.cells_total,
            "cells_hit": c.cells_hit,
        })),
    })
}

pub fn validation(r: &ValidationReport) -> Value {
    json!({
        "hypotheses": r.hypotheses.name(),
        "accepted": r.accepted,
        "checks": r.checks.iter().map(|c| json!({
            "kind": c.kind.name(),
            "name": c.name,
            "passed": c.passed,
            "detail": c.detail,
        })).collect::<Vec<_>>(),
        "first_failure": r.first_failure().map(|c| c.name.clone()),
        "pairs": r.pairs.iter().map(pair).collect::<Vec<_>>(),
        "column": values(&r.column),
    })
}

fn opt_scalar(x: &Option<Scalar>) -> Value {
    x.as_ref().map_or(Value::Null, |v| json!(Num::from_scalar(v)))
}

fn stage(s: &SteeringStage) -> Value {
    json!({
        "stage": s.s,
        "k": s.k,
        "l": s.l,
        "alpha": opt_scalar(&s.alpha),
        "omega": opt_scalar(&s.omega),
        "scalar_target": Num::from_scalar(&s.scalar_target),
        "eps": decimal(&s.eps),
        "target": values(&s.target),
        "preimage": values(&s.preimage),
        "gamma": decimal(&s.gamma),
        "amplification": decimal(&s.amplification),
        "achieved": decimal(&s.achieved),
        "floors": [s.floors.0, s.floors.1],
        "notes": s.notes,
        "nodes": s.nodes,
        "retries": s.retries,
    })
}

pub fn steering(r: &SteeringResult) -> Value {
    json!({
        "word": word(&r.word),
        "target": values(&r.target),
        "achieved": values(&r.achieved),
        "error": decimal(&r.error),
        "error_bound": decimal(&r.error_bound),
        "max_exponent": r.word.max_exponent(),
        "stats": {
            "nodes": r.stats.nodes,
            "retries": r.stats.retries,
            "refinements": r.stats.refinements,
        },
        "trace": r.stages.iter().map(stage).collect::<Vec<_>>(),
    })
}

pub fn affine_steering(r: &AffineSteering, target: &[Scalar]) -> Value {
    json!({
        "word": word(&r.word),
        "target": values(target),
        "achieved": values(&r.achieved),
        "direct": values(&r.direct),
        "error": decimal(&r.error),
        "lift": { "a": Element::from_field(&r.lift_a), "b": Element::from_field(&r.lift_b) },
        "lifted": steering(&r.lifted),
    })
}

pub fn lemmas(r: &LemmaReport) -> Value {
    json!({
        "passed": r.passed(),
        "checks": r.checks.iter().map(|c| json!({
            "lemma": c.lemma,
            "name": c.name,
            "passed": c.passed,
            "detail": c.detail,
            "witness": c.witness,
        })).collect::<Vec<_>>(),
    })
}

pub fn coverage(r: &CoverageReport) -> Value {
    json!({
        "box": r.bounds.iter().map(|(lo, hi)| [decimal(lo), decimal(hi)]).collect::<Vec<_>>(),
        "cell": decimal(&r.cell),
        "cells_per_axis": r.cells_per_axis,
        "cells_total": r.cells_total,
        "cells_hit": r.cells_hit,
        "fraction": fraction(r.fraction),
        "misses": r.misses.iter().map(|c| c.iter().map(decimal).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "points_seen": r.points_seen,
        "points_inside": r.points_inside,
    })
}

pub fn density(s: &DensitySummary, targets: &[Vec<Scalar>], outcomes: &[TargetOutcome]) -> Value {
    let per: Vec<Value> = targets
        .iter()
        .zip(outcomes)
        .map(|(t, o)| match o {
            TargetOutcome::Reached { result, reverified } => json!({
                "target": values(t),
                "reached": true,
                "word": word(&result.word),
                "error": decimal(&result.error),
                "reverified_error": decimal(reverified),
            }),
            TargetOutcome::Failed(why) => json!({ "target": values(t), "reached": false, "reason": why }),
        })
        .collect();
    json!({
        "targets": s.targets,
        "successes": s.successes,
        "fraction": fraction(s.fraction),
        "max_error": s.max_error.as_ref().map(decimal),
        "max_exponent": s.max_exponent,
        "mean_stages": s.mean_stages.map(fraction),
        "failures": s.failures.iter().map(|(i, why)| json!({ "index": i, "reason": why })).collect::<Vec<_>>(),
        "results": per,
    })
}

/// Pretty JSON with a trailing newline.
pub fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}
