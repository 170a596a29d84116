//! The `verify` suites: lemmas, density (steering over a target set) and
//! coverage (brute-force enumeration).

use std::io::Write;

use hyperorbit_core::field::parse_exact_ratio;
use hyperorbit_core::steering::steer_affine;
use hyperorbit_core::systems::SemigroupSystem;
use hyperorbit_core::verify::{self, enumerate_orbit, CoverageGrid, TargetOutcome, WordShape};
use hyperorbit_core::{ExtReal, Field, Precision, Scalar};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{RunConfig, Targets};
use crate::report;
use crate::schema::{parse_vector, Loaded};
use crate::svg::{Scatter, Viewport};

pub struct SuiteOutput {
    pub report: Value,
    pub passed: bool,
    pub svg: Option<String>,
}

fn real_axes(field: Field, n: usize) -> usize {
    match field {
        Field::Real => n,
        Field::Complex => 2 * n,
    }
}

fn from_axes(field: Field, xs: &[Scalar]) -> Vec<Scalar> {
    match field {
        Field::Real => xs.to_vec(),
        Field::Complex => xs.chunks(2).map(|c| Scalar::Complex(c[0].re(), c[1].re())).collect(),
    }
}

fn to_f64_axes(field: Field, x: &[Scalar]) -> Vec<f64> {
    match field {
        Field::Real => x.iter().map(|v| v.re().to_f64()).collect(),
        Field::Complex => x.iter().flat_map(|v| [v.re().to_f64(), v.im().to_f64()]).collect(),
    }
}

/// Target vectors in configuration order.
pub fn targets(cfg: &RunConfig, field: Field, n: usize) -> Result<Vec<Vec<Scalar>>, String> {
    let prec = cfg.precision();
    let axes = real_axes(field, n);
    match &cfg.density.targets {
        Targets::Grid { lo, hi, step } => {
            let q = |s: &str| parse_exact_ratio(s).map_err(|e| e.to_string());
            let (lo, hi, step) = (q(lo)?, q(hi)?, q(step)?);
            let count = ((&hi - &lo) / &step).floor().to_integer().to_u64().ok_or("empty grid")? + 1;
            let ticks: Vec<Scalar> = (0..count)
                .map(|i| Scalar::from_ratio(&(&lo + &step * BigRational::from_integer(i.into())), prec))
                .collect();
            let total = (count as u128).checked_pow(axes as u32).filter(|&t| t <= 1_000_000).ok_or("grid has too many targets")?;
            Ok((0..total)
                .map(|mut i| {
                    let mut idx = vec![0usize; axes];
                    for slot in idx.iter_mut().rev() {
                        *slot = (i % count as u128) as usize;
                        i /= count as u128;
                    }
                    from_axes(field, &idx.iter().map(|&j| ticks[j].clone()).collect::<Vec<_>>())
                })
                .collect())
        }
        Targets::Random { count, lo, hi } => {
            let f = |s: &str| ExtReal::parse(s, prec).map(|x| x.to_f64()).map_err(|e| e.to_string());
            let (lo, hi) = (f(lo)?, f(hi)?);
            if !(lo < hi) {
                return Err(String::from("random targets need lo < hi"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            Ok((0..*count)
                .map(|_| {
                    let xs: Vec<Scalar> = (0..axes).map(|_| Scalar::from_f64(rng.gen_range(lo..=hi), prec)).collect();
                    from_axes(field, &xs)
                })
                .collect())
        }
        Targets::List { points } => points
            .iter()
            .map(|p| {
                let v = parse_vector(p, field, prec)?;
                if v.len() != n {
                    return Err(format!("target {p:?} has {} entries, expected {n}", v.len()));
                }
                Ok(v)
            })
            .collect(),
    }
}

pub fn lemmas(sys: &Loaded, cfg: &RunConfig) -> Result<SuiteOutput, String> {
    let linear = match sys {
        Loaded::Linear(s) | Loaded::Quadrant(s, _) => s.clone(),
        Loaded::Affine(a, _) => SemigroupSystem::new(a.a().clone(), a.b().clone()).map_err(|e| e.to_string())?,
    };
    let rep = verify::verify_lemmas(&linear, &cfg.lemma_options()).map_err(|e| e.to_string())?;
    Ok(SuiteOutput { report: report::lemmas(&rep), passed: rep.passed(), svg: None })
}

fn at_least(frac: (u64, u64), min: &str, prec: Precision) -> bool {
    let min = ExtReal::parse(min, prec).expect("checked");
    let f = &ExtReal::from_u64(frac.0, prec) / &ExtReal::from_u64(frac.1, prec);
    f >= min
}

pub fn density(sys: &Loaded, cfg: &RunConfig, want_svg: bool) -> Result<SuiteOutput, String> {
    let (field, n) = (sys.field(), sys.n());
    let targets = targets(cfg, field, n)?;
    let eps = cfg.eps();
    let budget = cfg.search_budget();
    let prec = cfg.precision();
    let outcomes: Vec<TargetOutcome> = match sys {
        Loaded::Linear(s) | Loaded::Quadrant(s, _) => {
            targets.par_iter().map(|y| verify::steer_target(s, y, &eps, &budget)).collect()
        }
        Loaded::Affine(a, seed) => {
            let p: Vec<Scalar> = seed.iter().map(|x| x.to_scalar_at(prec).in_field(field)).collect();
            targets
                .par_iter()
                .map(|y| match steer_affine(a, &p, y, &eps, &budget, None) {
                    Ok(r) if r.error < eps => {
                        let mut result = r.lifted.clone();
                        result.word = r.word.clone();
                        result.target = y.clone();
                        result.achieved = r.direct.clone();
                        result.error = r.error.clone();
                        TargetOutcome::Reached { result, reverified: r.error }
                    }
                    Ok(r) => TargetOutcome::Failed(format!("direct error {} exceeds eps", r.error.to_string_digits(6))),
                    Err(e) => TargetOutcome::Failed(e.to_string()),
                })
                .collect()
        }
    };
    let summary = verify::summarize(&outcomes);
    let passed = at_least(summary.fraction, &cfg.density.min_fraction, prec);
    let mut rep = report::density(&summary, &targets, &outcomes);
    rep["min_fraction"] = json!(cfg.density.min_fraction);
    rep["passed"] = json!(passed);
    let svg = (want_svg && real_axes(field, n) <= 2).then(|| {
        let pts: Vec<Vec<f64>> = targets.iter().map(|t| to_f64_axes(field, t)).collect();
        let range = |k: usize| {
            let lo = pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
            let pad = ((hi - lo) * 0.05).max(1e-9);
            (lo - pad, hi + pad)
        };
        let view = Viewport::new(range(0), (real_axes(field, n) == 2).then(|| range(1)));
        let mut plot = Scatter::new(view);
        for (t, o) in pts.iter().zip(&outcomes) {
            plot.mark(t);
            if let TargetOutcome::Reached { result, .. } = o {
                plot.point(&to_f64_axes(field, &result.achieved));
            }
        }
        plot.render(&format!("steered points, {} of {} targets", summary.successes, summary.targets))
    });
    Ok(SuiteOutput { report: rep, passed, svg })
}

/// Streams the enumeration into the coverage grid, the positivity counters,
/// the optional plot and the optional CSV sink.
pub fn coverage(sys: &Loaded, cfg: &RunConfig, want_svg: bool, csv: Option<&mut dyn Write>) -> Result<SuiteOutput, String> {
    let s = sys.semigroup().ok_or("coverage needs a linear system")?;
    let quadrant = matches!(sys, Loaded::Quadrant(..));
    let c = cfg.coverage.resolved(quadrant);
    let prec = cfg.precision();
    let (field, n) = (s.field(), s.n());
    let axes = real_axes(field, n);
    let p = |x: &Option<String>| ExtReal::parse(x.as_deref().expect("resolved"), prec).map_err(|e| e.to_string());
    let (lo, hi, cell) = (p(&c.lo)?, p(&c.hi)?, p(&c.cell)?);
    let mut grid = CoverageGrid::new(vec![(lo.clone(), hi.clone()); axes], &cell).map_err(|e| e.to_string())?;
    let shape = WordShape { stages: c.stages.expect("resolved"), k_max: c.k_max.expect("resolved"), l_max: c.l_max.expect("resolved") };
    let mut plot = (want_svg && axes <= 2).then(|| {
        let r = (lo.to_f64(), hi.to_f64());
        Scatter::new(Viewport::new(r, (axes == 2).then_some(r)))
    });
    let mut writer = csv.map(csv::Writer::from_writer);
    if let Some(w) = writer.as_mut() {
        let mut head: Vec<String> = (1..=shape.stages).flat_map(|i| [format!("k{i}"), format!("l{i}")]).collect();
        head.extend((1..=n).flat_map(|i| match field {
            Field::Real => vec![format!("x{i}")],
            Field::Complex => vec![format!("x{i}_re"), format!("x{i}_im")],
        }));
        w.write_record(&head).map_err(|e| e.to_string())?;
    }
    let (mut negative, mut on_axis, mut csv_error) = (0u64, 0u64, None);
    let words = enumerate_orbit(s, &s.seed_scalars(), shape, u128::from(cfg.budget.word_cap), |w, x| {
        grid.add(field, x);
        let comps: Vec<ExtReal> = x.iter().flat_map(|v| [v.re(), v.im()]).collect();
        if comps.iter().any(ExtReal::is_negative) {
            negative += 1;
        } else if field == Field::Real && comps.iter().step_by(2).any(ExtReal::is_zero) {
            on_axis += 1;
        }
        if let Some(plot) = plot.as_mut() {
            plot.point(&to_f64_axes(field, x));
        }
        if let Some(wr) = writer.as_mut() {
            let mut row: Vec<String> = w.iter().flat_map(|(k, l)| [k.to_string(), l.to_string()]).collect();
            row.extend(x.iter().flat_map(|v| match field {
                Field::Real => vec![v.re().to_decimal_string()],
                Field::Complex => vec![v.re().to_decimal_string(), v.im().to_decimal_string()],
            }));
            if let Err(e) = wr.write_record(&row) {
                csv_error.get_or_insert(e.to_string());
            }
        }
    })
    .map_err(|e| e.to_string())?;
    if let Some(e) = csv_error {
        return Err(e);
    }
    if let Some(mut w) = writer {
        w.flush().map_err(|e| e.to_string())?;
    }
    let rep = grid.report();
    let enough = at_least(rep.fraction, c.min_fraction.as_deref().expect("resolved"), prec);
    let positive_ok = !c.expect_positive.expect("resolved") || negative == 0;
    let mut out = report::coverage(&rep);
    out["shape"] = json!({ "stages": shape.stages, "k_max": shape.k_max, "l_max": shape.l_max });
    out["words"] = json!(words.to_string());
    out["positivity"] = json!({
        "expected": c.expect_positive,
        "points_with_negative_coordinate": negative,
        "points_on_boundary": on_axis,
        "passed": positive_ok,
    });
    out["min_fraction"] = json!(c.min_fraction);
    out["passed"] = json!(enough && positive_ok);
    out["settings"] = serde_json::to_value(&c).expect("json");
    let svg = plot.map(|p| p.render(&format!("orbit points, {} words, coverage {}/{}", words, rep.cells_hit, rep.cells_total)));
    Ok(SuiteOutput { report: out, passed: enough && positive_ok, svg })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_targets() {
        let cfg = RunConfig::default();
        let t = targets(&cfg, Field::Real, 2).unwrap();
        assert_eq!(t.len(), 441);
        assert_eq!(t[0][0].re().to_f64(), -1.0);
        assert_eq!(t[1][1].re().to_f64(), -0.9);
        assert_eq!(t[440][1].re().to_f64(), 1.0);
        let t = targets(&cfg, Field::Complex, 1).unwrap();
        assert_eq!(t.len(), 441);
        assert_eq!(t[1][0].im().to_f64(), -0.9);
    }

    #[test]
    fn random_targets_are_reproducible() {
        let mut cfg = RunConfig::default();
        cfg.density.targets = Targets::Random { count: 5, lo: String::from("-10"), hi: String::from("10") };
        let a = targets(&cfg, Field::Real, 1).unwrap();
        let b = targets(&cfg, Field::Real, 1).unwrap();
        assert_eq!(a.len(), 5);
        assert!(a.iter().zip(&b).all(|(x, y)| x[0].re() == y[0].re()));
        cfg.rng_seed = 2;
        assert!(targets(&cfg, Field::Real, 1).unwrap()[0][0].re() != a[0][0].re());
    }
}
