//! Commands and exit codes: 0 success, 2 validation or check failure,
//! 3 steering not found, 64 usage, 65 malformed input, 66 unreadable input,
//! 74 output write failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use hyperorbit_core::field::parse_exact_ratio;
use hyperorbit_core::steering::{steer_affine, synthesize_word};
use hyperorbit_core::systems::{build_affine_1d, build_complex_example, build_quadrant_example, build_real_example};
use hyperorbit_core::{Error, FieldElement};
use serde_json::{json, Value};

use crate::config::{RunConfig, PRECISION_ENV};
use crate::report;
use crate::schema::{parse_vector, HypothesesName, Loaded, SystemFile};
use crate::suites;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 2;
pub const EXIT_NOT_FOUND: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_MALFORMED: i32 = 65;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_IO: i32 = 74;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

#[derive(Parser, Debug)]
#[command(name = "hyperorbit", version, about = "Hypercyclic matrix semigroups: construct, validate, steer, verify")]
pub struct Cli {
    /// Working precision in decimal digits (overrides HYPERORBIT_PRECISION).
    #[arg(long, global = true)]
    pub precision: Option<u32>,
    /// JSON run configuration; its fields override flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for randomized target sets.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Family {
    RealExample,
    ComplexExample,
    Quadrant,
    #[value(name = "affine-1d")]
    Affine1d,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Suite {
    Lemmas,
    Density,
    Coverage,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a system from an example family and write it as JSON.
    Construct {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        n: Option<usize>,
        /// Quadrant parameters `a,b,d,u,v`.
        #[arg(long)]
        params: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a system file against its hypotheses.
    Validate {
        system: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find a word steering the seed to within eps of a target.
    Steer {
        system: PathBuf,
        /// Comma-separated entries; complex entries as `re:im`.
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        #[arg(long)]
        eps: Option<String>,
        /// Cap on every exponent.
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        max_nodes: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite.
    Verify {
        system: PathBuf,
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// SVG scatter of orbit points (one- or two-dimensional real axes).
        #[arg(long)]
        svg: Option<PathBuf>,
        /// CSV of every enumerated point (coverage suite).
        #[arg(long)]
        points: Option<PathBuf>,
    },
}

fn path_str(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

/// Effective configuration: defaults, environment, flags, config file.
pub fn effective_config(cli: &Cli, env: Option<&str>) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default().with_env(env).map_err(|e| fail(EXIT_USAGE, e))?;
    if cli.precision.is_some() {
        cfg.precision_digits = cli.precision;
    }
    if let Some(s) = cli.seed {
        cfg.rng_seed = s;
    }
    match &cli.command {
        Command::Construct { out, .. } | Command::Validate { out, .. } => cfg.outputs.report = path_str(out),
        Command::Steer { eps, budget, max_nodes, out, .. } => {
            if let Some(e) = eps {
                cfg.eps = e.clone();
            }
            if budget.is_some() {
                cfg.budget.max_exponent = *budget;
            }
            if let Some(m) = max_nodes {
                cfg.budget.max_nodes = *m;
            }
            cfg.outputs.report = path_str(out);
        }
        Command::Verify { eps, out, svg, points, .. } => {
            if let Some(e) = eps {
                cfg.eps = e.clone();
            }
            cfg.outputs.report = path_str(out);
            cfg.outputs.svg = path_str(svg);
            cfg.outputs.points_csv = path_str(points);
        }
    }
    if let Some(path) = &cli.config {
        let text = read(path)?;
        cfg = cfg.with_file(&text).map_err(|e| fail(EXIT_MALFORMED, e))?;
    }
    cfg.check().map_err(|e| fail(EXIT_USAGE, e))?;
    Ok(cfg)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(EXIT_NO_INPUT, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))
}

/// Writes to `out`, or returns the text for stdout.
fn emit(out: &Option<PathBuf>, v: &Value, stdout: &mut String) -> Result<(), Failure> {
    let text = report::render(v);
    match out {
        Some(p) => write(p, &text),
        None => {
            stdout.push_str(&text);
            Ok(())
        }
    }
}

/// Reads a system file; the precision is the configured one, else the file's.
fn load(path: &Path, cfg: &mut RunConfig) -> Result<Loaded, Failure> {
    let text = read(path)?;
    let file: SystemFile = serde_json::from_str(&text).map_err(|e| fail(EXIT_MALFORMED, format!("{}: {e}", path.display())))?;
    if file.precision_digits == 0 {
        return Err(fail(EXIT_MALFORMED, "precision_digits must be positive"));
    }
    cfg.precision_digits.get_or_insert(file.precision_digits);
    file.load(cfg.precision(), &cfg.validation_options()).map_err(|e| fail(EXIT_MALFORMED, format!("{}: {e}", path.display())))
}

fn with_config(mut v: Value, cfg: &RunConfig) -> Value {
    v["config"] = serde_json::to_value(cfg).expect("json");
    v
}

/// Runs one command; returns the exit code and what goes to stdout.
pub fn run(cli: &Cli, env: Option<&str>) -> Result<(i32, String), Failure> {
    let mut cfg = effective_config(cli, env)?;
    let mut stdout = String::new();
    let code = match &cli.command {
        Command::Construct { family, n, params, out } => {
            let prec = cfg.precision();
            cfg.precision_digits = Some(prec.digits());
            let opts = cfg.validation_options();
            let mut meta = BTreeMap::new();
            meta.insert(String::from("family"), family.to_possible_value().expect("named").get_name().to_string());
            let dim = |n: &Option<usize>| match *n {
                Some(0) => Err(fail(EXIT_USAGE, "n must be at least 1")),
                Some(n) => Ok(n),
                None => Err(fail(EXIT_USAGE, "--n is required for this family")),
            };
            let file = match family {
                Family::RealExample | Family::ComplexExample => {
                    let n = dim(n)?;
                    let sys = match family {
                        Family::RealExample => build_real_example(n, prec),
                        _ => build_complex_example(n, prec),
                    }
                    .map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
                    meta.insert(String::from("n"), n.to_string());
                    (SystemFile::from_system(&sys, HypothesesName::Theorem1, meta), sys.validation().cloned())
                }
                Family::Quadrant => {
                    let text = params.clone().unwrap_or_else(|| String::from("3,1,9,1/2,1/16"));
                    let vals = text
                        .split(',')
                        .map(|s| parse_exact_ratio(s).map(|r| FieldElement::real_ratio(&r, prec)))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
                    let [a, b, d, u, v] = vals.as_slice() else {
                        return Err(fail(EXIT_USAGE, "--params needs five values a,b,d,u,v"));
                    };
                    let (sys, rep) = build_quadrant_example(a, b, d, u, v, &opts).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
                    meta.insert(String::from("params"), text);
                    (SystemFile::from_system(&sys, HypothesesName::Quadrant, meta), Some(rep))
                }
                Family::Affine1d => {
                    let sys = build_affine_1d(prec).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
                    let seed = vec![FieldElement::real_i64(0, prec)];
                    (SystemFile::from_affine(&sys, &seed, meta), sys.validation().cloned())
                }
            };
            let (mut file, rep) = file;
            let accepted = rep.as_ref().is_some_and(|r| r.accepted);
            file.config = Some(cfg.clone());
            emit(out, &serde_json::to_value(&file).expect("json"), &mut stdout)?;
            if !accepted {
                if let Some(r) = &rep {
                    eprint!("{}", report::render(&report::validation(r)));
                }
                EXIT_CHECK
            } else {
                EXIT_OK
            }
        }
        Command::Validate { system, out } => {
            let sys = load(system, &mut cfg)?;
            let rep = sys.report().ok_or_else(|| fail(EXIT_MALFORMED, "no validation report"))?;
            let v = with_config(report::validation(rep), &cfg);
            emit(out, &v, &mut stdout)?;
            if rep.accepted {
                EXIT_OK
            } else {
                EXIT_CHECK
            }
        }
        Command::Steer { system, target, out, .. } => {
            let sys = load(system, &mut cfg)?;
            let prec = cfg.precision();
            let y = parse_vector(target, sys.field(), prec).map_err(|e| fail(EXIT_USAGE, e))?;
            if y.len() != sys.n() {
                return Err(fail(EXIT_USAGE, format!("target has {} entries, system dimension is {}", y.len(), sys.n())));
            }
            if !sys.accepted() {
                return Err(fail(EXIT_CHECK, "system is not accepted under its hypotheses"));
            }
            let eps = cfg.eps();
            let budget = cfg.search_budget();
            let result = match &sys {
                Loaded::Linear(s) => synthesize_word(s, &y, &eps, &budget).map(|r| report::steering(&r)),
                Loaded::Affine(a, seed) => {
                    let p: Vec<_> = seed.iter().map(|x| x.to_scalar_at(prec).in_field(sys.field())).collect();
                    match steer_affine(a, &p, &y, &eps, &budget, None) {
                        Ok(r) if r.error < eps => Ok(report::affine_steering(&r, &y)),
                        Ok(r) => Err(Error::NotFound(format!("direct error {} exceeds eps", r.error.to_string_digits(6)))),
                        Err(e) => Err(e),
                    }
                }
                Loaded::Quadrant(..) => return Err(fail(EXIT_USAGE, "quadrant systems are not steerable")),
            };
            match result {
                Ok(v) => {
                    emit(out, &with_config(v, &cfg), &mut stdout)?;
                    EXIT_OK
                }
                Err(e @ (Error::NotFound(_) | Error::PhiDivergence)) => {
                    let v = with_config(json!({ "target": crate::schema::values(&y), "error": e.to_string() }), &cfg);
                    emit(out, &v, &mut stdout)?;
                    EXIT_NOT_FOUND
                }
                Err(e) => return Err(fail(EXIT_CHECK, e.to_string())),
            }
        }
        Command::Verify { system, suite, out, svg, points, .. } => {
            let sys = load(system, &mut cfg)?;
            let res = match suite {
                Suite::Lemmas => suites::lemmas(&sys, &cfg),
                Suite::Density => suites::density(&sys, &cfg, svg.is_some()),
                Suite::Coverage => match points {
                    Some(p) => {
                        let f = fs::File::create(p).map_err(|e| fail(EXIT_IO, format!("{}: {e}", p.display())))?;
                        let mut w = std::io::BufWriter::new(f);
                        suites::coverage(&sys, &cfg, svg.is_some(), Some(&mut w))
                    }
                    None => suites::coverage(&sys, &cfg, svg.is_some(), None),
                },
            }
            .map_err(|e| fail(EXIT_USAGE, e))?;
            let mut v = res.report;
            v["suite"] = json!(suite.to_possible_value().expect("named").get_name());
            v["passed"] = json!(res.passed);
            emit(out, &with_config(v, &cfg), &mut stdout)?;
            if let (Some(path), Some(text)) = (svg, &res.svg) {
                write(path, text)?;
            }
            if res.passed {
                EXIT_OK
            } else {
                EXIT_CHECK
            }
        }
    };
    Ok((code, stdout))
}

/// Entry point: parses `args`, runs, prints, and returns the exit code.
pub fn main_with(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let env = std::env::var(PRECISION_ENV).ok();
    match run(&cli, env.as_deref()) {
        Ok((code, out)) => {
            print!("{out}");
            code
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
