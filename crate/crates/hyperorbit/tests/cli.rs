use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use serde_json::Value;

fn dir(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperorbit")).args(args).env_remove("HYPERORBIT_PRECISION").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn construct(d: &PathBuf, family: &str, n: Option<&str>) -> String {
    let out = d.join(format!("{family}{}.json", n.unwrap_or(""))).display().to_string();
    let mut args = vec!["construct", "--family", family, "--out", &out];
    if let Some(n) = n {
        args.extend(["--n", n]);
    }
    assert_eq!(code(&run(&args)), 0);
    out
}

#[test]
fn construct_and_validate() {
    let d = dir("construct");
    let r3 = construct(&d, "real-example", Some("3"));
    let file: Value = serde_json::from_str(&fs::read_to_string(&r3).unwrap()).unwrap();
    assert_eq!(file["A"].as_array().unwrap().len(), 3);
    assert_eq!(file["A"][2][2], "27");
    assert_eq!(file["B"][0], "-1/2");
    assert_eq!(code(&run(&["construct", "--family", "real-example", "--n", "0"])), 64);
    construct(&d, "quadrant", None);
    construct(&d, "complex-example", Some("2"));

    let r4 = construct(&d, "real-example", Some("4"));
    let o = run(&["validate", &r4]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["accepted"], true);

    let tampered = d.join("tampered.json");
    fs::write(&tampered, fs::read_to_string(&r4).unwrap().replacen("\"-1/2\"", "\"2\"", 1)).unwrap();
    let o = run(&["validate", tampered.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(json(&o)["first_failure"], "|B1| < 1");

    let truncated = d.join("truncated.json");
    fs::write(&truncated, &fs::read_to_string(&r4).unwrap()[..80]).unwrap();
    assert_eq!(code(&run(&["validate", truncated.to_str().unwrap()])), 65);

    let extra = d.join("extra.json");
    fs::write(&extra, fs::read_to_string(&r4).unwrap().replacen('{', "{\"colour\": \"red\",", 1)).unwrap();
    assert_eq!(code(&run(&["validate", extra.to_str().unwrap()])), 65);
    assert_eq!(code(&run(&["validate", d.join("missing.json").to_str().unwrap()])), 66);
}

/// `(-1/2)^k 3^l` for the word `(k, l)`, exactly.
fn one_dim_value(word: &Value) -> BigRational {
    let mut x = BigRational::from_integer(BigInt::from(1));
    for st in word.as_array().unwrap().iter().rev() {
        let (k, l) = (st[0].as_u64().unwrap(), st[1].as_u64().unwrap());
        x *= BigRational::from_integer(BigInt::from(3).pow(l as u32));
        x *= BigRational::new(BigInt::from(if k % 2 == 0 { 1 } else { -1 }), BigInt::from(1) << k as usize);
    }
    x
}

#[test]
fn steer() {
    let d = dir("steer");
    let r1 = construct(&d, "real-example", Some("1"));
    let o = run(&["steer", &r1, "--target", "5", "--eps", "1e-3"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let diff = (one_dim_value(&v["word"]) - BigRational::from_integer(BigInt::from(5))).abs();
    assert!(diff.to_f64().unwrap() < 1e-3);
    assert_eq!(v["config"]["eps"], "1e-3");

    assert_eq!(code(&run(&["steer", &r1, "--target", "5", "--eps", "1e-300", "--budget", "100"])), 3);
    assert_eq!(code(&run(&["steer", &r1, "--target", "5,1"])), 64);
    assert_eq!(code(&run(&["steer", &r1, "--target", "5", "--eps", "-1"])), 64);
    assert_eq!(code(&run(&["steer", &r1, "--bogus"])), 64);

    let aff = construct(&d, "affine-1d", None);
    let o = run(&["steer", &aff, "--target", "-3.25", "--eps", "1e-2"]);
    assert_eq!(code(&o), 0);
    let err: f64 = json(&o)["error"].as_str().unwrap().parse().unwrap();
    assert!(err < 1e-2);
}

#[test]
fn verify_suites() {
    let d = dir("verify");
    let r3 = construct(&d, "real-example", Some("3"));
    let o = run(&["verify", &r3, "--suite", "lemmas"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["passed"], true);

    let r2 = construct(&d, "real-example", Some("2"));
    let cfg = d.join("density.json");
    fs::write(&cfg, r#"{"eps": "0.05"}"#).unwrap();
    let svg = d.join("density.svg");
    let o = run(&["--config", cfg.to_str().unwrap(), "verify", &r2, "--suite", "density", "--eps", "0.5", "--svg", svg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["successes"], 441);
    // config file wins over the flag
    assert_eq!(v["config"]["eps"], "0.05");
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let q = construct(&d, "quadrant", None);
    let csv = d.join("points.csv");
    let cfg = d.join("small.json");
    fs::write(&cfg, r#"{"coverage": {"k_max": 6, "l_max": 6, "min_fraction": "0"}}"#).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "verify", &q, "--suite", "coverage", "--points", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["positivity"]["points_with_negative_coordinate"], 0);
    assert_eq!(v["words"], "2401");
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 2402);

    // the 1-D system has negative orbit points, so expecting positivity fails
    let r1 = construct(&d, "real-example", Some("1"));
    fs::write(&cfg, r#"{"coverage": {"k_max": 3, "l_max": 3, "expect_positive": true}}"#).unwrap();
    assert_eq!(code(&run(&["--config", cfg.to_str().unwrap(), "verify", &r1, "--suite", "coverage"])), 2);
}

#[test]
fn environment_and_determinism() {
    let d = dir("env");
    let o = Command::new(env!("CARGO_BIN_EXE_hyperorbit"))
        .args(["construct", "--family", "real-example", "--n", "2"])
        .env("HYPERORBIT_PRECISION", "40")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["precision_digits"], 40);
    let o = Command::new(env!("CARGO_BIN_EXE_hyperorbit"))
        .args(["construct", "--family", "real-example", "--n", "2", "--precision", "60"])
        .env("HYPERORBIT_PRECISION", "40")
        .output()
        .unwrap();
    assert_eq!(json(&o)["precision_digits"], 60);
    let o = Command::new(env!("CARGO_BIN_EXE_hyperorbit"))
        .args(["construct", "--family", "real-example", "--n", "2"])
        .env("HYPERORBIT_PRECISION", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 64);

    let r2 = construct(&d, "complex-example", Some("2"));
    let a = run(&["steer", &r2, "--target", "0.3:0.1,-0.2:0.4", "--eps", "0.1"]);
    let b = run(&["steer", &r2, "--target", "0.3:0.1,-0.2:0.4", "--eps", "0.1"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(run(&["validate", &r2]).stdout, run(&["validate", &r2]).stdout);
}
