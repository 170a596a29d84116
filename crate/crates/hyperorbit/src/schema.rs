//! JSON file formats. Numbers are always strings: exact rationals (`"-1/2"`,
//! `"0.0625"`) for system entries, round-tripping decimals for computed
//! values.

use std::collections::BTreeMap;

use hyperorbit_core::field::{parse_exact_ratio, ExactPhase, Phase};
use hyperorbit_core::matrix::{Diagonal, LowerTriangular};
use hyperorbit_core::systems::{build_quadrant_example, AffineSystem, SemigroupSystem, ValidationOptions, ValidationReport};
use hyperorbit_core::{ExtReal, Field, FieldElement, Precision, Scalar};
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldName {
    Real,
    Complex,
}

impl From<FieldName> for Field {
    fn from(f: FieldName) -> Field {
        match f {
            FieldName::Real => Field::Real,
            FieldName::Complex => Field::Complex,
        }
    }
}

impl From<Field> for FieldName {
    fn from(f: Field) -> FieldName {
        match f {
            Field::Real => FieldName::Real,
            Field::Complex => FieldName::Complex,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    #[default]
    Radians,
    /// Argument is a multiple of pi.
    Pi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Polar {
    pub modulus: String,
    pub argument: String,
    #[serde(default)]
    pub unit: AngleUnit,
}

/// A system entry: a real literal, or modulus and argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Element {
    Real(String),
    Polar(Polar),
}

impl Element {
    pub fn from_field(x: &FieldElement) -> Element {
        match x.field() {
            Field::Real => Element::Real(match (x.exact_modulus(), x.sign()) {
                (Some(m), Some(s)) => {
                    let v = if s < 0 { -m.clone() } else { m.clone() };
                    v.to_string()
                }
                _ => x.to_scalar().re().to_decimal_string(),
            }),
            Field::Complex => {
                // exact angle 0 or pi: a plain real literal
                if let (Some(m), Some(ExactPhase::PiMultiple(q))) = (x.exact_modulus(), x.exact_phase()) {
                    if q.is_integer() {
                        let v = if q.is_zero() { m.clone() } else { -m.clone() };
                        return Element::Real(v.to_string());
                    }
                }
                let modulus = match x.exact_modulus() {
                    Some(m) => m.to_string(),
                    None => x.modulus().to_decimal_string(),
                };
                let (argument, unit) = match (x.exact_phase(), x.phase()) {
                    (Some(ExactPhase::Radians(r)), _) => (r.to_string(), AngleUnit::Radians),
                    (Some(ExactPhase::PiMultiple(q)), _) => (q.to_string(), AngleUnit::Pi),
                    (Some(ExactPhase::Sign(s)), _) => (String::from(if *s < 0 { "1" } else { "0" }), AngleUnit::Pi),
                    (None, Phase::Angle(a)) => (a.to_decimal_string(), AngleUnit::Radians),
                    (None, Phase::Sign(s)) => (String::from(if *s < 0 { "1" } else { "0" }), AngleUnit::Pi),
                };
                Element::Polar(Polar { modulus, argument, unit })
            }
        }
    }

    pub fn to_field(&self, field: Field, prec: Precision) -> Result<FieldElement, String> {
        let parse = |s: &str| parse_exact_ratio(s).map_err(|e| e.to_string());
        let x = match self {
            Element::Real(s) => FieldElement::real_ratio(&parse(s)?, prec),
            Element::Polar(p) => {
                if field == Field::Real {
                    return Err(format!("polar entry {:?} in a real system", p.modulus));
                }
                let m = parse(&p.modulus)?;
                if m < BigRational::from_integer(0.into()) {
                    return Err(format!("negative modulus {:?}", p.modulus));
                }
                let arg = parse(&p.argument)?;
                match p.unit {
                    AngleUnit::Radians => FieldElement::complex_exact_radians(&m, &arg, prec),
                    AngleUnit::Pi => FieldElement::complex_exact_pi(&m, &arg, prec),
                }
            }
        };
        Ok(x.in_field(field))
    }
}

/// A computed value: a decimal string, or `{re, im}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Real(String),
    Complex { re: String, im: String },
}

impl Value {
    pub fn from_scalar(x: &Scalar) -> Value {
        match x {
            Scalar::Real(v) => Value::Real(v.to_decimal_string()),
            Scalar::Complex(re, im) => Value::Complex { re: re.to_decimal_string(), im: im.to_decimal_string() },
        }
    }

    pub fn to_scalar(&self, prec: Precision) -> Result<Scalar, String> {
        let p = |s: &str| ExtReal::parse(s, prec).map_err(|e| e.to_string());
        Ok(match self {
            Value::Real(s) => Scalar::Real(p(s)?),
            Value::Complex { re, im } => Scalar::Complex(p(re)?, p(im)?),
        })
    }
}

pub fn values(xs: &[Scalar]) -> Vec<Value> {
    xs.iter().map(Value::from_scalar).collect()
}

pub fn decimal(x: &ExtReal) -> String {
    x.to_decimal_string()
}

/// Which theorem's hypotheses a system file is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesesName {
    Theorem1,
    Theorem2,
    Quadrant,
}

/// System file. `v` is present exactly for affine (Theorem 2) systems.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub field: FieldName,
    pub n: usize,
    pub precision_digits: u32,
    pub hypotheses: HypothesesName,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Element>>,
    #[serde(rename = "B")]
    pub b: Vec<Element>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<Element>>,
    pub seed: Vec<Element>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    /// Effective run configuration of the command that wrote the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
}

/// A system read from file, validated under its hypotheses.
#[derive(Clone, Debug)]
pub enum Loaded {
    Linear(SemigroupSystem),
    Affine(AffineSystem, Vec<FieldElement>),
    Quadrant(SemigroupSystem, ValidationReport),
}

impl Loaded {
    pub fn report(&self) -> Option<&ValidationReport> {
        match self {
            Loaded::Linear(s) => s.validation(),
            Loaded::Affine(s, _) => s.validation(),
            Loaded::Quadrant(_, r) => Some(r),
        }
    }

    pub fn accepted(&self) -> bool {
        self.report().is_some_and(|r| r.accepted)
    }

    pub fn n(&self) -> usize {
        match self {
            Loaded::Linear(s) | Loaded::Quadrant(s, _) => s.n(),
            Loaded::Affine(s, _) => s.n(),
        }
    }

    pub fn field(&self) -> Field {
        match self {
            Loaded::Linear(s) | Loaded::Quadrant(s, _) => s.field(),
            Loaded::Affine(s, _) => s.field(),
        }
    }

    /// The linear system whose orbit is enumerated (affine systems have none).
    pub fn semigroup(&self) -> Option<&SemigroupSystem> {
        match self {
            Loaded::Linear(s) | Loaded::Quadrant(s, _) => Some(s),
            Loaded::Affine(..) => None,
        }
    }
}

impl SystemFile {
    pub fn from_system(sys: &SemigroupSystem, hypotheses: HypothesesName, metadata: BTreeMap<String, String>) -> Self {
        let n = sys.n();
        SystemFile {
            field: sys.field().into(),
            n,
            precision_digits: sys.precision().digits(),
            hypotheses,
            a: (0..n).map(|i| (0..n).map(|j| Element::from_field(sys.a().entry(i, j))).collect()).collect(),
            b: sys.b().entries().iter().map(Element::from_field).collect(),
            v: None,
            seed: sys.seed().iter().map(Element::from_field).collect(),
            metadata,
            config: None,
        }
    }

    pub fn from_affine(sys: &AffineSystem, seed: &[FieldElement], metadata: BTreeMap<String, String>) -> Self {
        let n = sys.n();
        SystemFile {
            field: sys.field().into(),
            n,
            precision_digits: sys.precision().digits(),
            hypotheses: HypothesesName::Theorem2,
            a: (0..n).map(|i| (0..n).map(|j| Element::from_field(sys.a().entry(i, j))).collect()).collect(),
            b: sys.b().entries().iter().map(Element::from_field).collect(),
            v: Some(sys.v().iter().map(Element::from_field).collect()),
            seed: seed.iter().map(Element::from_field).collect(),
            metadata,
            config: None,
        }
    }

    /// Builds and validates the system at `prec`. Structural problems
    /// (shapes, literals, non-triangular `A`) are errors; failed hypotheses
    /// are not, they show up in the report.
    pub fn load(&self, prec: Precision, opts: &ValidationOptions) -> Result<Loaded, String> {
        let n = self.n;
        if n == 0 {
            return Err(String::from("n must be at least 1"));
        }
        if self.a.len() != n || self.a.iter().any(|r| r.len() != n) {
            return Err(format!("A must be {n}x{n}"));
        }
        for (name, len) in [("B", self.b.len()), ("seed", self.seed.len())] {
            if len != n {
                return Err(format!("{name} must have {n} entries"));
            }
        }
        let field: Field = self.field.into();
        let conv = |e: &Element| e.to_field(field, prec);
        let rows = self.a.iter().map(|r| r.iter().map(conv).collect::<Result<Vec<_>, _>>()).collect::<Result<Vec<_>, _>>()?;
        let b = self.b.iter().map(conv).collect::<Result<Vec<_>, _>>()?;
        let seed = self.seed.iter().map(conv).collect::<Result<Vec<_>, _>>()?;
        let a = LowerTriangular::new(rows).map_err(|e| e.to_string())?;
        let b = Diagonal::new(b).map_err(|e| e.to_string())?;
        let opts = opts.clone();
        match (self.hypotheses, &self.v) {
            (HypothesesName::Theorem2, Some(v)) => {
                if v.len() != n {
                    return Err(format!("v must have {n} entries"));
                }
                let v = v.iter().map(conv).collect::<Result<Vec<_>, _>>()?;
                let sys = AffineSystem::new(a, v, b).and_then(|s| s.validated(&opts)).map_err(|e| e.to_string())?;
                Ok(Loaded::Affine(sys, seed))
            }
            (HypothesesName::Theorem2, None) => Err(String::from("theorem2 systems need v")),
            (_, Some(_)) => Err(String::from("v is only allowed with theorem2")),
            (HypothesesName::Theorem1, None) => {
                let sys = SemigroupSystem::new(a, b)
                    .and_then(|s| s.with_seed(seed))
                    .and_then(|s| s.validated(&opts))
                    .map_err(|e| e.to_string())?;
                Ok(Loaded::Linear(sys))
            }
            (HypothesesName::Quadrant, None) => {
                if n != 2 || field != Field::Real {
                    return Err(String::from("quadrant systems are real 2x2"));
                }
                let (sys, report) = build_quadrant_example(a.entry(0, 0), a.entry(1, 0), a.entry(1, 1), b.entry(0), b.entry(1), &opts)
                    .map_err(|e| e.to_string())?;
                let sys = sys.with_seed(seed).map_err(|e| e.to_string())?;
                Ok(Loaded::Quadrant(sys, report))
            }
        }
    }
}

/// Parses a vector given as comma-separated entries; complex entries are
/// written `re:im`.
pub fn parse_vector(s: &str, field: Field, prec: Precision) -> Result<Vec<Scalar>, String> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            let p = |x: &str| ExtReal::parse(x, prec).map_err(|e| e.to_string());
            match t.split_once(':') {
                Some((re, im)) if field == Field::Complex => Ok(Scalar::Complex(p(re)?, p(im)?)),
                Some(_) => Err(format!("complex entry {t:?} for a real system")),
                None => Ok(Scalar::Real(p(t)?).in_field(field)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use hyperorbit_core::systems::{build_complex_example, build_real_example};

    #[test]
    fn system_round_trip() {
        let p = Precision::default();
        for sys in [build_real_example(3, p).unwrap(), build_complex_example(2, p).unwrap()] {
            let file = SystemFile::from_system(&sys, HypothesesName::Theorem1, BTreeMap::new());
            let text = serde_json::to_string(&file).unwrap();
            let back: SystemFile = serde_json::from_str(&text).unwrap();
            let Loaded::Linear(again) = back.load(p, &ValidationOptions::for_precision(p)).unwrap() else { panic!() };
            assert!(again.is_accepted());
            for i in 0..sys.n() {
                assert_eq!(sys.b().entry(i), again.b().entry(i));
                for j in 0..sys.n() {
                    assert_eq!(&sys.a().entry(i, j).in_field(again.field()), again.a().entry(i, j));
                }
            }
            assert_eq!(serde_json::to_string(&SystemFile::from_system(&again, HypothesesName::Theorem1, BTreeMap::new())).unwrap(), text);
        }
    }

    #[test]
    fn elements() {
        let p = Precision::default();
        let e: Element = serde_json::from_str(r#"{"modulus": "1/2", "argument": "1"}"#).unwrap();
        let x = e.to_field(Field::Complex, p).unwrap();
        assert_eq!(x.exact_phase(), Some(&ExactPhase::Radians(BigRational::from_integer(1.into()))));
        assert!(serde_json::from_str::<Element>(r#"{"modulus": "1", "argument": "1", "extra": 1}"#).is_err());
        assert!(Element::Real(String::from("1/0")).to_field(Field::Real, p).is_err());
        let v = parse_vector("0.5, -1e-3", Field::Real, p).unwrap();
        assert_eq!(v[1].re().to_f64(), -1e-3);
        let v = parse_vector("1:2", Field::Complex, p).unwrap();
        assert_eq!(v[0].im().to_f64(), 2.0);
        assert!(parse_vector("1:2", Field::Real, p).is_err());
        assert!(parse_vector("x", Field::Real, p).is_err());
    }
}
