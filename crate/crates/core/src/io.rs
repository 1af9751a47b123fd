//! JSON schemas for trees, weights, measures and model specifications, and a
//! deterministic report writer.

use std::io;

use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::classify::{Entry, Witness};
use crate::family::{FamilyKind, Kappa, TreeFamily};
use crate::measure::{AtomicMeasure, MeasureError};
use crate::models::{ChexModelSpec, Flavor, Model, SubnormalModelSpec};
use crate::tree::{DirectedTree, TreeError};
use crate::weights::{SubtreeRule, Tail, TailRule, WeightSystem};

#[derive(Debug, Error)]
pub enum InputError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

impl From<serde_json::Error> for InputError {
    fn from(e: serde_json::Error) -> Self {
        match e.classify() {
            serde_json::error::Category::Data => InputError::Schema(e.to_string()),
            _ => InputError::Parse { line: e.line(), column: e.column(), message: e.to_string() },
        }
    }
}

fn schema(msg: impl Into<String>) -> InputError {
    InputError::Schema(msg.into())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScalarJson {
    Real(f64),
    Complex([f64; 2]),
}

impl ScalarJson {
    pub fn value(&self) -> Complex64 {
        match *self {
            ScalarJson::Real(x) => Complex64::new(x, 0.0),
            ScalarJson::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum KappaJson {
    Finite(usize),
    Named(String),
}

impl KappaJson {
    pub fn value(&self) -> Result<Kappa, InputError> {
        match self {
            KappaJson::Finite(k) => Ok(Kappa::Finite(*k)),
            KappaJson::Named(s) if matches!(s.as_str(), "inf" | "infinity" | "∞") => Ok(Kappa::Infinite),
            KappaJson::Named(s) => Err(schema(format!("kappa must be an integer or \"inf\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureJson {
    pub atoms: Vec<[f64; 2]>,
}

impl MeasureJson {
    pub fn value(&self) -> Result<AtomicMeasure, InputError> {
        Ok(AtomicMeasure::new(self.atoms.iter().map(|a| (a[0], a[1])).collect())?)
    }
}

fn measures(list: &[MeasureJson]) -> Result<Vec<AtomicMeasure>, InputError> {
    list.iter().map(MeasureJson::value).collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TreeJson {
    Explicit {
        vertices: Vec<String>,
        edges: Vec<[String; 2]>,
        #[serde(default)]
        open_top: bool,
        #[serde(default)]
        incomplete: Vec<String>,
    },
    Family {
        family: String,
        #[serde(default)]
        eta: Option<usize>,
        #[serde(default)]
        kappa: Option<KappaJson>,
        #[serde(default)]
        depth: Option<usize>,
        #[serde(default)]
        single_stem: bool,
        #[serde(default)]
        side_depth: Option<usize>,
    },
}

impl TreeJson {
    /// Builds the tree; families use `depth` unless the input fixes one.
    pub fn build(&self, depth: usize) -> Result<DirectedTree, InputError> {
        match self {
            TreeJson::Explicit { vertices, edges, open_top, incomplete } => {
                let edges: Vec<(&str, &str)> = edges.iter().map(|[a, b]| (a.as_str(), b.as_str())).collect();
                let names: Vec<&str> = vertices.iter().map(String::as_str).collect();
                let mut tree = DirectedTree::validate(&names, &edges)?;
                if *open_top {
                    tree = tree.open_above();
                }
                Ok(tree.mark_incomplete(incomplete)?)
            }
            TreeJson::Family { family, eta, kappa, depth: d, single_stem, side_depth } => {
                let kind = match family.as_str() {
                    "z_plus" => FamilyKind::ZPlus,
                    "z" => FamilyKind::Z,
                    "z_minus" => FamilyKind::ZMinus,
                    "t" | "T_eta_kappa" => {
                        let eta = eta.ok_or_else(|| schema("family t needs eta"))?;
                        let kappa = kappa.as_ref().ok_or_else(|| schema("family t needs kappa"))?.value()?;
                        FamilyKind::t_eta_kappa(eta, kappa).map_err(|e| schema(e.to_string()))?
                    }
                    "binary" => FamilyKind::Binary { single_stem: *single_stem, side_depth: *side_depth },
                    other => return Err(schema(format!("unknown family {other:?}"))),
                };
                Ok(TreeFamily::new(kind, d.unwrap_or(depth)).materialize())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailJson {
    Constant { value: ScalarJson },
    Power { q: f64 },
    Factorial,
    PowerLaw { s: f64 },
    Affine { c: f64, #[serde(default)] breaks: Vec<usize> },
    MomentRatio { atoms: Vec<[f64; 2]> },
    AlternatingRatio { atoms: Vec<[f64; 2]> },
    InverseMomentRatio { atoms: Vec<[f64; 2]> },
}

impl TailJson {
    pub fn value(&self) -> Result<Tail, InputError> {
        let m = |atoms: &Vec<[f64; 2]>| MeasureJson { atoms: atoms.clone() }.value();
        Ok(match self {
            TailJson::Constant { value } => Tail::Constant(value.value()),
            TailJson::Power { q } => Tail::Power(*q),
            TailJson::Factorial => Tail::Factorial,
            TailJson::PowerLaw { s } => Tail::PowerLaw(*s),
            TailJson::Affine { c, breaks } => Tail::Affine { c: *c, breaks: breaks.clone() },
            TailJson::MomentRatio { atoms } => Tail::MomentRatio(m(atoms)?),
            TailJson::AlternatingRatio { atoms } => Tail::AlternatingRatio(m(atoms)?),
            TailJson::InverseMomentRatio { atoms } => Tail::InverseMomentRatio(m(atoms)?),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubtreeJson {
    pub vertex: String,
    pub value: ScalarJson,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailRuleJson {
    pub branch: usize,
    #[serde(default)]
    pub head: Vec<ScalarJson>,
    pub tail: TailJson,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsJson {
    #[serde(default)]
    pub base: std::collections::BTreeMap<String, ScalarJson>,
    #[serde(default)]
    pub default: Option<ScalarJson>,
    #[serde(default)]
    pub subtrees: Vec<SubtreeJson>,
    #[serde(default)]
    pub tails: Vec<TailRuleJson>,
}

impl WeightsJson {
    pub fn value(&self) -> Result<WeightSystem, InputError> {
        Ok(WeightSystem {
            base: self.base.iter().map(|(k, v)| (k.clone(), v.value())).collect(),
            default: self.default.as_ref().map(ScalarJson::value),
            subtrees: self
                .subtrees
                .iter()
                .map(|r| SubtreeRule { vertex: r.vertex.clone(), value: r.value.value() })
                .collect(),
            tails: self
                .tails
                .iter()
                .map(|r| {
                    Ok(TailRule {
                        branch: r.branch,
                        head: r.head.iter().map(ScalarJson::value).collect(),
                        tail: r.tail.value()?,
                    })
                })
                .collect::<Result<_, InputError>>()?,
        })
    }
}

/// A shift together with the optional data the checks may need.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftInput {
    pub tree: TreeJson,
    pub weights: WeightsJson,
    /// Candidate branch measures for the subnormal model check.
    #[serde(default)]
    pub measures: Option<Vec<MeasureJson>>,
    /// Candidate representing measures for the completely hyperexpansive check.
    #[serde(default)]
    pub taus: Option<Vec<MeasureJson>>,
    /// Vertices whose powers are reported; all when absent.
    #[serde(default)]
    pub vertices: Option<Vec<String>>,
}

impl ShiftInput {
    pub fn measures(&self) -> Result<Option<Vec<AtomicMeasure>>, InputError> {
        self.measures.as_deref().map(measures).transpose()
    }

    pub fn taus(&self) -> Result<Option<Vec<AtomicMeasure>>, InputError> {
        self.taus.as_deref().map(measures).transpose()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubnormalSpecJson {
    pub eta: usize,
    pub kappa: KappaJson,
    pub measures: Vec<MeasureJson>,
    #[serde(default)]
    pub lambda1: Option<Vec<f64>>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub extremal: bool,
}

impl SubnormalSpecJson {
    pub fn value(&self) -> Result<SubnormalModelSpec, InputError> {
        Ok(SubnormalModelSpec {
            eta: self.eta,
            kappa: self.kappa.value()?,
            measures: measures(&self.measures)?,
            lambda1: self.lambda1.clone(),
            theta: self.theta,
            extremal: self.extremal,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChexSpecJson {
    pub eta: usize,
    pub kappa: usize,
    pub measures: Vec<MeasureJson>,
    #[serde(default)]
    pub t: Option<Vec<f64>>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub extremal: bool,
}

impl ChexSpecJson {
    pub fn value(&self) -> Result<ChexModelSpec, InputError> {
        Ok(ChexModelSpec {
            eta: self.eta,
            kappa: self.kappa,
            measures: measures(&self.measures)?,
            t: self.t.clone(),
            theta: self.theta,
            extremal: self.extremal,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionJson {
    pub measure: MeasureJson,
    /// Number of steps; `"inf"` for every number.
    pub k: KappaJson,
    pub flavor: String,
}

impl ExtensionJson {
    pub fn value(&self) -> Result<(AtomicMeasure, Option<usize>, Flavor), InputError> {
        let k = match self.k.value()? {
            Kappa::Finite(k) => Some(k),
            Kappa::Infinite => None,
        };
        let flavor = match self.flavor.as_str() {
            "subnormal" => Flavor::Subnormal,
            "chex" => Flavor::Chex,
            other => return Err(schema(format!("unknown flavor {other:?}"))),
        };
        Ok((self.measure.value()?, k, flavor))
    }
}

pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, InputError> {
    Ok(serde_json::from_str(text)?)
}

/// JSON number, or a string for values JSON cannot carry.
pub fn num(x: f64) -> Value {
    match serde_json::Number::from_f64(x) {
        Some(n) => Value::Number(n),
        None if x.is_nan() => Value::String("nan".into()),
        None if x > 0.0 => Value::String("inf".into()),
        None => Value::String("-inf".into()),
    }
}

pub fn scalar(c: Complex64) -> Value {
    if c.im == 0.0 {
        num(c.re)
    } else {
        json!([num(c.re), num(c.im)])
    }
}

pub fn kappa(k: Kappa) -> Value {
    match k {
        Kappa::Finite(k) => json!(k),
        Kappa::Infinite => json!("inf"),
    }
}

fn atoms(m: &AtomicMeasure) -> Value {
    Value::Array(m.atoms().iter().map(|&(x, w)| json!([num(x), num(w)])).collect())
}

pub fn measure(m: &AtomicMeasure) -> Value {
    json!({ "atoms": atoms(m) })
}

pub fn tail(t: &Tail) -> Value {
    match t {
        Tail::Constant(c) => json!({"kind": "constant", "value": scalar(*c)}),
        Tail::Power(q) => json!({"kind": "power", "q": num(*q)}),
        Tail::Factorial => json!({"kind": "factorial"}),
        Tail::PowerLaw(s) => json!({"kind": "power_law", "s": num(*s)}),
        Tail::Affine { c, breaks } => json!({"kind": "affine", "c": num(*c), "breaks": breaks}),
        Tail::MomentRatio(m) => json!({"kind": "moment_ratio", "atoms": atoms(m)}),
        Tail::AlternatingRatio(m) => json!({"kind": "alternating_ratio", "atoms": atoms(m)}),
        Tail::InverseMomentRatio(m) => json!({"kind": "inverse_moment_ratio", "atoms": atoms(m)}),
    }
}

/// Weight system in the input schema.
pub fn weights(w: &WeightSystem) -> Value {
    let mut out = Map::new();
    out.insert("base".into(), Value::Object(w.base.iter().map(|(k, v)| (k.clone(), scalar(*v))).collect()));
    if let Some(d) = w.default {
        out.insert("default".into(), scalar(d));
    }
    out.insert(
        "subtrees".into(),
        w.subtrees.iter().map(|r| json!({"vertex": r.vertex, "value": scalar(r.value)})).collect(),
    );
    out.insert(
        "tails".into(),
        w.tails
            .iter()
            .map(|r| {
                json!({
                    "branch": r.branch,
                    "head": r.head.iter().map(|c| scalar(*c)).collect::<Vec<_>>(),
                    "tail": tail(&r.tail),
                })
            })
            .collect(),
    );
    Value::Object(out)
}

/// Family tree in the input schema, without a depth.
pub fn family(kind: &FamilyKind) -> Value {
    match kind {
        FamilyKind::ZPlus => json!({"kind": "family", "family": "z_plus"}),
        FamilyKind::Z => json!({"kind": "family", "family": "z"}),
        FamilyKind::ZMinus => json!({"kind": "family", "family": "z_minus"}),
        FamilyKind::TEtaKappa { eta, kappa: k } => {
            json!({"kind": "family", "family": "t", "eta": eta, "kappa": kappa(*k)})
        }
        FamilyKind::Binary { single_stem, side_depth } => json!({
            "kind": "family", "family": "binary", "single_stem": single_stem, "side_depth": side_depth,
        }),
        FamilyKind::Custom(_) => json!({"kind": "family", "family": "custom"}),
    }
}

pub fn model(m: &Model) -> Value {
    json!({
        "tree": family(&m.kind),
        "weights": weights(&m.weights),
        "norm": num(m.norm),
        "first_level": m.first_level.iter().map(|&x| num(x)).collect::<Vec<_>>(),
        "trunk": m.trunk.iter().map(|&x| num(x)).collect::<Vec<_>>(),
        "theta": m.theta.map(num),
        "theta_range": m.theta_range.map(|(lo, hi)| json!([num(lo), num(hi)])),
    })
}

pub fn witness(w: &Witness) -> Value {
    json!({
        "vertex": w.vertex,
        "partner": w.partner,
        "relation": w.relation,
        "lhs": num(w.lhs),
        "rhs": num(w.rhs),
    })
}

pub fn entry(e: &Entry) -> Value {
    let mut out = Map::new();
    out.insert("predicate".into(), json!(e.predicate));
    out.insert("verdict".into(), json!(e.verdict.as_str()));
    out.insert("witness".into(), e.witness.as_ref().map_or(Value::Null, witness));
    out.insert("exact".into(), json!(e.exact));
    out.insert("depth".into(), json!(e.depth));
    if let Some(x) = e.extremal {
        out.insert("extremal".into(), json!(x));
    }
    if let Some(c) = &e.chain {
        out.insert("chain".into(), json!(c));
    }
    if !e.notes.is_empty() {
        out.insert("notes".into(), json!(e.notes));
    }
    Value::Object(out)
}

/// Writes floats as `{:.16e}` (17 significant digits), everything else as compact JSON.
struct FixedDigits;

impl serde_json::ser::Formatter for FixedDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes a report; identical values give identical bytes.
pub fn to_string(v: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits);
    serde::Serialize::serialize(v, &mut ser).expect("writing to memory cannot fail");
    String::from_utf8(out).expect("JSON output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_digits() {
        let s = to_string(&json!({"x": num(0.1), "n": 3, "y": num(f64::INFINITY)}));
        assert_eq!(s, r#"{"n":3,"x":1.0000000000000001e-1,"y":"inf"}"#);
    }

    #[test]
    fn weights_round_trip() {
        let w = WeightSystem::default()
            .set("0", 2.0)
            .subtree("(1,1)", 0.5)
            .tail(1, &[1.0], Tail::MomentRatio(AtomicMeasure::dirac(2.0)))
            .tail(0, &[], Tail::Affine { c: 1.0, breaks: vec![3, 7] });
        let text = to_string(&weights(&w));
        let back: WeightsJson = parse(&text).unwrap();
        assert_eq!(back.value().unwrap(), w);
    }

    #[test]
    fn explicit_tree_with_truncation_marks() {
        let t: TreeJson = parse(
            r#"{"kind":"explicit","vertices":["a","b","c"],"edges":[["a","b"],["a","c"]],
                "open_top":true,"incomplete":["b"]}"#,
        )
        .unwrap();
        let tree = t.build(5).unwrap();
        assert!(tree.root().is_none());
        assert!(!tree.is_complete(tree.get("b").unwrap()));
    }

    #[test]
    fn schema_and_parse_errors_differ() {
        assert!(matches!(parse::<TreeJson>("{\"kind\":"), Err(InputError::Parse { .. })));
        assert!(matches!(parse::<TreeJson>(r#"{"kind":"tree"}"#), Err(InputError::Schema(_))));
    }
}
