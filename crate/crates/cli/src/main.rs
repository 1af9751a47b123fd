use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use thiserror::Error;

use treeshift::classify::{self, Entry, ModelCheckError, Verdict};
use treeshift::family::TreeFamily;
use treeshift::io::{self, num, InputError};
use treeshift::models::{self, ModelError};
use treeshift::oracle;
use treeshift::shift::{ShiftError, WeightedShift};

/// Above this many vertices the dense comparisons are skipped.
const DENSE_LIMIT: usize = 1500;

#[derive(Parser)]
#[command(name = "treeshift", version, about = "Weighted shifts on directed trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Args, Clone, Debug)]
struct Options {
    /// Materialization depth for family trees
    #[arg(long, global = true, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..))]
    depth: u64,
    /// Numerical tolerance for the necessary tests and the oracle
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Largest power used by moment-sequence tests
    #[arg(long = "max-n", global = true, default_value_t = 10)]
    max_n: usize,
    /// Exponent for p-hyponormality
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Number of trunk conditions checked on rootless model trees
    #[arg(long = "k-cap", global = true, default_value_t = classify::DEFAULT_K_CAP)]
    k_cap: usize,
    /// Also classify this power of the shift through the dense oracle
    #[arg(long, global = true)]
    power: Option<u32>,
    /// Exit with status 3 when a verdict is indeterminate
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check a tree and weight specification
    Validate { input: PathBuf },
    /// Run every applicable class predicate
    Classify { input: PathBuf },
    /// Operator norm
    Norm { input: PathBuf },
    /// Tree index and Fredholm data
    Index { input: PathBuf },
    /// Norms of powers on basis vectors
    Powers { input: PathBuf },
    /// Build a subnormal model from branch measures
    ConstructSubnormal { input: PathBuf },
    /// Build a completely hyperexpansive model from representing measures
    ConstructChex { input: PathBuf },
    /// Backward extendibility of a classical shift
    BackwardExtension { input: PathBuf },
    /// Compare closed-form quantities against dense matrices
    OracleCompare { input: PathBuf },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: InputError },
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    ModelCheck(#[from] ModelCheckError),
    #[error("{0}")]
    Options(String),
}

impl CliError {
    fn kind(&self) -> String {
        match self {
            CliError::Read { .. } => "ReadError".into(),
            CliError::Input { source: InputError::Parse { .. }, .. } => "ParseError".into(),
            CliError::Input { .. } => "SchemaViolation".into(),
            CliError::Shift(_) => "ShiftError".into(),
            CliError::Model(e) => variant_name(e),
            CliError::ModelCheck(e) => variant_name(e),
            CliError::Options(_) => "InvalidOptions".into(),
        }
    }
}

fn variant_name(e: &impl std::fmt::Debug) -> String {
    let text = format!("{e:?}");
    text.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
}

fn load<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
    io::parse(&text).map_err(|source| CliError::Input { path: path.into(), source })
}

fn input_err(path: &Path) -> impl Fn(InputError) -> CliError + '_ {
    move |source| CliError::Input { path: path.into(), source }
}

struct Loaded {
    input: io::ShiftInput,
    shift: WeightedShift,
}

fn load_shift(path: &Path, opts: &Options) -> Result<Loaded, CliError> {
    let input: io::ShiftInput = load(path)?;
    let tree = input.tree.build(opts.depth as usize).map_err(input_err(path))?;
    let weights = input.weights.value().map_err(input_err(path))?;
    let shift = WeightedShift::new(tree, weights)?;
    Ok(Loaded { input, shift })
}

/// Report plus whether an indeterminate verdict occurred.
struct Outcome {
    report: Value,
    indeterminate: bool,
}

impl From<Value> for Outcome {
    fn from(report: Value) -> Self {
        Self { report, indeterminate: false }
    }
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let opts = &cli.opts;
    if !(opts.tol > 0.0) {
        return Err(CliError::Options("--tol must be positive".into()));
    }
    if opts.p.is_some_and(|p| !(p > 0.0)) {
        return Err(CliError::Options("--p must be positive".into()));
    }
    match &cli.command {
        Command::Validate { input } => validate(input, opts).map(Outcome::from),
        Command::Classify { input } => classify_cmd(input, opts),
        Command::Norm { input } => norm(input, opts).map(Outcome::from),
        Command::Index { input } => index(input, opts).map(Outcome::from),
        Command::Powers { input } => powers(input, opts).map(Outcome::from),
        Command::ConstructSubnormal { input } => {
            let spec: io::SubnormalSpecJson = load(input)?;
            let model = models::construct_subnormal(&spec.value().map_err(input_err(input))?)?;
            Ok(json!({"command": "construct-subnormal", "model": io::model(&model)}).into())
        }
        Command::ConstructChex { input } => {
            let spec: io::ChexSpecJson = load(input)?;
            let model = models::construct_chex(&spec.value().map_err(input_err(input))?)?;
            Ok(json!({"command": "construct-chex", "model": io::model(&model)}).into())
        }
        Command::BackwardExtension { input } => {
            let spec: io::ExtensionJson = load(input)?;
            let (measure, k, flavor) = spec.value().map_err(input_err(input))?;
            let ext = models::backward_extension(&measure, k, flavor)?;
            Ok(json!({
                "command": "backward-extension",
                "flavor": spec.flavor,
                "k": k.map_or(json!("inf"), |k| json!(k)),
                "extendible": ext.extendible,
                "value": num(ext.value),
            })
            .into())
        }
        Command::OracleCompare { input } => oracle_compare(input, opts).map(Outcome::from),
    }
}

fn validate(path: &Path, opts: &Options) -> Result<Value, CliError> {
    let Loaded { shift, .. } = load_shift(path, opts)?;
    let tree = shift.tree();
    let sets = tree.structural_sets();
    Ok(json!({
        "command": "validate",
        "valid": true,
        "vertices": tree.len(),
        "rooted": tree.root().is_some(),
        "truncated": tree.is_truncated(),
        "depth": tree.depth(),
        "leaves": sets.leaves,
        "branching": sets.branching,
    }))
}

fn classify_cmd(path: &Path, opts: &Options) -> Result<Outcome, CliError> {
    let Loaded { input, shift } = load_shift(path, opts)?;
    let mut entries: Vec<Entry> = classify::classify(&shift, opts.p).entries;
    if let Some(n) = opts.power.filter(|&n| n >= 2) {
        entries.push(classify::power_hyponormal(&shift, n, opts.tol));
    }
    if let Some(mu) = input.measures().map_err(input_err(path))? {
        entries.push(classify::subnormal_on_t(&shift, &mu, opts.k_cap)?);
    }
    if let Some(tau) = input.taus().map_err(input_err(path))? {
        entries.push(classify::chex_on_t(&shift, &tau)?);
    }
    let mut st = classify::necessary_everywhere(&shift, opts.max_n, opts.tol, classify::stieltjes_necessary);
    st.predicate = "stieltjes".into();
    let mut ca = classify::necessary_everywhere(&shift, opts.max_n, opts.tol, classify::ca_necessary);
    ca.predicate = "completely_alternating".into();
    entries.push(st);
    entries.push(ca);
    let adm = classify::admissibility(shift.tree());
    let flag = |x: Option<bool>| x.map_or(json!("unknown"), |b| json!(b));
    let mut summary = Map::new();
    for e in &entries {
        summary.insert(e.predicate.clone(), json!(e.verdict.as_str()));
    }
    let indeterminate = entries.iter().any(|e| matches!(e.verdict, Verdict::Indeterminate(_)));
    let report = json!({
        "command": "classify",
        "depth": shift.tree().depth(),
        "summary": summary,
        "results": entries.iter().map(io::entry).collect::<Vec<_>>(),
        "admissibility": {
            "injective_classes": flag(adm.injective_classes),
            "coisometric": flag(adm.coisometric),
            "unitary": flag(adm.unitary),
            "normal": flag(adm.normal),
            "dense_range": flag(adm.dense_range),
        },
    });
    Ok(Outcome { report, indeterminate })
}

fn norm(path: &Path, opts: &Options) -> Result<Value, CliError> {
    let Loaded { shift, .. } = load_shift(path, opts)?;
    let n = shift.norm();
    Ok(json!({"command": "norm", "norm": num(n.value), "exact": n.exact}))
}

fn index(path: &Path, opts: &Options) -> Result<Value, CliError> {
    #[derive(serde::Deserialize)]
    struct TreeOnly {
        tree: io::TreeJson,
        #[serde(default)]
        weights: Option<io::WeightsJson>,
    }
    let input: TreeOnly = load(path)?;
    let tree = input.tree.build(opts.depth as usize).map_err(input_err(path))?;
    let tree_index = match tree.family() {
        Some(kind) => TreeFamily::new(kind.clone(), opts.depth as usize).tree_index(),
        None => tree.tree_index(),
    };
    let mut out = Map::new();
    out.insert("command".into(), json!("index"));
    match tree_index {
        Ok(i) => out.insert("tree_index".into(), json!(i)),
        Err(e) => out.insert("tree_index".into(), json!({"indeterminate": e.to_string()})),
    };
    if let Some(w) = input.weights {
        let shift = WeightedShift::new(tree, w.value().map_err(input_err(path))?)?;
        let fredholm = match shift.fredholm_data() {
            Ok(f) => json!({
                "a": f.a.to_string(),
                "b": f.b.to_string(),
                "c": num(f.c),
                "is_fredholm": f.is_fredholm,
                "index": f.index,
            }),
            Err(e) => json!({"indeterminate": e.to_string()}),
        };
        out.insert("fredholm".into(), fredholm);
    }
    Ok(Value::Object(out))
}

fn powers(path: &Path, opts: &Options) -> Result<Value, CliError> {
    let Loaded { input, shift } = load_shift(path, opts)?;
    let tree = shift.tree();
    let vertices: Vec<usize> = match &input.vertices {
        Some(ids) => ids
            .iter()
            .map(|id| tree.index_of(id).map_err(|e| CliError::Input { path: path.into(), source: e.into() }))
            .collect::<Result<_, _>>()?,
        None => tree.bfs(),
    };
    let mut rows = Vec::new();
    for u in vertices {
        let mut fwd = Vec::new();
        let mut bwd = Vec::new();
        for n in 0..=opts.max_n {
            match shift.power_norm_squared(u, n) {
                Ok(x) => fwd.push(num(x)),
                Err(_) => break,
            }
        }
        for n in 0..=opts.max_n {
            match shift.adjoint_power_norm(u, n) {
                Ok(x) => bwd.push(num(x)),
                Err(_) => break,
            }
        }
        rows.push(json!({"vertex": tree.id(u), "power_norm_squared": fwd, "adjoint_power_norm": bwd}));
    }
    Ok(json!({"command": "powers", "max_n": opts.max_n, "vertices": rows}))
}

fn relative(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn oracle_compare(path: &Path, opts: &Options) -> Result<Value, CliError> {
    let Loaded { shift, .. } = load_shift(path, opts)?;
    let tree = shift.tree();
    if tree.len() > DENSE_LIMIT {
        return Ok(json!({
            "command": "oracle-compare",
            "skipped": format!("{} vertices exceed the dense limit {DENSE_LIMIT}", tree.len()),
        }));
    }
    let tr = oracle::truncate(&shift);
    let mut out = Map::new();
    out.insert("command".into(), json!("oracle-compare"));
    out.insert("vertices".into(), json!(tree.len()));
    let closed = shift.norm();
    let dense = oracle::operator_norm(&tr, opts.tol).ok();
    out.insert(
        "norm".into(),
        json!({
            "closed_form": num(closed.value),
            "exact": closed.exact,
            "dense_truncation": dense.map(num),
            "relative_difference": dense.map(|d| num(relative(closed.value, d))),
        }),
    );
    let mut worst = 0.0f64;
    let mut worst_at = Value::Null;
    for u in tree.bfs() {
        for n in 1..=opts.max_n {
            let Ok(closed) = shift.power_norm_squared(u, n) else { break };
            let (dense, _) = tr.power_vector_norms(u, n);
            let r = relative(closed, dense);
            if r > worst {
                worst = r;
                worst_at = json!({"vertex": tree.id(u), "n": n});
            }
        }
    }
    out.insert("powers".into(), json!({"max_relative_difference": num(worst), "at": worst_at}));
    let hyp = classify::is_hyponormal(&shift);
    let check = oracle::selfcommutator_check(&tr, opts.p.unwrap_or(1.0), opts.tol).ok();
    out.insert(
        "hyponormal".into(),
        json!({
            "classifier": hyp.verdict.as_str(),
            "dense_passed": check.as_ref().map(|c| c.passed),
            "dense_min_eigenvalue": check.as_ref().map(|c| num(c.min_eig)),
            "agree": check.as_ref().map(|c| c.passed == hyp.verdict.passes()),
        }),
    );
    if !tree.is_truncated() {
        let kernel = oracle::kernel_index(&tr);
        let index = shift.fredholm_data().ok().and_then(|f| f.index);
        out.insert("index".into(), json!({"dense": kernel, "closed_form": index}));
    }
    Ok(Value::Object(out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            println!("{}", io::to_string(&outcome.report));
            if cli.opts.strict && outcome.indeterminate {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            let report = json!({"error": e.kind(), "message": e.to_string()});
            println!("{}", io::to_string(&report));
            eprintln!("treeshift: {e}");
            ExitCode::from(2)
        }
    }
}
