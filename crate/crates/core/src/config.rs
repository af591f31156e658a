//! Experiment configuration documents (TOML) and their validation.

use crate::coherence::{SequenceKind, WITNESS_TOL};
use crate::error::Result;
use crate::hilbert::{
    coherent_state_strict, SpaceShape, State, Vector, C64, DEFAULT_TRUNCATION_BOUND,
};
use crate::random::random_state;
use crate::table::Format;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use std::fmt;
use toml::{Table, Value as Toml};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Convergence,
    Derelativise,
    TwirlCheck,
    MutualCoherence,
    Homodyne,
    StructureSuite,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::Convergence,
        ExperimentId::Derelativise,
        ExperimentId::TwirlCheck,
        ExperimentId::MutualCoherence,
        ExperimentId::Homodyne,
        ExperimentId::StructureSuite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Convergence => "convergence",
            ExperimentId::Derelativise => "derelativise",
            ExperimentId::TwirlCheck => "twirl-check",
            ExperimentId::MutualCoherence => "mutual-coherence",
            ExperimentId::Homodyne => "homodyne",
            ExperimentId::StructureSuite => "structure-suite",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.as_str() == s)
    }

    pub fn summary(self) -> &'static str {
        match self {
            ExperimentId::Convergence => {
                "absolute vs relational expectation of the hopping observable along a localisation sequence"
            }
            ExperimentId::Derelativise => {
                "trace distance between derelativised relational states and the system state"
            }
            ExperimentId::TwirlCheck => {
                "restriction by a dephased reference and the group twirl both reduce to the symmetrisation map"
            }
            ExperimentId::MutualCoherence => "invariant-observable witnesses for a system/reference state pair",
            ExperimentId::Homodyne => {
                "canonical-phase statistics of a coherent state vs relative-phase statistics"
            }
            ExperimentId::StructureSuite => {
                "unitality, invariance, quadrature agreement and complete positivity diagnostics"
            }
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Canonical,
    Cyclic,
}

impl Model {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "canonical" => Some(Model::Canonical),
            "cyclic" => Some(Model::Cyclic),
            _ => None,
        }
    }
}

/// Named state constructors accepted in `states.system` / `states.reference`.
#[derive(Clone, Debug, PartialEq)]
pub enum StateSpec {
    Number(usize),
    Coherent { amplitude: f64, phase: f64 },
    Plus,
    RandomPure(u64),
    RandomMixed(u64),
}

impl StateSpec {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let need = |what: &str| arg.ok_or_else(|| format!("`{head}` needs an argument ({what})"));
        match head {
            "plus" if arg.is_none() => Ok(StateSpec::Plus),
            "number" => need("level")?
                .parse()
                .map(StateSpec::Number)
                .map_err(|_| format!("`{s}`: number level must be a non-negative integer")),
            "coherent" => {
                let a = need("amplitude[@phase]")?;
                let (amp, phase) = match a.split_once('@') {
                    Some((x, p)) => (x, p),
                    None => (a, "0"),
                };
                let amplitude: f64 = amp.trim().parse().map_err(|_| format!("`{s}`: bad amplitude"))?;
                let phase: f64 = phase.trim().parse().map_err(|_| format!("`{s}`: bad phase"))?;
                if !amplitude.is_finite() || amplitude < 0.0 || !phase.is_finite() {
                    return Err(format!("`{s}`: amplitude must be finite and non-negative"));
                }
                Ok(StateSpec::Coherent { amplitude, phase })
            }
            "random-pure" => need("seed")?
                .parse()
                .map(StateSpec::RandomPure)
                .map_err(|_| format!("`{s}`: seed must be an unsigned integer")),
            "random-mixed" => need("seed")?
                .parse()
                .map(StateSpec::RandomMixed)
                .map_err(|_| format!("`{s}`: seed must be an unsigned integer")),
            _ => Err(format!(
                "unknown state constructor `{s}` (valid: number:N, coherent:AMP[@PHASE], plus, random-pure:SEED, random-mixed:SEED)"
            )),
        }
    }

    /// Problems this spec would hit in dimension `dim`.
    fn check_dim(&self, dim: usize) -> Option<String> {
        match *self {
            StateSpec::Number(n) if n >= dim => {
                Some(format!("number level {n} is outside dimension {dim}"))
            }
            StateSpec::Plus if dim < 2 => Some("plus needs dimension at least 2".into()),
            _ => None,
        }
    }

    pub fn is_coherent(&self) -> bool {
        matches!(self, StateSpec::Coherent { .. })
    }

    pub fn build(&self, dim: usize, truncation_bound: f64) -> Result<State> {
        Ok(match *self {
            StateSpec::Number(n) => Vector::basis(dim, n).pure_state(),
            StateSpec::Plus => {
                let mut v = DVector::zeros(dim);
                v[0] = C64::new(1.0, 0.0);
                v[1] = C64::new(1.0, 0.0);
                Vector::normalized(SpaceShape::single(dim), v)?.pure_state()
            }
            StateSpec::Coherent { amplitude, phase } => {
                coherent_state_strict(C64::from_polar(amplitude, phase), dim, truncation_bound)?
                    .vector
                    .pure_state()
            }
            StateSpec::RandomPure(seed) => {
                crate::random::random_vector(&mut ChaCha8Rng::seed_from_u64(seed), dim).pure_state()
            }
            StateSpec::RandomMixed(seed) => random_state(&mut ChaCha8Rng::seed_from_u64(seed), dim),
        })
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Number(n) => write!(f, "number:{n}"),
            StateSpec::Coherent { amplitude, phase } if *phase == 0.0 => {
                write!(f, "coherent:{amplitude}")
            }
            StateSpec::Coherent { amplitude, phase } => write!(f, "coherent:{amplitude}@{phase}"),
            StateSpec::Plus => f.write_str("plus"),
            StateSpec::RandomPure(s) => write!(f, "random-pure:{s}"),
            StateSpec::RandomMixed(s) => write!(f, "random-mixed:{s}"),
        }
    }
}

impl Serialize for StateSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn serialize_kind<S: Serializer>(k: &SequenceKind, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match k {
        SequenceKind::CoherentAmplitude => "coherent",
        SequenceKind::PhasePeaked => "phase-peaked",
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dims {
    pub system: usize,
    pub reference: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequenceSpec {
    #[serde(serialize_with = "serialize_kind")]
    pub kind: SequenceKind,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct States {
    pub system: StateSpec,
    pub reference: StateSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub witness: f64,
    pub truncation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Output {
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

/// Fully defaulted experiment description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub model: Model,
    pub dims: Dims,
    pub bins: usize,
    pub sequence: SequenceSpec,
    pub states: States,
    pub tolerances: Tolerances,
    pub output: Output,
    pub seed: u64,
    pub trials: usize,
}

/// One schema violation, located by its dotted key path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config is not valid UTF-8")]
    Encoding,
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("{} validation error(s):\n{}", .0.len(), .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<Issue>),
}

#[derive(Default)]
struct Issues(Vec<Issue>);

impl Issues {
    fn add(&mut self, path: &str, message: impl Into<String>) {
        self.0.push(Issue {
            path: path.to_string(),
            message: message.into(),
        });
    }
}

fn type_name(v: &Toml) -> &'static str {
    match v {
        Toml::String(_) => "string",
        Toml::Integer(_) => "integer",
        Toml::Float(_) => "float",
        Toml::Boolean(_) => "boolean",
        Toml::Datetime(_) => "datetime",
        Toml::Array(_) => "array",
        Toml::Table(_) => "table",
    }
}

fn reject_unknown(table: &Table, prefix: &str, allowed: &[&str], issues: &mut Issues) {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            let path = if prefix.is_empty() {
                key.clone()
            } else {
                format!("{prefix}.{key}")
            };
            issues.add(
                &path,
                format!("unknown key (allowed: {})", allowed.join(", ")),
            );
        }
    }
}

fn get_str<'a>(table: &'a Table, key: &str, path: &str, issues: &mut Issues) -> Option<&'a str> {
    match table.get(key)? {
        Toml::String(s) => Some(s),
        other => {
            issues.add(path, format!("expected string, got {}", type_name(other)));
            None
        }
    }
}

fn get_positive(table: &Table, key: &str, path: &str, issues: &mut Issues) -> Option<usize> {
    match table.get(key)? {
        Toml::Integer(i) if *i >= 1 => Some(*i as usize),
        Toml::Integer(i) => {
            issues.add(path, format!("must be at least 1 (got {i})"));
            None
        }
        other => {
            issues.add(path, format!("expected integer, got {}", type_name(other)));
            None
        }
    }
}

fn get_float(table: &Table, key: &str, path: &str, issues: &mut Issues) -> Option<f64> {
    let x = match table.get(key)? {
        Toml::Float(x) => *x,
        Toml::Integer(i) => *i as f64,
        other => {
            issues.add(path, format!("expected number, got {}", type_name(other)));
            return None;
        }
    };
    if !(x.is_finite() && x > 0.0) {
        issues.add(path, format!("must be positive and finite (got {x})"));
        return None;
    }
    Some(x)
}

fn get_table<'a>(table: &'a Table, key: &str, issues: &mut Issues) -> Option<&'a Table> {
    match table.get(key)? {
        Toml::Table(t) => Some(t),
        other => {
            issues.add(key, format!("expected table, got {}", type_name(other)));
            None
        }
    }
}

fn get_state(table: &Table, key: &str, path: &str, issues: &mut Issues) -> Option<StateSpec> {
    let s = get_str(table, key, path, issues)?;
    StateSpec::parse(s).map_err(|e| issues.add(path, e)).ok()
}

const TOP_KEYS: [&str; 10] = [
    "experiment",
    "model",
    "dims",
    "bins",
    "sequence",
    "states",
    "tolerances",
    "output",
    "seed",
    "trials",
];

/// Parses and validates a config, reporting every violation found.
pub fn parse_config(bytes: &[u8]) -> std::result::Result<ExperimentConfig, ConfigError> {
    let text = std::str::from_utf8(bytes).map_err(|_| ConfigError::Encoding)?;
    let doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    let mut issues = Issues::default();
    reject_unknown(&doc, "", &TOP_KEYS, &mut issues);

    let experiment = match doc.get("experiment") {
        None => {
            issues.add("experiment", "missing required key");
            None
        }
        Some(_) => get_str(&doc, "experiment", "experiment", &mut issues).and_then(|s| {
            let id = ExperimentId::parse(s);
            if id.is_none() {
                let valid: Vec<_> = ExperimentId::ALL.iter().map(|e| e.as_str()).collect();
                issues.add(
                    "experiment",
                    format!("unknown experiment `{s}` (valid: {})", valid.join(", ")),
                );
            }
            id
        }),
    };

    let model = get_str(&doc, "model", "model", &mut issues)
        .and_then(|s| {
            let m = Model::parse(s);
            if m.is_none() {
                issues.add(
                    "model",
                    format!("unknown model `{s}` (valid: canonical, cyclic)"),
                );
            }
            m
        })
        .unwrap_or(Model::Canonical);

    let (mut d_s, mut d_r) = (None, Some(64));
    match get_table(&doc, "dims", &mut issues) {
        Some(dims) => {
            reject_unknown(dims, "dims", &["system", "reference"], &mut issues);
            if dims.contains_key("system") {
                d_s = get_positive(dims, "system", "dims.system", &mut issues);
            } else {
                issues.add("dims.system", "missing required key");
            }
            if dims.contains_key("reference") {
                d_r = get_positive(dims, "reference", "dims.reference", &mut issues);
            }
        }
        None if !doc.contains_key("dims") => issues.add("dims.system", "missing required key"),
        None => {}
    }

    let bins = if doc.contains_key("bins") {
        get_positive(&doc, "bins", "bins", &mut issues)
    } else {
        match model {
            Model::Canonical => d_s.map(|d| 4 * d),
            Model::Cyclic => d_r,
        }
    };
    if let (Model::Cyclic, Some(k), Some(dr)) = (model, bins, d_r) {
        if k != dr {
            issues.add(
                "bins",
                format!("the cyclic model has one bin per reference level ({dr}), got {k}"),
            );
        }
    }

    let default_values = match experiment {
        Some(ExperimentId::Homodyne) => vec![2.0, 4.0, 8.0],
        _ => vec![1.0, 2.0, 4.0, 8.0],
    };
    let mut sequence = SequenceSpec {
        kind: SequenceKind::CoherentAmplitude,
        values: default_values,
    };
    if let Some(seq) = get_table(&doc, "sequence", &mut issues) {
        reject_unknown(seq, "sequence", &["kind", "values"], &mut issues);
        if let Some(k) = get_str(seq, "kind", "sequence.kind", &mut issues) {
            match k {
                "coherent" => sequence.kind = SequenceKind::CoherentAmplitude,
                "phase-peaked" => sequence.kind = SequenceKind::PhasePeaked,
                _ => issues.add(
                    "sequence.kind",
                    format!("unknown sequence kind `{k}` (valid: coherent, phase-peaked)"),
                ),
            }
        }
        match seq.get("values") {
            None => {}
            Some(Toml::Array(items)) => {
                let mut values = Vec::with_capacity(items.len());
                let range = match sequence.kind {
                    SequenceKind::CoherentAmplitude => "a finite amplitude ≥ 0",
                    SequenceKind::PhasePeaked => "an arc width in (0, 2π]",
                };
                for (i, item) in items.iter().enumerate() {
                    let path = format!("sequence.values[{i}]");
                    let x = match item {
                        Toml::Float(x) => *x,
                        Toml::Integer(n) => *n as f64,
                        other => {
                            issues.add(&path, format!("expected number, got {}", type_name(other)));
                            continue;
                        }
                    };
                    let ok = match sequence.kind {
                        SequenceKind::CoherentAmplitude => x.is_finite() && x >= 0.0,
                        SequenceKind::PhasePeaked => x > 0.0 && x <= std::f64::consts::TAU,
                    };
                    if ok {
                        values.push(x);
                    } else {
                        issues.add(&path, format!("expected {range}, got {x}"));
                    }
                }
                if items.is_empty() {
                    issues.add("sequence.values", "must not be empty");
                }
                sequence.values = values;
            }
            Some(other) => issues.add(
                "sequence.values",
                format!("expected array, got {}", type_name(other)),
            ),
        }
    }

    let (default_sys, default_ref) = match experiment {
        Some(ExperimentId::Homodyne) => (
            StateSpec::Coherent {
                amplitude: 2.0,
                phase: 0.0,
            },
            StateSpec::Plus,
        ),
        _ => (StateSpec::Plus, StateSpec::Plus),
    };
    let mut states = States {
        system: default_sys,
        reference: default_ref,
    };
    if let Some(st) = get_table(&doc, "states", &mut issues) {
        reject_unknown(st, "states", &["system", "reference"], &mut issues);
        if let Some(s) = get_state(st, "system", "states.system", &mut issues) {
            states.system = s;
        }
        if let Some(s) = get_state(st, "reference", "states.reference", &mut issues) {
            states.reference = s;
        }
    }

    let mut tolerances = Tolerances {
        witness: WITNESS_TOL,
        truncation: DEFAULT_TRUNCATION_BOUND,
    };
    if let Some(t) = get_table(&doc, "tolerances", &mut issues) {
        reject_unknown(t, "tolerances", &["witness", "truncation"], &mut issues);
        if let Some(x) = get_float(t, "witness", "tolerances.witness", &mut issues) {
            tolerances.witness = x;
        }
        if let Some(x) = get_float(t, "truncation", "tolerances.truncation", &mut issues) {
            tolerances.truncation = x;
        }
    }

    let mut output = Output {
        format: Format::Csv,
        path: None,
    };
    if let Some(o) = get_table(&doc, "output", &mut issues) {
        reject_unknown(o, "output", &["format", "path"], &mut issues);
        if let Some(f) = get_str(o, "format", "output.format", &mut issues) {
            match Format::parse(f) {
                Some(f) => output.format = f,
                None => issues.add(
                    "output.format",
                    format!("unknown format `{f}` (valid: {})", Format::ALL.join(", ")),
                ),
            }
        }
        output.path = get_str(o, "path", "output.path", &mut issues).map(str::to_string);
    }

    let seed = match doc.get("seed") {
        None => 0,
        Some(Toml::Integer(i)) if *i >= 0 => *i as u64,
        Some(Toml::Integer(i)) => {
            issues.add("seed", format!("must be non-negative (got {i})"));
            0
        }
        Some(other) => {
            issues.add(
                "seed",
                format!("expected integer, got {}", type_name(other)),
            );
            0
        }
    };
    let trials = if doc.contains_key("trials") {
        get_positive(&doc, "trials", "trials", &mut issues).unwrap_or(1)
    } else {
        20
    };

    if let (Some(ds), Some(dr)) = (d_s, d_r) {
        if let Some(msg) = states.system.check_dim(ds) {
            issues.add("states.system", msg);
        }
        if let Some(msg) = states.reference.check_dim(dr) {
            issues.add("states.reference", msg);
        }
        match experiment {
            Some(ExperimentId::Convergence) if ds < 2 => issues.add(
                "dims.system",
                "convergence needs at least 2 levels for the hopping observable",
            ),
            Some(ExperimentId::Homodyne) if !states.system.is_coherent() => {
                issues.add("states.system", "homodyne needs a coherent system state")
            }
            Some(ExperimentId::Homodyne) if sequence.kind != SequenceKind::CoherentAmplitude => {
                issues.add(
                    "sequence.kind",
                    "homodyne compares along a coherent sequence",
                )
            }
            _ => {}
        }
    }

    match (issues.0.is_empty(), experiment, d_s, d_r, bins) {
        (true, Some(experiment), Some(ds), Some(dr), Some(bins)) => Ok(ExperimentConfig {
            experiment,
            model,
            dims: Dims {
                system: ds,
                reference: dr,
            },
            bins,
            sequence,
            states,
            tolerances,
            output,
            seed,
            trials,
        }),
        _ => Err(ConfigError::Validation(issues.0)),
    }
}
