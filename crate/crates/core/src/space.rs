//! Mixed search spaces: continuous ranges, ordered integer choice sets and
//! categorical labels, plus pairwise ordering constraints.
//!
//! Configurations are mapped into the unit hypercube for the surrogate and
//! the quasi-random initializer. Continuous parameters are min-max scaled,
//! integer choices are placed at their rank on an even grid, and categoricals
//! are one-hot expanded, so the encoded dimension is
//! `#continuous + #integer + sum(|labels|)`.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rejection budget for [`SearchSpace::sample_uniform`].
pub const MAX_REJECTIONS: usize = 10_000;

const DEFAULT_SPACE: &str = include_str!("../assets/space.toml");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("invalid configuration: {}", join_violations(.0))]
    Violations(Vec<Violation>),
    #[error("expected an encoded point of dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("no feasible configuration found after {0} draws")]
    Unsatisfiable(usize),
    #[error("invalid search space: {0}")]
    Definition(String),
    #[error("cannot parse search space: {0}")]
    Parse(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// The value has the wrong kind for the parameter (e.g. a label for a
    /// continuous parameter).
    WrongKind {
        parameter: String,
    },
    OutOfDomain {
        parameter: String,
        value: String,
    },
    Constraint {
        left: String,
        right: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::WrongKind { parameter } => write!(f, "{parameter}: wrong value kind"),
            Violation::OutOfDomain { parameter, value } => {
                write!(f, "{parameter}: {value} is outside the domain")
            }
            Violation::Constraint { left, right } => write!(f, "{left} < {right} violated"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParameterKind {
    Continuous { lower: f64, upper: f64 },
    Integer { choices: Vec<i64> },
    Categorical { labels: Vec<String> },
}

impl ParameterKind {
    /// Number of encoded coordinates this parameter occupies.
    pub fn width(&self) -> usize {
        match self {
            ParameterKind::Categorical { labels } => labels.len(),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParameterKind,
}

impl ParameterSpec {
    pub fn continuous(name: &str, lower: f64, upper: f64) -> Self {
        Self { name: name.to_string(), kind: ParameterKind::Continuous { lower, upper } }
    }

    pub fn integer(name: &str, choices: &[i64]) -> Self {
        Self { name: name.to_string(), kind: ParameterKind::Integer { choices: choices.to_vec() } }
    }

    pub fn categorical(name: &str, labels: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: ParameterKind::Categorical { labels: labels.iter().map(|s| s.to_string()).collect() },
        }
    }

    fn check(&self) -> Result<(), SpaceError> {
        let bad = |msg: &str| Err(SpaceError::Definition(format!("{}: {msg}", self.name)));
        match &self.kind {
            ParameterKind::Continuous { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return bad("continuous bounds must be finite with lower < upper");
                }
            }
            ParameterKind::Integer { choices } => {
                if choices.is_empty() {
                    return bad("integer choices must be non-empty");
                }
                if choices.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("integer choices must be strictly increasing");
                }
            }
            ParameterKind::Categorical { labels } => {
                if labels.is_empty() {
                    return bad("categorical labels must be non-empty");
                }
                let unique: HashSet<_> = labels.iter().collect();
                if unique.len() != labels.len() {
                    return bad("categorical labels must be unique");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Constraint {
    /// `left < right`, strictly.
    LessThan { left: String, right: String },
}

/// One assigned parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Label(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Real(v) => Some(*v),
            ParamValue::Label(_) => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            ParamValue::Label(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Label(s) => f.write_str(s),
        }
    }
}

/// A full assignment of values, in the order of the space's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(pub Vec<ParamValue>);

impl Configuration {
    pub fn values(&self) -> &[ParamValue] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Deserialize)]
struct SpaceFile {
    parameters: Vec<ParameterSpec>,
    #[serde(default)]
    constraints: Vec<Constraint>,
}

#[derive(Serialize)]
struct SpaceFileRef<'a> {
    parameters: &'a [ParameterSpec],
    constraints: &'a [Constraint],
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ResolvedConstraint {
    left: usize,
    right: usize,
}

/// An ordered set of parameters together with the constraints between them.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    parameters: Vec<ParameterSpec>,
    constraints: Vec<Constraint>,
    resolved: Vec<ResolvedConstraint>,
    offsets: Vec<usize>,
    dim: usize,
}

impl SearchSpace {
    pub fn new(parameters: Vec<ParameterSpec>, constraints: Vec<Constraint>) -> Result<Self, SpaceError> {
        if parameters.is_empty() {
            return Err(SpaceError::Definition("space has no parameters".into()));
        }
        let mut names = HashSet::new();
        for p in &parameters {
            p.check()?;
            if !names.insert(p.name.as_str()) {
                return Err(SpaceError::Definition(format!("duplicate parameter {}", p.name)));
            }
        }
        let index_of = |name: &str| {
            parameters
                .iter()
                .position(|p| p.name == name)
                .ok_or_else(|| SpaceError::Definition(format!("constraint references unknown parameter {name}")))
        };
        let mut resolved = Vec::with_capacity(constraints.len());
        for c in &constraints {
            let Constraint::LessThan { left, right } = c;
            let (l, r) = (index_of(left)?, index_of(right)?);
            if l == r {
                return Err(SpaceError::Definition(format!("constraint {left} < {right} is unsatisfiable")));
            }
            let compatible = matches!(
                (&parameters[l].kind, &parameters[r].kind),
                (ParameterKind::Integer { .. }, ParameterKind::Integer { .. })
                    | (ParameterKind::Continuous { .. }, ParameterKind::Continuous { .. })
            );
            if !compatible {
                return Err(SpaceError::Definition(format!(
                    "constraint {left} < {right} needs two integer or two continuous parameters"
                )));
            }
            resolved.push(ResolvedConstraint { left: l, right: r });
        }
        let mut offsets = Vec::with_capacity(parameters.len());
        let mut dim = 0;
        for p in &parameters {
            offsets.push(dim);
            dim += p.kind.width();
        }
        Ok(Self { parameters, constraints, resolved, offsets, dim })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SpaceError> {
        let file: SpaceFile = toml::from_str(text).map_err(|e| SpaceError::Parse(e.to_string()))?;
        Self::new(file.parameters, file.constraints)
    }

    pub fn to_toml_string(&self) -> String {
        let file = SpaceFileRef { parameters: &self.parameters, constraints: &self.constraints };
        toml::to_string(&file).expect("search space serializes")
    }

    /// The shipped RAG pipeline space: chunk size, number of chunks, chunk
    /// overlap, temperature, rerank threshold, LLM and embedding model, with
    /// overlap < chunk size.
    pub fn rag_default() -> Self {
        Self::from_toml_str(DEFAULT_SPACE).expect("bundled search space is valid")
    }

    pub fn parameters(&self) -> &[ParameterSpec] {
        &self.parameters
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name == name)
    }

    /// Dimension of the encoded unit hypercube.
    pub fn encoded_dim(&self) -> usize {
        self.dim
    }

    /// Offset of parameter `i`'s first encoded coordinate.
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn validate(&self, config: &Configuration) -> Result<(), SpaceError> {
        if config.len() != self.parameters.len() {
            return Err(SpaceError::Arity { expected: self.parameters.len(), got: config.len() });
        }
        let mut violations = Vec::new();
        let mut kinds_ok = true;
        for (p, v) in self.parameters.iter().zip(config.values()) {
            let out = |violations: &mut Vec<Violation>| {
                violations.push(Violation::OutOfDomain { parameter: p.name.clone(), value: v.to_string() })
            };
            match (&p.kind, v) {
                (ParameterKind::Continuous { lower, upper }, ParamValue::Real(x)) => {
                    if !(x.is_finite() && *x >= *lower && *x <= *upper) {
                        out(&mut violations);
                    }
                }
                (ParameterKind::Integer { choices }, ParamValue::Int(x)) => {
                    if !choices.contains(x) {
                        out(&mut violations);
                    }
                }
                (ParameterKind::Categorical { labels }, ParamValue::Label(s)) => {
                    if !labels.iter().any(|l| l == s) {
                        out(&mut violations);
                    }
                }
                _ => {
                    kinds_ok = false;
                    violations.push(Violation::WrongKind { parameter: p.name.clone() });
                }
            }
        }
        if kinds_ok {
            for (c, rc) in self.constraints.iter().zip(&self.resolved) {
                let l = config.0[rc.left].as_f64();
                let r = config.0[rc.right].as_f64();
                if let (Some(l), Some(r)) = (l, r) {
                    if l >= r {
                        let Constraint::LessThan { left, right } = c;
                        violations.push(Violation::Constraint { left: left.clone(), right: right.clone() });
                    }
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(SpaceError::Violations(violations))
        }
    }

    pub fn encode(&self, config: &Configuration) -> Result<Vec<f64>, SpaceError> {
        self.validate(config)?;
        let mut out = vec![0.0; self.dim];
        for (i, (p, v)) in self.parameters.iter().zip(config.values()).enumerate() {
            let at = self.offsets[i];
            match (&p.kind, v) {
                (ParameterKind::Continuous { lower, upper }, ParamValue::Real(x)) => {
                    out[at] = ((x - lower) / (upper - lower)).clamp(0.0, 1.0);
                }
                (ParameterKind::Integer { choices }, ParamValue::Int(x)) => {
                    let rank = choices.iter().position(|c| c == x).expect("validated");
                    out[at] = rank_coordinate(rank, choices.len());
                }
                (ParameterKind::Categorical { labels }, ParamValue::Label(s)) => {
                    let idx = labels.iter().position(|l| l == s).expect("validated");
                    out[at + idx] = 1.0;
                }
                _ => unreachable!("validated"),
            }
        }
        Ok(out)
    }

    /// Maps a point of the hypercube back to a feasible configuration.
    ///
    /// Coordinates outside `[0, 1]` are clamped. If a constraint `a < b` is
    /// violated after snapping, `a` is lowered to its largest admissible
    /// value; only when no such value exists is `b` raised instead.
    pub fn decode(&self, point: &[f64]) -> Result<Configuration, SpaceError> {
        if point.len() != self.dim {
            return Err(SpaceError::Dimension { expected: self.dim, got: point.len() });
        }
        let mut values = Vec::with_capacity(self.parameters.len());
        for (i, p) in self.parameters.iter().enumerate() {
            let at = self.offsets[i];
            let v = match &p.kind {
                ParameterKind::Continuous { lower, upper } => {
                    let c = clamp_unit(point[at]);
                    ParamValue::Real((lower + c * (upper - lower)).clamp(*lower, *upper))
                }
                ParameterKind::Integer { choices } => {
                    ParamValue::Int(choices[nearest_rank(clamp_unit(point[at]), choices.len())])
                }
                ParameterKind::Categorical { labels } => {
                    let block = &point[at..at + labels.len()];
                    ParamValue::Label(labels[argmax_first(block)].clone())
                }
            };
            values.push(v);
        }
        let mut config = Configuration(values);
        self.repair(&mut config)?;
        Ok(config)
    }

    /// Snaps an arbitrary point onto the encoding of its decoded, feasible
    /// configuration.
    pub fn snap(&self, point: &[f64]) -> Result<Vec<f64>, SpaceError> {
        let config = self.decode(point)?;
        self.encode(&config)
    }

    fn repair(&self, config: &mut Configuration) -> Result<(), SpaceError> {
        // Constraints are few; iterate to a fixed point in case they chain.
        for _ in 0..=self.resolved.len() {
            let mut changed = false;
            for rc in &self.resolved {
                let (l, r) = (rc.left, rc.right);
                match (&self.parameters[l].kind, &self.parameters[r].kind) {
                    (ParameterKind::Integer { choices: lc }, ParameterKind::Integer { choices: rc_choices }) => {
                        let lv = config.0[l].as_int().expect("integer");
                        let rv = config.0[r].as_int().expect("integer");
                        if lv < rv {
                            continue;
                        }
                        changed = true;
                        if let Some(&below) = lc.iter().rev().find(|&&c| c < rv) {
                            config.0[l] = ParamValue::Int(below);
                        } else if let Some(&above) = rc_choices.iter().find(|&&c| c > lv) {
                            config.0[r] = ParamValue::Int(above);
                        } else {
                            return Err(SpaceError::Unsatisfiable(0));
                        }
                    }
                    (ParameterKind::Continuous { lower: l_lo, .. }, ParameterKind::Continuous { upper: r_hi, .. }) => {
                        let lv = config.0[l].as_f64().expect("real");
                        let rv = config.0[r].as_f64().expect("real");
                        if lv < rv {
                            continue;
                        }
                        changed = true;
                        if rv > *l_lo {
                            config.0[l] = ParamValue::Real(rv.next_down().max(*l_lo));
                        } else if lv < *r_hi {
                            config.0[r] = ParamValue::Real(lv.next_up().min(*r_hi));
                        } else {
                            return Err(SpaceError::Unsatisfiable(0));
                        }
                    }
                    _ => unreachable!("checked at construction"),
                }
            }
            if !changed {
                return Ok(());
            }
        }
        self.validate(config)
    }

    /// Draws each parameter uniformly from its domain and rejects draws that
    /// violate a constraint, so every feasible configuration is equally
    /// likely.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Configuration, SpaceError> {
        for _ in 0..MAX_REJECTIONS {
            let values = self
                .parameters
                .iter()
                .map(|p| match &p.kind {
                    ParameterKind::Continuous { lower, upper } => {
                        ParamValue::Real(lower + rng.random::<f64>() * (upper - lower))
                    }
                    ParameterKind::Integer { choices } => ParamValue::Int(choices[rng.random_range(0..choices.len())]),
                    ParameterKind::Categorical { labels } => {
                        ParamValue::Label(labels[rng.random_range(0..labels.len())].clone())
                    }
                })
                .collect();
            let config = Configuration(values);
            if self.validate(&config).is_ok() {
                return Ok(config);
            }
        }
        Err(SpaceError::Unsatisfiable(MAX_REJECTIONS))
    }

    /// Looks up a named value in `config`.
    pub fn value<'a>(&self, config: &'a Configuration, name: &str) -> Option<&'a ParamValue> {
        self.index_of(name).and_then(|i| config.0.get(i))
    }
}

fn clamp_unit(c: f64) -> f64 {
    if c.is_nan() {
        0.0
    } else {
        c.clamp(0.0, 1.0)
    }
}

fn rank_coordinate(rank: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        rank as f64 / (n - 1) as f64
    }
}

fn nearest_rank(c: f64, n: usize) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for i in 0..n {
        let d = (c - rank_coordinate(i, n)).abs();
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    best
}

fn argmax_first(block: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in block.iter().enumerate() {
        if v > block[best] {
            best = i;
        }
    }
    best
}
