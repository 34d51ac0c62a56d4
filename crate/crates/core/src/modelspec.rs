//! Declarative model documents: constructs, indicator blocks, measurement
//! modes, the sequential path graph and optional cyclic feedback edges.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model document syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("model document: {0}")]
    UnknownField(String),
    #[error("model document: {0}")]
    UnknownKeyword(String),
    #[error("model document: {0}")]
    Schema(String),
    #[error("duplicate construct `{0}`")]
    DuplicateConstruct(String),
    #[error("cannot read model document {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<serde_json::Error> for ModelError {
    fn from(err: serde_json::Error) -> Self {
        use serde_json::error::Category;
        let (line, column) = (err.line(), err.column());
        let text = err.to_string();
        // serde appends " at line L column C"; keep the bare message
        let message = match text.rfind(" at line ") {
            Some(idx) => text[..idx].to_string(),
            None => text,
        };
        match err.classify() {
            Category::Data if message.starts_with("unknown field") => {
                ModelError::UnknownField(format!("{message} (line {line}, column {column})"))
            }
            Category::Data if message.starts_with("unknown variant") => {
                ModelError::UnknownKeyword(format!("{message} (line {line}, column {column})"))
            }
            Category::Data => ModelError::Schema(format!("{message} (line {line}, column {column})")),
            _ => ModelError::Syntax {
                line,
                column,
                message,
            },
        }
    }
}

/// Measurement mode of an indicator block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Mode A: indicators reflect the construct.
    Reflective,
    /// Mode B: the construct is a weighted combination of its indicators.
    Formative,
    /// One indicator taken as the construct itself.
    SingleItem,
    /// Binary items collapsed to their first MCA dimension.
    McaSingleItem,
}

impl Mode {
    /// Whether the block enters the estimator as a single score column.
    pub fn is_single_column(self) -> bool {
        matches!(self, Mode::SingleItem | Mode::McaSingleItem)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Reflective => "reflective",
            Mode::Formative => "formative",
            Mode::SingleItem => "single-item",
            Mode::McaSingleItem => "mca-single-item",
        })
    }
}

/// Inner weighting scheme used to build the inner proxies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Centroid,
    Factorial,
    #[default]
    Path,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Centroid => "centroid",
            Scheme::Factorial => "factorial",
            Scheme::Path => "path",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub name: String,
    pub mode: Mode,
    pub indicators: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub source: String,
    pub target: String,
}

impl PathSpec {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
        }
    }
}

/// Feedback edges from a step-1 dependent construct back to its antecedents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CyclicSpec {
    pub source: String,
    /// Empty in a document means "every antecedent of `source`"; filled in by
    /// [`parse_model`].
    #[serde(default)]
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub blocks: Vec<BlockSpec>,
    #[serde(default)]
    pub paths: Vec<PathSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cyclic: Option<CyclicSpec>,
    #[serde(default)]
    pub scheme: Scheme,
}

/// Parse a JSON model document, applying defaults.
pub fn parse_model(document: &str) -> Result<ModelSpec, ModelError> {
    let mut spec: ModelSpec = serde_json::from_str(document)?;
    let mut seen = HashSet::new();
    for block in &spec.blocks {
        if !seen.insert(block.name.as_str()) {
            return Err(ModelError::DuplicateConstruct(block.name.clone()));
        }
    }
    if let Some(cyclic) = &spec.cyclic {
        if cyclic.targets.is_empty() {
            let targets = match spec.index_of(&cyclic.source) {
                Some(k) => spec
                    .antecedents(k)
                    .into_iter()
                    .map(|j| spec.blocks[j].name.clone())
                    .collect(),
                None => Vec::new(),
            };
            spec.cyclic.as_mut().unwrap().targets = targets;
        }
    }
    Ok(spec)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelSpec, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_model(&text)
}

impl ModelSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }

    pub fn block(&self, name: &str) -> Option<&BlockSpec> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn num_constructs(&self) -> usize {
        self.blocks.len()
    }

    /// Resolved (source, target) index pairs; paths naming unknown constructs
    /// are dropped.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.paths
            .iter()
            .filter_map(|p| Some((self.index_of(&p.source)?, self.index_of(&p.target)?)))
            .collect()
    }

    /// Direct predecessors of construct `k`, in block order.
    pub fn predecessors(&self, k: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .edges()
            .into_iter()
            .filter(|&(_, t)| t == k)
            .map(|(s, _)| s)
            .collect();
        set.into_iter().collect()
    }

    /// Direct successors of construct `k`, in block order.
    pub fn successors(&self, k: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .edges()
            .into_iter()
            .filter(|&(s, _)| s == k)
            .map(|(_, t)| t)
            .collect();
        set.into_iter().collect()
    }

    pub fn is_endogenous(&self, k: usize) -> bool {
        !self.predecessors(k).is_empty()
    }

    /// All direct and indirect antecedents of `k`, in block order.
    pub fn antecedents(&self, k: usize) -> Vec<usize> {
        let edges = self.edges();
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([k]);
        while let Some(node) = queue.pop_front() {
            for &(s, t) in &edges {
                if t == node && s != k && seen.insert(s) {
                    queue.push_back(s);
                }
            }
        }
        seen.into_iter().collect()
    }

    pub fn has_edge(&self, source: usize, target: usize) -> bool {
        self.edges().contains(&(source, target))
    }

    /// Kahn topological order of the sequential graph (ties broken by block
    /// order), or `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let k = self.blocks.len();
        let edges: BTreeSet<(usize, usize)> = self.edges().into_iter().collect();
        let mut indegree = vec![0usize; k];
        for &(_, t) in &edges {
            indegree[t] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..k).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(k);
        while let Some(&next) = ready.iter().next() {
            ready.remove(&next);
            order.push(next);
            for &(s, t) in &edges {
                if s == next {
                    indegree[t] -= 1;
                    if indegree[t] == 0 {
                        ready.insert(t);
                    }
                }
            }
        }
        (order.len() == k).then_some(order)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    DuplicateConstruct(String),
    EmptyBlock(String),
    DuplicateIndicator { block: String, indicator: String },
    IndicatorReused { indicator: String, first: String, second: String },
    SingleItemArity { block: String, count: usize },
    MissingColumn { block: String, column: String },
    UnknownConstruct { context: String, name: String },
    SelfLoop(String),
    DuplicatePath { source: String, target: String },
    SequentialCycle(Vec<String>),
    CyclicSourceNotEndogenous(String),
    CyclicTargetNotAntecedent { source: String, target: String },
    CyclicWithoutTargets(String),
    NoIntermediateConstruct,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateConstruct(n) => write!(f, "duplicate construct `{n}`"),
            Violation::EmptyBlock(n) => write!(f, "block `{n}` has no indicators"),
            Violation::DuplicateIndicator { block, indicator } => {
                write!(f, "block `{block}` lists indicator `{indicator}` more than once")
            }
            Violation::IndicatorReused {
                indicator,
                first,
                second,
            } => write!(
                f,
                "indicator `{indicator}` is assigned to both `{first}` and `{second}`"
            ),
            Violation::SingleItemArity { block, count } => write!(
                f,
                "single-item block `{block}` must have exactly one indicator (found {count})"
            ),
            Violation::MissingColumn { block, column } => {
                write!(f, "block `{block}` references missing column `{column}`")
            }
            Violation::UnknownConstruct { context, name } => {
                write!(f, "{context} references unknown construct `{name}`")
            }
            Violation::SelfLoop(n) => write!(f, "path from `{n}` to itself"),
            Violation::DuplicatePath { source, target } => {
                write!(f, "path `{source}` -> `{target}` declared more than once")
            }
            Violation::SequentialCycle(names) => write!(
                f,
                "sequential graph must be acyclic (cycle among {})",
                names.join(", ")
            ),
            Violation::CyclicSourceNotEndogenous(n) => {
                write!(f, "cyclic source must be endogenous (`{n}` has no incoming path)")
            }
            Violation::CyclicTargetNotAntecedent { source, target } => write!(
                f,
                "cyclic target `{target}` is not an antecedent of `{source}`"
            ),
            Violation::CyclicWithoutTargets(n) => {
                write!(f, "cyclic specification for `{n}` has no targets")
            }
            Violation::NoIntermediateConstruct => f.write_str(
                "cyclic estimation requires an intermediate construct: with only two \
                 constructs we would obtain the same correlation coefficient for estimates \
                 of both acyclic and cyclic effects",
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(ToString::to_string).collect()
    }

    pub fn has_cycle_violation(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::SequentialCycle(_)))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Check a parsed model against the available data columns. Violations are
/// collected, never raised.
pub fn validate_model<S: AsRef<str>>(spec: &ModelSpec, columns: &[S]) -> ValidationReport {
    let columns: HashSet<&str> = columns.iter().map(AsRef::as_ref).collect();
    let mut out = Vec::new();

    let mut names = HashSet::new();
    let mut owner: HashMap<&str, &str> = HashMap::new();
    for block in &spec.blocks {
        if !names.insert(block.name.as_str()) {
            out.push(Violation::DuplicateConstruct(block.name.clone()));
        }
        if block.indicators.is_empty() {
            out.push(Violation::EmptyBlock(block.name.clone()));
        }
        if block.mode == Mode::SingleItem && block.indicators.len() > 1 {
            out.push(Violation::SingleItemArity {
                block: block.name.clone(),
                count: block.indicators.len(),
            });
        }
        let mut in_block = HashSet::new();
        for ind in &block.indicators {
            if !in_block.insert(ind.as_str()) {
                out.push(Violation::DuplicateIndicator {
                    block: block.name.clone(),
                    indicator: ind.clone(),
                });
                continue;
            }
            if let Some(first) = owner.insert(ind.as_str(), block.name.as_str()) {
                out.push(Violation::IndicatorReused {
                    indicator: ind.clone(),
                    first: first.to_string(),
                    second: block.name.clone(),
                });
            }
            if !columns.contains(ind.as_str()) {
                out.push(Violation::MissingColumn {
                    block: block.name.clone(),
                    column: ind.clone(),
                });
            }
        }
    }

    let mut declared = HashSet::new();
    for path in &spec.paths {
        let mut known = true;
        for name in [&path.source, &path.target] {
            if spec.index_of(name).is_none() {
                known = false;
                out.push(Violation::UnknownConstruct {
                    context: format!("path `{}` -> `{}`", path.source, path.target),
                    name: name.clone(),
                });
            }
        }
        if path.source == path.target {
            out.push(Violation::SelfLoop(path.source.clone()));
        } else if known && !declared.insert((path.source.as_str(), path.target.as_str())) {
            out.push(Violation::DuplicatePath {
                source: path.source.clone(),
                target: path.target.clone(),
            });
        }
    }

    let order = spec.topological_order();
    if order.is_none() {
        out.push(Violation::SequentialCycle(cycle_members(spec)));
    }

    if let Some(cyclic) = &spec.cyclic {
        out.extend(validate_cyclic(spec, cyclic));
    }

    ValidationReport { violations: out }
}

fn validate_cyclic(spec: &ModelSpec, cyclic: &CyclicSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let Some(source) = spec.index_of(&cyclic.source) else {
        out.push(Violation::UnknownConstruct {
            context: "cyclic specification".into(),
            name: cyclic.source.clone(),
        });
        return out;
    };
    if spec.num_constructs() < 3 {
        out.push(Violation::NoIntermediateConstruct);
    }
    if !spec.is_endogenous(source) {
        out.push(Violation::CyclicSourceNotEndogenous(cyclic.source.clone()));
        return out;
    }
    if spec.num_constructs() >= 3 {
        let has_intermediate = spec
            .predecessors(source)
            .into_iter()
            .any(|p| spec.is_endogenous(p));
        if !has_intermediate {
            out.push(Violation::NoIntermediateConstruct);
        }
    }
    if cyclic.targets.is_empty() {
        out.push(Violation::CyclicWithoutTargets(cyclic.source.clone()));
    }
    let antecedents = spec.antecedents(source);
    for target in &cyclic.targets {
        match spec.index_of(target) {
            None => out.push(Violation::UnknownConstruct {
                context: "cyclic specification".into(),
                name: target.clone(),
            }),
            Some(t) if !antecedents.contains(&t) => {
                out.push(Violation::CyclicTargetNotAntecedent {
                    source: cyclic.source.clone(),
                    target: target.clone(),
                })
            }
            Some(_) => {}
        }
    }
    out
}

/// Constructs left over after peeling sources and sinks: every member of a
/// directed cycle plus anything wedged between two cycles.
fn cycle_members(spec: &ModelSpec) -> Vec<String> {
    let edges: Vec<(usize, usize)> = spec.edges();
    let mut alive: BTreeSet<usize> = (0..spec.num_constructs()).collect();
    loop {
        let removable: Vec<usize> = alive
            .iter()
            .copied()
            .filter(|&k| {
                let has_in = edges
                    .iter()
                    .any(|&(s, t)| t == k && s != t && alive.contains(&s));
                let has_out = edges
                    .iter()
                    .any(|&(s, t)| s == k && s != t && alive.contains(&t));
                let self_loop = edges.contains(&(k, k));
                !self_loop && (!has_in || !has_out)
            })
            .collect();
        if removable.is_empty() {
            break;
        }
        for k in removable {
            alive.remove(&k);
        }
    }
    alive
        .into_iter()
        .map(|k| spec.blocks[k].name.clone())
        .collect()
}
