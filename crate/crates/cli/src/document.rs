//! Problem documents: JSON with a `measure`, an `operator` and an optional
//! `run` block.
//!
//! ```json
//! {
//!   "measure": {
//!     "atoms": [{"x": 0.5, "mass": 1.0}],
//!     "continuous": {"density": "lebesgue", "quadrature_nodes": 512}
//!   },
//!   "operator": {
//!     "dim_H": 1, "rank": 1, "commutativity": true,
//!     "nodes": [{"x": 0.5, "alpha": [[0, 0]], "c": [[1.4142135623730951, 0]]}]
//!   },
//!   "run": {"z": [[0, 2]], "zgrid": [-2, 2, 0.01, 100, 9, 21], "tol": 1e-10}
//! }
//! ```
//!
//! Matrices are row-major lists of entries, each a number or an `[re, im]`
//! pair; `alpha` is `dim_H × dim_H`, `c` is `dim_H × rank`. Every atom needs
//! an operator node at the same `x`. With a continuous part the remaining
//! nodes are samples of the coefficients, interpolated linearly in `x`.
//! `continuous.density` is `"lebesgue"` or `{"nodes": [...], "weights": [...]}`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use dissim_core::linalg::{self, c64, CMat};
use dissim_core::measure::DEFAULT_QUADRATURE_NODES;
use dissim_core::operator_model::{PiecewiseLinearField, HERMITIAN_TOL};
use dissim_core::{Atom, ContinuousSpec, Measure, OperatorSpec, SolverOptions, ZGrid, C64};
use serde_json::{Map, Value};

/// Two positions closer than this refer to the same node.
pub const POSITION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    /// JSON path of the offending value, `$` for the whole document.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DocError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {}", join(.0))]
    Schema(Vec<Diagnostic>),
    #[error("invariant violation: {}", join(.0))]
    Invariant(Vec<Diagnostic>),
}

fn join(d: &[Diagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Analysis {
    Charfn,
    Det,
    Criteria,
    Oracle,
}

impl Analysis {
    pub const ALL: [Analysis; 4] = [Analysis::Charfn, Analysis::Det, Analysis::Criteria, Analysis::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Analysis::Charfn => "charfn",
            Analysis::Det => "det",
            Analysis::Criteria => "criteria",
            Analysis::Oracle => "oracle",
        }
    }
}

/// Grid bounds in the `--zgrid` order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn build(&self) -> dissim_core::Result<ZGrid> {
        ZGrid::new(self.re_min, self.re_max, self.im_min, self.im_max, self.nx, self.ny)
    }
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 6 {
            return Err(format!("expected re_min,re_max,im_min,im_max,nx,ny, got {s:?}"));
        }
        let f = |i: usize| parts[i].parse::<f64>().map_err(|e| format!("{}: {e}", parts[i]));
        let n = |i: usize| parts[i].parse::<usize>().map_err(|e| format!("{}: {e}", parts[i]));
        Ok(GridSpec {
            re_min: f(0)?,
            re_max: f(1)?,
            im_min: f(2)?,
            im_max: f(3)?,
            nx: n(4)?,
            ny: n(5)?,
        })
    }
}

/// The `run` block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub z: Vec<C64>,
    pub zgrid: Option<GridSpec>,
    pub tol: Option<f64>,
    pub cond_limit: Option<f64>,
    /// `None` means every applicable analysis.
    pub analyses: Option<Vec<Analysis>>,
}

impl RunConfig {
    pub fn solver(&self) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            tol: self.tol.unwrap_or(d.tol),
            cond_limit: self.cond_limit.unwrap_or(d.cond_limit),
            ..d
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    Atom,
    Sample,
}

impl NodeRole {
    pub fn name(self) -> &'static str {
        match self {
            NodeRole::Atom => "atom",
            NodeRole::Sample => "sample",
        }
    }
}

/// Per-node invariant data computed from the raw matrices, before any
/// operator is built.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeReport {
    pub path: String,
    pub x: f64,
    pub role: NodeRole,
    pub hermitian_defect: f64,
    /// `‖k α − α k‖` with `k = c c*`.
    pub commutator: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Invariants {
    pub nodes: Vec<NodeReport>,
    pub hermitian_violations: Vec<Diagnostic>,
    pub commutativity_declared: bool,
    pub commutativity_violations: Vec<Diagnostic>,
    /// Present once the operator could be built.
    pub trace_k_integral: Option<f64>,
    pub k_norm_integral: Option<f64>,
}

impl Invariants {
    pub fn max_hermitian_defect(&self) -> f64 {
        self.nodes.iter().map(|n| n.hermitian_defect).fold(0.0, f64::max)
    }

    pub fn commutativity_defect(&self) -> f64 {
        self.nodes.iter().map(|n| n.commutator).fold(0.0, f64::max)
    }

    pub fn violations(&self) -> Vec<Diagnostic> {
        let mut v = self.hermitian_violations.clone();
        v.extend(self.commutativity_violations.iter().cloned());
        if self.trace_k_integral.is_some_and(|t| !t.is_finite()) {
            v.push(Diagnostic {
                path: "operator".into(),
                message: "∫ tr k(x,x) dμ is not finite".into(),
            });
        }
        v
    }
}

/// A document that passed the schema check.
#[derive(Debug, Clone)]
pub struct Document {
    pub atoms: Vec<Atom>,
    pub continuous: Option<ContinuousData>,
    pub dim_h: usize,
    pub rank: usize,
    pub commutativity: bool,
    pub nodes: Vec<NodeData>,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContinuousData {
    Lebesgue { quadrature_nodes: usize },
    Nodes { nodes: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct NodeData {
    pub x: f64,
    pub alpha: CMat,
    pub c: CMat,
    /// Index into `Document::atoms` when the node sits on an atom.
    pub atom: Option<usize>,
}

/// A loaded problem: the operator together with its run configuration.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: OperatorSpec,
    pub invariants: Invariants,
    pub run: RunConfig,
}

pub fn read(path: &Path) -> Result<String, DocError> {
    std::fs::read_to_string(path).map_err(|source| DocError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse(text: &str) -> Result<Document, DocError> {
    let value: Value = serde_json::from_str(text).map_err(|e| DocError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut cx = Checker::default();
    let doc = cx.document(&value);
    match doc {
        Some(d) if cx.errors.is_empty() => Ok(d),
        _ => Err(DocError::Schema(cx.errors)),
    }
}

pub fn load(path: &Path) -> Result<Problem, DocError> {
    parse(&read(path)?)?.into_problem()
}

impl Document {
    pub fn invariants(&self) -> Invariants {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        let mut hermitian_violations = Vec::new();
        let mut commutativity_violations = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let path = format!("operator.nodes[{i}]");
            let hermitian_defect = linalg::hermitian_defect(&n.alpha);
            if hermitian_defect > HERMITIAN_TOL * linalg::hs_norm(&n.alpha).max(1.0) {
                hermitian_violations.push(Diagnostic {
                    path: format!("{path}.alpha"),
                    message: format!("α at x = {} is not Hermitian (defect {hermitian_defect:e})", n.x),
                });
            }
            let k = &n.c * n.c.adjoint();
            let commutator = linalg::op_norm(&(&k * &n.alpha - &n.alpha * &k));
            // same scale as the operator's own check
            let (kn, an) = (linalg::op_norm(&k), linalg::op_norm(&n.alpha));
            if self.commutativity && commutator > 1e-10 * kn * an + 1e-14 * (kn + an).powi(2) {
                commutativity_violations.push(Diagnostic {
                    path,
                    message: format!("commutativity declared but ‖kα − αk‖ = {commutator:e} at x = {}", n.x),
                });
            }
            nodes.push(NodeReport {
                path: format!("operator.nodes[{i}]"),
                x: n.x,
                role: if n.atom.is_some() {
                    NodeRole::Atom
                } else {
                    NodeRole::Sample
                },
                hermitian_defect,
                commutator,
            });
        }
        Invariants {
            nodes,
            hermitian_violations,
            commutativity_declared: self.commutativity,
            commutativity_violations,
            trace_k_integral: None,
            k_norm_integral: None,
        }
    }

    pub fn measure(&self) -> dissim_core::Result<Measure> {
        let cont = match &self.continuous {
            None => ContinuousSpec::None,
            Some(ContinuousData::Lebesgue { quadrature_nodes }) => ContinuousSpec::Lebesgue {
                nodes: *quadrature_nodes,
            },
            Some(ContinuousData::Nodes { nodes, weights }) => ContinuousSpec::Nodes {
                nodes: nodes.clone(),
                weights: weights.clone(),
            },
        };
        Measure::new(self.atoms.clone(), cont)
    }

    /// Builds the operator. Invariant violations are reported with the
    /// offending nodes instead of the operator's first complaint.
    pub fn into_problem(self) -> Result<Problem, DocError> {
        let mut invariants = self.invariants();
        let violations = invariants.violations();
        if !violations.is_empty() {
            return Err(DocError::Invariant(violations));
        }
        if let Err(e) = self.measure() {
            return Err(DocError::Schema(vec![Diagnostic {
                path: "measure".into(),
                message: e.to_string(),
            }]));
        }
        let spec = self.operator().map_err(|e| {
            let d = vec![Diagnostic {
                path: "operator".into(),
                message: e.to_string(),
            }];
            match e {
                dissim_core::Error::Model(_) => DocError::Invariant(d),
                _ => DocError::Schema(d),
            }
        })?;
        invariants.trace_k_integral = Some(spec.trace_k_integral());
        invariants.k_norm_integral = Some(spec.k_norm_integral());
        let violations = invariants.violations();
        if !violations.is_empty() {
            return Err(DocError::Invariant(violations));
        }
        Ok(Problem {
            spec,
            invariants,
            run: self.run,
        })
    }

    fn operator(&self) -> dissim_core::Result<OperatorSpec> {
        let measure = self.measure()?;
        // the measure sorts its atoms; follow its order
        let mut by_atom: Vec<&NodeData> = self.nodes.iter().filter(|n| n.atom.is_some()).collect();
        by_atom.sort_by(|a, b| a.x.total_cmp(&b.x));
        let field = if self.continuous.is_some() {
            let samples = self
                .nodes
                .iter()
                .filter(|n| n.atom.is_none())
                .map(|n| (n.x, n.alpha.clone(), n.c.clone()))
                .collect();
            Some(Arc::new(PiecewiseLinearField::new(samples)?) as Arc<dyn dissim_core::CoefficientField>)
        } else {
            None
        };
        OperatorSpec::new(
            measure,
            self.dim_h,
            self.rank,
            by_atom.iter().map(|n| n.alpha.clone()).collect(),
            by_atom.iter().map(|n| n.c.clone()).collect(),
            field,
            self.commutativity,
        )
    }
}

/// Walks the JSON value collecting every schema problem it can find.
#[derive(Default)]
struct Checker {
    errors: Vec<Diagnostic>,
}

impl Checker {
    fn err(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Diagnostic {
            path: path.into(),
            message: message.into(),
        });
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str, allowed: &[&str]) -> Option<&'a Map<String, Value>> {
        let Some(obj) = v.as_object() else {
            self.err(path, "expected an object");
            return None;
        };
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                self.err(format!("{path}.{key}"), "unknown field");
            }
        }
        Some(obj)
    }

    fn required<'a>(&mut self, obj: &'a Map<String, Value>, path: &str, key: &str) -> Option<&'a Value> {
        let v = obj.get(key);
        if v.is_none() {
            self.err(format!("{path}.{key}"), "missing field");
        }
        v
    }

    fn number(&mut self, v: &Value, path: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.err(path, format!("expected a finite number, got {v}"));
                None
            }
        }
    }

    fn count(&mut self, v: &Value, path: &str) -> Option<usize> {
        match v.as_u64() {
            Some(n) => Some(n as usize),
            None => {
                self.err(path, format!("expected a nonnegative integer, got {v}"));
                None
            }
        }
    }

    fn array<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a Vec<Value>> {
        let a = v.as_array();
        if a.is_none() {
            self.err(path, "expected an array");
        }
        a
    }

    fn numbers(&mut self, v: &Value, path: &str) -> Option<Vec<f64>> {
        let a = self.array(v, path)?;
        let out: Vec<Option<f64>> = a
            .iter()
            .enumerate()
            .map(|(i, x)| self.number(x, &format!("{path}[{i}]")))
            .collect();
        out.into_iter().collect()
    }

    /// A number or an `[re, im]` pair.
    fn complex(&mut self, v: &Value, path: &str) -> Option<C64> {
        if let Some(pair) = v.as_array() {
            if pair.len() != 2 {
                self.err(path, "complex entries are [re, im] pairs");
                return None;
            }
            let re = self.number(&pair[0], &format!("{path}[0]"));
            let im = self.number(&pair[1], &format!("{path}[1]"));
            return Some(c64(re?, im?));
        }
        self.number(v, path).map(|x| c64(x, 0.0))
    }

    fn matrix(&mut self, v: &Value, path: &str, rows: usize, cols: usize) -> Option<CMat> {
        let a = self.array(v, path)?;
        if a.len() != rows * cols {
            self.err(
                path,
                format!("expected {rows}×{cols} = {} entries, got {}", rows * cols, a.len()),
            );
            return None;
        }
        let entries: Vec<Option<C64>> = a
            .iter()
            .enumerate()
            .map(|(i, x)| self.complex(x, &format!("{path}[{i}]")))
            .collect();
        let entries: Option<Vec<C64>> = entries.into_iter().collect();
        Some(linalg::from_rows(rows, cols, &entries?))
    }

    fn unit_position(&mut self, v: &Value, path: &str) -> Option<f64> {
        let x = self.number(v, path)?;
        if !(0.0..=1.0).contains(&x) {
            self.err(path, format!("position {x} is outside [0, 1]"));
            return None;
        }
        Some(x)
    }

    fn document(&mut self, v: &Value) -> Option<Document> {
        let root = self.object(v, "$", &["measure", "operator", "run"])?;
        let measure = self.required(root, "$", "measure").and_then(|m| self.measure(m));
        let operator = self.required(root, "$", "operator").and_then(|o| self.operator(o));
        let run = match root.get("run") {
            Some(r) => self.run(r),
            None => Some(RunConfig::default()),
        };
        let ((atoms, continuous), (dim_h, rank, commutativity, raw_nodes), run) = (measure?, operator?, run?);
        let nodes = self.link(&atoms, continuous.is_some(), raw_nodes)?;
        Some(Document {
            atoms,
            continuous,
            dim_h,
            rank,
            commutativity,
            nodes,
            run,
        })
    }

    #[allow(clippy::type_complexity)]
    fn measure(&mut self, v: &Value) -> Option<(Vec<Atom>, Option<ContinuousData>)> {
        let obj = self.object(v, "measure", &["atoms", "continuous"])?;
        let mut atoms = Vec::new();
        let mut ok = true;
        if let Some(list) = obj.get("atoms") {
            for (i, a) in self.array(list, "measure.atoms")?.iter().enumerate() {
                let path = format!("measure.atoms[{i}]");
                let Some(o) = self.object(a, &path, &["x", "mass"]) else {
                    ok = false;
                    continue;
                };
                let x = self
                    .required(o, &path, "x")
                    .and_then(|x| self.unit_position(x, &format!("{path}.x")));
                let mass = self.required(o, &path, "mass").and_then(|m| {
                    let p = format!("{path}.mass");
                    let m = self.number(m, &p)?;
                    if m <= 0.0 {
                        self.err(p, format!("atom mass must be positive, got {m}"));
                        return None;
                    }
                    Some(m)
                });
                match (x, mass) {
                    (Some(x), Some(mass)) => atoms.push(Atom { x, mass }),
                    _ => ok = false,
                }
            }
        }
        let mut sorted: Vec<(usize, f64)> = atoms.iter().map(|a| a.x).enumerate().collect();
        sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
        for w in sorted.windows(2) {
            if w[1].1 - w[0].1 <= POSITION_TOL {
                self.err(
                    format!("measure.atoms[{}].x", w[1].0.max(w[0].0)),
                    format!("atom at {} is repeated", w[1].1),
                );
                ok = false;
            }
        }
        let continuous = match obj.get("continuous") {
            None | Some(Value::Null) => None,
            Some(c) => Some(self.continuous(c)?),
        };
        if ok && atoms.is_empty() && continuous.is_none() {
            self.err("measure", "the measure is zero: give atoms or a continuous part");
            return None;
        }
        ok.then_some((atoms, continuous))
    }

    fn continuous(&mut self, v: &Value) -> Option<ContinuousData> {
        let path = "measure.continuous";
        let obj = self.object(v, path, &["density", "quadrature_nodes"])?;
        let density = self.required(obj, path, "density")?;
        let qn = match obj.get("quadrature_nodes") {
            Some(n) => {
                let n = self.count(n, &format!("{path}.quadrature_nodes"))?;
                if n == 0 {
                    self.err(format!("{path}.quadrature_nodes"), "needs at least one node");
                    return None;
                }
                Some(n)
            }
            None => None,
        };
        let dpath = format!("{path}.density");
        match density {
            Value::String(s) if s == "lebesgue" => Some(ContinuousData::Lebesgue {
                quadrature_nodes: qn.unwrap_or(DEFAULT_QUADRATURE_NODES),
            }),
            Value::Object(_) => {
                if qn.is_some() {
                    self.err(
                        format!("{path}.quadrature_nodes"),
                        "only meaningful with the lebesgue density",
                    );
                }
                let o = self.object(density, &dpath, &["nodes", "weights"])?;
                let nodes = self.required(o, &dpath, "nodes")?;
                let weights = self.required(o, &dpath, "weights")?;
                let nodes = self.numbers(nodes, &format!("{dpath}.nodes"));
                let weights = self.numbers(weights, &format!("{dpath}.weights"));
                let (nodes, weights) = (nodes?, weights?);
                if nodes.len() != weights.len() || nodes.is_empty() {
                    self.err(
                        &dpath,
                        format!(
                            "nodes and weights must be nonempty and of equal length ({} vs {})",
                            nodes.len(),
                            weights.len()
                        ),
                    );
                    return None;
                }
                let mut ok = true;
                for (i, (&x, &w)) in nodes.iter().zip(&weights).enumerate() {
                    if !(0.0..=1.0).contains(&x) {
                        self.err(format!("{dpath}.nodes[{i}]"), format!("position {x} is outside [0, 1]"));
                        ok = false;
                    }
                    if w <= 0.0 {
                        self.err(
                            format!("{dpath}.weights[{i}]"),
                            format!("weight must be positive, got {w}"),
                        );
                        ok = false;
                    }
                }
                ok.then_some(ContinuousData::Nodes { nodes, weights })
            }
            other => {
                self.err(
                    dpath,
                    format!("expected \"lebesgue\" or {{\"nodes\", \"weights\"}}, got {other}"),
                );
                None
            }
        }
    }

    #[allow(clippy::type_complexity)]
    fn operator(&mut self, v: &Value) -> Option<(usize, usize, bool, Vec<(f64, CMat, CMat)>)> {
        let path = "operator";
        let obj = self.object(v, path, &["dim_H", "dim_h", "rank", "commutativity", "nodes"])?;
        let dim = match (obj.get("dim_H"), obj.get("dim_h")) {
            (Some(_), Some(_)) => {
                self.err("operator.dim_h", "give dim_H or dim_h, not both");
                None
            }
            (Some(d), None) => self.count(d, "operator.dim_H"),
            (None, Some(d)) => self.count(d, "operator.dim_h"),
            (None, None) => {
                self.err("operator.dim_H", "missing field");
                None
            }
        };
        let rank = self
            .required(obj, path, "rank")
            .and_then(|r| self.count(r, "operator.rank"));
        let commutativity = match obj.get("commutativity") {
            None => Some(false),
            Some(Value::Bool(b)) => Some(*b),
            Some(other) => {
                self.err("operator.commutativity", format!("expected true or false, got {other}"));
                None
            }
        };
        let (dim, rank, commutativity) = (dim?, rank?, commutativity?);
        if dim == 0 || rank == 0 {
            self.err(path, "dim_H and rank must be positive");
            return None;
        }
        let list = self.required(obj, path, "nodes")?;
        let mut nodes = Vec::new();
        let mut ok = true;
        for (i, n) in self.array(list, "operator.nodes")?.iter().enumerate() {
            let p = format!("operator.nodes[{i}]");
            let Some(o) = self.object(n, &p, &["x", "alpha", "c"]) else {
                ok = false;
                continue;
            };
            let x = self
                .required(o, &p, "x")
                .and_then(|x| self.unit_position(x, &format!("{p}.x")));
            let alpha = self
                .required(o, &p, "alpha")
                .and_then(|a| self.matrix(a, &format!("{p}.alpha"), dim, dim));
            let c = self
                .required(o, &p, "c")
                .and_then(|c| self.matrix(c, &format!("{p}.c"), dim, rank));
            match (x, alpha, c) {
                (Some(x), Some(a), Some(c)) => nodes.push((x, a, c)),
                _ => ok = false,
            }
        }
        ok.then_some((dim, rank, commutativity, nodes))
    }

    /// Matches operator nodes to atoms.
    fn link(&mut self, atoms: &[Atom], continuous: bool, raw: Vec<(f64, CMat, CMat)>) -> Option<Vec<NodeData>> {
        let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
        let mut nodes = Vec::with_capacity(raw.len());
        let mut samples = 0;
        let mut ok = true;
        for (i, (x, alpha, c)) in raw.into_iter().enumerate() {
            let atom = atoms.iter().position(|a| (a.x - x).abs() <= POSITION_TOL);
            match atom {
                Some(a) => {
                    if let Some(prev) = owner.insert(a, i) {
                        self.err(
                            format!("operator.nodes[{i}].x"),
                            format!("atom at {x} already has data in operator.nodes[{prev}]"),
                        );
                        ok = false;
                    }
                }
                None if continuous => samples += 1,
                None => {
                    self.err(
                        format!("operator.nodes[{i}].x"),
                        format!("no atom of the measure at {x}, and the measure has no continuous part"),
                    );
                    ok = false;
                }
            }
            nodes.push(NodeData { x, alpha, c, atom });
        }
        for (k, a) in atoms.iter().enumerate() {
            if !owner.contains_key(&k) {
                self.err(
                    format!("measure.atoms[{k}]"),
                    format!("no operator node at x = {}", a.x),
                );
                ok = false;
            }
        }
        if continuous && samples == 0 {
            self.err(
                "operator.nodes",
                "the continuous part needs coefficient samples away from the atoms",
            );
            ok = false;
        }
        let mut xs: Vec<(f64, usize)> = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.atom.is_none())
            .map(|(i, n)| (n.x, i))
            .collect();
        xs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in xs.windows(2) {
            if w[1].0 - w[0].0 <= POSITION_TOL {
                self.err(
                    format!("operator.nodes[{}].x", w[1].1),
                    format!("coefficient sample at {} is repeated", w[1].0),
                );
                ok = false;
            }
        }
        ok.then_some(nodes)
    }

    fn run(&mut self, v: &Value) -> Option<RunConfig> {
        let path = "run";
        let obj = self.object(v, path, &["z", "zgrid", "tol", "cond_limit", "analyses"])?;
        let mut run = RunConfig::default();
        let mut ok = true;
        if let Some(zs) = obj.get("z") {
            for (i, z) in self.array(zs, "run.z")?.iter().enumerate() {
                match self.complex(z, &format!("run.z[{i}]")) {
                    Some(z) => run.z.push(z),
                    None => ok = false,
                }
            }
        }
        if let Some(g) = obj.get("zgrid") {
            run.zgrid = self.grid(g);
            ok &= run.zgrid.is_some();
        }
        for (key, slot) in [("tol", &mut run.tol), ("cond_limit", &mut run.cond_limit)] {
            if let Some(t) = obj.get(key) {
                let p = format!("run.{key}");
                match self.number(t, &p) {
                    Some(t) if t > 0.0 => *slot = Some(t),
                    Some(t) => {
                        self.err(p, format!("must be positive, got {t}"));
                        ok = false;
                    }
                    None => ok = false,
                }
            }
        }
        if let Some(a) = obj.get("analyses") {
            let mut out = Vec::new();
            for (i, name) in self.array(a, "run.analyses")?.iter().enumerate() {
                match Analysis::ALL.iter().find(|k| Some(k.name()) == name.as_str()) {
                    Some(&k) => out.push(k),
                    None => {
                        self.err(
                            format!("run.analyses[{i}]"),
                            format!("unknown analysis {name}; expected charfn, det, criteria or oracle"),
                        );
                        ok = false;
                    }
                }
            }
            out.sort();
            out.dedup();
            run.analyses = Some(out);
        }
        ok.then_some(run)
    }

    fn grid(&mut self, v: &Value) -> Option<GridSpec> {
        let path = "run.zgrid";
        let keys = ["re_min", "re_max", "im_min", "im_max", "nx", "ny"];
        let vals: Vec<&Value> = match v {
            Value::Array(a) if a.len() == 6 => a.iter().collect(),
            Value::Object(_) => {
                let o = self.object(v, path, &keys)?;
                let vals: Vec<Option<&Value>> = keys.iter().map(|k| self.required(o, path, k)).collect();
                vals.into_iter().collect::<Option<_>>()?
            }
            _ => {
                self.err(
                    path,
                    "expected [re_min, re_max, im_min, im_max, nx, ny] or an object with those keys",
                );
                return None;
            }
        };
        let f: Vec<Option<f64>> = (0..4)
            .map(|i| self.number(vals[i], &format!("{path}.{}", keys[i])))
            .collect();
        let nx = self.count(vals[4], &format!("{path}.nx"));
        let ny = self.count(vals[5], &format!("{path}.ny"));
        let g = GridSpec {
            re_min: f[0]?,
            re_max: f[1]?,
            im_min: f[2]?,
            im_max: f[3]?,
            nx: nx?,
            ny: ny?,
        };
        if let Err(e) = g.build() {
            self.err(path, e.to_string());
            return None;
        }
        Some(g)
    }
}
