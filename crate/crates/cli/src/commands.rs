//! The subcommands. Each returns the text to emit and an exit status;
//! `main` only parses flags and writes the result.

use dissim_core::cauchy::{self, PointKind};
use dissim_core::linalg::{self, CVec};
use dissim_core::{
    charfunc, criteria, oracle, CriteriaConfig, CriteriaReport, NodeSamples, OperatorSpec, SolverOptions, Verdict,
    VerdictReport, C64,
};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::document::{self, Analysis, DocError, GridSpec, Invariants, Problem, RunConfig};
use crate::output::{complex, fmt_f64, int, num, opt_num, to_csv, to_json};

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok = 0,
    Usage = 1,
    Fails = 2,
    Inconclusive = 3,
}

impl Status {
    pub fn code(self) -> u8 {
        self as u8
    }

    fn of(v: Verdict) -> Self {
        match v {
            Verdict::Holds => Status::Ok,
            Verdict::Fails => Status::Fails,
            Verdict::Inconclusive | Verdict::Inapplicable => Status::Inconclusive,
        }
    }

    /// Failure outranks doubt, doubt outranks success.
    fn combine(self, other: Status) -> Status {
        use Status::*;
        match (self, other) {
            (Usage, _) | (_, Usage) => Usage,
            (Fails, _) | (_, Fails) => Fails,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Ok,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Output {
    pub text: String,
    pub status: Status,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Document(#[from] DocError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] dissim_core::Error),
}

/// Flag overrides; `None`/empty leaves the document's value (or the module
/// default) in place.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub z: Vec<C64>,
    pub zgrid: Option<GridSpec>,
    pub tol: Option<f64>,
    pub cond_limit: Option<f64>,
    pub criteria: CriteriaFlags,
    /// Largest oracle discrepancy still counted as agreement.
    pub agree_tol: Option<f64>,
    /// `charfn`: dump the whole path `G(t, z)` instead of `S_A(z)`.
    pub path: bool,
}

#[derive(Debug, Clone, Default)]
pub struct CriteriaFlags {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub bins: Option<usize>,
    pub halvings: Option<usize>,
    pub window_cap: Option<f64>,
    pub dense_limit: Option<usize>,
}

pub const DEFAULT_AGREE_TOL: f64 = 1e-8;

impl Settings {
    fn solver(&self, run: &RunConfig) -> SolverOptions {
        let base = run.solver();
        SolverOptions {
            tol: self.tol.unwrap_or(base.tol),
            cond_limit: self.cond_limit.unwrap_or(base.cond_limit),
            ..base
        }
    }

    fn grid(&self, run: &RunConfig) -> Result<Option<dissim_core::ZGrid>, CliError> {
        match self.zgrid.or(run.zgrid) {
            Some(g) => Ok(Some(g.build()?)),
            None => Ok(None),
        }
    }

    /// Explicit points first, then the grid, in input order.
    fn z_points(&self, run: &RunConfig) -> Result<Vec<C64>, CliError> {
        let mut zs = if self.z.is_empty() {
            run.z.clone()
        } else {
            self.z.clone()
        };
        if let Some(g) = self.grid(run)? {
            zs.extend_from_slice(g.points());
        }
        Ok(zs)
    }

    fn criteria_config(&self, p: &Problem) -> Result<CriteriaConfig, CliError> {
        let d = CriteriaConfig::default();
        let f = &self.criteria;
        Ok(CriteriaConfig {
            grid: self.grid(&p.run)?,
            grid_params: criteria::GridParams {
                nx: f.nx.unwrap_or(d.grid_params.nx),
                ny: f.ny.unwrap_or(d.grid_params.ny),
                ..d.grid_params
            },
            solver: self.solver(&p.run),
            bins: f.bins.unwrap_or(d.bins),
            halvings: f.halvings.unwrap_or(d.halvings),
            window_cap: f.window_cap.unwrap_or(d.window_cap),
            dense_limit: f.dense_limit.unwrap_or(d.dense_limit),
            ..d
        })
    }
}

fn no_points() -> CliError {
    CliError::Usage("no z values: pass --z or --zgrid, or set run.z / run.zgrid in the document".into())
}

// ---------------------------------------------------------------- validate

/// Schema and invariant diagnostics. Problems in the document are part of
/// the output (status 2); only an unreadable file is an error.
pub fn validate(text: &str) -> Output {
    let mut errors = Vec::new();
    let mut invariants = None;
    match document::parse(text) {
        Err(DocError::Parse { line, column, message }) => errors.push(json!({
            "path": "$", "line": line, "column": column, "message": message,
        })),
        Err(DocError::Schema(d)) | Err(DocError::Invariant(d)) => {
            errors.extend(d.into_iter().map(|d| json!({"path": d.path, "message": d.message})))
        }
        Err(e @ DocError::Io { .. }) => errors.push(json!({"path": "$", "message": e.to_string()})),
        Ok(doc) => {
            let mut inv = doc.invariants();
            if inv.violations().is_empty() {
                match doc.into_problem() {
                    Ok(p) => inv = p.invariants,
                    Err(DocError::Invariant(d)) => {
                        errors.extend(d.into_iter().map(|d| json!({"path": d.path, "message": d.message})))
                    }
                    Err(e) => errors.push(json!({"path": "$", "message": e.to_string()})),
                }
            }
            for d in inv.violations() {
                errors.push(json!({"path": d.path, "message": d.message}));
            }
            invariants = Some(invariants_json(&inv));
        }
    }
    let ok = errors.is_empty();
    let v = json!({
        "status": if ok { "ok" } else { "invalid" },
        "errors": errors,
        "invariants": invariants,
    });
    Output {
        text: to_json(&v),
        status: if ok { Status::Ok } else { Status::Fails },
    }
}

fn invariants_json(inv: &Invariants) -> Value {
    let nodes: Vec<Value> = inv
        .nodes
        .iter()
        .map(|n| {
            json!({
                "path": n.path,
                "x": num(n.x),
                "role": n.role.name(),
                "hermitian_defect": num(n.hermitian_defect),
                "commutator": num(n.commutator),
            })
        })
        .collect();
    json!({
        "hermitian_defect": num(inv.max_hermitian_defect()),
        "commutativity_declared": inv.commutativity_declared,
        "commutativity_defect": num(inv.commutativity_defect()),
        "trace_k_integral": opt_num(inv.trace_k_integral),
        "k_norm_integral": opt_num(inv.k_norm_integral),
        "nodes": nodes,
    })
}

// ------------------------------------------------------------ charfn / det

/// `S_A(z)` and derived quantities at one point, or the solver's error.
#[derive(Debug, Clone)]
pub struct CharRow {
    pub z: C64,
    pub result: Result<CharValues, String>,
}

#[derive(Debug, Clone)]
pub struct CharValues {
    /// Row-major entries of `S_A(z)`.
    pub s: Vec<C64>,
    pub det: C64,
    pub trace_defect: f64,
    /// `det S_A` from the Blaschke/outer product; needs commutativity.
    pub det_formula: Option<Result<C64, String>>,
}

pub fn char_rows(spec: &OperatorSpec, zs: &[C64], opts: &SolverOptions, with_formula: bool) -> Vec<CharRow> {
    zs.par_iter()
        .map(|&z| CharRow {
            z,
            result: charfunc::char_fn(spec, z, opts)
                .map(|c| CharValues {
                    s: row_major(&c.s),
                    det: c.det,
                    trace_defect: c.trace_defect,
                    det_formula: (with_formula && spec.commutativity_declared())
                        .then(|| charfunc::det_char_fn(spec, z, opts).map_err(|e| e.to_string())),
                })
                .map_err(|e| e.to_string()),
        })
        .collect()
}

fn row_major(m: &linalg::CMat) -> Vec<C64> {
    (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
        .collect()
}

fn rows_status(rows: &[CharRow]) -> Status {
    if rows.iter().all(|r| r.result.is_ok()) {
        Status::Ok
    } else {
        Status::Inconclusive
    }
}

pub fn charfn(p: &Problem, settings: &Settings) -> Result<Output, CliError> {
    let zs = settings.z_points(&p.run)?;
    if zs.is_empty() {
        return Err(no_points());
    }
    let opts = settings.solver(&p.run);
    if settings.path {
        return path_dump(&p.spec, &zs, &opts);
    }
    let r = p.spec.rank();
    let mut header: Vec<String> = vec!["re_z".into(), "im_z".into()];
    for i in 1..=r {
        for j in 1..=r {
            header.push(format!("s_{i}_{j}_re"));
            header.push(format!("s_{i}_{j}_im"));
        }
    }
    header.extend(["det_re", "det_im", "trace_defect", "status"].map(String::from));
    let rows = char_rows(&p.spec, &zs, &opts, false);
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let mut out = vec![fmt_f64(row.z.re), fmt_f64(row.z.im)];
            match &row.result {
                Ok(v) => {
                    for e in &v.s {
                        out.push(fmt_f64(e.re));
                        out.push(fmt_f64(e.im));
                    }
                    out.extend([
                        fmt_f64(v.det.re),
                        fmt_f64(v.det.im),
                        fmt_f64(v.trace_defect),
                        "ok".into(),
                    ]);
                }
                Err(e) => {
                    out.extend(std::iter::repeat_n(String::new(), 2 * r * r + 3));
                    out.push(format!("error: {e}"));
                }
            }
            out
        })
        .collect();
    Ok(Output {
        text: to_csv(&header, &cells),
        status: rows_status(&rows),
    })
}

/// `G(t, z)` at every recorded point of the backward sweep.
fn path_dump(spec: &OperatorSpec, zs: &[C64], opts: &SolverOptions) -> Result<Output, CliError> {
    let r = spec.rank();
    let mut header: Vec<String> = ["re_z", "im_z", "t", "point"].map(String::from).to_vec();
    for i in 1..=r {
        for j in 1..=r {
            header.push(format!("g_{i}_{j}_re"));
            header.push(format!("g_{i}_{j}_im"));
        }
    }
    let paths: Vec<_> = zs.par_iter().map(|&z| cauchy::solve_g(spec, z, opts)).collect();
    let mut cells = Vec::new();
    for (z, path) in zs.iter().zip(paths) {
        // a failed sweep is a hard error here: there is no row to flag
        let path = path?;
        for pt in &path.points {
            let mut row = vec![fmt_f64(z.re), fmt_f64(z.im), fmt_f64(pt.t), point_name(pt.kind)];
            for e in row_major(&pt.value) {
                row.push(fmt_f64(e.re));
                row.push(fmt_f64(e.im));
            }
            cells.push(row);
        }
    }
    Ok(Output {
        text: to_csv(&header, &cells),
        status: Status::Ok,
    })
}

fn point_name(k: PointKind) -> String {
    match k {
        PointKind::End => "end".into(),
        PointKind::AtomRight(a) => format!("atom{a}+"),
        PointKind::AtomMid(a) => format!("atom{a}"),
        PointKind::AtomLeft(a) => format!("atom{a}-"),
        PointKind::Node(q) => format!("node{q}"),
        PointKind::CellLeft(q) => format!("cell{q}-"),
        PointKind::StretchStart => "stretch".into(),
    }
}

pub fn det(p: &Problem, settings: &Settings) -> Result<Output, CliError> {
    let zs = settings.z_points(&p.run)?;
    if zs.is_empty() {
        return Err(no_points());
    }
    let header: Vec<String> = [
        "re_z",
        "im_z",
        "det_re",
        "det_im",
        "abs_det",
        "trace_defect",
        "formula_re",
        "formula_im",
        "status",
    ]
    .map(String::from)
    .to_vec();
    let rows = char_rows(&p.spec, &zs, &settings.solver(&p.run), true);
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let mut out = vec![fmt_f64(row.z.re), fmt_f64(row.z.im)];
            match &row.result {
                Ok(v) => {
                    out.extend([
                        fmt_f64(v.det.re),
                        fmt_f64(v.det.im),
                        fmt_f64(v.det.norm()),
                        fmt_f64(v.trace_defect),
                    ]);
                    let status = match &v.det_formula {
                        Some(Ok(d)) => {
                            out.extend([fmt_f64(d.re), fmt_f64(d.im)]);
                            "ok".to_string()
                        }
                        Some(Err(e)) => {
                            out.extend([String::new(), String::new()]);
                            format!("formula error: {e}")
                        }
                        None => {
                            out.extend([String::new(), String::new()]);
                            "ok".to_string()
                        }
                    };
                    out.push(status);
                }
                Err(e) => {
                    out.extend(std::iter::repeat_n(String::new(), 6));
                    out.push(format!("error: {e}"));
                }
            }
            out
        })
        .collect();
    Ok(Output {
        text: to_csv(&header, &cells),
        status: rows_status(&rows),
    })
}

fn char_rows_json(rows: &[CharRow]) -> Value {
    Value::Array(
        rows.iter()
            .map(|row| match &row.result {
                Ok(v) => {
                    let mut m = Map::new();
                    m.insert("z".into(), complex(row.z));
                    m.insert("s".into(), Value::Array(v.s.iter().map(|&e| complex(e)).collect()));
                    m.insert("det".into(), complex(v.det));
                    m.insert("trace_defect".into(), num(v.trace_defect));
                    match &v.det_formula {
                        Some(Ok(d)) => m.insert("det_formula".into(), complex(*d)),
                        Some(Err(e)) => m.insert("det_formula_error".into(), Value::String(e.clone())),
                        None => None,
                    };
                    Value::Object(m)
                }
                Err(e) => json!({"z": complex(row.z), "error": e}),
            })
            .collect(),
    )
}

// ---------------------------------------------------------------- criteria

pub fn criteria(p: &Problem, settings: &Settings) -> Result<Output, CliError> {
    let (v, status) = criteria_json(p, settings)?;
    Ok(Output {
        text: to_json(&v),
        status,
    })
}

fn criteria_json(p: &Problem, settings: &Settings) -> Result<(Value, Status), CliError> {
    let config = settings.criteria_config(p)?;
    let grid = criteria::grid_for(&p.spec, &config);
    let report = criteria::evaluate(&p.spec, &config)?;
    let overall = report.overall();
    let mut v = report_json(&report);
    if let Value::Object(m) = &mut v {
        m.insert(
            "grid".into(),
            json!({
                "kind": if config.grid.is_some() { "explicit" } else { "adaptive" },
                "re": grid.re.iter().map(|&x| num(x)).collect::<Vec<_>>(),
                "im": grid.im.iter().map(|&x| num(x)).collect::<Vec<_>>(),
            }),
        );
        m.insert(
            "config".into(),
            json!({
                "tol": num(config.solver.tol),
                "cond_limit": num(config.solver.cond_limit),
                "bins": int(config.bins),
                "halvings": int(config.halvings),
                "window_cap": num(config.window_cap),
                "sparse_eps": num(config.sparse_eps),
                "n_sparse_eps": num(config.n_sparse_eps),
                "dense_limit": int(config.dense_limit),
            }),
        );
    }
    Ok((v, Status::of(overall)))
}

fn verdict_json(r: &VerdictReport) -> Value {
    json!({
        "verdict": r.verdict.as_str(),
        "checks": r.checks.iter().map(|c| json!({
            "name": c.name,
            "verdict": c.verdict.as_str(),
            "detail": c.detail,
        })).collect::<Vec<_>>(),
        "reasons": r.reasons,
    })
}

fn report_json(r: &CriteriaReport) -> Value {
    let flag = format!("{:?}", r.nu_c.flag).to_lowercase();
    json!({
        "overall": r.overall().as_str(),
        "verdict_2_5": verdict_json(&r.verdict_2_5),
        "verdict_2_6": verdict_json(&r.verdict_2_6),
        "grid_points": int(r.grid_points),
        "c1": opt_num(r.c1),
        "c2_trace": num(r.c2_trace),
        "c2_integral": num(r.c2_integral),
        "c2_route_gap": num(r.c2_route_gap),
        "c3": num(r.c3),
        "c3_skipped": int(r.c3_skipped),
        "utb_bound_excess": opt_num(r.utb_bound_excess),
        "eigenvalues": r.eigenvalues.iter().map(|&(z, m)| json!({
            "z": complex(z),
            "multiplicity": int(m),
        })).collect::<Vec<_>>(),
        "carleson_sup": num(r.carleson_sup),
        "carleson_square": num(r.carleson_square),
        "delta0": num(r.delta0),
        "sparse_inf": num(r.sparse_inf),
        "n_sparse": int(r.n_sparse),
        "nu_c": {
            "sup": num(r.nu_c.sup),
            "flag": flag,
            "ladder": r.nu_c.ladder.iter().map(|&(b, s)| json!([int(b), num(s)])).collect::<Vec<_>>(),
            "histogram": {
                "lo": num(r.nu_c.histogram.lo),
                "width": num(r.nu_c.histogram.width),
                "density": r.nu_c.histogram.density.iter().map(|&d| num(d)).collect::<Vec<_>>(),
            },
        },
        "nu_dh": {"sup": num(r.nu_dh.sup), "x0": num(r.nu_dh.x0), "h": num(r.nu_dh.h)},
        "nu_h": {"sup": num(r.nu_h.sup), "x0": num(r.nu_h.x0), "h": num(r.nu_h.h)},
        "sing_outer": {
            "inf": num(r.sing_outer.inf),
            "argmin": complex(r.sing_outer.argmin),
            "refined_inf": num(r.sing_outer.refined_inf),
            "decays": r.sing_outer.decays,
        },
        "notes": r.notes,
    })
}

// ------------------------------------------------------------------ oracle

#[derive(Debug, Clone, Copy)]
struct Worst {
    value: f64,
    z: Option<C64>,
}

impl Worst {
    fn new() -> Self {
        Worst { value: 0.0, z: None }
    }

    fn update(&mut self, v: f64, z: C64) {
        // NaN counts as the worst possible discrepancy
        if self.value.is_nan() {
            return;
        }
        if v.is_nan() || v > self.value || self.z.is_none() {
            self.value = v;
            self.z = Some(z);
        }
    }

    fn json(&self) -> Value {
        json!({"max": num(self.value), "at": self.z.map_or(Value::Null, complex)})
    }
}

struct OracleRow {
    z: C64,
    char_fn: f64,
    det: f64,
    det_formula: Option<f64>,
    resolvent: f64,
}

fn oracle_row(spec: &OperatorSpec, z: C64, opts: &SolverOptions) -> dissim_core::Result<OracleRow> {
    let s = charfunc::char_fn(spec, z, opts)?;
    let direct = oracle::direct_char_fn(spec, z)?;
    let direct_det = linalg::det(&direct);
    let det_formula = if spec.commutativity_declared() {
        Some((charfunc::det_char_fn(spec, z, opts)? - direct_det).norm())
    } else {
        None
    };
    let h = NodeSamples::new(
        vec![CVec::from_element(spec.dim_h(), linalg::real(1.0)); spec.measure().atoms().len()],
        vec![],
    );
    let f = cauchy::resolvent_apply(spec, z, &h, opts)?.f;
    let d = oracle::direct_resolvent(spec, z, &h)?;
    let resolvent = f
        .atoms
        .iter()
        .zip(&d.atoms)
        .map(|(a, b)| (a - b).norm() / (1.0 + b.norm()))
        .fold(0.0, f64::max);
    Ok(OracleRow {
        z,
        char_fn: linalg::max_abs_diff(&s.s, &direct),
        det: (s.det - direct_det).norm(),
        det_formula,
        resolvent,
    })
}

fn oracle_json(p: &Problem, settings: &Settings) -> Result<(Value, Status), CliError> {
    if p.spec.measure().has_continuous_part() {
        return Err(CliError::Usage(
            "oracle comparison needs a purely atomic measure; this document has a continuous part".into(),
        ));
    }
    let mut zs = settings.z_points(&p.run)?;
    let explicit = !zs.is_empty();
    if !explicit {
        let config = settings.criteria_config(p)?;
        zs = criteria::grid_for(&p.spec, &config).points().to_vec();
    }
    let opts = settings.solver(&p.run);
    let tol = settings.agree_tol.unwrap_or(DEFAULT_AGREE_TOL);
    let rows: Vec<(C64, dissim_core::Result<OracleRow>)> =
        zs.par_iter().map(|&z| (z, oracle_row(&p.spec, z, &opts))).collect();

    let (mut s, mut d, mut df, mut r) = (Worst::new(), Worst::new(), Worst::new(), Worst::new());
    let mut errors = Vec::new();
    for (z, row) in &rows {
        match row {
            Ok(row) => {
                s.update(row.char_fn, row.z);
                d.update(row.det, row.z);
                r.update(row.resolvent, row.z);
                if let Some(v) = row.det_formula {
                    df.update(v, row.z);
                }
            }
            Err(e) => errors.push(json!({"z": complex(*z), "error": e.to_string()})),
        }
    }
    let formula = p.spec.commutativity_declared();
    let mut worst = [s.value, d.value, r.value].into_iter().fold(0.0, f64::max);
    if formula {
        worst = worst.max(df.value);
    }
    let agree = errors.is_empty() && worst <= tol && !worst.is_nan();

    let nc = oracle::normal_similarity_check(&p.spec);
    let v = json!({
        "agree": agree,
        "agree_tol": num(tol),
        "points": int(zs.len()),
        "grid": if explicit { "explicit" } else { "adaptive" },
        "char_fn": s.json(),
        "det": d.json(),
        "det_formula": if formula { df.json() } else { Value::Null },
        "resolvent": r.json(),
        "errors": errors,
        "operator": {
            "normal": nc.normal,
            "normality_defect": num(nc.normality_defect),
            "diagonalizable": nc.diagonalizable,
            "condition_number": num(nc.condition_number),
            "eigenvalues": nc.eigenvalues.iter().map(|e| json!({
                "value": complex(e.value),
                "algebraic": int(e.algebraic),
                "geometric": int(e.geometric),
            })).collect::<Vec<_>>(),
        },
    });
    Ok((v, if agree { Status::Ok } else { Status::Fails }))
}

pub fn oracle(p: &Problem, settings: &Settings) -> Result<Output, CliError> {
    let (v, status) = oracle_json(p, settings)?;
    Ok(Output {
        text: to_json(&v),
        status,
    })
}

// ------------------------------------------------------------------ report

/// Every analysis the run block asks for (all of them by default) in one
/// JSON document. Analyses that cannot run say why.
pub fn report(p: &Problem, settings: &Settings) -> Result<Output, CliError> {
    let wanted = p.run.analyses.clone().unwrap_or_else(|| Analysis::ALL.to_vec());
    let mut out = Map::new();
    out.insert("document".into(), invariants_json(&p.invariants));
    let mut status = Status::Ok;
    let zs = settings.z_points(&p.run)?;
    let opts = settings.solver(&p.run);
    for a in wanted {
        // charfn and det share their rows
        let key = if a == Analysis::Det { "charfn" } else { a.name() };
        if out.contains_key(key) {
            continue;
        }
        let v = match a {
            Analysis::Charfn | Analysis::Det if zs.is_empty() => json!({"skipped": no_points().to_string()}),
            Analysis::Charfn | Analysis::Det => {
                let rows = char_rows(&p.spec, &zs, &opts, true);
                status = status.combine(rows_status(&rows));
                char_rows_json(&rows)
            }
            Analysis::Criteria => {
                let (v, s) = criteria_json(p, settings)?;
                status = status.combine(s);
                v
            }
            Analysis::Oracle => match oracle_json(p, settings) {
                Ok((v, s)) => {
                    status = status.combine(s);
                    v
                }
                Err(CliError::Usage(msg)) => json!({"skipped": msg}),
                Err(e) => return Err(e),
            },
        };
        out.insert(key.into(), v);
    }
    Ok(Output {
        text: to_json(&Value::Object(out)),
        status,
    })
}
