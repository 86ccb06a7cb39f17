//! Problem data `(μ, α, c)` and the finite matrix picture of
//!
//! ```text
//! (Af)(x) = α(x) f(x) + ½ i μ({x}) k(x,x) f(x) + i ∫_[0,x) k(x,s) f(s) dμ(s),   k = c c*.
//! ```
//!
//! Atoms carry explicit `α`/`c` matrices. A continuous part needs a
//! [`CoefficientField`] that can be evaluated anywhere in `[0,1]`; its values
//! at the quadrature nodes are cached. The discretization treats each
//! quadrature node as an atom whose mass is its weight, which is exact for
//! purely atomic measures.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, I};
use crate::measure::Measure;

pub use crate::measure::NodeSamples;

/// Tolerance on `‖α − α*‖` relative to `max(1, ‖α‖)`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative tolerance on the commutator `‖kα − αk‖ ≤ tol·‖k‖‖α‖`.
pub const COMMUTATIVITY_TOL: f64 = 1e-9;

/// `α(x)` and `c(x)` as functions on `[0,1]`.
pub trait CoefficientField: Send + Sync {
    fn alpha(&self, x: f64) -> CMat;
    fn c(&self, x: f64) -> CMat;
}

/// Field given by two closures.
pub struct FnField<A, C> {
    pub alpha: A,
    pub c: C,
}

impl<A, C> CoefficientField for FnField<A, C>
where
    A: Fn(f64) -> CMat + Send + Sync,
    C: Fn(f64) -> CMat + Send + Sync,
{
    fn alpha(&self, x: f64) -> CMat {
        (self.alpha)(x)
    }
    fn c(&self, x: f64) -> CMat {
        (self.c)(x)
    }
}

/// The same `α` and `c` everywhere.
#[derive(Debug, Clone)]
pub struct ConstantField {
    pub alpha: CMat,
    pub c: CMat,
}

impl CoefficientField for ConstantField {
    fn alpha(&self, _x: f64) -> CMat {
        self.alpha.clone()
    }
    fn c(&self, _x: f64) -> CMat {
        self.c.clone()
    }
}

/// Linear interpolation between samples `(x, α, c)`, constant outside the
/// sampled range. Interpolating Hermitian matrices keeps them Hermitian.
#[derive(Debug, Clone)]
pub struct PiecewiseLinearField {
    xs: Vec<f64>,
    alphas: Vec<CMat>,
    cs: Vec<CMat>,
}

impl PiecewiseLinearField {
    pub fn new(mut samples: Vec<(f64, CMat, CMat)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::input("coefficient field needs at least one sample"));
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::input("coefficient sample positions must be distinct"));
        }
        let (a0, c0) = (samples[0].1.shape(), samples[0].2.shape());
        if samples.iter().any(|s| s.1.shape() != a0 || s.2.shape() != c0) {
            return Err(Error::input("coefficient samples have inconsistent shapes"));
        }
        let mut xs = Vec::with_capacity(samples.len());
        let mut alphas = Vec::with_capacity(samples.len());
        let mut cs = Vec::with_capacity(samples.len());
        for (x, a, c) in samples {
            xs.push(x);
            alphas.push(a);
            cs.push(c);
        }
        Ok(Self { xs, alphas, cs })
    }

    fn interpolate(&self, data: &[CMat], x: f64) -> CMat {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return data[0].clone();
        }
        if x >= self.xs[n - 1] {
            return data[n - 1].clone();
        }
        let k = self.xs.partition_point(|&s| s <= x) - 1;
        let t = (x - self.xs[k]) / (self.xs[k + 1] - self.xs[k]);
        data[k].scale(1.0 - t) + data[k + 1].scale(t)
    }
}

impl CoefficientField for PiecewiseLinearField {
    fn alpha(&self, x: f64) -> CMat {
        self.interpolate(&self.alphas, x)
    }
    fn c(&self, x: f64) -> CMat {
        self.interpolate(&self.cs, x)
    }
}

/// A node of the discretization: an atom or a quadrature node, by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Atom(usize),
    Quad(usize),
}

#[derive(Clone)]
pub struct OperatorSpec {
    measure: Measure,
    dim_h: usize,
    rank: usize,
    alpha: NodeSamples<CMat>,
    c: NodeSamples<CMat>,
    field: Option<Arc<dyn CoefficientField>>,
    commutativity: bool,
}

impl fmt::Debug for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorSpec")
            .field("dim_h", &self.dim_h)
            .field("rank", &self.rank)
            .field("atoms", &self.measure.atoms().len())
            .field("nodes", &self.measure.nodes().len())
            .field("commutativity", &self.commutativity)
            .finish()
    }
}

impl OperatorSpec {
    /// Builds and validates a spec. `atom_alpha`/`atom_c` give the data at
    /// each atom in increasing order; `field` is required when the measure
    /// has a continuous part and is sampled at the quadrature nodes.
    pub fn new(
        measure: Measure,
        dim_h: usize,
        rank: usize,
        atom_alpha: Vec<CMat>,
        atom_c: Vec<CMat>,
        field: Option<Arc<dyn CoefficientField>>,
        commutativity: bool,
    ) -> Result<Self> {
        if dim_h == 0 || rank == 0 {
            return Err(Error::input("dim_H and rank must be positive"));
        }
        if atom_alpha.len() != measure.atoms().len() || atom_c.len() != measure.atoms().len() {
            return Err(Error::input(format!(
                "measure has {} atoms but operator data covers {} α and {} c values",
                measure.atoms().len(),
                atom_alpha.len(),
                atom_c.len()
            )));
        }
        let (node_alpha, node_c) = match (&field, measure.has_continuous_part()) {
            (Some(f), _) => (
                measure.nodes().iter().map(|q| f.alpha(q.x)).collect(),
                measure.nodes().iter().map(|q| f.c(q.x)).collect(),
            ),
            (None, false) => (Vec::new(), Vec::new()),
            (None, true) => return Err(Error::input("a continuous part needs coefficient values on [0,1]")),
        };
        let spec = OperatorSpec {
            measure,
            dim_h,
            rank,
            alpha: NodeSamples::new(atom_alpha, node_alpha),
            c: NodeSamples::new(atom_c, node_c),
            field,
            commutativity,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// All coefficients taken from `field`, atoms included.
    pub fn from_field(
        measure: Measure,
        dim_h: usize,
        rank: usize,
        field: Arc<dyn CoefficientField>,
        commutativity: bool,
    ) -> Result<Self> {
        let atom_alpha = measure.atoms().iter().map(|a| field.alpha(a.x)).collect();
        let atom_c = measure.atoms().iter().map(|a| field.c(a.x)).collect();
        Self::new(measure, dim_h, rank, atom_alpha, atom_c, Some(field), commutativity)
    }

    /// Scalar (`dim_H = rank = 1`) atomic spec.
    pub fn scalar_atomic(measure: Measure, alpha: &[f64], c: &[C64]) -> Result<Self> {
        let a = alpha.iter().map(|&v| linalg::scalar(linalg::real(v))).collect();
        let cc = c.iter().map(|&v| linalg::scalar(v)).collect();
        Self::new(measure, 1, 1, a, cc, None, true)
    }

    fn validate(&self) -> Result<()> {
        for id in self.node_ids() {
            let (a, c) = (self.alpha(id), self.c(id));
            if a.shape() != (self.dim_h, self.dim_h) {
                return Err(Error::input(format!(
                    "α at {:?} has shape {:?}, expected {}×{}",
                    id,
                    a.shape(),
                    self.dim_h,
                    self.dim_h
                )));
            }
            if c.shape() != (self.dim_h, self.rank) {
                return Err(Error::input(format!(
                    "c at {:?} has shape {:?}, expected {}×{}",
                    id,
                    c.shape(),
                    self.dim_h,
                    self.rank
                )));
            }
            if a.iter().chain(c.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::input(format!("non-finite coefficient at {id:?}")));
            }
            let defect = linalg::hermitian_defect(a);
            if defect > HERMITIAN_TOL * linalg::hs_norm(a).max(1.0) {
                return Err(Error::model(format!(
                    "α at x = {} is not Hermitian (defect {defect:e})",
                    self.position(id)
                )));
            }
        }
        if self.commutativity {
            for id in self.node_ids() {
                let d = self.node_commutator(id);
                if d > self.commutativity_tolerance(id) {
                    return Err(Error::model(format!(
                        "commutativity declared but ‖kα − αk‖ = {d:e} at x = {}",
                        self.position(id)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn commutativity_declared(&self) -> bool {
        self.commutativity
    }

    pub fn field(&self) -> Option<&Arc<dyn CoefficientField>> {
        self.field.as_ref()
    }

    pub fn alpha_samples(&self) -> &NodeSamples<CMat> {
        &self.alpha
    }

    pub fn c_samples(&self) -> &NodeSamples<CMat> {
        &self.c
    }

    /// Every atom and quadrature node, ordered by position.
    pub fn node_ids(&self) -> Vec<NodeId> {
        let atoms = self.measure.atoms();
        let nodes = self.measure.nodes();
        let mut ids = Vec::with_capacity(atoms.len() + nodes.len());
        let (mut ia, mut iq) = (0, 0);
        while ia < atoms.len() || iq < nodes.len() {
            if iq >= nodes.len() || (ia < atoms.len() && atoms[ia].x < nodes[iq].x) {
                ids.push(NodeId::Atom(ia));
                ia += 1;
            } else {
                ids.push(NodeId::Quad(iq));
                iq += 1;
            }
        }
        ids
    }

    fn check_node(&self, id: NodeId) -> Result<()> {
        let ok = match id {
            NodeId::Atom(k) => k < self.measure.atoms().len(),
            NodeId::Quad(k) => k < self.measure.nodes().len(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("unknown node {id:?}")))
        }
    }

    pub fn position(&self, id: NodeId) -> f64 {
        match id {
            NodeId::Atom(k) => self.measure.atoms()[k].x,
            NodeId::Quad(k) => self.measure.nodes()[k].x,
        }
    }

    /// Atom mass or quadrature weight.
    pub fn weight(&self, id: NodeId) -> f64 {
        match id {
            NodeId::Atom(k) => self.measure.atoms()[k].mass,
            NodeId::Quad(k) => self.measure.nodes()[k].weight,
        }
    }

    pub fn alpha(&self, id: NodeId) -> &CMat {
        match id {
            NodeId::Atom(k) => &self.alpha.atoms[k],
            NodeId::Quad(k) => &self.alpha.nodes[k],
        }
    }

    pub fn c(&self, id: NodeId) -> &CMat {
        match id {
            NodeId::Atom(k) => &self.c.atoms[k],
            NodeId::Quad(k) => &self.c.nodes[k],
        }
    }

    /// `(α(x), c(x))` at an arbitrary point: atom or node data when `x` is
    /// one, otherwise the coefficient field.
    pub fn coefficients_at(&self, x: f64) -> Result<(CMat, CMat)> {
        if let Some(k) = self.measure.atom_index(x) {
            return Ok((self.alpha.atoms[k].clone(), self.c.atoms[k].clone()));
        }
        if let Ok(k) = self.measure.nodes().binary_search_by(|q| q.x.total_cmp(&x)) {
            return Ok((self.alpha.nodes[k].clone(), self.c.nodes[k].clone()));
        }
        match &self.field {
            Some(f) => Ok((f.alpha(x), f.c(x))),
            None => Err(Error::input(format!("no coefficient data at x = {x}"))),
        }
    }

    /// `k(x,s) = c(x) c(s)*`.
    pub fn kernel_eval(&self, x: NodeId, s: NodeId) -> Result<CMat> {
        self.check_node(x)?;
        self.check_node(s)?;
        Ok(self.c(x) * self.c(s).adjoint())
    }

    /// `k(x,x)` for a node known to exist.
    pub fn k_diag(&self, id: NodeId) -> CMat {
        let c = self.c(id);
        c * c.adjoint()
    }

    /// `∫ tr k(x,x) dμ(x) = Σ weight·‖c‖²_HS`.
    pub fn trace_k_integral(&self) -> f64 {
        self.node_ids()
            .into_iter()
            .map(|id| self.weight(id) * linalg::hs_norm(self.c(id)).powi(2))
            .sum()
    }

    /// `Σ weight·‖k(x,x)‖`, the total generator size on the mass axis.
    pub fn k_norm_integral(&self) -> f64 {
        self.node_ids()
            .into_iter()
            .map(|id| self.weight(id) * linalg::op_norm(self.c(id)).powi(2))
            .sum()
    }

    /// `sup μ_x ‖k(x,x)‖` over atoms.
    pub fn max_atom_k(&self) -> f64 {
        (0..self.measure.atoms().len())
            .map(|k| self.measure.atoms()[k].mass * linalg::op_norm(&self.c.atoms[k]).powi(2))
            .fold(0.0, f64::max)
    }

    /// Lower edge `1 + ½ sup μ_x‖k(x,x)‖` of the half-plane where the
    /// generator is bounded by `‖k‖`.
    pub fn bounded_region_threshold(&self) -> f64 {
        1.0 + 0.5 * self.max_atom_k()
    }

    fn node_commutator(&self, id: NodeId) -> f64 {
        let k = self.k_diag(id);
        let a = self.alpha(id);
        linalg::op_norm(&(&k * a - a * &k))
    }

    fn commutativity_tolerance(&self, id: NodeId) -> f64 {
        let k = linalg::op_norm(&self.k_diag(id));
        let a = linalg::op_norm(self.alpha(id));
        COMMUTATIVITY_TOL * k * a + 1e-14 * (k + a).powi(2)
    }

    /// `max_x ‖k(x,x)α(x) − α(x)k(x,x)‖`; zero iff `k(x,x)` commutes with
    /// every resolvent of `α(x)`.
    pub fn commutativity_defect(&self) -> f64 {
        self.node_ids()
            .into_iter()
            .map(|id| self.node_commutator(id))
            .fold(0.0, f64::max)
    }

    /// Whether the commutator is within tolerance at every node, whatever
    /// was declared.
    pub fn commutes(&self) -> bool {
        self.node_ids()
            .into_iter()
            .all(|id| self.node_commutator(id) <= self.commutativity_tolerance(id))
    }

    /// Common eigenbasis of `k(x,x)` and `α(x)` at atom `atom`, restricted to
    /// the range of `k(x,x)`. Entries are ordered by descending `κ²`, then
    /// ascending `α_j`.
    pub fn joint_spectrum(&self, atom: usize) -> Result<Vec<JointEigen>> {
        if !self.commutativity {
            return Err(Error::model("joint spectrum requires declared commutativity"));
        }
        if atom >= self.measure.atoms().len() {
            return Err(Error::input(format!("unknown atom {atom}")));
        }
        let id = NodeId::Atom(atom);
        if self.node_commutator(id) > self.commutativity_tolerance(id) {
            return Err(Error::model(format!(
                "k and α do not commute at x = {}",
                self.position(id)
            )));
        }
        Ok(joint_diagonalize(&self.k_diag(id), self.alpha(id)))
    }

    /// Eigenvalues `z_j(x) = α_j(x) + ½ i μ_x κ_j(x)²` of `A` in the upper
    /// half-plane, one per atom and positive branch of `k(x,x)`.
    pub fn atom_eigenvalues(&self) -> Result<SpectrumData> {
        let mut entries = Vec::new();
        for (k, a) in self.measure.atoms().iter().enumerate() {
            for (branch, je) in self.joint_spectrum(k)?.into_iter().enumerate() {
                let z = C64::new(je.alpha, 0.5 * a.mass * je.kappa2);
                entries.push(SpectrumEntry {
                    atom: k,
                    x: a.x,
                    branch,
                    kappa2: je.kappa2,
                    z,
                    phase: blaschke_phase(z),
                });
            }
        }
        Ok(SpectrumData { entries })
    }

    /// Dense block matrix of `A` on the nodes (coefficient vectors, not the
    /// orthonormalized form).
    pub fn assemble(&self) -> DiscreteOperator {
        let ids = self.node_ids();
        let n = self.dim_h;
        let dim = ids.len() * n;
        let mut m = linalg::zeros(dim, dim);
        for (bi, &x) in ids.iter().enumerate() {
            let cx = self.c(x);
            let diag = self.alpha(x) + (cx * cx.adjoint()).scale(0.5 * self.weight(x)) * I;
            m.view_mut((bi * n, bi * n), (n, n)).copy_from(&diag);
            for (bj, &s) in ids.iter().enumerate().take(bi) {
                let block = (cx * self.c(s).adjoint()).scale(self.weight(s)) * I;
                m.view_mut((bi * n, bj * n), (n, n)).copy_from(&block);
            }
        }
        self.discrete(ids, m)
    }

    /// Dense block matrix of `A*`, assembled from the `∫_{x−}^1` form.
    pub fn adjoint(&self) -> DiscreteOperator {
        let ids = self.node_ids();
        let n = self.dim_h;
        let dim = ids.len() * n;
        let mut m = linalg::zeros(dim, dim);
        for (bi, &x) in ids.iter().enumerate() {
            let cx = self.c(x);
            let diag = self.alpha(x) - (cx * cx.adjoint()).scale(0.5 * self.weight(x)) * I;
            m.view_mut((bi * n, bi * n), (n, n)).copy_from(&diag);
            for (bj, &s) in ids.iter().enumerate().skip(bi + 1) {
                let block = (cx * self.c(s).adjoint()).scale(self.weight(s)) * (-I);
                m.view_mut((bi * n, bj * n), (n, n)).copy_from(&block);
            }
        }
        self.discrete(ids, m)
    }

    /// `Im A = ½ ∫ k(x,s) · dμ(s)` assembled from `k` alone, together with
    /// `tr(2 Im A)`.
    pub fn imag_part(&self) -> (DiscreteOperator, f64) {
        let ids = self.node_ids();
        let n = self.dim_h;
        let dim = ids.len() * n;
        let mut m = linalg::zeros(dim, dim);
        for (bi, &x) in ids.iter().enumerate() {
            for (bj, &s) in ids.iter().enumerate() {
                let block = (self.c(x) * self.c(s).adjoint()).scale(0.5 * self.weight(s));
                m.view_mut((bi * n, bj * n), (n, n)).copy_from(&block);
            }
        }
        let op = self.discrete(ids, m);
        let tr = 2.0 * linalg::trace(&op.matrix).re;
        (op, tr)
    }

    /// Stacked `c` blocks (`dim × r`), the coefficient form of `c: E → L²`.
    pub fn stacked_c(&self) -> CMat {
        let ids = self.node_ids();
        let n = self.dim_h;
        let mut m = linalg::zeros(ids.len() * n, self.rank);
        for (bi, &x) in ids.iter().enumerate() {
            m.view_mut((bi * n, 0), (n, self.rank)).copy_from(self.c(x));
        }
        m
    }

    fn discrete(&self, ids: Vec<NodeId>, matrix: CMat) -> DiscreteOperator {
        let weights = ids.iter().map(|&id| self.weight(id)).collect();
        let positions = ids.iter().map(|&id| self.position(id)).collect();
        DiscreteOperator {
            nodes: ids,
            positions,
            weights,
            dim_h: self.dim_h,
            matrix,
        }
    }
}

/// One joint eigenpair at an atom.
#[derive(Debug, Clone)]
pub struct JointEigen {
    pub kappa2: f64,
    pub alpha: f64,
    pub vector: crate::linalg::CVec,
}

/// Joint diagonalization of commuting Hermitian `k ≥ 0` and `α` on the range
/// of `k`: eigenspaces of `k` are found first, then `α` is diagonalized
/// inside each of them.
pub fn joint_diagonalize(k: &CMat, alpha: &CMat) -> Vec<JointEigen> {
    let (vals, vecs) = linalg::hermitian_eigen(k);
    let scale = vals.first().copied().unwrap_or(0.0).max(0.0);
    if scale == 0.0 {
        return Vec::new();
    }
    let zero_tol = 1e-10 * scale;
    let group_tol = 1e-9 * scale;
    let mut out = Vec::new();
    let mut start = 0;
    while start < vals.len() && vals[start] > zero_tol {
        let mut end = start + 1;
        while end < vals.len() && vals[end] > zero_tol && vals[start] - vals[end] <= group_tol {
            end += 1;
        }
        let u = vecs.columns(start, end - start).into_owned();
        let kappa2 = vals[start..end].iter().sum::<f64>() / (end - start) as f64;
        let sub = u.adjoint() * alpha * &u;
        let (avals, avecs) = linalg::hermitian_eigen(&sub);
        for (j, &a) in avals.iter().enumerate().rev() {
            out.push(JointEigen {
                kappa2,
                alpha: a,
                vector: &u * avecs.column(j),
            });
        }
        start = end;
    }
    out
}

/// Phase `φ` with `e^{iφ}(i − z)/(i − z̄) > 0`; zero when `z = i` up to
/// roundoff, where the phase is undefined.
pub fn blaschke_phase(z: C64) -> f64 {
    let q = (I - z) / (I - z.conj());
    if (z - I).norm() <= 1e-12 * z.norm() {
        0.0
    } else {
        -q.arg()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEntry {
    pub atom: usize,
    pub x: f64,
    pub branch: usize,
    pub kappa2: f64,
    pub z: C64,
    pub phase: f64,
}

impl SpectrumEntry {
    pub fn weight(&self) -> f64 {
        self.z.im
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpectrumData {
    pub entries: Vec<SpectrumEntry>,
}

impl SpectrumData {
    pub fn points(&self) -> Vec<C64> {
        self.entries.iter().map(|e| e.z).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// `Σ Im z_j(x)`.
    pub fn blaschke_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.z.im).sum()
    }

    /// Groups eigenvalues closer than `tol` and returns `(λ, multiplicity)`
    /// pairs, `λ` being the first member of each group.
    pub fn clusters(&self, tol: f64) -> Vec<(C64, usize)> {
        cluster_points(&self.points(), tol)
    }
}

/// Single-linkage clustering of points within `tol`.
pub fn cluster_points(points: &[C64], tol: f64) -> Vec<(C64, usize)> {
    let mut label: Vec<usize> = (0..points.len()).collect();
    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..points.len() {
        for j in 0..i {
            if (points[i] - points[j]).norm() <= tol {
                let (a, b) = (root(&mut label, i), root(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut out: Vec<(usize, C64, usize)> = Vec::new();
    for i in 0..points.len() {
        let r = root(&mut label, i);
        match out.iter_mut().find(|e| e.0 == r) {
            Some(e) => e.2 += 1,
            None => out.push((r, points[r], 1)),
        }
    }
    out.into_iter().map(|(_, z, m)| (z, m)).collect()
}

/// Dense matrix of an operator on the node space with the weighted inner
/// product `⟨f, g⟩ = Σ w_x ⟨f(x), g(x)⟩`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub nodes: Vec<NodeId>,
    pub positions: Vec<f64>,
    pub weights: Vec<f64>,
    pub dim_h: usize,
    pub matrix: CMat,
}

impl DiscreteOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn sqrt_weights(&self) -> Vec<f64> {
        self.weights
            .iter()
            .flat_map(|&w| std::iter::repeat_n(w.sqrt(), self.dim_h))
            .collect()
    }

    /// `W^{1/2} M W^{−1/2}`: the matrix in an orthonormal basis, where the
    /// weighted adjoint becomes the conjugate transpose.
    pub fn orthonormal_form(&self) -> CMat {
        let s = self.sqrt_weights();
        let mut m = self.matrix.clone();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                m[(i, j)] *= s[i] / s[j];
            }
        }
        m
    }

    /// `W^{−1} M^H W`, the adjoint in the weighted inner product.
    pub fn weighted_adjoint(&self) -> CMat {
        let w: Vec<f64> = self.sqrt_weights().iter().map(|s| s * s).collect();
        let mut m = self.matrix.adjoint();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                m[(i, j)] *= w[j] / w[i];
            }
        }
        m
    }

    /// Scales a coefficient vector into orthonormal coordinates.
    pub fn to_orthonormal(&self, v: &CMat) -> CMat {
        let s = self.sqrt_weights();
        let mut out = v.clone();
        for i in 0..out.nrows() {
            for j in 0..out.ncols() {
                out[(i, j)] *= s[i];
            }
        }
        out
    }

    pub fn from_orthonormal(&self, v: &CMat) -> CMat {
        let s = self.sqrt_weights();
        let mut out = v.clone();
        for i in 0..out.nrows() {
            for j in 0..out.ncols() {
                out[(i, j)] /= s[i];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, from_rows, real, scalar};
    use crate::measure::Atom;
    use approx::assert_relative_eq;

    fn one_atom() -> OperatorSpec {
        let m = Measure::atomic(vec![Atom { x: 0.5, mass: 1.0 }]).unwrap();
        OperatorSpec::scalar_atomic(m, &[0.0], &[real(2f64.sqrt())]).unwrap()
    }

    fn two_atoms() -> OperatorSpec {
        let m = Measure::atomic(vec![Atom { x: 0.25, mass: 1.0 }, Atom { x: 0.75, mass: 1.0 }]).unwrap();
        OperatorSpec::scalar_atomic(m, &[0.0, 0.0], &[real(1.0), real(1.0)]).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let s = one_atom();
        let k = s.kernel_eval(NodeId::Atom(0), NodeId::Atom(0)).unwrap();
        assert_relative_eq!(k[(0, 0)].re, 2.0, epsilon = 1e-15);
        assert!(s.kernel_eval(NodeId::Atom(3), NodeId::Atom(0)).is_err());

        let m = Measure::atomic(vec![Atom { x: 0.1, mass: 1.0 }, Atom { x: 0.2, mass: 1.0 }]).unwrap();
        let a = vec![linalg::zeros(2, 2), linalg::zeros(2, 2)];
        let c = vec![
            from_rows(2, 1, &[real(1.0), real(0.0)]),
            from_rows(2, 1, &[real(0.0), real(1.0)]),
        ];
        let s = OperatorSpec::new(m, 2, 1, a, c, None, false).unwrap();
        let k = s.kernel_eval(NodeId::Atom(0), NodeId::Atom(1)).unwrap();
        assert_eq!(k, from_rows(2, 2, &[real(0.0), real(1.0), real(0.0), real(0.0)]));
    }

    #[test]
    fn assemble_examples() {
        assert!((one_atom().assemble().matrix - scalar(I)).norm() < 1e-15);
        let a = two_atoms().assemble().matrix;
        assert_eq!(a, from_rows(2, 2, &[c64(0.0, 0.5), real(0.0), I, c64(0.0, 0.5)]));
        let adj = two_atoms().adjoint().matrix;
        assert_eq!(adj, from_rows(2, 2, &[c64(0.0, -0.5), -I, real(0.0), c64(0.0, -0.5)]));
        assert!((one_atom().adjoint().matrix - scalar(-I)).norm() < 1e-15);
    }

    #[test]
    fn imag_part_examples() {
        let (im, tr) = one_atom().imag_part();
        assert_relative_eq!(im.matrix[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(tr, 2.0, epsilon = 1e-15);
        let (im, tr) = two_atoms().imag_part();
        assert!(im.matrix.iter().all(|z| (z - real(0.5)).norm() < 1e-15));
        assert_relative_eq!(tr, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn commutativity_examples() {
        assert_eq!(one_atom().commutativity_defect(), 0.0);
        let m = Measure::atomic(vec![Atom { x: 0.5, mass: 1.0 }]).unwrap();
        let alpha = from_rows(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)]);
        let c = from_rows(2, 2, &[real(1.0), real(0.0), real(0.0), real(2f64.sqrt())]);
        let s = OperatorSpec::new(m.clone(), 2, 2, vec![alpha.clone()], vec![c.clone()], None, false).unwrap();
        assert_relative_eq!(s.commutativity_defect(), 1.0, epsilon = 1e-12);
        assert!(matches!(
            OperatorSpec::new(m, 2, 2, vec![alpha], vec![c], None, true),
            Err(Error::Model(_))
        ));
    }

    #[test]
    fn joint_spectrum_drops_kernel_branch() {
        let m = Measure::atomic(vec![Atom { x: 0.5, mass: 1.0 }]).unwrap();
        let alpha = from_rows(2, 2, &[real(1.0), real(0.0), real(0.0), real(5.0)]);
        let c = from_rows(2, 1, &[real(2.0), real(0.0)]);
        let s = OperatorSpec::new(m, 2, 1, vec![alpha], vec![c], None, true).unwrap();
        let js = s.joint_spectrum(0).unwrap();
        assert_eq!(js.len(), 1);
        assert_relative_eq!(js[0].kappa2, 4.0, epsilon = 1e-12);
        assert_relative_eq!(js[0].alpha, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn atom_eigenvalue_of_one_atom() {
        let sp = one_atom().atom_eigenvalues().unwrap();
        assert_eq!(sp.len(), 1);
        assert!((sp.entries[0].z - I).norm() < 1e-14);
        assert_eq!(sp.entries[0].phase, 0.0);
    }

    #[test]
    fn non_hermitian_alpha_is_rejected() {
        let m = Measure::atomic(vec![Atom { x: 0.5, mass: 1.0 }]).unwrap();
        let r = OperatorSpec::new(m, 1, 1, vec![scalar(I)], vec![scalar(real(1.0))], None, false);
        assert!(matches!(r, Err(Error::Model(_))));
    }

    #[test]
    fn phase_normalizes_blaschke_factor() {
        for z in [c64(0.3, 0.7), c64(-2.0, 0.1), c64(0.0, 3.0)] {
            let q = C64::from_polar(1.0, blaschke_phase(z)) * (I - z) / (I - z.conj());
            assert!(q.im.abs() < 1e-14 && q.re > 0.0);
        }
    }

    #[test]
    fn piecewise_linear_field_interpolates() {
        let f = PiecewiseLinearField::new(vec![
            (0.0, scalar(real(0.0)), scalar(real(1.0))),
            (1.0, scalar(real(1.0)), scalar(real(1.0))),
        ])
        .unwrap();
        assert_relative_eq!(f.alpha(0.25)[(0, 0)].re, 0.25, epsilon = 1e-15);
        assert_relative_eq!(f.alpha(2.0)[(0, 0)].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn clustering_merges_close_points() {
        let pts = [I, I + c64(1e-12, 0.0), c64(0.0, 2.0)];
        let cl = cluster_points(&pts, 1e-9);
        assert_eq!(cl.len(), 2);
        assert_eq!(cl[0].1, 2);
    }
}
