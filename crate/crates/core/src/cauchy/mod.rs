//! The Cauchy problem on the mass coordinate
//!
//! ```text
//! G'(t) = c_*(t)* Ω(t,z) c_*(t) G(t),   G(M) = I,
//! Ω(t,z) = [(t − φ_*(t)) k_*(t,t) + i(α_*(t) − z)]⁻¹,
//! ```
//!
//! whose value at `t = 0` is the characteristic function. Atom intervals are
//! crossed exactly: with `K = c*(α−z)⁻¹c` the solution on the interval of
//! atom `x` is `[I − i(t−φ(x))K] G(φ(x))`. Continuous stretches are
//! integrated in the `x` variable with an embedded Runge–Kutta pair, and
//! explicit quadrature cells by matrix exponentials.

pub mod integrator;
mod picard;
mod resolvent;

pub use picard::{picard_sequence, picard_tail_bound, solve_g_picard, PicardIterate};
pub use resolvent::{resolvent_apply, resolvent_bound, resolvent_constant, ResolventOutput};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, I};
use crate::measure::{Segment, StarGrid};
use crate::operator_model::{NodeId, OperatorSpec};
use integrator::{dopri5, StepControl, StepStats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Absolute and relative local tolerance of the stretch integrator.
    pub tol: f64,
    /// Matrices with a larger condition number are treated as singular.
    pub cond_limit: f64,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            cond_limit: 1e12,
            max_steps: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    /// `t = M`.
    End,
    /// `φ(x+0)` of an atom.
    AtomRight(usize),
    /// `φ(x)` of an atom.
    AtomMid(usize),
    /// `φ(x−0)` of an atom.
    AtomLeft(usize),
    /// `φ(s)` of a quadrature node.
    Node(usize),
    /// Left end of an explicit quadrature cell.
    CellLeft(usize),
    /// Left end of a continuous stretch.
    StretchStart,
}

#[derive(Debug, Clone)]
pub struct PathPoint {
    pub t: f64,
    pub kind: PointKind,
    pub value: CMat,
    /// `G(t)⁻¹`, absent once the path has crossed a point where `G` is
    /// singular (`z` an eigenvalue of `A`).
    pub inverse: Option<CMat>,
    /// `∫_t^M ‖k_*(τ,τ)‖ dτ`.
    pub gamma: f64,
    /// `∫_t^M ‖k_*(τ,τ)‖_trace dτ`.
    pub gamma_trace: f64,
}

/// `G(t,z)` at the breakpoints of `[0, M]`, ordered by increasing `t`.
#[derive(Debug, Clone)]
pub struct GPath {
    pub z: C64,
    pub points: Vec<PathPoint>,
    atom_points: Vec<[usize; 3]>,
    node_points: Vec<usize>,
    pub stats: StepStats,
}

impl GPath {
    /// `G(0,z) = S_A(z)`.
    pub fn at_zero(&self) -> &CMat {
        &self.points[0].value
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    /// Points at `φ(x−0)`, `φ(x)`, `φ(x+0)` of atom `k`.
    pub fn atom(&self, k: usize) -> [&PathPoint; 3] {
        self.atom_points[k].map(|i| &self.points[i])
    }

    /// Point at `φ(s)` of quadrature node `q`.
    pub fn node(&self, q: usize) -> &PathPoint {
        &self.points[self.node_points[q]]
    }

    /// `G(φ(x))` at an atom or node.
    pub fn value_at(&self, id: NodeId) -> &CMat {
        match id {
            NodeId::Atom(k) => &self.atom(k)[1].value,
            NodeId::Quad(q) => &self.node(q).value,
        }
    }

    /// `max_t ‖G(t)‖`.
    pub fn max_norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| linalg::op_norm(&p.value))
            .fold(0.0, f64::max)
    }

    /// `max_t ‖G(t)G(t)⁻¹ − I‖` over points where the inverse is known.
    pub fn max_inverse_residual(&self) -> f64 {
        self.points
            .iter()
            .filter_map(|p| {
                p.inverse.as_ref().map(|y| {
                    let n = y.nrows();
                    linalg::op_norm(&(&p.value * y - linalg::identity(n)))
                })
            })
            .fold(0.0, f64::max)
    }
}

/// `(α − z)⁻¹`, refused near singularity.
pub(crate) fn resolvent_of(alpha: &CMat, z: C64, cond_limit: f64, t: f64) -> Result<CMat> {
    let n = alpha.nrows();
    let m = alpha - linalg::identity(n) * z;
    linalg::checked_inverse(&m, cond_limit).ok_or_else(|| Error::Singular {
        t,
        z,
        context: "α(x) − z is singular".into(),
    })
}

/// `K = c*(α − z)⁻¹c` and the resolvent it came from.
pub(crate) fn reduced_generator(alpha: &CMat, c: &CMat, z: C64, cond_limit: f64, t: f64) -> Result<(CMat, CMat)> {
    let r = resolvent_of(alpha, z, cond_limit, t)?;
    let k = c.adjoint() * &r * c;
    Ok((k, r))
}

/// `(‖k‖, ‖k‖₁)·w` for `k = c*c`, read off `c` (`dim H × rank`, usually thin).
fn k_norms(c: &CMat, w: f64) -> (f64, f64) {
    let hs = linalg::hs_norm(c);
    (linalg::op_norm(c).powi(2) * w, hs * hs * w)
}

/// The two factors `P∓ = I ∓ iλK`, `λ = μ_x/2`, `K = c*(α − z)⁻¹c`, met
/// when crossing an atom. If `dim H < rank`, `K = u v` with `u = c*` and
/// `v = (α − z)⁻¹c` has low rank and the factors are inverted through the
/// small `dim H × dim H` matrices `I ∓ iλ v u`.
pub(crate) struct AtomStep {
    a: C64,
    cond_limit: f64,
    form: StepForm,
}

enum StepForm {
    Dense(CMat),
    LowRank { u: CMat, v: CMat, vu: CMat },
}

impl AtomStep {
    pub(crate) fn new(alpha: &CMat, c: &CMat, z: C64, lambda: f64, cond_limit: f64, t: f64) -> Result<Self> {
        let r = resolvent_of(alpha, z, cond_limit, t)?;
        let form = if c.nrows() < c.ncols() {
            let u = c.adjoint();
            let v = &r * c;
            let vu = &v * &u;
            StepForm::LowRank { u, v, vu }
        } else {
            StepForm::Dense(c.adjoint() * &r * c)
        };
        Ok(Self {
            a: I * lambda,
            cond_limit,
            form,
        })
    }

    fn small_inverse(&self, m: &CMat, sign: f64) -> Option<CMat> {
        let n = m.nrows();
        let p = linalg::identity(n) + m * (self.a * sign);
        linalg::scaled_inverse(&p, 1.0 + self.a.norm() * linalg::hs_norm(m), self.cond_limit)
    }

    /// `P−⁻¹ B`.
    pub(crate) fn solve_minus(&self, b: &CMat) -> Option<CMat> {
        match &self.form {
            StepForm::Dense(k) => Some(self.small_inverse(k, -1.0)? * b),
            StepForm::LowRank { u, v, vu } => {
                let inv = self.small_inverse(vu, -1.0)?;
                Some(b + (u * (inv * (v * b))) * self.a)
            }
        }
    }

    /// `P+ B`.
    pub(crate) fn mul_plus(&self, b: &CMat) -> CMat {
        match &self.form {
            StepForm::Dense(k) => b + (k * b) * self.a,
            StepForm::LowRank { u, v, .. } => b + (u * (v * b)) * self.a,
        }
    }

    /// `Y P−`.
    pub(crate) fn right_mul_minus(&self, y: &CMat) -> CMat {
        match &self.form {
            StepForm::Dense(k) => y - (y * k) * self.a,
            StepForm::LowRank { u, v, .. } => y - ((y * u) * v) * self.a,
        }
    }

    /// `Y P+⁻¹`, `None` when `P+` is singular (`z` an eigenvalue).
    pub(crate) fn right_solve_plus(&self, y: &CMat) -> Option<CMat> {
        match &self.form {
            StepForm::Dense(k) => Some(y * self.small_inverse(k, 1.0)?),
            StepForm::LowRank { u, v, vu } => {
                let inv = self.small_inverse(vu, 1.0)?;
                Some(y - ((y * u) * inv * v) * self.a)
            }
        }
    }
}

/// `Ω(t,z)` by direct inversion of the bracket.
pub fn omega(spec: &OperatorSpec, t: f64, z: C64, cond_limit: f64) -> Result<CMat> {
    let (s, alpha, c) = local_data(spec, t)?;
    let n = alpha.nrows();
    let bracket = (&c * c.adjoint()).map(|v| v * s) + (&alpha - linalg::identity(n) * z) * I;
    linalg::checked_inverse(&bracket, cond_limit).ok_or_else(|| Error::Singular {
        t,
        z,
        context: "Ω bracket is singular".into(),
    })
}

/// `Ω(t,z) = −iR[I − i(t−φ_*)kR]⁻¹`, the factored representation.
pub fn omega_factored(spec: &OperatorSpec, t: f64, z: C64, cond_limit: f64) -> Result<CMat> {
    let (s, alpha, c) = local_data(spec, t)?;
    let r = resolvent_of(&alpha, z, cond_limit, t)?;
    let n = alpha.nrows();
    let inner = linalg::identity(n) - (&c * c.adjoint() * &r).map(|v| v * I * s);
    let inv = linalg::checked_inverse(&inner, cond_limit).ok_or_else(|| Error::Singular {
        t,
        z,
        context: "I − i(t−φ)kR is singular".into(),
    })?;
    Ok((r * inv).map(|v| v * (-I)))
}

/// The `r×r` generator `c*Ωc`, evaluated in the reduced form
/// `−iK[I − i(t−φ_*)K]⁻¹`, `K = c*Rc`.
pub fn generator(spec: &OperatorSpec, t: f64, z: C64, cond_limit: f64) -> Result<CMat> {
    let (s, alpha, c) = local_data(spec, t)?;
    let (k, _) = reduced_generator(&alpha, &c, z, cond_limit, t)?;
    let r = k.nrows();
    let inner = linalg::identity(r) - k.map(|v| v * I * s);
    let inv = linalg::checked_inverse(&inner, cond_limit).ok_or_else(|| Error::Singular {
        t,
        z,
        context: "I − i(t−φ)K is singular".into(),
    })?;
    Ok((k * inv).map(|v| v * (-I)))
}

/// `(t − φ_*(t), α_*(t), c_*(t))`.
fn local_data(spec: &OperatorSpec, t: f64) -> Result<(f64, CMat, CMat)> {
    let m = spec.measure();
    let x = m.psi(t)?;
    let s = t - m.phi(x)?;
    let (alpha, c) = spec.coefficients_at(x)?;
    Ok((s, alpha, c))
}

fn singular(t: f64, z: C64, what: &str) -> Error {
    Error::Singular {
        t,
        z,
        context: what.into(),
    }
}

/// A breakpoint of the sweep as seen by [`sweep_g`]'s visitor.
#[derive(Debug, Clone, Copy)]
pub struct PointRef<'a> {
    pub t: f64,
    pub kind: PointKind,
    pub value: &'a CMat,
    pub inverse: Option<&'a CMat>,
    pub gamma: f64,
    pub gamma_trace: f64,
}

/// Backward sweep from `t = M` to `t = 0`, carrying `G` and `G⁻¹`; the
/// result keeps every breakpoint.
pub fn solve_g(spec: &OperatorSpec, z: C64, opts: &SolverOptions) -> Result<GPath> {
    let mut pts = Vec::new();
    let stats = sweep_g(spec, z, opts, true, &mut |p: PointRef<'_>| {
        pts.push(PathPoint {
            t: p.t,
            kind: p.kind,
            value: p.value.clone(),
            inverse: p.inverse.cloned(),
            gamma: p.gamma,
            gamma_trace: p.gamma_trace,
        })
    })?;
    pts.reverse();
    let m = spec.measure();
    let mut atom_points = vec![[0usize; 3]; m.atoms().len()];
    let mut node_points = vec![0usize; m.nodes().len()];
    for (i, p) in pts.iter().enumerate() {
        match p.kind {
            PointKind::AtomLeft(k) => atom_points[k][0] = i,
            PointKind::AtomMid(k) => atom_points[k][1] = i,
            PointKind::AtomRight(k) => atom_points[k][2] = i,
            PointKind::Node(q) => node_points[q] = i,
            _ => {}
        }
    }
    Ok(GPath {
        z,
        points: pts,
        atom_points,
        node_points,
        stats,
    })
}

/// The sweep itself: every breakpoint is handed to `visit` in decreasing
/// `t`, ending with `t = 0`. Without `track_inverse` the inverse is not
/// propagated, which halves the work and is all most consumers need.
pub fn sweep_g(
    spec: &OperatorSpec,
    z: C64,
    opts: &SolverOptions,
    track_inverse: bool,
    visit: &mut dyn FnMut(PointRef<'_>),
) -> Result<StepStats> {
    if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain {
            what: "Im z",
            value: z.im,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let m = spec.measure();
    let r = spec.rank();
    let grid = StarGrid::build(m);

    let mut g = linalg::identity(r);
    let mut y = track_inverse.then(|| linalg::identity(r));
    let (mut gamma, mut gamma_tr) = (0.0, 0.0);
    let mut stats = StepStats::default();
    let mut push = |t: f64, kind: PointKind, g: &CMat, y: &Option<CMat>, gm: f64, gt: f64| {
        visit(PointRef {
            t,
            kind,
            value: g,
            inverse: y.as_ref(),
            gamma: gm,
            gamma_trace: gt,
        })
    };
    push(m.total_mass(), PointKind::End, &g, &y, gamma, gamma_tr);

    for seg in grid.segments().iter().rev() {
        match seg {
            Segment::Atom {
                atom,
                mass,
                t_start,
                t_end,
                ..
            } => {
                let id = NodeId::Atom(*atom);
                let t_mid = 0.5 * (t_start + t_end);
                let step = AtomStep::new(spec.alpha(id), spec.c(id), z, 0.5 * mass, opts.cond_limit, t_mid)?;
                let (kn, kt) = k_norms(spec.c(id), *mass);

                push(*t_end, PointKind::AtomRight(*atom), &g, &y, gamma, gamma_tr);
                g = step
                    .solve_minus(&g)
                    .ok_or_else(|| singular(t_mid, z, "I − i(μ/2)K is singular"))?;
                y = y.map(|y| step.right_mul_minus(&y));
                push(
                    t_mid,
                    PointKind::AtomMid(*atom),
                    &g,
                    &y,
                    gamma + 0.5 * kn,
                    gamma_tr + 0.5 * kt,
                );
                g = step.mul_plus(&g);
                y = y.and_then(|y| step.right_solve_plus(&y));
                gamma += kn;
                gamma_tr += kt;
                push(*t_start, PointKind::AtomLeft(*atom), &g, &y, gamma, gamma_tr);
            }
            Segment::Cell {
                node, t_start, t_end, ..
            } => {
                let id = NodeId::Quad(*node);
                let w = t_end - t_start;
                let t_mid = 0.5 * (t_start + t_end);
                let (k, _) = reduced_generator(spec.alpha(id), spec.c(id), z, opts.cond_limit, t_mid)?;
                let fwd = k.map(|v| v * I * (0.5 * w)).exp();
                let back = k.map(|v| v * (-I) * (0.5 * w)).exp();
                let (kn, kt) = k_norms(spec.c(id), w);
                g = &fwd * &g;
                y = y.map(|y| y * &back);
                push(
                    t_mid,
                    PointKind::Node(*node),
                    &g,
                    &y,
                    gamma + 0.5 * kn,
                    gamma_tr + 0.5 * kt,
                );
                g = &fwd * &g;
                y = y.map(|y| y * &back);
                gamma += kn;
                gamma_tr += kt;
                push(*t_start, PointKind::CellLeft(*node), &g, &y, gamma, gamma_tr);
            }
            Segment::Stretch {
                t_start,
                x_start,
                x_end,
                nodes,
                ..
            } => {
                let field = spec
                    .field()
                    .ok_or_else(|| Error::input("continuous stretch without coefficient field"))?
                    .clone();
                let density = m
                    .density()
                    .ok_or_else(|| Error::input("continuous stretch without density"))?
                    .clone();
                let ctl = StepControl {
                    atol: opts.tol,
                    rtol: opts.tol,
                    max_steps: opts.max_steps,
                };
                let with_inverse = y.is_some();
                let cond = opts.cond_limit;
                let rhs = |x: f64, s: &CMat| -> Result<CMat> {
                    let rho = density.eval(x);
                    let (k, _) = reduced_generator(&field.alpha(x), &field.c(x), z, cond, x)?;
                    let top = (&k * s.rows(0, r)).map(|v| v * (-I) * rho);
                    if !with_inverse {
                        return Ok(top);
                    }
                    let bottom = (s.rows(r, r) * &k).map(|v| v * I * rho);
                    let mut out = CMat::zeros(2 * r, r);
                    out.rows_mut(0, r).copy_from(&top);
                    out.rows_mut(r, r).copy_from(&bottom);
                    Ok(out)
                };
                let mut state = match &y {
                    Some(yv) => {
                        let mut s = CMat::zeros(2 * r, r);
                        s.rows_mut(0, r).copy_from(&g);
                        s.rows_mut(r, r).copy_from(yv);
                        s
                    }
                    None => g.clone(),
                };
                let unpack = |s: &CMat| -> (CMat, Option<CMat>) {
                    if with_inverse {
                        (s.rows(0, r).into_owned(), Some(s.rows(r, r).into_owned()))
                    } else {
                        (s.clone(), None)
                    }
                };
                let mut x = *x_end;
                let mut h_guess = 0.0;
                let (mut acc, mut acc_tr) = (0.0, 0.0);
                for sn in nodes.iter().rev() {
                    state = dopri5(rhs, x, &state, sn.x, ctl, &mut h_guess, &mut stats)?;
                    x = sn.x;
                    let id = NodeId::Quad(sn.node);
                    let w = spec.weight(id);
                    let (kn, kt) = k_norms(spec.c(id), w);
                    let (gv, yv) = unpack(&state);
                    push(
                        sn.t,
                        PointKind::Node(sn.node),
                        &gv,
                        &yv,
                        gamma + acc + 0.5 * kn,
                        gamma_tr + acc_tr + 0.5 * kt,
                    );
                    acc += kn;
                    acc_tr += kt;
                }
                state = dopri5(rhs, x, &state, *x_start, ctl, &mut h_guess, &mut stats)?;
                let (gv, yv) = unpack(&state);
                g = gv;
                y = yv;
                gamma += acc;
                gamma_tr += acc_tr;
                push(*t_start, PointKind::StretchStart, &g, &y, gamma, gamma_tr);
            }
        }
    }

    Ok(stats)
}

/// `G(t,z)⁻¹` at every breakpoint, from the backward solve of
/// `Y' = −Y c*Ωc`.
pub fn inverse_path(spec: &OperatorSpec, z: C64, opts: &SolverOptions) -> Result<Vec<(f64, Option<CMat>)>> {
    Ok(solve_g(spec, z, opts)?
        .points
        .into_iter()
        .map(|p| (p.t, p.inverse))
        .collect())
}
