//! Grid estimates of the resolvent constants: linear resolvent growth
//! (`C1`), uniform trace boundedness (`C2`, by the trace defect of `S_A`
//! and by the integral over the Cauchy path) and `C3`, the growth of
//! `‖S_A(z)⁻¹‖` against the Blaschke factors of the point spectrum.

use nalgebra::linalg::Schur;
use rayon::prelude::*;

use crate::cauchy::{self, resolvent_of, PointKind, SolverOptions};
use crate::charfunc::blaschke_factor;
use crate::error::{Error, Result};
use crate::linalg::{self, C64, I};
use crate::operator_model::{NodeId, OperatorSpec};
use crate::oracle;

use super::geometry::carleson_sum;
use super::ZGrid;

/// Grid points closer than this to the spectrum are left out of `C1`.
pub const SPECTRUM_EXCLUSION: f64 = 1e-6;

/// Eigenvalues of `A` in `ℂ_+`: those of the diagonal blocks
/// `α(x) + ½ i μ_x k(x,x)` at the atoms (the operator is block triangular
/// along `x`).
pub fn point_spectrum(spec: &OperatorSpec) -> Vec<C64> {
    let mut out = Vec::new();
    for (a, atom) in spec.measure().atoms().iter().enumerate() {
        let id = NodeId::Atom(a);
        let block = spec.alpha(id) + spec.k_diag(id).scale(0.5 * atom.mass) * I;
        let tol = 1e-12 * linalg::op_norm(&block).max(1.0);
        let (_, t) = Schur::new(block).unpack();
        out.extend(t.diagonal().iter().copied().filter(|z| z.im > tol));
    }
    out
}

fn check_grid(grid: &ZGrid) -> Result<()> {
    if grid.is_empty() {
        Err(Error::input("empty z-grid"))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrgEstimate {
    pub value: f64,
    pub argmax: C64,
    /// Grid points dropped for lying on the spectrum.
    pub excluded: usize,
}

/// `max ‖(A − z)⁻¹‖·dist(z, σ(A))` over the grid, from the dense matrix.
/// The spectrum is that of the (discretized) operator together with the
/// eigenvalues of `α` at the quadrature nodes.
pub fn lrg_constant(spec: &OperatorSpec, grid: &ZGrid) -> Result<LrgEstimate> {
    check_grid(grid)?;
    let (a, _) = oracle::orthonormal_model(spec);
    let n = a.nrows();
    let mut spectrum = oracle::eigenvalues(spec);
    for q in 0..spec.measure().nodes().len() {
        let (vals, _) = linalg::hermitian_eigen(spec.alpha(NodeId::Quad(q)));
        spectrum.extend(vals.into_iter().map(linalg::real));
    }
    let rows: Vec<Option<(f64, C64)>> = grid
        .points()
        .par_iter()
        .map(|&z| {
            let d = spectrum.iter().map(|l| (z - l).norm()).fold(f64::INFINITY, f64::min);
            if d <= SPECTRUM_EXCLUSION {
                return None;
            }
            if n == 0 {
                return Some((1.0, z));
            }
            let s = linalg::min_singular(&(&a - linalg::identity(n) * z));
            Some((if s > 0.0 { d / s } else { f64::INFINITY }, z))
        })
        .collect();
    let excluded = rows.iter().filter(|r| r.is_none()).count();
    let (value, argmax) = rows
        .into_iter()
        .flatten()
        .fold((0.0, C64::new(0.0, 0.0)), |a, b| if b.0 > a.0 { b } else { a });
    Ok(LrgEstimate {
        value,
        argmax,
        excluded,
    })
}

/// Everything computed from one path `G(·, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZSample {
    pub z: C64,
    /// `tr(I − S*S)`.
    pub trace_defect: f64,
    /// `2 Im z ∫ ‖(α − z)⁻¹ c G(φ(x))‖²_HS dμ`.
    pub integral: f64,
    /// `‖S⁻¹‖ · inf_λ |b_λ(z)|`, absent when `S(z)` is singular.
    pub c3: Option<f64>,
    /// Pointwise majorant of the trace defect: the continuous part with
    /// `G` dropped plus four times the Carleson kernel sum of the point
    /// spectrum. Only meaningful for commuting data.
    pub bound: f64,
}

pub fn sample_z(spec: &OperatorSpec, z: C64, spectrum: &[C64], opts: &SolverOptions) -> Result<ZSample> {
    let m = spec.measure();
    let mut atom_rc = Vec::with_capacity(m.atoms().len());
    let mut quad_rc = Vec::with_capacity(m.nodes().len());
    let mut continuous = 0.0;
    for id in spec.node_ids() {
        let rc = resolvent_of(spec.alpha(id), z, opts.cond_limit, spec.position(id))? * spec.c(id);
        match id {
            NodeId::Atom(_) => atom_rc.push(rc),
            NodeId::Quad(_) => {
                continuous += spec.weight(id) * linalg::hs_norm(&rc).powi(2);
                quad_rc.push(rc);
            }
        }
    }
    let mut integral = 0.0;
    let mut s = None;
    cauchy::sweep_g(spec, z, opts, false, &mut |p| {
        let (rc, w) = match p.kind {
            PointKind::AtomMid(k) => (&atom_rc[k], m.atoms()[k].mass),
            PointKind::Node(q) => (&quad_rc[q], m.nodes()[q].weight),
            _ => {
                if p.t <= 0.0 {
                    s = Some(p.value.clone());
                }
                return;
            }
        };
        integral += w * linalg::hs_norm(&(rc * p.value)).powi(2);
    })?;
    let s = s.unwrap_or_else(|| linalg::identity(spec.rank()));
    let s = &s;
    let r = s.nrows();
    let trace_defect = linalg::trace(&(linalg::identity(r) - s.adjoint() * s)).re;
    integral *= 2.0 * z.im;
    let bound = 2.0 * z.im * continuous + 4.0 * carleson_sum(spectrum, z);

    let blaschke = spectrum
        .iter()
        .map(|&l| blaschke_factor(l, z).norm())
        .fold(1.0, f64::min);
    // S is a contraction, so its entries are of size one
    let c3 = linalg::scaled_inverse(s, 1.0, opts.cond_limit).map(|inv| {
        if spectrum.is_empty() {
            linalg::op_norm(&inv)
        } else {
            linalg::op_norm(&inv) * blaschke
        }
    });
    Ok(ZSample {
        z,
        trace_defect,
        integral,
        c3,
        bound,
    })
}

/// [`sample_z`] at every grid point, in grid order.
pub fn sweep(spec: &OperatorSpec, grid: &ZGrid, opts: &SolverOptions) -> Vec<Result<ZSample>> {
    let spectrum = point_spectrum(spec);
    grid.points()
        .par_iter()
        .map(|&z| sample_z(spec, z, &spectrum, opts))
        .collect()
}

fn grid_max(spec: &OperatorSpec, grid: &ZGrid, opts: &SolverOptions, f: impl Fn(&ZSample) -> f64) -> Result<f64> {
    check_grid(grid)?;
    let mut best = 0.0f64;
    for s in sweep(spec, grid, opts) {
        best = best.max(f(&s?));
    }
    Ok(best)
}

/// `max tr(I − S_A(z)*S_A(z))` over the grid.
pub fn utb_constant_trace(spec: &OperatorSpec, grid: &ZGrid, opts: &SolverOptions) -> Result<f64> {
    grid_max(spec, grid, opts, |s| s.trace_defect)
}

/// `max 2 Im z ∫ ‖(α(x) − z)⁻¹ c(x) G(φ(x), z)‖²_HS dμ(x)` over the grid.
pub fn utb_constant_integral(spec: &OperatorSpec, grid: &ZGrid, opts: &SolverOptions) -> Result<f64> {
    grid_max(spec, grid, opts, |s| s.integral)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C3Estimate {
    pub value: f64,
    /// Grid points where `S_A` was singular.
    pub skipped: usize,
}

/// `max ‖S_A(z)⁻¹‖ · inf_λ |b_λ(z)|` over the grid, or `max ‖S_A(z)⁻¹‖`
/// when there is no point spectrum in `ℂ_+`.
pub fn c3_constant(spec: &OperatorSpec, grid: &ZGrid, opts: &SolverOptions) -> Result<C3Estimate> {
    check_grid(grid)?;
    let mut value = 0.0f64;
    let mut skipped = 0;
    for s in sweep(spec, grid, opts) {
        match s?.c3 {
            Some(v) => value = value.max(v),
            None => skipped += 1,
        }
    }
    Ok(C3Estimate { value, skipped })
}
