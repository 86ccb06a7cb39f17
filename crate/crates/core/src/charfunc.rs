//! The characteristic function `S_A(z) = G(0,z)` and what is built on it:
//! determinants, Blaschke factors, the factorizations at atoms, and kernel
//! dimensions at eigenvalues.

use crate::cauchy::{self, reduced_generator, AtomStep, GPath, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, I};
use crate::operator_model::{NodeId, OperatorSpec, SpectrumData};

/// Eigenvalues closer than this are one point of the spectrum.
pub const CLUSTER_TOL: f64 = 1e-9;
/// Relative singular-value threshold for `ker S_A(λ)`.
pub const KERNEL_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct CharSample {
    pub z: C64,
    pub s: CMat,
    pub det: C64,
    /// `tr(I − S*S)`.
    pub trace_defect: f64,
}

impl CharSample {
    pub fn from_matrix(z: C64, s: CMat) -> Self {
        let n = s.nrows();
        let det = linalg::det(&s);
        let trace_defect = linalg::trace(&(linalg::identity(n) - s.adjoint() * &s)).re;
        Self {
            z,
            s,
            det,
            trace_defect,
        }
    }
}

pub fn char_fn(spec: &OperatorSpec, z: C64, opts: &SolverOptions) -> Result<CharSample> {
    let path = cauchy::solve_g(spec, z, opts)?;
    Ok(CharSample::from_matrix(z, path.at_zero().clone()))
}

/// `b_z(w) = (w − z)/(w − z̄)`.
pub fn blaschke_factor(z: C64, w: C64) -> C64 {
    (w - z) / (w - z.conj())
}

/// `∏_j e^{iφ_j} b_{z_j}(w)`, each factor normalized to be positive at
/// `w = i`.
pub fn normalized_blaschke_product(spectrum: &SpectrumData, w: C64) -> C64 {
    spectrum
        .entries
        .iter()
        .map(|e| C64::from_polar(1.0, e.phase) * blaschke_factor(e.z, w))
        .product()
}

/// `∏_j e^{−iφ_j}`: the unimodular constant relating the normalized product
/// to `det S_A`.
pub fn phase_constant(spectrum: &SpectrumData) -> C64 {
    C64::from_polar(1.0, -spectrum.entries.iter().map(|e| e.phase).sum::<f64>())
}

/// `exp(i ∫ tr[c*(α − z)⁻¹c] dμ_c)` by quadrature over the nodes.
pub fn outer_factor(spec: &OperatorSpec, z: C64, opts: &SolverOptions) -> Result<C64> {
    let mut acc = C64::new(0.0, 0.0);
    for q in 0..spec.measure().nodes().len() {
        let id = NodeId::Quad(q);
        let (k, _) = reduced_generator(spec.alpha(id), spec.c(id), z, opts.cond_limit, spec.position(id))?;
        acc += linalg::trace(&k) * spec.weight(id);
    }
    Ok((I * acc).exp())
}

/// `det S_A(z)` from the spectrum: normalized Blaschke product over the
/// atom eigenvalues times the outer factor of the continuous part, times
/// the phase constant. Needs declared commutativity.
pub fn det_char_fn(spec: &OperatorSpec, z: C64, opts: &SolverOptions) -> Result<C64> {
    if !spec.commutativity_declared() {
        return Err(Error::Unsupported(
            "the product formula for det S_A needs commuting k(x,x) and α(x)".into(),
        ));
    }
    if !(z.im > 0.0) {
        return Err(Error::Domain {
            what: "Im z",
            value: z.im,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let sp = spec.atom_eigenvalues()?;
    Ok(phase_constant(&sp) * normalized_blaschke_product(&sp, z) * outer_factor(spec, z, opts)?)
}

/// `S_{x−}`, `B_x`, `S_{x+}` with `S_A = S_{x−} B_x S_{x+}`.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub left: CMat,
    pub middle: CMat,
    pub right: CMat,
}

impl Factorization {
    pub fn product(&self) -> CMat {
        &self.left * &self.middle * &self.right
    }
}

/// `B_x(z) = [I + i(μ_x/2)K][I − i(μ_x/2)K]⁻¹`, `K = c*(α − z)⁻¹c`.
pub fn atom_factor(spec: &OperatorSpec, atom: usize, z: C64, opts: &SolverOptions) -> Result<CMat> {
    let id = NodeId::Atom(atom);
    let m = spec.weight(id);
    let step = AtomStep::new(
        spec.alpha(id),
        spec.c(id),
        z,
        0.5 * m,
        opts.cond_limit,
        spec.position(id),
    )?;
    let inv = step
        .solve_minus(&linalg::identity(spec.rank()))
        .ok_or(Error::Singular {
            t: spec.position(id),
            z,
            context: "I − i(μ/2)K is singular".into(),
        })?;
    Ok(step.mul_plus(&inv))
}

fn inverse_at(path: &GPath, idx: usize, which: &str) -> Result<CMat> {
    let p = &path.points[idx];
    p.inverse.clone().ok_or_else(|| Error::Singular {
        t: p.t,
        z: path.z,
        context: format!("G({which}) is not invertible"),
    })
}

fn point_index(path: &GPath, t: f64, kind: cauchy::PointKind) -> usize {
    path.points
        .iter()
        .position(|p| p.kind == kind && p.t == t)
        .expect("breakpoint recorded by the sweep")
}

pub fn factorize(spec: &OperatorSpec, atom: usize, z: C64, opts: &SolverOptions) -> Result<Factorization> {
    if atom >= spec.measure().atoms().len() {
        return Err(Error::input(format!("unknown atom {atom}")));
    }
    let path = cauchy::solve_g(spec, z, opts)?;
    let [left, _, right] = path.atom(atom);
    let li = point_index(&path, left.t, left.kind);
    let s_left = path.at_zero() * inverse_at(&path, li, "φ(x−0)")?;
    Ok(Factorization {
        left: s_left,
        middle: atom_factor(spec, atom, z, opts)?,
        right: right.value.clone(),
    })
}

/// `[S_{0,x₁}, B_{x₁}, S_{x₁,x₂}, …, B_{xₙ}, S_{xₙ,1}]` with
/// `S_{a,b} = G(φ(a+0))G(φ(b−0))⁻¹`; the ordered product is `S_A(z)`.
pub fn chain_factorize(spec: &OperatorSpec, atoms: &[usize], z: C64, opts: &SolverOptions) -> Result<Vec<CMat>> {
    let na = spec.measure().atoms().len();
    if atoms.is_empty() {
        return Err(Error::input("chain factorization needs at least one atom"));
    }
    if atoms.iter().any(|&a| a >= na) || atoms.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("atoms must be valid indices in increasing order"));
    }
    let path = cauchy::solve_g(spec, z, opts)?;
    let mut out = Vec::with_capacity(2 * atoms.len() + 1);
    let mut left_value = path.at_zero().clone();
    for &a in atoms {
        let [l, _, r] = path.atom(a);
        let li = point_index(&path, l.t, l.kind);
        out.push(&left_value * inverse_at(&path, li, "φ(x−0)")?);
        out.push(atom_factor(spec, a, z, opts)?);
        left_value = r.value.clone();
    }
    out.push(left_value);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelInfo {
    pub lambda: C64,
    pub dim_ker: usize,
    pub multiplicity: usize,
    pub root_vector_free: bool,
}

/// `dim ker S_A(λ)` against the multiplicity of `λ` among the atom
/// eigenvalues; equality means no root vectors at `λ`.
pub fn kernel_at(spec: &OperatorSpec, lambda: C64, opts: &SolverOptions) -> Result<KernelInfo> {
    let sp = spec.atom_eigenvalues()?;
    let multiplicity = sp
        .entries
        .iter()
        .filter(|e| (e.z - lambda).norm() <= CLUSTER_TOL)
        .count();
    if multiplicity == 0 {
        return Err(Error::input(format!("{lambda} is not an eigenvalue")));
    }
    let s = char_fn(spec, lambda, opts)?.s;
    let sv = linalg::singular_values(&s);
    let top = sv.first().copied().unwrap_or(0.0);
    // S_A is a contraction with S_A(∞) = I, so the scale is at most 1
    let thr = KERNEL_TOL * top.max(1.0);
    let dim_ker = sv.iter().filter(|&&v| v < thr).count();
    Ok(KernelInfo {
        lambda,
        dim_ker,
        multiplicity,
        root_vector_free: dim_ker == multiplicity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, real};
    use crate::measure::{Atom, Measure};

    fn one_atom() -> OperatorSpec {
        let m = Measure::atomic(vec![Atom { x: 0.5, mass: 1.0 }]).unwrap();
        OperatorSpec::scalar_atomic(m, &[0.0], &[real(2f64.sqrt())]).unwrap()
    }

    #[test]
    fn blaschke_examples() {
        assert_eq!(blaschke_factor(I, I), real(0.0));
        assert!((blaschke_factor(I, c64(0.0, 2.0)) - real(1.0 / 3.0)).norm() < 1e-15);
        assert!((blaschke_factor(I, real(5.0)).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn one_atom_char_fn() {
        let opts = SolverOptions::default();
        let s = char_fn(&one_atom(), c64(0.0, 2.0), &opts).unwrap();
        assert!((s.det - real(1.0 / 3.0)).norm() < 1e-15);
        let at = char_fn(&one_atom(), I, &opts).unwrap();
        assert!(at.s[(0, 0)].norm() < 1e-15);
        assert!((at.trace_defect - 1.0).abs() < 1e-15);
        let d = det_char_fn(&one_atom(), c64(0.0, 2.0), &opts).unwrap();
        assert!((d - real(1.0 / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn single_atom_factorization_is_degenerate() {
        let opts = SolverOptions::default();
        let z = c64(0.4, 0.9);
        let f = factorize(&one_atom(), 0, z, &opts).unwrap();
        assert!((f.left[(0, 0)] - real(1.0)).norm() < 1e-15);
        assert!((f.right[(0, 0)] - real(1.0)).norm() < 1e-15);
        let s = char_fn(&one_atom(), z, &opts).unwrap().s;
        assert!((f.middle[(0, 0)] - s[(0, 0)]).norm() < 1e-15);
    }

    #[test]
    fn kernel_at_single_eigenvalue() {
        let k = kernel_at(&one_atom(), I, &SolverOptions::default()).unwrap();
        assert_eq!((k.dim_ker, k.multiplicity, k.root_vector_free), (1, 1, true));
        assert!(kernel_at(&one_atom(), c64(0.0, 3.0), &SolverOptions::default()).is_err());
    }

    #[test]
    fn non_commuting_det_is_unsupported() {
        let m = Measure::atomic(vec![Atom { x: 0.5, mass: 1.0 }]).unwrap();
        let s = OperatorSpec::new(
            m,
            1,
            1,
            vec![linalg::scalar(real(0.0))],
            vec![linalg::scalar(real(1.0))],
            None,
            false,
        )
        .unwrap();
        assert!(matches!(
            det_char_fn(&s, I, &SolverOptions::default()),
            Err(Error::Unsupported(_))
        ));
    }
}
