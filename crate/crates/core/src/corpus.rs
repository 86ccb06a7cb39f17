//! Random problem instances for cross-validation: atomic specs with up to
//! 20 atoms, `dim_H ≤ 4`, `rank ≤ 3`, in a generic and a commuting flavour,
//! plus sampling of spectral parameters in the upper half-plane.

use rand::Rng;

use crate::error::Result;
use crate::linalg::{self, CMat, C64};
use crate::measure::{Atom, Measure};
use crate::operator_model::OperatorSpec;

#[derive(Debug, Clone, Copy)]
pub struct CorpusShape {
    pub max_atoms: usize,
    pub max_dim: usize,
    pub max_rank: usize,
    /// Upper bound for `μ_x ‖k(x,x)‖` at a single atom.
    pub max_atom_weight: f64,
}

impl Default for CorpusShape {
    fn default() -> Self {
        Self {
            max_atoms: 20,
            max_dim: 4,
            max_rank: 3,
            max_atom_weight: 2.0,
        }
    }
}

fn uniform_c64<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| uniform_c64(rng))
}

fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let m = random_matrix(rng, n, n);
    (&m + m.adjoint()).scale(0.5)
}

/// Haar-ish unitary from the QR factorization of a random matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> CMat {
    random_matrix(rng, n, n).qr().q()
}

fn random_atoms<R: Rng>(rng: &mut R, count: usize) -> Vec<Atom> {
    // distinct positions: jittered points of a uniform partition
    let mut xs: Vec<f64> = (0..count)
        .map(|k| (k as f64 + rng.gen_range(0.1..0.9)) / count as f64)
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.into_iter()
        .map(|x| Atom {
            x,
            mass: rng.gen_range(0.1..1.0),
        })
        .collect()
}

/// Rescales `c` so that `mass·‖c‖² ≤ bound`.
fn cap_weight(c: CMat, mass: f64, bound: f64) -> CMat {
    let w = mass * linalg::op_norm(&c).powi(2);
    if w > bound {
        c.scale((bound / w).sqrt())
    } else {
        c
    }
}

/// Generic atomic spec: independent random Hermitian `α` and factors `c`.
pub fn random_atomic_spec<R: Rng>(rng: &mut R, shape: &CorpusShape) -> Result<OperatorSpec> {
    let count = rng.gen_range(1..=shape.max_atoms);
    let n = rng.gen_range(1..=shape.max_dim);
    let r = rng.gen_range(1..=shape.max_rank);
    let atoms = random_atoms(rng, count);
    let alpha = atoms.iter().map(|_| random_hermitian(rng, n).scale(2.0)).collect();
    let c = atoms
        .iter()
        .map(|a| {
            let v = random_matrix(rng, n, r);
            cap_weight(v, a.mass, rng.gen_range(0.1..shape.max_atom_weight))
        })
        .collect();
    OperatorSpec::new(Measure::atomic(atoms)?, n, r, alpha, c, None, false)
}

/// Commuting atomic spec: at each atom `α = UΛU*` and `c = U_r diag(κ) V*`
/// built on a shared unitary `U`, so `k = cc*` and `α` commute. Requires
/// `rank ≤ dim_H`.
pub fn random_commuting_spec<R: Rng>(rng: &mut R, shape: &CorpusShape) -> Result<OperatorSpec> {
    let count = rng.gen_range(1..=shape.max_atoms);
    let n = rng.gen_range(1..=shape.max_dim);
    let r = rng.gen_range(1..=shape.max_rank.min(n));
    let atoms = random_atoms(rng, count);
    let mut alpha = Vec::with_capacity(count);
    let mut c = Vec::with_capacity(count);
    for a in &atoms {
        let u = random_unitary(rng, n);
        let lam = CMat::from_diagonal(&linalg::CVec::from_fn(n, |_, _| linalg::real(rng.gen_range(-2.0..2.0))));
        alpha.push(&u * lam * u.adjoint());
        let mut d = linalg::zeros(r, r);
        for j in 0..r {
            d[(j, j)] = linalg::real(rng.gen_range(0.3..1.5));
        }
        let v = random_unitary(rng, r);
        let cu = u.columns(0, r) * d * v.adjoint();
        c.push(cap_weight(cu, a.mass, rng.gen_range(0.1..shape.max_atom_weight)));
    }
    OperatorSpec::new(Measure::atomic(atoms)?, n, r, alpha, c, None, true)
}

/// `z` with `Re z ∈ [−3, 3]` and `Im z` log-uniform in `[im_lo, im_hi]`.
pub fn sample_z<R: Rng>(rng: &mut R, im_lo: f64, im_hi: f64) -> C64 {
    let t: f64 = rng.gen_range(0.0..1.0);
    let im = im_lo * (im_hi / im_lo).powf(t);
    C64::new(rng.gen_range(-3.0..3.0), im)
}

/// Random node-sampled right-hand side.
pub fn random_rhs<R: Rng>(rng: &mut R, spec: &OperatorSpec) -> crate::measure::NodeSamples<linalg::CVec> {
    let n = spec.dim_h();
    let m = spec.measure();
    crate::measure::NodeSamples::new(
        (0..m.atoms().len())
            .map(|_| linalg::CVec::from_fn(n, |_, _| uniform_c64(rng)))
            .collect(),
        (0..m.nodes().len())
            .map(|_| linalg::CVec::from_fn(n, |_, _| uniform_c64(rng)))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn corpus_respects_shape() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let shape = CorpusShape::default();
        for _ in 0..20 {
            let s = random_atomic_spec(&mut rng, &shape).unwrap();
            assert!(s.measure().atoms().len() <= 20 && s.dim_h() <= 4 && s.rank() <= 3);
            assert!(s.max_atom_k() <= shape.max_atom_weight + 1e-12);
            let s = random_commuting_spec(&mut rng, &shape).unwrap();
            assert!(s.commutes());
        }
    }
}
