//! Fixtures for the solver benchmarks. Everything is seeded, so timings
//! compare like with like across runs.

use std::sync::Arc;

use dissim_core::linalg::{self, CMat, C64};
use dissim_core::operator_model::FnField;
use dissim_core::{Atom, ContinuousSpec, Measure, OperatorSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// `atoms` evenly spread atoms with random Hermitian `α` and random `c`,
/// scaled so that `μ_x ‖k(x,x)‖ ≤ 1` at every atom.
pub fn atomic(atoms: usize, dim_h: usize, rank: usize, seed: u64) -> OperatorSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atoms: Vec<Atom> = (0..atoms)
        .map(|k| Atom {
            x: (k as f64 + 0.5) / atoms as f64,
            mass: rng.gen_range(0.1..1.0),
        })
        .collect();
    let alpha = atoms
        .iter()
        .map(|_| {
            let m = random_matrix(&mut rng, dim_h, dim_h);
            (&m + m.adjoint()).scale(0.5)
        })
        .collect();
    let c = atoms
        .iter()
        .map(|a| {
            let c = random_matrix(&mut rng, dim_h, rank);
            let w = a.mass * linalg::op_norm(&c).powi(2);
            c.scale(w.max(1.0).recip().sqrt())
        })
        .collect();
    OperatorSpec::new(Measure::atomic(atoms).unwrap(), dim_h, rank, alpha, c, None, false).unwrap()
}

/// Lebesgue measure with `α(x) = x`, `c ≡ 1`, sampled at `nodes` points.
pub fn linear_field(nodes: usize) -> OperatorSpec {
    let m = Measure::new(Vec::new(), ContinuousSpec::Lebesgue { nodes }).unwrap();
    let field = FnField {
        alpha: |x: f64| linalg::scalar(linalg::real(x)),
        c: |_x: f64| linalg::scalar(linalg::real(1.0)),
    };
    OperatorSpec::from_field(m, 1, 1, Arc::new(field), true).unwrap()
}

/// A point of the upper half-plane away from the spectrum's scale.
pub const Z: C64 = C64::new(0.3, 0.5);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_the_requested_shape() {
        let s = atomic(12, 3, 2, 1);
        assert_eq!((s.measure().atoms().len(), s.dim_h(), s.rank()), (12, 3, 2));
        assert!(s.max_atom_k() <= 1.0 + 1e-12);
        assert_eq!(atomic(12, 3, 2, 1).assemble().matrix, s.assemble().matrix);
        assert_eq!(linear_field(64).measure().nodes().len(), 64);
    }
}
