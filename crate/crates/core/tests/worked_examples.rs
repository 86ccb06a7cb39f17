//! Closed-form cases checked end to end through the public API.

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use dissim_core::charfunc;
use dissim_core::criteria::{self, CriteriaConfig, GridParams, Verdict};
use dissim_core::linalg::{self, c64, real, CMat, CVec, I};
use dissim_core::operator_model::FnField;
use dissim_core::{cauchy, oracle, Atom, Measure, NodeSamples, OperatorSpec, SolverOptions, ZGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn one_atom() -> OperatorSpec {
    let m = Measure::atomic(vec![Atom { x: 0.5, mass: 1.0 }]).unwrap();
    OperatorSpec::scalar_atomic(m, &[0.0], &[real(2f64.sqrt())]).unwrap()
}

fn two_atoms_rank_two(c1: [f64; 2], c2: [f64; 2]) -> OperatorSpec {
    let m = Measure::atomic(vec![Atom { x: 0.25, mass: 1.0 }, Atom { x: 0.75, mass: 1.0 }]).unwrap();
    let row = |c: [f64; 2]| linalg::from_rows(1, 2, &[real(c[0]), real(c[1])]);
    OperatorSpec::new(
        m,
        1,
        2,
        vec![linalg::zeros(1, 1), linalg::zeros(1, 1)],
        vec![row(c1), row(c2)],
        None,
        true,
    )
    .unwrap()
}

fn small_grid() -> CriteriaConfig {
    CriteriaConfig {
        grid_params: GridParams {
            nx: 8,
            ny: 16,
            ..GridParams::default()
        },
        ..CriteriaConfig::default()
    }
}

#[test]
fn one_atom_across_modules() {
    let spec = one_atom();
    let opts = SolverOptions::default();
    let z = c64(0.0, 2.0);

    assert!((spec.assemble().matrix[(0, 0)] - I).norm() < 1e-15);
    let s = charfunc::char_fn(&spec, z, &opts).unwrap();
    assert!((s.s[(0, 0)] - real(1.0 / 3.0)).norm() < 1e-15);
    assert!((charfunc::det_char_fn(&spec, z, &opts).unwrap() - real(1.0 / 3.0)).norm() < 1e-15);

    let at_i = charfunc::char_fn(&spec, I, &opts).unwrap();
    assert!(at_i.s[(0, 0)].norm() < 1e-15);
    assert!((at_i.trace_defect - 1.0).abs() < 1e-15);

    let h = NodeSamples::new(vec![CVec::from_element(1, real(1.0))], vec![]);
    let f = cauchy::resolvent_apply(&spec, z, &h, &opts).unwrap().f;
    assert!((f.atoms[0][0] - c64(0.0, 1.0 / 3.0)).norm() < 1e-15);

    let k = charfunc::kernel_at(&spec, I, &opts).unwrap();
    assert_eq!((k.dim_ker, k.multiplicity, k.root_vector_free), (1, 1, true));

    let f = charfunc::factorize(&spec, 0, z, &opts).unwrap();
    assert!(linalg::max_abs_diff(&f.left, &linalg::identity(1)) < 1e-15);
    assert!(linalg::max_abs_diff(&f.right, &linalg::identity(1)) < 1e-15);
    assert!(linalg::max_abs_diff(&f.middle, &s.s) < 1e-15);

    let inv = cauchy::inverse_path(&spec, z, &opts).unwrap();
    let at_zero = inv.iter().find(|(t, _)| *t == 0.0).unwrap();
    assert!((at_zero.1.as_ref().unwrap()[(0, 0)] - real(3.0)).norm() < 1e-14);

    let picard = cauchy::solve_g_picard(&spec, c64(0.0, 5.0), 20, &opts).unwrap();
    let exact = charfunc::char_fn(&spec, c64(0.0, 5.0), &opts).unwrap().s;
    assert!((&picard.value - &exact).norm() <= cauchy::picard_tail_bound(2.0, 20) + 1e-15);

    let r = criteria::evaluate(&spec, &small_grid()).unwrap();
    assert_eq!(r.verdict_2_6.verdict, Verdict::Holds);
    assert!((r.c2_trace - 1.0).abs() < 1e-12);
    assert!((r.c1.unwrap() - 1.0).abs() < 1e-9);
    // η_{4h}(m) = m for h ≥ m/4, so the ratio peaks at 4 whatever the mass
    assert!((r.nu_dh.sup - 4.0).abs() < 1e-9);
}

#[test]
fn zero_kernel_is_selfadjoint() {
    let m = Measure::atomic(vec![Atom { x: 0.2, mass: 0.5 }, Atom { x: 0.6, mass: 1.5 }]).unwrap();
    let spec = OperatorSpec::scalar_atomic(m, &[0.3, -1.0], &[real(0.0), real(0.0)]).unwrap();
    let opts = SolverOptions::default();
    for z in [c64(0.0, 1.0), c64(2.0, 0.01), c64(-5.0, 30.0)] {
        let s = charfunc::char_fn(&spec, z, &opts).unwrap();
        assert_eq!(s.s, linalg::identity(1));
        assert_eq!(charfunc::det_char_fn(&spec, z, &opts).unwrap(), real(1.0));
    }
    assert!(spec.atom_eigenvalues().unwrap().is_empty());
    assert_eq!(spec.adjoint().matrix, spec.assemble().matrix);
    assert!(oracle::normal_similarity_check(&spec).normal);
    let r = criteria::evaluate(&spec, &small_grid()).unwrap();
    assert_eq!(r.verdict_2_5.verdict, Verdict::Holds);
    assert_eq!(r.verdict_2_6.verdict, Verdict::Holds);
    assert_eq!(r.c2_trace, 0.0);
}

#[test]
fn lebesgue_linear_field() {
    let field = FnField {
        alpha: |x: f64| linalg::scalar(real(x)),
        c: |_x: f64| linalg::scalar(real(1.0)),
    };
    let spec = OperatorSpec::from_field(Measure::lebesgue(), 1, 1, Arc::new(field), true).unwrap();
    let opts = SolverOptions::default();
    let target = (-FRAC_PI_4).exp();
    let s = charfunc::char_fn(&spec, I, &opts).unwrap();
    assert!((s.det.norm() - target).abs() < 1e-6);
    assert!((charfunc::det_char_fn(&spec, I, &opts).unwrap().norm() - target).abs() < 1e-6);

    let r = criteria::evaluate(&spec, &small_grid()).unwrap();
    assert!((r.nu_c.sup - 1.0).abs() < 0.05);
    assert!((r.nu_h.sup - 2.0).abs() < 1e-6);
    assert_eq!(r.verdict_2_6.verdict, Verdict::Holds);
    // the singular-outer infimum at z = i is the same e^{−π/4}
    let nu = criteria::NuC::from_spec(&spec);
    assert!(((-nu.poisson(I)).exp() - target).abs() < 1e-9);
}

#[test]
fn six_atom_rank_two_against_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let shape = dissim_core::corpus::CorpusShape {
        max_atoms: 6,
        max_dim: 3,
        max_rank: 2,
        max_atom_weight: 2.0,
    };
    let spec = loop {
        let s = dissim_core::corpus::random_atomic_spec(&mut rng, &shape).unwrap();
        if s.measure().atoms().len() == 6 && s.rank() == 2 {
            break s;
        }
    };
    let opts = SolverOptions::default();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let z = dissim_core::corpus::sample_z(&mut rng, 1e-2, 1e2);
        let s = charfunc::char_fn(&spec, z, &opts).unwrap().s;
        worst = worst.max(linalg::max_abs_diff(&s, &oracle::direct_char_fn(&spec, z).unwrap()));
    }
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn double_eigenvalue_with_and_without_root_vector() {
    let opts = SolverOptions::default();
    let s2 = 2f64.sqrt();

    // orthogonal factors: k(x₁,x₂) = 0, A = diag(i, i)
    let split = two_atoms_rank_two([s2, 0.0], [0.0, s2]);
    let k = charfunc::kernel_at(&split, I, &opts).unwrap();
    assert_eq!((k.dim_ker, k.multiplicity, k.root_vector_free), (2, 2, true));
    assert!(oracle::normal_similarity_check(&split).diagonalizable);

    // shared factor: A = [[i, 0], [2i, i]] is a Jordan block
    let shared = two_atoms_rank_two([s2, 0.0], [s2, 0.0]);
    let k = charfunc::kernel_at(&shared, I, &opts).unwrap();
    assert_eq!((k.dim_ker, k.multiplicity, k.root_vector_free), (1, 2, false));
    assert!(!oracle::normal_similarity_check(&shared).diagonalizable);
}

#[test]
fn commuting_atom_factor_is_diagonal_in_the_joint_basis() {
    let m = Measure::atomic(vec![Atom { x: 0.5, mass: 1.0 }]).unwrap();
    let alpha = linalg::from_rows(2, 2, &[real(1.0), real(0.0), real(0.0), real(-0.5)]);
    let c = linalg::from_rows(2, 2, &[real(1.0), real(0.0), real(0.0), real(0.5)]);
    let spec = OperatorSpec::new(m, 2, 2, vec![alpha], vec![c], None, true).unwrap();
    let z = c64(0.4, 0.7);
    let b = charfunc::atom_factor(&spec, 0, z, &SolverOptions::default()).unwrap();
    let zs = [c64(1.0, 0.5), c64(-0.5, 0.125)];
    let expected = CMat::from_diagonal(&CVec::from_iterator(
        2,
        zs.iter().map(|&zj| charfunc::blaschke_factor(zj, z)),
    ));
    assert!(linalg::max_abs_diff(&b, &expected) < 1e-14);
}

#[test]
fn cluster_family_is_normal_but_fails_the_criteria() {
    let spec = oracle::example_3_11_cluster(70).unwrap();
    let r = oracle::normal_similarity_check(&spec);
    assert!(r.normal && r.condition_number == 1.0);
    let config = CriteriaConfig {
        grid: Some(ZGrid::new(0.0, 0.0, 1e-5, 10.0, 1, 20).unwrap()),
        ..CriteriaConfig::default()
    };
    let report = criteria::evaluate(&spec, &config).unwrap();
    assert!(report.nu_dh.sup > config.window_cap);
    assert_eq!(report.verdict_2_5.verdict, Verdict::Fails);
    assert_eq!(report.overall(), Verdict::Fails);
}
