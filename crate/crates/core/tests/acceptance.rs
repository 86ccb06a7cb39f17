//! Acceptance run: one line per criterion. A failure makes the run fail
//! unless it is marked known, i.e. traced to a defect in the target
//! itself; those still print FAIL.
//! Built with `harness = false` so the lines show up in plain
//! `cargo test` output.

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;
use std::time::{Duration, Instant};

use dissim_core::cauchy;
use dissim_core::charfunc;
use dissim_core::corpus::{self, CorpusShape};
use dissim_core::criteria::constants::{utb_constant_integral, utb_constant_trace};
use dissim_core::criteria::density::{discrete_points, nu_c_density, nu_dh_sup, DensityFlag};
use dissim_core::criteria::geometry::{carleson_square, carleson_sup, square_candidates};
use dissim_core::criteria::{grid_for, CriteriaConfig, GridParams};
use dissim_core::linalg::{self, c64, real, I};
use dissim_core::operator_model::FnField;
use dissim_core::{oracle, Atom, Measure, OperatorSpec, SolverOptions, ZGrid, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Criterion = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
    /// Why a failure is expected, when it is.
    known: Option<&'static str>,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome {
        pass,
        detail,
        known: None,
    }
}

fn one_atom() -> OperatorSpec {
    let m = Measure::atomic(vec![Atom { x: 0.5, mass: 1.0 }]).unwrap();
    OperatorSpec::scalar_atomic(m, &[0.0], &[real(2f64.sqrt())]).unwrap()
}

fn lebesgue(alpha: fn(f64) -> f64) -> OperatorSpec {
    let field = FnField {
        alpha: move |x: f64| linalg::scalar(real(alpha(x))),
        c: |_x: f64| linalg::scalar(real(1.0)),
    };
    OperatorSpec::from_field(Measure::lebesgue(), 1, 1, Arc::new(field), true).unwrap()
}

fn corpus(seed: u64, count: usize, commuting: bool) -> Vec<OperatorSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = CorpusShape::default();
    (0..count)
        .map(|_| {
            if commuting {
                corpus::random_commuting_spec(&mut rng, &shape).unwrap()
            } else {
                corpus::random_atomic_spec(&mut rng, &shape).unwrap()
            }
        })
        .collect()
}

fn blaschke_identity() -> Outcome {
    let start = Instant::now();
    let spec = one_atom();
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut err = 0.0f64;
    for _ in 0..200 {
        let z = corpus::sample_z(&mut rng, 1e-3, 1e3);
        let s = charfunc::char_fn(&spec, z, &opts).unwrap().s[(0, 0)];
        err = err.max((s - (z - I) / (z + I)).norm());
    }
    let dt = start.elapsed();
    outcome(
        err <= 1e-10 && dt < Duration::from_secs(1),
        format!("max error {err:.2e} over 200 z in {dt:.2?}"),
    )
}

fn ode_vs_direct() -> Outcome {
    let start = Instant::now();
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut err = 0.0f64;
    for spec in corpus(20, 50, false) {
        for _ in 0..50 {
            let z = corpus::sample_z(&mut rng, 1e-2, 1e2);
            let g = cauchy::solve_g(&spec, z, &opts).unwrap();
            let d = oracle::direct_char_fn(&spec, z).unwrap();
            err = err.max(linalg::max_abs_diff(g.at_zero(), &d));
        }
    }
    let dt = start.elapsed();
    outcome(
        err <= 1e-8 && dt < Duration::from_secs(30),
        format!("max |G(0) − S_direct| {err:.2e} over 50×50 in {dt:.2?}"),
    )
}

fn determinant_formula() -> Outcome {
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut err = 0.0f64;
    for spec in corpus(30, 50, true) {
        for _ in 0..20 {
            let z = corpus::sample_z(&mut rng, 1e-2, 1e2);
            let d = charfunc::det_char_fn(&spec, z, &opts).unwrap();
            let s = charfunc::char_fn(&spec, z, &opts).unwrap();
            err = err.max((d - s.det).norm());
        }
    }
    let lin = lebesgue(|x| x);
    let formula = charfunc::det_char_fn(&lin, I, &opts).unwrap().norm();
    let ode = charfunc::char_fn(&lin, I, &opts).unwrap().det.norm();
    let target = (-FRAC_PI_4).exp();
    let gap = (formula - target).abs().max((ode - target).abs());
    outcome(
        err <= 1e-8 && gap <= 1e-6,
        format!("commuting corpus max gap {err:.2e}; |det S(i)| formula {formula:.8}, ODE {ode:.8} vs e^(−π/4) (gap {gap:.1e})"),
    )
}

fn contraction_and_gronwall() -> Outcome {
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut specs = corpus(40, 40, false);
    specs.extend(corpus(41, 40, true));
    let (mut excess, mut envelope) = (0.0f64, 0.0f64);
    let mut checked = 0usize;
    for spec in &specs {
        let threshold = spec.bounded_region_threshold();
        for j in 0..20 {
            let z = if j % 2 == 0 {
                corpus::sample_z(&mut rng, 1e-3, 1e2)
            } else {
                corpus::sample_z(&mut rng, threshold, 10.0 * threshold)
            };
            let path = cauchy::solve_g(spec, z, &opts).unwrap();
            let r = spec.rank();
            for p in &path.points {
                excess = excess.max(linalg::op_norm(&p.value) - 1.0);
                if z.im < threshold {
                    continue;
                }
                checked += 1;
                let e = p.gamma.exp();
                envelope = envelope.max(linalg::op_norm(&p.value) - e);
                if let Some(y) = &p.inverse {
                    envelope = envelope.max(linalg::op_norm(y) - e);
                }
                let trace = linalg::trace_norm(&(linalg::identity(r) - &p.value));
                envelope = envelope.max(trace - p.gamma_trace.exp_m1());
            }
        }
    }
    outcome(
        excess <= 1e-10 && envelope <= 1e-10,
        format!("max ‖G‖ − 1 = {excess:.2e}; worst envelope excess {envelope:.2e} over {checked} breakpoints"),
    )
}

fn resolvent_route() -> Outcome {
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut rel, mut stated, mut corrected) = (0.0f64, 0.0f64, 0.0f64);
    for spec in corpus(50, 40, false) {
        let c2 = cauchy::resolvent_constant(&spec);
        let bound = cauchy::resolvent_bound(&spec);
        let threshold = spec.bounded_region_threshold();
        for j in 0..10 {
            let z = if j % 2 == 0 {
                corpus::sample_z(&mut rng, 1e-2, 1e2)
            } else {
                corpus::sample_z(&mut rng, threshold, 10.0 * threshold)
            };
            let h = corpus::random_rhs(&mut rng, &spec);
            let out = cauchy::resolvent_apply(&spec, z, &h, &opts).unwrap();
            let direct = oracle::direct_resolvent(&spec, z, &h).unwrap();
            let (mut num, mut den) = (0.0f64, 0.0f64);
            for (a, b) in out.f.atoms.iter().zip(&direct.atoms) {
                num += (a - b).norm_squared();
                den += b.norm_squared();
            }
            rel = rel.max((num / den).sqrt());
            if z.im >= threshold {
                stated = stated.max(out.g_sup / (c2 * out.h_norm));
                corrected = corrected.max(out.g_sup / (bound * out.h_norm));
            }
        }
    }
    let mut o = outcome(
        rel <= 1e-9 && stated <= 1.0,
        format!(
            "max relative residual {rel:.2e}; max ‖g‖/(C₂‖h‖) = {stated:.3} with the stated C₂, {corrected:.3} with the Cauchy–Schwarz constant"
        ),
    );
    if rel <= 1e-9 && corrected <= 1.0 {
        o.known = Some("the stated C₂ = ½e^ω(e^{2ω}−1) is not a bound for small ω; ‖g‖/‖h‖ scales like √ω");
    }
    o
}

fn utb_routes() -> Outcome {
    let opts = SolverOptions::default();
    let config = CriteriaConfig {
        grid_params: GridParams {
            nx: 6,
            ny: 10,
            ..GridParams::default()
        },
        ..CriteriaConfig::default()
    };
    let mut rel = 0.0f64;
    for spec in corpus(60, 12, true) {
        let grid = grid_for(&spec, &config);
        let a = utb_constant_trace(&spec, &grid, &opts).unwrap();
        let b = utb_constant_integral(&spec, &grid, &opts).unwrap();
        rel = rel.max((a - b).abs() / a.max(b).max(f64::MIN_POSITIVE));
    }
    let mut rank_one = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let shape = CorpusShape {
        max_rank: 1,
        ..CorpusShape::default()
    };
    for _ in 0..12 {
        let spec = corpus::random_atomic_spec(&mut rng, &shape).unwrap();
        let grid = grid_for(&spec, &config);
        rank_one = rank_one.max(utb_constant_trace(&spec, &grid, &opts).unwrap());
    }
    outcome(
        rel <= 1e-6 && rank_one <= 1.0 + 1e-9,
        format!("max relative route gap {rel:.2e}; rank-one max C₂ = {rank_one:.12}"),
    )
}

fn factorization() -> Outcome {
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let shape = CorpusShape {
        max_atoms: 5,
        ..CorpusShape::default()
    };
    let (mut recon, mut dets) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < 30 {
        let spec = corpus::random_atomic_spec(&mut rng, &shape).unwrap();
        let na = spec.measure().atoms().len();
        if na < 3 {
            continue;
        }
        done += 1;
        let z = corpus::sample_z(&mut rng, 0.1, 10.0);
        let s = charfunc::char_fn(&spec, z, &opts).unwrap();
        for a in 0..na {
            let f = charfunc::factorize(&spec, a, z, &opts).unwrap();
            recon = recon.max(linalg::max_abs_diff(&f.product(), &s.s));
            let d = linalg::det(&f.left) * linalg::det(&f.middle) * linalg::det(&f.right);
            dets = dets.max((d - s.det).norm());
        }
        let atoms: Vec<usize> = (0..na).collect();
        let chain = charfunc::chain_factorize(&spec, &atoms, z, &opts).unwrap();
        let prod = chain.iter().fold(linalg::identity(spec.rank()), |acc, f| acc * f);
        recon = recon.max(linalg::max_abs_diff(&prod, &s.s));
        let d = chain.iter().map(linalg::det).fold(real(1.0), |a, b| a * b);
        dets = dets.max((d - s.det).norm());
    }
    outcome(
        recon <= 1e-8 && dets <= 1e-10,
        format!("max reconstruction residual {recon:.2e}; max determinant gap {dets:.2e}"),
    )
}

/// Kernel-sum sup over the points, their shadows at several heights and a
/// log-spaced column through the real parts, plus the square sup.
fn carleson_pair(points: &[C64]) -> (f64, f64) {
    let mut grid = Vec::new();
    for p in points {
        for f in [0.25, 0.5, 1.0, 2.0, 4.0] {
            grid.push(c64(p.re, p.im * f));
        }
    }
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.im), b.max(p.im)));
    grid.extend(ZGrid::new(-1.0, 1.0, 0.1 * lo, 10.0 * hi, 5, 200).unwrap().points());
    let (hs, xs) = square_candidates(points);
    (carleson_sup(points, &grid), carleson_square(points, &hs, &xs).0)
}

fn carleson_equivalence() -> Outcome {
    let geometric: Vec<(f64, f64)> = (1..=20)
        .map(|k_max| {
            let pts: Vec<C64> = (0..=k_max).map(|k| c64(0.0, 2f64.powi(k))).collect();
            carleson_pair(&pts)
        })
        .collect();
    let (ks, qs) = geometric
        .iter()
        .fold((0.0f64, 0.0f64), |(a, b), (k, q)| (a.max(*k), b.max(*q)));
    let stable = geometric[19].0 <= 1.05 * geometric[9].0 && geometric[19].1 <= 1.05 * geometric[9].1;

    let cluster = |n: usize| -> (f64, f64) {
        let pts: Vec<C64> = (1..=n).map(|k| c64(0.0, 1.0 / (k * k) as f64)).collect();
        carleson_pair(&pts)
    };
    let ns = [10, 25, 50, 100, 200];
    let vals: Vec<(f64, f64)> = ns.iter().map(|&n| cluster(n)).collect();
    let monotone = vals.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1);
    let (k50, q50) = vals[2];
    let (k200, q200) = vals[4];
    let (rk, rq) = (k200 / k50, q200 / q50);
    outcome(
        stable && monotone && rk >= 1.5 && rq >= 1.5,
        format!(
            "{{i2^k}}: sup over K≤20 kernel {ks:.4}, square {qs:.4}; {{i/n²}}: N=50→200 kernel {k50:.2}→{k200:.2} ({rk:.2}×), square {q50:.2}→{q200:.2} ({rq:.2}×)"
        ),
    )
}

fn normal_without_utb() -> Outcome {
    let opts = SolverOptions::default();
    let grid = ZGrid::new(0.0, 0.0, 1e-6, 10.0, 1, 60).unwrap();
    let mut worst_defect = 0.0f64;
    let mut worst_cond = 0.0f64;
    let mut utb = Vec::new();
    for n in [20, 200] {
        let spec = oracle::example_3_11_cluster(n).unwrap();
        let r = oracle::normal_similarity_check(&spec);
        worst_defect = worst_defect.max(r.normality_defect).max(spec.commutativity_defect());
        worst_cond = worst_cond.max(r.condition_number);
        utb.push(utb_constant_trace(&spec, &grid, &opts).unwrap());
    }
    let growth = utb[1] / utb[0];
    outcome(
        worst_defect <= 1e-10 && worst_cond <= 1.0 + 1e-8 && growth >= 5.0,
        format!(
            "defect {worst_defect:.1e}, eigenbasis cond {worst_cond}; UTB N=20 {:.3} → N=200 {:.3} ({growth:.2}×)",
            utb[0], utb[1]
        ),
    )
}

fn density_tests() -> Outcome {
    let lin = nu_c_density(&lebesgue(|x| x), 64, 3);
    let sq = nu_c_density(&lebesgue(|x| x * x), 64, 3);
    let stable = lin.ladder.iter().all(|&(_, s)| (s - 1.0).abs() <= 0.05);
    let m = Measure::atomic(vec![Atom { x: 0.5, mass: 1.0 }]).unwrap();
    let atom = OperatorSpec::scalar_atomic(m, &[0.0], &[real(1.0)]).unwrap();
    let w = nu_dh_sup(&discrete_points(&atom));
    let atom_ok = (w.sup - 4.0).abs() <= 1e-9 && w.x0.abs() <= 1e-12 && (w.h - 0.25).abs() <= 1e-12;
    outcome(
        (lin.sup - 1.0).abs() <= 0.05
            && stable
            && lin.flag == DensityFlag::Bounded
            && sq.flag == DensityFlag::Unbounded
            && atom_ok,
        format!(
            "α=x: sup {:.6} ({:?}); α=x²: {:?} (sup {:.2}); atom: sup {:.12} at ({}, {})",
            lin.sup, lin.flag, sq.flag, sq.sup, w.sup, w.x0, w.h
        ),
    )
}

fn picard_validation() -> Outcome {
    // the iterates and the sweep each carry rounding error of this order
    const FLOOR: f64 = 1e-11;
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut specs = corpus(110, 15, false);
    specs.extend(corpus(111, 15, true));
    let mut worst = f64::NEG_INFINITY;
    let mut worst_ratio = 0.0f64;
    let mut evaluated = 0;
    for spec in &specs {
        let threshold = spec.bounded_region_threshold();
        for _ in 0..3 {
            let z = corpus::sample_z(&mut rng, threshold, 4.0 * threshold);
            let exact = cauchy::solve_g(spec, z, &opts).unwrap();
            for it in cauchy::picard_sequence(spec, z, 25, &opts).unwrap().iter().skip(1) {
                let gap = linalg::op_norm(&(&it.value - exact.at_zero()));
                worst = worst.max(gap - it.bound - FLOOR);
                if it.bound > FLOOR {
                    worst_ratio = worst_ratio.max(gap / it.bound);
                }
                evaluated += 1;
            }
        }
    }
    outcome(
        worst <= 0.0,
        format!("{evaluated} iterates; max (gap − tail − {FLOOR:.0e}) = {worst:.2e}; max gap/tail where tail > floor {worst_ratio:.3}"),
    )
}

fn main() {
    let criteria: [(&str, Criterion); 11] = [
        ("Blaschke identity", blaschke_identity),
        ("ODE vs direct characteristic function", ode_vs_direct),
        ("determinant formula", determinant_formula),
        ("contraction and Gronwall envelopes", contraction_and_gronwall),
        ("resolvent route", resolvent_route),
        ("UTB route agreement", utb_routes),
        ("factorization reconstruction", factorization),
        ("Carleson equivalence", carleson_equivalence),
        ("normal operator without UTB", normal_without_utb),
        ("density tests", density_tests),
        ("Picard validation", picard_validation),
    ];
    let (mut failed, mut known) = (0, 0);
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        let status = match (o.pass, o.known) {
            (true, _) => "PASS",
            (false, Some(_)) => {
                known += 1;
                "FAIL"
            }
            (false, None) => {
                failed += 1;
                "FAIL"
            }
        };
        println!("criterion {:2} {:<40} {status}  {}", i + 1, name, o.detail);
        if let (false, Some(why)) = (o.pass, o.known) {
            println!("             known failure: {why}");
        }
    }
    println!(
        "{} of {} criteria pass; {known} known failure(s), {failed} unexpected",
        criteria.len() - failed - known,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
