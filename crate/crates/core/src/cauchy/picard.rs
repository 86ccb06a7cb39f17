//! Picard iteration `X_{k+1}(t) = I − ∫_t^M Φ(τ) X_k(τ) dτ` for the Cauchy
//! problem, used to validate the sweep. The integral is discretized by
//! 16-point Gauss–Legendre panels with a spectral indefinite-integration
//! matrix, so the iterates are exact up to quadrature error.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, I};
use crate::measure::{Density, Segment, StarGrid};
use crate::operator_model::{NodeId, OperatorSpec};

use super::{reduced_generator, SolverOptions};

const ORDER: usize = 16;

#[derive(Debug, Clone)]
pub struct PicardIterate {
    pub k: usize,
    /// `X_k(0)`.
    pub value: CMat,
    /// `Σ_{j>k} Γ^j/j!` with `Γ = ∫_0^M ‖k_*(τ,τ)‖ dτ`.
    pub bound: f64,
}

/// `Σ_{j>k} γ^j / j!`, summed term by term so small tails keep their
/// relative accuracy.
pub fn picard_tail_bound(gamma: f64, k: usize) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    let mut term = 1.0;
    for j in 1..=k + 1 {
        term *= gamma / j as f64;
    }
    let mut sum = 0.0;
    let mut j = k + 1;
    while term > 1e-300 && (sum == 0.0 || term > sum * 1e-17) {
        sum += term;
        j += 1;
        term *= gamma / j as f64;
        if j > k + 10_000 {
            break;
        }
    }
    sum
}

struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `S[i][j] = ∫_{u_i}^1 ℓ_j(u) du`.
    tail: DMatrix<f64>,
}

fn legendre(n: usize, u: f64) -> Vec<f64> {
    let mut p = vec![0.0; n + 2];
    p[0] = 1.0;
    if n + 1 > 0 {
        p[1] = u;
    }
    for m in 1..=n {
        p[m + 1] = ((2 * m + 1) as f64 * u * p[m] - m as f64 * p[m - 1]) / (m + 1) as f64;
    }
    p
}

fn rule() -> Rule {
    let n = ORDER;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut u = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let p = legendre(n, u);
            let dp = n as f64 * (u * p[n] - p[n - 1]) / (u * u - 1.0);
            let du = p[n] / dp;
            u -= du;
            if du.abs() < 1e-16 {
                break;
            }
        }
        let p = legendre(n, u);
        let dp = n as f64 * (u * p[n] - p[n - 1]) / (u * u - 1.0);
        nodes.push(u);
        weights.push(2.0 / ((1.0 - u * u) * dp * dp));
    }
    let v = DMatrix::from_fn(n, n, |i, m| legendre(n, nodes[i])[m]);
    let a = v.try_inverse().expect("Legendre Vandermonde is invertible");
    let q = DMatrix::from_fn(n, n, |i, m| {
        let p = legendre(n, nodes[i]);
        if m == 0 {
            1.0 - nodes[i]
        } else {
            (p[m - 1] - p[m + 1]) / (2 * m + 1) as f64
        }
    });
    Rule {
        nodes,
        weights,
        tail: q * a,
    }
}

/// One panel: `Φ` (already multiplied by the change-of-variable density) at
/// the nodes, full weights, and the scaled tail-integration matrix.
struct Panel {
    phi: Vec<CMat>,
    weights: Vec<f64>,
    tail: DMatrix<f64>,
}

fn panels(spec: &OperatorSpec, z: C64, opts: &SolverOptions, rule: &Rule) -> Result<Vec<Panel>> {
    let m = spec.measure();
    let r = spec.rank();
    let mut out = Vec::new();
    let mut push_panel = |a: f64, b: f64, f: &mut dyn FnMut(f64) -> Result<CMat>| -> Result<()> {
        let h = 0.5 * (b - a);
        let mut phi = Vec::with_capacity(ORDER);
        for u in &rule.nodes {
            phi.push(f(0.5 * (a + b) + h * u)?);
        }
        out.push(Panel {
            phi,
            weights: rule.weights.iter().map(|w| w * h).collect(),
            tail: rule.tail.scale(h),
        });
        Ok(())
    };
    for seg in StarGrid::build(m).segments() {
        match seg {
            Segment::Atom {
                atom,
                mass,
                t_start,
                t_end,
                ..
            } => {
                let id = NodeId::Atom(*atom);
                let mid = 0.5 * (t_start + t_end);
                let (k, _) = reduced_generator(spec.alpha(id), spec.c(id), z, opts.cond_limit, mid)?;
                let size = mass * linalg::op_norm(&spec.k_diag(id));
                let count = (size.ceil() as usize).clamp(4, 64);
                let mut phi = |t: f64| -> Result<CMat> {
                    let inner = linalg::identity(r) - k.map(|v| v * I * (t - mid));
                    let inv = linalg::checked_inverse(&inner, opts.cond_limit).ok_or(Error::Singular {
                        t,
                        z,
                        context: "I − i(t−φ)K is singular".into(),
                    })?;
                    Ok((&k * inv).map(|v| v * (-I)))
                };
                let len = (t_end - t_start) / count as f64;
                for p in 0..count {
                    let a = t_start + p as f64 * len;
                    push_panel(a, a + len, &mut phi)?;
                }
            }
            Segment::Cell {
                node, t_start, t_end, ..
            } => {
                let id = NodeId::Quad(*node);
                let (k, _) = reduced_generator(spec.alpha(id), spec.c(id), z, opts.cond_limit, *t_start)?;
                let phi = k.map(|v| v * (-I));
                push_panel(*t_start, *t_end, &mut |_| Ok(phi.clone()))?;
            }
            Segment::Stretch { x_start, x_end, .. } => {
                // panels in x; dt = ρ(x) dx is folded into Φ
                let field = spec
                    .field()
                    .ok_or_else(|| Error::input("continuous stretch without coefficient field"))?;
                let density = m.density().cloned().unwrap_or(Density::Lebesgue);
                let count = 16;
                let len = (x_end - x_start) / count as f64;
                let mut phi = |x: f64| -> Result<CMat> {
                    let (k, _) = reduced_generator(&field.alpha(x), &field.c(x), z, opts.cond_limit, x)?;
                    let rho = density.eval(x);
                    Ok(k.map(|v| v * (-I) * rho))
                };
                for p in 0..count {
                    let a = x_start + p as f64 * len;
                    push_panel(a, a + len, &mut phi)?;
                }
            }
        }
    }
    Ok(out)
}

/// Iterates `X_0 = I, …, X_{k_max}` and returns their values at `t = 0`
/// with the factorial tail bounds. Requires `z` in the half-plane
/// `Im z ≥ 1 + ½ sup μ_x‖k(x,x)‖` where `‖Φ‖ ≤ ‖k_*‖`.
pub fn picard_sequence(spec: &OperatorSpec, z: C64, k_max: usize, opts: &SolverOptions) -> Result<Vec<PicardIterate>> {
    let threshold = spec.bounded_region_threshold();
    if z.im < threshold {
        return Err(Error::Domain {
            what: "Im z",
            value: z.im,
            lo: threshold,
            hi: f64::INFINITY,
        });
    }
    let r = spec.rank();
    let gamma = spec.k_norm_integral();
    let rule = rule();
    let panels = panels(spec, z, opts, &rule)?;
    let id = linalg::identity(r);

    let mut x: Vec<Vec<CMat>> = panels.iter().map(|_| vec![id.clone(); ORDER]).collect();
    let mut out = vec![PicardIterate {
        k: 0,
        value: id.clone(),
        bound: picard_tail_bound(gamma, 0),
    }];
    for k in 1..=k_max {
        let prods: Vec<Vec<CMat>> = panels
            .iter()
            .zip(&x)
            .map(|(p, xs)| p.phi.iter().zip(xs).map(|(f, xv)| f * xv).collect())
            .collect();
        let mut next = Vec::with_capacity(panels.len());
        let mut tail = CMat::zeros(r, r);
        for (p, pr) in panels.iter().zip(&prods).rev() {
            let mut vals = Vec::with_capacity(ORDER);
            for i in 0..ORDER {
                let mut acc = tail.clone();
                for (j, v) in pr.iter().enumerate() {
                    acc += v.map(|e| e * p.tail[(i, j)]);
                }
                vals.push(&id - acc);
            }
            for (w, v) in p.weights.iter().zip(pr) {
                tail += v.map(|e| e * *w);
            }
            next.push(vals);
        }
        next.reverse();
        x = next;
        out.push(PicardIterate {
            k,
            value: &id - &tail,
            bound: picard_tail_bound(gamma, k),
        });
    }
    Ok(out)
}

/// The `k`-th iterate at `t = 0` with its tail bound.
pub fn solve_g_picard(spec: &OperatorSpec, z: C64, iterations: usize, opts: &SolverOptions) -> Result<PicardIterate> {
    Ok(picard_sequence(spec, z, iterations, opts)?
        .pop()
        .expect("sequence holds X_0"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::solve_g;
    use crate::linalg::{c64, real};
    use crate::measure::{Atom, Measure};

    #[test]
    fn tail_bound_matches_series() {
        let e = picard_tail_bound(1.0, 0);
        assert!((e - (1f64.exp() - 1.0)).abs() < 1e-15);
        assert_eq!(picard_tail_bound(0.0, 3), 0.0);
    }

    #[test]
    fn integration_matrix_integrates_polynomials() {
        let rule = rule();
        // ∫_u^1 s³ ds = (1 − u⁴)/4
        for (i, u) in rule.nodes.iter().enumerate() {
            let s: f64 = (0..ORDER).map(|j| rule.tail[(i, j)] * rule.nodes[j].powi(3)).sum();
            assert!((s - (1.0 - u.powi(4)) / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn scalar_atom_converges() {
        let m = Measure::atomic(vec![Atom { x: 0.5, mass: 1.0 }]).unwrap();
        let s = OperatorSpec::scalar_atomic(m, &[0.0], &[real(2f64.sqrt())]).unwrap();
        let z = c64(0.0, 5.0);
        let opts = SolverOptions::default();
        let exact = solve_g(&s, z, &opts).unwrap().at_zero().clone();
        let it = solve_g_picard(&s, z, 20, &opts).unwrap();
        assert!((&it.value - &exact).norm() <= it.bound + 1e-14);
        assert!((it.value[(0, 0)] - c64(4.0 / 6.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn gamma_of_two_atom_spec() {
        let m = Measure::atomic(vec![Atom { x: 0.25, mass: 1.0 }, Atom { x: 0.75, mass: 1.0 }]).unwrap();
        let s = OperatorSpec::scalar_atomic(m, &[0.0, 0.0], &[real(1.0), real(1.0)]).unwrap();
        assert!((s.k_norm_integral() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn below_threshold_is_refused() {
        let m = Measure::atomic(vec![Atom { x: 0.5, mass: 1.0 }]).unwrap();
        let s = OperatorSpec::scalar_atomic(m, &[0.0], &[real(2f64.sqrt())]).unwrap();
        assert!(solve_g_picard(&s, c64(0.0, 1.0), 3, &SolverOptions::default()).is_err());
    }
}
