//! Dense ground truth. For purely atomic measures the node space is
//! finite-dimensional and `A`, `A*`, `S_A` are computed by plain linear
//! algebra in the orthonormal basis `Â = W^{1/2} A W^{−1/2}`; with a
//! continuous part the same routines describe the discretized operator.

use nalgebra::linalg::Schur;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, I};
use crate::measure::{Atom, Measure, NodeSamples};
use crate::operator_model::OperatorSpec;

/// `‖ÂÂ* − Â*Â‖ ≤ NORMAL_TOL·‖Â‖²` counts as normal.
pub const NORMAL_TOL: f64 = 1e-10;
/// Eigenvalues closer than this (relative to `max(1, ‖Â‖)`) are merged
/// when counting algebraic multiplicities.
pub const EIGEN_CLUSTER_TOL: f64 = 1e-7;
/// Singular-value threshold (relative) for geometric multiplicities.
pub const NULLITY_TOL: f64 = 1e-8;

/// `(Â, Ĉ)` with `Ĉ = W^{1/2}C`, so `c*(A* − z)⁻¹c = Ĉ*(Â* − z)⁻¹Ĉ`.
pub fn orthonormal_model(spec: &OperatorSpec) -> (CMat, CMat) {
    let a = spec.assemble();
    let c = a.to_orthonormal(&spec.stacked_c());
    (a.orthonormal_form(), c)
}

/// `I + i c*(A* − z)⁻¹ c`.
pub fn direct_char_fn(spec: &OperatorSpec, z: C64) -> Result<CMat> {
    let (a, c) = orthonormal_model(spec);
    let n = a.nrows();
    let m = a.adjoint() - linalg::identity(n) * z;
    let x = m.lu().solve(&c).ok_or(Error::Singular {
        t: 0.0,
        z,
        context: "A* − z is singular".into(),
    })?;
    Ok(linalg::identity(spec.rank()) + (c.adjoint() * x).map(|v| v * I))
}

/// `(A* − z)⁻¹h` by a dense solve in coefficient form.
pub fn direct_resolvent(spec: &OperatorSpec, z: C64, h: &NodeSamples<CVec>) -> Result<NodeSamples<CVec>> {
    h.check_shape(spec.measure())?;
    let adj = spec.adjoint();
    let n = spec.dim_h();
    let ids = spec.node_ids();
    let mut rhs = CVec::zeros(ids.len() * n);
    for (b, id) in ids.iter().enumerate() {
        let v = match id {
            crate::NodeId::Atom(k) => &h.atoms[*k],
            crate::NodeId::Quad(q) => &h.nodes[*q],
        };
        if v.len() != n {
            return Err(Error::input(format!("h values must have length {n}")));
        }
        rhs.rows_mut(b * n, n).copy_from(v);
    }
    let m = adj.matrix - linalg::identity(ids.len() * n) * z;
    let f = m.lu().solve(&rhs).ok_or(Error::Singular {
        t: 0.0,
        z,
        context: "A* − z is singular".into(),
    })?;
    let mut out = NodeSamples::new(vec![CVec::zeros(n); h.atoms.len()], vec![CVec::zeros(n); h.nodes.len()]);
    for (b, id) in ids.iter().enumerate() {
        let v = f.rows(b * n, n).into_owned();
        match id {
            crate::NodeId::Atom(k) => out.atoms[*k] = v,
            crate::NodeId::Quad(q) => out.nodes[*q] = v,
        }
    }
    Ok(out)
}

/// `4 Im z · tr[(A* − z)⁻¹ Im A (A − z̄)⁻¹]`.
pub fn dense_trace_defect(spec: &OperatorSpec, z: C64) -> Result<f64> {
    let (a, _) = orthonormal_model(spec);
    let n = a.nrows();
    let im = (&a - a.adjoint()).map(|v| v / (2.0 * I));
    let left = linalg::checked_inverse(&(a.adjoint() - linalg::identity(n) * z), 1e14).ok_or(Error::Singular {
        t: 0.0,
        z,
        context: "A* − z is singular".into(),
    })?;
    // (A − z̄)⁻¹ = ((A* − z)⁻¹)*
    let right = left.adjoint();
    Ok(4.0 * z.im * linalg::trace(&(left * im * right)).re)
}

/// `‖(A − z)⁻¹‖`, infinite at eigenvalues.
pub fn resolvent_norm(spec: &OperatorSpec, z: C64) -> f64 {
    let (a, _) = orthonormal_model(spec);
    let n = a.nrows();
    let s = linalg::min_singular(&(a - linalg::identity(n) * z));
    if s == 0.0 {
        f64::INFINITY
    } else {
        1.0 / s
    }
}

/// All eigenvalues of the (discretized) operator.
pub fn eigenvalues(spec: &OperatorSpec) -> Vec<C64> {
    let (a, _) = orthonormal_model(spec);
    if a.nrows() == 0 {
        return Vec::new();
    }
    let (_, t) = Schur::new(a).unpack();
    t.diagonal().iter().copied().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenCluster {
    pub value: C64,
    pub algebraic: usize,
    pub geometric: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub eigenvalues: Vec<EigenCluster>,
    pub diagonalizable: bool,
    /// `cond(V)` of a column-normalized eigenvector matrix; infinite when
    /// not diagonalizable, 1 for normal operators.
    pub condition_number: f64,
    pub normal: bool,
    /// `‖ÂÂ* − Â*Â‖`.
    pub normality_defect: f64,
}

/// Eigen-structure of `A`: multiplicities, diagonalizability (in finite
/// dimension the same as similarity to a normal operator) and the
/// eigenbasis condition number.
pub fn normal_similarity_check(spec: &OperatorSpec) -> OracleResult {
    let (a, _) = orthonormal_model(spec);
    let n = a.nrows();
    if n == 0 {
        return OracleResult {
            eigenvalues: Vec::new(),
            diagonalizable: true,
            condition_number: 1.0,
            normal: true,
            normality_defect: 0.0,
        };
    }
    let norm = linalg::op_norm(&a);
    let defect = linalg::op_norm(&(&a * a.adjoint() - a.adjoint() * &a));
    let normal = defect <= NORMAL_TOL * norm * norm;
    let scale = norm.max(1.0);

    let (_, t) = Schur::new(a.clone()).unpack();
    let diag: Vec<C64> = t.diagonal().iter().copied().collect();
    let clusters = crate::operator_model::cluster_points(&diag, EIGEN_CLUSTER_TOL * scale);

    let mut eig = Vec::with_capacity(clusters.len());
    let mut vectors: Vec<CVec> = Vec::with_capacity(n);
    for (lambda, algebraic) in clusters {
        let shifted = &a - linalg::identity(n) * lambda;
        let ns = linalg::null_space(&shifted, NULLITY_TOL * scale);
        let geometric = ns.ncols().clamp(1, algebraic);
        for j in 0..geometric {
            vectors.push(ns.column(j).into_owned());
        }
        eig.push(EigenCluster {
            value: lambda,
            algebraic,
            geometric,
        });
    }
    let diagonalizable = normal || eig.iter().all(|e| e.geometric == e.algebraic);
    let condition_number = if normal {
        1.0
    } else if diagonalizable && vectors.len() == n {
        linalg::condition_number(&CMat::from_columns(&vectors))
    } else {
        f64::INFINITY
    };
    OracleResult {
        eigenvalues: eig,
        diagonalizable,
        condition_number,
        normal,
        normality_defect: defect,
    }
}

/// Diagonal example: scalar `H`, atoms at `x_m = (m+1)/(N+1)` with masses
/// `μ_m`, `α(x_m) = α_m`, and `c(x_m) = √w_m e_m*` so that
/// `k(x_n, x_m) = w_n δ_{nm}`. The operator is diagonal with eigenvalues
/// `z_m = α_m + ½ i w_m μ_m`, hence normal.
pub fn example_3_11(masses: &[f64], weights: &[f64], alphas: &[f64]) -> Result<OperatorSpec> {
    let n = masses.len();
    if n == 0 || weights.len() != n || alphas.len() != n {
        return Err(Error::input(
            "masses, weights and alphas must have the same nonzero length",
        ));
    }
    if masses.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
        return Err(Error::input("masses must be positive"));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::input("weights must be nonnegative"));
    }
    let atoms = (0..n)
        .map(|m| Atom {
            x: (m + 1) as f64 / (n + 1) as f64,
            mass: masses[m],
        })
        .collect();
    let measure = Measure::atomic(atoms)?;
    let alpha = alphas.iter().map(|&a| linalg::scalar(linalg::real(a))).collect();
    let c = (0..n)
        .map(|m| {
            let mut row = linalg::zeros(1, n);
            row[(0, m)] = linalg::real(weights[m].sqrt());
            row
        })
        .collect();
    OperatorSpec::new(measure, 1, n, alpha, c, None, true)
}

/// The clustering family `z_n = i/n²`, `n = 1..N`: `μ_n = 1/n²`, `w_n = 2`,
/// `α = 0`.
pub fn example_3_11_cluster(n: usize) -> Result<OperatorSpec> {
    let masses: Vec<f64> = (1..=n).map(|k| 1.0 / (k * k) as f64).collect();
    example_3_11(&masses, &vec![2.0; n], &vec![0.0; n])
}
