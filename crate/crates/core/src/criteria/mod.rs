//! Similarity tests. The suprema over `ℂ_+` and over windows on the real
//! axis are replaced by maxima over finite grids, so every constant here is
//! a lower estimate of the true one; boundedness questions are answered by
//! comparing refinements or against explicit caps, and the verdicts say
//! which.

pub mod constants;
pub mod density;
pub mod geometry;
mod grid;
pub mod verdict;

pub use constants::{
    c3_constant, lrg_constant, point_spectrum, sample_z, sweep, utb_constant_integral, utb_constant_trace, C3Estimate,
    LrgEstimate, ZSample,
};
pub use density::{
    discrete_points, nu_c_density, nu_dh_sup, nu_dh_window, nu_h_sup, sing_outer_bound, DensityFlag, DiscretePoint,
    NuC, NuCDensity, SingOuter, WindowSup,
};
pub use geometry::{carleson_square, carleson_sup, delta0, n_sparse_decompose, sparse_constant};
pub use grid::{GridParams, ZGrid};
pub use verdict::{Check, Verdict, VerdictReport};

use crate::cauchy::SolverOptions;
use crate::charfunc::{self, CLUSTER_TOL};
use crate::error::Result;
use crate::linalg::{self, C64};
use crate::operator_model::{cluster_points, OperatorSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct CriteriaConfig {
    /// Explicit grid; `None` fits one to the spectrum.
    pub grid: Option<ZGrid>,
    pub grid_params: GridParams,
    pub solver: SolverOptions,
    /// Coarsest bin count for the `ν_c` density.
    pub bins: usize,
    /// Number of bin halvings compared against the coarsest level.
    pub halvings: usize,
    /// Window ratios of `ν_{d,h}` (and `ν_h`) above this count as
    /// unbounded.
    pub window_cap: f64,
    /// Pseudohyperbolic separation at or below which the point spectrum is
    /// not sparse.
    pub sparse_eps: f64,
    /// Level used for the `N`-sparse decomposition.
    pub n_sparse_eps: f64,
    /// Largest dense dimension for which `C1` is computed.
    pub dense_limit: usize,
    /// Dyadic levels of the `ν_h` window scan.
    pub scan_levels: usize,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        Self {
            grid: None,
            grid_params: GridParams::default(),
            solver: SolverOptions::default(),
            bins: 64,
            halvings: 3,
            window_cap: 64.0,
            sparse_eps: 1e-6,
            n_sparse_eps: 0.1,
            dense_limit: 200,
            scan_levels: 13,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriteriaReport {
    pub grid_points: usize,
    /// `C1`; `None` when the dense matrix is too large.
    pub c1: Option<f64>,
    pub c2_trace: f64,
    pub c2_integral: f64,
    /// `max |C2 routes| relative difference` over the grid.
    pub c2_route_gap: f64,
    pub c3: f64,
    pub c3_skipped: usize,
    /// Largest violation `trace defect − majorant` (≤ 0 when the pointwise
    /// bound holds); `None` without commutativity.
    pub utb_bound_excess: Option<f64>,
    /// Distinct eigenvalues in `ℂ_+` with multiplicities.
    pub eigenvalues: Vec<(C64, usize)>,
    pub carleson_sup: f64,
    pub carleson_square: f64,
    pub delta0: f64,
    pub sparse_inf: f64,
    pub n_sparse: usize,
    pub nu_c: NuCDensity,
    pub nu_dh: WindowSup,
    pub nu_h: WindowSup,
    pub sing_outer: SingOuter,
    pub verdict_2_5: VerdictReport,
    pub verdict_2_6: VerdictReport,
    /// Grid points where the solver failed, and other remarks.
    pub notes: Vec<String>,
}

impl CriteriaReport {
    /// Combined outcome of the two verdicts used for exit statuses:
    /// `Holds` if either holds, `Fails` if the applicable ones fail,
    /// otherwise `Inconclusive`.
    pub fn overall(&self) -> Verdict {
        let vs = [self.verdict_2_5.verdict, self.verdict_2_6.verdict];
        if vs.contains(&Verdict::Holds) {
            Verdict::Holds
        } else if vs.contains(&Verdict::Fails) {
            Verdict::Fails
        } else {
            Verdict::Inconclusive
        }
    }
}

/// Range of the eigenvalues of `α` over all atoms and nodes.
fn alpha_range(spec: &OperatorSpec) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for id in spec.node_ids() {
        for v in linalg::hermitian_eigen(spec.alpha(id)).0 {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    lo.is_finite().then_some((lo, hi))
}

/// The grid `evaluate` uses for `spec` under `config`.
pub fn grid_for(spec: &OperatorSpec, config: &CriteriaConfig) -> ZGrid {
    match &config.grid {
        Some(g) => g.clone(),
        None => ZGrid::adaptive(&point_spectrum(spec), alpha_range(spec), &config.grid_params),
    }
}

fn density_check(flag: DensityFlag, d: &NuCDensity) -> Check {
    let (verdict, detail) = match flag {
        DensityFlag::Bounded => (
            Verdict::Holds,
            format!("ν_c density sup {:.6e} stable under bin halving", d.sup),
        ),
        DensityFlag::Unbounded => (Verdict::Fails, format!("ν_c density sup grows {:?}", d.ladder)),
        DensityFlag::Inconclusive => (Verdict::Inconclusive, format!("ν_c density sup drifts {:?}", d.ladder)),
        DensityFlag::Inapplicable => (Verdict::Holds, "no continuous part".into()),
    };
    Check {
        name: "bounded ν_c density",
        verdict,
        detail,
    }
}

pub fn evaluate(spec: &OperatorSpec, config: &CriteriaConfig) -> Result<CriteriaReport> {
    let grid = grid_for(spec, config);
    let mut notes = Vec::new();
    let spectrum = point_spectrum(spec);
    let eigenvalues = cluster_points(&spectrum, CLUSTER_TOL);
    let distinct: Vec<C64> = eigenvalues.iter().map(|e| e.0).collect();

    // per-z quantities
    let mut c2_trace = 0.0f64;
    let mut c2_integral = 0.0f64;
    let mut c2_route_gap = 0.0f64;
    let mut c3 = 0.0f64;
    let mut c3_skipped = 0;
    let mut excess = f64::NEG_INFINITY;
    let mut failed = 0;
    for s in sweep(spec, &grid, &config.solver) {
        match s {
            Ok(s) => {
                c2_trace = c2_trace.max(s.trace_defect);
                c2_integral = c2_integral.max(s.integral);
                let scale = s.trace_defect.abs().max(s.integral.abs()).max(1e-300);
                c2_route_gap = c2_route_gap.max((s.trace_defect - s.integral).abs() / scale);
                match s.c3 {
                    Some(v) => c3 = c3.max(v),
                    None => c3_skipped += 1,
                }
                excess = excess.max(s.trace_defect - s.bound);
            }
            Err(e) => {
                failed += 1;
                if failed <= 3 {
                    notes.push(format!("solver failed on the grid: {e}"));
                }
            }
        }
    }
    if failed > 3 {
        notes.push(format!("{failed} grid points failed in total"));
    }
    if c3_skipped > 0 {
        notes.push(format!("C3 skipped {c3_skipped} grid points where S_A is singular"));
    }
    let commuting = spec.commutativity_declared();
    let utb_bound_excess = commuting.then_some(excess);

    let dense_dim = spec.node_ids().len() * spec.dim_h();
    let c1 = if dense_dim <= config.dense_limit {
        Some(lrg_constant(spec, &grid)?.value)
    } else {
        notes.push(format!(
            "C1 not computed: dense dimension {dense_dim} exceeds {}",
            config.dense_limit
        ));
        None
    };

    // geometry of the point spectrum
    let carleson = carleson_sup(&distinct, grid.points());
    let (hs, xs) = geometry::square_candidates(&distinct);
    let square = carleson_square(&distinct, &hs, &xs).0;
    let sparse_inf = sparse_constant(&distinct);
    let n_sparse = n_sparse_decompose(&distinct, config.n_sparse_eps).len();
    let d0 = delta0(&distinct);

    // push-forward measures
    let nu = NuC::from_spec(spec);
    let nu_c = density::density_ladder(&nu, spec.measure().has_continuous_part(), config.bins, config.halvings);
    let points = discrete_points(spec);
    let nu_dh = nu_dh_sup(&points);
    let nu_h = nu_h_sup(&nu, &points, config.scan_levels);
    let sing_outer = sing_outer_bound(&nu, &grid);

    let (verdict_2_5, verdict_2_6) = if !commuting {
        let why = "k(x,x) and α(x) are not declared to commute";
        (VerdictReport::inapplicable(why), VerdictReport::inapplicable(why))
    } else {
        let c210 = density_check(nu_c.flag, &nu_c);
        let c211 = Check {
            name: "ν_{d,h} window ratio",
            verdict: if nu_dh.sup <= config.window_cap {
                Verdict::Holds
            } else {
                Verdict::Fails
            },
            detail: format!(
                "sup {:.6e} at x0 = {:.6e}, h = {:.6e} (cap {})",
                nu_dh.sup, nu_dh.x0, nu_dh.h, config.window_cap
            ),
        };
        let sparse = Check {
            name: "sparse point spectrum",
            verdict: if sparse_inf > config.sparse_eps {
                Verdict::Holds
            } else {
                Verdict::Fails
            },
            detail: format!("min pseudohyperbolic distance {sparse_inf:.6e}"),
        };
        let root = root_vector_check(spec, &config.solver);
        let v25 = VerdictReport::all(vec![c210.clone(), c211.clone(), sparse.clone(), root]);
        let v26 = if spec.rank() == 1 {
            VerdictReport::all(vec![c210, c211, sparse])
        } else {
            VerdictReport::inapplicable(format!("rank {} ≠ 1", spec.rank()))
        };
        (v25, v26)
    };

    Ok(CriteriaReport {
        grid_points: grid.len(),
        c1,
        c2_trace,
        c2_integral,
        c2_route_gap,
        c3,
        c3_skipped,
        utb_bound_excess,
        eigenvalues,
        carleson_sup: carleson,
        carleson_square: square,
        delta0: d0,
        sparse_inf,
        n_sparse,
        nu_c,
        nu_dh,
        nu_h,
        sing_outer,
        verdict_2_5,
        verdict_2_6,
        notes,
    })
}

/// `dim ker S_A(λ)` equals the multiplicity of `λ` at every distinct
/// eigenvalue.
fn root_vector_check(spec: &OperatorSpec, opts: &SolverOptions) -> Check {
    let name = "no root vectors";
    let sp = match spec.atom_eigenvalues() {
        Ok(sp) => sp,
        Err(e) => {
            return Check {
                name,
                verdict: Verdict::Inconclusive,
                detail: e.to_string(),
            }
        }
    };
    for (lambda, _) in sp.clusters(CLUSTER_TOL) {
        match charfunc::kernel_at(spec, lambda, opts) {
            Ok(k) if !k.root_vector_free => {
                return Check {
                    name,
                    verdict: Verdict::Fails,
                    detail: format!(
                        "dim ker S_A({lambda}) = {} < multiplicity {}",
                        k.dim_ker, k.multiplicity
                    ),
                }
            }
            Ok(_) => {}
            Err(e) => {
                return Check {
                    name,
                    verdict: Verdict::Inconclusive,
                    detail: format!("at {lambda}: {e}"),
                }
            }
        }
    }
    Check {
        name,
        verdict: Verdict::Holds,
        detail: format!("{} distinct eigenvalues checked", sp.clusters(CLUSTER_TOL).len()),
    }
}
