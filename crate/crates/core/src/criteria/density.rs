//! Push-forward measures on the real axis:
//!
//! * `ν_c(F) = ∫ tr[P_F(α(x)) k(x,x)] dμ_c(x)`, the continuous part carried
//!   to the eigenvalues of `α`;
//! * `ν_{d,h}(F) = Σ_{x,j : α_j(x) ∈ F} η_{4h}(μ_x κ_j(x)²)` over atoms, with
//!   `η_t(m) = m·χ_{[0,t]}(m)`;
//! * `ν_h = ν_c + ν_{d,h}`.
//!
//! `ν_c` is represented by cells: the continuous part is cut into short
//! pieces in `x`, and the mass of each eigenvalue branch on a piece is
//! spread uniformly over the range swept by that branch. For a monotone
//! branch this is exact up to the variation of the density inside a cell.

use rayon::prelude::*;

use crate::linalg::{self, CMat, C64};
use crate::operator_model::{joint_diagonalize, CoefficientField, NodeId, OperatorSpec};

/// Cells per unit length used to resolve a density in `x`.
pub const CELLS_PER_UNIT: usize = 4096;

/// Mass `mass` spread uniformly over `[lo, hi]` (a point mass if equal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadMass {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

fn ascending_eigenvalues(a: &CMat) -> Vec<f64> {
    let mut v = linalg::hermitian_eigen(a).0;
    v.reverse();
    v
}

/// `v_j* k v_j` for the eigenvectors of `α`, ascending in the eigenvalue.
fn branch_masses(alpha: &CMat, c: &CMat) -> Vec<f64> {
    let (_, vecs) = linalg::hermitian_eigen(alpha);
    let k = c * c.adjoint();
    (0..vecs.ncols())
        .rev()
        .map(|j| {
            let v = vecs.column(j);
            (v.adjoint() * &k * v)[(0, 0)].re.max(0.0)
        })
        .collect()
}

fn spread_cell(out: &mut Vec<SpreadMass>, lo: &[f64], hi: &[f64], masses: &[f64], w: f64) {
    for (j, &m) in masses.iter().enumerate() {
        if m * w > 0.0 {
            let (a, b) = (lo[j].min(hi[j]), lo[j].max(hi[j]));
            out.push(SpreadMass {
                lo: a,
                hi: b,
                mass: m * w,
            });
        }
    }
}

/// Cells of `ν_c`. Density measures are cut into about
/// [`CELLS_PER_UNIT`] pieces per unit between atoms; explicit quadrature
/// nodes own the interval between the midpoints to their neighbours.
pub fn nu_c_cells(spec: &OperatorSpec) -> Vec<SpreadMass> {
    let m = spec.measure();
    let mut out = Vec::new();
    if !m.has_continuous_part() {
        return out;
    }
    let Some(field) = spec.field() else {
        return out;
    };
    let field: &dyn CoefficientField = field.as_ref();
    if m.density().is_some() {
        let mut edges = vec![0.0];
        edges.extend(m.atoms().iter().map(|a| a.x));
        edges.push(1.0);
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let n = ((b - a) * CELLS_PER_UNIT as f64).ceil().max(1.0) as usize;
            let xs: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
            let eig: Vec<Vec<f64>> = xs.iter().map(|&x| ascending_eigenvalues(&field.alpha(x))).collect();
            for i in 0..n {
                let mass = m.continuous_cumulative(xs[i + 1]) - m.continuous_cumulative(xs[i]);
                if mass <= 0.0 {
                    continue;
                }
                let mid = 0.5 * (xs[i] + xs[i + 1]);
                let pm = branch_masses(&field.alpha(mid), &field.c(mid));
                spread_cell(&mut out, &eig[i], &eig[i + 1], &pm, mass);
            }
        }
    } else {
        let nodes = m.nodes();
        for (q, node) in nodes.iter().enumerate() {
            let left = if q == 0 {
                (node.x - 0.5 * nodes.get(1).map_or(0.0, |n| n.x - node.x)).max(0.0)
            } else {
                0.5 * (nodes[q - 1].x + node.x)
            };
            let right = if q + 1 == nodes.len() {
                (node.x + 0.5 * if q > 0 { node.x - nodes[q - 1].x } else { 0.0 }).min(1.0)
            } else {
                0.5 * (node.x + nodes[q + 1].x)
            };
            let id = NodeId::Quad(q);
            let pm = branch_masses(spec.alpha(id), spec.c(id));
            let lo = ascending_eigenvalues(&field.alpha(left));
            let hi = ascending_eigenvalues(&field.alpha(right));
            spread_cell(&mut out, &lo, &hi, &pm, node.weight);
        }
    }
    out
}

/// `ν_c` as a piecewise-constant density plus point masses, with its
/// distribution function.
#[derive(Debug, Clone, Default)]
pub struct NuC {
    cells: Vec<SpreadMass>,
    /// Breakpoints of the density.
    xs: Vec<f64>,
    /// Density on `[xs[i], xs[i+1])`.
    dens: Vec<f64>,
    /// Absolutely continuous mass below `xs[i]`.
    cdf: Vec<f64>,
    /// Point masses (positions ascending) and their running sums.
    atoms: Vec<(f64, f64)>,
    atom_prefix: Vec<f64>,
}

impl NuC {
    pub fn from_spec(spec: &OperatorSpec) -> Self {
        Self::from_cells(nu_c_cells(spec))
    }

    pub fn from_cells(cells: Vec<SpreadMass>) -> Self {
        let mut events: Vec<(f64, f64)> = Vec::with_capacity(2 * cells.len());
        let mut atoms = Vec::new();
        for c in &cells {
            if c.hi > c.lo {
                let d = c.mass / (c.hi - c.lo);
                events.push((c.lo, d));
                events.push((c.hi, -d));
            } else {
                atoms.push((c.lo, c.mass));
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut xs = Vec::new();
        let mut dens = Vec::new();
        let mut cdf = Vec::new();
        let (mut level, mut acc) = (0.0f64, 0.0f64);
        let mut i = 0;
        while i < events.len() {
            let x = events[i].0;
            if let (Some(&px), Some(&pd)) = (xs.last(), dens.last()) {
                acc += pd * (x - px);
            }
            while i < events.len() && events[i].0 == x {
                level += events[i].1;
                i += 1;
            }
            xs.push(x);
            cdf.push(acc);
            dens.push(level.max(0.0));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atom_prefix = vec![0.0];
        for a in &atoms {
            atom_prefix.push(atom_prefix.last().unwrap() + a.1);
        }
        Self {
            cells,
            xs,
            dens,
            cdf,
            atoms,
            atom_prefix,
        }
    }

    pub fn cells(&self) -> &[SpreadMass] {
        &self.cells
    }

    pub fn is_zero(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).sum()
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        let lo = self.cells.iter().map(|c| c.lo).fold(f64::INFINITY, f64::min);
        let hi = self.cells.iter().map(|c| c.hi).fold(f64::NEG_INFINITY, f64::max);
        lo.is_finite().then_some((lo, hi))
    }

    /// Absolutely continuous mass of `(−∞, s]`.
    fn ac_cdf(&self, s: f64) -> f64 {
        if self.xs.is_empty() || s <= self.xs[0] {
            return 0.0;
        }
        let i = self.xs.partition_point(|&x| x <= s) - 1;
        self.cdf[i] + self.dens[i] * (s - self.xs[i])
    }

    fn point_mass(&self, a: f64, b: f64) -> f64 {
        let i = self.atoms.partition_point(|p| p.0 < a);
        let j = self.atoms.partition_point(|p| p.0 <= b);
        if j > i {
            self.atom_prefix[j] - self.atom_prefix[i]
        } else {
            0.0
        }
    }

    /// `ν_c([a, b])`.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        (self.ac_cdf(b) - self.ac_cdf(a)).max(0.0) + self.point_mass(a, b)
    }

    /// `Im z ∫ dν_c(s)/|s − z|²`, the kernel integrated exactly on each
    /// piece of constant density.
    pub fn poisson(&self, z: C64) -> f64 {
        let (x, y) = (z.re, z.im);
        let mut acc = 0.0;
        for i in 0..self.xs.len().saturating_sub(1) {
            if self.dens[i] > 0.0 {
                let a = ((self.xs[i + 1] - x) / y).atan() - ((self.xs[i] - x) / y).atan();
                acc += self.dens[i] * a;
            }
        }
        for &(s, m) in &self.atoms {
            acc += m * y / ((s - x) * (s - x) + y * y);
        }
        acc
    }

    /// Bin densities over `bins` equal bins covering the support.
    pub fn histogram(&self, bins: usize) -> Histogram {
        let Some((lo, hi)) = self.support() else {
            return Histogram {
                lo: 0.0,
                width: 0.0,
                density: Vec::new(),
                sup: 0.0,
            };
        };
        let bins = bins.max(1);
        if hi <= lo {
            // all mass at a single point: no density
            return Histogram {
                lo,
                width: 0.0,
                density: vec![f64::INFINITY],
                sup: f64::INFINITY,
            };
        }
        let width = (hi - lo) / bins as f64;
        let density: Vec<f64> = (0..bins)
            .map(|b| {
                let a = lo + width * b as f64;
                let e = if b + 1 == bins { hi } else { lo + width * (b + 1) as f64 };
                let ac = (self.ac_cdf(e) - self.ac_cdf(a)).max(0.0);
                let i = self.atoms.partition_point(|p| p.0 < a);
                let j = if b + 1 == bins {
                    self.atoms.partition_point(|p| p.0 <= e)
                } else {
                    self.atoms.partition_point(|p| p.0 < e)
                };
                let pts = if j > i {
                    self.atom_prefix[j] - self.atom_prefix[i]
                } else {
                    0.0
                };
                (ac + pts) / width
            })
            .collect();
        let sup = density.iter().copied().fold(0.0, f64::max);
        Histogram {
            lo,
            width,
            density,
            sup,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub density: Vec<f64>,
    pub sup: f64,
}

/// Outcome of a boundedness test on a sequence of refinements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityFlag {
    Bounded,
    Unbounded,
    Inconclusive,
    /// No continuous part.
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuCDensity {
    /// Histogram at the coarsest level.
    pub histogram: Histogram,
    /// `(bins, sup density)` for each level of the ladder.
    pub ladder: Vec<(usize, f64)>,
    pub sup: f64,
    pub flag: DensityFlag,
}

/// Ratio of finest to coarsest sup at or below which the density counts
/// as bounded.
pub const BOUNDED_RATIO: f64 = 1.5;
/// Ratio at or above which it counts as unbounded.
pub const UNBOUNDED_RATIO: f64 = 2.0;

/// Density of `ν_c` on `bins` bins, re-estimated after each of `halvings`
/// halvings of the bin width. A bounded density keeps its sup; a density
/// with an integrable singularity of order `s^{−β}` gains a factor
/// `2^{β·halvings}`.
pub fn nu_c_density(spec: &OperatorSpec, bins: usize, halvings: usize) -> NuCDensity {
    density_ladder(
        &NuC::from_spec(spec),
        spec.measure().has_continuous_part(),
        bins,
        halvings,
    )
}

pub fn density_ladder(nu: &NuC, continuous: bool, bins: usize, halvings: usize) -> NuCDensity {
    let histogram = nu.histogram(bins);
    if !continuous {
        return NuCDensity {
            histogram,
            ladder: Vec::new(),
            sup: 0.0,
            flag: DensityFlag::Inapplicable,
        };
    }
    let ladder: Vec<(usize, f64)> = (0..=halvings)
        .map(|l| {
            let b = bins << l;
            (b, nu.histogram(b).sup)
        })
        .collect();
    let first = ladder[0].1;
    let last = ladder.last().unwrap().1;
    let flag = if last == 0.0 {
        DensityFlag::Bounded
    } else if !last.is_finite() {
        DensityFlag::Unbounded
    } else {
        let r = last / first;
        if r <= BOUNDED_RATIO {
            DensityFlag::Bounded
        } else if r >= UNBOUNDED_RATIO {
            DensityFlag::Unbounded
        } else {
            DensityFlag::Inconclusive
        }
    };
    NuCDensity {
        histogram,
        sup: last,
        ladder,
        flag,
    }
}

/// Point `(α_j(x), μ_x κ_j(x)²)` of the discrete part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretePoint {
    pub alpha: f64,
    pub mass: f64,
}

/// Atom data for `ν_{d,h}`: joint eigenpairs when `k(x,x)` and `α(x)`
/// commute, otherwise `α`-eigenvectors with masses `μ_x v* k v`.
pub fn discrete_points(spec: &OperatorSpec) -> Vec<DiscretePoint> {
    let commuting = spec.commutes();
    let mut out = Vec::new();
    for (a, atom) in spec.measure().atoms().iter().enumerate() {
        let id = NodeId::Atom(a);
        if commuting {
            for je in joint_diagonalize(&spec.k_diag(id), spec.alpha(id)) {
                out.push(DiscretePoint {
                    alpha: je.alpha,
                    mass: atom.mass * je.kappa2,
                });
            }
        } else {
            let vals = ascending_eigenvalues(spec.alpha(id));
            for (v, m) in vals.into_iter().zip(branch_masses(spec.alpha(id), spec.c(id))) {
                if m > 0.0 {
                    out.push(DiscretePoint {
                        alpha: v,
                        mass: atom.mass * m,
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    out
}

/// `ν_{d,h}([x₀−h, x₀+h])`.
pub fn nu_dh_window(points: &[DiscretePoint], x0: f64, h: f64) -> f64 {
    points
        .iter()
        .filter(|p| (p.alpha - x0).abs() <= h && p.mass <= 4.0 * h)
        .map(|p| p.mass)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSup {
    pub sup: f64,
    pub x0: f64,
    pub h: f64,
}

/// `sup_{h>0, x₀} ν_{d,h}([x₀−h, x₀+h]) / h`, computed exactly: for a
/// window whose left edge sits at `α_i`, point `j` counts once
/// `h ≥ t_j = max((α_j − α_i)/2, m_j/4)`, so the ratio only needs checking
/// at the thresholds `t_j`. The reported `x₀` centres the window on the
/// points it contains.
pub fn nu_dh_sup(points: &[DiscretePoint]) -> WindowSup {
    let mut best = WindowSup {
        sup: 0.0,
        x0: 0.0,
        h: 0.0,
    };
    let mut prev = f64::NAN;
    for p in points {
        if p.alpha == prev {
            continue;
        }
        prev = p.alpha;
        let a = p.alpha;
        let mut thr: Vec<(f64, f64, f64)> = points
            .iter()
            .filter(|q| q.alpha >= a && q.mass > 0.0)
            .map(|q| ((0.5 * (q.alpha - a)).max(0.25 * q.mass), q.mass, q.alpha))
            .collect();
        thr.sort_by(|x, y| x.0.total_cmp(&y.0));
        let (mut acc, mut right) = (0.0, a);
        for (i, &(t, m, al)) in thr.iter().enumerate() {
            acc += m;
            right = right.max(al);
            // ratio is evaluated once all points sharing this threshold are in
            if thr.get(i + 1).is_some_and(|n| n.0 == t) || t <= 0.0 {
                continue;
            }
            let r = acc / t;
            if r > best.sup {
                best = WindowSup {
                    sup: r,
                    x0: 0.5 * (a + right),
                    h: t,
                };
            }
        }
    }
    best
}

/// `sup_{h, x₀} ν_h([x₀−h, x₀+h]) / h` with `ν_h = ν_c + ν_{d,h}`.
///
/// Windows anchored at atom eigenvalues (as in [`nu_dh_sup`]) are combined
/// with a scan over dyadic widths down to `diam·2^{−levels}` and window
/// centres at half-width spacing.
pub fn nu_h_sup(nu: &NuC, points: &[DiscretePoint], levels: usize) -> WindowSup {
    let ratio = |x0: f64, h: f64| (nu.interval_mass(x0 - h, x0 + h) + nu_dh_window(points, x0, h)) / h;
    let mut best = WindowSup {
        sup: 0.0,
        x0: 0.0,
        h: 0.0,
    };
    let consider = |x0: f64, h: f64, best: &mut WindowSup| {
        if h > 0.0 {
            let r = ratio(x0, h);
            if r > best.sup {
                *best = WindowSup { sup: r, x0, h };
            }
        }
    };

    // atom-anchored windows
    for p in points {
        for q in points.iter().filter(|q| q.alpha >= p.alpha) {
            let t = (0.5 * (q.alpha - p.alpha)).max(0.25 * q.mass);
            consider(p.alpha + t, t, &mut best);
            consider(0.5 * (p.alpha + q.alpha), t, &mut best);
        }
    }

    let (mut lo, mut hi) = nu.support().unwrap_or((f64::INFINITY, f64::NEG_INFINITY));
    for p in points {
        lo = lo.min(p.alpha);
        hi = hi.max(p.alpha);
    }
    if !lo.is_finite() {
        return best;
    }
    let diam = if hi > lo { hi - lo } else { 1.0 };
    let scans: Vec<WindowSup> = (0..=levels)
        .into_par_iter()
        .map(|l| {
            let h = diam / (1u64 << l) as f64;
            let mut b = WindowSup {
                sup: 0.0,
                x0: 0.0,
                h: 0.0,
            };
            let steps = ((hi - lo + 2.0 * h) / (0.5 * h)).ceil() as usize;
            for s in 0..=steps {
                let x0 = lo - h + 0.5 * h * s as f64;
                let r = ratio(x0, h);
                if r > b.sup {
                    b = WindowSup { sup: r, x0, h };
                }
            }
            b
        })
        .collect();
    for s in scans {
        if s.sup > best.sup {
            best = s;
        }
    }
    best
}

/// Infimum over a grid of `exp(−Im z ∫ dν_c/|s − z|²)`, the modulus of the
/// outer factor of `det S_A` coming from the continuous part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingOuter {
    pub inf: f64,
    pub argmin: C64,
    /// The same infimum on the grid moved one decade closer to the axis.
    pub refined_inf: f64,
    /// `refined_inf < ½ inf`: the infimum keeps dropping as the grid
    /// approaches the real axis.
    pub decays: bool,
}

fn outer_inf(nu: &NuC, grid: &[C64]) -> (f64, C64) {
    grid.par_iter()
        .map(|&z| ((-nu.poisson(z)).exp(), z))
        .reduce(|| (1.0, C64::new(0.0, 1.0)), |a, b| if b.0 < a.0 { b } else { a })
}

pub fn sing_outer_bound(nu: &NuC, grid: &crate::criteria::ZGrid) -> SingOuter {
    let (inf, argmin) = outer_inf(nu, grid.points());
    let (refined_inf, _) = outer_inf(nu, grid.scaled_im(0.1).points());
    SingOuter {
        inf,
        argmin,
        refined_inf,
        decays: refined_inf < 0.5 * inf,
    }
}
