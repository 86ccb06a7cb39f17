//! The finite positive measure `μ = μ_c + μ_d` on `[0, 1]` and its mass
//! coordinate.
//!
//! `φ(x) = μ([0,x)) + ½μ({x})` maps `[0,1]` onto the mass coordinate
//! `[0, M]`, `M = μ([0,1])`, and `ψ(t) = inf{x : μ([0,x)) > t}` is its
//! generalized inverse. Every atom `x` occupies the interval
//! `[φ(x−0), φ(x+0)]` of length `μ({x})`, on which `ψ` is constant. The
//! continuous part is carried by quadrature nodes; when it comes from a
//! density the density is kept so that `ψ` can be inverted exactly.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Composite rule used to sample densities: 4-point Gauss–Legendre panels.
const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_8,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_8,
];

/// Default number of quadrature nodes used to sample a density.
pub const DEFAULT_QUADRATURE_NODES: usize = 512;

/// Point closer than this to an atom is considered to collide with it.
const COLLISION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub x: f64,
    pub mass: f64,
}

/// A quadrature node of the continuous part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadNode {
    pub x: f64,
    pub weight: f64,
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Density {
    Lebesgue,
    Function(DensityFn),
}

impl Density {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Density::Lebesgue => 1.0,
            Density::Function(f) => f(x),
        }
    }
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Lebesgue => write!(f, "Lebesgue"),
            Density::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// How the continuous part of a measure is supplied.
#[derive(Clone, Default)]
pub enum ContinuousSpec {
    #[default]
    None,
    /// Lebesgue measure on `[0,1]`, sampled with about `nodes` points.
    Lebesgue { nodes: usize },
    /// A nonnegative density on `[0,1]`, sampled with about `nodes` points.
    Density { density: DensityFn, nodes: usize },
    /// Explicit quadrature nodes and positive weights.
    Nodes { nodes: Vec<f64>, weights: Vec<f64> },
}

impl ContinuousSpec {
    pub fn lebesgue() -> Self {
        ContinuousSpec::Lebesgue {
            nodes: DEFAULT_QUADRATURE_NODES,
        }
    }
}

/// Values of a function sampled at every atom and every quadrature node of a
/// measure (atoms first in increasing order, then nodes in increasing order).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSamples<T> {
    pub atoms: Vec<T>,
    pub nodes: Vec<T>,
}

impl<T> NodeSamples<T> {
    pub fn new(atoms: Vec<T>, nodes: Vec<T>) -> Self {
        Self { atoms, nodes }
    }

    pub fn from_fn(m: &Measure, mut f: impl FnMut(f64) -> T) -> Self {
        Self {
            atoms: m.atoms().iter().map(|a| f(a.x)).collect(),
            nodes: m.nodes().iter().map(|q| f(q.x)).collect(),
        }
    }

    pub fn check_shape(&self, m: &Measure) -> Result<()> {
        if self.atoms.len() != m.atoms().len() || self.nodes.len() != m.nodes().len() {
            return Err(Error::input(format!(
                "samples cover {} atoms and {} nodes, measure has {} and {}",
                self.atoms.len(),
                self.nodes.len(),
                m.atoms().len(),
                m.nodes().len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Measure {
    atoms: Vec<Atom>,
    nodes: Vec<QuadNode>,
    density: Option<Density>,
    continuous_mass: f64,
    total_mass: f64,
}

impl Measure {
    pub fn new(mut atoms: Vec<Atom>, continuous: ContinuousSpec) -> Result<Self> {
        for a in &atoms {
            if !(0.0..=1.0).contains(&a.x) || !a.x.is_finite() {
                return Err(Error::Domain {
                    what: "atom position",
                    value: a.x,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
            if !(a.mass > 0.0) || !a.mass.is_finite() {
                return Err(Error::input(format!("atom at {} has nonpositive mass {}", a.x, a.mass)));
            }
        }
        atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
        if atoms.windows(2).any(|w| w[1].x - w[0].x <= 0.0) {
            return Err(Error::input("atom positions must be pairwise distinct"));
        }

        let (nodes, density) = match continuous {
            ContinuousSpec::None => (Vec::new(), None),
            ContinuousSpec::Lebesgue { nodes } => (
                sample_density(&Density::Lebesgue, &atoms, nodes)?,
                Some(Density::Lebesgue),
            ),
            ContinuousSpec::Density { density, nodes } => {
                let d = Density::Function(density);
                (sample_density(&d, &atoms, nodes)?, Some(d))
            }
            ContinuousSpec::Nodes { nodes, weights } => (explicit_nodes(&atoms, nodes, weights)?, None),
        };

        let mut m = Measure {
            atoms,
            nodes,
            density,
            continuous_mass: 0.0,
            total_mass: 0.0,
        };
        m.continuous_mass = match &m.density {
            Some(_) => m.continuous_cumulative(1.0),
            None => m.nodes.iter().map(|q| q.weight).sum(),
        };
        m.total_mass = m.atoms.iter().map(|a| a.mass).sum::<f64>() + m.continuous_mass;
        Ok(m)
    }

    /// Purely atomic measure.
    pub fn atomic(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms, ContinuousSpec::None)
    }

    /// Lebesgue measure on `[0,1]` with the default node count.
    pub fn lebesgue() -> Self {
        Self::new(Vec::new(), ContinuousSpec::lebesgue()).expect("lebesgue measure is valid")
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn nodes(&self) -> &[QuadNode] {
        &self.nodes
    }

    pub fn density(&self) -> Option<&Density> {
        self.density.as_ref()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn continuous_mass(&self) -> f64 {
        self.continuous_mass
    }

    pub fn is_atomic(&self) -> bool {
        self.nodes.is_empty() && self.continuous_mass == 0.0
    }

    pub fn has_continuous_part(&self) -> bool {
        !self.nodes.is_empty()
    }

    /// Index of the atom located at `x`, if any.
    pub fn atom_index(&self, x: f64) -> Option<usize> {
        self.atoms.binary_search_by(|a| a.x.total_cmp(&x)).ok()
    }

    /// `μ({x})`.
    pub fn mass_at(&self, x: f64) -> f64 {
        self.atom_index(x).map_or(0.0, |k| self.atoms[k].mass)
    }

    /// `μ_c([0,x))`.
    pub fn continuous_cumulative(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.density {
            Some(Density::Lebesgue) => x,
            Some(d @ Density::Function(_)) => integrate_density(d, 0.0, x),
            None => self
                .nodes
                .iter()
                .map(|q| {
                    if q.x < x {
                        q.weight
                    } else if q.x == x {
                        0.5 * q.weight
                    } else {
                        0.0
                    }
                })
                .sum(),
        }
    }

    /// `μ([0,x))`.
    pub fn cumulative_open(&self, x: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.x < x).map(|a| a.mass).sum::<f64>() + self.continuous_cumulative(x)
    }

    /// The mass coordinate `φ(x) = μ([0,x)) + ½μ({x})`.
    pub fn phi(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain {
                what: "x",
                value: x,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(self.cumulative_open(x) + 0.5 * self.mass_at(x))
    }

    /// `φ(x−0)` for atom `k`.
    pub fn phi_left(&self, k: usize) -> f64 {
        self.cumulative_open(self.atoms[k].x)
    }

    /// `φ(x+0)` for atom `k`.
    pub fn phi_right(&self, k: usize) -> f64 {
        self.phi_left(k) + self.atoms[k].mass
    }

    /// Generalized inverse `ψ(t) = inf{x : μ([0,x)) > t}`, and `1` for
    /// `t ≥ μ([0,1))`.
    pub fn psi(&self, t: f64) -> Result<f64> {
        let m = self.total_mass;
        if !(0.0..=m).contains(&t) {
            return Err(Error::Domain {
                what: "t",
                value: t,
                lo: 0.0,
                hi: m,
            });
        }
        if t >= m - self.mass_at(1.0) {
            return Ok(1.0);
        }
        let grid = StarGrid::build(self);
        for seg in grid.segments() {
            if t < seg.t_end() {
                return Ok(match seg {
                    Segment::Atom { x, .. } => *x,
                    Segment::Cell { x, .. } => *x,
                    Segment::Stretch {
                        t_start,
                        x_start,
                        x_end,
                        ..
                    } => self.invert_in_stretch(t - t_start, *x_start, *x_end),
                });
            }
        }
        Ok(1.0)
    }

    /// Finds `x ∈ [a, b]` with `μ_c([a, x)) = s`.
    fn invert_in_stretch(&self, s: f64, a: f64, b: f64) -> f64 {
        match &self.density {
            Some(Density::Lebesgue) => (a + s).min(b),
            Some(d) => {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if integrate_density(d, a, mid) > s {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo < 1e-15 {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
            None => a,
        }
    }

    /// `φ_*(t) = φ(ψ(t))`.
    pub fn phi_star(&self, t: f64) -> Result<f64> {
        self.phi(self.psi(t)?)
    }

    /// Both sides of the change of variables
    /// `∫_0^{φ(x)} f_*(t) dt = ∫_0^{x+} f(s) dμ(s)` for a node-sampled `f`.
    /// The left side walks the mass-coordinate segments, the right side
    /// sums atoms and nodes in `[0,1]` order with half the mass at `x`.
    pub fn star_integral(&self, f: &NodeSamples<C64>, x: f64) -> Result<(C64, C64)> {
        f.check_shape(self)?;
        let upper = self.phi(x)?;

        let mut left = C64::new(0.0, 0.0);
        for seg in StarGrid::build(self).segments() {
            if seg.t_start() >= upper {
                break;
            }
            match seg {
                Segment::Atom {
                    atom, t_start, t_end, ..
                } => left += f.atoms[*atom] * (t_end.min(upper) - t_start),
                Segment::Cell {
                    node, t_start, t_end, ..
                } => left += f.nodes[*node] * (t_end.min(upper) - t_start),
                Segment::Stretch { nodes, .. } => {
                    for sn in nodes {
                        let w = self.nodes[sn.node].weight;
                        if sn.t < upper {
                            left += f.nodes[sn.node] * w;
                        } else if sn.t == upper {
                            left += f.nodes[sn.node] * (0.5 * w);
                        }
                    }
                }
            }
        }

        let mut right = C64::new(0.0, 0.0);
        for (k, a) in self.atoms.iter().enumerate() {
            if a.x < x {
                right += f.atoms[k] * a.mass;
            } else if a.x == x {
                right += f.atoms[k] * (0.5 * a.mass);
            }
        }
        for (k, q) in self.nodes.iter().enumerate() {
            if q.x < x {
                right += f.nodes[k] * q.weight;
            } else if q.x == x {
                right += f.nodes[k] * (0.5 * q.weight);
            }
        }
        Ok((left, right))
    }
}

/// One piece of the partition of `[0, M]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Segment {
    /// Atom interval `[φ(x−0), φ(x+0)]`.
    Atom {
        atom: usize,
        x: f64,
        mass: f64,
        t_start: f64,
        t_end: f64,
    },
    /// Continuous stretch carried by a density; `nodes` are the quadrature
    /// nodes inside it with their images `φ(s)`.
    Stretch {
        t_start: f64,
        t_end: f64,
        x_start: f64,
        x_end: f64,
        nodes: Vec<StretchNode>,
    },
    /// Cell of an explicit quadrature node, of length equal to its weight.
    Cell {
        node: usize,
        x: f64,
        t_start: f64,
        t_end: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchNode {
    pub node: usize,
    pub x: f64,
    pub t: f64,
}

impl Segment {
    pub fn t_start(&self) -> f64 {
        match self {
            Segment::Atom { t_start, .. } | Segment::Stretch { t_start, .. } | Segment::Cell { t_start, .. } => {
                *t_start
            }
        }
    }

    pub fn t_end(&self) -> f64 {
        match self {
            Segment::Atom { t_end, .. } | Segment::Stretch { t_end, .. } | Segment::Cell { t_end, .. } => *t_end,
        }
    }

    pub fn len(&self) -> f64 {
        self.t_end() - self.t_start()
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 0.0
    }
}

/// Ordered partition of the mass coordinate `[0, M]` into atom intervals and
/// continuous pieces. A function `v` on `[0,1]` is pulled back by reading
/// the tag of the segment that contains `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StarGrid {
    segments: Vec<Segment>,
    total: f64,
}

impl StarGrid {
    pub fn build(m: &Measure) -> Self {
        let mut segments = Vec::new();
        match m.density() {
            Some(_) => {
                // stretches between consecutive atoms
                let mut x_prev = 0.0;
                let mut node_iter = m.nodes().iter().enumerate().peekable();
                let push_stretch = |x_start: f64,
                                    x_end: f64,
                                    segments: &mut Vec<Segment>,
                                    node_iter: &mut std::iter::Peekable<
                    std::iter::Enumerate<std::slice::Iter<'_, QuadNode>>,
                >| {
                    let t_start = m.cumulative_open(x_start) + m.mass_at(x_start);
                    let t_end = m.cumulative_open(x_end);
                    let mut nodes = Vec::new();
                    while let Some(&(k, q)) = node_iter.peek() {
                        if q.x >= x_end {
                            break;
                        }
                        nodes.push(StretchNode {
                            node: k,
                            x: q.x,
                            t: t_start + (m.continuous_cumulative(q.x) - m.continuous_cumulative(x_start)),
                        });
                        node_iter.next();
                    }
                    if t_end > t_start || !nodes.is_empty() {
                        segments.push(Segment::Stretch {
                            t_start,
                            t_end,
                            x_start,
                            x_end,
                            nodes,
                        });
                    }
                };
                for (k, a) in m.atoms().iter().enumerate() {
                    push_stretch(x_prev, a.x, &mut segments, &mut node_iter);
                    let t_start = m.phi_left(k);
                    segments.push(Segment::Atom {
                        atom: k,
                        x: a.x,
                        mass: a.mass,
                        t_start,
                        t_end: t_start + a.mass,
                    });
                    x_prev = a.x;
                }
                if x_prev < 1.0 || m.atoms().is_empty() {
                    push_stretch(x_prev, 1.0, &mut segments, &mut node_iter);
                }
            }
            None => {
                let mut t = 0.0;
                let (mut ia, mut iq) = (0, 0);
                let (atoms, nodes) = (m.atoms(), m.nodes());
                while ia < atoms.len() || iq < nodes.len() {
                    let take_atom = iq >= nodes.len() || (ia < atoms.len() && atoms[ia].x < nodes[iq].x);
                    if take_atom {
                        let a = atoms[ia];
                        segments.push(Segment::Atom {
                            atom: ia,
                            x: a.x,
                            mass: a.mass,
                            t_start: t,
                            t_end: t + a.mass,
                        });
                        t += a.mass;
                        ia += 1;
                    } else {
                        let q = nodes[iq];
                        segments.push(Segment::Cell {
                            node: iq,
                            x: q.x,
                            t_start: t,
                            t_end: t + q.weight,
                        });
                        t += q.weight;
                        iq += 1;
                    }
                }
            }
        }
        StarGrid {
            segments,
            total: m.total_mass(),
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    /// Sum of segment lengths; equals `M` up to accumulation error.
    pub fn covered_length(&self) -> f64 {
        self.segments.iter().map(Segment::len).sum()
    }
}

/// Composite 4-point Gauss–Legendre sampling of a density with panel
/// boundaries at every atom, so nodes never coincide with atoms and every
/// continuous stretch is integrated by whole panels.
fn sample_density(density: &Density, atoms: &[Atom], nodes: usize) -> Result<Vec<QuadNode>> {
    if nodes < 4 {
        return Err(Error::input("a density needs at least 4 quadrature nodes"));
    }
    let panels = nodes.div_ceil(4);
    let mut breaks: Vec<f64> = (0..=panels).map(|j| j as f64 / panels as f64).collect();
    for a in atoms {
        if a.x > 0.0 && a.x < 1.0 && breaks.iter().all(|b| (b - a.x).abs() > COLLISION_TOL) {
            breaks.push(a.x);
        }
    }
    breaks.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(4 * breaks.len());
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (xi, wi) in GL4_NODES.iter().zip(GL4_WEIGHTS.iter()) {
            let x = mid + half * xi;
            let rho = density.eval(x);
            if !(rho >= 0.0) || !rho.is_finite() {
                return Err(Error::input(format!("density is {rho} at x = {x}")));
            }
            out.push(QuadNode {
                x,
                weight: half * wi * rho,
            });
        }
    }
    // zero-density nodes carry no mass
    out.retain(|q| q.weight > 0.0);
    Ok(out)
}

fn explicit_nodes(atoms: &[Atom], nodes: Vec<f64>, weights: Vec<f64>) -> Result<Vec<QuadNode>> {
    if nodes.len() != weights.len() {
        return Err(Error::input(format!(
            "{} quadrature nodes but {} weights",
            nodes.len(),
            weights.len()
        )));
    }
    let mut out: Vec<QuadNode> = nodes
        .into_iter()
        .zip(weights)
        .map(|(x, weight)| QuadNode { x, weight })
        .collect();
    for q in &out {
        if !(0.0..=1.0).contains(&q.x) {
            return Err(Error::Domain {
                what: "quadrature node",
                value: q.x,
                lo: 0.0,
                hi: 1.0,
            });
        }
        if !(q.weight > 0.0) || !q.weight.is_finite() {
            return Err(Error::input(format!(
                "quadrature weight at {} must be positive, got {}",
                q.x, q.weight
            )));
        }
    }
    out.sort_by(|a, b| a.x.total_cmp(&b.x));
    if out.windows(2).any(|w| w[1].x <= w[0].x) {
        return Err(Error::input("quadrature nodes must be distinct"));
    }

    // move nodes sitting on atoms by half the local node spacing
    let positions: Vec<f64> = out.iter().map(|q| q.x).collect();
    for (k, q) in out.iter_mut().enumerate() {
        if !atoms.iter().any(|a| (a.x - q.x).abs() <= COLLISION_TOL) {
            continue;
        }
        let left_gap = if k > 0 { q.x - positions[k - 1] } else { q.x };
        let right_gap = if k + 1 < positions.len() {
            positions[k + 1] - q.x
        } else {
            1.0 - q.x
        };
        let spacing = match (k > 0, k + 1 < positions.len()) {
            (true, true) => left_gap.min(right_gap),
            (true, false) => left_gap,
            (false, true) => right_gap,
            (false, false) => left_gap.max(right_gap),
        };
        let shift = 0.5 * spacing;
        q.x = if right_gap >= left_gap {
            q.x + shift
        } else {
            q.x - shift
        };
    }
    Ok(out)
}

/// `∫_a^b ρ` by composite Gauss–Legendre on 64 panels.
fn integrate_density(d: &Density, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if let Density::Lebesgue = d {
        return b - a;
    }
    let panels = 64;
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (xi, wi) in GL4_NODES.iter().zip(GL4_WEIGHTS.iter()) {
            acc += 0.5 * h * wi * d.eval(mid + 0.5 * h * xi);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn atom_plus_lebesgue() -> Measure {
        Measure::new(vec![Atom { x: 0.3, mass: 2.0 }], ContinuousSpec::lebesgue()).unwrap()
    }

    #[test]
    fn phi_lebesgue_is_identity() {
        let m = Measure::lebesgue();
        assert_relative_eq!(m.phi(0.5).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn phi_atom_at_zero_is_half_mass() {
        let m = Measure::atomic(vec![Atom { x: 0.0, mass: 1.0 }]).unwrap();
        assert_eq!(m.phi(0.0).unwrap(), 0.5);
    }

    #[test]
    fn phi_at_atom_with_lebesgue() {
        let m = atom_plus_lebesgue();
        assert_relative_eq!(m.phi(0.3).unwrap(), 1.3, epsilon = 1e-14);
        assert_relative_eq!(m.total_mass(), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn phi_out_of_domain() {
        let m = Measure::lebesgue();
        assert!(matches!(m.phi(1.5), Err(Error::Domain { .. })));
        assert!(matches!(m.psi(-0.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn psi_examples() {
        let m = Measure::lebesgue();
        assert_relative_eq!(m.psi(0.25).unwrap(), 0.25, epsilon = 1e-14);
        let m = atom_plus_lebesgue();
        for t in [0.31, 1.0, 1.3, 2.0, 2.29] {
            assert_eq!(m.psi(t).unwrap(), 0.3);
        }
        assert_eq!(m.psi(m.total_mass()).unwrap(), 1.0);
        let atomic = Measure::atomic(vec![Atom { x: 0.2, mass: 0.5 }, Atom { x: 0.7, mass: 1.0 }]).unwrap();
        assert_eq!(atomic.psi(atomic.total_mass()).unwrap(), 1.0);
        assert_eq!(atomic.psi(0.5).unwrap(), 0.7);
    }

    #[test]
    fn star_grid_examples() {
        let m = Measure::atomic(vec![Atom { x: 0.5, mass: 1.0 }]).unwrap();
        let g = StarGrid::build(&m);
        assert_eq!(g.segments().len(), 1);
        assert!(
            matches!(g.segments()[0], Segment::Atom { x, t_start, t_end, .. } if x == 0.5 && t_start == 0.0 && t_end == 1.0)
        );

        let g = StarGrid::build(&Measure::lebesgue());
        assert_eq!(g.segments().len(), 1);
        assert!(
            matches!(&g.segments()[0], Segment::Stretch { t_start, t_end, .. } if *t_start == 0.0 && (*t_end - 1.0).abs() < 1e-15)
        );

        let g = StarGrid::build(&atom_plus_lebesgue());
        let spans: Vec<(f64, f64)> = g.segments().iter().map(|s| (s.t_start(), s.t_end())).collect();
        assert_eq!(spans.len(), 3);
        for (got, want) in spans.iter().zip([(0.0, 0.3), (0.3, 2.3), (2.3, 3.0)]) {
            assert_relative_eq!(got.0, want.0, epsilon = 1e-14);
            assert_relative_eq!(got.1, want.1, epsilon = 1e-14);
        }
        assert!(matches!(g.segments()[1], Segment::Atom { .. }));
        assert_relative_eq!(g.covered_length(), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn star_integral_examples() {
        let m = Measure::lebesgue();
        let one = NodeSamples::from_fn(&m, |_| C64::new(1.0, 0.0));
        let (l, r) = m.star_integral(&one, 1.0).unwrap();
        assert_relative_eq!(l.re, 1.0, epsilon = 1e-13);
        assert_relative_eq!(r.re, 1.0, epsilon = 1e-13);

        let m = Measure::atomic(vec![Atom { x: 0.5, mass: 2.0 }]).unwrap();
        let one = NodeSamples::from_fn(&m, |_| C64::new(1.0, 0.0));
        let (l, r) = m.star_integral(&one, 0.5).unwrap();
        assert_eq!((l.re, r.re), (1.0, 1.0));

        let m = atom_plus_lebesgue();
        let f = NodeSamples::from_fn(&m, |s| C64::new(s, 0.0));
        let (l, r) = m.star_integral(&f, 0.3).unwrap();
        assert_relative_eq!(l.re, 0.345, epsilon = 1e-13);
        assert_relative_eq!(r.re, 0.345, epsilon = 1e-13);
    }

    #[test]
    fn star_integral_rejects_missing_samples() {
        let m = atom_plus_lebesgue();
        let f = NodeSamples::new(vec![C64::new(1.0, 0.0)], vec![]);
        assert!(matches!(m.star_integral(&f, 0.5), Err(Error::Input(_))));
    }

    #[test]
    fn invalid_measures_are_rejected() {
        assert!(Measure::atomic(vec![Atom { x: 0.3, mass: 0.0 }]).is_err());
        assert!(Measure::atomic(vec![Atom { x: 0.3, mass: 1.0 }, Atom { x: 0.3, mass: 1.0 }]).is_err());
        assert!(Measure::atomic(vec![Atom { x: 1.3, mass: 1.0 }]).is_err());
        let bad = ContinuousSpec::Nodes {
            nodes: vec![0.1, 0.2],
            weights: vec![0.5],
        };
        assert!(Measure::new(vec![], bad).is_err());
    }

    #[test]
    fn colliding_nodes_are_moved_off_atoms() {
        let spec = ContinuousSpec::Nodes {
            nodes: vec![0.1, 0.3, 0.5],
            weights: vec![0.1, 0.1, 0.1],
        };
        let m = Measure::new(vec![Atom { x: 0.3, mass: 1.0 }], spec).unwrap();
        assert!(m.nodes().iter().all(|q| (q.x - 0.3).abs() > 0.05));
        assert_relative_eq!(m.total_mass(), 1.3, epsilon = 1e-14);
    }

    #[test]
    fn density_measure_mass_matches_weights() {
        let rho: DensityFn = Arc::new(|x: f64| 2.0 * x);
        let m = Measure::new(
            vec![Atom { x: 0.5, mass: 0.25 }],
            ContinuousSpec::Density {
                density: rho,
                nodes: 256,
            },
        )
        .unwrap();
        let weights: f64 = m.nodes().iter().map(|q| q.weight).sum();
        assert_relative_eq!(weights, 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.total_mass(), 1.25, epsilon = 1e-12);
        // μ([0,x)) = x² below the atom
        assert_relative_eq!(m.psi(0.09).unwrap(), 0.3, epsilon = 1e-10);
    }
}
