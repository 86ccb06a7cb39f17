//! Geometry of point sets in `ℂ_+`: Carleson kernel sums, square counts,
//! pseudohyperbolic separation and `N`-sparse decompositions.

use crate::charfunc::blaschke_factor;
use crate::linalg::C64;

/// `Σ_k Im z Im z_k / |z − z̄_k|²`.
pub fn carleson_sum(points: &[C64], z: C64) -> f64 {
    points.iter().map(|zk| z.im * zk.im / (z - zk.conj()).norm_sqr()).sum()
}

/// Largest kernel sum over the grid points.
pub fn carleson_sup(points: &[C64], grid: &[C64]) -> f64 {
    grid.iter().map(|&z| carleson_sum(points, z)).fold(0.0, f64::max)
}

/// `σ(Q)/h` for `Q = [x₀−h, x₀+h] × i[0, 2h]` and `σ = Σ Im z_k δ_{z_k}`;
/// boundary points count.
pub fn square_ratio(points: &[C64], x0: f64, h: f64) -> f64 {
    let mass: f64 = points
        .iter()
        .filter(|z| (z.re - x0).abs() <= h && z.im <= 2.0 * h)
        .map(|z| z.im)
        .sum();
    mass / h
}

/// Largest `σ(Q)/h` over the squares spanned by `h_grid × x_grid`.
pub fn carleson_square(points: &[C64], h_grid: &[f64], x_grid: &[f64]) -> (f64, f64, f64) {
    let mut best = (0.0, 0.0, 0.0);
    for &h in h_grid.iter().filter(|&&h| h > 0.0) {
        for &x0 in x_grid {
            let r = square_ratio(points, x0, h);
            if r > best.0 {
                best = (r, x0, h);
            }
        }
    }
    best
}

/// Candidate squares for [`carleson_square`]: every point sits on the top
/// edge of a square of half-width `Im z_k/2`, centred on it or with the
/// point in a corner.
pub fn square_candidates(points: &[C64]) -> (Vec<f64>, Vec<f64>) {
    let mut hs: Vec<f64> = points.iter().map(|z| 0.5 * z.im).filter(|&h| h > 0.0).collect();
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    let mut xs = Vec::with_capacity(3 * points.len() * hs.len().min(1));
    for z in points {
        xs.push(z.re);
        let h = 0.5 * z.im;
        xs.push(z.re - h);
        xs.push(z.re + h);
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    (hs, xs)
}

/// `inf_{k≠j} |b_{z_k}(z_j)|`; `+∞` for fewer than two points, `0` when
/// two points coincide.
pub fn sparse_constant(points: &[C64]) -> f64 {
    let mut inf = f64::INFINITY;
    for (i, &a) in points.iter().enumerate() {
        for &b in &points[..i] {
            inf = inf.min(blaschke_factor(a, b).norm());
        }
    }
    inf
}

/// First-fit partition into classes with pairwise `|b| ≥ eps`, visiting
/// points by increasing `Im z`. The number of classes is an upper bound on
/// the least `N` for which the set is `N`-sparse at level `eps`.
pub fn n_sparse_decompose(points: &[C64], eps: f64) -> Vec<Vec<C64>> {
    let mut order: Vec<C64> = points.to_vec();
    order.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    let mut classes: Vec<Vec<C64>> = Vec::new();
    for z in order {
        match classes
            .iter_mut()
            .find(|cl| cl.iter().all(|&w| blaschke_factor(w, z).norm() >= eps))
        {
            Some(cl) => cl.push(z),
            None => classes.push(vec![z]),
        }
    }
    classes
}

/// `inf_{z∈Λ} Π_{w∈Λ∖{z}} |b_w(z)|`, `1` for a single point.
pub fn delta0(points: &[C64]) -> f64 {
    if points.len() < 2 {
        return 1.0;
    }
    points
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &w)| blaschke_factor(w, z).norm())
                .product::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, I};

    #[test]
    fn single_point_carleson() {
        assert!((carleson_sum(&[I], I) - 0.25).abs() < 1e-15);
        let (r, x0, h) = carleson_square(&[I], &[0.25, 0.5, 1.0, 2.0], &[0.0]);
        assert_eq!((r, x0, h), (2.0, 0.0, 0.5));
        assert_eq!(carleson_square(&[], &[0.5], &[0.0]).0, 0.0);
    }

    #[test]
    fn separation() {
        assert!((sparse_constant(&[I, c64(0.0, 2.0)]) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(sparse_constant(&[I]), f64::INFINITY);
        assert_eq!(sparse_constant(&[I, I]), 0.0);
        let close = [I, c64(0.0, 1.0 + 1e-9)];
        assert!(sparse_constant(&close) < 1e-9);
        assert_eq!(n_sparse_decompose(&close, 0.1).len(), 2);
        assert_eq!(n_sparse_decompose(&[I], 0.1).len(), 1);
        assert!((delta0(&[I, c64(0.0, 2.0)]) - 1.0 / 3.0).abs() < 1e-15);
    }
}
