//! Sample points in the upper half-plane standing in for `sup_{z ∈ ℂ_+}`.

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Parameters of an adaptive grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub nx: usize,
    pub ny: usize,
    /// `Im z` spans `[im_lo_factor·min Im z_k, im_hi_factor·max Im z_k]`.
    pub im_lo_factor: f64,
    pub im_hi_factor: f64,
    /// Cap on the number of extra columns through eigenvalues.
    pub max_anchors: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            nx: 24,
            ny: 40,
            im_lo_factor: 1e-3,
            im_hi_factor: 1e3,
            max_anchors: 48,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    points: Vec<C64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

impl ZGrid {
    /// Tensor grid: `nx` equispaced real parts, `ny` log-spaced imaginary
    /// parts.
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(re_min.is_finite() && re_max.is_finite() && re_min <= re_max) {
            return Err(Error::input(format!("bad real range [{re_min}, {re_max}]")));
        }
        if !(im_min > 0.0 && im_min <= im_max && im_max.is_finite()) {
            return Err(Error::Domain {
                what: "grid Im z",
                value: im_min,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        if nx == 0 || ny == 0 {
            return Err(Error::input("grid needs nx ≥ 1 and ny ≥ 1"));
        }
        Ok(Self::tensor(
            linspace(re_min, re_max, nx),
            logspace(im_min, im_max, ny),
            &[],
        ))
    }

    fn tensor(mut re: Vec<f64>, im: Vec<f64>, extra: &[C64]) -> Self {
        re.sort_by(f64::total_cmp);
        re.dedup();
        let mut points: Vec<C64> = re
            .iter()
            .flat_map(|&x| im.iter().map(move |&y| C64::new(x, y)))
            .collect();
        points.extend(extra.iter().filter(|z| z.im > 0.0));
        Self { re, im, points }
    }

    /// Grid fitted to a problem: real parts cover the real spectral range
    /// `[lo, hi]` (eigenvalue real parts and the range of `α`) padded by
    /// its diameter, imaginary parts cover the eigenvalue heights with
    /// three decades of margin on either side. Columns through each
    /// eigenvalue and the eigenvalues themselves are added.
    pub fn adaptive(eigenvalues: &[C64], real_range: Option<(f64, f64)>, p: &GridParams) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for z in eigenvalues {
            lo = lo.min(z.re);
            hi = hi.max(z.re);
        }
        if let Some((a, b)) = real_range {
            lo = lo.min(a);
            hi = hi.max(b);
        }
        if !lo.is_finite() {
            lo = 0.0;
            hi = 0.0;
        }
        let (mut ylo, mut yhi) = eigenvalues
            .iter()
            .map(|z| z.im)
            .filter(|&y| y > 0.0)
            .fold((f64::INFINITY, 0.0f64), |(a, b), y| (a.min(y), b.max(y)));
        if !ylo.is_finite() {
            ylo = 1.0;
            yhi = 1.0;
        }
        let diam = hi - lo;
        let pad = if diam > 0.0 { diam } else { yhi.max(1.0) };
        let mut re = linspace(lo - pad, hi + pad, p.nx.max(1));

        let mut anchors: Vec<f64> = eigenvalues.iter().map(|z| z.re).collect();
        anchors.sort_by(f64::total_cmp);
        anchors.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
        let stride = anchors.len().div_ceil(p.max_anchors.max(1)).max(1);
        re.extend(anchors.iter().step_by(stride));
        // the edges of the α-range are where push-forward densities blow up
        if let Some((a, b)) = real_range {
            re.extend([a, b]);
        }

        let mut extra: Vec<C64> = eigenvalues.to_vec();
        extra.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        extra.dedup();
        let im = logspace(p.im_lo_factor * ylo, p.im_hi_factor * yhi, p.ny.max(1));
        Self::tensor(re, im, &extra)
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The same grid with every imaginary part multiplied by `factor`.
    pub fn scaled_im(&self, factor: f64) -> Self {
        Self {
            re: self.re.clone(),
            im: self.im.iter().map(|y| y * factor).collect(),
            points: self.points.iter().map(|z| C64::new(z.re, z.im * factor)).collect(),
        }
    }
}
