//! Sampled functions on uniform lattices and their blowups.
//!
//! A [`GridFunction`] stores cell-centred samples of an extended-real
//! function on an `n`-dimensional box (`1 <= n <= 3`). Blowups
//! `u^{x,r}(y) = u(x + r y)` are resampled onto a fixed [`UnitBallLattice`]
//! so that samples taken at different centres and radii can be compared
//! node by node.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supported lattice dimension range.
pub const MAX_DIM: usize = 3;

/// Default blowup guard, in cells: radii below `2h` are rejected.
pub const DEFAULT_MIN_RADIUS_CELLS: f64 = 2.0;

/// Default unit-ball lattice resolution (nodes per axis).
pub const DEFAULT_LATTICE_RESOLUTION: usize = 33;

/// A function sampled at the cell centres of a uniform grid.
///
/// Values are stored row-major (last axis fastest). `NaN` marks an
/// undefined sample; `+inf` and `-inf` are kept as is.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    shape: Vec<usize>,
    spacing: f64,
    origin: Vec<f64>,
    values: Vec<f64>,
    strides: Vec<usize>,
}

impl GridFunction {
    pub fn new(shape: Vec<usize>, spacing: f64, origin: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let dim = shape.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::DimensionUnsupported(dim));
        }
        if origin.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: origin.len(),
            });
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        if let Some(&e) = shape.iter().find(|&&e| e < 2) {
            return Err(Error::InvalidGrid(format!("every extent must be >= 2, got {e}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::InvalidGrid(format!(
                "shape product {expected} does not match {} values",
                values.len()
            )));
        }
        let mut strides = vec![1; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        Ok(Self {
            shape,
            spacing,
            origin,
            values,
            strides,
        })
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn(
        shape: Vec<usize>,
        spacing: f64,
        origin: Vec<f64>,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let count: usize = shape.iter().product();
        let mut g = Self::new(shape, spacing, origin, vec![0.0; count])?;
        let mut p = vec![0.0; g.dim()];
        for i in 0..count {
            g.point_into(i, &mut p);
            g.values[i] = f(&p);
        }
        Ok(g)
    }

    /// Square (cube) grid of `resolution` cells per axis covering `[-extent, extent]^dim`.
    pub fn centered_box(dim: usize, resolution: usize, extent: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidGrid("resolution must be >= 2".into()));
        }
        let h = 2.0 * extent / resolution as f64;
        let o = -extent + 0.5 * h;
        Self::from_fn(vec![resolution; dim], h, vec![o; dim], f)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in 0..self.dim() {
            idx[a] = flat / self.strides[a];
            flat %= self.strides[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Physical coordinates of the centre of cell `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        self.point_into(flat, &mut p);
        p
    }

    fn point_into(&self, mut flat: usize, p: &mut [f64]) {
        for a in 0..self.dim() {
            let i = flat / self.strides[a];
            flat %= self.strides[a];
            p[a] = self.origin[a] + self.spacing * i as f64;
        }
    }

    /// Lower corner of the domain box along `axis`.
    pub fn domain_lo(&self, axis: usize) -> f64 {
        self.origin[axis] - 0.5 * self.spacing
    }

    /// Upper corner of the domain box along `axis`.
    pub fn domain_hi(&self, axis: usize) -> f64 {
        self.origin[axis] + self.spacing * (self.shape[axis] as f64 - 0.5)
    }

    /// Distance from `x` to the boundary of the domain box; negative outside.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|a| (x[a] - self.domain_lo(a)).min(self.domain_hi(a) - x[a]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether the closed ball `x + r B_1` lies inside the domain box.
    pub fn contains_ball(&self, x: &[f64], r: f64) -> bool {
        x.len() == self.dim() && self.distance_to_boundary(x) >= r - 1e-9 * self.spacing
    }

    /// Smallest and largest finite sample, if any.
    pub fn finite_range(&self) -> Option<(f64, f64)> {
        let mut it = self.values.iter().copied().filter(|v| v.is_finite());
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    /// `max - min` over finite samples, or 0 when there are none.
    pub fn value_range(&self) -> f64 {
        self.finite_range().map_or(0.0, |(lo, hi)| hi - lo)
    }

    /// Pointwise map of the samples onto a grid of the same geometry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// Multilinear interpolation at a physical point.
    ///
    /// Points in the outer half cell clamp to the boundary samples. If any
    /// of the `2^n` surrounding samples is infinite or undefined, the
    /// nearest sample is returned instead.
    pub fn interpolate(&self, p: &[f64]) -> f64 {
        let n = self.dim();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        let mut nearest = 0usize;
        for a in 0..n {
            let last = (self.shape[a] - 1) as f64;
            let t = ((p[a] - self.origin[a]) / self.spacing).clamp(0.0, last);
            let i0 = (t.floor() as usize).min(self.shape[a] - 2);
            base[a] = i0;
            frac[a] = t - i0 as f64;
            nearest += (t.round() as usize) * self.strides[a];
        }
        // corner bit a selects the upper neighbour along axis a
        let mut corners = [0.0f64; 1 << MAX_DIM];
        for (corner, slot) in corners.iter_mut().enumerate().take(1 << n) {
            let mut idx = 0;
            for a in 0..n {
                let up = (corner >> a) & 1;
                idx += (base[a] + up) * self.strides[a];
            }
            let v = self.values[idx];
            if !v.is_finite() {
                return self.values[nearest];
            }
            *slot = v;
        }
        // reduce one axis at a time; equal corners stay exact
        let mut count = 1usize << n;
        for &t in frac.iter().take(n) {
            count /= 2;
            for j in 0..count {
                let (lo, hi) = (corners[2 * j], corners[2 * j + 1]);
                corners[j] = if lo == hi { lo } else { lo + t * (hi - lo) };
            }
        }
        corners[0]
    }
}

/// A closed Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParams(format!("ball radius must be positive, got {radius}")));
        }
        if center.is_empty() || center.len() > MAX_DIM {
            return Err(Error::DimensionUnsupported(center.len()));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        dist2(&self.center, y) <= self.radius * self.radius * (1.0 + 1e-12)
    }

    /// Whether the ball lies strictly inside the unit ball: `|c| + r < 1`.
    pub fn inside_unit_ball(&self) -> bool {
        norm(&self.center) + self.radius < 1.0
    }
}

/// Regular lattice of `m^n` points on `[-1, 1]^n`, restricted to `|y| <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitBallLattice {
    dim: usize,
    resolution: usize,
    nodes: Vec<f64>,
    coords: Vec<i32>,
}

impl UnitBallLattice {
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::DimensionUnsupported(dim));
        }
        if resolution < 3 {
            return Err(Error::InvalidParams("lattice resolution must be >= 3".into()));
        }
        let m = resolution;
        let denom = (m - 1) as f64;
        let total = m.pow(dim as u32);
        let mut nodes = Vec::new();
        let mut coords = Vec::new();
        let mut y = [0.0; MAX_DIM];
        let mut k = [0i32; MAX_DIM];
        for mut flat in 0..total {
            for a in (0..dim).rev() {
                let j = flat % m;
                flat /= m;
                // 2j - (m - 1) negates exactly under j -> m - 1 - j.
                k[a] = 2 * j as i32 - (m as i32 - 1);
                y[a] = f64::from(k[a]) / denom;
            }
            let r2: f64 = y[..dim].iter().map(|v| v * v).sum();
            if r2 <= 1.0 + 1e-12 {
                nodes.extend_from_slice(&y[..dim]);
                coords.extend_from_slice(&k[..dim]);
            }
        }
        Ok(Self {
            dim,
            resolution,
            nodes,
            coords,
        })
    }

    pub fn shared(dim: usize, resolution: usize) -> Result<Arc<Self>> {
        Self::new(dim, resolution).map(Arc::new)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.nodes.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    /// Integer lattice coordinates (odd steps of `1/(m-1)`) of node `i`.
    pub fn node_coords(&self, i: usize) -> &[i32] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks_exact(self.dim)
    }

    /// Indices of the nodes lying in `ball`.
    pub fn nodes_in_ball(&self, ball: &Ball) -> Vec<usize> {
        self.nodes()
            .enumerate()
            .filter(|(_, y)| ball.contains(y))
            .map(|(i, _)| i)
            .collect()
    }

    /// Index of the node `-y` for node `i`.
    pub fn mirror(&self, i: usize) -> Option<usize> {
        let target: Vec<i32> = self.node_coords(i).iter().map(|c| -c).collect();
        (0..self.len()).find(|&j| self.node_coords(j) == target.as_slice())
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.dim == other.dim && self.resolution == other.resolution
    }
}

/// Values of `u^{x,r}` at the nodes of a unit-ball lattice.
#[derive(Debug, Clone)]
pub struct BlowupSample {
    pub center: Vec<f64>,
    pub radius: f64,
    pub lattice: Arc<UnitBallLattice>,
    pub values: Vec<f64>,
}

impl BlowupSample {
    /// Builds a sample from a function of the lattice coordinate `y`.
    pub fn from_fn(lattice: Arc<UnitBallLattice>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = lattice.nodes().map(f).collect();
        Self {
            center: vec![0.0; lattice.dim()],
            radius: 1.0,
            lattice,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Physical position `x + r y` of node `i` (the inverse of `T_{x,r}`).
    pub fn physical_point(&self, i: usize) -> Vec<f64> {
        self.lattice
            .node(i)
            .iter()
            .zip(&self.center)
            .map(|(y, x)| x + self.radius * y)
            .collect()
    }
}

/// `T_{x,r}(p) = (p - x) / r`, mapping physical points to blowup coordinates.
pub fn to_blowup_coords(x: &[f64], r: f64, p: &[f64]) -> Vec<f64> {
    p.iter().zip(x).map(|(p, x)| (p - x) / r).collect()
}

/// Samples `u^{x,r}` on `lattice` with the default `2h` radius guard.
pub fn blowup_sample(u: &GridFunction, x: &[f64], r: f64, lattice: &Arc<UnitBallLattice>) -> Result<BlowupSample> {
    blowup_sample_guarded(u, x, r, lattice, DEFAULT_MIN_RADIUS_CELLS * u.spacing())
}

/// Samples `u^{x,r}` on `lattice`, rejecting radii below `min_radius`.
pub fn blowup_sample_guarded(
    u: &GridFunction,
    x: &[f64],
    r: f64,
    lattice: &Arc<UnitBallLattice>,
    min_radius: f64,
) -> Result<BlowupSample> {
    let n = u.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if lattice.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: lattice.dim(),
        });
    }
    if !(r.is_finite() && r > 0.0) || r < min_radius * (1.0 - 1e-12) {
        return Err(Error::RadiusTooSmall { radius: r, min_radius });
    }
    if !u.contains_ball(x, r) {
        return Err(Error::OutOfDomain {
            center: x.to_vec(),
            radius: r,
        });
    }
    let mut p = [0.0; MAX_DIM];
    let values = lattice
        .nodes()
        .map(|y| {
            for a in 0..n {
                p[a] = x[a] + r * y[a];
            }
            u.interpolate(&p[..n])
        })
        .collect();
    Ok(BlowupSample {
        center: x.to_vec(),
        radius: r,
        lattice: Arc::clone(lattice),
        values,
    })
}

fn check_same_lattice(f: &BlowupSample, g: &BlowupSample) -> Result<()> {
    if Arc::ptr_eq(&f.lattice, &g.lattice) || f.lattice.same_as(&g.lattice) {
        Ok(())
    } else {
        Err(Error::LatticeMismatch)
    }
}

fn abs_diff(a: f64, b: f64) -> f64 {
    if a == b {
        // also covers matching infinities
        0.0
    } else {
        (a - b).abs()
    }
}

/// Mean of `|f - g|` over node pairs where both samples are defined.
pub fn l1_distance(f: &BlowupSample, g: &BlowupSample) -> Result<f64> {
    check_same_lattice(f, g)?;
    let (sum, count) = f
        .values
        .iter()
        .zip(&g.values)
        .filter(|(a, b)| !a.is_nan() && !b.is_nan())
        .fold((0.0, 0usize), |(s, c), (&a, &b)| (s + abs_diff(a, b), c + 1));
    if count == 0 {
        return Err(Error::AllUndefined);
    }
    Ok(sum / count as f64)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(res: usize, f: impl Fn(&[f64]) -> f64) -> GridFunction {
        GridFunction::centered_box(2, res, 1.0, f).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            GridFunction::new(vec![2, 2], 1.0, vec![0.0, 0.0], vec![0.0; 3]),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            GridFunction::new(vec![2, 2, 2, 2], 1.0, vec![0.0; 4], vec![0.0; 16]),
            Err(Error::DimensionUnsupported(4))
        ));
        assert!(GridFunction::new(vec![1, 4], 1.0, vec![0.0; 2], vec![0.0; 4]).is_err());
        assert!(GridFunction::new(vec![4], 0.0, vec![0.0], vec![0.0; 4]).is_err());
    }

    #[test]
    fn domain_box_matches_shape() {
        let g = square(8, |_| 0.0);
        assert!((g.domain_lo(0) + 1.0).abs() < 1e-15);
        assert!((g.domain_hi(1) - 1.0).abs() < 1e-15);
        assert!((g.distance_to_boundary(&[0.0, 0.5]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lattice_is_symmetric_and_in_ball() {
        for dim in 1..=3 {
            let lat = UnitBallLattice::new(dim, 9).unwrap();
            assert!(!lat.is_empty());
            for i in 0..lat.len() {
                assert!(norm(lat.node(i)) <= 1.0 + 1e-12);
                let j = lat.mirror(i).expect("mirror node");
                for (a, b) in lat.node(i).iter().zip(lat.node(j)) {
                    assert_eq!(*a, -*b);
                }
            }
        }
    }

    #[test]
    fn odd_lattice_has_centre_node() {
        let lat = UnitBallLattice::new(2, DEFAULT_LATTICE_RESOLUTION).unwrap();
        assert!(lat.nodes().any(|y| y.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn constant_blowup() {
        let u = square(32, |_| 5.0);
        let lat = UnitBallLattice::shared(2, 17).unwrap();
        let s = blowup_sample(&u, &[0.1, -0.2], 0.3, &lat).unwrap();
        assert!(s.values.iter().all(|&v| v == 5.0));
    }

    #[test]
    fn jump_blowup_matches_away_from_interface() {
        let u = square(64, |p| if p[0] > 0.0 { 1.0 } else { 0.0 });
        let lat = UnitBallLattice::shared(2, 33).unwrap();
        let r = 0.5;
        let s = blowup_sample(&u, &[0.0, 0.0], r, &lat).unwrap();
        let band = 2.0 * u.spacing() / r;
        for (i, y) in lat.nodes().enumerate() {
            if y[0].abs() > band {
                assert_eq!(s.values[i], if y[0] > 0.0 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn quadratic_blowup_scales() {
        // u(y) = |y|^2, x = 0, r = 0.1: u^{0,r}(y) = 0.01 |y|^2.
        let u = square(256, |p| p[0] * p[0] + p[1] * p[1]);
        let lat = UnitBallLattice::shared(2, 33).unwrap();
        let s = blowup_sample(&u, &[0.0, 0.0], 0.1, &lat).unwrap();
        let h = u.spacing();
        for (i, y) in lat.nodes().enumerate() {
            let exact = 0.01 * (y[0] * y[0] + y[1] * y[1]);
            // bilinear error on a quadratic is at most h^2/4 per axis
            assert!((s.values[i] - exact).abs() <= 0.5 * h * h + 1e-15);
        }
    }

    #[test]
    fn physical_points_invert_t_map() {
        let u = square(32, |p| p[0] - 2.0 * p[1]);
        let lat = UnitBallLattice::shared(2, 9).unwrap();
        let x = [0.2, 0.1];
        let s = blowup_sample(&u, &x, 0.25, &lat).unwrap();
        for i in 0..s.len() {
            let p = s.physical_point(i);
            let y = to_blowup_coords(&x, 0.25, &p);
            for (a, b) in y.iter().zip(lat.node(i)) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((u.interpolate(&p) - s.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn blowup_errors() {
        let u = square(32, |_| 0.0);
        let lat = UnitBallLattice::shared(2, 9).unwrap();
        assert!(matches!(
            blowup_sample(&u, &[0.9, 0.0], 0.2, &lat),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            blowup_sample(&u, &[0.0, 0.0], u.spacing(), &lat),
            Err(Error::RadiusTooSmall { .. })
        ));
    }

    #[test]
    fn nearest_fallback_near_infinity() {
        let u = square(8, |p| if p[0] > 0.0 { f64::INFINITY } else { 1.0 });
        assert_eq!(u.interpolate(&[0.01, 0.0]), f64::INFINITY);
        assert_eq!(u.interpolate(&[-0.01, 0.0]), 1.0);
    }

    #[test]
    fn l1_examples() {
        let lat = UnitBallLattice::shared(2, 33).unwrap();
        let one = BlowupSample::from_fn(lat.clone(), |_| 1.0);
        let zero = BlowupSample::from_fn(lat.clone(), |_| 0.0);
        assert_eq!(l1_distance(&one, &one).unwrap(), 0.0);
        assert_eq!(l1_distance(&one, &zero).unwrap(), 1.0);
        let jump = BlowupSample::from_fn(lat.clone(), |y| if y[0] > 0.0 { 1.0 } else { 0.0 });
        let expected = lat.nodes().filter(|y| y[0] > 0.0).count() as f64 / lat.len() as f64;
        let d = l1_distance(&jump, &zero).unwrap();
        assert_eq!(d, expected);
        assert!((d - 0.5).abs() < 1.0 / 33.0);
    }

    #[test]
    fn l1_extended_conventions() {
        let lat = UnitBallLattice::shared(1, 5).unwrap();
        let f = BlowupSample::from_fn(lat.clone(), |_| f64::INFINITY);
        let g = BlowupSample::from_fn(lat.clone(), |_| 2.0);
        assert_eq!(l1_distance(&f, &f).unwrap(), 0.0);
        assert_eq!(l1_distance(&f, &g).unwrap(), f64::INFINITY);
        let nan = BlowupSample::from_fn(lat.clone(), |_| f64::NAN);
        assert!(matches!(l1_distance(&nan, &g), Err(Error::AllUndefined)));
        let other = BlowupSample::from_fn(UnitBallLattice::shared(1, 7).unwrap(), |_| 2.0);
        assert!(matches!(l1_distance(&g, &other), Err(Error::LatticeMismatch)));
    }
}
