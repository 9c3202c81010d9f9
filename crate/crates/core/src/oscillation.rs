//! The L¹ oscillation `osc(u, A) = inf_c mean_A |u - c|`.
//!
//! The infimum is attained at a median of the samples in `A`, so every
//! oscillation here is computed exactly from a selection rather than by
//! numerical minimisation. Ties are broken toward the lower median.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{blowup_sample, Ball, BlowupSample, GridFunction, UnitBallLattice};

/// Regions holding fewer nodes than this are too coarse for membership tests.
pub const MIN_REGION_NODES: usize = 8;

/// Lower weighted median: the smallest minimiser of `sum w_i |v_i - c|`.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValues);
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidInput("weights must be positive and finite".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for &i in &order {
        acc += weights[i];
        if 2.0 * acc >= total {
            return Ok(values[i]);
        }
    }
    Ok(values[*order.last().expect("nonempty")])
}

/// Lower median of equally weighted samples; reorders `buf`.
pub fn lower_median(buf: &mut [f64]) -> Result<f64> {
    if buf.is_empty() {
        return Err(Error::EmptyInput);
    }
    let k = (buf.len() - 1) / 2;
    let (_, m, _) = buf.select_nth_unstable_by(k, f64::total_cmp);
    Ok(*m)
}

/// Median and total absolute deviation of an equally weighted sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscStats {
    pub median: f64,
    pub total_deviation: f64,
    pub count: usize,
}

impl OscStats {
    pub fn osc(&self) -> f64 {
        self.total_deviation / self.count as f64
    }
}

/// Oscillation statistics of finite, equally weighted values.
pub fn osc_stats(values: &[f64]) -> Result<OscStats> {
    let mut buf = values.to_vec();
    osc_stats_in_place(&mut buf)
}

pub(crate) fn osc_stats_in_place(buf: &mut [f64]) -> Result<OscStats> {
    if buf.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if buf.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValues);
    }
    let median = lower_median(buf)?;
    let total_deviation = buf.iter().map(|v| (v - median).abs()).sum();
    Ok(OscStats {
        median,
        total_deviation,
        count: buf.len(),
    })
}

/// Oscillation of finite values with arbitrary positive weights.
pub fn weighted_osc(values: &[f64], weights: &[f64]) -> Result<f64> {
    let c = weighted_median(values, weights)?;
    let total: f64 = weights.iter().sum();
    Ok(values.iter().zip(weights).map(|(v, w)| w * (v - c).abs()).sum::<f64>() / total)
}

/// A measurable set over a sampled function's nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Every node of the sample (the unit ball for blowup samples).
    All,
    /// Nodes whose position lies in the ball (lattice coordinates for
    /// blowup samples, physical coordinates for grids).
    Ball(Ball),
    /// Explicit node indices.
    Nodes(Vec<usize>),
}

/// Something whose samples can be restricted to a [`Region`].
pub trait Sampled {
    /// Appends the defined samples of `region` to `out`.
    fn region_values(&self, region: &Region, out: &mut Vec<f64>) -> Result<()>;
}

fn push_defined(out: &mut Vec<f64>, v: f64) -> Result<()> {
    if v.is_nan() {
        Ok(())
    } else if v.is_infinite() {
        Err(Error::NonFiniteValues)
    } else {
        out.push(v);
        Ok(())
    }
}

fn push_indices(values: &[f64], idx: &[usize], out: &mut Vec<f64>) -> Result<()> {
    for &i in idx {
        let v = *values
            .get(i)
            .ok_or_else(|| Error::InvalidInput(format!("node index {i} out of range")))?;
        push_defined(out, v)?;
    }
    Ok(())
}

impl Sampled for BlowupSample {
    fn region_values(&self, region: &Region, out: &mut Vec<f64>) -> Result<()> {
        match region {
            Region::All => self.values.iter().try_for_each(|&v| push_defined(out, v)),
            Region::Nodes(idx) => push_indices(&self.values, idx, out),
            Region::Ball(b) => {
                if b.dim() != self.lattice.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.lattice.dim(),
                        got: b.dim(),
                    });
                }
                for (y, &v) in self.lattice.nodes().zip(&self.values) {
                    if b.contains(y) {
                        push_defined(out, v)?;
                    }
                }
                Ok(())
            }
        }
    }
}

impl Sampled for GridFunction {
    fn region_values(&self, region: &Region, out: &mut Vec<f64>) -> Result<()> {
        match region {
            Region::All => self.values().iter().try_for_each(|&v| push_defined(out, v)),
            Region::Nodes(idx) => push_indices(self.values(), idx, out),
            Region::Ball(b) => {
                if b.dim() != self.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim(),
                        got: b.dim(),
                    });
                }
                for (i, &v) in self.values().iter().enumerate() {
                    if b.contains(&self.point(i)) {
                        push_defined(out, v)?;
                    }
                }
                Ok(())
            }
        }
    }
}

/// Median and oscillation of `u` over `region`.
pub fn osc_with_median<S: Sampled + ?Sized>(u: &S, region: &Region) -> Result<OscStats> {
    let mut buf = Vec::new();
    u.region_values(region, &mut buf)?;
    osc_stats_in_place(&mut buf)
}

/// `osc(u, A)` for a grid function or blowup sample.
pub fn osc<S: Sampled + ?Sized>(u: &S, region: &Region) -> Result<f64> {
    osc_with_median(u, region).map(|s| s.osc())
}

/// Lattice node lists for a family of sub-balls of `B_1`, computed once.
#[derive(Debug, Clone)]
pub struct BallRegions {
    pub balls: Vec<Ball>,
    pub nodes: Vec<Vec<usize>>,
}

impl BallRegions {
    pub fn new(lattice: &UnitBallLattice, balls: &[Ball]) -> Self {
        Self {
            balls: balls.to_vec(),
            nodes: balls.iter().map(|b| lattice.nodes_in_ball(b)).collect(),
        }
    }

    /// Whether ball `i` captures enough nodes to take part in membership tests.
    pub fn usable(&self, i: usize) -> bool {
        self.nodes[i].len() >= MIN_REGION_NODES
    }

    /// Oscillation of `sample` on ball `i`, or `None` for under-resolved balls.
    pub fn osc(&self, sample: &BlowupSample, i: usize, scratch: &mut Vec<f64>) -> Result<Option<f64>> {
        if !self.usable(i) {
            return Ok(None);
        }
        scratch.clear();
        push_indices(&sample.values, &self.nodes[i], scratch)?;
        if scratch.len() < MIN_REGION_NODES {
            return Ok(None);
        }
        osc_stats_in_place(scratch).map(|s| Some(s.osc()))
    }
}

/// Oscillations of the blowups at one base point across radii and sub-balls.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OscTable {
    pub base: Vec<f64>,
    pub radii: Vec<f64>,
    pub balls: Vec<Ball>,
    /// `osc(u^{x,r}, B_1)` per radius; `None` where the radius is unavailable.
    pub unit_ball: Vec<Option<f64>>,
    /// `osc(u^{x,r}, B)` indexed `[radius][ball]`; `None` for unavailable
    /// radii and for balls holding fewer than [`MIN_REGION_NODES`] nodes.
    pub per_ball: Vec<Vec<Option<f64>>>,
}

impl OscTable {
    pub fn to_json(&self) -> serde_json::Value {
        let balls: Vec<_> = self
            .balls
            .iter()
            .enumerate()
            .map(|(i, b)| serde_json::json!({"id": i, "center": b.center, "radius": b.radius}))
            .collect();
        serde_json::json!({
            "base": self.base,
            "radii": self.radii,
            "balls": balls,
            "unit_ball": self.unit_ball,
            "values": self.per_ball,
        })
    }
}

/// Builds the oscillation table of `u` at `x`.
///
/// A radius whose blowup cannot be sampled is marked unavailable rather
/// than failing the table.
pub fn osc_table(
    u: &GridFunction,
    x: &[f64],
    radii: &[f64],
    family: &[Ball],
    lattice: &Arc<UnitBallLattice>,
) -> Result<OscTable> {
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParams("radii must be strictly decreasing".into()));
    }
    let regions = BallRegions::new(lattice, family);
    let rows: Vec<Result<(Option<f64>, Vec<Option<f64>>)>> = radii
        .par_iter()
        .map(|&r| {
            let sample = match blowup_sample(u, x, r, lattice) {
                Ok(s) => s,
                Err(Error::OutOfDomain { .. } | Error::RadiusTooSmall { .. }) => {
                    return Ok((None, vec![None; family.len()]))
                }
                Err(e) => return Err(e),
            };
            let full = osc(&sample, &Region::All)?;
            let mut scratch = Vec::new();
            let row = (0..family.len())
                .map(|i| regions.osc(&sample, i, &mut scratch))
                .collect::<Result<Vec<_>>>()?;
            Ok((Some(full), row))
        })
        .collect();
    let mut unit_ball = Vec::with_capacity(radii.len());
    let mut per_ball = Vec::with_capacity(radii.len());
    for row in rows {
        let (full, balls) = row?;
        unit_ball.push(full);
        per_ball.push(balls);
    }
    Ok(OscTable {
        base: x.to_vec(),
        radii: radii.to_vec(),
        balls: family.to_vec(),
        unit_ball,
        per_ball,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(weighted_median(&[1.0, 2.0, 100.0], &[1.0; 3]).unwrap(), 2.0);
        assert_eq!(weighted_median(&[0.0, 1.0], &[1.0; 2]).unwrap(), 0.0);
        assert_eq!(weighted_median(&[0.0, 0.0, 10.0], &[1.0, 1.0, 5.0]).unwrap(), 10.0);
    }

    /// Scans every sample value as a candidate minimiser.
    fn brute_force_median(values: &[f64], weights: &[f64]) -> f64 {
        let cost = |c: f64| -> f64 { values.iter().zip(weights).map(|(v, w)| w * (v - c).abs()).sum() };
        let mut best = (f64::INFINITY, f64::INFINITY);
        for &c in values {
            let k = cost(c);
            if k < best.0 || (k == best.0 && c < best.1) {
                best = (k, c);
            }
        }
        best.1
    }

    #[test]
    fn median_matches_brute_force() {
        let cases: [(&[f64], &[f64]); 3] = [
            (&[0.0, 0.0, 10.0], &[1.0, 1.0, 5.0]),
            (&[3.0, -1.0, 2.0, 7.0], &[2.0, 1.0, 1.0, 4.0]),
            (&[5.0, 1.0, 4.0, 2.0, 3.0], &[1.0, 1.0, 1.0, 1.0, 1.0]),
        ];
        for (v, w) in cases {
            assert_eq!(weighted_median(v, w).unwrap(), brute_force_median(v, w));
        }
    }

    #[test]
    fn median_errors() {
        assert!(matches!(weighted_median(&[], &[]), Err(Error::EmptyInput)));
        assert!(weighted_median(&[1.0], &[0.0]).is_err());
        assert!(weighted_median(&[1.0, 2.0], &[1.0]).is_err());
        assert!(matches!(weighted_median(&[f64::INFINITY], &[1.0]), Err(Error::NonFiniteValues)));
    }

    #[test]
    fn unweighted_median_agrees_with_weighted() {
        let v = [4.0, -2.0, 9.0, 0.5, 0.5, 3.0];
        let mut buf = v.to_vec();
        assert_eq!(lower_median(&mut buf).unwrap(), weighted_median(&v, &[1.0; 6]).unwrap());
    }

    #[test]
    fn constant_region_has_zero_osc() {
        let lat = UnitBallLattice::shared(2, 17).unwrap();
        let s = BlowupSample::from_fn(lat, |_| 3.25);
        assert_eq!(osc(&s, &Region::All).unwrap(), 0.0);
    }

    #[test]
    fn jump_osc_is_one_half() {
        let lat = UnitBallLattice::shared(2, 33).unwrap();
        let s = BlowupSample::from_fn(lat, |y| if y[0] > 0.0 { 1.0 } else { 0.0 });
        assert!((osc(&s, &Region::All).unwrap() - 0.5).abs() < 2.0 / 33.0);
    }

    #[test]
    fn linear_osc_matches_polar_integral() {
        // mean over B_1 of |y_1| is 4/(3 pi) in two dimensions
        let lat = UnitBallLattice::shared(2, 65).unwrap();
        let s = BlowupSample::from_fn(lat, |y| 3.0 * y[0] + 4.0 * y[1]);
        let expected = 5.0 * 4.0 / (3.0 * std::f64::consts::PI);
        assert!((osc(&s, &Region::All).unwrap() - expected).abs() < 5.0 * 3.0 / 65.0);
    }

    #[test]
    fn infinite_values_are_rejected() {
        let lat = UnitBallLattice::shared(1, 9).unwrap();
        let s = BlowupSample::from_fn(lat, |y| if y[0] > 0.5 { f64::INFINITY } else { 0.0 });
        assert!(matches!(osc(&s, &Region::All), Err(Error::NonFiniteValues)));
        let nan = BlowupSample::from_fn(UnitBallLattice::shared(1, 9).unwrap(), |_| f64::NAN);
        assert!(matches!(osc(&nan, &Region::All), Err(Error::EmptyRegion)));
    }

    #[test]
    fn ball_regions_on_grid_and_sample_agree() {
        let g = GridFunction::centered_box(2, 16, 1.0, |p| p[0]).unwrap();
        let ball = Ball::new(vec![0.0, 0.0], 0.3).unwrap();
        let direct = osc(&g, &Region::Ball(ball.clone())).unwrap();
        let idx: Vec<usize> = (0..g.len()).filter(|&i| ball.contains(&g.point(i))).collect();
        assert_eq!(direct, osc(&g, &Region::Nodes(idx)).unwrap());
    }

    #[test]
    fn table_for_jump() {
        let u = GridFunction::centered_box(2, 128, 1.0, |p| if p[0] > 0.0 { 1.0 } else { 0.0 }).unwrap();
        let lat = UnitBallLattice::shared(2, 33).unwrap();
        let family = [Ball::new(vec![0.5, 0.0], 0.25).unwrap()];
        let h = u.spacing();
        let radii = [32.0 * h, 16.0 * h, 8.0 * h];
        let t = osc_table(&u, &[0.0, 0.0], &radii, &family, &lat).unwrap();
        for r in 0..radii.len() {
            assert!((t.unit_ball[r].unwrap() - 0.5).abs() < 0.06);
            assert!(t.per_ball[r][0].unwrap() < 1e-12);
        }
        // radii beyond the domain are unavailable, not errors
        let t = osc_table(&u, &[0.9, 0.0], &[0.5, 0.05], &family, &lat).unwrap();
        assert_eq!(t.unit_ball[0], None);
        assert!(t.unit_ball[1].is_some());
    }
}
