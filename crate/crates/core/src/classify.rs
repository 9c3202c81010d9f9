//! Pointwise blowup analysis: convergence, constant and jump fits, and
//! classification.
//!
//! The limit `r -> 0` is replaced by a finite criterion on a geometric
//! radius schedule that ends at the sampling guard `r_min = 2h`:
//!
//! * the last `k_conv` consecutive gaps must be small and non-increasing
//!   (within `slack`);
//! * if the limit is not constant, the same test must also pass on the last
//!   `k_conv` disjoint octave gaps `|u^{x,r} - u^{x,r/2}|`, so that slow
//!   drifts across scales are not mistaken for convergence.
//!
//! Every gap is compared after subtracting a resolution allowance
//! `c s h (1/r_fine - 1/r_coarse)`, where `s` is the larger value spread
//! (max - min) of the two samples. An interface can only be located to
//! within one cell, and the induced L¹ error in `u^{x,r}` scales like the
//! jump size times `h/r`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    blowup_sample_guarded, dot, l1_distance, norm, Ball, BlowupSample, GridFunction, UnitBallLattice,
};
use crate::oscillation::{lower_median, osc, osc_stats, BallRegions, Region, MIN_REGION_NODES};

/// Tunable thresholds of the classifier. Tolerances are fractions of the
/// value range of the analysed function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    pub lattice_resolution: usize,
    /// Ratio between consecutive radii, in (0, 1).
    pub sigma: f64,
    pub max_radius_cells: f64,
    /// Largest radius as a fraction of the distance to the domain boundary.
    pub boundary_fraction: f64,
    pub min_radius_cells: f64,
    pub k_min: usize,
    pub k_conv: usize,
    pub slack: f64,
    pub tol_cauchy: f64,
    pub tol_const: f64,
    pub tol_jump: f64,
    pub sep_min: f64,
    /// Coefficient `c` of the resolution allowance `c h / r`.
    pub resolution_allowance: f64,
    /// Jump models are fitted on the finest sample with `r >= fit_min_cells * h`.
    pub fit_min_cells: f64,
    /// Overrides the value range used to scale tolerances.
    pub value_range: Option<f64>,
    pub directions_2d: usize,
    pub directions_3d: usize,
    pub refine_deg: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            lattice_resolution: crate::grid::DEFAULT_LATTICE_RESOLUTION,
            sigma: 0.5f64.powf(0.25),
            max_radius_cells: 32.0,
            boundary_fraction: 1.0,
            min_radius_cells: crate::grid::DEFAULT_MIN_RADIUS_CELLS,
            k_min: 4,
            k_conv: 3,
            slack: 1.5,
            tol_cauchy: 0.02,
            tol_const: 0.01,
            tol_jump: 0.05,
            sep_min: 0.1,
            resolution_allowance: 0.5,
            fit_min_cells: 8.0,
            value_range: None,
            directions_2d: 360,
            directions_3d: 600,
            refine_deg: 0.1,
        }
    }
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_cauchy", self.tol_cauchy),
            ("tol_const", self.tol_const),
            ("tol_jump", self.tol_jump),
            ("sep_min", self.sep_min),
            ("max_radius_cells", self.max_radius_cells),
            ("min_radius_cells", self.min_radius_cells),
            ("boundary_fraction", self.boundary_fraction),
            ("refine_deg", self.refine_deg),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::InvalidParams(format!("sigma must lie in (0, 1), got {}", self.sigma)));
        }
        if self.k_conv == 0 || self.k_min < self.k_conv + 1 {
            return Err(Error::InvalidParams("need k_conv >= 1 and k_min >= k_conv + 1".into()));
        }
        if self.slack < 1.0 || self.resolution_allowance < 0.0 {
            return Err(Error::InvalidParams("slack must be >= 1 and the allowance >= 0".into()));
        }
        if self.directions_2d < 4 || self.directions_3d < 20 {
            return Err(Error::InvalidParams("too few search directions".into()));
        }
        if let Some(r) = self.value_range {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidParams("value_range must be positive".into()));
            }
        }
        Ok(())
    }

    /// Number of schedule steps per halving of the radius.
    pub fn octave_lag(&self) -> usize {
        ((0.5f64.ln() / self.sigma.ln()).round() as usize).max(1)
    }
}

/// Outcome of the finite convergence test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    NonConvergent,
}

/// The blowups of `u` at one point along the radius schedule.
#[derive(Debug, Clone)]
pub struct BlowupSequence {
    pub point: Vec<f64>,
    /// Strictly decreasing radii ending at `r_min`.
    pub radii: Vec<f64>,
    pub samples: Vec<BlowupSample>,
    /// `l1_distance(samples[k], samples[k + 1])`.
    pub gaps: Vec<f64>,
    /// Resolution allowance subtracted from each gap.
    pub allowances: Vec<f64>,
    /// `(coarse index, gap)` for the disjoint octave gaps that were checked.
    pub octave_gaps: Vec<(usize, f64)>,
    /// Oscillation of the limit, extrapolated linearly in `r` to `r = 0`.
    pub limit_osc: f64,
    pub verdict: Verdict,
}

impl BlowupSequence {
    /// The sample at the smallest radius.
    pub fn limit(&self) -> &BlowupSample {
        self.samples.last().expect("at least k_min samples")
    }
}

/// Best jump-function approximation `u_{a,b,nu}` of a blowup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpFit {
    /// Value on the side `nu . y > 0`.
    pub a: f64,
    /// Value on the side `nu . y < 0`.
    pub b: f64,
    pub normal: Vec<f64>,
    /// Mean of `|v - u_{a,b,nu}|` over the lattice.
    pub residual: f64,
}

/// Classification of a point by its blowup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum PointClass {
    ApproxContinuous { value: f64 },
    Jump(JumpFit),
    SingularNonJump { osc_of_limit: f64 },
    NonConvergent,
    Insufficient,
}

impl PointClass {
    /// Grey level used in class rasters.
    pub fn code(&self) -> u8 {
        match self {
            PointClass::ApproxContinuous { .. } => 0,
            PointClass::Jump(_) => 64,
            PointClass::SingularNonJump { .. } => 128,
            PointClass::NonConvergent => 192,
            PointClass::Insufficient => 255,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PointClass::ApproxContinuous { .. } => "approx_continuous",
            PointClass::Jump(_) => "jump",
            PointClass::SingularNonJump { .. } => "singular_non_jump",
            PointClass::NonConvergent => "non_convergent",
            PointClass::Insufficient => "insufficient",
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, PointClass::ApproxContinuous { .. })
    }

    pub fn jump(&self) -> Option<&JumpFit> {
        match self {
            PointClass::Jump(fit) => Some(fit),
            _ => None,
        }
    }
}

/// Precomputed state for analysing many points of one grid.
#[derive(Debug, Clone)]
pub struct Classifier<'a> {
    u: &'a GridFunction,
    cfg: ClassifyConfig,
    lattice: Arc<UnitBallLattice>,
    range: f64,
}

impl<'a> Classifier<'a> {
    pub fn new(u: &'a GridFunction, cfg: &ClassifyConfig) -> Result<Self> {
        cfg.validate()?;
        let lattice = UnitBallLattice::shared(u.dim(), cfg.lattice_resolution)?;
        let range = cfg.value_range.unwrap_or_else(|| u.value_range());
        let range = if range > 0.0 { range } else { 1.0 };
        Ok(Self {
            u,
            cfg: cfg.clone(),
            lattice,
            range,
        })
    }

    pub fn config(&self) -> &ClassifyConfig {
        &self.cfg
    }

    pub fn lattice(&self) -> &Arc<UnitBallLattice> {
        &self.lattice
    }

    /// Value range that scales the tolerances.
    pub fn range(&self) -> f64 {
        self.range
    }

    fn h(&self) -> f64 {
        self.u.spacing()
    }

    fn r_min(&self) -> f64 {
        self.cfg.min_radius_cells * self.h()
    }

    /// Decreasing radii `r_min sigma^{-k}` not exceeding
    /// `min(boundary_fraction * dist(x, boundary), max_radius_cells * h)`.
    pub fn schedule(&self, x: &[f64]) -> Vec<f64> {
        radius_schedule(self.u, x, &self.cfg)
    }

    fn allowance(&self, r_coarse: f64, r_fine: f64, spread: f64) -> f64 {
        self.cfg.resolution_allowance * spread * self.h() * (1.0 / r_fine - 1.0 / r_coarse)
    }

    fn sample(&self, x: &[f64], r: f64) -> Result<BlowupSample> {
        blowup_sample_guarded(self.u, x, r, &self.lattice, self.r_min())
    }

    /// Finite Cauchy test on a window of excess gaps.
    fn window_ok(&self, excess: &[f64]) -> bool {
        let tol = self.cfg.tol_cauchy * self.range;
        let floor = 0.25 * tol;
        excess.iter().all(|&e| e < tol) && excess.windows(2).all(|w| w[1] <= self.cfg.slack * w[0] + floor)
    }

    fn excess(&self, (gap, spread): (f64, f64), r_coarse: f64, r_fine: f64) -> f64 {
        (gap - self.allowance(r_coarse, r_fine, spread)).max(0.0)
    }

    /// Runs the convergence test at `x`, keeping every sample.
    pub fn converge(&self, x: &[f64]) -> Result<BlowupSequence> {
        let radii = self.schedule(x);
        if radii.len() < self.cfg.k_min {
            return Err(Error::Insufficient(x.to_vec()));
        }
        let samples = radii.iter().map(|&r| self.sample(x, r)).collect::<Result<Vec<_>>>()?;
        let mut lazy = LazySamples::from_samples(&radii, samples);
        let outcome = self.decide(x, &radii, &mut lazy)?;
        let samples: Vec<BlowupSample> = lazy.samples.into_iter().map(|s| s.expect("filled")).collect();
        let gaps = samples
            .windows(2)
            .map(|w| l1_distance(&w[0], &w[1]))
            .collect::<Result<Vec<_>>>()?;
        let allowances = samples
            .windows(2)
            .zip(radii.windows(2))
            .map(|(s, r)| self.allowance(r[0], r[1], spread(&s[0]).max(spread(&s[1]))))
            .collect();
        Ok(BlowupSequence {
            point: x.to_vec(),
            radii,
            samples,
            gaps,
            allowances,
            octave_gaps: outcome.octave_gaps,
            limit_osc: outcome.limit_osc,
            verdict: outcome.verdict,
        })
    }

    fn decide(&self, x: &[f64], radii: &[f64], lazy: &mut LazySamples) -> Result<Decision> {
        let n = radii.len();
        let k = self.cfg.k_conv;
        // fine window: the last k consecutive gaps
        let mut excess = Vec::with_capacity(k);
        for i in (n - 1 - k)..(n - 1) {
            let g = lazy.gap(self, x, i, i + 1)?;
            excess.push(self.excess(g, radii[i], radii[i + 1]));
        }
        let limit_osc = {
            let fine = osc(lazy.get(self, x, n - 1)?, &Region::All)?;
            let prev = osc(lazy.get(self, x, n - 2)?, &Region::All)?;
            extrapolate_to_zero(radii[n - 2], prev, radii[n - 1], fine)
        };
        if !self.window_ok(&excess) {
            return Ok(Decision {
                verdict: Verdict::NonConvergent,
                limit_osc,
                octave_gaps: Vec::new(),
            });
        }
        if limit_osc < self.cfg.tol_const * self.range {
            return Ok(Decision {
                verdict: Verdict::Converged,
                limit_osc,
                octave_gaps: Vec::new(),
            });
        }
        // octave window: k disjoint halvings ending at r_min
        let lag = self.cfg.octave_lag();
        if n < k * lag + 1 {
            return Err(Error::Insufficient(x.to_vec()));
        }
        let mut octave_gaps = Vec::with_capacity(k);
        let mut excess = Vec::with_capacity(k);
        for j in (1..=k).rev() {
            let fine = n - 1 - (j - 1) * lag;
            let coarse = fine - lag;
            let g = lazy.gap(self, x, coarse, fine)?;
            octave_gaps.push((coarse, g.0));
            excess.push(self.excess(g, radii[coarse], radii[fine]));
        }
        let verdict = if self.window_ok(&excess) {
            Verdict::Converged
        } else {
            Verdict::NonConvergent
        };
        Ok(Decision {
            verdict,
            limit_osc,
            octave_gaps,
        })
    }

    /// Classifies the point `x`. Data-dependent failures map to
    /// [`PointClass::Insufficient`].
    pub fn classify(&self, x: &[f64]) -> PointClass {
        match self.classify_inner(x) {
            Ok(c) => c,
            Err(_) => PointClass::Insufficient,
        }
    }

    fn classify_inner(&self, x: &[f64]) -> Result<PointClass> {
        let radii = self.schedule(x);
        if radii.len() < self.cfg.k_min {
            return Ok(PointClass::Insufficient);
        }
        let mut lazy = LazySamples::new(&radii);
        let decision = self.decide(x, &radii, &mut lazy)?;
        if decision.verdict == Verdict::NonConvergent {
            return Ok(PointClass::NonConvergent);
        }
        let n = radii.len();
        let limit = lazy.get(self, x, n - 1)?;
        let stats = osc_stats(&finite_values(limit)?)?;
        if decision.limit_osc < self.cfg.tol_const * self.range {
            return Ok(PointClass::ApproxContinuous { value: stats.median });
        }
        let fit_index = self.fit_index(&radii);
        let fit_radius = radii[fit_index];
        let fit = fit_jump(lazy.get(self, x, fit_index)?, &self.cfg)?;
        let tol = (self.cfg.tol_jump + self.cfg.resolution_allowance * self.h() / fit_radius) * self.range;
        if fit.residual < tol && (fit.a - fit.b).abs() >= self.cfg.sep_min * self.range {
            Ok(PointClass::Jump(fit))
        } else {
            Ok(PointClass::SingularNonJump {
                osc_of_limit: stats.osc(),
            })
        }
    }

    /// Index of the finest radius at least `fit_min_cells * h`, or the coarsest.
    fn fit_index(&self, radii: &[f64]) -> usize {
        let min = self.cfg.fit_min_cells * self.h() * (1.0 - 1e-9);
        radii.iter().rposition(|&r| r >= min).unwrap_or(0)
    }

    /// Classifies every grid point; records follow the grid's flat order.
    pub fn classify_all(&self) -> Vec<PointClass> {
        (0..self.u.len())
            .into_par_iter()
            .map(|i| self.classify(&self.u.point(i)))
            .collect()
    }
}

struct Decision {
    verdict: Verdict,
    limit_osc: f64,
    octave_gaps: Vec<(usize, f64)>,
}

/// Samples along the schedule, computed on first use.
struct LazySamples {
    radii: Vec<f64>,
    samples: Vec<Option<BlowupSample>>,
}

impl LazySamples {
    fn new(radii: &[f64]) -> Self {
        Self {
            radii: radii.to_vec(),
            samples: vec![None; radii.len()],
        }
    }

    fn from_samples(radii: &[f64], samples: Vec<BlowupSample>) -> Self {
        debug_assert_eq!(radii.len(), samples.len());
        Self {
            radii: radii.to_vec(),
            samples: samples.into_iter().map(Some).collect(),
        }
    }

    fn get(&mut self, c: &Classifier<'_>, x: &[f64], i: usize) -> Result<&BlowupSample> {
        if self.samples[i].is_none() {
            self.samples[i] = Some(c.sample(x, self.radii[i])?);
        }
        Ok(self.samples[i].as_ref().expect("just filled"))
    }

    /// L¹ gap between samples `i` and `j` and their larger spread.
    fn gap(&mut self, c: &Classifier<'_>, x: &[f64], i: usize, j: usize) -> Result<(f64, f64)> {
        self.get(c, x, i)?;
        self.get(c, x, j)?;
        let (a, b) = (self.samples[i].as_ref().expect("filled"), self.samples[j].as_ref().expect("filled"));
        Ok((l1_distance(a, b)?, spread(a).max(spread(b))))
    }
}

/// `max - min` over the finite values of a sample.
fn spread(v: &BlowupSample) -> f64 {
    let (lo, hi) = v
        .values
        .iter()
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// Linear extrapolation of `osc(r)` to `r = 0`, clamped to `[0, osc_fine]`.
fn extrapolate_to_zero(r_prev: f64, osc_prev: f64, r_fine: f64, osc_fine: f64) -> f64 {
    let slope = (osc_prev - osc_fine) / (r_prev - r_fine);
    (osc_fine - slope * r_fine).clamp(0.0, osc_fine)
}

fn finite_values(v: &BlowupSample) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(v.len());
    for &x in &v.values {
        if x.is_nan() {
            continue;
        }
        if x.is_infinite() {
            return Err(Error::NonFiniteValues);
        }
        out.push(x);
    }
    Ok(out)
}

/// Radius schedule at `x` for `u`; see [`Classifier::schedule`].
pub fn radius_schedule(u: &GridFunction, x: &[f64], cfg: &ClassifyConfig) -> Vec<f64> {
    let h = u.spacing();
    let r_min = cfg.min_radius_cells * h;
    let cap = (cfg.boundary_fraction * u.distance_to_boundary(x)).min(cfg.max_radius_cells * h);
    let mut radii = Vec::new();
    let mut k = 0i32;
    loop {
        let r = r_min * cfg.sigma.powi(-k);
        if r > cap * (1.0 + 1e-9) {
            break;
        }
        radii.push(r);
        k += 1;
    }
    radii.reverse();
    radii
}

/// Blowup sequence and convergence verdict at `x`.
pub fn blowup_converge(u: &GridFunction, x: &[f64], cfg: &ClassifyConfig) -> Result<BlowupSequence> {
    Classifier::new(u, cfg)?.converge(x)
}

/// Classifies `x`. Errors only for an invalid configuration.
pub fn classify_point(u: &GridFunction, x: &[f64], cfg: &ClassifyConfig) -> Result<PointClass> {
    if x.len() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: x.len(),
        });
    }
    Ok(Classifier::new(u, cfg)?.classify(x))
}

/// Classifies every grid point in parallel.
pub fn classify_grid(u: &GridFunction, cfg: &ClassifyConfig) -> Result<Vec<PointClass>> {
    Ok(Classifier::new(u, cfg)?.classify_all())
}

/// Best constant approximation: the lower median and the residual `osc(v, B_1)`.
pub fn fit_constant(v: &BlowupSample) -> Result<(f64, f64)> {
    let stats = osc_stats(&finite_values(v)?)?;
    Ok((stats.median, stats.osc()))
}

/// Scratch buffers for evaluating jump residuals.
struct JumpEval<'v> {
    v: &'v BlowupSample,
    pos: Vec<f64>,
    neg: Vec<f64>,
    side: Vec<i8>,
}

#[derive(Debug, Clone, Copy)]
struct JumpEvalResult {
    a: f64,
    b: f64,
    residual: f64,
    n_pos: usize,
    n_neg: usize,
}

const PLANE_EPS: f64 = 1e-12;

impl<'v> JumpEval<'v> {
    fn new(v: &'v BlowupSample) -> Self {
        Self {
            v,
            pos: Vec::with_capacity(v.len()),
            neg: Vec::with_capacity(v.len()),
            side: vec![0; v.len()],
        }
    }

    /// Residual of the per-direction optimal jump model for `nu`.
    fn eval(&mut self, nu: &[f64]) -> JumpEvalResult {
        self.pos.clear();
        self.neg.clear();
        for (i, y) in self.v.lattice.nodes().enumerate() {
            let s = dot(y, nu);
            let val = self.v.values[i];
            self.side[i] = if s > PLANE_EPS {
                self.pos.push(val);
                1
            } else if s < -PLANE_EPS {
                self.neg.push(val);
                -1
            } else {
                0
            };
        }
        let (n_pos, n_neg) = (self.pos.len(), self.neg.len());
        let a = lower_median(&mut self.pos).unwrap_or(f64::NAN);
        let b = lower_median(&mut self.neg).unwrap_or(f64::NAN);
        let (a, b) = match (a.is_nan(), b.is_nan()) {
            (true, true) => (0.0, 0.0),
            (true, false) => (b, b),
            (false, true) => (a, a),
            _ => (a, b),
        };
        let mid = 0.5 * (a + b);
        let total: f64 = self
            .v
            .values
            .iter()
            .zip(&self.side)
            .map(|(&val, &s)| {
                let model = match s {
                    1 => a,
                    -1 => b,
                    _ => mid,
                };
                (val - model).abs()
            })
            .sum();
        JumpEvalResult {
            a,
            b,
            residual: total / self.v.len() as f64,
            n_pos,
            n_neg,
        }
    }
}

/// Jump residual and per-side medians for a given direction.
pub fn jump_residual(v: &BlowupSample, normal: &[f64]) -> Result<JumpFit> {
    finite_values(v)?;
    let r = JumpEval::new(v).eval(normal);
    Ok(JumpFit {
        a: r.a,
        b: r.b,
        normal: normal.to_vec(),
        residual: r.residual,
    })
}

fn is_tie(r: f64, best: f64) -> bool {
    r <= best + 1e-12 * (1.0 + best.abs())
}

fn unit_from_angle(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

/// Coarse-to-fine search in the plane. Residual plateaus (ranges of
/// directions splitting the lattice identically) resolve to their midpoint.
fn search_2d(eval: &mut JumpEval<'_>, cfg: &ClassifyConfig) -> (Vec<f64>, JumpEvalResult) {
    let n = cfg.directions_2d;
    let step = 2.0 * PI / n as f64;
    let coarse: Vec<f64> = (0..n)
        .map(|k| eval.eval(&unit_from_angle(k as f64 * step)).residual)
        .collect();
    let best = (0..n).fold(0, |b, k| if coarse[k] < coarse[b] { k } else { b });
    let min = coarse[best];
    let mut lo = 0usize;
    while lo < n && is_tie(coarse[(best + n - lo - 1) % n], min) {
        lo += 1;
    }
    let mut hi = 0usize;
    while hi < n && is_tie(coarse[(best + hi + 1) % n], min) {
        hi += 1;
    }
    if lo >= n - 1 {
        let nu = unit_from_angle(best as f64 * step);
        return (nu.to_vec(), eval.eval(&nu));
    }
    let start = (best as f64 - lo as f64 - 1.0) * step;
    let end = (best as f64 + hi as f64 + 1.0) * step;
    let fine_step = cfg.refine_deg.to_radians();
    let count = ((end - start) / fine_step).ceil() as usize;
    let fine: Vec<(f64, f64)> = (0..=count)
        .map(|j| {
            let t = start + j as f64 * fine_step;
            (t, eval.eval(&unit_from_angle(t)).residual)
        })
        .collect();
    let fbest = (0..fine.len()).fold(0, |b, k| if fine[k].1 < fine[b].1 { k } else { b });
    let fmin = fine[fbest].1;
    let mut flo = fbest;
    while flo > 0 && is_tie(fine[flo - 1].1, fmin) {
        flo -= 1;
    }
    let mut fhi = fbest;
    while fhi + 1 < fine.len() && is_tie(fine[fhi + 1].1, fmin) {
        fhi += 1;
    }
    let mid = 0.5 * (fine[flo].0 + fine[fhi].0);
    let nu_mid = unit_from_angle(mid);
    let at_mid = eval.eval(&nu_mid);
    if is_tie(at_mid.residual, fmin) {
        (nu_mid.to_vec(), at_mid)
    } else {
        let nu = unit_from_angle(fine[fbest].0);
        (nu.to_vec(), eval.eval(&nu))
    }
}

/// Quasi-uniform directions on the unit sphere (Fibonacci lattice).
pub fn sphere_directions(count: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    v.iter_mut().for_each(|x| *x /= n);
}

/// Two unit vectors spanning the plane orthogonal to `n`.
fn tangent_frame(n: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let mut t1 = [
        helper[1] * n[2] - helper[2] * n[1],
        helper[2] * n[0] - helper[0] * n[2],
        helper[0] * n[1] - helper[1] * n[0],
    ];
    normalize(&mut t1);
    let t2 = [
        n[1] * t1[2] - n[2] * t1[1],
        n[2] * t1[0] - n[0] * t1[2],
        n[0] * t1[1] - n[1] * t1[0],
    ];
    (t1, t2)
}

/// Sphere sampling followed by a shrinking pattern search.
fn search_3d(eval: &mut JumpEval<'_>, cfg: &ClassifyConfig) -> (Vec<f64>, JumpEvalResult) {
    let dirs = sphere_directions(cfg.directions_3d);
    let mut best = dirs[0];
    let mut best_r = eval.eval(&best);
    for d in &dirs[1..] {
        let r = eval.eval(d);
        if r.residual < best_r.residual {
            best = *d;
            best_r = r;
        }
    }
    let mut step = (4.0 * PI / cfg.directions_3d as f64).sqrt();
    let min_step = cfg.refine_deg.to_radians();
    while step >= min_step {
        let (t1, t2) = tangent_frame(&best);
        let mut improved = false;
        for (c1, c2) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let mut cand = [0.0; 3];
            for a in 0..3 {
                cand[a] = best[a] + step * (c1 * t1[a] + c2 * t2[a]);
            }
            normalize(&mut cand);
            let r = eval.eval(&cand);
            if r.residual < best_r.residual {
                best = cand;
                best_r = r;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best.to_vec(), best_r)
}

/// Fits `u_{a,b,nu}` to `v` in L¹: per direction the optimal values are the
/// half-ball medians, and the direction minimises the residual.
///
/// The returned fit is oriented so that `a >= b`.
pub fn fit_jump(v: &BlowupSample, cfg: &ClassifyConfig) -> Result<JumpFit> {
    finite_values(v)?;
    if v.values.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("jump fits need a fully defined sample".into()));
    }
    let mut eval = JumpEval::new(v);
    let (mut normal, r) = match v.lattice.dim() {
        1 => {
            let r = eval.eval(&[1.0]);
            (vec![1.0], r)
        }
        2 => search_2d(&mut eval, cfg),
        _ => search_3d(&mut eval, cfg),
    };
    let nodes = r.n_pos.min(r.n_neg);
    if nodes < MIN_REGION_NODES {
        return Err(Error::DegenerateHalf { nodes });
    }
    let (mut a, mut b) = (r.a, r.b);
    if a < b {
        std::mem::swap(&mut a, &mut b);
        normal.iter_mut().for_each(|c| *c = -*c);
    }
    Ok(JumpFit {
        a,
        b,
        normal,
        residual: r.residual,
    })
}

/// First ball of `family`, in enumeration order, on which `osc(v, B) < delta / 2`.
///
/// Balls capturing fewer than [`MIN_REGION_NODES`] lattice nodes are skipped.
pub fn find_quiet_ball(v: &BlowupSample, delta: f64, family: &[Ball]) -> Result<Ball> {
    if family.is_empty() {
        return Err(Error::InvalidInput("empty ball family".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParams("delta must be positive".into()));
    }
    let regions = BallRegions::new(&v.lattice, family);
    let mut scratch = Vec::new();
    for (i, ball) in family.iter().enumerate() {
        if let Some(o) = regions.osc(v, i, &mut scratch)? {
            if o < 0.5 * delta {
                return Ok(ball.clone());
            }
        }
    }
    Err(Error::NoQuietBall { threshold: 0.5 * delta })
}

/// Angle in degrees between two lines spanned by `a` and `b` (orientation ignored).
pub fn line_angle_deg(a: &[f64], b: &[f64]) -> f64 {
    let c = (dot(a, b) / (norm(a) * norm(b))).abs().min(1.0);
    c.acos().to_degrees()
}
