//! Rational balls, E-set extraction, exclusion cones and Lipschitz-graph
//! covers.
//!
//! A point `x` belongs to `E_{δ,τ,B,r₀}` when, at every sampled scale
//! `r ≤ r₀`, its blowup oscillates by at least `δ` on `B_1` but by at most
//! `τδ` on the sub-ball `B = B_ρ(z₀)`. Such sets satisfy a cone exclusion
//! property with `ρ' = ½ τ^{1/n} ρ` and `ε = ρ - ρ'`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{blowup_sample_guarded, dot, norm, Ball, BlowupSample, GridFunction, UnitBallLattice};
use crate::oscillation::{osc, BallRegions, Region};

/// Balls `B_q(c)` with `c ∈ 2^{-depth} Z^n`, `q ∈ {2^{-1}, …, 2^{-depth}}`
/// and `|c| + q < 1`, ordered by `q` descending then center lexicographically.
pub fn rational_ball_family(dim: usize, depth: u32) -> Vec<Ball> {
    assert!(dim >= 1 && (1..16).contains(&depth), "unsupported family parameters");
    let m: i64 = 1 << depth;
    let mut out = Vec::new();
    for j in 1..=depth {
        let q_units = m >> j;
        let bound = (m - q_units) * (m - q_units);
        let mut k = vec![-m; dim];
        loop {
            let sq: i64 = k.iter().map(|v| v * v).sum();
            if sq < bound {
                out.push(Ball {
                    center: k.iter().map(|&v| v as f64 / m as f64).collect(),
                    radius: q_units as f64 / m as f64,
                });
            }
            // odometer, last axis fastest -> lexicographic order
            let mut a = dim;
            loop {
                if a == 0 {
                    break;
                }
                a -= 1;
                if k[a] < m {
                    k[a] += 1;
                    break;
                }
                k[a] = -m;
            }
            if k.iter().all(|&v| v == -m) {
                break;
            }
        }
    }
    out
}

/// Radii `r₀ σ^k` not below `r_min`, decreasing.
pub fn e_set_radii(r0: f64, r_min: f64, sigma: f64) -> Vec<f64> {
    let mut radii = Vec::new();
    let mut k = 0;
    loop {
        let r = r0 * sigma.powi(k);
        if r < r_min * (1.0 - 1e-9) {
            break;
        }
        radii.push(r);
        k += 1;
    }
    radii
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ESetParams {
    pub delta: f64,
    pub tau: f64,
    pub ball: Ball,
    pub r0: f64,
    /// Sampled scales, all in `(0, r₀]`.
    pub radii: Vec<f64>,
}

impl ESetParams {
    pub fn new(delta: f64, tau: f64, ball: Ball, r0: f64, radii: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParams(format!("delta must be positive, got {delta}")));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidParams(format!("tau must lie in (0, 1), got {tau}")));
        }
        if !ball.inside_unit_ball() {
            return Err(Error::InvalidParams("ball must lie strictly inside B_1".into()));
        }
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::InvalidParams(format!("r0 must be positive, got {r0}")));
        }
        if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0 && r <= r0)) {
            return Err(Error::InvalidParams("radius samples must be nonempty and lie in (0, r0]".into()));
        }
        Ok(Self {
            delta,
            tau,
            ball,
            r0,
            radii,
        })
    }

    /// Parameters sampled on `e_set_radii(r0, r_min, sigma)`.
    pub fn with_schedule(delta: f64, tau: f64, ball: Ball, r0: f64, r_min: f64, sigma: f64) -> Result<Self> {
        Self::new(delta, tau, ball, r0, e_set_radii(r0, r_min, sigma))
    }
}

/// Membership of `x` in `E_{δ,τ,B,r₀}` at the sampled radii.
///
/// Returns `Insufficient` if some radius cannot be sampled at `x`, and
/// `EmptyRegion` if `B` captures too few lattice nodes.
pub fn e_set_membership(
    u: &GridFunction,
    x: &[f64],
    params: &ESetParams,
    lattice: &Arc<UnitBallLattice>,
) -> Result<bool> {
    let regions = BallRegions::new(lattice, std::slice::from_ref(&params.ball));
    if !regions.usable(0) {
        return Err(Error::EmptyRegion);
    }
    let r_min = crate::grid::DEFAULT_MIN_RADIUS_CELLS * u.spacing();
    let mut scratch = Vec::new();
    let mut member = true;
    for &r in &params.radii {
        let sample = match blowup_sample_guarded(u, x, r, lattice, r_min) {
            Ok(s) => s,
            Err(Error::OutOfDomain { .. } | Error::RadiusTooSmall { .. }) => {
                return Err(Error::Insufficient(x.to_vec()))
            }
            Err(e) => return Err(e),
        };
        if member {
            let whole = osc(&sample, &Region::All)?;
            let sub = regions.osc(&sample, 0, &mut scratch)?.ok_or(Error::EmptyRegion)?;
            member = whole >= params.delta && sub <= params.tau * params.delta;
        }
    }
    Ok(member)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ESet {
    pub params: ESetParams,
    /// Flat grid indices of the members, increasing.
    pub indices: Vec<usize>,
    /// Physical coordinates of the members.
    pub points: Vec<Vec<f64>>,
    /// Grid points skipped because some radius could not be sampled.
    pub excluded: usize,
}

/// All grid points of `u` in `E_{δ,τ,B,r₀}`.
pub fn extract_e_set(u: &GridFunction, params: &ESetParams, lattice: &Arc<UnitBallLattice>) -> Result<ESet> {
    let outcomes: Vec<Result<Option<bool>>> = (0..u.len())
        .into_par_iter()
        .map(|i| match e_set_membership(u, &u.point(i), params, lattice) {
            Ok(m) => Ok(Some(m)),
            Err(Error::Insufficient(_) | Error::NonFiniteValues) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut indices = Vec::new();
    let mut excluded = 0;
    for (i, o) in outcomes.into_iter().enumerate() {
        match o? {
            Some(true) => indices.push(i),
            Some(false) => {}
            None => excluded += 1,
        }
    }
    Ok(ESet {
        params: params.clone(),
        points: indices.iter().map(|&i| u.point(i)).collect(),
        indices,
        excluded,
    })
}

/// The truncated cone `{r z : z ∈ B_ε(z₀), 0 < r ≤ r₀}` attached to `B_ρ(z₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub z0: Vec<f64>,
    pub axis: Vec<f64>,
    pub z0_norm: f64,
    pub rho: f64,
    pub rho_prime: f64,
    pub eps: f64,
    pub sin_half_aperture: f64,
    pub lipschitz: f64,
    /// Truncation scale `r₀`.
    pub range: f64,
}

/// Builds the exclusion cone for `B = B_ρ(z₀)`, `τ`, `r₀` in dimension `n`.
pub fn cone_from_params(ball: &Ball, tau: f64, r0: f64, n: usize) -> Result<ConeSpec> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParams(format!("tau must lie in (0, 1), got {tau}")));
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidParams(format!("r0 must be positive, got {r0}")));
    }
    if ball.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ball.dim(),
        });
    }
    if !ball.inside_unit_ball() {
        return Err(Error::InvalidParams("ball must lie strictly inside B_1".into()));
    }
    let z0_norm = norm(&ball.center);
    if z0_norm == 0.0 {
        return Err(Error::DegenerateCone("ball is centered at the origin".into()));
    }
    let rho = ball.radius;
    let rho_prime = 0.5 * tau.powf(1.0 / n as f64) * rho;
    let eps = rho - rho_prime;
    if eps >= z0_norm {
        return Err(Error::DegenerateCone(format!("eps {eps} >= |z0| {z0_norm}")));
    }
    let sin = eps / z0_norm;
    Ok(ConeSpec {
        z0: ball.center.clone(),
        axis: ball.center.iter().map(|c| c / z0_norm).collect(),
        z0_norm,
        rho,
        rho_prime,
        eps,
        sin_half_aperture: sin,
        lipschitz: (z0_norm * z0_norm - eps * eps).sqrt() / eps,
        range: r0,
    })
}

/// Admissible scales `[r_lo, r_hi] ⊆ (0, r₀]` with `Δ ∈ r B_ε(z₀)`, if any.
fn cone_interval(delta: &[f64], cone: &ConeSpec) -> Option<(f64, f64)> {
    let c = dot(delta, delta);
    let p = dot(delta, &cone.z0);
    if c == 0.0 || p <= 0.0 {
        return None;
    }
    let a = cone.z0_norm * cone.z0_norm - cone.eps * cone.eps;
    let disc = p * p - a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let lo = c / (p + s);
    let hi = (p + s) / a;
    if lo > cone.range {
        return None;
    }
    Some((lo, hi.min(cone.range)))
}

/// Whether `Δ = r z` for some `z ∈ B_ε(z₀)` and `0 < r ≤ r₀`. `Δ = 0` is never in the cone.
pub fn in_cone(delta: &[f64], cone: &ConeSpec) -> bool {
    cone_interval(delta, cone).is_some()
}

/// A scale `r` witnessing `in_cone(Δ)`: the midpoint of the admissible interval.
pub fn cone_witness(delta: &[f64], cone: &ConeSpec) -> Option<f64> {
    cone_interval(delta, cone).map(|(lo, hi)| 0.5 * (lo + hi))
}

/// `in_cone(Δ) || in_cone(-Δ)`.
pub fn in_symmetric_cone(delta: &[f64], cone: &ConeSpec) -> bool {
    let neg: Vec<f64> = delta.iter().map(|d| -d).collect();
    in_cone(delta, cone) || in_cone(&neg, cone)
}

/// A pair of points violating the cone property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    /// Scale `r` with `x_j - x_i ∈ r B_ε(z₀)` (or the reverse difference).
    pub witness: f64,
    /// True when the witness is for `x_i - x_j`.
    pub reversed: bool,
}

/// All unordered pairs `i < j` farther apart than `guard` with one point
/// in the other's cone.
pub fn verify_cone_property(points: &[Vec<f64>], cone: &ConeSpec, guard: f64) -> Vec<Violation> {
    let guard2 = guard * guard;
    let n = points.len();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut found = Vec::new();
            let mut delta = vec![0.0; cone.z0.len()];
            let mut neg = vec![0.0; cone.z0.len()];
            for j in (i + 1)..n {
                for a in 0..delta.len() {
                    delta[a] = points[j][a] - points[i][a];
                    neg[a] = -delta[a];
                }
                if dot(&delta, &delta) <= guard2 {
                    continue;
                }
                if let Some(r) = cone_witness(&delta, cone) {
                    found.push(Violation {
                        i,
                        j,
                        witness: r,
                        reversed: false,
                    });
                } else if let Some(r) = cone_witness(&neg, cone) {
                    found.push(Violation {
                        i,
                        j,
                        witness: r,
                        reversed: true,
                    });
                }
            }
            found
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    /// Integer cell coordinates `floor(x / d)`.
    pub id: Vec<i64>,
    /// Indices into the covered point list.
    pub members: Vec<usize>,
    pub pass: bool,
    /// Largest `|<Δ,e>| / |Δ - <Δ,e>e|` over checked pairs; `None` without pairs
    /// or when some slope is infinite.
    pub worst_slope: Option<f64>,
    pub infinite_slope: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub cone: ConeSpec,
    pub cell_side: f64,
    pub cells: Vec<CellReport>,
}

impl CoverReport {
    pub fn all_pass(&self) -> bool {
        self.cells.iter().all(|c| c.pass)
    }

    /// Largest finite slope over all cells.
    pub fn worst_slope(&self) -> Option<f64> {
        self.cells.iter().filter_map(|c| c.worst_slope).fold(None, |m, s| Some(m.map_or(s, |m: f64| m.max(s))))
    }
}

/// Slope of `Δ` over the hyperplane `e^⊥`; infinite for `Δ ∥ e`.
pub fn graph_slope(delta: &[f64], axis: &[f64]) -> f64 {
    let along = dot(delta, axis);
    let perp2 = (dot(delta, delta) - along * along).max(0.0);
    let perp = perp2.sqrt();
    if perp == 0.0 {
        if along == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        along.abs() / perp
    }
}

/// Partitions `points` into cubic cells of side `r₀(|z₀| - ε)/√n` and checks
/// the graph condition `|<Δ,e>| ≤ L |Δ⊥|` within each cell. Pairs closer than
/// `guard` are skipped when a guard is given.
pub fn cover_with_graphs(points: &[Vec<f64>], cone: &ConeSpec, guard: Option<f64>) -> CoverReport {
    let n = cone.z0.len();
    let d = cone.range * (cone.z0_norm - cone.eps) / (n as f64).sqrt();
    let mut cells: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        let id = p.iter().map(|&c| (c / d).floor() as i64).collect();
        cells.entry(id).or_default().push(i);
    }
    let guard2 = guard.map_or(-1.0, |g| g * g);
    let reports = cells
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(id, members)| {
            let mut worst: Option<f64> = None;
            let mut infinite = false;
            let mut delta = vec![0.0; n];
            for (k, &i) in members.iter().enumerate() {
                for &j in &members[k + 1..] {
                    for a in 0..n {
                        delta[a] = points[j][a] - points[i][a];
                    }
                    if dot(&delta, &delta) <= guard2 {
                        continue;
                    }
                    let s = graph_slope(&delta, &cone.axis);
                    if s.is_infinite() {
                        infinite = true;
                    } else {
                        worst = Some(worst.map_or(s, |w| w.max(s)));
                    }
                }
            }
            let pass = !infinite && worst.is_none_or(|w| w <= cone.lipschitz);
            CellReport {
                id,
                members,
                pass,
                worst_slope: if infinite { None } else { worst },
                infinite_slope: infinite,
            }
        })
        .collect();
    CoverReport {
        cone: cone.clone(),
        cell_side: d,
        cells: reports,
    }
}

/// Parameter grid for a full decomposition sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub deltas: Vec<f64>,
    pub tau: f64,
    pub depth: u32,
    pub r0s: Vec<f64>,
    pub sigma: f64,
    pub min_radius_cells: f64,
    pub lattice_resolution: usize,
    /// Pairs closer than `guard_cells * h` are below resolution.
    pub guard_cells: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            deltas: vec![0.1, 0.2, 0.4],
            tau: 0.5,
            depth: 3,
            r0s: vec![0.25, 0.125],
            sigma: 0.5f64.powf(0.25),
            min_radius_cells: crate::grid::DEFAULT_MIN_RADIUS_CELLS,
            lattice_resolution: crate::grid::DEFAULT_LATTICE_RESOLUTION,
            guard_cells: 2.0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() || self.deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidParams("delta list must be nonempty and positive".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidParams(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if self.r0s.is_empty() || self.r0s.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidParams("r0 list must be nonempty and positive".into()));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::InvalidParams("sigma must lie in (0, 1)".into()));
        }
        if self.depth == 0 || self.depth > 8 {
            return Err(Error::InvalidParams("depth must lie in 1..=8".into()));
        }
        Ok(())
    }
}

/// One nonempty E-set with its cone check and cover.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub ball_id: usize,
    pub eset: ESet,
    /// `None` when the ball yields a degenerate cone.
    pub cone: Option<ConeSpec>,
    pub violations: Vec<Violation>,
    pub cover: Option<CoverReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub family: Vec<Ball>,
    pub guard: f64,
    pub entries: Vec<SweepEntry>,
}

/// Per-point oscillation extremes for one `r₀`.
struct ScaleRecord {
    min_whole: f64,
    /// Max `osc(B)` per family ball over the radii; `None` for unusable balls.
    max_ball: Vec<Option<f64>>,
}

/// Extracts every nonempty `E_{δ,τ,B,r₀}` over the configured grid of
/// parameters, then checks the cone property and builds covers.
///
/// Each blowup is sampled once per point and radius and shared across all
/// `(δ, B)` combinations.
pub fn sweep(u: &GridFunction, cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let n = u.dim();
    let lattice = UnitBallLattice::shared(n, cfg.lattice_resolution)?;
    let family = rational_ball_family(n, cfg.depth);
    let regions = BallRegions::new(&lattice, &family);
    let h = u.spacing();
    let r_min = cfg.min_radius_cells * h;
    let schedules: Vec<Vec<f64>> = cfg.r0s.iter().map(|&r0| e_set_radii(r0, r_min, cfg.sigma)).collect();
    let delta_min = cfg.deltas.iter().cloned().fold(f64::INFINITY, f64::min);

    let records: Vec<Vec<Option<ScaleRecord>>> = (0..u.len())
        .into_par_iter()
        .map(|i| {
            let x = u.point(i);
            let mut cache: HashMap<u64, Option<BlowupSample>> = HashMap::new();
            let mut whole: HashMap<u64, f64> = HashMap::new();
            let mut scratch = Vec::new();
            schedules
                .iter()
                .zip(&cfg.r0s)
                .map(|(radii, &r0)| {
                    if radii.is_empty() || !u.contains_ball(&x, r0) {
                        return None;
                    }
                    // finest radii first: they reject most points
                    let mut min_whole = f64::INFINITY;
                    for &r in radii.iter().rev() {
                        let key = r.to_bits();
                        let o = match whole.get(&key) {
                            Some(&o) => o,
                            None => {
                                let s = cache
                                    .entry(key)
                                    .or_insert_with(|| blowup_sample_guarded(u, &x, r, &lattice, r_min).ok())
                                    .as_ref()?;
                                let o = osc(s, &Region::All).ok()?;
                                whole.insert(key, o);
                                o
                            }
                        };
                        min_whole = min_whole.min(o);
                        if min_whole < delta_min {
                            return Some(ScaleRecord {
                                min_whole,
                                max_ball: Vec::new(),
                            });
                        }
                    }
                    let mut max_ball = vec![Some(f64::NEG_INFINITY); family.len()];
                    for &r in radii {
                        let s = cache.get(&r.to_bits())?.as_ref()?;
                        for (b, slot) in max_ball.iter_mut().enumerate() {
                            if let Some(m) = slot {
                                match regions.osc(s, b, &mut scratch).ok()? {
                                    Some(o) => *m = m.max(o),
                                    None => *slot = None,
                                }
                            }
                        }
                    }
                    Some(ScaleRecord { min_whole, max_ball })
                })
                .collect()
        })
        .collect();

    let guard = cfg.guard_cells * h;
    let mut entries = Vec::new();
    for &delta in &cfg.deltas {
        for (k, &r0) in cfg.r0s.iter().enumerate() {
            let excluded = records.iter().filter(|r| r[k].is_none()).count();
            for (b, ball) in family.iter().enumerate() {
                if !regions.usable(b) {
                    continue;
                }
                let indices: Vec<usize> = records
                    .iter()
                    .enumerate()
                    .filter_map(|(i, rec)| {
                        let rec = rec[k].as_ref()?;
                        let m = (*rec.max_ball.get(b)?)?;
                        (rec.min_whole >= delta && m <= cfg.tau * delta).then_some(i)
                    })
                    .collect();
                if indices.is_empty() {
                    continue;
                }
                let params = ESetParams::new(delta, cfg.tau, ball.clone(), r0, schedules[k].clone())?;
                let eset = ESet {
                    params,
                    points: indices.iter().map(|&i| u.point(i)).collect(),
                    indices,
                    excluded,
                };
                let cone = cone_from_params(ball, cfg.tau, r0, n).ok();
                let (violations, cover) = match &cone {
                    Some(c) => (
                        verify_cone_property(&eset.points, c, guard),
                        Some(cover_with_graphs(&eset.points, c, Some(guard))),
                    ),
                    None => (Vec::new(), None),
                };
                entries.push(SweepEntry {
                    ball_id: b,
                    eset,
                    cone,
                    violations,
                    cover,
                });
            }
        }
    }
    Ok(SweepResult {
        config: cfg.clone(),
        family,
        guard,
        entries,
    })
}
