//! Synthetic functions with analytically known singular and jump sets.
//!
//! Each cell takes the analytic value at its center (no anti-aliasing).
//! Ground truth labels a point `Jump` within `h/2` of an interface,
//! `ApproxContinuous` beyond `3h`, and leaves the band in between, as
//! well as `3h`-neighbourhoods of junctions and isolated singular points,
//! unspecified.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dist2, dot, norm, GridFunction, MAX_DIM};

/// Serializes non-finite floats as `"inf"`, `"-inf"` or `"nan"`.
pub mod ext_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

/// The analytic function of a corpus entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `a` where `normal · p > offset`, else `b`.
    Halfplane { a: f64, b: f64, normal: Vec<f64>, offset: f64 },
    Disk { center: Vec<f64>, radius: f64, inside: f64, outside: f64 },
    /// Regular polygon around the origin (2D only).
    Polygon { sides: usize, radius: f64, rotation: f64, inside: f64, outside: f64 },
    /// Nearest-site partition; site `k` of `sites` carries `k / (sites - 1)`.
    Voronoi { sites: usize, site_seed: u64 },
    /// Gaussian bump.
    Smooth { amplitude: f64, width: f64 },
    /// `|p_1| / |p|`, zero at the origin.
    Homogeneous,
    /// `sin(log |p|)`, zero at the origin.
    Logspiral,
    Checkerboard { period: f64, low: f64, high: f64 },
    /// `+inf` inside the disk of the given radius, `0` outside.
    ExtendedDisk { radius: f64 },
}

impl Shape {
    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Halfplane { .. } => "halfplane",
            Shape::Disk { .. } => "disk",
            Shape::Polygon { .. } => "polygon",
            Shape::Voronoi { .. } => "voronoi",
            Shape::Smooth { .. } => "smooth",
            Shape::Homogeneous => "homogeneous",
            Shape::Logspiral => "logspiral",
            Shape::Checkerboard { .. } => "checkerboard",
            Shape::ExtendedDisk { .. } => "extended_disk",
        }
    }
}

fn default_dim() -> usize {
    2
}

fn default_extent() -> f64 {
    1.0
}

/// A corpus entry: an analytic function sampled on `resolution^dim` cells
/// covering `[-extent, extent]^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub name: String,
    #[serde(flatten)]
    pub shape: Shape,
    pub resolution: usize,
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Half-width of additive uniform noise.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Jump parameters with `normal` pointing from the `b` side to the `a` side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpTruth {
    #[serde(with = "ext_f64")]
    pub a: f64,
    #[serde(with = "ext_f64")]
    pub b: f64,
    pub normal: Vec<f64>,
}

impl JumpTruth {
    /// The same jump written as `(b, a, -ν)`.
    pub fn flipped(&self) -> JumpTruth {
        JumpTruth {
            a: self.b,
            b: self.a,
            normal: self.normal.iter().map(|c| -c).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthLabel {
    ApproxContinuous,
    Jump,
    SingularNonJump,
    NonConvergent,
    Unspecified,
}

impl TruthLabel {
    pub fn code(self) -> u8 {
        match self {
            TruthLabel::ApproxContinuous => 0,
            TruthLabel::Jump => 64,
            TruthLabel::SingularNonJump => 128,
            TruthLabel::NonConvergent => 192,
            TruthLabel::Unspecified => 255,
        }
    }
}

/// An isolated point with a known class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialPoint {
    pub point: Vec<f64>,
    pub label: TruthLabel,
}

/// Analytic description of `u` near one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTruth {
    /// Distance to the nearest interface (`inf` if none).
    pub interface_distance: f64,
    /// Distance to the nearest junction or isolated singular point.
    pub junction_distance: f64,
    /// Jump across the nearest interface.
    pub jump: Option<JumpTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub labels: Vec<TruthLabel>,
    pub interface_distance: Vec<f64>,
    /// `(flat index, jump)` for every point labelled `Jump`.
    pub jumps: Vec<(usize, JumpTruth)>,
    pub special: Vec<SpecialPoint>,
    /// Half-width of the `Jump` band.
    pub band: f64,
    /// Distance beyond which points are `ApproxContinuous`.
    pub margin: f64,
}

impl GroundTruth {
    pub fn jump_at(&self, index: usize) -> Option<&JumpTruth> {
        self.jumps
            .binary_search_by_key(&index, |(i, _)| *i)
            .ok()
            .map(|k| &self.jumps[k].1)
    }

    pub fn to_json(&self, spec: &CorpusSpec) -> Result<serde_json::Value> {
        let labels: Vec<u8> = self.labels.iter().map(|l| l.code()).collect();
        let distances: Vec<Option<f64>> = self
            .interface_distance
            .iter()
            .map(|d| d.is_finite().then_some(*d))
            .collect();
        Ok(serde_json::json!({
            "schema": 1,
            "spec": serde_json::to_value(spec)?,
            "label_codes": {"approx_continuous": 0, "jump": 64, "singular_non_jump": 128, "non_convergent": 192, "unspecified": 255},
            "labels": labels,
            "interface_distance": distances,
            "jumps": serde_json::to_value(&self.jumps)?,
            "special": serde_json::to_value(&self.special)?,
            "band": self.band,
            "margin": self.margin,
        }))
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

fn voronoi_sites(sites: usize, seed: u64, dim: usize, extent: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sites)
        .map(|_| (0..dim).map(|_| rng.gen_range(-0.8 * extent..0.8 * extent)).collect())
        .collect()
}

fn polygon_vertices(sides: usize, radius: f64, rotation: f64) -> Vec<[f64; 2]> {
    (0..sides)
        .map(|k| {
            let t = rotation + 2.0 * PI * k as f64 / sides as f64;
            [radius * t.cos(), radius * t.sin()]
        })
        .collect()
}

fn segment_distance(p: &[f64], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    let (qx, qy) = (a[0] + t * dx, a[1] + t * dy);
    ((p[0] - qx).powi(2) + (p[1] - qy).powi(2)).sqrt()
}

fn unit_axis(dim: usize, axis: usize, sign: f64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[axis] = sign;
    v
}

impl CorpusSpec {
    pub fn new(name: impl Into<String>, shape: Shape, resolution: usize) -> Self {
        Self {
            name: name.into(),
            shape,
            resolution,
            extent: 1.0,
            dim: 2,
            noise: 0.0,
            seed: 0,
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.resolution as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(invalid(format!("dimension {} unsupported", self.dim)));
        }
        if self.resolution < 8 {
            return Err(invalid("resolution must be at least 8"));
        }
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(invalid("extent must be positive"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(invalid("noise must be nonnegative"));
        }
        match &self.shape {
            Shape::Halfplane { normal, a, b, .. } => {
                if normal.len() != self.dim || !(norm(normal) > 0.0) {
                    return Err(invalid("halfplane normal must be a nonzero vector of length dim"));
                }
                if !(a.is_finite() && b.is_finite()) {
                    return Err(invalid("halfplane values must be finite"));
                }
            }
            Shape::Disk { center, radius, .. } => {
                if center.len() != self.dim || !(*radius > 0.0) {
                    return Err(invalid("disk needs a center of length dim and a positive radius"));
                }
            }
            Shape::Polygon { sides, radius, .. } => {
                if self.dim != 2 || *sides < 3 || !(*radius > 0.0) {
                    return Err(invalid("polygon needs dim 2, at least 3 sides and a positive radius"));
                }
            }
            Shape::Voronoi { sites, .. } => {
                if *sites < 2 {
                    return Err(invalid("voronoi needs at least 2 sites"));
                }
            }
            Shape::Smooth { width, .. } => {
                if !(*width > 0.0) {
                    return Err(invalid("smooth width must be positive"));
                }
            }
            Shape::Checkerboard { period, .. } => {
                if !(*period > 0.0) {
                    return Err(invalid("checkerboard period must be positive"));
                }
            }
            Shape::ExtendedDisk { radius } => {
                if !(*radius > 0.0) {
                    return Err(invalid("disk radius must be positive"));
                }
            }
            Shape::Homogeneous | Shape::Logspiral => {}
        }
        Ok(())
    }

    /// Whether the function is bounded (finite everywhere).
    pub fn is_bounded(&self) -> bool {
        !matches!(self.shape, Shape::ExtendedDisk { .. })
    }

    fn sites(&self) -> Vec<Vec<f64>> {
        match &self.shape {
            Shape::Voronoi { sites, site_seed } => voronoi_sites(*sites, *site_seed, self.dim, self.extent),
            _ => Vec::new(),
        }
    }

    /// The analytic function at `p`, without noise.
    pub fn evaluate(&self, p: &[f64]) -> f64 {
        self.evaluate_with(p, &self.sites())
    }

    fn evaluate_with(&self, p: &[f64], sites: &[Vec<f64>]) -> f64 {
        match &self.shape {
            Shape::Halfplane { a, b, normal, offset } => {
                if dot(p, normal) / norm(normal) > *offset {
                    *a
                } else {
                    *b
                }
            }
            Shape::Disk { center, radius, inside, outside } => {
                if dist2(p, center) < radius * radius {
                    *inside
                } else {
                    *outside
                }
            }
            Shape::Polygon { sides, radius, rotation, inside, outside } => {
                let v = polygon_vertices(*sides, *radius, *rotation);
                let inside_all = (0..*sides).all(|k| {
                    let (a, b) = (v[k], v[(k + 1) % sides]);
                    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) > 0.0
                });
                if inside_all {
                    *inside
                } else {
                    *outside
                }
            }
            Shape::Voronoi { sites: count, .. } => {
                let k = nearest_site(p, sites);
                k as f64 / (*count - 1) as f64
            }
            Shape::Smooth { amplitude, width } => amplitude * (-dot(p, p) / (2.0 * width * width)).exp(),
            Shape::Homogeneous => {
                let r = norm(p);
                if r == 0.0 {
                    0.0
                } else {
                    p[0].abs() / r
                }
            }
            Shape::Logspiral => {
                let r = norm(p);
                if r == 0.0 {
                    0.0
                } else {
                    r.ln().sin()
                }
            }
            Shape::Checkerboard { period, low, high } => {
                let s: i64 = p.iter().map(|&c| (c / period).floor() as i64).sum();
                if s.rem_euclid(2) == 0 {
                    *low
                } else {
                    *high
                }
            }
            Shape::ExtendedDisk { radius } => {
                if dot(p, p) < radius * radius {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    /// Interface and junction geometry at `p`.
    pub fn local_truth(&self, p: &[f64]) -> LocalTruth {
        self.local_with(p, &self.sites())
    }

    fn local_with(&self, p: &[f64], sites: &[Vec<f64>]) -> LocalTruth {
        let none = LocalTruth {
            interface_distance: f64::INFINITY,
            junction_distance: f64::INFINITY,
            jump: None,
        };
        match &self.shape {
            Shape::Halfplane { a, b, normal, offset } => {
                let n = norm(normal);
                let unit: Vec<f64> = normal.iter().map(|c| c / n).collect();
                LocalTruth {
                    interface_distance: (dot(p, &unit) - offset).abs(),
                    junction_distance: f64::INFINITY,
                    jump: Some(JumpTruth { a: *a, b: *b, normal: unit }),
                }
            }
            Shape::Disk { center, radius, inside, outside } => {
                let d: Vec<f64> = p.iter().zip(center).map(|(x, c)| x - c).collect();
                let r = norm(&d);
                let inward = if r > 0.0 { d.iter().map(|c| -c / r).collect() } else { unit_axis(self.dim, 0, 1.0) };
                LocalTruth {
                    interface_distance: (r - radius).abs(),
                    junction_distance: f64::INFINITY,
                    jump: Some(JumpTruth { a: *inside, b: *outside, normal: inward }),
                }
            }
            Shape::ExtendedDisk { radius } => {
                let r = norm(p);
                let inward = if r > 0.0 { p.iter().map(|c| -c / r).collect() } else { unit_axis(self.dim, 0, 1.0) };
                LocalTruth {
                    interface_distance: (r - radius).abs(),
                    junction_distance: f64::INFINITY,
                    jump: Some(JumpTruth { a: f64::INFINITY, b: 0.0, normal: inward }),
                }
            }
            Shape::Polygon { sides, radius, rotation, inside, outside } => {
                let v = polygon_vertices(*sides, *radius, *rotation);
                let (mut best, mut edge) = (f64::INFINITY, 0);
                for k in 0..*sides {
                    let d = segment_distance(p, &v[k], &v[(k + 1) % sides]);
                    if d < best {
                        best = d;
                        edge = k;
                    }
                }
                let junction = v
                    .iter()
                    .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min);
                let (a, b) = (v[edge], v[(edge + 1) % sides]);
                let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                // counter-clockwise vertices: the left normal points inside
                let inward = vec![-(b[1] - a[1]) / len, (b[0] - a[0]) / len];
                LocalTruth {
                    interface_distance: best,
                    junction_distance: junction,
                    jump: Some(JumpTruth { a: *inside, b: *outside, normal: inward }),
                }
            }
            Shape::Voronoi { sites: count, .. } => {
                let own = nearest_site(p, sites);
                let s1 = &sites[own];
                let mut bis: Vec<(f64, usize)> = sites
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != own)
                    .map(|(j, s)| ((dist2(p, s) - dist2(p, s1)) / (2.0 * dist2(s, s1).sqrt()), j))
                    .collect();
                bis.sort_by(|x, y| x.0.total_cmp(&y.0));
                let (d, j) = bis[0];
                let second = bis.get(1).map_or(f64::INFINITY, |b| b.0);
                let value = |k: usize| k as f64 / (*count - 1) as f64;
                let sj = &sites[j];
                let dir: Vec<f64> = s1.iter().zip(sj).map(|(a, b)| a - b).collect();
                let len = norm(&dir);
                LocalTruth {
                    interface_distance: d,
                    junction_distance: second,
                    jump: Some(JumpTruth {
                        a: value(own),
                        b: value(j),
                        normal: dir.iter().map(|c| c / len).collect(),
                    }),
                }
            }
            Shape::Checkerboard { period, low, high } => {
                let mut dists: Vec<(f64, usize)> = p
                    .iter()
                    .enumerate()
                    .map(|(a, &c)| {
                        let t = c / period;
                        ((t - t.round()).abs() * period, a)
                    })
                    .collect();
                dists.sort_by(|x, y| x.0.total_cmp(&y.0));
                let (d, axis) = dists[0];
                let second = dists.get(1).map_or(f64::INFINITY, |x| x.0);
                // the side with the higher value
                let mut probe = p.to_vec();
                probe[axis] += d + 0.25 * period;
                let up = self.evaluate_with(&probe, sites) == *high;
                let (a, b) = (*high, *low);
                let sign = if up { 1.0 } else { -1.0 };
                LocalTruth {
                    interface_distance: d,
                    junction_distance: second,
                    jump: Some(JumpTruth { a, b, normal: unit_axis(self.dim, axis, sign) }),
                }
            }
            Shape::Homogeneous | Shape::Logspiral => LocalTruth {
                junction_distance: norm(p),
                ..none
            },
            Shape::Smooth { .. } => none,
        }
    }

    pub fn special_points(&self) -> Vec<SpecialPoint> {
        let origin = vec![0.0; self.dim];
        match self.shape {
            Shape::Homogeneous => vec![SpecialPoint { point: origin, label: TruthLabel::SingularNonJump }],
            Shape::Logspiral => vec![SpecialPoint { point: origin, label: TruthLabel::NonConvergent }],
            _ => Vec::new(),
        }
    }
}

fn nearest_site(p: &[f64], sites: &[Vec<f64>]) -> usize {
    let mut best = 0;
    for (k, s) in sites.iter().enumerate() {
        if dist2(p, s) < dist2(p, &sites[best]) {
            best = k;
        }
    }
    best
}

/// Samples `spec` at cell centers and derives the ground truth.
pub fn generate(spec: &CorpusSpec) -> Result<(GridFunction, GroundTruth)> {
    spec.validate()?;
    let sites = spec.sites();
    let mut u = GridFunction::centered_box(spec.dim, spec.resolution, spec.extent, |p| spec.evaluate_with(p, &sites))?;
    if spec.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let noisy: Vec<f64> = u
            .values()
            .iter()
            .map(|&v| {
                let e: f64 = rng.gen_range(-spec.noise..=spec.noise);
                if v.is_finite() {
                    v + e
                } else {
                    v
                }
            })
            .collect();
        u = GridFunction::new(u.shape().to_vec(), u.spacing(), u.origin().to_vec(), noisy)?;
    }
    let h = u.spacing();
    let (band, margin) = (0.5 * h, 3.0 * h);
    let mut labels = Vec::with_capacity(u.len());
    let mut distances = Vec::with_capacity(u.len());
    let mut jumps = Vec::new();
    for i in 0..u.len() {
        let local = spec.local_with(&u.point(i), &sites);
        let label = if local.junction_distance <= margin {
            TruthLabel::Unspecified
        } else if local.interface_distance <= band {
            TruthLabel::Jump
        } else if local.interface_distance > margin {
            TruthLabel::ApproxContinuous
        } else {
            TruthLabel::Unspecified
        };
        if label == TruthLabel::Jump {
            if let Some(j) = local.jump.clone() {
                jumps.push((i, j));
            }
        }
        labels.push(label);
        distances.push(local.interface_distance);
    }
    Ok((
        u,
        GroundTruth {
            labels,
            interface_distance: distances,
            jumps,
            special: spec.special_points(),
            band,
            margin,
        },
    ))
}

/// One spec per kind at the given resolution.
pub fn corpus_at(resolution: usize) -> Vec<CorpusSpec> {
    let shapes = vec![
        Shape::Halfplane { a: 1.0, b: 0.0, normal: vec![1.0, 0.0], offset: 0.0 },
        Shape::Disk { center: vec![0.0, 0.0], radius: 0.3, inside: 2.0, outside: 0.0 },
        Shape::Polygon { sides: 5, radius: 0.5, rotation: 0.1, inside: 1.0, outside: 0.0 },
        Shape::Voronoi { sites: 6, site_seed: 7 },
        Shape::Smooth { amplitude: 1.0, width: 0.35 },
        Shape::Homogeneous,
        Shape::Logspiral,
        Shape::Checkerboard { period: 0.25, low: 0.0, high: 1.0 },
        Shape::ExtendedDisk { radius: 0.3 },
    ];
    shapes
        .into_iter()
        .map(|s| CorpusSpec::new(format!("{}_{resolution}", s.kind()), s, resolution))
        .collect()
}

/// The fixed corpus: every kind at resolutions 128 and 256.
pub fn list_corpus() -> Vec<CorpusSpec> {
    let mut out = corpus_at(128);
    out.extend(corpus_at(256));
    out
}

/// Looks a corpus entry up by name.
pub fn corpus_spec(name: &str) -> Option<CorpusSpec> {
    list_corpus().into_iter().find(|s| s.name == name)
}
