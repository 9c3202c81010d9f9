//! Extended-valued functions through the bounded transform `Φ = arctan`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::classify::{classify_point, ClassifyConfig, PointClass};
use crate::error::{Error, Result};
use crate::grid::{BlowupSample, GridFunction};

/// `arctan`, extended by its limits `±π/2` at `±∞`. `NaN` passes through.
pub fn phi(v: f64) -> f64 {
    if v == f64::INFINITY {
        FRAC_PI_2
    } else if v == f64::NEG_INFINITY {
        -FRAC_PI_2
    } else {
        v.atan()
    }
}

/// Inverse of [`phi`] on `[-π/2, π/2]`, returning `±∞` at the endpoints.
pub fn phi_inv(t: f64) -> f64 {
    if t >= FRAC_PI_2 {
        f64::INFINITY
    } else if t <= -FRAC_PI_2 {
        f64::NEG_INFINITY
    } else {
        t.tan()
    }
}

/// `Φ ∘ u`.
pub fn phi_apply(u: &GridFunction) -> GridFunction {
    u.map(phi)
}

/// Fraction of lattice nodes where `|f - g| > ε`.
pub fn measure_distance(f: &BlowupSample, g: &BlowupSample, eps: f64) -> Result<f64> {
    if !f.lattice.same_as(&g.lattice) {
        return Err(Error::LatticeMismatch);
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParams("eps must be positive".into()));
    }
    let far = f.values.iter().zip(&g.values).filter(|(a, b)| (*a - *b).abs() > eps).count();
    Ok(far as f64 / f.len() as f64)
}

/// Tolerances rescaled to the range `π` of `Φ`'s image.
pub fn extended_config(cfg: &ClassifyConfig) -> ClassifyConfig {
    ClassifyConfig {
        value_range: Some(PI),
        ..cfg.clone()
    }
}

/// Classifies `x` for the extended-valued `u` by classifying `Φ ∘ u`.
pub fn classify_extended(u: &GridFunction, x: &[f64], cfg: &ClassifyConfig) -> Result<PointClass> {
    classify_point(&phi_apply(u), x, &extended_config(cfg))
}
