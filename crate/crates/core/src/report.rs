//! Serialized views of classification maps.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::classify::PointClass;
use crate::extended::phi_inv;
use crate::grid::GridFunction;

pub const SCHEMA_VERSION: u32 = 1;

/// Number of points per class name, including zero counts.
pub fn class_counts(classes: &[PointClass]) -> BTreeMap<&'static str, usize> {
    let mut counts: BTreeMap<&'static str, usize> = [
        "approx_continuous",
        "jump",
        "singular_non_jump",
        "non_convergent",
        "insufficient",
    ]
    .into_iter()
    .map(|k| (k, 0))
    .collect();
    for c in classes {
        *counts.entry(c.name()).or_default() += 1;
    }
    counts
}

fn finite_or_string(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

/// One record per non-continuous point, in grid order.
///
/// With `phi_space` set, fitted values are reported in `Φ`-space and the
/// inverse-mapped `a`, `b` are added.
pub fn point_records(u: &GridFunction, classes: &[PointClass], phi_space: bool) -> Vec<Value> {
    classes
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_continuous())
        .map(|(i, c)| {
            let mut rec = json!({
                "index": i,
                "point": u.point(i),
                "class": c.name(),
            });
            match c {
                PointClass::Jump(fit) => {
                    rec["a"] = json!(fit.a);
                    rec["b"] = json!(fit.b);
                    rec["normal"] = json!(fit.normal);
                    rec["residual"] = json!(fit.residual);
                    if phi_space {
                        rec["a_value"] = finite_or_string(phi_inv(fit.a));
                        rec["b_value"] = finite_or_string(phi_inv(fit.b));
                    }
                }
                PointClass::SingularNonJump { osc_of_limit } => {
                    rec["osc_of_limit"] = json!(osc_of_limit);
                }
                _ => {}
            }
            rec
        })
        .collect()
}

/// `(width, height)` of the raster: the last axis runs along rows.
pub fn raster_size(shape: &[usize]) -> (usize, usize) {
    match shape.len() {
        1 => (shape[0], 1),
        _ => {
            let w = shape[shape.len() - 1];
            (w, shape.iter().product::<usize>() / w)
        }
    }
}

/// Binary PGM (P5) of class codes in grid order.
pub fn class_pgm(shape: &[usize], classes: &[PointClass]) -> Vec<u8> {
    let (w, h) = raster_size(shape);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(classes.iter().map(|c| c.code()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::JumpFit;

    #[test]
    fn pgm_layout() {
        let classes = vec![
            PointClass::ApproxContinuous { value: 0.0 },
            PointClass::NonConvergent,
            PointClass::Insufficient,
            PointClass::SingularNonJump { osc_of_limit: 0.3 },
            PointClass::ApproxContinuous { value: 1.0 },
            PointClass::ApproxContinuous { value: 1.0 },
        ];
        let pgm = class_pgm(&[2, 3], &classes);
        assert!(pgm.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&pgm[pgm.len() - 6..], &[0, 192, 255, 128, 0, 0]);
        assert_eq!(raster_size(&[4, 5, 6]), (6, 20));
    }

    #[test]
    fn records_skip_continuous_points() {
        let u = GridFunction::new(vec![2], 1.0, vec![0.0], vec![0.0, 1.0]).unwrap();
        let fit = JumpFit {
            a: std::f64::consts::FRAC_PI_2,
            b: 0.0,
            normal: vec![1.0],
            residual: 0.0,
        };
        let classes = vec![PointClass::ApproxContinuous { value: 0.0 }, PointClass::Jump(fit)];
        let recs = point_records(&u, &classes, true);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0]["index"], 1);
        assert_eq!(recs[0]["a_value"], "inf");
        assert_eq!(class_counts(&classes)["jump"], 1);
        assert_eq!(class_counts(&classes)["non_convergent"], 0);
    }
}
