use std::sync::Arc;

use jumpset::classify::jump_residual;
use jumpset::decompose::{cone_witness, graph_slope};
use jumpset::oscillation::weighted_osc;
use jumpset::*;
use proptest::prelude::*;

fn lattice(m: usize) -> Arc<UnitBallLattice> {
    UnitBallLattice::shared(2, m).unwrap()
}

/// Values on a 1/1024 grid in [-8, 8]: sums and differences stay exact.
fn dyadic_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-8192i32..=8192).prop_map(|k| k as f64 / 1024.0), n)
}

fn sample_of(values: Vec<f64>) -> BlowupSample {
    let lat = lattice(9);
    let mut s = BlowupSample::from_fn(lat, |_| 0.0);
    let n = s.len();
    s.values = values.into_iter().cycle().take(n).collect();
    s
}

fn mean_abs(v: &[f64], c: f64) -> f64 {
    v.iter().map(|x| (x - c).abs()).sum::<f64>() / v.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn osc_translation_is_exact(v in dyadic_values(40), c in -64i32..64) {
        let shifted: Vec<f64> = v.iter().map(|x| x + c as f64).collect();
        let a = oscillation::osc_stats(&v).unwrap();
        let b = oscillation::osc_stats(&shifted).unwrap();
        prop_assert_eq!(a.osc(), b.osc());
        prop_assert_eq!(a.median + c as f64, b.median);
    }

    #[test]
    fn osc_is_absolutely_homogeneous(v in prop::collection::vec(-1e3f64..1e3, 1..60), lambda in -50.0f64..50.0) {
        let scaled: Vec<f64> = v.iter().map(|x| lambda * x).collect();
        let a = oscillation::osc_stats(&v).unwrap().osc();
        let b = oscillation::osc_stats(&scaled).unwrap().osc();
        prop_assert!((b - lambda.abs() * a).abs() <= 1e-12 * (lambda.abs() * a).max(1e-300));
    }

    #[test]
    fn median_beats_every_probe(v in dyadic_values(37), probes in dyadic_values(100)) {
        let o = oscillation::osc_stats(&v).unwrap().osc();
        for c in probes {
            prop_assert!(mean_abs(&v, c) >= o);
        }
    }

    #[test]
    fn weighted_median_beats_every_probe(
        vw in prop::collection::vec((-10.0f64..10.0, 0.01f64..5.0), 1..40),
        probes in prop::collection::vec(-20.0f64..20.0, 50),
    ) {
        let (v, w): (Vec<f64>, Vec<f64>) = vw.into_iter().unzip();
        let o = weighted_osc(&v, &w).unwrap();
        let total: f64 = w.iter().sum();
        for c in probes {
            let obj = v.iter().zip(&w).map(|(x, w)| w * (x - c).abs()).sum::<f64>() / total;
            prop_assert!(obj >= o * (1.0 - 1e-12));
        }
    }

    #[test]
    fn nested_regions_satisfy_monotonicity(v in dyadic_values(69), keep in prop::collection::vec(any::<bool>(), 69)) {
        let s = sample_of(v);
        let inner: Vec<usize> = (0..s.len()).filter(|&i| keep[i % keep.len()]).collect();
        prop_assume!(!inner.is_empty());
        let outer = osc(&s, &Region::All).unwrap();
        let sub = osc(&s, &Region::Nodes(inner.clone())).unwrap();
        // compare the totals so the check needs no division
        prop_assert!(sub * inner.len() as f64 <= outer * s.len() as f64);
    }

    #[test]
    fn zero_oscillation_iff_constant(v in prop::collection::vec(-3i32..3, 1..20)) {
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        let o = oscillation::osc_stats(&v).unwrap().osc();
        prop_assert_eq!(o == 0.0, v.iter().all(|&x| x == v[0]));
    }

    #[test]
    fn l1_distance_is_a_pseudometric(f in dyadic_values(69), g in dyadic_values(69), h in dyadic_values(69)) {
        let (f, g, h) = (sample_of(f), sample_of(g), sample_of(h));
        let fg = l1_distance(&f, &g).unwrap();
        prop_assert_eq!(fg, l1_distance(&g, &f).unwrap());
        prop_assert_eq!(l1_distance(&f, &f).unwrap(), 0.0);
        prop_assert!(l1_distance(&f, &h).unwrap() <= fg + l1_distance(&g, &h).unwrap());
    }

    #[test]
    fn phi_is_strictly_monotone(a in -1e6f64..1e6, d in 1e-3f64..1e3) {
        prop_assert!(phi(a) < phi(a + d));
    }

    #[test]
    fn phi_round_trips(v in -1e6f64..1e6) {
        prop_assert!((phi_inv(phi(v)) - v).abs() <= 1e-12 * v.abs().max(1.0) * v.abs().max(1.0));
    }

    #[test]
    fn measure_distance_is_monotone_and_chebyshev(f in dyadic_values(69), g in dyadic_values(69), e1 in 0.01f64..4.0, e2 in 0.01f64..4.0) {
        let (f, g) = (sample_of(f), sample_of(g));
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let m_lo = measure_distance(&f, &g, lo).unwrap();
        prop_assert!(measure_distance(&f, &g, hi).unwrap() <= m_lo);
        prop_assert!(m_lo <= l1_distance(&f, &g).unwrap() / lo);
    }

    #[test]
    fn jump_fit_medians_are_optimal(
        theta in 0.0f64..std::f64::consts::TAU,
        offset in -0.3f64..0.3,
        noise in dyadic_values(50),
        probes in prop::collection::vec(-3.0f64..3.0, 50),
    ) {
        let lat = lattice(17);
        let nu = [theta.cos(), theta.sin()];
        let mut v = BlowupSample::from_fn(lat.clone(), |y| if y[0] * nu[0] + y[1] * nu[1] > offset { 1.0 } else { -1.0 });
        for (k, x) in v.values.iter_mut().enumerate() {
            *x += 0.05 * noise[k % noise.len()];
        }
        let fit = fit_jump(&v, &ClassifyConfig::default()).unwrap();
        let sides: Vec<f64> = lat.nodes().map(|y| y[0] * fit.normal[0] + y[1] * fit.normal[1]).collect();
        let half = |keep_pos: bool, c: f64| -> f64 {
            sides.iter().zip(&v.values)
                .filter(|(s, _)| if keep_pos { **s > 1e-12 } else { **s < -1e-12 })
                .map(|(_, x)| (x - c).abs())
                .sum()
        };
        let (best_a, best_b) = (half(true, fit.a), half(false, fit.b));
        for c in probes {
            // even halves have a flat optimum, so allow summation rounding
            prop_assert!(half(true, c) >= best_a * (1.0 - 1e-12));
            prop_assert!(half(false, c) >= best_b * (1.0 - 1e-12));
        }
        let again = jump_residual(&v, &fit.normal).unwrap();
        prop_assert_eq!(again.residual, fit.residual);
    }

    #[test]
    fn cone_witness_lies_in_the_cone(
        cx in -0.6f64..0.6, cy in -0.6f64..0.6, rho in 0.05f64..0.4,
        dx in -0.3f64..0.3, dy in -0.3f64..0.3, r0 in 0.05f64..0.5,
    ) {
        let ball = match Ball::new(vec![cx, cy], rho) { Ok(b) => b, Err(_) => return Ok(()) };
        let cone = match cone_from_params(&ball, 0.5, r0, 2) { Ok(c) => c, Err(_) => return Ok(()) };
        let d = [dx, dy];
        prop_assert_eq!(in_cone(&d, &cone), cone_witness(&d, &cone).is_some());
        if let Some(r) = cone_witness(&d, &cone) {
            prop_assert!(r > 0.0 && r <= r0);
            let dist = ((dx / r - cx).powi(2) + (dy / r - cy).powi(2)).sqrt();
            prop_assert!(dist <= cone.eps + 1e-12);
        }
        let s = cone.sin_half_aperture;
        prop_assert!(((1.0 - s * s).sqrt() / s - cone.lipschitz).abs() <= 1e-12 * cone.lipschitz);
    }

    #[test]
    fn cone_violations_scale_with_points(
        pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..25),
        k in -3i32..4,
    ) {
        let ball = Ball::new(vec![0.0, 0.5], 0.25).unwrap();
        let lambda = 2f64.powi(k);
        let a = cone_from_params(&ball, 0.5, 0.5, 2).unwrap();
        let b = cone_from_params(&ball, 0.5, 0.5 * lambda, 2).unwrap();
        let p: Vec<Vec<f64>> = pts.iter().map(|&(x, y)| vec![x, y]).collect();
        let q: Vec<Vec<f64>> = p.iter().map(|v| v.iter().map(|c| c * lambda).collect()).collect();
        let va: Vec<(usize, usize)> = verify_cone_property(&p, &a, 0.01).iter().map(|v| (v.i, v.j)).collect();
        let vb: Vec<(usize, usize)> = verify_cone_property(&q, &b, 0.01 * lambda).iter().map(|v| (v.i, v.j)).collect();
        prop_assert_eq!(va, vb);
    }

    #[test]
    fn passing_cells_are_graphs(pts in prop::collection::vec((-0.2f64..0.2, -0.2f64..0.2), 1..40)) {
        let ball = Ball::new(vec![0.3, 0.4], 0.2).unwrap();
        let cone = cone_from_params(&ball, 0.5, 0.25, 2).unwrap();
        let p: Vec<Vec<f64>> = pts.iter().map(|&(x, y)| vec![x, y]).collect();
        let report = cover_with_graphs(&p, &cone, None);
        let mut seen: Vec<usize> = report.cells.iter().flat_map(|c| c.members.iter().copied()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..p.len()).collect::<Vec<_>>());
        for cell in report.cells.iter().filter(|c| c.pass) {
            for &i in &cell.members {
                for &j in &cell.members {
                    if i != j {
                        let d: Vec<f64> = p[j].iter().zip(&p[i]).map(|(a, b)| a - b).collect();
                        prop_assert!(graph_slope(&d, &cone.axis) <= cone.lipschitz);
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn classification_commutes_with_value_shifts(
        theta in 0.0f64..std::f64::consts::TAU,
        offset in -0.5f64..0.5,
        c in -16i32..16,
    ) {
        let h = 1.0 / 32.0;
        let nu = [theta.cos(), theta.sin()];
        let f = |p: &[f64]| if (p[0] * nu[0] + p[1] * nu[1]) / h > offset { 1.0 } else { 0.0 };
        let u = GridFunction::centered_box(2, 64, 1.0, f).unwrap();
        let v = u.map(|x| x + c as f64);
        let cfg = ClassifyConfig::default();
        for x in [[0.0, 0.0], [h, -h], [0.5, 0.0]] {
            let a = classify_point(&u, &x, &cfg).unwrap();
            let b = classify_point(&v, &x, &cfg).unwrap();
            prop_assert_eq!(a.name(), b.name());
            if let (PointClass::Jump(fa), PointClass::Jump(fb)) = (&a, &b) {
                prop_assert_eq!(&fa.normal, &fb.normal);
                prop_assert_eq!(fa.a + c as f64, fb.a);
                prop_assert_eq!(fa.b + c as f64, fb.b);
            }
        }
    }
}

#[test]
fn lattice_nodes_are_symmetric() {
    for (dim, m) in [(1, 33), (2, 33), (2, 65), (3, 17)] {
        let lat = UnitBallLattice::new(dim, m).unwrap();
        for i in 0..lat.len() {
            let j = lat.mirror(i).expect("mirror node");
            let (a, b) = (lat.node(i), lat.node(j));
            assert!(a.iter().zip(b).all(|(x, y)| *x == -*y));
        }
    }
}
