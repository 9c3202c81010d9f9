use jumpset::synth::{JumpTruth, Shape, TruthLabel};
use jumpset::*;

#[test]
fn every_entry_round_trips_through_gf1() {
    let dir = tempfile::tempdir().unwrap();
    for spec in list_corpus() {
        let (u, _) = generate(&spec).unwrap();
        let path = dir.path().join(format!("{}.gf1.json", spec.name));
        write_grid(&u, &path).unwrap();
        let back = read_grid(&path).unwrap();
        assert_eq!(back.shape(), u.shape());
        assert_eq!(back.spacing(), u.spacing());
        assert_eq!(back.origin(), u.origin());
        let same = back
            .values()
            .iter()
            .zip(u.values())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same, "{}", spec.name);
    }
}

#[test]
fn generation_is_deterministic_and_unsmoothed() {
    for spec in synth::corpus_at(128) {
        let (u, truth) = generate(&spec).unwrap();
        let (v, _) = generate(&spec).unwrap();
        assert!(u.values().iter().zip(v.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        for i in (0..u.len()).step_by(97) {
            let expected = spec.evaluate(&u.point(i));
            assert_eq!(u.values()[i].to_bits(), expected.to_bits(), "{} at {i}", spec.name);
        }
        assert_eq!(truth.labels.len(), u.len());
        let spec_back: CorpusSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec_back, spec);
    }
}

#[test]
fn smooth_truth_has_no_singular_points() {
    let (_, truth) = generate(&synth::corpus_spec("smooth_128").unwrap()).unwrap();
    assert!(truth.special.is_empty());
    assert!(truth.labels.iter().all(|l| *l == TruthLabel::ApproxContinuous));
}

#[test]
fn checkerboard_truth_covers_every_edge() {
    let spec = synth::corpus_spec("checkerboard_128").unwrap();
    let Shape::Checkerboard { period, .. } = spec.shape else { panic!("kind") };
    let (u, truth) = generate(&spec).unwrap();
    let h = u.spacing();
    for i in 0..u.len() {
        let p = u.point(i);
        let edge = p
            .iter()
            .map(|c| {
                let t = c / period;
                (t - t.round()).abs() * period
            })
            .fold(f64::INFINITY, f64::min);
        if edge <= 0.5 * h && truth.labels[i] != TruthLabel::Unspecified {
            assert_eq!(truth.labels[i], TruthLabel::Jump, "{p:?}");
        }
    }
}

#[test]
fn jump_truth_orientation_points_to_the_a_side() {
    let spec = synth::corpus_spec("disk_128").unwrap();
    let (u, truth) = generate(&spec).unwrap();
    let h = u.spacing();
    for &(i, ref jt) in truth.jumps.iter().take(50) {
        let JumpTruth { a, b, ref normal } = *jt;
        let p = u.point(i);
        let step = |s: f64| -> Vec<f64> { p.iter().zip(normal).map(|(x, n)| x + s * 3.0 * h * n).collect() };
        assert_eq!(spec.evaluate(&step(1.0)), a);
        assert_eq!(spec.evaluate(&step(-1.0)), b);
        let f = jt.flipped();
        assert_eq!((f.a, f.b), (b, a));
    }
}

#[test]
fn blowups_compose_up_to_interpolation_error() {
    // calibrated on the smooth entry: |u^{x,rs} - (u^{x,r})^{0,s}| <= C h / (r s)
    let (u, _) = generate(&synth::corpus_spec("smooth_128").unwrap()).unwrap();
    let h = u.spacing();
    let lat = UnitBallLattice::shared(2, 33).unwrap();
    let x = [0.1, -0.05];
    let (r, s) = (0.4, 0.25);
    let direct = blowup_sample(&u, &x, r * s, &lat).unwrap();
    let outer = GridFunction::from_fn(vec![129, 129], 2.0 / 128.0, vec![-1.0, -1.0], |y| {
        let p: Vec<f64> = y.iter().zip(&x).map(|(y, x)| x + r * y).collect();
        if u.contains_ball(&p, 0.0) {
            u.interpolate(&p)
        } else {
            f64::NAN
        }
    })
    .unwrap();
    let inner = blowup_sample(&outer, &[0.0, 0.0], s, &lat).unwrap();
    let d = l1_distance(&direct, &inner).unwrap();
    assert!(d <= 0.5 * u.value_range() * h / (r * s), "{d}");
}
