use osmp::data::*;
use osmp::Error;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

#[test]
fn ellipse_lies_on_its_curve() {
    let kind = OracleKind::Ellipse { a: 2.0, b: 1.0, center: [3.0, 0.0] };
    let ds = synth_oracle_raw(&kind, 200, 2.0, 0.0, 0).unwrap();
    for x in &ds.x {
        let e = ((x[0] - 3.0) / 2.0).powi(2) + (x[1] / 1.0).powi(2);
        assert!((e - 1.0).abs() < 1e-12);
    }
}

#[test]
fn contours_close() {
    for name in ["square", "star", "swim", "ellipse"] {
        let kind = OracleKind::from_name(name).unwrap();
        let ds = synth_oracle_raw(&kind, 101, kind.default_period(), 0.0, 0).unwrap();
        assert_eq!(ds.x[0], ds.x[100]);
    }
}

#[test]
fn swim_is_periodic() {
    let kind = OracleKind::from_name("swim").unwrap();
    for k in 0..20 {
        let t = k as f64 * 0.37;
        let (a, _) = kind.state(t, 4.0);
        let (b, _) = kind.state(t + 4.0, 4.0);
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-9);
        }
    }
}

#[test]
fn unknown_kind_rejected() {
    assert!(matches!(OracleKind::from_name("hexagon"), Err(Error::UnknownOracle(_))));
}

#[test]
fn velocities_integrate_back_to_start() {
    for name in ["ellipse", "square", "star", "swim"] {
        for profile in [SpeedProfile::Constant, SpeedProfile::Modulated { depth: 0.5 }] {
            let mut kind = OracleKind::from_name(name).unwrap();
            match &mut kind {
                OracleKind::Square { profile: p, .. } | OracleKind::Star { profile: p, .. } => *p = profile,
                _ => {}
            }
            let ds = synth_oracle_raw(&kind, 1001, kind.default_period(), 0.0, 0).unwrap();
            let mut pos = ds.x[0].clone();
            let mut length = 0.0;
            for k in 0..ds.len() - 1 {
                let dt = ds.t[k + 1] - ds.t[k];
                for i in 0..ds.dim() {
                    pos[i] += 0.5 * (ds.v[k][i] + ds.v[k + 1][i]) * dt;
                }
                length += dist(&ds.x[k], &ds.x[k + 1]);
            }
            let err = dist(&pos, &ds.x[0]);
            assert!(err < 0.01 * length, "{name}: {err} vs {length}");
        }
    }
}

#[test]
fn noise_is_seed_deterministic() {
    let kind = OracleKind::from_name("ellipse").unwrap();
    let a = synth_oracle(&kind, 50, 2.0, 0.01, 4).unwrap();
    let b = synth_oracle(&kind, 50, 2.0, 0.01, 4).unwrap();
    let c = synth_oracle(&kind, 50, 2.0, 0.01, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
