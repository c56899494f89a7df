use std::f64::consts::PI;

use osmp::encoder::{Encoder, EncoderConfig};
use osmp::eval::{directed_hausdorff, dtw, icp_med, traj_rmse};
use osmp::latent::{cart_to_polar, hopf_cartesian, polar_to_cart, transverse_lyapunov, HopfParams};
use osmp::wrap_angle;
use proptest::prelude::*;

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

fn sequence(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(point(2), 1..max)
}

fn rigid(points: &[Vec<f64>], theta: f64, shift: [f64; 2]) -> Vec<Vec<f64>> {
    let (s, c) = theta.sin_cos();
    points.iter().map(|p| vec![c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]]).collect()
}

proptest! {
    #[test]
    fn rmse_is_a_symmetric_nonnegative_distance(pairs in prop::collection::vec((point(3), point(3)), 1..20)) {
        let a: Vec<Vec<f64>> = pairs.iter().map(|p| p.0.clone()).collect();
        let b: Vec<Vec<f64>> = pairs.iter().map(|p| p.1.clone()).collect();
        let ab = traj_rmse(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, traj_rmse(&b, &a).unwrap());
        prop_assert_eq!(traj_rmse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn dtw_path_is_pinned_monotone_and_costed(a in sequence(8), b in sequence(8)) {
        let (cost, path) = dtw(&a, &b).unwrap();
        prop_assert_eq!(path[0], (0, 0));
        prop_assert_eq!(*path.last().unwrap(), (a.len() - 1, b.len() - 1));
        for w in path.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            prop_assert!(di <= 1 && dj <= 1 && di + dj >= 1);
        }
        let along: f64 = path.iter().map(|&(i, j)| (a[i][0] - b[j][0]).hypot(a[i][1] - b[j][1])).sum();
        prop_assert!((along - cost).abs() <= 1e-9 * (1.0 + cost));
        prop_assert!((cost - dtw(&b, &a).unwrap().0).abs() <= 1e-9 * (1.0 + cost));
        prop_assert_eq!(dtw(&a, &a).unwrap().0, 0.0);
    }

    #[test]
    fn dtw_never_exceeds_lockstep_alignment(pairs in prop::collection::vec((point(2), point(2)), 1..12)) {
        let a: Vec<Vec<f64>> = pairs.iter().map(|p| p.0.clone()).collect();
        let b: Vec<Vec<f64>> = pairs.iter().map(|p| p.1.clone()).collect();
        let lockstep: f64 = a.iter().zip(&b).map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1])).sum();
        prop_assert!(dtw(&a, &b).unwrap().0 <= lockstep + 1e-12);
    }

    #[test]
    fn hausdorff_vanishes_on_subsets(b in sequence(12), keep in prop::collection::vec(any::<prop::sample::Index>(), 1..6)) {
        let a: Vec<Vec<f64>> = keep.iter().map(|k| b[k.index(b.len())].clone()).collect();
        prop_assert_eq!(directed_hausdorff(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn hausdorff_is_rigid_invariant(a in sequence(10), b in sequence(10), theta in -PI..PI, dx in -1.0..1.0f64, dy in -1.0..1.0f64) {
        let h = directed_hausdorff(&a, &b).unwrap();
        let moved = directed_hausdorff(&rigid(&a, theta, [dx, dy]), &rigid(&b, theta, [dx, dy])).unwrap();
        prop_assert!((h - moved).abs() < 1e-9);
    }

    #[test]
    fn icp_undoes_rigid_motion(seed in 0u64..1000, theta in -PI..PI, dx in -1.0..1.0f64, dy in -1.0..1.0f64) {
        let k = 24;
        let wobble = 0.2 + 0.1 * (seed % 7) as f64 / 7.0;
        let desired: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let s = 2.0 * PI * i as f64 / k as f64;
                let r = 1.0 + wobble * (3.0 * s).cos();
                vec![r * s.cos(), 0.6 * r * s.sin()]
            })
            .collect();
        let actual = rigid(&desired, theta, [dx, dy]);
        prop_assert!(icp_med(&actual, &desired).unwrap() < 1e-6);
    }

    #[test]
    fn encoder_round_trips(seed in 0u64..500, n in 2usize..6, x in point(5), z in 0.0..1.0f64) {
        let mut cfg = EncoderConfig::new(n, 4).conditioned();
        cfg.rffn_hidden = 16;
        let mut enc = Encoder::init_identity(cfg, seed).unwrap();
        enc.randomize(0.2, seed + 1);
        let x = &x[..n];
        let y = enc.encode(x, z).unwrap();
        let back = enc.decode(&y, z).unwrap();
        for (u, v) in x.iter().zip(&back) {
            prop_assert!((u - v).abs() < 1e-10);
        }
        let (_, jac) = enc.encode_with_jacobian(x, z).unwrap();
        prop_assert!(jac.determinant() > 0.0);
    }

    #[test]
    fn lyapunov_decreases_along_the_flow(y in point(4), alpha in 0.1..5.0f64, beta in 0.1..5.0f64, radius in 0.2..2.0f64) {
        let p = HopfParams::constant(alpha, beta, radius, 1.3).unwrap();
        let v = transverse_lyapunov(&y, &p);
        prop_assume!(v > 1e-6);
        let dt = 1e-6;
        let f = hopf_cartesian(&y, &p).unwrap();
        let next: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a + dt * b).collect();
        prop_assert!(transverse_lyapunov(&next, &p) < v);
    }

    #[test]
    fn polar_coordinates_round_trip(y in point(4)) {
        prop_assume!(y[0].hypot(y[1]) > 1e-6);
        let back = polar_to_cart(&cart_to_polar(&y));
        for (a, b) in y.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn wrapped_angles_stay_in_range(a in -100.0..100.0f64) {
        let w = wrap_angle(a);
        prop_assert!((-PI..PI).contains(&w));
        let turns = (a - w) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }
}

#[test]
fn hausdorff_is_directed() {
    let a = vec![vec![0.0, 0.0]];
    let b = vec![vec![0.0, 0.0], vec![3.0, 4.0]];
    assert_eq!(directed_hausdorff(&a, &b).unwrap(), 0.0);
    assert_eq!(directed_hausdorff(&b, &a).unwrap(), 5.0);
}
