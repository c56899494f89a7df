use osmp::sync::*;
use osmp::encoder::{Encoder, EncoderConfig};
use osmp::latent::{HopfParams, OMEGA_EPS};
use osmp::policy::Policy;
use std::f64::consts::PI;
use osmp::Error;

fn identity_policy(omega: f64) -> Policy {
    let enc = Encoder::init_identity(EncoderConfig::new(2, 2), 0).unwrap();
    Policy::new(enc, HopfParams::constant(10.0, 10.0, 0.5, omega).unwrap()).unwrap()
}

fn on_cycle(phi: f64) -> Vec<f64> {
    vec![0.5 * phi.cos(), 0.5 * phi.sin()]
}

#[test]
fn phase_examples() {
    let p = identity_policy(1.0);
    assert!((phase(&p, &[0.0, 1.0], 0.0).unwrap() - PI / 2.0).abs() < 1e-15);
    assert_eq!(phase(&p, &[-1.0, 0.0], 0.0).unwrap(), -PI);
    assert!((phase(&p, &[3.0, 3.0], 0.0).unwrap() - phase(&p, &[0.1, 0.1], 0.0).unwrap()).abs() < 1e-15);
    assert!(matches!(phase(&p, &[0.0, 0.0], 0.0), Err(Error::DegenerateOrigin { .. })));
}

#[test]
fn synchronized_omega_examples() {
    let ps = || vec![identity_policy(1.0), identity_policy(1.0)];
    let g = SyncGroup::in_phase(ps(), 0.5).unwrap();
    assert_eq!(synchronized_omega(0, &[0.3, 0.3], &g, 1.0), 1.0);
    let ph = [PI / 2.0, 0.0];
    assert!((synchronized_omega(0, &ph, &g, 1.0) - 0.5).abs() < 1e-15);
    assert!((synchronized_omega(1, &ph, &g, 1.0) - 1.5).abs() < 1e-15);
    let g3 = SyncGroup::in_phase(vec![identity_policy(1.0); 3], 0.5).unwrap();
    let ph3 = [0.0, 2.0 * PI / 3.0, -2.0 * PI / 3.0];
    for i in 0..3 {
        assert!((synchronized_omega(i, &ph3, &g3, 1.0) - 1.0).abs() < 1e-12);
    }
    let strong = SyncGroup::in_phase(ps(), 5.0).unwrap();
    assert_eq!(synchronized_omega(0, &ph, &strong, 1.0), OMEGA_EPS);
}

#[test]
fn offsets_are_validated() {
    let ps = || vec![identity_policy(1.0), identity_policy(1.0)];
    assert!(SyncGroup::new(ps(), vec![vec![0.0, 0.5], vec![-0.5, 0.0]], 0.5).is_err());
    assert!(SyncGroup::new(ps(), vec![vec![0.1, 0.0], vec![0.0, 0.0]], 0.5).is_err());
    assert!(SyncGroup::new(ps(), vec![vec![0.0, PI], vec![PI, 0.0]], 0.5).is_err());
    assert!(SyncGroup::new(ps(), vec![vec![0.0, -PI], vec![-PI, 0.0]], 0.5).is_ok());
    assert!(SyncGroup::in_phase(ps(), -0.1).is_err());
    let enc = Encoder::init_identity(EncoderConfig::new(3, 2), 0).unwrap();
    let p3 = Policy::new(enc, HopfParams::constant(1.0, 1.0, 1.0, 1.0).unwrap()).unwrap();
    assert!(SyncGroup::in_phase(vec![identity_policy(1.0), p3], 0.5).is_err());
}

#[test]
fn coupling_closes_quarter_turn_gap() {
    let omega = PI;
    let g = SyncGroup::in_phase(vec![identity_policy(omega); 2], 0.5).unwrap();
    let dt = 1e-3;
    let steps = 20_000;
    let tr = simulate_group(&g, &[on_cycle(PI / 2.0), on_cycle(0.0)], &[0.0, 0.0], dt, steps).unwrap();
    assert!((tr.errors[0][0] - 90.0).abs() < 1e-9);
    let within = (2.0 / dt) as usize * 10;
    assert!(tr.max_abs_error(within) < 1.0);
    assert!(tr.errors[within..].iter().all(|e| e[0].abs() < 1.0));
    assert!(!tr.diverged.iter().any(|d| *d));
    assert_eq!(tr.trajectories[0].len(), steps + 1);
}

#[test]
fn uncoupled_gap_is_constant() {
    let g = SyncGroup::in_phase(vec![identity_policy(PI); 2], 0.0).unwrap();
    let tr = simulate_group(&g, &[on_cycle(1.0), on_cycle(0.2)], &[0.0, 0.0], 1e-3, 5000).unwrap();
    let e0 = tr.errors[0][0];
    assert!(tr.errors.iter().all(|e| (e[0] - e0).abs() < 1e-6));
}

#[test]
fn phase_file_layout() {
    let g = SyncGroup::in_phase(vec![identity_policy(PI); 3], 0.5).unwrap();
    let tr = simulate_group(&g, &[on_cycle(0.0), on_cycle(1.0), on_cycle(2.0)], &[0.0; 3], 1e-2, 4).unwrap();
    let csv = tr.phase_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], "t,phi_1,phi_2,phi_3,err_deg_1_2,err_deg_1_3,err_deg_2_3");
    assert!(tr.errors.iter().flatten().all(|e| (-180.0..180.0).contains(e)));
}

#[test]
fn coupling_leaves_the_path_untouched() {
    let starts = [vec![0.8, 0.1], vec![-0.2, 0.3]];
    let coupled = SyncGroup::in_phase(vec![identity_policy(PI); 2], 0.5).unwrap();
    let free = SyncGroup::in_phase(vec![identity_policy(PI); 2], 0.0).unwrap();
    let a = simulate_group(&coupled, &starts, &[0.0, 0.0], 1e-4, 20_000).unwrap();
    let b = simulate_group(&free, &starts, &[0.0, 0.0], 1e-4, 20_000).unwrap();
    for i in 0..2 {
        for (p, q) in a.trajectories[i].x.iter().zip(&b.trajectories[i].x) {
            assert!((p[0].hypot(p[1]) - q[0].hypot(q[1])).abs() < 1e-3);
        }
    }
}

#[test]
fn settling_is_monotone_per_period() {
    let g = SyncGroup::in_phase(vec![identity_policy(PI); 3], 0.2).unwrap();
    let dt = 1e-3;
    let per = 2000;
    let starts = [on_cycle(0.0), on_cycle(1.0), on_cycle(-1.2)];
    let tr = simulate_group(&g, &starts, &[0.0; 3], dt, 10 * per).unwrap();
    let samples: Vec<f64> = (0..=10).map(|k| tr.max_abs_error(k * per)).collect();
    assert!(samples.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{samples:?}");
    assert!(samples[10] < 0.1 * samples[0]);
}

#[test]
fn pairs_cover_every_unordered_pair() {
    let g = SyncGroup::in_phase(vec![identity_policy(PI); 4], 0.5).unwrap();
    let starts: Vec<Vec<f64>> = (0..4).map(|i| on_cycle(0.3 * i as f64)).collect();
    let tr = simulate_group(&g, &starts, &[0.0; 4], 1e-3, 10).unwrap();
    assert_eq!(tr.pairs, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    assert!((tr.errors[0][0] - (-0.3f64).to_degrees()).abs() < 1e-9);
}
