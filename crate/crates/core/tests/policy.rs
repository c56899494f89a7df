use osmp::policy::*;
use osmp::encoder::{Encoder, EncoderConfig};
use osmp::latent::{hopf_cartesian, AngularVelocityNet, HopfParams, OmegaMode};

fn identity_policy(n: usize) -> Policy {
    let enc = Encoder::init_identity(EncoderConfig::new(n, 2), 0).unwrap();
    Policy::new(enc, HopfParams::constant(1.0, 1.0, 1.0, 1.0).unwrap()).unwrap()
}

#[test]
fn identity_policy_is_hopf_field() {
    let p = identity_policy(3);
    let x = [0.4, -1.3, 0.2];
    let v = p.velocity(&x, 0.0, &ShapingState::default()).unwrap();
    let h = hopf_cartesian(&x, &p.hopf).unwrap();
    for i in 0..3 {
        assert!((v[i] - h[i]).abs() < 1e-5 * h[i].abs().max(1.0));
    }
}

#[test]
fn spatial_scale_shaping() {
    let p = identity_policy(2);
    let shape = ShapingState { s_f: 2.0, ..Default::default() };
    let x = [0.8, 1.4];
    let v = p.velocity(&x, 0.0, &shape).unwrap();
    let h = hopf_cartesian(&[0.4, 0.7], &p.hopf).unwrap();
    for i in 0..2 {
        assert!((v[i] - 2.0 * h[i]).abs() < 1e-5);
    }
}

#[test]
fn cycle_distance_examples() {
    assert_eq!(latent_cycle_distance(&[1.0, 0.0], 1.0), 0.0);
    assert_eq!(latent_cycle_distance(&[2.0, 0.0], 1.0), 1.0);
    assert!((latent_cycle_distance(&[1.0, 0.0, 1.0], 1.0) - 0.5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn gate_examples() {
    assert_eq!(angular_gate(0.1, 0.2, 0.3), 1.0);
    assert!((angular_gate(0.5, 0.2, 0.3) - (-0.5f64).exp()).abs() < 1e-15);
    assert_eq!(angular_gate(f64::INFINITY, 0.2, 0.3), 0.0);
}

#[test]
fn gate_suppresses_rotation_only() {
    let p = identity_policy(2);
    let shape = ShapingState { gate_enabled: true, r_sm: 0.1, sigma_sm: 0.1, ..Default::default() };
    let x = [3.0, 0.0];
    let v = p.velocity(&x, 0.0, &shape).unwrap();
    let nominal = p.velocity(&x, 0.0, &ShapingState::default()).unwrap();
    assert!(v[1].abs() < 0.01 * nominal[1].abs());
    assert!((v[0] - nominal[0]).abs() < 1e-12);
}

#[test]
fn speed_scale_modes() {
    let p = identity_policy(2);
    assert_eq!(p.speed_scale(&[0.3, 0.1]), 1.0);
    let p = p.with_learned_speed(&[8], 0.01, 3).unwrap();
    assert!((p.speed_scale(&[0.3, 0.1]) - 1.01).abs() < 1e-15);
}

fn random_policy(learned: bool) -> Policy {
    let mut cfg = EncoderConfig::new(3, 3).conditioned();
    cfg.rffn_hidden = 12;
    let mut enc = Encoder::init_identity(cfg, 4).unwrap();
    enc.randomize(0.3, 5);
    let omega = if learned {
        let mut net = AngularVelocityNet::new(&[6], 2.0, 6).unwrap();
        let k = net.net.n_params();
        for (i, v) in net.net.params_mut().iter_mut().enumerate() {
            *v += 0.1 * ((i * 7 % k) as f64 / k as f64 - 0.5);
        }
        OmegaMode::Learned(net)
    } else {
        OmegaMode::Constant(2.0)
    };
    let mut p = Policy::new(enc, HopfParams::new(1.3, 0.7, 0.5, omega).unwrap()).unwrap();
    if learned {
        p = p.with_learned_speed(&[5], 0.01, 8).unwrap();
        let mut th = p.params();
        let n = th.len();
        for (i, v) in th[n - 20..].iter_mut().enumerate() {
            *v += 0.05 * (i as f64).sin();
        }
        p.set_params(&th).unwrap();
    }
    p
}

#[test]
fn velocity_gradients_match_finite_differences() {
    for learned in [false, true] {
        let p = random_policy(learned);
        let x = [0.3, -0.2, 0.15];
        let z = 0.6;
        let wv = [0.7, -0.4, 1.1];
        let loss = |q: &Policy| -> f64 {
            let v = q.velocity(&x, z, &ShapingState::default()).unwrap();
            v.iter().zip(&wv).map(|(a, b)| a * b).sum()
        };
        let mut tape = VelocityTape::default();
        p.velocity_taped(&x, z, &mut tape).unwrap();
        let direct = p.velocity(&x, z, &ShapingState::default()).unwrap();
        for i in 0..3 {
            assert!((tape.v[i] - direct[i]).abs() < 1e-12);
        }
        let mut grad = vec![0.0; p.n_params()];
        p.velocity_backward(&mut tape, &wv, &mut grad);
        let theta = p.params();
        let mut probe = p.clone();
        let d = 1e-6;
        for k in (0..theta.len()).step_by(5) {
            let mut t = theta.clone();
            t[k] += d;
            probe.set_params(&t).unwrap();
            let lp = loss(&probe);
            t[k] -= 2.0 * d;
            probe.set_params(&t).unwrap();
            let lm = loss(&probe);
            let fd = (lp - lm) / (2.0 * d);
            let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-4);
            assert!(rel < 1e-4, "learned={learned} k={k} fd={fd} an={}", grad[k]);
        }
    }
}

#[test]
fn policy_file_round_trip() {
    let p = random_policy(true);
    let meta = PolicyMeta { epochs_trained: 12, period: Some(2.0), ..Default::default() };
    let (q, m) = Policy::from_json(&p.to_json(&meta).unwrap()).unwrap();
    assert_eq!(p, q);
    assert_eq!(meta, m);
}
