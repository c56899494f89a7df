use std::f64::consts::PI;

use osmp::data::{synth_oracle, OracleDataset, OracleKind};
use osmp::encoder::{Encoder, EncoderConfig};
use osmp::latent::HopfParams;
use osmp::policy::Policy;
use osmp::training::{checksum, gradient_check, total_loss, train, train_policy, LossWeights, TrainConfig};
use osmp::Error;

fn oracle(kind: &str, samples: usize) -> OracleDataset {
    synth_oracle(&OracleKind::from_name(kind).unwrap(), samples, 2.0, 0.0, 0).unwrap()
}

fn small_config(conditioned: bool) -> EncoderConfig {
    let mut cfg = EncoderConfig::new(2, 2);
    cfg.rffn_hidden = 8;
    if conditioned {
        cfg = cfg.conditioned();
    }
    cfg
}

fn perturbed_policy(conditioned: bool, seed: u64) -> Policy {
    let mut enc = Encoder::init_identity(small_config(conditioned), seed).unwrap();
    enc.randomize(0.05, seed + 100);
    Policy::new(enc, HopfParams::constant(2.0, 2.0, 0.5, PI).unwrap()).unwrap()
}

fn conditioned_pair() -> OracleDataset {
    OracleDataset::concat(&[oracle("ellipse", 30), oracle("square", 30)], &[0.0, 1.0]).unwrap()
}

#[test]
fn every_loss_term_has_exact_gradients() {
    let single = oracle("ellipse", 30);
    let pair = conditioned_pair();
    let cases: Vec<(&str, LossWeights, bool)> = vec![
        ("vi", LossWeights::default(), false),
        ("lcm", LossWeights { vi: 0.0, lcm: 1.0, ..Default::default() }, false),
        ("tgd", LossWeights { vi: 0.0, tgd: 1.0, ..Default::default() }, false),
        ("er", LossWeights { vi: 0.0, er: 1.0, n_er: 8, ..Default::default() }, false),
        ("vr", LossWeights { vi: 0.0, vr: 1.0, m_vr: Some(0.05), n_vr: 8, ..Default::default() }, false),
        ("haus", LossWeights { vi: 0.0, haus: 1.0, n_haus: Some(16), ..Default::default() }, false),
        ("sci", LossWeights { vi: 0.0, sci: 1.0, n_sci: 8, ..Default::default() }, true),
        (
            "all",
            LossWeights { lcm: 1.0, tgd: 0.5, er: 0.3, vr: 0.2, sci: 0.7, m_vr: Some(0.05), n_er: 4, n_vr: 4, n_sci: 4, ..Default::default() },
            true,
        ),
    ];
    for (name, w, conditioned) in cases {
        let ds = if conditioned { &pair } else { &single };
        for seed in 0..4 {
            let p = perturbed_policy(conditioned, seed);
            let err = gradient_check(&p, ds, &w, seed).unwrap();
            assert!(err < 1e-3, "{name} (seed {seed}): relative gradient error {err:.2e}");
        }
    }
}

#[test]
fn zero_epochs_keep_the_identity_encoder() {
    let ds = oracle("ellipse", 40);
    let cfg = TrainConfig { epochs: 0, warmup_epochs: 0, ..Default::default() };
    let hopf = HopfParams::constant(1.0, 1.0, 0.5, PI).unwrap();
    let (p, report) = train(&ds, small_config(false), hopf, &LossWeights::default(), &cfg).unwrap();
    assert!(report.epochs.is_empty());
    for x in &ds.x {
        assert_eq!(&p.encoder.encode(x, 0.0).unwrap(), x);
    }
}

#[test]
fn training_is_bit_reproducible_per_seed() {
    let ds = oracle("ellipse", 40);
    let hopf = HopfParams::constant(1.0, 1.0, 0.5, PI).unwrap();
    let w = LossWeights { er: 0.1, n_er: 4, ..Default::default() };
    let run = |seed| {
        let cfg = TrainConfig { epochs: 20, warmup_epochs: 2, lr: 1e-2, seed, ..Default::default() };
        train(&ds, small_config(false), hopf.clone(), &w, &cfg).unwrap().1
    };
    let (a, b, c) = (run(3), run(3), run(4));
    assert_eq!(a.checksum, b.checksum);
    assert_eq!(a.epochs, b.epochs);
    assert_ne!(a.checksum, c.checksum);
}

#[test]
fn imitation_loss_falls_during_training() {
    let ds = oracle("ellipse", 40);
    let hopf = HopfParams::constant(5.0, 5.0, 0.5, PI).unwrap();
    let cfg = TrainConfig { epochs: 150, warmup_epochs: 5, lr: 1e-2, seed: 1, ..Default::default() };
    let (p, report) = train(&ds, small_config(false), hopf, &LossWeights::default(), &cfg).unwrap();
    let first = report.epochs[0].loss.total;
    let last = total_loss(&p, &ds, &LossWeights::default(), 1).unwrap().total;
    assert!(last < 0.5 * first, "loss {first} -> {last}");
    assert_eq!(report.checksum, checksum(&p));
    assert_eq!(report.epochs.last().unwrap().lr, 0.0);
}

#[test]
fn resumed_epochs_continue_numbering() {
    let ds = oracle("ellipse", 40);
    let mut p = perturbed_policy(false, 0);
    let cfg = TrainConfig { epochs: 5, warmup_epochs: 1, lr: 1e-3, ..Default::default() };
    let report = train_policy(&mut p, &ds, &LossWeights::default(), &cfg, 10).unwrap();
    let numbers: Vec<usize> = report.epochs.iter().map(|r| r.epoch).collect();
    assert_eq!(numbers, vec![11, 12, 13, 14, 15]);
    let header = report.to_csv().lines().next().unwrap().to_string();
    assert_eq!(header, "epoch,lr,total,vi");
}

#[test]
fn invalid_settings_are_rejected() {
    let ds = oracle("ellipse", 40);
    let mut p = perturbed_policy(false, 0);
    let bad_cfg = TrainConfig { epochs: 5, warmup_epochs: 5, ..Default::default() };
    assert!(matches!(train_policy(&mut p, &ds, &LossWeights::default(), &bad_cfg, 0), Err(Error::InvalidParameter(_))));
    let cfg = TrainConfig { epochs: 5, warmup_epochs: 1, ..Default::default() };
    let bad_w = LossWeights { lcm: -1.0, ..Default::default() };
    assert!(matches!(train_policy(&mut p, &ds, &bad_w, &cfg, 0), Err(Error::InvalidParameter(_))));
    let three = synth_oracle(&OracleKind::from_name("ellipse").unwrap(), 20, 2.0, 0.0, 0).unwrap();
    let enc = Encoder::init_identity(EncoderConfig::new(3, 2), 0).unwrap();
    let mut p3 = Policy::new(enc, HopfParams::constant(1.0, 1.0, 0.5, PI).unwrap()).unwrap();
    assert!(matches!(train_policy(&mut p3, &three, &LossWeights::default(), &cfg, 0), Err(Error::DimensionMismatch { .. })));
}
