//! Acceptance suite: every criterion runs in sequence inside one test and
//! prints a single PASS/FAIL line straight to stdout, so the lines show
//! even when test output is captured; the test fails if any criterion fails.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use osmp::data::{synth_oracle, OracleDataset, OracleKind};
use osmp::encoder::{Encoder, EncoderConfig, JacobianMethod};
use osmp::eval::{convergence_protocol, directed_hausdorff, dtw, icp_med, imitation_metrics, ProtocolMode};
use osmp::latent::{contraction_rate_bound, hopf_cartesian, HopfParams};
use osmp::policy::Policy;
use osmp::sync::{simulate_group, SyncGroup};
use osmp::training::{train, LossWeights, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EVAL_SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

fn ellipse() -> OracleDataset {
    synth_oracle(&OracleKind::from_name("ellipse").unwrap(), 200, 2.0, 0.0, 0).unwrap()
}

fn train_ellipse(seed: u64) -> Policy {
    let ds = ellipse();
    let hopf = HopfParams::constant(10.0, 10.0, 0.5, PI).unwrap();
    let cfg = TrainConfig { epochs: 1000, lr: 5e-3, seed, ..Default::default() };
    train(&ds, EncoderConfig::new(2, 10), hopf, &LossWeights::imitation_only(), &cfg).unwrap().0
}

fn rk4(y: &[f64], p: &HopfParams, dt: f64) -> Vec<f64> {
    let f = |s: &[f64]| hopf_cartesian(s, p).unwrap();
    let add = |a: &[f64], b: &[f64], h: f64| a.iter().zip(b).map(|(u, v)| u + h * v).collect::<Vec<f64>>();
    let k1 = f(y);
    let k2 = f(&add(y, &k1, dt / 2.0));
    let k3 = f(&add(y, &k2, dt / 2.0));
    let k4 = f(&add(y, &k3, dt));
    (0..y.len()).map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

fn least_squares_slope(t: &[f64], v: &[f64]) -> f64 {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let cov: f64 = t.iter().zip(v).map(|(a, b)| (a - mt) * (b - mv)).sum();
    let var: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    cov / var
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let p = HopfParams::constant(1.0, 1.0, 1.0, 1.0).unwrap();
    let bound = contraction_rate_bound(&p, p.radius).unwrap();
    let dt = 1e-3;
    let mut worst = f64::INFINITY;
    for r0 in [0.2, 0.5, 2.0, 3.0] {
        let window = 5.0 / contraction_rate_bound(&p, f64::min(r0, p.radius)).unwrap();
        let mut y = vec![r0, 0.0];
        let (mut ts, mut logs) = (Vec::new(), Vec::new());
        let mut t = 0.0;
        while t <= window {
            let gap = (y[0].hypot(y[1]) - p.radius).abs();
            if gap < 1e-10 {
                break;
            }
            ts.push(t);
            logs.push(gap.ln());
            y = rk4(&y, &p, dt);
            t += dt;
        }
        worst = worst.min(-least_squares_slope(&ts, &logs));
    }
    let secs = started.elapsed().as_secs_f64();
    Outcome::new(worst >= 0.9 * bound && secs < 1.0, format!("slowest fitted rate {worst:.3} vs 0.9 x {bound:.2}, {secs:.2} s"))
}

fn criterion_2() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_rt, mut worst_jac) = (0.0f64, 0.0f64);
    let h = 1e-6;
    for n in [2, 3, 6] {
        for blocks in [1, 10, 25] {
            for case in 0..200u64 {
                let mut enc = Encoder::init_identity(EncoderConfig::new(n, blocks).conditioned(), case).unwrap();
                enc.randomize(0.1, rng.random());
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let z: f64 = rng.random_range(0.0..1.0);
                let y = enc.encode(&x, z).unwrap();
                let back = enc.decode(&y, z).unwrap();
                let rt = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                worst_rt = worst_rt.max(rt);
                let exact = enc.jacobian(&x, z, JacobianMethod::Exact).unwrap();
                let mut fd = exact.clone();
                for j in 0..n {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[j] += h;
                    xm[j] -= h;
                    let (yp, ym) = (enc.encode(&xp, z).unwrap(), enc.encode(&xm, z).unwrap());
                    for i in 0..n {
                        fd[(i, j)] = (yp[i] - ym[i]) / (2.0 * h);
                    }
                }
                worst_jac = worst_jac.max((&exact - &fd).norm() / fd.norm());
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    Outcome::new(
        worst_rt <= 1e-9 && worst_jac <= 1e-4 && secs < 30.0,
        format!("round-trip {worst_rt:.2e}, Jacobian rel. err {worst_jac:.2e}, {secs:.1} s"),
    )
}

fn criterion_3(policies: &[Policy], train_secs: f64) -> Outcome {
    let ds = ellipse();
    let (mut rmse, mut haus) = (0.0f64, 0.0f64);
    for p in policies {
        rmse = rmse.max(imitation_metrics(p, &ds).unwrap().traj_rmse);
        haus = haus.max(convergence_protocol(p, &ds, ProtocolMode::GLOBAL, 25, EVAL_SEED).unwrap().hausdorff);
    }
    Outcome::new(
        rmse <= 0.005 && haus <= 0.01 && train_secs <= 300.0,
        format!("worst Traj RMSE {rmse:.4}, worst global Hausdorff {haus:.4}, training {train_secs:.0} s"),
    )
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let kind = OracleKind::from_name("star").unwrap();
    let period = kind.default_period();
    let ds = synth_oracle(&kind, 200, period, 0.0, 0).unwrap();
    let hopf = HopfParams::constant(3.0, 3.0, 0.5, 2.0 * PI / period).unwrap();
    let global = |lcm: f64, seed: u64| {
        let w = LossWeights { er: 1.0, lcm, ..Default::default() };
        let cfg = TrainConfig { epochs: 2000, lr: 5e-3, seed, ..Default::default() };
        let (p, _) = train(&ds, EncoderConfig::new(2, 10), hopf.clone(), &w, &cfg).unwrap();
        convergence_protocol(&p, &ds, ProtocolMode::GLOBAL, 25, EVAL_SEED).unwrap().hausdorff
    };
    let (mut without, mut with) = (0.0, 0.0);
    for seed in 1..=3 {
        without += global(0.0, seed) / 3.0;
        with += global(10.0, seed) / 3.0;
    }
    let factor = without / with;
    let secs = started.elapsed().as_secs_f64();
    Outcome::new(
        factor >= 5.0 && secs <= 1200.0,
        format!("global Hausdorff {without:.3} -> {with:.4} (factor {factor:.1}), {secs:.0} s"),
    )
}

fn perfect_ellipse_policy(ds: &OracleDataset) -> Policy {
    let radius = 0.5;
    let cycle = &ds.x[..ds.len() - 1];
    let k = cycle.len() as f64;
    let mut enc = Encoder::init_identity(EncoderConfig::new(2, 2), 0).unwrap();
    let mut affine = Vec::new();
    for c in 0..2 {
        let centre = cycle.iter().map(|p| p[c]).sum::<f64>() / k;
        let semi = cycle.iter().map(|p| (p[c] - centre).abs()).fold(0.0, f64::max);
        let scale = radius / semi;
        affine.push((scale.ln(), -centre * scale));
    }
    for block in 0..2 {
        let c = enc.active_range(block).start;
        enc.set_block_affine(block, &[affine[c].0], &[affine[c].1]).unwrap();
    }
    Policy::new(enc, HopfParams::constant(10.0, 10.0, radius, 2.0 * PI / ds.period).unwrap()).unwrap()
}

fn criterion_5() -> Outcome {
    let ds = ellipse();
    let policy = perfect_ellipse_policy(&ds);
    let h = convergence_protocol(&policy, &ds, ProtocolMode::LOCAL, 25, EVAL_SEED).unwrap().hausdorff;
    Outcome::new((0.03..=0.06).contains(&h), format!("local Hausdorff {h:.4}"))
}

fn cycle_point(p: &Policy, phase: f64) -> Vec<f64> {
    let r = p.hopf.radius;
    p.encoder.decode(&[r * phase.cos(), r * phase.sin()], 0.0).unwrap()
}

fn criterion_6(policies: &[Policy]) -> Outcome {
    let period: f64 = 2.0;
    let dt = 0.01;
    let per = (period / dt).round() as usize;
    let pair = SyncGroup::in_phase(policies[..2].to_vec(), 0.5).unwrap();
    let x0s = vec![cycle_point(&policies[0], 0.0), cycle_point(&policies[1], PI / 2.0)];
    let trace = simulate_group(&pair, &x0s, &[0.0, 0.0], dt, 20 * per).unwrap();
    let at_ten = trace.max_abs_error(10 * per);
    let tail = &trace.errors[15 * per..];
    let steady = tail.iter().map(|e| e[0].abs()).sum::<f64>() / tail.len() as f64;
    let six = SyncGroup::in_phase(policies.to_vec(), 0.1).unwrap();
    let x0s: Vec<Vec<f64>> = six.policies.iter().enumerate().map(|(i, p)| cycle_point(p, 0.4 * i as f64)).collect();
    let trace6 = simulate_group(&six, &x0s, &[0.0; 6], dt, 20 * per).unwrap();
    let six_max = trace6.max_abs_error(20 * per);
    let ok = !trace.diverged.iter().chain(&trace6.diverged).any(|d| *d);
    Outcome::new(
        ok && at_ten < 1.0 && steady < 0.2 && six_max < 1.0,
        format!("gap after 10 periods {at_ten:.2e} deg, steady mean {steady:.2e} deg, six-policy max {six_max:.2e} deg"),
    )
}

fn brute_dtw(a: &[Vec<f64>], b: &[Vec<f64>], i: usize, j: usize, acc: f64) -> f64 {
    let acc = acc + (a[i][0] - b[j][0]).hypot(a[i][1] - b[j][1]);
    if i + 1 == a.len() && j + 1 == b.len() {
        return acc;
    }
    let mut best = f64::INFINITY;
    if i + 1 < a.len() {
        best = best.min(brute_dtw(a, b, i + 1, j, acc));
    }
    if j + 1 < b.len() {
        best = best.min(brute_dtw(a, b, i, j + 1, acc));
    }
    if i + 1 < a.len() && j + 1 < b.len() {
        best = best.min(brute_dtw(a, b, i + 1, j + 1, acc));
    }
    best
}

fn brute_hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .map(|p| b.iter().map(|q| (p[0] - q[0]).hypot(p[1] - q[1])).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn grid_sequences(side: usize, len: usize) -> Vec<Vec<Vec<f64>>> {
    let cells = side * side;
    (0..cells.pow(len as u32))
        .map(|mut code| {
            (0..len)
                .map(|_| {
                    let c = code % cells;
                    code /= cells;
                    vec![(c % side) as f64, (c / side) as f64]
                })
                .collect()
        })
        .collect()
}

fn shape(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> [f64; 2] {
    let coef: Vec<(f64, f64)> = (0..4).map(|_| (rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2))).collect();
    let stretch = rng.random_range(0.5..1.0);
    move |s: f64| {
        let r = 1.0 + coef.iter().enumerate().map(|(m, (a, b))| a * ((m + 2) as f64 * s).cos() + b * ((m + 2) as f64 * s).sin()).sum::<f64>();
        [r * s.cos(), stretch * r * s.sin()]
    }
}

fn rotate(points: &[Vec<f64>], theta: f64) -> Vec<Vec<f64>> {
    let (s, c) = theta.sin_cos();
    points.iter().map(|p| vec![c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect()
}

fn translation_only_med(actual: &[Vec<f64>], desired: &[Vec<f64>]) -> f64 {
    let k = actual.len() as f64;
    let mut t = [0.0; 2];
    for c in 0..2 {
        t[c] = desired.iter().map(|p| p[c]).sum::<f64>() / k - actual.iter().map(|p| p[c]).sum::<f64>() / k;
    }
    let mut med = f64::INFINITY;
    for _ in 0..100 {
        let mut shift = [0.0; 2];
        let mut total = 0.0;
        for p in actual {
            let q = [p[0] + t[0], p[1] + t[1]];
            let nn = desired
                .iter()
                .min_by(|a, b| (a[0] - q[0]).hypot(a[1] - q[1]).total_cmp(&(b[0] - q[0]).hypot(b[1] - q[1])))
                .unwrap();
            total += (nn[0] - q[0]).hypot(nn[1] - q[1]);
            shift[0] += (nn[0] - q[0]) / k;
            shift[1] += (nn[1] - q[1]) / k;
        }
        med = med.min(total / k);
        t[0] += shift[0];
        t[1] += shift[1];
        if shift[0].hypot(shift[1]) < 1e-12 {
            break;
        }
    }
    med
}

fn grid_icp_med(actual: &[Vec<f64>], desired: &[Vec<f64>]) -> f64 {
    let coarse = 720;
    let mut scored: Vec<(f64, f64)> = (0..coarse)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / coarse as f64;
            (translation_only_med(&rotate(actual, th), desired), th)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let step = 2.0 * PI / coarse as f64;
    let mut best = scored[0].0;
    for &(_, th) in scored.iter().take(3) {
        for f in -100..=100 {
            let t = th + step * f as f64 / 100.0;
            best = best.min(translation_only_med(&rotate(actual, t), desired));
        }
    }
    best
}

fn criterion_7() -> Outcome {
    let mut mismatches = 0usize;
    let mut compared = 0usize;
    let mut all: Vec<Vec<Vec<f64>>> = Vec::new();
    for len in 1..=4 {
        all.extend(grid_sequences(2, len));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pairs: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = Vec::new();
    for a in &all {
        for b in &all {
            pairs.push((a.clone(), b.clone()));
        }
    }
    let random_seq = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        let len = rng.random_range(1..=6);
        (0..len).map(|_| vec![rng.random_range(0..3) as f64, rng.random_range(0..3) as f64]).collect()
    };
    for _ in 0..5000 {
        let a = random_seq(&mut rng);
        let b = random_seq(&mut rng);
        pairs.push((a, b));
    }
    for (a, b) in &pairs {
        compared += 1;
        let (cost, path) = dtw(a, b).unwrap();
        let path_cost: f64 = path.iter().map(|&(i, j)| (a[i][0] - b[j][0]).hypot(a[i][1] - b[j][1])).sum();
        let h = directed_hausdorff(a, b).unwrap();
        if cost != brute_dtw(a, b, 0, 0, 0.0) || (path_cost - cost).abs() > 1e-12 || h != brute_hausdorff(a, b) {
            mismatches += 1;
        }
    }
    let mut worst_icp = 0.0f64;
    for _ in 0..20 {
        let k = 40;
        let f = shape(&mut rng);
        let desired: Vec<Vec<f64>> = (0..k).map(|i| f(2.0 * PI * i as f64 / k as f64).to_vec()).collect();
        let offset: f64 = rng.random_range(0.0..1.0);
        let theta: f64 = rng.random_range(-PI..PI);
        let shift = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let clean: Vec<Vec<f64>> = (0..k).map(|i| f(2.0 * PI * (i as f64 + offset) / k as f64).to_vec()).collect();
        let actual: Vec<Vec<f64>> = rotate(&clean, theta)
            .into_iter()
            .map(|p| vec![p[0] + shift[0] + rng.random_range(-0.01..0.01), p[1] + shift[1] + rng.random_range(-0.01..0.01)])
            .collect();
        let med = icp_med(&actual, &desired).unwrap();
        worst_icp = worst_icp.max((med - grid_icp_med(&actual, &desired)).abs());
    }
    Outcome::new(
        mismatches == 0 && worst_icp <= 1e-3,
        format!("{mismatches} DTW/Hausdorff mismatches in {compared} pairs, worst ICP-MED gap {worst_icp:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let ellipse = synth_oracle(&OracleKind::from_name("ellipse").unwrap(), 100, 2.0, 0.0, 0).unwrap();
    let square = synth_oracle(&OracleKind::from_name("square").unwrap(), 100, 2.0, 0.0, 0).unwrap();
    let ds = OracleDataset::concat(&[ellipse.clone(), square.clone()], &[0.0, 1.0]).unwrap();
    let hopf = HopfParams::constant(10.0, 10.0, 0.5, PI).unwrap();
    let blend = |lam: f64| -> Vec<Vec<f64>> {
        ellipse.x.iter().zip(&square.x).map(|(a, b)| (0..2).map(|c| (1.0 - lam) * a[c] + lam * b[c]).collect()).collect()
    };
    let ratio = |sci: f64| {
        let w = LossWeights { sci, tgd: 1.0, ..Default::default() };
        let cfg = TrainConfig { epochs: 600, lr: 5e-3, seed: 1, ..Default::default() };
        let (p, _) = train(&ds, EncoderConfig::new(2, 10).conditioned(), hopf.clone(), &w, &cfg).unwrap();
        let h = |z: f64| {
            let cycle: Vec<Vec<f64>> = (0..400)
                .map(|k| {
                    let ph = 2.0 * PI * k as f64 / 400.0;
                    p.encoder.decode(&[0.5 * ph.cos(), 0.5 * ph.sin()], z).unwrap()
                })
                .collect();
            directed_hausdorff(&cycle, &blend(z)).unwrap()
        };
        h(0.5) / (0.5 * (h(0.0) + h(1.0)))
    };
    let with = ratio(20.0);
    let without = ratio(0.0);
    Outcome::new(
        with <= 2.0 && without >= 4.0,
        format!("midpoint/anchor Hausdorff ratio {with:.2} with smoothness term, {without:.2} without"),
    )
}

fn criterion_9(policy: &Policy) -> Outcome {
    let ds = ellipse();
    let exact = imitation_metrics(policy, &ds).unwrap().vel_rmse;
    let mut fd = policy.clone();
    fd.jacobian = JacobianMethod::FiniteDifference { step: 5e-4 };
    let numeric = imitation_metrics(&fd, &ds).unwrap().vel_rmse;
    let rise = numeric / exact - 1.0;
    Outcome::new(rise <= 0.25, format!("velocity RMSE {exact:.4} -> {numeric:.4} ({:+.1}%)", 100.0 * rise))
}

#[test]
fn acceptance() {
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |k: usize, o: Outcome| {
        let line = format!("criterion {k}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        let mut out = std::io::stdout().lock();
        writeln!(out, "{line}").unwrap();
        out.flush().unwrap();
        results.push((k, o));
    };
    report(1, criterion_1());
    report(2, criterion_2());
    let started = Instant::now();
    let mut policies: Vec<Policy> = (1..=3).map(train_ellipse).collect();
    let train_secs = started.elapsed().as_secs_f64();
    report(3, criterion_3(&policies, train_secs));
    report(4, criterion_4());
    report(5, criterion_5());
    policies.extend((4..=6).map(train_ellipse));
    report(6, criterion_6(&policies));
    report(7, criterion_7());
    report(8, criterion_8());
    report(9, criterion_9(&policies[0]));
    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.pass).map(|(k, _)| *k).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
