// Scratch harness for sweeping the 8-mode trend experiment.

use distillkit::dataset::{FeatureSet, LabeledDataset};
use distillkit::diffusion::{ancestral_sample_clipped, Denoiser, EncoderDecoder, NoiseSchedule, SamplerKind, ScheduleKind, ZhatMode};
use distillkit::eval::{mmd_rbf, prdc, Bandwidth};
use distillkit::minimax::{finetune, DivMode, MinimaxConfig, ReprMode};
use distillkit::nn::Activation;
use distillkit::rng::{derive_rng, rng_from_seed, standard_normal_vec};
use rand::Rng;

struct P {
    pretrain: usize,
    ft: usize,
    lambda_d: f64,
    lambda_r: f64,
    hidden: usize,
    cap: usize,
    decay: f64,
    n_data: usize,
    sigma: f64,
    zhat: ZhatMode,
}

fn ring_histogram(rows: &[Vec<f64>], modes: usize) -> Vec<usize> {
    let mut counts = vec![0usize; modes];
    for r in rows {
        let angle = r[1].atan2(r[0]);
        let frac = (angle / (2.0 * std::f64::consts::PI) * modes as f64).round();
        let k = ((frac as i64 % modes as i64) + modes as i64) as usize % modes;
        counts[k] += 1;
    }
    counts
}

fn patch_modes(scale: f64) -> Vec<[f64; 2]> {
    vec![
        [1.0 * scale, 0.4 * scale],
        [1.6 * scale, 0.4 * scale],
        [2.2 * scale, 0.4 * scale],
        [1.0 * scale, 1.0 * scale],
        [1.6 * scale, 1.0 * scale],
        [2.2 * scale, 1.0 * scale],
        [1.0 * scale, 1.6 * scale],
        [1.6 * scale, 1.6 * scale],
    ]
}

fn patch_dataset(n: usize, keep: usize, scale: f64, sigma: f64, seed: u64) -> LabeledDataset {
    let centers = patch_modes(scale);
    let mut rng = derive_rng(seed, 0);
    let mut features = Vec::new();
    for _ in 0..n {
        let k = rng.gen_range(0..keep);
        let v = standard_normal_vec(&mut rng, 2);
        features.push(vec![
            centers[k][0] + sigma * v[0],
            centers[k][1] + sigma * v[1],
        ]);
    }
    let n = features.len();
    LabeledDataset::new(features, vec![0; n], 1).unwrap()
}

fn ring_dataset(n: usize, modes: usize, radius: f64, sigma: f64, decay: f64, seed: u64) -> LabeledDataset {
    let mut rng = derive_rng(seed, 0);
    let weights: Vec<f64> = if decay >= 0.999 { vec![1.0; modes] } else { (0..modes).map(|k| decay.powi(k as i32)).collect() };
    let total: f64 = weights.iter().sum();
    let mut features = Vec::new();
    for _ in 0..n {
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut k = modes - 1;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        let angle = 2.0 * std::f64::consts::PI * k as f64 / modes as f64;
        let v = standard_normal_vec(&mut rng, 2);
        features.push(vec![
            radius * angle.cos() + sigma * v[0],
            radius * angle.sin() + sigma * v[1],
        ]);
    }
    let n = features.len();
    LabeledDataset::new(features, vec![0; n], 1).unwrap()
}

fn narrow_dataset(n: usize, modes: usize, keep: usize, radius: f64, sigma: f64, seed: u64) -> LabeledDataset {
    let mut rng = derive_rng(seed, 0);
    let mut features = Vec::new();
    for _ in 0..n {
        let k = rng.gen_range(0..keep);
        let angle = 2.0 * std::f64::consts::PI * k as f64 / modes as f64;
        let v = standard_normal_vec(&mut rng, 2);
        features.push(vec![
            radius * angle.cos() + sigma * v[0],
            radius * angle.sin() + sigma * v[1],
        ]);
    }
    let n = features.len();
    LabeledDataset::new(features, vec![0; n], 1).unwrap()
}

fn fs_of(rows: Vec<Vec<f64>>) -> FeatureSet {
    let n = rows.len();
    FeatureSet::new(rows, vec![0; n], (0..n).collect(), 1).unwrap()
}

fn mode_histogram(rows: &[Vec<f64>], scale: f64) -> Vec<usize> {
    let centers = patch_modes(scale);
    let mut counts = vec![0usize; centers.len()];
    for r in rows {
        let mut best = (0usize, f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let d = (r[0] - c[0]).powi(2) + (r[1] - c[1]).powi(2);
            if d < best.1 {
                best = (k, d);
            }
        }
        counts[best.0] += 1;
    }
    counts
}

fn main() {
    let a: Vec<String> = std::env::args().collect();
    let g = |i: usize, d: f64| a.get(i).and_then(|s| s.parse::<f64>().ok()).unwrap_or(d);
    let p = P {
        pretrain: g(1, 200.0) as usize,
        ft: g(2, 16.0) as usize,
        lambda_d: g(3, 1.0),
        lambda_r: g(4, 0.002),
        hidden: g(5, 48.0) as usize,
        cap: g(6, 64.0) as usize,
        decay: g(7, 0.55),
        n_data: g(8, 300.0) as usize,
        sigma: g(9, 0.4),
        zhat: if g(10, 0.0) > 0.5 { ZhatMode::DdpmExact } else { ZhatMode::PaperLiteral },
    };
    let modes = 8;
    let radius: f64 = g(13, 4.0);
    let ipc = 100;
    let timesteps = 1000;
    let sample_steps: usize = g(11, 50.0) as usize;

    println!("pre={} ft={} ld={} lr={} hid={} cap={} decay={} n={} sig={} zhat={:?} steps={}",
        p.pretrain, p.ft, p.lambda_d, p.lambda_r, p.hidden, p.cap, p.decay, p.n_data, p.sigma, p.zhat, sample_steps);
    let mut sums: Vec<(f64, f64, f64, f64)> = vec![(0.0, 0.0, 0.0, 0.0); 4];
    for seed in 0..3u64 {
        let ds = ring_dataset(p.n_data, modes, radius, p.sigma, 1.0, seed);
        let narrow = narrow_dataset(p.n_data, modes, 3, radius, p.sigma, seed + 500);
        let schedule = NoiseSchedule::new(timesteps, ScheduleKind::Linear).unwrap();
        let mut init_rng = rng_from_seed(seed.wrapping_mul(7919).wrapping_add(13));
        let model = Denoiser::init(2, 1, 4, 8, &[p.hidden, p.hidden], Activation::Tanh, &mut init_rng);
        let enc = EncoderDecoder::identity();
        let pre_cfg = MinimaxConfig {
            lambda_r: 0.0,
            lambda_d: 0.0,
            repr_mode: ReprMode::Off,
            div_mode: DivMode::Off,
            epochs: p.pretrain,
            learning_rate: 1e-3,
            batch_size: 8,
            memory_capacity: p.cap,
            ..Default::default()
        };
        let pre = finetune(model, &narrow, &enc, &schedule, &pre_cfg, seed + 1000).unwrap().model;

        let ft_lr = {
            let a: Vec<String> = std::env::args().collect();
            a.get(12).and_then(|s| s.parse::<f64>().ok()).unwrap_or(1e-4)
        };
        let mk = |lr: f64, ld: f64, rm: ReprMode, dm: DivMode| MinimaxConfig {
            lambda_r: lr,
            lambda_d: ld,
            repr_mode: rm,
            div_mode: dm,
            epochs: p.ft,
            learning_rate: ft_lr,
            memory_capacity: p.cap,
            zhat_mode: p.zhat,
            ..Default::default()
        };
        let variants: Vec<(&str, MinimaxConfig)> = vec![
            ("base ", mk(0.0, 0.0, ReprMode::Off, DivMode::Off)),
            ("+Lr  ", mk(p.lambda_r, 0.0, ReprMode::Minimax, DivMode::Off)),
            ("+Ld  ", mk(0.0, p.lambda_d, ReprMode::Off, DivMode::Minimax)),
            ("full ", mk(p.lambda_r, p.lambda_d, ReprMode::Minimax, DivMode::Minimax)),
        ];

        let real = fs_of(ds.features.clone());
        let real_h = {
            // median distance to the 5th nearest neighbour
            let mut per_point = Vec::new();
            for i in 0..real.features.len() {
                let mut d: Vec<f64> = (0..real.features.len()).filter(|&j| j != i).map(|j| {
                    real.features[i].iter().zip(&real.features[j]).map(|(a,b)| (a-b)*(a-b)).sum::<f64>().sqrt()
                }).collect();
                d.sort_by(|a,b| a.partial_cmp(b).unwrap());
                per_point.push(d[4]);
            }
            per_point.sort_by(|a,b| a.partial_cmp(b).unwrap());
            per_point[per_point.len()/2]
        };
        println!("  seed {seed} local bandwidth {real_h:.4}");
        {
            let samples = ancestral_sample_clipped(&pre, &schedule, 0, sample_steps, ipc, seed + 3000, SamplerKind::Deterministic, Some((radius * g(15, 0.0), radius * g(14, 1.4)))).unwrap();
            let hist = ring_histogram(&samples, modes);
            let gen = fs_of(samples.clone());
            let q = prdc(&real, &gen, 5).unwrap();
            let mean_r = samples.iter().map(|s| (s[0]*s[0]+s[1]*s[1]).sqrt()).sum::<f64>() / samples.len() as f64;
            let spread = |rows: &[Vec<f64>]| {
                let centers = patch_modes(radius);
                let mut acc = 0.0;
                for r in rows {
                    let mut best = f64::INFINITY;
                    for c in &centers {
                        let d = ((r[0]-c[0]).powi(2) + (r[1]-c[1]).powi(2)).sqrt();
                        if d < best { best = d; }
                    }
                    acc += best;
                }
                acc / rows.len() as f64
            };
            println!("  seed {seed} pre   prec {:6.1} rec {:6.1} cov {:6.1} meanR {:.2} genSpread {:.3} dataSpread {:.3} hist {hist:?}", q.precision, q.recall, q.coverage, mean_r, spread(&samples), spread(&ds.features));
        }
        for (vi, (name, cfg)) in variants.into_iter().enumerate() {
            let tuned = finetune(pre.clone(), &ds, &enc, &schedule, &cfg, seed + 2000).unwrap().model;
            let samples = ancestral_sample_clipped(&tuned, &schedule, 0, sample_steps, ipc, seed + 3000, SamplerKind::Deterministic, Some((radius * g(15, 0.0), radius * g(14, 1.4)))).unwrap();
            let hist = ring_histogram(&samples, modes);
            let covered = hist.iter().filter(|&&c| c > 0).count();
            let gen = fs_of(samples);
            let q = prdc(&real, &gen, 5).unwrap();
            let mmd = mmd_rbf(&real, &gen, Bandwidth::Fixed(real_h)).unwrap();
            let mmd_scan: Vec<f64> = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5]
                .iter()
                .map(|&h| mmd_rbf(&real, &gen, Bandwidth::Fixed(h)).unwrap())
                .collect();
            println!("  seed {seed} {name} mmdscan {:?}", mmd_scan.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<f64>>());
            sums[vi].0 += q.precision / 3.0;
            sums[vi].1 += q.recall / 3.0;
            sums[vi].2 += q.coverage / 3.0;
            sums[vi].3 += mmd / 3.0;
            let meanr = gen.features.iter().map(|s| (s[0]*s[0]+s[1]*s[1]).sqrt()).sum::<f64>() / gen.features.len() as f64;
            let stdr = {
                let v = gen.features.iter().map(|s| ((s[0]*s[0]+s[1]*s[1]).sqrt() - meanr).powi(2)).sum::<f64>() / gen.features.len() as f64;
                v.sqrt()
            };
            let kmean = |xs: &Vec<Vec<f64>>, ys: &Vec<Vec<f64>>, h: f64| {
                let mut s = 0.0;
                for x in xs { for y in ys {
                    let d2: f64 = x.iter().zip(y).map(|(a,b)| (a-b)*(a-b)).sum();
                    s += (-d2 / (2.0*h*h)).exp();
                }}
                s / (xs.len()*ys.len()) as f64
            };
            let h = 1.0; // fixed for diagnostics
            let kgg = kmean(&gen.features, &gen.features, h);
            let kgr = kmean(&gen.features, &real.features, h);
            println!(
                "  seed {seed} {name} prec {:6.1} rec {:6.1} cov {:6.1} mmd {:.4} meanR {:.2} stdR {:.2} kgg {:.4} kgr {:.4} hist {hist:?}",
                q.precision, q.recall, q.coverage, mmd, meanr, stdr, kgg, kgr
            );
        }
    }
    let names = ["base ", "+Lr  ", "+Ld  ", "full "];
    for (vi, name) in names.iter().enumerate() {
        println!("AVG {name} prec {:6.1} rec {:6.1} cov {:6.1} mmd {:.4}", sums[vi].0, sums[vi].1, sums[vi].2, sums[vi].3);
    }
    println!(
        "rel: rec +{:.1}% cov +{:.1}% | prec(Lr) drop {:.1}pt | mmd full-base {:+.4}",
        100.0 * (sums[2].1 - sums[0].1) / sums[0].1,
        100.0 * (sums[2].2 - sums[0].2) / sums[0].2,
        sums[0].0 - sums[1].0,
        sums[3].3 - sums[0].3
    );
}
