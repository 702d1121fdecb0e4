//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fuselab::baselines::{majority_vote, MaskSet};
use fuselab::bgs::{run_bgs, Algorithm, BgsParams};
use fuselab::dataset::{synth_generate, Corruption, ObjectSpec, SyntheticConfig};
use fuselab::fusion::{
    build_network, checkpoint_from_bytes, checkpoint_to_bytes, forward, load_checkpoint, mask_from_probs,
    predict_mask, NetConfig, TrainConfig, Trainer, TrainingSample,
};
use fuselab::metrics::{aggregate, confusion, metrics_from_counts, ConfusionCounts, MetricVector, VideoScore};
use fuselab::nn::gradcheck::{check_loss_pipeline, grad_check_sampled, layer_suite, random_tensor, DEFAULT_EPS};
use fuselab::nn::{balanced_ce_loss, softmax_channels, ParamStore, Shape, Tensor};
use fuselab::{Mask, Plane};

type Outcome = Result<(bool, String), String>;

fn fm(c: &ConfusionCounts) -> f64 {
    metrics_from_counts(c).unwrap().fm
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = Vec::new();
    let mut ok = true;
    for r in layer_suite(42).map_err(err)? {
        ok &= r.passed();
        worst.push(format!("{} {:.1e}", r.name, r.max_rel_err));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let logits = random_tensor(Shape::new(1, 2, 8, 8).unwrap(), &mut rng).map(|v| 3.0 * v);
    let label = Plane::from_fn(8, 8, |x, y| u8::from((x * 3 + y) % 4 == 0));
    let ignore = Plane::from_fn(8, 8, |x, _| u8::from(x == 7));
    let e = check_loss_pipeline(&logits, &label, &ignore, DEFAULT_EPS).map_err(err)?;
    ok &= e < 1e-4;
    worst.push(format!("loss pipeline {e:.1e}"));

    let cfg = NetConfig {
        input_channels: 3,
        stage_channels: vec![2, 3, 2, 2, 2],
        convs_per_stage: vec![2, 1, 1, 1, 1],
        input_size: 32,
    };
    let base: ParamStore<f64> = build_network(&cfg, 42).map_err(err)?;
    let mut inputs: Vec<Tensor<f64>> = base.iter().map(|p| p.value.map(|v| v + 0.03)).collect();
    inputs.push(random_tensor(Shape::new(1, 3, 32, 32).unwrap(), &mut rng));
    let label = Plane::from_fn(32, 32, |x, y| u8::from(x > 10 && x < 20 && y > 4));
    let ignore = Plane::filled(32, 32, 0);
    let count = base.len();
    let e = grad_check_sampled(
        |v| {
            let mut params = base.clone();
            for (p, t) in params.iter_mut().zip(v) {
                p.value = t.clone();
            }
            let (logits, cache) = fuselab::fusion::forward_cached(&params, &cfg, &v[count])?;
            let prob = softmax_channels(&logits)?;
            let terms = balanced_ce_loss(&prob, &label, &ignore)?;
            let dx = fuselab::fusion::backward(&mut params, &cfg, &cache, &terms.grad)?;
            let mut g: Vec<Tensor<f64>> = params.iter().map(|p| p.grad.clone()).collect();
            g.push(dx);
            Ok((terms.loss, g))
        },
        &inputs,
        DEFAULT_EPS,
        8,
        42,
    )
    .map_err(err)?;
    ok &= e < 1e-4;
    worst.push(format!("full network {e:.1e}"));
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    Ok((ok, format!("{} in {:.1}s", worst.join(", "), elapsed.as_secs_f64())))
}

/// Reference per-category rows (Re, Sp, FPR, FNR, PWC, Pr, FM) and the
/// overall row reported with them.
const CATEGORY_ROWS: [(&str, [f64; 7]); 11] = [
    ("baseline", [0.9376, 0.9986, 0.0014, 0.0624, 0.4027, 0.9629, 0.9497]),
    ("cameraJ", [0.7337, 0.9965, 0.0035, 0.2663, 1.5542, 0.9268, 0.8035]),
    ("dynamic", [0.8761, 0.9997, 0.0003, 0.1239, 0.1157, 0.9386, 0.9035]),
    ("intermittent", [0.7125, 0.9960, 0.0040, 0.2875, 3.2127, 0.8743, 0.7499]),
    ("shadow", [0.8860, 0.9974, 0.0026, 0.1140, 0.8182, 0.9432, 0.9127]),
    ("thermal", [0.7935, 0.9970, 0.0030, 0.2065, 1.5626, 0.9462, 0.8494]),
    ("badWeather", [0.8599, 0.9996, 0.0004, 0.1401, 0.3221, 0.9662, 0.9084]),
    ("lowFramerate", [0.7490, 0.9995, 0.0005, 0.2510, 1.0999, 0.8614, 0.7808]),
    ("nightVideos", [0.6557, 0.9949, 0.0051, 0.3443, 1.2237, 0.6708, 0.6527]),
    ("PTZ", [0.6680, 0.9989, 0.0011, 0.3320, 0.4335, 0.8338, 0.7280]),
    ("turbulence", [0.7574, 0.9998, 0.0002, 0.2426, 0.0804, 0.9417, 0.8288]),
];
const OVERALL_ROW: [f64; 7] = [0.7845, 0.9980, 0.0020, 0.2155, 0.9842, 0.8969, 0.8243];

fn aggregation() -> Outcome {
    let videos = CATEGORY_ROWS
        .iter()
        .map(|(cat, row)| VideoScore {
            category: cat.to_string(),
            video: "all".into(),
            counts: None,
            metrics: MetricVector::from_array(*row),
        })
        .collect();
    let tree = aggregate(videos).map_err(err)?;
    let got = tree.overall.to_array();
    let diff = got
        .iter()
        .zip(OVERALL_ROW)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((
        diff <= 5e-5 && tree.categories.len() == 11,
        format!("FM {:.4}, Re {:.4}, Pr {:.4}, PWC {:.4}; max deviation {diff:.2e}", got[6], got[0], got[5], got[4]),
    ))
}

fn brute_force(pred: &Mask, gt: &Mask) -> [u64; 4] {
    let mut c = [0u64; 4]; // tp fp tn fn
    for y in 0..gt.height() {
        for x in 0..gt.width() {
            let p = pred.get(x, y) == 255;
            let idx = match (gt.get(x, y), p) {
                (85 | 170, _) => continue,
                (255, true) => 0,
                (255, false) => 3,
                (_, true) => 1,
                (_, false) => 2,
            };
            c[idx] += 1;
        }
    }
    c
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn brute_metrics([tp, fp, tn, fneg]: [u64; 4]) -> [f64; 7] {
    let re = ratio(tp, tp + fneg);
    let pr = ratio(tp, tp + fp);
    let total = tp + fp + tn + fneg;
    let pwc = if total == 0 { 0.0 } else { 100.0 * (fneg + fp) as f64 / total as f64 };
    let f = if pr + re == 0.0 { 0.0 } else { 2.0 * pr * re / (pr + re) };
    [re, ratio(tn, tn + fp), ratio(fp, fp + tn), ratio(fneg, tp + fneg), pwc, pr, f]
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    const GT: [u8; 5] = [0, 50, 85, 170, 255];
    let mut count_mismatch = 0;
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let density: f64 = if i % 10 == 0 { (i % 3) as f64 / 2.0 } else { rng.random() };
        let weights: [f64; 5] = std::array::from_fn(|_| rng.random::<f64>());
        let wsum: f64 = weights.iter().sum();
        let pred = Plane::from_fn(32, 32, |_, _| if rng.random_bool(density) { 255 } else { 0 });
        let gt = Plane::from_fn(32, 32, |_, _| {
            let mut r = rng.random::<f64>() * wsum;
            for (k, w) in weights.iter().enumerate() {
                if r < *w {
                    return GT[k];
                }
                r -= w;
            }
            GT[4]
        });
        let c = confusion(&pred, &gt).map_err(err)?;
        let b = brute_force(&pred, &gt);
        if [c.tp, c.fp, c.tn, c.fn_] != b {
            count_mismatch += 1;
        }
        let m = metrics_from_counts(&c).map_err(err)?.to_array();
        for (x, y) in m.iter().zip(brute_metrics(b)) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok((
        count_mismatch == 0 && worst <= 1e-12,
        format!("1000 pairs, {count_mismatch} count mismatches, max metric deviation {worst:.1e}"),
    ))
}

fn to_mask(label: &Mask) -> Mask {
    Plane::from_fn(label.width(), label.height(), |x, y| if label.get(x, y) == 1 { 255 } else { 0 })
}

fn overfit() -> Outcome {
    let start = Instant::now();
    let video = synth_generate(&SyntheticConfig::with_random_objects(32, 32, 40, 2, 42)).map_err(err)?;
    let net = NetConfig::tiny(3, 32);
    let samples: Vec<TrainingSample> = (0..40)
        .filter(|&t| video.groundtruth[t].foreground_count() > 0)
        .take(10)
        .map(|t| {
            let c: Vec<&Mask> = video.candidates.iter().map(|s| &s[t]).collect();
            TrainingSample::from_masks(&net, &c, &video.groundtruth[t])
        })
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let tc = TrainConfig { epochs: 500, lr: 1e-3, seed: 42, ..Default::default() };
    let mut trainer = Trainer::new(build_network(&net, 42).map_err(err)?, &net, &samples, &tc).map_err(err)?;
    let train_fm = |p: &ParamStore<f32>| -> Result<f64, String> {
        let mut c = ConfusionCounts::default();
        for s in &samples {
            let pred = mask_from_probs(&forward(p, &net, &s.input).map_err(err)?).map_err(err)?;
            c += confusion(&pred, &to_mask(&s.label)).map_err(err)?;
        }
        Ok(fm(&c))
    };
    let mut reached = None;
    let mut last = 0.0;
    for epoch in 1..=500 {
        trainer.run_epoch().map_err(err)?;
        if epoch >= 11 && epoch % 5 == 0 {
            last = train_fm(trainer.params())?;
            if last > 0.95 {
                reached = Some(epoch);
                break;
            }
        }
    }
    let h = trainer.history();
    let decreasing = h.len() > 10 && h[10] < h[0];
    let elapsed = start.elapsed();
    let ok = samples.len() == 10 && reached.is_some() && decreasing && elapsed < Duration::from_secs(300);
    Ok((
        ok,
        format!(
            "training FM {last:.4} after {} epochs, loss[0] {:.3} -> loss[10] {:.3}, {:.1}s",
            reached.map_or("500+".to_string(), |e| e.to_string()),
            h[0],
            h.get(10).copied().unwrap_or(f64::NAN),
            elapsed.as_secs_f64()
        ),
    ))
}

fn learned_ensemble() -> Outcome {
    let video = synth_generate(&SyntheticConfig::with_random_objects(64, 64, 200, 2, 42)).map_err(err)?;
    let net = NetConfig::tiny(3, 64);
    let cands = |t: usize| -> Vec<&Mask> { video.candidates.iter().map(|s| &s[t]).collect() };
    let samples: Vec<TrainingSample> = (0..140)
        .step_by(2)
        .map(|t| TrainingSample::from_masks(&net, &cands(t), &video.groundtruth[t]))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let tc = TrainConfig { epochs: 20, lr: 1e-3, seed: 42, ..Default::default() };
    let (params, _) = fuselab::fusion::train(build_network(&net, 42).map_err(err)?, &net, &samples, &tc).map_err(err)?;
    let mut single = [ConfusionCounts::default(); 3];
    let mut mv = ConfusionCounts::default();
    let mut fused = ConfusionCounts::default();
    for t in 140..200 {
        let gt = &video.groundtruth[t];
        let c = cands(t);
        for k in 0..3 {
            single[k] += confusion(c[k], gt).map_err(err)?;
        }
        let set = MaskSet::from_masks(c.iter().map(|m| (*m).clone()).collect()).map_err(err)?;
        mv += confusion(&majority_vote(&set), gt).map_err(err)?;
        fused += confusion(&predict_mask(&params, &net, &c, gt.dims()).map_err(err)?, gt).map_err(err)?;
    }
    let best_single = single.iter().map(fm).fold(0.0, f64::max);
    let (f, m) = (fm(&fused), fm(&mv));
    Ok((
        f >= best_single && f >= m - 0.02,
        format!(
            "held-out FM: fused {f:.4}, majority vote {m:.4}, candidates {:.4} / {:.4} / {:.4}",
            fm(&single[0]),
            fm(&single[1]),
            fm(&single[2])
        ),
    ))
}

fn voted_ensemble() -> Outcome {
    let flip = Corruption { flip_prob: 0.1, ..Default::default() };
    let mut cfg = SyntheticConfig::with_random_objects(64, 64, 60, 2, 42);
    cfg.corruptions = [flip.clone(), flip.clone(), flip];
    let video = synth_generate(&cfg).map_err(err)?;
    let mut single = [ConfusionCounts::default(); 3];
    let mut mv = ConfusionCounts::default();
    for t in 0..60 {
        let gt = &video.groundtruth[t];
        let set = MaskSet::from_masks(video.candidates.iter().map(|s| s[t].clone()).collect()).map_err(err)?;
        for k in 0..3 {
            single[k] += confusion(&set.masks()[k], gt).map_err(err)?;
        }
        mv += confusion(&majority_vote(&set), gt).map_err(err)?;
    }
    let mut fms: Vec<f64> = single.iter().map(fm).collect();
    fms.sort_by(f64::total_cmp);
    let m = fm(&mv);
    Ok((m > fms[1], format!("majority vote FM {m:.4} vs median single copy {:.4}", fms[1])))
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn pipeline(dir: &Path) -> Result<Duration, String> {
    let start = Instant::now();
    let p = |s: &str| dir.join(s).to_string_lossy().into_owned();
    std::fs::write(dir.join("train.conf"), "# fusion training\nepochs = 10\nlr = 0.001\ntrain_fraction = 0.5\n")
        .map_err(err)?;
    let mut steps: Vec<Vec<String>> = vec![vec!["synth".into(), "--out".into(), p("data"), "--frames".into(), "200".into()]];
    for a in ["gmm", "sc", "median"] {
        steps.push(vec!["bgs".into(), "--algorithm".into(), a.into(), "--dataset".into(), p("data"), "--out".into(), p(a)]);
    }
    let trees = ["--masks".to_string(), p("gmm"), "--masks".into(), p("sc"), "--masks".into(), p("median")];
    let mut train = vec!["fuse-train".into(), "--config".into(), p("train.conf"), "--dataset".into(), p("data"), "--out".into(), p("net.bin")];
    train.extend(trees.iter().cloned());
    steps.push(train);
    let mut apply = vec!["fuse-apply".into(), "--checkpoint".into(), p("net.bin"), "--out".into(), p("fused")];
    apply.extend(trees.iter().cloned());
    steps.push(apply);
    steps.push(vec!["eval".into(), "--dataset".into(), p("data"), "--masks".into(), p("fused"), "--out".into(), p("scores.json")]);
    steps.push(vec!["report".into(), "--scores".into(), p("scores.json"), "--out".into(), p("report.csv")]);
    for step in steps {
        let mut argv = vec!["fuselab".to_string(), "--seed".into(), "7".into(), "--threads".into(), "1".into()];
        argv.extend(step.iter().cloned());
        let (mut out, mut errs) = (Vec::new(), Vec::new());
        let code = fuselab::cli::run_with(&argv, &mut out, &mut errs);
        if code != 0 {
            return Err(format!("`{}` exited {code}: {}", step[0], String::from_utf8_lossy(&errs)));
        }
    }
    Ok(start.elapsed())
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    std::fs::create_dir_all(&a).map_err(err)?;
    std::fs::create_dir_all(&b).map_err(err)?;
    let t = pipeline(&a)?;
    pipeline(&b)?;
    let (fa, fb) = (files_under(&a), files_under(&b));
    let identical = fa == fb;
    let masks = fa.keys().filter(|k| k.extension().is_some_and(|e| e == "png")).count();

    let (params, net) = load_checkpoint(&a.join("net.bin")).map_err(err)?;
    let bytes = checkpoint_to_bytes(&params, &net).map_err(err)?;
    let (reloaded, net2) = checkpoint_from_bytes(&bytes).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let x = random_tensor(Shape::new(1, 3, net.input_size, net.input_size).unwrap(), &mut rng)
        .map(|v| if v > 0.0 { 1.0 } else { 0.0 })
        .cast::<f32>();
    let (ya, yb) = (forward(&params, &net, &x).map_err(err)?, forward(&reloaded, &net2, &x).map_err(err)?);
    let bitwise = ya.data().iter().zip(yb.data()).all(|(u, v)| u.to_bits() == v.to_bits())
        && bytes == fa[Path::new("net.bin")];
    let report = String::from_utf8_lossy(&fa[Path::new("report.csv")]).lines().last().unwrap_or("").to_string();
    Ok((
        identical && bitwise && t < Duration::from_secs(600),
        format!(
            "{} files ({masks} masks) identical: {identical}; checkpoint round trip bitwise: {bitwise}; pipeline {:.1}s; {report}",
            fa.len(),
            t.as_secs_f64()
        ),
    ))
}

fn generators() -> Outcome {
    let params = BgsParams::default();
    let square = SyntheticConfig {
        width: 64,
        height: 64,
        frames: 150,
        objects: vec![ObjectSpec { width: 12, height: 12, x: 5.0, y: 9.0, vx: 1.2, vy: 0.9, intensity: 230 }],
        noise_sigma: 0.0,
        corruptions: Default::default(),
        seed: 42,
    };
    let video = synth_generate(&square).map_err(err)?;
    let masks = run_bgs(&video.frames, Algorithm::Gmm, &params).map_err(err)?;
    let burn = Algorithm::Gmm.burn_in(&params);
    let min_fm = masks[burn..]
        .iter()
        .zip(&video.groundtruth[burn..])
        .map(|(m, g)| fm(&confusion(m, g).unwrap()))
        .fold(1.0, f64::min);
    let mut ok = min_fm >= 0.8;
    let mut detail = format!("moving square: min GMM FM {min_fm:.4} after {burn} frames");

    let still = SyntheticConfig { objects: vec![], frames: 120, ..square };
    let video = synth_generate(&still).map_err(err)?;
    for algo in Algorithm::ALL {
        let burn = algo.burn_in(&params);
        let masks = run_bgs(&video.frames, algo, &params).map_err(err)?;
        let stray: usize = masks[burn..].iter().map(|m| m.foreground_count()).sum();
        ok &= stray == 0;
        detail += &format!("; static {}: {stray} fg px after {burn} frames", algo.name());
    }
    Ok((ok, detail))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("gradient suite", gradients),
        ("aggregation oracle", aggregation),
        ("metric oracle equivalence", metric_oracle),
        ("overfit", overfit),
        ("learned ensemble value", learned_ensemble),
        ("voted ensemble value", voted_ensemble),
        ("determinism and persistence", determinism),
        ("generator sanity", generators),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (pass, detail) = match std::panic::catch_unwind(f) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {}: {} {name}: {detail}", i + 1, if pass { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
