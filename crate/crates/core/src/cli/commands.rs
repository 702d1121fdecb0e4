use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{BgsArgs, Cli, Command, EvalArgs, FuseApplyArgs, FuseTrainArgs, ReportArgs, SynthArgs, VoteArgs};
use crate::baselines::{default_name, eval_expr, majority_vote, median_filter3, parse_expr, MaskSet};
use crate::bgs::{run_bgs, BgsParams, GmmParams, MedianParams, SampleConsensusParams};
use crate::dataset::{
    list_numbered, load_image, save_mask, scan_cdnet, synth_generate, write_video, SyntheticConfig, VideoEntry,
    CANDIDATE_NAMES, INPUT_EXTS, MASK_EXTS,
};
use crate::fusion::{
    build_network, import_encoder, load_checkpoint, predict_mask, save_checkpoint, train, NetConfig, TrainConfig,
    TrainingSample,
};
use crate::metrics::{aggregate, confusion, report, ConfusionCounts, ScoreTree, VideoScore};
use crate::{Error, Frame, Mask, Result};

pub(super) fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let threads = cli.threads as usize;
    match &cli.command {
        Command::Synth(a) => synth(a, seed, out),
        Command::Bgs(a) => bgs(a, seed, threads, out),
        Command::Vote(a) => vote(a, out),
        Command::FuseTrain(a) => fuse_train(a, seed, out),
        Command::FuseApply(a) => fuse_apply(a, out),
        Command::Eval(a) => eval(a, threads, out),
        Command::Report(a) => report_cmd(a, out),
    }
}

fn say(out: &mut dyn Write, msg: std::fmt::Arguments) -> Result<()> {
    out.write_fmt(msg)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| Error::io("<stdout>", e))
}

/// Applies `f` to every item on up to `threads` scoped threads, keeping the
/// input order.
fn par_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Result<Vec<R>>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().expect("worker thread panicked")?);
        }
        Ok(out)
    })
}

fn mask_path(dir: &Path, number: u32) -> PathBuf {
    dir.join(format!("bin{number:06}.png"))
}

fn load_mask(path: &Path) -> Result<Mask> {
    let m = load_image(path)?;
    if !m.is_binary() {
        return Err(Error::Dataset(format!("{} is not a binary 0/255 mask", path.display())));
    }
    Ok(m)
}

/// Relative video directories of a result tree that contain `bin` files,
/// with their frame numbers.
fn scan_tree(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u32>>> {
    fn walk(root: &Path, rel: &Path, out: &mut BTreeMap<PathBuf, Vec<u32>>) -> Result<()> {
        let dir = root.join(rel);
        let numbers: Vec<u32> = list_numbered(&dir, "bin", &MASK_EXTS)?.into_keys().collect();
        if !numbers.is_empty() {
            out.insert(rel.to_path_buf(), numbers);
        }
        let mut subdirs = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            if entry.path().is_dir() {
                subdirs.push(entry.file_name());
            }
        }
        subdirs.sort();
        for d in subdirs {
            walk(root, &rel.join(d), out)?;
        }
        Ok(())
    }
    if !root.is_dir() {
        return Err(Error::Dataset(format!("{} is not a directory", root.display())));
    }
    let mut out = BTreeMap::new();
    walk(root, Path::new(""), &mut out)?;
    if out.is_empty() {
        return Err(Error::Dataset(format!("no bin*.png masks under {}", root.display())));
    }
    Ok(out)
}

fn mask_file(tree: &Path, rel: &Path, number: u32) -> Result<PathBuf> {
    let dir = tree.join(rel);
    for ext in MASK_EXTS {
        let p = dir.join(format!("bin{number:06}.{ext}"));
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::Dataset(format!(
        "missing mask for frame {number} in {}",
        dir.display()
    )))
}

fn synth(a: &SynthArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    if a.videos == 0 {
        return Err(Error::Config("--videos must be at least 1".into()));
    }
    if a.roi_start == 0 || a.roi_start as usize > a.frames {
        return Err(Error::Config(format!(
            "--roi-start must lie in 1..={}",
            a.frames
        )));
    }
    for i in 0..a.videos {
        let vseed = seed.wrapping_add(i as u64);
        let mut cfg = SyntheticConfig::with_random_objects(a.width, a.height, a.frames, a.objects, vseed);
        cfg.noise_sigma = a.noise;
        let v = synth_generate(&cfg)?;
        let name = format!("video{i:02}");
        let rel = Path::new(&a.category).join(&name);
        write_video(&a.out.join(&rel), &v.frames, &v.groundtruth, (a.roi_start, a.frames as u32))?;
        if let Some(cand) = &a.candidates {
            for (k, stream) in v.candidates.iter().enumerate() {
                let dir = cand.join(CANDIDATE_NAMES[k]).join(&rel);
                for (t, m) in stream.iter().enumerate() {
                    save_mask(m, &mask_path(&dir, t as u32 + 1))?;
                }
            }
        }
    }
    say(out, format_args!("wrote {} synthetic video(s) to {}", a.videos, a.out.display()))
}

fn load_frames(video_dir: &Path) -> Result<Vec<(u32, Frame)>> {
    let inputs = list_numbered(&video_dir.join("input"), "in", &INPUT_EXTS)?;
    if inputs.is_empty() {
        return Err(Error::Dataset(format!("no input frames in {}", video_dir.display())));
    }
    inputs.into_iter().map(|(n, p)| Ok((n, load_image(&p)?))).collect()
}

fn bgs(a: &BgsArgs, seed: u64, threads: usize, out: &mut dyn Write) -> Result<()> {
    let params = BgsParams {
        gmm: GmmParams {
            alpha: a.gmm_alpha,
            lambda: a.gmm_lambda,
            components: a.gmm_components,
            ..Default::default()
        },
        sc: SampleConsensusParams {
            radius: a.sc_radius,
            min_matches: a.sc_min_matches,
            ..Default::default()
        },
        median: MedianParams {
            threshold: a.median_threshold,
            buffer: a.median_buffer,
        },
        seed,
    };
    let jobs: Vec<(PathBuf, PathBuf)> = match (&a.video, &a.dataset) {
        (Some(v), _) => vec![(v.clone(), a.out.clone())],
        (None, Some(root)) => scan_cdnet(root)?
            .videos()
            .map(|v| (v.dir.clone(), a.out.join(v.relative_path())))
            .collect(),
        (None, None) => return Err(Error::Config("either --video or --dataset is required".into())),
    };
    let counts = par_map(&jobs, threads, |(src, dst)| {
        let frames = load_frames(src)?;
        let images: Vec<Frame> = frames.iter().map(|(_, f)| f.clone()).collect();
        let masks = run_bgs(&images, a.algorithm, &params)?;
        for ((n, _), m) in frames.iter().zip(&masks) {
            save_mask(m, &mask_path(dst, *n))?;
        }
        Ok(masks.len())
    })?;
    say(
        out,
        format_args!(
            "{}: wrote {} masks for {} video(s) to {}",
            a.algorithm.name(),
            counts.iter().sum::<usize>(),
            jobs.len(),
            a.out.display()
        ),
    )
}

fn vote(a: &VoteArgs, out: &mut dyn Write) -> Result<()> {
    let trees: Vec<(String, PathBuf)> = a
        .masks
        .iter()
        .enumerate()
        .map(|(i, s)| match s.split_once('=') {
            Some((n, p)) if !n.is_empty() => (n.to_string(), PathBuf::from(p)),
            _ => (default_name(i), PathBuf::from(s)),
        })
        .collect();
    let expr = a.expr.as_deref().map(parse_expr).transpose()?;
    if let Some(e) = &expr {
        for name in e.names() {
            if !trees.iter().any(|(n, _)| n == name) {
                return Err(Error::UnboundName(name.to_string()));
            }
        }
    }
    let layout = scan_tree(&trees[0].1)?;
    let mut written = 0usize;
    for (rel, numbers) in &layout {
        for &n in numbers {
            let named = trees
                .iter()
                .map(|(name, root)| Ok((name.clone(), load_mask(&mask_file(root, rel, n)?)?)))
                .collect::<Result<Vec<_>>>()?;
            let set = MaskSet::new(named)?;
            let mut fused = match &expr {
                Some(e) => eval_expr(e, &set)?,
                None => majority_vote(&set),
            };
            if a.median_filter {
                fused = median_filter3(&fused);
            }
            save_mask(&fused, &mask_path(&a.out.join(rel), n))?;
            written += 1;
        }
    }
    say(out, format_args!("wrote {written} fused masks to {}", a.out.display()))
}

fn training_frames(video: &VideoEntry, fraction: f64, step: u32) -> Vec<u32> {
    let labelled: Vec<u32> = video.evaluable_frames().map(|f| f.number).collect();
    let keep = ((labelled.len() as f64) * fraction).floor() as usize;
    labelled[..keep.min(labelled.len())]
        .iter()
        .step_by(step as usize)
        .copied()
        .collect()
}

fn fuse_train(a: &FuseTrainArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    if !(a.train_fraction > 0.0 && a.train_fraction <= 1.0) {
        return Err(Error::Config("--train-fraction must lie in (0, 1]".into()));
    }
    let net = NetConfig {
        input_channels: a.masks.len(),
        stage_channels: a.channels.clone(),
        convs_per_stage: a.convs.clone(),
        input_size: a.input_size,
    };
    net.validate()?;
    let tc = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        lr: a.lr,
        beta1: a.beta1,
        beta2: a.beta2,
        epsilon: a.adam_eps,
        seed,
        min_fg_fraction: a.min_fg,
    };
    tc.validate()?;
    let index = scan_cdnet(&a.dataset)?;
    let mut samples = Vec::new();
    for video in index.videos() {
        let rel = video.relative_path();
        for n in training_frames(video, a.train_fraction, a.frame_step) {
            let entry = video.frames.iter().find(|f| f.number == n).expect("frame listed by scan");
            let gt = load_image(&entry.groundtruth)?;
            let masks = a
                .masks
                .iter()
                .map(|root| load_mask(&mask_file(root, &rel, n)?))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Mask> = masks.iter().collect();
            samples.push(TrainingSample::from_masks(&net, &refs, &gt)?);
        }
    }
    let mut params = build_network(&net, seed)?;
    if let Some(path) = &a.init_encoder {
        let (src, _) = load_checkpoint(path)?;
        import_encoder(&mut params, &src)?;
    }
    let (params, history) = train(params, &net, &samples, &tc)?;
    save_checkpoint(&params, &net, &a.out)?;
    if let Some(h) = &a.history {
        let text = serde_json::to_string_pretty(&history)?;
        fs::write(h, text + "\n").map_err(|e| Error::io(h, e))?;
    }
    say(
        out,
        format_args!(
            "trained on {} frames for {} epochs, final loss {:.6}; checkpoint {}",
            samples.len(),
            tc.epochs,
            history.last().copied().unwrap_or(f64::NAN),
            a.out.display()
        ),
    )
}

fn fuse_apply(a: &FuseApplyArgs, out: &mut dyn Write) -> Result<()> {
    let (params, net) = load_checkpoint(&a.checkpoint)?;
    if a.masks.len() != net.input_channels {
        return Err(Error::Config(format!(
            "checkpoint fuses {} trees, {} given",
            net.input_channels,
            a.masks.len()
        )));
    }
    let layout = scan_tree(&a.masks[0])?;
    let mut written = 0usize;
    for (rel, numbers) in &layout {
        for &n in numbers {
            let masks = a
                .masks
                .iter()
                .map(|root| load_mask(&mask_file(root, rel, n)?))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Mask> = masks.iter().collect();
            let fused = predict_mask(&params, &net, &refs, masks[0].dims())?;
            save_mask(&fused, &mask_path(&a.out.join(rel), n))?;
            written += 1;
        }
    }
    say(out, format_args!("wrote {written} fused masks to {}", a.out.display()))
}

/// Scores one video over its labelled frames.
fn score_video(video: &VideoEntry, tree: &Path) -> Result<VideoScore> {
    let rel = video.relative_path();
    let mut counts = ConfusionCounts::default();
    for f in video.evaluable_frames() {
        let pred = load_mask(&mask_file(tree, &rel, f.number)?)?;
        let gt = load_image(&f.groundtruth)?;
        counts += confusion(&pred, &gt)?;
    }
    VideoScore::from_counts(&video.category, &video.name, counts)
}

pub(super) fn score_tree(dataset: &Path, masks: &Path, threads: usize) -> Result<ScoreTree> {
    let index = scan_cdnet(dataset)?;
    let videos: Vec<&VideoEntry> = index.videos().collect();
    aggregate(par_map(&videos, threads, |v| score_video(v, masks))?)
}

fn eval(a: &EvalArgs, threads: usize, out: &mut dyn Write) -> Result<()> {
    let tree = score_tree(&a.dataset, &a.masks, threads)?;
    if let Some(p) = &a.out {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(p, serde_json::to_string_pretty(&tree)? + "\n").map_err(|e| Error::io(p, e))?;
    }
    out.write_all(report(&tree, a.format).as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn report_cmd(a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let text = fs::read_to_string(&a.scores).map_err(|e| Error::io(&a.scores, e))?;
    let tree: ScoreTree = serde_json::from_str(&text)?;
    let rendered = report(&tree, a.format);
    match &a.out {
        Some(p) => fs::write(p, rendered).map_err(|e| Error::io(p, e)),
        None => out.write_all(rendered.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}
