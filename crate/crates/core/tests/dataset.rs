use fuselab::dataset::{
    load_image, save_mask, scan_cdnet, synth_generate, write_video, SyntheticConfig,
};
use fuselab::metrics::{confusion, metrics_from_counts, ConfusionCounts};
use fuselab::Plane;

#[test]
fn written_video_scans_and_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let v = synth_generate(&SyntheticConfig::with_random_objects(40, 24, 12, 2, 9)).unwrap();
    let dir = tmp.path().join("cat/vid");
    write_video(&dir, &v.frames, &v.groundtruth, (3, 12)).unwrap();
    let index = scan_cdnet(tmp.path()).unwrap();
    let video = index.videos().next().unwrap();
    assert_eq!(video.frames.len(), 12);
    assert_eq!(video.evaluable_frames().count(), 10);
    for (i, f) in video.frames.iter().enumerate() {
        assert_eq!(load_image(&f.input).unwrap(), v.frames[i]);
        let gt = load_image(&f.groundtruth).unwrap();
        assert_eq!(gt, v.groundtruth[i]);
        let m = metrics_from_counts(&confusion(&gt, &v.groundtruth[i]).unwrap()).unwrap();
        if gt.foreground_count() > 0 {
            assert_eq!(m.fm, 1.0);
        }
    }
}

#[test]
fn pgm_masks_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let m = Plane::from_fn(7, 5, |x, y| if (x + y) % 3 == 0 { 255 } else { 0 });
    let p = tmp.path().join("m.pgm");
    save_mask(&m, &p).unwrap();
    assert_eq!(load_image(&p).unwrap(), m);
    assert!(save_mask(&Plane::filled(2, 2, 7), &tmp.path().join("bad.png")).is_err());
}

#[test]
fn candidates_are_imperfect_and_distinct() {
    for seed in 0..4 {
        let v = synth_generate(&SyntheticConfig::with_random_objects(48, 48, 20, 2, seed)).unwrap();
        let fms: Vec<f64> = v
            .candidates
            .iter()
            .map(|stream| {
                let c: ConfusionCounts = stream.iter().zip(&v.groundtruth).map(|(m, g)| confusion(m, g).unwrap()).sum();
                metrics_from_counts(&c).unwrap().fm
            })
            .collect();
        assert!(fms.iter().all(|&f| f < 1.0), "seed {seed}: {fms:?}");
        for a in 0..3 {
            for b in a + 1..3 {
                assert_ne!(v.candidates[a], v.candidates[b]);
            }
        }
    }
}
