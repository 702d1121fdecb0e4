use fuselab::dataset::{synth_generate, SyntheticConfig};
use fuselab::fusion::{
    build_network, forward, predict_mask, train, NetConfig, TrainConfig, TrainingSample,
};
use fuselab::nn::{ParamStore, Shape, Tensor};
use fuselab::{Mask, Plane};

#[test]
fn output_matches_input_size_for_many_configs() {
    for (size, ch) in [(32, vec![1, 1, 1, 1, 1]), (64, vec![2, 3, 4, 3, 2]), (96, vec![4, 2, 2, 2, 5])] {
        let cfg = NetConfig {
            input_channels: 2,
            stage_channels: ch,
            convs_per_stage: vec![1, 2, 1, 1, 2],
            input_size: size,
        };
        let p: ParamStore<f32> = build_network(&cfg, 0).unwrap();
        let x = Tensor::filled(Shape::new(1, 2, size, size).unwrap(), 1.0);
        assert_eq!(forward(&p, &cfg, &x).unwrap().shape(), Shape::new(1, 2, size, size).unwrap());
    }
}

#[test]
fn trained_net_keeps_empty_input_empty() {
    let video = synth_generate(&SyntheticConfig::with_random_objects(32, 32, 30, 2, 5)).unwrap();
    let net = NetConfig::tiny(3, 32);
    let samples: Vec<TrainingSample> = (0..30)
        .step_by(3)
        .map(|t| {
            let c: Vec<&Mask> = video.candidates.iter().map(|s| &s[t]).collect();
            TrainingSample::from_masks(&net, &c, &video.groundtruth[t]).unwrap()
        })
        .collect();
    let tc = TrainConfig { epochs: 40, lr: 1e-3, seed: 5, ..Default::default() };
    let (params, history) = train(build_network(&net, 5).unwrap(), &net, &samples, &tc).unwrap();
    assert_eq!(history.len(), 40);
    assert!(history[10] < history[0]);
    let empty = Plane::filled(40, 24, 0);
    let out = predict_mask(&params, &net, &[&empty, &empty, &empty], (40, 24)).unwrap();
    assert_eq!(out.foreground_count(), 0);
}
