use proptest::prelude::*;

use fuselab::baselines::{eval_expr, majority_vote, parse_expr, MaskSet};
use fuselab::metrics::{confusion, metrics_from_counts, ConfusionCounts};
use fuselab::nn::{
    balanced_ce_loss, concat_channels, conv2d, deconv2, maxpool2, softmax_channels, AdamConfig, AdamState, ParamKind,
    ParamStore, Shape, Tensor,
};
use fuselab::{Mask, Plane};

fn mask(w: usize, h: usize) -> impl Strategy<Value = Mask> {
    prop::collection::vec(prop::bool::ANY, w * h)
        .prop_map(move |bits| Plane::new(w, h, bits.into_iter().map(|b| if b { 255 } else { 0 }).collect()).unwrap())
}

fn gt_mask(w: usize, h: usize) -> impl Strategy<Value = Mask> {
    prop::collection::vec(prop::sample::select(vec![0u8, 50, 85, 170, 255]), w * h)
        .prop_map(move |v| Plane::new(w, h, v).unwrap())
}

fn tensor(n: usize, c: usize, h: usize, w: usize) -> impl Strategy<Value = Tensor<f64>> {
    prop::collection::vec(-3.0f64..3.0, n * c * h * w)
        .prop_map(move |v| Tensor::from_vec(Shape::new(n, c, h, w).unwrap(), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vote_ignores_input_order(a in mask(9, 7), b in mask(9, 7), c in mask(9, 7)) {
        let abc = majority_vote(&MaskSet::from_masks(vec![a.clone(), b.clone(), c.clone()]).unwrap());
        let cab = majority_vote(&MaskSet::from_masks(vec![c, a, b]).unwrap());
        prop_assert_eq!(abc, cab);
    }

    #[test]
    fn vote_of_copies_is_the_mask(m in mask(8, 8), n in 1usize..6) {
        let set = MaskSet::from_masks(vec![m.clone(); n]).unwrap();
        prop_assert_eq!(majority_vote(&set), m);
    }

    #[test]
    fn de_morgan(a in mask(10, 6), b in mask(10, 6)) {
        let set = MaskSet::from_masks(vec![a, b]).unwrap();
        let lhs = eval_expr(&parse_expr("NOT (A AND B)").unwrap(), &set).unwrap();
        let rhs = eval_expr(&parse_expr("(NOT A) OR (NOT B)").unwrap(), &set).unwrap();
        prop_assert!(lhs.is_binary());
        prop_assert_eq!(lhs.dims(), (10, 6));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn rate_identities(tp in 1u64..10_000, fp in 1u64..10_000, tn in 1u64..10_000, fn_ in 1u64..10_000) {
        let m = metrics_from_counts(&ConfusionCounts { tp, fp, tn, fn_ }).unwrap();
        prop_assert_eq!(m.re + m.fnr, 1.0);
        prop_assert_eq!(m.sp + m.fpr, 1.0);
        prop_assert_eq!(m.pwc, 100.0 * (fn_ + fp) as f64 / (tp + fp + tn + fn_) as f64);
    }

    #[test]
    fn counts_add_over_frames(frames in prop::collection::vec((mask(6, 5), gt_mask(6, 5)), 1..6)) {
        let summed: ConfusionCounts = frames.iter().map(|(p, g)| confusion(p, g).unwrap()).sum();
        let (w, h) = (6, 5 * frames.len());
        let pred = Plane::from_fn(w, h, |x, y| frames[y / 5].0.get(x, y % 5));
        let gt = Plane::from_fn(w, h, |x, y| frames[y / 5].1.get(x, y % 5));
        prop_assert_eq!(summed, confusion(&pred, &gt).unwrap());
    }

    #[test]
    fn softmax_sums_to_one_and_ignores_shifts(x in tensor(2, 2, 3, 4), shift in -20.0f64..20.0) {
        let p = softmax_channels(&x).unwrap();
        let shifted = softmax_channels(&x.map(|v| v + shift)).unwrap();
        for n in 0..2 {
            for i in 0..12 {
                prop_assert!((p.plane(n, 0)[i] + p.plane(n, 1)[i] - 1.0).abs() <= 1e-6);
            }
        }
        for (a, b) in p.data().iter().zip(shifted.data()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn shape_algebra(x in tensor(1, 3, 8, 6), c in 1usize..4) {
        let w = Tensor::filled(Shape::new(c, 3, 3, 3).unwrap(), 0.1);
        let b = Tensor::zeros(Shape::new(c, 1, 1, 1).unwrap());
        let y = conv2d(&x, &w, &b).unwrap();
        prop_assert_eq!(y.shape(), Shape::new(1, c, 8, 6).unwrap());
        let (pooled, _) = maxpool2(&y).unwrap();
        prop_assert_eq!(pooled.shape(), Shape::new(1, c, 4, 3).unwrap());
        let dw = Tensor::filled(Shape::new(c, 2, 2, 2).unwrap(), 0.1);
        let up = deconv2(&pooled, &dw, &Tensor::zeros(Shape::new(2, 1, 1, 1).unwrap())).unwrap();
        prop_assert_eq!(up.shape(), Shape::new(1, 2, 8, 6).unwrap());
        prop_assert_eq!(concat_channels(&up, &y).unwrap().shape(), Shape::new(1, 2 + c, 8, 6).unwrap());
    }

    #[test]
    fn balanced_loss_is_non_negative(x in tensor(1, 2, 4, 5), label in mask(5, 4), ignore in mask(5, 4)) {
        let p = softmax_channels(&x).unwrap();
        let label = Plane::from_fn(5, 4, |i, j| u8::from(label.get(i, j) == 255));
        let terms = balanced_ce_loss(&p, &label, &ignore).unwrap();
        prop_assert!(terms.loss >= 0.0);
        if terms.beta == 0.0 || terms.beta == 1.0 {
            prop_assert_eq!(terms.loss, 0.0);
        }
    }

    #[test]
    fn adam_with_zero_gradients_is_identity(v in tensor(2, 3, 1, 1), steps in 1usize..5) {
        let mut store = ParamStore::new();
        store.push("w", ParamKind::Kernel, v.clone()).unwrap();
        let mut adam = AdamState::new(AdamConfig::default(), &store);
        for _ in 0..steps {
            store.zero_grads();
            adam.step(&mut store).unwrap();
        }
        prop_assert_eq!(store.value("w").unwrap(), &v);
    }
}

#[test]
fn confident_correct_predictions_have_tiny_loss() {
    let label = Plane::from_fn(6, 6, |x, _| u8::from(x < 2));
    let ignore = Plane::filled(6, 6, 0);
    let shape = Shape::new(1, 2, 6, 6).unwrap();
    let mut p = Tensor::zeros(shape);
    for y in 0..6 {
        for x in 0..6 {
            let fg = label.get(x, y) == 1;
            p.set(0, 1, y, x, if fg { 1.0 } else { 0.0 });
            p.set(0, 0, y, x, if fg { 0.0 } else { 1.0 });
        }
    }
    let terms = balanced_ce_loss::<f64>(&p, &label, &ignore).unwrap();
    assert!(terms.loss <= 12.0 * 2e-7, "{}", terms.loss);
}
