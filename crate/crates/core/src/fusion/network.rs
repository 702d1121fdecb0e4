use serde::{Deserialize, Serialize};

use crate::nn::{
    concat_channels, conv2d, conv2d_backward, deconv2, deconv2_backward, he_init, he_init_with_fan_in,
    maxpool2, maxpool2_backward, relu, relu_backward, softmax_channels, split_channels, ParamKind,
    ParamStore, PoolIndices, Scalar, Shape, Tensor,
};
use crate::{Error, Result};

pub const STAGES: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Number of fused candidate masks.
    pub input_channels: usize,
    pub stage_channels: Vec<usize>,
    pub convs_per_stage: Vec<usize>,
    /// Side of the square network input.
    pub input_size: usize,
}

impl NetConfig {
    /// Widths 8,16,32,32,32 and 2,2,3,3,3 convolutions.
    pub fn tiny(input_channels: usize, input_size: usize) -> Self {
        Self {
            input_channels,
            stage_channels: vec![8, 16, 32, 32, 32],
            convs_per_stage: vec![2, 2, 3, 3, 3],
            input_size,
        }
    }

    /// VGG16-sized encoder: widths 64,128,256,512,512, 13 convolutions, 224 input.
    pub fn full_scale(input_channels: usize) -> Self {
        Self {
            input_channels,
            stage_channels: vec![64, 128, 256, 512, 512],
            convs_per_stage: vec![2, 2, 3, 3, 3],
            input_size: 224,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 {
            return Err(Error::Config("input_channels must be at least 1".into()));
        }
        if self.stage_channels.len() != STAGES || self.convs_per_stage.len() != STAGES {
            return Err(Error::Config(format!(
                "expected {STAGES} stage widths and {STAGES} conv counts, got {} and {}",
                self.stage_channels.len(),
                self.convs_per_stage.len()
            )));
        }
        if self.stage_channels.contains(&0) || self.convs_per_stage.contains(&0) {
            return Err(Error::Config("stage widths and conv counts must be at least 1".into()));
        }
        if self.input_size == 0 || self.input_size % (1 << STAGES) != 0 {
            return Err(Error::Config(format!(
                "input_size {} is not a positive multiple of {}",
                self.input_size,
                1 << STAGES
            )));
        }
        Ok(())
    }

    /// Spatial side of the bottleneck feature map.
    pub fn bottleneck_size(&self) -> usize {
        self.input_size >> STAGES
    }

    /// Names, kinds and shapes of every parameter, in build order.
    pub fn param_layout(&self) -> Vec<(String, ParamKind, [usize; 4])> {
        let mut out = Vec::new();
        let mut cin = self.input_channels;
        for s in 0..STAGES {
            let c = self.stage_channels[s];
            for j in 0..self.convs_per_stage[s] {
                out.push((format!("enc{s}.conv{j}.w"), ParamKind::Kernel, [c, cin, 3, 3]));
                out.push((format!("enc{s}.conv{j}.b"), ParamKind::Bias, [c, 1, 1, 1]));
                cin = c;
            }
        }
        for s in (0..STAGES).rev() {
            let c = self.stage_channels[s];
            out.push((format!("dec{s}.up.w"), ParamKind::Kernel, [cin, c, 2, 2]));
            out.push((format!("dec{s}.up.b"), ParamKind::Bias, [c, 1, 1, 1]));
            out.push((format!("dec{s}.conv.w"), ParamKind::Kernel, [c, 2 * c, 3, 3]));
            out.push((format!("dec{s}.conv.b"), ParamKind::Bias, [c, 1, 1, 1]));
            cin = c;
        }
        out.push(("head.w".into(), ParamKind::Kernel, [2, cin, 3, 3]));
        out.push(("head.b".into(), ParamKind::Bias, [2, 1, 1, 1]));
        out
    }
}

fn param_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index as u64)
        .rotate_left(17)
}

/// He-initialized kernels and zero biases for `config`.
pub fn build_network<T: Scalar>(config: &NetConfig, seed: u64) -> Result<ParamStore<T>> {
    config.validate()?;
    let mut store = ParamStore::new();
    for (i, (name, kind, dims)) in config.param_layout().into_iter().enumerate() {
        let value = match kind {
            ParamKind::Bias => Tensor::zeros(Shape::new(dims[0], 1, 1, 1)?),
            ParamKind::Kernel if name.contains(".up.") => he_init_with_fan_in(dims, dims[0], param_seed(seed, i))?,
            ParamKind::Kernel => he_init(dims, param_seed(seed, i))?,
        };
        store.push(name, kind, value)?;
    }
    Ok(store)
}

/// Copies every encoder parameter of `source` into `target`. Shapes must
/// match; returns the number of tensors copied.
pub fn import_encoder<T: Scalar>(target: &mut ParamStore<T>, source: &ParamStore<T>) -> Result<usize> {
    let mut copied = 0;
    for p in target.iter_mut().filter(|p| p.name.starts_with("enc")) {
        let src = source.value(&p.name)?;
        if src.shape() != p.value.shape() {
            return Err(Error::Shape(format!(
                "encoder parameter {} has shape {} in the source, {} in the target",
                p.name,
                src.shape(),
                p.value.shape()
            )));
        }
        p.value = src.clone();
        copied += 1;
    }
    Ok(copied)
}

struct ConvStep<T> {
    input: Tensor<T>,
    pre: Tensor<T>,
}

struct EncoderStage<T> {
    convs: Vec<ConvStep<T>>,
    pool: PoolIndices,
}

struct DecoderStage<T> {
    up_input: Tensor<T>,
    cat: Tensor<T>,
    pre: Tensor<T>,
}

/// Intermediate values kept by [`forward_cached`] for [`backward`].
pub struct ForwardCache<T> {
    encoder: Vec<EncoderStage<T>>,
    decoder: Vec<DecoderStage<T>>,
    head_input: Tensor<T>,
}

fn conv_relu<T: Scalar>(params: &ParamStore<T>, prefix: &str, x: Tensor<T>) -> Result<(ConvStep<T>, Tensor<T>)> {
    let pre = conv2d(&x, params.value(&format!("{prefix}.w"))?, params.value(&format!("{prefix}.b"))?)?;
    let out = relu(&pre);
    Ok((ConvStep { input: x, pre }, out))
}

fn check_input<T: Scalar>(config: &NetConfig, input: &Tensor<T>) -> Result<()> {
    config.validate()?;
    let s = input.shape();
    if s.c != config.input_channels || s.h != config.input_size || s.w != config.input_size {
        return Err(Error::Shape(format!(
            "network expects (n, {}, {}, {}) input, got {s}",
            config.input_channels, config.input_size, config.input_size
        )));
    }
    Ok(())
}

/// Logits and the cache needed by [`backward`]. Accepts a batch.
pub fn forward_cached<T: Scalar>(
    params: &ParamStore<T>,
    config: &NetConfig,
    input: &Tensor<T>,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    check_input(config, input)?;
    let mut x = input.clone();
    let mut encoder = Vec::with_capacity(STAGES);
    for s in 0..STAGES {
        let mut convs = Vec::with_capacity(config.convs_per_stage[s]);
        for j in 0..config.convs_per_stage[s] {
            let (step, out) = conv_relu(params, &format!("enc{s}.conv{j}"), x)?;
            convs.push(step);
            x = out;
        }
        let (pooled, pool) = maxpool2(&x)?;
        encoder.push(EncoderStage { convs, pool });
        x = pooled;
    }
    let mut decoder = Vec::with_capacity(STAGES);
    for s in (0..STAGES).rev() {
        let up = deconv2(&x, params.value(&format!("dec{s}.up.w"))?, params.value(&format!("dec{s}.up.b"))?)?;
        let skip = relu(&encoder[s].convs.last().expect("at least one conv").pre);
        let cat = concat_channels(&up, &skip)?;
        let (step, out) = conv_relu(params, &format!("dec{s}.conv"), cat)?;
        decoder.push(DecoderStage {
            up_input: x,
            cat: step.input,
            pre: step.pre,
        });
        x = out;
    }
    let logits = conv2d(&x, params.value("head.w")?, params.value("head.b")?)?;
    Ok((
        logits,
        ForwardCache {
            encoder,
            decoder,
            head_input: x,
        },
    ))
}

/// Per-pixel class probabilities, channel 0 background, channel 1
/// foreground.
pub fn forward<T: Scalar>(params: &ParamStore<T>, config: &NetConfig, input: &Tensor<T>) -> Result<Tensor<T>> {
    let (logits, _) = forward_cached(params, config, input)?;
    softmax_channels(&logits)
}

/// Accumulates parameter gradients from the gradient with respect to the
/// logits and returns the gradient with respect to the input.
pub fn backward<T: Scalar>(
    params: &mut ParamStore<T>,
    config: &NetConfig,
    cache: &ForwardCache<T>,
    dlogits: &Tensor<T>,
) -> Result<Tensor<T>> {
    let g = conv2d_backward(&cache.head_input, params.value("head.w")?, dlogits)?;
    params.accumulate_grad("head.w", &g.dw)?;
    params.accumulate_grad("head.b", &g.db)?;
    let mut d = g.dx;
    let mut skip_grads: Vec<Option<Tensor<T>>> = (0..STAGES).map(|_| None).collect();
    // decoder ran stage 4 first, so cache index k holds stage STAGES - 1 - k
    for (k, stage) in cache.decoder.iter().enumerate().rev() {
        let s = STAGES - 1 - k;
        let c = config.stage_channels[s];
        d = relu_backward(&stage.pre, &d)?;
        let name = format!("dec{s}.conv");
        let g = conv2d_backward(&stage.cat, params.value(&format!("{name}.w"))?, &d)?;
        params.accumulate_grad(&format!("{name}.w"), &g.dw)?;
        params.accumulate_grad(&format!("{name}.b"), &g.db)?;
        let (dup, dskip) = split_channels(&g.dx, c)?;
        skip_grads[s] = Some(dskip);
        let name = format!("dec{s}.up");
        let g = deconv2_backward(&stage.up_input, params.value(&format!("{name}.w"))?, &dup)?;
        params.accumulate_grad(&format!("{name}.w"), &g.dw)?;
        params.accumulate_grad(&format!("{name}.b"), &g.db)?;
        d = g.dx;
    }
    for s in (0..STAGES).rev() {
        let stage = &cache.encoder[s];
        d = maxpool2_backward(&d, &stage.pool)?;
        let skip = skip_grads[s].take().expect("decoder visited every stage");
        for (a, &b) in d.data_mut().iter_mut().zip(skip.data()) {
            *a = *a + b;
        }
        for (j, step) in stage.convs.iter().enumerate().rev() {
            d = relu_backward(&step.pre, &d)?;
            let name = format!("enc{s}.conv{j}");
            let g = conv2d_backward(&step.input, params.value(&format!("{name}.w"))?, &d)?;
            params.accumulate_grad(&format!("{name}.w"), &g.dw)?;
            params.accumulate_grad(&format!("{name}.b"), &g.db)?;
            d = g.dx;
        }
    }
    Ok(d)
}
