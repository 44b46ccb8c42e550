//! Prior-assisted shape learning network: forward pass and manual backprop.

use rayon::prelude::*;

use super::attention::{fuse, fuse_backward};
use super::config::{ATTENTION_LEVELS, LEVELS};
use super::ops::{conv_backward, conv_forward, leaky_relu_backward, leaky_relu_in_place};
use super::params::{EncoderLayer, ModelParams};
use super::volume::Volume;
use crate::error::{Error, Result};
use crate::priors::PriorBank;
use crate::scalar::Scalar;
use crate::voxel::{DenseField, VoxelGrid};

/// Encoder outputs, level 1 first. Level `i` has side `N / 2^i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePyramid<T> {
    pub levels: Vec<Volume<T>>,
}

impl<T: Scalar> FeaturePyramid<T> {
    /// Features of 1-based `level`.
    pub fn level(&self, level: usize) -> &Volume<T> {
        &self.levels[level - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.levels.iter().all(Volume::is_finite)
    }
}

struct EncoderTrace<T> {
    input: Volume<T>,
    levels: Vec<Volume<T>>,
}

fn run_encoder<T: Scalar>(params: &ModelParams<T>, layers: &[EncoderLayer], input: Volume<T>) -> EncoderTrace<T> {
    let mut levels: Vec<Volume<T>> = Vec::with_capacity(LEVELS);
    for layer in layers {
        let src = levels.last().unwrap_or(&input);
        let branches: Vec<Volume<T>> = layer
            .iter()
            .map(|s| conv_forward(&s.op, params.weight(s), params.bias(s), src))
            .collect();
        let mut out = if branches.len() == 1 {
            branches.into_iter().next().unwrap()
        } else {
            Volume::concat(&branches.iter().collect::<Vec<_>>()).expect("branches share a side")
        };
        leaky_relu_in_place(&mut out);
        levels.push(out);
    }
    EncoderTrace { input, levels }
}

/// Backpropagates level gradients (index 0 = level 1) through an encoder.
fn encoder_backward<T: Scalar>(
    params: &ModelParams<T>,
    layers: &[EncoderLayer],
    trace: &EncoderTrace<T>,
    mut grad_levels: Vec<Option<Volume<T>>>,
    grads: &mut [T],
) {
    for l in (0..layers.len()).rev() {
        let Some(mut g) = grad_levels[l].take() else {
            continue;
        };
        leaky_relu_backward(&trace.levels[l], &mut g);
        let layer = &layers[l];
        let widths: Vec<usize> = layer.iter().map(|s| s.op.out_ch).collect();
        let parts = if layer.len() == 1 { vec![g] } else { g.split(&widths) };
        let src = if l == 0 { &trace.input } else { &trace.levels[l - 1] };
        let mut grad_src: Option<Volume<T>> = None;
        for (slot, gpart) in layer.iter().zip(&parts) {
            let (gw, rest) = split_two(grads, slot.weight.clone(), slot.bias.clone());
            let gi = conv_backward(&slot.op, params.weight(slot), src, gpart, gw, rest, l > 0);
            if let Some(gi) = gi {
                match grad_src.as_mut() {
                    Some(acc) => acc.add_assign(&gi),
                    None => grad_src = Some(gi),
                }
            }
        }
        if l > 0 {
            if let Some(gs) = grad_src {
                match grad_levels[l - 1].as_mut() {
                    Some(acc) => acc.add_assign(&gs),
                    None => grad_levels[l - 1] = Some(gs),
                }
            }
        }
    }
}

/// Disjoint mutable views of the weight and bias ranges (bias follows weight).
fn split_two<T>(
    grads: &mut [T],
    w: std::ops::Range<usize>,
    b: std::ops::Range<usize>,
) -> (&mut [T], &mut [T]) {
    debug_assert_eq!(w.end, b.start);
    let (head, tail) = grads[w.start..b.end].split_at_mut(w.len());
    (head, tail)
}

fn check_grid<T: Scalar>(params: &ModelParams<T>, grid: &VoxelGrid) -> Result<()> {
    let n = params.config().resolution;
    if grid.resolution() != n {
        return Err(Error::Shape(format!(
            "grid resolution {} but model expects {n}",
            grid.resolution()
        )));
    }
    Ok(())
}

fn check_bank<T: Scalar>(params: &ModelParams<T>, priors: &[VoxelGrid]) -> Result<()> {
    if priors.is_empty() {
        return Err(Error::Config("prior bank is empty".into()));
    }
    priors.iter().try_for_each(|p| check_grid(params, p))
}

pub fn encode_partial<T: Scalar>(params: &ModelParams<T>, grid: &VoxelGrid) -> Result<FeaturePyramid<T>> {
    check_grid(params, grid)?;
    let trace = run_encoder(params, &params.layout().input_encoder, Volume::from_grid(grid));
    Ok(FeaturePyramid { levels: trace.levels })
}

pub fn encode_priors<T: Scalar>(params: &ModelParams<T>, bank: &PriorBank) -> Result<Vec<FeaturePyramid<T>>> {
    encode_prior_grids(params, &bank.priors)
}

pub fn encode_prior_grids<T: Scalar>(params: &ModelParams<T>, priors: &[VoxelGrid]) -> Result<Vec<FeaturePyramid<T>>> {
    check_bank(params, priors)?;
    Ok(priors
        .par_iter()
        .map(|p| FeaturePyramid {
            levels: run_encoder(params, &params.layout().prior_encoder, Volume::from_grid(p)).levels,
        })
        .collect())
}

struct DecoderTrace<T> {
    d1: Volume<T>,
    c1: Volume<T>,
    d2: Volume<T>,
    c2: Volume<T>,
    d3: Volume<T>,
    /// two channels: empty, occupied
    probs: Volume<T>,
}

fn decode_traced<T: Scalar>(params: &ModelParams<T>, f2: &Volume<T>, f3: &Volume<T>, f4: &Volume<T>) -> Result<DecoderTrace<T>> {
    let c = params.config().channels;
    let expect = |v: &Volume<T>, level: usize| -> Result<()> {
        let side = params.config().level_side(level);
        if v.channels() != c[level - 1] || v.side() != side {
            return Err(Error::Shape(format!(
                "level {level} embedding is {}x{}^3, expected {}x{side}^3",
                v.channels(),
                v.side(),
                c[level - 1]
            )));
        }
        Ok(())
    };
    expect(f2, 2)?;
    expect(f3, 3)?;
    expect(f4, 4)?;

    let dec = &params.layout().decoder;
    let layer = |i: usize, src: &Volume<T>, act: bool| {
        let s = &dec[i];
        let mut out = conv_forward(&s.op, params.weight(s), params.bias(s), src);
        if act {
            leaky_relu_in_place(&mut out);
        }
        out
    };
    let d1 = layer(0, f4, true);
    let c1 = Volume::concat(&[&d1, f3])?;
    let d2 = layer(1, &c1, true);
    let c2 = Volume::concat(&[&d2, f2])?;
    let d3 = layer(2, &c2, true);
    let logits = layer(3, &d3, false);
    let probs = two_way_softmax(&logits);
    Ok(DecoderTrace { d1, c1, d2, c2, d3, probs })
}

fn two_way_softmax<T: Scalar>(logits: &Volume<T>) -> Volume<T> {
    let mut probs = Volume::zeros(2, logits.side());
    let p = logits.positions();
    let (l0, l1) = (logits.channel(0), logits.channel(1));
    let data = probs.data_mut();
    for i in 0..p {
        let m = l0[i].max(l1[i]);
        let e0 = (l0[i] - m).exp();
        let e1 = (l1[i] - m).exp();
        let s = e0 + e1;
        data[i] = e0 / s;
        data[p + i] = e1 / s;
    }
    probs
}

/// Returns gradients for `[F2, F3, F4]`.
fn decoder_backward<T: Scalar>(
    params: &ModelParams<T>,
    f: [&Volume<T>; 3],
    trace: &DecoderTrace<T>,
    grad_occupied: &[T],
    grads: &mut [T],
) -> [Volume<T>; 3] {
    let dec = &params.layout().decoder;
    let p = trace.probs.positions();
    // d p1 / d l1 = p1 p0, d p1 / d l0 = -p1 p0
    let mut g_logits = Volume::zeros(2, trace.probs.side());
    {
        let (p0, p1) = (trace.probs.channel(0), trace.probs.channel(1));
        let data = g_logits.data_mut();
        for i in 0..p {
            let d = grad_occupied[i] * p0[i] * p1[i];
            data[i] = -d;
            data[p + i] = d;
        }
    }
    let mut back = |i: usize, src: &Volume<T>, g: &Volume<T>| {
        let s = &dec[i];
        let (gw, gb) = split_two(grads, s.weight.clone(), s.bias.clone());
        conv_backward(&s.op, params.weight(s), src, g, gw, gb, true).expect("input grad requested")
    };
    let mut g_d3 = back(3, &trace.d3, &g_logits);
    leaky_relu_backward(&trace.d3, &mut g_d3);
    let g_c2 = back(2, &trace.c2, &g_d3);
    let mut halves = g_c2.split(&[trace.d2.channels(), f[0].channels()]);
    let g_f2 = halves.pop().unwrap();
    let mut g_d2 = halves.pop().unwrap();
    leaky_relu_backward(&trace.d2, &mut g_d2);
    let g_c1 = back(1, &trace.c1, &g_d2);
    let mut halves = g_c1.split(&[trace.d1.channels(), f[1].channels()]);
    let g_f3 = halves.pop().unwrap();
    let mut g_d1 = halves.pop().unwrap();
    leaky_relu_backward(&trace.d1, &mut g_d1);
    let g_f4 = back(0, f[2], &g_d1);
    [g_f2, g_f3, g_f4]
}

/// Two-channel (empty, occupied) probabilities for fused embeddings.
pub fn decode_probabilities<T: Scalar>(
    params: &ModelParams<T>,
    f2: &Volume<T>,
    f3: &Volume<T>,
    f4: &Volume<T>,
) -> Result<Volume<T>> {
    Ok(decode_traced(params, f2, f3, f4)?.probs)
}

/// Occupied-channel probabilities as a field.
pub fn decode<T: Scalar>(params: &ModelParams<T>, f2: &Volume<T>, f3: &Volume<T>, f4: &Volume<T>) -> Result<DenseField<T>> {
    let probs = decode_probabilities(params, f2, f3, f4)?;
    Ok(occupied_field(&probs))
}

fn occupied_field<T: Scalar>(probs: &Volume<T>) -> DenseField<T> {
    DenseField::from_values_unchecked(probs.side(), probs.channel(1).to_vec())
}

fn fused_levels<T: Scalar>(x: &FeaturePyramid<T>, priors: &[FeaturePyramid<T>]) -> Result<Vec<Volume<T>>> {
    ATTENTION_LEVELS
        .iter()
        .map(|&l| {
            let ys: Vec<&Volume<T>> = priors.iter().map(|p| p.level(l)).collect();
            fuse(x.level(l), &ys)
        })
        .collect()
}

/// Completion from precomputed prior features.
pub fn forward_with_priors<T: Scalar>(
    params: &ModelParams<T>,
    grid: &VoxelGrid,
    priors: &[FeaturePyramid<T>],
) -> Result<DenseField<T>> {
    let x = encode_partial(params, grid)?;
    let f = fused_levels(&x, priors)?;
    decode(params, &f[0], &f[1], &f[2])
}

pub fn forward<T: Scalar>(params: &ModelParams<T>, grid: &VoxelGrid, bank: &PriorBank) -> Result<DenseField<T>> {
    check_grid(params, grid)?;
    let priors = encode_priors(params, bank)?;
    forward_with_priors(params, grid, &priors)
}

/// Forward over many inputs, encoding the priors once.
pub fn forward_batch<T: Scalar>(params: &ModelParams<T>, grids: &[VoxelGrid], bank: &PriorBank) -> Result<Vec<DenseField<T>>> {
    let priors = encode_priors(params, bank)?;
    grids
        .par_iter()
        .map(|g| forward_with_priors(params, g, &priors))
        .collect()
}

/// Loss value and `dLoss/dO` for one sample of a batch.
pub struct SampleLoss<T> {
    pub value: T,
    pub grad: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct BatchGradient<T> {
    /// Mean of the per-sample losses.
    pub loss: T,
    pub per_sample: Vec<T>,
    /// Gradient of `loss` w.r.t. every parameter, in layout order.
    pub gradient: Vec<T>,
    pub fields: Vec<DenseField<T>>,
}

struct SampleResult<T> {
    loss: T,
    field: DenseField<T>,
    grads: Vec<T>,
    /// `[level][prior]`
    grad_priors: Vec<Vec<Volume<T>>>,
}

/// Mean loss over `inputs` and its parameter gradient.
///
/// `loss(i, field)` scores sample `i`. Per-sample work runs in parallel but all
/// reductions happen in input order, so results are reproducible.
pub fn batch_gradient<T, F>(
    params: &ModelParams<T>,
    inputs: &[&VoxelGrid],
    priors: &[VoxelGrid],
    loss: F,
) -> Result<BatchGradient<T>>
where
    T: Scalar,
    F: Fn(usize, &DenseField<T>) -> Result<SampleLoss<T>> + Sync,
{
    if inputs.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    check_bank(params, priors)?;
    for g in inputs {
        check_grid(params, g)?;
    }
    let layout = params.layout();
    let prior_traces: Vec<EncoderTrace<T>> = priors
        .par_iter()
        .map(|p| run_encoder(params, &layout.prior_encoder, Volume::from_grid(p)))
        .collect();
    let prior_levels: Vec<FeaturePyramid<T>> = prior_traces
        .iter()
        .map(|t| FeaturePyramid { levels: t.levels.clone() })
        .collect();
    let inv_batch = T::one() / T::of(inputs.len() as f64);

    let samples: Vec<SampleResult<T>> = inputs
        .par_iter()
        .enumerate()
        .map(|(i, grid)| -> Result<SampleResult<T>> {
            let enc = run_encoder(params, &layout.input_encoder, Volume::from_grid(grid));
            let x = FeaturePyramid { levels: enc.levels };
            let f = fused_levels(&x, &prior_levels)?;
            let trace = decode_traced(params, &f[0], &f[1], &f[2])?;
            let field = occupied_field(&trace.probs);
            let SampleLoss { value, grad } = loss(i, &field)?;
            if grad.len() != field.len() {
                return Err(Error::Shape("loss gradient does not match field".into()));
            }
            let scaled: Vec<T> = grad.iter().map(|&g| g * inv_batch).collect();
            let mut grads = vec![T::zero(); layout.total];
            let g_f = decoder_backward(params, [&f[0], &f[1], &f[2]], &trace, &scaled, &mut grads);

            let mut grad_levels: Vec<Option<Volume<T>>> = vec![None; LEVELS];
            let mut grad_priors = Vec::with_capacity(ATTENTION_LEVELS.len());
            for (gf, &l) in g_f.iter().zip(&ATTENTION_LEVELS) {
                let ys: Vec<&Volume<T>> = prior_levels.iter().map(|p| p.level(l)).collect();
                let (gx, gys) = fuse_backward(x.level(l), &ys, gf);
                grad_levels[l - 1] = Some(gx);
                grad_priors.push(gys);
            }
            let enc = EncoderTrace {
                input: enc.input,
                levels: x.levels,
            };
            encoder_backward(params, &layout.input_encoder, &enc, grad_levels, &mut grads);
            Ok(SampleResult {
                loss: value,
                field,
                grads,
                grad_priors,
            })
        })
        .collect::<Result<_>>()?;

    let mut gradient = vec![T::zero(); layout.total];
    let mut prior_grads: Vec<Vec<Option<Volume<T>>>> = (0..priors.len()).map(|_| vec![None; LEVELS]).collect();
    let mut per_sample = Vec::with_capacity(samples.len());
    let mut fields = Vec::with_capacity(samples.len());
    for s in samples {
        for (a, &b) in gradient.iter_mut().zip(&s.grads) {
            *a += b;
        }
        for (gys, &l) in s.grad_priors.into_iter().zip(&ATTENTION_LEVELS) {
            for (m, gy) in gys.into_iter().enumerate() {
                match prior_grads[m][l - 1].as_mut() {
                    Some(acc) => acc.add_assign(&gy),
                    None => prior_grads[m][l - 1] = Some(gy),
                }
            }
        }
        per_sample.push(s.loss);
        fields.push(s.field);
    }

    let prior_param_grads: Vec<Vec<T>> = prior_traces
        .par_iter()
        .zip(prior_grads)
        .map(|(trace, g)| {
            let mut grads = vec![T::zero(); layout.total];
            encoder_backward(params, &layout.prior_encoder, trace, g, &mut grads);
            grads
        })
        .collect();
    for g in &prior_param_grads {
        for (a, &b) in gradient.iter_mut().zip(g) {
            *a += b;
        }
    }

    let loss = per_sample.iter().copied().sum::<T>() * inv_batch;
    Ok(BatchGradient {
        loss,
        per_sample,
        gradient,
        fields,
    })
}
