//! A small convolutional classifier for image inputs.
//!
//! Three 3x3 same-padding conv blocks (ReLU + 2x2 average pool), global
//! average pooling and a linear head. Written with direct loops; image
//! sides must be divisible by 8 so the three pooling stages stay exact.

use crate::error::{DistillError, Result};
use rand::Rng;

/// Channel-major image buffer: index = (c * h + y) * w + x.
#[derive(Debug, Clone)]
pub struct Tensor3 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor3 {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_flat(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(DistillError::invalid(format!(
                "image buffer of {} values does not match {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(Tensor3 {
            channels,
            height,
            width,
            data,
        })
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut f64 {
        &mut self.data[(c * self.height + y) * self.width + x]
    }
}

#[derive(Debug, Clone)]
struct ConvLayer {
    in_channels: usize,
    out_channels: usize,
    /// Weights indexed as [out][in][ky][kx], kernel 3x3, flattened.
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl ConvLayer {
    fn init(in_channels: usize, out_channels: usize, rng: &mut impl Rng) -> Self {
        let fan_in = in_channels * 9;
        let bound = (6.0 / (fan_in + out_channels * 9) as f64).sqrt();
        ConvLayer {
            in_channels,
            out_channels,
            weight: (0..out_channels * in_channels * 9)
                .map(|_| rng.gen_range(-bound..bound))
                .collect(),
            bias: vec![0.0; out_channels],
        }
    }

    #[inline]
    fn w(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weight[((o * self.in_channels + i) * 3 + ky) * 3 + kx]
    }

    /// 3x3 correlation with zero padding.
    fn forward(&self, input: &Tensor3) -> Tensor3 {
        let (h, w) = (input.height, input.width);
        let mut out = Tensor3::zeros(self.out_channels, h, w);
        for o in 0..self.out_channels {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = self.bias[o];
                    for i in 0..self.in_channels {
                        for ky in 0..3usize {
                            let sy = y as isize + ky as isize - 1;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            for kx in 0..3usize {
                                let sx = x as isize + kx as isize - 1;
                                if sx < 0 || sx >= w as isize {
                                    continue;
                                }
                                acc += self.w(o, i, ky, kx) * input.at(i, sy as usize, sx as usize);
                            }
                        }
                    }
                    *out.at_mut(o, y, x) = acc;
                }
            }
        }
        out
    }

    /// Accumulates weight/bias grads and returns dL/d(input).
    fn backward(
        &self,
        input: &Tensor3,
        dl_dout: &Tensor3,
        gw: &mut [f64],
        gb: &mut [f64],
    ) -> Tensor3 {
        let (h, w) = (input.height, input.width);
        let mut dl_din = Tensor3::zeros(self.in_channels, h, w);
        for o in 0..self.out_channels {
            for y in 0..h {
                for x in 0..w {
                    let d = dl_dout.at(o, y, x);
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for i in 0..self.in_channels {
                        for ky in 0..3usize {
                            let sy = y as isize + ky as isize - 1;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            for kx in 0..3usize {
                                let sx = x as isize + kx as isize - 1;
                                if sx < 0 || sx >= w as isize {
                                    continue;
                                }
                                let widx = ((o * self.in_channels + i) * 3 + ky) * 3 + kx;
                                gw[widx] += d * input.at(i, sy as usize, sx as usize);
                                *dl_din.at_mut(i, sy as usize, sx as usize) += d * self.w(o, i, ky, kx);
                            }
                        }
                    }
                }
            }
        }
        dl_din
    }
}

fn relu(t: &Tensor3) -> Tensor3 {
    Tensor3 {
        channels: t.channels,
        height: t.height,
        width: t.width,
        data: t.data.iter().map(|&v| v.max(0.0)).collect(),
    }
}

fn relu_backward(pre: &Tensor3, dl_dout: &Tensor3) -> Tensor3 {
    Tensor3 {
        channels: pre.channels,
        height: pre.height,
        width: pre.width,
        data: pre
            .data
            .iter()
            .zip(&dl_dout.data)
            .map(|(&p, &d)| if p > 0.0 { d } else { 0.0 })
            .collect(),
    }
}

fn avg_pool2(t: &Tensor3) -> Tensor3 {
    let (h, w) = (t.height / 2, t.width / 2);
    let mut out = Tensor3::zeros(t.channels, h, w);
    for c in 0..t.channels {
        for y in 0..h {
            for x in 0..w {
                let s = t.at(c, 2 * y, 2 * x)
                    + t.at(c, 2 * y, 2 * x + 1)
                    + t.at(c, 2 * y + 1, 2 * x)
                    + t.at(c, 2 * y + 1, 2 * x + 1);
                *out.at_mut(c, y, x) = s / 4.0;
            }
        }
    }
    out
}

fn avg_pool2_backward(dl_dout: &Tensor3, in_h: usize, in_w: usize) -> Tensor3 {
    let mut out = Tensor3::zeros(dl_dout.channels, in_h, in_w);
    for c in 0..dl_dout.channels {
        for y in 0..dl_dout.height {
            for x in 0..dl_dout.width {
                let d = dl_dout.at(c, y, x) / 4.0;
                *out.at_mut(c, 2 * y, 2 * x) += d;
                *out.at_mut(c, 2 * y, 2 * x + 1) += d;
                *out.at_mut(c, 2 * y + 1, 2 * x) += d;
                *out.at_mut(c, 2 * y + 1, 2 * x + 1) += d;
            }
        }
    }
    out
}

/// Three-block convolutional classifier.
#[derive(Debug, Clone)]
pub struct ConvNet {
    pub in_channels: usize,
    pub side: usize,
    pub class_count: usize,
    convs: [ConvLayer; 3],
    head_w: Vec<f64>,
    head_b: Vec<f64>,
}

struct ConvCache {
    inputs: Vec<Tensor3>,
    preacts: Vec<Tensor3>,
    pooled: Vec<Tensor3>,
    gap: Vec<f64>,
}

impl ConvNet {
    pub fn init(
        in_channels: usize,
        side: usize,
        channels: [usize; 3],
        class_count: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if side % 8 != 0 || side == 0 {
            return Err(DistillError::invalid(format!(
                "image side {side} must be a positive multiple of 8"
            )));
        }
        let convs = [
            ConvLayer::init(in_channels, channels[0], rng),
            ConvLayer::init(channels[0], channels[1], rng),
            ConvLayer::init(channels[1], channels[2], rng),
        ];
        let bound = (6.0 / (channels[2] + class_count) as f64).sqrt();
        Ok(ConvNet {
            in_channels,
            side,
            class_count,
            convs,
            head_w: (0..class_count * channels[2])
                .map(|_| rng.gen_range(-bound..bound))
                .collect(),
            head_b: vec![0.0; class_count],
        })
    }

    pub fn param_count(&self) -> usize {
        self.convs
            .iter()
            .map(|c| c.weight.len() + c.bias.len())
            .sum::<usize>()
            + self.head_w.len()
            + self.head_b.len()
    }

    fn forward_cached(&self, image: &Tensor3) -> (Vec<f64>, ConvCache) {
        let mut inputs = Vec::new();
        let mut preacts = Vec::new();
        let mut pooled = Vec::new();
        let mut cur = image.clone();
        for conv in &self.convs {
            inputs.push(cur.clone());
            let pre = conv.forward(&cur);
            let act = relu(&pre);
            let p = avg_pool2(&act);
            preacts.push(pre);
            pooled.push(p.clone());
            cur = p;
        }
        let feat_ch = cur.channels;
        let area = (cur.height * cur.width) as f64;
        let mut gap = vec![0.0; feat_ch];
        for c in 0..feat_ch {
            let mut s = 0.0;
            for y in 0..cur.height {
                for x in 0..cur.width {
                    s += cur.at(c, y, x);
                }
            }
            gap[c] = s / area;
        }
        let mut logits = self.head_b.clone();
        for o in 0..self.class_count {
            let row = &self.head_w[o * feat_ch..(o + 1) * feat_ch];
            logits[o] += row.iter().zip(&gap).map(|(w, g)| w * g).sum::<f64>();
        }
        (
            logits,
            ConvCache {
                inputs,
                preacts,
                pooled,
                gap,
            },
        )
    }

    pub fn forward(&self, image: &Tensor3) -> Vec<f64> {
        self.forward_cached(image).0
    }

    /// Pooled features from the last conv block (the head's input).
    pub fn features(&self, image: &Tensor3) -> Vec<f64> {
        self.forward_cached(image).1.gap
    }

    /// One sample's backward pass; grads accumulate in flat-parameter order.
    fn backward(&self, cache: &ConvCache, dl_dlogits: &[f64], grads: &mut [f64]) {
        let feat_ch = self.convs[2].out_channels;
        let mut layer_offsets = Vec::new();
        let mut offset = 0;
        for conv in &self.convs {
            layer_offsets.push(offset);
            offset += conv.weight.len() + conv.bias.len();
        }
        let head_w_base = offset;
        let head_b_base = offset + self.head_w.len();

        let mut d_gap = vec![0.0; feat_ch];
        for o in 0..self.class_count {
            let d = dl_dlogits[o];
            grads[head_b_base + o] += d;
            for c in 0..feat_ch {
                grads[head_w_base + o * feat_ch + c] += d * cache.gap[c];
                d_gap[c] += d * self.head_w[o * feat_ch + c];
            }
        }
        let last = &cache.pooled[2];
        let area = (last.height * last.width) as f64;
        let mut d_cur = Tensor3::zeros(last.channels, last.height, last.width);
        for c in 0..feat_ch {
            let d = d_gap[c] / area;
            for y in 0..last.height {
                for x in 0..last.width {
                    *d_cur.at_mut(c, y, x) = d;
                }
            }
        }
        for layer in (0..3).rev() {
            let conv = &self.convs[layer];
            let d_act =
                avg_pool2_backward(&d_cur, cache.preacts[layer].height, cache.preacts[layer].width);
            let d_pre = relu_backward(&cache.preacts[layer], &d_act);
            let base = layer_offsets[layer];
            let (gw, gb) = grads[base..base + conv.weight.len() + conv.bias.len()]
                .split_at_mut(conv.weight.len());
            d_cur = conv.backward(&cache.inputs[layer], &d_pre, gw, gb);
        }
    }

    /// Mean cross-entropy over the batch plus gradients in flat order.
    pub fn loss_and_grad(&self, images: &[Tensor3], labels: &[usize]) -> (f64, Vec<f64>) {
        let mut grads = vec![0.0; self.param_count()];
        let mut loss = 0.0;
        let scale = 1.0 / images.len() as f64;
        for (img, &label) in images.iter().zip(labels) {
            let (logits, cache) = self.forward_cached(img);
            let (l, mut dl) = super::cross_entropy(&logits, label);
            loss += l * scale;
            for d in &mut dl {
                *d *= scale;
            }
            self.backward(&cache, &dl, &mut grads);
        }
        (loss, grads)
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for conv in &self.convs {
            out.extend_from_slice(&conv.weight);
            out.extend_from_slice(&conv.bias);
        }
        out.extend_from_slice(&self.head_w);
        out.extend_from_slice(&self.head_b);
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut it = params.iter();
        for conv in &mut self.convs {
            for v in conv.weight.iter_mut().chain(conv.bias.iter_mut()) {
                *v = *it.next().unwrap();
            }
        }
        for v in self.head_w.iter_mut().chain(self.head_b.iter_mut()) {
            *v = *it.next().unwrap();
        }
    }

    pub fn predict(&self, image: &Tensor3) -> usize {
        let logits = self.forward(image);
        logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap()
    }
}
