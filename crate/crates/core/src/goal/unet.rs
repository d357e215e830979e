//! Five-level U-Net inference over the 181-channel trajectory raster.
//!
//! Encoder level `i` (1..=5): two 3x3 convolutions (stride 1, zero padding 1),
//! each followed by ReLU; a 2x2 max-pool sits between consecutive levels.
//! Decoder stage `i` runs at encoder level `6 - i`: `dec1` convolves the
//! bottleneck, every later stage upsamples the previous stage 2x (bilinear,
//! half-pixel centers, edge clamped) and concatenates `[upsampled, skip]`
//! along channels before its two 3x3 conv + ReLU. A 1x1 convolution and a
//! sigmoid produce the single-channel output.
//!
//! Weights follow `[out, in, kh, kw]` layout under the names
//! `enc{i}.conv{j}.weight|bias`, `dec{i}.conv{j}.weight|bias` and
//! `head.weight|bias`.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::weights::{Tensor, WeightContainer, WeightsError};
use crate::raster::{RasterStack, CHANNELS};
use crate::scene::Heatmap;

pub const LEVELS: usize = 5;

/// Upper bound on the im2col scratch buffer, in floats.
const COL_BUDGET: usize = 1 << 23;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UNetSpec {
    pub encoder_channels: [usize; LEVELS],
    pub decoder_channels: [usize; LEVELS],
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Default for UNetSpec {
    fn default() -> Self {
        UNetSpec {
            encoder_channels: [256, 256, 512, 512, 512],
            decoder_channels: [512, 512, 512, 256, 256],
            in_channels: CHANNELS,
            out_channels: 1,
        }
    }
}

impl UNetSpec {
    /// Same topology with narrower layers; used where the full widths are
    /// too slow.
    pub fn with_widths(encoder_channels: [usize; LEVELS], decoder_channels: [usize; LEVELS]) -> Self {
        UNetSpec {
            encoder_channels,
            decoder_channels,
            ..UNetSpec::default()
        }
    }

    /// Spatial sizes must survive four halvings.
    pub const fn size_multiple() -> usize {
        1 << (LEVELS - 1)
    }

    /// `(name, dims)` of every parameter, in canonical order.
    pub fn schema(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut conv = |prefix: String, cin: usize, cout: usize, k: usize| {
            out.push((format!("{prefix}.weight"), vec![cout, cin, k, k]));
            out.push((format!("{prefix}.bias"), vec![cout]));
        };
        let mut cin = self.in_channels;
        for (i, &c) in self.encoder_channels.iter().enumerate() {
            conv(format!("enc{}.conv1", i + 1), cin, c, 3);
            conv(format!("enc{}.conv2", i + 1), c, c, 3);
            cin = c;
        }
        for (i, &c) in self.decoder_channels.iter().enumerate() {
            let stage_in = if i == 0 {
                cin
            } else {
                cin + self.encoder_channels[LEVELS - 1 - i]
            };
            conv(format!("dec{}.conv1", i + 1), stage_in, c, 3);
            conv(format!("dec{}.conv2", i + 1), c, c, 3);
            cin = c;
        }
        conv("head".to_string(), cin, self.out_channels, 1);
        out
    }

    pub fn zero_weights(&self) -> WeightContainer {
        WeightContainer::new(
            self.schema()
                .into_iter()
                .map(|(name, dims)| Tensor::zeros(name, dims))
                .collect(),
        )
        .expect("schema names are unique")
    }

    /// Schema-complete container with i.i.d. uniform(-scale, scale) values,
    /// drawn in schema order from a ChaCha8 stream seeded with `seed`.
    pub fn random_weights(&self, seed: u64, scale: f32) -> WeightContainer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new(-scale, scale);
        WeightContainer::new(
            self.schema()
                .into_iter()
                .map(|(name, dims)| {
                    let n = dims.iter().product();
                    let data = (0..n).map(|_| dist.sample(&mut rng)).collect();
                    Tensor { name, dims, data }
                })
                .collect(),
        )
        .expect("schema names are unique")
    }

    /// Reads the layer widths off the `conv1` and `head` weight shapes, then
    /// validates the whole container against the resulting schema.
    pub fn infer(weights: &WeightContainer) -> Result<Self, WeightsError> {
        let out_dim = |name: &str, axis: usize| -> Result<usize, WeightsError> {
            let t = weights
                .get(name)
                .ok_or_else(|| WeightsError::MissingTensor(name.to_string()))?;
            t.dims.get(axis).copied().ok_or_else(|| WeightsError::Shape {
                name: name.to_string(),
                expected: vec![0; 4],
                found: t.dims.clone(),
            })
        };
        let mut spec = UNetSpec {
            in_channels: out_dim("enc1.conv1.weight", 1)?,
            out_channels: out_dim("head.weight", 0)?,
            ..UNetSpec::default()
        };
        for i in 0..LEVELS {
            spec.encoder_channels[i] = out_dim(&format!("enc{}.conv1.weight", i + 1), 0)?;
            spec.decoder_channels[i] = out_dim(&format!("dec{}.conv1.weight", i + 1), 0)?;
        }
        spec.validate(weights)?;
        Ok(spec)
    }

    /// Checks that `weights` holds every schema tensor with the right shape.
    pub fn validate(&self, weights: &WeightContainer) -> Result<(), WeightsError> {
        for (name, dims) in self.schema() {
            weights.expect(&name, &dims)?;
        }
        Ok(())
    }
}

/// `channels x height x width` activations.
#[derive(Debug, Clone)]
struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    fn plane(&self) -> usize {
        self.height * self.width
    }
}

struct Conv<'a> {
    weight: &'a [f32],
    bias: &'a [f32],
    cin: usize,
    cout: usize,
}

impl<'a> Conv<'a> {
    fn bind(weights: &'a WeightContainer, prefix: &str, cin: usize, cout: usize, k: usize) -> Result<Self, WeightsError> {
        let w = weights.expect(&format!("{prefix}.weight"), &[cout, cin, k, k])?;
        let b = weights.expect(&format!("{prefix}.bias"), &[cout])?;
        Ok(Conv {
            weight: &w.data,
            bias: &b.data,
            cin,
            cout,
        })
    }

    /// 3x3 convolution, zero padding 1, then ReLU.
    fn conv3x3_relu(&self, x: &FeatureMap) -> FeatureMap {
        debug_assert_eq!(x.channels, self.cin);
        let (h, w) = (x.height, x.width);
        let plane = h * w;
        let k = self.cin * 9;
        let mut out = vec![0.0f32; self.cout * plane];
        let rows_per_chunk = (COL_BUDGET / (k * w)).clamp(1, h);
        let mut col = vec![0.0f32; k * rows_per_chunk * w];
        let mut r0 = 0;
        while r0 < h {
            let r1 = (r0 + rows_per_chunk).min(h);
            let n = (r1 - r0) * w;
            fill_im2col(x, r0, r1, &mut col[..k * n]);
            // SAFETY: slices cover m*k, k*n and the strided m x n window of `out`
            // starting at column r0*w with row stride `plane`.
            unsafe {
                matrixmultiply::sgemm(
                    self.cout,
                    k,
                    n,
                    1.0,
                    self.weight.as_ptr(),
                    k as isize,
                    1,
                    col.as_ptr(),
                    n as isize,
                    1,
                    0.0,
                    out.as_mut_ptr().add(r0 * w),
                    plane as isize,
                    1,
                );
            }
            r0 = r1;
        }
        for (o, &b) in out.chunks_exact_mut(plane).zip(self.bias) {
            for v in o {
                *v = (*v + b).max(0.0);
            }
        }
        FeatureMap {
            channels: self.cout,
            height: h,
            width: w,
            data: out,
        }
    }

    /// 1x1 convolution without activation.
    fn conv1x1(&self, x: &FeatureMap) -> FeatureMap {
        let plane = x.plane();
        let mut out = vec![0.0f32; self.cout * plane];
        // SAFETY: a is cout x cin, b is cin x plane, c is cout x plane; all contiguous.
        unsafe {
            matrixmultiply::sgemm(
                self.cout,
                self.cin,
                plane,
                1.0,
                self.weight.as_ptr(),
                self.cin as isize,
                1,
                x.data.as_ptr(),
                plane as isize,
                1,
                0.0,
                out.as_mut_ptr(),
                plane as isize,
                1,
            );
        }
        for (o, &b) in out.chunks_exact_mut(plane).zip(self.bias) {
            for v in o {
                *v += b;
            }
        }
        FeatureMap {
            channels: self.cout,
            height: x.height,
            width: x.width,
            data: out,
        }
    }
}

/// Column matrix for output rows `[r0, r1)`: row `ci*9 + ky*3 + kx`, one
/// column per output pixel.
fn fill_im2col(x: &FeatureMap, r0: usize, r1: usize, col: &mut [f32]) {
    let (h, w) = (x.height as isize, x.width);
    let n = (r1 - r0) * w;
    for ci in 0..x.channels {
        let src = &x.data[ci * x.plane()..(ci + 1) * x.plane()];
        for ky in 0..3isize {
            for kx in 0..3isize {
                let row = &mut col[(ci * 9 + (ky * 3 + kx) as usize) * n..][..n];
                for (ri, r) in (r0..r1).enumerate() {
                    let dst = &mut row[ri * w..(ri + 1) * w];
                    let sr = r as isize + ky - 1;
                    if sr < 0 || sr >= h {
                        dst.fill(0.0);
                        continue;
                    }
                    let srow = &src[sr as usize * w..(sr as usize + 1) * w];
                    match kx {
                        0 => {
                            dst[0] = 0.0;
                            dst[1..].copy_from_slice(&srow[..w - 1]);
                        }
                        1 => dst.copy_from_slice(srow),
                        _ => {
                            dst[..w - 1].copy_from_slice(&srow[1..]);
                            dst[w - 1] = 0.0;
                        }
                    }
                }
            }
        }
    }
}

fn max_pool2(x: &FeatureMap) -> FeatureMap {
    let (h, w) = (x.height / 2, x.width / 2);
    let mut data = Vec::with_capacity(x.channels * h * w);
    for c in 0..x.channels {
        let src = &x.data[c * x.plane()..(c + 1) * x.plane()];
        for r in 0..h {
            for q in 0..w {
                let i = 2 * r * x.width + 2 * q;
                let m = src[i].max(src[i + 1]).max(src[i + x.width]).max(src[i + x.width + 1]);
                data.push(m);
            }
        }
    }
    FeatureMap {
        channels: x.channels,
        height: h,
        width: w,
        data,
    }
}

/// Source index pair and weight for one output coordinate of a 2x bilinear
/// upsample with half-pixel centers.
fn bilinear_taps(out_len: usize, in_len: usize) -> Vec<(usize, usize, f32)> {
    (0..out_len)
        .map(|o| {
            let src = ((o as f32 + 0.5) * 0.5 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(in_len - 1);
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, src - i0 as f32)
        })
        .collect()
}

fn upsample2(x: &FeatureMap) -> FeatureMap {
    let (h, w) = (x.height * 2, x.width * 2);
    let rows = bilinear_taps(h, x.height);
    let cols = bilinear_taps(w, x.width);
    let mut data = Vec::with_capacity(x.channels * h * w);
    for c in 0..x.channels {
        let src = &x.data[c * x.plane()..(c + 1) * x.plane()];
        for &(r0, r1, ly) in &rows {
            for &(c0, c1, lx) in &cols {
                let top = src[r0 * x.width + c0] * (1.0 - lx) + src[r0 * x.width + c1] * lx;
                let bot = src[r1 * x.width + c0] * (1.0 - lx) + src[r1 * x.width + c1] * lx;
                data.push(top * (1.0 - ly) + bot * ly);
            }
        }
    }
    FeatureMap {
        channels: x.channels,
        height: h,
        width: w,
        data,
    }
}

fn concat(a: FeatureMap, b: &FeatureMap) -> FeatureMap {
    debug_assert_eq!((a.height, a.width), (b.height, b.width));
    let mut data = a.data;
    data.extend_from_slice(&b.data);
    FeatureMap {
        channels: a.channels + b.channels,
        height: a.height,
        width: a.width,
        data,
    }
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Runs the network on a raster stack and returns the sigmoid heatmap.
pub fn unet_forward(spec: &UNetSpec, weights: &WeightContainer, input: &RasterStack) -> Result<Heatmap, WeightsError> {
    spec.validate(weights)?;
    let geom = input.geometry;
    let (h, w) = (geom.height_px, geom.width_px);
    let expected = [spec.in_channels, h, w];
    let m = UNetSpec::size_multiple();
    if input.data.len() != spec.in_channels * h * w || h % m != 0 || w % m != 0 {
        return Err(WeightsError::Shape {
            name: format!("input (spatial size must be a multiple of {m})"),
            expected: expected.to_vec(),
            found: vec![input.data.len() / (h * w).max(1), h, w],
        });
    }

    let mut x = FeatureMap {
        channels: spec.in_channels,
        height: h,
        width: w,
        data: input.data.clone(),
    };
    let mut skips = Vec::with_capacity(LEVELS);
    let mut cin = spec.in_channels;
    for (i, &c) in spec.encoder_channels.iter().enumerate() {
        if i > 0 {
            x = max_pool2(&x);
        }
        let name = format!("enc{}", i + 1);
        x = Conv::bind(weights, &format!("{name}.conv1"), cin, c, 3)?.conv3x3_relu(&x);
        x = Conv::bind(weights, &format!("{name}.conv2"), c, c, 3)?.conv3x3_relu(&x);
        cin = c;
        if i + 1 < LEVELS {
            skips.push(x.clone());
        }
    }
    for (i, &c) in spec.decoder_channels.iter().enumerate() {
        if i > 0 {
            let skip = skips.pop().expect("one skip per upsampling stage");
            x = concat(upsample2(&x), &skip);
        }
        let name = format!("dec{}", i + 1);
        x = Conv::bind(weights, &format!("{name}.conv1"), x.channels, c, 3)?.conv3x3_relu(&x);
        x = Conv::bind(weights, &format!("{name}.conv2"), c, c, 3)?.conv3x3_relu(&x);
    }
    let out = Conv::bind(weights, "head", x.channels, spec.out_channels, 1)?.conv1x1(&x);
    let values = out.data[..h * w].iter().map(|&v| sigmoid(v) as f64).collect();
    Ok(Heatmap { geometry: geom, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::GridGeometry;

    fn tiny() -> UNetSpec {
        UNetSpec::with_widths([4, 4, 8, 8, 8], [8, 8, 8, 4, 4])
    }

    #[test]
    fn spec_is_inferred_from_weights() {
        let w = tiny().random_weights(3, 0.05);
        assert_eq!(UNetSpec::infer(&w).unwrap(), tiny());
        let partial = WeightContainer::new(w.tensors()[..4].to_vec()).unwrap();
        assert!(matches!(UNetSpec::infer(&partial), Err(WeightsError::MissingTensor(_))));
    }

    #[test]
    fn schema_matches_channel_plan() {
        let s = UNetSpec::default().schema();
        assert_eq!(s.len(), 2 * (2 * LEVELS * 2 + 1));
        let find = |n: &str| s.iter().find(|(name, _)| name == n).unwrap().1.clone();
        assert_eq!(find("enc1.conv1.weight"), vec![256, 181, 3, 3]);
        assert_eq!(find("enc5.conv2.weight"), vec![512, 512, 3, 3]);
        assert_eq!(find("dec1.conv1.weight"), vec![512, 512, 3, 3]);
        assert_eq!(find("dec2.conv1.weight"), vec![512, 1024, 3, 3]);
        assert_eq!(find("dec4.conv1.weight"), vec![256, 768, 3, 3]);
        assert_eq!(find("dec5.conv1.weight"), vec![256, 512, 3, 3]);
        assert_eq!(find("head.weight"), vec![1, 256, 1, 1]);
        assert_eq!(find("head.bias"), vec![1]);
    }

    #[test]
    fn zero_network_outputs_half() {
        let spec = tiny();
        let input = RasterStack::zeros(GridGeometry::square(32, 5.0).unwrap());
        let out = unet_forward(&spec, &spec.zero_weights(), &input).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn missing_tensor_is_named() {
        let spec = tiny();
        let full = spec.random_weights(3, 0.05);
        let partial = WeightContainer::new(
            full.tensors().iter().filter(|t| t.name != "dec3.conv2.bias").cloned().collect(),
        )
        .unwrap();
        let input = RasterStack::zeros(GridGeometry::square(16, 5.0).unwrap());
        match unet_forward(&spec, &partial, &input) {
            Err(WeightsError::MissingTensor(n)) => assert_eq!(n, "dec3.conv2.bias"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn odd_size_input_is_shape_error() {
        let spec = tiny();
        let input = RasterStack::zeros(GridGeometry::square(20, 5.0).unwrap());
        assert!(matches!(
            unet_forward(&spec, &spec.zero_weights(), &input),
            Err(WeightsError::Shape { .. })
        ));
    }

    /// Direct 3x3 convolution used to check the im2col path.
    fn naive_conv(x: &FeatureMap, w: &[f32], b: &[f32], cout: usize) -> Vec<f32> {
        let (h, wd) = (x.height as isize, x.width as isize);
        let mut out = vec![0.0f32; cout * x.plane()];
        for o in 0..cout {
            for r in 0..h {
                for c in 0..wd {
                    let mut acc = b[o] as f64;
                    for ci in 0..x.channels {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let (sr, sc) = (r + ky - 1, c + kx - 1);
                                if sr < 0 || sc < 0 || sr >= h || sc >= wd {
                                    continue;
                                }
                                let wv = w[((o * x.channels + ci) * 3 + ky as usize) * 3 + kx as usize];
                                acc += (wv * x.data[ci * x.plane() + (sr * wd + sc) as usize]) as f64;
                            }
                        }
                    }
                    out[o * x.plane() + (r * wd + c) as usize] = (acc as f32).max(0.0);
                }
            }
        }
        out
    }

    #[test]
    fn im2col_conv_matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dist = Uniform::new(-1.0f32, 1.0);
        let (cin, cout, h, w) = (3, 5, 7, 9);
        let x = FeatureMap {
            channels: cin,
            height: h,
            width: w,
            data: (0..cin * h * w).map(|_| dist.sample(&mut rng)).collect(),
        };
        let wt: Vec<f32> = (0..cout * cin * 9).map(|_| dist.sample(&mut rng)).collect();
        let bias: Vec<f32> = (0..cout).map(|_| dist.sample(&mut rng)).collect();
        let conv = Conv {
            weight: &wt,
            bias: &bias,
            cin,
            cout,
        };
        let fast = conv.conv3x3_relu(&x);
        let slow = naive_conv(&x, &wt, &bias, cout);
        for (a, b) in fast.data.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn upsample_matches_half_pixel_bilinear() {
        let x = FeatureMap {
            channels: 1,
            height: 2,
            width: 2,
            data: vec![0.0, 1.0, 2.0, 3.0],
        };
        let up = upsample2(&x);
        // Row 0 uses only source row 0 (clamped): 0, 0.25, 0.75, 1.
        assert_eq!(&up.data[..4], &[0.0, 0.25, 0.75, 1.0]);
        // Row 1 sits a quarter of the way to source row 1.
        assert_eq!(&up.data[4..8], &[0.5, 0.75, 1.25, 1.5]);
        assert_eq!(&up.data[12..16], &[2.0, 2.25, 2.75, 3.0]);
    }

    #[test]
    fn max_pool_picks_block_max() {
        let x = FeatureMap {
            channels: 1,
            height: 2,
            width: 4,
            data: vec![1.0, 5.0, -1.0, 0.0, 2.0, 3.0, -4.0, -2.0],
        };
        assert_eq!(max_pool2(&x).data, vec![5.0, 0.0]);
    }

    #[test]
    fn random_weights_are_deterministic_and_bounded() {
        let spec = tiny();
        let a = spec.random_weights(1, 0.05);
        let b = spec.random_weights(1, 0.05);
        assert!(a.bit_eq(&b));
        assert!(a.tensors().iter().flat_map(|t| &t.data).all(|v| v.abs() <= 0.05));
        spec.validate(&a).unwrap();
    }
}
