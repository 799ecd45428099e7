// SPDX-License-Identifier: MIT OR Apache-2.0

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape of an encoder: token length, hidden units per direction, dense width
/// and class count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderDims {
    pub input_len: usize,
    pub hidden: usize,
    pub dense: usize,
    pub classes: usize,
}

impl EncoderDims {
    /// Reference architecture: 160 hidden units per direction, 320-unit dense layer.
    pub fn reference(input_len: usize, classes: usize) -> Self {
        Self {
            input_len,
            hidden: 160,
            dense: 320,
            classes,
        }
    }

    pub fn param_count(&self) -> usize {
        let (l, h, d, c) = (self.input_len, self.hidden, self.dense, self.classes);
        let lstm = 4 * h * l + 4 * h * h + 4 * h;
        2 * lstm + (d * 2 * h + d) + (l * 2 * h + l) + (c * d + c)
    }
}

/// One direction of the recurrent encoder. Gate rows are ordered
/// input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `(4H, L)`
    pub w_x: Array2<f64>,
    /// `(4H, H)`
    pub w_h: Array2<f64>,
    /// `(4H)`
    pub b: Array1<f64>,
}

impl LstmParams {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Array2::zeros((4 * hidden, input)),
            w_h: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }
}

/// Every trainable weight: both recurrent cells, the rectified-linear dense
/// layer, the reconstruction head and the classifier head.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub dims: EncoderDims,
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    /// `(D, 2H)`
    pub dense_w: Array2<f64>,
    pub dense_b: Array1<f64>,
    /// `(L, 2H)`
    pub recon_w: Array2<f64>,
    pub recon_b: Array1<f64>,
    /// `(C, D)`
    pub class_w: Array2<f64>,
    pub class_b: Array1<f64>,
}

pub(crate) const TENSOR_NAMES: [&str; 12] = [
    "fwd.w_x", "fwd.w_h", "fwd.b", "bwd.w_x", "bwd.w_h", "bwd.b", "dense.w", "dense.b", "recon.w",
    "recon.b", "class.w", "class.b",
];

impl EncoderParams {
    pub fn zeros(dims: EncoderDims) -> Self {
        let EncoderDims {
            input_len: l,
            hidden: h,
            dense: d,
            classes: c,
        } = dims;
        Self {
            dims,
            fwd: LstmParams::zeros(l, h),
            bwd: LstmParams::zeros(l, h),
            dense_w: Array2::zeros((d, 2 * h)),
            dense_b: Array1::zeros(d),
            recon_w: Array2::zeros((l, 2 * h)),
            recon_b: Array1::zeros(l),
            class_w: Array2::zeros((c, d)),
            class_b: Array1::zeros(c),
        }
    }

    /// Uniform `±1/sqrt(fan_in)` weights, zero biases except a forget-gate
    /// bias of 1.
    pub fn init(dims: EncoderDims, seed: u64) -> Self {
        let mut p = Self::zeros(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = dims.hidden;
        let mut fill = |a: &mut [f64], fan_in: usize| {
            let r = 1.0 / (fan_in.max(1) as f64).sqrt();
            for v in a {
                *v = rng.gen_range(-r..r);
            }
        };
        for cell in [&mut p.fwd, &mut p.bwd] {
            fill(slice_mut(&mut cell.w_x), dims.input_len + h);
            fill(slice_mut(&mut cell.w_h), dims.input_len + h);
            cell.b.slice_mut(ndarray::s![h..2 * h]).fill(1.0);
        }
        fill(slice_mut(&mut p.dense_w), 2 * h);
        fill(slice_mut(&mut p.recon_w), 2 * h);
        fill(slice_mut(&mut p.class_w), dims.dense);
        p
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Flat views of every tensor in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let arrays: [&[f64]; 12] = [
            slice(&self.fwd.w_x),
            slice(&self.fwd.w_h),
            slice(&self.fwd.b),
            slice(&self.bwd.w_x),
            slice(&self.bwd.w_h),
            slice(&self.bwd.b),
            slice(&self.dense_w),
            slice(&self.dense_b),
            slice(&self.recon_w),
            slice(&self.recon_b),
            slice(&self.class_w),
            slice(&self.class_b),
        ];
        TENSOR_NAMES.into_iter().zip(arrays).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let arrays: [&mut [f64]; 12] = [
            slice_mut(&mut self.fwd.w_x),
            slice_mut(&mut self.fwd.w_h),
            slice_mut(&mut self.fwd.b),
            slice_mut(&mut self.bwd.w_x),
            slice_mut(&mut self.bwd.w_h),
            slice_mut(&mut self.bwd.b),
            slice_mut(&mut self.dense_w),
            slice_mut(&mut self.dense_b),
            slice_mut(&mut self.recon_w),
            slice_mut(&mut self.recon_b),
            slice_mut(&mut self.class_w),
            slice_mut(&mut self.class_b),
        ];
        TENSOR_NAMES.into_iter().zip(arrays).collect()
    }

    /// Shapes in [`Self::tensors`] order.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        vec![
            self.fwd.w_x.shape().to_vec(),
            self.fwd.w_h.shape().to_vec(),
            self.fwd.b.shape().to_vec(),
            self.bwd.w_x.shape().to_vec(),
            self.bwd.w_h.shape().to_vec(),
            self.bwd.b.shape().to_vec(),
            self.dense_w.shape().to_vec(),
            self.dense_b.shape().to_vec(),
            self.recon_w.shape().to_vec(),
            self.recon_b.shape().to_vec(),
            self.class_w.shape().to_vec(),
            self.class_b.shape().to_vec(),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= k);
        }
    }
}

fn slice<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameters are contiguous")
}

fn slice_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are contiguous")
}
