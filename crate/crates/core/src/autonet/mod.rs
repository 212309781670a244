//! Per-client deep subspace clustering network: a two-layer convolutional
//! encoder, a fully connected self-expressive layer `R` (n x n, zero
//! diagonal) acting on the encoder output, and a mirrored two-layer
//! transposed-convolution decoder.

pub mod checkpoint;
pub mod conv;
pub mod objective;
pub mod optim;
pub mod train;

use ndarray::{Array1, Array2, Array4, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataio::ImageShape;
use crate::error::{FdscError, Result};
use crate::rng::Rng;
use conv::ConvGeometry;

pub use objective::{gradients, loss, Hyperparams, LossBreakdown};
pub use optim::{sgd_momentum_step, OptimizerConfig, OptimizerState};
pub use train::{train_local, TrainOutcome};

/// Encoder layer sizes. The decoder mirrors them. Padding is `kernel / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub conv1_kernel: usize,
    pub conv1_stride: usize,
    pub conv1_channels: usize,
    pub conv2_kernel: usize,
    pub conv2_stride: usize,
    pub conv2_channels: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            conv1_kernel: 5,
            conv1_stride: 2,
            conv1_channels: 16,
            conv2_kernel: 3,
            conv2_stride: 2,
            conv2_channels: 8,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self, input: ImageShape) -> Result<()> {
        self.geometries(input).map(|_| ())
    }

    /// Encoder geometries: input -> hidden, hidden -> code.
    pub fn geometries(&self, input: ImageShape) -> Result<[ConvGeometry; 2]> {
        if self.conv1_channels == 0 || self.conv2_channels == 0 {
            return Err(FdscError::config("channel counts must be positive"));
        }
        let g1 = ConvGeometry::new(
            input.height,
            input.width,
            input.channels,
            self.conv1_kernel,
            self.conv1_stride,
            self.conv1_kernel / 2,
        )
        .ok_or_else(|| FdscError::config(format!("conv1 does not fit {input:?}")))?;
        let g2 = ConvGeometry::new(
            g1.out_h,
            g1.out_w,
            self.conv1_channels,
            self.conv2_kernel,
            self.conv2_stride,
            self.conv2_kernel / 2,
        )
        .ok_or_else(|| FdscError::config("conv2 does not fit the conv1 output"))?;
        Ok([g1, g2])
    }

    pub fn code_len(&self, input: ImageShape) -> Result<usize> {
        let [_, g2] = self.geometries(input)?;
        Ok(g2.out_positions() * self.conv2_channels)
    }
}

/// One (transposed) convolution layer. For a forward convolution the kernel
/// is `out_c x in_c x k x k`; for a transposed one it is
/// `small_c x large_c x k x k`, i.e. the layout of the convolution it mirrors.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams {
    pub kernels: Array4<f64>,
    pub biases: Array1<f64>,
    pub stride: usize,
    pub padding: usize,
}

impl ConvLayerParams {
    pub fn kernel_size(&self) -> usize {
        self.kernels.shape()[2]
    }

    /// Kernel as a `dim0 x (dim1 * k * k)` matrix.
    pub fn kernel_matrix(&self) -> ArrayView2<'_, f64> {
        let s = self.kernels.shape();
        self.kernels
            .view()
            .into_shape_with_order((s[0], s[1] * s[2] * s[3]))
            .expect("kernels are contiguous")
    }

    fn uniform(shape: [usize; 4], bias_len: usize, fan_in: usize, stride: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let kernels = Array4::from_shape_simple_fn(shape, || rng.random_range(-bound..bound));
        // Zero biases keep the initial map positively homogeneous, so linear
        // structure in nonnegative inputs survives the first layers.
        let biases = Array1::zeros(bias_len);
        Self {
            kernels,
            biases,
            stride,
            padding: shape[2] / 2,
        }
    }

    fn zeroed(&self) -> Self {
        Self {
            kernels: Array4::zeros(self.kernels.raw_dim()),
            biases: Array1::zeros(self.biases.len()),
            stride: self.stride,
            padding: self.padding,
        }
    }
}

/// Two convolutions, ReLU after each.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub input: ImageShape,
    pub layers: [ConvLayerParams; 2],
}

/// Two transposed convolutions: ReLU after the first, sigmoid after the last.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    pub output: ImageShape,
    pub layers: [ConvLayerParams; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfExpressiveParams {
    pub r: Array2<f64>,
}

impl SelfExpressiveParams {
    pub fn zeros(n: usize) -> Self {
        Self { r: Array2::zeros((n, n)) }
    }

    pub fn n(&self) -> usize {
        self.r.nrows()
    }

    pub fn zero_diagonal(&mut self) {
        self.r.diag_mut().fill(0.0);
    }

    pub fn diagonal_is_zero(&self) -> bool {
        self.r.diag().iter().all(|&v| v == 0.0)
    }
}

fn layer_geometry(layer: &ConvLayerParams, in_h: usize, in_w: usize, in_c: usize) -> Result<ConvGeometry> {
    ConvGeometry::new(in_h, in_w, in_c, layer.kernel_size(), layer.stride, layer.padding)
        .ok_or_else(|| FdscError::shape("layer kernel does not fit its input"))
}

impl EncoderParams {
    pub fn init(input: ImageShape, arch: &ArchConfig, rng: &mut Rng) -> Result<Self> {
        arch.geometries(input)?;
        let k1 = arch.conv1_kernel;
        let k2 = arch.conv2_kernel;
        let l1 = ConvLayerParams::uniform(
            [arch.conv1_channels, input.channels, k1, k1],
            arch.conv1_channels,
            input.channels * k1 * k1,
            arch.conv1_stride,
            rng,
        );
        let l2 = ConvLayerParams::uniform(
            [arch.conv2_channels, arch.conv1_channels, k2, k2],
            arch.conv2_channels,
            arch.conv1_channels * k2 * k2,
            arch.conv2_stride,
            rng,
        );
        Ok(Self { input, layers: [l1, l2] })
    }

    pub fn geometries(&self) -> Result<[ConvGeometry; 2]> {
        let [l1, l2] = &self.layers;
        if l1.kernels.shape()[1] != self.input.channels || l2.kernels.shape()[1] != l1.kernels.shape()[0] {
            return Err(FdscError::shape("encoder channel chaining is inconsistent"));
        }
        let g1 = layer_geometry(l1, self.input.height, self.input.width, self.input.channels)?;
        let g2 = layer_geometry(l2, g1.out_h, g1.out_w, l1.kernels.shape()[0])?;
        Ok([g1, g2])
    }

    pub fn code_len(&self) -> Result<usize> {
        let [_, g2] = self.geometries()?;
        Ok(g2.out_positions() * self.layers[1].kernels.shape()[0])
    }

    pub fn zeroed(&self) -> Self {
        Self {
            input: self.input,
            layers: [self.layers[0].zeroed(), self.layers[1].zeroed()],
        }
    }

    pub fn same_shape(&self, other: &EncoderParams) -> bool {
        self.input == other.input
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.kernels.shape() == b.kernels.shape()
                    && a.biases.len() == b.biases.len()
                    && a.stride == b.stride
                    && a.padding == b.padding
            })
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        let [a, b] = &self.layers;
        [
            a.kernels.as_slice().expect("contiguous"),
            a.biases.as_slice().expect("contiguous"),
            b.kernels.as_slice().expect("contiguous"),
            b.biases.as_slice().expect("contiguous"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        let [a, b] = &mut self.layers;
        [
            a.kernels.as_slice_mut().expect("contiguous"),
            a.biases.as_slice_mut().expect("contiguous"),
            b.kernels.as_slice_mut().expect("contiguous"),
            b.biases.as_slice_mut().expect("contiguous"),
        ]
    }
}

impl DecoderParams {
    /// Mirrors `encoder`: the first layer undoes conv2, the second conv1.
    pub fn init(encoder: &EncoderParams, rng: &mut Rng) -> Self {
        let [e1, e2] = &encoder.layers;
        let (c1, c_in) = (e1.kernels.shape()[0], e1.kernels.shape()[1]);
        let c2 = e2.kernels.shape()[0];
        let (k1, k2) = (e1.kernel_size(), e2.kernel_size());
        let d1 = ConvLayerParams::uniform([c2, c1, k2, k2], c1, c2 * k2 * k2, e2.stride, rng);
        let d2 = ConvLayerParams::uniform([c1, c_in, k1, k1], c_in, c1 * k1 * k1, e1.stride, rng);
        Self {
            output: encoder.input,
            layers: [d1, d2],
        }
    }

    /// Geometries of the mirrored forward convolutions: `[hidden->code, image->hidden]`.
    pub fn geometries(&self) -> Result<[ConvGeometry; 2]> {
        let [d1, d2] = &self.layers;
        let out = self.output;
        if d2.kernels.shape()[1] != out.channels || d1.kernels.shape()[1] != d2.kernels.shape()[0] {
            return Err(FdscError::shape("decoder channel chaining is inconsistent"));
        }
        let g_outer = layer_geometry(d2, out.height, out.width, out.channels)?;
        let g_inner = layer_geometry(d1, g_outer.out_h, g_outer.out_w, d2.kernels.shape()[0])?;
        Ok([g_inner, g_outer])
    }

    pub fn code_len(&self) -> Result<usize> {
        let [g_inner, _] = self.geometries()?;
        Ok(g_inner.out_positions() * self.layers[0].kernels.shape()[0])
    }

    pub fn zeroed(&self) -> Self {
        Self {
            output: self.output,
            layers: [self.layers[0].zeroed(), self.layers[1].zeroed()],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        let [a, b] = &self.layers;
        [
            a.kernels.as_slice().expect("contiguous"),
            a.biases.as_slice().expect("contiguous"),
            b.kernels.as_slice().expect("contiguous"),
            b.biases.as_slice().expect("contiguous"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        let [a, b] = &mut self.layers;
        [
            a.kernels.as_slice_mut().expect("contiguous"),
            a.biases.as_slice_mut().expect("contiguous"),
            b.kernels.as_slice_mut().expect("contiguous"),
            b.biases.as_slice_mut().expect("contiguous"),
        ]
    }
}

/// Parameters of one client network `(E, R, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub encoder: EncoderParams,
    pub r: SelfExpressiveParams,
    pub decoder: DecoderParams,
}

/// Tensor names in [`NetParams::tensors`] order.
pub const TENSOR_NAMES: [&str; 9] = [
    "encoder.0.kernel",
    "encoder.0.bias",
    "encoder.1.kernel",
    "encoder.1.bias",
    "self_expressive",
    "decoder.0.kernel",
    "decoder.0.bias",
    "decoder.1.kernel",
    "decoder.1.bias",
];

impl NetParams {
    /// Fresh network for `n` samples; `R` starts at zero.
    pub fn init(n: usize, input: ImageShape, arch: &ArchConfig, enc_rng: &mut Rng, dec_rng: &mut Rng) -> Result<Self> {
        let encoder = EncoderParams::init(input, arch, enc_rng)?;
        let decoder = DecoderParams::init(&encoder, dec_rng);
        Ok(Self {
            encoder,
            r: SelfExpressiveParams::zeros(n),
            decoder,
        })
    }

    pub fn n(&self) -> usize {
        self.r.n()
    }

    pub fn zeroed(&self) -> Self {
        Self {
            encoder: self.encoder.zeroed(),
            r: SelfExpressiveParams::zeros(self.n()),
            decoder: self.decoder.zeroed(),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.encoder.tensors().into();
        v.push(self.r.r.as_slice().expect("contiguous"));
        v.extend(self.decoder.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self.encoder.tensors_mut().into();
        v.push(self.r.r.as_slice_mut().expect("contiguous"));
        v.extend(self.decoder.tensors_mut());
        v
    }

    pub fn tensor_shapes(&self) -> Vec<Vec<usize>> {
        let mut v = Vec::with_capacity(9);
        for l in &self.encoder.layers {
            v.push(l.kernels.shape().to_vec());
            v.push(vec![l.biases.len()]);
        }
        v.push(self.r.r.shape().to_vec());
        for l in &self.decoder.layers {
            v.push(l.kernels.shape().to_vec());
            v.push(vec![l.biases.len()]);
        }
        v
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

fn relu_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(|v| v.max(0.0));
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Intermediate activations kept for backpropagation.
#[derive(Debug, Clone)]
pub struct EncoderPass {
    pub cols1: Array2<f64>,
    pub pre1: Array2<f64>,
    pub hidden: Array2<f64>,
    pub cols2: Array2<f64>,
    pub pre2: Array2<f64>,
    pub z: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct DecoderPass {
    pub pre1: Array2<f64>,
    pub hidden: Array2<f64>,
    pub x_hat: Array2<f64>,
}

pub fn encode_pass(enc: &EncoderParams, x: ArrayView2<f64>) -> Result<EncoderPass> {
    if x.ncols() != enc.input.len() {
        return Err(FdscError::shape(format!(
            "encoder expects {} columns, got {}",
            enc.input.len(),
            x.ncols()
        )));
    }
    let [g1, g2] = enc.geometries()?;
    let [l1, l2] = &enc.layers;
    let (pre1, cols1) = conv::conv_forward(x, l1.kernel_matrix(), &l1.biases, &g1);
    let mut hidden = pre1.clone();
    relu_inplace(&mut hidden);
    let (pre2, cols2) = conv::conv_forward(hidden.view(), l2.kernel_matrix(), &l2.biases, &g2);
    let mut z = pre2.clone();
    relu_inplace(&mut z);
    Ok(EncoderPass {
        cols1,
        pre1,
        hidden,
        cols2,
        pre2,
        z,
    })
}

pub fn decode_pass(dec: &DecoderParams, z: ArrayView2<f64>) -> Result<DecoderPass> {
    let code_len = dec.code_len()?;
    if z.ncols() != code_len {
        return Err(FdscError::shape(format!(
            "decoder expects codes of length {code_len}, got {}",
            z.ncols()
        )));
    }
    let [g_inner, g_outer] = dec.geometries()?;
    let [d1, d2] = &dec.layers;
    let pre1 = conv::deconv_forward(z, d1.kernel_matrix(), &d1.biases, &g_inner);
    let mut hidden = pre1.clone();
    relu_inplace(&mut hidden);
    let mut x_hat = conv::deconv_forward(hidden.view(), d2.kernel_matrix(), &d2.biases, &g_outer);
    x_hat.mapv_inplace(sigmoid);
    Ok(DecoderPass { pre1, hidden, x_hat })
}

/// `Z = relu(conv2(relu(conv1(X))))`, one code row per sample.
pub fn encode(enc: &EncoderParams, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    Ok(encode_pass(enc, x)?.z)
}

/// `R Z`: sample `i` is rebuilt as `sum_j R[i][j] z_j`.
pub fn self_express(r: &SelfExpressiveParams, z: ArrayView2<f64>) -> Result<Array2<f64>> {
    if r.n() != z.nrows() {
        return Err(FdscError::shape(format!(
            "R is {0}x{0} but Z has {1} rows",
            r.n(),
            z.nrows()
        )));
    }
    Ok(r.r.dot(&z))
}

pub fn decode(dec: &DecoderParams, z: ArrayView2<f64>) -> Result<Array2<f64>> {
    Ok(decode_pass(dec, z)?.x_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::{array, Array};

    fn net(input: ImageShape, arch: ArchConfig, n: usize) -> NetParams {
        NetParams::init(n, input, &arch, &mut rng::stream(1, "e", 0), &mut rng::stream(1, "d", 0)).unwrap()
    }

    #[test]
    fn zero_encoder_gives_zero_code() {
        let input = ImageShape::new(8, 8, 1);
        let enc = net(input, ArchConfig::default(), 3).encoder.zeroed();
        let x = Array::from_shape_fn((3, 64), |(i, j)| ((i + j) % 5) as f64 / 4.0);
        let z = encode(&enc, x.view()).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_encoder_passes_pixels() {
        let arch = ArchConfig {
            conv1_kernel: 1,
            conv1_stride: 1,
            conv1_channels: 1,
            conv2_kernel: 1,
            conv2_stride: 1,
            conv2_channels: 1,
        };
        let input = ImageShape::new(3, 3, 1);
        let mut enc = net(input, arch, 2).encoder;
        for l in &mut enc.layers {
            l.kernels.fill(1.0);
            l.biases.fill(0.0);
        }
        let x = Array::from_shape_fn((2, 9), |(i, j)| (i * 9 + j) as f64 / 17.0);
        assert_eq!(encode(&enc, x.view()).unwrap(), x);
    }

    #[test]
    fn encode_rejects_wrong_width() {
        let enc = net(ImageShape::new(8, 8, 1), ArchConfig::default(), 1).encoder;
        let x = Array2::zeros((1, 63));
        assert!(matches!(encode(&enc, x.view()), Err(FdscError::Shape(_))));
    }

    #[test]
    fn self_express_swaps_rows() {
        let r = SelfExpressiveParams { r: array![[0.0, 1.0], [1.0, 0.0]] };
        let z = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(self_express(&r, z.view()).unwrap(), array![[3.0, 4.0], [1.0, 2.0]]);
        let zero = SelfExpressiveParams::zeros(2);
        assert!(self_express(&zero, z.view()).unwrap().iter().all(|&v| v == 0.0));
        assert!(self_express(&SelfExpressiveParams::zeros(3), z.view()).is_err());
    }

    #[test]
    fn self_express_matches_triple_loop() {
        let mut rng = rng::stream(4, "t", 0);
        let mut r = Array2::from_shape_simple_fn((4, 4), || rng.random_range(-1.0..1.0));
        r.diag_mut().fill(0.0);
        let z = Array2::from_shape_simple_fn((4, 2), || rng.random_range(-1.0..1.0));
        let got = self_express(&SelfExpressiveParams { r: r.clone() }, z.view()).unwrap();
        for i in 0..4 {
            for c in 0..2 {
                let mut acc = 0.0;
                for j in 0..4 {
                    acc += r[[i, j]] * z[[j, c]];
                }
                assert!((got[[i, c]] - acc).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_decoder_outputs_half() {
        let input = ImageShape::new(28, 28, 1);
        let p = net(input, ArchConfig::default(), 2);
        let dec = p.decoder.zeroed();
        let z = Array2::from_elem((2, p.encoder.code_len().unwrap()), 0.7);
        let x_hat = decode(&dec, z.view()).unwrap();
        assert_eq!(x_hat.dim(), (2, 784));
        assert!(x_hat.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn decoder_restores_input_geometry() {
        for (h, w) in [(28, 28), (32, 32), (8, 8), (7, 9)] {
            let input = ImageShape::new(h, w, 3);
            let p = net(input, ArchConfig::default(), 1);
            let x = Array2::from_elem((1, input.len()), 0.3);
            let z = encode(&p.encoder, x.view()).unwrap();
            let x_hat = decode(&p.decoder, z.view()).unwrap();
            assert_eq!(x_hat.ncols(), input.len(), "{h}x{w}");
            assert!(x_hat.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let input = ImageShape::new(8, 8, 1);
        let p = net(input, ArchConfig::default(), 4);
        let x = Array::from_shape_fn((4, 64), |(i, j)| ((i * 13 + j * 7) % 10) as f64 / 9.0);
        let a = decode(&p.decoder, encode(&p.encoder, x.view()).unwrap().view()).unwrap();
        let b = decode(&p.decoder, encode(&p.encoder, x.view()).unwrap().view()).unwrap();
        assert_eq!(a, b);
    }
}
