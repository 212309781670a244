//! Strided 2-D convolution and its adjoint (transposed convolution) on
//! batches of `H x W x C` row-major images, via im2col / col2im.

use ndarray::{Array1, Array2, ArrayView2, Axis};

/// Geometry of a forward convolution from a large grid to a small one.
/// A transposed convolution with the same geometry maps small back to large.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn new(in_h: usize, in_w: usize, in_c: usize, kernel: usize, stride: usize, padding: usize) -> Option<Self> {
        if stride == 0 || kernel == 0 || in_h + 2 * padding < kernel || in_w + 2 * padding < kernel {
            return None;
        }
        Some(Self {
            in_h,
            in_w,
            in_c,
            out_h: (in_h + 2 * padding - kernel) / stride + 1,
            out_w: (in_w + 2 * padding - kernel) / stride + 1,
            kernel,
            stride,
            padding,
        })
    }

    pub fn in_len(&self) -> usize {
        self.in_h * self.in_w * self.in_c
    }

    pub fn out_positions(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Columns of one patch row: `in_c * kernel * kernel`, ordered (c, ky, kx).
    pub fn patch_len(&self) -> usize {
        self.in_c * self.kernel * self.kernel
    }

    /// Source pixel of output position (oy, ox) at kernel offset (ky, kx).
    #[inline]
    fn source(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<(usize, usize)> {
        let y = (oy * self.stride + ky).checked_sub(self.padding)?;
        let x = (ox * self.stride + kx).checked_sub(self.padding)?;
        (y < self.in_h && x < self.in_w).then_some((y, x))
    }
}

/// For each (position, patch column) in row-major patch order, the source
/// offset inside one image, or `None` where the patch hangs over the padding.
fn patch_sources(g: &ConvGeometry) -> Vec<Option<usize>> {
    let k = g.kernel;
    let mut table = vec![None; g.out_positions() * g.patch_len()];
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let row = &mut table[(oy * g.out_w + ox) * g.patch_len()..][..g.patch_len()];
            for ky in 0..k {
                for kx in 0..k {
                    if let Some((y, xx)) = g.source(oy, ox, ky, kx) {
                        let base = (y * g.in_w + xx) * g.in_c;
                        for c in 0..g.in_c {
                            row[(c * k + ky) * k + kx] = Some(base + c);
                        }
                    }
                }
            }
        }
    }
    table
}

/// `n x in_len` images to `(n * out_positions) x patch_len` patches.
pub fn im2col(x: ArrayView2<f64>, g: &ConvGeometry) -> Array2<f64> {
    let n = x.nrows();
    let table = patch_sources(g);
    let per_sample = table.len();
    let mut cols = Array2::zeros((n * g.out_positions(), g.patch_len()));
    let flat = cols.as_slice_mut().expect("fresh array is contiguous");
    for (s, img) in x.rows().into_iter().enumerate() {
        let dst = &mut flat[s * per_sample..][..per_sample];
        for (d, src) in dst.iter_mut().zip(&table) {
            if let Some(i) = *src {
                *d = img[i];
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-add patches back onto `n x in_len` images.
pub fn col2im(cols: ArrayView2<f64>, g: &ConvGeometry, n: usize) -> Array2<f64> {
    let table = patch_sources(g);
    let per_sample = table.len();
    let cols = cols.as_standard_layout();
    let flat = cols.as_slice().expect("standard layout");
    let mut out = Array2::zeros((n, g.in_len()));
    for (s, mut img) in out.rows_mut().into_iter().enumerate() {
        let src = &flat[s * per_sample..][..per_sample];
        for (v, dst) in src.iter().zip(&table) {
            if let Some(i) = *dst {
                img[i] += v;
            }
        }
    }
    out
}

/// Rows are (sample, position) pairs; reshaping to one row per sample gives
/// the `H x W x C` flattening.
fn to_samples(a: Array2<f64>, n: usize) -> Array2<f64> {
    let len = a.len() / n;
    // Matrix products can come back column-major (e.g. with 1x1 kernels).
    let a = if a.is_standard_layout() { a } else { a.as_standard_layout().into_owned() };
    a.into_shape_with_order((n, len)).expect("contiguous activation")
}

fn to_positions(a: ArrayView2<f64>, channels: usize) -> Array2<f64> {
    let rows = a.len() / channels;
    a.as_standard_layout()
        .into_owned()
        .into_shape_with_order((rows, channels))
        .expect("contiguous activation")
}

/// Forward convolution. `kernel` is `out_c x patch_len`.
/// Returns the pre-activation `n x (out_positions * out_c)` and the patches.
pub fn conv_forward(
    x: ArrayView2<f64>,
    kernel: ArrayView2<f64>,
    bias: &Array1<f64>,
    g: &ConvGeometry,
) -> (Array2<f64>, Array2<f64>) {
    let n = x.nrows();
    let cols = im2col(x, g);
    let mut pre = cols.dot(&kernel.t());
    pre += bias;
    (to_samples(pre, n), cols)
}

/// Gradients of a forward convolution given `d_pre` (`n x out_len`).
/// Returns `(d_kernel, d_bias, d_input)`.
pub fn conv_backward(
    d_pre: ArrayView2<f64>,
    cols: &Array2<f64>,
    kernel: ArrayView2<f64>,
    g: &ConvGeometry,
    need_input_grad: bool,
) -> (Array2<f64>, Array1<f64>, Option<Array2<f64>>) {
    let n = d_pre.nrows();
    let out_c = kernel.nrows();
    let d = to_positions(d_pre, out_c);
    let d_kernel = d.t().dot(cols);
    let d_bias = d.sum_axis(Axis(0));
    let d_input = need_input_grad.then(|| col2im(d.dot(&kernel).view(), g, n));
    (d_kernel, d_bias, d_input)
}

/// Transposed convolution from the small grid of `g` back to its large grid.
/// `kernel` is `small_c x patch_len` where `patch_len` covers the large
/// grid's channels. Returns the pre-activation `n x in_len`.
pub fn deconv_forward(
    y: ArrayView2<f64>,
    kernel: ArrayView2<f64>,
    bias: &Array1<f64>,
    g: &ConvGeometry,
) -> Array2<f64> {
    let n = y.nrows();
    let small_c = kernel.nrows();
    let cols = to_positions(y, small_c).dot(&kernel);
    let mut out = col2im(cols.view(), g, n);
    for mut row in out.rows_mut() {
        for (i, v) in row.iter_mut().enumerate() {
            *v += bias[i % g.in_c];
        }
    }
    out
}

/// Gradients of [`deconv_forward`] given `d_out` (`n x in_len`) and its input `y`.
pub fn deconv_backward(
    d_out: ArrayView2<f64>,
    y: ArrayView2<f64>,
    kernel: ArrayView2<f64>,
    g: &ConvGeometry,
) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    let n = d_out.nrows();
    let small_c = kernel.nrows();
    let d_cols = im2col(d_out, g);
    let y_pos = to_positions(y, small_c);
    let d_kernel = y_pos.t().dot(&d_cols);
    let mut d_bias = Array1::zeros(g.in_c);
    for row in d_out.rows() {
        for (i, v) in row.iter().enumerate() {
            d_bias[i % g.in_c] += v;
        }
    }
    let d_y = to_samples(d_cols.dot(&kernel.t()), n);
    (d_kernel, d_bias, d_y)
}
