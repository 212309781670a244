//! Client objective and its exact gradients.
//!
//! ```text
//! total = 1/2 |X - X_hat|^2          reconstruction
//!       + l1 |R|^2                   regularizer_r
//!       + l2/2 |Z - R Z|^2           self_expression
//!       + l3/2 |alpha A - beta R|^2  graph_alignment
//! ```
//! All norms are Frobenius. `X_hat = D(Z)` with `Z = E(X)`.

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use super::conv::{conv_backward, deconv_backward};
use super::{decode_pass, encode_pass, DecoderPass, EncoderPass, NetParams};
use crate::error::{FdscError, Result};
use crate::graph::AdjacencyMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 15.0,
            lambda3: 1e6,
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl Hyperparams {
    /// Reconstruction only.
    pub fn autoencoder_only() -> Self {
        Self {
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            alpha: 0.0,
            beta: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda1, self.lambda2, self.lambda3, self.alpha, self.beta];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FdscError::config(format!(
                "hyperparameters must be finite and nonnegative: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub reconstruction: f64,
    pub regularizer_r: f64,
    pub self_expression: f64,
    pub graph_alignment: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn from_terms(reconstruction: f64, regularizer_r: f64, self_expression: f64, graph_alignment: f64) -> Result<Self> {
        for (name, v) in [
            ("reconstruction", reconstruction),
            ("regularizer_r", regularizer_r),
            ("self_expression", self_expression),
            ("graph_alignment", graph_alignment),
        ] {
            if !v.is_finite() {
                return Err(FdscError::numerics(name));
            }
        }
        Ok(Self {
            reconstruction,
            regularizer_r,
            self_expression,
            graph_alignment,
            total: reconstruction + regularizer_r + self_expression + graph_alignment,
        })
    }
}

fn sq_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// `alpha A - beta R`, or `None` when the graph term is off.
fn graph_residual(params: &NetParams, hyper: &Hyperparams, a: &AdjacencyMatrix) -> Option<Array2<f64>> {
    (hyper.lambda3 != 0.0).then(|| hyper.alpha * &a.a - hyper.beta * &params.r.r)
}

struct Evaluation {
    enc: EncoderPass,
    dec: DecoderPass,
    /// `Z - R Z`
    se_residual: Array2<f64>,
    graph_residual: Option<Array2<f64>>,
    breakdown: LossBreakdown,
}

fn check_inputs(params: &NetParams, x: ArrayView2<f64>, a: &AdjacencyMatrix) -> Result<()> {
    let n = params.n();
    if x.nrows() != n {
        return Err(FdscError::shape(format!("R is {n}x{n} but X has {} rows", x.nrows())));
    }
    if a.n() != n {
        return Err(FdscError::shape(format!("adjacency is {0}x{0}, expected {n}x{n}", a.n())));
    }
    if !params.r.diagonal_is_zero() {
        return Err(FdscError::Data("diag(R) must be zero".into()));
    }
    Ok(())
}

fn evaluate(params: &NetParams, hyper: &Hyperparams, x: ArrayView2<f64>, a: &AdjacencyMatrix) -> Result<Evaluation> {
    check_inputs(params, x, a)?;
    let enc = encode_pass(&params.encoder, x)?;
    let dec = decode_pass(&params.decoder, enc.z.view())?;
    let se_residual = &enc.z - &params.r.r.dot(&enc.z);
    let graph_residual = graph_residual(params, hyper, a);

    let reconstruction = 0.5
        * Zip::from(&x)
            .and(&dec.x_hat)
            .fold(0.0, |acc, &xi, &yi| acc + (xi - yi) * (xi - yi));
    let regularizer_r = hyper.lambda1 * sq_norm(&params.r.r);
    let self_expression = 0.5 * hyper.lambda2 * sq_norm(&se_residual);
    let graph_alignment = graph_residual
        .as_ref()
        .map_or(0.0, |g| 0.5 * hyper.lambda3 * sq_norm(g));
    let breakdown = LossBreakdown::from_terms(reconstruction, regularizer_r, self_expression, graph_alignment)?;
    Ok(Evaluation {
        enc,
        dec,
        se_residual,
        graph_residual,
        breakdown,
    })
}

pub fn loss(params: &NetParams, hyper: &Hyperparams, x: ArrayView2<f64>, a: &AdjacencyMatrix) -> Result<LossBreakdown> {
    Ok(evaluate(params, hyper, x, a)?.breakdown)
}

fn relu_mask(grad: &mut Array2<f64>, pre: &Array2<f64>) {
    Zip::from(grad).and(pre).for_each(|g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
}

fn into_kernel(flat: Array2<f64>, like: &ndarray::Array4<f64>) -> ndarray::Array4<f64> {
    flat.into_shape_with_order(like.raw_dim()).expect("kernel gradient shape")
}

/// Loss and its gradient with respect to every tensor, packed as a
/// `NetParams`. The `R` gradient has its diagonal zeroed.
pub fn gradients(
    params: &NetParams,
    hyper: &Hyperparams,
    x: ArrayView2<f64>,
    a: &AdjacencyMatrix,
) -> Result<(NetParams, LossBreakdown)> {
    gradients_with_code_energy(params, hyper, x, a).map(|(g, l, _)| (g, l))
}

/// [`gradients`] plus `|Z|_F^2` from the same forward pass.
pub(crate) fn gradients_with_code_energy(
    params: &NetParams,
    hyper: &Hyperparams,
    x: ArrayView2<f64>,
    a: &AdjacencyMatrix,
) -> Result<(NetParams, LossBreakdown, f64)> {
    let ev = evaluate(params, hyper, x, a)?;
    let code_energy = sq_norm(&ev.enc.z);
    let [g1, g2] = params.encoder.geometries()?;
    let [g_inner, g_outer] = params.decoder.geometries()?;
    let mut grads = params.zeroed();

    // Decoder path.
    let mut d_out = &ev.dec.x_hat - &x;
    Zip::from(&mut d_out)
        .and(&ev.dec.x_hat)
        .for_each(|g, &y| *g *= y * (1.0 - y));
    let [d1, d2] = &params.decoder.layers;
    let (dk, db, mut d_hidden) = deconv_backward(d_out.view(), ev.dec.hidden.view(), d2.kernel_matrix(), &g_outer);
    grads.decoder.layers[1].kernels = into_kernel(dk, &d2.kernels);
    grads.decoder.layers[1].biases = db;
    relu_mask(&mut d_hidden, &ev.dec.pre1);
    let (dk, db, mut d_z) = deconv_backward(d_hidden.view(), ev.enc.z.view(), d1.kernel_matrix(), &g_inner);
    grads.decoder.layers[0].kernels = into_kernel(dk, &d1.kernels);
    grads.decoder.layers[0].biases = db;

    // Self-expression: d/dZ l2/2 |(I - R) Z|^2 = l2 (I - R)^T (Z - R Z).
    if hyper.lambda2 != 0.0 {
        let back = &ev.se_residual - &params.r.r.t().dot(&ev.se_residual);
        d_z.scaled_add(hyper.lambda2, &back);
    }

    // Encoder.
    let [e1, e2] = &params.encoder.layers;
    relu_mask(&mut d_z, &ev.enc.pre2);
    let (dk, db, d_hidden) = conv_backward(d_z.view(), &ev.enc.cols2, e2.kernel_matrix(), &g2, true);
    grads.encoder.layers[1].kernels = into_kernel(dk, &e2.kernels);
    grads.encoder.layers[1].biases = db;
    let mut d_hidden = d_hidden.expect("input gradient requested");
    relu_mask(&mut d_hidden, &ev.enc.pre1);
    let (dk, db, _) = conv_backward(d_hidden.view(), &ev.enc.cols1, e1.kernel_matrix(), &g1, false);
    grads.encoder.layers[0].kernels = into_kernel(dk, &e1.kernels);
    grads.encoder.layers[0].biases = db;

    // R: 2 l1 R - l2 (Z - RZ) Z^T - l3 beta (alpha A - beta R).
    let mut d_r = (2.0 * hyper.lambda1) * &params.r.r;
    if hyper.lambda2 != 0.0 {
        d_r -= &(hyper.lambda2 * ev.se_residual.dot(&ev.enc.z.t()));
    }
    if let Some(g) = &ev.graph_residual {
        d_r.scaled_add(-hyper.lambda3 * hyper.beta, g);
    }
    d_r.diag_mut().fill(0.0);
    grads.r.r = d_r;

    if !grads.is_finite() {
        return Err(FdscError::numerics("gradient"));
    }
    Ok((grads, ev.breakdown, code_energy))
}
