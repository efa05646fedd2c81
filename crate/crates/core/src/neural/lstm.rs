//! Batched LSTM recurrence, fully connected head and their exact gradients
//! (backpropagation through time).
//!
//! Sequences are stored time-major: `xs[t][b][d]`. Per step,
//!
//! ```text
//! z   = x_t Wᵀ + h_{t-1} Uᵀ + b            (B × 4H, gates i f g o)
//! c_t = σ(z_f) ⊙ c_{t-1} + σ(z_i) ⊙ tanh(z_g)
//! h_t = σ(z_o) ⊙ tanh(c_t)
//! ```
//!
//! with `h_0 = c_0 = 0`. The head is `h_L → dropout → ReLU(FC) → linear`.

use super::config::Layout;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `C = A·B + beta·C` for row-major `C` (m × n) with arbitrary strides on A and B.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    assert!(c.len() >= m * n);
    if m == 1 {
        gemv(k, n, a, csa, b, rsb, csb, beta, c);
        return;
    }
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Dot product with four independent accumulators.
#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (xc, yc) = (x.chunks_exact(4), y.chunks_exact(4));
    let tail: f64 = xc.remainder().iter().zip(yc.remainder()).map(|(p, q)| p * q).sum();
    for (p, q) in xc.zip(yc) {
        acc[0] += p[0] * q[0];
        acc[1] += p[1] * q[1];
        acc[2] += p[2] * q[2];
        acc[3] += p[3] * q[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Single-row case of [`gemm`]: `c = a·B + beta·c` without packing `B`.
#[allow(clippy::too_many_arguments)]
fn gemv(k: usize, n: usize, a: &[f64], csa: usize, b: &[f64], rsb: usize, csb: usize, beta: f64, c: &mut [f64]) {
    let c = &mut c[..n];
    if beta == 0.0 {
        c.fill(0.0);
    } else if beta != 1.0 {
        c.iter_mut().for_each(|v| *v *= beta);
    }
    if k == 0 {
        return;
    }
    if rsb == 1 && csa == 1 {
        let a = &a[..k];
        for (j, out) in c.iter_mut().enumerate() {
            *out += dot(a, &b[j * csb..j * csb + k]);
        }
    } else if rsb == 1 {
        // Each output is a dot product with a contiguous column of B.
        for (j, out) in c.iter_mut().enumerate() {
            let col = &b[j * csb..j * csb + k];
            let mut acc = [0.0; 4];
            let mut chunks = col.chunks_exact(4);
            let mut i = 0;
            for w in &mut chunks {
                for (l, wv) in w.iter().enumerate() {
                    acc[l] += a[(i + l) * csa] * wv;
                }
                i += 4;
            }
            let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
            for (l, wv) in chunks.remainder().iter().enumerate() {
                sum += a[(i + l) * csa] * wv;
            }
            *out += sum;
        }
    } else {
        for kk in 0..k {
            let x = a[kk * csa];
            let row = &b[kk * rsb..];
            for (j, out) in c.iter_mut().enumerate() {
                *out += x * row[j * csb];
            }
        }
    }
}

/// Activations retained by a forward pass for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    pub(crate) batch: usize,
    pub(crate) seq_len: usize,
    pub(crate) generation: u64,
    pub(crate) xs: Vec<f64>,
    pub(crate) gates: Vec<f64>,
    pub(crate) cells: Vec<f64>,
    pub(crate) tanh_cells: Vec<f64>,
    pub(crate) hidden: Vec<f64>,
    pub(crate) mask: Vec<f64>,
    pub(crate) fc_pre: Vec<f64>,
    pub(crate) fc_act: Vec<f64>,
    pub(crate) outputs: Vec<f64>,
}

impl ForwardCache {
    /// Final hidden state `h_L` of every sequence (B × H).
    pub fn final_hidden(&self, hidden: usize) -> &[f64] {
        let step = self.batch * hidden;
        &self.hidden[(self.seq_len - 1) * step..self.seq_len * step]
    }

    /// Output layer values before any softmax (B × O).
    pub fn raw_outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

fn resize(v: &mut Vec<f64>, n: usize) {
    v.clear();
    v.resize(n, 0.0);
}

/// Runs the recurrence for `batch` time-major sequences of length `seq_len`,
/// taking ownership of the input buffer.
pub(crate) fn lstm_forward_batch(
    params: &[f64],
    layout: &Layout,
    xs: Vec<f64>,
    batch: usize,
    seq_len: usize,
    cache: &mut ForwardCache,
) {
    let (d, h) = (layout.input_dim, layout.hidden);
    let g4 = 4 * h;
    debug_assert_eq!(xs.len(), seq_len * batch * d);
    let w = &params[layout.w()];
    let u = &params[layout.u()];
    let bias = &params[layout.b()];

    cache.batch = batch;
    cache.seq_len = seq_len;
    cache.xs = xs;
    resize(&mut cache.gates, seq_len * batch * g4);
    resize(&mut cache.cells, seq_len * batch * h);
    resize(&mut cache.tanh_cells, seq_len * batch * h);
    resize(&mut cache.hidden, seq_len * batch * h);

    for t in 0..seq_len {
        let z = &mut cache.gates[t * batch * g4..(t + 1) * batch * g4];
        for row in z.chunks_exact_mut(g4) {
            row.copy_from_slice(bias);
        }
        let x_t = &cache.xs[t * batch * d..(t + 1) * batch * d];
        // z += x_t · Wᵀ
        gemm(batch, d, g4, x_t, d, 1, w, 1, d, 1.0, z);
        if t > 0 {
            let h_prev = &cache.hidden[(t - 1) * batch * h..t * batch * h];
            gemm(batch, h, g4, h_prev, h, 1, u, 1, h, 1.0, z);
        }
        for b in 0..batch {
            let zr = &mut z[b * g4..(b + 1) * g4];
            for j in 0..h {
                zr[j] = sigmoid(zr[j]);
                zr[h + j] = sigmoid(zr[h + j]);
                zr[2 * h + j] = zr[2 * h + j].tanh();
                zr[3 * h + j] = sigmoid(zr[3 * h + j]);
            }
            let base = t * batch * h + b * h;
            for j in 0..h {
                let c_prev = if t > 0 {
                    cache.cells[base - batch * h + j]
                } else {
                    0.0
                };
                let c = zr[h + j] * c_prev + zr[j] * zr[2 * h + j];
                let tc = c.tanh();
                cache.cells[base + j] = c;
                cache.tanh_cells[base + j] = tc;
                cache.hidden[base + j] = zr[3 * h + j] * tc;
            }
        }
    }
}

/// Head forward on the cached `h_L`. `mask` is the inverted-dropout mask
/// (B × H) or empty for inference.
pub(crate) fn head_forward(params: &[f64], layout: &Layout, mask: Vec<f64>, cache: &mut ForwardCache) {
    let (h, f, o) = (layout.hidden, layout.fc, layout.outputs);
    let batch = cache.batch;
    let step = batch * h;
    let last = &cache.hidden[(cache.seq_len - 1) * step..cache.seq_len * step];
    let dropped: Vec<f64> = if mask.is_empty() {
        last.to_vec()
    } else {
        last.iter().zip(&mask).map(|(a, m)| a * m).collect()
    };
    cache.mask = mask;

    resize(&mut cache.fc_pre, batch * f);
    for row in cache.fc_pre.chunks_exact_mut(f) {
        row.copy_from_slice(&params[layout.fc_b()]);
    }
    gemm(batch, h, f, &dropped, h, 1, &params[layout.fc_w()], 1, h, 1.0, &mut cache.fc_pre);
    cache.fc_act = cache.fc_pre.iter().map(|&v| v.max(0.0)).collect();

    resize(&mut cache.outputs, batch * o);
    for row in cache.outputs.chunks_exact_mut(o) {
        row.copy_from_slice(&params[layout.out_b()]);
    }
    gemm(batch, f, o, &cache.fc_act, f, 1, &params[layout.out_w()], 1, f, 1.0, &mut cache.outputs);
}

/// Accumulates into `grads` the gradient of a loss whose derivative with
/// respect to the raw outputs is `d_out` (B × O).
pub(crate) fn backward_batch(
    params: &[f64],
    layout: &Layout,
    cache: &ForwardCache,
    d_out: &[f64],
    grads: &mut [f64],
) {
    let (d, h, f, o) = (layout.input_dim, layout.hidden, layout.fc, layout.outputs);
    let g4 = 4 * h;
    let batch = cache.batch;
    let seq_len = cache.seq_len;
    debug_assert_eq!(d_out.len(), batch * o);

    // Output layer.
    {
        let gw = &mut grads[layout.out_w()];
        // dOUT_W (O×F) += d_outᵀ · fc_act
        gemm(o, batch, f, d_out, 1, o, &cache.fc_act, f, 1, 1.0, gw);
    }
    {
        let gb = &mut grads[layout.out_b()];
        for row in d_out.chunks_exact(o) {
            for (g, v) in gb.iter_mut().zip(row) {
                *g += v;
            }
        }
    }
    let mut d_fc = vec![0.0; batch * f];
    gemm(batch, o, f, d_out, o, 1, &params[layout.out_w()], f, 1, 0.0, &mut d_fc);
    for (g, &pre) in d_fc.iter_mut().zip(&cache.fc_pre) {
        if pre <= 0.0 {
            *g = 0.0;
        }
    }

    // FC layer.
    let step = batch * h;
    let last = &cache.hidden[(seq_len - 1) * step..seq_len * step];
    let dropped: Vec<f64> = if cache.mask.is_empty() {
        last.to_vec()
    } else {
        last.iter().zip(&cache.mask).map(|(a, m)| a * m).collect()
    };
    gemm(f, batch, h, &d_fc, 1, f, &dropped, h, 1, 1.0, &mut grads[layout.fc_w()]);
    {
        let gb = &mut grads[layout.fc_b()];
        for row in d_fc.chunks_exact(f) {
            for (g, v) in gb.iter_mut().zip(row) {
                *g += v;
            }
        }
    }
    let mut dh = vec![0.0; batch * h];
    gemm(batch, f, h, &d_fc, f, 1, &params[layout.fc_w()], h, 1, 0.0, &mut dh);
    if !cache.mask.is_empty() {
        for (g, m) in dh.iter_mut().zip(&cache.mask) {
            *g *= m;
        }
    }

    // Through time.
    let u = &params[layout.u()];
    let mut dc = vec![0.0; batch * h];
    let mut dz = vec![0.0; batch * g4];
    let w_range = layout.w();
    let u_range = layout.u();
    let b_range = layout.b();
    for t in (0..seq_len).rev() {
        let gates = &cache.gates[t * batch * g4..(t + 1) * batch * g4];
        for b in 0..batch {
            let gr = &gates[b * g4..(b + 1) * g4];
            let base = t * batch * h + b * h;
            let dzr = &mut dz[b * g4..(b + 1) * g4];
            for j in 0..h {
                let (i_g, f_g, g_g, o_g) = (gr[j], gr[h + j], gr[2 * h + j], gr[3 * h + j]);
                let tc = cache.tanh_cells[base + j];
                let c_prev = if t > 0 {
                    cache.cells[base - batch * h + j]
                } else {
                    0.0
                };
                let dh_j = dh[b * h + j];
                let dc_j = dc[b * h + j] + dh_j * o_g * (1.0 - tc * tc);
                dzr[j] = dc_j * g_g * i_g * (1.0 - i_g);
                dzr[h + j] = dc_j * c_prev * f_g * (1.0 - f_g);
                dzr[2 * h + j] = dc_j * i_g * (1.0 - g_g * g_g);
                dzr[3 * h + j] = dh_j * tc * o_g * (1.0 - o_g);
                dc[b * h + j] = dc_j * f_g;
            }
        }
        let x_t = &cache.xs[t * batch * d..(t + 1) * batch * d];
        // dW (4H×D) += dzᵀ · x_t
        gemm(g4, batch, d, &dz, 1, g4, x_t, d, 1, 1.0, &mut grads[w_range.clone()]);
        if t > 0 {
            let h_prev = &cache.hidden[(t - 1) * batch * h..t * batch * h];
            gemm(g4, batch, h, &dz, 1, g4, h_prev, h, 1, 1.0, &mut grads[u_range.clone()]);
            // dh_{t-1} = dz · U
            gemm(batch, g4, h, &dz, g4, 1, u, h, 1, 0.0, &mut dh);
        }
        let gb = &mut grads[b_range.clone()];
        for row in dz.chunks_exact(g4) {
            for (g, v) in gb.iter_mut().zip(row) {
                *g += v;
            }
        }
    }
}
