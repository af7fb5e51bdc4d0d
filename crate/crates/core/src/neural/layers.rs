//! Batched forward and reverse-mode passes.

use super::{Layout, LayerKind, NetworkSpec, ParamStore};
use crate::error::{Error, Result};

/// `c = a · b` (or `c += a · b` when `acc`), with `a` m×k and `b` k×n.
/// `ta` / `tb` mark an operand stored transposed (k×m / n×k row-major).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
    c: &mut [f64],
    acc: bool,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !acc {
            c[..m * n].fill(0.0);
        }
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    let beta = if acc { 1.0 } else { 0.0 };
    // SAFETY: the asserts above bound every access the strides describe.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Adds `bias` to every row of a row-major matrix with `bias.len()` columns.
fn add_rows(z: &mut [f64], bias: &[f64]) {
    for row in z.chunks_exact_mut(bias.len()) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

fn column_sums(dz: &[f64], width: usize, out: &mut [f64]) {
    for row in dz.chunks_exact(width) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

/// Mean over objects: `(batch*n) x w` -> `batch x w`.
fn set_mean(x: &[f64], batch: usize, n: usize, w: usize) -> Vec<f64> {
    let mut m = vec![0.0; batch * w];
    let scale = 1.0 / n as f64;
    for b in 0..batch {
        let dst = &mut m[b * w..(b + 1) * w];
        for i in 0..n {
            let src = &x[(b * n + i) * w..(b * n + i + 1) * w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        dst.iter_mut().for_each(|d| *d *= scale);
    }
    m
}

/// Pair pools of a `batch x k x k x w` tensor.
struct PairPools {
    /// `col[b, j] = mean_a x[b, a, j]`
    col: Vec<f64>,
    /// `row[b, i] = mean_j x[b, i, j]`
    row: Vec<f64>,
    /// `all[b] = mean_ij x[b, i, j]`
    all: Vec<f64>,
    /// `diag[b, i] = x[b, i, i]`
    diag: Vec<f64>,
}

fn pair_pools(x: &[f64], batch: usize, k: usize, w: usize) -> PairPools {
    let mut col = vec![0.0; batch * k * w];
    let mut row = vec![0.0; batch * k * w];
    let mut all = vec![0.0; batch * w];
    let mut diag = vec![0.0; batch * k * w];
    let inv_k = 1.0 / k as f64;
    for b in 0..batch {
        for i in 0..k {
            for j in 0..k {
                let src = &x[((b * k + i) * k + j) * w..((b * k + i) * k + j + 1) * w];
                for f in 0..w {
                    col[(b * k + j) * w + f] += src[f];
                    row[(b * k + i) * w + f] += src[f];
                }
                if i == j {
                    diag[(b * k + i) * w..(b * k + i + 1) * w].copy_from_slice(src);
                }
            }
        }
        for f in 0..w {
            let mut total = 0.0;
            for i in 0..k {
                total += row[(b * k + i) * w + f];
            }
            all[b * w + f] = total * inv_k * inv_k;
        }
    }
    col.iter_mut().for_each(|v| *v *= inv_k);
    row.iter_mut().for_each(|v| *v *= inv_k);
    PairPools {
        col,
        row,
        all,
        diag,
    }
}

/// Pre-activation of one layer.
#[allow(clippy::too_many_arguments)]
fn layer_forward(
    kind: LayerKind,
    layout: Layout,
    in_w: usize,
    out_w: usize,
    params: &ParamStore,
    layer: usize,
    x: &[f64],
    batch: usize,
) -> Vec<f64> {
    let bias = params.bias(layer);
    match (kind, layout) {
        (LayerKind::Dense, _) => {
            let mut z = vec![0.0; batch * out_w];
            gemm(batch, in_w, out_w, x, false, params.weight(layer, 0), false, &mut z, false);
            add_rows(&mut z, bias);
            z
        }
        (LayerKind::EquivariantSet, Layout::Set { n, .. }) => {
            let mut z = vec![0.0; batch * n * out_w];
            gemm(batch * n, in_w, out_w, x, false, params.weight(layer, 0), false, &mut z, false);
            let mean = set_mean(x, batch, n, in_w);
            let mut pooled = vec![0.0; batch * out_w];
            gemm(batch, in_w, out_w, &mean, false, params.weight(layer, 1), false, &mut pooled, false);
            add_rows(&mut pooled, bias);
            for b in 0..batch {
                let add = &pooled[b * out_w..(b + 1) * out_w];
                add_rows(&mut z[b * n * out_w..(b + 1) * n * out_w], add);
            }
            z
        }
        (LayerKind::Equivariant2d, Layout::Pairs { k, .. }) => {
            let mut z = vec![0.0; batch * k * k * out_w];
            gemm(batch * k * k, in_w, out_w, x, false, params.weight(layer, 0), false, &mut z, false);
            let pools = pair_pools(x, batch, k, in_w);
            let mut col = vec![0.0; batch * k * out_w];
            let mut row = vec![0.0; batch * k * out_w];
            let mut all = vec![0.0; batch * out_w];
            let mut diag = vec![0.0; batch * k * out_w];
            gemm(batch * k, in_w, out_w, &pools.col, false, params.weight(layer, 1), false, &mut col, false);
            gemm(batch * k, in_w, out_w, &pools.row, false, params.weight(layer, 2), false, &mut row, false);
            gemm(batch, in_w, out_w, &pools.all, false, params.weight(layer, 3), false, &mut all, false);
            gemm(batch * k, in_w, out_w, &pools.diag, false, params.weight(layer, 4), false, &mut diag, false);
            add_rows(&mut all, bias);
            for b in 0..batch {
                for i in 0..k {
                    for j in 0..k {
                        let dst = &mut z[((b * k + i) * k + j) * out_w..((b * k + i) * k + j + 1) * out_w];
                        let c = &col[(b * k + j) * out_w..(b * k + j + 1) * out_w];
                        let r = &row[(b * k + i) * out_w..(b * k + i + 1) * out_w];
                        let g = &all[b * out_w..(b + 1) * out_w];
                        for f in 0..out_w {
                            dst[f] += c[f] + r[f] + g[f];
                        }
                        if i == j {
                            let d = &diag[(b * k + i) * out_w..(b * k + i + 1) * out_w];
                            for f in 0..out_w {
                                dst[f] += d[f];
                            }
                        }
                    }
                }
            }
            z
        }
        (LayerKind::DiagReadout, Layout::Pairs { k, .. }) => {
            let pools = pair_pools(x, batch, k, in_w);
            let mut z = vec![0.0; batch * k * out_w];
            gemm(batch * k, in_w, out_w, &pools.diag, false, params.weight(layer, 0), false, &mut z, false);
            add_rows(&mut z, bias);
            z
        }
        _ => unreachable!("layouts are validated by NetworkSpec"),
    }
}

/// Accumulates parameter gradients into `grads` and returns the input
/// gradient when `need_dx`.
#[allow(clippy::too_many_arguments)]
fn layer_backward(
    kind: LayerKind,
    layout: Layout,
    in_w: usize,
    out_w: usize,
    params: &ParamStore,
    layer: usize,
    x: &[f64],
    dz: &[f64],
    batch: usize,
    grads: &mut ParamStore,
    need_dx: bool,
) -> Option<Vec<f64>> {
    let slices = grads.layer(layer).clone();
    column_sums(dz, out_w, &mut grads.values[slices.bias.clone()]);
    match (kind, layout) {
        (LayerKind::Dense, _) => {
            gemm(in_w, batch, out_w, x, true, dz, false, &mut grads.values[slices.weights[0].clone()], true);
            need_dx.then(|| {
                let mut dx = vec![0.0; batch * in_w];
                gemm(batch, out_w, in_w, dz, false, params.weight(layer, 0), true, &mut dx, false);
                dx
            })
        }
        (LayerKind::EquivariantSet, Layout::Set { n, .. }) => {
            let rows = batch * n;
            gemm(in_w, rows, out_w, x, true, dz, false, &mut grads.values[slices.weights[0].clone()], true);
            let mean = set_mean(x, batch, n, in_w);
            // S[b] = sum_i dz[b, i]
            let mut summed = vec![0.0; batch * out_w];
            for b in 0..batch {
                column_sums(&dz[b * n * out_w..(b + 1) * n * out_w], out_w, &mut summed[b * out_w..(b + 1) * out_w]);
            }
            gemm(in_w, batch, out_w, &mean, true, &summed, false, &mut grads.values[slices.weights[1].clone()], true);
            need_dx.then(|| {
                let mut dx = vec![0.0; rows * in_w];
                gemm(rows, out_w, in_w, dz, false, params.weight(layer, 0), true, &mut dx, false);
                let mut pooled = vec![0.0; batch * in_w];
                gemm(batch, out_w, in_w, &summed, false, params.weight(layer, 1), true, &mut pooled, false);
                let scale = 1.0 / n as f64;
                pooled.iter_mut().for_each(|v| *v *= scale);
                for b in 0..batch {
                    add_rows(&mut dx[b * n * in_w..(b + 1) * n * in_w], &pooled[b * in_w..(b + 1) * in_w]);
                }
                dx
            })
        }
        (LayerKind::Equivariant2d, Layout::Pairs { k, .. }) => {
            let rows = batch * k * k;
            gemm(in_w, rows, out_w, x, true, dz, false, &mut grads.values[slices.weights[0].clone()], true);
            let pools = pair_pools(x, batch, k, in_w);
            let mut s_col = vec![0.0; batch * k * out_w];
            let mut s_row = vec![0.0; batch * k * out_w];
            let mut s_all = vec![0.0; batch * out_w];
            let mut s_diag = vec![0.0; batch * k * out_w];
            for b in 0..batch {
                for i in 0..k {
                    for j in 0..k {
                        let src = &dz[((b * k + i) * k + j) * out_w..((b * k + i) * k + j + 1) * out_w];
                        for f in 0..out_w {
                            s_col[(b * k + j) * out_w + f] += src[f];
                            s_row[(b * k + i) * out_w + f] += src[f];
                            s_all[b * out_w + f] += src[f];
                        }
                        if i == j {
                            s_diag[(b * k + i) * out_w..(b * k + i + 1) * out_w].copy_from_slice(src);
                        }
                    }
                }
            }
            gemm(in_w, batch * k, out_w, &pools.col, true, &s_col, false, &mut grads.values[slices.weights[1].clone()], true);
            gemm(in_w, batch * k, out_w, &pools.row, true, &s_row, false, &mut grads.values[slices.weights[2].clone()], true);
            gemm(in_w, batch, out_w, &pools.all, true, &s_all, false, &mut grads.values[slices.weights[3].clone()], true);
            gemm(in_w, batch * k, out_w, &pools.diag, true, &s_diag, false, &mut grads.values[slices.weights[4].clone()], true);
            need_dx.then(|| {
                let mut dx = vec![0.0; rows * in_w];
                gemm(rows, out_w, in_w, dz, false, params.weight(layer, 0), true, &mut dx, false);
                let mut g_col = vec![0.0; batch * k * in_w];
                let mut g_row = vec![0.0; batch * k * in_w];
                let mut g_all = vec![0.0; batch * in_w];
                let mut g_diag = vec![0.0; batch * k * in_w];
                gemm(batch * k, out_w, in_w, &s_col, false, params.weight(layer, 1), true, &mut g_col, false);
                gemm(batch * k, out_w, in_w, &s_row, false, params.weight(layer, 2), true, &mut g_row, false);
                gemm(batch, out_w, in_w, &s_all, false, params.weight(layer, 3), true, &mut g_all, false);
                gemm(batch * k, out_w, in_w, &s_diag, false, params.weight(layer, 4), true, &mut g_diag, false);
                let inv_k = 1.0 / k as f64;
                let inv_k2 = inv_k * inv_k;
                for b in 0..batch {
                    for i in 0..k {
                        for j in 0..k {
                            let dst = &mut dx[((b * k + i) * k + j) * in_w..((b * k + i) * k + j + 1) * in_w];
                            for f in 0..in_w {
                                dst[f] += inv_k * g_col[(b * k + j) * in_w + f]
                                    + inv_k * g_row[(b * k + i) * in_w + f]
                                    + inv_k2 * g_all[b * in_w + f];
                                if i == j {
                                    dst[f] += g_diag[(b * k + i) * in_w + f];
                                }
                            }
                        }
                    }
                }
                dx
            })
        }
        (LayerKind::DiagReadout, Layout::Pairs { k, .. }) => {
            let pools = pair_pools(x, batch, k, in_w);
            gemm(in_w, batch * k, out_w, &pools.diag, true, dz, false, &mut grads.values[slices.weights[0].clone()], true);
            need_dx.then(|| {
                let mut d_diag = vec![0.0; batch * k * in_w];
                gemm(batch * k, out_w, in_w, dz, false, params.weight(layer, 0), true, &mut d_diag, false);
                let mut dx = vec![0.0; batch * k * k * in_w];
                for b in 0..batch {
                    for i in 0..k {
                        dx[((b * k + i) * k + i) * in_w..((b * k + i) * k + i + 1) * in_w]
                            .copy_from_slice(&d_diag[(b * k + i) * in_w..(b * k + i + 1) * in_w]);
                    }
                }
                dx
            })
        }
        _ => unreachable!("layouts are validated by NetworkSpec"),
    }
}

struct Tape {
    layouts: Vec<Layout>,
    /// `acts[i]` feeds layer `i`; the last entry is the network output.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

fn check_inputs(spec: &NetworkSpec, params: &ParamStore, inputs: &[f64], batch: usize) -> Result<Vec<Layout>> {
    let layouts = spec.layouts()?;
    if !params.matches(spec) {
        return Err(Error::Shape(format!(
            "parameter store of {} values does not fit spec",
            params.len()
        )));
    }
    if inputs.len() != batch * spec.input.len() {
        return Err(Error::Shape(format!(
            "{} input values for a batch of {batch} x {}",
            inputs.len(),
            spec.input.len()
        )));
    }
    Ok(layouts)
}

fn run(spec: &NetworkSpec, params: &ParamStore, inputs: &[f64], batch: usize) -> Result<Tape> {
    let layouts = check_inputs(spec, params, inputs, batch)?;
    let mut acts = vec![inputs.to_vec()];
    let mut pre = Vec::with_capacity(spec.layers.len());
    for (i, layer) in spec.layers.iter().enumerate() {
        let z = layer_forward(
            layer.kind,
            layouts[i],
            layer.in_width,
            layer.out_width,
            params,
            i,
            &acts[i],
            batch,
        );
        let y: Vec<f64> = z.iter().map(|v| layer.activation.apply(*v)).collect();
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("layer {i} ({layer}) produced a non-finite value")));
        }
        pre.push(z);
        acts.push(y);
    }
    Ok(Tape { layouts, acts, pre })
}

/// Network output for a single input.
pub fn forward(spec: &NetworkSpec, params: &ParamStore, input: &[f64]) -> Result<Vec<f64>> {
    forward_batch(spec, params, input, 1)
}

/// Outputs for `batch` stacked inputs, `batch x objects` row-major.
pub fn forward_batch(spec: &NetworkSpec, params: &ParamStore, inputs: &[f64], batch: usize) -> Result<Vec<f64>> {
    let mut tape = run(spec, params, inputs, batch)?;
    Ok(tape.acts.pop().expect("network has layers"))
}

/// Mean squared error over all batch entries and coordinates.
pub fn loss_mse(pred: &[f64], label: &[f64]) -> Result<f64> {
    if pred.len() != label.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} labels",
            pred.len(),
            label.len()
        )));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = pred.iter().zip(label).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(total / pred.len() as f64)
}

/// Batch MSE and its exact gradient with respect to every parameter.
pub fn backward(
    spec: &NetworkSpec,
    params: &ParamStore,
    inputs: &[f64],
    labels: &[f64],
    batch: usize,
) -> Result<(f64, ParamStore)> {
    let tape = run(spec, params, inputs, batch)?;
    let output = tape.acts.last().expect("network has layers");
    let loss = loss_mse(output, labels)?;
    let scale = 2.0 / output.len() as f64;
    let mut grads = params.zeros_like();
    let mut dy: Vec<f64> = output.iter().zip(labels).map(|(y, t)| scale * (y - t)).collect();
    for i in (0..spec.layers.len()).rev() {
        let layer = &spec.layers[i];
        let dz: Vec<f64> = dy
            .iter()
            .zip(&tape.pre[i])
            .map(|(g, z)| g * layer.activation.derivative(*z))
            .collect();
        match layer_backward(
            layer.kind,
            tape.layouts[i],
            layer.in_width,
            layer.out_width,
            params,
            i,
            &tape.acts[i],
            &dz,
            batch,
            &mut grads,
            i > 0,
        ) {
            Some(dx) => dy = dx,
            None => break,
        }
    }
    Ok((loss, grads))
}
