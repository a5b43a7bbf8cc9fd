//! Layer kinds with their forward and reverse-mode rules.

use rayon::prelude::*;

use super::Tensor;
use crate::error::{Error, Result};
use crate::Scalar;

/// Layer description. Shapes are per sample; the batch axis is implicit.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense { fan_in: usize, fan_out: usize },
    /// "Same" zero padding: output side = ceil(input side / stride).
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    /// Nearest-neighbour upsampling of a [C, H, W] map.
    Upsample { factor: usize },
    LeakyRelu { alpha: f64 },
    Tanh,
    Sigmoid,
    Flatten,
    Reshape { shape: Vec<usize> },
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Upsample { .. } => "upsample",
            LayerSpec::LeakyRelu { .. } => "leaky_relu",
            LayerSpec::Tanh => "tanh",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Reshape { .. } => "reshape",
        }
    }

    /// Per-sample output shape, or an error if `input` is incompatible.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |expected: Vec<usize>| Error::ShapeMismatch {
            expected,
            found: input.to_vec(),
        };
        match self {
            LayerSpec::Dense { fan_in, fan_out } => {
                if input != [*fan_in] {
                    return Err(mismatch(vec![*fan_in]));
                }
                Ok(vec![*fan_out])
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                if input.len() != 3 || input[0] != *in_channels || *kernel == 0 || *stride == 0 {
                    return Err(mismatch(vec![*in_channels, 0, 0]));
                }
                Ok(vec![*out_channels, input[1].div_ceil(*stride), input[2].div_ceil(*stride)])
            }
            LayerSpec::Upsample { factor } => {
                if input.len() != 3 || *factor == 0 {
                    return Err(mismatch(vec![0, 0, 0]));
                }
                Ok(vec![input[0], input[1] * factor, input[2] * factor])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Reshape { shape } => {
                if shape.iter().product::<usize>() != input.iter().product::<usize>() {
                    return Err(mismatch(shape.clone()));
                }
                Ok(shape.clone())
            }
            LayerSpec::LeakyRelu { .. } | LayerSpec::Tanh | LayerSpec::Sigmoid => Ok(input.to_vec()),
        }
    }

    /// Shapes of (weight, bias) for parametric layers.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match self {
            LayerSpec::Dense { fan_in, fan_out } => vec![vec![*fan_out, *fan_in], vec![*fan_out]],
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![
                vec![*out_channels, in_channels * kernel * kernel],
                vec![*out_channels],
            ],
            _ => Vec::new(),
        }
    }

    /// (fan_in, fan_out) used for initialization.
    pub fn fans(&self) -> (usize, usize) {
        match self {
            LayerSpec::Dense { fan_in, fan_out } => (*fan_in, *fan_out),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => (in_channels * kernel * kernel, out_channels * kernel * kernel),
            _ => (0, 0),
        }
    }
}

/// Geometry of a same-padded convolution on one sample.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    s: usize,
    oh: usize,
    ow: usize,
    pad_top: usize,
    pad_left: usize,
}

impl ConvGeom {
    fn new(input: &[usize], kernel: usize, stride: usize) -> Self {
        let (c, h, w) = (input[0], input[1], input[2]);
        let (oh, ow) = (h.div_ceil(stride), w.div_ceil(stride));
        let pad_h = ((oh - 1) * stride + kernel).saturating_sub(h);
        let pad_w = ((ow - 1) * stride + kernel).saturating_sub(w);
        Self {
            c,
            h,
            w,
            k: kernel,
            s: stride,
            oh,
            ow,
            pad_top: pad_h / 2,
            pad_left: pad_w / 2,
        }
    }

    fn rows(&self) -> usize {
        self.c * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    /// Visit every (column-matrix index, input index) pair that is not padding.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize)) {
        let cols = self.cols();
        for ch in 0..self.c {
            for ki in 0..self.k {
                for kj in 0..self.k {
                    let j = (ch * self.k + ki) * self.k + kj;
                    for oy in 0..self.oh {
                        let y = (oy * self.s + ki) as isize - self.pad_top as isize;
                        if y < 0 || y >= self.h as isize {
                            continue;
                        }
                        let src_row = (ch * self.h + y as usize) * self.w;
                        let dst_row = j * cols + oy * self.ow;
                        for ox in 0..self.ow {
                            let x = (ox * self.s + kj) as isize - self.pad_left as isize;
                            if x >= 0 && x < self.w as isize {
                                f(dst_row + ox, src_row + x as usize);
                            }
                        }
                    }
                }
            }
        }
    }

    /// Contiguous runs (output offset, input offset, length) within one plane
    /// for tap (ki, kj). Stride 1 only.
    #[inline]
    fn spans(&self, ki: usize, kj: usize, mut f: impl FnMut(usize, usize, usize)) {
        let x0 = self.pad_left.saturating_sub(kj);
        let x1 = self.ow.min((self.w + self.pad_left).saturating_sub(kj));
        if x1 <= x0 {
            return;
        }
        for oy in 0..self.oh {
            let y = (oy + ki) as isize - self.pad_top as isize;
            if y < 0 || y >= self.h as isize {
                continue;
            }
            f(oy * self.ow + x0, y as usize * self.w + x0 + kj - self.pad_left, x1 - x0);
        }
    }

    fn direct_forward<T: Scalar>(&self, x: &[T], w: &[T], b: &[T], out: &mut [T]) {
        let (cols, plane, rows) = (self.cols(), self.h * self.w, self.rows());
        for (o, orow) in out.chunks_mut(cols).enumerate() {
            orow.iter_mut().for_each(|v| *v = b[o]);
            for ch in 0..self.c {
                let xp = &x[ch * plane..(ch + 1) * plane];
                for ki in 0..self.k {
                    for kj in 0..self.k {
                        let wv = w[o * rows + (ch * self.k + ki) * self.k + kj];
                        if wv == T::zero() {
                            continue;
                        }
                        self.spans(ki, kj, |oo, io, len| axpy(&mut orow[oo..oo + len], wv, &xp[io..io + len]));
                    }
                }
            }
        }
    }

    fn direct_backward<T: Scalar>(&self, x: &[T], grad: &[T], w: &[T], dx: &mut [T], dw: &mut [T], db: &mut [T]) {
        let (cols, plane, rows) = (self.cols(), self.h * self.w, self.rows());
        for (o, go) in grad.chunks(cols).enumerate() {
            db[o] = go.iter().copied().sum();
            for ch in 0..self.c {
                let xp = &x[ch * plane..(ch + 1) * plane];
                let dxp = &mut dx[ch * plane..(ch + 1) * plane];
                for ki in 0..self.k {
                    for kj in 0..self.k {
                        let j = o * rows + (ch * self.k + ki) * self.k + kj;
                        let wv = w[j];
                        let mut acc = T::zero();
                        self.spans(ki, kj, |oo, io, len| {
                            acc += dot(&go[oo..oo + len], &xp[io..io + len]);
                            axpy(&mut dxp[io..io + len], wv, &go[oo..oo + len]);
                        });
                        dw[j] = acc;
                    }
                }
            }
        }
    }

    fn im2col<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let mut col = vec![T::zero(); self.rows() * self.cols()];
        self.for_each_tap(|d, s| col[d] = x[s]);
        col
    }

    fn col2im<T: Scalar>(&self, dcol: &[T]) -> Vec<T> {
        let mut dx = vec![T::zero(); self.c * self.h * self.w];
        self.for_each_tap(|d, s| dx[s] += dcol[d]);
        dx
    }
}

/// Values a layer keeps for its backward pass.
#[derive(Debug, Clone)]
pub(crate) enum Saved<T> {
    None,
    /// Layer input (dense, stride-1 conv, leaky relu).
    Input(Tensor<T>),
    /// Layer output (tanh, sigmoid).
    Output(Tensor<T>),
    /// Per-sample column matrices.
    Columns(Vec<Vec<T>>),
}

pub(crate) fn forward<T: Scalar>(
    spec: &LayerSpec,
    params: &[Tensor<T>],
    input: Tensor<T>,
    out_shape: &[usize],
) -> Result<(Tensor<T>, Saved<T>)> {
    let batch = input.batch();
    let mut full_shape = vec![batch];
    full_shape.extend_from_slice(out_shape);
    match spec {
        LayerSpec::Dense { fan_in, fan_out } => {
            let (w, b) = (params[0].data(), params[1].data());
            let x = input.data();
            let (fi, fo) = (*fan_in, *fan_out);
            let mut out = vec![T::zero(); batch * fo];
            let per = rows_per_task(batch);
            out.par_chunks_mut(per * fo).enumerate().for_each(|(t, block)| {
                let n0 = t * per;
                let rows = block.len() / fo;
                for o in 0..fo {
                    let wr = &w[o * fi..(o + 1) * fi];
                    for r in 0..rows {
                        let n = n0 + r;
                        block[r * fo + o] = b[o] + dot(wr, &x[n * fi..(n + 1) * fi]);
                    }
                }
            });
            Ok((Tensor::from_vec(&full_shape, out)?, Saved::Input(input)))
        }
        LayerSpec::Conv2d {
            out_channels,
            kernel,
            stride,
            ..
        } => {
            let in_shape = &input.shape()[1..];
            let g = ConvGeom::new(in_shape, *kernel, *stride);
            let (w, b) = (params[0].data(), params[1].data());
            let (rows, cols) = (g.rows(), g.cols());
            if g.s == 1 {
                let mut data = vec![T::zero(); batch * out_channels * cols];
                data.par_chunks_mut(out_channels * cols).enumerate().for_each(|(n, out)| {
                    g.direct_forward(input.row(n), w, b, out);
                });
                return Ok((Tensor::from_vec(&full_shape, data)?, Saved::Input(input)));
            }
            let per: Vec<(Vec<T>, Vec<T>)> = (0..batch)
                .into_par_iter()
                .map(|n| {
                    let col = g.im2col(input.row(n));
                    let mut out = vec![T::zero(); out_channels * cols];
                    for o in 0..*out_channels {
                        let orow = &mut out[o * cols..(o + 1) * cols];
                        orow.iter_mut().for_each(|v| *v = b[o]);
                        for j in 0..rows {
                            let wv = w[o * rows + j];
                            if wv != T::zero() {
                                axpy(orow, wv, &col[j * cols..(j + 1) * cols]);
                            }
                        }
                    }
                    (out, col)
                })
                .collect();
            let mut data = Vec::with_capacity(batch * out_channels * cols);
            let mut cols_saved = Vec::with_capacity(batch);
            for (o, c) in per {
                data.extend(o);
                cols_saved.push(c);
            }
            Ok((Tensor::from_vec(&full_shape, data)?, Saved::Columns(cols_saved)))
        }
        LayerSpec::Upsample { factor } => {
            let s = &input.shape()[1..];
            let (c, h, w) = (s[0], s[1], s[2]);
            let f = *factor;
            let (oh, ow) = (h * f, w * f);
            let mut out = Vec::with_capacity(batch * c * oh * ow);
            for n in 0..batch {
                let x = input.row(n);
                for ch in 0..c {
                    for y in 0..oh {
                        for xx in 0..ow {
                            out.push(x[(ch * h + y / f) * w + xx / f]);
                        }
                    }
                }
            }
            Ok((Tensor::from_vec(&full_shape, out)?, Saved::None))
        }
        LayerSpec::LeakyRelu { alpha } => {
            let a = T::lit(*alpha);
            let out = input.map(|v| if v > T::zero() { v } else { a * v });
            Ok((out, Saved::Input(input)))
        }
        LayerSpec::Tanh => {
            let out = input.map(|v| v.tanh());
            Ok((out.clone(), Saved::Output(out)))
        }
        LayerSpec::Sigmoid => {
            let out = input.map(sigmoid);
            Ok((out.clone(), Saved::Output(out)))
        }
        LayerSpec::Flatten | LayerSpec::Reshape { .. } => Ok((input.reshape(&full_shape)?, Saved::None)),
    }
}

/// Returns (input gradient, parameter gradients).
pub(crate) fn backward<T: Scalar>(
    spec: &LayerSpec,
    params: &[Tensor<T>],
    saved: &Saved<T>,
    in_shape: &[usize],
    grad: Tensor<T>,
) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
    let batch = grad.batch();
    let mut full_in = vec![batch];
    full_in.extend_from_slice(in_shape);
    match (spec, saved) {
        (LayerSpec::Dense { fan_in, fan_out }, Saved::Input(x)) => {
            let (w, g, xd) = (params[0].data(), grad.data(), x.data());
            let (fi, fo) = (*fan_in, *fan_out);
            let mut dw = vec![T::zero(); fo * fi];
            dw.par_chunks_mut(OUT_BLOCK * fi).enumerate().for_each(|(t, block)| {
                let o0 = t * OUT_BLOCK;
                for n in 0..batch {
                    let xr = &xd[n * fi..(n + 1) * fi];
                    for (r, row) in block.chunks_mut(fi).enumerate() {
                        let gv = g[n * fo + o0 + r];
                        if gv != T::zero() {
                            axpy(row, gv, xr);
                        }
                    }
                }
            });
            let db: Vec<T> = (0..fo).map(|o| (0..batch).map(|n| g[n * fo + o]).sum()).collect();
            let mut dx = vec![T::zero(); batch * fi];
            let per = rows_per_task(batch);
            dx.par_chunks_mut(per * fi).enumerate().for_each(|(t, block)| {
                let n0 = t * per;
                for o in 0..fo {
                    let wr = &w[o * fi..(o + 1) * fi];
                    for (r, row) in block.chunks_mut(fi).enumerate() {
                        let gv = g[(n0 + r) * fo + o];
                        if gv != T::zero() {
                            axpy(row, gv, wr);
                        }
                    }
                }
            });
            Ok((
                Tensor::from_vec(&full_in, dx)?,
                vec![Tensor::from_vec(&[fo, fi], dw)?, Tensor::from_vec(&[fo], db)?],
            ))
        }
        (
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                stride,
                ..
            },
            Saved::Input(x),
        ) => {
            let g = ConvGeom::new(in_shape, *kernel, *stride);
            let (rows, oc) = (g.rows(), *out_channels);
            let w = params[0].data();
            let in_len = g.c * g.h * g.w;
            let mut dx = vec![T::zero(); batch * in_len];
            let partial: Vec<(Vec<T>, Vec<T>)> = dx
                .par_chunks_mut(in_len)
                .enumerate()
                .map(|(n, dxr)| {
                    let mut dw = vec![T::zero(); oc * rows];
                    let mut db = vec![T::zero(); oc];
                    g.direct_backward(x.row(n), grad.row(n), w, dxr, &mut dw, &mut db);
                    (dw, db)
                })
                .collect();
            let (dw, db) = sum_partials(partial, oc * rows, oc);
            Ok((
                Tensor::from_vec(&full_in, dx)?,
                vec![Tensor::from_vec(&[oc, rows], dw)?, Tensor::from_vec(&[oc], db)?],
            ))
        }
        (
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                stride,
                ..
            },
            Saved::Columns(cols_saved),
        ) => {
            let g = ConvGeom::new(in_shape, *kernel, *stride);
            let (rows, cols) = (g.rows(), g.cols());
            let w = params[0].data();
            let oc = *out_channels;
            let per: Vec<(Vec<T>, Vec<T>, Vec<T>)> = (0..batch)
                .into_par_iter()
                .map(|n| {
                    let gr = grad.row(n);
                    let col = &cols_saved[n];
                    let mut dw = vec![T::zero(); oc * rows];
                    let mut db = vec![T::zero(); oc];
                    let mut dcol = vec![T::zero(); rows * cols];
                    for o in 0..oc {
                        let go = &gr[o * cols..(o + 1) * cols];
                        db[o] = go.iter().copied().sum();
                        for j in 0..rows {
                            let cj = &col[j * cols..(j + 1) * cols];
                            dw[o * rows + j] = dot(go, cj);
                            let wv = w[o * rows + j];
                            if wv != T::zero() {
                                axpy(&mut dcol[j * cols..(j + 1) * cols], wv, go);
                            }
                        }
                    }
                    (g.col2im(&dcol), dw, db)
                })
                .collect();
            let mut dx = Vec::with_capacity(batch * g.c * g.h * g.w);
            let mut partial = Vec::with_capacity(batch);
            for (x, w_, b_) in per {
                dx.extend(x);
                partial.push((w_, b_));
            }
            let (dw, db) = sum_partials(partial, oc * rows, oc);
            Ok((
                Tensor::from_vec(&full_in, dx)?,
                vec![Tensor::from_vec(&[oc, rows], dw)?, Tensor::from_vec(&[oc], db)?],
            ))
        }
        (LayerSpec::Upsample { factor }, _) => {
            let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
            let f = *factor;
            let (oh, ow) = (h * f, w * f);
            let mut dx = vec![T::zero(); batch * c * h * w];
            for n in 0..batch {
                let gr = grad.row(n);
                let base = n * c * h * w;
                for ch in 0..c {
                    for y in 0..oh {
                        for xx in 0..ow {
                            dx[base + (ch * h + y / f) * w + xx / f] += gr[(ch * oh + y) * ow + xx];
                        }
                    }
                }
            }
            Ok((Tensor::from_vec(&full_in, dx)?, Vec::new()))
        }
        (LayerSpec::LeakyRelu { alpha }, Saved::Input(x)) => {
            let a = T::lit(*alpha);
            let dx = grad.zip_map(x, |g, v| if v > T::zero() { g } else { a * g })?;
            Ok((dx, Vec::new()))
        }
        (LayerSpec::Tanh, Saved::Output(y)) => {
            let dx = grad.zip_map(y, |g, t| g * (T::one() - t * t))?;
            Ok((dx, Vec::new()))
        }
        (LayerSpec::Sigmoid, Saved::Output(y)) => {
            let dx = grad.zip_map(y, |g, s| g * s * (T::one() - s))?;
            Ok((dx, Vec::new()))
        }
        (LayerSpec::Flatten | LayerSpec::Reshape { .. }, _) => Ok((grad.reshape(&full_in)?, Vec::new())),
        _ => Err(Error::invalid(format!("tape does not match layer {}", spec.name()))),
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// Output rows handled together by one dense-layer task.
const OUT_BLOCK: usize = 8;

fn rows_per_task(batch: usize) -> usize {
    batch.div_ceil(rayon::current_num_threads()).max(1)
}

fn sum_partials<T: Scalar>(partial: Vec<(Vec<T>, Vec<T>)>, nw: usize, nb: usize) -> (Vec<T>, Vec<T>) {
    let mut dw = vec![T::zero(); nw];
    let mut db = vec![T::zero(); nb];
    for (w_, b_) in partial {
        dw.iter_mut().zip(&w_).for_each(|(a, &b)| *a += b);
        db.iter_mut().zip(&b_).for_each(|(a, &b)| *a += b);
    }
    (dw, db)
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    s
}

#[inline]
fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
