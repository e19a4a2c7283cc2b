//! Layer kinds with exact forward and backward passes.
//!
//! Convolution and pooling work on `[N, C, H, W]`, dense on `[N, F]`; ReLU and
//! sigmoid are elementwise on any shape.

use super::{NnError, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: usize,
    },
    Relu,
    MaxPool2d {
        size: usize,
        stride: usize,
    },
    GlobalAvgPool,
    Dense {
        in_features: usize,
        out_features: usize,
    },
    Sigmoid,
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv2d { .. } => "conv2d",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool2d { .. } => "maxpool2d",
            LayerKind::GlobalAvgPool => "global_avg_pool",
            LayerKind::Dense { .. } => "dense",
            LayerKind::Sigmoid => "sigmoid",
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            LayerKind::Conv2d { .. } => &["kernel", "bias"],
            LayerKind::Dense { .. } => &["weight", "bias"],
            _ => &[],
        }
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel: (kh, kw),
                ..
            } => vec![vec![out_channels, in_channels, kh, kw], vec![out_channels]],
            LayerKind::Dense {
                in_features,
                out_features,
            } => vec![vec![out_features, in_features], vec![out_features]],
            _ => vec![],
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        let mismatch = || {
            NnError::ShapeMismatch(format!("{} cannot take per-sample input {input:?}", self.name()))
        };
        match *self {
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel: (kh, kw),
                stride,
                padding,
            } => {
                let [c, h, w] = input else { return Err(mismatch()) };
                if *c != in_channels || stride == 0 || h + 2 * padding < kh || w + 2 * padding < kw {
                    return Err(mismatch());
                }
                Ok(vec![
                    out_channels,
                    (h + 2 * padding - kh) / stride + 1,
                    (w + 2 * padding - kw) / stride + 1,
                ])
            }
            LayerKind::MaxPool2d { size, stride } => {
                let [c, h, w] = input else { return Err(mismatch()) };
                if size == 0 || stride == 0 || *h < size || *w < size {
                    return Err(mismatch());
                }
                Ok(vec![*c, (h - size) / stride + 1, (w - size) / stride + 1])
            }
            LayerKind::GlobalAvgPool => {
                let [c, _, _] = input else { return Err(mismatch()) };
                Ok(vec![*c])
            }
            LayerKind::Dense {
                in_features,
                out_features,
            } => {
                if input != [in_features] {
                    return Err(mismatch());
                }
                Ok(vec![out_features])
            }
            LayerKind::Relu | LayerKind::Sigmoid => Ok(input.to_vec()),
        }
    }
}

/// How ReLU routes gradients backward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardMode {
    /// Exact derivative: pass where the forward input was positive.
    Standard,
    /// Guided backpropagation: additionally require a positive incoming gradient.
    Guided,
}

/// Per-layer state kept from the forward pass beyond its input and output.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerCache {
    None,
    /// Flat input index of the winning element for every pooled output.
    Argmax(Vec<u32>),
}

/// Input gradient (when requested) and parameter gradients (when requested).
pub type LayerGradients<T> = (Option<Tensor<T>>, Vec<Tensor<T>>);

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T: Scalar = f32> {
    kind: LayerKind,
    params: Vec<Tensor<T>>,
    pub frozen: bool,
}

impl<T: Scalar> Layer<T> {
    /// A layer of `kind` with zero-initialized parameters.
    pub fn new(kind: LayerKind) -> Self {
        Self {
            kind,
            params: kind.param_shapes().into_iter().map(Tensor::zeros).collect(),
            frozen: false,
        }
    }

    pub fn conv2d(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self::new(LayerKind::Conv2d {
            in_channels,
            out_channels,
            kernel: (kernel, kernel),
            stride,
            padding,
        })
    }

    pub fn dense(in_features: usize, out_features: usize) -> Self {
        Self::new(LayerKind::Dense {
            in_features,
            out_features,
        })
    }

    pub fn relu() -> Self {
        Self::new(LayerKind::Relu)
    }

    pub fn max_pool(size: usize, stride: usize) -> Self {
        Self::new(LayerKind::MaxPool2d { size, stride })
    }

    pub fn global_avg_pool() -> Self {
        Self::new(LayerKind::GlobalAvgPool)
    }

    pub fn sigmoid() -> Self {
        Self::new(LayerKind::Sigmoid)
    }

    pub fn with_params(mut self, params: Vec<Tensor<T>>) -> Result<Self, NnError> {
        self.set_params(params)?;
        Ok(self)
    }

    pub fn kind(&self) -> LayerKind {
        self.kind
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<Tensor<T>>) -> Result<(), NnError> {
        let want = self.kind.param_shapes();
        if params.len() != want.len() || params.iter().zip(&want).any(|(p, w)| p.shape() != w.as_slice()) {
            return Err(NnError::ShapeMismatch(format!(
                "{} expects parameter shapes {want:?}",
                self.kind.name()
            )));
        }
        self.params = params;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Layer<U> {
        Layer {
            kind: self.kind,
            params: self.params.iter().map(Tensor::cast).collect(),
            frozen: self.frozen,
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<Vec<usize>, NnError> {
        if x.shape().is_empty() || x.shape()[0] == 0 {
            return Err(NnError::ShapeMismatch("empty batch".into()));
        }
        let mut out = vec![x.shape()[0]];
        out.extend(self.kind.output_shape(&x.shape()[1..])?);
        Ok(out)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, LayerCache), NnError> {
        let out_shape = self.check_input(x)?;
        let mut y = Tensor::zeros(out_shape);
        let mut cache = LayerCache::None;
        match self.kind {
            LayerKind::Conv2d { .. } => conv_forward(&self.kind, &self.params, x, &mut y),
            LayerKind::Relu => {
                for (o, &v) in y.data_mut().iter_mut().zip(x.data()) {
                    *o = if v > T::zero() { v } else { T::zero() };
                }
            }
            LayerKind::Sigmoid => {
                for (o, &v) in y.data_mut().iter_mut().zip(x.data()) {
                    *o = sigmoid(v);
                }
            }
            LayerKind::MaxPool2d { size, stride } => {
                cache = LayerCache::Argmax(pool_forward(size, stride, x, &mut y));
            }
            LayerKind::GlobalAvgPool => {
                let (n, c) = (x.shape()[0], x.shape()[1]);
                let hw = x.shape()[2] * x.shape()[3];
                let inv = T::one() / T::from_usize(hw).unwrap();
                for i in 0..n * c {
                    let s: T = x.data()[i * hw..(i + 1) * hw].iter().copied().sum();
                    y.data_mut()[i] = s * inv;
                }
            }
            LayerKind::Dense {
                in_features,
                out_features,
            } => {
                let (w, b) = (self.params[0].data(), self.params[1].data());
                for n in 0..x.shape()[0] {
                    let xi = &x.data()[n * in_features..(n + 1) * in_features];
                    for o in 0..out_features {
                        let row = &w[o * in_features..(o + 1) * in_features];
                        let mut acc = b[o];
                        for (a, v) in row.iter().zip(xi) {
                            acc += *a * *v;
                        }
                        y.data_mut()[n * out_features + o] = acc;
                    }
                }
            }
        }
        Ok((y, cache))
    }

    /// Gradient of the loss with respect to this layer's input and parameters.
    ///
    /// `x` and `y` are the recorded input and output, `gy` the gradient at the output.
    /// Returns `(input gradient if requested, parameter gradients if requested)`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        x: &Tensor<T>,
        y: &Tensor<T>,
        cache: &LayerCache,
        gy: &Tensor<T>,
        mode: BackwardMode,
        want_input: bool,
        want_params: bool,
    ) -> Result<LayerGradients<T>, NnError> {
        if gy.shape() != y.shape() {
            return Err(NnError::ShapeMismatch(format!(
                "{} upstream gradient {:?} vs output {:?}",
                self.kind.name(),
                gy.shape(),
                y.shape()
            )));
        }
        let want_params = want_params && !self.params.is_empty();
        let mut gx = if want_input { Some(Tensor::zeros(x.shape().to_vec())) } else { None };
        let mut gp: Vec<Tensor<T>> = if want_params {
            self.params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect()
        } else {
            Vec::new()
        };
        match self.kind {
            LayerKind::Conv2d { .. } => {
                conv_backward(&self.kind, &self.params, x, gy, gx.as_mut(), if want_params { Some(&mut gp) } else { None })
            }
            LayerKind::Relu => {
                if let Some(gx) = gx.as_mut() {
                    for ((g, &xi), &up) in gx.data_mut().iter_mut().zip(x.data()).zip(gy.data()) {
                        let pass = xi > T::zero() && (mode == BackwardMode::Standard || up > T::zero());
                        *g = if pass { up } else { T::zero() };
                    }
                }
            }
            LayerKind::Sigmoid => {
                if let Some(gx) = gx.as_mut() {
                    for ((g, &yi), &up) in gx.data_mut().iter_mut().zip(y.data()).zip(gy.data()) {
                        *g = up * yi * (T::one() - yi);
                    }
                }
            }
            LayerKind::MaxPool2d { .. } => {
                let LayerCache::Argmax(arg) = cache else {
                    return Err(NnError::StaleRecord);
                };
                if let Some(gx) = gx.as_mut() {
                    let d = gx.data_mut();
                    for (&i, &up) in arg.iter().zip(gy.data()) {
                        d[i as usize] += up;
                    }
                }
            }
            LayerKind::GlobalAvgPool => {
                if let Some(gx) = gx.as_mut() {
                    let hw = x.shape()[2] * x.shape()[3];
                    let inv = T::one() / T::from_usize(hw).unwrap();
                    for (i, &up) in gy.data().iter().enumerate() {
                        gx.data_mut()[i * hw..(i + 1) * hw].iter_mut().for_each(|g| *g = up * inv);
                    }
                }
            }
            LayerKind::Dense {
                in_features,
                out_features,
            } => {
                let w = self.params[0].data();
                for n in 0..x.shape()[0] {
                    let xi = &x.data()[n * in_features..(n + 1) * in_features];
                    let gyn = &gy.data()[n * out_features..(n + 1) * out_features];
                    if want_params {
                        let (gw, gb) = gp.split_at_mut(1);
                        let gw = gw[0].data_mut();
                        let gb = gb[0].data_mut();
                        for (o, &g) in gyn.iter().enumerate() {
                            gb[o] += g;
                            for (acc, &v) in gw[o * in_features..(o + 1) * in_features].iter_mut().zip(xi) {
                                *acc += g * v;
                            }
                        }
                    }
                    if let Some(gx) = gx.as_mut() {
                        let gxn = &mut gx.data_mut()[n * in_features..(n + 1) * in_features];
                        for (o, &g) in gyn.iter().enumerate() {
                            for (acc, &wv) in gxn.iter_mut().zip(&w[o * in_features..(o + 1) * in_features]) {
                                *acc += wv * g;
                            }
                        }
                    }
                }
            }
        }
        Ok((gx, gp))
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

struct ConvGeom {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn new(kind: &LayerKind, x: &[usize], y: &[usize]) -> Self {
        let LayerKind::Conv2d {
            kernel: (kh, kw),
            stride,
            padding,
            ..
        } = *kind
        else {
            unreachable!()
        };
        Self {
            c: x[1],
            h: x[2],
            w: x[3],
            kh,
            kw,
            stride,
            pad: padding,
            oh: y[2],
            ow: y[3],
        }
    }

    fn k(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn p(&self) -> usize {
        self.oh * self.ow
    }

    /// Unfolds one sample into `[C*kh*kw, oh*ow]`.
    fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        let p = self.p();
        for c in 0..self.c {
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = &mut cols[((c * self.kh + i) * self.kw + j) * p..][..p];
                    for oy in 0..self.oh {
                        let iy = (oy * self.stride + i) as isize - self.pad as isize;
                        let dst = &mut row[oy * self.ow..(oy + 1) * self.ow];
                        if iy < 0 || iy >= self.h as isize {
                            dst.iter_mut().for_each(|v| *v = T::zero());
                            continue;
                        }
                        let src = &x[(c * self.h + iy as usize) * self.w..][..self.w];
                        for (ox, v) in dst.iter_mut().enumerate() {
                            let ix = (ox * self.stride + j) as isize - self.pad as isize;
                            *v = if ix < 0 || ix >= self.w as isize { T::zero() } else { src[ix as usize] };
                        }
                    }
                }
            }
        }
    }

    /// Folds `[C*kh*kw, oh*ow]` back, accumulating into one sample's gradient.
    fn col2im<T: Scalar>(&self, cols: &[T], gx: &mut [T]) {
        let p = self.p();
        for c in 0..self.c {
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = &cols[((c * self.kh + i) * self.kw + j) * p..][..p];
                    for oy in 0..self.oh {
                        let iy = (oy * self.stride + i) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let dst = &mut gx[(c * self.h + iy as usize) * self.w..][..self.w];
                        for (ox, &v) in row[oy * self.ow..(oy + 1) * self.ow].iter().enumerate() {
                            let ix = (ox * self.stride + j) as isize - self.pad as isize;
                            if ix >= 0 && ix < self.w as isize {
                                dst[ix as usize] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn conv_forward<T: Scalar>(kind: &LayerKind, params: &[Tensor<T>], x: &Tensor<T>, y: &mut Tensor<T>) {
    let g = ConvGeom::new(kind, x.shape(), y.shape());
    let (k, p) = (g.k(), g.p());
    let out_c = y.shape()[1];
    let (wt, bias) = (params[0].data(), params[1].data());
    let mut cols = vec![T::zero(); k * p];
    let n = x.shape()[0];
    let ysz = out_c * p;
    for s in 0..n {
        g.im2col(x.item(s), &mut cols);
        let ys = &mut y.data_mut()[s * ysz..(s + 1) * ysz];
        for o in 0..out_c {
            let out = &mut ys[o * p..(o + 1) * p];
            out.iter_mut().for_each(|v| *v = bias[o]);
            for (kk, &wv) in wt[o * k..(o + 1) * k].iter().enumerate() {
                if wv == T::zero() {
                    continue;
                }
                for (acc, &cv) in out.iter_mut().zip(&cols[kk * p..(kk + 1) * p]) {
                    *acc += wv * cv;
                }
            }
        }
    }
}

fn conv_backward<T: Scalar>(
    kind: &LayerKind,
    params: &[Tensor<T>],
    x: &Tensor<T>,
    gy: &Tensor<T>,
    mut gx: Option<&mut Tensor<T>>,
    mut gp: Option<&mut Vec<Tensor<T>>>,
) {
    let g = ConvGeom::new(kind, x.shape(), gy.shape());
    let (k, p) = (g.k(), g.p());
    let out_c = gy.shape()[1];
    let wt = params[0].data();
    let mut cols = vec![T::zero(); k * p];
    let mut dcols = vec![T::zero(); k * p];
    let n = x.shape()[0];
    for s in 0..n {
        let gys = gy.item(s);
        if let Some(gp) = gp.as_deref_mut() {
            g.im2col(x.item(s), &mut cols);
            let (gw, gb) = gp.split_at_mut(1);
            let gw = gw[0].data_mut();
            let gb = gb[0].data_mut();
            for o in 0..out_c {
                let go = &gys[o * p..(o + 1) * p];
                gb[o] += go.iter().copied().sum::<T>();
                for kk in 0..k {
                    let mut acc = T::zero();
                    for (&a, &b) in go.iter().zip(&cols[kk * p..(kk + 1) * p]) {
                        acc += a * b;
                    }
                    gw[o * k + kk] += acc;
                }
            }
        }
        if let Some(gx) = gx.as_deref_mut() {
            dcols.iter_mut().for_each(|v| *v = T::zero());
            for o in 0..out_c {
                let go = &gys[o * p..(o + 1) * p];
                for kk in 0..k {
                    let wv = wt[o * k + kk];
                    if wv == T::zero() {
                        continue;
                    }
                    for (acc, &gv) in dcols[kk * p..(kk + 1) * p].iter_mut().zip(go) {
                        *acc += wv * gv;
                    }
                }
            }
            let step = gx.len() / n;
            g.col2im(&dcols, &mut gx.data_mut()[s * step..(s + 1) * step]);
        }
    }
}

fn pool_forward<T: Scalar>(size: usize, stride: usize, x: &Tensor<T>, y: &mut Tensor<T>) -> Vec<u32> {
    let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (oh, ow) = (y.shape()[2], y.shape()[3]);
    let mut arg = Vec::with_capacity(y.len());
    let xd = x.data();
    let yd = y.data_mut();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * stride * w + ox * stride;
                for i in 0..size {
                    for j in 0..size {
                        let idx = base + (oy * stride + i) * w + ox * stride + j;
                        // strict comparison keeps the first maximum in row-major order
                        if xd[idx] > xd[best] {
                            best = idx;
                        }
                    }
                }
                yd[(plane * oh + oy) * ow + ox] = xd[best];
                arg.push(best as u32);
            }
        }
    }
    arg
}
