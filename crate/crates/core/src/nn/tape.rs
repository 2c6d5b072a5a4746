use ndarray::{Array1, Array2, ArrayD, Axis, Ix2, Ix4, IxDyn, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernels::{self, Geom};
use super::{ParamId, ParamStore, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active, batch statistics in normalization layers.
    Train,
    /// Dropout disabled, running statistics frozen.
    Eval,
}

/// Spatial padding rule for convolution and pooling windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output size `ceil(n / stride)`; any odd remainder is padded at the end.
    Same,
    Valid,
    /// Symmetric padding of the given number of cells on every side.
    Fixed(usize),
}

impl Padding {
    fn geom(self, (kh, kw): (usize, usize), (sh, sw): (usize, usize), (h, w): (usize, usize)) -> Geom {
        let same = |n: usize, k: usize, s: usize| {
            let out = n.div_ceil(s);
            let total = ((out - 1) * s + k).saturating_sub(n);
            (total / 2, total - total / 2)
        };
        let ((pt, pb), (pl, pr)) = match self {
            Padding::Same => (same(h, kh, sh), same(w, kw, sw)),
            Padding::Valid => ((0, 0), (0, 0)),
            Padding::Fixed(p) => ((p, p), (p, p)),
        };
        Geom {
            kh,
            kw,
            sh,
            sw,
            pt,
            pb,
            pl,
            pr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

enum Op<T> {
    Input,
    Conv2d {
        x: NodeId,
        w: ParamId,
        b: Option<ParamId>,
        geom: Geom,
    },
    Depthwise {
        x: NodeId,
        w: ParamId,
        b: Option<ParamId>,
        geom: Geom,
    },
    Linear {
        x: NodeId,
        w: ParamId,
        b: Option<ParamId>,
    },
    BatchNorm {
        x: NodeId,
        gamma: ParamId,
        beta: ParamId,
        mean: Vec<T>,
        inv_std: Vec<T>,
        batch_stats: bool,
    },
    Relu(NodeId),
    Relu6(NodeId),
    Dropout {
        x: NodeId,
        mask: ArrayD<T>,
    },
    MaxPool {
        x: NodeId,
        argmax: Vec<u32>,
    },
    AvgPool {
        x: NodeId,
        geom: Geom,
    },
    GlobalMax {
        x: NodeId,
        argmax: Vec<u32>,
    },
    GlobalAvg(NodeId),
    Concat {
        xs: Vec<NodeId>,
        widths: Vec<usize>,
    },
    Add(NodeId, NodeId),
}

struct Node<T> {
    value: ArrayD<T>,
    op: Op<T>,
}

/// Gradients produced by [`Tape::backward`], indexed like the store.
pub struct Gradients<T> {
    params: Vec<Option<ArrayD<T>>>,
    inputs: Vec<(NodeId, ArrayD<T>)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn param(&self, id: ParamId) -> Option<&ArrayD<T>> {
        self.params.get(id.0).and_then(|g| g.as_ref())
    }

    pub fn input(&self, id: NodeId) -> Option<&ArrayD<T>> {
        self.inputs.iter().find(|(n, _)| *n == id).map(|(_, g)| g)
    }

    pub fn into_params(self) -> Vec<Option<ArrayD<T>>> {
        self.params
    }
}

/// One recorded forward pass.
pub struct Tape<'a, T: Scalar> {
    store: &'a ParamStore<T>,
    nodes: Vec<Node<T>>,
    mode: Mode,
    rng: ChaCha8Rng,
    bn_momentum: f64,
    running: Vec<(ParamId, ArrayD<T>)>,
}

fn as4<T: Scalar>(a: &ArrayD<T>) -> Result<ndarray::ArrayView4<'_, T>> {
    a.view()
        .into_dimensionality::<Ix4>()
        .map_err(|_| Error::contract(format!("expected rank-4 activation, got shape {:?}", a.shape())))
}

fn as2<T: Scalar>(a: &ArrayD<T>) -> Result<ndarray::ArrayView2<'_, T>> {
    a.view()
        .into_dimensionality::<Ix2>()
        .map_err(|_| Error::contract(format!("expected rank-2 activation, got shape {:?}", a.shape())))
}

fn accumulate<T: Scalar>(slot: &mut Option<ArrayD<T>>, g: ArrayD<T>) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}

impl<'a, T: Scalar> Tape<'a, T> {
    pub fn new(store: &'a ParamStore<T>, mode: Mode, seed: u64) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            bn_momentum: 0.1,
            running: Vec::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn store(&self) -> &ParamStore<T> {
        self.store
    }

    fn push(&mut self, value: ArrayD<T>, op: Op<T>) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &ArrayD<T> {
        &self.nodes[id.0].value
    }

    pub fn input(&mut self, x: ArrayD<T>) -> NodeId {
        self.push(x, Op::Input)
    }

    /// Running-statistic updates gathered from normalization layers in
    /// training mode; the caller writes them back to the store.
    pub fn take_running_updates(&mut self) -> Vec<(ParamId, ArrayD<T>)> {
        std::mem::take(&mut self.running)
    }

    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: ParamId,
        b: Option<ParamId>,
        stride: usize,
        padding: Padding,
    ) -> Result<NodeId> {
        let wv = self.store.value(w);
        let xv = as4(self.value(x))?;
        let (_, c, h, wd) = xv.dim();
        let ws = wv.shape();
        if ws.len() != 4 || ws[1] != c {
            return Err(Error::contract(format!(
                "conv weight {:?} does not accept {c} input channels",
                ws
            )));
        }
        let geom = padding.geom((ws[2], ws[3]), (stride, stride), (h, wd));
        if geom.out_hw(h, wd).is_none() {
            return Err(Error::contract(format!("input {h}x{wd} smaller than kernel {}x{}", ws[2], ws[3])));
        }
        let bias = b.map(|b| self.store.value(b).as_slice().unwrap());
        let y = kernels::conv2d(xv, as4(wv)?, bias, &geom);
        Ok(self.push(y.into_dyn(), Op::Conv2d { x, w, b, geom }))
    }

    pub fn depthwise(
        &mut self,
        x: NodeId,
        w: ParamId,
        b: Option<ParamId>,
        stride: usize,
        padding: Padding,
    ) -> Result<NodeId> {
        let wv = self.store.value(w);
        let xv = as4(self.value(x))?;
        let (_, c, h, wd) = xv.dim();
        let ws = wv.shape();
        if ws.len() != 4 || ws[0] != c || ws[1] != 1 {
            return Err(Error::contract(format!("depthwise weight {:?} does not match {c} channels", ws)));
        }
        let geom = padding.geom((ws[2], ws[3]), (stride, stride), (h, wd));
        if geom.out_hw(h, wd).is_none() {
            return Err(Error::contract(format!("input {h}x{wd} smaller than kernel")));
        }
        let bias = b.map(|b| self.store.value(b).as_slice().unwrap());
        let y = kernels::depthwise(xv, as4(wv)?, bias, &geom);
        Ok(self.push(y.into_dyn(), Op::Depthwise { x, w, b, geom }))
    }

    /// `x [n, in] · w [in, out] + b`.
    pub fn linear(&mut self, x: NodeId, w: ParamId, b: Option<ParamId>) -> Result<NodeId> {
        let xv = as2(self.value(x))?;
        let wv = as2(self.store.value(w))?;
        if xv.ncols() != wv.nrows() {
            return Err(Error::contract(format!(
                "dense layer expects width {}, got {}",
                wv.nrows(),
                xv.ncols()
            )));
        }
        let mut y = xv.dot(&wv);
        if let Some(b) = b {
            let bv = self.store.value(b).view().into_dimensionality::<ndarray::Ix1>().unwrap();
            y += &bv;
        }
        Ok(self.push(y.into_dyn(), Op::Linear { x, w, b }))
    }

    /// Per-channel normalization over every axis except 1.
    pub fn batch_norm(
        &mut self,
        x: NodeId,
        gamma: ParamId,
        beta: ParamId,
        running_mean: ParamId,
        running_var: ParamId,
        eps: f64,
    ) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.ndim() < 2 {
            return Err(Error::contract("batch norm needs a channel axis"));
        }
        let c = xv.shape()[1];
        let batch_stats = self.mode == Mode::Train;
        let (mean, var) = if batch_stats {
            channel_moments(xv)
        } else {
            let m = self.store.value(running_mean).iter().copied().collect::<Vec<_>>();
            let v = self.store.value(running_var).iter().copied().collect::<Vec<_>>();
            (m, v)
        };
        if mean.len() != c {
            return Err(Error::contract("batch norm channel count mismatch"));
        }
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + T::of(eps)).sqrt()).collect();
        let g = self.store.value(gamma).as_slice().unwrap();
        let bt = self.store.value(beta).as_slice().unwrap();
        let mut y = xv.clone();
        for (ch, mut lane) in y.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s, gg, bb) = (mean[ch], inv_std[ch], g[ch], bt[ch]);
            lane.mapv_inplace(|v| (v - m) * s * gg + bb);
        }
        if batch_stats {
            let count = xv.len() / c;
            let mom = T::of(self.bn_momentum);
            let unbias = if count > 1 { T::of(count as f64 / (count as f64 - 1.0)) } else { T::one() };
            let rm = self.store.value(running_mean);
            let rv = self.store.value(running_var);
            let new_m = ArrayD::from_shape_fn(rm.raw_dim(), |i| {
                rm[&i] * (T::one() - mom) + mean[i[0]] * mom
            });
            let new_v = ArrayD::from_shape_fn(rv.raw_dim(), |i| {
                rv[&i] * (T::one() - mom) + var[i[0]] * unbias * mom
            });
            self.running.push((running_mean, new_m));
            self.running.push((running_var, new_v));
        }
        Ok(self.push(
            y,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                mean,
                inv_std,
                batch_stats,
            },
        ))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let y = self.value(x).mapv(|v| v.max(T::zero()));
        self.push(y, Op::Relu(x))
    }

    pub fn relu6(&mut self, x: NodeId) -> NodeId {
        let six = T::of(6.0);
        let y = self.value(x).mapv(|v| v.max(T::zero()).min(six));
        self.push(y, Op::Relu6(x))
    }

    /// Inverted dropout; identity outside training mode or for `p == 0`.
    pub fn dropout(&mut self, x: NodeId, p: f64) -> NodeId {
        if self.mode == Mode::Eval || p <= 0.0 {
            return x;
        }
        let keep = 1.0 - p;
        let scale = T::of(1.0 / keep);
        let shape = self.value(x).raw_dim();
        let rng = &mut self.rng;
        let mask = ArrayD::from_shape_simple_fn(shape, || {
            if rng.random::<f64>() < keep {
                scale
            } else {
                T::zero()
            }
        });
        let y = self.value(x) * &mask;
        self.push(y, Op::Dropout { x, mask })
    }

    pub fn max_pool(&mut self, x: NodeId, kernel: usize, stride: usize, padding: Padding) -> Result<NodeId> {
        let xv = as4(self.value(x))?;
        let (_, _, h, w) = xv.dim();
        let geom = padding.geom((kernel, kernel), (stride, stride), (h, w));
        if geom.out_hw(h, w).is_none() {
            return Err(Error::contract(format!("pool window {kernel} larger than {h}x{w}")));
        }
        let (y, argmax) = kernels::max_pool(xv, &geom);
        Ok(self.push(y.into_dyn(), Op::MaxPool { x, argmax }))
    }

    pub fn avg_pool(&mut self, x: NodeId, kernel: usize, stride: usize, padding: Padding) -> Result<NodeId> {
        let xv = as4(self.value(x))?;
        let (_, _, h, w) = xv.dim();
        let geom = padding.geom((kernel, kernel), (stride, stride), (h, w));
        if geom.out_hw(h, w).is_none() {
            return Err(Error::contract(format!("pool window {kernel} larger than {h}x{w}")));
        }
        let y = kernels::avg_pool(xv, &geom);
        Ok(self.push(y.into_dyn(), Op::AvgPool { x, geom }))
    }

    /// `[n, c, h, w] -> [n, c]` maximum over space.
    pub fn global_max_pool(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = as4(self.value(x))?;
        let (n, c, h, w) = xv.dim();
        let hw = h * w;
        let xs = xv.as_standard_layout();
        let s = xs.as_slice().unwrap();
        let mut y = Array2::<T>::zeros((n, c));
        let mut argmax = vec![0u32; n * c];
        for p in 0..n * c {
            let plane = &s[p * hw..(p + 1) * hw];
            let (mut bi, mut bv) = (0usize, plane[0]);
            for (i, &v) in plane.iter().enumerate().skip(1) {
                if v > bv {
                    bi = i;
                    bv = v;
                }
            }
            y[[p / c, p % c]] = bv;
            argmax[p] = (p * hw + bi) as u32;
        }
        Ok(self.push(y.into_dyn(), Op::GlobalMax { x, argmax }))
    }

    pub fn global_avg_pool(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = as4(self.value(x))?;
        let (n, c, h, w) = xv.dim();
        let scale = T::of(1.0 / (h * w) as f64);
        let y = Array2::from_shape_fn((n, c), |(b, ch)| {
            xv.slice(ndarray::s![b, ch, .., ..]).sum() * scale
        });
        Ok(self.push(y.into_dyn(), Op::GlobalAvg(x)))
    }

    /// Concatenate along axis 1 (channels or features).
    pub fn concat(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        if xs.is_empty() {
            return Err(Error::contract("concat of zero tensors"));
        }
        let views: Vec<_> = xs.iter().map(|&i| self.value(i).view()).collect();
        let widths = views.iter().map(|v| v.shape()[1]).collect();
        let y = ndarray::concatenate(Axis(1), &views).map_err(|e| Error::contract(format!("concat: {e}")))?;
        Ok(self.push(
            y,
            Op::Concat {
                xs: xs.to_vec(),
                widths,
            },
        ))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::contract(format!(
                "add shape mismatch {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let y = self.value(a) + self.value(b);
        Ok(self.push(y, Op::Add(a, b)))
    }

    /// Reverse pass from the given output gradients.
    pub fn backward(&self, seeds: Vec<(NodeId, ArrayD<T>)>) -> Result<Gradients<T>> {
        let mut grads: Vec<Option<ArrayD<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut pgrads: Vec<Option<ArrayD<T>>> = (0..self.store.len()).map(|_| None).collect();
        for (id, g) in seeds {
            if g.shape() != self.value(id).shape() {
                return Err(Error::contract("seed gradient shape mismatch"));
            }
            accumulate(&mut grads[id.0], g);
        }
        let mut inputs = Vec::new();
        for i in (0..self.nodes.len()).rev() {
            let Some(dy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => inputs.push((NodeId(i), dy)),
                Op::Conv2d { x, w, b, geom } => {
                    let need_dx = self.needs_grad(*x);
                    let (dx, dw, db) = kernels::conv2d_backward(
                        as4(self.value(*x))?,
                        as4(self.store.value(*w))?,
                        as4(&dy)?,
                        geom,
                        need_dx,
                    );
                    accumulate(&mut pgrads[w.0], dw.into_dyn());
                    if let Some(b) = b {
                        accumulate(&mut pgrads[b.0], Array1::from(db).into_dyn());
                    }
                    if let Some(dx) = dx {
                        accumulate(&mut grads[x.0], dx.into_dyn());
                    }
                }
                Op::Depthwise { x, w, b, geom } => {
                    let (dx, dw, db) = kernels::depthwise_backward(
                        as4(self.value(*x))?,
                        as4(self.store.value(*w))?,
                        as4(&dy)?,
                        geom,
                    );
                    accumulate(&mut pgrads[w.0], dw.into_dyn());
                    if let Some(b) = b {
                        accumulate(&mut pgrads[b.0], Array1::from(db).into_dyn());
                    }
                    accumulate(&mut grads[x.0], dx.into_dyn());
                }
                Op::Linear { x, w, b } => {
                    let xv = as2(self.value(*x))?;
                    let dy2 = as2(&dy)?;
                    accumulate(&mut pgrads[w.0], xv.t().dot(&dy2).into_dyn());
                    if let Some(b) = b {
                        accumulate(&mut pgrads[b.0], dy2.sum_axis(Axis(0)).into_dyn());
                    }
                    if self.needs_grad(*x) {
                        let wv = as2(self.store.value(*w))?;
                        accumulate(&mut grads[x.0], dy2.dot(&wv.t()).into_dyn());
                    }
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    mean,
                    inv_std,
                    batch_stats,
                } => {
                    let xv = self.value(*x);
                    let c = mean.len();
                    let count = T::of((xv.len() / c) as f64);
                    let g = self.store.value(*gamma).as_slice().unwrap();
                    let mut dgamma = vec![T::zero(); c];
                    let mut dbeta = vec![T::zero(); c];
                    let mut dx = ArrayD::<T>::zeros(xv.raw_dim());
                    for ch in 0..c {
                        let xl = xv.index_axis(Axis(1), ch);
                        let dl = dy.index_axis(Axis(1), ch);
                        let (m, s) = (mean[ch], inv_std[ch]);
                        let mut sum_d = T::zero();
                        let mut sum_dx = T::zero();
                        Zip::from(&xl).and(&dl).for_each(|&xv, &d| {
                            sum_d += d;
                            sum_dx += d * (xv - m) * s;
                        });
                        dgamma[ch] = sum_dx;
                        dbeta[ch] = sum_d;
                        let mut out = dx.index_axis_mut(Axis(1), ch);
                        if *batch_stats {
                            let k = g[ch] * s / count;
                            Zip::from(&mut out).and(&xl).and(&dl).for_each(|o, &xv, &d| {
                                let xhat = (xv - m) * s;
                                *o = k * (count * d - sum_d - xhat * sum_dx);
                            });
                        } else {
                            let k = g[ch] * s;
                            Zip::from(&mut out).and(&dl).for_each(|o, &d| *o = k * d);
                        }
                    }
                    accumulate(&mut pgrads[gamma.0], Array1::from(dgamma).into_dyn());
                    accumulate(&mut pgrads[beta.0], Array1::from(dbeta).into_dyn());
                    accumulate(&mut grads[x.0], dx);
                }
                Op::Relu(x) => {
                    let mut d = dy;
                    Zip::from(&mut d).and(&node.value).for_each(|d, &y| {
                        if y <= T::zero() {
                            *d = T::zero();
                        }
                    });
                    accumulate(&mut grads[x.0], d);
                }
                Op::Relu6(x) => {
                    let six = T::of(6.0);
                    let mut d = dy;
                    Zip::from(&mut d).and(&node.value).for_each(|d, &y| {
                        if y <= T::zero() || y >= six {
                            *d = T::zero();
                        }
                    });
                    accumulate(&mut grads[x.0], d);
                }
                Op::Dropout { x, mask } => accumulate(&mut grads[x.0], dy * mask),
                Op::MaxPool { x, argmax } | Op::GlobalMax { x, argmax } => {
                    let mut dx = ArrayD::<T>::zeros(self.value(*x).raw_dim());
                    let ds = dx.as_slice_mut().unwrap();
                    let dys = dy.as_standard_layout();
                    for (&a, &d) in argmax.iter().zip(dys.iter()) {
                        ds[a as usize] += d;
                    }
                    accumulate(&mut grads[x.0], dx);
                }
                Op::AvgPool { x, geom } => {
                    let s = self.value(*x).shape();
                    let dx = kernels::avg_pool_backward(as4(&dy)?, geom, s[2], s[3]);
                    accumulate(&mut grads[x.0], dx.into_dyn());
                }
                Op::GlobalAvg(x) => {
                    let s = self.value(*x).shape().to_vec();
                    let scale = T::of(1.0 / (s[2] * s[3]) as f64);
                    let dy2 = as2(&dy)?;
                    let dx = ArrayD::from_shape_fn(IxDyn(&s), |i| dy2[[i[0], i[1]]] * scale);
                    accumulate(&mut grads[x.0], dx);
                }
                Op::Concat { xs, widths } => {
                    let mut start = 0;
                    for (x, &wdt) in xs.iter().zip(widths) {
                        let part = dy.slice_axis(Axis(1), (start..start + wdt).into()).to_owned();
                        accumulate(&mut grads[x.0], part);
                        start += wdt;
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[b.0], dy.clone());
                    accumulate(&mut grads[a.0], dy);
                }
            }
        }
        Ok(Gradients {
            params: pgrads,
            inputs,
        })
    }

    // Only network inputs skip their input-gradient; every other node feeds a
    // parameter somewhere upstream.
    fn needs_grad(&self, id: NodeId) -> bool {
        !matches!(self.nodes[id.0].op, Op::Input)
    }
}

/// Per-channel mean and biased variance over all axes but 1.
fn channel_moments<T: Scalar>(x: &ArrayD<T>) -> (Vec<T>, Vec<T>) {
    let c = x.shape()[1];
    let mut mean = Vec::with_capacity(c);
    let mut var = Vec::with_capacity(c);
    for lane in x.axis_iter(Axis(1)) {
        let n = T::of(lane.len() as f64);
        let m = lane.iter().fold(T::zero(), |a, &v| a + v) / n;
        let v = lane.iter().fold(T::zero(), |a, &v| a + (v - m) * (v - m)) / n;
        mean.push(m);
        var.push(v);
    }
    (mean, var)
}
