//! Raw NCHW kernels. Dense convolutions go through im2col + GEMM.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array4, ArrayView2, ArrayView4, ArrayViewMut2};

use super::Scalar;

/// Window geometry shared by convolution and pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Geom {
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub pt: usize,
    pub pb: usize,
    pub pl: usize,
    pub pr: usize,
}

impl Geom {
    pub fn out_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let hp = h + self.pt + self.pb;
        let wp = w + self.pl + self.pr;
        if hp < self.kh || wp < self.kw {
            return None;
        }
        Some(((hp - self.kh) / self.sh + 1, (wp - self.kw) / self.sw + 1))
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1
            && self.kw == 1
            && self.sh == 1
            && self.sw == 1
            && self.pt + self.pb + self.pl + self.pr == 0
    }
}

#[allow(clippy::too_many_arguments)]
fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, g: &Geom, ho: usize, wo: usize, col: &mut [T]) {
    let hw_out = ho * wo;
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let dst = &mut col[row * hw_out..(row + 1) * hw_out];
                for oy in 0..ho {
                    let iy = (oy * g.sh + ki) as isize - g.pt as isize;
                    let line = &mut dst[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= h as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, d) in line.iter_mut().enumerate() {
                        let ix = (ox * g.sw + kj) as isize - g.pl as isize;
                        *d = if ix < 0 || ix >= w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im<T: Scalar>(col: &[T], c: usize, h: usize, w: usize, g: &Geom, ho: usize, wo: usize, x: &mut [T]) {
    let hw_out = ho * wo;
    for ci in 0..c {
        let plane = &mut x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let src = &col[row * hw_out..(row + 1) * hw_out];
                for oy in 0..ho {
                    let iy = (oy * g.sh + ki) as isize - g.pt as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    let line = &src[oy * wo..(oy + 1) * wo];
                    for (ox, &v) in line.iter().enumerate() {
                        let ix = (ox * g.sw + kj) as isize - g.pl as isize;
                        if ix >= 0 && (ix as usize) < w {
                            dst[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Dense 2-D convolution. `w` is `[c_out, c_in, kh, kw]`.
pub(crate) fn conv2d<T: Scalar>(x: ArrayView4<T>, w: ArrayView4<T>, bias: Option<&[T]>, g: &Geom) -> Array4<T> {
    let (n, c, h, wd) = x.dim();
    let (co, ci, kh, kw) = w.dim();
    debug_assert_eq!(ci, c);
    let (ho, wo) = g.out_hw(h, wd).expect("validated geometry");
    let k = ci * kh * kw;
    let x = x.as_standard_layout();
    let w = w.as_standard_layout();
    let wmat = ArrayView2::from_shape((co, k), w.as_slice().unwrap()).unwrap();
    let mut out = Array4::<T>::zeros((n, co, ho, wo));
    let mut col = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); k * ho * wo] };
    let xs = x.as_slice().unwrap();
    let plane = c * h * wd;
    for b in 0..n {
        let xb = &xs[b * plane..(b + 1) * plane];
        let cmat = if g.is_pointwise() {
            ArrayView2::from_shape((k, ho * wo), xb).unwrap()
        } else {
            im2col(xb, c, h, wd, g, ho, wo, &mut col);
            ArrayView2::from_shape((k, ho * wo), &col[..]).unwrap()
        };
        let mut ob = out.index_axis_mut(ndarray::Axis(0), b);
        let mut omat = ob.view_mut().into_shape_with_order((co, ho * wo)).unwrap();
        general_mat_mul(T::one(), &wmat, &cmat, T::zero(), &mut omat);
        if let Some(bias) = bias {
            for (mut row, &bv) in omat.rows_mut().into_iter().zip(bias) {
                row.mapv_inplace(|v| v + bv);
            }
        }
    }
    out
}

/// Gradients of [`conv2d`]: returns `(dx, dw, db)`.
pub(crate) fn conv2d_backward<T: Scalar>(
    x: ArrayView4<T>,
    w: ArrayView4<T>,
    dy: ArrayView4<T>,
    g: &Geom,
    need_dx: bool,
) -> (Option<Array4<T>>, Array4<T>, Vec<T>) {
    let (n, c, h, wd) = x.dim();
    let (co, ci, kh, kw) = w.dim();
    let (_, _, ho, wo) = dy.dim();
    let k = ci * kh * kw;
    let x = x.as_standard_layout();
    let w = w.as_standard_layout();
    let dy = dy.as_standard_layout();
    let wmat = ArrayView2::from_shape((co, k), w.as_slice().unwrap()).unwrap();
    let mut dw = Array4::<T>::zeros((co, ci, kh, kw));
    let mut db = vec![T::zero(); co];
    let mut dx = if need_dx { Some(Array4::<T>::zeros((n, c, h, wd))) } else { None };
    let pointwise = g.is_pointwise();
    let mut col = if pointwise { Vec::new() } else { vec![T::zero(); k * ho * wo] };
    let mut dcol = if need_dx && !pointwise { vec![T::zero(); k * ho * wo] } else { Vec::new() };
    let xs = x.as_slice().unwrap();
    let dys = dy.as_slice().unwrap();
    let plane = c * h * wd;
    let oplane = co * ho * wo;
    for b in 0..n {
        let xb = &xs[b * plane..(b + 1) * plane];
        let dyb = ArrayView2::from_shape((co, ho * wo), &dys[b * oplane..(b + 1) * oplane]).unwrap();
        for (o, row) in dyb.rows().into_iter().enumerate() {
            db[o] += row.sum();
        }
        let cmat = if pointwise {
            ArrayView2::from_shape((k, ho * wo), xb).unwrap()
        } else {
            im2col(xb, c, h, wd, g, ho, wo, &mut col);
            ArrayView2::from_shape((k, ho * wo), &col[..]).unwrap()
        };
        {
            let dws = dw.as_slice_mut().unwrap();
            let mut dwmat = ArrayViewMut2::from_shape((co, k), dws).unwrap();
            general_mat_mul(T::one(), &dyb, &cmat.t(), T::one(), &mut dwmat);
        }
        if let Some(dx) = dx.as_mut() {
            let dxs = &mut dx.as_slice_mut().unwrap()[b * plane..(b + 1) * plane];
            if pointwise {
                let mut dxm = ArrayViewMut2::from_shape((k, ho * wo), dxs).unwrap();
                general_mat_mul(T::one(), &wmat.t(), &dyb, T::zero(), &mut dxm);
            } else {
                {
                    let mut dcm = ArrayViewMut2::from_shape((k, ho * wo), &mut dcol[..]).unwrap();
                    general_mat_mul(T::one(), &wmat.t(), &dyb, T::zero(), &mut dcm);
                }
                col2im(&dcol, c, h, wd, g, ho, wo, dxs);
            }
        }
    }
    (dx, dw, db)
}

/// Depthwise convolution with channel multiplier 1. `w` is `[c, 1, kh, kw]`.
pub(crate) fn depthwise<T: Scalar>(x: ArrayView4<T>, w: ArrayView4<T>, bias: Option<&[T]>, g: &Geom) -> Array4<T> {
    let (n, c, h, wd) = x.dim();
    let (ho, wo) = g.out_hw(h, wd).expect("validated geometry");
    let mut out = Array4::<T>::zeros((n, c, ho, wo));
    for b in 0..n {
        for ch in 0..c {
            let bv = bias.map_or(T::zero(), |bs| bs[ch]);
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = bv;
                    for ki in 0..g.kh {
                        let iy = (oy * g.sh + ki) as isize - g.pt as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kj in 0..g.kw {
                            let ix = (ox * g.sw + kj) as isize - g.pl as isize;
                            if ix < 0 || ix >= wd as isize {
                                continue;
                            }
                            acc += x[[b, ch, iy as usize, ix as usize]] * w[[ch, 0, ki, kj]];
                        }
                    }
                    out[[b, ch, oy, ox]] = acc;
                }
            }
        }
    }
    out
}

pub(crate) fn depthwise_backward<T: Scalar>(
    x: ArrayView4<T>,
    w: ArrayView4<T>,
    dy: ArrayView4<T>,
    g: &Geom,
) -> (Array4<T>, Array4<T>, Vec<T>) {
    let (n, c, h, wd) = x.dim();
    let (_, _, ho, wo) = dy.dim();
    let mut dx = Array4::<T>::zeros((n, c, h, wd));
    let mut dw = Array4::<T>::zeros(w.raw_dim());
    let mut db = vec![T::zero(); c];
    for b in 0..n {
        for ch in 0..c {
            for oy in 0..ho {
                for ox in 0..wo {
                    let d = dy[[b, ch, oy, ox]];
                    db[ch] += d;
                    for ki in 0..g.kh {
                        let iy = (oy * g.sh + ki) as isize - g.pt as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kj in 0..g.kw {
                            let ix = (ox * g.sw + kj) as isize - g.pl as isize;
                            if ix < 0 || ix >= wd as isize {
                                continue;
                            }
                            let (iy, ix) = (iy as usize, ix as usize);
                            dw[[ch, 0, ki, kj]] += d * x[[b, ch, iy, ix]];
                            dx[[b, ch, iy, ix]] += d * w[[ch, 0, ki, kj]];
                        }
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

/// Max pooling; padded cells never win. Returns flat argmax offsets into `x`.
pub(crate) fn max_pool<T: Scalar>(x: ArrayView4<T>, g: &Geom) -> (Array4<T>, Vec<u32>) {
    let (n, c, h, wd) = x.dim();
    let (ho, wo) = g.out_hw(h, wd).expect("validated geometry");
    let x = x.as_standard_layout();
    let xs = x.as_slice().unwrap();
    let mut out = Array4::<T>::zeros((n, c, ho, wo));
    let mut arg = vec![0u32; n * c * ho * wo];
    let os = out.as_slice_mut().unwrap();
    for p in 0..n * c {
        let base = p * h * wd;
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = T::neg_infinity();
                let mut best_i = usize::MAX;
                for ki in 0..g.kh {
                    let iy = (oy * g.sh + ki) as isize - g.pt as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kj in 0..g.kw {
                        let ix = (ox * g.sw + kj) as isize - g.pl as isize;
                        if ix < 0 || ix >= wd as isize {
                            continue;
                        }
                        let i = base + iy as usize * wd + ix as usize;
                        if best_i == usize::MAX || xs[i] > best {
                            best = xs[i];
                            best_i = i;
                        }
                    }
                }
                let o = (p * ho + oy) * wo + ox;
                os[o] = best;
                arg[o] = best_i as u32;
            }
        }
    }
    (out, arg)
}

/// Average pooling that excludes padded cells from the divisor.
pub(crate) fn avg_pool<T: Scalar>(x: ArrayView4<T>, g: &Geom) -> Array4<T> {
    let (n, c, h, wd) = x.dim();
    let (ho, wo) = g.out_hw(h, wd).expect("validated geometry");
    let mut out = Array4::<T>::zeros((n, c, ho, wo));
    for b in 0..n {
        for ch in 0..c {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = T::zero();
                    let mut cnt = 0usize;
                    for_window(g, oy, ox, h, wd, |iy, ix| {
                        acc += x[[b, ch, iy, ix]];
                        cnt += 1;
                    });
                    out[[b, ch, oy, ox]] = acc / T::of(cnt.max(1) as f64);
                }
            }
        }
    }
    out
}

pub(crate) fn avg_pool_backward<T: Scalar>(dy: ArrayView4<T>, g: &Geom, h: usize, wd: usize) -> Array4<T> {
    let (n, c, ho, wo) = dy.dim();
    let mut dx = Array4::<T>::zeros((n, c, h, wd));
    for b in 0..n {
        for ch in 0..c {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut cnt = 0usize;
                    for_window(g, oy, ox, h, wd, |_, _| cnt += 1);
                    let share = dy[[b, ch, oy, ox]] / T::of(cnt.max(1) as f64);
                    for_window(g, oy, ox, h, wd, |iy, ix| {
                        dx[[b, ch, iy, ix]] += share;
                    });
                }
            }
        }
    }
    dx
}

fn for_window(g: &Geom, oy: usize, ox: usize, h: usize, wd: usize, mut f: impl FnMut(usize, usize)) {
    for ki in 0..g.kh {
        let iy = (oy * g.sh + ki) as isize - g.pt as isize;
        if iy < 0 || iy >= h as isize {
            continue;
        }
        for kj in 0..g.kw {
            let ix = (ox * g.sw + kj) as isize - g.pl as isize;
            if ix >= 0 && (ix as usize) < wd {
                f(iy as usize, ix as usize);
            }
        }
    }
}
