//! Parameterized building blocks shared by the architectures.

use crate::error::Result;
use crate::nn::{NodeId, Padding, ParamBuilder, ParamId, ParamKind, Scalar, Tape};

/// Standard deviation of newly initialized dense weights.
pub(crate) const DENSE_INIT_STD: f64 = 0.1;

fn he_std(fan_in: usize) -> f64 {
    (2.0 / fan_in as f64).sqrt()
}

#[derive(Debug, Clone)]
pub(crate) struct Conv {
    w: ParamId,
    b: Option<ParamId>,
    stride: usize,
    padding: Padding,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar>(
        pb: &mut ParamBuilder<'_, T>,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: Padding,
        bias: bool,
    ) -> Self {
        let mut pb = pb.scope(name);
        let fan_in = c_in * kernel.0 * kernel.1;
        let w = pb.normal("weight", ParamKind::Weight, &[c_out, c_in, kernel.0, kernel.1], he_std(fan_in));
        let b = bias.then(|| pb.constant("bias", ParamKind::Bias, &[c_out], 0.0));
        Self { w, b, stride, padding }
    }

    /// Stride-1 same-padded square convolution with bias.
    pub fn same<T: Scalar>(pb: &mut ParamBuilder<'_, T>, name: &str, c_in: usize, c_out: usize, k: usize) -> Self {
        Self::new(pb, name, c_in, c_out, (k, k), 1, Padding::Same, true)
    }

    pub fn forward<T: Scalar>(&self, t: &mut Tape<'_, T>, x: NodeId) -> Result<NodeId> {
        t.conv2d(x, self.w, self.b, self.stride, self.padding)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DepthwiseConv {
    w: ParamId,
    stride: usize,
    padding: Padding,
}

impl DepthwiseConv {
    pub fn new<T: Scalar>(
        pb: &mut ParamBuilder<'_, T>,
        name: &str,
        channels: usize,
        k: usize,
        stride: usize,
        padding: Padding,
    ) -> Self {
        let mut pb = pb.scope(name);
        let w = pb.normal("weight", ParamKind::Weight, &[channels, 1, k, k], he_std(k * k));
        Self { w, stride, padding }
    }

    pub fn forward<T: Scalar>(&self, t: &mut Tape<'_, T>, x: NodeId) -> Result<NodeId> {
        t.depthwise(x, self.w, None, self.stride, self.padding)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Norm {
    gamma: ParamId,
    beta: ParamId,
    mean: ParamId,
    var: ParamId,
    eps: f64,
}

impl Norm {
    pub fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>, name: &str, channels: usize) -> Self {
        let mut pb = pb.scope(name);
        Self {
            gamma: pb.constant("gamma", ParamKind::NormScale, &[channels], 1.0),
            beta: pb.constant("beta", ParamKind::NormShift, &[channels], 0.0),
            mean: pb.constant("running_mean", ParamKind::RunningMean, &[channels], 0.0),
            var: pb.constant("running_var", ParamKind::RunningVar, &[channels], 1.0),
            eps: 1e-3,
        }
    }

    pub fn forward<T: Scalar>(&self, t: &mut Tape<'_, T>, x: NodeId) -> Result<NodeId> {
        t.batch_norm(x, self.gamma, self.beta, self.mean, self.var, self.eps)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Dense {
    w: ParamId,
    b: ParamId,
    out: usize,
}

impl Dense {
    pub fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>, name: &str, d_in: usize, d_out: usize) -> Self {
        let mut pb = pb.scope(name);
        Self {
            w: pb.normal("weight", ParamKind::Weight, &[d_in, d_out], DENSE_INIT_STD),
            b: pb.constant("bias", ParamKind::Bias, &[d_out], 0.0),
            out: d_out,
        }
    }

    pub fn width(&self) -> usize {
        self.out
    }

    pub fn forward<T: Scalar>(&self, t: &mut Tape<'_, T>, x: NodeId) -> Result<NodeId> {
        t.linear(x, self.w, Some(self.b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Act {
    Relu,
    Relu6,
    Linear,
}

impl Act {
    pub fn apply<T: Scalar>(self, t: &mut Tape<'_, T>, x: NodeId) -> NodeId {
        match self {
            Act::Relu => t.relu(x),
            Act::Relu6 => t.relu6(x),
            Act::Linear => x,
        }
    }
}

/// Bias-free convolution, batch norm, activation.
#[derive(Debug, Clone)]
pub(crate) struct ConvBn {
    conv: Conv,
    norm: Norm,
    act: Act,
}

impl ConvBn {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar>(
        pb: &mut ParamBuilder<'_, T>,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: Padding,
        act: Act,
    ) -> Self {
        let mut pb = pb.scope(name);
        Self {
            conv: Conv::new(&mut pb, "conv", c_in, c_out, kernel, stride, padding, false),
            norm: Norm::new(&mut pb, "bn", c_out),
            act,
        }
    }

    pub fn forward<T: Scalar>(&self, t: &mut Tape<'_, T>, x: NodeId) -> Result<NodeId> {
        let y = self.conv.forward(t, x)?;
        let y = self.norm.forward(t, y)?;
        Ok(self.act.apply(t, y))
    }
}
