//! Benchmark architectures adapted to one-channel 124×154 input.
//!
//! Each trunk follows the reference layer layout of its family; the
//! classifier is replaced by global average pooling and a 4-way dense layer
//! (tap `GAP`). Weights are randomly initialized.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Act, Conv, ConvBn, Dense, DepthwiseConv, Norm};
use super::{Architecture, Forward, InputContract, ModelDescriptor, Network, TapInfo, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::features::SpectrogramKind;
use crate::nn::{NodeId, Padding, ParamBuilder, ParamStore, Scalar, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BackboneName {
    #[serde(rename = "VGG16")]
    Vgg16,
    #[serde(rename = "VGG19")]
    Vgg19,
    MobileNetV1,
    MobileNetV2,
    ResNet50,
    DenseNet201,
    InceptionV3,
    Xception,
}

impl BackboneName {
    pub const ALL: [BackboneName; 8] = [
        BackboneName::Vgg16,
        BackboneName::Vgg19,
        BackboneName::MobileNetV1,
        BackboneName::MobileNetV2,
        BackboneName::ResNet50,
        BackboneName::DenseNet201,
        BackboneName::InceptionV3,
        BackboneName::Xception,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BackboneName::Vgg16 => "VGG16",
            BackboneName::Vgg19 => "VGG19",
            BackboneName::MobileNetV1 => "MobileNetV1",
            BackboneName::MobileNetV2 => "MobileNetV2",
            BackboneName::ResNet50 => "ResNet50",
            BackboneName::DenseNet201 => "DenseNet201",
            BackboneName::InceptionV3 => "InceptionV3",
            BackboneName::Xception => "Xception",
        }
    }
}

impl fmt::Display for BackboneName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackboneName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BackboneName::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Registry(s.to_string()))
    }
}

/// Trunk + pooled classifier; each family implements [`TrunkDef`].
struct Backbone<D> {
    trunk: D,
    head: Dense,
    width: usize,
}

trait TrunkDef: Send + Sync {
    fn run<T: Scalar>(&self, t: &mut Tape<'_, T>, x: NodeId) -> Result<NodeId>;
}

impl<D: TrunkDef, T: Scalar> Architecture<T> for Backbone<D> {
    fn trace(&self, t: &mut Tape<'_, T>, input: NodeId) -> Result<Forward> {
        let features = self.trunk.run(t, input)?;
        let gap = t.global_avg_pool(features)?;
        let logits = self.head.forward(t, gap)?;
        Ok(Forward {
            logits,
            taps: vec![("GAP".into(), gap)],
        })
    }

    fn taps(&self) -> Vec<TapInfo> {
        vec![TapInfo {
            name: "GAP".into(),
            width: self.width,
        }]
    }
}

// ---------------------------------------------------------------- VGG

struct Vgg {
    blocks: Vec<Vec<Conv>>,
}

impl Vgg {
    fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>, depths: [usize; 5]) -> (Self, usize) {
        let widths = [64, 128, 256, 512, 512];
        let mut c_in = 1;
        let mut blocks = Vec::new();
        for (b, (&n, &w)) in depths.iter().zip(&widths).enumerate() {
            let mut convs = Vec::new();
            for i in 0..n {
                convs.push(Conv::same(pb, &format!("block{}.conv{}", b + 1, i + 1), c_in, w, 3));
                c_in = w;
            }
            blocks.push(convs);
        }
        (Self { blocks }, 512)
    }
}

impl TrunkDef for Vgg {
    fn run<T: Scalar>(&self, t: &mut Tape<'_, T>, mut x: NodeId) -> Result<NodeId> {
        for block in &self.blocks {
            for conv in block {
                x = conv.forward(t, x)?;
                x = t.relu(x);
            }
            x = t.max_pool(x, 2, 2, Padding::Valid)?;
        }
        Ok(x)
    }
}

// ---------------------------------------------------------------- MobileNet v1

struct SeparableBn {
    dw: DepthwiseConv,
    dw_bn: Norm,
    pw: ConvBn,
}

struct MobileNetV1 {
    stem: ConvBn,
    blocks: Vec<SeparableBn>,
}

impl MobileNetV1 {
    fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>) -> (Self, usize) {
        let stem = ConvBn::new(pb, "stem", 1, 32, (3, 3), 2, Padding::Same, Act::Relu6);
        let plan: [(usize, usize); 13] = [
            (64, 1),
            (128, 2),
            (128, 1),
            (256, 2),
            (256, 1),
            (512, 2),
            (512, 1),
            (512, 1),
            (512, 1),
            (512, 1),
            (512, 1),
            (1024, 2),
            (1024, 1),
        ];
        let mut c_in = 32;
        let blocks = plan
            .iter()
            .enumerate()
            .map(|(i, &(c_out, stride))| {
                let mut pb = pb.scope(&format!("block{}", i + 1));
                let b = SeparableBn {
                    dw: DepthwiseConv::new(&mut pb, "dw", c_in, 3, stride, Padding::Same),
                    dw_bn: Norm::new(&mut pb, "dw_bn", c_in),
                    pw: ConvBn::new(&mut pb, "pw", c_in, c_out, (1, 1), 1, Padding::Same, Act::Relu6),
                };
                c_in = c_out;
                b
            })
            .collect();
        (Self { stem, blocks }, 1024)
    }
}

impl TrunkDef for MobileNetV1 {
    fn run<T: Scalar>(&self, t: &mut Tape<'_, T>, x: NodeId) -> Result<NodeId> {
        let mut x = self.stem.forward(t, x)?;
        for b in &self.blocks {
            x = b.dw.forward(t, x)?;
            x = b.dw_bn.forward(t, x)?;
            x = t.relu6(x);
            x = b.pw.forward(t, x)?;
        }
        Ok(x)
    }
}

// ---------------------------------------------------------------- MobileNet v2

struct InvertedResidual {
    expand: Option<ConvBn>,
    dw: DepthwiseConv,
    dw_bn: Norm,
    project: ConvBn,
    residual: bool,
}

struct MobileNetV2 {
    stem: ConvBn,
    blocks: Vec<InvertedResidual>,
    head: ConvBn,
}

impl MobileNetV2 {
    fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>) -> (Self, usize) {
        let stem = ConvBn::new(pb, "stem", 1, 32, (3, 3), 2, Padding::Same, Act::Relu6);
        // (expansion, channels, repeats, first stride)
        let plan = [
            (1, 16, 1, 1),
            (6, 24, 2, 2),
            (6, 32, 3, 2),
            (6, 64, 4, 2),
            (6, 96, 3, 1),
            (6, 160, 3, 2),
            (6, 320, 1, 1),
        ];
        let mut c_in = 32;
        let mut blocks = Vec::new();
        for (expansion, c_out, repeats, first_stride) in plan {
            for r in 0..repeats {
                let stride = if r == 0 { first_stride } else { 1 };
                let hidden = c_in * expansion;
                let mut pb = pb.scope(&format!("block{}", blocks.len() + 1));
                let expand = (expansion != 1)
                    .then(|| ConvBn::new(&mut pb, "expand", c_in, hidden, (1, 1), 1, Padding::Same, Act::Relu6));
                blocks.push(InvertedResidual {
                    expand,
                    dw: DepthwiseConv::new(&mut pb, "dw", hidden, 3, stride, Padding::Same),
                    dw_bn: Norm::new(&mut pb, "dw_bn", hidden),
                    project: ConvBn::new(&mut pb, "project", hidden, c_out, (1, 1), 1, Padding::Same, Act::Linear),
                    residual: stride == 1 && c_in == c_out,
                });
                c_in = c_out;
            }
        }
        let head = ConvBn::new(pb, "head", c_in, 1280, (1, 1), 1, Padding::Same, Act::Relu6);
        (Self { stem, blocks, head }, 1280)
    }
}

impl TrunkDef for MobileNetV2 {
    fn run<T: Scalar>(&self, t: &mut Tape<'_, T>, x: NodeId) -> Result<NodeId> {
        let mut x = self.stem.forward(t, x)?;
        for b in &self.blocks {
            let mut y = match &b.expand {
                Some(e) => e.forward(t, x)?,
                None => x,
            };
            y = b.dw.forward(t, y)?;
            y = b.dw_bn.forward(t, y)?;
            y = t.relu6(y);
            y = b.project.forward(t, y)?;
            x = if b.residual { t.add(x, y)? } else { y };
        }
        self.head.forward(t, x)
    }
}

// ---------------------------------------------------------------- ResNet50

struct Bottleneck {
    a: ConvBn,
    b: ConvBn,
    c: ConvBn,
    shortcut: Option<ConvBn>,
}

struct ResNet50 {
    stem: ConvBn,
    blocks: Vec<Bottleneck>,
}

impl ResNet50 {
    fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>) -> (Self, usize) {
        let stem = ConvBn::new(pb, "stem", 1, 64, (7, 7), 2, Padding::Fixed(3), Act::Relu);
        let stages = [(64, 3, 1), (128, 4, 2), (256, 6, 2), (512, 3, 2)];
        let mut c_in = 64;
        let mut blocks = Vec::new();
        for (s, (width, repeats, first_stride)) in stages.into_iter().enumerate() {
            for r in 0..repeats {
                let stride = if r == 0 { first_stride } else { 1 };
                let c_out = width * 4;
                let mut pb = pb.scope(&format!("stage{}.block{}", s + 1, r + 1));
                blocks.push(Bottleneck {
                    a: ConvBn::new(&mut pb, "a", c_in, width, (1, 1), stride, Padding::Valid, Act::Relu),
                    b: ConvBn::new(&mut pb, "b", width, width, (3, 3), 1, Padding::Same, Act::Relu),
                    c: ConvBn::new(&mut pb, "c", width, c_out, (1, 1), 1, Padding::Valid, Act::Linear),
                    shortcut: (r == 0).then(|| {
                        ConvBn::new(&mut pb, "shortcut", c_in, c_out, (1, 1), stride, Padding::Valid, Act::Linear)
                    }),
                });
                c_in = c_out;
            }
        }
        (Self { stem, blocks }, 2048)
    }
}

impl TrunkDef for ResNet50 {
    fn run<T: Scalar>(&self, t: &mut Tape<'_, T>, x: NodeId) -> Result<NodeId> {
        let x = self.stem.forward(t, x)?;
        let mut x = t.max_pool(x, 3, 2, Padding::Fixed(1))?;
        for b in &self.blocks {
            let y = b.a.forward(t, x)?;
            let y = b.b.forward(t, y)?;
            let y = b.c.forward(t, y)?;
            let s = match &b.shortcut {
                Some(sc) => sc.forward(t, x)?,
                None => x,
            };
            let sum = t.add(y, s)?;
            x = t.relu(sum);
        }
        Ok(x)
    }
}

// ---------------------------------------------------------------- DenseNet201

struct DenseLayer {
    bn1: Norm,
    conv1: Conv,
    bn2: Norm,
    conv2: Conv,
}

struct TransitionDown {
    bn: Norm,
    conv: Conv,
}

struct DenseNet {
    stem: ConvBn,
    blocks: Vec<Vec<DenseLayer>>,
    transitions: Vec<TransitionDown>,
    final_bn: Norm,
}

impl DenseNet {
    fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>, config: [usize; 4]) -> (Self, usize) {
        const GROWTH: usize = 32;
        let stem = ConvBn::new(pb, "stem", 1, 64, (7, 7), 2, Padding::Fixed(3), Act::Relu);
        let mut c = 64;
        let mut blocks = Vec::new();
        let mut transitions = Vec::new();
        for (bi, &n) in config.iter().enumerate() {
            let mut layers = Vec::new();
            for li in 0..n {
                let mut pb = pb.scope(&format!("dense{}.layer{}", bi + 1, li + 1));
                layers.push(DenseLayer {
                    bn1: Norm::new(&mut pb, "bn1", c),
                    conv1: Conv::new(&mut pb, "conv1", c, 4 * GROWTH, (1, 1), 1, Padding::Valid, false),
                    bn2: Norm::new(&mut pb, "bn2", 4 * GROWTH),
                    conv2: Conv::new(&mut pb, "conv2", 4 * GROWTH, GROWTH, (3, 3), 1, Padding::Same, false),
                });
                c += GROWTH;
            }
            blocks.push(layers);
            if bi < config.len() - 1 {
                let mut pb = pb.scope(&format!("transition{}", bi + 1));
                let c_out = c / 2;
                transitions.push(TransitionDown {
                    bn: Norm::new(&mut pb, "bn", c),
                    conv: Conv::new(&mut pb, "conv", c, c_out, (1, 1), 1, Padding::Valid, false),
                });
                c = c_out;
            }
        }
        let final_bn = Norm::new(pb, "final_bn", c);
        (
            Self {
                stem,
                blocks,
                transitions,
                final_bn,
            },
            c,
        )
    }
}

impl TrunkDef for DenseNet {
    fn run<T: Scalar>(&self, t: &mut Tape<'_, T>, x: NodeId) -> Result<NodeId> {
        let x = self.stem.forward(t, x)?;
        let mut x = t.max_pool(x, 3, 2, Padding::Fixed(1))?;
        for (bi, block) in self.blocks.iter().enumerate() {
            for l in block {
                let y = l.bn1.forward(t, x)?;
                let y = t.relu(y);
                let y = l.conv1.forward(t, y)?;
                let y = l.bn2.forward(t, y)?;
                let y = t.relu(y);
                let y = l.conv2.forward(t, y)?;
                x = t.concat(&[x, y])?;
            }
            if let Some(tr) = self.transitions.get(bi) {
                let y = tr.bn.forward(t, x)?;
                let y = t.relu(y);
                let y = tr.conv.forward(t, y)?;
                x = t.avg_pool(y, 2, 2, Padding::Valid)?;
            }
        }
        let x = self.final_bn.forward(t, x)?;
        Ok(t.relu(x))
    }
}

// ---------------------------------------------------------------- InceptionV3

fn cbr<T: Scalar>(pb: &mut ParamBuilder<'_, T>, name: &str, c_in: usize, c_out: usize, k: (usize, usize), stride: usize, pad: Padding) -> ConvBn {
    ConvBn::new(pb, name, c_in, c_out, k, stride, pad, Act::Relu)
}

enum Mixed {
    /// 35×35-style block: 1×1, 5×5, double 3×3, avg-pool projection.
    A {
        b1: ConvBn,
        b5: [ConvBn; 2],
        b3: [ConvBn; 3],
        pool: ConvBn,
    },
    /// Grid reduction with a 3×3 stride-2 branch.
    B { b3: ConvBn, b3dbl: [ConvBn; 3] },
    /// Factorized 7×7 block.
    C {
        b1: ConvBn,
        b7: [ConvBn; 3],
        b7dbl: [ConvBn; 5],
        pool: ConvBn,
    },
    /// Second grid reduction.
    D { b3: [ConvBn; 2], b7: [ConvBn; 4] },
    /// Expanded filter bank with split 1×3 / 3×1 outputs.
    E {
        b1: ConvBn,
        b3: ConvBn,
        b3a: ConvBn,
        b3b: ConvBn,
        dbl: [ConvBn; 2],
        dbl_a: ConvBn,
        dbl_b: ConvBn,
        pool: ConvBn,
    },
}

fn seq<T: Scalar>(t: &mut Tape<'_, T>, layers: &[ConvBn], mut x: NodeId) -> Result<NodeId> {
    for l in layers {
        x = l.forward(t, x)?;
    }
    Ok(x)
}

impl Mixed {
    fn a<T: Scalar>(pb: &mut ParamBuilder<'_, T>, c_in: usize, pool_ch: usize) -> Self {
        let s = Padding::Same;
        Mixed::A {
            b1: cbr(pb, "b1", c_in, 64, (1, 1), 1, s),
            b5: [cbr(pb, "b5_1", c_in, 48, (1, 1), 1, s), cbr(pb, "b5_2", 48, 64, (5, 5), 1, s)],
            b3: [
                cbr(pb, "b3_1", c_in, 64, (1, 1), 1, s),
                cbr(pb, "b3_2", 64, 96, (3, 3), 1, s),
                cbr(pb, "b3_3", 96, 96, (3, 3), 1, s),
            ],
            pool: cbr(pb, "pool", c_in, pool_ch, (1, 1), 1, s),
        }
    }

    fn b<T: Scalar>(pb: &mut ParamBuilder<'_, T>, c_in: usize) -> Self {
        Mixed::B {
            b3: cbr(pb, "b3", c_in, 384, (3, 3), 2, Padding::Valid),
            b3dbl: [
                cbr(pb, "b3dbl_1", c_in, 64, (1, 1), 1, Padding::Same),
                cbr(pb, "b3dbl_2", 64, 96, (3, 3), 1, Padding::Same),
                cbr(pb, "b3dbl_3", 96, 96, (3, 3), 2, Padding::Valid),
            ],
        }
    }

    fn c<T: Scalar>(pb: &mut ParamBuilder<'_, T>, c_in: usize, c7: usize) -> Self {
        let s = Padding::Same;
        Mixed::C {
            b1: cbr(pb, "b1", c_in, 192, (1, 1), 1, s),
            b7: [
                cbr(pb, "b7_1", c_in, c7, (1, 1), 1, s),
                cbr(pb, "b7_2", c7, c7, (1, 7), 1, s),
                cbr(pb, "b7_3", c7, 192, (7, 1), 1, s),
            ],
            b7dbl: [
                cbr(pb, "b7dbl_1", c_in, c7, (1, 1), 1, s),
                cbr(pb, "b7dbl_2", c7, c7, (7, 1), 1, s),
                cbr(pb, "b7dbl_3", c7, c7, (1, 7), 1, s),
                cbr(pb, "b7dbl_4", c7, c7, (7, 1), 1, s),
                cbr(pb, "b7dbl_5", c7, 192, (1, 7), 1, s),
            ],
            pool: cbr(pb, "pool", c_in, 192, (1, 1), 1, s),
        }
    }

    fn d<T: Scalar>(pb: &mut ParamBuilder<'_, T>, c_in: usize) -> Self {
        let s = Padding::Same;
        Mixed::D {
            b3: [cbr(pb, "b3_1", c_in, 192, (1, 1), 1, s), cbr(pb, "b3_2", 192, 320, (3, 3), 2, Padding::Valid)],
            b7: [
                cbr(pb, "b7_1", c_in, 192, (1, 1), 1, s),
                cbr(pb, "b7_2", 192, 192, (1, 7), 1, s),
                cbr(pb, "b7_3", 192, 192, (7, 1), 1, s),
                cbr(pb, "b7_4", 192, 192, (3, 3), 2, Padding::Valid),
            ],
        }
    }

    fn e<T: Scalar>(pb: &mut ParamBuilder<'_, T>, c_in: usize) -> Self {
        let s = Padding::Same;
        Mixed::E {
            b1: cbr(pb, "b1", c_in, 320, (1, 1), 1, s),
            b3: cbr(pb, "b3", c_in, 384, (1, 1), 1, s),
            b3a: cbr(pb, "b3a", 384, 384, (1, 3), 1, s),
            b3b: cbr(pb, "b3b", 384, 384, (3, 1), 1, s),
            dbl: [cbr(pb, "dbl_1", c_in, 448, (1, 1), 1, s), cbr(pb, "dbl_2", 448, 384, (3, 3), 1, s)],
            dbl_a: cbr(pb, "dbl_a", 384, 384, (1, 3), 1, s),
            dbl_b: cbr(pb, "dbl_b", 384, 384, (3, 1), 1, s),
            pool: cbr(pb, "pool", c_in, 192, (1, 1), 1, s),
        }
    }

    fn run<T: Scalar>(&self, t: &mut Tape<'_, T>, x: NodeId) -> Result<NodeId> {
        match self {
            Mixed::A { b1, b5, b3, pool } => {
                let a = b1.forward(t, x)?;
                let b = seq(t, b5, x)?;
                let c = seq(t, b3, x)?;
                let p = t.avg_pool(x, 3, 1, Padding::Same)?;
                let d = pool.forward(t, p)?;
                t.concat(&[a, b, c, d])
            }
            Mixed::B { b3, b3dbl } => {
                let a = b3.forward(t, x)?;
                let b = seq(t, b3dbl, x)?;
                let p = t.max_pool(x, 3, 2, Padding::Valid)?;
                t.concat(&[a, b, p])
            }
            Mixed::C { b1, b7, b7dbl, pool } => {
                let a = b1.forward(t, x)?;
                let b = seq(t, b7, x)?;
                let c = seq(t, b7dbl, x)?;
                let p = t.avg_pool(x, 3, 1, Padding::Same)?;
                let d = pool.forward(t, p)?;
                t.concat(&[a, b, c, d])
            }
            Mixed::D { b3, b7 } => {
                let a = seq(t, b3, x)?;
                let b = seq(t, b7, x)?;
                let p = t.max_pool(x, 3, 2, Padding::Valid)?;
                t.concat(&[a, b, p])
            }
            Mixed::E {
                b1,
                b3,
                b3a,
                b3b,
                dbl,
                dbl_a,
                dbl_b,
                pool,
            } => {
                let a = b1.forward(t, x)?;
                let m = b3.forward(t, x)?;
                let ma = b3a.forward(t, m)?;
                let mb = b3b.forward(t, m)?;
                let d = seq(t, dbl, x)?;
                let da = dbl_a.forward(t, d)?;
                let db = dbl_b.forward(t, d)?;
                let p = t.avg_pool(x, 3, 1, Padding::Same)?;
                let p = pool.forward(t, p)?;
                t.concat(&[a, ma, mb, da, db, p])
            }
        }
    }
}

struct InceptionV3 {
    stem: Vec<ConvBn>,
    stem2: Vec<ConvBn>,
    mixed: Vec<Mixed>,
}

impl InceptionV3 {
    fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>) -> (Self, usize) {
        let v = Padding::Valid;
        let stem = vec![
            cbr(pb, "conv1a", 1, 32, (3, 3), 2, v),
            cbr(pb, "conv2a", 32, 32, (3, 3), 1, v),
            cbr(pb, "conv2b", 32, 64, (3, 3), 1, Padding::Same),
        ];
        let stem2 = vec![cbr(pb, "conv3b", 64, 80, (1, 1), 1, v), cbr(pb, "conv4a", 80, 192, (3, 3), 1, v)];
        let mixed = vec![
            Mixed::a(&mut pb.scope("mixed5b"), 192, 32),
            Mixed::a(&mut pb.scope("mixed5c"), 256, 64),
            Mixed::a(&mut pb.scope("mixed5d"), 288, 64),
            Mixed::b(&mut pb.scope("mixed6a"), 288),
            Mixed::c(&mut pb.scope("mixed6b"), 768, 128),
            Mixed::c(&mut pb.scope("mixed6c"), 768, 160),
            Mixed::c(&mut pb.scope("mixed6d"), 768, 160),
            Mixed::c(&mut pb.scope("mixed6e"), 768, 192),
            Mixed::d(&mut pb.scope("mixed7a"), 768),
            Mixed::e(&mut pb.scope("mixed7b"), 1280),
            Mixed::e(&mut pb.scope("mixed7c"), 2048),
        ];
        (Self { stem, stem2, mixed }, 2048)
    }
}

impl TrunkDef for InceptionV3 {
    fn run<T: Scalar>(&self, t: &mut Tape<'_, T>, x: NodeId) -> Result<NodeId> {
        let x = seq(t, &self.stem, x)?;
        let x = t.max_pool(x, 3, 2, Padding::Valid)?;
        let x = seq(t, &self.stem2, x)?;
        let mut x = t.max_pool(x, 3, 2, Padding::Valid)?;
        for m in &self.mixed {
            x = m.run(t, x)?;
        }
        Ok(x)
    }
}

// ---------------------------------------------------------------- Xception

struct SepConv {
    dw: DepthwiseConv,
    pw: Conv,
    bn: Norm,
}

impl SepConv {
    fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>, name: &str, c_in: usize, c_out: usize) -> Self {
        let mut pb = pb.scope(name);
        Self {
            dw: DepthwiseConv::new(&mut pb, "dw", c_in, 3, 1, Padding::Same),
            pw: Conv::new(&mut pb, "pw", c_in, c_out, (1, 1), 1, Padding::Valid, false),
            bn: Norm::new(&mut pb, "bn", c_out),
        }
    }

    fn forward<T: Scalar>(&self, t: &mut Tape<'_, T>, x: NodeId) -> Result<NodeId> {
        let y = self.dw.forward(t, x)?;
        let y = self.pw.forward(t, y)?;
        self.bn.forward(t, y)
    }
}

/// Residual unit: `[relu?] sep … [+ pool]` added to an optional projection.
struct XBlock {
    seps: Vec<SepConv>,
    leading_relu: bool,
    downsample: bool,
    shortcut: Option<ConvBn>,
}

struct Xception {
    stem: [ConvBn; 2],
    blocks: Vec<XBlock>,
    exit: [SepConv; 2],
}

impl Xception {
    fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>) -> (Self, usize) {
        let stem = [
            cbr(pb, "stem1", 1, 32, (3, 3), 2, Padding::Valid),
            cbr(pb, "stem2", 32, 64, (3, 3), 1, Padding::Valid),
        ];
        let mut blocks = Vec::new();
        let down = |pb: &mut ParamBuilder<'_, T>, name: &str, c_in: usize, mid: usize, c_out: usize, lead: bool| {
            let mut pb = pb.scope(name);
            XBlock {
                seps: vec![SepConv::new(&mut pb, "sep1", c_in, mid), SepConv::new(&mut pb, "sep2", mid, c_out)],
                leading_relu: lead,
                downsample: true,
                shortcut: Some(ConvBn::new(&mut pb, "shortcut", c_in, c_out, (1, 1), 2, Padding::Same, Act::Linear)),
            }
        };
        blocks.push(down(pb, "entry1", 64, 128, 128, false));
        blocks.push(down(pb, "entry2", 128, 256, 256, true));
        blocks.push(down(pb, "entry3", 256, 728, 728, true));
        for i in 0..8 {
            let mut pb = pb.scope(&format!("middle{}", i + 1));
            blocks.push(XBlock {
                seps: (0..3).map(|j| SepConv::new(&mut pb, &format!("sep{}", j + 1), 728, 728)).collect(),
                leading_relu: true,
                downsample: false,
                shortcut: None,
            });
        }
        blocks.push(down(pb, "exit1", 728, 728, 1024, true));
        let exit = [SepConv::new(pb, "exit_sep1", 1024, 1536), SepConv::new(pb, "exit_sep2", 1536, 2048)];
        (Self { stem, blocks, exit }, 2048)
    }
}

impl TrunkDef for Xception {
    fn run<T: Scalar>(&self, t: &mut Tape<'_, T>, x: NodeId) -> Result<NodeId> {
        let mut x = seq(t, &self.stem, x)?;
        for b in &self.blocks {
            let mut y = x;
            for (i, sep) in b.seps.iter().enumerate() {
                if i > 0 || b.leading_relu {
                    y = t.relu(y);
                }
                y = sep.forward(t, y)?;
            }
            if b.downsample {
                y = t.max_pool(y, 3, 2, Padding::Same)?;
            }
            let s = match &b.shortcut {
                Some(sc) => sc.forward(t, x)?,
                None => x,
            };
            x = t.add(y, s)?;
        }
        for sep in &self.exit {
            x = sep.forward(t, x)?;
            x = t.relu(x);
        }
        Ok(x)
    }
}

// ---------------------------------------------------------------- registry

fn assemble<T: Scalar, D: TrunkDef + 'static>(
    name: BackboneName,
    store: ParamStore<T>,
    trunk: D,
    width: usize,
    head: Dense,
) -> Network<T> {
    Network::new(
        ModelDescriptor::Backbone { name },
        InputContract::Spectrogram {
            kind: SpectrogramKind::Wavelet,
        },
        Box::new(Backbone { trunk, head, width }),
        store,
    )
}

pub(crate) fn build_backbone_generic<T: Scalar>(name: BackboneName, seed: u64) -> Network<T> {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pb = ParamBuilder::new(&mut store, &mut rng);
    macro_rules! finish {
        ($built:expr) => {{
            let (trunk, width) = $built;
            let head = Dense::new(&mut pb, "classifier", width, NUM_CLASSES);
            drop(pb);
            assemble(name, store, trunk, width, head)
        }};
    }
    match name {
        BackboneName::Vgg16 => finish!(Vgg::new(&mut pb, [2, 2, 3, 3, 3])),
        BackboneName::Vgg19 => finish!(Vgg::new(&mut pb, [2, 2, 4, 4, 4])),
        BackboneName::MobileNetV1 => finish!(MobileNetV1::new(&mut pb)),
        BackboneName::MobileNetV2 => finish!(MobileNetV2::new(&mut pb)),
        BackboneName::ResNet50 => finish!(ResNet50::new(&mut pb)),
        BackboneName::DenseNet201 => finish!(DenseNet::new(&mut pb, [6, 12, 48, 32])),
        BackboneName::InceptionV3 => finish!(InceptionV3::new(&mut pb)),
        BackboneName::Xception => finish!(Xception::new(&mut pb)),
    }
}

/// Build a benchmark backbone by registry name (`"VGG16"`, `"ResNet50"`, …).
pub fn build_backbone(name: &str, seed: u64) -> Result<Network> {
    let name: BackboneName = name.parse()?;
    Ok(build_backbone_generic(name, seed))
}
