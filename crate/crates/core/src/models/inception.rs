use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Conv, Dense, Norm};
use super::{Architecture, Forward, InputContract, ModelDescriptor, Network, TapInfo, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::features::SpectrogramKind;
use crate::nn::{NodeId, Padding, ParamBuilder, ParamStore, Scalar, Tape};

/// Channel and width settings of one inception network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InceptionSpec {
    pub name: String,
    /// Two stacked inception layers per block instead of one.
    pub double_layers: bool,
    pub ch1: usize,
    pub ch2: usize,
    pub ch3: usize,
    pub ch4: usize,
    pub fc1: usize,
    pub fc2: usize,
}

impl InceptionSpec {
    fn preset(name: &str, double_layers: bool, base: usize, fc: usize) -> Self {
        Self {
            name: name.to_string(),
            double_layers,
            ch1: base,
            ch2: base * 2,
            ch3: base * 4,
            ch4: base * 8,
            fc1: fc,
            fc2: fc,
        }
    }

    pub fn inc01() -> Self {
        Self::preset("Inc-01", false, 32, 512)
    }
    pub fn inc02() -> Self {
        Self::preset("Inc-02", true, 32, 512)
    }
    pub fn inc03() -> Self {
        Self::preset("Inc-03", false, 64, 1024)
    }
    pub fn inc04() -> Self {
        Self::preset("Inc-04", true, 64, 1024)
    }
    pub fn inc05() -> Self {
        Self::preset("Inc-05", false, 128, 2048)
    }
    pub fn inc06() -> Self {
        Self::preset("Inc-06", true, 128, 2048)
    }

    /// The six standard configurations, Inc-01 through Inc-06.
    pub fn canonical() -> Vec<Self> {
        vec![
            Self::inc01(),
            Self::inc02(),
            Self::inc03(),
            Self::inc04(),
            Self::inc05(),
            Self::inc06(),
        ]
    }

    /// Look up a canonical spec by name (`Inc-03`, `inc03`, `inc-03`).
    pub fn by_name(name: &str) -> Result<Self> {
        let key: String = name.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        Self::canonical()
            .into_iter()
            .find(|s| s.name.replace('-', "").to_lowercase() == key)
            .ok_or_else(|| Error::Registry(name.to_string()))
    }

    pub fn channels(&self) -> [usize; 4] {
        [self.ch1, self.ch2, self.ch3, self.ch4]
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.channels().into_iter().enumerate() {
            if c == 0 || c % 4 != 0 {
                return Err(Error::Spec(format!(
                    "{}: ch{} = {c} must be a positive multiple of 4",
                    self.name,
                    i + 1
                )));
            }
        }
        if self.fc1 == 0 || self.fc2 == 0 {
            return Err(Error::Spec(format!("{}: fully connected widths must be positive", self.name)));
        }
        Ok(())
    }
}

/// Four parallel branches concatenated on channels: 1×1; 1×1→3×3; 1×1→5×5;
/// 3×3 max-pool→1×1. Each branch emits a quarter of the output channels.
#[derive(Debug, Clone)]
pub struct InceptionLayer {
    b1: Conv,
    b2_reduce: Conv,
    b2: Conv,
    b3_reduce: Conv,
    b3: Conv,
    b4: Conv,
    out_ch: usize,
}

impl InceptionLayer {
    pub fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>, name: &str, in_ch: usize, out_ch: usize) -> Result<Self> {
        if out_ch == 0 || !out_ch.is_multiple_of(4) {
            return Err(Error::Spec(format!("inception output channels {out_ch} not divisible by 4")));
        }
        if in_ch == 0 {
            return Err(Error::Spec("inception input must have channels".into()));
        }
        let q = out_ch / 4;
        let mut pb = pb.scope(name);
        Ok(Self {
            b1: Conv::same(&mut pb, "b1_1x1", in_ch, q, 1),
            b2_reduce: Conv::same(&mut pb, "b2_1x1", in_ch, q, 1),
            b2: Conv::same(&mut pb, "b2_3x3", q, q, 3),
            b3_reduce: Conv::same(&mut pb, "b3_1x1", in_ch, q, 1),
            b3: Conv::same(&mut pb, "b3_5x5", q, q, 5),
            b4: Conv::same(&mut pb, "b4_1x1", in_ch, q, 1),
            out_ch,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.out_ch
    }

    pub fn forward<T: Scalar>(&self, t: &mut Tape<'_, T>, x: NodeId) -> Result<NodeId> {
        let a = self.b1.forward(t, x)?;
        let r = self.b2_reduce.forward(t, x)?;
        let r = t.relu(r);
        let b = self.b2.forward(t, r)?;
        let r = self.b3_reduce.forward(t, x)?;
        let r = t.relu(r);
        let c = self.b3.forward(t, r)?;
        let p = t.max_pool(x, 3, 1, Padding::Same)?;
        let d = self.b4.forward(t, p)?;
        t.concat(&[a, b, c, d])
    }
}

struct Block {
    layers: Vec<InceptionLayer>,
}

struct Transition {
    pre: Norm,
    post: Norm,
    dropout: f64,
}

struct InceptionNet {
    input_norm: Norm,
    blocks: Vec<Block>,
    transitions: Vec<Transition>,
    final_norm: Norm,
    fc1: Dense,
    fc2: Dense,
    out: Dense,
    ch4: usize,
}

const TRANSITION_DROPOUT: [f64; 3] = [0.10, 0.15, 0.20];
const POOLED_DROPOUT: f64 = 0.25;
const FC_DROPOUT: f64 = 0.30;

impl<T: Scalar> Architecture<T> for InceptionNet {
    fn trace(&self, t: &mut Tape<'_, T>, input: NodeId) -> Result<Forward> {
        let mut x = self.input_norm.forward(t, input)?;
        for (i, block) in self.blocks.iter().enumerate() {
            for layer in &block.layers {
                x = layer.forward(t, x)?;
                x = t.relu(x);
            }
            if let Some(tr) = self.transitions.get(i) {
                x = tr.pre.forward(t, x)?;
                x = t.max_pool(x, 2, 2, Padding::Same)?;
                x = t.dropout(x, tr.dropout);
                x = tr.post.forward(t, x)?;
            }
        }
        x = self.final_norm.forward(t, x)?;
        let gmp = t.global_max_pool(x)?;
        let x = t.dropout(gmp, POOLED_DROPOUT);
        let h = self.fc1.forward(t, x)?;
        let h = t.relu(h);
        let h = t.dropout(h, FC_DROPOUT);
        let h = self.fc2.forward(t, h)?;
        let fc2 = t.relu(h);
        let h = t.dropout(fc2, FC_DROPOUT);
        let logits = self.out.forward(t, h)?;
        Ok(Forward {
            logits,
            taps: vec![("GMP".into(), gmp), ("FC2".into(), fc2)],
        })
    }

    fn taps(&self) -> Vec<TapInfo> {
        vec![
            TapInfo {
                name: "GMP".into(),
                width: self.ch4,
            },
            TapInfo {
                name: "FC2".into(),
                width: self.fc2.width(),
            },
        ]
    }
}

pub(crate) fn build_inception_generic<T: Scalar>(spec: &InceptionSpec, seed: u64) -> Result<Network<T>> {
    spec.validate()?;
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pb = ParamBuilder::new(&mut store, &mut rng);
    let per_block = if spec.double_layers { 2 } else { 1 };
    let input_norm = Norm::new(&mut pb, "input_bn", 1);
    let chans = spec.channels();
    let mut blocks = Vec::new();
    let mut transitions = Vec::new();
    let mut c_in = 1;
    for (i, &ch) in chans.iter().enumerate() {
        let mut layers = Vec::new();
        for j in 0..per_block {
            layers.push(InceptionLayer::new(&mut pb, &format!("block{}.inc{}", i + 1, j + 1), c_in, ch)?);
            c_in = ch;
        }
        blocks.push(Block { layers });
        if i < 3 {
            transitions.push(Transition {
                pre: Norm::new(&mut pb, &format!("block{}.bn_pre", i + 1), ch),
                post: Norm::new(&mut pb, &format!("block{}.bn_post", i + 1), ch),
                dropout: TRANSITION_DROPOUT[i],
            });
        }
    }
    let final_norm = Norm::new(&mut pb, "final_bn", spec.ch4);
    let fc1 = Dense::new(&mut pb, "fc1", spec.ch4, spec.fc1);
    let fc2 = Dense::new(&mut pb, "fc2", spec.fc1, spec.fc2);
    let out = Dense::new(&mut pb, "fc_out", spec.fc2, NUM_CLASSES);
    let arch = InceptionNet {
        input_norm,
        blocks,
        transitions,
        final_norm,
        fc1,
        fc2,
        out,
        ch4: spec.ch4,
    };
    Ok(Network::new(
        ModelDescriptor::Inception(spec.clone()),
        InputContract::Spectrogram {
            kind: SpectrogramKind::Wavelet,
        },
        Box::new(arch),
        store,
    ))
}

/// Build one of the inception networks for 124×154 wavelet input.
pub fn build_inception_net(spec: &InceptionSpec, seed: u64) -> Result<Network> {
    build_inception_generic(spec, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Mode, ParamKind};
    use ndarray::Array4;

    #[test]
    fn layer_rejects_channels_not_divisible_by_four() {
        let mut store = ParamStore::<f32>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut pb = ParamBuilder::new(&mut store, &mut rng);
        assert!(matches!(InceptionLayer::new(&mut pb, "x", 1, 30), Err(Error::Spec(_))));
    }

    #[test]
    fn layer_keeps_spatial_size() {
        let mut store = ParamStore::<f32>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut pb = ParamBuilder::new(&mut store, &mut rng);
        let layer = InceptionLayer::new(&mut pb, "x", 1, 32).unwrap();
        let mut t = Tape::new(&store, Mode::Eval, 0);
        let x = t.input(Array4::<f32>::ones((1, 1, 124, 154)).into_dyn());
        let y = layer.forward(&mut t, x).unwrap();
        assert_eq!(t.value(y).shape(), &[1, 32, 124, 154]);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut store = ParamStore::<f32>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pb = ParamBuilder::new(&mut store, &mut rng);
        let layer = InceptionLayer::new(&mut pb, "x", 3, 8).unwrap();
        let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
        for id in ids {
            store.value_mut(id).fill(0.0);
        }
        let mut t = Tape::new(&store, Mode::Eval, 0);
        let x = t.input(Array4::from_shape_fn((2, 3, 9, 7), |(a, b, c, d)| (a + b * c) as f32 - d as f32).into_dyn());
        let y = layer.forward(&mut t, x).unwrap();
        assert!(t.value(y).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn canonical_lookup() {
        assert_eq!(InceptionSpec::by_name("inc03").unwrap(), InceptionSpec::inc03());
        assert_eq!(InceptionSpec::by_name("Inc-06").unwrap().ch4, 1024);
        assert!(InceptionSpec::by_name("Inc-07").is_err());
    }

    #[test]
    fn running_stats_are_not_counted_as_parameters() {
        let net = build_inception_generic::<f32>(&InceptionSpec::inc01(), 0).unwrap();
        let running: usize = net
            .store()
            .iter()
            .filter(|(_, p)| matches!(p.kind, ParamKind::RunningMean | ParamKind::RunningVar))
            .map(|(_, p)| p.value.len())
            .sum();
        let total: usize = net.store().iter().map(|(_, p)| p.value.len()).sum();
        assert_eq!(net.param_count(), total - running);
    }
}
