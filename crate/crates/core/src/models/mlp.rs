use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::Dense;
use super::{Architecture, Forward, InputContract, ModelDescriptor, Network, TapInfo, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::nn::{NodeId, ParamBuilder, ParamStore, Scalar, Tape};

/// Hidden widths of the embedding head.
pub const MLP_HIDDEN: [usize; 3] = [4096, 4096, 1024];
const MLP_DROPOUT: f64 = 0.10;

struct Mlp {
    hidden: Vec<Dense>,
    out: Dense,
    dropout: f64,
}

impl<T: Scalar> Architecture<T> for Mlp {
    fn trace(&self, t: &mut Tape<'_, T>, input: NodeId) -> Result<Forward> {
        let mut x = input;
        let mut taps = Vec::with_capacity(self.hidden.len());
        for (i, layer) in self.hidden.iter().enumerate() {
            let h = layer.forward(t, x)?;
            let h = t.relu(h);
            taps.push((format!("FC{}", i + 1), h));
            x = t.dropout(h, self.dropout);
        }
        let logits = self.out.forward(t, x)?;
        Ok(Forward { logits, taps })
    }

    fn taps(&self) -> Vec<TapInfo> {
        self.hidden
            .iter()
            .enumerate()
            .map(|(i, d)| TapInfo {
                name: format!("FC{}", i + 1),
                width: d.width(),
            })
            .collect()
    }
}

/// Dense network `input → hidden… → 4` with ReLU and dropout after every
/// hidden layer and a softmax output.
pub fn build_mlp<T: Scalar>(input_dim: usize, hidden: &[usize], dropout: f64, seed: u64) -> Result<Network<T>> {
    if input_dim == 0 {
        return Err(Error::contract("MLP input width must be positive"));
    }
    if hidden.contains(&0) {
        return Err(Error::Spec("MLP hidden widths must be positive".into()));
    }
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::Spec(format!("dropout rate {dropout} outside [0, 1)")));
    }
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pb = ParamBuilder::new(&mut store, &mut rng);
    let mut layers = Vec::with_capacity(hidden.len());
    let mut d = input_dim;
    for (i, &w) in hidden.iter().enumerate() {
        layers.push(Dense::new(&mut pb, &format!("fc{}", i + 1), d, w));
        d = w;
    }
    let out = Dense::new(&mut pb, "fc_out", d, NUM_CLASSES);
    Ok(Network::new(
        ModelDescriptor::Mlp {
            input_dim,
            hidden: hidden.to_vec(),
            dropout,
        },
        InputContract::Vector { dim: input_dim },
        Box::new(Mlp {
            hidden: layers,
            out,
            dropout,
        }),
        store,
    ))
}

/// The embedding classifier: FC(4096)-FC(4096)-FC(1024)-FC(4), 10% dropout.
pub fn build_mlp_head(input_dim: usize, seed: u64) -> Result<Network> {
    build_mlp(input_dim, &MLP_HIDDEN, MLP_DROPOUT, seed)
}
