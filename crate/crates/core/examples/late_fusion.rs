//! Product-rule fusion of two frameworks' probabilities, and embedding
//! concatenation for early/middle fusion.

use respkit::dataio::Label;
use respkit::fusion::{concat_embeddings, fuse_prediction_sets, PredictionSet};

fn main() -> anyhow::Result<()> {
    let mut cnn = PredictionSet::new("inception");
    cnn.insert("101_1b1#000", [0.50, 0.30, 0.15, 0.05])?;
    cnn.insert("101_1b1#001", [0.40, 0.45, 0.10, 0.05])?;
    let mut head = PredictionSet::new("mlp");
    head.insert("101_1b1#000", [0.30, 0.60, 0.05, 0.05])?;
    head.insert("101_1b1#001", [0.70, 0.20, 0.05, 0.05])?;

    let fused = fuse_prediction_sets(&[cnn, head])?;
    for ((id, scores), (_, label)) in fused.renormalized().iter().zip(fused.labels()) {
        println!("{id}: {scores:.3?} -> {}", Label::ALL[label]);
    }

    let e = concat_embeddings(&[0.1; 256], &[0.2; 2048])?;
    println!("early-fusion vector width {}", e.len());
    Ok(())
}
