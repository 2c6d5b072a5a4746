//! Save a network, reload it, and confirm identical predictions.

use ndarray::Array4;
use respkit::models::{build_inception_net, load_checkpoint, save_checkpoint, InceptionSpec};

fn main() -> anyhow::Result<()> {
    let net = build_inception_net(&InceptionSpec::inc01(), 1)?;
    let dir = tempfile::tempdir()?;
    let manifest = save_checkpoint(&net, dir.path())?;
    println!("saved {} tensors for {}", manifest.tensors.len(), net.descriptor().label());

    let back = load_checkpoint(dir.path())?;
    let x = Array4::from_shape_fn((2, 1, 124, 154), |(n, _, h, w)| ((n + h * w) % 7) as f32 / 7.0).into_dyn();
    let a = net.forward(x.clone())?;
    let b = back.forward(x)?;
    println!("reloaded predictions identical: {}", a == b);
    println!("{a:.4}");
    Ok(())
}
