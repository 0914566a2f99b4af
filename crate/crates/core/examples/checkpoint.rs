//! Trains briefly, writes a checkpoint, reads it back and checks that the
//! restored model scores a scene identically.

use synet::format::{decode_checkpoint, encode_checkpoint, encode_params, Checkpoint};
use synet::pipeline::{generate_dataset, score_scenes, DataConfig};
use synet::trainer::{train, TrainConfig};

fn main() -> synet::Result<()> {
    let scenes = generate_dataset(8, 4, &DataConfig::default())?;
    let mut config = TrainConfig::pu();
    config.epochs = 1;
    config.injection_ratio = 0.5;
    let out = train(&scenes, &config)?;
    let ckpt = Checkpoint { model: out.model, config };
    let bytes = encode_checkpoint(&ckpt)?;
    println!("checkpoint: {} bytes, of which {} are embedding weights", bytes.len(), encode_params(&ckpt.model.embedding)?.len());

    let back = decode_checkpoint(&bytes)?;
    let same = score_scenes(&ckpt.model, &scenes[..1])? == score_scenes(&back.model, &scenes[..1])?;
    println!("restored model reproduces scores: {same}");
    Ok(())
}
