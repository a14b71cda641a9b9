//! Trains on a generated corpus and reports fit on the training data.
//!
//! Usage: `cargo run --release --example train_synthetic [epochs] [learning_rate]`

use disentangle::synth::{gen_synth, SynthConfig};
use disentangle::trainer::{evaluate, link_accuracy, TrainConfig, Trainer};

fn main() -> disentangle::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5);
    let learning_rate = std::env::args()
        .nth(2)
        .and_then(|a| a.parse().ok())
        .unwrap_or(TrainConfig::default().learning_rate);
    let file = gen_synth(&SynthConfig::default(), "synthetic")?;
    let files = vec![file];
    let config = TrainConfig {
        epochs,
        learning_rate,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(config, &files)?;
    let report = trainer.train(None, None, |e| {
        eprintln!(
            "epoch {:>3}  loss {:.4}  link {:.4}  pair {:.4}  {:.1}s",
            e.epoch, e.train_loss, e.link_loss, e.pair_loss, e.wall_seconds
        )
    })?;
    let model = &trainer.model;
    println!("link accuracy  {:.3}", link_accuracy(model, &files, 0.0)?);
    println!("{}", evaluate(model, &files, 0.0)?.table());
    println!("total {:.1}s", report.total_seconds);
    Ok(())
}
