//! Online disentanglement: each line is assigned a parent and a thread the
//! moment it arrives, using only what came before.
//!
//! Usage: `cargo run --release --example stream_disentangle [model.ckpt] < log.txt`
//!
//! Without a checkpoint a small model is first fitted to generated chat.
//! Without input on stdin a generated log is streamed instead.

use std::io::{BufRead, IsTerminal};

use disentangle::corpus::{format_log_line, parse_log_line};
use disentangle::synth::{gen_synth, gen_synth_corpus, SynthConfig};
use disentangle::trainer::{TrainConfig, Trainer};
use disentangle::{Model, Session, Utterance};

fn quick_model() -> disentangle::Result<Model> {
    let train = gen_synth_corpus(&SynthConfig { threads: 10, utterances: 80, ..SynthConfig::default() }, "train", 4)?;
    let config = TrainConfig {
        hidden: 16,
        embed_dim: 16,
        learning_rate: 1e-2,
        epochs: 15,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(config, &train)?;
    trainer.train(None, None, |e| eprintln!("fitting: epoch {} loss {:.3}", e.epoch, e.train_loss))?;
    Ok(trainer.model)
}

fn main() -> disentangle::Result<()> {
    let model = match std::env::args().nth(1) {
        Some(path) => Model::load(path.as_ref())?.0,
        None => quick_model()?,
    };
    let stdin = std::io::stdin();
    let lines: Vec<String> = if stdin.is_terminal() {
        let demo = gen_synth(&SynthConfig { threads: 3, utterances: 15, seed: 42, ..SynthConfig::default() }, "demo")?;
        demo.utterances.iter().map(format_log_line).collect()
    } else {
        stdin.lock().lines().collect::<Result<_, _>>()?
    };

    let mut session = Session::new(&model, model.threshold);
    for (n, line) in lines.iter().enumerate() {
        let Some(parsed) = parse_log_line(line, n + 1)? else { continue };
        let u = Utterance::from_line(session.next_index(), parsed);
        let step = session.step(&u)?;
        let p = step.distribution.prob_of(step.parent).unwrap_or(0.0);
        let parent = if step.parent == step.index { "self".to_string() } else { step.parent.to_string() };
        println!("{:>3} -> {:>4}  thread {:>2}  p {:.2}  {}", step.index, parent, step.thread, p, line);
    }
    Ok(())
}
