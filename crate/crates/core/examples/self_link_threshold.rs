//! Sweeps the self-link threshold on a development set and shows its effect.
//!
//! A self-link is kept only when its probability reaches the threshold;
//! otherwise the best earlier candidate wins. Tuning trades missed thread
//! starts against spurious ones.

use disentangle::synth::{gen_synth, gen_synth_corpus, SynthConfig};
use disentangle::trainer::{default_grid, evaluate, tune_self_link_threshold, TrainConfig, Trainer};

fn main() -> disentangle::Result<()> {
    let train = gen_synth_corpus(&SynthConfig { threads: 20, utterances: 100, ..SynthConfig::default() }, "train", 4)?;
    let dev = vec![gen_synth(&SynthConfig { threads: 30, utterances: 100, seed: 101, ..SynthConfig::default() }, "dev")?];
    let config = TrainConfig {
        hidden: 16,
        embed_dim: 16,
        learning_rate: 1e-2,
        epochs: 10,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(config, &train)?;
    trainer.train(None, None, |_| {})?;
    let model = &trainer.model;

    let sweep = tune_self_link_threshold(model, &dev, &default_grid())?;
    println!("threshold  cluster F1");
    for (tau, f1) in &sweep.results {
        let mark = if *tau == sweep.best { "  <- best" } else { "" };
        println!("{tau:>9.2}  {f1:>10.3}{mark}");
    }
    for tau in [0.0, sweep.best] {
        let m = evaluate(model, &dev, tau)?;
        println!(
            "\ntau {tau:.2}: self-link P {:.3} R {:.3}, link F1 {:.3}",
            m.self_link.precision, m.self_link.recall, m.link.f1
        );
        print!("{}", m.table());
    }
    Ok(())
}
