//! Compares analytic gradients with central differences: one tape operation,
//! then the full training objective of a small model.

use disentangle::nn::{check_gradients, check_param_gradients, Tensor};
use disentangle::synth::{gen_synth, SynthConfig};
use disentangle::trainer::{batch_gradients, pair_map, prepare_training_file, TrainConfig, Trainer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn main() -> disentangle::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // Soft alignment between a 3-token and a 5-token sequence, reduced to a scalar.
    let inputs = [random(3, 6, &mut rng), random(5, 6, &mut rng)];
    let r = check_gradients(&inputs, 1e-6, |t, x| {
        let h = t.soft_align(x[0], x[1]);
        let s = t.tanh(h);
        t.sum(s)
    })?;
    println!("soft align   {} entries, max relative error {:.2e}", r.checked, r.max_rel_error);

    // Link and pair losses through the Bi-LSTM on a short synthetic log.
    let file = gen_synth(&SynthConfig { threads: 2, utterances: 8, ..SynthConfig::default() }, "tiny")?;
    let config = TrainConfig { hidden: 4, embed_dim: 3, window: 4, ..TrainConfig::default() };
    let model = Trainer::new(config, std::slice::from_ref(&file))?.model;
    let prepared = prepare_training_file(&model, &file)?;
    let pairs = pair_map(&prepared, 4, 1.0, &mut rng)?;
    let eval = |p: &disentangle::nn::ParameterStore| {
        let mut m = model.clone();
        m.params = p.clone();
        batch_gradients(&m, &prepared, &prepared.targets, &pairs, 1.0, 0.2, &mut ChaCha8Rng::seed_from_u64(9))
    };
    let r = check_param_gradients(
        &model.params,
        1e-4,
        1,
        |p| eval(p).map(|b| (b.loss, b.grads)),
        |p| eval(p).map(|b| b.loss),
    )?;
    println!("joint loss   {} entries, max relative error {:.2e}", r.checked, r.max_rel_error);
    if let Some((name, index, analytic, numeric)) = r.worst {
        println!("worst        {name}[{index}] analytic {analytic:.6e} numeric {numeric:.6e}");
    }
    Ok(())
}
