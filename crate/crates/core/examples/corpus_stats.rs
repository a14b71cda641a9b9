//! Corpus statistics for a directory of `*.ascii.txt` / `*.annotation.txt` pairs,
//! or for a generated corpus when no directory is given.
//!
//! Usage: `cargo run --example corpus_stats [data_dir]`

use disentangle::corpus::{corpus_stats, load_dir, AnnotationOptions};
use disentangle::synth::{gen_synth_corpus, SynthConfig};

fn main() -> disentangle::Result<()> {
    let files = match std::env::args().nth(1) {
        Some(dir) => load_dir(dir.as_ref(), &AnnotationOptions::default())?,
        None => gen_synth_corpus(&SynthConfig::default(), "synthetic", 5)?,
    };
    let stats = corpus_stats(&files)?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}
