//! Writes a synthetic annotated corpus, or prints one file when no directory is given.
//!
//! Usage: `cargo run --example gen_synth [out_dir] [files]`

use disentangle::corpus::{format_annotations, format_log_line, save_file};
use disentangle::synth::{gen_synth, gen_synth_corpus, SynthConfig};

fn main() -> disentangle::Result<()> {
    let config = SynthConfig {
        threads: 4,
        utterances: 24,
        system_rate: 0.1,
        ..SynthConfig::default()
    };
    let Some(dir) = std::env::args().nth(1) else {
        let file = gen_synth(&config, "synthetic")?;
        for u in &file.utterances {
            println!("{}", format_log_line(u));
        }
        print!("\n{}", format_annotations(&file.links));
        return Ok(());
    };
    let count = std::env::args().nth(2).and_then(|n| n.parse().ok()).unwrap_or(3);
    for file in gen_synth_corpus(&config, "synthetic", count)? {
        save_file(dir.as_ref(), &file)?;
        eprintln!("wrote {}/{}", dir, file.name);
    }
    Ok(())
}
