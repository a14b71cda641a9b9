//! Parses an IRC log with reply-to annotations and shows what the loader sees.
//!
//! Usage: `cargo run --example parse_log [log.txt annotation.txt]`

use disentangle::corpus::{format_log_line, tokenize, to_jsonl, AnnotationOptions};
use disentangle::ChatFile;

const LOG: &str = "\
[09:02] === bilal has joined #ubuntu
[09:02] <bilal> how do i get grub to show the boot menu ?
[09:03] <tessa> anyone know why wifi drops after suspend
[09:03] <kofi> bilal: hold shift while it boots
[09:04] * tessa tries reloading the driver
[09:05] <bilal> kofi: thanks, that works
";

const ANNOTATIONS: &str = "0 0 -\n1 1 -\n2 2 -\n1 3 -\n2 4 -\n3 5 -\n";

fn main() -> disentangle::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (log, ann) = match args.as_slice() {
        [log, ann] => (std::fs::read_to_string(log)?, std::fs::read_to_string(ann)?),
        _ => (LOG.to_string(), ANNOTATIONS.to_string()),
    };
    let file = ChatFile::from_texts("example", &log, &ann, &AnnotationOptions::default())?;
    for u in &file.utterances {
        println!("{:>3} {:<8} {:?}", u.index, u.speaker, tokenize(&u.raw_text));
    }
    println!();
    for (child, parents) in file.gold_parents() {
        let shown: Vec<String> = parents
            .iter()
            .map(|&p| if p == child { "self".to_string() } else { p.to_string() })
            .collect();
        println!("{child:>3} -> {}", shown.join(", "));
    }
    println!();
    println!("{}", format_log_line(&file.utterances[3]));
    print!("{}", to_jsonl(&file.utterances[..2])?);
    Ok(())
}
