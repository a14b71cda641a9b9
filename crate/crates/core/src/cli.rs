//! Command-line front end.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::stats::corpus_stats;
use crate::corpus::{load_dir, load_log, parse_log_line, save_file, AnnotationOptions, ChatFile, Utterance};
use crate::decoder::Session;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::synth::{gen_synth, gen_synth_corpus, SynthConfig};
use crate::trainer::{evaluate, tune_self_link_threshold, TrainConfig, Trainer};

#[derive(Debug, Parser)]
#[command(name = "disentangle", version, about = "Online chat disentanglement")]
struct Cli {
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Subtracted from annotation indices.
    #[arg(long, global = true, default_value_t = 0)]
    offset: usize,
    /// Annotation columns are `child parent`.
    #[arg(long, global = true)]
    child_first: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model; writes checkpoints and a JSON report into --out.
    Train(TrainArgs),
    /// Score a model on an annotated directory.
    Eval(EvalArgs),
    /// Pick the self-link threshold that maximises cluster F1.
    TuneThreshold(TuneArgs),
    /// Stream a log through a model, one TSV row per utterance.
    Disentangle(StreamArgs),
    /// Corpus statistics of an annotated directory.
    Stats(StatsArgs),
    /// Write a synthetic annotated corpus.
    GenSynth(SynthArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    dev: Option<PathBuf>,
    /// TOML file with TrainConfig keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Defaults to the threshold stored in the checkpoint.
    #[arg(long)]
    self_link_threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Grid source when --grid is absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated thresholds.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Where to write the updated checkpoint; defaults to --model.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StreamArgs {
    #[arg(long)]
    model: PathBuf,
    /// Log file to read instead of stdin.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    self_link_threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    data: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    threads: usize,
    #[arg(long, default_value_t = 200)]
    utterances: usize,
    #[arg(long, default_value_t = 0.8)]
    mention_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    system_rate: f64,
    #[arg(long, default_value_t = 4)]
    max_active: usize,
    /// Number of files; file `k` uses seed + k.
    #[arg(long, default_value_t = 1)]
    files: usize,
    #[arg(long, default_value = "synthetic")]
    name: String,
}

/// Exit status for an error: 1 for usage and contract problems, 3 for
/// numeric failures, 2 for everything rooted in the data.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Contract(_) | Error::Config(_) => 1,
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

/// Runs one invocation against the given streams and returns the exit code.
pub fn run<I, S>(argv: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match dispatch(cli, stdin, stdout, stderr) {
        Ok(()) => 0,
        // a closed downstream pipe (`| head`) is a normal way to stop reading
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// [`run`] over the process arguments and standard streams.
pub fn main() -> i32 {
    let stdin = std::io::stdin();
    let mut input = stdin.lock();
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run(std::env::args_os(), &mut input, &mut out, &mut err)
}

fn dispatch(cli: Cli, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let opts = AnnotationOptions {
        offset: cli.offset,
        child_first: cli.child_first,
    };
    match cli.command {
        Command::Train(a) => train(a, cli.seed, &opts, stdout, stderr),
        Command::Eval(a) => {
            let (model, _) = Model::load(&a.model)?;
            let files = load_nonempty(&a.data, &opts)?;
            let tau = check_threshold(a.self_link_threshold.unwrap_or(model.threshold))?;
            let bundle = evaluate(&model, &files, tau)?;
            writeln!(stdout, "{}", serde_json::to_string_pretty(&bundle)?)?;
            write!(stderr, "{}", bundle.table())?;
            Ok(())
        }
        Command::TuneThreshold(a) => {
            let (mut model, extra) = Model::load(&a.model)?;
            let files = load_nonempty(&a.data, &opts)?;
            let grid = match (a.grid, &a.config) {
                (Some(g), _) => g,
                (None, Some(path)) => TrainConfig::load(path)?.self_link_threshold_grid,
                (None, None) => TrainConfig::default().self_link_threshold_grid,
            };
            let sweep = tune_self_link_threshold(&model, &files, &grid)?;
            for (tau, f1) in &sweep.results {
                writeln!(stderr, "threshold {tau:.2}  cluster F1 {:.2}", 100.0 * f1)?;
            }
            model.threshold = sweep.best;
            model.save(a.out.as_deref().unwrap_or(&a.model), extra)?;
            writeln!(stdout, "{}", serde_json::to_string_pretty(&sweep)?)?;
            Ok(())
        }
        Command::Disentangle(a) => stream(a, stdin, stdout),
        Command::Stats(a) => {
            let files = load_nonempty(&a.data, &opts)?;
            let stats = corpus_stats(&files)?;
            writeln!(stdout, "{}", serde_json::to_string_pretty(&stats)?)?;
            Ok(())
        }
        Command::GenSynth(a) => {
            let config = SynthConfig {
                threads: a.threads,
                utterances: a.utterances,
                mention_rate: a.mention_rate,
                system_rate: a.system_rate,
                max_active: a.max_active,
                seed: cli.seed.unwrap_or(SynthConfig::default().seed),
            };
            let files = if a.files == 1 {
                vec![gen_synth(&config, &a.name)?]
            } else {
                gen_synth_corpus(&config, &a.name, a.files)?
            };
            for f in &files {
                save_file(&a.out, f)?;
                writeln!(stderr, "wrote {} ({} utterances)", f.name, f.utterances.len())?;
            }
            Ok(())
        }
    }
}

fn check_threshold(tau: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&tau) {
        Ok(tau)
    } else {
        Err(Error::Contract(format!("self-link threshold {tau} outside [0, 1]")))
    }
}

fn load_nonempty(dir: &Path, opts: &AnnotationOptions) -> Result<Vec<ChatFile>> {
    let files = load_dir(dir, opts)?;
    if files.is_empty() {
        return Err(Error::Integrity(format!(
            "{}: no annotation files found",
            dir.display()
        )));
    }
    Ok(files)
}

fn train(
    a: TrainArgs,
    seed: Option<u64>,
    opts: &AnnotationOptions,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    let mut config = match &a.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    let train = load_nonempty(&a.data, opts)?;
    let dev = a.dev.as_deref().map(|d| load_nonempty(d, opts)).transpose()?;
    let mut trainer = Trainer::new(config, &train)?;
    let report = trainer.train(dev.as_deref(), Some(&a.out), |e| {
        let dev = match (e.dev_link_f1, e.dev_cluster_f1) {
            (Some(l), Some(c)) => format!("  dev link F1 {:.2}  cluster F1 {:.2}", 100.0 * l, 100.0 * c),
            _ => String::new(),
        };
        let _ = writeln!(
            stderr,
            "epoch {:>3}  loss {:.4}  skipped {}  {:.1}s{dev}",
            e.epoch, e.train_loss, e.skipped, e.wall_seconds
        );
    })?;
    trainer.save(&a.out.join("model.ckpt"))?;
    let text = serde_json::to_string_pretty(&report)?;
    let path = a.out.join("report.json");
    fs::write(&path, &text).map_err(|e| Error::file(&path, e))?;
    writeln!(stdout, "{text}")?;
    Ok(())
}

fn stream(a: StreamArgs, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> Result<()> {
    let (model, _) = Model::load(&a.model)?;
    let tau = check_threshold(a.self_link_threshold.unwrap_or(model.threshold))?;
    let mut session = Session::new(&model, tau);
    writeln!(stdout, "index\tparent\tthread\ttime\tspeaker\ttext")?;
    let mut emit = |u: &Utterance, out: &mut dyn Write| -> Result<()> {
        let step = session.step(u)?;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            step.index, step.parent, step.thread, u.time, u.speaker, u.raw_text
        )?;
        out.flush()?;
        Ok(())
    };
    if let Some(path) = &a.data {
        for u in load_log(path)? {
            emit(&u, stdout)?;
        }
        return Ok(());
    }
    let mut line = String::new();
    let (mut line_no, mut index) = (0, 0);
    loop {
        line.clear();
        if stdin.read_line(&mut line)? == 0 {
            break;
        }
        line_no += 1;
        if let Some(parsed) = parse_log_line(line.trim_end_matches(['\n', '\r']), line_no)? {
            emit(&Utterance::from_line(index, parsed), stdout)?;
            index += 1;
        }
    }
    Ok(())
}
