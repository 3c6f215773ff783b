mod config;

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::ConfigFile;
use soapclf::align::AlignmentDump;
use soapclf::corpus::{read_corpus, read_jsonl, write_corpus, write_jsonl};
use soapclf::data::{label_corpus, LabeledTranscript, Task};
use soapclf::eval::{render_metric_table, render_per_class_table, ResultRow};
use soapclf::irr::{irr_report, pair_notes, read_notes};
use soapclf::pipeline::{evaluate_model, evaluate_scores, oracle_scores, train_model, ModelFile, ModelKind, TrainOptions};
use soapclf::project::{project_corpus, read_raw_asr, write_raw_asr, ProjectConfig, SpeakerNorm};
use soapclf::synth::{corrupt_corpus, generate_corpus, CorruptionConfig, CorruptionEvent, SynthConfig};
use soapclf::types::Transcript;
use soapclf::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "soapclf", version, about = "Align, project, classify and compare clinical conversation transcripts")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// TOML file; its values override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labeled reference corpus and its simulated ASR output.
    Synth(SynthArgs),
    /// Align reference and ASR text; writes one dump record per encounter.
    Align(AlignArgs),
    /// Project reference labels onto ASR utterances.
    Project(ProjectArgs),
    /// Train a classifier and write a model file.
    Train(TrainArgs),
    /// Score models on test corpora.
    Eval(EvalArgs),
    /// Agreement statistics between two annotators' notes.
    Irr(IrrArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    min_utterances: usize,
    #[arg(long, default_value_t = 40)]
    max_utterances: usize,
    #[arg(long, default_value_t = 0.0)]
    context_strength: f64,
    /// Total character damage rate (60% substitutions, 20% deletions, 20% insertions).
    #[arg(long, default_value_t = 0.0)]
    char_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    merge_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    split_rate: f64,
}

#[derive(Args, Debug)]
struct AlignArgs {
    #[arg(long)]
    reference: PathBuf,
    /// Raw ASR records (text and turns).
    #[arg(long)]
    asr: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NormArg {
    L1,
    L2,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    asr: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "l2")]
    speaker_norm: NormArg,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Reference corpora.
    #[arg(long = "train", required = true)]
    train: Vec<PathBuf>,
    /// Projected ASR corpora, used with --with-asr.
    #[arg(long = "asr")]
    asr: Vec<PathBuf>,
    #[arg(long)]
    with_asr: bool,
    #[arg(long)]
    variant: String,
    #[arg(long)]
    out: PathBuf,
    /// Write the per-epoch training report here (neural models).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Model files; ignored with --oracle.
    #[arg(long = "model")]
    models: Vec<PathBuf>,
    /// Test corpora as NAME=PATH (e.g. HT=ref.jsonl).
    #[arg(long = "test", required = true)]
    tests: Vec<String>,
    /// Score with the test targets themselves.
    #[arg(long)]
    oracle: bool,
    /// Also write all metrics as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IrrArgs {
    #[arg(long)]
    notes_a: PathBuf,
    #[arg(long)]
    notes_b: PathBuf,
    /// Corpus with the annotated conversations (for utterance counts).
    #[arg(long)]
    transcripts: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
}

struct Ctx {
    seed: u64,
    config: ConfigFile,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::Parse { .. } | Error::Validation { .. } => 4,
        Error::Invariant(_) => 5,
        Error::InvalidInput(_) => 2,
        Error::Numeric(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\t'], " ");
            eprintln!("error\tkind={}\tmsg={msg}", e.kind());
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let seed = config.u64("seed")?.unwrap_or(cli.seed);
    let threads = config.u64("threads")?.map(|t| t as usize).or(cli.threads);
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidInput("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    let ctx = Ctx { seed, config };
    match cli.command {
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::Align(a) => cmd_align(a),
        Command::Project(a) => cmd_project(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Eval(a) => cmd_eval(a),
        Command::Irr(a) => cmd_irr(a),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

#[derive(Serialize, serde::Deserialize)]
struct CorruptionSidecar {
    encounter_id: String,
    events: Vec<CorruptionEvent>,
}

fn cmd_synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let mut corruption = CorruptionConfig::chars(a.char_rate);
    corruption.turn_merge_rate = a.merge_rate;
    corruption.turn_split_rate = a.split_rate;
    let base = SynthConfig {
        n_transcripts: a.n,
        min_utterances: a.min_utterances,
        max_utterances: a.max_utterances,
        context_rule_strength: a.context_strength,
        corruption,
        seed: ctx.seed,
        ..SynthConfig::default()
    };
    let cfg = ctx.config.overlay("synth", base)?;
    cfg.validate()?;
    let corpus = generate_corpus(&cfg)?;
    let asr = corrupt_corpus(&corpus, &cfg.corruption, cfg.seed ^ 0x5eed_a5a5)?;
    std::fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;
    write_corpus(&corpus, a.out_dir.join("reference.jsonl"))?;
    write_raw_asr(&asr.iter().map(|c| c.raw_asr()).collect::<Vec<_>>(), a.out_dir.join("asr.jsonl"))?;
    let sidecar: Vec<CorruptionSidecar> = asr
        .iter()
        .map(|c| CorruptionSidecar {
            encounter_id: c.encounter_id.clone(),
            events: c.events.clone(),
        })
        .collect();
    write_jsonl(&sidecar, &a.out_dir.join("corruptions.jsonl"))?;
    let n_utts: usize = corpus.iter().map(|t| t.utterances.len()).sum();
    println!("wrote {} transcripts ({n_utts} utterances) to {}", corpus.len(), a.out_dir.display());
    Ok(())
}

/// Reference transcripts keyed by id, in the order of the ASR file.
fn paired<'a>(reference: &'a [Transcript], ids: impl Iterator<Item = &'a str>) -> Result<Vec<&'a Transcript>> {
    let by_id: HashMap<&str, &Transcript> = reference.iter().map(|t| (t.encounter_id.as_str(), t)).collect();
    ids.map(|id| {
        by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("no reference transcript for encounter {id}")))
    })
    .collect()
}

fn cmd_align(a: AlignArgs) -> Result<()> {
    let reference = read_corpus(&a.reference)?;
    let asr = read_raw_asr(&a.asr)?;
    let refs = paired(&reference, asr.iter().map(|r| r.encounter_id.as_str()))?;
    let dumps: Vec<AlignmentDump> = refs
        .iter()
        .zip(&asr)
        .map(|(t, r)| AlignmentDump::build(&r.encounter_id, &t.joined_text(), &r.text))
        .collect();
    match &a.out {
        Some(p) => write_jsonl(&dumps, p),
        None => {
            let mut out = std::io::stdout().lock();
            for d in &dumps {
                let line = serde_json::to_string(d).map_err(|e| Error::InvalidInput(e.to_string()))?;
                writeln!(out, "{line}").map_err(io_err(Path::new("<stdout>")))?;
            }
            Ok(())
        }
    }
}

fn cmd_project(ctx: &Ctx, a: ProjectArgs) -> Result<()> {
    let base = ProjectConfig {
        speaker_norm: match a.speaker_norm {
            NormArg::L1 => SpeakerNorm::L1,
            NormArg::L2 => SpeakerNorm::L2,
        },
    };
    let cfg = ctx.config.overlay("project", base)?;
    let reference = read_corpus(&a.reference)?;
    let asr = read_raw_asr(&a.asr)?;
    let refs = paired(&reference, asr.iter().map(|r| r.encounter_id.as_str()))?;
    let projected = refs
        .iter()
        .zip(&asr)
        .map(|(t, r)| project_corpus(t, &r.text, &r.turn_ranges(), &cfg))
        .collect::<Result<Vec<_>>>()?;
    write_corpus(&projected, &a.out)?;
    println!("projected {} transcripts to {}", projected.len(), a.out.display());
    Ok(())
}

fn load_labeled(paths: &[PathBuf], opts: &TrainOptions) -> Result<Vec<LabeledTranscript>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(label_corpus(&read_corpus(p)?, &opts.preprocess));
    }
    Ok(out)
}

fn cmd_train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let kind: ModelKind = a.variant.parse()?;
    if a.with_asr && a.asr.is_empty() {
        return Err(Error::InvalidInput("--with-asr needs at least one --asr corpus".into()));
    }
    let mut base = TrainOptions {
        seed: ctx.seed,
        with_asr: a.with_asr,
        ..TrainOptions::default()
    };
    if let Some(e) = a.epochs {
        base.train.epochs = e;
    }
    if let Some(lr) = a.lr {
        base.train.lr = lr;
    }
    if let Some(d) = a.dim {
        base.net.dim = d;
    }
    let mut opts = ctx.config.overlay("train", base)?;
    // an epoch count without an explicit schedule keeps the schedule's tail value
    if !ctx.config.has("train.train.dropout_schedule") {
        let t = &mut opts.train;
        let last = *t.dropout_schedule.last().expect("default schedule is non-empty");
        t.dropout_schedule.resize(t.epochs, last);
    }
    let mut data = load_labeled(&a.train, &opts)?;
    if opts.with_asr {
        data.extend(load_labeled(&a.asr, &opts)?);
    }
    let t0 = Instant::now();
    let (model, report) = train_model(kind, &data, &opts)?;
    model.save(&a.out)?;
    if let (Some(p), Some(r)) = (&a.report, &report) {
        write_json(r, p)?;
    }
    println!(
        "trained {} on {} transcripts in {:.1}s -> {}",
        kind.display_name(),
        data.len(),
        t0.elapsed().as_secs_f64(),
        a.out.display()
    );
    Ok(())
}

fn parse_test(spec: &str) -> Result<(String, PathBuf)> {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(Error::InvalidInput(format!("--test expects NAME=PATH, got {spec:?}"))),
    }
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    if !a.oracle && a.models.is_empty() {
        return Err(Error::InvalidInput("give at least one --model or --oracle".into()));
    }
    let tests = a.tests.iter().map(|s| parse_test(s)).collect::<Result<Vec<_>>>()?;
    let models = a.models.iter().map(ModelFile::load).collect::<Result<Vec<_>>>()?;
    let mut rows: [Vec<ResultRow>; 2] = Default::default();
    for (name, path) in &tests {
        let transcripts = read_corpus(path)?;
        if a.oracle {
            let data = label_corpus(&transcripts, &Default::default());
            let s = oracle_scores(&data);
            for (k, ev) in evaluate_scores(&s, &s, &data)?.into_iter().enumerate() {
                rows[k].push(ResultRow {
                    test_set: name.clone(),
                    model: "oracle".into(),
                    with_asr: false,
                    uncalibrated: ev.uncalibrated,
                    calibrated: ev.calibrated,
                });
            }
        }
        for m in &models {
            let data = label_corpus(&transcripts, &m.preprocess);
            for (k, ev) in evaluate_model(m, &data)?.into_iter().enumerate() {
                rows[k].push(ResultRow {
                    test_set: name.clone(),
                    model: m.kind.display_name().into(),
                    with_asr: m.with_asr,
                    uncalibrated: ev.uncalibrated,
                    calibrated: ev.calibrated,
                });
            }
        }
    }
    let mut out = String::new();
    for (task, r) in Task::BOTH.iter().zip(&rows) {
        let title = match task {
            Task::Soap => "SOAP section classification",
            Task::Speaker => "Speaker classification",
        };
        out.push_str(&render_metric_table(title, r));
        out.push('\n');
        out.push_str(&render_per_class_table(&format!("{title}: per-class F1"), &task.class_names(), r));
        out.push('\n');
    }
    print!("{out}");
    if let Some(p) = &a.json {
        #[derive(Serialize)]
        struct EvalJson<'a> {
            soap: &'a [ResultRow],
            speaker: &'a [ResultRow],
        }
        write_json(
            &EvalJson {
                soap: &rows[0],
                speaker: &rows[1],
            },
            p,
        )?;
    }
    Ok(())
}

fn cmd_irr(a: IrrArgs) -> Result<()> {
    let pairs = pair_notes(read_notes(&a.notes_a)?, read_notes(&a.notes_b)?)?;
    let counts: HashMap<String, usize> = read_corpus(&a.transcripts)?
        .into_iter()
        .map(|t| (t.encounter_id, t.utterances.len()))
        .collect();
    let report = irr_report(&pairs, &counts)?;
    print!("{}", report.render());
    if let Some(p) = &a.json {
        write_json(&report, p)?;
    }
    Ok(())
}

#[allow(dead_code)]
fn read_sidecar(path: &Path) -> Result<Vec<CorruptionSidecar>> {
    read_jsonl(path)
}
