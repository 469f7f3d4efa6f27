//! `classwatch`: build banks, train models, process sessions and review alerts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use classwatch_api::{load_pipeline, ApiConfig};
use classwatch_core::alert::{AlertStore, Judgment, ReviewVerdict};
use classwatch_core::demo;
use classwatch_core::detector::{annotate_bank, Detector, PinyinTable, DEFAULT_MAX_GAP};
use classwatch_core::linguistic::{extract_linguistic, SegmentationLexicon, SubjectLexicon};
use classwatch_core::prosodic::{extract_prosodic, ProsodicConfig};
use classwatch_core::quality::{
    ablation, assemble_features, evaluate, render_table, split, train, FeatureMode, LabeledDataset,
    LabeledExample, LogisticModel, TrainConfig,
};
use classwatch_core::session::load_session;
use classwatch_core::word_bank::{expand_seeds, EntrySource, EmbeddingTable, SourceHash, DEFAULT_K, DEFAULT_TAU};

#[derive(Debug, Parser)]
#[command(name = "classwatch", version, about = "Monitoring and alerting for recorded online classes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Banned-word bank tools.
    Bank {
        #[command(subcommand)]
        command: BankCommand,
    },
    /// Print detection hits for one session as JSON.
    Scan(ScanArgs),
    /// Print one session's feature vector (or a dataset line with --label).
    Extract(ExtractArgs),
    /// Train a quality model from a JSON-lines dataset.
    Train(TrainArgs),
    /// Score a model against a labelled dataset.
    Evaluate(EvaluateArgs),
    /// Train and evaluate every feature mode on one split.
    Ablate(AblateArgs),
    /// Process session manifests into the event log.
    Run(RunArgs),
    /// Print alerting accuracy and counts, as served at /metrics.
    Report(ReportArgs),
    /// Record a reviewer's judgment on an open alert.
    Verdict(VerdictArgs),
    /// Serve the HTTP API.
    Serve(ConfigArgs),
    /// Write a small synthetic corpus plus a config file.
    Demo { dir: PathBuf },
}

#[derive(Debug, Subcommand)]
enum BankCommand {
    /// Expand seed words with embedding neighbours.
    Expand(ExpandArgs),
}

#[derive(Debug, Args)]
struct ExpandArgs {
    /// One seed word per line; `#` starts a comment.
    #[arg(long)]
    seeds: PathBuf,
    /// Whitespace-separated text embeddings with a `count dim` header.
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(short, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    /// Fill in pinyin keys from this table.
    #[arg(long)]
    pinyin: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[arg(long)]
    bank: PathBuf,
    #[arg(long)]
    pinyin: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Benign words used to suppress homophone matches.
    #[arg(long)]
    segmentation: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_GAP)]
    gap: usize,
    /// Include suppressed candidates.
    #[arg(long)]
    all: bool,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    segmentation: PathBuf,
    #[arg(long)]
    subjects: PathBuf,
    #[arg(long, default_value = "combined")]
    mode: FeatureMode,
    /// 1 = good class, 0 = bad class.
    #[arg(long)]
    label: Option<u8>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Share of each class used for training.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct HyperArgs {
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    l2: f64,
    #[arg(long)]
    no_class_weighting: bool,
}

impl HyperArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            l2_lambda: self.l2,
            seed,
            class_weighting: !self.no_class_weighting,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "combined")]
    mode: FeatureMode,
    /// Train on the training part of a stratified split instead of all rows.
    #[arg(long)]
    holdout: bool,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "combined")]
    mode: FeatureMode,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Score only the test part of the split `train --holdout` used.
    #[arg(long)]
    holdout: bool,
    #[command(flatten)]
    split: SplitArgs,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Print rows as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML service config; CLASSWATCH_* variables override it.
    #[arg(long, default_value = "classwatch.toml")]
    config: PathBuf,
}

impl ConfigArgs {
    fn load(&self) -> Result<ApiConfig> {
        let mut config = ApiConfig::load(&self.config)?;
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, required = true, num_args = 1..)]
    manifest: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Read this event log instead of the configured one.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerdictArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    alert: String,
    #[arg(long)]
    reviewer: String,
    /// true_positive or false_positive
    #[arg(long)]
    judgment: String,
    #[arg(long, default_value = "")]
    note: String,
}

fn read_seeds(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn bank_expand(a: ExpandArgs) -> Result<()> {
    let seeds = read_seeds(&a.seeds)?;
    let table = EmbeddingTable::<f64>::load(&a.embeddings)?;
    let mut bank = expand_seeds(&seeds, &table, a.k, a.tau)?;
    bank.provenance = vec![SourceHash::of_file(&a.seeds)?, SourceHash::of_file(&a.embeddings)?];
    if let Some(p) = &a.pinyin {
        annotate_bank(&mut bank, &PinyinTable::load(p)?);
    }
    bank.save(&a.output)?;
    let expanded = bank.entries.iter().filter(|e| e.source == EntrySource::Expanded).count();
    eprintln!("{} entries ({expanded} expanded) written to {}", bank.len(), a.output.display());
    Ok(())
}

fn scan(a: ScanArgs) -> Result<()> {
    let bank = classwatch_core::word_bank::BannedWordBank::load(&a.bank)?;
    let table = PinyinTable::load(&a.pinyin)?;
    let seg = match &a.segmentation {
        Some(p) => SegmentationLexicon::load(p)?,
        None => SegmentationLexicon::default(),
    };
    let record = load_session(&a.manifest)?;
    let detector = Detector::new(&bank, table, seg, a.gap);
    let hits = if a.all {
        record
            .segments
            .iter()
            .enumerate()
            .flat_map(|(i, s)| detector.judge_segment(&record.session_id, i, s.role, &s.text))
            .collect()
    } else {
        detector.detect(&record)
    };
    println!("{}", serde_json::to_string_pretty(&hits)?);
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<()> {
    let record = load_session(&a.manifest)?;
    let seg = SegmentationLexicon::load(&a.segmentation)?;
    let subjects = SubjectLexicon::load(&a.subjects)?;
    let ling = extract_linguistic(&record, &seg, &subjects);
    let pros = extract_prosodic::<f64>(&record, &ProsodicConfig::default())?;
    let features = assemble_features(&record.session_id, &ling, &pros, a.mode)?;
    match a.label {
        None => println!("{}", serde_json::to_string_pretty(&features)?),
        Some(l @ (0 | 1)) => {
            let row = LabeledDataset::new(vec![LabeledExample { features, label: l == 1 }])?;
            print!("{}", row.to_jsonl());
        }
        Some(l) => bail!("label must be 0 or 1, got {l}"),
    }
    Ok(())
}

fn load_data(path: &Path, mode: FeatureMode) -> Result<LabeledDataset<f64>> {
    Ok(LabeledDataset::<f64>::load(path)?.project(mode)?)
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let data = load_data(&a.data, a.mode)?;
    let data = if a.holdout {
        split(&data, a.split.train_fraction, a.split.seed)?.0
    } else {
        data
    };
    let model = train(&data, &a.hyper.config(a.split.seed))?;
    model.save(&a.output)?;
    eprintln!(
        "trained {} on {} sessions; final loss {:.6}",
        a.mode.label(),
        data.len(),
        model.final_loss
    );
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let model = LogisticModel::<f64>::load(&a.model)?;
    let data = load_data(&a.data, a.mode)?;
    let data = if a.holdout {
        split(&data, a.split.train_fraction, a.split.seed)?.1
    } else {
        data
    };
    let report = evaluate(&model, &data, a.threshold)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let data = LabeledDataset::<f64>::load(&a.data)?;
    let rows = ablation(
        &data,
        &FeatureMode::ALL,
        &a.hyper.config(a.split.seed),
        a.threshold,
        a.split.train_fraction,
        a.split.seed,
    )?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        print!("{}", render_table(&rows));
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<ExitCode> {
    let config = a.config.load()?;
    let pipeline = load_pipeline(&config)?;
    let mut store = AlertStore::open(&config.event_log)?;
    let mut failed = 0;
    for m in &a.manifest {
        match pipeline.run_manifest(&mut store, m) {
            Ok(out) => println!(
                "{}\t{}\t{}",
                out.session_id,
                out.alert.as_ref().map_or("-", |x| x.alert_id.as_str()),
                if out.changed { "updated" } else { "unchanged" }
            ),
            Err(e) => {
                failed += 1;
                eprintln!("{}: {e}", m.display());
            }
        }
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn report(a: ReportArgs) -> Result<()> {
    let path = match a.log {
        Some(p) => p,
        None => a.config.load()?.event_log,
    };
    let store = AlertStore::open(&path)?;
    println!("{}", serde_json::to_string(&store.metrics())?);
    Ok(())
}

fn verdict(a: VerdictArgs) -> Result<()> {
    let config = a.config.load()?;
    let judgment: Judgment = serde_json::from_value(serde_json::Value::String(a.judgment.clone()))
        .with_context(|| format!("unknown judgment {:?}", a.judgment))?;
    if a.reviewer.trim().is_empty() {
        bail!("reviewer must not be empty");
    }
    let mut store = AlertStore::open(&config.event_log)?;
    let verdict = ReviewVerdict {
        alert_id: a.alert,
        reviewer_id: a.reviewer,
        judgment,
        note: a.note,
        reviewed_at: store.now(),
    };
    let alert = store.record_verdict(verdict)?;
    println!("{}", serde_json::to_string_pretty(&alert)?);
    Ok(())
}

fn demo_cmd(dir: &Path) -> Result<()> {
    let corpus = demo::write_corpus(dir, 10, &[2, 7])?;
    let config = "\
bank = \"bank.json\"
model = \"model.json\"
pinyin = \"pinyin.txt\"
segmentation = \"segmentation.txt\"
subjects = \"subjects.json\"
event_log = \"events.jsonl\"
";
    fs::write(dir.join("classwatch.toml"), config)?;
    eprintln!(
        "{} sessions under {} ({} planted); config at {}",
        corpus.manifests.len(),
        dir.display(),
        corpus.planted.join(", "),
        dir.join("classwatch.toml").display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bank {
            command: BankCommand::Expand(a),
        } => bank_expand(a).map(|_| ExitCode::SUCCESS),
        Command::Scan(a) => scan(a).map(|_| ExitCode::SUCCESS),
        Command::Extract(a) => extract(a).map(|_| ExitCode::SUCCESS),
        Command::Train(a) => train_cmd(a).map(|_| ExitCode::SUCCESS),
        Command::Evaluate(a) => evaluate_cmd(a).map(|_| ExitCode::SUCCESS),
        Command::Ablate(a) => ablate(a).map(|_| ExitCode::SUCCESS),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a).map(|_| ExitCode::SUCCESS),
        Command::Verdict(a) => verdict(a).map(|_| ExitCode::SUCCESS),
        Command::Serve(a) => a
            .load()
            .and_then(|config| {
                let rt = tokio::runtime::Runtime::new()?;
                Ok(rt.block_on(classwatch_api::serve(config))?)
            })
            .map(|_| ExitCode::SUCCESS),
        Command::Demo { dir } => demo_cmd(&dir).map(|_| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
