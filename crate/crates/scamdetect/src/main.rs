//! Command-line front end: disassembly, CFG dumps, featurization, dataset
//! tooling, obfuscation, training, evaluation, and robustness reports.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

use std::error::Error;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::exit;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use scamdetect::cfg::{build_cfg, export_cfg, ExportFormat};
use scamdetect::data::{
    dedup, fetch_code, load_jsonl, save_jsonl, split, synth_generate, DatasetRecord, FetchConfig,
    Label, Source, Split,
};
use scamdetect::disasm::{disassemble, Bytecode};
use scamdetect::features::{featurize, sample_from_json, sample_to_json};
use scamdetect::model::{train, ModelKind, ModelParams, TrainConfig};
use scamdetect::obfuscate::{obfuscate, ObfConfig, Pass};
use scamdetect::pipeline::{evaluate, robustness_report};

/// Static analysis for EVM bytecode: disassembly, control-flow recovery,
/// graph features, small graph classifiers, and semantics-preserving
/// obfuscation for robustness measurement.
#[derive(Parser)]
#[command(name = "scamdetect", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CfgFormat {
    Dot,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelArg {
    Benign,
    Phishing,
}

impl From<LabelArg> for Label {
    fn from(arg: LabelArg) -> Label {
        match arg {
            LabelArg::Benign => Label::Benign,
            LabelArg::Phishing => Label::Phishing,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Disassemble a hex bytecode file to offset/mnemonic/immediate lines
    Disasm {
        /// File containing hex-encoded bytecode (0x prefix optional)
        hexfile: PathBuf,
    },
    /// Recover and print the control-flow graph of a contract
    Cfg {
        hexfile: PathBuf,
        /// Output format
        #[arg(long, value_enum, default_value_t = CfgFormat::Dot)]
        format: CfgFormat,
    },
    /// Convert a JSONL corpus of labeled contracts into graph samples
    Featurize {
        /// Dataset records, one JSON object per line
        corpus: PathBuf,
        /// Output path for graph samples, one JSON object per line
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Drop duplicate contracts (minimal proxies, metadata-only variants)
    Dedup {
        input: PathBuf,
        output: PathBuf,
    },
    /// Generate a labeled synthetic corpus
    Synth {
        /// Number of benign records
        #[arg(long)]
        benign: usize,
        /// Number of phishing records
        #[arg(long)]
        phishing: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Assign train/val/test split tags, stratified by label
    Split {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        train: f64,
        #[arg(long, default_value_t = 0.1)]
        val: f64,
        #[arg(long, default_value_t = 0.1)]
        test: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fetch deployed bytecode for a list of addresses
    Fetch {
        /// File with one contract address per line
        #[arg(long)]
        addresses: PathBuf,
        /// Etherscan-compatible API endpoint
        #[arg(long)]
        endpoint: String,
        /// API key; falls back to the SCAMDETECT_API_KEY environment variable
        #[arg(long)]
        api_key: Option<String>,
        /// Label recorded on the fetched records
        #[arg(long, value_enum, default_value_t = LabelArg::Benign)]
        label: LabelArg,
        /// Output records path; stdout when omitted
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Apply semantics-preserving obfuscation passes to a contract
    Obfuscate {
        /// Comma-separated pass list: junk,reorder,substitute
        #[arg(long, required = true, value_delimiter = ',', value_parser = parse_pass)]
        passes: Vec<Pass>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Transformation intensity in (0, 1]
        #[arg(long, default_value_t = 0.5)]
        intensity: f64,
        input: PathBuf,
        output: PathBuf,
    },
    /// Train a classifier on a graph-sample corpus
    Train {
        /// Model kind: gcn|sage|gin|gat|tag|histogram
        #[arg(long, value_parser = parse_kind)]
        kind: ModelKind,
        /// Graph samples produced by featurize
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Adam learning rate
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
        /// Output path for the trained model JSON
        #[arg(short, long)]
        output: PathBuf,
        /// Optional path for the full training report (loss curve + model)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a trained model on a graph-sample corpus
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Metrics JSON path; stdout when omitted
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Measure accuracy drift under obfuscation for a model and a baseline
    Robustness {
        #[arg(long)]
        model: PathBuf,
        /// Baseline model compared under the same transformations
        #[arg(long)]
        baseline: PathBuf,
        /// Dataset records; only the test split is used when tags are present
        #[arg(long)]
        corpus: PathBuf,
        /// JSON array of obfuscation configs
        #[arg(long)]
        configs: PathBuf,
        /// Report JSON path; stdout when omitted
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn parse_pass(s: &str) -> Result<Pass, String> {
    s.parse()
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                exit(0);
            }
            eprint!("{err}");
            exit(1);
        }
    };
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err}");
        exit(2);
    }
}

type CliResult = Result<(), Box<dyn Error>>;

fn run(command: Command) -> CliResult {
    match command {
        Command::Disasm { hexfile } => cmd_disasm(&hexfile),
        Command::Cfg { hexfile, format } => cmd_cfg(&hexfile, format),
        Command::Featurize { corpus, output } => cmd_featurize(&corpus, &output),
        Command::Dedup { input, output } => cmd_dedup(&input, &output),
        Command::Synth { benign, phishing, seed, output } => {
            cmd_synth(benign, phishing, seed, &output)
        }
        Command::Split { input, output, train, val, test, seed } => {
            cmd_split(&input, &output, (train, val, test), seed)
        }
        Command::Fetch { addresses, endpoint, api_key, label, output } => {
            cmd_fetch(&addresses, &endpoint, api_key, label.into(), output.as_deref())
        }
        Command::Obfuscate { passes, seed, intensity, input, output } => {
            cmd_obfuscate(passes, seed, intensity, &input, &output)
        }
        Command::Train { kind, corpus, epochs, seed, lr, output, report } => {
            cmd_train(kind, &corpus, epochs, seed, lr, &output, report.as_deref())
        }
        Command::Eval { model, corpus, output } => cmd_eval(&model, &corpus, output.as_deref()),
        Command::Robustness { model, baseline, corpus, configs, output } => {
            cmd_robustness(&model, &baseline, &corpus, &configs, output.as_deref())
        }
    }
}

/// Writes to stdout, exiting quietly when the consumer closed the pipe
/// (e.g. `scamdetect cfg x.hex | head`).
fn print_out(text: &str) {
    use std::io::Write as _;
    let mut out = std::io::stdout().lock();
    if let Err(err) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        if err.kind() == std::io::ErrorKind::BrokenPipe {
            exit(0);
        }
        eprintln!("error: {err}");
        exit(2);
    }
}

fn read_bytecode(path: &Path) -> Result<Bytecode, Box<dyn Error>> {
    let text = fs::read_to_string(path)?;
    Ok(Bytecode::parse_hex(text.trim())?)
}

fn load_samples(path: &Path) -> Result<Vec<scamdetect::Sample>, Box<dyn Error>> {
    let text = fs::read_to_string(path)?;
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let sample = sample_from_json::<f64>(line)
            .map_err(|err| format!("{}:{}: {err}", path.display(), idx + 1))?;
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(format!("{}: contains no samples", path.display()).into());
    }
    Ok(samples)
}

fn load_model(path: &Path) -> Result<scamdetect::Model, Box<dyn Error>> {
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(ModelParams::from_json(&doc)?)
}

/// Writes pretty JSON to `output`, or stdout when no path is given.
fn emit_json(value: &serde_json::Value, output: Option<&Path>) -> CliResult {
    let text = serde_json::to_string_pretty(value)?;
    match output {
        Some(path) => fs::write(path, format!("{text}\n"))?,
        None => print_out(&format!("{text}\n")),
    }
    Ok(())
}

fn cmd_disasm(hexfile: &Path) -> CliResult {
    let code = read_bytecode(hexfile)?;
    let stream = disassemble(&code);
    let mut out = String::new();
    for instr in &stream.instructions {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            instr.offset,
            instr.spec.mnemonic,
            hex::encode(&instr.immediate)
        ));
    }
    print_out(&out);
    Ok(())
}

fn cmd_cfg(hexfile: &Path, format: CfgFormat) -> CliResult {
    let code = read_bytecode(hexfile)?;
    let stream = disassemble(&code);
    let cfg = build_cfg(&stream)?;
    let by = match format {
        CfgFormat::Dot => ExportFormat::Dot,
        CfgFormat::Json => ExportFormat::Json,
    };
    let text = export_cfg(&cfg, by);
    print_out(&text);
    if !text.ends_with('\n') {
        print_out("\n");
    }
    Ok(())
}

fn cmd_featurize(corpus: &Path, output: &Path) -> CliResult {
    let records = load_jsonl(corpus)?;
    let mut file = fs::File::create(output)?;
    let mut written = 0usize;
    let mut skipped = 0usize;
    for record in &records {
        // Per-record failures are reported and skipped; one bad record must
        // not abort the corpus.
        let sample = Bytecode::parse_hex(&record.bytecode)
            .map_err(|err| err.to_string())
            .and_then(|code| {
                featurize::<f64>(&code, record.label.as_u8(), record.address.as_str())
                    .map_err(|err| err.to_string())
            });
        match sample {
            Ok(sample) => {
                writeln!(file, "{}", sample_to_json(&sample))?;
                written += 1;
            }
            Err(reason) => {
                eprintln!("skipping {}: {reason}", record.address);
                skipped += 1;
            }
        }
    }
    eprintln!("featurized {written} of {} records ({skipped} skipped)", records.len());
    Ok(())
}

fn cmd_dedup(input: &Path, output: &Path) -> CliResult {
    let records = load_jsonl(input)?;
    let (kept, report) = dedup(&records);
    for dropped in &report.dropped {
        eprintln!("dropped {}: {}", dropped.address, dropped.reason);
    }
    save_jsonl(&kept, output)?;
    eprintln!("kept {} of {} records", report.kept, records.len());
    Ok(())
}

fn cmd_synth(benign: usize, phishing: usize, seed: u64, output: &Path) -> CliResult {
    if benign == 0 || phishing == 0 {
        return Err("each class needs at least one record".into());
    }
    let records = synth_generate(benign, phishing, seed);
    save_jsonl(&records, output)?;
    eprintln!("wrote {} records", records.len());
    Ok(())
}

fn cmd_split(input: &Path, output: &Path, ratios: (f64, f64, f64), seed: u64) -> CliResult {
    let mut records = load_jsonl(input)?;
    split(&mut records, ratios, seed)?;
    save_jsonl(&records, output)?;
    Ok(())
}

fn cmd_fetch(
    addresses: &Path,
    endpoint: &str,
    api_key: Option<String>,
    label: Label,
    output: Option<&Path>,
) -> CliResult {
    let key = api_key
        .or_else(|| std::env::var("SCAMDETECT_API_KEY").ok())
        .unwrap_or_default();
    let config = FetchConfig::new(endpoint, key);
    let text = fs::read_to_string(addresses)?;
    let mut records = Vec::new();
    let mut failed = 0usize;
    for line in text.lines() {
        let address = line.trim();
        if address.is_empty() || address.starts_with('#') {
            continue;
        }
        match fetch_code(address, &config) {
            Ok(code) => records.push(DatasetRecord {
                address: address.to_string(),
                bytecode: format!("0x{}", code.to_hex()),
                label,
                source: Source::Etherscan,
                split: None,
            }),
            Err(err) => {
                eprintln!("fetch failed for {address}: {err}");
                failed += 1;
            }
        }
    }
    if records.is_empty() && failed > 0 {
        return Err(format!("all {failed} fetches failed").into());
    }
    match output {
        Some(path) => save_jsonl(&records, path)?,
        None => {
            let mut lines = String::new();
            for record in &records {
                lines.push_str(&serde_json::to_string(record)?);
                lines.push('\n');
            }
            print_out(&lines);
        }
    }
    eprintln!("fetched {} of {} addresses", records.len(), records.len() + failed);
    Ok(())
}

fn cmd_obfuscate(
    passes: Vec<Pass>,
    seed: u64,
    intensity: f64,
    input: &Path,
    output: &Path,
) -> CliResult {
    let code = read_bytecode(input)?;
    let config = ObfConfig { intensity, passes, seed };
    let transformed = obfuscate(&code, &config)?;
    fs::write(output, format!("0x{}\n", transformed.to_hex()))?;
    Ok(())
}

fn cmd_train(
    kind: ModelKind,
    corpus: &Path,
    epochs: usize,
    seed: u64,
    lr: f64,
    output: &Path,
    report: Option<&Path>,
) -> CliResult {
    let samples = load_samples(corpus)?;
    let config = TrainConfig { epochs, learning_rate: lr, seed };
    let trained = train(kind, &samples, &config)?;
    emit_json(&trained.model.to_json(), Some(output))?;
    if let Some(path) = report {
        emit_json(&trained.to_json(), Some(path))?;
    }
    let final_loss = trained.loss.last().copied().unwrap_or(f64::NAN);
    eprintln!(
        "trained {kind} on {} samples for {epochs} epochs, final mean loss {final_loss:.6}",
        samples.len()
    );
    Ok(())
}

fn cmd_eval(model: &Path, corpus: &Path, output: Option<&Path>) -> CliResult {
    let params = load_model(model)?;
    let samples = load_samples(corpus)?;
    let metrics = evaluate(&params, &samples)?;
    emit_json(&serde_json::to_value(&metrics)?, output)
}

fn cmd_robustness(
    model: &Path,
    baseline: &Path,
    corpus: &Path,
    configs: &Path,
    output: Option<&Path>,
) -> CliResult {
    let params = load_model(model)?;
    let base = load_model(baseline)?;
    let records = load_jsonl(corpus)?;
    let configs: Vec<ObfConfig> = serde_json::from_str(&fs::read_to_string(configs)?)?;
    // When the corpus carries split tags, robustness is measured on the held
    // out test split only; an untagged corpus is used whole.
    let tagged = records.iter().any(|record| record.split.is_some());
    let test: Vec<DatasetRecord> = if tagged {
        records
            .into_iter()
            .filter(|record| record.split == Some(Split::Test))
            .collect()
    } else {
        records
    };
    let report = robustness_report(&params, &base, &test, &configs)?;
    emit_json(&serde_json::to_value(&report)?, output)
}
