//! The `emphadet` command line.
//!
//! ```text
//! emphadet analyze --query q.wav --reference r.wav --transcript "i did not take your bag"
//! emphadet segment --input q.wav
//! emphadet synth --input r.wav --transcript "..." --word-index 3 --pitch-hz 100 --out q.wav
//! emphadet eval --manifest data/manifest.json
//! emphadet serve --port 8080 --static-dir crates/wasm/www
//! ```
//!
//! Exit codes: 0 success, 1 usage error, 2 data or provider error.

pub mod service;
pub mod settings;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use emphadet::audio_io::condition_with;
use emphadet::corpus::{write_fixture_corpus, CorpusOptions};
use emphadet::perturb::{apply, word_segments};
use emphadet::{
    analyze, detect_segments, evaluate, load_manifest, read_wav, rms_envelope, tokenize, write_wav, AnalysisReport,
    EmphasisLabel, ManifestEntry, PerturbationKind, ReferenceProvider, UtteranceKey,
};
use thiserror::Error;

use settings::ConfigFlags;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<emphadet::Error> for CliError {
    fn from(e: emphadet::Error) -> Self {
        match e {
            emphadet::Error::InvalidConfig(_) | emphadet::Error::InvalidPerturbation(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "emphadet", version, about = "Detect emphasized words by comparing speech against a neutral rendition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Label every word of a query utterance as none, pitch or skew
    Analyze(AnalyzeArgs),
    /// Print detected word boundaries as CSV
    Segment(SegmentArgs),
    /// Write a copy of a recording with one word perturbed
    Synth(SynthArgs),
    /// Score a labeled manifest
    Eval(EvalArgs),
    /// Run the HTTP analysis service
    Serve(ServeArgs),
    /// Generate a synthetic labeled fixture corpus
    Corpus(CorpusArgs),
}

#[derive(Debug, Clone, Default, Args)]
struct ProviderArgs {
    /// Fixture tree with <speaker>/<utterance>.ref.wav and .txt files
    #[arg(long, value_name = "DIR", conflicts_with_all = ["stt_url", "tts_url"])]
    fixture_root: Option<PathBuf>,
    /// Remote speech-to-text endpoint
    #[arg(long, value_name = "URL", requires = "tts_url")]
    stt_url: Option<String>,
    /// Remote text-to-speech endpoint
    #[arg(long, value_name = "URL", requires = "stt_url")]
    tts_url: Option<String>,
    #[arg(long, value_name = "MS", default_value_t = 10_000)]
    timeout_ms: u64,
}

impl ProviderArgs {
    fn provider(&self) -> Option<ReferenceProvider> {
        if let Some(root) = &self.fixture_root {
            return Some(ReferenceProvider::fixture(root));
        }
        match (&self.stt_url, &self.tts_url) {
            (Some(stt), Some(tts)) => Some(ReferenceProvider::remote(stt, tts, self.timeout_ms)),
            _ => None,
        }
    }
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long, value_name = "WAV")]
    query: PathBuf,
    /// Neutral rendition of the same text; omit to ask the provider for one
    #[arg(long, value_name = "WAV", required_unless_present = "speaker")]
    reference: Option<PathBuf>,
    /// Speaker whose voice the provider renders the reference in
    #[arg(long)]
    speaker: Option<String>,
    /// Utterance id for fixture lookups; defaults to the query file name
    #[arg(long)]
    utterance: Option<String>,
    /// Transcript; omit to ask the provider
    #[arg(long)]
    transcript: Option<String>,
    #[command(flatten)]
    provider: ProviderArgs,
    #[command(flatten)]
    config: ConfigFlags,
    /// Print the machine-readable report
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[arg(long, value_name = "WAV")]
    input: PathBuf,
    /// Merge or split detections to this many words
    #[arg(long, value_name = "K")]
    words: Option<usize>,
    #[command(flatten)]
    config: ConfigFlags,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("kind").required(true).args(["pitch_hz", "skew"])))]
#[command(group(clap::ArgGroup::new("count").required(true).args(["transcript", "words"])))]
struct SynthArgs {
    #[arg(long, value_name = "WAV")]
    input: PathBuf,
    /// Transcript of the input; its token count fixes the word count
    #[arg(long)]
    transcript: Option<String>,
    /// Word count, when no transcript is given
    #[arg(long, value_name = "K")]
    words: Option<usize>,
    #[arg(long, value_name = "I")]
    word_index: usize,
    /// Shift the word's spectrum by this many Hz
    #[arg(long, value_name = "HZ", allow_hyphen_values = true)]
    pitch_hz: Option<f64>,
    /// Frequency-modulate the word: peak deviation and rate in Hz
    #[arg(long, value_name = "DEV,RATE", value_parser = parse_skew)]
    skew: Option<(f64, f64)>,
    #[arg(long, value_name = "MS", default_value_t = emphadet::perturb::DEFAULT_CROSSFADE_MS)]
    crossfade_ms: f64,
    #[arg(long, value_name = "WAV")]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigFlags,
}

fn parse_skew(text: &str) -> Result<(f64, f64), String> {
    let (dev, rate) = text.split_once(',').ok_or("expected DEV,RATE")?;
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    Ok((parse(dev)?, parse(rate)?))
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    #[command(flatten)]
    config: ConfigFlags,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 4)]
    threads: usize,
    /// Directory served for GET requests outside /v1
    #[arg(long, value_name = "DIR")]
    static_dir: Option<PathBuf>,
    #[command(flatten)]
    provider: ProviderArgs,
    #[command(flatten)]
    config: ConfigFlags,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, value_name = "HZ", default_value_t = CorpusOptions::default().pitch_delta_hz)]
    pitch_hz: f64,
    #[arg(long, value_name = "DEV,RATE", value_parser = parse_skew)]
    skew: Option<(f64, f64)>,
    #[arg(long, default_value_t = CorpusOptions::default().seed)]
    seed: u64,
}

/// Runs the command line with process stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Analyze(args) => cmd_analyze(args, out),
        Command::Segment(args) => cmd_segment(args, out),
        Command::Synth(args) => cmd_synth(args, out),
        Command::Eval(args) => cmd_eval(args, out),
        Command::Serve(args) => cmd_serve(args, out),
        Command::Corpus(args) => cmd_corpus(args, out),
    }
}

/// Resolves the layered config, printing it first when asked.
fn layered(flags: &ConfigFlags, out: &mut dyn Write) -> Result<emphadet::AnalysisConfig, CliError> {
    let layered = flags.resolve()?;
    if flags.show_config {
        write!(out, "{}", layered.describe())?;
    }
    Ok(layered.config)
}

fn load(path: &Path, config: &emphadet::AnalysisConfig) -> Result<emphadet::AudioBuffer, CliError> {
    Ok(condition_with(&read_wav(path)?, &config.segmentation)?)
}

fn cmd_analyze(args: AnalyzeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = layered(&args.config, out)?;
    let query = load(&args.query, &config)?;
    let from_path = UtteranceKey::from_query_path(&args.query);
    let key = UtteranceKey::new(
        args.speaker.clone().or_else(|| from_path.as_ref().map(|k| k.speaker_id.clone())).unwrap_or_default(),
        args.utterance.clone().or_else(|| from_path.as_ref().map(|k| k.utterance_id.clone())).unwrap_or_default(),
    );
    let provider = args.provider.provider();
    let need_provider = || {
        provider.clone().ok_or_else(|| {
            CliError::Usage("a transcript and reference are needed, or --fixture-root / --stt-url and --tts-url".into())
        })
    };
    let tokens = match &args.transcript {
        Some(text) => tokenize(text),
        None => need_provider()?.transcribe(&query, &key)?,
    };
    if tokens.is_empty() {
        return Err(CliError::Usage("transcript has no words".into()));
    }
    let reference = match &args.reference {
        Some(path) => load(path, &config)?,
        None => need_provider()?.synthesize_reference(&tokens, &key)?,
    };
    let report = analyze(&query, &reference, &tokens, &config)?;
    if args.json {
        writeln!(out, "{}", report.to_json())?;
    } else {
        write!(out, "{}", pretty(&report))?;
    }
    Ok(())
}

fn pretty(report: &AnalysisReport) -> String {
    let mut text = format!("{}\n\n", report.marked_transcript());
    text.push_str(&format!("{:>3}  {:<14} {:<6} {:>10} {:>8}\n", "#", "word", "label", "lag_hz", "peak"));
    for w in &report.words {
        let label = match w.label {
            EmphasisLabel::None => "-".to_string(),
            other => other.as_str().to_uppercase(),
        };
        text.push_str(&format!("{:>3}  {:<14} {:<6} {:>10.1} {:>8.3}\n", w.index, w.token, label, w.peak_lag_hz, w.peak_value));
    }
    if report.alignment_adjusted {
        text.push_str("note: detected words were merged or split to match the transcript\n");
    }
    text
}

fn cmd_segment(args: SegmentArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = layered(&args.config, out)?;
    let audio = load(&args.input, &config)?;
    let segments = match args.words {
        Some(k) => word_segments(&audio, k, &config.segmentation)?,
        None => detect_segments(&rms_envelope(&audio, &config.segmentation)?, &config.segmentation)?,
    };
    let rate = audio.sample_rate();
    writeln!(out, "index,start_s,end_s,peak_rms")?;
    for (i, s) in segments.iter().enumerate() {
        writeln!(out, "{i},{:.4},{:.4},{:.6}", s.start_s(rate), s.end_s(rate), s.peak_rms)?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = layered(&args.config, out)?;
    let audio = load(&args.input, &config)?;
    let count = match (&args.transcript, args.words) {
        (Some(text), _) => tokenize(text).len(),
        (None, Some(k)) => k,
        (None, None) => unreachable!("clap requires one of them"),
    };
    if args.word_index >= count {
        return Err(CliError::Usage(format!("--word-index {} but there are {count} words", args.word_index)));
    }
    let kind = match (args.pitch_hz, args.skew) {
        (Some(delta_hz), _) => PerturbationKind::PitchShift { delta_hz },
        (None, Some((deviation_hz, rate_hz))) => PerturbationKind::Skew { deviation_hz, rate_hz },
        (None, None) => unreachable!("clap requires one of them"),
    };
    let segments = word_segments(&audio, count, &config.segmentation)?;
    let query = apply(&audio, &segments[args.word_index], &kind, args.crossfade_ms)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_wav(&query, &args.out)?;
    let key = UtteranceKey::from_query_path(&args.out).unwrap_or_else(|| UtteranceKey::new("", ""));
    let row = ManifestEntry {
        speaker_id: key.speaker_id,
        utterance_id: key.utterance_id,
        query_path: args.out.display().to_string(),
        reference_path: args.input.display().to_string(),
        transcript: args.transcript.unwrap_or_default(),
        emphasized_indices: vec![args.word_index],
    };
    writeln!(out, "{}", serde_json::to_string(&row).expect("manifest row serializes"))?;
    Ok(())
}

fn cmd_eval(args: EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = layered(&args.config, out)?;
    let manifest = load_manifest(&args.manifest)?;
    let outcome = evaluate(&manifest, &config)?;
    if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&outcome).expect("outcome serializes"))?;
    } else {
        write!(out, "{}", outcome.table())?;
        for reason in &outcome.skipped_entries {
            writeln!(out, "skipped    {reason}")?;
        }
    }
    Ok(())
}

fn cmd_serve(args: ServeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = layered(&args.config, out)?;
    let service = service::Service { config, provider: args.provider.provider(), static_dir: args.static_dir };
    let handle = service::start(service, &format!("{}:{}", args.host, args.port), args.threads).map_err(CliError::Data)?;
    writeln!(out, "listening on http://{}", handle.addr)?;
    out.flush()?;
    handle.join();
    Ok(())
}

fn cmd_corpus(args: CorpusArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let defaults = CorpusOptions::default();
    let (skew_deviation_hz, skew_rate_hz) = args.skew.unwrap_or((defaults.skew_deviation_hz, defaults.skew_rate_hz));
    let options = CorpusOptions { pitch_delta_hz: args.pitch_hz, skew_deviation_hz, skew_rate_hz, seed: args.seed };
    let manifest = write_fixture_corpus(&args.out, &options)?;
    writeln!(out, "{}", manifest.display())?;
    Ok(())
}
