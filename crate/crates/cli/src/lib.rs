//! Command-line front end for the intonation toolkit.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use intonation::classifier::{
    checkpoint_json, gradient_check, history_csv, intonation_lookup, load_checkpoint,
    nearest_intonation, predict, train, TokenEmbedder, TrainConfig,
};
use intonation::contour::{
    duration_for_text, make_synthetic_dataset, render_contour, tone_from_contour,
    write_synthetic_corpus, ContourSpec, SyntheticConfig, ToneConfig,
};
use intonation::corpus::{
    corpus_stats, parse_manifest, strip_end_punctuation, SentenceType, Utterance,
};
use intonation::metrics::{
    batch_csv, detect_rising, evaluate_batch, summarize, BatchItem, EvalConfig, MetricsError,
    RiseConfig, DEFAULT_DEVIATION_TOL,
};
use intonation::pitch::{extract_f0, PitchConfig};
use intonation::signal::{load_audio, write_audio, SpectralConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
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

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "intonation",
    version,
    about = "Sentence-type aware intonation toolkit"
)]
pub struct Cli {
    /// Worker threads for parallel stages (default: one per core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score hypothesis audio against references: per-utterance CSV and per-class JSON summary.
    Eval(EvalArgs),
    /// Train the sentence-type classifier from a manifest.
    Train(TrainArgs),
    /// Predict sentence types for texts or a manifest.
    Classify(ClassifyArgs),
    /// Render intonation for a sentence and self-check the boundary rise.
    Say(SayArgs),
    /// Extract an F0 track from a WAV file.
    F0(F0Args),
    /// Generate a toy-grammar corpus with rendered audio.
    SynthCorpus(SynthArgs),
    /// Class counts and ratios of a manifest.
    Stats(StatsArgs),
    /// Finite-difference check of the classifier gradients.
    CheckGrad(CheckGradArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SpectralArgs {
    #[arg(long, default_value_t = SpectralConfig::default().frame_length)]
    pub frame_length: usize,
    #[arg(long, default_value_t = SpectralConfig::default().hop_length)]
    pub hop_length: usize,
    #[arg(long, default_value_t = SpectralConfig::default().fft_size)]
    pub fft_size: usize,
    #[arg(long, default_value_t = SpectralConfig::default().mel_bands)]
    pub mel_bands: usize,
    #[arg(long, default_value_t = SpectralConfig::default().fmin)]
    pub mel_fmin: f64,
    #[arg(long, default_value_t = SpectralConfig::default().fmax)]
    pub mel_fmax: f64,
    #[arg(long, default_value_t = SpectralConfig::default().cepstral_order)]
    pub cepstral_order: usize,
}

impl SpectralArgs {
    pub fn config(&self) -> SpectralConfig {
        SpectralConfig {
            frame_length: self.frame_length,
            hop_length: self.hop_length,
            fft_size: self.fft_size,
            mel_bands: self.mel_bands,
            fmin: self.mel_fmin,
            fmax: self.mel_fmax,
            cepstral_order: self.cepstral_order,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PitchArgs {
    /// Lower bound of the F0 search range (Hz).
    #[arg(long, default_value_t = PitchConfig::default().fmin)]
    pub f0_min: f64,
    /// Upper bound of the F0 search range (Hz).
    #[arg(long, default_value_t = PitchConfig::default().fmax)]
    pub f0_max: f64,
    #[arg(long, default_value_t = PitchConfig::default().threshold)]
    pub yin_threshold: f64,
}

impl PitchArgs {
    pub fn config(&self, spectral: &SpectralConfig) -> PitchConfig {
        PitchConfig {
            fmin: self.f0_min,
            fmax: self.f0_max,
            threshold: self.yin_threshold,
            ..PitchConfig::for_spectral(spectral)
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RiseArgs {
    #[arg(long, default_value_t = RiseConfig::default().tail_fraction)]
    pub tail_fraction: f64,
    #[arg(long, default_value_t = RiseConfig::default().rise_ratio_threshold)]
    pub rise_threshold: f64,
    #[arg(long, default_value_t = RiseConfig::default().min_voiced_tail)]
    pub min_voiced_tail: usize,
}

impl RiseArgs {
    pub fn config(&self) -> Result<RiseConfig, CliError> {
        let cfg = RiseConfig {
            tail_fraction: self.tail_fraction,
            rise_ratio_threshold: self.rise_threshold,
            min_voiced_tail: self.min_voiced_tail,
        };
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Manifest listing the utterances to score.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub ref_dir: PathBuf,
    #[arg(long)]
    pub hyp_dir: PathBuf,
    #[arg(long)]
    pub out_csv: PathBuf,
    #[arg(long)]
    pub out_json: PathBuf,
    /// Relative F0 deviation counted as a gross pitch error.
    #[arg(long, default_value_t = DEFAULT_DEVIATION_TOL)]
    pub deviation_tol: f64,
    #[command(flatten)]
    pub spectral: SpectralArgs,
    #[command(flatten)]
    pub pitch: PitchArgs,
    #[command(flatten)]
    pub rise: RiseArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output checkpoint (JSON).
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output per-epoch loss/accuracy CSV.
    #[arg(long)]
    pub history: PathBuf,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    /// Loss weights for sta,que,decq.
    #[arg(long, value_delimiter = ',', default_value = "1,10,20")]
    pub class_weights: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep token embeddings fixed during training.
    #[arg(long)]
    pub freeze_embeddings: bool,
    #[arg(long, default_value_t = TrainConfig::default().dim)]
    pub dim: usize,
    #[arg(long, default_value_t = TrainConfig::default().attn_dim)]
    pub attn_dim: usize,
    #[arg(long, default_value_t = TrainConfig::default().intonation_dim)]
    pub intonation_dim: usize,
    /// Pre-computed token embeddings (TSV: token, then vector components).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Add punctuation-stripped copies; stripped declarative questions are labeled statements.
    #[arg(long)]
    pub augment_strip_punct: bool,
}

impl TrainArgs {
    pub fn config(&self) -> Result<TrainConfig, CliError> {
        let class_weights: [f64; 3] =
            self.class_weights.as_slice().try_into().map_err(|_| {
                CliError::Usage("--class-weights needs exactly three values".into())
            })?;
        let cfg = TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            class_weights,
            seed: self.seed,
            freeze_embedder: self.freeze_embeddings,
            dim: self.dim,
            attn_dim: self.attn_dim,
            intonation_dim: self.intonation_dim,
        };
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Classify every utterance of a manifest and report accuracy.
    #[arg(long, conflicts_with = "texts")]
    pub manifest: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ContourArgs {
    #[arg(long, default_value_t = ContourSpec::default().base_f0)]
    pub base_f0: f64,
    /// Hz per second.
    #[arg(long, default_value_t = ContourSpec::default().declination, allow_hyphen_values = true)]
    pub declination: f64,
    /// Seconds (default: derived from the text length).
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = ContourSpec::default().rise_onset_fraction)]
    pub rise_onset: f64,
    #[arg(long, default_value_t = ContourSpec::default().rise_ratio)]
    pub rise_ratio: f64,
    /// Gaussian F0 jitter standard deviation (Hz).
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ToneArgs {
    #[arg(long, default_value_t = ToneConfig::default().sample_rate)]
    pub sample_rate: u32,
    #[arg(long, default_value_t = ToneConfig::default().harmonics)]
    pub harmonics: usize,
}

impl ToneArgs {
    pub fn config(&self, spectral: &SpectralConfig) -> ToneConfig {
        ToneConfig {
            sample_rate: self.sample_rate,
            harmonics: self.harmonics,
            frame_length: spectral.frame_length,
            ..ToneConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SayArgs {
    pub text: String,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Use this sentence type instead of the classifier prediction.
    #[arg(long, value_parser = parse_label)]
    pub label: Option<SentenceType>,
    /// Output WAV.
    #[arg(long)]
    pub out: PathBuf,
    /// Output JSON report (default: the WAV path with a .json extension).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub contour: ContourArgs,
    #[command(flatten)]
    pub tone: ToneArgs,
    #[command(flatten)]
    pub spectral: SpectralArgs,
    #[command(flatten)]
    pub pitch: PitchArgs,
    #[command(flatten)]
    pub rise: RiseArgs,
}

fn parse_label(s: &str) -> Result<SentenceType, String> {
    s.parse::<SentenceType>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct F0Args {
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub spectral: SpectralArgs,
    #[command(flatten)]
    pub pitch: PitchArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gaussian F0 jitter standard deviation (Hz).
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    #[arg(long, default_value_t = ContourSpec::default().rise_onset_fraction)]
    pub rise_onset: f64,
    #[arg(long, default_value_t = ContourSpec::default().rise_ratio)]
    pub rise_ratio: f64,
    /// Render all utterances without a boundary rise.
    #[arg(long)]
    pub flat: bool,
    #[arg(long, default_value_t = SpectralConfig::default().frame_length)]
    pub frame_length: usize,
    #[arg(long, default_value_t = SpectralConfig::default().hop_length)]
    pub hop_length: usize,
    #[command(flatten)]
    pub tone: ToneArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CheckGradArgs {
    #[arg(long, default_value_t = 50)]
    pub configurations: usize,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match cli.jobs {
        Some(0) => Err(CliError::Usage("--jobs must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(data)?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Eval(a) => cmd_eval(a, cli.jobs),
        Command::Train(a) => cmd_train(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Say(a) => cmd_say(a),
        Command::F0(a) => cmd_f0(a),
        Command::SynthCorpus(a) => cmd_synth(a),
        Command::Stats(a) => cmd_stats(a),
        Command::CheckGrad(a) => cmd_check_grad(a),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(data)?;
    s.push('\n');
    Ok(s)
}

fn load_utterances(path: &Path) -> Result<Vec<Utterance>, CliError> {
    parse_manifest(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn audio_rel(u: &Utterance) -> PathBuf {
    u.audio_path
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.wav", u.id)))
}

pub fn cmd_eval(a: &EvalArgs, jobs: Option<usize>) -> Result<(), CliError> {
    let spectral = a.spectral.config();
    let cfg = EvalConfig {
        spectral,
        pitch: a.pitch.config(&spectral),
        rise: a.rise.config()?,
        deviation_tol: a.deviation_tol,
    };
    if !(cfg.deviation_tol > 0.0) {
        return Err(CliError::Usage("--deviation-tol must be positive".into()));
    }
    let utts = load_utterances(&a.manifest)?;
    let mut items = Vec::with_capacity(utts.len());
    for u in &utts {
        let rel = audio_rel(u);
        let item = BatchItem {
            id: u.id.clone(),
            class: u.label,
            reference: a.ref_dir.join(&rel),
            hypothesis: a.hyp_dir.join(&rel),
        };
        for (side, path) in [
            ("reference", &item.reference),
            ("hypothesis", &item.hypothesis),
        ] {
            if !path.is_file() {
                return Err(CliError::Data(format!(
                    "{}: missing {side} {}",
                    u.id,
                    path.display()
                )));
            }
        }
        items.push(item);
    }
    let rows = evaluate_batch(&items, &cfg).map_err(|e| match e {
        MetricsError::Item { .. } => data(e),
        other => data(format!("evaluation failed: {other}")),
    })?;
    let summary = summarize(&rows);
    let report = json!({
        "command": "eval",
        "manifest": a.manifest,
        "ref_dir": a.ref_dir,
        "hyp_dir": a.hyp_dir,
        "jobs": jobs,
        "config": cfg,
        "summary": summary,
    });
    write_file(&a.out_csv, &batch_csv(&rows))?;
    write_file(&a.out_json, &to_json(&report)?)?;
    log::info!("evaluated {} utterances", rows.len());
    Ok(())
}

pub fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let cfg = a.config()?;
    let utts = load_utterances(&a.manifest)?;
    let mut dataset: Vec<(String, SentenceType)> =
        utts.iter().map(|u| (u.text.clone(), u.label)).collect();
    if a.augment_strip_punct {
        let stripped = strip_end_punctuation(&utts);
        dataset.extend(stripped.utterances.into_iter().map(|u| (u.text, u.label)));
    }
    let embedder = match &a.embeddings {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            Some(TokenEmbedder::from_tsv(&text).map_err(data)?)
        }
        None => None,
    };
    let trained = train(&dataset, &cfg, embedder).map_err(data)?;
    let config = json!({
        "train": cfg,
        "augment_strip_punct": a.augment_strip_punct,
        "pretrained_embeddings": a.embeddings.is_some(),
        "examples": dataset.len(),
    });
    let checkpoint = checkpoint_json(&trained.params, Some(config)).map_err(data)?;
    write_file(&a.checkpoint, &checkpoint)?;
    write_file(&a.history, &history_csv(&trained.history))?;
    if let Some(last) = trained.history.last() {
        println!(
            "{}",
            json!({"epochs": last.epoch, "loss": last.loss, "train_accuracy": last.accuracy, "examples": dataset.len()})
        );
    }
    Ok(())
}

pub fn cmd_classify(a: &ClassifyArgs) -> Result<(), CliError> {
    let params = load_checkpoint(&a.checkpoint).map_err(data)?;
    let output = if let Some(manifest) = &a.manifest {
        let utts = load_utterances(manifest)?;
        let mut out = String::from("id,label,predicted,p_sta,p_que,p_decq\n");
        let mut correct = 0;
        for u in &utts {
            let p =
                predict(&u.text, &params).map_err(|e| CliError::Data(format!("{}: {e}", u.id)))?;
            correct += usize::from(p.label == u.label);
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6}\n",
                u.id,
                u.label.label(),
                p.label.label(),
                p.probs[0],
                p.probs[1],
                p.probs[2]
            ));
        }
        if !utts.is_empty() {
            eprintln!(
                "accuracy {:.6} ({correct}/{})",
                correct as f64 / utts.len() as f64,
                utts.len()
            );
        }
        out
    } else {
        if a.texts.is_empty() {
            return Err(CliError::Usage("give texts or --manifest".into()));
        }
        let mut out = String::new();
        for text in &a.texts {
            let p = predict(text, &params).map_err(data)?;
            out.push_str(
                &serde_json::to_string(
                    &json!({"text": text, "label": p.label.label(), "probs": p.probs}),
                )
                .map_err(data)?,
            );
            out.push('\n');
        }
        out
    };
    match &a.out {
        Some(path) => write_file(path, &output),
        None => {
            print!("{output}");
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SayReport {
    pub text: String,
    pub label: SentenceType,
    /// `given` or `classifier`.
    pub source: String,
    pub probs: Option<Vec<f64>>,
    /// None when too few voiced frames to decide.
    pub rise_detected: Option<bool>,
    pub rise_ratio: Option<f64>,
    pub dropped_harmonics: usize,
    pub config: serde_json::Value,
}

pub fn cmd_say(a: &SayArgs) -> Result<(), CliError> {
    let spectral = a.spectral.config();
    let pitch = a.pitch.config(&spectral);
    let rise = a.rise.config()?;
    let tone_cfg = a.tone.config(&spectral);
    let spec = ContourSpec {
        base_f0: a.contour.base_f0,
        declination: a.contour.declination,
        duration: a
            .contour
            .duration
            .unwrap_or_else(|| duration_for_text(&a.text)),
        rise_onset_fraction: a.contour.rise_onset,
        rise_ratio: a.contour.rise_ratio,
        jitter_std: a.contour.jitter,
        jitter_seed: a.contour.seed,
        hop_seconds: spectral.hop_length as f64 / tone_cfg.sample_rate as f64,
    };
    spec.validate().map_err(usage)?;

    let params = load_checkpoint(&a.checkpoint).map_err(data)?;
    let (label, source, probs) = match a.label {
        Some(l) => (l, "given", None),
        None => {
            let p = predict(&a.text, &params).map_err(data)?;
            (p.label, "classifier", Some(p.probs))
        }
    };
    // The renderer is conditioned on the table entry, decoded back to its class.
    let condition = nearest_intonation(intonation_lookup(label, &params), &params);
    let track = render_contour(&spec, condition).map_err(data)?;
    let tone = tone_from_contour(&track, &tone_cfg).map_err(data)?;
    let measured = extract_f0(&tone.audio, &pitch).map_err(data)?;
    let verdict = match detect_rising(&measured, &rise) {
        Ok(v) => Some(v),
        Err(MetricsError::Undecidable { .. }) => None,
        Err(e) => return Err(data(e)),
    };
    let report = SayReport {
        text: a.text.clone(),
        label,
        source: source.into(),
        probs,
        rise_detected: verdict.map(|v| v.is_rising),
        rise_ratio: verdict.map(|v| v.rise_ratio),
        dropped_harmonics: tone.dropped_harmonics,
        config: json!({"contour": spec, "tone": tone_cfg, "spectral": spectral, "pitch": pitch, "rise": rise}),
    };
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(data)?;
    }
    write_audio(&a.out, &tone.audio).map_err(data)?;
    let report_path = a
        .report
        .clone()
        .unwrap_or_else(|| a.out.with_extension("json"));
    write_file(&report_path, &to_json(&report)?)?;
    println!("{}", serde_json::to_string(&json!({"label": label.label(), "source": source, "rise_detected": report.rise_detected})).map_err(data)?);
    Ok(())
}

pub fn cmd_f0(a: &F0Args) -> Result<(), CliError> {
    let spectral = a.spectral.config();
    let audio =
        load_audio(&a.input).map_err(|e| CliError::Data(format!("{}: {e}", a.input.display())))?;
    let track = extract_f0(&audio, &a.pitch.config(&spectral)).map_err(data)?;
    match &a.out {
        Some(path) => write_file(path, &track.to_csv()),
        None => {
            print!("{}", track.to_csv());
            Ok(())
        }
    }
}

pub fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    let spectral = SpectralConfig {
        frame_length: a.frame_length,
        hop_length: a.hop_length,
        ..SpectralConfig::default()
    };
    let cfg = SyntheticConfig {
        n_per_class: a.n_per_class,
        seed: a.seed,
        jitter_std: a.jitter,
        rise_onset_fraction: a.rise_onset,
        rise_ratio: a.rise_ratio,
        flat: a.flat,
        tone: a.tone.config(&spectral),
        hop_length: a.hop_length,
    };
    if a.n_per_class == 0 {
        return Err(CliError::Usage("--n-per-class must be positive".into()));
    }
    let items = make_synthetic_dataset(&cfg).map_err(usage)?;
    write_synthetic_corpus(&a.out_dir, &items).map_err(data)?;
    write_file(
        &a.out_dir.join("config.json"),
        &to_json(&json!({"command": "synth-corpus", "config": cfg}))?,
    )?;
    log::info!(
        "wrote {} utterances to {}",
        items.len(),
        a.out_dir.display()
    );
    Ok(())
}

pub fn cmd_stats(a: &StatsArgs) -> Result<(), CliError> {
    let utts = load_utterances(&a.manifest)?;
    print!("{}", to_json(&corpus_stats(&utts))?);
    Ok(())
}

pub fn cmd_check_grad(a: &CheckGradArgs) -> Result<(), CliError> {
    if a.configurations == 0 || !(a.step > 0.0) {
        return Err(CliError::Usage(
            "--configurations and --step must be positive".into(),
        ));
    }
    let report = gradient_check(a.configurations, a.step, a.seed).map_err(data)?;
    print!(
        "{}",
        to_json(&json!({"report": report, "tolerance": a.tolerance}))?
    );
    if report.max_relative_error >= a.tolerance {
        return Err(CliError::Data(format!(
            "max relative error {:.3e} exceeds {:.1e}",
            report.max_relative_error, a.tolerance
        )));
    }
    Ok(())
}
