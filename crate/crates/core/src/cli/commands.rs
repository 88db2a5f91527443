use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::{predict_split, run_experiment, subset_manifest, ExperimentConfig, PredictionFile};
use crate::augment::AugPolicy;
use crate::corpus::{build_feature_set, load_manifest, read_wav, synth_corpus, write_features, FeatureSidecar, Manifest, Split, SynthParams};
use crate::dsp::{FeatureKind, FrameConfig};
use crate::seed::sha256_hex;
use crate::stats::{compare_systems, EvalReport, McNemarMode, SystemScore, UnitLabel};
use crate::trainer::{load_checkpoint, save_checkpoint, train_ensemble, CheckpointSidecar, TrainConfig};
use crate::{Error, Result};

/// Frame-rate augmentation experiments for speech classification.
#[derive(Debug, Parser)]
#[command(name = "fraug", version, about)]
pub struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads for extraction and ensemble training.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic two-class corpus (WAVs and manifest).
    Synth(SynthArgs),
    /// Extract features under a FrAUG plan.
    Extract(ExtractArgs),
    /// Extract features under any augmentation policy.
    Augment(AugmentArgs),
    /// Train an ensemble on the training split.
    Train(TrainArgs),
    /// Predict a split with a trained ensemble.
    Evaluate(EvaluateArgs),
    /// Compare two prediction files with McNemar's test.
    Mcnemar(McnemarArgs),
    /// Run a full experiment from a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FeatureArg {
    Logmel,
    Mfcc,
}

impl From<FeatureArg> for FeatureKind {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::Logmel => FeatureKind::LogMel,
            FeatureArg::Mfcc => FeatureKind::Mfcc,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Validation,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Validation => Split::Validation,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Auto,
    Exact,
    Chi2,
}

impl From<ModeArg> for McNemarMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Auto => McNemarMode::Auto,
            ModeArg::Exact => McNemarMode::Exact,
            ModeArg::Chi2 => McNemarMode::Chi2Corrected,
        }
    }
}

/// Inputs shared by the data-processing commands. Flags override values
/// from `--config`.
#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Experiment config supplying defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub feature: Option<FeatureArg>,
}

/// A FrAUG grid given either explicitly or as a fold-count preset.
#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Frame widths in ms, e.g. 64,128.
    #[arg(long, value_delimiter = ',')]
    pub widths: Vec<f64>,
    /// Frame shifts as fractions of the width, e.g. 0.5,0.25,0.1.
    #[arg(long, value_delimiter = ',')]
    pub shifts: Vec<f64>,
    /// Preset grid: 5 = {64,128}ms x {50,25,10}%, 8 = {32,64,128}ms x {50,25,10}%.
    #[arg(long, conflicts_with_all = ["widths", "shifts"])]
    pub folds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Utterances per class.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub n: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub min_duration: Option<f64>,
    #[arg(long)]
    pub max_duration: Option<f64>,
    #[arg(long)]
    pub sample_rate: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Policy as a JSON file or inline JSON, e.g. '{"kind":"noise","source":"white","folds":4}'.
    #[arg(long)]
    pub policy: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Policy as a JSON file or inline JSON; overrides the plan flags.
    #[arg(long, conflicts_with_all = ["widths", "shifts", "folds"])]
    pub policy: Option<String>,
    /// Output checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub ensemble_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Where to write the predictions JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// System name recorded in the predictions; defaults to the model file stem.
    #[arg(long)]
    pub system: Option<String>,
}

#[derive(Debug, Args)]
pub struct McnemarArgs {
    /// Predictions of the reference system.
    pub a: PathBuf,
    /// Predictions of the compared system.
    pub b: PathBuf,
    /// Take true labels from this manifest instead of the prediction files.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    pub mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub feature: Option<FeatureArg>,
}

struct Resolved {
    manifest: Manifest,
    seed: u64,
    kind: FeatureKind,
    baseline: FrameConfig,
    train: TrainConfig,
}

impl DataArgs {
    fn resolve(&self) -> Result<Resolved> {
        let config = self.config.as_deref().map(ExperimentConfig::load).transpose()?;
        let manifest_path = self
            .manifest
            .clone()
            .or_else(|| config.as_ref().map(|c| c.manifest.clone()))
            .ok_or_else(|| Error::invalid("--manifest is required (directly or through --config)"))?;
        Ok(Resolved {
            manifest: load_manifest(&manifest_path)?,
            seed: self.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0),
            kind: self.feature.map(Into::into).or(config.as_ref().map(|c| c.feature)).unwrap_or_default(),
            baseline: config.as_ref().map(|c| c.baseline.clone()).unwrap_or_default(),
            train: config.map(|c| c.train).unwrap_or_default(),
        })
    }
}

impl PlanArgs {
    fn policy(&self, baseline: &FrameConfig) -> Result<AugPolicy> {
        let (widths, shifts) = match self.folds {
            Some(0) => return Ok(AugPolicy::None),
            Some(5) => (vec![64.0, 128.0], vec![0.5, 0.25, 0.1]),
            Some(8) => (vec![32.0, 64.0, 128.0], vec![0.5, 0.25, 0.1]),
            Some(n) => return Err(Error::invalid(format!("no preset grid with {n} folds; use --widths and --shifts"))),
            None if self.widths.is_empty() && self.shifts.is_empty() => return Ok(AugPolicy::None),
            None => (
                if self.widths.is_empty() { vec![baseline.frame_width_ms] } else { self.widths.clone() },
                if self.shifts.is_empty() { vec![baseline.frame_shift_fraction] } else { self.shifts.clone() },
            ),
        };
        Ok(AugPolicy::Fraug {
            widths_ms: widths,
            shift_fractions: shifts,
        })
    }
}

fn parse_policy(arg: &str) -> Result<AugPolicy> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg)?
    };
    Ok(serde_json::from_str(&text)?)
}

fn emit<T: Serialize>(json: bool, value: &T, human: impl FnOnce() -> String) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        print!("{}", human());
    }
    Ok(())
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(jobs) = cli.jobs {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(usize::from(jobs))
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        return pool.install(|| dispatch(&cli));
    }
    dispatch(&cli)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => synth(a, cli.json),
        Command::Extract(a) => {
            let r = a.data.resolve()?;
            let policy = a.plan.policy(&r.baseline)?;
            export(&r, &policy, &a.out, cli.json)
        }
        Command::Augment(a) => {
            let r = a.data.resolve()?;
            export(&r, &parse_policy(&a.policy)?, &a.out, cli.json)
        }
        Command::Train(a) => train(a, cli.json),
        Command::Evaluate(a) => evaluate(a, cli.json),
        Command::Mcnemar(a) => mcnemar(a, cli.json),
        Command::Experiment(a) => experiment(a, cli.json),
    }
}

#[derive(Serialize)]
struct SynthSummary {
    manifest: PathBuf,
    utterances: usize,
}

fn synth(a: &SynthArgs, json: bool) -> Result<()> {
    let mut params = SynthParams {
        n_per_class: a.n as usize,
        ..SynthParams::default()
    };
    if let Some(v) = a.min_duration {
        params.min_duration_s = v;
    }
    if let Some(v) = a.max_duration {
        params.max_duration_s = v;
    }
    if let Some(v) = a.sample_rate {
        params.sample_rate = v;
    }
    let manifest = synth_corpus(&params, a.seed, &a.out)?;
    let summary = SynthSummary {
        manifest: a.out.join("manifest.jsonl"),
        utterances: manifest.len(),
    };
    emit(json, &summary, || format!("{}\n", summary.manifest.display()))
}

#[derive(Serialize)]
struct ExportSummary {
    written: Vec<PathBuf>,
    failed: Vec<(String, String)>,
}

/// One feature file per (utterance, variant); evaluation splits get the
/// baseline variant only. A failing utterance does not stop the others.
fn export(r: &Resolved, policy: &AugPolicy, out: &Path, json: bool) -> Result<()> {
    let variants = policy.variants(&r.baseline, r.seed)?;
    let hash = sha256_hex(&serde_json::to_vec(&(policy, &r.baseline, r.kind, r.seed))?);
    let one = |utt: &crate::corpus::Utterance| -> Result<Vec<PathBuf>> {
        let signal = read_wav(&r.manifest.audio_path(utt))?;
        let bank = policy.noise_bank(signal.sample_rate(), r.seed)?;
        let wanted = if utt.split == Split::Train { &variants[..] } else { &variants[..1] };
        let dir = out.join(utt.split.as_str());
        fs::create_dir_all(&dir)?;
        wanted
            .iter()
            .enumerate()
            .map(|(v, variant)| {
                let features = variant.extract(&signal, r.kind, &utt.id, r.seed, &bank)?;
                let path = dir.join(format!("{}__v{v}_{}.frag", utt.id, variant.config.label()));
                let sidecar = FeatureSidecar {
                    config: variant.config.clone(),
                    kind: r.kind,
                    sample_rate: signal.sample_rate(),
                    utterance: Some(utt.id.clone()),
                    label: Some(utt.label),
                    split: Some(utt.split),
                    variant: v,
                    transform: Some(variant.transform.clone()),
                    master_seed: Some(r.seed),
                    config_hash: Some(hash.clone()),
                };
                write_features(&path, &features, &sidecar)?;
                Ok(path)
            })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<Vec<PathBuf>>> = {
        use rayon::prelude::*;
        r.manifest.utterances.par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<Vec<PathBuf>>> = r.manifest.utterances.iter().map(one).collect();

    let mut summary = ExportSummary {
        written: Vec::new(),
        failed: Vec::new(),
    };
    for (utt, res) in r.manifest.utterances.iter().zip(results) {
        match res {
            Ok(paths) => summary.written.extend(paths),
            Err(e) => summary.failed.push((utt.id.clone(), e.to_string())),
        }
    }
    emit(json, &summary, || {
        let mut s = format!("wrote {} feature files to {}\n", summary.written.len(), out.display());
        for (id, e) in &summary.failed {
            s.push_str(&format!("failed {id}: {e}\n"));
        }
        s
    })?;
    if summary.failed.is_empty() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{} utterances failed", summary.failed.len())))
    }
}

#[derive(Serialize)]
struct TrainSummary {
    model: PathBuf,
    folds: usize,
    final_losses: Vec<f64>,
}

fn train(a: &TrainArgs, json: bool) -> Result<()> {
    let r = a.data.resolve()?;
    let policy = match &a.policy {
        Some(p) => parse_policy(p)?,
        None => a.plan.policy(&r.baseline)?,
    };
    let mut config = TrainConfig { seed: r.seed, ..r.train.clone() };
    if let Some(v) = a.epochs {
        config.epochs = v;
    }
    if let Some(v) = a.ensemble_size {
        config.ensemble_size = v;
    }
    if let Some(v) = a.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = a.batch_size {
        config.batch_size = v;
    }
    config.validate()?;
    let train_manifest = subset_manifest(&r.manifest, &[Split::Train])?;
    let set = build_feature_set(&train_manifest, &policy, &r.baseline, r.kind, r.seed).map_err(Error::in_stage("extract"))?;
    let (ensemble, trained) = train_ensemble(&set.train, &config).map_err(Error::in_stage("train"))?;
    let loss_curves: Vec<Vec<f64>> = trained.into_iter().map(|t| t.loss_curve).collect();
    let hash = sha256_hex(&serde_json::to_vec(&(&policy, &r.baseline, r.kind, &config))?);
    let sidecar = CheckpointSidecar {
        train_config: config,
        kind: r.kind,
        baseline: r.baseline.clone(),
        policy,
        folds: set.folds(),
        master_seed: r.seed,
        config_hash: hash,
        loss_curves,
    };
    if let Some(parent) = a.out.parent() {
        fs::create_dir_all(parent)?;
    }
    save_checkpoint(&a.out, &ensemble, &sidecar)?;
    let summary = TrainSummary {
        model: a.out.clone(),
        folds: sidecar.folds,
        final_losses: sidecar.loss_curves.iter().filter_map(|c| c.last().copied()).collect(),
    };
    emit(json, &summary, || {
        let losses: Vec<String> = summary.final_losses.iter().map(|l| format!("{l:.4}")).collect();
        format!(
            "trained {} models ({} folds), final losses [{}]\nsaved {}\n",
            summary.final_losses.len(),
            summary.folds,
            losses.join(", "),
            summary.model.display()
        )
    })
}

#[derive(Serialize)]
struct EvaluateSummary<'a> {
    predictions: &'a PredictionFile,
    score: SystemScore,
}

fn evaluate(a: &EvaluateArgs, json: bool) -> Result<()> {
    let (ensemble, sidecar) = load_checkpoint(&a.model)?;
    let split: Split = a.split.into();
    let manifest = subset_manifest(&load_manifest(&a.manifest)?, &[split])?;
    if manifest.is_empty() {
        return Err(Error::invalid(format!("manifest has no {} utterances", split.as_str())));
    }
    let set = build_feature_set(&manifest, &AugPolicy::None, &sidecar.baseline, sidecar.kind, sidecar.master_seed)?;
    let system = a
        .system
        .clone()
        .or_else(|| a.model.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "model".into());
    let file = PredictionFile {
        system,
        split,
        master_seed: Some(sidecar.master_seed),
        config_hash: Some(sidecar.config_hash.clone()),
        predictions: predict_split(&ensemble, set.split(split))?,
    };
    if let Some(out) = &a.out {
        file.save(out)?;
    }
    let summary = EvaluateSummary {
        score: file.score(),
        predictions: &file,
    };
    emit(json, &summary, || {
        format!(
            "{} on {}: F1 {:.4}  precision {:.4}  recall {:.4}  ({} utterances)\n",
            file.system,
            split.as_str(),
            summary.score.f1,
            summary.score.precision,
            summary.score.recall,
            file.predictions.len()
        )
    })
}

fn mcnemar(a: &McnemarArgs, json: bool) -> Result<()> {
    let fa = PredictionFile::load(&a.a)?;
    let fb = PredictionFile::load(&a.b)?;
    let truth: Vec<UnitLabel> = match &a.manifest {
        Some(path) => {
            let manifest = load_manifest(path)?;
            fa.predictions
                .iter()
                .map(|p| {
                    manifest
                        .get(&p.id)
                        .map(|u| UnitLabel { id: u.id.clone(), label: u.label })
                        .ok_or_else(|| Error::invalid(format!("utterance {:?} not in manifest", p.id)))
                })
                .collect::<Result<_>>()?
        }
        None => {
            if fa.truth() != fb.truth() {
                return Err(Error::invalid("prediction files disagree on units or true labels"));
            }
            fa.truth()
        }
    };
    let mut report = compare_systems(&fa.predicted(), &fb.predicted(), &truth)?;
    report.reference = fa.system.clone();
    report.system = fb.system.clone();
    report.split = fa.split.as_str().into();
    let mode: McNemarMode = a.mode.into();
    if report.paired.discordant() > 0 {
        report.test = Some(mode.resolve(&report.paired));
        report.p_value = Some(crate::stats::mcnemar(&report.paired, mode)?);
    }
    emit(json, &report, || human_report(&report))
}

fn human_report(r: &EvalReport) -> String {
    let p = match (r.p_value, r.test) {
        (Some(p), Some(t)) => format!("p = {p:.6} ({t})"),
        _ => "p undefined (no discordant pairs)".into(),
    };
    let imp = r.improvement.map_or("n/a".into(), |v| format!("{:+.2}%", v * 100.0));
    format!(
        "{} vs {} on {} ({} units)\n  F1 {:.4} vs {:.4}, relative improvement {imp}\n  b = {}, c = {}, {p}\n",
        r.system, r.reference, r.split, r.units, r.score.f1, r.reference_score.f1, r.paired.b, r.paired.c
    )
}

fn experiment(a: &ExperimentArgs, json: bool) -> Result<()> {
    let mut config = ExperimentConfig::load(&a.config)?;
    if let Some(m) = &a.manifest {
        config.manifest = m.clone();
    }
    if let Some(o) = &a.out {
        config.output_dir = o.clone();
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(f) = a.feature {
        config.feature = f.into();
    }
    let outcome = run_experiment(&config)?;
    emit(json, &outcome.table, || {
        let mut s = format!("{:<16} {:>8} {:>8} {:>6}\n", "policy", "val F1", "test F1", "folds");
        for row in &outcome.table {
            s.push_str(&format!(
                "{:<16} {:>8.4} {:>8.4} {:>6}\n",
                row.policy, row.validation_f1, row.test_f1, row.folds
            ));
        }
        for r in outcome.reports.iter().filter(|r| r.split == "test" && r.system != r.reference) {
            s.push_str(&human_report(r));
        }
        s.push_str(&format!("outputs in {}\n", config.output_dir.display()));
        s
    })?;
    Ok(())
}
