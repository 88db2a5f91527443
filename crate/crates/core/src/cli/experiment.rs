use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::augment::AugPolicy;
use crate::corpus::{build_feature_set, load_manifest, write_atomic, Label, Manifest, Split, Utterance, UtteranceFeatures};
use crate::stats::{compare_systems, write_reports_csv, ConfusionCounts, EvalReport, SystemScore, UnitLabel};
use crate::trainer::{save_checkpoint, train_ensemble, CheckpointSidecar, Ensemble, TrainConfig};
use crate::{Error, Result};

/// One scored utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    /// Predicted label.
    pub label: Label,
    pub prob: f64,
    pub truth: Label,
}

/// Predictions of one system on one split, as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionFile {
    pub system: String,
    pub split: Split,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub config_hash: Option<String>,
    pub predictions: Vec<PredictionRecord>,
}

impl PredictionFile {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn predicted(&self) -> Vec<UnitLabel> {
        self.predictions
            .iter()
            .map(|p| UnitLabel { id: p.id.clone(), label: p.label })
            .collect()
    }

    pub fn truth(&self) -> Vec<UnitLabel> {
        self.predictions
            .iter()
            .map(|p| UnitLabel { id: p.id.clone(), label: p.truth })
            .collect()
    }

    pub fn score(&self) -> SystemScore {
        let pred: Vec<Label> = self.predictions.iter().map(|p| p.label).collect();
        let truth: Vec<Label> = self.predictions.iter().map(|p| p.truth).collect();
        SystemScore::new(ConfusionCounts::from_predictions(&pred, &truth).expect("equal lengths"))
    }
}

/// Scores every utterance of `features` (baseline variant only).
pub fn predict_split(ensemble: &Ensemble, features: &[UtteranceFeatures]) -> Result<Vec<PredictionRecord>> {
    features
        .iter()
        .filter(|u| u.variant == 0)
        .map(|u| {
            let p = ensemble.predict(&u.features)?;
            Ok(PredictionRecord {
                id: u.id.clone(),
                label: p.utterance_label,
                prob: p.utterance_prob,
                truth: u.label,
            })
        })
        .collect()
}

/// A manifest restricted to the given splits.
pub fn subset_manifest(manifest: &Manifest, splits: &[Split]) -> Result<Manifest> {
    let utts: Vec<Utterance> = manifest
        .utterances
        .iter()
        .filter(|u| splits.contains(&u.split))
        .cloned()
        .collect();
    Manifest::new(utts, manifest.root.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub name: String,
    pub group: String,
    pub policy: AugPolicy,
    pub folds: usize,
    pub validation: PredictionFile,
    /// Present only for the validation winner of each group.
    pub test: Option<PredictionFile>,
    pub loss_curves: Vec<Vec<f64>>,
}

/// One row of the augmentation comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub policy: String,
    pub selected: String,
    pub validation_f1: f64,
    pub test_f1: f64,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub master_seed: u64,
    pub config_hash: String,
    pub candidates: Vec<CandidateResult>,
    /// Every candidate against the first group's winner on validation, then
    /// every group winner against it on test.
    pub reports: Vec<EvalReport>,
    pub table: Vec<TableRow>,
}

fn report(reference: &PredictionFile, system: &PredictionFile, folds: usize) -> Result<EvalReport> {
    let mut r = compare_systems(&reference.predicted(), &system.predicted(), &reference.truth())?;
    r.reference = reference.system.clone();
    r.system = system.system.clone();
    r.split = system.split.as_str().into();
    r.folds = folds;
    Ok(r)
}

/// Extract, train, predict and compare every policy in `config`, writing
/// all artifacts under `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate().map_err(Error::in_stage("config"))?;
    let hash = config.hash();
    let seed = config.seed;
    let manifest = load_manifest(&config.manifest).map_err(Error::in_stage("manifest"))?;
    let train_config = TrainConfig { seed, ..config.train.clone() };

    let eval_manifest = subset_manifest(&manifest, &[Split::Validation, Split::Test])?;
    let train_manifest = subset_manifest(&manifest, &[Split::Train])?;
    let eval = build_feature_set(&eval_manifest, &AugPolicy::None, &config.baseline, config.feature, seed)
        .map_err(Error::in_stage("extract"))?;

    let out = &config.output_dir;
    for dir in ["models", "predictions"] {
        fs::create_dir_all(out.join(dir))?;
    }
    write_atomic(&out.join("config.json"), serde_json::to_string_pretty(config)?.as_bytes())?;

    let prediction_file = |system: &str, split: Split, predictions| PredictionFile {
        system: system.into(),
        split,
        master_seed: Some(seed),
        config_hash: Some(hash.clone()),
        predictions,
    };

    let mut candidates = Vec::new();
    let mut ensembles = Vec::new();
    for entry in &config.policies {
        let set = build_feature_set(&train_manifest, &entry.policy, &config.baseline, config.feature, seed)
            .map_err(Error::in_stage("extract"))?;
        let (ensemble, trained) = train_ensemble(&set.train, &train_config).map_err(Error::in_stage("train"))?;
        let loss_curves: Vec<Vec<f64>> = trained.into_iter().map(|t| t.loss_curve).collect();
        let sidecar = CheckpointSidecar {
            train_config: train_config.clone(),
            kind: config.feature,
            baseline: config.baseline.clone(),
            policy: entry.policy.clone(),
            folds: set.folds(),
            master_seed: seed,
            config_hash: hash.clone(),
            loss_curves: loss_curves.clone(),
        };
        save_checkpoint(&out.join("models").join(format!("{}.fmdl", entry.name)), &ensemble, &sidecar)?;
        let validation = predict_split(&ensemble, &eval.validation).map_err(Error::in_stage("predict"))?;
        let validation = prediction_file(&entry.name, Split::Validation, validation);
        validation.save(&prediction_path(out, &entry.name, Split::Validation))?;
        candidates.push(CandidateResult {
            name: entry.name.clone(),
            group: entry.group().into(),
            policy: entry.policy.clone(),
            folds: set.folds(),
            validation,
            test: None,
            loss_curves,
        });
        ensembles.push(ensemble);
    }

    // validation winner per group; ties keep the earlier candidate
    let mut winners = Vec::new();
    for group in config.groups() {
        let best = candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.group == group)
            .fold(None::<(usize, f64)>, |best, (i, c)| {
                let f1 = c.validation.score().f1;
                match best {
                    Some((_, b)) if b >= f1 => best,
                    _ => Some((i, f1)),
                }
            })
            .expect("group has a member")
            .0;
        let test = predict_split(&ensembles[best], &eval.test).map_err(Error::in_stage("predict"))?;
        let test = prediction_file(&candidates[best].name, Split::Test, test);
        test.save(&prediction_path(out, &candidates[best].name, Split::Test))?;
        candidates[best].test = Some(test);
        winners.push(best);
    }

    let reference = &candidates[winners[0]];
    let mut reports = Vec::new();
    for c in &candidates {
        reports.push(report(&reference.validation, &c.validation, c.folds)?);
    }
    let reference_test = reference.test.as_ref().expect("winner has test predictions");
    let mut table = Vec::new();
    for (&w, group) in winners.iter().zip(config.groups()) {
        let c = &candidates[w];
        let test = c.test.as_ref().expect("winner has test predictions");
        reports.push(report(reference_test, test, c.folds)?);
        table.push(TableRow {
            policy: group.into(),
            selected: c.name.clone(),
            validation_f1: c.validation.score().f1,
            test_f1: test.score().f1,
            folds: c.folds,
        });
    }

    let outcome = ExperimentOutcome {
        master_seed: seed,
        config_hash: hash,
        candidates,
        reports,
        table,
    };
    write_outputs(out, &outcome)?;
    Ok(outcome)
}

pub fn prediction_path(out: &Path, system: &str, split: Split) -> PathBuf {
    out.join("predictions").join(format!("{system}.{}.json", split.as_str()))
}

#[derive(Serialize)]
struct Summary<'a> {
    master_seed: u64,
    config_hash: &'a str,
    reports: &'a [EvalReport],
    table: &'a [TableRow],
}

/// `reports.json` doubles as the provenance sidecar of both CSV tables.
fn write_outputs(out: &Path, outcome: &ExperimentOutcome) -> Result<()> {
    let summary = Summary {
        master_seed: outcome.master_seed,
        config_hash: &outcome.config_hash,
        reports: &outcome.reports,
        table: &outcome.table,
    };
    write_atomic(&out.join("reports.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    let mut buf = Vec::new();
    write_reports_csv(&outcome.reports, &mut buf)?;
    write_atomic(&out.join("reports.csv"), &buf)?;
    let mut table = csv::Writer::from_writer(Vec::new());
    for row in &outcome.table {
        table.serialize(row).map_err(|e| Error::invalid(format!("csv: {e}")))?;
    }
    let bytes = table.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))?;
    write_atomic(&out.join("table.csv"), &bytes)
}
