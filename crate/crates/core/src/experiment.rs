//! Batch commands: debias an embedding file, run one experimental arm end
//! to end, run the ablation matrix, analyse gender components, summarize a
//! dataset and write a synthetic corpus.
//!
//! All randomness comes from the root `seed` through named streams
//! (`derive_seed(seed, "splits")`, `derive_seed(seed, "classifier")`), so
//! arms never perturb each other.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{self, encode_tokens, ClassifierModel, EpochLog, TrainConfig};
use crate::data::{self, derive_seed, Biography, Split, SyntheticCorpus, SyntheticCorpusSpec};
use crate::debias::{self, scrub_tokens, DebiasMode, TransformReport};
use crate::embeddings::{self, EmbeddingSet, GenderWordList, PairRole, WordPairList};
use crate::error::{Error, Result};
use crate::fairness::{self, FairnessReport, Prediction};
use crate::geometry::{self, ComponentFilter, GenderComponentStats, GenderSubspace};
use crate::Scalar;

fn default_k() -> usize {
    1
}
fn default_bins() -> usize {
    40
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub embeddings: Option<PathBuf>,
    /// Read from the embedding file when absent.
    #[serde(default)]
    pub embedding_dim: Option<usize>,
    pub dataset: Option<PathBuf>,
    pub defining_pairs: Option<PathBuf>,
    pub equalize_pairs: Option<PathBuf>,
    /// Extra scrub words, merged with the equalize-pair words.
    #[serde(default)]
    pub gender_words: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_mode")]
    pub mode: DebiasMode,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_mode() -> DebiasMode {
    DebiasMode::None
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            embeddings: None,
            embedding_dim: None,
            dataset: None,
            defining_pairs: None,
            equalize_pairs: None,
            gender_words: None,
            output_dir: default_output(),
            mode: DebiasMode::None,
            train: TrainConfig::default(),
            seed: 0,
            k: 1,
            bins: default_bins(),
        }
    }
}

impl ExperimentConfig {
    /// Reads TOML (`.toml`) or JSON (anything else).
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|x| x == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }

    fn require<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a PathBuf> {
        field
            .as_ref()
            .ok_or_else(|| Error::Config(format!("missing required setting `{name}`")))
    }

    /// Training configuration with the seed derived from the root seed.
    pub fn effective_train(&self) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.seed, "classifier"),
            ..self.train.clone()
        }
    }

    pub fn split_seed(&self) -> u64 {
        derive_seed(self.seed, "splits")
    }
}

/// Loaded and normalized inputs shared by every arm.
#[derive(Debug, Clone)]
pub struct ExperimentInputs<T> {
    pub embeddings: EmbeddingSet<T>,
    pub defining: WordPairList,
    pub equalize: WordPairList,
    pub gender_words: GenderWordList,
    pub bios: Vec<Biography>,
    pub stats: InputStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InputStats {
    pub zero_vectors: usize,
    pub defining_pairs_dropped_oov: usize,
    pub equalize_pairs_dropped_oov: usize,
    pub biographies: usize,
    pub biographies_dropped_empty: usize,
}

impl<T: Scalar> ExperimentInputs<T> {
    /// Normalizes the embeddings, drops out-of-vocabulary pairs and assigns
    /// splits. `bios` may be empty for commands that do not need them.
    pub fn prepare(
        raw: &EmbeddingSet<T>,
        defining: &WordPairList,
        equalize: &WordPairList,
        extra_gender_words: Option<&GenderWordList>,
        bios: Vec<Biography>,
        split_seed: u64,
    ) -> Result<Self> {
        let (embeddings, zero_vectors) = raw.normalize_rows();
        let (defining_kept, d_drop) = defining.in_vocabulary(&embeddings);
        let (equalize_kept, e_drop) = equalize.in_vocabulary(&embeddings);
        let gender_words = GenderWordList::from_pairs(
            [equalize],
            extra_gender_words.into_iter().flat_map(|g| g.iter().cloned()),
        )?;
        let bios = data::assign_splits(bios, split_seed)?;
        Ok(ExperimentInputs {
            stats: InputStats {
                zero_vectors,
                defining_pairs_dropped_oov: d_drop,
                equalize_pairs_dropped_oov: e_drop,
                biographies: bios.len(),
                biographies_dropped_empty: 0,
            },
            embeddings,
            defining: defining_kept,
            equalize: equalize_kept,
            gender_words,
            bios,
        })
    }

    /// In-memory inputs straight from a synthetic corpus.
    pub fn from_synthetic(corpus: &SyntheticCorpus, split_seed: u64) -> Result<ExperimentInputs<T>> {
        ExperimentInputs::prepare(
            &corpus.embeddings.cast::<T>(),
            &corpus.defining,
            &corpus.equalize,
            Some(&corpus.gender_words),
            corpus.bios.clone(),
            split_seed,
        )
    }

    pub fn subspace(&self, k: usize) -> Result<GenderSubspace<T>> {
        geometry::compute_gender_subspace(&self.embeddings, &self.defining, k)
    }
}

/// Loads everything named in `config`. Biographies are read only when
/// `with_dataset` is set.
pub fn load_inputs(config: &ExperimentConfig, with_dataset: bool) -> Result<ExperimentInputs<f64>> {
    let emb_path = config.require(&config.embeddings, "embeddings")?;
    let dim = match config.embedding_dim {
        Some(d) => d,
        None => embeddings::sniff_dim(emb_path)?,
    };
    let raw = embeddings::load_embeddings::<f64>(emb_path, dim)?;
    let defining = embeddings::load_word_pairs(config.require(&config.defining_pairs, "defining_pairs")?, PairRole::Defining)?;
    let equalize = embeddings::load_word_pairs(config.require(&config.equalize_pairs, "equalize_pairs")?, PairRole::Equalize)?;
    let extra = config.gender_words.as_ref().map(embeddings::load_gender_words).transpose()?;
    let (bios, dropped) = if with_dataset {
        let loaded = data::load_dataset(config.require(&config.dataset, "dataset")?, None)?;
        (loaded.bios, loaded.dropped_empty)
    } else {
        (Vec::new(), 0)
    };
    let mut inputs = ExperimentInputs::prepare(&raw, &defining, &equalize, extra.as_ref(), bios, config.split_seed())?;
    inputs.stats.biographies_dropped_empty = dropped;
    Ok(inputs)
}

/// Result of one experimental arm.
#[derive(Debug, Clone)]
pub struct ArmResult<T> {
    pub mode: DebiasMode,
    pub model: ClassifierModel<T>,
    pub transform: TransformReport,
    pub max_abs_component: f64,
    pub scrubbed_tokens: usize,
    pub empty_after_scrub: usize,
    pub predictions: Vec<Prediction>,
    pub report: FairnessReport,
    pub probe_accuracy: f64,
    pub best_epoch: usize,
    pub history: Vec<EpochLog>,
}

/// Transformed embeddings for `mode` plus the transform report.
pub fn debiased_embeddings<T: Scalar>(
    inputs: &ExperimentInputs<T>,
    mode: DebiasMode,
    k: usize,
) -> Result<(EmbeddingSet<T>, TransformReport, GenderSubspace<T>)> {
    let subspace = inputs.subspace(k)?;
    let (e, report) = debias::apply_mode(&inputs.embeddings, mode, &subspace, &inputs.equalize, &inputs.gender_words);
    Ok((e, report, subspace))
}

/// Optional scrubbing, debiasing, training, test-split evaluation and the
/// gender probe.
pub fn run_arm<T: Scalar>(
    inputs: &ExperimentInputs<T>,
    mode: DebiasMode,
    train: &TrainConfig,
    k: usize,
) -> Result<ArmResult<T>> {
    let (emb, transform, subspace) = debiased_embeddings(inputs, mode, k)?;
    let mut scrubbed_tokens = 0;
    let mut empty_after_scrub = 0;
    let scrubbed;
    let bios: &[Biography] = if mode.scrubs_text() {
        scrubbed = inputs
            .bios
            .iter()
            .map(|b| {
                let (tokens, removed) = scrub_tokens(&b.tokens, &inputs.gender_words);
                scrubbed_tokens += removed;
                if tokens.is_empty() {
                    empty_after_scrub += 1;
                }
                Biography { tokens, ..b.clone() }
            })
            .collect::<Vec<_>>();
        &scrubbed
    } else {
        &inputs.bios
    };

    let outcome = classifier::train_classifier(bios, &emb, train)?;
    let model = outcome.model;
    let predictions: Vec<Prediction> = bios
        .iter()
        .filter(|b| b.split == Some(Split::Test))
        .map(|b| {
            let label = model.predict_label(&emb, &encode_tokens(&emb, &b.tokens));
            Prediction {
                id: b.id.clone(),
                true_occupation: b.occupation.clone(),
                predicted_occupation: model.labels[label].clone(),
                gender: b.gender,
            }
        })
        .collect();
    let report = fairness::build_report(&predictions)?;
    let (_, probe_accuracy) = classifier::train_gender_probe(&model, &emb, bios, train)?;
    Ok(ArmResult {
        mode,
        max_abs_component: debias::max_abs_component(&emb, &subspace).as_f64(),
        model,
        transform,
        scrubbed_tokens,
        empty_after_scrub,
        predictions,
        report,
        probe_accuracy,
        best_epoch: outcome.best_epoch,
        history: outcome.history,
    })
}

/// Serialized classifier parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub mode: DebiasMode,
    pub train: TrainConfig,
    pub labels: Vec<String>,
    pub dim: usize,
    pub hidden: usize,
    pub fallback_label: usize,
    pub attention: Vec<f64>,
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: Vec<f64>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn from_model<T: Scalar>(model: &ClassifierModel<T>, mode: DebiasMode, train: &TrainConfig) -> Self {
        let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            mode,
            train: train.clone(),
            labels: model.labels.clone(),
            dim: model.dim,
            hidden: model.hidden,
            fallback_label: model.fallback_label,
            attention: f(&model.attention),
            hidden_weights: f(&model.hidden_weights),
            hidden_bias: f(&model.hidden_bias),
            output_weights: f(&model.output_weights),
            output_bias: f(&model.output_bias),
        }
    }

    pub fn into_model<T: Scalar>(self) -> Result<ClassifierModel<T>> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!("unsupported checkpoint version {}", self.format_version)));
        }
        let c = self.labels.len();
        let shapes_ok = self.attention.len() == self.dim
            && self.hidden_weights.len() == self.dim * self.hidden
            && self.hidden_bias.len() == self.hidden
            && self.output_weights.len() == self.hidden * c
            && self.output_bias.len() == c
            && self.fallback_label < c.max(1);
        if !shapes_ok {
            return Err(Error::Data("checkpoint parameter shapes are inconsistent".into()));
        }
        let f = |v: Vec<f64>| v.into_iter().map(T::of).collect::<Vec<T>>();
        Ok(ClassifierModel {
            dim: self.dim,
            hidden: self.hidden,
            labels: self.labels,
            attention: f(self.attention),
            hidden_weights: f(self.hidden_weights),
            hidden_bias: f(self.hidden_bias),
            output_weights: f(self.output_weights),
            output_bias: f(self.output_bias),
            fallback_label: self.fallback_label,
        })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Summary printed by the debias command and stored as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasSummary {
    pub mode: DebiasMode,
    pub output: PathBuf,
    pub vocabulary: usize,
    pub max_abs_component: f64,
    pub inputs: InputStats,
    pub transform: TransformReport,
}

pub fn cmd_debias(config: &ExperimentConfig) -> Result<DebiasSummary> {
    let inputs = load_inputs(config, false)?;
    let (emb, transform, subspace) = debiased_embeddings(&inputs, config.mode, config.k)?;
    ensure_dir(&config.output_dir)?;
    let output = config.output_dir.join(format!("embeddings.{}.txt", config.mode));
    emb.save(&output)?;
    let summary = DebiasSummary {
        mode: config.mode,
        output,
        vocabulary: emb.len(),
        max_abs_component: debias::max_abs_component(&emb, &subspace),
        inputs: inputs.stats.clone(),
        transform,
    };
    write_json(&config.output_dir.join(format!("transform_report.{}.json", config.mode)), &summary)?;
    info!(
        "{}: {} words, {} skipped, max |component| {:.3e}",
        config.mode,
        summary.vocabulary,
        summary.transform.skipped_words().len(),
        summary.max_abs_component
    );
    Ok(summary)
}

/// Run metadata stored next to the CSV outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: DebiasMode,
    pub accuracy: f64,
    pub mean_abs_tpr_gap: Option<f64>,
    pub mean_abs_tnr_gap: Option<f64>,
    pub probe_accuracy: f64,
    pub best_epoch: usize,
    pub scrubbed_tokens: usize,
    pub empty_after_scrub: usize,
    pub max_abs_component: f64,
    pub inputs: InputStats,
    pub transform: TransformReport,
    pub history: Vec<EpochLog>,
}

fn write_arm(dir: &Path, config: &ExperimentConfig, inputs: &ExperimentInputs<f64>, arm: &ArmResult<f64>) -> Result<RunSummary> {
    ensure_dir(dir)?;
    let train = config.effective_train();
    write_json(&dir.join("checkpoint.json"), &Checkpoint::from_model(&arm.model, arm.mode, &train))?;
    write_with(&dir.join("predictions.csv"), |w| fairness::write_predictions_csv(&arm.predictions, w))?;
    write_with(&dir.join("fairness.csv"), |w| arm.report.write_csv(w))?;
    write_json(&dir.join("fairness.json"), &arm.report.aggregate)?;
    write_json(&dir.join("config.json"), &ExperimentConfig { mode: arm.mode, ..config.clone() })?;
    let summary = RunSummary {
        mode: arm.mode,
        accuracy: arm.report.aggregate.accuracy,
        mean_abs_tpr_gap: arm.report.aggregate.mean_abs_tpr_gap,
        mean_abs_tnr_gap: arm.report.aggregate.mean_abs_tnr_gap,
        probe_accuracy: arm.probe_accuracy,
        best_epoch: arm.best_epoch,
        scrubbed_tokens: arm.scrubbed_tokens,
        empty_after_scrub: arm.empty_after_scrub,
        max_abs_component: arm.max_abs_component,
        inputs: inputs.stats.clone(),
        transform: arm.transform.clone(),
        history: arm.history.clone(),
    };
    write_json(&dir.join("run.json"), &summary)?;
    Ok(summary)
}

pub fn cmd_run(config: &ExperimentConfig) -> Result<RunSummary> {
    let inputs = load_inputs(config, true)?;
    let arm = run_arm(&inputs, config.mode, &config.effective_train(), config.k)?;
    write_arm(&config.output_dir, config, &inputs, &arm)
}

/// Arms of the projection/equalization ablation, in table order.
pub const ABLATION_MODES: [DebiasMode; 4] = [
    DebiasMode::None,
    DebiasMode::Strong,
    DebiasMode::ProjectOnly,
    DebiasMode::EqualizeOnly,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: DebiasMode,
    pub acc: f64,
    pub tpr_gap: Option<f64>,
    pub tnr_gap: Option<f64>,
    pub probe_accuracy: f64,
}

pub fn write_ablation_csv<W: Write>(rows: &[AblationRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "mode,acc,tpr_gap,tnr_gap")?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(w, "{},{},{},{}", r.mode, r.acc, opt(r.tpr_gap), opt(r.tnr_gap))?;
    }
    w.flush()
}

/// Runs every ablation arm with the same splits and seeds; each arm's full
/// outputs go to `<output_dir>/<mode>/`.
pub fn cmd_ablation(config: &ExperimentConfig) -> Result<Vec<AblationRow>> {
    let inputs = load_inputs(config, true)?;
    let train = config.effective_train();
    let arms: Vec<ArmResult<f64>> = ABLATION_MODES
        .par_iter()
        .map(|&mode| run_arm(&inputs, mode, &train, config.k))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(arms.len());
    for arm in &arms {
        let s = write_arm(&config.output_dir.join(arm.mode.name()), config, &inputs, arm)?;
        rows.push(AblationRow {
            mode: arm.mode,
            acc: s.accuracy,
            tpr_gap: s.mean_abs_tpr_gap,
            tnr_gap: s.mean_abs_tnr_gap,
            probe_accuracy: s.probe_accuracy,
        });
    }
    write_with(&config.output_dir.join("ablation.csv"), |w| write_ablation_csv(&rows, w))?;
    write_json(&config.output_dir.join("ablation.json"), &rows)?;
    Ok(rows)
}

/// Gender-component distribution of all biographies on the normalized,
/// not yet debiased embeddings.
pub fn gender_component_stats<T: Scalar>(
    inputs: &ExperimentInputs<T>,
    filter: ComponentFilter,
    k: usize,
    bins: usize,
) -> Result<GenderComponentStats> {
    let subspace = inputs.subspace(k)?;
    geometry::gender_component_distribution(&inputs.embeddings, &inputs.bios, &subspace, filter, &inputs.gender_words, bins)
}

pub fn cmd_gender_component(config: &ExperimentConfig, filter: ComponentFilter) -> Result<GenderComponentStats> {
    let inputs = load_inputs(config, true)?;
    let stats = gender_component_stats(&inputs, filter, config.k, config.bins)?;
    ensure_dir(&config.output_dir)?;
    write_with(&config.output_dir.join(format!("gender_component.{filter}.csv")), |w| stats.write_histogram_csv(w))?;
    write_json(&config.output_dir.join(format!("gender_component.{filter}.json")), &stats.sidecar())?;
    Ok(stats)
}

pub fn cmd_summarize(config: &ExperimentConfig) -> Result<data::DatasetSummary> {
    let loaded = data::load_dataset(config.require(&config.dataset, "dataset")?, None)?;
    let summary = data::summarize(&loaded.bios);
    ensure_dir(&config.output_dir)?;
    write_with(&config.output_dir.join("summary.csv"), |w| summary.write_csv(w))?;
    Ok(summary)
}

/// Writes a synthetic corpus and a ready-to-use experiment config into
/// `out_dir`. Returns the config.
pub fn cmd_synth(spec: &SyntheticCorpusSpec, out_dir: &Path) -> Result<ExperimentConfig> {
    let corpus = data::generate_synthetic(spec)?;
    ensure_dir(out_dir)?;
    let embeddings = out_dir.join("embeddings.txt");
    let dataset = out_dir.join("bios.jsonl");
    let defining_pairs = out_dir.join("defining_pairs.json");
    let equalize_pairs = out_dir.join("equalize_pairs.json");
    let gender_words = out_dir.join("gender_words.json");
    corpus.embeddings.save(&embeddings)?;
    data::save_dataset(&corpus.bios, &dataset)?;
    write_with(&defining_pairs, |w| writeln!(w, "{}", corpus.defining.to_json()))?;
    write_with(&equalize_pairs, |w| writeln!(w, "{}", corpus.equalize.to_json()))?;
    write_with(&gender_words, |w| writeln!(w, "{}", corpus.gender_words.to_json()))?;
    write_json(&out_dir.join("synth_spec.json"), spec)?;
    let config = ExperimentConfig {
        embeddings: Some(embeddings),
        embedding_dim: Some(spec.embed_dim),
        dataset: Some(dataset),
        defining_pairs: Some(defining_pairs),
        equalize_pairs: Some(equalize_pairs),
        gender_words: Some(gender_words),
        output_dir: out_dir.join("results"),
        seed: spec.seed,
        ..ExperimentConfig::default()
    };
    write_json(&out_dir.join("experiment.json"), &config)?;
    Ok(config)
}
