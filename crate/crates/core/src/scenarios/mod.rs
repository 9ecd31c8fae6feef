//! Experiment protocols: batch, class-incremental, and the NI / NC / NIC
//! continuous-recognition schedules, with multi-trial averaging.

mod plan;
mod report;

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{substream, Dataset, Sequence};
use crate::error::{GdmError, Result};
use crate::gdm::{GdmConfig, GdmModel, Profile, SemanticInput};
use crate::gwr::{Label, StepLabels};
use crate::metric::MetricKind;

pub use plan::{plan_nc, plan_ni, plan_nic, MiniBatch, SeqRef, Split, NC_BATCH_SIZES, NIC_BATCHES};
pub use report::{EpochRecord, EpochSummary, ScenarioReport, Stat, TrialReport, REPORT_SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Batch,
    Incremental,
    Ni,
    Nc,
    Nic,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [Self::Batch, Self::Incremental, Self::Ni, Self::Nc, Self::Nic];

    pub fn name(self) -> &'static str {
        match self {
            Self::Batch => "batch",
            Self::Incremental => "incremental",
            Self::Ni => "ni",
            Self::Nc => "nc",
            Self::Nic => "nic",
        }
    }

    pub fn default_profile(self) -> Profile {
        match self {
            Self::Batch => Profile::Batch,
            _ => Profile::Incremental,
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = GdmError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| GdmError::Config(format!("unknown scenario '{s}' (batch, incremental, ni, nc, nic)")))
    }
}

/// Optional per-run adjustments on top of the selected profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamOverrides {
    pub metric: Option<MetricKind>,
    pub removal_threshold: Option<f64>,
    pub max_edge_age: Option<u32>,
    pub insertion_threshold_em: Option<f64>,
    pub insertion_threshold_sm: Option<f64>,
    pub replay_window: Option<usize>,
    pub replay_updates_links: Option<bool>,
    pub semantic_input: Option<SemanticInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Batch only; the other protocols derive their length from the plan.
    pub epochs: Option<usize>,
    pub trials: usize,
    pub replay: bool,
    pub temporal_context: bool,
    /// `None` picks the profile matching `kind`.
    pub profile: Option<Profile>,
    pub label_availability: f64,
    pub seed: u64,
    /// Keep incremental/NC/NIC category order as given instead of shuffling.
    pub fixed_order: bool,
    pub passes_per_batch: usize,
    pub test_collections: usize,
    /// Also score the training data after every epoch.
    pub evaluate_train: bool,
    pub workers: usize,
    pub overrides: ParamOverrides,
}

pub const DEFAULT_BATCH_EPOCHS: usize = 35;

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::new(ScenarioKind::Batch)
    }
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            epochs: None,
            trials: 5,
            replay: kind != ScenarioKind::Batch,
            temporal_context: true,
            profile: None,
            label_availability: 1.0,
            seed: 0,
            fixed_order: false,
            passes_per_batch: 1,
            test_collections: 3,
            evaluate_train: true,
            workers: 1,
            overrides: ParamOverrides::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GdmError::Config(m));
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.epochs == Some(0) {
            return bad("epochs must be positive".into());
        }
        if self.epochs.is_some() && self.kind != ScenarioKind::Batch {
            return bad(format!("epochs is fixed by the {} protocol", self.kind));
        }
        if !(self.label_availability > 0.0 && self.label_availability <= 1.0) {
            return bad(format!("label_availability must lie in (0, 1], got {}", self.label_availability));
        }
        if self.passes_per_batch == 0 {
            return bad("passes_per_batch must be positive".into());
        }
        if self.workers == 0 {
            return bad("workers must be positive".into());
        }
        self.gdm_config().validate()
    }

    pub fn effective_profile(&self) -> Profile {
        self.profile.unwrap_or_else(|| self.kind.default_profile())
    }

    /// Model configuration after profile selection, overrides and the
    /// temporal-context switch.
    pub fn gdm_config(&self) -> GdmConfig {
        let mut cfg = GdmConfig::from_profile(self.effective_profile(), self.replay);
        if !self.temporal_context {
            cfg = cfg.with_context_count(0);
        }
        let o = &self.overrides;
        for p in [&mut cfg.episodic, &mut cfg.semantic] {
            if let Some(m) = o.metric {
                p.metric = m;
            }
            if let Some(v) = o.removal_threshold {
                p.removal_threshold = v;
            }
            if let Some(v) = o.max_edge_age {
                p.max_edge_age = v;
            }
        }
        if let Some(v) = o.insertion_threshold_em {
            cfg.episodic.insertion_threshold = v;
        }
        if let Some(v) = o.insertion_threshold_sm {
            cfg.semantic.insertion_threshold = v;
        }
        if o.replay_window.is_some() {
            cfg.replay_window = o.replay_window;
        }
        if let Some(v) = o.replay_updates_links {
            cfg.replay_updates_links = v;
        }
        if let Some(v) = o.semantic_input {
            cfg.semantic_input = v;
        }
        cfg
    }

    /// Seed of trial `t`; depends only on the base seed and `t`.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        let mut rng = substream(self.seed, 0x7472_6961_6c00 + trial as u64);
        rng.gen()
    }
}

/// Substreams of a trial seed.
const STREAM_INIT: u64 = 1;
const STREAM_ORDER: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_LABELS: u64 = 4;
const STREAM_FOOTPRINT: u64 = 5;

/// Runs every trial of `config` on `dataset`.
pub fn run(config: &ScenarioConfig, dataset: &Dataset) -> Result<ScenarioReport> {
    config.validate()?;
    let split = Split::new(dataset, config.test_collections)?;
    split.check_disjoint(dataset)?;
    if config.kind == ScenarioKind::Nc || config.kind == ScenarioKind::Nic || config.kind == ScenarioKind::Ni {
        // Surface plan-shape errors before spending time on any trial.
        build_plan(config, dataset, &split, &mut substream(0, 0))?;
    }
    let trials: Vec<usize> = (0..config.trials).collect();
    let results: Vec<Result<TrialReport>> = if config.workers > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| GdmError::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| trials.par_iter().map(|&t| run_trial(config, dataset, &split, t)).collect())
    } else {
        trials.iter().map(|&t| run_trial(config, dataset, &split, t)).collect()
    };
    let trials = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ScenarioReport::new(config.clone(), trials))
}

pub fn run_batch(config: &ScenarioConfig, dataset: &Dataset) -> Result<ScenarioReport> {
    run(&ScenarioConfig { kind: ScenarioKind::Batch, ..config.clone() }, dataset)
}

pub fn run_incremental(config: &ScenarioConfig, dataset: &Dataset) -> Result<ScenarioReport> {
    run(&ScenarioConfig { kind: ScenarioKind::Incremental, ..config.clone() }, dataset)
}

pub fn run_ni(config: &ScenarioConfig, dataset: &Dataset) -> Result<ScenarioReport> {
    run(&ScenarioConfig { kind: ScenarioKind::Ni, ..config.clone() }, dataset)
}

pub fn run_nc(config: &ScenarioConfig, dataset: &Dataset) -> Result<ScenarioReport> {
    run(&ScenarioConfig { kind: ScenarioKind::Nc, ..config.clone() }, dataset)
}

pub fn run_nic(config: &ScenarioConfig, dataset: &Dataset) -> Result<ScenarioReport> {
    run(&ScenarioConfig { kind: ScenarioKind::Nic, ..config.clone() }, dataset)
}

/// Category presentation order for one trial.
fn category_order(config: &ScenarioConfig, categories: &[Label], rng: &mut ChaCha8Rng) -> Vec<Label> {
    let mut order = categories.to_vec();
    if !config.fixed_order {
        order.shuffle(rng);
    }
    order
}

/// Mini-batch schedule for one trial. Batch epochs are represented as one
/// mini-batch holding every training sequence.
fn build_plan(
    config: &ScenarioConfig,
    dataset: &Dataset,
    split: &Split,
    order_rng: &mut ChaCha8Rng,
) -> Result<(Vec<MiniBatch>, Vec<Label>)> {
    let categories = split.train_categories(dataset);
    match config.kind {
        ScenarioKind::Batch => {
            let epochs = config.epochs.unwrap_or(DEFAULT_BATCH_EPOCHS);
            let all = split.train_refs(dataset, |_| true);
            let batches = (0..epochs)
                .map(|e| MiniBatch {
                    name: format!("epoch {}", e + 1),
                    categories: categories.clone(),
                    sequences: all.clone(),
                })
                .collect();
            Ok((batches, categories))
        }
        ScenarioKind::Incremental => {
            if categories.len() < 2 {
                log::warn!("single-category dataset: incremental run degenerates to one batch epoch");
            }
            let order = category_order(config, &categories, order_rng);
            let batches = order
                .iter()
                .map(|&c| MiniBatch {
                    name: format!("category {c}"),
                    categories: vec![c],
                    sequences: split.train_refs(dataset, |s| s.category_id == Some(c)),
                })
                .collect();
            Ok((batches, order))
        }
        ScenarioKind::Ni => Ok((plan_ni(dataset, split)?, categories)),
        ScenarioKind::Nc => {
            let order = category_order(config, &categories, order_rng);
            Ok((plan_nc(dataset, split, &order)?, order))
        }
        ScenarioKind::Nic => {
            let order = category_order(config, &categories, order_rng);
            let plan = plan_nic(dataset, split, &order, order_rng)?;
            Ok((plan, order))
        }
    }
}

fn pick_seed_frames<'a>(dataset: &'a Dataset, refs: &[SeqRef], rng: &mut ChaCha8Rng) -> Result<[&'a [f64]; 2]> {
    let frames: Vec<&[f64]> = refs
        .iter()
        .flat_map(|r| r.get(dataset).frames.iter().map(|f| f.vector.as_slice()))
        .collect();
    if frames.len() < 2 {
        return Err(GdmError::Dataset("training data needs at least two frames".into()));
    }
    let picked = rand::seq::index::sample(rng, frames.len(), 2);
    Ok([frames[picked.index(0)], frames[picked.index(1)]])
}

/// One independent trial: fresh model, own seed, full schedule.
pub fn run_trial(config: &ScenarioConfig, dataset: &Dataset, split: &Split, trial: usize) -> Result<TrialReport> {
    let seed = config.trial_seed(trial);
    let (plan, order) = build_plan(config, dataset, split, &mut substream(seed, STREAM_ORDER))?;
    let first_batch = plan
        .first()
        .ok_or_else(|| GdmError::Dataset("no training data for this protocol".into()))?;
    let seeds = pick_seed_frames(dataset, &first_batch.sequences, &mut substream(seed, STREAM_INIT))?;
    let mut model = GdmModel::new(config.gdm_config(), dataset.dim, seeds)?;
    let mut shuffle_rng = substream(seed, STREAM_SHUFFLE);
    let mut label_rng = substream(seed, STREAM_LABELS);
    let p = config.label_availability;
    let cumulative = config.kind == ScenarioKind::Incremental;

    let mut records = Vec::with_capacity(plan.len());
    let mut seen: BTreeSet<Label> = BTreeSet::new();
    let mut seen_train: Vec<SeqRef> = Vec::new();
    let (mut labelled, mut presented) = (0u64, 0u64);

    for (e, batch) in plan.iter().enumerate() {
        let started = Instant::now();
        seen.extend(batch.categories.iter().copied());
        let mut refs = batch.sequences.clone();
        for _ in 0..config.passes_per_batch {
            refs.shuffle(&mut shuffle_rng);
            for r in &refs {
                model.reset_context();
                for f in &r.get(dataset).frames {
                    presented += 1;
                    let labels = if p >= 1.0 || label_rng.gen::<f64>() < p {
                        labelled += 1;
                        StepLabels::new(f.instance_id, f.category_id)
                    } else {
                        StepLabels::NONE
                    };
                    model.step(&f.vector, labels)?;
                }
            }
        }
        model.reset_context();
        let replayed = model.replay()?;
        let (em_prune, sm_prune) = model.prune();

        let test_seqs: Vec<&Sequence> = split
            .test_refs(dataset, |s| !cumulative || s.category_id.is_some_and(|c| seen.contains(&c)))
            .into_iter()
            .map(|r| r.get(dataset))
            .collect();
        let test = model.evaluate(test_seqs.iter().copied())?;
        let train = if config.evaluate_train {
            let train_refs: Vec<SeqRef> = if cumulative {
                seen_train.extend(batch.sequences.iter().copied());
                seen_train.clone()
            } else {
                batch.sequences.clone()
            };
            Some(model.evaluate(train_refs.iter().map(|r| r.get(dataset)))?)
        } else {
            None
        };
        records.push(EpochRecord {
            epoch: e + 1,
            batch: batch.name.clone(),
            neurons_em: model.episodic().len(),
            neurons_sm: model.semantic().len(),
            edges_em: model.episodic().edge_count(),
            edges_sm: model.semantic().edge_count(),
            acc_instance_train: train.as_ref().map(|t| t.instance_accuracy),
            acc_category_train: train.as_ref().map(|t| t.category_accuracy),
            acc_instance_test: test.instance_accuracy,
            acc_category_test: test.category_accuracy,
            acc_category_test_per_class: test.per_category.clone(),
            qe_em: test.qe_em,
            qe_sm: test.qe_sm,
            replay_sequences: replayed.sequences,
            pruned_neurons_em: em_prune.neurons_removed,
            pruned_neurons_sm: sm_prune.neurons_removed,
            max_edge_age_em: model.episodic().max_edge_age_present(),
            max_edge_age_sm: model.semantic().max_edge_age_present(),
            wall_ms: started.elapsed().as_millis() as u64,
        });
        log::debug!(
            "trial {trial} {}: em={} sm={} test_cat={:.4}",
            batch.name,
            model.episodic().len(),
            model.semantic().len(),
            test.category_accuracy
        );
    }

    let footprint = measure_footprint(
        &model,
        &split.test_refs(dataset, |_| true),
        dataset,
        &mut substream(seed, STREAM_FOOTPRINT),
    )?;
    Ok(TrialReport {
        trial,
        seed,
        category_order: order,
        records,
        labelled_frames: labelled,
        presented_frames: presented,
        footprint,
        model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub size_em_bytes: usize,
    pub size_sm_bytes: usize,
    /// Mean wall time of one single-frame prediction.
    pub inference_ms: f64,
    pub frames: usize,
}

pub const FOOTPRINT_FRAMES: usize = 50;

/// Snapshot sizes and mean single-frame inference time over up to 50
/// randomly chosen test frames.
pub fn measure_footprint(model: &GdmModel, test: &[SeqRef], dataset: &Dataset, rng: &mut ChaCha8Rng) -> Result<Footprint> {
    let (size_em_bytes, size_sm_bytes) = model.memory_sizes();
    let frames: Vec<&[f64]> = test
        .iter()
        .flat_map(|r| r.get(dataset).frames.iter().map(|f| f.vector.as_slice()))
        .collect();
    let n = frames.len().min(FOOTPRINT_FRAMES);
    let chosen: Vec<&[f64]> = rand::seq::index::sample(rng, frames.len(), n)
        .into_iter()
        .map(|i| frames[i])
        .collect();
    let started = Instant::now();
    for x in &chosen {
        std::hint::black_box(model.predict_sequence(std::iter::once(*x))?);
    }
    let total = started.elapsed().as_secs_f64() * 1e3;
    Ok(Footprint {
        size_em_bytes,
        size_sm_bytes,
        inference_ms: if n == 0 { 0.0 } else { total / n as f64 },
        frames: n,
    })
}
