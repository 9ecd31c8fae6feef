//! Dual-memory model: an episodic Gamma-GWR (instance level, unsupervised
//! growth) feeding a semantic Gamma-GWR (category level, growth only on
//! misclassification), plus intrinsic replay of temporal trajectories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::datagen::{FeatureFrame, Sequence};
use crate::error::{GdmError, Result};
use crate::gwr::{
    ContextState, GammaGwr, GrowthMode, GwrParams, Label, LabelLevel, NeuronId, PruneReport, StepLabels, StepOutcome,
};

/// Named hyperparameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Batch,
    Incremental,
}

impl Profile {
    /// `(episodic, semantic)` parameters.
    pub fn params(self) -> (GwrParams, GwrParams) {
        let base = GwrParams::base();
        match self {
            Profile::Batch => (
                GwrParams {
                    insertion_threshold: 0.7,
                    ..base.clone()
                },
                GwrParams {
                    insertion_threshold: 0.8,
                    ..base
                },
            ),
            Profile::Incremental => {
                let inc = GwrParams {
                    context_blend: 0.4,
                    lr_bmu: 0.5,
                    lr_neighbor: 0.005,
                    lr_context: 0.001,
                    ..base
                };
                (
                    GwrParams {
                        insertion_threshold: 0.5,
                        ..inc.clone()
                    },
                    GwrParams {
                        insertion_threshold: 0.7,
                        ..inc
                    },
                )
            }
        }
    }
}

/// Which episodic weight the semantic memory receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SemanticInput {
    /// Episodic BMU after this frame's adaptation.
    #[default]
    PostAdaptation,
    /// Episodic BMU as it was before this frame's adaptation.
    PreAdaptation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdmConfig {
    pub episodic: GwrParams,
    pub semantic: GwrParams,
    pub replay: bool,
    /// Pseudo-sequence length; `None` means `K_em + K_sm + 1`.
    pub replay_window: Option<usize>,
    /// Whether replayed frames also strengthen temporal links.
    pub replay_updates_links: bool,
    pub semantic_input: SemanticInput,
}

impl GdmConfig {
    pub fn from_profile(profile: Profile, replay: bool) -> Self {
        let (episodic, semantic) = profile.params();
        Self {
            episodic,
            semantic,
            replay,
            replay_window: None,
            replay_updates_links: true,
            semantic_input: SemanticInput::PostAdaptation,
        }
    }

    /// Forces both memories to `k` context descriptors.
    pub fn with_context_count(mut self, k: usize) -> Self {
        self.episodic = self.episodic.with_context_count(k);
        self.semantic = self.semantic.with_context_count(k);
        self
    }

    pub fn window(&self) -> usize {
        self.replay_window
            .unwrap_or(self.episodic.context_count() + self.semantic.context_count() + 1)
    }

    pub fn validate(&self) -> Result<()> {
        self.episodic.validate()?;
        self.semantic.validate()?;
        if self.window() == 0 {
            return Err(GdmError::Config("replay_window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Replayable trajectory reconstructed from the episodic temporal links.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSequence {
    pub source_neuron: NeuronId,
    pub neurons: Vec<NeuronId>,
    pub frames: Vec<Vec<f64>>,
    pub instance_labels: Vec<Option<Label>>,
    pub category_labels: Vec<Option<Label>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub sequences: usize,
    pub episodic_delta: i64,
    pub semantic_delta: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdmStep {
    pub episodic: StepOutcome,
    pub semantic: StepOutcome,
    pub instance: Option<Label>,
    pub category: Option<Label>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePrediction {
    pub instance: Option<Label>,
    pub category: Option<Label>,
    pub episodic_distance: f64,
    pub semantic_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub instance_accuracy: f64,
    pub category_accuracy: f64,
    pub qe_em: f64,
    pub qe_sm: f64,
    pub frames: usize,
    /// Category accuracy restricted to frames of each true category.
    pub per_category: BTreeMap<Label, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdmModel {
    pub(crate) config: GdmConfig,
    pub(crate) episodic: GammaGwr,
    pub(crate) semantic: GammaGwr,
}

pub const MODEL_MAGIC: &[u8; 4] = b"GDMS";
pub const MODEL_VERSION: u32 = 1;

impl GdmModel {
    /// Both memories start from the same two seed frames.
    pub fn new(config: GdmConfig, dim: usize, seeds: [&[f64]; 2]) -> Result<Self> {
        config.validate()?;
        let episodic = GammaGwr::new(dim, config.episodic.clone(), GrowthMode::Unsupervised, seeds)?;
        let semantic = GammaGwr::new(dim, config.semantic.clone(), GrowthMode::Misclassification, seeds)?;
        Ok(Self {
            config,
            episodic,
            semantic,
        })
    }

    pub fn config(&self) -> &GdmConfig {
        &self.config
    }

    pub fn episodic(&self) -> &GammaGwr {
        &self.episodic
    }

    pub fn semantic(&self) -> &GammaGwr {
        &self.semantic
    }

    pub fn dim(&self) -> usize {
        self.episodic.dim()
    }

    /// Clears temporal state in both memories (sequence boundary).
    pub fn reset_context(&mut self) {
        self.episodic.reset_context();
        self.semantic.reset_context();
    }

    /// Trains on one frame and returns the predictions made before the
    /// label update.
    pub fn step(&mut self, x: &[f64], labels: StepLabels) -> Result<GdmStep> {
        let capture = self.config.semantic_input == SemanticInput::PreAdaptation;
        let (em, prior) = self.episodic.step_capturing(x, labels, capture)?;
        let sm_input: Vec<f64> = match prior {
            Some(w) => w,
            None => self.episodic.weight(em.bmu).to_vec(),
        };
        let sm = self.semantic.step(&sm_input, StepLabels::new(None, labels.category))?;
        Ok(GdmStep {
            instance: em.predicted_instance,
            category: sm.predicted_category,
            episodic: em,
            semantic: sm,
        })
    }

    pub fn step_frame(&mut self, frame: &FeatureFrame) -> Result<GdmStep> {
        self.step(&frame.vector, StepLabels::new(frame.instance_id, frame.category_id))
    }

    /// Trains on a whole sequence, resetting temporal state first.
    pub fn train_sequence(&mut self, seq: &Sequence, keep_label: &mut dyn FnMut() -> bool) -> Result<()> {
        self.reset_context();
        for f in &seq.frames {
            let labels = if keep_label() {
                StepLabels::new(f.instance_id, f.category_id)
            } else {
                StepLabels::NONE
            };
            self.step(&f.vector, labels)?;
        }
        Ok(())
    }

    pub fn prune(&mut self) -> (PruneReport, PruneReport) {
        (self.episodic.prune(), self.semantic.prune())
    }

    /// Follows the strongest temporal link from every episodic neuron for
    /// `window` steps. Trajectories that hit a neuron without outgoing links
    /// before reaching the window are dropped.
    pub fn generate_rnats(&self) -> Vec<PseudoSequence> {
        let window = self.config.window();
        let em = &self.episodic;
        let mut out = Vec::new();
        for j in 0..em.len() {
            let mut path = vec![j];
            let mut cur = j;
            while path.len() < window {
                match em.strongest_successor(cur) {
                    Some(next) => {
                        path.push(next);
                        cur = next;
                    }
                    None => break,
                }
            }
            if path.len() < window {
                continue;
            }
            out.push(PseudoSequence {
                source_neuron: j,
                frames: path.iter().map(|&n| em.weight(n).to_vec()).collect(),
                instance_labels: path.iter().map(|&n| em.neuron(n).predict(LabelLevel::Instance)).collect(),
                category_labels: path.iter().map(|&n| em.neuron(n).predict(LabelLevel::Category)).collect(),
                neurons: path,
            });
        }
        out
    }

    /// Replays every pseudo-sequence through both memories, growth enabled.
    pub fn replay(&mut self) -> Result<ReplayReport> {
        if !self.config.replay {
            return Ok(ReplayReport::default());
        }
        let seqs = self.generate_rnats();
        let (em0, sm0) = (self.episodic.len() as i64, self.semantic.len() as i64);
        let links = self.config.replay_updates_links;
        let (em_links, sm_links) = (self.episodic.link_learning(), self.semantic.link_learning());
        self.episodic.set_link_learning(links && em_links);
        self.semantic.set_link_learning(links && sm_links);
        let res = (|| {
            for s in &seqs {
                self.reset_context();
                for (i, x) in s.frames.iter().enumerate() {
                    self.step(x, StepLabels::new(s.instance_labels[i], s.category_labels[i]))?;
                }
            }
            Ok::<_, GdmError>(())
        })();
        self.episodic.set_link_learning(em_links);
        self.semantic.set_link_learning(sm_links);
        self.reset_context();
        res?;
        Ok(ReplayReport {
            sequences: seqs.len(),
            episodic_delta: self.episodic.len() as i64 - em0,
            semantic_delta: self.semantic.len() as i64 - sm0,
        })
    }

    /// Read-only inference over one sequence; temporal state lives in scratch
    /// copies that start from zero.
    pub fn predict_sequence<'a, I>(&self, frames: I) -> Result<Vec<FramePrediction>>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let em = &self.episodic;
        let sm = &self.semantic;
        let mut em_ctx = ContextState::zeroed(em.dim(), em.context_count());
        let mut sm_ctx = ContextState::zeroed(sm.dim(), sm.context_count());
        let mut out = Vec::new();
        for x in frames {
            let e = em.infer(x, &mut em_ctx)?;
            let s = sm.infer(em.weight(e.bmu), &mut sm_ctx)?;
            out.push(FramePrediction {
                instance: em.neuron(e.bmu).predict(LabelLevel::Instance),
                category: sm.neuron(s.bmu).predict(LabelLevel::Category),
                episodic_distance: e.distance,
                semantic_distance: s.distance,
            });
        }
        Ok(out)
    }

    /// Frame-level accuracy and mean quantisation error over labelled
    /// sequences.
    pub fn evaluate<'a, I>(&self, sequences: I) -> Result<Evaluation>
    where
        I: IntoIterator<Item = &'a Sequence>,
    {
        let (mut frames, mut qe_em, mut qe_sm) = (0usize, 0.0, 0.0);
        let (mut inst_total, mut inst_hit, mut cat_total, mut cat_hit) = (0usize, 0usize, 0usize, 0usize);
        let mut per: BTreeMap<Label, (usize, usize)> = BTreeMap::new();
        for seq in sequences {
            let preds = self.predict_sequence(seq.frames.iter().map(|f| f.vector.as_slice()))?;
            for (f, p) in seq.frames.iter().zip(&preds) {
                frames += 1;
                qe_em += p.episodic_distance;
                qe_sm += p.semantic_distance;
                if let Some(l) = f.instance_id {
                    inst_total += 1;
                    inst_hit += (p.instance == Some(l)) as usize;
                }
                if let Some(l) = f.category_id {
                    let hit = (p.category == Some(l)) as usize;
                    cat_total += 1;
                    cat_hit += hit;
                    let e = per.entry(l).or_default();
                    e.0 += hit;
                    e.1 += 1;
                }
            }
        }
        if frames == 0 {
            return Err(GdmError::Dataset("cannot evaluate on an empty dataset".into()));
        }
        if inst_total == 0 && cat_total == 0 {
            return Err(GdmError::Dataset("evaluation frames carry no labels".into()));
        }
        let ratio = |hit: usize, total: usize| if total == 0 { 0.0 } else { hit as f64 / total as f64 };
        Ok(Evaluation {
            instance_accuracy: ratio(inst_hit, inst_total),
            category_accuracy: ratio(cat_hit, cat_total),
            qe_em: qe_em / frames as f64,
            qe_sm: qe_sm / frames as f64,
            frames,
            per_category: per.into_iter().map(|(l, (h, t))| (l, ratio(h, t))).collect(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MODEL_MAGIC);
        w.u32(MODEL_VERSION);
        w.u8(self.config.replay as u8);
        w.u64(self.config.replay_window.map(|v| v as u64 + 1).unwrap_or(0));
        w.u8(self.config.replay_updates_links as u8);
        w.u8(match self.config.semantic_input {
            SemanticInput::PostAdaptation => 0,
            SemanticInput::PreAdaptation => 1,
        });
        self.episodic.encode(&mut w);
        self.semantic.encode(&mut w);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect_magic(MODEL_MAGIC)?;
        let at = r.offset();
        let version = r.u32("version")?;
        if version != MODEL_VERSION {
            return Err(GdmError::parse(at, format!("unsupported model version {version}, expected {MODEL_VERSION}")));
        }
        let replay = r.u8("replay flag")? != 0;
        let window = match r.u64("replay window")? {
            0 => None,
            v => Some((v - 1) as usize),
        };
        let replay_updates_links = r.u8("replay link flag")? != 0;
        let semantic_input = match r.u8("semantic input")? {
            0 => SemanticInput::PostAdaptation,
            1 => SemanticInput::PreAdaptation,
            c => return Err(r.error(format!("unknown semantic-input code {c}"))),
        };
        let at = r.offset();
        let episodic = GammaGwr::decode(&mut r)?;
        let semantic = GammaGwr::decode(&mut r)?;
        if episodic.dim() != semantic.dim() {
            return Err(GdmError::parse(at, "episodic and semantic dimensions differ"));
        }
        if !r.is_done() {
            return Err(r.error("trailing bytes after model snapshot"));
        }
        Ok(Self {
            config: GdmConfig {
                episodic: episodic.params().clone(),
                semantic: semantic.params().clone(),
                replay,
                replay_window: window,
                replay_updates_links,
                semantic_input,
            },
            episodic,
            semantic,
        })
    }

    /// Serialised sizes of the episodic and semantic memories in bytes.
    pub fn memory_sizes(&self) -> (usize, usize) {
        (self.episodic.to_bytes().len(), self.semantic.to_bytes().len())
    }
}
