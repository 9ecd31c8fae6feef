//! Per-epoch records, trial aggregation and the line-delimited metrics
//! format.
//!
//! Metrics file (one JSON object per line, `schema` = 1):
//!
//! * `{"record":"header", "schema", "config"}`
//! * `{"record":"epoch", "trial", "seed", ...EpochRecord}` for every trial and epoch
//! * `{"record":"trial", "trial", "seed", "category_order", "labelled_frames",
//!   "presented_frames", "size_em_bytes", "size_sm_bytes"}`
//! * `{"record":"summary", ...EpochSummary}` for every epoch
//!
//! Wall-clock values live in a separate timings file so that metric files
//! are byte-identical across reruns.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::gdm::GdmModel;
use crate::gwr::Label;

use super::{Footprint, ScenarioConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub batch: String,
    pub neurons_em: usize,
    pub neurons_sm: usize,
    pub edges_em: usize,
    pub edges_sm: usize,
    pub acc_instance_train: Option<f64>,
    pub acc_category_train: Option<f64>,
    pub acc_instance_test: f64,
    pub acc_category_test: f64,
    pub acc_category_test_per_class: BTreeMap<Label, f64>,
    pub qe_em: f64,
    pub qe_sm: f64,
    pub replay_sequences: usize,
    pub pruned_neurons_em: usize,
    pub pruned_neurons_sm: usize,
    pub max_edge_age_em: u32,
    pub max_edge_age_sm: u32,
    #[serde(skip)]
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub category_order: Vec<Label>,
    pub records: Vec<EpochRecord>,
    pub labelled_frames: u64,
    pub presented_frames: u64,
    pub footprint: Footprint,
    pub model: GdmModel,
}

impl TrialReport {
    pub fn last(&self) -> &EpochRecord {
        self.records.last().expect("trial has at least one epoch")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: 0.0, sd: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub neurons_em: Stat,
    pub neurons_sm: Stat,
    pub acc_instance_train: Option<Stat>,
    pub acc_category_train: Option<Stat>,
    pub acc_instance_test: Stat,
    pub acc_category_test: Stat,
    pub qe_em: Stat,
    pub qe_sm: Stat,
    pub replay_sequences: Stat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub config: ScenarioConfig,
    pub trials: Vec<TrialReport>,
    pub summary: Vec<EpochSummary>,
}

impl ScenarioReport {
    pub fn new(config: ScenarioConfig, trials: Vec<TrialReport>) -> Self {
        let epochs = trials.iter().map(|t| t.records.len()).min().unwrap_or(0);
        let summary = (0..epochs)
            .map(|e| {
                let col = |f: &dyn Fn(&EpochRecord) -> f64| -> Stat {
                    Stat::of(&trials.iter().map(|t| f(&t.records[e])).collect::<Vec<_>>())
                };
                let opt = |f: &dyn Fn(&EpochRecord) -> Option<f64>| -> Option<Stat> {
                    let v: Option<Vec<f64>> = trials.iter().map(|t| f(&t.records[e])).collect();
                    v.map(|v| Stat::of(&v))
                };
                EpochSummary {
                    epoch: e + 1,
                    neurons_em: col(&|r| r.neurons_em as f64),
                    neurons_sm: col(&|r| r.neurons_sm as f64),
                    acc_instance_train: opt(&|r| r.acc_instance_train),
                    acc_category_train: opt(&|r| r.acc_category_train),
                    acc_instance_test: col(&|r| r.acc_instance_test),
                    acc_category_test: col(&|r| r.acc_category_test),
                    qe_em: col(&|r| r.qe_em),
                    qe_sm: col(&|r| r.qe_sm),
                    replay_sequences: col(&|r| r.replay_sequences as f64),
                }
            })
            .collect();
        Self {
            config,
            trials,
            summary,
        }
    }

    pub fn final_summary(&self) -> Option<&EpochSummary> {
        self.summary.last()
    }

    /// Mean over trials of the final test category accuracy.
    pub fn final_category_accuracy(&self) -> f64 {
        self.final_summary().map(|s| s.acc_category_test.mean).unwrap_or(0.0)
    }

    pub fn write_metrics(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let mut line = |v: serde_json::Value| writeln!(out, "{v}");
        let mut config = serde_json::to_value(&self.config).map_err(std::io::Error::other)?;
        config.as_object_mut().expect("config serialises to an object").remove("workers");
        line(json!({
            "record": "header",
            "schema": REPORT_SCHEMA_VERSION,
            "config": config,
        }))?;
        for t in &self.trials {
            for r in &t.records {
                let mut v = serde_json::to_value(r).map_err(std::io::Error::other)?;
                let obj = v.as_object_mut().expect("record serialises to an object");
                obj.insert("record".into(), json!("epoch"));
                obj.insert("trial".into(), json!(t.trial));
                obj.insert("seed".into(), json!(t.seed));
                line(v)?;
            }
            line(json!({
                "record": "trial",
                "trial": t.trial,
                "seed": t.seed,
                "category_order": t.category_order,
                "labelled_frames": t.labelled_frames,
                "presented_frames": t.presented_frames,
                "size_em_bytes": t.footprint.size_em_bytes,
                "size_sm_bytes": t.footprint.size_sm_bytes,
            }))?;
        }
        for s in &self.summary {
            let mut v = serde_json::to_value(s).map_err(std::io::Error::other)?;
            v.as_object_mut()
                .expect("summary serialises to an object")
                .insert("record".into(), json!("summary"));
            line(v)?;
        }
        Ok(())
    }

    pub fn write_timings(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for t in &self.trials {
            for r in &t.records {
                writeln!(out, "{}", json!({"trial": t.trial, "epoch": r.epoch, "wall_ms": r.wall_ms}))?;
            }
            writeln!(
                out,
                "{}",
                json!({"trial": t.trial, "inference_ms": t.footprint.inference_ms, "frames": t.footprint.frames})
            )?;
        }
        Ok(())
    }

    pub fn metrics_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_metrics(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}
