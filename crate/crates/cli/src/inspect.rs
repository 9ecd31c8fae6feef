//! Snapshot loading, textual summaries and PCA projection tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use gdm_core::gdm::{GdmModel, MODEL_MAGIC};
use gdm_core::gwr::{GammaGwr, LabelLevel, NET_MAGIC};
use gdm_core::pca;
use gdm_core::{GdmError, Result};

pub enum Snapshot {
    Model(Box<GdmModel>),
    Network(Box<GammaGwr>),
}

impl Snapshot {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(NET_MAGIC) {
            return Ok(Snapshot::Network(Box::new(GammaGwr::from_bytes(bytes)?)));
        }
        Ok(Snapshot::Model(Box::new(GdmModel::from_bytes(bytes)?)))
    }

    /// The network selected by `which` (`em` or `sm`; ignored for a plain
    /// network dump).
    pub fn network(&self, which: &str) -> Result<&GammaGwr> {
        match (self, which) {
            (Snapshot::Network(n), _) => Ok(n),
            (Snapshot::Model(m), "em") => Ok(m.episodic()),
            (Snapshot::Model(m), "sm") => Ok(m.semantic()),
            (_, other) => Err(GdmError::Config(format!("unknown network '{other}' (em or sm)"))),
        }
    }
}

const AGE_BUCKETS: u32 = 10;

fn label_table(out: &mut String, net: &GammaGwr, level: LabelLevel, name: &str) {
    let mut winners: BTreeMap<u32, usize> = BTreeMap::new();
    let mut unlabelled = 0;
    for n in net.neurons() {
        match n.predict(level) {
            Some(l) => *winners.entry(l).or_default() += 1,
            None => unlabelled += 1,
        }
    }
    let cells: Vec<String> = winners.iter().map(|(l, c)| format!("{l}:{c}")).collect();
    let _ = writeln!(out, "  {name} labels (label:neurons): {} unlabelled:{unlabelled}", cells.join(" "));
}

fn summarize_net(out: &mut String, title: &str, net: &GammaGwr) {
    let p = net.params();
    let _ = writeln!(out, "[{title}]");
    let _ = writeln!(out, "  neurons: {}, edges: {}", net.len(), net.edge_count());
    let _ = writeln!(
        out,
        "  dim: {}, contexts: {}, metric: {}, growth: {:?}",
        net.dim(),
        net.context_count(),
        p.metric,
        net.growth()
    );
    let _ = writeln!(
        out,
        "  insertion_threshold: {}, habituation_threshold: {}, removal_threshold: {}, max_edge_age: {}",
        p.insertion_threshold, p.habituation_threshold, p.removal_threshold, p.max_edge_age
    );
    let hs: Vec<f64> = net.neurons().iter().map(|n| n.habituation()).collect();
    let (lo, hi) = hs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &h| (a.min(h), b.max(h)));
    let mean = hs.iter().sum::<f64>() / hs.len() as f64;
    let _ = writeln!(out, "  habituation: min {lo:.6} mean {mean:.6} max {hi:.6}");
    label_table(out, net, LabelLevel::Category, "category");
    label_table(out, net, LabelLevel::Instance, "instance");

    let width = (p.max_edge_age / AGE_BUCKETS).max(1);
    let mut hist: BTreeMap<u32, usize> = BTreeMap::new();
    for (_, _, age) in net.edge_list() {
        *hist.entry(age / width).or_default() += 1;
    }
    let cells: Vec<String> = hist
        .iter()
        .map(|(b, c)| format!("[{}..{}):{c}", b * width, (b + 1) * width))
        .collect();
    let _ = writeln!(out, "  edge ages: {}", if cells.is_empty() { "-".into() } else { cells.join(" ") });
    let n = net.len() as f64;
    let nnz = net.link_count();
    let _ = writeln!(out, "  temporal links: {nnz} non-zero of {} ({:.4}% dense)", net.len() * net.len(), 100.0 * nnz as f64 / (n * n));
}

/// Deterministic human-readable summary of a snapshot.
pub fn summary(snap: &Snapshot) -> String {
    let mut out = String::new();
    match snap {
        Snapshot::Network(net) => {
            let _ = writeln!(out, "network snapshot ({})", String::from_utf8_lossy(NET_MAGIC));
            summarize_net(&mut out, "network", net);
        }
        Snapshot::Model(m) => {
            let c = m.config();
            let _ = writeln!(out, "model snapshot ({})", String::from_utf8_lossy(MODEL_MAGIC));
            let _ = writeln!(
                out,
                "replay: {}, window: {}, replay_updates_links: {}, semantic_input: {:?}",
                c.replay,
                c.window(),
                c.replay_updates_links,
                c.semantic_input
            );
            summarize_net(&mut out, "episodic", m.episodic());
            summarize_net(&mut out, "semantic", m.semantic());
        }
    }
    out
}

/// CSV rows `id,x,y,category,instance,habituation,neighbors` for the
/// network's weight vectors projected onto two principal components.
pub fn projection_table(net: &GammaGwr) -> Result<(String, pca::Projection)> {
    if net.len() < 3 {
        log::warn!("only {} neurons; the projection is not informative", net.len());
    }
    let rows: Vec<&[f64]> = (0..net.len()).map(|i| net.weight(i)).collect();
    let proj = pca::project(&rows)?;
    let mut out = String::from("id,x,y,category,instance,habituation,neighbors\n");
    let label = |l: Option<u32>| l.map(|v| v.to_string()).unwrap_or_default();
    for (i, [x, y]) in proj.coords.iter().enumerate() {
        let n = net.neuron(i);
        let nb: Vec<String> = net.neighbors(i).map(|j| j.to_string()).collect();
        let _ = writeln!(
            out,
            "{i},{x:?},{y:?},{},{},{:?},{}",
            label(n.predict(LabelLevel::Category)),
            label(n.predict(LabelLevel::Instance)),
            n.habituation(),
            nb.join(";")
        );
    }
    Ok((out, proj))
}
