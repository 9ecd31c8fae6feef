//! Lossless binary dump of a single network (`GGWR`, version 1).

use std::collections::BTreeMap;

use crate::codec::{Reader, Writer};
use crate::error::Result;
use crate::metric::{MetricKind, RunningVariance};

use super::labels::LabelCounts;
use super::net::{ContextState, GammaGwr, GrowthMode, Neuron};
use super::params::{ContextRate, GwrParams};

pub const NET_MAGIC: &[u8; 4] = b"GGWR";
pub const NET_VERSION: u32 = 1;

const MAX_ITEMS: usize = 1 << 28;

fn write_counts(w: &mut Writer, c: &LabelCounts) {
    w.len_prefixed(c.len());
    for (l, v) in c.iter() {
        w.u32(l);
        w.f64(v);
    }
}

fn read_counts(r: &mut Reader<'_>) -> Result<LabelCounts> {
    let n = r.len("label table", MAX_ITEMS)?;
    let mut m = BTreeMap::new();
    for _ in 0..n {
        let l = r.u32("label")?;
        let v = r.f64("label count")?;
        if !(v >= 0.0) {
            return Err(r.error(format!("negative label count {v}")));
        }
        m.insert(l, v);
    }
    Ok(LabelCounts(m))
}

fn write_params(w: &mut Writer, p: &GwrParams) {
    w.f64(p.insertion_threshold);
    w.f64(p.habituation_threshold);
    w.f64(p.context_blend);
    w.len_prefixed(p.context_weights.len());
    w.f64s(&p.context_weights);
    w.f64(p.lr_bmu);
    w.f64(p.lr_neighbor);
    w.f64(p.lr_context);
    w.f64(p.hab_tau_bmu);
    w.f64(p.hab_tau_neighbor);
    w.f64(p.hab_kappa);
    w.u32(p.max_edge_age);
    w.f64(p.removal_threshold);
    w.f64(p.label_delta_pos);
    w.f64(p.label_delta_neg);
    w.u8(p.metric.code());
    w.u8(match p.context_rate {
        ContextRate::Separate => 0,
        ContextRate::FollowWeights => 1,
    });
}

fn read_params(r: &mut Reader<'_>) -> Result<GwrParams> {
    let at = r.offset();
    let insertion_threshold = r.f64("insertion_threshold")?;
    let habituation_threshold = r.f64("habituation_threshold")?;
    let context_blend = r.f64("context_blend")?;
    let nk = r.len("context weights", 64)?;
    let context_weights = r.f64s(nk, "context weights")?;
    let p = GwrParams {
        insertion_threshold,
        habituation_threshold,
        context_blend,
        context_weights,
        lr_bmu: r.f64("lr_bmu")?,
        lr_neighbor: r.f64("lr_neighbor")?,
        lr_context: r.f64("lr_context")?,
        hab_tau_bmu: r.f64("hab_tau_bmu")?,
        hab_tau_neighbor: r.f64("hab_tau_neighbor")?,
        hab_kappa: r.f64("hab_kappa")?,
        max_edge_age: r.u32("max_edge_age")?,
        removal_threshold: r.f64("removal_threshold")?,
        label_delta_pos: r.f64("label_delta_pos")?,
        label_delta_neg: r.f64("label_delta_neg")?,
        metric: {
            let c = r.u8("metric")?;
            MetricKind::from_code(c).ok_or_else(|| r.error(format!("unknown metric code {c}")))?
        },
        context_rate: match r.u8("context rate")? {
            0 => ContextRate::Separate,
            1 => ContextRate::FollowWeights,
            c => return Err(r.error(format!("unknown context-rate code {c}"))),
        },
    };
    p.validate()
        .map_err(|e| crate::error::GdmError::parse(at, format!("invalid parameters: {e}")))?;
    Ok(p)
}

impl GammaGwr {
    pub(crate) fn encode(&self, w: &mut Writer) {
        w.bytes(NET_MAGIC);
        w.u32(NET_VERSION);
        w.u64(self.dim as u64);
        w.u8(match self.growth {
            GrowthMode::Unsupervised => 0,
            GrowthMode::Misclassification => 1,
        });
        w.u8(self.learn_links as u8);
        write_params(w, &self.params);
        w.u64(self.step_counter);

        w.f64s(&self.context.contexts);
        match self.context.prev {
            Some(p) => {
                w.u8(1);
                w.u64(p as u64);
            }
            None => w.u8(0),
        }

        match &self.variance {
            Some(v) => {
                w.u8(1);
                w.u64(v.count);
                w.f64s(&v.mean);
                w.f64s(&v.m2);
                w.f64s(&v.variance);
            }
            None => w.u8(0),
        }

        w.len_prefixed(self.neurons.len());
        for n in &self.neurons {
            w.f64s(&n.state);
            w.f64(n.habituation);
            write_counts(w, &n.instance_counts);
            write_counts(w, &n.category_counts);
        }

        let edges = self.edge_list();
        w.len_prefixed(edges.len());
        for (i, j, age) in edges {
            w.u64(i as u64);
            w.u64(j as u64);
            w.u32(age);
        }

        w.len_prefixed(self.link_count());
        for (i, row) in self.links.iter().enumerate() {
            for (&j, &v) in row {
                w.u64(i as u64);
                w.u64(j as u64);
                w.f64(v);
            }
        }
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self> {
        r.expect_magic(NET_MAGIC)?;
        let at = r.offset();
        let version = r.u32("version")?;
        if version != NET_VERSION {
            return Err(crate::error::GdmError::parse(
                at,
                format!("unsupported network version {version} (expected {NET_VERSION})"),
            ));
        }
        let dim = r.len("dim", 1 << 20)?;
        if dim == 0 {
            return Err(r.error("dimension must be positive"));
        }
        let growth = match r.u8("growth mode")? {
            0 => GrowthMode::Unsupervised,
            1 => GrowthMode::Misclassification,
            c => return Err(r.error(format!("unknown growth mode {c}"))),
        };
        let learn_links = r.u8("link flag")? != 0;
        let params = read_params(r)?;
        let k = params.context_count();
        let step_counter = r.u64("step counter")?;

        let contexts = r.f64s(k * dim, "global context")?;
        let prev = match r.u8("prev flag")? {
            0 => None,
            _ => Some(r.u64("prev bmu")? as usize),
        };

        let variance = match r.u8("variance flag")? {
            0 => None,
            _ => Some(RunningVariance {
                count: r.u64("variance count")?,
                mean: r.f64s(dim, "variance mean")?,
                m2: r.f64s(dim, "variance m2")?,
                variance: r.f64s(dim, "variance")?,
            }),
        };

        let n = r.len("neuron count", MAX_ITEMS)?;
        if n < 2 {
            return Err(r.error(format!("network needs at least 2 neurons, found {n}")));
        }
        let mut neurons = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let state = r.f64s(dim * (k + 1), "neuron state")?;
            let habituation = r.f64("habituation")?;
            if !(0.0..=1.0).contains(&habituation) {
                return Err(r.error(format!("habituation {habituation} outside [0, 1]")));
            }
            neurons.push(Neuron {
                state,
                habituation,
                instance_counts: read_counts(r)?,
                category_counts: read_counts(r)?,
            });
        }
        if let Some(p) = prev {
            if p >= n {
                return Err(r.error(format!("previous BMU {p} out of range")));
            }
        }

        let mut edges = vec![BTreeMap::new(); n];
        let ne = r.len("edge count", MAX_ITEMS)?;
        for _ in 0..ne {
            let at = r.offset();
            let i = r.u64("edge endpoint")? as usize;
            let j = r.u64("edge endpoint")? as usize;
            let age = r.u32("edge age")?;
            if i >= n || j >= n || i == j {
                return Err(crate::error::GdmError::parse(at, format!("invalid edge ({i}, {j})")));
            }
            edges[i].insert(j, age);
            edges[j].insert(i, age);
        }

        let mut links = vec![BTreeMap::new(); n];
        let nl = r.len("link count", MAX_ITEMS)?;
        for _ in 0..nl {
            let at = r.offset();
            let i = r.u64("link source")? as usize;
            let j = r.u64("link target")? as usize;
            let v = r.f64("link weight")?;
            if i >= n || j >= n || !(v >= 0.0) {
                return Err(crate::error::GdmError::parse(at, format!("invalid link ({i}, {j}) = {v}")));
            }
            links[i].insert(j, v);
        }

        Ok(Self {
            dim,
            params,
            growth,
            neurons,
            edges,
            links,
            context: ContextState { contexts, prev },
            step_counter,
            variance,
            learn_links,
        })
    }

    /// Serialises the network to its binary dump.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let net = Self::decode(&mut r)?;
        if !r.is_done() {
            return Err(r.error("trailing bytes after network dump"));
        }
        Ok(net)
    }
}
