use std::collections::BTreeMap;

use crate::error::{GdmError, Result};
use crate::metric::{distance_unchecked, manhattan_bounded, MetricKind, RunningVariance};

use super::kernel::{activation, adapt_toward, global_context, habituate};
use super::labels::{Label, LabelCounts, LabelLevel};
use super::params::{ContextRate, GwrParams};

/// Dense neuron index. Ids are renumbered (order preserved) when neurons are
/// deleted, so "lowest id" always means "oldest surviving neuron".
pub type NeuronId = usize;

/// How a network decides to grow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthMode {
    /// Activity and habituation gates only (episodic memory).
    Unsupervised,
    /// Additionally requires a labelled frame whose category the BMU got wrong
    /// (semantic memory).
    Misclassification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neuron {
    /// `[w, c_1, .., c_K]`, each block `dim` long.
    pub(crate) state: Vec<f64>,
    pub(crate) habituation: f64,
    pub(crate) instance_counts: LabelCounts,
    pub(crate) category_counts: LabelCounts,
}

impl Neuron {
    pub(crate) fn fresh(state: Vec<f64>) -> Self {
        Self {
            state,
            habituation: 1.0,
            instance_counts: LabelCounts::new(),
            category_counts: LabelCounts::new(),
        }
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn habituation(&self) -> f64 {
        self.habituation
    }

    pub fn counts(&self, level: LabelLevel) -> &LabelCounts {
        match level {
            LabelLevel::Instance => &self.instance_counts,
            LabelLevel::Category => &self.category_counts,
        }
    }

    pub fn predict(&self, level: LabelLevel) -> Option<Label> {
        self.counts(level).best()
    }

    /// Applies the associative labelling rule to each provided label.
    pub fn update_labels(&mut self, labels: StepLabels, delta_pos: f64, delta_neg: f64) {
        if let Some(l) = labels.instance {
            self.instance_counts.reinforce(l, delta_pos, delta_neg);
        }
        if let Some(l) = labels.category {
            self.category_counts.reinforce(l, delta_pos, delta_neg);
        }
    }
}

/// Supervision attached to one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepLabels {
    pub instance: Option<Label>,
    pub category: Option<Label>,
}

impl StepLabels {
    pub const NONE: StepLabels = StepLabels {
        instance: None,
        category: None,
    };

    pub fn new(instance: Option<Label>, category: Option<Label>) -> Self {
        Self { instance, category }
    }
}

/// Short-term temporal state: global context descriptors and the previous BMU.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextState {
    /// `[C_1, .., C_K]`.
    pub(crate) contexts: Vec<f64>,
    pub(crate) prev: Option<NeuronId>,
}

impl ContextState {
    pub fn zeroed(dim: usize, k: usize) -> Self {
        Self {
            contexts: vec![0.0; dim * k],
            prev: None,
        }
    }

    pub fn reset(&mut self) {
        self.contexts.iter_mut().for_each(|c| *c = 0.0);
        self.prev = None;
    }

    pub fn contexts(&self) -> &[f64] {
        &self.contexts
    }

    pub fn prev(&self) -> Option<NeuronId> {
        self.prev
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestMatch {
    pub bmu: NeuronId,
    pub second: NeuronId,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub bmu: NeuronId,
    pub second: NeuronId,
    /// Neuron that represents this frame: the BMU, or the inserted neuron.
    pub winner: NeuronId,
    pub distance: f64,
    pub activation: f64,
    /// BMU habituation at the time the insertion gate was evaluated.
    pub bmu_habituation: f64,
    pub inserted: Option<NeuronId>,
    pub predicted_instance: Option<Label>,
    pub predicted_category: Option<Label>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PruneReport {
    pub edges_removed: usize,
    pub edges_reset: usize,
    pub neurons_removed: usize,
}

/// Recurrent grow-when-required network with gamma-memory temporal context.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaGwr {
    pub(crate) dim: usize,
    pub(crate) params: GwrParams,
    pub(crate) growth: GrowthMode,
    pub(crate) neurons: Vec<Neuron>,
    /// Symmetric adjacency: `edges[i][j]` is the age of edge `{i, j}`.
    pub(crate) edges: Vec<BTreeMap<NeuronId, u32>>,
    /// Temporal links `p(i, j)`, row-sparse.
    pub(crate) links: Vec<BTreeMap<NeuronId, f64>>,
    pub(crate) context: ContextState,
    pub(crate) step_counter: u64,
    pub(crate) variance: Option<RunningVariance>,
    pub(crate) learn_links: bool,
}

impl GammaGwr {
    /// Builds a two-neuron network whose weights equal the seed frames.
    pub fn new(dim: usize, params: GwrParams, growth: GrowthMode, seeds: [&[f64]; 2]) -> Result<Self> {
        if dim == 0 {
            return Err(GdmError::Contract("dimension must be positive".into()));
        }
        params.validate()?;
        for s in seeds {
            if s.len() != dim {
                return Err(GdmError::DimensionMismatch {
                    expected: dim,
                    found: s.len(),
                });
            }
        }
        let k = params.context_count();
        let neurons = seeds
            .iter()
            .map(|s| {
                let mut state = vec![0.0; dim * (k + 1)];
                state[..dim].copy_from_slice(s);
                Neuron::fresh(state)
            })
            .collect();
        let variance = params.metric.needs_scale().then(|| RunningVariance::new(dim));
        Ok(Self {
            dim,
            growth,
            neurons,
            edges: vec![BTreeMap::new(); 2],
            links: vec![BTreeMap::new(); 2],
            context: ContextState::zeroed(dim, k),
            step_counter: 0,
            variance,
            learn_links: true,
            params,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &GwrParams {
        &self.params
    }

    pub fn growth(&self) -> GrowthMode {
        self.growth
    }

    pub fn context_count(&self) -> usize {
        self.params.context_count()
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn neuron(&self, id: NeuronId) -> &Neuron {
        &self.neurons[id]
    }

    pub fn weight(&self, id: NeuronId) -> &[f64] {
        &self.neurons[id].state[..self.dim]
    }

    pub fn context_descriptor(&self, id: NeuronId, k: usize) -> &[f64] {
        assert!(k >= 1 && k <= self.context_count());
        &self.neurons[id].state[k * self.dim..(k + 1) * self.dim]
    }

    pub fn step_counter(&self) -> u64 {
        self.step_counter
    }

    pub fn context(&self) -> &ContextState {
        &self.context
    }

    pub fn edge_age(&self, a: NeuronId, b: NeuronId) -> Option<u32> {
        self.edges.get(a).and_then(|m| m.get(&b)).copied()
    }

    pub fn neighbors(&self, id: NeuronId) -> impl Iterator<Item = NeuronId> + '_ {
        self.edges[id].keys().copied()
    }

    /// All edges as `(low, high, age)`, sorted.
    pub fn edge_list(&self) -> Vec<(NeuronId, NeuronId, u32)> {
        let mut out = Vec::new();
        for (i, m) in self.edges.iter().enumerate() {
            for (&j, &age) in m.range(i + 1..) {
                out.push((i, j, age));
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(|m| m.len()).sum::<usize>() / 2
    }

    pub fn link(&self, from: NeuronId, to: NeuronId) -> f64 {
        self.links[from].get(&to).copied().unwrap_or(0.0)
    }

    pub fn link_row(&self, from: NeuronId) -> &BTreeMap<NeuronId, f64> {
        &self.links[from]
    }

    pub fn link_count(&self) -> usize {
        self.links.iter().map(|r| r.len()).sum()
    }

    /// Successor along the temporal links; ties go to the lowest id and an
    /// all-zero row has no successor.
    pub fn strongest_successor(&self, from: NeuronId) -> Option<NeuronId> {
        let mut best: Option<(NeuronId, f64)> = None;
        for (&j, &v) in &self.links[from] {
            if v <= 0.0 {
                continue;
            }
            match best {
                Some((_, bv)) if v <= bv => {}
                _ => best = Some((j, v)),
            }
        }
        best.map(|(j, _)| j)
    }

    pub fn set_link_learning(&mut self, on: bool) {
        self.learn_links = on;
    }

    pub fn link_learning(&self) -> bool {
        self.learn_links
    }

    /// Clears the temporal state at a sequence boundary.
    pub fn reset_context(&mut self) {
        self.context.reset();
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(GdmError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Advances `ctx` to the current frame using the previous BMU stored in it.
    pub fn advance_context(&self, ctx: &mut ContextState) {
        let k = self.context_count();
        if k == 0 {
            return;
        }
        match ctx.prev {
            Some(prev) => {
                global_context(&self.neurons[prev].state, self.dim, k, self.params.context_blend, &mut ctx.contexts)
            }
            None => ctx.contexts.iter_mut().for_each(|c| *c = 0.0),
        }
    }

    /// Updates the network's own global context from its previous BMU.
    pub fn update_global_context(&mut self) -> &[f64] {
        let mut ctx = std::mem::replace(&mut self.context, ContextState::zeroed(0, 0));
        self.advance_context(&mut ctx);
        self.context = ctx;
        &self.context.contexts
    }

    fn scale(&self) -> Option<&[f64]> {
        self.variance.as_ref().map(|v| v.variance())
    }

    /// Context-weighted dissimilarity between a query `[x, C_1..C_K]` and a
    /// neuron state.
    #[inline]
    fn weighted_distance(&self, query: &[f64], state: &[f64]) -> f64 {
        let dim = self.dim;
        let metric = self.params.metric;
        let scale = self.scale();
        let mut d = 0.0;
        for (k, &alpha) in self.params.context_weights.iter().enumerate() {
            if alpha == 0.0 {
                continue;
            }
            let r = k * dim..(k + 1) * dim;
            d += alpha * distance_unchecked(metric, &query[r.clone()], &state[r], scale);
        }
        d
    }

    /// Weighted distance, abandoned (`None`) once it provably exceeds
    /// `bound`. Only Manhattan supports early exit; other metrics run in full.
    #[inline]
    fn weighted_distance_bounded(&self, query: &[f64], state: &[f64], bound: f64) -> Option<f64> {
        if self.params.metric != MetricKind::Manhattan {
            return Some(self.weighted_distance(query, state));
        }
        let dim = self.dim;
        let mut d = 0.0;
        for (k, &alpha) in self.params.context_weights.iter().enumerate() {
            if alpha == 0.0 {
                continue;
            }
            let r = k * dim..(k + 1) * dim;
            d = manhattan_bounded(&query[r.clone()], &state[r], alpha, d, bound)?;
        }
        Some(d)
    }

    /// Two best-matching neurons for the query `[x, C_1..C_K]`. Ties go to
    /// the lowest id.
    pub fn find_bmu_query(&self, query: &[f64]) -> BestMatch {
        debug_assert!(self.neurons.len() >= 2);
        let (mut b, mut db) = (usize::MAX, f64::INFINITY);
        let (mut s, mut ds) = (usize::MAX, f64::INFINITY);
        for (j, n) in self.neurons.iter().enumerate() {
            let Some(d) = self.weighted_distance_bounded(query, &n.state, ds) else {
                continue;
            };
            if d < db {
                s = b;
                ds = db;
                b = j;
                db = d;
            } else if d < ds {
                s = j;
                ds = d;
            }
        }
        // Non-finite distances (NaN inputs) still yield a deterministic pair.
        if b == usize::MAX {
            b = 0;
            db = f64::INFINITY;
        }
        if s == usize::MAX {
            s = if b == 0 { 1 } else { 0 };
        }
        BestMatch {
            bmu: b,
            second: s,
            distance: db,
        }
    }

    fn fill_query(&self, x: &[f64], contexts: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(x);
        out.extend_from_slice(contexts);
    }

    /// BMU search against the network's current global context.
    pub fn find_bmu(&self, x: &[f64]) -> Result<BestMatch> {
        self.check_dim(x)?;
        let mut q = Vec::with_capacity(self.dim * (self.context_count() + 1));
        self.fill_query(x, &self.context.contexts, &mut q);
        Ok(self.find_bmu_query(&q))
    }

    /// Read-only inference step: advances `ctx` (a scratch copy of the
    /// temporal state) and returns the best match; the network is untouched.
    pub fn infer(&self, x: &[f64], ctx: &mut ContextState) -> Result<BestMatch> {
        self.check_dim(x)?;
        self.advance_context(ctx);
        let mut q = Vec::with_capacity(self.dim * (self.context_count() + 1));
        self.fill_query(x, &ctx.contexts, &mut q);
        let m = self.find_bmu_query(&q);
        ctx.prev = Some(m.bmu);
        Ok(m)
    }

    /// Creates a neuron halfway between the BMU and the query, wires it to the
    /// BMU and second BMU and drops the direct BMU–second edge.
    pub(crate) fn insert_between(&mut self, query: &[f64], bmu: NeuronId, second: NeuronId) -> NeuronId {
        let state: Vec<f64> = self.neurons[bmu]
            .state
            .iter()
            .zip(query)
            .map(|(w, q)| 0.5 * (w + q))
            .collect();
        let id = self.neurons.len();
        self.neurons.push(Neuron::fresh(state));
        self.edges.push(BTreeMap::new());
        self.links.push(BTreeMap::new());
        self.remove_edge(bmu, second);
        self.set_edge(id, bmu, 0);
        self.set_edge(id, second, 0);
        id
    }

    fn set_edge(&mut self, a: NeuronId, b: NeuronId, age: u32) {
        if a == b {
            return;
        }
        self.edges[a].insert(b, age);
        self.edges[b].insert(a, age);
    }

    fn remove_edge(&mut self, a: NeuronId, b: NeuronId) -> bool {
        let had = self.edges[a].remove(&b).is_some();
        self.edges[b].remove(&a);
        had
    }

    /// Connects (or refreshes) the BMU–second edge at age 0 and ages every
    /// other edge touching the BMU.
    pub fn update_edges(&mut self, bmu: NeuronId, second: NeuronId) {
        if bmu == second {
            return;
        }
        let others: Vec<NeuronId> = self.edges[bmu].keys().copied().filter(|&j| j != second).collect();
        for j in others {
            let age = self.edges[bmu][&j].saturating_add(1);
            self.set_edge(bmu, j, age);
        }
        self.set_edge(bmu, second, 0);
    }

    pub fn update_temporal_link(&mut self, from: NeuronId, to: NeuronId) {
        *self.links[from].entry(to).or_insert(0.0) += 1.0;
    }

    /// Processes one frame: context update, BMU search, growth or adaptation,
    /// edges, temporal links and labels.
    pub fn step(&mut self, x: &[f64], labels: StepLabels) -> Result<StepOutcome> {
        Ok(self.step_capturing(x, labels, false)?.0)
    }

    /// Like [`step`](Self::step); with `capture` set also returns the
    /// BMU's weight as it was before this step's adaptation.
    pub fn step_capturing(
        &mut self,
        x: &[f64],
        labels: StepLabels,
        capture: bool,
    ) -> Result<(StepOutcome, Option<Vec<f64>>)> {
        self.check_dim(x)?;
        if let Some(v) = self.variance.as_mut() {
            v.observe(x);
        }
        self.update_global_context();

        let mut query = Vec::with_capacity(self.dim * (self.context_count() + 1));
        self.fill_query(x, &self.context.contexts, &mut query);
        let m = self.find_bmu_query(&query);
        let (bmu, second, d_b) = (m.bmu, m.second, m.distance);
        let a = activation(d_b);
        let h_b = self.neurons[bmu].habituation;
        let predicted_instance = self.neurons[bmu].predict(LabelLevel::Instance);
        let predicted_category = self.neurons[bmu].predict(LabelLevel::Category);

        let p = &self.params;
        let mut grow = a < p.insertion_threshold && h_b < p.habituation_threshold;
        if self.growth == GrowthMode::Misclassification {
            grow &= match labels.category {
                Some(truth) => predicted_category != Some(truth),
                None => false,
            };
        }

        let mut prior = None;
        let inserted = if grow {
            let id = self.insert_between(&query, bmu, second);
            log::trace!("insert neuron {id}: a={a:.4} h_b={h_b:.4}");
            if capture {
                prior = Some(self.weight(bmu).to_vec());
            }
            Some(id)
        } else {
            if capture {
                prior = Some(self.weight(bmu).to_vec());
            }
            self.adapt_around(&query, bmu);
            self.update_edges(bmu, second);
            None
        };
        let winner = inserted.unwrap_or(bmu);

        if let (true, Some(prev)) = (self.learn_links, self.context.prev) {
            self.update_temporal_link(prev, winner);
        }
        let (dp, dn) = (self.params.label_delta_pos, self.params.label_delta_neg);
        self.neurons[winner].update_labels(labels, dp, dn);
        self.context.prev = Some(winner);
        self.step_counter += 1;

        let outcome = StepOutcome {
            bmu,
            second,
            winner,
            distance: d_b,
            activation: a,
            bmu_habituation: h_b,
            inserted,
            predicted_instance,
            predicted_category,
        };
        Ok((outcome, prior))
    }

    /// Adapts and habituates the BMU and its direct neighbours.
    fn adapt_around(&mut self, query: &[f64], bmu: NeuronId) {
        let dim = self.dim;
        let p = &self.params;
        let (lr_b, lr_n, kappa) = (p.lr_bmu, p.lr_neighbor, p.hab_kappa);
        let (tau_b, tau_n) = (p.hab_tau_bmu, p.hab_tau_neighbor);
        let (ctx_bmu, ctx_nb) = match p.context_rate {
            ContextRate::Separate => (p.lr_context, p.lr_neighbor),
            ContextRate::FollowWeights => (p.lr_bmu, p.lr_neighbor),
        };
        let neighbors: Vec<NeuronId> = self.edges[bmu].keys().copied().collect();

        let adapt = |n: &mut Neuron, lr_w: f64, lr_c: f64, tau: f64| {
            let h = n.habituation;
            let (w, c) = n.state.split_at_mut(dim);
            adapt_toward(w, &query[..dim], lr_w, h);
            adapt_toward(c, &query[dim..], lr_c, h);
            n.habituation = habituate(h, tau, kappa);
        };
        adapt(&mut self.neurons[bmu], lr_b, ctx_bmu, tau_b);
        for j in neighbors {
            adapt(&mut self.neurons[j], lr_n, ctx_nb, tau_n);
        }
    }

    /// End-of-epoch edge and neuron removal.
    ///
    /// With controlled removal active, over-age edges of neurons with
    /// habituation below the removal threshold are kept with their age reset;
    /// other over-age edges are deleted. Isolated neurons at or above the
    /// threshold are then deleted, never going below two neurons. With the
    /// threshold at 1 every over-age edge and every isolated neuron goes.
    pub fn prune(&mut self) -> PruneReport {
        let mut report = PruneReport::default();
        let max_age = self.params.max_edge_age;
        let controlled = self.params.controlled_removal();
        let nt = self.params.removal_threshold;
        let keeps = |h: f64| controlled && h < nt;

        for j in 0..self.neurons.len() {
            let over: Vec<NeuronId> = self.edges[j]
                .iter()
                .filter(|(_, &age)| age > max_age)
                .map(|(&i, _)| i)
                .collect();
            if over.is_empty() {
                continue;
            }
            if keeps(self.neurons[j].habituation) {
                for i in over {
                    self.set_edge(j, i, 0);
                    report.edges_reset += 1;
                }
            } else {
                for i in over {
                    self.remove_edge(j, i);
                    report.edges_removed += 1;
                }
            }
        }

        let mut doomed = Vec::new();
        let mut remaining = self.neurons.len();
        for j in 0..self.neurons.len() {
            if remaining <= 2 {
                break;
            }
            if self.edges[j].is_empty() && !keeps(self.neurons[j].habituation) {
                doomed.push(j);
                remaining -= 1;
            }
        }
        report.neurons_removed = doomed.len();
        self.remove_neurons(&doomed);
        report
    }

    /// Deletes the given (sorted, unique) neurons and renumbers the rest,
    /// dropping their edges and temporal-link rows and columns together.
    pub(crate) fn remove_neurons(&mut self, doomed: &[NeuronId]) {
        if doomed.is_empty() {
            return;
        }
        let n = self.neurons.len();
        let mut remap = vec![None; n];
        let mut next = 0;
        let mut di = 0;
        for (j, slot) in remap.iter_mut().enumerate() {
            if di < doomed.len() && doomed[di] == j {
                di += 1;
            } else {
                *slot = Some(next);
                next += 1;
            }
        }
        let remap_map = |m: &BTreeMap<NeuronId, u32>| -> BTreeMap<NeuronId, u32> {
            m.iter().filter_map(|(&k, &v)| remap[k].map(|nk| (nk, v))).collect()
        };
        let remap_links = |m: &BTreeMap<NeuronId, f64>| -> BTreeMap<NeuronId, f64> {
            m.iter().filter_map(|(&k, &v)| remap[k].map(|nk| (nk, v))).collect()
        };

        let neurons = std::mem::take(&mut self.neurons);
        let edges = std::mem::take(&mut self.edges);
        let links = std::mem::take(&mut self.links);
        for (j, ((neuron, e), l)) in neurons.into_iter().zip(edges).zip(links).enumerate() {
            if remap[j].is_some() {
                self.neurons.push(neuron);
                self.edges.push(remap_map(&e));
                self.links.push(remap_links(&l));
            }
        }
        self.context.prev = self.context.prev.and_then(|p| remap[p]);
    }

    /// Largest edge age currently present.
    pub fn max_edge_age_present(&self) -> u32 {
        self.edges.iter().flat_map(|m| m.values().copied()).max().unwrap_or(0)
    }

    #[cfg(test)]
    pub(crate) fn neuron_mut(&mut self, id: NeuronId) -> &mut Neuron {
        &mut self.neurons[id]
    }

    #[cfg(test)]
    pub(crate) fn set_context_for_test(&mut self, contexts: &[f64], prev: Option<NeuronId>) {
        self.context.contexts.copy_from_slice(contexts);
        self.context.prev = prev;
    }

    #[cfg(test)]
    pub(crate) fn set_edge_for_test(&mut self, a: NeuronId, b: NeuronId, age: u32) {
        self.set_edge(a, b, age);
    }

    #[cfg(test)]
    pub(crate) fn push_neuron_for_test(&mut self, state: Vec<f64>) -> NeuronId {
        self.neurons.push(Neuron::fresh(state));
        self.edges.push(BTreeMap::new());
        self.links.push(BTreeMap::new());
        self.neurons.len() - 1
    }

    #[cfg(test)]
    pub(crate) fn set_link_for_test(&mut self, from: NeuronId, to: NeuronId, v: f64) {
        self.links[from].insert(to, v);
    }
}
