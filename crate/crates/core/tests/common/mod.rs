//! Shared helpers for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use gdm_core::gwr::{habituate, GammaGwr, GrowthMode, GwrParams, StepLabels};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Textbook grow-when-required network on plain Manhattan distance, written
/// without reference to the library's internals.
pub struct PlainGwr {
    pub p: GwrParams,
    pub w: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub edges: BTreeMap<(usize, usize), u32>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl PlainGwr {
    pub fn new(p: GwrParams, a: &[f64], b: &[f64]) -> Self {
        Self {
            p,
            w: vec![a.to_vec(), b.to_vec()],
            h: vec![1.0, 1.0],
            edges: BTreeMap::new(),
        }
    }

    fn neighbors(&self, j: usize) -> Vec<usize> {
        self.edges
            .keys()
            .filter_map(|&(a, b)| if a == j { Some(b) } else if b == j { Some(a) } else { None })
            .collect()
    }

    /// Returns the BMU and whether a neuron was inserted.
    pub fn step(&mut self, x: &[f64]) -> (usize, bool) {
        let d: Vec<f64> = self
            .w
            .iter()
            .map(|w| w.iter().zip(x).map(|(a, b)| (a - b).abs()).sum())
            .collect();
        let mut order: Vec<usize> = (0..d.len()).collect();
        order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap().then(i.cmp(&j)));
        let (b, s) = (order[0], order[1]);
        let a = (-d[b]).exp();

        if a < self.p.insertion_threshold && self.h[b] < self.p.habituation_threshold {
            let r = self.w.len();
            self.w.push(self.w[b].iter().zip(x).map(|(wb, xi)| (wb + xi) / 2.0).collect());
            self.h.push(1.0);
            self.edges.remove(&key(b, s));
            self.edges.insert(key(r, b), 0);
            self.edges.insert(key(r, s), 0);
            return (b, true);
        }

        let nbs = self.neighbors(b);
        let hb = self.h[b];
        for i in 0..x.len() {
            self.w[b][i] += self.p.lr_bmu * hb * (x[i] - self.w[b][i]);
        }
        self.h[b] = habituate(hb, self.p.hab_tau_bmu, self.p.hab_kappa);
        for &n in &nbs {
            let hn = self.h[n];
            for i in 0..x.len() {
                self.w[n][i] += self.p.lr_neighbor * hn * (x[i] - self.w[n][i]);
            }
            self.h[n] = habituate(hn, self.p.hab_tau_neighbor, self.p.hab_kappa);
        }
        for &n in &nbs {
            *self.edges.get_mut(&key(b, n)).unwrap() += 1;
        }
        self.edges.insert(key(b, s), 0);
        (b, false)
    }

    /// Drops over-age edges, then isolated neurons (keeping two).
    pub fn prune(&mut self) -> usize {
        let max = self.p.max_edge_age;
        self.edges.retain(|_, age| *age <= max);
        let mut keep = vec![true; self.w.len()];
        let mut left = self.w.len();
        for (j, k) in keep.iter_mut().enumerate() {
            if left <= 2 {
                break;
            }
            if !self.edges.keys().any(|&(a, b)| a == j || b == j) {
                *k = false;
                left -= 1;
            }
        }
        let mut new_id = vec![usize::MAX; self.w.len()];
        let mut next = 0;
        for (j, &k) in keep.iter().enumerate() {
            if k {
                new_id[j] = next;
                next += 1;
            }
        }
        let removed = self.w.len() - next;
        let mut it = keep.iter();
        self.w.retain(|_| *it.next().unwrap());
        let mut it = keep.iter();
        self.h.retain(|_| *it.next().unwrap());
        self.edges = self
            .edges
            .iter()
            .map(|(&(a, b), &age)| (key(new_id[a], new_id[b]), age))
            .collect();
        removed
    }
}

#[derive(Debug, Default)]
pub struct OracleStats {
    pub frames: usize,
    pub insertions: usize,
    pub removed: usize,
}

/// Runs the library network and [`PlainGwr`] side by side on one random
/// stream and reports the first disagreement.
pub fn oracle_stream(seed: u64) -> Result<OracleStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.gen_range(1..=4);
    let frames = rng.gen_range(50..=200);
    let prune_every = rng.gen_range(20..=60);
    let mut p = GwrParams::plain(rng.gen_range(0.3..0.9));
    p.removal_threshold = 1.0;
    p.max_edge_age = rng.gen_range(3..=12);

    // Odd seeds drift across the input space so that stale neurons get cut off.
    let drift = if seed % 2 == 1 { 8.0 / frames as f64 } else { 0.0 };
    let draw = |rng: &mut ChaCha8Rng, t: usize| -> Vec<f64> {
        (0..dim).map(|_| drift * t as f64 + rng.gen_range(0.0..2.5)).collect()
    };
    let (s0, s1) = (draw(&mut rng, 0), draw(&mut rng, 0));
    let mut net = GammaGwr::new(dim, p.clone(), GrowthMode::Unsupervised, [&s0, &s1]).map_err(|e| e.to_string())?;
    let mut oracle = PlainGwr::new(p, &s0, &s1);
    let mut stats = OracleStats::default();

    for t in 0..frames {
        let x = draw(&mut rng, t);
        let out = net.step(&x, StepLabels::NONE).map_err(|e| e.to_string())?;
        let (b, inserted) = oracle.step(&x);
        if out.bmu != b {
            return Err(format!("seed {seed} frame {t}: bmu {} vs oracle {b}", out.bmu));
        }
        if out.inserted.is_some() != inserted {
            return Err(format!("seed {seed} frame {t}: insertion disagrees"));
        }
        stats.insertions += inserted as usize;
        if (t + 1) % prune_every == 0 {
            let r = net.prune();
            let removed = oracle.prune();
            if r.neurons_removed != removed {
                return Err(format!("seed {seed} frame {t}: pruned {} vs oracle {removed}", r.neurons_removed));
            }
            stats.removed += removed;
        }
        if net.len() != oracle.w.len() {
            return Err(format!("seed {seed} frame {t}: {} neurons vs oracle {}", net.len(), oracle.w.len()));
        }
        for (j, w) in oracle.w.iter().enumerate() {
            let err = net.weight(j).iter().zip(w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if err > 1e-9 {
                return Err(format!("seed {seed} frame {t}: neuron {j} weight error {err:e}"));
            }
            if (net.neuron(j).habituation() - oracle.h[j]).abs() > 1e-12 {
                return Err(format!("seed {seed} frame {t}: neuron {j} habituation differs"));
            }
        }
        let edges: BTreeMap<(usize, usize), u32> = net.edge_list().into_iter().map(|(a, b, age)| (key(a, b), age)).collect();
        if edges != oracle.edges {
            return Err(format!("seed {seed} frame {t}: edge sets differ"));
        }
        stats.frames += 1;
    }
    Ok(stats)
}

/// Draws `n` random habituation trajectories mixing BMU and neighbour updates
/// and checks the range and monotonicity properties.
pub fn habituation_trajectories(n: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for traj in 0..n {
        let kappa = rng.gen_range(1.0001..3.0);
        let tau_b = rng.gen_range(1e-4..=1.0 / kappa);
        let tau_n = rng.gen_range(1e-4..=1.0 / kappa);
        let floor = 1.0 - 1.0 / kappa;
        let len = rng.gen_range(1..=60);
        let mut h = 1.0;
        for _ in 0..len {
            let tau = if rng.gen_bool(0.5) { tau_b } else { tau_n };
            let next = habituate(h, tau, kappa);
            if !(next >= floor - 1e-12 && next <= 1.0) {
                return Err(format!("trajectory {traj}: h = {next} outside [{floor}, 1]"));
            }
            if h > floor && next > h + 1e-15 {
                return Err(format!("trajectory {traj}: h rose from {h} to {next}"));
            }
            h = next;
        }
    }
    Ok(())
}
