//! Synthetic sequential feature streams.
//!
//! Categories are points on a hypersphere; instances sit a small offset away
//! from their category; every sequence is a smooth periodic trajectory around
//! its instance prototype inside a random low-dimensional subspace, which
//! mimics an object seen from slowly changing viewpoints. Each collection
//! applies its own augmentation (noise level, frame dropping, occlusion).

mod format;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GdmError, Result};
use crate::gwr::Label;

pub use format::{dataset_files, read_dataset, read_dataset_file, write_collection_file, write_dataset, DataFormat, GDMF_MAGIC, GDMF_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub vector: Vec<f64>,
    pub category_id: Option<Label>,
    pub instance_id: Option<Label>,
    pub sequence_id: u64,
    pub frame_index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub id: u64,
    pub category_id: Option<Label>,
    pub instance_id: Option<Label>,
    pub frames: Vec<FeatureFrame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collection {
    pub id: u32,
    pub sequences: Vec<Sequence>,
}

impl Collection {
    pub fn frame_count(&self) -> usize {
        self.sequences.iter().map(|s| s.frames.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub collections: Vec<Collection>,
}

impl Dataset {
    pub fn frame_count(&self) -> usize {
        self.collections.iter().map(|c| c.frame_count()).sum()
    }

    pub fn sequences(&self) -> impl Iterator<Item = &Sequence> {
        self.collections.iter().flat_map(|c| c.sequences.iter())
    }

    pub fn frames(&self) -> impl Iterator<Item = &FeatureFrame> {
        self.sequences().flat_map(|s| s.frames.iter())
    }

    /// Sorted distinct category ids.
    pub fn categories(&self) -> Vec<Label> {
        let mut c: Vec<Label> = self.sequences().filter_map(|s| s.category_id).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Checks that every instance id maps to exactly one category.
    pub fn check_label_integrity(&self) -> Result<()> {
        let mut owner = std::collections::BTreeMap::new();
        for f in self.frames() {
            match (f.instance_id, f.category_id) {
                (Some(_), None) => {
                    return Err(GdmError::Dataset(format!(
                        "sequence {} frame {} has an instance label without a category",
                        f.sequence_id, f.frame_index
                    )))
                }
                (Some(i), Some(c)) => {
                    if let Some(prev) = owner.insert(i, c) {
                        if prev != c {
                            return Err(GdmError::Dataset(format!(
                                "instance {i} belongs to categories {prev} and {c}"
                            )));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Augmentation {
    /// Base per-coordinate Gaussian noise; collection `i` uses
    /// `noise_sigma * NOISE_LEVELS[i % 3]`.
    pub noise_sigma: f64,
    /// Probability of dropping a frame (down-sampling stand-in).
    pub drop_prob: f64,
    /// Length of the zeroed coordinate block applied on odd collections.
    pub occlusion_block: usize,
}

impl Default for Augmentation {
    fn default() -> Self {
        Self {
            noise_sigma: 0.0005,
            drop_prob: 0.0,
            occlusion_block: 0,
        }
    }
}

/// Per-collection multipliers of the base noise level.
pub const NOISE_LEVELS: [f64; 3] = [0.5, 1.0, 1.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollectionSpec {
    pub categories: usize,
    pub instances_per_category: usize,
    pub frames_per_sequence: usize,
    pub dim: usize,
    pub collections: usize,
    pub test_collections: usize,
    pub augmentation: Augmentation,
    pub seed: u64,
    /// Radius of the sphere carrying the category prototypes.
    pub radius: f64,
    /// Distance of every instance prototype from its category prototype.
    pub instance_spread: f64,
    /// Trajectory amplitude around the instance prototype.
    pub amplitude: f64,
    /// Dimension of each instance's trajectory subspace.
    pub trajectory_rank: usize,
    /// Required minimum category-prototype distance in units of the
    /// intra-class spread (`instance_spread + amplitude`).
    pub separation: f64,
}

impl Default for CollectionSpec {
    fn default() -> Self {
        Self {
            categories: 10,
            instances_per_category: 5,
            frames_per_sequence: 15,
            dim: 256,
            collections: 15,
            test_collections: 3,
            augmentation: Augmentation::default(),
            seed: 0,
            radius: 1.0,
            instance_spread: 0.08,
            amplitude: 0.01,
            trajectory_rank: 2,
            separation: 6.0,
        }
    }
}

const MAX_REJECTIONS: usize = 10_000;

impl CollectionSpec {
    pub fn train_collections(&self) -> usize {
        self.collections - self.test_collections
    }

    pub fn intra_class_spread(&self) -> f64 {
        self.instance_spread + self.amplitude
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GdmError::Config(m.to_string()));
        if self.categories == 0 {
            return bad("categories must be positive");
        }
        if self.instances_per_category == 0 {
            return bad("instances_per_category must be positive");
        }
        if self.frames_per_sequence == 0 {
            return bad("frames_per_sequence must be positive");
        }
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.collections == 0 {
            return bad("collections must be positive");
        }
        if self.test_collections >= self.collections {
            return bad("test_collections must leave at least one training collection");
        }
        let a = &self.augmentation;
        if !(a.noise_sigma >= 0.0) {
            return bad("noise_sigma must be non-negative");
        }
        if !(0.0..1.0).contains(&a.drop_prob) {
            return bad("drop_prob must lie in [0, 1)");
        }
        if a.occlusion_block > self.dim {
            return bad("occlusion_block exceeds dim");
        }
        if !(self.radius > 0.0) || !(self.instance_spread >= 0.0) || !(self.amplitude >= 0.0) {
            return bad("radius must be positive, spread and amplitude non-negative");
        }
        if self.trajectory_rank == 0 || self.trajectory_rank > self.dim {
            return bad("trajectory_rank must lie in 1..=dim");
        }
        if !(self.separation >= 0.0) {
            return bad("separation must be non-negative");
        }
        Ok(())
    }

    pub fn instance_label(&self, category: usize, instance: usize) -> Label {
        (category * self.instances_per_category + instance) as Label
    }

    fn sequence_id(&self, collection: usize, category: usize, instance: usize) -> u64 {
        ((collection * self.categories + category) * self.instances_per_category + instance) as u64
    }
}

/// Deterministic substream of the dataset seed.
pub(crate) fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_vec(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit_vec(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let mut v = gaussian_vec(rng, dim);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
}

/// `rank` orthonormal directions via Gram–Schmidt on Gaussian draws.
fn orthonormal_basis(rng: &mut impl Rng, dim: usize, rank: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rank);
    while basis.len() < rank {
        let mut v = gaussian_vec(rng, dim);
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    basis
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Prototype geometry shared by every collection.
#[derive(Debug, Clone)]
pub struct Prototypes {
    pub categories: Vec<Vec<f64>>,
    /// Indexed by instance label.
    pub instances: Vec<Vec<f64>>,
    /// Trajectory basis per instance.
    pub subspaces: Vec<Vec<Vec<f64>>>,
}

impl Prototypes {
    pub fn build(spec: &CollectionSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = substream(spec.seed, 0);
        let min_sep = spec.separation * spec.intra_class_spread();
        let mut categories: Vec<Vec<f64>> = Vec::with_capacity(spec.categories);
        let mut rejections = 0;
        while categories.len() < spec.categories {
            let cand: Vec<f64> = unit_vec(&mut rng, spec.dim).into_iter().map(|x| x * spec.radius).collect();
            if categories.iter().all(|c| euclid(c, &cand) >= min_sep) {
                categories.push(cand);
            } else {
                rejections += 1;
                if rejections >= MAX_REJECTIONS {
                    return Err(GdmError::Config(format!(
                        "could not place {} category prototypes {min_sep:.4} apart on a radius-{} sphere in {} dims; \
                         increase dim or radius, or reduce categories or separation",
                        spec.categories, spec.radius, spec.dim
                    )));
                }
            }
        }
        let mut instances = Vec::new();
        let mut subspaces = Vec::new();
        for c in &categories {
            for _ in 0..spec.instances_per_category {
                let off = unit_vec(&mut rng, spec.dim);
                instances.push(c.iter().zip(&off).map(|(a, o)| a + spec.instance_spread * o).collect());
                subspaces.push(orthonormal_basis(&mut rng, spec.dim, spec.trajectory_rank));
            }
        }
        Ok(Self {
            categories,
            instances,
            subspaces,
        })
    }
}

/// Generates the full dataset described by `spec`.
pub fn generate(spec: &CollectionSpec) -> Result<Dataset> {
    let protos = Prototypes::build(spec)?;
    let collections = (0..spec.collections)
        .map(|c| generate_collection(spec, &protos, c))
        .collect();
    Ok(Dataset {
        dim: spec.dim,
        collections,
    })
}

/// Generates one collection; each sequence draws from its own substream.
pub fn generate_collection(spec: &CollectionSpec, protos: &Prototypes, collection: usize) -> Collection {
    let aug = &spec.augmentation;
    let sigma = aug.noise_sigma * NOISE_LEVELS[collection % NOISE_LEVELS.len()];
    let omega = std::f64::consts::TAU / spec.frames_per_sequence as f64;
    let mut sequences = Vec::with_capacity(spec.categories * spec.instances_per_category);
    for cat in 0..spec.categories {
        for inst in 0..spec.instances_per_category {
            let id = spec.sequence_id(collection, cat, inst);
            let label = spec.instance_label(cat, inst);
            let mut rng = substream(spec.seed, 1 + id);
            let phases: Vec<f64> = (0..spec.trajectory_rank)
                .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                .collect();
            let occlusion = (aug.occlusion_block > 0 && collection % 2 == 1)
                .then(|| rng.gen_range(0..=spec.dim - aug.occlusion_block));
            let center = &protos.instances[label as usize];
            let basis = &protos.subspaces[label as usize];
            let mut frames = Vec::with_capacity(spec.frames_per_sequence);
            for t in 0..spec.frames_per_sequence {
                let mut v = center.clone();
                for (r, (dir, phase)) in basis.iter().zip(&phases).enumerate() {
                    let arg = omega * t as f64 + phase;
                    let coef = spec.amplitude * if r % 2 == 0 { arg.sin() } else { arg.cos() };
                    v.iter_mut().zip(dir).for_each(|(x, d)| *x += coef * d);
                }
                if sigma > 0.0 {
                    for x in v.iter_mut() {
                        let n: f64 = StandardNormal.sample(&mut rng);
                        *x += sigma * n;
                    }
                }
                if let Some(start) = occlusion {
                    v[start..start + aug.occlusion_block].iter_mut().for_each(|x| *x = 0.0);
                }
                // Draw unconditionally so the stream does not depend on drop_prob.
                let u: f64 = rng.gen();
                if t > 0 && u < aug.drop_prob {
                    continue;
                }
                frames.push(FeatureFrame {
                    vector: v,
                    category_id: Some(cat as Label),
                    instance_id: Some(label),
                    sequence_id: id,
                    frame_index: t as u32,
                });
            }
            sequences.push(Sequence {
                id,
                category_id: Some(cat as Label),
                instance_id: Some(label),
                frames,
            });
        }
    }
    Collection {
        id: collection as u32,
        sequences,
    }
}
