//! Mini-batch schedules and the train/test split.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::datagen::{Dataset, Sequence};
use crate::error::{GdmError, Result};
use crate::gwr::Label;

/// Position of a sequence inside a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeqRef {
    pub collection: usize,
    pub sequence: usize,
}

impl SeqRef {
    pub fn get<'a>(&self, dataset: &'a Dataset) -> &'a Sequence {
        &dataset.collections[self.collection].sequences[self.sequence]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    pub name: String,
    pub categories: Vec<Label>,
    pub sequences: Vec<SeqRef>,
}

/// The last `test_collections` collections are held out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Split {
    pub train: usize,
    pub test: usize,
}

impl Split {
    pub fn new(dataset: &Dataset, test_collections: usize) -> Result<Self> {
        let n = dataset.collections.len();
        if test_collections == 0 || test_collections >= n {
            return Err(GdmError::PlanShape {
                scenario: "split",
                required: format!("more than {test_collections} collections and at least one test collection"),
                found: format!("{n} collections"),
            });
        }
        Ok(Self {
            train: n - test_collections,
            test: test_collections,
        })
    }

    fn refs(dataset: &Dataset, range: std::ops::Range<usize>, keep: impl Fn(&Sequence) -> bool) -> Vec<SeqRef> {
        range
            .flat_map(|c| {
                dataset.collections[c]
                    .sequences
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| keep(s))
                    .map(move |(i, _)| SeqRef {
                        collection: c,
                        sequence: i,
                    })
            })
            .collect()
    }

    pub fn train_refs(&self, dataset: &Dataset, keep: impl Fn(&Sequence) -> bool) -> Vec<SeqRef> {
        Self::refs(dataset, 0..self.train, keep)
    }

    pub fn test_refs(&self, dataset: &Dataset, keep: impl Fn(&Sequence) -> bool) -> Vec<SeqRef> {
        Self::refs(dataset, self.train..self.train + self.test, keep)
    }

    pub fn train_categories(&self, dataset: &Dataset) -> Vec<Label> {
        let set: BTreeSet<Label> = self
            .train_refs(dataset, |_| true)
            .iter()
            .filter_map(|r| r.get(dataset).category_id)
            .collect();
        set.into_iter().collect()
    }

    /// Fails if any sequence id occurs on both sides of the split.
    pub fn check_disjoint(&self, dataset: &Dataset) -> Result<()> {
        let train: BTreeSet<u64> = self.train_refs(dataset, |_| true).iter().map(|r| r.get(dataset).id).collect();
        for r in self.test_refs(dataset, |_| true) {
            let id = r.get(dataset).id;
            if train.contains(&id) {
                return Err(GdmError::Dataset(format!("sequence {id} appears in both train and test collections")));
            }
        }
        Ok(())
    }
}

pub const NI_TRAIN_COLLECTIONS: usize = 12;
pub const NC_BATCH_SIZES: [usize; 4] = [4, 2, 2, 2];
pub const NIC_BATCHES: usize = 48;
const PROTOCOL_CATEGORIES: usize = 10;

fn require_categories(scenario: &'static str, required: &str, found: usize) -> Result<()> {
    if found != PROTOCOL_CATEGORIES {
        return Err(GdmError::PlanShape {
            scenario,
            required: required.to_string(),
            found: format!("{found} categories"),
        });
    }
    Ok(())
}

/// One mini-batch per training collection, all categories each.
pub fn plan_ni(dataset: &Dataset, split: &Split) -> Result<Vec<MiniBatch>> {
    if split.train != NI_TRAIN_COLLECTIONS {
        return Err(GdmError::PlanShape {
            scenario: "ni",
            required: format!("{NI_TRAIN_COLLECTIONS} training collections (one mini-batch each)"),
            found: format!("{} training collections", split.train),
        });
    }
    Ok((0..split.train)
        .map(|c| {
            let sequences: Vec<SeqRef> = split
                .train_refs(dataset, |_| true)
                .into_iter()
                .filter(|r| r.collection == c)
                .collect();
            let categories: BTreeSet<Label> = sequences.iter().filter_map(|r| r.get(dataset).category_id).collect();
            MiniBatch {
                name: format!("collection {}", dataset.collections[c].id),
                categories: categories.into_iter().collect(),
                sequences,
            }
        })
        .collect())
}

/// Category groups of sizes 4, 2, 2, 2 taken from `order`.
pub fn plan_nc(dataset: &Dataset, split: &Split, order: &[Label]) -> Result<Vec<MiniBatch>> {
    require_categories("nc", "10 categories split into mini-batches of 4+2+2+2", order.len())?;
    let mut out = Vec::new();
    let mut at = 0;
    for (i, &size) in NC_BATCH_SIZES.iter().enumerate() {
        let cats: Vec<Label> = order[at..at + size].to_vec();
        at += size;
        out.push(MiniBatch {
            name: format!("batch {}", i + 1),
            sequences: split.train_refs(dataset, |s| s.category_id.is_some_and(|c| cats.contains(&c))),
            categories: cats,
        });
    }
    Ok(out)
}

/// First mini-batch: four classes with every sequence of the first training
/// collection. The remaining 47 each hold two classes, cycling through
/// `order`, with one not yet used sequence per class.
pub fn plan_nic(dataset: &Dataset, split: &Split, order: &[Label], rng: &mut ChaCha8Rng) -> Result<Vec<MiniBatch>> {
    const REQUIRED: &str = "10 categories with enough training sequences for 48 mini-batches";
    require_categories("nic", REQUIRED, order.len())?;
    let first: Vec<Label> = order[..4].to_vec();
    let first_refs = split.train_refs(dataset, |s| s.category_id.is_some_and(|c| first.contains(&c)));
    let first_refs: Vec<SeqRef> = first_refs.into_iter().filter(|r| r.collection == 0).collect();

    let mut pools: BTreeMap<Label, Vec<SeqRef>> = BTreeMap::new();
    for r in split.train_refs(dataset, |_| true) {
        if first_refs.contains(&r) {
            continue;
        }
        if let Some(c) = r.get(dataset).category_id {
            pools.entry(c).or_default().push(r);
        }
    }
    let mut pools: BTreeMap<Label, VecDeque<SeqRef>> = pools
        .into_iter()
        .map(|(c, mut pool)| {
            pool.shuffle(rng);
            (c, pool.into())
        })
        .collect();

    let mut out = vec![MiniBatch {
        name: "batch 1".into(),
        categories: first,
        sequences: first_refs,
    }];
    for i in 1..NIC_BATCHES {
        let a = order[(2 * (i - 1) + 4) % order.len()];
        let b = order[(2 * (i - 1) + 5) % order.len()];
        let mut sequences = Vec::with_capacity(2);
        for c in [a, b] {
            let next = pools.get_mut(&c).and_then(|p| p.pop_front()).ok_or_else(|| GdmError::PlanShape {
                scenario: "nic",
                required: REQUIRED.to_string(),
                found: format!("category {c} ran out of training sequences at mini-batch {}", i + 1),
            })?;
            sequences.push(next);
        }
        out.push(MiniBatch {
            name: format!("batch {}", i + 1),
            categories: vec![a, b],
            sequences,
        });
    }
    Ok(out)
}
