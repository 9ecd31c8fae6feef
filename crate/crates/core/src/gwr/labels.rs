use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Label identifier; instance and category ids share this type.
pub type Label = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelLevel {
    Instance,
    Category,
}

/// One table of the associative label matrix: accumulated evidence per label.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelCounts(pub(crate) BTreeMap<Label, f64>);

impl LabelCounts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `delta_pos` to `label` and takes `delta_neg` off every other entry,
    /// flooring at zero.
    pub fn reinforce(&mut self, label: Label, delta_pos: f64, delta_neg: f64) {
        for (l, v) in self.0.iter_mut() {
            if *l != label {
                *v = (*v - delta_neg).max(0.0);
            }
        }
        *self.0.entry(label).or_insert(0.0) += delta_pos;
    }

    /// Label with the most evidence; ties go to the smallest label.
    pub fn best(&self) -> Option<Label> {
        let mut best: Option<(Label, f64)> = None;
        for (&l, &v) in &self.0 {
            match best {
                Some((_, bv)) if v <= bv => {}
                _ => best = Some((l, v)),
            }
        }
        best.map(|(l, _)| l)
    }

    pub fn get(&self, label: Label) -> f64 {
        self.0.get(&label).copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, f64)> + '_ {
        self.0.iter().map(|(l, v)| (*l, *v))
    }
}

impl FromIterator<(Label, f64)> for LabelCounts {
    fn from_iter<T: IntoIterator<Item = (Label, f64)>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}
