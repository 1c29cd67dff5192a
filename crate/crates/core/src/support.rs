//! Sorted, duplicate-free index sets.

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};

/// A set of vector indices, kept sorted and duplicate-free.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Support(Vec<usize>);

impl Support {
    pub fn new() -> Self {
        Support(Vec::new())
    }

    /// Builds a set from arbitrary indices, sorting and removing duplicates.
    pub fn from_indices(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Support(indices)
    }

    pub fn from_range(range: Range<usize>) -> Self {
        Support(range.collect())
    }

    /// Indices `i` with `pred(values[i])`.
    pub fn from_predicate(values: &[f64], pred: impl Fn(f64) -> bool) -> Self {
        Support(
            values
                .iter()
                .enumerate()
                .filter(|(_, v)| pred(**v))
                .map(|(i, _)| i)
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }

    /// Fails if any index is `>= dim`.
    pub fn check_bounds(&self, dim: usize) -> Result<()> {
        match self.max() {
            Some(index) if index >= dim => Err(Error::IndexOutOfRange { index, dim }),
            _ => Ok(()),
        }
    }

    pub fn union(&self, other: &Support) -> Support {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                core::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                core::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                core::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Support(out)
    }

    /// Elements of `self` not in `other`.
    pub fn difference(&self, other: &Support) -> Support {
        Support(self.iter().filter(|i| !other.contains(*i)).collect())
    }

    pub fn intersection(&self, other: &Support) -> Support {
        Support(self.iter().filter(|i| other.contains(*i)).collect())
    }

    /// Complement within `0..dim`.
    pub fn complement(&self, dim: usize) -> Support {
        Support((0..dim).filter(|i| !self.contains(*i)).collect())
    }

    pub fn is_subset(&self, other: &Support) -> bool {
        self.iter().all(|i| other.contains(i))
    }
}

impl FromIterator<usize> for Support {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Support::from_indices(iter.into_iter().collect())
    }
}

impl From<Vec<usize>> for Support {
    fn from(v: Vec<usize>) -> Self {
        Support::from_indices(v)
    }
}

impl<'a> IntoIterator for &'a Support {
    type Item = usize;
    type IntoIter = core::iter::Copied<core::slice::Iter<'a, usize>>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}
