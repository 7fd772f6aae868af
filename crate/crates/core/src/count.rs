//! Sparse word-count and word-frequency vectors.

use crate::error::{Error, Result};

/// Word identifier: an index into a vocabulary of size `W`.
pub type WordId = u32;

/// Sparse word counts of one document over a vocabulary of size `W`.
///
/// Entries are sorted by strictly increasing word id, zero counts are never
/// stored, and `total` is the document length `N` (sum of counts).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CountVector {
    vocab_size: usize,
    entries: Vec<(WordId, u32)>,
    total: u64,
}

impl CountVector {
    /// Builds a vector from entries that are already sorted with strictly
    /// increasing ids and positive counts.
    pub fn from_sorted(vocab_size: usize, entries: Vec<(WordId, u32)>) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::usage("vocabulary size must be positive"));
        }
        let mut prev: Option<WordId> = None;
        let mut total = 0u64;
        for &(w, c) in &entries {
            if (w as usize) >= vocab_size {
                return Err(Error::data(format!(
                    "word id {w} out of range for vocabulary of size {vocab_size}"
                )));
            }
            if let Some(p) = prev {
                if w <= p {
                    return Err(Error::data(format!(
                        "word ids not strictly increasing ({p} then {w})"
                    )));
                }
            }
            if c == 0 {
                return Err(Error::data(format!("zero count stored for word {w}")));
            }
            prev = Some(w);
            total += c as u64;
        }
        Ok(CountVector {
            vocab_size,
            entries,
            total,
        })
    }

    /// Builds a vector from unordered `(word, count)` pairs. Duplicate ids are
    /// merged and zero counts dropped.
    pub fn from_pairs(
        vocab_size: usize,
        pairs: impl IntoIterator<Item = (WordId, u32)>,
    ) -> Result<Self> {
        let mut pairs: Vec<(WordId, u32)> = pairs.into_iter().filter(|&(_, c)| c > 0).collect();
        pairs.sort_unstable_by_key(|&(w, _)| w);
        let mut merged: Vec<(WordId, u32)> = Vec::with_capacity(pairs.len());
        for (w, c) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == w => {
                    last.1 = last
                        .1
                        .checked_add(c)
                        .ok_or_else(|| Error::data(format!("count overflow for word {w}")))?
                }
                _ => merged.push((w, c)),
            }
        }
        Self::from_sorted(vocab_size, merged)
    }

    /// Builds a vector from a dense count slice of length `W`.
    pub fn from_dense(counts: &[u32]) -> Result<Self> {
        let entries = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(w, &c)| (w as WordId, c))
            .collect();
        Self::from_sorted(counts.len(), entries)
    }

    /// Counts every word id in `words` once per occurrence.
    pub fn from_words(vocab_size: usize, words: impl IntoIterator<Item = WordId>) -> Result<Self> {
        Self::from_pairs(vocab_size, words.into_iter().map(|w| (w, 1)))
    }

    /// The empty document over `W` words.
    pub fn empty(vocab_size: usize) -> Result<Self> {
        Self::from_sorted(vocab_size, Vec::new())
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn entries(&self) -> &[(WordId, u32)] {
        &self.entries
    }

    /// Document length N.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Number of distinct words present.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, word: WordId) -> u32 {
        self.entries
            .binary_search_by_key(&word, |&(w, _)| w)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<u32> {
        let mut dense = vec![0u32; self.vocab_size];
        for &(w, c) in &self.entries {
            dense[w as usize] = c;
        }
        dense
    }

    /// Every count multiplied by `factor`.
    pub fn scaled(&self, factor: u32) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|&(w, c)| {
                c.checked_mul(factor)
                    .map(|c| (w, c))
                    .ok_or_else(|| Error::data("count overflow while scaling"))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_sorted(self.vocab_size, entries)
    }

    /// Normalized word frequencies x / N. The empty document has none.
    pub fn frequencies(&self) -> Result<FrequencyVector> {
        if self.is_empty() {
            return Err(Error::usage("empty document has no word frequencies"));
        }
        let n = self.total as f64;
        Ok(FrequencyVector {
            vocab_size: self.vocab_size,
            entries: self
                .entries
                .iter()
                .map(|&(w, c)| (w, c as f64 / n))
                .collect(),
        })
    }
}

/// Sparse word frequencies of a non-empty document; entries sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyVector {
    vocab_size: usize,
    entries: Vec<(WordId, f64)>,
}

impl FrequencyVector {
    /// Builds a frequency vector from sorted entries, checking that the
    /// frequencies are non-negative and sum to one within 1e-12.
    pub fn from_sorted(vocab_size: usize, entries: Vec<(WordId, f64)>) -> Result<Self> {
        let mut prev: Option<WordId> = None;
        let mut sum = 0.0;
        for &(w, f) in &entries {
            if (w as usize) >= vocab_size {
                return Err(Error::data(format!("word id {w} out of range")));
            }
            if prev.is_some_and(|p| w <= p) {
                return Err(Error::data("word ids not strictly increasing"));
            }
            if !(f >= 0.0 && f.is_finite()) {
                return Err(Error::data(format!("invalid frequency {f} for word {w}")));
            }
            prev = Some(w);
            sum += f;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::data(format!("frequencies sum to {sum}, not 1")));
        }
        Ok(FrequencyVector {
            vocab_size,
            entries: entries.into_iter().filter(|&(_, f)| f > 0.0).collect(),
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn entries(&self) -> &[(WordId, f64)] {
        &self.entries
    }
}

/// A document identified by a dataset-stable id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub counts: CountVector,
}

impl Document {
    pub fn new(id: impl Into<String>, counts: CountVector) -> Self {
        Document {
            id: id.into(),
            counts,
        }
    }
}

/// Walks two sorted sparse lists and calls `f` for each id present in both.
#[inline]
pub(crate) fn for_each_shared<A: Copy, B: Copy>(
    a: &[(WordId, A)],
    b: &[(WordId, B)],
    mut f: impl FnMut(A, B),
) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                f(a[i].1, b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
}

/// Walks the union of two sorted sparse lists; absent entries are `None`.
#[inline]
pub(crate) fn for_each_union<A: Copy, B: Copy>(
    a: &[(WordId, A)],
    b: &[(WordId, B)],
    mut f: impl FnMut(Option<A>, Option<B>),
) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            f(Some(a[i].1), None);
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            f(None, Some(b[j].1));
            j += 1;
        } else {
            f(Some(a[i].1), Some(b[j].1));
            i += 1;
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_enforced() {
        assert!(CountVector::from_sorted(3, vec![(0, 1), (0, 2)]).is_err());
        assert!(CountVector::from_sorted(3, vec![(2, 1), (1, 2)]).is_err());
        assert!(CountVector::from_sorted(3, vec![(3, 1)]).is_err());
        assert!(CountVector::from_sorted(3, vec![(1, 0)]).is_err());
        assert!(CountVector::from_sorted(0, vec![]).is_err());
        let v = CountVector::from_sorted(3, vec![(0, 2), (2, 5)]).unwrap();
        assert_eq!(v.total(), 7);
        assert_eq!(v.to_dense(), vec![2, 0, 5]);
    }

    #[test]
    fn pairs_are_merged_and_sorted() {
        let v = CountVector::from_pairs(5, vec![(4, 1), (1, 2), (4, 3), (2, 0)]).unwrap();
        assert_eq!(v.entries(), &[(1, 2), (4, 4)]);
        assert_eq!(v.get(4), 4);
        assert_eq!(v.get(2), 0);
    }

    #[test]
    fn frequencies_sum_to_one() {
        let v = CountVector::from_dense(&[3, 0, 1, 7]).unwrap();
        let f = v.frequencies().unwrap();
        let s: f64 = f.entries().iter().map(|e| e.1).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(CountVector::empty(4).unwrap().frequencies().is_err());
    }

    #[test]
    fn frequency_validation() {
        assert!(FrequencyVector::from_sorted(2, vec![(0, 0.5), (1, 0.5)]).is_ok());
        assert!(FrequencyVector::from_sorted(2, vec![(0, 0.5), (1, 0.4)]).is_err());
        assert!(FrequencyVector::from_sorted(2, vec![(0, -0.5), (1, 1.5)]).is_err());
    }

    #[test]
    fn merge_walkers() {
        let a = [(1u32, 'a'), (3, 'b'), (5, 'c')];
        let b = [(0u32, 'x'), (3, 'y'), (6, 'z')];
        let mut shared = vec![];
        for_each_shared(&a, &b, |x, y| shared.push((x, y)));
        assert_eq!(shared, vec![('b', 'y')]);
        let mut n = 0;
        for_each_union(&a, &b, |_, _| n += 1);
        assert_eq!(n, 5);
    }
}
