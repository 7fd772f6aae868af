use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

fn rank_key(seed: u64, id: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    h.finalize().into()
}

/// Stratified fold index for every item.
///
/// Within each class, items are ordered by `SHA-256(seed ‖ id)` (id breaks
/// ties) and dealt round-robin into `k` folds, so the assignment of an item
/// depends only on the ids of its class, the seed and `k`.
pub fn stratified_folds(
    ids: &[String],
    labels: &[usize],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::usage(format!("need at least 2 folds, got {k}")));
    }
    if ids.len() != labels.len() {
        return Err(Error::usage("ids and labels differ in length"));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut folds = vec![0; ids.len()];
    for (class, mut members) in by_class {
        if members.len() < k {
            return Err(Error::usage(format!(
                "class {class} has {} members, fewer than {k} folds",
                members.len()
            )));
        }
        members.sort_by_cached_key(|&i| (rank_key(seed, &ids[i]), ids[i].clone()));
        for (pos, i) in members.into_iter().enumerate() {
            folds[i] = pos % k;
        }
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("doc{i}")).collect()
    }

    #[test]
    fn balanced_per_class() {
        let labels: Vec<usize> = (0..23).map(|i| usize::from(i % 3 == 0)).collect();
        let f = stratified_folds(&ids(23), &labels, 5, 1).unwrap();
        for class in 0..2 {
            let mut per = [0usize; 5];
            for (i, &l) in labels.iter().enumerate() {
                if l == class {
                    per[f[i]] += 1;
                }
            }
            assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn pure_function_of_ids_and_seed() {
        let labels = vec![0; 10];
        let a = stratified_folds(&ids(10), &labels, 3, 7).unwrap();
        assert_eq!(a, stratified_folds(&ids(10), &labels, 3, 7).unwrap());
        let mut rev_ids = ids(10);
        rev_ids.reverse();
        let b = stratified_folds(&rev_ids, &labels, 3, 7).unwrap();
        for i in 0..10 {
            assert_eq!(a[i], b[9 - i]);
        }
        assert_ne!(a, stratified_folds(&ids(10), &labels, 3, 8).unwrap());
    }

    #[test]
    fn small_class_is_usage_error() {
        assert!(matches!(
            stratified_folds(&ids(6), &[0, 0, 0, 0, 0, 1], 2, 0),
            Err(Error::Usage(_))
        ));
    }
}
