use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

fn classes(labels: &[u8]) -> Result<[Vec<usize>; 2]> {
    let mut out = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        match y {
            0 | 1 => out[y as usize].push(i),
            _ => return Err(Error::input("labels must be 0 or 1")),
        }
    }
    Ok(out)
}

/// Stratified holdout split. Each class puts `round(count * test_fraction)`
/// of its rows, chosen by a seeded shuffle, into the test side. Both index
/// lists are returned sorted.
pub fn stratified_split(
    labels: &[u8],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config("test fraction must lie in (0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut idx) in classes(labels)?.into_iter().enumerate() {
        if idx.len() < 2 {
            return Err(Error::input(format!(
                "class {class} has {} member(s); at least 2 are needed to split",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified k-fold assignment. Each class is shuffled and dealt
/// round-robin; the second class continues from the fold where the first
/// stopped so remainders spread over different folds. Folds are sorted.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::config("k must be at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (class, mut idx) in classes(labels)?.into_iter().enumerate() {
        if idx.len() < k {
            return Err(Error::input(format!(
                "class {class} has {} member(s), fewer than k={k}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Rows of `0..n` not in the sorted `fold`.
pub fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - fold.len());
    let mut j = 0;
    for i in 0..n {
        if j < fold.len() && fold[j] == i {
            j += 1;
        } else {
            out.push(i);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_examples() {
        let y: Vec<u8> = (0..100).map(|i| u8::from(i < 40)).collect();
        let (train, test) = stratified_split(&y, 0.2, 1).unwrap();
        assert_eq!(test.len(), 20);
        assert_eq!(test.iter().filter(|&&i| y[i] == 1).count(), 8);
        assert_eq!(train.len(), 80);

        let y: Vec<u8> = (0..10).map(|i| u8::from(i < 3)).collect();
        let (_, test) = stratified_split(&y, 0.2, 1).unwrap();
        assert_eq!(test.len(), 2);
        assert_eq!(test.iter().filter(|&&i| y[i] == 1).count(), 1);

        assert!(stratified_split(&[0, 0, 0, 1], 0.2, 1).is_err());
    }

    #[test]
    fn kfold_examples() {
        let y: Vec<u8> = (0..50).map(|i| (i % 2) as u8).collect();
        for f in stratified_kfold(&y, 5, 3).unwrap() {
            assert_eq!(f.len(), 10);
            assert_eq!(f.iter().filter(|&&i| y[i] == 1).count(), 5);
        }
        let y: Vec<u8> = (0..52).map(|i| (i % 2) as u8).collect();
        let folds = stratified_kfold(&y, 5, 3).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![11, 11, 10, 10, 10]);
        assert!(stratified_kfold(&[0, 0, 0, 0, 0, 1, 1], 5, 0).is_err());
    }

    #[test]
    fn complement_works() {
        assert_eq!(complement(6, &[1, 4]), vec![0, 2, 3, 5]);
    }
}
