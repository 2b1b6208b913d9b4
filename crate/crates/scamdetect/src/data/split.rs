//! Deterministic stratified splitting. Global counts follow floor
//! rounding with the remainder going to train; within each label class
//! the seeded shuffle is cut contiguously.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, DatasetRecord, Label, Split};

/// Assigns a split to every record, preserving input order. The same
/// records, ratios, and seed always produce the same assignment.
pub fn split(
    records: &mut [DatasetRecord],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(), DataError> {
    if records.is_empty() {
        return Err(DataError::EmptyCorpus);
    }
    let (r_train, r_val, r_test) = ratios;
    let sum = r_train + r_val + r_test;
    if !(r_train >= 0.0 && r_val >= 0.0 && r_test >= 0.0 && (sum - 1.0).abs() <= 1e-9) {
        return Err(DataError::InvalidRatios);
    }

    let n = records.len();
    let n_val = (n as f64 * r_val).floor() as usize;
    let n_test = (n as f64 * r_test).floor() as usize;
    let n_train = n - n_val - n_test;

    // Shuffle each class, then interleave classes proportionally: the
    // i-th of a class of size c sits at fractional position (i+0.5)/c.
    // Cutting the merged order keeps per-class assignment contiguous and
    // the three global counts exact.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut merged: Vec<(f64, u8, usize)> = Vec::with_capacity(n);
    for (rank, label) in [Label::Benign, Label::Phishing].into_iter().enumerate() {
        let mut members: Vec<usize> = (0..n).filter(|&i| records[i].label == label).collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let c = members.len() as f64;
        for (i, idx) in members.into_iter().enumerate() {
            merged.push(((i as f64 + 0.5) / c, rank as u8, idx));
        }
    }
    merged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    for (pos, &(_, _, idx)) in merged.iter().enumerate() {
        records[idx].split = Some(if pos < n_train {
            Split::Train
        } else if pos < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        });
    }
    Ok(())
}
