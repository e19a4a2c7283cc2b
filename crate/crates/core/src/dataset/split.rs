use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, ManifestRow, Split};

/// Fractions assigned to train, validation and test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(DatasetError::InvalidRatios(format!("{r:?} has a negative or non-finite entry")));
        }
        if ((r[0] + r[1] + r[2]) - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidRatios(format!("{r:?} does not sum to 1")));
        }
        Ok(())
    }
}

/// Assigns every row to a split, stratified by label.
///
/// Each class is shuffled with its own seeded generator; the first
/// `round(train * n)` rows go to train and rows up to `round((train + val) * n)` to
/// validation. Rows keep their input order in the output.
pub fn split_manifest(rows: &[ManifestRow], ratios: SplitRatios, seed: u64) -> Result<Vec<ManifestRow>, DatasetError> {
    ratios.validate()?;
    if rows.len() < 10 {
        return Err(DatasetError::TooFewSamples(rows.len()));
    }
    if rows.iter().all(|r| r.label == rows[0].label) {
        return Err(DatasetError::OneClassOnly);
    }
    let mut out = rows.to_vec();
    for (class, label) in [(0u64, false), (1, true)] {
        let mut idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].label == label).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(seed, "split", class));
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        let n_train = (ratios.train * n).round() as usize;
        let n_train_val = (((ratios.train + ratios.val) * n).round() as usize).clamp(n_train, idx.len());
        for (k, &i) in idx.iter().enumerate() {
            out[i].split = Some(if k < n_train {
                Split::Train
            } else if k < n_train_val {
                Split::Val
            } else {
                Split::Test
            });
        }
    }
    Ok(out)
}
