use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fid::FidRecord;
use crate::error::{Error, Result};
use crate::fit::CONFIDENCE;
use crate::seed::derived_rng;

/// Blocks of averaged acquisitions (each block already holds several
/// hardware averages) on a common time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStore {
    blocks: Vec<FidRecord>,
}

impl DatasetStore {
    pub fn new(blocks: Vec<FidRecord>) -> Result<Self> {
        if let Some(first) = blocks.first() {
            for (i, b) in blocks.iter().enumerate() {
                b.validate()?;
                if !b.same_grid(first) {
                    return Err(Error::Domain(format!("block {i} differs in shape from block 0")));
                }
            }
        }
        Ok(DatasetStore { blocks })
    }

    pub fn blocks(&self) -> &[FidRecord] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Point-wise mean of the selected blocks, in the given order.
    pub fn average(&self, indices: &[usize]) -> Result<FidRecord> {
        let first = self
            .blocks
            .first()
            .ok_or_else(|| Error::Domain("dataset store is empty".into()))?;
        if indices.is_empty() {
            return Err(Error::Domain("no blocks selected".into()));
        }
        let mut acc = vec![num_complex::Complex64::new(0.0, 0.0); first.len()];
        for &i in indices {
            for (a, z) in acc.iter_mut().zip(&self.blocks[i].samples) {
                *a += z;
            }
        }
        let inv = 1.0 / indices.len() as f64;
        for a in &mut acc {
            *a *= inv;
        }
        FidRecord::new(acc, first.dwell_s, first.start_time_s)
    }

    pub fn mean_record(&self) -> Result<FidRecord> {
        self.average(&(0..self.len()).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub mean: f64,
    pub sigma: f64,
    pub n_resamples: usize,
    pub n_blocks: usize,
    /// Percentile interval of the resampled amplitudes.
    pub ci_low: f64,
    pub ci_high: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl BootstrapResult {
    pub fn without_distribution(mut self) -> Self {
        self.distribution = None;
        self
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Resamples blocks with replacement, averages each resample and applies
/// `fit` to obtain one amplitude per resample. Resample `i` draws from a
/// generator seeded by `(seed, i)`, so the result does not depend on how the
/// work is scheduled.
pub fn bootstrap_amplitude<F>(
    store: &DatasetStore,
    fit: F,
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapResult>
where
    F: Fn(&FidRecord) -> Result<f64> + Sync,
{
    let n = store.len();
    if n == 0 {
        return Err(Error::Domain("dataset store is empty".into()));
    }
    if n < 2 {
        return Err(Error::Domain("bootstrap needs at least 2 blocks".into()));
    }
    if n_resamples == 0 {
        return Err(Error::Domain("need at least one resample".into()));
    }
    let one = |i: usize| -> Result<f64> {
        let mut rng = derived_rng(seed, "bootstrap", i as u64);
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        fit(&store.average(&idx)?)
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<f64>> = {
        use rayon::prelude::*;
        (0..n_resamples).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<f64>> = (0..n_resamples).map(one).collect();
    let values: Vec<f64> = results.into_iter().collect::<Result<_>>()?;

    let mean = values.iter().sum::<f64>() / n_resamples as f64;
    let sigma = if n_resamples > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_resamples - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let alpha = 0.5 * (1.0 - CONFIDENCE);
    let mut warnings = Vec::new();
    if sigma == 0.0 {
        warnings.push("bootstrap spread is zero; interval is degenerate".to_string());
    }
    Ok(BootstrapResult {
        mean,
        sigma,
        n_resamples,
        n_blocks: n,
        ci_low: percentile(&sorted, alpha).min(mean),
        ci_high: percentile(&sorted, 1.0 - alpha).max(mean),
        distribution: Some(values),
        warnings,
    })
}
