//! Column summaries (min, max, mean, population standard deviation).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("cannot summarize an empty column")]
    EmptyDataset,
    #[error("attribute index {index} out of range (have {available})")]
    BadIndex { index: usize, available: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation (divides by N).
    pub stddev: f64,
}

/// Single-pass summary using Welford's update for the variance.
pub fn summarize<I>(values: I) -> Result<Summary, StatsError>
where
    I: IntoIterator<Item = f64>,
{
    let mut count = 0u64;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for v in values {
        count += 1;
        min = min.min(v);
        max = max.max(v);
        let delta = v - mean;
        mean += delta / count as f64;
        m2 += delta * (v - mean);
    }
    if count == 0 {
        return Err(StatsError::EmptyDataset);
    }
    let var = (m2 / count as f64).max(0.0);
    Ok(Summary {
        count,
        min,
        max,
        mean,
        stddev: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_error() {
        assert_eq!(summarize(std::iter::empty()), Err(StatsError::EmptyDataset));
    }

    #[test]
    fn single_value() {
        let s = summarize([4.25]).unwrap();
        assert_eq!((s.min, s.max, s.mean, s.stddev), (4.25, 4.25, 4.25, 0.0));
    }

    #[test]
    fn population_stddev() {
        // {2,4,4,4,5,5,7,9}: mean 5, population variance 4
        let s = summarize([2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(s.mean, 5.0);
        assert!((s.stddev - 2.0).abs() < 1e-15);
    }
}
