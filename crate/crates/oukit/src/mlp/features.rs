//! Strided resampling of a trajectory into a fixed-length feature vector.

use crate::error::{Error, Result};
use crate::process::TimeGrid;

/// Network input for one trajectory: `feature_len` strided samples followed
/// by the effective sampling interval between them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    /// Number of trajectory samples, excluding the trailing time-gap entry.
    pub fn feature_len(&self) -> usize {
        self.values.len() - 1
    }
}

/// Resamples `path` at indices round(i * N / (L - 1)) for i = 0..L-1 (the first
/// and last points are always kept) and appends the time gap dt * N / (L - 1).
pub fn featurize(path: &[f64], grid: &TimeGrid, feature_len: usize) -> Result<FeatureVector> {
    if feature_len < 2 {
        return Err(Error::InvalidConfig {
            reason: "feature_len must be at least 2".into(),
        });
    }
    if path.len() != grid.n_points() {
        return Err(Error::ShapeMismatch {
            what: "trajectory length",
            expected: grid.n_points(),
            got: path.len(),
        });
    }
    if path.len() < feature_len {
        return Err(Error::TooShort {
            len: path.len(),
            feature_len,
        });
    }
    let n = grid.n_steps();
    let stride = n as f64 / (feature_len - 1) as f64;
    let mut values = Vec::with_capacity(feature_len + 1);
    for i in 0..feature_len {
        let idx = (i as f64 * stride).round() as usize;
        values.push(path[idx]);
    }
    values.push(grid.dt() * stride);
    Ok(FeatureVector { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::process::{OuParams, TimeGrid};
    use crate::simulate::simulate;

    #[test]
    fn identity_resampling_when_lengths_match() {
        let grid = TimeGrid::new(4, 0.25).unwrap();
        let path = [1.0, 2.0, 3.0, 4.0, 5.0];
        let f = featurize(&path, &grid, 5).unwrap();
        assert_eq!(f.values[..5], path);
        assert_relative_eq!(f.values[5], 0.25, max_relative = 1e-15);
        assert_eq!(f.feature_len(), 5);
    }

    #[test]
    fn constant_path_yields_constant_features() {
        let grid = TimeGrid::new(100, 0.01).unwrap();
        let path = vec![2.5; 101];
        let f = featurize(&path, &grid, 10).unwrap();
        assert!(f.values[..10].iter().all(|&v| v == 2.5));
        assert_relative_eq!(f.values[10], 0.01 * 100.0 / 9.0, max_relative = 1e-15);
    }

    #[test]
    fn stride_indices_match_round_formula() {
        let p = OuParams::new(3.0, 0.5, 0.5, 0.0, 5.0).unwrap();
        let grid = TimeGrid::for_params(&p, 5000).unwrap();
        let set = simulate(&p, &grid, 1, 42).unwrap();
        let path = set.path(0);
        let f = featurize(path, &grid, 101).unwrap();
        assert_eq!(f.values.len(), 102);
        for i in 0..101 {
            assert_eq!(f.values[i], path[50 * i]);
        }
        assert_relative_eq!(f.values[101], grid.dt() * 50.0, max_relative = 1e-15);
    }

    #[test]
    fn uneven_stride_rounds_to_nearest_index() {
        let grid = TimeGrid::new(10, 0.1).unwrap();
        let path: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let f = featurize(&path, &grid, 4).unwrap();
        // round(0), round(10/3), round(20/3), round(10) = 0, 3, 7, 10.
        assert_eq!(f.values[..4], [0.0, 3.0, 7.0, 10.0]);
    }

    #[test]
    fn short_path_is_rejected() {
        let grid = TimeGrid::new(3, 0.1).unwrap();
        let path = [0.0, 1.0, 2.0, 3.0];
        match featurize(&path, &grid, 5) {
            Err(Error::TooShort { len, feature_len }) => {
                assert_eq!(len, 4);
                assert_eq!(feature_len, 5);
            }
            other => panic!("expected TooShort, got {other:?}"),
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let grid = TimeGrid::new(10, 0.1).unwrap();
        let path = [0.0; 5];
        assert!(matches!(
            featurize(&path, &grid, 3),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
