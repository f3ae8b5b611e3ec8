use serde::{Deserialize, Serialize};

use super::DataError;

/// Min-max normalisation parameters: `x' = (x - min) / (max - min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: f64,
    pub max: f64,
}

impl MinMaxScaler {
    pub fn fit(x: &[f64]) -> Result<Self, DataError> {
        if x.len() < 2 {
            return Err(DataError::TooShort { needed: 2, got: x.len() });
        }
        let min = x.iter().copied().fold(f64::INFINITY, f64::min);
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == min {
            return Err(DataError::Constant);
        }
        Ok(Self { min, max })
    }

    pub fn transform(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn inverse(&self, scaled: f64) -> f64 {
        scaled * (self.max - self.min) + self.min
    }
}

/// Scales `x` into `[0, 1]`; the minimum maps to exactly 0 and the maximum
/// to exactly 1.
pub fn minmax_scale(x: &[f64]) -> Result<(Vec<f64>, MinMaxScaler), DataError> {
    let s = MinMaxScaler::fit(x)?;
    Ok((x.iter().map(|&v| s.transform(v)).collect(), s))
}

/// z-score parameters. `std` is the population standard deviation
/// (divisor `n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub mean: f64,
    pub std: f64,
}

impl StandardScaler {
    pub fn fit(x: &[f64]) -> Result<Self, DataError> {
        if x.is_empty() {
            return Err(DataError::TooShort { needed: 1, got: 0 });
        }
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std == 0.0 || !std.is_finite() {
            return Err(DataError::Constant);
        }
        Ok(Self { mean, std })
    }

    pub fn transform(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn inverse(&self, scaled: f64) -> f64 {
        scaled * self.std + self.mean
    }
}

pub fn zscore_scale(x: &[f64]) -> Result<(Vec<f64>, StandardScaler), DataError> {
    let s = StandardScaler::fit(x)?;
    Ok((x.iter().map(|&v| s.transform(v)).collect(), s))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn minmax_basic() {
        let (s, p) = minmax_scale(&[0.0, 5.0, 10.0]).unwrap();
        assert_eq!(s, vec![0.0, 0.5, 1.0]);
        assert_eq!(p, MinMaxScaler { min: 0.0, max: 10.0 });
    }

    #[test]
    fn minmax_constant_is_an_error() {
        assert!(matches!(minmax_scale(&[3.0, 3.0, 3.0]), Err(DataError::Constant)));
    }

    #[test]
    fn zscore_population_sigma() {
        // mean 0, population sigma sqrt(2/3) -> ±1/sqrt(2/3) = ±1.224744871...
        let (s, p) = zscore_scale(&[-1.0, 0.0, 1.0]).unwrap();
        let expected = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((s[0] + expected).abs() < 1e-12);
        assert_eq!(s[1], 0.0);
        assert!((s[2] - expected).abs() < 1e-12);
        assert!((expected - 1.2247).abs() < 1e-4);
        assert_eq!(p.mean, 0.0);
    }

    #[test]
    fn zscore_constant_is_an_error() {
        assert!(matches!(zscore_scale(&[2.0, 2.0]), Err(DataError::Constant)));
    }

    proptest! {
        #[test]
        fn minmax_round_trip(x in prop::collection::vec(-1e3f64..1e3, 2..50)) {
            prop_assume!(x.iter().any(|v| *v != x[0]));
            let (s, p) = minmax_scale(&x).unwrap();
            for (orig, sc) in x.iter().zip(&s) {
                prop_assert!((0.0..=1.0).contains(sc));
                prop_assert!((p.inverse(*sc) - orig).abs() <= 1e-12 * (1.0 + orig.abs()).max(p.max - p.min));
            }
            let imin = x.iter().cloned().fold(f64::INFINITY, f64::min);
            let imax = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(p.transform(imin), 0.0);
            prop_assert_eq!(p.transform(imax), 1.0);
        }

        #[test]
        fn zscore_moments_and_round_trip(x in prop::collection::vec(-1e3f64..1e3, 2..50)) {
            prop_assume!(x.iter().any(|v| (*v - x[0]).abs() > 1e-6));
            let (s, p) = zscore_scale(&x).unwrap();
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            let sd = (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-10 * n);
            prop_assert!((sd - 1.0).abs() < 1e-9);
            for (orig, sc) in x.iter().zip(&s) {
                prop_assert!((p.inverse(*sc) - orig).abs() <= 1e-12 * (1.0 + orig.abs()).max(p.std));
            }
        }
    }
}
