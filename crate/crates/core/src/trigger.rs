//! Adaptive advisor triggering from the trend of recent episode accuracies.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BUFFER_CAPACITY: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TriggerError {
    #[error("slope needs at least two points, have {0}")]
    InsufficientData(usize),
}

/// FIFO window over the most recent accuracies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PerformanceBuffer {
    accs: VecDeque<f64>,
}

impl PerformanceBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, acc: f64) {
        if self.accs.len() == BUFFER_CAPACITY {
            self.accs.pop_front();
        }
        self.accs.push_back(acc);
    }

    pub fn len(&self) -> usize {
        self.accs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accs.is_empty()
    }

    /// Oldest first.
    pub fn values(&self) -> Vec<f64> {
        self.accs.iter().copied().collect()
    }
}

/// Least-squares slope of the window against positions `1..=len`.
pub fn compute_slope(b: &PerformanceBuffer) -> Result<f64, TriggerError> {
    slope_of(&b.values())
}

pub fn slope_of(ys: &[f64]) -> Result<f64, TriggerError> {
    let n = ys.len();
    if n < 2 {
        return Err(TriggerError::InsufficientData(n));
    }
    let x_mean = (n as f64 + 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = (i + 1) as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TriggerConfig {
    pub slope_threshold: f64,
    pub cooldown: usize,
    pub min_buffer: usize,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        TriggerConfig {
            slope_threshold: 0.01,
            cooldown: 5,
            min_buffer: 5,
        }
    }
}

/// Fires when the cooldown has elapsed, the window holds enough points and
/// the accuracy trend has flattened below the threshold.
pub fn should_trigger(
    episode: usize,
    b: &PerformanceBuffer,
    last_call: usize,
    cfg: &TriggerConfig,
) -> bool {
    if episode.saturating_sub(last_call) < cfg.cooldown {
        return false;
    }
    if b.len() < cfg.min_buffer.max(2) {
        return false;
    }
    compute_slope(b).is_ok_and(|beta| beta < cfg.slope_threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn buffer(vals: &[f64]) -> PerformanceBuffer {
        let mut b = PerformanceBuffer::new();
        vals.iter().for_each(|&v| b.push(v));
        b
    }

    /// Independent oracle: solve the 2x2 normal equations for (intercept, slope).
    fn normal_equations_slope(ys: &[f64]) -> f64 {
        let n = ys.len();
        let x = DMatrix::from_fn(n, 2, |r, c| if c == 0 { 1.0 } else { (r + 1) as f64 });
        let y = DVector::from_column_slice(ys);
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * y;
        xtx.lu().solve(&xty).unwrap()[1]
    }

    #[test]
    fn buffer_examples() {
        assert_eq!(buffer(&[0.5]).values(), vec![0.5]);
        let full: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let mut b = buffer(&full);
        b.push(0.95);
        assert_eq!(b.len(), 10);
        assert_eq!(b.values()[0], 0.1);
        assert_eq!(b.values()[9], 0.95);
        assert_eq!(buffer(&[0.1, 0.2, 0.3]).values(), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn slope_examples() {
        assert_eq!(compute_slope(&buffer(&[0.5; 5])).unwrap(), 0.0);
        assert!((compute_slope(&buffer(&[0.1, 0.2, 0.3, 0.4, 0.5])).unwrap() - 0.1).abs() < 1e-12);
        let ys = [0.5, 0.4, 0.6, 0.5, 0.7];
        let oracle = normal_equations_slope(&ys);
        assert!((compute_slope(&buffer(&ys)).unwrap() - oracle).abs() < 1e-12);
        assert_eq!(
            compute_slope(&buffer(&[0.3])),
            Err(TriggerError::InsufficientData(1))
        );
    }

    #[test]
    fn gate_examples() {
        let cfg = TriggerConfig::default();
        let flat = buffer(&[0.5; 10]);
        assert!(!should_trigger(7, &flat, 4, &cfg));
        assert!(!should_trigger(10, &buffer(&[0.5; 3]), 0, &cfg));
        let slow: Vec<f64> = (0..10).map(|i| 0.5 + 0.005 * i as f64).collect();
        assert!(should_trigger(10, &buffer(&slow), 0, &cfg));
        let fast: Vec<f64> = (0..10).map(|i| 0.5 + 0.02 * i as f64).collect();
        assert!(!should_trigger(10, &buffer(&fast), 0, &cfg));
    }

    #[test]
    fn truth_table_over_the_three_gates() {
        let cfg = TriggerConfig::default();
        for cooled in [false, true] {
            for enough in [false, true] {
                for flat in [false, true] {
                    let n = if enough { 6 } else { 4 };
                    let step = if flat { 0.0 } else { 0.05 };
                    let b = buffer(&(0..n).map(|i| 0.3 + step * i as f64).collect::<Vec<_>>());
                    let (episode, last) = if cooled { (12, 7) } else { (12, 8) };
                    assert_eq!(
                        should_trigger(episode, &b, last, &cfg),
                        cooled && enough && flat
                    );
                }
            }
        }
    }

    #[test]
    fn noisy_linear_slopes_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut within = 0;
        for _ in 0..1000 {
            let ys: Vec<f64> = (1..=10)
                .map(|i| 0.4 + 0.03 * i as f64 + noise.sample(&mut rng))
                .collect();
            if (slope_of(&ys).unwrap() - 0.03).abs() <= 0.02 {
                within += 1;
            }
        }
        assert!(within >= 950, "{within} of 1000");
    }

    proptest! {
        #[test]
        fn slope_is_exact_on_lines(a in -1.0f64..1.0, beta in -0.1f64..0.1, n in 2usize..=10) {
            let ys: Vec<f64> = (1..=n).map(|i| a + beta * i as f64).collect();
            prop_assert!((slope_of(&ys).unwrap() - beta).abs() < 1e-12);
        }

        #[test]
        fn slope_shift_and_scale(ys in proptest::collection::vec(0.0f64..1.0, 2..=10), c in -2.0f64..2.0) {
            let base = slope_of(&ys).unwrap();
            let shifted: Vec<f64> = ys.iter().map(|y| y + c).collect();
            let scaled: Vec<f64> = ys.iter().map(|y| y * c).collect();
            prop_assert!((slope_of(&shifted).unwrap() - base).abs() < 1e-9);
            prop_assert!((slope_of(&scaled).unwrap() - c * base).abs() < 1e-9);
        }
    }
}
