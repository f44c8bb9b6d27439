//! Expected advisor cost of fixed-interval versus adaptive triggering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Cost of an episode that consults the advisor.
    pub c_llm: f64,
    /// Cost of an agent-only episode.
    pub c_rl: f64,
    /// Probability that an episode is judged stagnant.
    pub p_stag: f64,
    /// Number of episodes.
    pub episodes: usize,
}

impl CostModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.c_llm > self.c_rl && self.c_rl > 0.0) {
            return Err(format!(
                "costs must satisfy c_llm > c_rl > 0, got {} and {}",
                self.c_llm, self.c_rl
            ));
        }
        if !(0.0..=1.0).contains(&self.p_stag) {
            return Err(format!("p_stag must be in [0, 1], got {}", self.p_stag));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub cost_fixed: f64,
    pub cost_adaptive_expected: f64,
    pub delta: f64,
    /// Mean simulated adaptive cost.
    pub monte_carlo_mean: f64,
    pub trials: usize,
}

/// Closed-form costs for advising every `k` episodes versus advising each
/// episode independently with probability `p_stag`, plus a seeded
/// simulation of the adaptive cost.
pub fn simulate_costs(m: &CostModel, k: usize, trials: usize, seed: u64) -> CostComparison {
    let t = m.episodes as f64;
    let calls_fixed = t / k.max(1) as f64;
    let cost_fixed = calls_fixed * m.c_llm + (t - calls_fixed) * m.c_rl;
    let cost_adaptive_expected = t * m.p_stag * m.c_llm + t * (1.0 - m.p_stag) * m.c_rl;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..trials {
        let calls = (0..m.episodes)
            .filter(|_| rng.random_bool(m.p_stag))
            .count() as f64;
        total += calls * m.c_llm + (t - calls) * m.c_rl;
    }
    let monte_carlo_mean = if trials == 0 {
        f64::NAN
    } else {
        total / trials as f64
    };
    CostComparison {
        cost_fixed,
        cost_adaptive_expected,
        delta: cost_fixed - cost_adaptive_expected,
        monte_carlo_mean,
        trials,
    }
}
