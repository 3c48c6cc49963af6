//! Residual-leakage and probabilistic-stealth analysis.
//!
//! With a gain-mismatched model `alpha * P`, the concealment leaks a
//! residual `(1 - alpha) * P * mu` into the manipulated measurement stream.
//! These routines compute that residual's norm from a recorded injection
//! sequence, evaluate the deterministic sufficient condition for the leak
//! to stay below a norm threshold in the presence of noise, and bound or
//! estimate the probability that Gaussian noise keeps the observed residual
//! under the threshold.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::lti::DiscreteLinearSystem;

/// Inputs to the probabilistic stealth bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StealthBoundInput {
    /// `l2` norm of the deterministic residual.
    pub residual_norm: f64,
    /// Per-component noise standard deviation.
    pub sigma: f64,
    /// Residual dimension (number of samples in the evaluation window).
    pub dimension: usize,
    /// Detector threshold on the norm of the observed residual.
    pub delta: f64,
}

/// `|1 - alpha| * ||P * mu||_2`: the residual norm left behind by a
/// gain-mismatched concealment. The plant is reset to zero state before the
/// replay.
pub fn residual_norm(alpha: f64, mu: &[f64], plant: &mut DiscreteLinearSystem) -> Result<f64> {
    plant.reset();
    let response = plant.simulate(mu)?;
    let energy: f64 = response.iter().map(|y| y * y).sum();
    Ok((1.0 - alpha).abs() * energy.sqrt())
}

/// Deterministic sufficient condition for the attack to stay below a norm
/// threshold `delta` when the observed residual is `r + n`:
/// `||r|| < delta - ||n||`.
pub fn stealth_condition_holds(residual_norm: f64, noise_norm: f64, delta: f64) -> bool {
    residual_norm < delta - noise_norm
}

/// Lower bound on the probability that i.i.d. Gaussian noise of dimension
/// `d` keeps `||r + n||_2` at or below `delta`:
/// `1 - exp(-(delta - ||r|| - sqrt(d) sigma)^2 / (2 sigma^2))`.
///
/// Defined only for `delta > ||r|| + sqrt(d) sigma`.
pub fn stealth_probability_bound(input: &StealthBoundInput) -> Result<f64> {
    if !(input.sigma > 0.0) || input.dimension == 0 {
        return Err(Error::BoundUndefined);
    }
    let slack = input.delta - input.residual_norm - (input.dimension as f64).sqrt() * input.sigma;
    if !(slack > 0.0) {
        return Err(Error::BoundUndefined);
    }
    Ok(1.0 - (-slack * slack / (2.0 * input.sigma * input.sigma)).exp())
}

/// Empirical stealth probability: the fraction of `trials` i.i.d. draws
/// `n ~ N(0, sigma^2 I)` with `||r + n||_2 <= delta`. Each trial uses its
/// own counter-indexed stream of the seeded generator, so the result is
/// independent of evaluation order and of whether the `parallel` feature is
/// active.
pub fn monte_carlo_stealth(
    r: &[f64],
    sigma: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials < 1000 {
        return Err(Error::InvalidDetectorParams(format!(
            "at least 1000 trials required, got {trials}"
        )));
    }
    if r.is_empty() {
        return Err(Error::InvalidDetectorParams(
            "residual vector must be nonempty".into(),
        ));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidDetectorParams(format!(
            "sigma must be nonnegative, got {sigma}"
        )));
    }
    let normal = Normal::new(0.0, sigma).expect("finite nonnegative sigma");
    let delta_sq = delta * delta;

    let run_trial = |trial: usize| -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let norm_sq: f64 = r
            .iter()
            .map(|&ri| {
                let v = ri + normal.sample(&mut rng);
                v * v
            })
            .sum();
        u64::from(norm_sq <= delta_sq)
    };

    #[cfg(feature = "parallel")]
    let hits: u64 = {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(run_trial).sum()
    };
    #[cfg(not(feature = "parallel"))]
    let hits: u64 = (0..trials).map(run_trial).sum();

    Ok(hits as f64 / trials as f64)
}
