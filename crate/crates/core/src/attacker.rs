//! Covert man-in-the-middle agent sitting between controller and plant.
//!
//! From the attack start onward the agent injects an actuation signal `mu`
//! into the plant input and subtracts its own model's predicted response
//! `gamma` from the measurement stream, so the controller keeps seeing
//! nominal behavior. `mu` is produced by a covert controller that steers
//! `gamma` toward the attacker's reference offset `gamma_ref`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{discretize_zoh, ContinuousTransferFunction, DiscreteLinearSystem};
use crate::plant::{make_pid, nominal_plant, PidParams, SmithController};

/// How the scalar identification error `alpha` deforms the plant model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MismatchMode {
    /// Scale the numerator only: the identified model is `alpha * P`.
    #[default]
    GainOnly,
    /// Scale the numerator and every denominator coefficient except the
    /// constant term, perturbing the time constants as well as the gain.
    CoefficientWise,
}

/// Wiring of the covert controller around the identified model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovertLoopStructure {
    /// PID plus Smith predictor built on the identified model.
    #[default]
    Smith,
    /// PID acting directly on `gamma_ref - gamma`.
    PlainPid,
}

/// Attack parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerConfig {
    /// Multiplicative model error of the identified plant model.
    pub alpha: f64,
    /// Reference deviation the attacker steers the plant toward.
    pub gamma_ref: f64,
    /// Sample index at which the attack becomes active.
    pub attack_start: usize,
    /// Covert controller tuning; defaults to the nominal controller.
    #[serde(default)]
    pub covert_controller: PidParams,
    #[serde(default)]
    pub structure: CovertLoopStructure,
    #[serde(default)]
    pub mismatch: MismatchMode,
}

impl Default for AttackerConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            gamma_ref: 0.0,
            attack_start: 2000,
            covert_controller: PidParams::default(),
            structure: CovertLoopStructure::default(),
            mismatch: MismatchMode::default(),
        }
    }
}

impl AttackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidAttackerConfig(format!(
                "alpha must be positive and finite, got {}",
                self.alpha
            )));
        }
        if !self.gamma_ref.is_finite() {
            return Err(Error::InvalidAttackerConfig(
                "gamma_ref must be finite".into(),
            ));
        }
        self.covert_controller.validate()
    }
}

/// The attacker's identified plant model. The delay is assumed known
/// exactly; only the rational part is deformed by `alpha`.
pub fn identified_model(alpha: f64, mode: MismatchMode) -> Result<ContinuousTransferFunction> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidAttackerConfig(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    let plant = nominal_plant();
    match mode {
        MismatchMode::GainOnly => Ok(plant.scaled_numerator(alpha)),
        MismatchMode::CoefficientWise => {
            let num: Vec<f64> = plant.num().iter().map(|c| c * alpha).collect();
            let mut den = plant.den().to_vec();
            let last = den.len() - 1;
            for c in &mut den[..last] {
                *c *= alpha;
            }
            ContinuousTransferFunction::new(num, den, plant.delay())
        }
    }
}

enum CovertController {
    Smith(SmithController),
    PlainPid(DiscreteLinearSystem),
}

impl CovertController {
    fn step(&mut self, gamma_ref: f64, gamma: f64, mu_prev: f64) -> Result<f64> {
        match self {
            CovertController::Smith(ctrl) => ctrl.step(gamma_ref, gamma, mu_prev),
            CovertController::PlainPid(pid) => pid.step(gamma_ref - gamma),
        }
    }
}

/// Stateful covert agent for one simulated loop.
pub struct CovertAgent {
    config: AttackerConfig,
    model: DiscreteLinearSystem,
    controller: CovertController,
    gamma: f64,
    mu: f64,
}

impl CovertAgent {
    pub fn new(config: AttackerConfig, ts: f64) -> Result<Self> {
        config.validate()?;
        let identified = identified_model(config.alpha, config.mismatch)?;
        let model = discretize_zoh(&identified, ts)?;
        let controller = match config.structure {
            CovertLoopStructure::Smith => CovertController::Smith(SmithController::with_model(
                &config.covert_controller,
                &identified,
                ts,
            )?),
            CovertLoopStructure::PlainPid => {
                CovertController::PlainPid(make_pid(&config.covert_controller, ts)?)
            }
        };
        Ok(Self {
            config,
            model,
            controller,
            gamma: 0.0,
            mu: 0.0,
        })
    }

    pub fn config(&self) -> &AttackerConfig {
        &self.config
    }

    /// Predicted plant response to the injected signal at the current sample.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Injected actuation at the current sample.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn active(&self, t: usize) -> bool {
        t >= self.config.attack_start
    }

    /// Remaining covert tracking error `gamma_ref - gamma`.
    pub fn tracking_error(&self) -> f64 {
        self.config.gamma_ref - self.gamma
    }

    /// Intercept one sample. Reads only the controller command `u_c` and the
    /// measurement `y_m`; returns the plant input `u` and the manipulated
    /// measurement `y_ma` seen by the controller.
    ///
    /// Before the attack start the channel passes through untouched while
    /// the agent's internals are clocked with zeros. Once active:
    /// the model emits `gamma` from the past `mu` sequence, `y_ma = y_m -
    /// gamma`, the covert controller produces the next `mu`, `u = u_c + mu`,
    /// and the model advances with `mu`. The model's delay line keeps the
    /// per-sample order free of algebraic loops.
    pub fn intercept(&mut self, u_c: f64, y_m: f64, t: usize) -> Result<(f64, f64)> {
        if !self.active(t) {
            self.model.step(0.0)?;
            self.controller.step(0.0, 0.0, 0.0)?;
            self.gamma = 0.0;
            self.mu = 0.0;
            return Ok((u_c, y_m));
        }
        let gamma = self.model.peek_output();
        let y_ma = y_m - gamma;
        let mu = self
            .controller
            .step(self.config.gamma_ref, gamma, self.mu)?;
        let u = u_c + mu;
        self.model.step(mu)?;
        self.gamma = gamma;
        self.mu = mu;
        Ok((u, y_ma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identified_model_gain_scaling() {
        let exact = identified_model(1.0, MismatchMode::GainOnly).unwrap();
        assert_eq!(exact, nominal_plant());

        let low = identified_model(0.9, MismatchMode::GainOnly).unwrap();
        assert_abs_diff_eq!(low.dc_gain().unwrap(), 0.837, epsilon = 1e-12);
        assert_eq!(low.den(), nominal_plant().den());
        assert_eq!(low.delay(), 0.45);

        let high = identified_model(1.1, MismatchMode::GainOnly).unwrap();
        assert_abs_diff_eq!(high.dc_gain().unwrap(), 1.023, epsilon = 1e-12);

        assert!(identified_model(0.0, MismatchMode::GainOnly).is_err());
        assert!(identified_model(-0.5, MismatchMode::GainOnly).is_err());
    }

    #[test]
    fn identified_model_coefficient_scaling_keeps_constant_term() {
        let m = identified_model(1.1, MismatchMode::CoefficientWise).unwrap();
        assert_abs_diff_eq!(m.num()[0], 0.93 * 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(m.den()[0], 0.3638 * 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(m.den()[1], 1.41 * 1.1, epsilon = 1e-12);
        assert_eq!(m.den()[2], 1.0);
    }

    #[test]
    fn passthrough_before_attack_start() {
        let config = AttackerConfig {
            gamma_ref: 0.3,
            attack_start: 10,
            ..AttackerConfig::default()
        };
        let mut agent = CovertAgent::new(config, 0.1).unwrap();
        for t in 0..10 {
            let (u, y_ma) = agent.intercept(0.7, 0.52, t).unwrap();
            assert_eq!(u, 0.7);
            assert_eq!(y_ma, 0.52);
            assert_eq!(agent.mu(), 0.0);
            assert_eq!(agent.gamma(), 0.0);
        }
    }

    #[test]
    fn tracking_error_starts_at_gamma_ref() {
        let config = AttackerConfig {
            gamma_ref: 0.25,
            attack_start: 0,
            ..AttackerConfig::default()
        };
        let mut agent = CovertAgent::new(config, 0.1).unwrap();
        agent.intercept(0.0, 0.0, 0).unwrap();
        // gamma is still zero at the first active sample
        assert_eq!(agent.tracking_error(), 0.25);
    }

    #[test]
    fn zero_gamma_ref_keeps_agent_inert() {
        let config = AttackerConfig {
            gamma_ref: 0.0,
            alpha: 1.07,
            attack_start: 5,
            ..AttackerConfig::default()
        };
        let mut agent = CovertAgent::new(config, 0.1).unwrap();
        for t in 0..200 {
            let (u, y_ma) = agent.intercept(0.6, 0.5, t).unwrap();
            assert_eq!(u, 0.6);
            assert_eq!(y_ma, 0.5);
            assert_eq!(agent.mu(), 0.0);
            assert_eq!(agent.gamma(), 0.0);
            assert_eq!(agent.tracking_error(), 0.0);
        }
    }

    #[test]
    fn covert_loop_settles_tracking_error() {
        let config = AttackerConfig {
            gamma_ref: 0.25,
            attack_start: 0,
            ..AttackerConfig::default()
        };
        let mut agent = CovertAgent::new(config, 0.1).unwrap();
        for t in 0..3000 {
            agent.intercept(0.0, 0.0, t).unwrap();
        }
        assert!(agent.tracking_error().abs() <= 1e-6);
        assert_abs_diff_eq!(agent.gamma(), 0.25, epsilon = 1e-6);
    }

    // gamma must equal the identified model's response to the recorded mu
    // sequence.
    #[test]
    fn gamma_is_model_response_to_recorded_mu() {
        let config = AttackerConfig {
            gamma_ref: 0.4,
            alpha: 1.05,
            attack_start: 3,
            ..AttackerConfig::default()
        };
        let mut agent = CovertAgent::new(config.clone(), 0.1).unwrap();
        let mut mus = Vec::new();
        let mut gammas = Vec::new();
        for t in 0..400 {
            agent.intercept(0.1, 0.5, t).unwrap();
            mus.push(agent.mu());
            gammas.push(agent.gamma());
        }
        let identified = identified_model(config.alpha, config.mismatch).unwrap();
        let mut replay = discretize_zoh(&identified, 0.1).unwrap();
        for (t, &mu) in mus.iter().enumerate() {
            let predicted = replay.peek_output();
            replay.step(mu).unwrap();
            assert_abs_diff_eq!(gammas[t], predicted, epsilon = 1e-12);
        }
    }

    #[test]
    fn plain_pid_structure_also_tracks() {
        let config = AttackerConfig {
            gamma_ref: 0.25,
            attack_start: 0,
            structure: CovertLoopStructure::PlainPid,
            ..AttackerConfig::default()
        };
        let mut agent = CovertAgent::new(config, 0.1).unwrap();
        for t in 0..6000 {
            agent.intercept(0.0, 0.0, t).unwrap();
        }
        assert!(agent.tracking_error().abs() <= 1e-3);
    }
}
