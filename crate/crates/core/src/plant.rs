//! Process and controller models for a drinking-water fluoridation dosing
//! loop: a second-order-plus-dead-time process, a PID controller with
//! filtered derivative, and a Smith-predictor structure for dead-time
//! compensation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{discretize_zoh, poly_mul, ContinuousTransferFunction, DiscreteLinearSystem};

/// PID gains. Times are in hours. `derivative_filter` is the ratio between
/// the derivative time and the filter time constant; it makes the
/// derivative action causal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidParams {
    pub kp: f64,
    pub ti: f64,
    pub td: f64,
    #[serde(default = "default_filter")]
    pub derivative_filter: f64,
}

fn default_filter() -> f64 {
    10.0
}

impl Default for PidParams {
    /// Nominal dosing-loop tuning: Kp 1.69, Ti 1.41 h, Td 0.26 h.
    fn default() -> Self {
        Self {
            kp: 1.69,
            ti: 1.41,
            td: 0.26,
            derivative_filter: 10.0,
        }
    }
}

impl PidParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp > 0.0) {
            return Err(Error::InvalidControllerParams(format!(
                "kp must be positive, got {}",
                self.kp
            )));
        }
        if !(self.ti > 0.0) {
            return Err(Error::InvalidControllerParams(format!(
                "ti must be positive, got {}",
                self.ti
            )));
        }
        if !(self.td >= 0.0) || !self.td.is_finite() {
            return Err(Error::InvalidControllerParams(format!(
                "td must be nonnegative and finite, got {}",
                self.td
            )));
        }
        if !(self.derivative_filter > 0.0) {
            return Err(Error::InvalidControllerParams(format!(
                "derivative filter must be positive, got {}",
                self.derivative_filter
            )));
        }
        Ok(())
    }
}

/// Nominal process: gain 0.93, time constants 1.07 h and 0.34 h,
/// transport delay 0.45 h.
pub fn nominal_plant() -> ContinuousTransferFunction {
    let den = poly_mul(&[1.07, 1.0], &[0.34, 1.0]);
    ContinuousTransferFunction::new(vec![0.93], den, 0.45).expect("nominal plant is well formed")
}

/// Discrete PID realization `kp (1 + 1/(ti s) + td s / (td s / N + 1))`.
///
/// The integral path accumulates `ts * e` directly so its pole sits at
/// exactly `z = 1`. The filtered derivative uses a backward-Euler
/// discretization of the lag, which keeps the feedthrough bounded by
/// `kp td / (tau + ts)` and the loop well behaved even when the filter time
/// constant is shorter than the sample time. An infinite `ti` drops the
/// integral path and `td = 0` drops the derivative path, leaving a pure
/// gain.
pub fn make_pid(params: &PidParams, ts: f64) -> Result<DiscreteLinearSystem> {
    params.validate()?;
    if ts <= 0.0 || !ts.is_finite() {
        return Err(Error::InvalidSampleTime(ts));
    }

    let with_integral = params.ti.is_finite();
    let with_derivative = params.td > 0.0;
    let n_states = usize::from(with_integral) + usize::from(with_derivative);

    let mut a = DMatrix::zeros(n_states, n_states);
    let mut b = DVector::zeros(n_states);
    let mut c = DVector::zeros(n_states);
    let mut d = params.kp;
    let mut i = 0;

    if with_integral {
        // x <- x + ts * e, contribution kp/ti * x
        a[(i, i)] = 1.0;
        b[i] = ts;
        c[i] = params.kp / params.ti;
        i += 1;
    }
    if with_derivative {
        // Backward-Euler filter state x(k+1) = (tau x(k) + ts e(k))/(tau+ts),
        // derivative output kp td (e(k) - x(k)) / (tau + ts).
        let tau = params.td / params.derivative_filter;
        let gain = params.kp * params.td / (tau + ts);
        a[(i, i)] = tau / (tau + ts);
        b[i] = ts / (tau + ts);
        c[i] = -gain;
        d += gain;
    }

    DiscreteLinearSystem::new(a, b, c, d, 0, ts)
}

/// Delay-free and delayed discretizations of the first-order internal model
/// `0.62 / (s + 0.64)` with 0.29 h dead time, sharing identical rational
/// dynamics.
pub fn make_internal_model(ts: f64) -> Result<(DiscreteLinearSystem, DiscreteLinearSystem)> {
    let model = ContinuousTransferFunction::new(vec![0.62], vec![1.0, 0.64], 0.29)?;
    let delay_free = discretize_zoh(&model.without_delay(), ts)?;
    let delayed = discretize_zoh(&model, ts)?;
    Ok((delay_free, delayed))
}

/// Smith-predictor controller: a PID acting on the measured error corrected
/// by the difference between the delay-free and delayed internal-model
/// predictions.
#[derive(Debug, Clone)]
pub struct SmithController {
    pid: DiscreteLinearSystem,
    model_delay_free: DiscreteLinearSystem,
    model_delayed: DiscreteLinearSystem,
}

impl SmithController {
    pub fn new(
        pid: DiscreteLinearSystem,
        model_delay_free: DiscreteLinearSystem,
        model_delayed: DiscreteLinearSystem,
    ) -> Result<Self> {
        if pid.ts() != model_delay_free.ts() || pid.ts() != model_delayed.ts() {
            return Err(Error::InvalidControllerParams(
                "controller subsystems must share one sample time".into(),
            ));
        }
        if model_delay_free.delay_samples() != 0 {
            return Err(Error::InvalidControllerParams(
                "delay-free internal model must have an empty delay line".into(),
            ));
        }
        Ok(Self {
            pid,
            model_delay_free,
            model_delayed,
        })
    }

    /// Nominal controller: default-tuned PID with the first-order internal
    /// model.
    pub fn nominal(params: &PidParams, ts: f64) -> Result<Self> {
        let (delay_free, delayed) = make_internal_model(ts)?;
        Self::new(make_pid(params, ts)?, delay_free, delayed)
    }

    /// Controller whose predictor runs on an arbitrary internal model.
    pub fn with_model(
        params: &PidParams,
        model: &ContinuousTransferFunction,
        ts: f64,
    ) -> Result<Self> {
        let delay_free = discretize_zoh(&model.without_delay(), ts)?;
        let delayed = discretize_zoh(model, ts)?;
        Self::new(make_pid(params, ts)?, delay_free, delayed)
    }

    /// One control step. `u_prev` is this controller's output applied at the
    /// previous sample; feeding it back into the internal models avoids an
    /// algebraic loop.
    pub fn step(&mut self, y_ref: f64, y_fb: f64, u_prev: f64) -> Result<f64> {
        let predicted = self.model_delay_free.step(u_prev)?;
        let predicted_delayed = self.model_delayed.step(u_prev)?;
        let error = y_ref - y_fb - (predicted - predicted_delayed);
        self.pid.step(error)
    }

    pub fn reset(&mut self) {
        self.pid.reset();
        self.model_delay_free.reset();
        self.model_delayed.reset();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::discretize_zoh;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nominal_plant_coefficients() {
        let p = nominal_plant();
        assert_eq!(p.num(), &[0.93]);
        assert_abs_diff_eq!(p.den()[0], 0.3638, epsilon = 1e-14);
        assert_abs_diff_eq!(p.den()[1], 1.41, epsilon = 1e-14);
        assert_eq!(p.den()[2], 1.0);
        assert_eq!(p.delay(), 0.45);
        assert_abs_diff_eq!(p.dc_gain().unwrap(), 0.93, epsilon = 1e-15);
    }

    #[test]
    fn pid_zero_error_gives_zero_output() {
        let mut pid = make_pid(&PidParams::default(), 0.1).unwrap();
        for _ in 0..50 {
            assert_eq!(pid.step(0.0).unwrap(), 0.0);
        }
    }

    // With a constant unit error the output ramps at kp/ti per hour once the
    // derivative transient has decayed.
    #[test]
    fn pid_integral_ramp_rate() {
        let ts = 0.1;
        let mut pid = make_pid(&PidParams::default(), ts).unwrap();
        let mut prev = 0.0;
        let mut slope = 0.0;
        for k in 0..2000 {
            let u = pid.step(1.0).unwrap();
            if k > 0 {
                slope = (u - prev) / ts;
            }
            prev = u;
        }
        assert_abs_diff_eq!(slope, 1.69 / 1.41, epsilon = 1e-9);
    }

    #[test]
    fn proportional_only_variant_is_pure_gain() {
        let params = PidParams {
            kp: 1.69,
            ti: f64::INFINITY,
            td: 0.0,
            derivative_filter: 10.0,
        };
        let mut pid = make_pid(&params, 0.1).unwrap();
        assert_eq!(pid.order(), 0);
        assert_eq!(pid.step(1.0).unwrap(), 1.69);
    }

    #[test]
    fn pid_rejects_invalid_params() {
        let bad = PidParams {
            kp: 0.0,
            ..PidParams::default()
        };
        assert!(make_pid(&bad, 0.1).is_err());
        let bad = PidParams {
            ti: -1.0,
            ..PidParams::default()
        };
        assert!(make_pid(&bad, 0.1).is_err());
        assert!(make_pid(&PidParams::default(), 0.0).is_err());
    }

    #[test]
    fn internal_model_gains_and_delay_alignment() {
        let (mut delay_free, mut delayed) = make_internal_model(0.1).unwrap();
        assert_abs_diff_eq!(delay_free.dc_gain().unwrap(), 0.96875, epsilon = 1e-12);
        assert_abs_diff_eq!(delayed.dc_gain().unwrap(), 0.96875, epsilon = 1e-12);
        assert_eq!(delayed.delay_samples(), 3);

        // The delayed output is the delay-free output shifted by 3 samples.
        let input: Vec<f64> = (0..40).map(|i| (i as f64 * 0.4).sin()).collect();
        let free = delay_free.simulate(&input).unwrap();
        let shifted = delayed.simulate(&input).unwrap();
        assert_eq!(&shifted[..3], &[0.0, 0.0, 0.0]);
        for k in 3..input.len() {
            assert_eq!(shifted[k].to_bits(), free[k - 3].to_bits());
        }

        // First-order lag closed form: step response tends to the DC gain.
        delay_free.reset();
        let mut last = 0.0;
        for _ in 0..600 {
            last = delay_free.step(1.0).unwrap();
        }
        assert_abs_diff_eq!(last, 0.96875, epsilon = 1e-8);
    }

    fn run_nominal_loop(y_ref: f64, samples: usize) -> (f64, f64) {
        let ts = 0.1;
        let mut plant = discretize_zoh(&nominal_plant(), ts).unwrap();
        let mut ctrl = SmithController::nominal(&PidParams::default(), ts).unwrap();
        let mut u_c = 0.0;
        let mut y = 0.0;
        for _ in 0..samples {
            y = plant.peek_output();
            let next = ctrl.step(y_ref, y, u_c).unwrap();
            plant.step(u_c).unwrap();
            u_c = next;
        }
        (y, u_c)
    }

    #[test]
    fn controller_all_zero_history_holds_zero() {
        let mut ctrl = SmithController::nominal(&PidParams::default(), 0.1).unwrap();
        for _ in 0..20 {
            assert_eq!(ctrl.step(0.0, 0.0, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn closed_loop_tracks_reference() {
        let (y, u_c) = run_nominal_loop(0.5, 4000);
        assert_abs_diff_eq!(y, 0.5, epsilon = 1e-3);
        // Steady input is forced by the plant DC gain.
        assert_abs_diff_eq!(u_c, 0.5 / 0.93, epsilon = 1e-3);
    }

    #[test]
    fn closed_loop_signals_stay_bounded() {
        let ts = 0.1;
        let mut plant = discretize_zoh(&nominal_plant(), ts).unwrap();
        let mut ctrl = SmithController::nominal(&PidParams::default(), ts).unwrap();
        let mut u_c = 0.0;
        for _ in 0..4000 {
            let y = plant.peek_output();
            assert!(y.abs() < 10.0);
            let next = ctrl.step(0.5, y, u_c).unwrap();
            assert!(next.abs() < 100.0);
            plant.step(u_c).unwrap();
            u_c = next;
        }
    }

    // With the predictor running the true plant model, the compensated
    // feedback equals the delay-free plant response.
    #[test]
    fn perfect_internal_model_cancels_delay() {
        let ts = 0.1;
        let plant_tf = nominal_plant();
        let mut plant = discretize_zoh(&plant_tf, ts).unwrap();
        let mut ctrl = SmithController::with_model(&PidParams::default(), &plant_tf, ts).unwrap();

        let mut u_c = 0.0;
        let mut u_history = Vec::new();
        let mut y_history = Vec::new();
        for _ in 0..800 {
            let y = plant.peek_output();
            y_history.push(y);
            let next = ctrl.step(0.5, y, u_c).unwrap();
            plant.step(u_c).unwrap();
            u_history.push(u_c);
            u_c = next;
        }

        // Replay the internal models over the recorded inputs.
        let mut delay_free = discretize_zoh(&plant_tf.without_delay(), ts).unwrap();
        let mut delayed = discretize_zoh(&plant_tf, ts).unwrap();
        let free = delay_free.simulate(&u_history).unwrap();
        let shifted = delayed.simulate(&u_history).unwrap();

        // y_fb + (yhat - yhat_d) should match the delay-free response.
        let k0 = 10;
        for k in k0..800 {
            let compensated = y_history[k] + free[k] - shifted[k];
            assert_abs_diff_eq!(compensated, free[k], epsilon = 1e-9);
        }
    }
}
