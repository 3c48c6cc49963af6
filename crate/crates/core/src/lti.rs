//! Continuous-to-discrete conversion and sample-by-sample execution of
//! SISO linear time-invariant systems with transport delay.
//!
//! Continuous systems are described by a rational transfer function plus a
//! dead time. Discretization uses the zero-order-hold equivalent of the
//! rational part (matrix exponential of the augmented `[A B; 0 0]` block)
//! and an integer delay line for the dead time, with the fractional sample
//! count rounded half away from zero.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Rounding rule applied to `delay / ts` when building the delay line.
/// Recorded in output metadata so runs can be repeated under an alternative.
pub const DELAY_ROUNDING_RULE: &str = "half-away-from-zero";

/// A proper rational transfer function in `s` plus a transport delay in hours.
///
/// Coefficients are stored highest power first.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousTransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
    delay: f64,
}

impl ContinuousTransferFunction {
    /// Build a transfer function, trimming leading numerator zeros and
    /// checking that it is proper with a nonzero leading denominator
    /// coefficient and a nonnegative delay.
    pub fn new(num: Vec<f64>, den: Vec<f64>, delay: f64) -> Result<Self> {
        if num.is_empty() || den.is_empty() {
            return Err(Error::InvalidTransferFunction(
                "empty coefficient list".into(),
            ));
        }
        if !num.iter().chain(den.iter()).all(|c| c.is_finite()) || !delay.is_finite() {
            return Err(Error::InvalidTransferFunction(
                "non-finite coefficient".into(),
            ));
        }
        if delay < 0.0 {
            return Err(Error::InvalidTransferFunction(format!(
                "negative delay {delay}"
            )));
        }
        let mut num = num;
        while num.len() > 1 && num[0] == 0.0 {
            num.remove(0);
        }
        if den[0] == 0.0 {
            return Err(Error::InvalidTransferFunction(
                "leading denominator coefficient is zero".into(),
            ));
        }
        if num.len() > den.len() {
            return Err(Error::NotProper {
                num: num.len() - 1,
                den: den.len() - 1,
            });
        }
        Ok(Self { num, den, delay })
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// Same rational dynamics with the transport delay removed.
    pub fn without_delay(&self) -> Self {
        Self {
            num: self.num.clone(),
            den: self.den.clone(),
            delay: 0.0,
        }
    }

    /// Same dynamics with every numerator coefficient scaled by `k`.
    pub fn scaled_numerator(&self, k: f64) -> Self {
        Self {
            num: self.num.iter().map(|c| c * k).collect(),
            den: self.den.clone(),
            delay: self.delay,
        }
    }

    /// Gain at `s = 0`, or `None` when the denominator constant term vanishes
    /// (pole at the origin).
    pub fn dc_gain(&self) -> Option<f64> {
        let a0 = *self.den.last().unwrap();
        if a0 == 0.0 {
            None
        } else {
            Some(self.num.last().unwrap() / a0)
        }
    }
}

/// Multiply two polynomials given highest power first.
pub fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// Discrete state-space SISO system with an integer input delay line.
///
/// `step` is the only state-advancing operation: it pushes the input into
/// the delay line, pops the delayed input `u_d`, emits
/// `y = c.x + d*u_d`, and then advances `x <- A x + B u_d`.
#[derive(Debug, Clone)]
pub struct DiscreteLinearSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    d: f64,
    state: DVector<f64>,
    delay_samples: usize,
    delay_buffer: VecDeque<f64>,
    ts: f64,
}

impl DiscreteLinearSystem {
    /// Assemble a system from explicit matrices. `a` must be `n x n` and
    /// `b`, `c` of length `n`.
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: DVector<f64>,
        d: f64,
        delay_samples: usize,
        ts: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || c.len() != n {
            return Err(Error::InvalidTransferFunction(format!(
                "inconsistent state-space dimensions: a {}x{}, b {}, c {}",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        if ts <= 0.0 || !ts.is_finite() {
            return Err(Error::InvalidSampleTime(ts));
        }
        Ok(Self {
            a,
            b,
            c,
            d,
            state: DVector::zeros(n),
            delay_samples,
            delay_buffer: VecDeque::from(vec![0.0; delay_samples]),
            ts,
        })
    }

    pub fn order(&self) -> usize {
        self.state.len()
    }

    pub fn delay_samples(&self) -> usize {
        self.delay_samples
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    fn emit(&self, u_d: f64) -> f64 {
        self.c.dot(&self.state) + self.d * u_d
    }

    /// Output the system will emit at the current sample, available before
    /// the input is known. Exact when the next delayed input is already in
    /// the delay line (`delay_samples >= 1`) or the system has no
    /// feedthrough; this covers every strictly causal use in the closed
    /// loop.
    pub fn peek_output(&self) -> f64 {
        let u_d = self.delay_buffer.front().copied().unwrap_or(0.0);
        self.emit(u_d)
    }

    /// Advance one sample: returns the output at the current sample and
    /// moves the state forward.
    pub fn step(&mut self, u: f64) -> Result<f64> {
        if !u.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        self.delay_buffer.push_back(u);
        // Length stays delay_samples; with no delay the input passes through.
        let u_d = self.delay_buffer.pop_front().unwrap_or(u);
        let y = self.emit(u_d);
        if self.order() > 0 {
            self.state = &self.a * &self.state + &self.b * u_d;
        }
        Ok(y)
    }

    /// Run over an input sequence, returning one output per input.
    pub fn simulate(&mut self, inputs: &[f64]) -> Result<Vec<f64>> {
        inputs.iter().map(|&u| self.step(u)).collect()
    }

    /// Steady-state gain `c (I - A)^-1 b + d`; fails on a pole at `z = 1`.
    pub fn dc_gain(&self) -> Result<f64> {
        let n = self.order();
        if n == 0 {
            return Ok(self.d);
        }
        let i_minus_a = DMatrix::identity(n, n) - &self.a;
        let lu = i_minus_a.full_piv_lu();
        let x = lu.solve(&self.b).ok_or(Error::InfiniteDcGain)?;
        Ok(self.c.dot(&x) + self.d)
    }

    /// Zero the state and the delay line.
    pub fn reset(&mut self) {
        self.state.fill(0.0);
        for v in self.delay_buffer.iter_mut() {
            *v = 0.0;
        }
    }
}

/// Zero-order-hold discretization of a proper continuous transfer function.
///
/// The rational part is realized in controllable canonical form and
/// converted through the matrix exponential of the augmented block
/// `[A B; 0 0] * ts`; the transport delay becomes
/// `round(delay / ts)` samples, rounding half away from zero.
pub fn discretize_zoh(ctf: &ContinuousTransferFunction, ts: f64) -> Result<DiscreteLinearSystem> {
    if ts <= 0.0 || !ts.is_finite() {
        return Err(Error::InvalidSampleTime(ts));
    }
    let delay_samples = (ctf.delay() / ts).round() as usize;

    // Normalize to a monic denominator.
    let lead = ctf.den()[0];
    let den: Vec<f64> = ctf.den().iter().map(|c| c / lead).collect();
    let num: Vec<f64> = ctf.num().iter().map(|c| c / lead).collect();
    let n = den.len() - 1;

    if n == 0 {
        // Pure gain.
        return DiscreteLinearSystem::new(
            DMatrix::zeros(0, 0),
            DVector::zeros(0),
            DVector::zeros(0),
            num[0],
            delay_samples,
            ts,
        );
    }

    // Ascending-power coefficients, numerator padded to degree n.
    let mut a_coeffs = vec![0.0; n]; // a_0 .. a_{n-1}, monic a_n = 1
    for (k, &c) in den.iter().rev().take(n).enumerate() {
        a_coeffs[k] = c;
    }
    let mut b_coeffs = vec![0.0; n + 1];
    for (k, &c) in num.iter().rev().enumerate() {
        b_coeffs[k] = c;
    }
    let d = b_coeffs[n]; // nonzero only when degrees match

    // Controllable canonical form of the strictly proper remainder.
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -a_coeffs[j];
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let c = DVector::from_iterator(n, (0..n).map(|k| b_coeffs[k] - a_coeffs[k] * d));

    // ZOH via exp([A B; 0 0] * ts).
    let mut aug = DMatrix::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&a);
    aug.view_mut((0, n), (n, 1)).copy_from(&b);
    let exp = (aug * ts).exp();
    let ad = exp.view((0, 0), (n, n)).into_owned();
    let bd = DVector::from_iterator(n, (0..n).map(|i| exp[(i, n)]));

    DiscreteLinearSystem::new(ad, bd, c, d, delay_samples, ts)
}
