//! Subband weight updates.
//!
//! All robust variants share the scaled-NSAF form
//!
//! ```text
//! w(k+1) = w(k) + μ Σ_i f(z_i) e_i(k) u_i(k) / (‖u_i(k)‖² + ε),
//! z_i = e_i(k) / √(‖u_i(k)‖² + ε)
//! ```
//!
//! where the per-subband scale function `f` is `1` for NSAF, `exp(−β z²)` for
//! the correntropy (MCC) rule and `1/(1 + γ z²)` for the logarithmic-cost (LC)
//! rule. Large normalized errors, as produced by impulsive interference,
//! shrink the effective step of the affected subband towards zero.
//!
//! The sign-error SAF (SSAF) baseline does not factor this way and has its own
//! update, [`AdaptiveState::update_ssaf`].

use crate::error::{Error, Result};
use crate::filterbank::SubbandFrame;

/// Default regularization per weight; the full default is `1e-6 · M`.
pub const EPS_PER_TAP: f64 = 1e-6;

/// Update rule selector with its shape parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleRule {
    /// Constant scale 1.
    Nsaf,
    /// Maximum correntropy criterion, `f = exp(−β z²)`.
    Mcc { beta: f64 },
    /// Logarithmic cost, `f = 1 / (1 + γ z²)`.
    Lc { gamma: f64 },
    /// Sign-error SAF baseline.
    Sign,
}

impl ScaleRule {
    pub fn parameter(&self) -> f64 {
        match *self {
            ScaleRule::Mcc { beta } => beta,
            ScaleRule::Lc { gamma } => gamma,
            ScaleRule::Nsaf | ScaleRule::Sign => 0.0,
        }
    }

    /// Same rule kind with a different shape parameter (ignored for NSAF/SIGN).
    pub fn with_parameter(self, value: f64) -> Self {
        match self {
            ScaleRule::Mcc { .. } => ScaleRule::Mcc { beta: value },
            ScaleRule::Lc { .. } => ScaleRule::Lc { gamma: value },
            other => other,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.parameter();
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::param(format!(
                "scale-rule parameter must be finite and non-negative (got {p})"
            )));
        }
        Ok(())
    }

    /// Scale from the squared normalized error `z²`.
    fn scale_sq(&self, z2: f64) -> f64 {
        match *self {
            ScaleRule::Mcc { beta } => (-beta * z2).exp(),
            ScaleRule::Lc { gamma } => 1.0 / (1.0 + gamma * z2),
            ScaleRule::Nsaf | ScaleRule::Sign => 1.0,
        }
    }
}

/// Per-subband scale `f(z)` for a normalized subband error `z`.
pub fn scale_factor(rule: ScaleRule, z: f64) -> Result<f64> {
    if rule == ScaleRule::Sign {
        return Err(Error::Unsupported(
            "the sign rule has no per-subband scale function".into(),
        ));
    }
    if !z.is_finite() {
        return Err(Error::param(format!(
            "normalized error must be finite (got {z})"
        )));
    }
    rule.validate()?;
    Ok(rule.scale_sq(z * z))
}

/// Rejects step sizes outside the NSAF stability interval `0 < μ < 2`.
pub fn validate_step_size(mu: f64) -> Result<()> {
    if mu > 0.0 && mu < 2.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "step size must satisfy 0 < mu < 2 (got {mu})"
        )))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `e_i = d_i − u_iᵀ w` for every subband.
pub fn subband_errors(w: &[f64], frame: &SubbandFrame) -> Vec<f64> {
    frame
        .regressors()
        .iter()
        .zip(frame.desired())
        .map(|(u, &d)| d - dot(u, w))
        .collect()
}

/// Writes `Σ_i f_i e_i u_i / (‖u_i‖² + ε)` into `out`.
///
/// Subbands whose regularized energy is zero carry an all-zero regressor and
/// contribute nothing.
fn scaled_direction(
    rule: ScaleRule,
    eps: f64,
    errors: &[f64],
    frame: &SubbandFrame,
    out: &mut [f64],
) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for ((u, &e), &energy) in frame.regressors().iter().zip(errors).zip(frame.energies()) {
        let denom = energy + eps;
        if denom == 0.0 {
            continue;
        }
        let f = rule.scale_sq(e * e / denom);
        let c = f * e / denom;
        for (o, &x) in out.iter_mut().zip(u) {
            *o += c * x;
        }
    }
}

/// Writes `Σ_i sgn(e_i) u_i / √(Σ_i ‖u_i‖² + ε)` into `out`, with `sgn(0) = 0`.
fn sign_direction(eps: f64, errors: &[f64], frame: &SubbandFrame, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (u, &e) in frame.regressors().iter().zip(errors) {
        let s = if e > 0.0 {
            1.0
        } else if e < 0.0 {
            -1.0
        } else {
            continue;
        };
        for (o, &x) in out.iter_mut().zip(u) {
            *o += s * x;
        }
    }
    let norm = (frame.energies().iter().sum::<f64>() + eps).sqrt();
    if norm > 0.0 {
        out.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Tap weights of one adaptive filter plus its update parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveState {
    weights: Vec<f64>,
    mu: f64,
    eps: f64,
    rule: ScaleRule,
    scratch: Vec<f64>,
}

impl AdaptiveState {
    /// Zero-initialized filter of length `m`.
    pub fn new(m: usize, mu: f64, eps: f64, rule: ScaleRule) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("filter length M must be positive"));
        }
        validate_step_size(mu)?;
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::param(format!(
                "regularization must be finite and non-negative (got {eps})"
            )));
        }
        rule.validate()?;
        Ok(Self {
            weights: vec![0.0; m],
            mu,
            eps,
            rule,
            scratch: vec![0.0; m],
        })
    }

    /// Like [`AdaptiveState::new`] with the default `ε = 1e-6 · M`.
    pub fn with_default_eps(m: usize, mu: f64, rule: ScaleRule) -> Result<Self> {
        Self::new(m, mu, EPS_PER_TAP * m as f64, rule)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.weights.len() {
            return Err(Error::param(format!(
                "expected {} weights, got {}",
                self.weights.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::param("weights must be finite"));
        }
        self.weights.copy_from_slice(weights);
        Ok(())
    }

    pub fn filter_len(&self) -> usize {
        self.weights.len()
    }

    pub fn step_size(&self) -> f64 {
        self.mu
    }

    pub fn regularization(&self) -> f64 {
        self.eps
    }

    pub fn rule(&self) -> ScaleRule {
        self.rule
    }

    fn check_frame(&self, frame: &SubbandFrame) -> Result<()> {
        if frame.filter_len() != self.weights.len() {
            return Err(Error::param(format!(
                "frame regressors have length {}, filter has {}",
                frame.filter_len(),
                self.weights.len()
            )));
        }
        Ok(())
    }

    /// The weight increment this state would apply for `frame`, and the
    /// subband errors it was computed from. Does not modify the weights.
    pub fn increment(&self, frame: &SubbandFrame) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_frame(frame)?;
        let errors = subband_errors(&self.weights, frame);
        let mut dir = vec![0.0; self.weights.len()];
        match self.rule {
            ScaleRule::Sign => sign_direction(self.eps, &errors, frame, &mut dir),
            rule => scaled_direction(rule, self.eps, &errors, frame, &mut dir),
        }
        dir.iter_mut().for_each(|v| *v *= self.mu);
        Ok((dir, errors))
    }

    /// Applies one block update with whatever rule this state carries and
    /// returns the a-priori subband errors.
    pub fn update(&mut self, frame: &SubbandFrame) -> Result<Vec<f64>> {
        match self.rule {
            ScaleRule::Sign => self.update_ssaf(frame),
            _ => self.update_scaled(frame),
        }
    }

    /// Scaled-NSAF update (NSAF, MCC-SAF, LC-SAF).
    pub fn update_scaled(&mut self, frame: &SubbandFrame) -> Result<Vec<f64>> {
        if self.rule == ScaleRule::Sign {
            return Err(Error::Unsupported(
                "update_scaled needs an NSAF, MCC or LC rule".into(),
            ));
        }
        self.check_frame(frame)?;
        let errors = subband_errors(&self.weights, frame);
        let mut dir = std::mem::take(&mut self.scratch);
        scaled_direction(self.rule, self.eps, &errors, frame, &mut dir);
        let res = self.commit(&dir, frame.block());
        self.scratch = dir;
        res.map(|()| errors)
    }

    /// Sign-error SAF update with joint normalization by the total subband
    /// regressor energy.
    pub fn update_ssaf(&mut self, frame: &SubbandFrame) -> Result<Vec<f64>> {
        if self.rule != ScaleRule::Sign {
            return Err(Error::Unsupported("update_ssaf needs the sign rule".into()));
        }
        self.check_frame(frame)?;
        let errors = subband_errors(&self.weights, frame);
        let mut dir = std::mem::take(&mut self.scratch);
        sign_direction(self.eps, &errors, frame, &mut dir);
        let res = self.commit(&dir, frame.block());
        self.scratch = dir;
        res.map(|()| errors)
    }

    /// `w ← w + μ·dir`, rejected as a whole if any weight turns non-finite.
    fn commit(&mut self, dir: &[f64], block: usize) -> Result<()> {
        let mu = self.mu;
        if self
            .weights
            .iter()
            .zip(dir)
            .any(|(w, d)| !(w + mu * d).is_finite())
        {
            return Err(Error::Divergence { block });
        }
        for (w, d) in self.weights.iter_mut().zip(dir) {
            *w += mu * d;
        }
        Ok(())
    }
}

fn check_cost_inputs(w: &[f64], frame: &SubbandFrame, param: f64, eps: f64) -> Result<()> {
    if !(param > 0.0 && param.is_finite()) {
        return Err(Error::param(format!(
            "cost parameter must be positive (got {param})"
        )));
    }
    if w.len() != frame.filter_len() {
        return Err(Error::param("weight and regressor lengths differ"));
    }
    if frame.energies().iter().any(|&e| e + eps == 0.0) {
        return Err(Error::DegenerateInput(
            "a subband regressor has zero regularized energy".into(),
        ));
    }
    Ok(())
}

fn normalized_sq_errors(w: &[f64], frame: &SubbandFrame, eps: f64) -> Vec<f64> {
    subband_errors(w, frame)
        .iter()
        .zip(frame.energies())
        .map(|(e, en)| e * e / (en + eps))
        .collect()
}

/// Correntropy cost `(1/2β) Σ_i exp(−β e_i² / (‖u_i‖² + ε))`, to be maximized.
pub fn cost_mcc(w: &[f64], frame: &SubbandFrame, beta: f64, eps: f64) -> Result<f64> {
    check_cost_inputs(w, frame, beta, eps)?;
    let sum: f64 = normalized_sq_errors(w, frame, eps)
        .iter()
        .map(|z2| (-beta * z2).exp())
        .sum();
    Ok(sum / (2.0 * beta))
}

/// Logarithmic cost `(1/2γ) Σ_i ln(1 + γ e_i² / (‖u_i‖² + ε))`, to be minimized.
pub fn cost_lc(w: &[f64], frame: &SubbandFrame, gamma: f64, eps: f64) -> Result<f64> {
    check_cost_inputs(w, frame, gamma, eps)?;
    let sum: f64 = normalized_sq_errors(w, frame, eps)
        .iter()
        .map(|z2| (gamma * z2).ln_1p())
        .sum();
    Ok(sum / (2.0 * gamma))
}

/// Closed-form gradient of [`cost_mcc`] with respect to `w`.
pub fn gradient_mcc(w: &[f64], frame: &SubbandFrame, beta: f64, eps: f64) -> Result<Vec<f64>> {
    check_cost_inputs(w, frame, beta, eps)?;
    let errors = subband_errors(w, frame);
    let mut g = vec![0.0; w.len()];
    scaled_direction(ScaleRule::Mcc { beta }, eps, &errors, frame, &mut g);
    Ok(g)
}

/// Closed-form gradient of [`cost_lc`] with respect to `w`.
pub fn gradient_lc(w: &[f64], frame: &SubbandFrame, gamma: f64, eps: f64) -> Result<Vec<f64>> {
    check_cost_inputs(w, frame, gamma, eps)?;
    let errors = subband_errors(w, frame);
    let mut g = vec![0.0; w.len()];
    scaled_direction(ScaleRule::Lc { gamma }, eps, &errors, frame, &mut g);
    g.iter_mut().for_each(|v| *v = -*v);
    Ok(g)
}
