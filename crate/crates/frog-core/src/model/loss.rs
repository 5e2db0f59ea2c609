//! Focal loss for the heavily imbalanced friend-recommendation labels:
//! L = −α(1−ŷ)^γ·log(ŷ)·y − (1−α)·ŷ^γ·log(1−ŷ)·(1−y).
//!
//! With γ = 0 and α = 0.5 this is exactly half the binary cross-entropy;
//! growing γ down-weights well-classified examples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{real, Real, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub alpha: f64,
    pub gamma: f64,
    /// ŷ is clamped to [ε, 1−ε] before any logarithm.
    pub clamp_eps: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { alpha: 0.25, gamma: 2.0, clamp_eps: 1e-7 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| Err(Error::InvalidConfig { key: format!("loss.{key}"), reason });
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha", format!("must lie in [0, 1], got {}", self.alpha));
        }
        if self.gamma < 0.0 || !self.gamma.is_finite() {
            return bad("gamma", format!("must be finite and >= 0, got {}", self.gamma));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            return bad("clamp_eps", format!("must lie in (0, 0.5), got {}", self.clamp_eps));
        }
        Ok(())
    }
}

/// Builds the focal-loss term for one instance on the tape (1×1 output).
pub fn focal_term<T: Real>(tape: &mut Tape<T>, y_hat: Var, y: u8, cfg: &LossConfig) -> Var {
    debug_assert!(y <= 1, "label must be 0 or 1");
    let eps = real::<T>(cfg.clamp_eps);
    let gamma = real::<T>(cfg.gamma);
    let p = tape.clamp(y_hat, eps, T::one() - eps);
    if y == 1 {
        // −α·(1−p)^γ·ln(p)
        let one_minus = tape.affine(p, -T::one(), T::one());
        let weight = tape.pow_const(one_minus, gamma);
        let ln_p = tape.ln(p);
        let prod = tape.mul(weight, ln_p);
        tape.scale(prod, -real::<T>(cfg.alpha))
    } else {
        // −(1−α)·p^γ·ln(1−p)
        let weight = tape.pow_const(p, gamma);
        let one_minus = tape.affine(p, -T::one(), T::one());
        let ln_q = tape.ln(one_minus);
        let prod = tape.mul(weight, ln_q);
        tape.scale(prod, -(T::one() - real::<T>(cfg.alpha)))
    }
}

/// Closed-form focal loss; the scalar reference the tape version is tested
/// against, and the evaluator's loss reporter.
pub fn focal_loss_value(y_hat: f64, y: u8, cfg: &LossConfig) -> f64 {
    let p = y_hat.clamp(cfg.clamp_eps, 1.0 - cfg.clamp_eps);
    if y == 1 {
        -cfg.alpha * (1.0 - p).powf(cfg.gamma) * p.ln()
    } else {
        -(1.0 - cfg.alpha) * p.powf(cfg.gamma) * (1.0 - p).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, ParamSet, Tensor};
    use approx::assert_abs_diff_eq;

    #[test]
    fn config_ranges_enforced() {
        assert!(LossConfig::default().validate().is_ok());
        assert!(LossConfig { alpha: 1.2, ..Default::default() }.validate().is_err());
        assert!(LossConfig { gamma: -0.1, ..Default::default() }.validate().is_err());
        assert!(LossConfig { clamp_eps: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn closed_form_matches_hand_computed_points() {
        // γ=0, α=0.5, y=1, ŷ=0.5 → 0.5·ln 2
        let cfg = LossConfig { alpha: 0.5, gamma: 0.0, ..Default::default() };
        assert_abs_diff_eq!(focal_loss_value(0.5, 1, &cfg), 0.5 * 2.0_f64.ln(), epsilon = 1e-12);
        // α=0.25, γ=2, y=1, ŷ=0.9 → 0.25·0.01·(−ln 0.9)
        let cfg = LossConfig::default();
        assert_abs_diff_eq!(
            focal_loss_value(0.9, 1, &cfg),
            0.25 * 0.01 * -(0.9_f64.ln()),
            epsilon = 1e-12
        );
        // Correct confident prediction → loss near 0.
        assert!(focal_loss_value(1.0 - 1e-9, 1, &cfg) < 1e-6);
    }

    #[test]
    fn gamma_zero_alpha_half_is_half_bce() {
        let cfg = LossConfig { alpha: 0.5, gamma: 0.0, clamp_eps: 1e-7 };
        for &(y_hat, y) in &[(0.1, 0u8), (0.1, 1u8), (0.5, 1), (0.73, 0), (0.99, 1)] {
            let bce = if y == 1 { -(y_hat as f64).ln() } else { -(1.0 - y_hat as f64).ln() };
            assert_abs_diff_eq!(focal_loss_value(y_hat, y, &cfg), 0.5 * bce, epsilon = 1e-12);
        }
    }

    #[test]
    fn tape_term_matches_closed_form_both_labels() {
        let cfg = LossConfig::default();
        for &(y_hat, y) in &[(0.31, 1u8), (0.31, 0u8), (0.999, 1), (0.001, 0), (0.5, 1)] {
            let mut tape = Tape::new();
            let p = tape.leaf(Tensor::scalar(y_hat));
            let l = focal_term(&mut tape, p, y, &cfg);
            assert_abs_diff_eq!(tape.value(l).item(), focal_loss_value(y_hat, y, &cfg), epsilon = 1e-12);
        }
    }

    #[test]
    fn focal_grad_check_through_sigmoid() {
        // Loss as a function of a logit parameter, both labels.
        for y in [0u8, 1u8] {
            let mut params = ParamSet::new();
            params.insert("logit", Tensor::scalar(0.37)).unwrap();
            let cfg = LossConfig::default();
            let report = grad_check(&mut params, 1e-6, |tape, _, vars| {
                let y_hat = tape.sigmoid(vars[0]);
                Ok(focal_term(tape, y_hat, y, &cfg))
            })
            .unwrap();
            assert!(report.max_rel_err <= 1e-8, "label {y}: rel err {}", report.max_rel_err);
        }
    }
}
