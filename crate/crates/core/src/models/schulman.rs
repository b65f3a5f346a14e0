//! Schulman's anomalous-rotation weights and the outcome ratio they induce.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unnormalised weight `1/(α² + γ²)` of an anomalous rotation by net angle `α`.
pub fn schulman_weight(alpha: f64, gamma_s: f64) -> Result<f64> {
    if !(gamma_s > 0.0 && gamma_s.is_finite()) {
        return Err(Error::domain("schulman width (must be > 0)", gamma_s));
    }
    if !alpha.is_finite() {
        return Err(Error::domain("rotation angle", alpha));
    }
    Ok(1.0 / (alpha * alpha + gamma_s * gamma_s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioMethod {
    ClosedForm,
    /// Symmetric partial sums over windings `n = -N..=N`.
    Truncated(u64),
}

/// `p(θ)/p(π+θ)`: the relative probability of rotating by `θ` versus `π+θ`
/// once all windings `2πn` are summed.
pub fn schulman_ratio(theta: f64, gamma_s: f64, method: RatioMethod) -> Result<f64> {
    if !(gamma_s > 0.0 && gamma_s.is_finite()) {
        return Err(Error::domain("schulman width (must be > 0)", gamma_s));
    }
    if !theta.is_finite() {
        return Err(Error::domain("rotation angle", theta));
    }
    match method {
        RatioMethod::ClosedForm => {
            let t = tanh_sq_half(gamma_s);
            let (c, s) = half_angle_sq(theta);
            Ok((c + s * t) / (s + c * t))
        }
        RatioMethod::Truncated(0) => Err(Error::InvalidParameter(
            "truncation N must be at least 1".into(),
        )),
        RatioMethod::Truncated(n) => {
            Ok(winding_sum(theta, gamma_s, n) / winding_sum(PI + theta, gamma_s, n))
        }
    }
}

/// `(P(same), P(flip))` for a spin measured at angle `θ` from its hidden
/// direction; `γ_s = 0` gives the Born values `(cos²(θ/2), sin²(θ/2))`.
pub fn schulman_single_probs(theta: f64, gamma_s: f64) -> Result<(f64, f64)> {
    SchulmanKernel::new(gamma_s, None)?.probs(theta)
}

/// `Σ_{n=-N..N} w(2πn + x)`, smallest terms first.
fn winding_sum(x: f64, gamma_s: f64, n: u64) -> f64 {
    let g2 = gamma_s * gamma_s;
    let w = |a: f64| 1.0 / (a * a + g2);
    let mut sum = 0.0;
    let mut carry = 0.0;
    let mut add = |v: f64| {
        // Neumaier compensated summation
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    };
    for k in (1..=n).rev() {
        let shift = TAU * k as f64;
        add(w(x + shift));
        add(w(x - shift));
    }
    add(w(x));
    sum + carry
}

fn tanh_sq_half(gamma_s: f64) -> f64 {
    let t = (gamma_s / 2.0).tanh();
    t * t
}

fn half_angle_sq(theta: f64) -> (f64, f64) {
    let (s, c) = (theta / 2.0).sin_cos();
    (c * c, s * s)
}

/// The single-particle Schulman rule at a fixed width, as used by the
/// sequential and two-particle models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchulmanKernel {
    gamma_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncation: Option<u64>,
}

impl SchulmanKernel {
    pub fn new(gamma_s: f64, truncation: Option<u64>) -> Result<Self> {
        if !(gamma_s >= 0.0 && gamma_s.is_finite()) {
            return Err(Error::domain("schulman width (must be >= 0)", gamma_s));
        }
        if truncation == Some(0) {
            return Err(Error::InvalidParameter(
                "truncation N must be at least 1".into(),
            ));
        }
        Ok(Self { gamma_s, truncation })
    }

    pub fn ideal() -> Self {
        Self {
            gamma_s: 0.0,
            truncation: None,
        }
    }

    pub fn gamma_s(&self) -> f64 {
        self.gamma_s
    }

    pub fn truncation(&self) -> Option<u64> {
        self.truncation
    }

    pub fn method(&self) -> RatioMethod {
        match self.truncation {
            Some(n) => RatioMethod::Truncated(n),
            None => RatioMethod::ClosedForm,
        }
    }

    /// `(P(same), P(flip))` at angle `θ ∈ [0, π]`.
    pub fn probs(&self, theta: f64) -> Result<(f64, f64)> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::domain("angle (must lie in [0, pi])", theta));
        }
        let (c, s) = half_angle_sq(theta);
        if self.gamma_s == 0.0 {
            return Ok((c, s));
        }
        match self.method() {
            // r/(1+r) with r the closed-form ratio; the denominator
            // simplifies to 1 + tanh²(γ/2) because cos² + sin² = 1.
            RatioMethod::ClosedForm => {
                let t = tanh_sq_half(self.gamma_s);
                Ok(((c + s * t) / (1.0 + t), (s + c * t) / (1.0 + t)))
            }
            method @ RatioMethod::Truncated(_) => {
                let r = schulman_ratio(theta, self.gamma_s, method)?;
                Ok((r / (1.0 + r), 1.0 / (1.0 + r)))
            }
        }
    }

    pub fn p_same(&self, theta: f64) -> Result<f64> {
        Ok(self.probs(theta)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weight_examples() {
        assert_eq!(schulman_weight(0.0, 1.0).unwrap(), 1.0);
        assert!((schulman_weight(2.0, 1.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(schulman_weight(1.0, 0.0).is_err());
        assert!(schulman_weight(1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn weight_even_and_decreasing(a in 0.0f64..10.0, b in 0.0f64..10.0, g in 0.01f64..2.0) {
            prop_assert_eq!(schulman_weight(a, g).unwrap(), schulman_weight(-a, g).unwrap());
            if a < b {
                prop_assert!(schulman_weight(a, g).unwrap() > schulman_weight(b, g).unwrap());
            }
        }
    }

    #[test]
    fn ratio_at_quarter_turn_is_one() {
        for g in [0.01, 0.1, 1.0, 3.0] {
            let r = schulman_ratio(PI / 2.0, g, RatioMethod::ClosedForm).unwrap();
            assert!((r - 1.0).abs() < 1e-15);
            // Partial sums differ only by boundary terms of order 1/(2πN)².
            let r = schulman_ratio(PI / 2.0, g, RatioMethod::Truncated(1000)).unwrap();
            assert!((r - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn ratio_at_half_turn_is_tanh_squared() {
        for g in [0.01, 0.1, 1.0] {
            let r = schulman_ratio(PI, g, RatioMethod::ClosedForm).unwrap();
            let t = (g / 2.0).tanh().powi(2);
            assert!((r / t - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ratio_domain_errors() {
        assert!(schulman_ratio(1.0, 0.0, RatioMethod::ClosedForm).is_err());
        assert!(schulman_ratio(1.0, 0.1, RatioMethod::Truncated(0)).is_err());
        assert!(SchulmanKernel::new(-0.1, None).is_err());
        assert!(SchulmanKernel::new(0.1, Some(0)).is_err());
    }

    /// Tail of `Σ_n w(2πn + x)` beyond `|n| = N`, to leading order in 1/N.
    fn tail_estimate(n: u64) -> f64 {
        1.0 / (2.0 * PI * PI * n as f64)
    }

    #[test]
    fn truncated_error_follows_tail_law() {
        // The partial sums miss ~1/(2π²N) in numerator and denominator alike;
        // the relative error of the ratio is predicted from that alone.
        let n = 100_000;
        for g in [0.01, 0.1, 1.0] {
            for k in 0..25 {
                let theta = PI * k as f64 / 24.0;
                let exact = schulman_ratio(theta, g, RatioMethod::ClosedForm).unwrap();
                let trunc = schulman_ratio(theta, g, RatioMethod::Truncated(n)).unwrap();
                let measured = trunc / exact - 1.0;
                let num = winding_sum(theta, g, n) + tail_estimate(n);
                let den = winding_sum(PI + theta, g, n) + tail_estimate(n);
                let predicted = (tail_estimate(n) / den) - (tail_estimate(n) / num);
                assert!(
                    (measured - predicted).abs() <= 0.02 * predicted.abs() + 1e-12,
                    "g={g} theta={theta}: measured {measured:e}, predicted {predicted:e}"
                );
            }
        }
    }

    #[test]
    fn truncated_matches_closed_form_at_third_turn() {
        // Stated target; the 1/(2π²N) tail puts the N = 1e5 error at ≈1.01e-6.
        let exact = schulman_ratio(PI / 3.0, 0.1, RatioMethod::ClosedForm).unwrap();
        let trunc = schulman_ratio(PI / 3.0, 0.1, RatioMethod::Truncated(100_000)).unwrap();
        let rel = (trunc / exact - 1.0).abs();
        assert!(rel < 1e-6, "relative error {rel:e}");
    }

    #[test]
    fn truncated_converges_to_closed_form() {
        let n = 300_000;
        let mut worst: f64 = 0.0;
        for g in [0.01, 0.1, 1.0] {
            for k in 0..25 {
                let theta = PI * k as f64 / 24.0;
                let exact = schulman_ratio(theta, g, RatioMethod::ClosedForm).unwrap();
                let trunc = schulman_ratio(theta, g, RatioMethod::Truncated(n)).unwrap();
                worst = worst.max((trunc / exact - 1.0).abs());
            }
        }
        assert!(worst < 1e-6, "worst relative error {worst:e}");
    }

    #[test]
    fn single_probs_examples() {
        assert_eq!(schulman_single_probs(0.0, 0.0).unwrap(), (1.0, 0.0));
        for g in [0.0, 0.1, 2.0] {
            let (a, b) = schulman_single_probs(PI / 2.0, g).unwrap();
            assert!((a - 0.5).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
        }
        let (a, b) = schulman_single_probs(PI / 3.0, 0.0).unwrap();
        assert!((a - 0.75).abs() < 1e-15 && (b - 0.25).abs() < 1e-15);
        assert!(schulman_single_probs(-0.1, 0.1).is_err());
        assert!(schulman_single_probs(PI + 0.1, 0.1).is_err());
    }

    #[test]
    fn single_probs_match_normalised_ratio() {
        for g in [0.01, 0.1, 1.0] {
            for k in 0..=24 {
                let theta = PI * k as f64 / 24.0;
                let r = schulman_ratio(theta, g, RatioMethod::ClosedForm).unwrap();
                let (same, flip) = schulman_single_probs(theta, g).unwrap();
                assert!((same - r / (1.0 + r)).abs() < 1e-14);
                assert!((flip - 1.0 / (1.0 + r)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn aligned_flip_probability() {
        // At θ = 0 the flip probability is (cosh γ − 1)/(2 cosh γ).
        for g in [0.05f64, 0.5, 2.0] {
            let (_, flip) = schulman_single_probs(0.0, g).unwrap();
            let expected = (g.cosh() - 1.0) / (2.0 * g.cosh());
            assert!((flip - expected).abs() < 1e-15);
        }
    }
}
