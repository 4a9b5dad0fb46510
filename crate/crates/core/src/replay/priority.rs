//! Priority formulas for the five replay strategies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Replay prioritization strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Every stored transition is equally likely.
    Uniform,
    /// `(|delta| + eps)^alpha` on the temporal-difference error of the value estimate.
    Td,
    /// `beta^v`, decaying with the number of times a transition was trained on.
    Count,
    /// `(|L| + eps)^alpha` on the world-model loss.
    Adversarial,
    /// `c * beta^v + (|L| + eps)^alpha`.
    Curious,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Uniform,
        Strategy::Td,
        Strategy::Count,
        Strategy::Adversarial,
        Strategy::Curious,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::Td => "td",
            Strategy::Count => "count",
            Strategy::Adversarial => "adversarial",
            Strategy::Curious => "curious",
        }
    }

    /// Whether the priority depends on the world-model loss.
    pub fn uses_model_loss(self) -> bool {
        matches!(self, Strategy::Adversarial | Strategy::Curious | Strategy::Count)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "uniform" => Ok(Strategy::Uniform),
            "td" => Ok(Strategy::Td),
            "count" => Ok(Strategy::Count),
            "adversarial" => Ok(Strategy::Adversarial),
            "curious" | "cr" | "curious_replay" => Ok(Strategy::Curious),
            other => Err(invalid(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Hyperparameters of the priority computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorityParams<S> {
    pub strategy: Strategy,
    /// Scale of the count term in the combined priority.
    pub c: S,
    /// Decay of the count term per training visit.
    pub beta: S,
    /// Sharpness of the loss-based term.
    pub alpha: S,
    pub epsilon: S,
    /// Priority assigned to newly added transitions.
    pub p_max: S,
    /// Subtract the running minimum signal (over the whole run) before computing priorities.
    pub use_running_min: bool,
    /// Discount used for TD errors.
    pub gamma: S,
}

impl<S: Scalar> Default for PriorityParams<S> {
    fn default() -> Self {
        Self {
            strategy: Strategy::Curious,
            c: S::of(1e4),
            beta: S::of(0.7),
            alpha: S::of(0.7),
            epsilon: S::of(0.01),
            p_max: S::of(1e5),
            use_running_min: false,
            gamma: S::of(0.99),
        }
    }
}

impl<S: Scalar> PriorityParams<S> {
    pub fn with_strategy(strategy: Strategy) -> Self {
        Self { strategy, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: S| x >= S::zero() && x <= S::one();
        if !(self.c > S::zero() && self.c.is_finite()) {
            return Err(invalid("c must be positive"));
        }
        if !unit(self.beta) {
            return Err(invalid("beta must lie in [0, 1]"));
        }
        if !unit(self.alpha) {
            return Err(invalid("alpha must lie in [0, 1]"));
        }
        if !(self.epsilon > S::zero() && self.epsilon.is_finite()) {
            return Err(invalid("epsilon must be positive"));
        }
        if !(self.p_max > S::zero() && self.p_max.is_finite()) {
            return Err(invalid("p_max must be positive"));
        }
        if !(self.gamma > S::zero() && self.gamma < S::one()) {
            return Err(invalid("gamma must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Priority of a transition that has been trained on `visit_count` times and
/// whose latest loss (or TD error) is `signal`.
pub fn compute_priority<S: Scalar>(params: &PriorityParams<S>, visit_count: u64, signal: S) -> Result<S> {
    if signal.is_nan() {
        return Err(invalid("priority signal is NaN"));
    }
    let loss_term = || (signal.abs() + params.epsilon).powf(params.alpha);
    let count_term = || match i32::try_from(visit_count) {
        Ok(v) => params.beta.powi(v),
        Err(_) => params.beta.powf(S::of(visit_count as f64)),
    };
    Ok(match params.strategy {
        Strategy::Uniform => S::one(),
        Strategy::Count => count_term(),
        Strategy::Adversarial | Strategy::Td => loss_term(),
        Strategy::Curious => params.c * count_term() + loss_term(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs())
    }

    fn p(strategy: Strategy, v: u64, signal: f64) -> f64 {
        compute_priority(&PriorityParams::<f64>::with_strategy(strategy), v, signal).unwrap()
    }

    #[test]
    fn worked_examples() {
        assert!(rel_close(p(Strategy::Curious, 0, 0.99), 10001.0, 1e-12));
        // 1e4 * 0.7^3 + 10^(-1.4)
        let expected = 3430.0 + 10f64.powf(-1.4);
        assert!(rel_close(p(Strategy::Curious, 3, 0.0), expected, 1e-12));
        assert!((p(Strategy::Curious, 3, 0.0) - 3430.0398).abs() < 1e-4);
        assert_eq!(p(Strategy::Count, 0, 123.0), 1.0);
        assert_eq!(p(Strategy::Uniform, 17, -4.0), 1.0);
        assert!((p(Strategy::Td, 0, 0.0) - 0.039811).abs() < 1e-6);
    }

    #[test]
    fn sign_of_signal_is_ignored() {
        assert_eq!(p(Strategy::Td, 2, -0.5), p(Strategy::Td, 2, 0.5));
        assert_eq!(p(Strategy::Curious, 2, -0.5), p(Strategy::Curious, 2, 0.5));
    }

    #[test]
    fn nan_signal_rejected() {
        for s in Strategy::ALL {
            let params = PriorityParams::<f64>::with_strategy(s);
            assert!(compute_priority(&params, 0, f64::NAN).is_err());
        }
    }

    #[test]
    fn huge_visit_counts() {
        let v = u64::from(u32::MAX) + 10;
        assert_eq!(p(Strategy::Count, v, 0.0), 0.0);
        assert!(p(Strategy::Curious, v, 0.0) > 0.0);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("CR".parse::<Strategy>().unwrap(), Strategy::Curious);
        assert!("greedy".parse::<Strategy>().is_err());
    }

    #[test]
    fn default_params_validate() {
        PriorityParams::<f64>::default().validate().unwrap();
        let bad = PriorityParams::<f64> { beta: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_precision_matches() {
        let params = PriorityParams::<f32>::default();
        let got = compute_priority(&params, 1, 0.99f32).unwrap();
        assert!((got - 7001.0).abs() < 1e-2);
    }
}
