use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Scalar loss `phi(t; b)` applied to the margin `t = <a_i, x>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `1/2 (t - b)^2`
    Squared,
    /// `log(1 + exp(-b t))`, labels in `{-1, +1}`
    Logistic,
}

impl LossKind {
    /// Global upper bound on `phi''`.
    pub fn curvature_bound(self) -> f64 {
        match self {
            LossKind::Squared => 1.0,
            LossKind::Logistic => 0.25,
        }
    }

    pub fn value(self, t: f64, b: f64) -> f64 {
        match self {
            LossKind::Squared => 0.5 * (t - b) * (t - b),
            LossKind::Logistic => softplus(-b * t),
        }
    }

    pub fn derivative(self, t: f64, b: f64) -> f64 {
        match self {
            LossKind::Squared => t - b,
            LossKind::Logistic => -b * sigmoid(-b * t),
        }
    }

    pub fn second_derivative(self, t: f64, b: f64) -> f64 {
        match self {
            LossKind::Squared => 1.0,
            LossKind::Logistic => {
                let s = sigmoid(b * t);
                b * b * s * (1.0 - s)
            }
        }
    }

    pub fn valid_label(self, b: f64) -> bool {
        match self {
            LossKind::Squared => b.is_finite(),
            LossKind::Logistic => b == 1.0 || b == -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::Logistic => "logistic",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "squared" => Ok(LossKind::Squared),
            "logistic" => Ok(LossKind::Logistic),
            other => Err(format!("unknown loss '{other}' (expected squared or logistic)")),
        }
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_at_zero() {
        assert_eq!(LossKind::Logistic.derivative(0.0, 1.0), -0.5);
        assert!((LossKind::Logistic.value(0.0, 1.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(LossKind::Logistic.second_derivative(0.0, -1.0), 0.25);
    }

    #[test]
    fn logistic_is_stable_for_large_margins() {
        let l = LossKind::Logistic;
        assert_eq!(l.value(1e4, 1.0), 0.0);
        assert!((l.value(-1e4, 1.0) - 1e4).abs() < 1e-9);
        assert!((l.derivative(-1e4, 1.0) + 1.0).abs() < 1e-15);
        assert!(l.derivative(1e4, 1.0).abs() < 1e-300);
    }

    #[test]
    fn curvature_bound_dominates_second_derivative() {
        for kind in [LossKind::Squared, LossKind::Logistic] {
            for k in -400..=400 {
                let t = k as f64 * 0.05;
                for b in [-1.0, 1.0] {
                    assert!(kind.second_derivative(t, b) <= kind.curvature_bound());
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for kind in [LossKind::Squared, LossKind::Logistic] {
            for &t in &[-3.0, -0.4, 0.0, 0.7, 2.5] {
                let h = 1e-6;
                let fd = (kind.value(t + h, 1.0) - kind.value(t - h, 1.0)) / (2.0 * h);
                assert!((fd - kind.derivative(t, 1.0)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn parses_names() {
        assert_eq!("logistic".parse::<LossKind>().unwrap(), LossKind::Logistic);
        assert!("hinge".parse::<LossKind>().is_err());
    }
}
