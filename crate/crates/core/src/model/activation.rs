use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Elementwise activation. Every variant is monotone non-decreasing with
/// `phi(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Limit of `phi(v)/v` as `v -> 0+`.
    pub fn right_slope_at_zero(self) -> f64 {
        1.0
    }

    /// Limit of `phi(v)/v` as `v -> 0-`.
    pub fn left_slope_at_zero(self) -> f64 {
        match self {
            Activation::Relu => 0.0,
            Activation::Tanh | Activation::Identity => 1.0,
        }
    }

    /// Chord slope `phi(v)/v` for `v > 0`, or its right limit at 0.
    pub fn chord_slope_right(self, v: f64) -> f64 {
        debug_assert!(v >= 0.0);
        if v == 0.0 {
            self.right_slope_at_zero()
        } else {
            self.eval(v) / v
        }
    }

    /// Chord slope `phi(v)/v` for `v < 0`, or its left limit at 0.
    pub fn chord_slope_left(self, v: f64) -> f64 {
        debug_assert!(v <= 0.0);
        if v == 0.0 {
            self.left_slope_at_zero()
        } else {
            self.eval(v) / v
        }
    }

    /// Derivative at the origin, used for the network Jacobian at 0.
    /// For relu this is the right derivative.
    pub fn derivative_at_zero(self) -> f64 {
        self.right_slope_at_zero()
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(ModelError::UnsupportedActivation(other.to_string())),
        }
    }
}
