//! Separable concave output constraints `C(p_Z) = sum_l g_l(v_l)`.

use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "costs", rename_all = "lowercase")]
pub enum ConstraintSpec {
    /// Output entropy `H(Z)` in bits.
    Entropy,
    /// Transmission cost `sum_l t_l v_l`, one coefficient per cluster.
    Linear(Vec<f64>),
}

impl ConstraintSpec {
    pub fn from_token(token: &str, costs: Option<Vec<f64>>) -> Result<Self> {
        match (token.to_ascii_lowercase().as_str(), costs) {
            ("entropy", None) => Ok(ConstraintSpec::Entropy),
            ("entropy", Some(_)) => Err(Error::param(
                "costs",
                "costs only apply to the linear constraint",
            )),
            ("linear", Some(costs)) => Ok(ConstraintSpec::Linear(costs)),
            ("linear", None) => Err(Error::param(
                "costs",
                "the linear constraint needs one cost per cluster",
            )),
            (other, _) => Err(Error::param(
                "constraint",
                format!("unknown constraint `{other}` (expected entropy | linear)"),
            )),
        }
    }

    pub fn token(&self) -> &'static str {
        match self {
            ConstraintSpec::Entropy => "entropy",
            ConstraintSpec::Linear(_) => "linear",
        }
    }

    /// Checks the spec against a cluster count.
    pub fn validate_for(&self, k: usize) -> Result<()> {
        if let ConstraintSpec::Linear(costs) = self {
            if costs.len() != k {
                return Err(Error::param(
                    "costs",
                    format!("expected {k} costs (one per cluster), got {}", costs.len()),
                ));
            }
            if costs.iter().any(|t| !t.is_finite()) {
                return Err(Error::param("costs", "costs must be finite"));
            }
        }
        Ok(())
    }

    /// True when relabeling clusters never changes the constraint value.
    pub fn is_label_symmetric(&self) -> bool {
        match self {
            ConstraintSpec::Entropy => true,
            ConstraintSpec::Linear(costs) => costs.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// `g_l(v)`.
    pub fn term(&self, l: usize, v: f64) -> f64 {
        match self {
            ConstraintSpec::Entropy => {
                if v > 0.0 {
                    -v * v.log2()
                } else {
                    0.0
                }
            }
            ConstraintSpec::Linear(costs) => costs[l] * v,
        }
    }

    /// `d_l = g_l'(v)`; `+inf` at `v = 0` for the entropy constraint.
    pub fn derivative(&self, l: usize, v: f64) -> f64 {
        match self {
            ConstraintSpec::Entropy => {
                if v > 0.0 {
                    -v.log2() - 1.0 / LN_2
                } else {
                    f64::INFINITY
                }
            }
            ConstraintSpec::Linear(costs) => costs[l],
        }
    }
}

impl fmt::Display for ConstraintSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintSpec::Entropy => f.write_str("entropy"),
            ConstraintSpec::Linear(costs) => write!(f, "linear{costs:?}"),
        }
    }
}

pub fn constraint_value(v: &[f64], spec: &ConstraintSpec) -> f64 {
    v.iter().enumerate().map(|(l, &x)| spec.term(l, x)).sum()
}

pub fn constraint_derivative(v_l: f64, l: usize, spec: &ConstraintSpec) -> f64 {
    spec.derivative(l, v_l)
}
