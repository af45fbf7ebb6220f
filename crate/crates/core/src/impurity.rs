//! Frequency-weighted concave impurities `F(p) = v * f(p / v)` of a cluster's joint
//! vector `p = p(X, Z_l)`, `v = sum(p)`, and their gradients.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImpurityLoss {
    /// Shannon entropy in bits; `F` sums to `H(X | Z)`.
    Entropy,
    /// Gini index `1 - sum a_i^2`.
    Gini,
}

impl ImpurityLoss {
    /// The loss `f` on a probability vector.
    pub fn conditional(self, dist: &[f64]) -> f64 {
        match self {
            ImpurityLoss::Entropy => crate::distributions::entropy_bits(dist),
            ImpurityLoss::Gini => 1.0 - dist.iter().map(|a| a * a).sum::<f64>(),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            ImpurityLoss::Entropy => "entropy",
            ImpurityLoss::Gini => "gini",
        }
    }
}

impl fmt::Display for ImpurityLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ImpurityLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "entropy" => Ok(ImpurityLoss::Entropy),
            "gini" => Ok(ImpurityLoss::Gini),
            other => Err(Error::param(
                "loss",
                format!("unknown loss `{other}` (expected entropy | gini)"),
            )),
        }
    }
}

/// Joint masses `p(X_i, Z_l)` of one cluster together with the cluster weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterJoint {
    p: Vec<f64>,
    weight: f64,
}

impl ClusterJoint {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::param(
                "cluster joint",
                format!("entries must be finite and non-negative, got {bad}"),
            ));
        }
        Ok(Self::from_nonnegative(p))
    }

    pub(crate) fn from_nonnegative(p: Vec<f64>) -> Self {
        let weight = p.iter().sum();
        ClusterJoint { p, weight }
    }

    pub fn zeros(n: usize) -> Self {
        ClusterJoint {
            p: vec![0.0; n],
            weight: 0.0,
        }
    }

    pub fn masses(&self) -> &[f64] {
        &self.p
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn is_empty(&self) -> bool {
        self.weight <= 0.0
    }

    pub(crate) fn add(&mut self, column: &[f64]) {
        for (acc, &x) in self.p.iter_mut().zip(column) {
            *acc += x;
        }
        self.weight = self.p.iter().sum();
    }
}

/// `F(p) = v f(p / v)`; zero for an empty cluster.
pub fn cluster_impurity(cj: &ClusterJoint, loss: ImpurityLoss) -> f64 {
    impurity_of(&cj.p, cj.weight, loss)
}

pub(crate) fn impurity_of(p: &[f64], v: f64, loss: ImpurityLoss) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    match loss {
        ImpurityLoss::Entropy => p
            .iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| x * (v / x).log2())
            .sum(),
        // sum_i p_i (v - p_i) / v: exactly zero at a point mass
        ImpurityLoss::Gini => p.iter().map(|&x| x * (v - x)).sum::<f64>() / v,
    }
}

/// `c_i = dF / dp_i`. For entropy a zero coordinate has an infinite derivative.
pub fn impurity_gradient(cj: &ClusterJoint, loss: ImpurityLoss) -> Result<Vec<f64>> {
    if cj.is_empty() {
        return Err(Error::EmptyCluster);
    }
    let v = cj.weight;
    Ok(match loss {
        ImpurityLoss::Entropy => cj
            .p
            .iter()
            .map(|&x| {
                if x > 0.0 {
                    (v / x).log2()
                } else {
                    f64::INFINITY
                }
            })
            .collect(),
        ImpurityLoss::Gini => {
            let sq = cj.p.iter().map(|x| x * x).sum::<f64>() / (v * v);
            cj.p.iter().map(|&x| 1.0 - 2.0 * x / v + sq).collect()
        }
    })
}

pub fn total_impurity(cjs: &[ClusterJoint], loss: ImpurityLoss) -> f64 {
    cjs.iter().map(|cj| cluster_impurity(cj, loss)).sum()
}
