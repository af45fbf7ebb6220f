//! Problem instances: the joint distribution `p(X, Y)`, its marginals and posteriors,
//! the discretized binary-input Gaussian channel, and the information measures used
//! in reports.

use std::f64::consts::SQRT_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};

/// Entries above `-NEGATIVE_SLACK` are treated as rounding noise and clamped to zero.
const NEGATIVE_SLACK: f64 = 1e-15;
/// Accepted deviation of the total mass from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Validated `N x M` joint probability matrix; rows are hidden inputs `X_i`, columns
/// are observations `Y_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    // row-major, n_inputs * n_observations
    data: Vec<f64>,
    n_inputs: usize,
    n_observations: usize,
}

/// Marginal distribution `q_j = p(Y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationWeights(Vec<f64>);

impl ObservationWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ObservationWeights {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

/// Validates a rectangular probability matrix. The matrix is never renormalized;
/// a total mass off by more than [`NORMALIZATION_TOLERANCE`] is an error.
pub fn validate_joint(rows: &[Vec<f64>]) -> Result<JointDistribution> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut data = Vec::with_capacity(n * m);
    for (row, values) in rows.iter().enumerate() {
        if values.len() != m {
            return Err(Error::RaggedMatrix {
                row,
                len: values.len(),
                expected: m,
            });
        }
        for (col, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteEntry { row, col });
            }
            if value < -NEGATIVE_SLACK {
                return Err(Error::NegativeEntry { row, col, value });
            }
            data.push(value.max(0.0));
        }
    }
    let sum: f64 = data.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::NotNormalized { sum });
    }
    Ok(JointDistribution {
        data,
        n_inputs: n,
        n_observations: m,
    })
}

impl JointDistribution {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        validate_joint(rows)
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_observations(&self) -> usize {
        self.n_observations
    }

    /// `p(X_i, Y_j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_observations + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_observations;
        &self.data[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_inputs).map(|i| self.row(i).to_vec()).collect()
    }

    /// Joint vector `p(X, Y_j)` of one observation.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_inputs).map(|i| self.get(i, j)).collect()
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        (0..self.n_inputs).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn marginal_y(&self) -> ObservationWeights {
        marginal_y(self)
    }

    pub fn posterior(&self, j: usize) -> Result<Vec<f64>> {
        posterior(self, j)
    }

    /// Reorders the observations: column `j` of the result is column `order[j]` of `self`.
    pub fn permute_columns(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n_observations {
            return Err(Error::param(
                "order",
                format!("expected {} indices, got {}", self.n_observations, order.len()),
            ));
        }
        let mut seen = vec![false; self.n_observations];
        for &j in order {
            if j >= self.n_observations || std::mem::replace(&mut seen[j], true) {
                return Err(Error::param("order", "not a permutation"));
            }
        }
        let data = (0..self.n_inputs)
            .flat_map(|i| order.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Ok(JointDistribution {
            data,
            n_inputs: self.n_inputs,
            n_observations: self.n_observations,
        })
    }
}

pub fn marginal_y(jd: &JointDistribution) -> ObservationWeights {
    ObservationWeights(
        (0..jd.n_observations)
            .map(|j| (0..jd.n_inputs).map(|i| jd.get(i, j)).sum())
            .collect(),
    )
}

/// Conditional distribution `p(X | Y_j)`.
pub fn posterior(jd: &JointDistribution, j: usize) -> Result<Vec<f64>> {
    let column = jd.column(j);
    let q: f64 = column.iter().sum();
    if q <= 0.0 {
        return Err(Error::ZeroWeightObservation(j));
    }
    Ok(column.into_iter().map(|p| p / q).collect())
}

/// Binary-input additive Gaussian channel discretized on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub prior: [f64; 2],
    pub means: [f64; 2],
    pub sigma: f64,
    pub range: (f64, f64),
    pub bins: usize,
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = self.prior.iter().chain(&self.means).all(|x| x.is_finite())
            && self.sigma.is_finite()
            && self.range.0.is_finite()
            && self.range.1.is_finite();
        if !finite {
            return Err(Error::param("channel", "all parameters must be finite"));
        }
        if self.prior.iter().any(|&p| p < 0.0)
            || (self.prior[0] + self.prior[1] - 1.0).abs() > NORMALIZATION_TOLERANCE
        {
            return Err(Error::param(
                "prior",
                format!("{:?} is not a probability vector", self.prior),
            ));
        }
        if self.sigma <= 0.0 {
            return Err(Error::param("sigma", "must be positive"));
        }
        if self.range.0 >= self.range.1 {
            return Err(Error::param("range", "lower bound must be below upper bound"));
        }
        if self.bins < 2 {
            return Err(Error::param("bins", "need at least 2 bins"));
        }
        Ok(())
    }

    pub fn bin_width(&self) -> f64 {
        (self.range.1 - self.range.0) / self.bins as f64
    }

    /// Edge `e` for `e` in `0..=bins`; `edge(0) = lo`, `edge(bins) = hi`.
    pub fn edge(&self, e: usize) -> f64 {
        if e == self.bins {
            self.range.1
        } else {
            self.range.0 + e as f64 * self.bin_width()
        }
    }
}

/// `Phi(x)`, accurate in the lower tail.
fn normal_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        0.0
    } else if x == f64::INFINITY {
        1.0
    } else {
        0.5 * erfc(-x / SQRT_2)
    }
}

/// `1 - Phi(x)`, accurate in the upper tail.
fn normal_sf(x: f64) -> f64 {
    normal_cdf(-x)
}

/// Standard normal mass of `[a, b]`, evaluated on whichever side of zero keeps the
/// difference free of cancellation.
fn normal_mass(a: f64, b: f64) -> f64 {
    if b <= 0.0 {
        normal_cdf(b) - normal_cdf(a)
    } else if a >= 0.0 {
        normal_sf(a) - normal_sf(b)
    } else {
        1.0 - normal_cdf(a) - normal_sf(b)
    }
}

/// Builds `p(X_i, Y_j) = prior_i * P(Y in bin j | X_i)` for `Y = mean_i + sigma * noise`.
/// Mass below `lo` is lumped into the first bin and above `hi` into the last one.
pub fn awgn_binary_channel(spec: &ChannelSpec) -> Result<JointDistribution> {
    spec.validate()?;
    let rows: Vec<Vec<f64>> = (0..2)
        .map(|i| {
            let z = |e: usize| match e {
                0 => f64::NEG_INFINITY,
                e if e == spec.bins => f64::INFINITY,
                e => (spec.edge(e) - spec.means[i]) / spec.sigma,
            };
            (0..spec.bins)
                .map(|j| spec.prior[i] * normal_mass(z(j), z(j + 1)))
                .collect()
        })
        .collect();
    validate_joint(&rows)
}

/// `sum_k -p_k log2 p_k` with `0 log 0 = 0`.
pub fn entropy_bits(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum::<f64>()
        .max(0.0)
}

/// `I(X; Z)` in bits from the K cluster joint vectors `p(X, Z_l)`.
pub fn mutual_information_xz<V: AsRef<[f64]>>(cluster_joints: &[V]) -> f64 {
    let n = cluster_joints.first().map_or(0, |c| c.as_ref().len());
    let mut px = vec![0.0; n];
    for cluster in cluster_joints {
        for (acc, &p) in px.iter_mut().zip(cluster.as_ref()) {
            *acc += p;
        }
    }
    let mut info = 0.0;
    for cluster in cluster_joints {
        let cluster = cluster.as_ref();
        let v: f64 = cluster.iter().sum();
        for (&p, &marg) in cluster.iter().zip(&px) {
            if p > 0.0 {
                info += p * (p / (marg * v)).log2();
            }
        }
    }
    info.max(0.0)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JointFile {
    Object { matrix: Vec<Vec<f64>> },
    Rows(Vec<Vec<f64>>),
}

#[derive(Serialize)]
struct JointFileRef<'a> {
    matrix: &'a [Vec<f64>],
}

/// Parses `{"matrix": [[...], ...]}` or a bare array of rows (rows are X values).
pub fn parse_joint_json(text: &str) -> Result<JointDistribution> {
    let file: JointFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let (JointFile::Object { matrix } | JointFile::Rows(matrix)) = file;
    validate_joint(&matrix)
}

/// Parses a header-less CSV with one row per X value.
pub fn parse_joint_csv(text: &str) -> Result<JointDistribution> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("`{field}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    validate_joint(&rows)
}

/// Parses either format; JSON is recognized by a leading `{`.
pub fn parse_joint(text: &str) -> Result<JointDistribution> {
    if text.trim_start().starts_with(['{', '[']) {
        parse_joint_json(text)
    } else {
        parse_joint_csv(text)
    }
}

pub fn load_joint(path: &Path) -> std::io::Result<Result<JointDistribution>> {
    std::fs::read_to_string(path).map(|text| parse_joint(&text))
}

pub fn joint_to_json(jd: &JointDistribution) -> String {
    let rows = jd.rows();
    serde_json::to_string(&JointFileRef { matrix: &rows }).expect("finite floats serialize")
}
