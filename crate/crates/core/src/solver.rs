//! Gradient-distance assignment iteration.
//!
//! Each iteration freezes the per-cluster statistics (joint vectors, impurity
//! gradients `c_l`, constraint derivatives `d_l`) and moves every observation to the
//! cluster with the smallest distance
//!
//! ```text
//! D(Y_i, Z_l) = q_i * (beta * sum_x p(x | Y_i) c_l[x] + d_l)
//! ```
//!
//! which is the first-order rate of change of `beta * F + C` when the mass of `Y_i`
//! moves into `Z_l`. Both terms of the objective are concave in the (soft) assignment,
//! so the linearization upper-bounds every batch move and the objective never
//! increases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{constraint_value, ConstraintSpec};
use crate::distributions::{entropy_bits, mutual_information_xz, JointDistribution};
use crate::error::{Error, Result};
use crate::impurity::{cluster_impurity, impurity_gradient, total_impurity, ClusterJoint, ImpurityLoss};

pub const DEFAULT_MAX_ITER: usize = 500;
/// An iteration improving the objective by less than this ends the run.
pub const STALL_TOLERANCE: f64 = 1e-12;

/// Hard quantizer: `labels[j]` is the 0-based cluster of observation `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartitionAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl PartitionAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "need at least one cluster"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::param("labels", format!("label {bad} out of range for K = {k}")));
        }
        Ok(PartitionAssignment { labels, k })
    }

    /// From 1-based labels as written in reports.
    pub fn from_one_based(labels: &[usize], k: usize) -> Result<Self> {
        if labels.contains(&0) {
            return Err(Error::param("labels", "1-based labels start at 1"));
        }
        Self::new(labels.iter().map(|l| l - 1).collect(), k)
    }

    pub fn uniform_random(m: usize, k: usize, rng: &mut impl Rng) -> Self {
        PartitionAssignment {
            labels: (0..m).map(|_| rng.gen_range(0..k)).collect(),
            k,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, j: usize) -> usize {
        self.labels[j]
    }

    /// Number of clusters that received at least one observation.
    pub fn occupied(&self) -> usize {
        let mut seen = vec![false; self.k];
        self.labels.iter().for_each(|&l| seen[l] = true);
        seen.into_iter().filter(|&s| s).count()
    }
}

/// Loss, constraint and trade-off of the Lagrangian `beta * F + C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub loss: ImpurityLoss,
    pub constraint: ConstraintSpec,
    pub beta: f64,
}

impl ObjectiveSpec {
    pub fn new(loss: ImpurityLoss, constraint: ConstraintSpec, beta: f64) -> Result<Self> {
        let spec = ObjectiveSpec {
            loss,
            constraint,
            beta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::param(
                "beta",
                format!("must be a finite non-negative number, got {}", self.beta),
            ));
        }
        Ok(())
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.loss, self.constraint.clone(), beta)
    }
}

/// Frozen per-cluster state of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    pub joints: Vec<ClusterJoint>,
    pub weights: Vec<f64>,
    /// `None` for empty clusters.
    pub gradients: Vec<Option<Vec<f64>>>,
    pub cderivs: Vec<f64>,
}

/// Decomposition of the objective value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub impurity: f64,
    pub constraint: f64,
    pub value: f64,
}

impl ClusterStats {
    pub fn k(&self) -> usize {
        self.joints.len()
    }

    pub fn objective(&self, obj: &ObjectiveSpec) -> Objective {
        let impurity = total_impurity(&self.joints, obj.loss);
        let constraint = constraint_value(&self.weights, &obj.constraint);
        Objective {
            impurity,
            constraint,
            value: obj.beta * impurity + constraint,
        }
    }

    pub fn mutual_information_bits(&self) -> f64 {
        let joints: Vec<&[f64]> = self.joints.iter().map(ClusterJoint::masses).collect();
        mutual_information_xz(&joints)
    }

    pub fn output_entropy_bits(&self) -> f64 {
        entropy_bits(&self.weights)
    }
}

pub fn compute_stats(
    jd: &JointDistribution,
    a: &PartitionAssignment,
    obj: &ObjectiveSpec,
) -> ClusterStats {
    let n = jd.n_inputs();
    let mut joints = vec![ClusterJoint::zeros(n); a.k()];
    for j in 0..jd.n_observations() {
        joints[a.label(j)].add(&jd.column(j));
    }
    let weights: Vec<f64> = joints.iter().map(ClusterJoint::weight).collect();
    let gradients = joints
        .iter()
        .map(|cj| impurity_gradient(cj, obj.loss).ok())
        .collect();
    let cderivs = weights
        .iter()
        .enumerate()
        .map(|(l, &v)| obj.constraint.derivative(l, v))
        .collect();
    ClusterStats {
        joints,
        weights,
        gradients,
        cderivs,
    }
}

/// Objective of an arbitrary hard assignment.
pub fn score(jd: &JointDistribution, a: &PartitionAssignment, obj: &ObjectiveSpec) -> Objective {
    compute_stats(jd, a, obj).objective(obj)
}

/// Distance with the `q_i` factor dropped.
///
/// Conventions: `0 * inf = 0` inside the posterior sum; an empty cluster costs
/// `beta * f(p(X | Y_i)) + d_l`, the exact cost of seeding it with this observation
/// alone, or `+inf` when `d_l` is infinite.
pub(crate) fn unit_distance(post: &[f64], stats: &ClusterStats, l: usize, obj: &ObjectiveSpec) -> f64 {
    let d = stats.cderivs[l];
    let impurity_rate = match &stats.gradients[l] {
        _ if obj.beta == 0.0 => 0.0,
        Some(c) => {
            obj.beta
                * post
                    .iter()
                    .zip(c)
                    .filter(|(&p, _)| p > 0.0)
                    .map(|(&p, &c)| p * c)
                    .sum::<f64>()
        }
        None if d.is_infinite() => return f64::INFINITY,
        None => obj.beta * obj.loss.conditional(post),
    };
    impurity_rate + d
}

/// `D(Y_i, Z_l)`; zero for an observation without mass.
pub fn distance(
    jd: &JointDistribution,
    i: usize,
    stats: &ClusterStats,
    l: usize,
    obj: &ObjectiveSpec,
) -> f64 {
    match jd.posterior(i) {
        Ok(post) => {
            let q: f64 = jd.column(i).iter().sum();
            q * unit_distance(&post, stats, l, obj)
        }
        Err(_) => 0.0,
    }
}

/// Observation weights and posteriors, computed once per solve.
pub(crate) struct Prepared<'a> {
    pub jd: &'a JointDistribution,
    pub q: Vec<f64>,
    pub posteriors: Vec<Vec<f64>>,
}

impl<'a> Prepared<'a> {
    pub fn new(jd: &'a JointDistribution) -> Result<Self> {
        let q = jd.marginal_y().into_vec();
        let posteriors = (0..jd.n_observations())
            .map(|j| jd.posterior(j))
            .collect::<Result<_>>()?;
        Ok(Prepared { jd, q, posteriors })
    }
}

pub fn assign_step(
    jd: &JointDistribution,
    stats: &ClusterStats,
    obj: &ObjectiveSpec,
    current: &PartitionAssignment,
) -> Result<PartitionAssignment> {
    Ok(assign(&Prepared::new(jd)?, stats, obj, current))
}

/// One batch membership update.
///
/// Ties keep the current label, otherwise the smallest index wins. A cluster that is
/// empty in `stats` accepts at most one observation per step (the one gaining the
/// most); everyone else it attracts falls back to its best remaining cluster.
pub(crate) fn assign(
    prep: &Prepared<'_>,
    stats: &ClusterStats,
    obj: &ObjectiveSpec,
    current: &PartitionAssignment,
) -> PartitionAssignment {
    let k = stats.k();
    let unit: Vec<Vec<f64>> = prep
        .posteriors
        .iter()
        .map(|post| (0..k).map(|l| unit_distance(post, stats, l, obj)).collect())
        .collect();
    let empty: Vec<bool> = stats.joints.iter().map(ClusterJoint::is_empty).collect();
    let mut seeded_by: Vec<Option<usize>> = vec![None; k];

    let choose = |i: usize, seeded_by: &[Option<usize>]| {
        let row = &unit[i];
        let mut best = current.label(i);
        for l in 0..k {
            let allowed = !empty[l] || seeded_by[l].is_none_or(|s| s == i);
            if allowed && row[l] < row[best] {
                best = l;
            }
        }
        best
    };

    loop {
        let choice: Vec<usize> = (0..unit.len()).map(|i| choose(i, &seeded_by)).collect();
        let contested = (0..k).find(|&l| {
            empty[l] && seeded_by[l].is_none() && choice.contains(&l)
        });
        let Some(l) = contested else {
            return PartitionAssignment {
                labels: choice,
                k,
            };
        };
        let mut winner = None;
        let mut best_gain = f64::NEG_INFINITY;
        for (i, _) in choice.iter().enumerate().filter(|(_, &c)| c == l) {
            let gain = prep.q[i] * (unit[i][current.label(i)] - unit[i][l]);
            if gain > best_gain {
                best_gain = gain;
                winner = Some(i);
            }
        }
        seeded_by[l] = winner;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestartOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for RestartOptions {
    fn default() -> Self {
        RestartOptions {
            restarts: 20,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub assignment: PartitionAssignment,
    /// `beta * impurity + constraint`.
    pub objective: f64,
    pub impurity: f64,
    pub constraint: f64,
    pub mutual_info_bits: f64,
    pub output_entropy_bits: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restarts_used: usize,
    pub best_restart_index: usize,
    pub seed: u64,
    /// Objective after initialization and after every accepted iteration.
    pub history: Vec<f64>,
}

fn check_instance(jd: &JointDistribution, k: usize, obj: &ObjectiveSpec) -> Result<()> {
    let m = jd.n_observations();
    if k < 1 || k > m {
        return Err(Error::InvalidK { k, m });
    }
    obj.validate()?;
    obj.constraint.validate_for(k)
}

pub(crate) fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Runs the iteration from `init` until the assignment is a fixed point, the
/// objective stalls, or `max_iter` is hit.
pub(crate) fn iterate(
    prep: &Prepared<'_>,
    obj: &ObjectiveSpec,
    init: PartitionAssignment,
    max_iter: usize,
) -> (PartitionAssignment, ClusterStats, usize, bool, Vec<f64>) {
    let mut labels = init;
    let mut stats = compute_stats(prep.jd, &labels, obj);
    let mut value = stats.objective(obj).value;
    let mut history = vec![value];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let next = assign(prep, &stats, obj, &labels);
        if next == labels {
            converged = true;
            break;
        }
        let next_stats = compute_stats(prep.jd, &next, obj);
        let next_value = next_stats.objective(obj).value;
        labels = next;
        stats = next_stats;
        history.push(next_value);
        let improvement = value - next_value;
        value = next_value;
        if improvement < STALL_TOLERANCE {
            converged = true;
            break;
        }
    }
    (labels, stats, iterations, converged, history)
}

fn run_restart(
    prep: &Prepared<'_>,
    k: usize,
    obj: &ObjectiveSpec,
    max_iter: usize,
    seed: u64,
    restart: usize,
) -> SolveReport {
    let mut rng = restart_rng(seed, restart);
    let init = PartitionAssignment::uniform_random(prep.jd.n_observations(), k, &mut rng);
    let (assignment, stats, iterations, converged, history) = iterate(prep, obj, init, max_iter);
    let parts = stats.objective(obj);
    SolveReport {
        assignment,
        objective: parts.value,
        impurity: parts.impurity,
        constraint: parts.constraint,
        mutual_info_bits: stats.mutual_information_bits(),
        output_entropy_bits: stats.output_entropy_bits(),
        iterations,
        converged,
        restarts_used: 1,
        best_restart_index: restart,
        seed,
        history,
    }
}

/// Single run from a seeded uniform-random hard initialization.
pub fn solve(
    jd: &JointDistribution,
    k: usize,
    obj: &ObjectiveSpec,
    opts: SolveOptions,
) -> Result<SolveReport> {
    check_instance(jd, k, obj)?;
    let prep = Prepared::new(jd)?;
    Ok(run_restart(&prep, k, obj, opts.max_iter, opts.seed, 0))
}

/// Best of `restarts` independently seeded runs; restart `r` draws its initialization
/// from stream `r` of the seeded generator, so restart 0 reproduces [`solve`].
pub fn multi_restart_solve(
    jd: &JointDistribution,
    k: usize,
    obj: &ObjectiveSpec,
    opts: RestartOptions,
) -> Result<SolveReport> {
    check_instance(jd, k, obj)?;
    if opts.restarts == 0 {
        return Err(Error::param("restarts", "need at least one restart"));
    }
    let prep = Prepared::new(jd)?;
    let runs: Vec<SolveReport> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| run_restart(&prep, k, obj, opts.max_iter, opts.seed, r))
        .collect();
    // first minimum in restart order
    let mut best = runs
        .into_iter()
        .reduce(|best, run| if run.objective < best.objective { run } else { best })
        .expect("at least one restart");
    best.restarts_used = opts.restarts;
    Ok(best)
}

/// One multi-restart solve per beta, in input order.
pub fn beta_sweep(
    jd: &JointDistribution,
    k: usize,
    loss: ImpurityLoss,
    constraint: &ConstraintSpec,
    betas: &[f64],
    opts: RestartOptions,
) -> Result<Vec<SolveReport>> {
    if betas.is_empty() {
        return Err(Error::param("betas", "empty beta grid"));
    }
    let specs = betas
        .iter()
        .map(|&beta| ObjectiveSpec::new(loss, constraint.clone(), beta))
        .collect::<Result<Vec<_>>>()?;
    specs
        .iter()
        .map(|obj| multi_restart_solve(jd, k, obj, opts))
        .collect()
}

/// One row of the beta trade-off table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    #[serde(rename = "F")]
    pub impurity: f64,
    #[serde(rename = "C")]
    pub constraint: f64,
    #[serde(rename = "I_bits")]
    pub mutual_info_bits: f64,
    #[serde(rename = "HZ_bits")]
    pub output_entropy_bits: f64,
}

pub fn sweep_rows(betas: &[f64], reports: &[SolveReport]) -> Vec<SweepRow> {
    betas
        .iter()
        .zip(reports)
        .map(|(&beta, r)| SweepRow {
            beta,
            impurity: r.impurity,
            constraint: r.constraint,
            mutual_info_bits: r.mutual_info_bits,
            output_entropy_bits: r.output_entropy_bits,
        })
        .collect()
}

/// CSV with header `beta,F,C,I_bits,HZ_bits`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Index of the lowest-impurity `(impurity, constraint)` pair whose constraint value
/// stays within `budget`.
pub fn best_within_budget(
    reports: impl IntoIterator<Item = (f64, f64)>,
    budget: f64,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, (impurity, constraint)) in reports.into_iter().enumerate() {
        if constraint <= budget + STALL_TOLERANCE && best.is_none_or(|(_, f)| impurity < f) {
            best = Some((idx, impurity));
        }
    }
    best.map(|(idx, _)| idx)
}

/// Impurity of a single cluster holding the whole instance.
pub fn unpartitioned_impurity(jd: &JointDistribution, loss: ImpurityLoss) -> f64 {
    cluster_impurity(&ClusterJoint::from_nonnegative(jd.marginal_x()), loss)
}
