//! Global optima for small instances and structural checks of solver output.

use crate::distributions::JointDistribution;
use crate::error::{Error, Result};
use crate::impurity::impurity_of;
use crate::solver::{
    score, unit_distance, ClusterStats, ObjectiveSpec, PartitionAssignment, Prepared,
};

/// Upper bound on `K^M` accepted by [`brute_force`].
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;
/// Largest K for the label-aware contiguous DP (bitmask over used labels).
pub const MAX_ASYMMETRIC_K: usize = 8;
/// Slack of the halfspace test in [`check_separability`].
pub const SEPARABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub assignment: PartitionAssignment,
    pub objective: f64,
    /// Number of candidate partitions scored (brute force) or segments scored (DP).
    pub evaluated: u64,
}

fn check_k(jd: &JointDistribution, k: usize) -> Result<()> {
    let m = jd.n_observations();
    if k < 1 || k > m {
        return Err(Error::InvalidK { k, m });
    }
    Ok(())
}

/// Exhaustive search over hard assignments.
///
/// With a label-symmetric constraint only canonical labelings are visited (clusters
/// numbered in order of first appearance); with distinct linear costs every one of the
/// `K^M` labelings is scored.
pub fn brute_force(jd: &JointDistribution, k: usize, obj: &ObjectiveSpec) -> Result<OracleResult> {
    check_k(jd, k)?;
    obj.validate()?;
    obj.constraint.validate_for(k)?;
    let m = jd.n_observations();
    let space = (k as u64).checked_pow(m as u32).filter(|&s| s <= BRUTE_FORCE_LIMIT);
    if space.is_none() {
        return Err(Error::TooLarge(format!(
            "K^M = {k}^{m} exceeds {BRUTE_FORCE_LIMIT}"
        )));
    }
    let canonical = obj.constraint.is_label_symmetric();

    let mut labels = vec![0usize; m];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut evaluated = 0u64;
    loop {
        let candidate = PartitionAssignment::new(labels.clone(), k)?;
        let value = score(jd, &candidate, obj).value;
        evaluated += 1;
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, labels.clone()));
        }
        if !advance(&mut labels, k, canonical) {
            break;
        }
    }
    let (objective, labels) = best.expect("at least one candidate");
    Ok(OracleResult {
        assignment: PartitionAssignment::new(labels, k)?,
        objective,
        evaluated,
    })
}

/// Next labeling in lexicographic order; in canonical mode each label may exceed the
/// running maximum of its prefix by at most one.
fn advance(labels: &mut [usize], k: usize, canonical: bool) -> bool {
    for pos in (0..labels.len()).rev() {
        let cap = if canonical {
            let prefix_max = labels[..pos].iter().copied().max().map_or(0, |x| x + 1);
            prefix_max.min(k - 1)
        } else {
            k - 1
        };
        if labels[pos] < cap {
            labels[pos] += 1;
            labels[pos + 1..].iter_mut().for_each(|l| *l = 0);
            return true;
        }
    }
    false
}

/// Global optimum for two hidden inputs.
///
/// Observations are sorted by `p(X_1 | Y_j)` (ties by index) and split into at most K
/// contiguous segments by dynamic programming over segment boundaries, each segment
/// contributing `beta * F(segment) + g(segment weight)`.
pub fn contiguous_dp(jd: &JointDistribution, k: usize, obj: &ObjectiveSpec) -> Result<OracleResult> {
    if jd.n_inputs() != 2 {
        return Err(Error::WrongDimension(jd.n_inputs()));
    }
    check_k(jd, k)?;
    obj.validate()?;
    obj.constraint.validate_for(k)?;
    let prep = Prepared::new(jd)?;
    let m = jd.n_observations();

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        prep.posteriors[a][0]
            .total_cmp(&prep.posteriors[b][0])
            .then(a.cmp(&b))
    });

    // segment[a][b]: joint of sorted items a..b (exclusive end), accumulated left to right
    let mut seg_impurity = vec![vec![0.0; m + 1]; m + 1];
    let mut seg_weight = vec![vec![0.0; m + 1]; m + 1];
    for a in 0..m {
        let mut joint = [0.0, 0.0];
        for b in a + 1..=m {
            let j = order[b - 1];
            joint[0] += jd.get(0, j);
            joint[1] += jd.get(1, j);
            let v = joint[0] + joint[1];
            seg_impurity[a][b] = impurity_of(&joint, v, obj.loss);
            seg_weight[a][b] = v;
        }
    }
    let segment_cost =
        |a: usize, b: usize, l: usize| obj.beta * seg_impurity[a][b] + obj.constraint.term(l, seg_weight[a][b]);

    let (segments, evaluated) = if obj.constraint.is_label_symmetric() {
        symmetric_segments(m, k, |a, b| segment_cost(a, b, 0))
    } else {
        if k > MAX_ASYMMETRIC_K {
            return Err(Error::TooLarge(format!(
                "label-aware contiguous search supports K <= {MAX_ASYMMETRIC_K}, got {k}"
            )));
        }
        labelled_segments(m, k, segment_cost)
    };

    let mut labels = vec![0usize; m];
    for (a, b, l) in segments {
        for &j in &order[a..b] {
            labels[j] = l;
        }
    }
    let assignment = PartitionAssignment::new(labels, k)?;
    let objective = score(jd, &assignment, obj).value;
    Ok(OracleResult {
        assignment,
        objective,
        evaluated,
    })
}

type Segments = Vec<(usize, usize, usize)>;

/// Optimal split into at most `k` segments when every label costs the same.
fn symmetric_segments(m: usize, k: usize, cost: impl Fn(usize, usize) -> f64) -> (Segments, u64) {
    // best[s][b]: first b sorted items in exactly s segments
    let mut best = vec![vec![f64::INFINITY; m + 1]; k + 1];
    let mut cut = vec![vec![0usize; m + 1]; k + 1];
    best[0][0] = 0.0;
    let mut evaluated = 0;
    for s in 1..=k {
        for b in s..=m {
            for a in s - 1..b {
                if best[s - 1][a].is_infinite() {
                    continue;
                }
                evaluated += 1;
                let value = best[s - 1][a] + cost(a, b);
                if value < best[s][b] {
                    best[s][b] = value;
                    cut[s][b] = a;
                }
            }
        }
    }
    let mut s = (1..=k)
        .min_by(|&x, &y| best[x][m].total_cmp(&best[y][m]).then(x.cmp(&y)))
        .expect("k >= 1");
    let mut segments = Vec::with_capacity(s);
    let mut b = m;
    while s > 0 {
        let a = cut[s][b];
        segments.push((a, b, s - 1));
        b = a;
        s -= 1;
    }
    (segments, evaluated)
}

/// Optimal split into segments carrying distinct labels, each label priced separately.
fn labelled_segments(
    m: usize,
    k: usize,
    cost: impl Fn(usize, usize, usize) -> f64,
) -> (Segments, u64) {
    let masks = 1usize << k;
    // best[b][mask]: first b sorted items covered by segments using exactly the labels in mask
    let mut best = vec![vec![f64::INFINITY; masks]; m + 1];
    let mut back = vec![vec![(0usize, 0usize); masks]; m + 1];
    best[0][0] = 0.0;
    let mut evaluated = 0;
    for b in 1..=m {
        for mask in 1..masks {
            for l in (0..k).filter(|l| mask & (1 << l) != 0) {
                let prev = mask & !(1 << l);
                for a in 0..b {
                    if best[a][prev].is_infinite() {
                        continue;
                    }
                    evaluated += 1;
                    let value = best[a][prev] + cost(a, b, l);
                    if value < best[b][mask] {
                        best[b][mask] = value;
                        back[b][mask] = (a, l);
                    }
                }
            }
        }
    }
    let mut mask = (1..masks)
        .min_by(|&x, &y| best[m][x].total_cmp(&best[m][y]).then(x.cmp(&y)))
        .expect("k >= 1");
    let mut segments = Vec::new();
    let mut b = m;
    while b > 0 {
        let (a, l) = back[b][mask];
        segments.push((a, b, l));
        mask &= !(1 << l);
        b = a;
    }
    (segments, evaluated)
}

/// True when every observation lies on its own cluster's side of each pairwise
/// hyperplane `beta * sum_x p(x|Y_i) (c_l[x] - c_s[x]) + d_l - d_s <= 0`.
pub fn check_separability(
    jd: &JointDistribution,
    stats: &ClusterStats,
    assignment: &PartitionAssignment,
    obj: &ObjectiveSpec,
) -> bool {
    let Ok(prep) = Prepared::new(jd) else {
        return false;
    };
    let k = stats.k();
    prep.posteriors.iter().enumerate().all(|(i, post)| {
        let l = assignment.label(i);
        let own = unit_distance(post, stats, l, obj);
        (0..k).filter(|&s| s != l).all(|s| {
            let other = unit_distance(post, stats, s, obj);
            if own == other {
                return true;
            }
            own - other <= SEPARABILITY_TOLERANCE
        })
    })
}
