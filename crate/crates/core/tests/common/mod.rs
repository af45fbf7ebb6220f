#![allow(dead_code)]

use mipart::distributions::validate_joint;
use mipart::{ConstraintSpec, ImpurityLoss, JointDistribution, ObjectiveSpec};
use rand::Rng;

pub const BETAS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 6.0];

/// Strictly positive N x M joint distribution.
pub fn random_joint(rng: &mut impl Rng, n: usize, m: usize) -> JointDistribution {
    let raw: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.gen_range(0.01..1.0)).collect())
        .collect();
    normalized(raw)
}

/// Joint distribution with some exact zeros, every column keeping positive mass.
pub fn random_sparse_joint(rng: &mut impl Rng, n: usize, m: usize) -> JointDistribution {
    let mut raw: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.01..1.0) })
                .collect()
        })
        .collect();
    for j in 0..m {
        if raw.iter().all(|row| row[j] == 0.0) {
            let i = rng.gen_range(0..n);
            raw[i][j] = rng.gen_range(0.01..1.0);
        }
    }
    normalized(raw)
}

fn normalized(mut raw: Vec<Vec<f64>>) -> JointDistribution {
    let total: f64 = raw.iter().flatten().sum();
    raw.iter_mut().flatten().for_each(|x| *x /= total);
    validate_joint(&raw).expect("normalized matrix")
}

pub fn random_loss(rng: &mut impl Rng) -> ImpurityLoss {
    if rng.gen_bool(0.5) {
        ImpurityLoss::Entropy
    } else {
        ImpurityLoss::Gini
    }
}

pub fn random_constraint(rng: &mut impl Rng, k: usize) -> ConstraintSpec {
    if rng.gen_bool(0.5) {
        ConstraintSpec::Entropy
    } else {
        ConstraintSpec::Linear((0..k).map(|_| rng.gen_range(0.0..1.0)).collect())
    }
}

pub fn random_objective(rng: &mut impl Rng, k: usize) -> ObjectiveSpec {
    let beta = BETAS[rng.gen_range(0..BETAS.len())];
    ObjectiveSpec::new(random_loss(rng), random_constraint(rng, k), beta).unwrap()
}

/// Random non-negative vector with at least one positive entry.
pub fn random_masses(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.0..scale) })
            .collect();
        if p.iter().any(|&x| x > 0.0) {
            return p;
        }
    }
}
