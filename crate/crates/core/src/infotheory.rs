//! Shannon and min-entropy quantities over trajectory measures.
//!
//! All logarithms are base 2. Every quantity is assembled from joint
//! entropies of prefix sets `(A^a, B^b)`, and the entropy of the empty set
//! is 0, so conditioning on an empty history gives back the plain entropy.

use std::collections::HashMap;

use serde::Serialize;

use crate::channel::{Row, Symbol, Trajectory, TrajectoryMeasure};
use crate::{Error, Result};

/// −Σ p log₂ p with 0 log 0 = 0.
pub fn shannon_entropy(dist: &[f64]) -> Result<f64> {
    let s: f64 = dist.iter().sum();
    if dist.iter().any(|&p| p < 0.0 || p.is_nan()) || (s - 1.0).abs() > 1e-9 {
        return Err(Error::NotADistribution(s));
    }
    Ok(plug_in(dist.iter().copied()))
}

/// −Σ p log₂ p over raw masses, without checking that they sum to 1.
pub fn plug_in(masses: impl IntoIterator<Item = f64>) -> f64 {
    -masses
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

/// Group ids of every prefix set `(A^a, B^b)` over a fixed list of trajectories.
///
/// Built once per trajectory support; evaluating an entropy is then a single
/// pass over the probabilities.
#[derive(Clone, Debug)]
pub struct EntropyPlan {
    horizon: usize,
    ids: Vec<Vec<u32>>,
    counts: Vec<usize>,
}

impl EntropyPlan {
    pub fn new(horizon: usize, trajs: &[(&[Symbol], &[Symbol])]) -> Self {
        let n = horizon + 1;
        let mut ids = Vec::with_capacity(n * n);
        let mut counts = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let mut map: HashMap<(&[Symbol], &[Symbol]), u32> = HashMap::new();
                let v: Vec<u32> = trajs
                    .iter()
                    .map(|(al, be)| {
                        let k = (&al[..a], &be[..b]);
                        let next = map.len() as u32;
                        *map.entry(k).or_insert(next)
                    })
                    .collect();
                counts.push(map.len());
                ids.push(v);
            }
        }
        EntropyPlan {
            horizon,
            ids,
            counts,
        }
    }

    pub fn from_measure(m: &TrajectoryMeasure) -> Self {
        let trajs: Vec<(&[Symbol], &[Symbol])> = m
            .entries
            .iter()
            .map(|e| (e.secrets.as_slice(), e.observables.as_slice()))
            .collect();
        EntropyPlan::new(m.horizon, &trajs)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// H(A^a, B^b) for trajectory probabilities `probs`.
    pub fn h(&self, a: usize, b: usize, probs: &[f64], scratch: &mut Vec<f64>) -> f64 {
        if a == 0 && b == 0 {
            return 0.0;
        }
        let k = a * (self.horizon + 1) + b;
        scratch.clear();
        scratch.resize(self.counts[k], 0.0);
        for (&g, &p) in self.ids[k].iter().zip(probs) {
            scratch[g as usize] += p;
        }
        plug_in(scratch.iter().copied())
    }

    /// Σ_t I(A^t; B_t | B^{t-1}).
    pub fn forward(&self, probs: &[f64], scratch: &mut Vec<f64>) -> f64 {
        let mut h = |a, b| self.h(a, b, probs, scratch);
        (1..=self.horizon)
            .map(|t| h(t, t - 1) - h(0, t - 1) - h(t, t) + h(0, t))
            .sum()
    }

    /// Σ_t I(A_t; B^{t-1} | A^{t-1}).
    pub fn backward(&self, probs: &[f64], scratch: &mut Vec<f64>) -> f64 {
        let mut h = |a, b| self.h(a, b, probs, scratch);
        (1..=self.horizon)
            .map(|t| h(t, 0) - h(t - 1, 0) - h(t, t - 1) + h(t - 1, t - 1))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeakageReport {
    /// H(A^T)
    pub h_a: f64,
    /// Σ_t H(A_t | A^{t-1}, B^{t-1})
    pub h_r: f64,
    /// H(A^T | B^T)
    pub h_a_given_b: f64,
    /// I(A^T; B^T)
    pub i_mutual: f64,
    /// I(A^T → B^T)
    pub i_forward: f64,
    /// I(B^T → A^T)
    pub i_backward: f64,
    /// Min-entropy leakage, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i_min: Option<f64>,
}

fn check_measure(m: &TrajectoryMeasure) -> Result<()> {
    let total = m.total();
    if m.entries.iter().any(|e| e.prob < 0.0 || e.prob.is_nan())
        || (!m.lenient && (total - 1.0).abs() > 1e-9)
    {
        return Err(Error::NotADistribution(total));
    }
    Ok(())
}

/// Directed information in both directions plus the entropies around them.
pub fn directed_information(m: &TrajectoryMeasure) -> Result<LeakageReport> {
    check_measure(m)?;
    let plan = EntropyPlan::from_measure(m);
    let probs: Vec<f64> = m.entries.iter().map(|e| e.prob).collect();
    let mut sc = Vec::new();
    let tt = m.horizon;
    let mut h = |a, b| plan.h(a, b, &probs, &mut sc);
    let h_a = h(tt, 0);
    let h_r: f64 = (1..=tt).map(|t| h(t, t - 1) - h(t - 1, t - 1)).sum();
    let h_a_given_b = h(tt, tt) - h(0, tt);
    Ok(LeakageReport {
        h_a,
        h_r,
        h_a_given_b,
        i_mutual: h_a - h_a_given_b,
        i_forward: plan.forward(&probs, &mut sc),
        i_backward: plan.backward(&probs, &mut sc),
        i_min: None,
    })
}

/// H∞(A^T) − H∞(A^T | B^T) with H∞(A | B) = −log₂ Σ_b max_a p(a, b).
pub fn min_entropy_leakage(m: &TrajectoryMeasure) -> Result<f64> {
    check_measure(m)?;
    let mut prior: HashMap<&[Symbol], f64> = HashMap::new();
    let mut col_max: HashMap<&[Symbol], f64> = HashMap::new();
    let mut joint: HashMap<(&[Symbol], &[Symbol]), f64> = HashMap::new();
    for e in &m.entries {
        *prior.entry(&e.secrets).or_insert(0.0) += e.prob;
        *joint.entry((&e.secrets, &e.observables)).or_insert(0.0) += e.prob;
    }
    for ((_, b), p) in &joint {
        let c = col_max.entry(b).or_insert(0.0);
        *c = c.max(*p);
    }
    let v_prior = prior.values().copied().fold(0.0, f64::max);
    let v_post: f64 = col_max.values().sum();
    if v_prior <= 0.0 {
        return Ok(0.0);
    }
    Ok(v_post.log2() - v_prior.log2())
}

/// A one-use trajectory measure from a prior and a conditional matrix.
pub fn measure_from_matrix(prior: &[f64], matrix: &[Row]) -> TrajectoryMeasure {
    let mut entries = Vec::new();
    for (a, (&pa, row)) in prior.iter().zip(matrix).enumerate() {
        for (b, &q) in row.iter().enumerate() {
            if pa * q > 0.0 {
                entries.push(Trajectory {
                    secrets: vec![a],
                    observables: vec![b],
                    prob: pa * q,
                });
            }
        }
    }
    TrajectoryMeasure {
        horizon: 1,
        secrets: (0..prior.len()).map(|i| i.to_string()).collect(),
        observables: (0..matrix.first().map_or(0, |r| r.len()))
            .map(|i| i.to_string())
            .collect(),
        entries,
        lenient: false,
    }
}

/// I(A; B) of a prior pushed through a conditional matrix.
pub fn mutual_information(prior: &[f64], matrix: &[Row]) -> f64 {
    let nb = matrix.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; nb];
    for (pa, row) in prior.iter().zip(matrix) {
        for (o, q) in out.iter_mut().zip(row) {
            *o += pa * q;
        }
    }
    let mut i = 0.0;
    for (pa, row) in prior.iter().zip(matrix) {
        for (q, po) in row.iter().zip(&out) {
            if pa * q > 0.0 {
                i += pa * q * (q / po).log2();
            }
        }
    }
    i
}
