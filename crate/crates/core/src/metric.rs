//! Kantorovich lifting, the Φ functional and the bisimulation pseudometric
//! between two models, plus the capacity-continuity experiment.
//!
//! Distances follow the reversed lattice order: the starting table d₀ (the
//! top element ⊤) is all zeros, and iterating Φ only increases entries.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::capacity::{directed_capacity, CapacityOptions};
use crate::channel::kernels_of;
use crate::model::{Iihs, Mode, StateId};
use crate::random::dirichlet;
use crate::{Error, Result};

const EPS: f64 = 1e-12;

/// Maximizes `c·x` subject to `a x ≤ b` and `x ≥ 0`, with `b ≥ 0` so the
/// origin is feasible. Dense tableau simplex using Bland's rule.
pub fn simplex_max(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = c.len();
    let m = a.len();
    if b.iter().any(|&v| v < 0.0) {
        return Err(Error::LpInfeasible);
    }
    let width = n + m + 1;
    let mut tab = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        tab[i][..n].copy_from_slice(&a[i]);
        tab[i][n + i] = 1.0;
        tab[i][width - 1] = b[i];
    }
    for j in 0..n {
        tab[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    // Bland's rule cannot cycle, so this bound only catches numerical trouble.
    let max_pivots = 50 * (n + m + 1) * (n + m + 1);
    for _ in 0..max_pivots {
        let Some(enter) = (0..n + m).find(|&j| tab[m][j] < -1e-12) else {
            let mut x = vec![0.0; n];
            for (i, &bv) in basis.iter().enumerate() {
                if bv < n {
                    x[bv] = tab[i][width - 1];
                }
            }
            return Ok((tab[m][width - 1], x));
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let coef = tab[i][enter];
            if coef > 1e-12 {
                let ratio = tab[i][width - 1] / coef;
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best - 1e-12 || (ratio <= best + 1e-12 && basis[i] < basis[l]),
                };
                if better {
                    best = ratio.min(best);
                    leave = Some(i);
                }
            }
        }
        let r = leave.ok_or(Error::LpUnbounded)?;
        let piv = tab[r][enter];
        tab[r].iter_mut().for_each(|v| *v /= piv);
        let pivot_row = tab[r].clone();
        for (i, row) in tab.iter_mut().enumerate() {
            if i != r {
                let f = row[enter];
                if f != 0.0 {
                    row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
                }
            }
        }
        basis[r] = enter;
    }
    Err(Error::NoConvergence(max_pivots))
}

/// Symmetric distance table over a set of states.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PseudometricTable {
    pub names: Vec<String>,
    entries: Vec<f64>,
}

impl PseudometricTable {
    pub fn zeros(names: Vec<String>) -> Self {
        let n = names.len();
        PseudometricTable {
            names,
            entries: vec![0.0; n * n],
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.len() + j]
    }

    /// Sets both (i, j) and (j, i).
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let n = self.len();
        self.entries[i * n + j] = v;
        self.entries[j * n + i] = v;
    }

    pub fn max_change(&self, other: &PseudometricTable) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// True when every entry is at least the matching entry of `other`.
    pub fn dominates(&self, other: &PseudometricTable, tol: f64) -> bool {
        self.entries.iter().zip(&other.entries).all(|(a, b)| a + tol >= *b)
    }

    /// Largest violation of reflexivity, symmetry, range and the triangle inequality.
    pub fn axiom_violation(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            worst = worst.max(self.get(i, i).abs());
            for j in 0..n {
                let d = self.get(i, j);
                worst = worst.max((d - self.get(j, i)).abs()).max(-d).max(d - 1.0);
                for k in 0..n {
                    worst = worst.max(d - self.get(i, k) - self.get(k, j));
                }
            }
        }
        worst
    }
}

/// Two models merged into one indexed state space, with labels identified by name.
#[derive(Clone, Debug)]
pub struct Universe {
    names: Vec<String>,
    /// Per state: its distributions as (label, state, prob) with global ids.
    dists: Vec<Vec<Vec<(usize, usize, f64)>>>,
    /// Offset of the second model's states.
    pub split: usize,
    pub roots: (usize, usize),
}

impl Universe {
    pub fn new(a: &Iihs, b: &Iihs) -> Self {
        let mut labels: HashMap<String, usize> = HashMap::new();
        let mut names = Vec::new();
        let mut dists = Vec::new();
        let split = a.n_states();
        for (tag, m, off) in [("1", a, 0), ("2", b, split)] {
            for s in 0..m.n_states() {
                names.push(format!("{tag}:{}", m.state_name(s)));
                let ds = m
                    .distributions(s)
                    .iter()
                    .map(|d| {
                        d.iter()
                            .map(|br| {
                                let next = labels.len();
                                let l = *labels.entry(m.label_name(br.label).to_string()).or_insert(next);
                                (l, br.target + off, br.prob)
                            })
                            .collect()
                    })
                    .collect();
                dists.push(ds);
            }
        }
        Universe {
            names,
            dists,
            split,
            roots: (a.initial(), b.initial() + split),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn terminal(&self, s: usize) -> bool {
        self.dists[s].iter().all(|d| d.is_empty())
    }

    /// Label → target when every distribution is a point mass, in label order.
    fn dirac_set(&self, s: usize) -> Option<Vec<(usize, usize)>> {
        let mut out = Vec::new();
        for d in &self.dists[s] {
            let mut pos = d.iter().filter(|br| br.2 > 0.0);
            let br = pos.next()?;
            if pos.next().is_some() || (br.2 - 1.0).abs() > 1e-9 {
                return None;
            }
            out.push((br.0, br.1));
        }
        out.sort_unstable();
        Some(out)
    }

    fn phi_pair(&self, d: &PseudometricTable, s: usize, t: usize) -> Result<f64> {
        let (ts, tt) = (self.terminal(s), self.terminal(t));
        if ts && tt {
            return Ok(0.0);
        }
        if ts || tt {
            return Ok(1.0);
        }
        if let (Some(x), Some(y)) = (self.dirac_set(s), self.dirac_set(t)) {
            let same = x.len() == y.len()
                && x.iter().zip(&y).all(|(p, q)| p.0 == q.0)
                && x.windows(2).all(|w| w[0].0 != w[1].0);
            if !same {
                return Ok(1.0);
            }
            return Ok(x.iter().zip(&y).map(|(p, q)| d.get(p.1, q.1)).fold(0.0, f64::max));
        }
        if self.dists[s].len() == 1 && self.dists[t].len() == 1 {
            return kantorovich(d, &self.dists[s][0], &self.dists[t][0]);
        }
        Ok(1.0)
    }
}

/// Kantorovich lifting of `d` to distributions over (label, state) pairs.
/// Entries with different labels are at distance 1. Both sides must carry
/// mass 1: with unequal masses the program is not symmetric.
pub fn kantorovich(
    d: &PseudometricTable,
    mu: &[(usize, StateId, f64)],
    nu: &[(usize, StateId, f64)],
) -> Result<f64> {
    for side in [mu, nu] {
        let total: f64 = side.iter().map(|e| e.2).sum();
        if (total - 1.0).abs() > 1e-9 || side.iter().any(|e| e.2 < 0.0) {
            return Err(Error::NotADistribution(total));
        }
    }
    let mut coef: BTreeMap<(usize, StateId), f64> = BTreeMap::new();
    for &(l, s, p) in mu {
        if p > 0.0 {
            *coef.entry((l, s)).or_insert(0.0) += p;
        }
    }
    for &(l, s, p) in nu {
        if p > 0.0 {
            *coef.entry((l, s)).or_insert(0.0) -= p;
        }
    }
    let keys: Vec<(usize, StateId)> = coef.keys().copied().collect();
    let c: Vec<f64> = coef.values().copied().collect();
    if c.iter().all(|v| v.abs() < EPS) {
        return Ok(0.0);
    }
    let n = keys.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        a.push(row);
        b.push(1.0);
        for j in 0..n {
            if i != j {
                let dist = if keys[i].0 == keys[j].0 { d.get(keys[i].1, keys[j].1) } else { 1.0 };
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                row[j] = -1.0;
                a.push(row);
                b.push(dist);
            }
        }
    }
    let (v, _) = simplex_max(&c, &a, &b)?;
    Ok(v.clamp(0.0, 1.0))
}

/// One application of Φ to a table over the universe.
pub fn phi_step(u: &Universe, d: &PseudometricTable) -> Result<PseudometricTable> {
    let n = u.len();
    let row = |i: usize| -> Result<Vec<f64>> { (i..n).map(|j| u.phi_pair(d, i, j)).collect() };
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(row).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<f64>> = (0..n).map(row).collect::<Result<_>>()?;
    let mut out = PseudometricTable::zeros(d.names.clone());
    for (i, r) in rows.into_iter().enumerate() {
        for (k, v) in r.into_iter().enumerate() {
            out.set(i, i + k, v);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BisimResult {
    pub distance: f64,
    pub iterations: usize,
    pub table: PseudometricTable,
}

/// Iterates Φ from the all-zero table until the largest entry change is at
/// most `tol`, then reads off the distance between the two initial states.
pub fn bisim_distance(a: &Iihs, b: &Iihs, max_iters: usize, tol: f64) -> Result<BisimResult> {
    let u = Universe::new(a, b);
    let mut d = PseudometricTable::zeros(u.names().to_vec());
    for it in 1..=max_iters {
        let next = phi_step(&u, &d)?;
        let change = next.max_change(&d);
        d = next;
        if change <= tol {
            return Ok(BisimResult {
                distance: d.get(u.roots.0, u.roots.1),
                iterations: it,
                table: d,
            });
        }
    }
    Err(Error::NoConvergence(max_iters))
}

/// Spearman rank correlation with average ranks for ties; `None` when either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// Copy of `model` whose observable rows are mixed toward a fixed random
/// direction: p' = (1 − ε) p + ε q with q ~ Dirichlet(1) drawn per row from `seed`.
pub fn perturb_kernels(model: &Iihs, eps: f64, seed: u64) -> Result<Iihs> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("perturbation {eps} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = model.clone();
    for s in 0..model.n_states() {
        let observable = model
            .distributions(s)
            .iter()
            .flatten()
            .any(|br| !model.is_secret(br.label));
        if !observable {
            continue;
        }
        for dist in out.distributions_mut(s) {
            let q = dirichlet(&mut rng, dist.len());
            for (br, qi) in dist.iter_mut().zip(q) {
                br.prob = ((1.0 - eps) * br.prob + eps * qi).min(1.0);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityRow {
    pub eps: f64,
    pub distance: f64,
    pub capacity: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub base_capacity: f64,
    pub rows: Vec<ContinuityRow>,
    /// Rank correlation between distance and capacity gap over the grid.
    pub spearman: Option<f64>,
}

/// Perturbs the kernels of a secret-nondeterministic model along one random
/// direction per grid point and records distance against capacity gap.
pub fn continuity_experiment(
    model: &Iihs,
    grid: &[f64],
    seed: u64,
    opts: &CapacityOptions,
) -> Result<ContinuityReport> {
    if model.mode() != Mode::SecretNondeterministic {
        return Err(Error::InvalidArgument(
            "continuity experiment needs a secret-nondeterministic model".into(),
        ));
    }
    let base = directed_capacity(&kernels_of(model)?, opts)?.value;
    let depth = model.depth().ok_or(Error::CyclicModel)?;
    let mut rows = Vec::new();
    for &eps in grid {
        let p = perturb_kernels(model, eps, seed)?;
        let distance = bisim_distance(model, &p, depth + 2, 0.0)?.distance;
        let capacity = directed_capacity(&kernels_of(&p)?, opts)?.value;
        rows.push(ContinuityRow {
            eps,
            distance,
            capacity,
            gap: (capacity - base).abs(),
        });
    }
    let ds: Vec<f64> = rows.iter().map(|r| r.distance).collect();
    let gs: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    Ok(ContinuityReport {
        base_capacity: base,
        spearman: spearman(&ds, &gs),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelDiff {
    pub distance: f64,
    /// Smallest positive kernel entry of the first model before the last step.
    pub m: f64,
    pub horizon: usize,
    /// Largest |p(β_t | α^t, β^{t-1}) − p'(β_t | α^t, β^{t-1})| over shared histories.
    pub max_entry_diff: f64,
}

impl ChannelDiff {
    /// Whether every entry difference stays below ε / m^{T−1}.
    pub fn holds(&self, eps: f64) -> bool {
        self.max_entry_diff < eps / self.m.powi(self.horizon as i32 - 1)
    }
}

/// Compares the kernel matrices of two normalized models against their distance.
pub fn channel_diff(a: &Iihs, b: &Iihs) -> Result<ChannelDiff> {
    let (ka, kb) = (kernels_of(a)?, kernels_of(b)?);
    let depth = a.depth().max(b.depth()).ok_or(Error::CyclicModel)?;
    let distance = bisim_distance(a, b, depth + 2, 0.0)?.distance;
    let t = ka.horizon;
    let m = ka.kernels[..t.saturating_sub(1)]
        .iter()
        .flat_map(|lvl| lvl.values())
        .flatten()
        .copied()
        .filter(|&p| p > 0.0)
        .fold(1.0, f64::min);
    let mut max_entry_diff: f64 = 0.0;
    for (la, lb) in ka.kernels.iter().zip(&kb.kernels) {
        for (h, ra) in la {
            if let Some(rb) = lb.get(h) {
                for (x, y) in ra.iter().zip(rb) {
                    max_entry_diff = max_entry_diff.max((x - y).abs());
                }
            }
        }
    }
    Ok(ChannelDiff {
        distance,
        m,
        horizon: t,
        max_entry_diff,
    })
}
