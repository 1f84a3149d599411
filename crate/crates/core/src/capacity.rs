//! Directed capacity by multi-start ascent, and the classical Blahut–Arimoto oracle.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{describe, joint_measure_with, FeedbackChannel, History, Row, RowFamily, Symbol};
use crate::infotheory::{directed_information, EntropyPlan};
use crate::random::dirichlet;
use crate::{limits, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CapacityOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        CapacityOptions {
            restarts: 16,
            max_iters: 2000,
            tol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapacityEstimate {
    /// Best (1/T) I(A^T → B^T) found, in bits per use.
    pub value: f64,
    /// T times `value`.
    pub raw_total: f64,
    /// Input family attaining `value`.
    pub argmax_inputs: RowFamily,
    pub restarts_used: usize,
    /// Restart that produced `value`.
    pub best_restart: usize,
    pub converged: bool,
}

const FD_STEP: f64 = 1e-5;

/// Trajectory support of a kernel family, with each trajectory's constant
/// kernel factor and the input decisions it passes through.
struct Skeleton {
    horizon: usize,
    /// (history, available secrets) for every input history with a real choice.
    decisions: Vec<(History, Vec<Symbol>)>,
    /// Input histories with a single available secret.
    forced: Vec<(History, Symbol)>,
    /// Per trajectory: kernel product and (decision, choice position) pairs.
    steps: Vec<(f64, Vec<(usize, usize)>)>,
    plan: EntropyPlan,
}

impl Skeleton {
    fn new(ch: &FeedbackChannel) -> Result<Self> {
        let cap = limits::max_items();
        for level in &ch.kernels {
            for (h, row) in level {
                let s: f64 = row.iter().sum();
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (s - 1.0).abs() > 1e-9 {
                    return Err(Error::NonStochasticKernel(format!(
                        "{} sums to {s}",
                        describe(ch, h)
                    )));
                }
            }
        }
        let mut decisions = Vec::new();
        let mut forced = Vec::new();
        let mut index: BTreeMap<&History, usize> = BTreeMap::new();
        for level in &ch.choices {
            for (h, cs) in level {
                if cs.len() > 1 {
                    index.insert(h, decisions.len());
                    decisions.push((h.clone(), cs.clone()));
                } else if let Some(&a) = cs.first() {
                    forced.push((h.clone(), a));
                }
            }
        }
        let mut steps = Vec::new();
        let mut trajs: Vec<(Vec<Symbol>, Vec<Symbol>)> = Vec::new();
        let mut stack = vec![(History::default(), 1.0, Vec::new())];
        while let Some((h, c, path)) = stack.pop() {
            let t = h.secrets.len() + 1;
            if t > ch.horizon {
                trajs.push((h.secrets, h.observables));
                steps.push((c, path));
                limits::guard("trajectories", steps.len() as u64, cap)?;
                continue;
            }
            let cs = ch.choices[t - 1]
                .get(&h)
                .ok_or_else(|| Error::MissingKernelRow(describe(ch, &h)))?;
            for (k, &a) in cs.iter().enumerate() {
                let mut ha = h.clone();
                ha.secrets.push(a);
                let row = ch
                    .kernel(&ha)
                    .ok_or_else(|| Error::MissingKernelRow(describe(ch, &ha)))?;
                let mut p2 = path.clone();
                if let Some(&d) = index.get(&h) {
                    p2.push((d, k));
                }
                for (b, &q) in row.iter().enumerate() {
                    if q > 0.0 {
                        let mut hb = ha.clone();
                        hb.observables.push(b);
                        stack.push((hb, c * q, p2.clone()));
                    }
                }
            }
        }
        let refs: Vec<(&[Symbol], &[Symbol])> =
            trajs.iter().map(|(a, b)| (a.as_slice(), b.as_slice())).collect();
        let plan = EntropyPlan::new(ch.horizon, &refs);
        Ok(Skeleton {
            horizon: ch.horizon,
            decisions,
            forced,
            steps,
            plan,
        })
    }

    fn objective(&self, probs: &[Vec<f64>], buf: &mut Vec<f64>, scratch: &mut Vec<f64>) -> f64 {
        buf.clear();
        buf.extend(self.steps.iter().map(|(c, path)| {
            path.iter().fold(*c, |acc, &(d, k)| acc * probs[d][k])
        }));
        self.plan.forward(buf, scratch) / self.horizon as f64
    }
}

fn softmax(theta: &[f64], out: &mut Vec<f64>) {
    let m = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.clear();
    out.extend(theta.iter().map(|&x| (x - m).exp()));
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= s);
}

struct Run {
    value: f64,
    theta: Vec<Vec<f64>>,
    converged: bool,
}

fn ascend(sk: &Skeleton, mut theta: Vec<Vec<f64>>, opts: &CapacityOptions) -> Run {
    let mut probs: Vec<Vec<f64>> = theta
        .iter()
        .map(|t| {
            let mut p = Vec::new();
            softmax(t, &mut p);
            p
        })
        .collect();
    let (mut buf, mut sc) = (Vec::new(), Vec::new());
    let mut f = sk.objective(&probs, &mut buf, &mut sc);
    let mut step = 1.0;
    let mut converged = sk.decisions.is_empty();
    let mut grad: Vec<Vec<f64>> = theta.iter().map(|t| vec![0.0; t.len()]).collect();
    let mut iters = 0;
    while !converged && iters < opts.max_iters {
        iters += 1;
        for d in 0..theta.len() {
            for k in 0..theta[d].len() {
                let orig = theta[d][k];
                theta[d][k] = orig + FD_STEP;
                softmax(&theta[d], &mut probs[d]);
                let up = sk.objective(&probs, &mut buf, &mut sc);
                theta[d][k] = orig - FD_STEP;
                softmax(&theta[d], &mut probs[d]);
                let down = sk.objective(&probs, &mut buf, &mut sc);
                theta[d][k] = orig;
                softmax(&theta[d], &mut probs[d]);
                grad[d][k] = (up - down) / (2.0 * FD_STEP);
            }
            // logit gradient is p_k (g_k - mean g); dividing by p_k gives the
            // exponentiated-gradient direction in probability space
            for (g, p) in grad[d].iter_mut().zip(&probs[d]) {
                *g /= p.max(1e-12);
            }
        }
        let gnorm: f64 = grad.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-12 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while step > 1e-12 {
            let trial: Vec<Vec<f64>> = theta
                .iter()
                .zip(&grad)
                .map(|(t, g)| t.iter().zip(g).map(|(x, y)| x + step * y).collect())
                .collect();
            let tp: Vec<Vec<f64>> = trial
                .iter()
                .map(|t| {
                    let mut p = Vec::new();
                    softmax(t, &mut p);
                    p
                })
                .collect();
            let ft = sk.objective(&tp, &mut buf, &mut sc);
            if ft > f {
                let gain = ft - f;
                theta = trial;
                probs = tp;
                f = ft;
                step *= 1.5;
                accepted = true;
                if gain < opts.tol {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = true;
        }
    }
    Run {
        value: f,
        theta,
        converged,
    }
}

/// Estimates C_T = max over causal input families of (1/T) I(A^T → B^T).
///
/// Restart 0 starts from uniform inputs, the others from Dirichlet(1) draws.
/// Each restart climbs by exponentiated-gradient steps (additive steps on
/// softmax logits) with central-difference gradients and a backtracking
/// step size. The best restart wins; ties go to the lowest index.
pub fn directed_capacity(ch: &FeedbackChannel, opts: &CapacityOptions) -> Result<CapacityEstimate> {
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let sk = Skeleton::new(ch)?;
    let starts: Vec<Vec<Vec<f64>>> = (0..opts.restarts)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(r as u64);
            sk.decisions
                .iter()
                .map(|(_, cs)| {
                    if r == 0 {
                        vec![0.0; cs.len()]
                    } else {
                        dirichlet(&mut rng, cs.len()).iter().map(|p| p.ln()).collect()
                    }
                })
                .collect()
        })
        .collect();

    #[cfg(feature = "parallel")]
    let runs: Vec<Run> = {
        use rayon::prelude::*;
        starts.into_par_iter().map(|s| ascend(&sk, s, opts)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<Run> = starts.into_iter().map(|s| ascend(&sk, s, opts)).collect();

    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value > runs[best].value {
            best = i;
        }
    }
    let run = &runs[best];
    let na = ch.secrets.len();
    let mut inputs: RowFamily = vec![BTreeMap::new(); ch.horizon];
    for ((h, cs), th) in sk.decisions.iter().zip(&run.theta) {
        let mut p = Vec::new();
        softmax(th, &mut p);
        let mut row = vec![0.0; na];
        for (&a, q) in cs.iter().zip(p) {
            row[a] = q;
        }
        inputs[h.secrets.len()].insert(h.clone(), row);
    }
    for (h, a) in &sk.forced {
        let mut row = vec![0.0; na];
        row[*a] = 1.0;
        inputs[h.secrets.len()].insert(h.clone(), row);
    }
    let value = run.value.max(0.0);
    Ok(CapacityEstimate {
        value,
        raw_total: value * ch.horizon as f64,
        argmax_inputs: inputs,
        restarts_used: opts.restarts,
        best_restart: best,
        converged: run.converged,
    })
}

/// (1/T) I(A^T → B^T) under an explicit input family.
pub fn leakage_rate(ch: &FeedbackChannel, inputs: &RowFamily) -> Result<f64> {
    let m = joint_measure_with(ch, inputs)?;
    Ok(directed_information(&m)?.i_forward / ch.horizon as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalCapacity {
    pub capacity: f64,
    pub input: Row,
    pub iterations: usize,
}

/// Capacity of a memoryless channel given by a row-stochastic matrix.
/// Stops once the gap between the standard upper and lower bounds is below `tol`.
pub fn blahut_arimoto(matrix: &[Row], tol: f64, max_iters: usize) -> Result<ClassicalCapacity> {
    let na = matrix.len();
    let nb = matrix.first().map_or(0, |r| r.len());
    if na == 0 || nb == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    for (i, r) in matrix.iter().enumerate() {
        let s: f64 = r.iter().sum();
        if r.len() != nb || r.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (s - 1.0).abs() > 1e-9
        {
            return Err(Error::NonStochasticKernel(format!("row {i} sums to {s}")));
        }
    }
    let mut p = vec![1.0 / na as f64; na];
    let mut d = vec![0.0; na];
    for it in 1..=max_iters {
        let mut q = vec![0.0; nb];
        for (pa, row) in p.iter().zip(matrix) {
            for (qb, w) in q.iter_mut().zip(row) {
                *qb += pa * w;
            }
        }
        // d[a] = D(W(.|a) || q) in nats
        for (da, row) in d.iter_mut().zip(matrix) {
            *da = row
                .iter()
                .zip(&q)
                .filter(|(w, _)| **w > 0.0)
                .map(|(w, qb)| w * (w / qb).ln())
                .sum();
        }
        let lower: f64 = p.iter().zip(&d).map(|(pa, da)| pa * da).sum();
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if (upper - lower) / std::f64::consts::LN_2 < tol {
            return Ok(ClassicalCapacity {
                capacity: lower / std::f64::consts::LN_2,
                input: p,
                iterations: it,
            });
        }
        let z: f64 = p.iter().zip(&d).map(|(pa, da)| pa * da.exp()).sum();
        for (pa, da) in p.iter_mut().zip(&d) {
            *pa *= da.exp() / z;
        }
    }
    Err(Error::NoConvergence(max_iters))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::Rng;

    use super::*;
    use crate::channel::kernels_of;
    use crate::format;
    use crate::infotheory::mutual_information;
    use crate::random;

    fn names(p: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{p}{i}")).collect()
    }

    fn memoryless(m: &[Row]) -> FeedbackChannel {
        FeedbackChannel::memoryless(names("a", m.len()), names("b", m[0].len()), m, 1).unwrap()
    }

    fn quick() -> CapacityOptions {
        CapacityOptions {
            restarts: 4,
            ..CapacityOptions::default()
        }
    }

    #[test]
    fn ba_classics() {
        for n in 1..5 {
            let id: Vec<Row> = (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            let c = blahut_arimoto(&id, 1e-12, 10_000).unwrap();
            assert!((c.capacity - (n as f64).log2()).abs() < 1e-9);
        }
        let same = vec![vec![0.3, 0.7]; 3];
        assert!(blahut_arimoto(&same, 1e-12, 10_000).unwrap().capacity.abs() < 1e-12);
        let bec = vec![vec![0.8, 0.0, 0.2], vec![0.0, 0.8, 0.2]];
        let c = blahut_arimoto(&bec, 1e-12, 10_000).unwrap();
        assert!((c.capacity - 0.8).abs() < 1e-9);
        let bad = vec![vec![0.3, 0.3]];
        assert!(matches!(blahut_arimoto(&bad, 1e-9, 10), Err(Error::NonStochasticKernel(_))));
    }

    #[test]
    fn ba_reports_no_convergence() {
        let m = vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.5, 0.5]];
        assert!(matches!(blahut_arimoto(&m, 0.0, 3), Err(Error::NoConvergence(3))));
    }

    #[test]
    fn binary_symmetric_closed_form() {
        let m = vec![vec![2.0 / 3.0, 1.0 / 3.0], vec![1.0 / 3.0, 2.0 / 3.0]];
        let h = -(2.0f64 / 3.0 * (2.0f64 / 3.0).log2() + 1.0 / 3.0 * (1.0f64 / 3.0).log2());
        let ba = blahut_arimoto(&m, 1e-12, 10_000).unwrap().capacity;
        assert!((ba - (1.0 - h)).abs() < 1e-9);
        let dc = directed_capacity(&memoryless(&m), &quick()).unwrap();
        assert!((dc.value - ba).abs() < 1e-4);
    }

    #[test]
    fn noncont_channels() {
        let s = "secrets: [a1, a2]\nobservables: [b1, b2]\ninitial: s\n\
                 state s { dist { a1 -> x @ 0, a2 -> y @ 1 } }\n\
                 state x { dist { b2 -> x1 @ 1 } }\nstate y { dist { b2 -> y1 @ 1 } }";
        let t = "secrets: [a1, a2]\nobservables: [b1, b2]\ninitial: s\n\
                 state s { dist { a1 -> x @ 0.1, a2 -> y @ 0.9 } }\n\
                 state x { dist { b1 -> x1 @ 1 } }\nstate y { dist { b2 -> y1 @ 1 } }";
        let cs = directed_capacity(&kernels_of(&format::parse(s).unwrap()).unwrap(), &quick()).unwrap();
        let ct = directed_capacity(&kernels_of(&format::parse(t).unwrap()).unwrap(), &quick()).unwrap();
        assert!(cs.value.abs() < 1e-9);
        assert!((ct.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn deterministic_given_seed() {
        let m = random::secret_nondeterministic(3, 2, 2, 2, 0.05);
        let ch = kernels_of(&m).unwrap();
        let a = directed_capacity(&ch, &quick()).unwrap();
        let b = directed_capacity(&ch, &quick()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn argmax_reproduces_value() {
        let m = random::secret_nondeterministic(5, 2, 2, 2, 0.05);
        let ch = kernels_of(&m).unwrap();
        let est = directed_capacity(&ch, &quick()).unwrap();
        let again = leakage_rate(&ch, &est.argmax_inputs).unwrap();
        assert!((again - est.value).abs() < 1e-9);
        assert!(est.value <= 1.0 + 1e-9);
    }

    #[test]
    fn rejects_non_stochastic_kernels() {
        let mut ch = memoryless(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        ch.kernels[0].values_mut().next().unwrap()[0] = 0.4;
        assert!(matches!(
            directed_capacity(&ch, &quick()),
            Err(Error::NonStochasticKernel(_))
        ));
    }

    fn random_family(ch: &FeedbackChannel, rng: &mut impl Rng) -> RowFamily {
        let na = ch.secrets.len();
        ch.choices
            .iter()
            .map(|level| {
                level
                    .iter()
                    .map(|(h, cs)| {
                        let d = dirichlet(rng, cs.len());
                        let mut row = vec![0.0; na];
                        for (&a, p) in cs.iter().zip(d) {
                            row[a] = p;
                        }
                        (h.clone(), row)
                    })
                    .collect()
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn matches_ba_on_memoryless(seed in any::<u64>(), na in 2usize..4, nb in 2usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m: Vec<Row> = (0..na).map(|_| dirichlet(&mut rng, nb)).collect();
            let ba = blahut_arimoto(&m, 1e-10, 100_000).unwrap().capacity;
            let dc = directed_capacity(&memoryless(&m), &quick()).unwrap().value;
            prop_assert!((dc - ba).abs() < 1e-3, "{} vs {}", dc, ba);
        }

        #[test]
        fn dominates_sampled_families(seed in any::<u64>()) {
            let model = random::secret_nondeterministic(seed, 2, 2, 2, 0.05);
            let ch = kernels_of(&model).unwrap();
            let est = directed_capacity(&ch, &quick()).unwrap();
            prop_assert!(est.value <= (ch.secrets.len() as f64).log2() + 1e-9);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
            for _ in 0..20 {
                let fam = random_family(&ch, &mut rng);
                prop_assert!(leakage_rate(&ch, &fam).unwrap() <= est.value + 1e-6);
            }
        }

        #[test]
        fn invariant_under_relabeling(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m: Vec<Row> = (0..3).map(|_| dirichlet(&mut rng, 3)).collect();
            let mut perm_rows = m.clone();
            perm_rows.rotate_left(1);
            let permuted: Vec<Row> = perm_rows.iter().map(|r| vec![r[2], r[0], r[1]]).collect();
            let a = directed_capacity(&memoryless(&m), &quick()).unwrap().value;
            let b = directed_capacity(&memoryless(&permuted), &quick()).unwrap().value;
            prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        }

        #[test]
        fn classical_capacity_bounds_mutual_information(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m: Vec<Row> = (0..3).map(|_| dirichlet(&mut rng, 2)).collect();
            // the lower bound is within the stopping gap of the true capacity
            let c = blahut_arimoto(&m, 1e-7, 1_000_000).unwrap().capacity;
            for _ in 0..10 {
                let prior = dirichlet(&mut rng, 3);
                prop_assert!(mutual_information(&prior, &m) <= c + 1e-7);
            }
        }
    }
}
