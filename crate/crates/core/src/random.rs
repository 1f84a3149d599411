//! Seeded generators of normalized models, for property tests and experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::channel::Row;
use crate::model::{Iihs, IihsBuilder, Mode};

/// A Dirichlet(1, ..., 1) sample of length `n`.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Row {
    let w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1) + 1e-12).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Builds a complete alternating tree of `horizon` rounds. `secret_step`
/// returns the distributions of a secret state given `(α^{t-1}, β^{t-1})`;
/// `observable_step` returns the kernel row given `(α^t, β^{t-1})`.
fn build_tree(
    na: usize,
    nb: usize,
    horizon: usize,
    mode: Mode,
    mut secret_step: impl FnMut(&[usize], &[usize]) -> Vec<Row>,
    mut observable_step: impl FnMut(&[usize], &[usize]) -> Row,
) -> Iihs {
    let secrets = names("a", na);
    let observables = names("b", nb);
    let mut b = IihsBuilder::new(&secrets, &observables).unwrap().mode(mode);
    let mut stack = vec![("r".to_string(), Vec::new(), Vec::new())];
    while let Some((id, alpha, beta)) = stack.pop() {
        let t = beta.len();
        if alpha.len() == beta.len() {
            if t == horizon {
                b.state(&id);
                continue;
            }
            for row in secret_step(&alpha, &beta) {
                let branches: Vec<(usize, String, f64)> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0 || mode == Mode::FullyProbabilistic)
                    .map(|(a, &p)| (a, format!("{id}.{}", secrets[a]), p))
                    .collect();
                let refs: Vec<(&str, &str, f64)> = branches
                    .iter()
                    .map(|(a, c, p)| (secrets[*a].as_str(), c.as_str(), *p))
                    .collect();
                b.dist(&id, &refs).unwrap();
                for (a, c, _) in branches {
                    let mut al = alpha.clone();
                    al.push(a);
                    stack.push((c, al, beta.clone()));
                }
            }
        } else {
            let row = observable_step(&alpha, &beta);
            let branches: Vec<(usize, String, f64)> = row
                .iter()
                .enumerate()
                .map(|(o, &p)| (o, format!("{id}.{}", observables[o]), p))
                .collect();
            let refs: Vec<(&str, &str, f64)> = branches
                .iter()
                .map(|(o, c, p)| (observables[*o].as_str(), c.as_str(), *p))
                .collect();
            b.dist(&id, &refs).unwrap();
            for (o, c, _) in branches {
                let mut be = beta.clone();
                be.push(o);
                stack.push((c, alpha.clone(), be));
            }
        }
    }
    b.initial("r").build().unwrap()
}

/// A fully probabilistic model with random inputs and kernels over every history.
pub fn fully_probabilistic(seed: u64, horizon: usize, na: usize, nb: usize) -> Iihs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r2 = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    build_tree(
        na,
        nb,
        horizon,
        Mode::FullyProbabilistic,
        |_, _| vec![dirichlet(&mut rng, na)],
        |_, _| dirichlet(&mut r2, nb),
    )
}

/// A memoryless channel used `horizon` times without feedback: the kernel
/// depends only on α_t and the inputs only on α^{t-1}. Returns the model and
/// its |A| × |B| matrix.
pub fn memoryless(seed: u64, horizon: usize, na: usize, nb: usize) -> (Iihs, Vec<Row>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matrix: Vec<Row> = (0..na).map(|_| dirichlet(&mut rng, nb)).collect();
    let mut priors = std::collections::HashMap::new();
    let m = matrix.clone();
    let model = build_tree(
        na,
        nb,
        horizon,
        Mode::FullyProbabilistic,
        |alpha, _| {
            vec![priors
                .entry(alpha.to_vec())
                .or_insert_with(|| dirichlet(&mut rng, na))
                .clone()]
        },
        |alpha, _| m[*alpha.last().unwrap()].clone(),
    );
    (model, matrix)
}

/// A secret-nondeterministic model: every secret is a Dirac choice and the
/// kernels are random with every entry at least `floor`.
pub fn secret_nondeterministic(seed: u64, horizon: usize, na: usize, nb: usize, floor: f64) -> Iihs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    build_tree(
        na,
        nb,
        horizon,
        Mode::SecretNondeterministic,
        |_, _| {
            (0..na)
                .map(|a| {
                    let mut r = vec![0.0; na];
                    r[a] = 1.0;
                    r
                })
                .collect()
        },
        |_, _| {
            let d = dirichlet(&mut rng, nb);
            let scale = 1.0 - floor * nb as f64;
            d.into_iter().map(|x| floor + scale * x).collect()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_models_are_normalized() {
        for seed in 0..5 {
            let m = fully_probabilistic(seed, 2, 3, 2);
            assert!(m.validate(true).is_empty(), "{:?}", m.validate(true));
            assert_eq!(m.depth(), Some(4));
            let (m, _) = memoryless(seed, 3, 2, 2);
            assert!(m.validate(true).is_empty());
            let m = secret_nondeterministic(seed, 2, 2, 3, 0.05);
            assert!(m.validate(true).is_empty(), "{:?}", m.validate(true));
        }
    }

    #[test]
    fn dirichlet_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..6 {
            let d = dirichlet(&mut rng, n);
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
