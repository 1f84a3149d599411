//! Unfolding a fully probabilistic IIHS into an alternating tree of depth 2T.
//!
//! Levels alternate secret, observable, secret, ... starting at the root.
//! At a secret level, observable branches of the current state are moved one
//! level down under a fresh `@a*` branch whose probability is their total
//! mass, and rescaled by that mass. Observable levels do the same with `@b*`
//! for secret branches. Output state ids spell the label path from the root
//! (`n`, `n.@a*`, `n.@a*.cheap`, ...), so normalizing twice with the same
//! horizon yields the same model.

use std::collections::{HashSet, VecDeque};

use crate::model::{Iihs, IihsBuilder, LabelId, Mode, StateId};
use crate::{limits, ActionKind, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormalizationOptions {
    pub horizon: usize,
    pub pad_terminals: bool,
}

#[derive(Clone, Debug)]
enum Node {
    Orig(StateId),
    Postponed(Vec<(LabelId, Node, f64)>),
    Empty,
}

/// Normalizes `model` up to horizon `opts.horizon`.
///
/// Branches deeper than 2T are cut. With `pad_terminals`, every leaf above
/// depth 2T is extended with placeholder steps of probability 1 so that all
/// leaves sit exactly at depth 2T.
pub fn normalize(model: &Iihs, opts: NormalizationOptions) -> Result<Iihs> {
    Ok(unfold(model, opts)?.0)
}

/// Smallest horizon for which normalization cuts nothing.
pub fn minimal_horizon(model: &Iihs) -> Result<usize> {
    check_input(model)?;
    let depth = model.depth().ok_or(Error::CyclicModel)?;
    let mut t = depth.div_ceil(2).max(1);
    loop {
        let (_, truncated) = unfold(
            model,
            NormalizationOptions {
                horizon: t,
                pad_terminals: false,
            },
        )?;
        if !truncated {
            return Ok(t);
        }
        t += 1;
    }
}

fn check_input(model: &Iihs) -> Result<()> {
    if (0..model.n_states()).any(|s| model.distributions(s).len() > 1) {
        return Err(Error::NotFullyProbabilistic);
    }
    Ok(())
}

fn unfold(model: &Iihs, opts: NormalizationOptions) -> Result<(Iihs, bool)> {
    if opts.horizon == 0 {
        return Err(Error::HorizonZero);
    }
    check_input(model)?;
    let cap = limits::max_items();
    let secrets = model.declared(ActionKind::Secret);
    let observables = model.declared(ActionKind::Observable);
    let mut b = IihsBuilder::new(&secrets, &observables)?
        .mode(Mode::FullyProbabilistic)
        .lenient(model.lenient());
    let root = "n".to_string();
    b.set_initial(&root);
    b.state(&root);

    let a_star = model.secret_placeholder();
    let b_star = model.observable_placeholder();
    let max_depth = 2 * opts.horizon;
    let mut truncated = false;
    let mut names = HashSet::from([root.clone()]);
    let mut queue = VecDeque::from([(Node::Orig(model.initial()), 0usize, root)]);

    while let Some((node, depth, name)) = queue.pop_front() {
        let secret_level = depth % 2 == 0;
        let branches = expand(model, &node, secret_level, a_star, b_star);
        let branches = match branches {
            Some(v) => v,
            None if opts.pad_terminals && depth < max_depth => {
                let ph = if secret_level { a_star } else { b_star };
                vec![(ph, Node::Empty, 1.0)]
            }
            None => continue,
        };
        if depth == max_depth {
            truncated = true;
            continue;
        }
        let mut dist = Vec::with_capacity(branches.len());
        for (label, child, p) in branches {
            let mut child_name = format!("{name}.{}", model.label_name(label));
            if names.contains(&child_name) {
                let mut k = 1;
                while names.contains(&format!("{child_name}~{k}")) {
                    k += 1;
                }
                child_name = format!("{child_name}~{k}");
            }
            names.insert(child_name.clone());
            limits::guard("normalized states", names.len() as u64, cap)?;
            dist.push((label, child_name.clone(), p));
            queue.push_back((child, depth + 1, child_name));
        }
        let refs: Vec<(&str, &str, f64)> = dist
            .iter()
            .map(|(l, t, p)| (model.label_name(*l), t.as_str(), *p))
            .collect();
        b.dist(&name, &refs)?;
    }
    Ok((b.build()?, truncated))
}

/// Outgoing branches of `node` at a level of the given kind, or `None` for a leaf.
fn expand(
    model: &Iihs,
    node: &Node,
    secret_level: bool,
    a_star: LabelId,
    b_star: LabelId,
) -> Option<Vec<(LabelId, Node, f64)>> {
    match node {
        Node::Empty => None,
        Node::Postponed(list) => Some(list.clone()),
        Node::Orig(s) => {
            let dist = model.distributions(*s).first().filter(|d| !d.is_empty())?;
            let mut kept = Vec::new();
            let mut moved = Vec::new();
            for br in dist {
                if model.is_secret(br.label) == secret_level {
                    kept.push((br.label, Node::Orig(br.target), br.prob));
                } else {
                    moved.push((br.label, Node::Orig(br.target), br.prob));
                }
            }
            if !moved.is_empty() {
                let (ph, other_ph) = if secret_level {
                    (a_star, b_star)
                } else {
                    (b_star, a_star)
                };
                let mass: f64 = moved.iter().map(|m| m.2).sum::<f64>().min(1.0);
                if mass > 0.0 {
                    for m in &mut moved {
                        m.2 = (m.2 / mass).min(1.0);
                    }
                } else {
                    moved.push((other_ph, Node::Empty, 1.0));
                }
                kept.push((ph, Node::Postponed(moved), mass));
            }
            Some(kept)
        }
    }
}
