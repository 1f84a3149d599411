//! Automaton representation, validation, and path/trace machinery.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{limits, Error, Result};

pub type StateId = usize;
pub type LabelId = usize;

pub const SECRET_PLACEHOLDER: &str = "@a*";
pub const OBSERVABLE_PLACEHOLDER: &str = "@b*";

/// Tolerance used when checking that a distribution sums to one.
pub const SUM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Secret,
    Observable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ActionLabel {
    pub name: String,
    pub kind: ActionKind,
    pub placeholder: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FullyProbabilistic,
    SecretNondeterministic,
    General,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::FullyProbabilistic => "fully_probabilistic",
            Mode::SecretNondeterministic => "secret_nondeterministic",
            Mode::General => "general",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fully_probabilistic" => Ok(Mode::FullyProbabilistic),
            "secret_nondeterministic" => Ok(Mode::SecretNondeterministic),
            "general" => Ok(Mode::General),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branch {
    pub label: LabelId,
    pub target: StateId,
    pub prob: f64,
}

/// One element of ϑ(s): a finite distribution over (label, target) pairs.
pub type Distribution = Vec<Branch>;

/// Shape of a state, judged from the labels on its outgoing branches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Secret,
    Observable,
    Mixed,
    Terminal,
}

/// An interactive information-hiding system.
///
/// Labels are stored densely: declared secrets, then `@a*`, then declared
/// observables, then `@b*`. That order is also the alphabet order used by
/// every channel-level enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct Iihs {
    labels: Vec<ActionLabel>,
    n_secret: usize,
    states: Vec<String>,
    index: HashMap<String, StateId>,
    initial: StateId,
    trans: Vec<Vec<Distribution>>,
    mode: Mode,
    lenient: bool,
}

impl Iihs {
    pub fn labels(&self) -> &[ActionLabel] {
        &self.labels
    }

    pub fn label(&self, id: LabelId) -> &ActionLabel {
        &self.labels[id]
    }

    pub fn label_name(&self, id: LabelId) -> &str {
        &self.labels[id].name
    }

    pub fn label_id(&self, name: &str) -> Option<LabelId> {
        self.labels.iter().position(|l| l.name == name)
    }

    pub fn is_secret(&self, id: LabelId) -> bool {
        id < self.n_secret
    }

    /// Secret alphabet, placeholder last.
    pub fn secret_labels(&self) -> std::ops::Range<LabelId> {
        0..self.n_secret
    }

    /// Observable alphabet, placeholder last.
    pub fn observable_labels(&self) -> std::ops::Range<LabelId> {
        self.n_secret..self.labels.len()
    }

    pub fn secret_placeholder(&self) -> LabelId {
        self.n_secret - 1
    }

    pub fn observable_placeholder(&self) -> LabelId {
        self.labels.len() - 1
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s]
    }

    pub fn state_index(&self, name: &str) -> Option<StateId> {
        self.index.get(name).copied()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn distributions(&self, s: StateId) -> &[Distribution] {
        &self.trans[s]
    }

    /// Copy with every distribution of positive mass scaled to sum to 1.
    pub fn rescaled(&self) -> Iihs {
        let mut out = self.clone();
        for d in out.trans.iter_mut().flatten() {
            let total: f64 = d.iter().map(|b| b.prob).sum();
            if total > 0.0 {
                d.iter_mut().for_each(|b| b.prob = (b.prob / total).min(1.0));
            }
        }
        out.lenient = false;
        out
    }

    pub(crate) fn distributions_mut(&mut self, s: StateId) -> &mut [Distribution] {
        &mut self.trans[s]
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Lenient models tolerate distributions that do not sum to one.
    pub fn lenient(&self) -> bool {
        self.lenient
    }

    pub fn set_lenient(&mut self, lenient: bool) {
        self.lenient = lenient;
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.trans[s].iter().all(|d| d.is_empty())
    }

    pub fn state_kind(&self, s: StateId) -> StateKind {
        let mut secret = false;
        let mut observable = false;
        for b in self.trans[s].iter().flatten() {
            if self.is_secret(b.label) {
                secret = true;
            } else {
                observable = true;
            }
        }
        match (secret, observable) {
            (false, false) => StateKind::Terminal,
            (true, false) => StateKind::Secret,
            (false, true) => StateKind::Observable,
            (true, true) => StateKind::Mixed,
        }
    }

    /// Declared (non-placeholder) label names of one kind.
    pub fn declared(&self, kind: ActionKind) -> Vec<&str> {
        self.labels
            .iter()
            .filter(|l| l.kind == kind && !l.placeholder)
            .map(|l| l.name.as_str())
            .collect()
    }

    /// Longest path length from the initial state, or `None` on a reachable cycle.
    pub fn depth(&self) -> Option<usize> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut mark = vec![0u8; self.n_states()];
        let mut depth = vec![0usize; self.n_states()];
        let mut stack = vec![(self.initial, false)];
        while let Some((s, post)) = stack.pop() {
            if post {
                let mut d = 0;
                for b in self.trans[s].iter().flatten() {
                    d = d.max(depth[b.target] + 1);
                }
                depth[s] = d;
                mark[s] = 2;
                continue;
            }
            match mark[s] {
                2 => continue,
                1 => return None,
                _ => {}
            }
            mark[s] = 1;
            stack.push((s, true));
            for b in self.trans[s].iter().flatten() {
                match mark[b.target] {
                    1 => return None,
                    0 => stack.push((b.target, false)),
                    _ => {}
                }
            }
        }
        Some(depth[self.initial])
    }

    /// Number of secret/observable rounds needed to cover the whole tree.
    pub fn natural_horizon(&self) -> Result<usize> {
        let d = self.depth().ok_or(Error::CyclicModel)?;
        Ok(d.div_ceil(2).max(1))
    }

    pub fn validate(&self, require_normalized: bool) -> ValidationReport {
        validate(self, require_normalized)
    }

    /// Every maximal path of length at most `max_len`.
    ///
    /// Each distribution of a nondeterministic state is expanded separately,
    /// so path probabilities are per-scheduler products.
    pub fn complete_paths(&self, max_len: usize) -> Result<Vec<Path>> {
        let cap = limits::max_items();
        let mut out = Vec::new();
        let mut stack = vec![Path {
            states: vec![self.initial],
            labels: Vec::new(),
            prob: 1.0,
        }];
        while let Some(p) = stack.pop() {
            let s = *p.states.last().unwrap();
            if p.labels.len() == max_len || self.is_terminal(s) {
                out.push(p);
                limits::guard("paths", out.len() as u64, cap)?;
                continue;
            }
            for dist in self.trans[s].iter().rev() {
                for b in dist.iter().rev() {
                    let mut q = p.clone();
                    q.states.push(b.target);
                    q.labels.push(b.label);
                    q.prob *= b.prob;
                    stack.push(q);
                }
            }
        }
        Ok(out)
    }

    /// The unique state reached by the path whose projections equal `trace`.
    pub fn resolve_path(&self, trace: &Trace) -> Result<Option<StateId>> {
        if let Some(v) = self.structural_violation() {
            return Err(Error::ModelNotNormalized(v.to_string()));
        }
        let na = trace.secrets.len();
        let nb = trace.observables.len();
        if na != nb && na != nb + 1 {
            return Ok(None);
        }
        let mut s = self.initial;
        for i in 0..na + nb {
            let label = if i % 2 == 0 {
                trace.secrets[i / 2]
            } else {
                trace.observables[i / 2]
            };
            match self.step(s, label) {
                Some(next) => s = next,
                None => return Ok(None),
            }
        }
        Ok(Some(s))
    }

    /// Successor of `s` under `label`, preferring positive-probability branches.
    pub fn step(&self, s: StateId, label: LabelId) -> Option<StateId> {
        let mut fallback = None;
        for b in self.trans[s].iter().flatten() {
            if b.label == label {
                if b.prob > 0.0 {
                    return Some(b.target);
                }
                fallback.get_or_insert(b.target);
            }
        }
        fallback
    }

    fn structural_violation(&self) -> Option<Violation> {
        validate(self, true).violations.into_iter().find(|v| {
            matches!(
                v.condition,
                Condition::Homogeneity | Condition::Alternation | Condition::InitialSecret
            )
        })
    }

    /// Parses a trace given by label names.
    pub fn trace(&self, secrets: &[&str], observables: &[&str]) -> Result<Trace> {
        let look = |name: &str, kind: ActionKind| {
            self.label_id(name)
                .filter(|&l| self.labels[l].kind == kind)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown label '{name}'")))
        };
        Ok(Trace {
            secrets: secrets
                .iter()
                .map(|n| look(n, ActionKind::Secret))
                .collect::<Result<_>>()?,
            observables: observables
                .iter()
                .map(|n| look(n, ActionKind::Observable))
                .collect::<Result<_>>()?,
        })
    }
}

/// A pair of secret and observable label sequences.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Trace {
    pub secrets: Vec<LabelId>,
    pub observables: Vec<LabelId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub states: Vec<StateId>,
    pub labels: Vec<LabelId>,
    pub prob: f64,
}

impl Path {
    pub fn trace(&self, model: &Iihs) -> Trace {
        let mut t = Trace::default();
        for &l in &self.labels {
            if model.is_secret(l) {
                t.secrets.push(l);
            } else {
                t.observables.push(l);
            }
        }
        t
    }

    pub fn last(&self) -> StateId {
        *self.states.last().unwrap()
    }
}

/// Builds an [`Iihs`] from names. States are created on first mention.
#[derive(Debug)]
pub struct IihsBuilder {
    labels: Vec<ActionLabel>,
    n_secret: usize,
    states: Vec<String>,
    index: HashMap<String, StateId>,
    trans: Vec<Vec<Distribution>>,
    initial: Option<String>,
    mode: Mode,
    lenient: bool,
}

impl IihsBuilder {
    pub fn new<S: AsRef<str>>(secrets: &[S], observables: &[S]) -> Result<Self> {
        let mut labels = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (names, kind, ph) in [
            (secrets, ActionKind::Secret, SECRET_PLACEHOLDER),
            (observables, ActionKind::Observable, OBSERVABLE_PLACEHOLDER),
        ] {
            for n in names {
                let n = n.as_ref();
                if n.is_empty() || n.starts_with('@') {
                    return Err(Error::InvalidArgument(format!(
                        "label '{n}' is reserved or empty"
                    )));
                }
                if !seen.insert(n.to_string()) {
                    return Err(Error::InvalidArgument(format!("label '{n}' declared twice")));
                }
                labels.push(ActionLabel {
                    name: n.to_string(),
                    kind,
                    placeholder: false,
                });
            }
            labels.push(ActionLabel {
                name: ph.to_string(),
                kind,
                placeholder: true,
            });
        }
        Ok(IihsBuilder {
            n_secret: secrets.len() + 1,
            labels,
            states: Vec::new(),
            index: HashMap::new(),
            trans: Vec::new(),
            initial: None,
            mode: Mode::FullyProbabilistic,
            lenient: false,
        })
    }

    pub fn mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn lenient(mut self, lenient: bool) -> Self {
        self.lenient = lenient;
        self
    }

    pub fn initial(mut self, id: &str) -> Self {
        self.initial = Some(id.to_string());
        self
    }

    pub fn set_initial(&mut self, id: &str) {
        self.initial = Some(id.to_string());
    }

    pub fn label_id(&self, name: &str) -> Option<LabelId> {
        self.labels.iter().position(|l| l.name == name)
    }

    pub fn state(&mut self, id: &str) -> StateId {
        if let Some(&s) = self.index.get(id) {
            return s;
        }
        let s = self.states.len();
        self.states.push(id.to_string());
        self.index.insert(id.to_string(), s);
        self.trans.push(Vec::new());
        s
    }

    /// Whether `id` already has at least one distribution.
    pub fn has_distributions(&self, id: &str) -> bool {
        self.index
            .get(id)
            .is_some_and(|&s| !self.trans[s].is_empty())
    }

    /// Appends one distribution to ϑ(`from`).
    pub fn dist(&mut self, from: &str, branches: &[(&str, &str, f64)]) -> Result<&mut Self> {
        let s = self.state(from);
        let mut d = Vec::with_capacity(branches.len());
        for &(label, target, prob) in branches {
            let l = self
                .label_id(label)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown label '{label}'")))?;
            if !(0.0..=1.0).contains(&prob) || prob.is_nan() {
                return Err(Error::InvalidArgument(format!(
                    "probability {prob} out of range"
                )));
            }
            let t = self.state(target);
            d.push(Branch {
                label: l,
                target: t,
                prob,
            });
        }
        self.trans[s].push(d);
        Ok(self)
    }

    pub fn build(mut self) -> Result<Iihs> {
        let initial = match self.initial.take() {
            Some(id) => self.state(&id),
            None if !self.states.is_empty() => 0,
            None => return Err(Error::InvalidArgument("model has no states".into())),
        };
        Ok(Iihs {
            labels: self.labels,
            n_secret: self.n_secret,
            states: self.states,
            index: self.index,
            initial,
            trans: self.trans,
            mode: self.mode,
            lenient: self.lenient,
        })
    }
}

/// Conditions checked by [`validate`]. The first six follow the
/// definition of an IIHS; the last one checks stochasticity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// (1) all labels of a state are of one kind.
    Homogeneity,
    /// (2) secret and observable levels alternate.
    Alternation,
    /// (3) the initial state is a secret state.
    InitialSecret,
    /// (4) observable states carry at most one distribution.
    ObservableDeterminism,
    /// (5) fully probabilistic, or secret choices are Dirac.
    Mode,
    /// (6) at most one positive-probability target per label.
    UniqueTarget,
    DistributionSum,
}

impl Condition {
    pub fn number(self) -> Option<u8> {
        match self {
            Condition::Homogeneity => Some(1),
            Condition::Alternation => Some(2),
            Condition::InitialSecret => Some(3),
            Condition::ObservableDeterminism => Some(4),
            Condition::Mode => Some(5),
            Condition::UniqueTarget => Some(6),
            Condition::DistributionSum => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub condition: Condition,
    pub state: String,
    pub detail: String,
    /// Tolerated because the model is marked lenient.
    pub tolerated: bool,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.condition.number() {
            Some(n) => write!(f, "condition ({n}) at state {}: {}", self.state, self.detail)?,
            None => write!(f, "state {}: {}", self.state, self.detail)?,
        }
        if self.tolerated {
            write!(f, " [tolerated]")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    /// True when every violation (if any) is tolerated.
    pub fn is_ok(&self) -> bool {
        self.violations.iter().all(|v| v.tolerated)
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate(model: &Iihs, require_normalized: bool) -> ValidationReport {
    let mut out = Vec::new();
    let mut push = |condition, s: StateId, detail: String, tolerated| {
        out.push(Violation {
            condition,
            state: model.state_name(s).to_string(),
            detail,
            tolerated,
        })
    };

    for s in 0..model.n_states() {
        for (k, d) in model.distributions(s).iter().enumerate() {
            let sum: f64 = d.iter().map(|b| b.prob).sum();
            if !d.is_empty() && (sum - 1.0).abs() > SUM_TOL {
                push(
                    Condition::DistributionSum,
                    s,
                    format!("distribution {k} sums to {sum}"),
                    model.lenient(),
                );
            }
            let mut positive: HashMap<LabelId, StateId> = HashMap::new();
            for b in d.iter().filter(|b| b.prob > 0.0) {
                if let Some(&t) = positive.get(&b.label) {
                    if t != b.target {
                        push(
                            Condition::UniqueTarget,
                            s,
                            format!(
                                "label {} leads to both {} and {}",
                                model.label_name(b.label),
                                model.state_name(t),
                                model.state_name(b.target)
                            ),
                            false,
                        );
                    }
                } else {
                    positive.insert(b.label, b.target);
                }
            }
        }
    }

    let fully_prob = (0..model.n_states()).all(|s| model.distributions(s).len() <= 1);
    let secret_dirac = |s: StateId| {
        model.state_kind(s) != StateKind::Secret
            || model
                .distributions(s)
                .iter()
                .all(|d| d.iter().filter(|b| b.prob > 0.0).count() == 1 && dirac(d))
    };
    match model.mode() {
        Mode::FullyProbabilistic => {
            for s in 0..model.n_states() {
                let n = model.distributions(s).len();
                if n > 1 {
                    push(
                        Condition::Mode,
                        s,
                        format!("{n} distributions in a fully probabilistic model"),
                        false,
                    );
                }
            }
        }
        Mode::SecretNondeterministic => {
            for s in 0..model.n_states() {
                if !secret_dirac(s) {
                    push(
                        Condition::Mode,
                        s,
                        "secret choice is not a set of Dirac measures".into(),
                        false,
                    );
                }
            }
        }
        Mode::General => {
            if require_normalized && !fully_prob && !(0..model.n_states()).all(secret_dirac) {
                push(
                    Condition::Mode,
                    model.initial(),
                    "model is neither fully probabilistic nor secret-nondeterministic".into(),
                    false,
                );
            }
        }
    }

    if require_normalized {
        let kinds: Vec<StateKind> = (0..model.n_states()).map(|s| model.state_kind(s)).collect();
        for s in 0..model.n_states() {
            match kinds[s] {
                StateKind::Mixed => push(
                    Condition::Homogeneity,
                    s,
                    "mixes secret and observable labels".into(),
                    false,
                ),
                StateKind::Observable if model.distributions(s).len() > 1 => push(
                    Condition::ObservableDeterminism,
                    s,
                    format!("{} distributions", model.distributions(s).len()),
                    false,
                ),
                _ => {}
            }
            for b in model.distributions(s).iter().flatten() {
                let bad = match (kinds[s], kinds[b.target]) {
                    (_, StateKind::Terminal) => false,
                    (StateKind::Secret, StateKind::Observable) => false,
                    (StateKind::Observable, StateKind::Secret) => false,
                    (StateKind::Mixed, _) | (_, StateKind::Mixed) => false,
                    _ => true,
                };
                if bad {
                    push(
                        Condition::Alternation,
                        s,
                        format!(
                            "{:?} state followed by {:?} state {}",
                            kinds[s],
                            kinds[b.target],
                            model.state_name(b.target)
                        )
                        .to_lowercase(),
                        false,
                    );
                }
            }
        }
        let k = kinds[model.initial()];
        if k != StateKind::Secret && k != StateKind::Terminal {
            push(
                Condition::InitialSecret,
                model.initial(),
                "initial state is not a secret state".into(),
                false,
            );
        }
    }
    ValidationReport { violations: out }
}

fn dirac(d: &Distribution) -> bool {
    d.iter().any(|b| (b.prob - 1.0).abs() <= SUM_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Iihs {
        let mut b = IihsBuilder::new(&["a1", "a2"], &["b1", "b2"]).unwrap();
        b.dist("s", &[("a1", "x", 0.5), ("a2", "y", 0.5)]).unwrap();
        b.dist("x", &[("b1", "x1", 1.0)]).unwrap();
        b.dist("y", &[("b1", "y1", 0.25), ("b2", "y2", 0.75)]).unwrap();
        b.initial("s").build().unwrap()
    }

    #[test]
    fn label_layout() {
        let m = tiny();
        assert_eq!(m.secret_labels(), 0..3);
        assert_eq!(m.label_name(m.secret_placeholder()), "@a*");
        assert_eq!(m.label_name(m.observable_placeholder()), "@b*");
        assert!(m.label(m.secret_placeholder()).placeholder);
        assert_eq!(m.declared(ActionKind::Observable), vec!["b1", "b2"]);
    }

    #[test]
    fn reserved_and_duplicate_labels_rejected() {
        assert!(IihsBuilder::new(&["@x"], &["b"]).is_err());
        assert!(IihsBuilder::new(&["a"], &["a"]).is_err());
    }

    #[test]
    fn valid_tree_has_empty_report() {
        let m = tiny();
        assert!(m.validate(true).is_empty(), "{:?}", m.validate(true));
        assert_eq!(m.depth(), Some(2));
        assert_eq!(m.natural_horizon().unwrap(), 1);
    }

    #[test]
    fn single_terminal_state_is_valid() {
        let mut b = IihsBuilder::new::<&str>(&[], &[]).unwrap();
        b.state("only");
        let m = b.build().unwrap();
        assert!(m.validate(true).is_empty());
    }

    #[test]
    fn two_targets_for_one_label() {
        let mut b = IihsBuilder::new(&["a"], &["b"]).unwrap();
        b.dist("s", &[("a", "x", 0.5), ("a", "y", 0.5)]).unwrap();
        let m = b.build().unwrap();
        let r = m.validate(false);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].condition, Condition::UniqueTarget);
    }

    #[test]
    fn structural_violations() {
        let mut b = IihsBuilder::new(&["a"], &["b"]).unwrap();
        b.dist("s", &[("b", "x", 0.5), ("a", "y", 0.5)]).unwrap();
        b.dist("y", &[("a", "z", 1.0)]).unwrap();
        b.dist("z", &[("a", "w", 1.0)]).unwrap();
        let m = b.build().unwrap();
        let conds: Vec<_> = m.validate(true).violations.iter().map(|v| v.condition).collect();
        assert!(conds.contains(&Condition::Homogeneity));
        assert!(conds.contains(&Condition::Alternation));
        assert!(conds.contains(&Condition::InitialSecret));
        assert!(m.validate(false).is_empty());
    }

    #[test]
    fn sum_violation_and_lenient() {
        let mut b = IihsBuilder::new(&["a"], &["b"]).unwrap();
        b.dist("s", &[("a", "x", 0.9)]).unwrap();
        let m = b.build().unwrap();
        assert!(!m.validate(false).is_ok());
        let mut m2 = m.clone();
        m2.set_lenient(true);
        let r = m2.validate(false);
        assert!(!r.is_empty() && r.is_ok());
    }

    #[test]
    fn nondeterministic_mode_checks() {
        let mut b = IihsBuilder::new(&["a1", "a2"], &["b"])
            .unwrap()
            .mode(Mode::SecretNondeterministic);
        b.dist("s", &[("a1", "x", 1.0)]).unwrap();
        b.dist("s", &[("a2", "y", 0.5), ("a1", "x", 0.5)]).unwrap();
        let m = b.build().unwrap();
        let r = m.validate(true);
        assert!(r.violations.iter().any(|v| v.condition == Condition::Mode));

        let mut b = IihsBuilder::new(&["a1", "a2"], &["b"]).unwrap();
        b.dist("s", &[("a1", "x", 1.0)]).unwrap();
        b.dist("s", &[("a2", "y", 1.0)]).unwrap();
        let m = b.build().unwrap();
        assert!(m.validate(true).violations.iter().any(|v| v.condition == Condition::Mode));
    }

    #[test]
    fn resolve_and_paths() {
        let m = tiny();
        let paths = m.complete_paths(10).unwrap();
        assert_eq!(paths.len(), 3);
        let total: f64 = paths.iter().map(|p| p.prob).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for p in &paths {
            assert_eq!(m.resolve_path(&p.trace(&m)).unwrap(), Some(p.last()));
        }
        assert_eq!(m.resolve_path(&Trace::default()).unwrap(), Some(m.initial()));
        let t = m.trace(&["a1"], &["b2"]).unwrap();
        assert_eq!(m.resolve_path(&t).unwrap(), None);
        let t = m.trace(&["a1", "a1"], &[]).unwrap();
        assert_eq!(m.resolve_path(&t).unwrap(), None);
    }

    #[test]
    fn resolve_rejects_unnormalized() {
        let mut b = IihsBuilder::new(&["a"], &["b"]).unwrap();
        b.dist("s", &[("b", "x", 1.0)]).unwrap();
        let m = b.build().unwrap();
        assert!(matches!(
            m.resolve_path(&Trace::default()),
            Err(Error::ModelNotNormalized(_))
        ));
    }

    #[test]
    fn cycle_detection() {
        let mut b = IihsBuilder::new(&["a"], &["b"]).unwrap();
        b.dist("s", &[("a", "x", 1.0)]).unwrap();
        b.dist("x", &[("b", "s", 1.0)]).unwrap();
        let m = b.build().unwrap();
        assert_eq!(m.depth(), None);
        assert!(matches!(m.natural_horizon(), Err(Error::CyclicModel)));
        assert_eq!(m.complete_paths(4).unwrap()[0].labels.len(), 4);
    }
}
