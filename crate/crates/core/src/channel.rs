//! Channel-with-memory-and-feedback view of a normalized IIHS.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::model::{Iihs, StateId, StateKind};
use crate::{limits, Error, Result};

/// Index into a channel alphabet.
pub type Symbol = usize;

/// A dense distribution over one alphabet.
pub type Row = Vec<f64>;

/// A pair of secret and observable prefixes, `(α^i, β^j)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct History {
    pub secrets: Vec<Symbol>,
    pub observables: Vec<Symbol>,
}

impl History {
    pub fn new(secrets: Vec<Symbol>, observables: Vec<Symbol>) -> Self {
        History {
            secrets,
            observables,
        }
    }

    fn with_secret(&self, a: Symbol) -> Self {
        let mut h = self.clone();
        h.secrets.push(a);
        h
    }

    fn with_observable(&self, b: Symbol) -> Self {
        let mut h = self.clone();
        h.observables.push(b);
        h
    }
}

/// One row map per time step; index `t - 1`.
pub type RowFamily = Vec<BTreeMap<History, Row>>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeedbackChannel {
    pub horizon: usize,
    /// Secret alphabet A.
    pub secrets: Vec<String>,
    /// Observable alphabet B.
    pub observables: Vec<String>,
    /// Index of the secret placeholder in A, if the alphabet has one.
    pub secret_placeholder: Option<Symbol>,
    /// p(β_t | α^t, β^{t-1}), keyed by `(α^t, β^{t-1})`.
    pub kernels: RowFamily,
    /// p(α_t | α^{t-1}, β^{t-1}), keyed by `(α^{t-1}, β^{t-1})`.
    pub inputs: Option<RowFamily>,
    /// Secrets available at each input history, keyed like `inputs`.
    pub choices: Vec<BTreeMap<History, Vec<Symbol>>>,
    /// Rows are allowed to miss total mass 1.
    pub lenient: bool,
}

impl FeedbackChannel {
    /// Builds the channel of a normalized model.
    ///
    /// `horizon` defaults to half the tree depth. Leaves above depth 2T are
    /// continued with placeholder steps of probability 1. Input rows are
    /// filled when every state has at most one distribution.
    pub fn from_model(model: &Iihs, horizon: Option<usize>) -> Result<Self> {
        let report = model.validate(true);
        if let Some(v) = report.violations.iter().find(|v| !v.tolerated) {
            return Err(Error::ModelNotNormalized(v.to_string()));
        }
        let horizon = match horizon {
            Some(0) => return Err(Error::HorizonZero),
            Some(t) => t,
            None => model.natural_horizon()?,
        };
        let fully_prob = (0..model.n_states()).all(|s| model.distributions(s).len() <= 1);
        let secrets = model
            .secret_labels()
            .map(|l| model.label_name(l).to_string())
            .collect();
        let observables = model
            .observable_labels()
            .map(|l| model.label_name(l).to_string())
            .collect();
        let mut ex = Extract {
            m: model,
            offset: model.secret_labels().len(),
            horizon,
            fully_prob,
            cap: limits::max_items(),
            rows: 0,
            kernels: vec![BTreeMap::new(); horizon],
            inputs: vec![BTreeMap::new(); horizon],
            choices: vec![BTreeMap::new(); horizon],
        };
        ex.secret_level(Some(model.initial()), 1, History::default())?;
        Ok(FeedbackChannel {
            horizon,
            secrets,
            observables,
            secret_placeholder: Some(model.secret_placeholder()),
            kernels: ex.kernels,
            inputs: fully_prob.then_some(ex.inputs),
            choices: ex.choices,
            lenient: model.lenient(),
        })
    }

    /// A memoryless channel used `horizon` times with every secret available
    /// at every step. No input distribution is attached.
    pub fn memoryless(
        secrets: Vec<String>,
        observables: Vec<String>,
        matrix: &[Row],
        horizon: usize,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::HorizonZero);
        }
        check_rows(matrix, observables.len())?;
        let na = secrets.len();
        let nb = observables.len();
        let mut kernels = vec![BTreeMap::new(); horizon];
        let mut choices = vec![BTreeMap::new(); horizon];
        let cap = limits::max_items();
        for t in 1..=horizon {
            for h in all_histories(na, nb, t - 1, t - 1, cap)? {
                choices[t - 1].insert(h.clone(), (0..na).collect());
                for a in 0..na {
                    let k = h.with_secret(a);
                    kernels[t - 1].insert(k, matrix[a].clone());
                }
            }
        }
        Ok(FeedbackChannel {
            horizon,
            secrets,
            observables,
            secret_placeholder: None,
            kernels,
            inputs: None,
            choices,
            lenient: false,
        })
    }

    /// Drops the input rows.
    pub fn kernels_only(mut self) -> Self {
        self.inputs = None;
        self
    }

    pub fn kernel(&self, h: &History) -> Option<&Row> {
        self.kernels.get(h.secrets.len().checked_sub(1)?)?.get(h)
    }

    pub fn input(&self, h: &History) -> Option<&Row> {
        self.inputs.as_ref()?.get(h.secrets.len())?.get(h)
    }

    pub fn secret_name(&self, a: Symbol) -> &str {
        &self.secrets[a]
    }

    pub fn observable_name(&self, b: Symbol) -> &str {
        &self.observables[b]
    }

    /// Smallest positive kernel entry over every row.
    pub fn min_positive_kernel(&self) -> Option<f64> {
        self.kernels
            .iter()
            .flat_map(|m| m.values())
            .flatten()
            .copied()
            .filter(|&p| p > 0.0)
            .min_by(f64::total_cmp)
    }
}

/// Kernels of a normalized model (any mode).
pub fn kernels_of(model: &Iihs) -> Result<FeedbackChannel> {
    Ok(FeedbackChannel::from_model(model, None)?.kernels_only())
}

/// Kernels and input distributions of a normalized fully probabilistic model.
pub fn inputs_of(model: &Iihs) -> Result<FeedbackChannel> {
    let ch = FeedbackChannel::from_model(model, None)?;
    if ch.inputs.is_none() {
        return Err(Error::NotFullyProbabilistic);
    }
    Ok(ch)
}

fn check_rows(rows: &[Row], width: usize) -> Result<()> {
    for (i, r) in rows.iter().enumerate() {
        let s: f64 = r.iter().sum();
        if r.len() != width || r.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (s - 1.0).abs() > 1e-9
        {
            return Err(Error::NonStochasticKernel(format!("row {i} sums to {s}")));
        }
    }
    Ok(())
}

/// Every history with `ns` secrets and `nb` observables, in lexicographic order.
fn all_histories(na: usize, nbsym: usize, ns: usize, nb: usize, cap: u64) -> Result<Vec<History>> {
    let count = limits::checked_pow(na as u64, ns as u64)
        .and_then(|x| limits::checked_pow(nbsym as u64, nb as u64).and_then(|y| x.checked_mul(y)))
        .unwrap_or(u64::MAX);
    limits::guard("histories", count, cap)?;
    let mut out = Vec::with_capacity(count as usize);
    for s in sequences(na, ns) {
        for o in sequences(nbsym, nb) {
            out.push(History::new(s.clone(), o));
        }
    }
    Ok(out)
}

/// All sequences of length `len` over `0..n`, first position most significant.
pub fn sequences(n: usize, len: usize) -> Vec<Vec<Symbol>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * n);
        for s in &out {
            for x in 0..n {
                let mut v = s.clone();
                v.push(x);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

struct Extract<'a> {
    m: &'a Iihs,
    offset: usize,
    horizon: usize,
    fully_prob: bool,
    cap: u64,
    rows: u64,
    kernels: RowFamily,
    inputs: RowFamily,
    choices: Vec<BTreeMap<History, Vec<Symbol>>>,
}

impl Extract<'_> {
    fn live(&self, s: Option<StateId>) -> Option<StateId> {
        s.filter(|&s| self.m.state_kind(s) != StateKind::Terminal)
    }

    fn bump(&mut self) -> Result<()> {
        self.rows += 1;
        limits::guard("channel histories", self.rows, self.cap)
    }

    /// `h` is `(α^{t-1}, β^{t-1})`.
    fn secret_level(&mut self, s: Option<StateId>, t: usize, h: History) -> Result<()> {
        if t > self.horizon {
            return Ok(());
        }
        self.bump()?;
        let m = self.m;
        let na = m.secret_labels().len();
        let Some(s) = self.live(s) else {
            let ph = m.secret_placeholder();
            self.choices[t - 1].insert(h.clone(), vec![ph]);
            self.inputs[t - 1].insert(h.clone(), dirac(na, ph));
            return self.observable_level(None, t, h.with_secret(ph));
        };
        let mut labels = Vec::new();
        if self.fully_prob {
            let mut row = vec![0.0; na];
            for b in &m.distributions(s)[0] {
                row[b.label] += b.prob;
                if !labels.contains(&b.label) {
                    labels.push(b.label);
                }
            }
            self.inputs[t - 1].insert(h.clone(), row);
        } else {
            for d in m.distributions(s) {
                if let Some(b) = d.iter().find(|b| b.prob > 0.0) {
                    if !labels.contains(&b.label) {
                        labels.push(b.label);
                    }
                }
            }
        }
        self.choices[t - 1].insert(h.clone(), labels.clone());
        for a in labels {
            let next = m.step(s, a);
            self.observable_level(next, t, h.with_secret(a))?;
        }
        Ok(())
    }

    /// `h` is `(α^t, β^{t-1})`.
    fn observable_level(&mut self, s: Option<StateId>, t: usize, h: History) -> Result<()> {
        self.bump()?;
        let m = self.m;
        let nb = m.observable_labels().len();
        let (row, labels) = match self.live(s) {
            Some(s) => {
                let mut row = vec![0.0; nb];
                let mut labels = Vec::new();
                for b in &m.distributions(s)[0] {
                    row[b.label - self.offset] += b.prob;
                    if !labels.contains(&b.label) {
                        labels.push(b.label);
                    }
                }
                (row, labels)
            }
            None => {
                let ph = m.observable_placeholder();
                (dirac(nb, ph - self.offset), vec![ph])
            }
        };
        self.kernels[t - 1].insert(h.clone(), row);
        if t == self.horizon {
            return Ok(());
        }
        for l in labels {
            let next = s.and_then(|s| m.step(s, l));
            self.secret_level(next, t + 1, h.with_observable(l - self.offset))?;
        }
        Ok(())
    }
}

fn dirac(n: usize, at: usize) -> Row {
    let mut r = vec![0.0; n];
    r[at] = 1.0;
    r
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub secrets: Vec<Symbol>,
    pub observables: Vec<Symbol>,
    pub prob: f64,
}

/// Joint distribution over complete trajectories `(α^T, β^T)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryMeasure {
    pub horizon: usize,
    pub secrets: Vec<String>,
    pub observables: Vec<String>,
    pub entries: Vec<Trajectory>,
    /// Total mass may differ from 1.
    pub lenient: bool,
}

impl TrajectoryMeasure {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.prob).sum()
    }

    /// Marginal p(α^t, β^t) of every length-`t` prefix.
    pub fn prefix_marginal(&self, t: usize) -> BTreeMap<History, f64> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            let h = History::new(e.secrets[..t].to_vec(), e.observables[..t].to_vec());
            *out.entry(h).or_insert(0.0) += e.prob;
        }
        out
    }
}

/// p(α^T, β^T) by the chain rule over the channel's own inputs.
pub fn joint_measure(ch: &FeedbackChannel) -> Result<TrajectoryMeasure> {
    let inputs = ch.inputs.as_ref().ok_or(Error::NotFullyProbabilistic)?;
    joint_measure_with(ch, inputs)
}

/// p(α^T, β^T) by the chain rule with an explicit input family.
/// Zero-probability trajectories are omitted.
pub fn joint_measure_with(ch: &FeedbackChannel, inputs: &RowFamily) -> Result<TrajectoryMeasure> {
    let cap = limits::max_items();
    let mut entries = Vec::new();
    let mut stack = vec![(History::default(), 1.0f64)];
    while let Some((h, p)) = stack.pop() {
        let t = h.secrets.len() + 1;
        if t > ch.horizon {
            entries.push(Trajectory {
                secrets: h.secrets,
                observables: h.observables,
                prob: p,
            });
            limits::guard("trajectories", entries.len() as u64, cap)?;
            continue;
        }
        let row = inputs
            .get(t - 1)
            .and_then(|m| m.get(&h))
            .ok_or_else(|| Error::MissingKernelRow(describe(ch, &h)))?;
        for a in (0..row.len()).rev() {
            if row[a] <= 0.0 {
                continue;
            }
            let ha = h.with_secret(a);
            let k = ch
                .kernel(&ha)
                .ok_or_else(|| Error::MissingKernelRow(describe(ch, &ha)))?;
            for b in (0..k.len()).rev() {
                if k[b] > 0.0 {
                    stack.push((ha.with_observable(b), p * row[a] * k[b]));
                }
            }
        }
    }
    entries.sort_by(|x, y| (&x.secrets, &x.observables).cmp(&(&y.secrets, &y.observables)));
    let m = TrajectoryMeasure {
        horizon: ch.horizon,
        secrets: ch.secrets.clone(),
        observables: ch.observables.clone(),
        entries,
        lenient: ch.lenient,
    };
    if !m.lenient && (m.total() - 1.0).abs() > 1e-9 {
        return Err(Error::NotADistribution(m.total()));
    }
    Ok(m)
}

/// Human-readable rendering of a history, e.g. `(C,S | inc1)`.
pub fn describe(ch: &FeedbackChannel, h: &History) -> String {
    let a: Vec<&str> = h.secrets.iter().map(|&x| ch.secret_name(x)).collect();
    let b: Vec<&str> = h.observables.iter().map(|&x| ch.observable_name(x)).collect();
    format!("({} | {})", a.join(","), b.join(","))
}

/// Conditional matrix p(β | α) and prior p(α) of a model read as a
/// classical channel: complete traces with placeholders removed, secret
/// traces as rows and observable traces as columns.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalView {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub matrix: Vec<Row>,
    pub input: Row,
}

pub fn classical_view(model: &Iihs) -> Result<ClassicalView> {
    let len = model.depth().ok_or(Error::CyclicModel)?;
    let mut joint: BTreeMap<(Vec<usize>, Vec<usize>), f64> = BTreeMap::new();
    for p in model.complete_paths(len)? {
        let t = p.trace(model);
        let strip = |v: Vec<usize>| -> Vec<usize> {
            v.into_iter().filter(|&l| !model.label(l).placeholder).collect()
        };
        *joint
            .entry((strip(t.secrets), strip(t.observables)))
            .or_insert(0.0) += p.prob;
    }
    let mut rows: Vec<Vec<usize>> = joint.keys().map(|k| k.0.clone()).collect();
    rows.dedup();
    let mut cols: Vec<Vec<usize>> = joint.keys().map(|k| k.1.clone()).collect();
    cols.sort();
    cols.dedup();
    let ri: HashMap<&Vec<usize>, usize> = rows.iter().enumerate().map(|(i, r)| (r, i)).collect();
    let ci: HashMap<&Vec<usize>, usize> = cols.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut matrix = vec![vec![0.0; cols.len()]; rows.len()];
    for ((a, b), p) in &joint {
        matrix[ri[a]][ci[b]] += p;
    }
    let input: Row = matrix.iter().map(|r| r.iter().sum()).collect();
    for (r, &pa) in matrix.iter_mut().zip(&input) {
        if pa > 0.0 {
            r.iter_mut().for_each(|x| *x /= pa);
        }
    }
    let name = |v: &Vec<usize>| {
        if v.is_empty() {
            "ε".to_string()
        } else {
            v.iter().map(|&l| model.label_name(l)).collect::<Vec<_>>().join(",")
        }
    };
    Ok(ClassicalView {
        rows: rows.iter().map(name).collect(),
        columns: cols.iter().map(name).collect(),
        matrix,
        input,
    })
}

// ---------------------------------------------------------------------------
// Reaction functions and reactors

/// F_t : B^{t-1} → A, tabulated over observable histories in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ReactionFunction {
    pub t: usize,
    pub table: Vec<Symbol>,
}

impl ReactionFunction {
    /// Value at the observable history `beta` (length `t - 1`).
    pub fn apply(&self, beta: &[Symbol], nb: usize) -> Symbol {
        self.table[rank(beta, nb)]
    }

    /// Position of this function in the enumeration order.
    pub fn index(&self, na: usize) -> usize {
        rank(&self.table, na)
    }
}

/// Lexicographic rank of a sequence over `0..n`, first symbol most significant.
pub fn rank(seq: &[Symbol], n: usize) -> usize {
    seq.iter().fold(0, |acc, &x| acc * n + x)
}

fn count_functions(t: usize, na: usize, nb: usize) -> Option<u64> {
    let domain = limits::checked_pow(nb as u64, (t - 1) as u64)?;
    limits::checked_pow(na as u64, domain)
}

/// All |A|^(|B|^(t-1)) reaction functions at time `t`, in lexicographic order.
pub fn enumerate_reaction_functions(t: usize, na: usize, nb: usize) -> Result<Vec<ReactionFunction>> {
    if t == 0 {
        return Err(Error::HorizonZero);
    }
    let count = count_functions(t, na, nb).unwrap_or(u64::MAX);
    limits::guard("reaction functions", count, limits::max_items())?;
    let domain = nb.pow((t - 1) as u32);
    Ok(sequences(na, domain)
        .into_iter()
        .map(|table| ReactionFunction { t, table })
        .collect())
}

/// Distribution over reaction-function sequences, as conditionals
/// p(F_t | F^{t-1}). Only positive-probability functions are stored.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reactor {
    pub horizon: usize,
    pub n_secrets: usize,
    pub n_observables: usize,
    /// Index `t - 1`; key is the prefix F^{t-1} as function indices.
    pub conditionals: Vec<BTreeMap<Vec<usize>, Vec<(ReactionFunction, f64)>>>,
}

impl Reactor {
    pub fn conditional(&self, prefix: &[usize], f: &ReactionFunction) -> f64 {
        self.conditionals[f.t - 1]
            .get(prefix)
            .and_then(|v| v.iter().find(|(g, _)| g == f))
            .map_or(0.0, |(_, p)| *p)
    }

    /// Every F^T with positive probability, with that probability.
    pub fn sequences(&self) -> Vec<(Vec<ReactionFunction>, f64)> {
        let mut out = vec![(Vec::new(), 1.0)];
        for t in 1..=self.horizon {
            let mut next = Vec::new();
            for (seq, p) in out {
                let key: Vec<usize> = seq
                    .iter()
                    .map(|f: &ReactionFunction| f.index(self.n_secrets))
                    .collect();
                if let Some(cands) = self.conditionals[t - 1].get(&key) {
                    for (f, q) in cands {
                        if *q > 0.0 {
                            let mut s = seq.clone();
                            s.push(f.clone());
                            next.push((s, p * q));
                        }
                    }
                }
            }
            out = next;
        }
        out
    }
}

/// α^{t-1} generated by F^{t-1} along β^{t-1}.
fn secrets_along(fs: &[ReactionFunction], beta: &[Symbol], nb: usize) -> Vec<Symbol> {
    fs.iter()
        .enumerate()
        .map(|(i, f)| f.apply(&beta[..i], nb))
        .collect()
}

/// The reactor compatible with the channel's input distributions.
///
/// p(F_t | F^{t-1}) = Π over β^{t-1} of p(F_t(β^{t-1}) | α^{t-1}, β^{t-1}) with
/// α^{t-1} read off F^{t-1}. Histories the channel never reaches have no
/// input row; they are treated as a point mass on the secret placeholder
/// (the first secret when the alphabet has none).
pub fn reactor_of(ch: &FeedbackChannel) -> Result<Reactor> {
    let inputs = ch.inputs.as_ref().ok_or(Error::NotFullyProbabilistic)?;
    let na = ch.secrets.len();
    let nb = ch.observables.len();
    let fallback = dirac(na, ch.secret_placeholder.unwrap_or(0));
    let cap = limits::max_items();
    let mut conditionals = Vec::with_capacity(ch.horizon);
    let mut prefixes: Vec<Vec<ReactionFunction>> = vec![Vec::new()];
    let mut stored: u64 = 0;

    for t in 1..=ch.horizon {
        let betas = sequences(nb, t - 1);
        let mut level = BTreeMap::new();
        let mut next_prefixes = Vec::new();
        for prefix in &prefixes {
            let mut rows = Vec::with_capacity(betas.len());
            for beta in &betas {
                let h = History::new(secrets_along(prefix, beta, nb), beta.clone());
                rows.push(inputs[t - 1].get(&h).unwrap_or(&fallback));
            }
            // Product distribution over tables: one independent choice per β^{t-1}.
            let mut dist: Vec<(Vec<Symbol>, f64)> = vec![(Vec::new(), 1.0)];
            for row in &rows {
                let mut next = Vec::new();
                for (table, p) in &dist {
                    for (a, &q) in row.iter().enumerate() {
                        if q > 0.0 {
                            let mut tb = table.clone();
                            tb.push(a);
                            next.push((tb, p * q));
                        }
                    }
                }
                dist = next;
                limits::guard("reactor entries", stored + dist.len() as u64, cap)?;
            }
            stored += dist.len() as u64;
            let key: Vec<usize> = prefix.iter().map(|f| f.index(na)).collect();
            let mut fs: Vec<(ReactionFunction, f64)> = dist
                .into_iter()
                .map(|(table, p)| (ReactionFunction { t, table }, p))
                .collect();
            fs.sort_by(|x, y| x.0.cmp(&y.0));
            for (f, _) in &fs {
                let mut p = prefix.clone();
                p.push(f.clone());
                next_prefixes.push(p);
            }
            level.insert(key, fs);
        }
        conditionals.push(level);
        prefixes = next_prefixes;
    }
    Ok(Reactor {
        horizon: ch.horizon,
        n_secrets: na,
        n_observables: nb,
        conditionals,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    /// max over t and (α^t, β^t) of |Q(α^t, β^t) − p(α^t, β^t)|.
    pub max_deviation: f64,
    /// Number of F^T sequences with positive probability.
    pub sequences: usize,
    /// Number of (F^T, α^T, β^T) triples with positive Q.
    pub triples: usize,
}

/// Builds the measure Q(F^T, α^T, β^T) induced by a reactor over the
/// channel's kernels and compares its (α^t, β^t) marginals with the chain-rule
/// measure of the channel.
pub fn check_consistency(ch: &FeedbackChannel, r: &Reactor) -> Result<ConsistencyReport> {
    let p = joint_measure(ch)?;
    let nb = ch.observables.len();
    let cap = limits::max_items();
    let betas = sequences(nb, ch.horizon);
    let mut q_full: HashMap<History, f64> = HashMap::new();
    let seqs = r.sequences();
    let mut triples = 0usize;
    for (fs, pf) in &seqs {
        for beta in &betas {
            let alpha = secrets_along(fs, beta, nb);
            let mut q = *pf;
            for t in 1..=ch.horizon {
                let h = History::new(alpha[..t].to_vec(), beta[..t - 1].to_vec());
                q *= match ch.kernel(&h) {
                    Some(k) => k[beta[t - 1]],
                    None if q == 0.0 => 0.0,
                    None => return Err(Error::MissingKernelRow(describe(ch, &h))),
                };
                if q == 0.0 {
                    break;
                }
            }
            if q > 0.0 {
                triples += 1;
                limits::guard("consistency triples", triples as u64, cap)?;
                *q_full.entry(History::new(alpha, beta.clone())).or_insert(0.0) += q;
            }
        }
    }
    let mut q_marg: Vec<HashMap<History, f64>> = vec![HashMap::new(); ch.horizon + 1];
    for (h, q) in &q_full {
        for (t, marg) in q_marg.iter_mut().enumerate().skip(1) {
            let key = History::new(h.secrets[..t].to_vec(), h.observables[..t].to_vec());
            *marg.entry(key).or_insert(0.0) += q;
        }
    }
    let mut max_dev: f64 = 0.0;
    for t in 1..=ch.horizon {
        let pm = p.prefix_marginal(t);
        for (h, v) in &pm {
            let w = q_marg[t].get(h).copied().unwrap_or(0.0);
            max_dev = max_dev.max((v - w).abs());
        }
        for (h, w) in &q_marg[t] {
            if !pm.contains_key(h) {
                max_dev = max_dev.max(w.abs());
            }
        }
    }
    Ok(ConsistencyReport {
        max_deviation: max_dev,
        sequences: seqs.len(),
        triples,
    })
}

/// Both sides of the function-space identity
/// Σ_{f : X → Y, f(x̃) = ỹ} Π_x p(x, f(x)) = p(x̃, ỹ).
pub fn function_space_identity(p: &[Row], x: usize, y: usize) -> Result<(f64, f64)> {
    let nx = p.len();
    let ny = p.first().map_or(0, |r| r.len());
    if x >= nx || y >= ny {
        return Err(Error::InvalidArgument("point outside the domain".into()));
    }
    let count = limits::checked_pow(ny as u64, nx as u64).unwrap_or(u64::MAX);
    limits::guard("functions", count, limits::max_items())?;
    let mut lhs = 0.0;
    for f in sequences(ny, nx) {
        if f[x] == y {
            lhs += f.iter().enumerate().map(|(i, &v)| p[i][v]).product::<f64>();
        }
    }
    Ok((lhs, p[x][y]))
}
