//! Bundled worked examples with their expected values.
//!
//! Each bundle is a model file plus a TOML list of `[[expect]]` entries
//! (`metric`, `value`, `tol`, `source`). Both files live in `corpus/` at the
//! repository root and are embedded at compile time.
//!
//! Metric names understood by [`evaluate`]:
//!
//! | name | value |
//! |---|---|
//! | `h_a`, `h_r`, `h_a_given_b`, `i_mutual`, `i_forward`, `i_backward` | leakage report fields |
//! | `i_min` | min-entropy leakage |
//! | `matrix.i.j`, `input.i` | classical view of the model |
//! | `kernel:α,..\|β,..:b` | p(b \| α^t, β^{t-1}) by label names |
//! | `input:α,..\|β,..:a` | p(a \| α^{t-1}, β^{t-1}) by label names |
//! | `reaction_functions.t` | number of reaction functions at step t |
//! | `reactor:i>j` | p(F_2 = j \| F_1 = i) |
//! | `consistency` | reactor consistency deviation |
//! | `capacity` | directed capacity per use |
//! | `classical_capacity` | Blahut–Arimoto capacity of the one-step kernel matrix |
//! | `distance:id` | bisimulation distance to another bundle's model |
//! | `total` | total mass of the trajectory measure |
//!
//! Models that are not normalized (the one-shot website examples) evaluate
//! leakage metrics on their classical view instead of the channel.

use serde::{Deserialize, Serialize};

use crate::capacity::{blahut_arimoto, directed_capacity, CapacityOptions};
use crate::channel::{
    check_consistency, classical_view, enumerate_reaction_functions, joint_measure, reactor_of,
    ClassicalView, FeedbackChannel, History, TrajectoryMeasure,
};
use crate::infotheory::{directed_information, measure_from_matrix, min_entropy_leakage, LeakageReport};
use crate::metric::bisim_distance;
use crate::model::Iihs;
use crate::{format, Error, Result};

macro_rules! bundle {
    ($id:literal) => {
        (
            $id,
            include_str!(concat!("../../../corpus/", $id, ".iihs")),
            include_str!(concat!("../../../corpus/", $id, ".toml")),
        )
    };
}

const BUNDLES: &[(&str, &str, &str)] = &[
    bundle!("cocaine-a"),
    bundle!("cocaine-b"),
    bundle!("cocaine-c"),
    bundle!("cocaine-nd"),
    bundle!("erasure"),
    bundle!("noncont-s"),
    bundle!("noncont-t"),
    bundle!("small-feedback"),
    bundle!("website-a"),
    bundle!("website-b"),
    bundle!("website-extended"),
];

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    /// Printed in the reference material for the example.
    Reference,
    /// Computed by an independent oracle in the test suite.
    Oracle,
    /// Follows from a short hand calculation.
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
enum RawValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl RawValue {
    fn to_f64(&self) -> Result<f64> {
        match self {
            RawValue::Int(i) => Ok(*i as f64),
            RawValue::Float(f) => Ok(*f),
            RawValue::Text(s) => format::parse_prob(s)
                .or_else(|_| s.parse::<f64>().map_err(|e| Error::InvalidArgument(e.to_string()))),
        }
    }
}

#[derive(Deserialize)]
struct RawBundle {
    id: String,
    model: String,
    note: String,
    #[serde(default)]
    expect: Vec<RawExpect>,
}

#[derive(Deserialize)]
struct RawExpect {
    metric: String,
    value: RawValue,
    tol: f64,
    source: Source,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Expectation {
    pub metric: String,
    pub value: f64,
    pub tol: f64,
    pub source: Source,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExampleBundle {
    pub id: String,
    pub model_file: String,
    pub note: String,
    pub expected: Vec<Expectation>,
    #[serde(skip)]
    pub source_text: &'static str,
}

/// Ids of every bundled example, sorted.
pub fn list() -> Vec<&'static str> {
    BUNDLES.iter().map(|b| b.0).collect()
}

pub fn bundle(id: &str) -> Result<ExampleBundle> {
    let &(_, src, meta) = BUNDLES
        .iter()
        .find(|b| b.0 == id)
        .ok_or_else(|| Error::UnknownExample(id.to_string()))?;
    let raw: RawBundle =
        toml::from_str(meta).map_err(|e| Error::InvalidArgument(format!("{id}.toml: {e}")))?;
    let expected = raw
        .expect
        .into_iter()
        .map(|e| {
            Ok(Expectation {
                value: e.value.to_f64()?,
                metric: e.metric,
                tol: e.tol,
                source: e.source,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ExampleBundle {
        id: raw.id,
        model_file: raw.model,
        note: raw.note,
        expected,
        source_text: src,
    })
}

pub fn load_example(id: &str) -> Result<(Iihs, ExampleBundle)> {
    let b = bundle(id)?;
    Ok((format::parse(b.source_text)?, b))
}

/// Lazily computed analyses of one model.
pub struct Evaluator<'a> {
    model: &'a Iihs,
    capacity_opts: CapacityOptions,
    channel: Option<FeedbackChannel>,
    measure: Option<TrajectoryMeasure>,
    leakage: Option<LeakageReport>,
    view: Option<ClassicalView>,
    capacity: Option<f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(model: &'a Iihs) -> Self {
        Evaluator {
            model,
            capacity_opts: CapacityOptions::default(),
            channel: None,
            measure: None,
            leakage: None,
            view: None,
            capacity: None,
        }
    }

    pub fn with_capacity_options(mut self, opts: CapacityOptions) -> Self {
        self.capacity_opts = opts;
        self
    }

    fn normalized(&self) -> bool {
        self.model.validate(true).is_ok()
    }

    fn channel(&mut self) -> Result<&FeedbackChannel> {
        if self.channel.is_none() {
            self.channel = Some(FeedbackChannel::from_model(self.model, None)?);
        }
        Ok(self.channel.as_ref().expect("just set"))
    }

    fn view(&mut self) -> Result<&ClassicalView> {
        if self.view.is_none() {
            self.view = Some(classical_view(self.model)?);
        }
        Ok(self.view.as_ref().expect("just set"))
    }

    fn measure(&mut self) -> Result<&TrajectoryMeasure> {
        if self.measure.is_none() {
            let m = if self.normalized() {
                joint_measure(self.channel()?)?
            } else {
                let v = self.view()?;
                measure_from_matrix(&v.input, &v.matrix)
            };
            self.measure = Some(m);
        }
        Ok(self.measure.as_ref().expect("just set"))
    }

    pub fn leakage(&mut self) -> Result<&LeakageReport> {
        if self.leakage.is_none() {
            let r = directed_information(self.measure()?)?;
            self.leakage = Some(r);
        }
        Ok(self.leakage.as_ref().expect("just set"))
    }

    fn capacity(&mut self) -> Result<f64> {
        if self.capacity.is_none() {
            let opts = self.capacity_opts;
            let ch = self.channel()?.clone().kernels_only();
            self.capacity = Some(directed_capacity(&ch, &opts)?.value);
        }
        Ok(self.capacity.expect("just set"))
    }

    fn history(&mut self, spec: &str) -> Result<History> {
        let ch = self.channel()?;
        let (a, b) = spec
            .split_once('|')
            .ok_or_else(|| Error::InvalidArgument(format!("history {spec:?} lacks '|'")))?;
        let names = |s: &str| -> Vec<String> {
            s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
        };
        let find = |alpha: &[String], n: &str| {
            alpha
                .iter()
                .position(|x| x == n)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown label {n:?}")))
        };
        let secrets = names(a).iter().map(|n| find(&ch.secrets, n)).collect::<Result<_>>()?;
        let observables = names(b)
            .iter()
            .map(|n| find(&ch.observables, n))
            .collect::<Result<_>>()?;
        Ok(History::new(secrets, observables))
    }

    fn row_entry(&mut self, rest: &str, kernel: bool) -> Result<f64> {
        let (h, sym) = rest
            .rsplit_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("{rest:?} lacks ':symbol'")))?;
        let h = self.history(h)?;
        let ch = self.channel()?;
        let (row, alpha) = if kernel {
            (ch.kernel(&h), &ch.observables)
        } else {
            (ch.input(&h), &ch.secrets)
        };
        let row = row.ok_or_else(|| Error::MissingKernelRow(crate::channel::describe(ch, &h)))?;
        let k = alpha
            .iter()
            .position(|x| x == sym)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown label {sym:?}")))?;
        Ok(row[k])
    }

    pub fn evaluate(&mut self, metric: &str) -> Result<f64> {
        let bad = || Error::InvalidArgument(format!("unknown metric {metric:?}"));
        let idx = |s: &str| s.parse::<usize>().map_err(|_| bad());
        match metric {
            "h_a" => return Ok(self.leakage()?.h_a),
            "h_r" => return Ok(self.leakage()?.h_r),
            "h_a_given_b" => return Ok(self.leakage()?.h_a_given_b),
            "i_mutual" => return Ok(self.leakage()?.i_mutual),
            "i_forward" => return Ok(self.leakage()?.i_forward),
            "i_backward" => return Ok(self.leakage()?.i_backward),
            "i_min" => return min_entropy_leakage(self.measure()?),
            "total" => return Ok(self.measure()?.total()),
            "capacity" => return self.capacity(),
            "consistency" => {
                let ch = self.channel()?;
                let r = reactor_of(ch)?;
                return Ok(check_consistency(ch, &r)?.max_deviation);
            }
            "classical_capacity" => {
                let ch = self.channel()?;
                let matrix: Vec<_> = ch.kernels[0].values().cloned().collect();
                return Ok(blahut_arimoto(&matrix, 1e-12, 1_000_000)?.capacity);
            }
            _ => {}
        }
        if let Some(rest) = metric.strip_prefix("matrix.") {
            let (i, j) = rest.split_once('.').ok_or_else(bad)?;
            let (i, j) = (idx(i)?, idx(j)?);
            let v = self.view()?;
            return v.matrix.get(i).and_then(|r| r.get(j)).copied().ok_or_else(bad);
        }
        if let Some(rest) = metric.strip_prefix("input.") {
            let i = idx(rest)?;
            return self.view()?.input.get(i).copied().ok_or_else(bad);
        }
        if let Some(rest) = metric.strip_prefix("reaction_functions.") {
            let t = idx(rest)?;
            let ch = self.channel()?;
            return Ok(enumerate_reaction_functions(t, ch.secrets.len(), ch.observables.len())?.len() as f64);
        }
        if let Some(rest) = metric.strip_prefix("reactor:") {
            let (i, j) = rest.split_once('>').ok_or_else(bad)?;
            let (i, j) = (idx(i)?, idx(j)?);
            let ch = self.channel()?;
            let fs = enumerate_reaction_functions(2, ch.secrets.len(), ch.observables.len())?;
            let f = fs.get(j).ok_or_else(bad)?;
            return Ok(reactor_of(ch)?.conditional(&[i], f));
        }
        if let Some(rest) = metric.strip_prefix("kernel:") {
            return self.row_entry(rest, true);
        }
        if let Some(rest) = metric.strip_prefix("input:") {
            return self.row_entry(rest, false);
        }
        if let Some(other) = metric.strip_prefix("distance:") {
            let (o, _) = load_example(other)?;
            let depth = self.model.depth().max(o.depth()).ok_or(Error::CyclicModel)?;
            return Ok(bisim_distance(self.model, &o, depth + 2, 0.0)?.distance);
        }
        Err(bad())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub metric: String,
    pub expected: f64,
    pub actual: Option<f64>,
    pub tol: f64,
    pub source: Source,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExampleRun {
    pub id: String,
    pub note: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Evaluates every expectation of a bundle.
pub fn run_example(id: &str) -> Result<ExampleRun> {
    let (model, b) = load_example(id)?;
    let mut ev = Evaluator::new(&model);
    let checks: Vec<Check> = b
        .expected
        .iter()
        .map(|e| {
            let r = ev.evaluate(&e.metric);
            let (actual, error) = match r {
                Ok(v) => (Some(v), None),
                Err(err) => (None, Some(err.to_string())),
            };
            Check {
                metric: e.metric.clone(),
                expected: e.value,
                pass: actual.is_some_and(|a| (a - e.value).abs() <= e.tol),
                actual,
                tol: e.tol,
                source: e.source,
                error,
            }
        })
        .collect();
    Ok(ExampleRun {
        id: b.id,
        note: b.note,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundle_parses_and_names_match() {
        for id in list() {
            let (m, b) = load_example(id).unwrap();
            assert_eq!(b.id, id);
            assert_eq!(b.model_file, format!("{id}.iihs"));
            assert!(!b.expected.is_empty(), "{id}");
            assert!(m.n_states() > 1);
        }
    }

    #[test]
    fn unknown_example() {
        assert!(matches!(load_example("nope"), Err(Error::UnknownExample(_))));
    }

    #[test]
    fn fractions_in_expectations() {
        let b = bundle("website-b").unwrap();
        let e = b.expected.iter().find(|e| e.metric == "matrix.1.0").unwrap();
        assert_eq!(e.value, 2.0 / 7.0);
    }

    #[test]
    fn unknown_metric_is_an_error() {
        let (m, _) = load_example("website-a").unwrap();
        assert!(Evaluator::new(&m).evaluate("bogus").is_err());
    }
}
