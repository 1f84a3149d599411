//! Browser bindings: leakage of a pasted model, the distance between two
//! models, and a stop-and-wait run over the erasure channel.
//!
//! Every export returns a JSON string. Failures come back as `{"error": ...}`
//! so the page never has to catch exceptions.

use iihs_core::channel::{classical_view, joint_measure, FeedbackChannel};
use iihs_core::feedbacksim::{self, ErasureChannelSpec, Eta};
use iihs_core::infotheory::{directed_information, measure_from_matrix, min_entropy_leakage};
use iihs_core::metric::bisim_distance;
use iihs_core::{corpus, format};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

type Res = Result<Value, String>;

fn wrap(r: Res) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn leakage_inner(src: &str) -> Res {
    let m = format::parse(src).map_err(err)?;
    let measure = if m.validate(true).is_ok() {
        joint_measure(&FeedbackChannel::from_model(&m, None).map_err(err)?).map_err(err)?
    } else {
        let v = classical_view(&m).map_err(err)?;
        measure_from_matrix(&v.input, &v.matrix)
    };
    let mut r = directed_information(&measure).map_err(err)?;
    r.i_min = Some(min_entropy_leakage(&measure).map_err(err)?);
    Ok(json!({ "horizon": measure.horizon, "report": r }))
}

/// Entropies, mutual and directed information of a model in text form.
#[wasm_bindgen]
pub fn leakage(src: &str) -> String {
    wrap(leakage_inner(src))
}

fn distance_inner(a: &str, b: &str) -> Res {
    let a = format::parse(a).map_err(err)?;
    let b = format::parse(b).map_err(err)?;
    let r = bisim_distance(&a, &b, 200, 0.0).map_err(err)?;
    Ok(json!({ "distance": r.distance, "iterations": r.iterations }))
}

/// Bisimulation distance between the initial states of two models.
#[wasm_bindgen]
pub fn distance(a: &str, b: &str) -> String {
    wrap(distance_inner(a, b))
}

fn erasure_inner(message: &str, horizon: u32, p_ok: f64, seed: u64) -> Res {
    if !(0.0..=1.0).contains(&p_ok) {
        return Err(format!("delivery probability {p_ok} is outside [0, 1]"));
    }
    let bits = feedbacksim::parse_bits(message).map_err(err)?;
    let spec = ErasureChannelSpec::new(p_ok, Eta::Zero, horizon as usize).map_err(err)?;
    let tr = feedbacksim::simulate(&spec, &bits, seed, None).map_err(err)?;
    let word = |v: &[feedbacksim::Output]| v.iter().map(|o| o.to_string()).collect::<String>();
    let steps: Vec<Value> = tr
        .steps
        .iter()
        .map(|s| {
            json!({
                "t": s.t,
                "feedback": word(&s.feedback),
                "input": s.input,
                "output": s.output.to_string(),
            })
        })
        .collect();
    let decoded: String = tr.decoded.iter().map(|b| b.to_string()).collect();
    Ok(json!({ "steps": steps, "outputs": word(&tr.outputs), "decoded": decoded }))
}

/// Sends `message` (a 0/1 string) with retransmit-on-erasure for at most `horizon` uses.
#[wasm_bindgen]
pub fn erasure(message: &str, horizon: u32, p_ok: f64, seed: u64) -> String {
    wrap(erasure_inner(message, horizon, p_ok, seed))
}

/// Source text of a bundled example, or an empty string for unknown ids.
#[wasm_bindgen]
pub fn example_source(id: &str) -> String {
    corpus::bundle(id).map(|b| b.source_text.to_string()).unwrap_or_default()
}

/// Ids of the bundled examples as a JSON array.
#[wasm_bindgen]
pub fn example_ids() -> String {
    json!(corpus::list()).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn leakage_of_the_auction() {
        let v = parse(leakage(&example_source("cocaine-a")));
        let fwd = v["report"]["i_forward"].as_f64().unwrap();
        assert!((fwd - 0.1608).abs() < 5e-4, "{v}");
    }

    #[test]
    fn parse_errors_come_back_as_json() {
        let v = parse(leakage("not a model"));
        assert!(v["error"].is_string());
    }

    #[test]
    fn noncont_distance() {
        let v = parse(distance(&example_source("noncont-s"), &example_source("noncont-t")));
        assert!((v["distance"].as_f64().unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn erasure_is_seeded() {
        let a = erasure("0110", 20, 0.8, 5);
        assert_eq!(a, erasure("0110", 20, 0.8, 5));
        let v = parse(a);
        assert_eq!(v["decoded"], "0110");
        assert!(parse(erasure("01", 3, 2.0, 0))["error"].is_string());
    }

    #[test]
    fn ids_cover_the_corpus() {
        let v = parse(example_ids());
        assert_eq!(v.as_array().unwrap().len(), 11);
        assert!(example_source("nope").is_empty());
    }
}
