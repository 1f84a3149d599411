use std::fmt::Write;
use std::path::Path;

use anyhow::Context;
use iihs_core::capacity::{blahut_arimoto, directed_capacity, CapacityOptions};
use iihs_core::channel::{
    check_consistency, classical_view, joint_measure, reactor_of, FeedbackChannel, Reactor,
};
use iihs_core::corpus::{self, Source};
use iihs_core::feedbacksim::{self, ErasureChannelSpec, Eta};
use iihs_core::infotheory::{directed_information, measure_from_matrix, min_entropy_leakage};
use iihs_core::metric::{bisim_distance, continuity_experiment};
use iihs_core::normalize::{minimal_horizon, normalize, NormalizationOptions};
use iihs_core::{format, Iihs};
use serde_json::{json, Value};

use crate::render::{f4, family_json, family_text, history_text, pretty};
use crate::{Cli, Command, ErasureArgs, Failure};

pub struct Output {
    pub text: String,
    /// False when the command ran but found a failing diagnostic.
    pub ok: bool,
}

fn done(text: String) -> Result<Output, Failure> {
    Ok(Output { text, ok: true })
}

fn load(path: &Path) -> Result<Iihs, Failure> {
    let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format::parse(&src).with_context(|| format!("parsing {}", path.display()))?)
}

fn finite_in(name: &str, v: f64, lo: f64, hi: f64) -> Result<(), Failure> {
    if v.is_finite() && (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{name} must lie in [{lo}, {hi}], got {v}")))
    }
}

pub fn run(cli: &Cli) -> Result<Output, Failure> {
    let json = cli.json;
    match &cli.command {
        Command::Validate { model, normalized } => validate(model, *normalized, json),
        Command::Normalize {
            model,
            horizon,
            pad,
            output,
        } => {
            let m = load(model)?;
            let horizon = match horizon {
                Some(t) => *t as usize,
                None => minimal_horizon(&m)?,
            };
            let n = normalize(
                &m,
                NormalizationOptions {
                    horizon,
                    pad_terminals: *pad,
                },
            )?;
            let text = format::to_string(&n);
            if let Some(path) = output {
                std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
                if json {
                    return done(pretty(&json!({
                        "horizon": horizon,
                        "states": n.n_states(),
                        "output": path.display().to_string(),
                    })));
                }
                return done(format!(
                    "wrote {} ({} states, horizon {horizon})\n",
                    path.display(),
                    n.n_states()
                ));
            }
            if json {
                return done(pretty(&json!({ "horizon": horizon, "states": n.n_states(), "model": text })));
            }
            done(text)
        }
        Command::Channel {
            model,
            horizon,
            dump_kernels,
            dump_reactor,
            check_consistency: consistency,
        } => {
            let m = load(model)?;
            let ch = FeedbackChannel::from_model(&m, horizon.map(|t| t as usize))?;
            if *dump_reactor {
                return done(reactor_report(&ch, &reactor_of(&ch)?, json));
            }
            if *consistency {
                let rep = check_consistency(&ch, &reactor_of(&ch)?)?;
                let ok = rep.max_deviation <= 1e-9;
                let text = if json {
                    pretty(&json!({ "consistency": rep, "ok": ok }))
                } else {
                    format!(
                        "max deviation   {:.3e}\nsequences       {}\ntriples         {}\nconsistent      {}\n",
                        rep.max_deviation,
                        rep.sequences,
                        rep.triples,
                        if ok { "yes" } else { "no" }
                    )
                };
                return Ok(Output { text, ok });
            }
            done(channel_report(&ch, *dump_kernels, json))
        }
        Command::Leakage {
            model,
            horizon,
            min_entropy,
        } => leakage(model, horizon.map(|t| t as usize), *min_entropy, json),
        Command::Capacity {
            model,
            restarts,
            seed,
            max_iters,
            tol,
            horizon,
            classical,
            show_inputs,
        } => {
            finite_in("tol", *tol, 0.0, 1.0)?;
            let m = load(model)?;
            let ch = FeedbackChannel::from_model(&m, horizon.map(|t| t as usize))?.kernels_only();
            let opts = CapacityOptions {
                restarts: *restarts as usize,
                max_iters: *max_iters as usize,
                tol: *tol,
                seed: *seed,
            };
            let est = directed_capacity(&ch, &opts)?;
            let classical_value = if *classical {
                let matrix: Vec<_> = ch.kernels[0].values().cloned().collect();
                Some(blahut_arimoto(&matrix, 1e-12, 1_000_000)?)
            } else {
                None
            };
            if json {
                let mut v = json!({
                    "horizon": ch.horizon,
                    "value": est.value,
                    "raw_total": est.raw_total,
                    "restarts_used": est.restarts_used,
                    "best_restart": est.best_restart,
                    "converged": est.converged,
                    "seed": seed,
                    "argmax_inputs": family_json(&ch, &est.argmax_inputs, true),
                });
                if let Some(c) = &classical_value {
                    v["classical"] = json!(c);
                }
                return done(pretty(&v));
            }
            let mut s = String::new();
            let _ = writeln!(s, "horizon          {}", ch.horizon);
            let _ = writeln!(s, "capacity         {} bits/use", f4(est.value));
            let _ = writeln!(s, "raw total        {} bits", f4(est.raw_total));
            let _ = writeln!(s, "restarts         {} (best {})", est.restarts_used, est.best_restart);
            let _ = writeln!(s, "converged        {}", if est.converged { "yes" } else { "no" });
            if let Some(c) = &classical_value {
                let _ = writeln!(s, "classical        {} bits ({} iterations)", f4(c.capacity), c.iterations);
            }
            if *show_inputs {
                let _ = writeln!(s, "maximizing inputs:");
                family_text(&mut s, &ch, &est.argmax_inputs, true);
            }
            done(s)
        }
        Command::Distance {
            model_a,
            model_b,
            iters,
            tol,
        } => {
            finite_in("tol", *tol, 0.0, 1.0)?;
            let (a, b) = (load(model_a)?, load(model_b)?);
            let r = bisim_distance(&a, &b, *iters as usize, *tol)?;
            let axioms = r.table.axiom_violation();
            if json {
                return done(pretty(&json!({
                    "distance": r.distance,
                    "iterations": r.iterations,
                    "states": r.table.len(),
                    "axiom_violation": axioms,
                })));
            }
            done(format!(
                "distance         {}\niterations       {}\nstates           {}\naxiom violation  {:.1e}\n",
                f4(r.distance),
                r.iterations,
                r.table.len(),
                axioms
            ))
        }
        Command::Continuity {
            model,
            grid,
            seed,
            restarts,
        } => {
            let grid: Vec<f64> = grid
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Failure::Usage(format!("--grid entry {s:?} is not a number")))
                })
                .collect::<Result<_, _>>()?;
            if grid.is_empty() {
                return Err(Failure::Usage("--grid is empty".into()));
            }
            for &g in &grid {
                finite_in("grid", g, 0.0, 1.0)?;
            }
            let m = load(model)?;
            let opts = CapacityOptions {
                restarts: *restarts as usize,
                ..CapacityOptions::default()
            };
            let rep = continuity_experiment(&m, &grid, *seed, &opts)?;
            if json {
                return done(pretty(&json!(rep)));
            }
            let mut s = String::new();
            let _ = writeln!(s, "base capacity {}", f4(rep.base_capacity));
            let _ = writeln!(s, "{:>10} {:>10} {:>10} {:>10}", "eps", "distance", "capacity", "gap");
            for r in &rep.rows {
                let _ = writeln!(
                    s,
                    "{:>10} {:>10} {:>10} {:>10}",
                    f4(r.eps),
                    f4(r.distance),
                    f4(r.capacity),
                    f4(r.gap)
                );
            }
            let rho = rep.spearman.map_or("undefined".to_string(), f4);
            let _ = writeln!(s, "spearman rho  {rho}");
            done(s)
        }
        Command::Erasure(args) => erasure(args, json),
        Command::Example { list, run } => {
            if *list {
                let mut items = Vec::new();
                for id in corpus::list() {
                    items.push((id, corpus::bundle(id)?.note));
                }
                if json {
                    let v: Vec<Value> = items.iter().map(|(id, n)| json!({ "id": id, "note": n })).collect();
                    return done(pretty(&Value::Array(v)));
                }
                let mut s = String::new();
                for (id, note) in items {
                    let _ = writeln!(s, "{id:18} {note}");
                }
                return done(s);
            }
            let id = run.as_deref().expect("clap requires --list or --run");
            let r = corpus::run_example(id)?;
            let text = if json {
                pretty(&json!(r))
            } else {
                let mut s = format!("{}: {}\n", r.id, r.note);
                for c in &r.checks {
                    let actual = c.actual.map_or_else(
                        || format!("error: {}", c.error.as_deref().unwrap_or("")),
                        f4,
                    );
                    let src = match c.source {
                        Source::Reference => "reference",
                        Source::Oracle => "oracle",
                        Source::ClosedForm => "closed-form",
                    };
                    let _ = writeln!(
                        s,
                        "{:44} expected {:>10} actual {:>10} tol {:.0e} {:12} {}",
                        c.metric,
                        f4(c.expected),
                        actual,
                        c.tol,
                        src,
                        if c.pass { "ok" } else { "FAIL" }
                    );
                }
                s
            };
            Ok(Output { text, ok: r.pass })
        }
    }
}

fn validate(path: &Path, normalized: bool, json: bool) -> Result<Output, Failure> {
    let m = load(path)?;
    let rep = m.validate(normalized);
    let ok = rep.is_ok();
    let text = if json {
        pretty(&json!({ "ok": ok, "violations": rep.violations }))
    } else {
        let mut s = String::new();
        for v in &rep.violations {
            let _ = writeln!(s, "{v}");
        }
        let _ = writeln!(
            s,
            "{}: {} states, {} violation(s){}",
            if ok { "valid" } else { "invalid" },
            m.n_states(),
            rep.violations.len(),
            if rep.violations.iter().any(|v| v.tolerated) { " (some tolerated: lenient model)" } else { "" }
        );
        s
    };
    Ok(Output { text, ok })
}

fn leakage(path: &Path, horizon: Option<usize>, min_entropy: bool, json: bool) -> Result<Output, Failure> {
    let m = load(path)?;
    // one-shot models that are not normalized are read as classical channels
    let (measure, basis) = if m.validate(true).is_ok() {
        (joint_measure(&FeedbackChannel::from_model(&m, horizon)?)?, "channel")
    } else {
        let v = classical_view(&m)?;
        (measure_from_matrix(&v.input, &v.matrix), "classical view")
    };
    let mut r = directed_information(&measure)?;
    if min_entropy {
        r.i_min = Some(min_entropy_leakage(&measure)?);
    }
    if json {
        return done(pretty(&json!({
            "model": path.display().to_string(),
            "horizon": measure.horizon,
            "basis": basis,
            "total_mass": measure.total(),
            "report": r,
        })));
    }
    let mut s = String::new();
    let _ = writeln!(s, "model            {}", path.display());
    let _ = writeln!(s, "horizon          {}", measure.horizon);
    let _ = writeln!(s, "basis            {basis}");
    if measure.lenient {
        let _ = writeln!(s, "total mass       {}", f4(measure.total()));
    }
    let rows = [
        ("H(A^T)", r.h_a),
        ("H_R", r.h_r),
        ("H(A^T|B^T)", r.h_a_given_b),
        ("I(A^T;B^T)", r.i_mutual),
        ("I(A^T->B^T)", r.i_forward),
        ("I(B^T->A^T)", r.i_backward),
    ];
    for (name, v) in rows {
        let _ = writeln!(s, "{name:16} {}", f4(v));
    }
    if let Some(v) = r.i_min {
        let _ = writeln!(s, "{:16} {}", "I_inf", f4(v));
    }
    done(s)
}

fn channel_report(ch: &FeedbackChannel, kernels: bool, json: bool) -> String {
    let n_kernels: usize = ch.kernels.iter().map(|l| l.len()).sum();
    let n_inputs: Option<usize> = ch.inputs.as_ref().map(|f| f.iter().map(|l| l.len()).sum());
    if json {
        let mut v = json!({
            "horizon": ch.horizon,
            "secrets": ch.secrets,
            "observables": ch.observables,
            "kernel_rows": n_kernels,
            "input_rows": n_inputs,
            "lenient": ch.lenient,
        });
        if kernels {
            v["kernels"] = family_json(ch, &ch.kernels, false);
            if let Some(inp) = &ch.inputs {
                v["inputs"] = family_json(ch, inp, true);
            }
        }
        return pretty(&v);
    }
    let mut s = String::new();
    let _ = writeln!(s, "horizon          {}", ch.horizon);
    let _ = writeln!(s, "secrets          {}", ch.secrets.join(", "));
    let _ = writeln!(s, "observables      {}", ch.observables.join(", "));
    let _ = writeln!(s, "kernel rows      {n_kernels}");
    match n_inputs {
        Some(n) => {
            let _ = writeln!(s, "input rows       {n}");
        }
        None => {
            let _ = writeln!(s, "input rows       none (secret-nondeterministic)");
        }
    }
    if kernels {
        let _ = writeln!(s, "kernels p(b_t | a^t, b^(t-1)):");
        family_text(&mut s, ch, &ch.kernels, false);
        if let Some(inp) = &ch.inputs {
            let _ = writeln!(s, "inputs p(a_t | a^(t-1), b^(t-1)):");
            family_text(&mut s, ch, inp, true);
        }
    }
    s
}

fn reactor_report(ch: &FeedbackChannel, r: &Reactor, json: bool) -> String {
    let nb = ch.observables.len();
    let describe = |f: &iihs_core::channel::ReactionFunction| -> Vec<(String, String)> {
        iihs_core::channel::sequences(nb, f.t - 1)
            .into_iter()
            .map(|beta| {
                let h = iihs_core::channel::History::new(Vec::new(), beta.clone());
                let key = history_text(ch, &h);
                (key, ch.secret_name(f.apply(&beta, nb)).to_string())
            })
            .collect()
    };
    let na = ch.secrets.len();
    if json {
        let mut out = Vec::new();
        for (i, level) in r.conditionals.iter().enumerate() {
            for (prefix, fs) in level {
                for (f, p) in fs {
                    out.push(json!({
                        "t": i + 1,
                        "given": prefix,
                        "function": f.index(na),
                        "table": describe(f).into_iter().map(|(k, v)| json!([k, v])).collect::<Vec<_>>(),
                        "prob": p,
                    }));
                }
            }
        }
        return pretty(&json!({ "horizon": r.horizon, "conditionals": out }));
    }
    let mut s = String::new();
    for (i, level) in r.conditionals.iter().enumerate() {
        for (prefix, fs) in level {
            for (f, p) in fs {
                let table: Vec<String> = describe(f).into_iter().map(|(k, v)| format!("{k}->{v}")).collect();
                let given: Vec<String> = prefix.iter().map(|x| format!("F{}#{x}", prefix.len())).collect();
                let _ = writeln!(
                    s,
                    "p(F{}#{} | {}) = {}   {}",
                    i + 1,
                    f.index(na),
                    if given.is_empty() { "-".into() } else { given.join(",") },
                    f4(*p),
                    table.join(" ")
                );
            }
        }
    }
    s
}

fn erasure(args: &ErasureArgs, json: bool) -> Result<Output, Failure> {
    finite_in("p-ok", args.p_ok, 0.0, 1.0)?;
    let eta = Eta::parse(&args.eta).map_err(|e| Failure::Usage(e.to_string()))?;
    let spec = ErasureChannelSpec::new(args.p_ok, eta, args.horizon as usize)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(trials) = args.trials {
        let r = feedbacksim::throughput(&spec, trials as usize, args.seed)?;
        if json {
            return done(pretty(&json!({ "spec": spec, "seed": args.seed, "throughput": r })));
        }
        return done(format!(
            "trials           {}\nrate             {} bits/use\nstd error        {}\n",
            r.trials,
            f4(r.rate),
            f4(r.std_err)
        ));
    }
    let msg = args.message.as_deref().expect("clap requires --message without --trials");
    let bits = feedbacksim::parse_bits(msg).map_err(|e| Failure::Usage(e.to_string()))?;
    let forced = match &args.force {
        Some(f) => Some(feedbacksim::parse_outputs(f).map_err(|e| Failure::Usage(e.to_string()))?),
        None => None,
    };
    let tr = feedbacksim::simulate(&spec, &bits, args.seed, forced.as_deref())?;
    let word = |v: &[feedbacksim::Output]| -> String {
        if v.is_empty() {
            "ε".into()
        } else {
            v.iter().map(|o| o.to_string()).collect()
        }
    };
    let decoded: String = tr.decoded.iter().map(|b| b.to_string()).collect();
    if json {
        let steps: Vec<Value> = tr
            .steps
            .iter()
            .map(|st| {
                json!({
                    "t": st.t,
                    "feedback": word(&st.feedback),
                    "input": st.input,
                    "row": { "0": st.row[0], "1": st.row[1], "e": st.row[2] },
                    "output": st.output.to_string(),
                })
            })
            .collect();
        return done(pretty(&json!({
            "message": msg,
            "spec": spec,
            "seed": if forced.is_some() { Value::Null } else { json!(args.seed) },
            "steps": steps,
            "outputs": word(&tr.outputs),
            "decoded": decoded,
        })));
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>3}  {:>12}  {:>7}  {:>20}  {:>6}",
        "t", "feedback", "input", "p(0) p(1) p(e)", "output"
    );
    for st in &tr.steps {
        let row = format!("{} {} {}", f4(st.row[0]), f4(st.row[1]), f4(st.row[2]));
        let _ = writeln!(
            s,
            "{:>3}  {:>12}  {:>7}  {:>20}  {:>6}",
            st.t,
            word(&st.feedback),
            st.input,
            row,
            st.output.to_string()
        );
    }
    let _ = writeln!(s, "outputs          {}", word(&tr.outputs));
    let _ = writeln!(s, "decoded          {}", if decoded.is_empty() { "ε" } else { &decoded });
    done(s)
}
