//! Binary erasure channel with feedback driven by a stop-and-wait encoder.
//!
//! Inputs are bits; outputs are `0`, `1` or the erasure `e`. The kernel row
//! for input bit `a` after input history α^{t-1} puts `p_ok − η(α^{t-1})` on
//! `a` and the rest on `e`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{FeedbackChannel, Row, Symbol};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Output {
    Zero,
    One,
    Erased,
}

impl Output {
    pub fn index(self) -> Symbol {
        match self {
            Output::Zero => 0,
            Output::One => 1,
            Output::Erased => 2,
        }
    }

    fn from_index(i: usize) -> Self {
        [Output::Zero, Output::One, Output::Erased][i]
    }

    pub fn bit(self) -> Option<u8> {
        match self {
            Output::Zero => Some(0),
            Output::One => Some(1),
            Output::Erased => None,
        }
    }
}

impl fmt::Display for Output {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Output::Zero => "0",
            Output::One => "1",
            Output::Erased => "e",
        })
    }
}

impl FromStr for Output {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "0" => Ok(Output::Zero),
            "1" => Ok(Output::One),
            "e" | "E" => Ok(Output::Erased),
            o => Err(Error::InvalidArgument(format!("unknown erasure output {o:?}"))),
        }
    }
}

/// Parses a comma-separated output list such as `e,0,1`.
pub fn parse_outputs(s: &str) -> Result<Vec<Output>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

/// Parses a bit string such as `011`.
pub fn parse_bits(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(Error::InvalidArgument(format!("message bit {c:?} is not 0 or 1"))),
        })
        .collect()
}

/// Memory correction η over the input history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum Eta {
    Zero,
    /// `penalty` times the fraction of ones among the last `k` inputs.
    LastKPenalty { k: usize, penalty: f64 },
}

impl Eta {
    pub fn eval(&self, history: &[u8]) -> f64 {
        match *self {
            Eta::Zero => 0.0,
            Eta::LastKPenalty { k, penalty } => {
                if k == 0 {
                    return 0.0;
                }
                let tail = &history[history.len().saturating_sub(k)..];
                penalty * tail.iter().filter(|&&b| b == 1).count() as f64 / k as f64
            }
        }
    }

    /// Largest value η can take.
    fn max(&self) -> f64 {
        match *self {
            Eta::Zero => 0.0,
            Eta::LastKPenalty { k, penalty } => {
                if k == 0 {
                    0.0
                } else {
                    penalty
                }
            }
        }
    }

    /// `zero`, or `last-k-penalty:K:P`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidArgument(format!("unknown eta preset {s:?}"));
        match parts.as_slice() {
            ["zero"] => Ok(Eta::Zero),
            ["last-k-penalty", k, p] => Ok(Eta::LastKPenalty {
                k: k.parse().map_err(|_| bad())?,
                penalty: p.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErasureChannelSpec {
    pub p_ok: f64,
    pub eta: Eta,
    pub horizon: usize,
}

impl ErasureChannelSpec {
    pub fn new(p_ok: f64, eta: Eta, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::HorizonZero);
        }
        if !(0.0..=1.0).contains(&p_ok) {
            return Err(Error::InvalidArgument(format!("p_ok {p_ok} outside [0, 1]")));
        }
        let m = eta.max();
        if !(0.0..=p_ok).contains(&m) {
            return Err(Error::InvalidArgument(format!(
                "eta reaches {m}, which must lie in [0, p_ok]"
            )));
        }
        Ok(ErasureChannelSpec { p_ok, eta, horizon })
    }

    /// Row over (0, 1, e) for input `bit` after input history `history`.
    pub fn row(&self, history: &[u8], bit: u8) -> Row {
        let ok = self.p_ok - self.eta.eval(history);
        let mut r = vec![0.0; 3];
        r[bit as usize] = ok;
        r[2] = 1.0 - ok;
        r
    }

    /// The memoryless matrix obtained with η ≡ 0.
    pub fn base_matrix(&self) -> Vec<Row> {
        vec![vec![self.p_ok, 0.0, 1.0 - self.p_ok], vec![0.0, self.p_ok, 1.0 - self.p_ok]]
    }

    /// Full kernel family over all histories up to the horizon.
    pub fn channel(&self) -> Result<FeedbackChannel> {
        let mut ch = FeedbackChannel::memoryless(
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into(), "e".into()],
            &self.base_matrix(),
            self.horizon,
        )?;
        for level in &mut ch.kernels {
            for (h, row) in level.iter_mut() {
                let bits: Vec<u8> = h.secrets.iter().map(|&a| a as u8).collect();
                let (last, prev) = bits.split_last().expect("kernel history is non-empty");
                *row = self.row(prev, *last);
            }
        }
        Ok(ch)
    }
}

/// Next bit of `message` given the feedback so far: every non-erased output
/// acknowledges one bit, an erasure asks for a resend.
pub fn encode_step(message: &[u8], feedback: &[Output]) -> Result<u8> {
    let acked = feedback.iter().filter(|o| **o != Output::Erased).count();
    message.get(acked).copied().ok_or(Error::MessageExhausted)
}

/// Removes erasures.
pub fn decode(outputs: &[Output]) -> Vec<u8> {
    outputs.iter().filter_map(|o| o.bit()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step {
    pub t: usize,
    pub feedback: Vec<Output>,
    pub input: u8,
    /// Kernel row over (0, 1, e) used at this step.
    pub row: Row,
    pub output: Output,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Transcript {
    pub steps: Vec<Step>,
    pub outputs: Vec<Output>,
    pub decoded: Vec<u8>,
}

/// Runs the encoder against the channel for up to `horizon` uses.
///
/// Outputs are drawn from a ChaCha8 generator seeded with `seed`, unless
/// `forced` pins every draw. Transmission stops early once the whole message
/// is acknowledged, so the decoded bits are always a prefix of `message`.
pub fn simulate(
    spec: &ErasureChannelSpec,
    message: &[u8],
    seed: u64,
    forced: Option<&[Output]>,
) -> Result<Transcript> {
    simulate_with(spec, message, &mut ChaCha8Rng::seed_from_u64(seed), forced)
}

fn simulate_with(
    spec: &ErasureChannelSpec,
    message: &[u8],
    rng: &mut ChaCha8Rng,
    forced: Option<&[Output]>,
) -> Result<Transcript> {
    if message.is_empty() {
        return Err(Error::InvalidArgument("message is empty".into()));
    }
    if let Some(f) = forced {
        if f.len() > spec.horizon {
            return Err(Error::InvalidArgument(format!(
                "{} forced outputs for horizon {}",
                f.len(),
                spec.horizon
            )));
        }
    }
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut steps = Vec::new();
    for t in 1..=spec.horizon {
        let bit = match encode_step(message, &outputs) {
            Ok(b) => b,
            Err(Error::MessageExhausted) => break,
            Err(e) => return Err(e),
        };
        let row = spec.row(&inputs, bit);
        let out = match forced {
            Some(f) => {
                let Some(&o) = f.get(t - 1) else { break };
                if row[o.index()] <= 0.0 {
                    return Err(Error::ForcedOutputInvalid {
                        step: t,
                        symbol: o.to_string(),
                    });
                }
                o
            }
            None => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut pick = 2;
                for (i, p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                Output::from_index(pick)
            }
        };
        steps.push(Step {
            t,
            feedback: outputs.clone(),
            input: bit,
            row,
            output: out,
        });
        inputs.push(bit);
        outputs.push(out);
    }
    let decoded = decode(&outputs);
    Ok(Transcript {
        steps,
        outputs,
        decoded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Throughput {
    pub trials: usize,
    /// Mean decoded bits per channel use.
    pub rate: f64,
    /// Standard error of `rate`.
    pub std_err: f64,
}

/// Monte-Carlo throughput. Trial `i` draws a uniformly random message of
/// `horizon` bits and its outputs from stream `i` of a ChaCha8 generator
/// seeded with `seed`, so the message never runs out and trials are independent.
pub fn throughput(spec: &ErasureChannelSpec, trials: usize, seed: u64) -> Result<Throughput> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let run = |i: usize| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let msg: Vec<u8> = (0..spec.horizon).map(|_| rng.gen_range(0..2u8)).collect();
        let tr = simulate_with(spec, &msg, &mut rng, None)?;
        Ok(tr.decoded.len() as f64 / spec.horizon as f64)
    };
    #[cfg(feature = "parallel")]
    let rates: Vec<f64> = {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(run).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let rates: Vec<f64> = (0..trials).map(run).collect::<Result<_>>()?;
    let n = trials as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(Throughput {
        trials,
        rate: mean,
        std_err: (var / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::capacity::{blahut_arimoto, directed_capacity, CapacityOptions};

    fn spec(t: usize) -> ErasureChannelSpec {
        ErasureChannelSpec::new(0.8, Eta::Zero, t).unwrap()
    }

    #[test]
    fn stop_and_wait_steps() {
        let w = parse_bits("011").unwrap();
        let e = Output::Erased;
        assert_eq!(encode_step(&w, &[]).unwrap(), 0);
        assert_eq!(encode_step(&w, &[e]).unwrap(), 0);
        assert_eq!(encode_step(&w, &[e, Output::Zero]).unwrap(), 1);
        assert_eq!(encode_step(&w, &[Output::Zero, e]).unwrap(), 1);
        assert_eq!(encode_step(&w, &[e, e]).unwrap(), 0);
        assert!(matches!(
            encode_step(&w, &[Output::Zero, Output::One, Output::One]),
            Err(Error::MessageExhausted)
        ));
    }

    #[test]
    fn forced_run_decodes_prefix() {
        let w = parse_bits("011").unwrap();
        let forced = parse_outputs("e,0,1").unwrap();
        let tr = simulate(&spec(3), &w, 0, Some(&forced)).unwrap();
        assert_eq!(tr.decoded, vec![0, 1]);
        let inputs: Vec<u8> = tr.steps.iter().map(|s| s.input).collect();
        assert_eq!(inputs, vec![0, 0, 1]);
        let bad = parse_outputs("1").unwrap();
        assert!(matches!(
            simulate(&spec(3), &w, 0, Some(&bad)),
            Err(Error::ForcedOutputInvalid { step: 1, .. })
        ));
    }

    #[test]
    fn noiseless_delivers_prefix() {
        let w = parse_bits("10110").unwrap();
        for t in 1..8 {
            let s = ErasureChannelSpec::new(1.0, Eta::Zero, t).unwrap();
            let tr = simulate(&s, &w, 9, None).unwrap();
            assert_eq!(tr.decoded, w[..t.min(w.len())].to_vec());
        }
    }

    #[test]
    fn same_seed_same_transcript() {
        let w = parse_bits("0110101").unwrap();
        let s = spec(10);
        assert_eq!(simulate(&s, &w, 42, None).unwrap(), simulate(&s, &w, 42, None).unwrap());
    }

    #[test]
    fn throughput_near_p_ok() {
        let r = throughput(&spec(10), 20_000, 3).unwrap();
        assert!((r.rate - 0.8).abs() < 3.0 * r.std_err + 1e-12, "{r:?}");
    }

    #[test]
    fn feedback_does_not_raise_capacity() {
        let s = spec(2);
        let ba = blahut_arimoto(&s.base_matrix(), 1e-12, 10_000).unwrap().capacity;
        assert!((ba - 0.8).abs() < 1e-9);
        let opts = CapacityOptions {
            restarts: 4,
            ..Default::default()
        };
        let dc = directed_capacity(&s.channel().unwrap(), &opts).unwrap();
        assert!((dc.value - 0.8).abs() < 1e-3, "{}", dc.value);
    }

    #[test]
    fn eta_presets() {
        assert_eq!(Eta::parse("zero").unwrap(), Eta::Zero);
        let e = Eta::parse("last-k-penalty:2:0.1").unwrap();
        assert_eq!(e, Eta::LastKPenalty { k: 2, penalty: 0.1 });
        assert!((e.eval(&[1, 0, 1]) - 0.05).abs() < 1e-15);
        assert!(Eta::parse("bogus").is_err());
        assert!(ErasureChannelSpec::new(0.05, e, 3).is_err());
        let s = ErasureChannelSpec::new(0.8, e, 3).unwrap();
        let r = s.row(&[1, 1], 0);
        assert!((r[0] - 0.7).abs() < 1e-12 && (r[2] - 0.3).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn decoded_is_prefix(bits in proptest::collection::vec(0u8..2, 1..8), t in 1usize..12, seed in any::<u64>(), k in 0usize..3) {
            let eta = Eta::LastKPenalty { k, penalty: 0.3 };
            let s = ErasureChannelSpec::new(0.8, eta, t).unwrap();
            let tr = simulate(&s, &bits, seed, None).unwrap();
            prop_assert!(bits.starts_with(&tr.decoded));
            for st in &tr.steps {
                prop_assert!((st.row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
