//! Interactive information-hiding systems (IIHSs) viewed as channels with
//! memory and feedback.
//!
//! The crate covers the whole analysis pipeline:
//!
//! | module | what it does |
//! |--------|--------------|
//! | [`model`] | automaton representation, validation, trace/path resolution |
//! | [`format`] | the `.iihs` text format (parser and printer) |
//! | [`normalize`] | unfolding a general IIHS into an alternating depth-2T tree |
//! | [`channel`] | stochastic kernels, input distributions, joint measure, reactors |
//! | [`infotheory`] | Shannon / min-entropy quantities, directed information |
//! | [`capacity`] | directed capacity by multi-start ascent, Blahut–Arimoto |
//! | [`metric`] | Kantorovich lifting, bisimulation pseudometric, continuity experiment |
//! | [`feedbacksim`] | erasure channel with a stop-and-wait encoder |
//! | [`corpus`] | bundled worked examples with expected values |

pub mod capacity;
pub mod channel;
pub mod corpus;
mod error;
pub mod feedbacksim;
pub mod format;
pub mod infotheory;
pub mod limits;
pub mod metric;
pub mod model;
pub mod normalize;
pub mod random;

pub use error::{Error, Result};
pub use model::{ActionKind, Iihs, Mode, StateId, Trace};
