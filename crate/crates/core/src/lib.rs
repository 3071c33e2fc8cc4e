//! Lazy k-best decoding of token classification outputs under global
//! constraints.
//!
//! A document's model output is a [`ProbTable`]. Decoders enumerate label
//! sequences in decreasing probability and return the first one accepted by
//! a [`Constraint`]. [`lazyk`] holds the main algorithm, [`baselines`] the
//! reference decoders it is compared against.

pub mod baselines;
pub mod constraints;
pub mod corpus;
pub mod cost;
pub mod decode;
pub mod error;
pub mod eval;
pub mod lazyk;
pub mod synthetic;
pub mod table;

pub use constraints::{Constraint, Dataset, DocContext, Locale, Token};
pub use corpus::{DocRecord, Document};
pub use cost::SeqCost;
pub use decode::{run_decoder, DecodeOutcome, DecodeParams, DecodeStatus, Decoded, DecoderKind};
pub use error::{DecodeError, TableError};
pub use eval::EvalReport;
pub use lazyk::{lazy_k_decode, LazyK};
pub use table::{labels_of, seq_cost, seq_distance, LabelSeq, ProbTable, Rank};
