//! Four-granularity Chinese text classification.
//!
//! The pipeline transliterates each character into parallel streams
//! (characters, radicals, Wubi codes, Pinyin syllables), encodes every
//! stream with a shared bidirectional LSTM, fuses the auxiliary streams
//! into the character stream with soft attention, and classifies from the
//! concatenated final states. Everything — tensors, reverse-mode autodiff,
//! the optimizer — is implemented here with no external numerics.

pub mod adam;
pub mod checkpoint;
pub mod corpus;
pub mod dict;
pub mod encode;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod model;
pub mod neural;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod vocab;
