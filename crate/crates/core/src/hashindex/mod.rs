//! Binary codes and the hamming-ball document index.

mod code;
mod index;

pub use code::{ball_enumerate, ball_size, binarize, BinaryCode};
pub use index::{HammingIndex, Hit, PreselectConfig, Preselection, Strategy};
pub(crate) use code::words_for;
