//! Exact computation of direct images of parabolic vector bundles and
//! parabolic connections under branched coverings of curves, and the inverse
//! construction: recovering the covering and the bundle upstairs from a
//! parabolic bundle equipped with a ramified torus sub-bundle.
//!
//! All arithmetic is exact rational arithmetic. Coverings are finite
//! monodromy data, parabolic structures are weighted flags, and every
//! nontrivial formula is cross-checked against a brute-force local model in
//! truncated Laurent series.

pub mod error;
pub mod gen;
pub mod hurwitz;
pub mod oracle;
pub mod parabolic;
pub mod pushforward;
pub mod rational;
pub mod scenario;
pub mod torus;

pub use error::{Error, Result};
pub use rational::Rational;
