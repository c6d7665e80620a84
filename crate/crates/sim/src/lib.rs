//! Monte Carlo companions to the mean field solvers: finite-n interacting
//! Markov chains on a finite state space and one-dimensional McKean–Vlasov
//! particle systems.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by
//! (seed, replication, player), so results do not depend on the number of
//! worker threads or on the order in which replications run.

pub mod error;
pub mod fit;
pub mod mkv;
pub mod nplayer;
pub mod rng;

pub use error::{Result, SimError};
