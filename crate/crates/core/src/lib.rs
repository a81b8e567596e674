//! Periodically-forced rank-type difference equations
//!
//! ```text
//! x_n = k-rank{ f_1(x_{n-1}, n), …, f_M(x_{n-M}, n) }
//! ```
//!
//! and the more general sup-contractive recurrences `x_n = G_n(x_{n-1}, …, x_{n-M})`
//! with `G_{n+P} = G_n`. When every update is a sup-contraction, solutions
//! converge to a unique orbit whose period divides the forcing period `P`.
//!
//! The crate covers:
//!
//! - [`rank`]: the k-rank operator and sup-norm helpers.
//! - [`expr`]: a small DSL for `f(x, n)` and `G(y1, …, yM)` with Lipschitz estimates.
//! - [`system`]: rank families, affine and power-law constructors, block systems.
//! - [`block_map`]: the block map on `R^{PM}`, its fixed point and the periodic orbit it encodes.
//! - [`simulate`]: direct iteration, period detection and multi-seed reports.
//! - [`closed_form`]: known closed-form limits, usable as oracles.
//! - [`definition`]: the TOML system-definition format.
//! - [`cli`]: the `rank-recur` command line front end.

pub mod block_map;
pub mod cli;
pub mod closed_form;
pub mod definition;
mod error;
pub mod expr;
pub mod rank;
pub mod simulate;
pub mod system;
pub mod verify;

pub use error::{Error, Result};
pub use rank::{k_rank, median, sup_distance, RankIndex};
