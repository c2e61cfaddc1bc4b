//! currlab: a desk-scale laboratory for curriculum-learning / Adam
//! interactions.
//!
//! The crate studies one question from several angles: *what does ordering or
//! weighting training examples do to an adaptive optimizer?* Adam normalizes
//! each update by a running second-moment estimate, so a curriculum that
//! changes gradient magnitudes over time does not just reweight the data — it
//! changes the effective step size. The modules here isolate that interaction
//! at increasing levels of realism:
//!
//! * [`minimal_example`] — a single simulated parameter fed a prescribed
//!   gradient-magnitude schedule; the interaction in its purest form.
//! * [`autograd`] / [`optim`] / [`model`] — the numeric substrate: a tiny
//!   reverse-mode tape, bit-exact Adam and SGD-with-momentum, and a two-layer
//!   tanh MLP.
//! * [`curricula`] — fixed weighting policies, difficulty-ordered data with a
//!   growing-prefix schedule, weight statistics, and ablations.
//! * [`commentaries`] — a learned teacher that weights examples per step,
//!   trained by differentiating through an unrolled inner Adam run.
//! * [`datasets`] — synthetic classification tasks (Gaussian blobs and
//!   variable-length sequences) with controlled difficulty structure.
//! * [`harness`] — experiment configs, training runs with trace capture,
//!   Welch tests, the β-sweep diagnostic, grid search, and SVG plots.
//!
//! Every run is deterministic given its seed; traces are written as CSV and
//! plots as self-contained SVG. See the `examples/` directory for one runnable
//! entry point per capability, or the `currlab` binary for the same surface as
//! a CLI.

pub mod autograd;
pub mod commentaries;
pub mod curricula;
pub mod datasets;
pub mod harness;
pub mod minimal_example;
pub mod model;
pub mod optim;
