//! Policy-gradient landscape: descent with its rate contract, gradient
//! dominance constants over sampled sublevel sets, the convex lift, and
//! one- and two-parameter slices.

mod ecl;
mod pgd;
mod pl;
mod sampling;
mod slices;

pub use ecl::*;
pub use pgd::*;
pub use pl::*;
pub use sampling::{
    collect_samples, sample_sublevel, sample_sublevel_around, Sampling, SublevelSamples,
};
pub use slices::*;
