//! Pilot power allocation for channel estimation in multi-IRS downlinks.
//!
//! A single-antenna base station serves a single-antenna user through `K`
//! intelligent reflecting surfaces with `M_k` elements each. The cascaded
//! channel of every element is estimated with an ON/OFF least-squares
//! protocol, the reflection phases are set from the estimates, and the pilot
//! power given to each IRS decides how well those phases line up.
//!
//! * [`channel`]: geometry, path loss and channel sampling.
//! * [`estimation`]: pilot allocations, LS estimation and phase configuration.
//! * [`capacity`]: received gain, its closed-form mean and the capacity bound.
//! * [`allocation`]: allocation strategies, the exact solver and an oracle.
//! * [`montecarlo`]: trial engine and ergodic rate aggregation.
//! * [`experiments`]: declarative sweeps written to CSV.
//!
//! ```
//! use irs_pilot::allocation::{allocate_simplified, AllocationProblem};
//!
//! // Amplitude ratio 4 between the links: the weaker one gets twice the power.
//! let problem = AllocationProblem::new(vec![4e-5, 1e-5], vec![1, 1], 1.0, 1e-14)?;
//! let alloc = allocate_simplified(&problem)?;
//! assert!((alloc.powers()[1] / alloc.powers()[0] - 2.0).abs() < 1e-12);
//! # Ok::<(), irs_pilot::Error>(())
//! ```

// `!(x > 0.0)` rejects NaN together with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod capacity;
pub mod channel;
mod error;
pub mod estimation;
pub mod experiments;
pub mod montecarlo;
pub mod rng;
pub mod units;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/system-model.md")]
    mod system_model {}
    #[doc = include_str!("../../../book/src/capacity.md")]
    mod capacity {}
    #[doc = include_str!("../../../book/src/allocation.md")]
    mod allocation {}
    #[doc = include_str!("../../../book/src/exact-solver.md")]
    mod exact_solver {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
