//! Service placement on heterogeneous edge nodes with approximation guarantees.
//!
//! The pipeline: a GSP instance is converted to SPSC form ([`convert`]), the LP
//! relaxation is solved ([`lp`]), and a placement is built by derandomized slot
//! allocation ([`sa1`], [`sa2`], shared machinery in [`slots`]). [`meta::rsa`]
//! is the top-level solver. [`baselines`] holds the comparison algorithms and
//! the exact and Monte-Carlo oracles; [`simgen`] and [`experiment`] drive
//! synthetic sweeps.

pub mod baselines;
pub mod convert;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod lp;
pub mod meta;
pub mod model;
pub mod sa1;
pub mod sa2;
pub mod simgen;
pub mod slots;

pub use convert::{gsp_to_spsc, verify_equivalence, ConversionMap};
pub use error::{Error, Result};
pub use lp::{build_and_solve, verify_bound, LpOptions, LpSolution};
pub use meta::{csa, rsa, SolveReport, SubAlgorithm};
pub use model::{
    check_feasible, gsp_reward, spsc_reward, AnyInstance, GspInstance, GspUser, InstanceFile, Node, Placement,
    Resources, Service, SpscInstance, SpscReward, SpscUser, DEFAULT_FEASIBILITY_TOLERANCE,
};
pub use sa1::{run_sa1, Sa1Params};
pub use sa2::run_sa2;
pub use slots::{Level, PartialAllocation, Slot, SlotContext};
