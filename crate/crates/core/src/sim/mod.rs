//! Constructive communication strategies, their exact posteriors, seeded
//! Monte Carlo execution and equilibrium checks.

pub mod density;
pub mod partition;
pub mod report;
pub mod rng;
pub mod targeted;

pub use density::{
    build_density_strategy, crowdfund_equilibrium, density_posterior, simulate_crowdfund,
    CrowdfundEquilibrium, CrowdfundMode, DensityTargetedStrategy, ThetaSampling,
};
pub use partition::{
    build_cs_strategy, cs_check_incentive, cs_posterior, simulate_cs, IncentiveReport,
    PartitionStrategy,
};
pub use report::{ConditionalPayoffs, MessageStats, SimReport, StateStats};
pub use rng::{RNG_ALGORITHM, TRIALS_PER_CHUNK};
pub use targeted::{
    analytic_posterior, build_attaining_strategy, simulate, simulate_with_offpath,
    verify_equilibrium, EquilibriumCheck, Message, TargetedStrategy,
};
