//! Restoration scheduling for radial distribution networks under uncertainty.
//!
//! After a disruption knocks out a set of lines, the operator coordinates
//! mobile generators and repair resources to pick loads back up as fast as
//! possible. This crate models that problem end to end:
//!
//! - [`netgraph`]: the radial network, damage sets, connectivity analysis,
//!   and degree-centrality preassignment of generator docking candidates.
//! - [`uncertainty`]: repair-mode tables (diminishing returns), Weibull
//!   repair times, normally distributed resource requirements, and seeded
//!   scenario sampling.
//! - [`formulation`]: translation of (network, scenarios, fleet, risk
//!   weights) into sparse mixed-integer linear programs — the extensive
//!   two-stage form with a CVaR tail term, wait-and-see and mean-value
//!   variants, and per-scenario Lagrangian subproblems.
//! - [`simplex`]: a bounded-variable primal simplex solver for the LP
//!   relaxations.
//! - [`bnb`]: LP-based branch and bound with convergence logging.
//! - [`dualdecomp`]: branch and bound over first-stage disagreements with
//!   node bounds from a subgradient-driven Lagrangian dual.
//! - [`metrics`]: resilience level, VaR/CVaR statistics, recovery profiles,
//!   and the WS/RP/EV mean-risk report.
//!
//! Scenario-level loops (dual subproblems, wait-and-see batches, fixed
//! first-stage evaluations) run on rayon when the `parallel` feature is
//! enabled (default) and fall back to plain iterators otherwise.

pub mod bnb;
pub mod dualdecomp;
pub mod formulation;
pub mod metrics;
pub mod milp;
pub mod netgraph;
pub mod par;
pub mod simplex;
pub mod uncertainty;

pub use milp::{LpSolution, LpStatus, MilpProblem, MilpSolution, MilpStatus};
pub use netgraph::NetworkModel;
pub use uncertainty::{RepairModeTable, Scenario, ScenarioSet};
