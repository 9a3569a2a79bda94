//! Verification harness: error norms, the sinusoidal verification case
//! with its fine-discretization reference solution, convergence-order
//! estimation, and local sensitivity analysis.

pub mod convergence;
pub mod mc;
pub mod metrics;
pub mod oracle;
pub mod sensitivity;
pub mod theoretical;

pub use convergence::{convergence_orders, ConvergenceTables, SweepPoint};
pub use metrics::{eps2_space, eps2_time, eps_inf, ErrorReport, SpaceTimeField};
pub use oracle::{reference_solution, FineSolution, OracleSpec};
pub use sensitivity::{local_sensitivity, SensitivityBand, SensitivityParam, SensitivitySpec};
pub use theoretical::{verification_errors, TheoreticalCase, VerificationErrors};
