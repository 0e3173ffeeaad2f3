//! Sequence builders, sign-change verification, the asymptotics harness and
//! the command line.

pub mod sequences;

pub use sequences::{
    build_sequences_thm1, build_sequences_thm2, check_plan1, check_plan2, PlanCheck, PlanVerification,
    SequencePlan1, SequencePlan2, Thm1Options, Thm2Margins,
};
pub mod verify;

pub use verify::{verify_theorem1, verify_theorem2, Verdict, VerificationReport};
pub mod asymptotics;
pub mod scenarios;

pub use asymptotics::{asymptotics_experiment, time_scale_contrast, AsymptoticsConfig, AsymptoticsTable};
pub mod cli;
pub mod kernel_checks;
pub mod output;
pub use cli::cli_main;
