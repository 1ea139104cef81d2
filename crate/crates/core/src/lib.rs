//! Discounted Markov decision processes solved hierarchically with macro-actions.
//!
//! A model is split into regions ([`decomposition`]); each region gets a set of
//! local policies whose multi-step models ([`macros`]) turn the whole problem
//! into a smaller process over the region boundaries ([`hierarchy`]).

pub mod bench;
pub mod cli;
pub mod decomposition;
pub mod error;
pub mod generation;
pub mod hierarchy;
pub mod io;
pub mod linalg;
pub mod macros;
pub mod maze;
pub mod mdp;
pub mod synth;

pub use decomposition::{compute_peripheries, Decomposition, Periphery};
pub use error::{Error, Result};
pub use hierarchy::{build_abstract_mdp, solve_abstract, AbstractMdp, MacroPolicy};
pub use macros::{Macro, MacroModel, MacroSet, ModelSolver, ModeledMacro};
pub use mdp::{
    policy_evaluation, value_iteration, Choice, EvaluationMethod, Mdp, Objective, Policy, RowClass, Solution,
    SolveReport, StopRule, ValueFunction,
};
