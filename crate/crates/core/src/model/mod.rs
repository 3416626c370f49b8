//! Decision variables, objective functions and the constraint checker.

mod check;
mod objectives;
mod solution;

pub use check::{
    check_constraints, ConstraintEntry, ConstraintId, ConstraintReport, FEASIBILITY_TOL,
};
pub use objectives::{
    dominates, dominates_unchecked, evaluate, evaluate_cost, evaluate_coverage,
    evaluate_gateway_balance, evaluate_link_balance, gateway_balance, CoverageMode, Metrics,
    ModelVariant, ObjectiveVector,
};
pub use solution::{LinkId, Solution, SolutionFile};
