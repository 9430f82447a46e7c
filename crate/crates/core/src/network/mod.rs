//! Admittance assembly and the algebraic network equations.

mod admittance;
mod powerflow;

pub use admittance::{build_admittance, AdmittanceMatrix};
pub use powerflow::{
    algebraic_jacobian, evaluate_mismatch, min_singular_value, network_injections, newton_solve,
    newton_solve_reusing,    scheduled_injections, solve_power_flow, solve_power_flow_with, AlgebraicState, BusRole, InjectionModel,
    LocalInjection, NewtonOptions, NewtonReport, NewtonWorkspace, PowerFlowOptions, PowerFlowSolution, PowerMismatch,
    UnknownMap,
};
