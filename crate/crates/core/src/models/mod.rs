//! Dynamic component models: load noise, recovery loads, load ramps and
//! synchronous machines.

pub mod erl;
pub mod machine;
pub mod ou;
pub mod ramp;

pub use erl::{
    erl_characteristics, erl_derivatives, erl_initialize, erl_power, erl_power_voltage_sensitivity, erl_steady_power,
    ErlCharacteristics, ErlModel, ErlState,
};
pub use machine::{
    machine_derivatives, machine_initialize, machine_injection, MachineModel, MachineOrder, MachineSetpoints,
    MachineState,
};
pub use ou::{euler_maruyama_stationary_variance, ou_initialize, ou_step, OuChannel, OuProcess, OuScheme};
pub use ramp::{ramp_value, RampMode, RampSchedule};
