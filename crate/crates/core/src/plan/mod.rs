//! Pulse-sequence plans: text DSL, absolute-time timeline, and a
//! deterministic executor driving the DNP and signal forward models.

mod ast;
mod executor;
mod parser;
mod timeline;

pub use ast::{Duration, FreqUnit, Frequency, Phase, PlanAst, Stmt, TimeUnit};
pub use executor::{
    execute_plan, sweep_frequencies, AcquisitionResult, Execution, ExecutionState, PhysicsConfig,
};
pub use parser::parse_plan;
pub use timeline::{compile_timeline, Channel, CompileDefaults, Event, Payload, Timeline};
