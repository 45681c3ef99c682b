//! Bounds on partially identifiable counterfactual queries in structural
//! causal models.
//!
//! The EM scheme samples exogenous initialisations, fits each to the data and
//! reports the range of query values over the fitted models. Every EM query
//! runs either by variable elimination ([`ve`]) or on an arithmetic circuit
//! compiled once per model structure with the exogenous probabilities left as
//! symbolic parameters ([`circuit`], [`runtime`]).

pub mod circuit;
pub mod dataset;
pub mod em;
pub mod error;
pub mod fixtures;
pub mod generate;
pub mod harness;
pub mod io;
pub mod model;
pub mod runtime;
pub mod ve;

pub use circuit::{compile, compile_unfolded, CircuitStats, ParamId, SymbolicCircuit};
pub use dataset::{Dataset, Record};
pub use em::{
    bound_query, bruteforce_bounds, em_multi_run, em_run, em_step, query_value, BoundsResult,
    EmConfig, EmRunResult, Engine, Parallelism, Termination,
};
pub use error::{Error, Result};
pub use model::{
    build_twin, c_components, component_submodel, induced_bn, intervene, se_to_cpt, validate,
    CComponent, CounterfactualQuery, Cpt, Fscm, Pscm, PscmBuilder, StructuralEquation, Target,
    VarId, VarKind, Variable, World,
};
pub use runtime::{EvalScratch, ParamBinding};
