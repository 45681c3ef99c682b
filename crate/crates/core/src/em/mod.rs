//! The EM scheme: each run starts from sampled exogenous PMFs and iterates
//! θ_U ← |D|⁻¹ Σ_v count(v) θ_{U|v} until the likelihood stops improving.
//! The spread of a query over the fitted models is an inner approximation of
//! its bounds.

mod bounds;
mod engine;
mod multi;

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::circuit::{compile, ParamLayout, SymbolicCircuit};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{Pscm, VarId};
use crate::runtime::ParamBinding;

pub use bounds::{bound_query, bruteforce_bounds, grid_size, query_value, BoundsReport, BoundsResult, QueryCircuit};
pub use engine::{CircuitEngine, PosteriorEngine, VeEngine};
pub use multi::{em_multi_run, execute, prepare, run_seed, Plan};

/// Records whose probability falls below this abort the run.
pub const DEGENERATE_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Ve,
    Circuit,
}

/// What runs concurrently. Results never depend on this setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    None,
    Runs,
    Components,
    Both,
}

impl Parallelism {
    pub fn runs(self) -> bool {
        matches!(self, Parallelism::Runs | Parallelism::Both)
    }

    pub fn components(self) -> bool {
        matches!(self, Parallelism::Components | Parallelism::Both)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub runs: usize,
    pub max_iterations: usize,
    pub rel_tolerance: f64,
    pub seed: u64,
    pub parallelism: Parallelism,
    pub engine: Engine,
    /// Fit each c-component separately. Forced on when `parallelism`
    /// includes components.
    pub decompose: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            runs: 200,
            max_iterations: 500,
            rel_tolerance: 1e-7,
            seed: 0,
            parallelism: Parallelism::None,
            engine: Engine::Circuit,
            decompose: true,
        }
    }
}

impl EmConfig {
    pub fn check(&self) -> Result<()> {
        if self.runs == 0 || self.max_iterations == 0 || !(self.rel_tolerance >= 0.0) {
            return Err(Error::Format(
                "runs and max_iterations must be at least 1 and rel_tolerance nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn decomposes(&self) -> bool {
        self.decompose || self.parallelism.components()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    DegenerateRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmRunResult {
    /// Final exogenous PMFs, aligned with the model's exogenous variables.
    pub pmfs: Vec<Vec<f64>>,
    /// Log-likelihood at θ⁰, θ¹, …; one entry more than `iterations`.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// The offending record when `termination` is `DegenerateRecord`.
    pub degenerate_record: Option<Vec<usize>>,
}

impl EmRunResult {
    pub fn final_loglik(&self) -> Option<f64> {
        self.trace.last().copied()
    }
}

/// A flat-Dirichlet PMF for every exogenous variable (ascending id), all
/// entries strictly positive.
pub fn sample_initialization<R: Rng + ?Sized>(pscm: &Pscm, rng: &mut R) -> Vec<Vec<f64>> {
    pscm.exogenous()
        .map(|u| loop {
            let draws: Vec<f64> = (0..pscm.cardinality(u)).map(|_| Exp1.sample(rng)).collect();
            let sum: f64 = draws.iter().sum();
            if draws.iter().all(|&d| d > 0.0) && sum.is_finite() {
                break draws.into_iter().map(|d| d / sum).collect();
            }
        })
        .collect()
}

/// One EM update through an engine. Variables in `frozen` keep their PMFs.
///
/// Returns θ^{t+1} and the log-likelihood at θ^t.
pub fn step_with<E: PosteriorEngine + ?Sized>(
    engine: &mut E,
    layout: &ParamLayout,
    binding: &ParamBinding,
    dataset: &Dataset,
    frozen: &[VarId],
) -> Result<(ParamBinding, f64)> {
    engine.bind(binding)?;
    let mut acc = vec![0.0; layout.len()];
    let mut joints = vec![0.0; layout.len()];
    let mut evidence = vec![None; engine.n_vars()];
    let mut loglik = 0.0;
    let free: Vec<std::ops::Range<usize>> = layout
        .vars()
        .iter()
        .filter(|v| !frozen.contains(v))
        .map(|&v| layout.range(v).expect("symbolic"))
        .collect();
    for rec in dataset.records() {
        dataset.fill_evidence(rec, &mut evidence);
        let degenerate = || Error::ZeroProbabilityRecord { record: rec.values.clone() };
        let pv = match engine.joints(&evidence, &mut joints) {
            Ok(p) if p >= DEGENERATE_FLOOR => p,
            Ok(_) | Err(Error::ZeroEvidence) => return Err(degenerate()),
            Err(e) => return Err(e),
        };
        let w = rec.count as f64;
        loglik += w * pv.ln();
        let scale = w / pv;
        for r in &free {
            for p in r.clone() {
                acc[p] += scale * joints[p];
            }
        }
    }
    let mut next = binding.clone();
    if dataset.total() > 0 {
        let n = dataset.total() as f64;
        let values = next.values_mut();
        for r in free {
            for p in r.clone() {
                values[p] = acc[p] / n;
            }
            let sum: f64 = values[r.clone()].iter().sum();
            for p in r {
                values[p] /= sum;
            }
        }
    }
    Ok((next, loglik))
}

/// Log-likelihood only (upward passes), used for the final trace entry.
pub fn loglik_with<E: PosteriorEngine + ?Sized>(
    engine: &mut E,
    binding: &ParamBinding,
    dataset: &Dataset,
) -> Result<f64> {
    engine.bind(binding)?;
    let mut evidence = vec![None; engine.n_vars()];
    let mut loglik = 0.0;
    for rec in dataset.records() {
        dataset.fill_evidence(rec, &mut evidence);
        match engine.evidence_prob(&evidence) {
            Ok(p) if p >= DEGENERATE_FLOOR => loglik += rec.count as f64 * p.ln(),
            Ok(_) | Err(Error::ZeroEvidence) => {
                return Err(Error::ZeroProbabilityRecord { record: rec.values.clone() })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(loglik)
}

/// One EM update on a compiled circuit (all exogenous variables free).
pub fn em_step(
    circuit: &SymbolicCircuit,
    binding: &ParamBinding,
    dataset: &Dataset,
) -> Result<(ParamBinding, f64)> {
    let mut engine = CircuitEngine::new(circuit);
    step_with(&mut engine, circuit.layout(), binding, dataset, &[])
}

fn relative_gain(new: f64, old: f64) -> f64 {
    if old == 0.0 {
        new - old
    } else {
        (new - old) / old.abs()
    }
}

fn max_change(a: &ParamBinding, b: &ParamBinding) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Iterates [`step_with`] from `init` until converged, out of iterations, or
/// a record becomes degenerate.
///
/// Convergence needs both the relative log-likelihood gain and the largest
/// parameter change of the last update to be within `rel_tolerance`.
pub fn run_with<E: PosteriorEngine + ?Sized>(
    engine: &mut E,
    layout: &ParamLayout,
    init: ParamBinding,
    dataset: &Dataset,
    frozen: &[VarId],
    config: &EmConfig,
    deadline: Option<Instant>,
) -> Result<EmRunResult> {
    let tol = config.rel_tolerance;
    let degenerate = |theta: &ParamBinding, trace: Vec<f64>, iterations, record| EmRunResult {
        pmfs: theta.pmfs(layout),
        trace,
        iterations,
        termination: Termination::DegenerateRecord,
        degenerate_record: Some(record),
    };

    let (mut next, mut last_ll) = match step_with(engine, layout, &init, dataset, frozen) {
        Ok(r) => r,
        Err(Error::ZeroProbabilityRecord { record }) => return Ok(degenerate(&init, vec![], 0, record)),
        Err(e) => return Err(e),
    };
    let mut trace = vec![last_ll];
    let mut prev = init;
    let mut iterations = 1;
    loop {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(Error::Timeout);
        }
        let theta = next;
        let final_pass = iterations >= config.max_iterations;
        let outcome = if final_pass {
            loglik_with(engine, &theta, dataset).map(|ll| (None, ll))
        } else {
            step_with(engine, layout, &theta, dataset, frozen).map(|(n, ll)| (Some(n), ll))
        };
        let (candidate, ll) = match outcome {
            Ok(r) => r,
            Err(Error::ZeroProbabilityRecord { record }) => {
                return Ok(degenerate(&theta, trace, iterations, record));
            }
            Err(e) => return Err(e),
        };
        trace.push(ll);
        let converged = relative_gain(ll, last_ll) <= tol && max_change(&theta, &prev) <= tol;
        if converged || final_pass {
            return Ok(EmRunResult {
                pmfs: theta.pmfs(layout),
                trace,
                iterations,
                termination: if converged { Termination::Converged } else { Termination::MaxIterations },
                degenerate_record: None,
            });
        }
        prev = theta;
        next = candidate.expect("full step computed the next iterate");
        last_ll = ll;
        iterations += 1;
    }
}

/// A single EM run on the whole model with the configured engine. The
/// circuit, when used, is compiled once before the loop.
pub fn em_run(pscm: &Pscm, dataset: &Dataset, init: &[Vec<f64>], config: &EmConfig) -> Result<EmRunResult> {
    config.check()?;
    let layout = ParamLayout::of_pscm(pscm);
    let binding = ParamBinding::new(&layout, init)?;
    match config.engine {
        Engine::Circuit => {
            let circuit = compile(pscm);
            let mut engine = CircuitEngine::new(&circuit);
            run_with(&mut engine, &layout, binding, dataset, &[], config, None)
        }
        Engine::Ve => {
            let mut engine = VeEngine::new(pscm, &[]);
            run_with(&mut engine, &layout, binding, dataset, &[], config, None)
        }
    }
}
