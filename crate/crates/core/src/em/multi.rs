use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::engine::{CircuitEngine, VeEngine};
use super::{run_with, sample_initialization, EmConfig, EmRunResult, Engine, Termination};
use crate::circuit::{compile, ParamLayout, SymbolicCircuit};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{c_components, component_submodel, Pscm, VarId, VarKind};
use crate::runtime::ParamBinding;

/// Seed of the initialization stream of run `run`.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    seed ^ run as u64
}

struct Part {
    pscm: Pscm,
    dataset: Dataset,
    layout: ParamLayout,
    frozen: Vec<VarId>,
    circuit: Option<SymbolicCircuit>,
    to_original: Vec<VarId>,
    /// Added to the part's log-likelihood to remove the uniform boundary roots.
    correction: f64,
}

/// Everything EM needs that does not depend on the run: the (sub)models,
/// their projected data and, for the circuit engine, compiled circuits.
pub struct Plan {
    parts: Vec<Part>,
    exo_position: Vec<Option<usize>>,
    compile_ms: f64,
}

impl Plan {
    pub fn parts(&self) -> usize {
        self.parts.len()
    }

    /// Wall time spent compiling circuits.
    pub fn compile_ms(&self) -> f64 {
        self.compile_ms
    }

    pub fn circuits(&self) -> impl Iterator<Item = &SymbolicCircuit> {
        self.parts.iter().filter_map(|p| p.circuit.as_ref())
    }
}

fn check_dataset(pscm: &Pscm, dataset: &Dataset) -> Result<()> {
    let mut cols = dataset.columns().to_vec();
    cols.sort();
    let endo: Vec<VarId> = pscm.endogenous().collect();
    if cols != endo {
        return Err(Error::Format("dataset columns must be exactly the endogenous variables".into()));
    }
    for rec in dataset.records() {
        for (c, &s) in dataset.columns().iter().zip(&rec.values) {
            if s >= pscm.cardinality(*c) {
                return Err(Error::Format(format!(
                    "state {s} out of range for {}",
                    pscm.variable(*c).name
                )));
            }
        }
    }
    Ok(())
}

pub fn prepare(pscm: &Pscm, dataset: &Dataset, config: &EmConfig) -> Result<Plan> {
    config.check()?;
    check_dataset(pscm, dataset)?;
    let n = dataset.total() as f64;
    let mut parts = Vec::new();
    if config.decomposes() {
        for comp in c_components(pscm) {
            let sub = component_submodel(pscm, &comp, dataset);
            let correction = n * comp.boundary_parents.iter().map(|&b| (pscm.cardinality(b) as f64).ln()).sum::<f64>();
            parts.push(Part {
                layout: ParamLayout::of_pscm(&sub.pscm),
                frozen: sub.boundary.clone(),
                pscm: sub.pscm,
                dataset: sub.dataset,
                circuit: None,
                to_original: sub.to_original,
                correction,
            });
        }
    } else {
        parts.push(Part {
            pscm: pscm.clone(),
            dataset: dataset.clone(),
            layout: ParamLayout::of_pscm(pscm),
            frozen: vec![],
            circuit: None,
            to_original: (0..pscm.len()).map(VarId).collect(),
            correction: 0.0,
        });
    }

    let start = Instant::now();
    if config.engine == Engine::Circuit {
        for part in &mut parts {
            part.circuit = Some(compile(&part.pscm));
        }
    }
    let compile_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut exo_position = vec![None; pscm.len()];
    for (i, u) in pscm.exogenous().enumerate() {
        exo_position[u.0] = Some(i);
    }
    Ok(Plan { parts, exo_position, compile_ms })
}

fn run_part(
    part: &Part,
    full_init: &[Vec<f64>],
    exo_position: &[Option<usize>],
    config: &EmConfig,
    deadline: Option<Instant>,
) -> Result<EmRunResult> {
    let pmfs: Vec<Vec<f64>> = part
        .layout
        .vars()
        .iter()
        .map(|&v| {
            let k = part.pscm.cardinality(v);
            if part.frozen.contains(&v) {
                vec![1.0 / k as f64; k]
            } else {
                full_init[exo_position[part.to_original[v.0].0].expect("exogenous")].clone()
            }
        })
        .collect();
    let init = ParamBinding::from_values(pmfs.concat());
    match &part.circuit {
        Some(c) => {
            let mut engine = CircuitEngine::new(c);
            run_with(&mut engine, &part.layout, init, &part.dataset, &part.frozen, config, deadline)
        }
        None => {
            let mut engine = VeEngine::new(&part.pscm, &part.frozen);
            run_with(&mut engine, &part.layout, init, &part.dataset, &part.frozen, config, deadline)
        }
    }
}

fn merge(plan: &Plan, full_init: &[Vec<f64>], pieces: Vec<EmRunResult>) -> EmRunResult {
    let mut pmfs = full_init.to_vec();
    let len = pieces.iter().map(|r| r.trace.len()).max().unwrap_or(0);
    let mut trace = vec![0.0; len];
    let mut termination = Termination::Converged;
    let mut degenerate_record = None;
    for (part, piece) in plan.parts.iter().zip(&pieces) {
        for (k, &v) in part.layout.vars().iter().enumerate() {
            if part.pscm.variable(v).kind == VarKind::Exogenous && !part.frozen.contains(&v) {
                pmfs[plan.exo_position[part.to_original[v.0].0].expect("exogenous")] = piece.pmfs[k].clone();
            }
        }
        if let Some(&last) = piece.trace.last() {
            for (t, slot) in trace.iter_mut().enumerate() {
                *slot += piece.trace.get(t).copied().unwrap_or(last) + part.correction;
            }
        }
        match piece.termination {
            Termination::DegenerateRecord => {
                termination = Termination::DegenerateRecord;
                degenerate_record = degenerate_record.or_else(|| piece.degenerate_record.clone());
            }
            Termination::MaxIterations if termination == Termination::Converged => {
                termination = Termination::MaxIterations;
            }
            _ => {}
        }
    }
    EmRunResult {
        pmfs,
        trace,
        iterations: pieces.iter().map(|r| r.iterations).max().unwrap_or(0),
        termination,
        degenerate_record,
    }
}

/// Runs `config.runs` EM runs over a prepared plan. Run `r` is initialized
/// from [`run_seed`]`(config.seed, r)`; results do not depend on
/// `config.parallelism`.
pub fn execute(plan: &Plan, pscm: &Pscm, config: &EmConfig, deadline: Option<Instant>) -> Result<Vec<EmRunResult>> {
    config.check()?;
    let inits: Vec<Vec<Vec<f64>>> = (0..config.runs)
        .map(|r| sample_initialization(pscm, &mut ChaCha8Rng::seed_from_u64(run_seed(config.seed, r))))
        .collect();
    let n_parts = plan.parts.len();
    let task = |p: usize, r: usize| run_part(&plan.parts[p], &inits[r], &plan.exo_position, config, deadline);

    let grid: Vec<Vec<Result<EmRunResult>>> = match (config.parallelism.runs(), config.parallelism.components()) {
        (false, false) => (0..config.runs).map(|r| (0..n_parts).map(|p| task(p, r)).collect()).collect(),
        (true, false) => (0..config.runs)
            .into_par_iter()
            .map(|r| (0..n_parts).map(|p| task(p, r)).collect())
            .collect(),
        (false, true) => {
            let by_part: Vec<Vec<Result<EmRunResult>>> =
                (0..n_parts).into_par_iter().map(|p| (0..config.runs).map(|r| task(p, r)).collect()).collect();
            transpose(by_part, config.runs)
        }
        (true, true) => (0..config.runs)
            .into_par_iter()
            .map(|r| (0..n_parts).into_par_iter().map(|p| task(p, r)).collect())
            .collect(),
    };

    grid.into_iter()
        .zip(&inits)
        .map(|(row, init)| Ok(merge(plan, init, row.into_iter().collect::<Result<Vec<_>>>()?)))
        .collect()
}

fn transpose<T>(by_part: Vec<Vec<T>>, runs: usize) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = (0..runs).map(|_| Vec::with_capacity(by_part.len())).collect();
    for column in by_part {
        for (r, cell) in column.into_iter().enumerate() {
            out[r].push(cell);
        }
    }
    out
}

/// [`prepare`] followed by [`execute`].
pub fn em_multi_run(pscm: &Pscm, dataset: &Dataset, config: &EmConfig) -> Result<Vec<EmRunResult>> {
    let plan = prepare(pscm, dataset, config)?;
    execute(&plan, pscm, config, None)
}
