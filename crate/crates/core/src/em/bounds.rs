use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::multi::{execute, prepare};
use super::{EmConfig, EmRunResult, Termination};
use crate::circuit::{compile, SymbolicCircuit};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{build_twin, config_index, config_states, intervene, CounterfactualQuery, Fscm, Pscm, VarId};
use crate::runtime::{evaluate, EvalScratch, ParamBinding};

/// A counterfactual query compiled once on its twin network and evaluated
/// for many exogenous PMFs.
pub struct QueryCircuit {
    circuit: SymbolicCircuit,
    evidence: Vec<Option<usize>>,
    joint_evidence: Option<Vec<Option<usize>>>,
}

impl QueryCircuit {
    pub fn new(pscm: &Pscm, query: &CounterfactualQuery) -> Result<Self> {
        let twin = build_twin(pscm, query)?;
        let evidence = twin.evidence(query);
        let (t, state) = twin.target(query);
        let joint_evidence = match evidence[t.0] {
            Some(s) if s != state => None,
            _ => {
                let mut e = evidence.clone();
                e[t.0] = Some(state);
                Some(e)
            }
        };
        Ok(Self { circuit: compile(&twin.pscm), evidence, joint_evidence })
    }

    pub fn circuit(&self) -> &SymbolicCircuit {
        &self.circuit
    }

    /// P(target | observations) under `pmfs` (aligned with the exogenous
    /// variables). Fails with [`Error::ZeroEvidence`] when the observations
    /// have probability zero.
    pub fn value(&self, pmfs: &[Vec<f64>]) -> Result<f64> {
        let binding = ParamBinding::new(self.circuit.layout(), pmfs)?;
        let mut scratch = EvalScratch::new(&self.circuit);
        let p_obs = evaluate(&self.circuit, &binding, &self.evidence, &mut scratch)?;
        if p_obs <= 0.0 {
            return Err(Error::ZeroEvidence);
        }
        let p_joint = match &self.joint_evidence {
            Some(e) => evaluate(&self.circuit, &binding, e, &mut scratch)?,
            None => 0.0,
        };
        Ok(p_joint / p_obs)
    }
}

pub fn query_value(fscm: &Fscm, query: &CounterfactualQuery) -> Result<f64> {
    QueryCircuit::new(&fscm.pscm, query)?.value(&fscm.exo_pmfs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsResult {
    pub query: CounterfactualQuery,
    /// `None` for runs that aborted or where the observations are impossible.
    pub per_run_values: Vec<Option<f64>>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug)]
pub struct BoundsReport {
    pub bounds: BoundsResult,
    pub runs: Vec<EmRunResult>,
    pub compile_ms: f64,
    pub em_ms: f64,
}

/// Runs EM and reports the range of the query over the fitted models.
pub fn bound_query(
    pscm: &Pscm,
    dataset: &Dataset,
    query: &CounterfactualQuery,
    config: &EmConfig,
    deadline: Option<Instant>,
) -> Result<BoundsReport> {
    let qc = QueryCircuit::new(pscm, query)?;
    let plan = prepare(pscm, dataset, config)?;
    let start = Instant::now();
    let runs = execute(&plan, pscm, config, deadline)?;
    let em_ms = start.elapsed().as_secs_f64() * 1e3;
    let per_run_values: Vec<Option<f64>> = runs
        .iter()
        .map(|r| match r.termination {
            Termination::DegenerateRecord => None,
            _ => qc.value(&r.pmfs).ok(),
        })
        .collect();
    let valid = per_run_values.iter().flatten();
    let lower = valid.clone().copied().fold(f64::INFINITY, f64::min);
    let upper = valid.copied().fold(f64::NEG_INFINITY, f64::max);
    if lower > upper {
        return Err(Error::NoValidRuns);
    }
    Ok(BoundsReport {
        bounds: BoundsResult { query: query.clone(), per_run_values, lower, upper },
        runs,
        compile_ms: plan.compile_ms(),
        em_ms,
    })
}

/// All PMFs over `k` states whose entries are multiples of `1/steps`.
fn simplex_grid(k: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for x in 0..=left {
            cur.push(x);
            rec(k - 1, left - x, cur, out);
            cur.pop();
        }
    }
    let mut ints = Vec::new();
    rec(k, steps, &mut Vec::new(), &mut ints);
    ints.into_iter().map(|v| v.into_iter().map(|x| x as f64 / steps as f64).collect()).collect()
}

/// Grid points visited by [`bruteforce_bounds`].
pub fn grid_size(pscm: &Pscm, steps: usize) -> f64 {
    pscm.exogenous()
        .map(|u| {
            let k = pscm.cardinality(u) as u32;
            // C(steps + k - 1, k - 1)
            (1..k).fold(1.0, |acc, i| acc * (steps as f64 + i as f64) / i as f64)
        })
        .product()
}

/// Query range over every exogenous parameterization on a regular simplex
/// grid whose induced endogenous distribution is within `tolerance` (L∞) of
/// the empirical one. Works by direct enumeration of exogenous configurations.
pub fn bruteforce_bounds(
    pscm: &Pscm,
    dataset: &Dataset,
    query: &CounterfactualQuery,
    steps: usize,
    tolerance: f64,
) -> Result<(f64, f64)> {
    query.validate(pscm)?;
    if steps == 0 || grid_size(pscm, steps) > 5e7 {
        return Err(Error::Format("grid too large".into()));
    }
    let exo: Vec<VarId> = pscm.exogenous().collect();
    let endo: Vec<VarId> = pscm.endogenous().collect();
    let exo_cards: Vec<usize> = exo.iter().map(|&u| pscm.cardinality(u)).collect();
    let endo_cards: Vec<usize> = endo.iter().map(|&v| pscm.cardinality(v)).collect();
    let n_endo_cfg: usize = endo_cards.iter().product();
    let n_exo_cfg: usize = exo_cards.iter().product();

    let col_of: Vec<usize> = endo
        .iter()
        .map(|v| {
            dataset
                .columns()
                .iter()
                .position(|c| c == v)
                .ok_or_else(|| Error::Format(format!("dataset lacks {}", pscm.variable(*v).name)))
        })
        .collect::<Result<_>>()?;
    let mut empirical = vec![0.0; n_endo_cfg];
    for rec in dataset.records() {
        let idx = config_index(col_of.iter().map(|&c| rec.values[c]), &endo_cards);
        empirical[idx] += rec.count as f64 / dataset.total() as f64;
    }

    let order = pscm.topological_order().ok_or_else(|| Error::Format("cyclic model".into()))?;
    let worlds: Vec<(Pscm, Vec<VarId>)> = query
        .worlds
        .iter()
        .map(|w| {
            let m = intervene(pscm, &w.interventions)?;
            let o = m.topological_order().ok_or_else(|| Error::Format("cyclic model".into()))?;
            Ok((m, o))
        })
        .collect::<Result<_>>()?;

    // per exogenous configuration: factual endogenous config, observations
    // consistent, target holds
    let mut table = Vec::with_capacity(n_exo_cfg);
    let mut u_states = vec![0; exo.len()];
    let mut states = vec![0; pscm.len()];
    for cfg in 0..n_exo_cfg {
        config_states(cfg, &exo_cards, &mut u_states);
        for (&u, &s) in exo.iter().zip(&u_states) {
            states[u.0] = s;
        }
        pscm.propagate(&order, &mut states);
        let v_idx = config_index(endo.iter().map(|v| states[v.0]), &endo_cards);
        let mut consistent = true;
        let mut hit = false;
        for (w, (m, o)) in worlds.iter().enumerate() {
            m.propagate(o, &mut states);
            consistent &= query.worlds[w].observations.iter().all(|(v, &s)| states[v.0] == s);
            if w == query.target.world {
                hit = states[query.target.variable.0] == query.target.state;
            }
        }
        table.push((v_idx, consistent, consistent && hit));
    }

    let grids: Vec<Vec<Vec<f64>>> = exo_cards.iter().map(|&k| simplex_grid(k, steps)).collect();
    let mut pick = vec![0usize; exo.len()];
    let mut induced = vec![0.0; n_endo_cfg];
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    let mut closest = f64::INFINITY;
    loop {
        induced.fill(0.0);
        let (mut p_obs, mut p_joint) = (0.0, 0.0);
        for (cfg, &(v_idx, consistent, hit)) in table.iter().enumerate() {
            config_states(cfg, &exo_cards, &mut u_states);
            let w: f64 = u_states.iter().enumerate().map(|(i, &s)| grids[i][pick[i]][s]).product();
            induced[v_idx] += w;
            if consistent {
                p_obs += w;
            }
            if hit {
                p_joint += w;
            }
        }
        let fit = induced.iter().zip(&empirical).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        closest = closest.min(fit);
        if fit <= tolerance && p_obs > 0.0 {
            let value = p_joint / p_obs;
            lower = lower.min(value);
            upper = upper.max(value);
        }

        let mut i = 0;
        loop {
            if i == pick.len() {
                return if lower <= upper { Ok((lower, upper)) } else { Err(Error::NoFeasiblePoint { closest }) };
            }
            pick[i] += 1;
            if pick[i] < grids[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn fig3_counterfactual_value() {
        let f = fixtures::fig3_fscm();
        let q = fixtures::fig3_counterfactual(&f.pscm);
        assert!((query_value(&f, &q).unwrap() - 11.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn impossible_observations_have_no_value() {
        let f = Fscm::new(fixtures::fig3_pscm(), vec![vec![1.0, 0.0], vec![0.25; 4]]).unwrap();
        let q = fixtures::fig3_counterfactual(&f.pscm);
        assert!(matches!(query_value(&f, &q), Err(Error::ZeroEvidence)));
    }

    #[test]
    fn simplex_grid_counts() {
        assert_eq!(simplex_grid(2, 4).len(), 5);
        assert_eq!(simplex_grid(3, 4).len(), 15);
        for p in simplex_grid(4, 3) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(grid_size(&fixtures::fig3_pscm(), 10), 11.0 * 286.0);
    }

    #[test]
    fn bruteforce_on_fig3_contains_the_truth() {
        let f = fixtures::fig3_fscm();
        let q = fixtures::fig3_counterfactual(&f.pscm);
        let cols = vec![f.pscm.find("V1").unwrap(), f.pscm.find("V2").unwrap()];
        // exact joint of V1, V2 scaled to 1000 rows: 0.1*[0.2 0.8] and 0.9*[0.3 0.7]
        let d = Dataset::from_counts(cols, vec![
            (vec![0, 0], 20),
            (vec![0, 1], 80),
            (vec![1, 0], 270),
            (vec![1, 1], 630),
        ]);
        let (lo, hi) = bruteforce_bounds(&f.pscm, &d, &q, 20, 0.02).unwrap();
        assert!(lo <= 11.0 / 14.0 + 0.05 && 11.0 / 14.0 - 0.05 <= hi, "{lo} {hi}");
        assert!(lo < hi);
    }
}
