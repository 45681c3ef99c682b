//! Independent oracles and hand-built models shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use scmbound::{CounterfactualQuery, Dataset, Fscm, Pscm, PscmBuilder, Target, VarId, VarKind, World};

/// Mixed-radix decoding, last position fastest.
fn decode(mut index: usize, cards: &[usize]) -> Vec<usize> {
    let mut out = vec![0; cards.len()];
    for i in (0..cards.len()).rev() {
        out[i] = index % cards[i];
        index /= cards[i];
    }
    out
}

/// Endogenous values forced by a full exogenous assignment, by repeated
/// sweeps over the equations until every variable is set.
pub fn solve(pscm: &Pscm, exo_states: &BTreeMap<VarId, usize>) -> Vec<usize> {
    let mut value: Vec<Option<usize>> = (0..pscm.len()).map(|i| exo_states.get(&VarId(i)).copied()).collect();
    loop {
        let mut progress = false;
        for eq in pscm.equations() {
            if value[eq.child.0].is_some() {
                continue;
            }
            let inputs: Option<Vec<usize>> = eq.inputs.iter().map(|i| value[i.0]).collect();
            if let Some(states) = inputs {
                let mut row = 0;
                for (s, i) in states.iter().zip(&eq.inputs) {
                    row = row * pscm.variable(*i).cardinality + s;
                }
                value[eq.child.0] = Some(eq.table[row]);
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    value.into_iter().map(|v| v.expect("every variable determined")).collect()
}

/// Every exogenous configuration with its probability and the full state
/// vector it induces.
pub fn enumerate(fscm: &Fscm) -> Vec<(f64, Vec<usize>)> {
    let exo: Vec<VarId> = fscm.pscm.variables().iter().filter(|v| v.kind == VarKind::Exogenous).map(|v| v.id).collect();
    let cards: Vec<usize> = exo.iter().map(|u| fscm.pscm.variable(*u).cardinality).collect();
    let total: usize = cards.iter().product();
    (0..total)
        .map(|i| {
            let states = decode(i, &cards);
            let w: f64 = states.iter().enumerate().map(|(k, &s)| fscm.exo_pmfs[k][s]).product();
            let map = exo.iter().copied().zip(states).collect();
            (w, solve(&fscm.pscm, &map))
        })
        .collect()
}

/// P(evidence) by full-joint enumeration. `evidence` is indexed by id.
pub fn evidence_prob(fscm: &Fscm, evidence: &[Option<usize>]) -> f64 {
    enumerate(fscm)
        .into_iter()
        .filter(|(_, s)| evidence.iter().enumerate().all(|(i, e)| e.is_none_or(|e| s[i] == e)))
        .map(|(w, _)| w)
        .sum()
}

/// Exact dataset of `n` rows: the endogenous joint scaled by `n` and rounded,
/// with the largest cell absorbing the rounding residue.
pub fn rounded_dataset(fscm: &Fscm, n: u64) -> Dataset {
    let endo: Vec<VarId> = fscm.pscm.variables().iter().filter(|v| v.kind == VarKind::Endogenous).map(|v| v.id).collect();
    let mut joint: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (w, s) in enumerate(fscm) {
        *joint.entry(endo.iter().map(|v| s[v.0]).collect()).or_default() += w;
    }
    let mut counts: Vec<(Vec<usize>, u64)> = joint.iter().map(|(k, p)| (k.clone(), (p * n as f64).round() as u64)).collect();
    let assigned: u64 = counts.iter().map(|c| c.1).sum();
    let largest = counts.iter().enumerate().max_by(|a, b| a.1 .1.cmp(&b.1 .1)).map(|(i, _)| i).unwrap();
    counts[largest].1 = (counts[largest].1 + n).saturating_sub(assigned);
    Dataset::from_counts(endo, counts)
}

/// Confounded models with at most six free exogenous parameters, each with
/// a counterfactual query.
pub fn confounded_models() -> Vec<(&'static str, Fscm, CounterfactualQuery)> {
    let mut out = Vec::new();

    {
        let f = scmbound::fixtures::fig3_fscm();
        let q = scmbound::fixtures::fig3_counterfactual(&f.pscm);
        out.push(("two-node", f, q));
    }

    {
        // X and Y share U; effect of treatment on the treated
        let mut b = PscmBuilder::new();
        let u = b.exogenous("U", 4);
        let x = b.endogenous("X", 2);
        let y = b.endogenous("Y", 2);
        b.equation(x, &[u], vec![0, 0, 1, 1]);
        b.equation(y, &[u, x], vec![0, 1, 0, 0, 1, 1, 0, 1]);
        let f = Fscm::new(b.build().unwrap(), vec![vec![0.3, 0.2, 0.35, 0.15]]).unwrap();
        let q = CounterfactualQuery {
            worlds: vec![
                World { observations: [(x, 0)].into(), ..World::default() },
                World { interventions: [(x, 1)].into(), ..World::default() },
            ],
            target: Target { world: 1, variable: y, state: 1 },
        };
        out.push(("shared-confounder", f, q));
    }

    {
        // chain with a confounder between its ends
        let mut b = PscmBuilder::new();
        let u1 = b.exogenous("U1", 4);
        let u2 = b.exogenous("U2", 2);
        let a = b.endogenous("A", 2);
        let m = b.endogenous("M", 2);
        let c = b.endogenous("C", 2);
        b.equation(a, &[u1], vec![0, 1, 0, 1]);
        b.equation(m, &[u2, a], vec![0, 1, 1, 0]);
        b.equation(c, &[u1, m], vec![0, 1, 0, 0, 1, 1, 1, 0]);
        let f = Fscm::new(b.build().unwrap(), vec![vec![0.1, 0.4, 0.3, 0.2], vec![0.7, 0.3]]).unwrap();
        let q = CounterfactualQuery {
            worlds: vec![
                World { observations: [(c, 1)].into(), ..World::default() },
                World { interventions: [(m, 0)].into(), ..World::default() },
            ],
            target: Target { world: 1, variable: c, state: 1 },
        };
        out.push(("confounded-chain", f, q));
    }

    {
        // instrument Z, confounded X and Y; probability of necessity style query
        let mut b = PscmBuilder::new();
        let u1 = b.exogenous("U1", 2);
        let u2 = b.exogenous("U2", 4);
        let z = b.endogenous("Z", 2);
        let x = b.endogenous("X", 2);
        let y = b.endogenous("Y", 2);
        b.equation(z, &[u1], vec![0, 1]);
        b.equation(x, &[u2, z], vec![0, 1, 0, 0, 1, 1, 1, 0]);
        b.equation(y, &[u2, x], vec![0, 1, 1, 1, 1, 1, 1, 0]);
        let f = Fscm::new(b.build().unwrap(), vec![vec![0.45, 0.55], vec![0.2, 0.3, 0.4, 0.1]]).unwrap();
        let q = CounterfactualQuery {
            worlds: vec![
                World { observations: [(x, 1), (y, 1)].into(), ..World::default() },
                World { interventions: [(x, 0)].into(), ..World::default() },
            ],
            target: Target { world: 1, variable: y, state: 0 },
        };
        out.push(("instrument", f, q));
    }

    {
        // two components: a confounded pair feeding a ternary-noise child
        let mut b = PscmBuilder::new();
        let u1 = b.exogenous("U1", 3);
        let u2 = b.exogenous("U2", 3);
        let p = b.endogenous("P", 2);
        let r = b.endogenous("R", 2);
        let s = b.endogenous("S", 2);
        b.equation(p, &[u1], vec![0, 1, 1]);
        b.equation(r, &[u1, p], vec![0, 1, 1, 0, 0, 1]);
        b.equation(s, &[u2, r], vec![0, 1, 1, 0, 1, 1]);
        let f = Fscm::new(b.build().unwrap(), vec![vec![0.5, 0.3, 0.2], vec![0.25, 0.45, 0.3]]).unwrap();
        let q = CounterfactualQuery {
            worlds: vec![
                World { observations: [(s, 1), (p, 1)].into(), ..World::default() },
                World { interventions: [(r, 0)].into(), ..World::default() },
            ],
            target: Target { world: 1, variable: s, state: 1 },
        };
        out.push(("two-components", f, q));
    }

    out
}

/// A small random FSCM with endogenous cardinalities 2–3, built without the
/// library generator. Each endogenous variable draws an exogenous parent
/// (fresh or shared with an earlier variable) and earlier endogenous parents.
pub fn random_fscm(seed: u64, max_endogenous: usize, max_exo_card: usize) -> Fscm {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_endogenous);
    let mut exo_of = Vec::new();
    let mut exo_cards: Vec<usize> = Vec::new();
    let mut used: Vec<usize> = Vec::new();
    for _ in 0..n {
        let shareable: Vec<usize> = (0..exo_cards.len()).filter(|&u| used[u] < 2).collect();
        if !shareable.is_empty() && rng.random_bool(0.3) {
            let u = shareable[rng.random_range(0..shareable.len())];
            used[u] += 1;
            exo_of.push(u);
        } else {
            exo_cards.push(rng.random_range(2..=max_exo_card));
            used.push(1);
            exo_of.push(exo_cards.len() - 1);
        }
    }
    // never more states than exogenous inputs, so tables can be surjective
    let endo_cards: Vec<usize> = (0..n).map(|j| rng.random_range(2..=3).min(exo_cards[exo_of[j]])).collect();
    let mut b = PscmBuilder::new();
    let exo: Vec<VarId> = exo_cards.iter().enumerate().map(|(i, &k)| b.exogenous(&format!("U{i}"), k)).collect();
    let endo: Vec<VarId> = endo_cards.iter().enumerate().map(|(i, &k)| b.endogenous(&format!("V{i}"), k)).collect();
    for j in 0..n {
        let mut inputs = vec![exo[exo_of[j]]];
        for i in 0..j {
            if rng.random_bool(0.4) {
                inputs.push(endo[i]);
            }
        }
        let rows: usize = inputs
            .iter()
            .map(|v| if v.0 < exo.len() { exo_cards[v.0] } else { endo_cards[v.0 - exo.len()] })
            .product();
        let table = loop {
            let t: Vec<usize> = (0..rows).map(|_| rng.random_range(0..endo_cards[j])).collect();
            if (0..endo_cards[j]).all(|s| t.contains(&s)) {
                break t;
            }
        };
        b.equation(endo[j], &inputs, table);
    }
    let pscm = b.build().expect("random model is valid");
    let pmfs = exo_cards
        .iter()
        .map(|&k| {
            let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
        .collect();
    Fscm::new(pscm, pmfs).unwrap()
}

/// A random full evidence vector over the endogenous variables, some
/// entries left unobserved.
pub fn random_evidence(fscm: &Fscm, seed: u64, p_observe: f64) -> Vec<Option<usize>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    fscm.pscm
        .variables()
        .iter()
        .map(|v| (!v.is_exogenous() && rng.random_bool(p_observe)).then(|| rng.random_range(0..v.cardinality)))
        .collect()
}
