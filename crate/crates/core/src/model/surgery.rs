//! Intervention surgery and twin-network construction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Pscm, StructuralEquation, VarId, Variable};
use crate::error::{Error, Result};

/// Replaces the equation of every assigned variable by a constant map.
pub fn intervene(pscm: &Pscm, assignments: &BTreeMap<VarId, usize>) -> Result<Pscm> {
    for (&v, &state) in assignments {
        let var = pscm
            .variables()
            .get(v.0)
            .ok_or_else(|| Error::InvalidQuery(format!("unknown variable {v}")))?;
        if var.is_exogenous() {
            return Err(Error::ExogenousIntervention(var.name.clone()));
        }
        if state >= var.cardinality {
            return Err(Error::InvalidQuery(format!(
                "state {state} out of range for {}",
                var.name
            )));
        }
    }
    let equations = pscm
        .equations()
        .iter()
        .map(|eq| match assignments.get(&eq.child) {
            Some(&state) => StructuralEquation::constant(eq.child, state),
            None => eq.clone(),
        })
        .collect();
    Ok(Pscm::from_parts(pscm.variables().to_vec(), equations))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct World {
    pub interventions: BTreeMap<VarId, usize>,
    pub observations: BTreeMap<VarId, usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub world: usize,
    pub variable: VarId,
    pub state: usize,
}

/// A query over several worlds that share the exogenous variables: the
/// probability of `target` given every world's observations, where each world
/// applies its own interventions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterfactualQuery {
    pub worlds: Vec<World>,
    pub target: Target,
}

impl CounterfactualQuery {
    pub fn validate(&self, pscm: &Pscm) -> Result<()> {
        if self.worlds.is_empty() {
            return Err(Error::InvalidQuery("query has no worlds".into()));
        }
        let check = |v: VarId, s: usize, what: &str| -> Result<()> {
            let var = pscm
                .variables()
                .get(v.0)
                .ok_or_else(|| Error::InvalidQuery(format!("unknown {what} variable {v}")))?;
            if var.is_exogenous() {
                return Err(Error::InvalidQuery(format!(
                    "{what} variable {} is exogenous",
                    var.name
                )));
            }
            if s >= var.cardinality {
                return Err(Error::InvalidQuery(format!(
                    "{what} state {s} out of range for {}",
                    var.name
                )));
            }
            Ok(())
        };
        for (w, world) in self.worlds.iter().enumerate() {
            for (&v, &s) in &world.interventions {
                check(v, s, "intervened")?;
                if world.observations.contains_key(&v) {
                    return Err(Error::InvalidQuery(format!(
                        "{} both intervened and observed in world {w}",
                        pscm.variable(v).name
                    )));
                }
            }
            for (&v, &s) in &world.observations {
                check(v, s, "observed")?;
            }
        }
        if self.target.world >= self.worlds.len() {
            return Err(Error::InvalidQuery(format!("target world {} missing", self.target.world)));
        }
        check(self.target.variable, self.target.state, "target")
    }
}

/// Twin network plus the map `(world, original id) -> twin id`.
#[derive(Clone, Debug)]
pub struct Twin {
    pub pscm: Pscm,
    pub relabel: Vec<Vec<VarId>>,
}

impl Twin {
    /// Observations of all worlds as evidence on the twin, indexed by twin id.
    pub fn evidence(&self, query: &CounterfactualQuery) -> Vec<Option<usize>> {
        let mut ev = vec![None; self.pscm.len()];
        for (w, world) in query.worlds.iter().enumerate() {
            for (&v, &s) in &world.observations {
                ev[self.relabel[w][v.0].0] = Some(s);
            }
        }
        ev
    }

    pub fn target(&self, query: &CounterfactualQuery) -> (VarId, usize) {
        let t = query.target;
        (self.relabel[t.world][t.variable.0], t.state)
    }
}

/// Copies every endogenous variable and equation once per world; the copies
/// share the original exogenous variables. World 0 keeps the original ids.
pub fn build_twin(pscm: &Pscm, query: &CounterfactualQuery) -> Result<Twin> {
    query.validate(pscm)?;
    let n = pscm.len();
    let mut variables: Vec<Variable> = pscm.variables().to_vec();
    let mut relabel: Vec<Vec<VarId>> = vec![(0..n).map(VarId).collect()];
    for w in 1..query.worlds.len() {
        let mut map: Vec<VarId> = (0..n).map(VarId).collect();
        for v in pscm.endogenous() {
            let id = VarId(variables.len());
            let orig = pscm.variable(v);
            variables.push(Variable {
                id,
                name: format!("{}@{w}", orig.name),
                cardinality: orig.cardinality,
                kind: orig.kind,
            });
            map[v.0] = id;
        }
        relabel.push(map);
    }

    let mut equations = Vec::with_capacity(pscm.equations().len() * query.worlds.len());
    let mut assignments = BTreeMap::new();
    for (w, world) in query.worlds.iter().enumerate() {
        let map = &relabel[w];
        for eq in pscm.equations() {
            equations.push(StructuralEquation {
                child: map[eq.child.0],
                inputs: eq.inputs.iter().map(|i| map[i.0]).collect(),
                table: eq.table.clone(),
            });
        }
        for (&v, &s) in &world.interventions {
            assignments.insert(map[v.0], s);
        }
    }
    let twin = intervene(&Pscm::from_parts(variables, equations), &assignments)?;
    Ok(Twin { pscm: twin, relabel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::validate;

    #[test]
    fn surgery_replaces_equation_and_drops_arcs() {
        let m = fixtures::fig3_pscm();
        let v1 = m.find("V1").unwrap();
        let done = intervene(&m, &BTreeMap::from([(v1, 0)])).unwrap();
        let eq = done.equation(v1).unwrap();
        assert!(eq.inputs.is_empty());
        assert_eq!(eq.table, vec![0]);
        assert!(done.children(m.find("U1").unwrap()).is_empty());
        assert!(validate(&done).is_empty());
    }

    #[test]
    fn surgery_is_idempotent() {
        let m = fixtures::fig3_pscm();
        let a = BTreeMap::from([(m.find("V1").unwrap(), 1)]);
        let once = intervene(&m, &a).unwrap();
        let twice = intervene(&once, &a).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn exogenous_surgery_is_rejected() {
        let m = fixtures::fig3_pscm();
        let err = intervene(&m, &BTreeMap::from([(m.find("U1").unwrap(), 0)])).unwrap_err();
        assert!(err.to_string().contains("exogenous intervention unsupported"));
    }

    #[test]
    fn two_world_twin_shares_exogenous() {
        let m = fixtures::fig3_pscm();
        let q = fixtures::fig3_counterfactual(&m);
        let twin = build_twin(&m, &q).unwrap();
        assert_eq!(twin.pscm.exogenous().count(), 2);
        assert_eq!(twin.pscm.endogenous().count(), 4);
        assert!(validate(&twin.pscm).is_empty());
        // the world-1 copy of V1 is intervened, so only the world-0 copy reads U1
        let u1 = m.find("U1").unwrap();
        let v1 = m.find("V1").unwrap();
        assert_eq!(twin.pscm.children(u1), vec![twin.relabel[0][v1.0]]);

        // without interventions both copies are children of U1
        let plain = CounterfactualQuery {
            worlds: vec![World::default(), World::default()],
            target: q.target,
        };
        let twin = build_twin(&m, &plain).unwrap();
        let mut kids = twin.pscm.children(u1);
        kids.sort();
        assert_eq!(kids, vec![twin.relabel[0][v1.0], twin.relabel[1][v1.0]]);
    }

    #[test]
    fn single_world_twin_is_the_original() {
        let m = fixtures::fig3_pscm();
        let q = CounterfactualQuery {
            worlds: vec![World::default()],
            target: Target { world: 0, variable: m.find("V2").unwrap(), state: 1 },
        };
        let twin = build_twin(&m, &q).unwrap();
        assert_eq!(twin.pscm, m);
    }

    #[test]
    fn query_validation() {
        let m = fixtures::fig3_pscm();
        let v1 = m.find("V1").unwrap();
        let mut w = World::default();
        w.interventions.insert(v1, 0);
        w.observations.insert(v1, 1);
        let q = CounterfactualQuery {
            worlds: vec![w],
            target: Target { world: 0, variable: v1, state: 0 },
        };
        assert!(matches!(q.validate(&m), Err(Error::InvalidQuery(_))));
        let q = CounterfactualQuery {
            worlds: vec![World::default()],
            target: Target { world: 0, variable: m.find("U1").unwrap(), state: 0 },
        };
        assert!(q.validate(&m).is_err());
    }
}
