//! Small worked models used by tests, examples and the CLI.

use std::collections::BTreeMap;

use crate::model::{Cpt, CounterfactualQuery, Fscm, Pscm, PscmBuilder, Target, VarId, World};

/// Two exogenous and two endogenous variables: V1 = U1 and
/// V2 = [0, V1, not V1, 1] indexed by U2.
pub fn fig3_pscm() -> Pscm {
    let mut b = PscmBuilder::new();
    let u1 = b.exogenous("U1", 2);
    let u2 = b.exogenous("U2", 4);
    let v1 = b.endogenous("V1", 2);
    let v2 = b.endogenous("V2", 2);
    b.equation(v1, &[u1], vec![0, 1]);
    // inputs (V1, U2), U2 fastest
    b.equation(v2, &[v1, u2], vec![0, 0, 1, 1, 0, 1, 0, 1]);
    b.build().expect("fixture is valid")
}

pub fn fig3_fscm() -> Fscm {
    Fscm::new(fig3_pscm(), vec![vec![0.1, 0.9], vec![0.05, 0.15, 0.25, 0.55]])
        .expect("fixture is valid")
}

/// P(V2 = 1 in the world where do(V1 = 0) | V1 = 1, V2 = 1).
pub fn fig3_counterfactual(m: &Pscm) -> CounterfactualQuery {
    let v1 = m.find("V1").expect("V1");
    let v2 = m.find("V2").expect("V2");
    CounterfactualQuery {
        worlds: vec![
            World { interventions: BTreeMap::new(), observations: BTreeMap::from([(v1, 1), (v2, 1)]) },
            World { interventions: BTreeMap::from([(v1, 0)]), observations: BTreeMap::new() },
        ],
        target: Target { world: 1, variable: v2, state: 1 },
    }
}

/// Two binary variables X1 -> X2 with a non-degenerate CPT for X2.
pub fn fig1_bn() -> (Vec<usize>, Vec<Cpt>) {
    let x1 = VarId(0);
    let x2 = VarId(1);
    (
        vec![2, 2],
        vec![
            Cpt { child: x1, parents: vec![], cards: vec![2], values: vec![0.1, 0.9] },
            Cpt { child: x2, parents: vec![x1], cards: vec![2, 2], values: vec![0.2, 0.8, 0.3, 0.7] },
        ],
    )
}
