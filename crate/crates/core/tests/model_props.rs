mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use scmbound::circuit::compile;
use scmbound::runtime::evaluate;
use scmbound::ve::{query, BayesNet};
use scmbound::{
    build_twin, c_components, intervene, se_to_cpt, validate, CounterfactualQuery, EvalScratch, Fscm,
    ParamBinding, Target, VarId, World,
};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn surgery_forces_the_intervened_state(seed in any::<u64>(), pick in any::<usize>(), state in 0usize..3) {
        let f = common::random_fscm(seed, 5, 4);
        let endo: Vec<VarId> = f.pscm.endogenous().collect();
        let v = endo[pick % endo.len()];
        let state = state % f.pscm.cardinality(v);
        let m = intervene(&f.pscm, &BTreeMap::from([(v, state)])).unwrap();
        prop_assert!(validate(&m).is_empty());
        let g = Fscm::new(m, f.exo_pmfs.clone()).unwrap();
        let c = compile(&g.pscm);
        let b = ParamBinding::new(c.layout(), &g.exo_pmfs).unwrap();
        let mut s = EvalScratch::new(&c);
        let ve = query(&BayesNet::from_fscm(&g), &[v], &[]).unwrap();
        for k in 0..g.pscm.cardinality(v) {
            let mut ev = vec![None; g.pscm.len()];
            ev[v.0] = Some(k);
            let probs = [evaluate(&c, &b, &ev, &mut s).unwrap(), ve.joint.values()[k], common::evidence_prob(&g, &ev)];
            for p in probs {
                // other states carry exactly zero mass; the forced one carries
                // all of it up to the rounding of the PMF sums
                if k == state {
                    prop_assert!((p - 1.0).abs() <= 1e-15, "{}", p);
                } else {
                    prop_assert_eq!(p, 0.0);
                }
            }
        }
    }

    #[test]
    fn empty_twin_copies_share_marginals(seed in any::<u64>()) {
        let f = common::random_fscm(seed, 4, 4);
        let q = CounterfactualQuery {
            worlds: vec![World::default(), World::default()],
            target: Target { world: 1, variable: f.pscm.endogenous().next().unwrap(), state: 0 },
        };
        let twin = build_twin(&f.pscm, &q).unwrap();
        let tf = Fscm::new(twin.pscm.clone(), f.exo_pmfs.clone()).unwrap();
        let bn = BayesNet::from_fscm(&f);
        let tbn = BayesNet::from_fscm(&tf);
        for v in f.pscm.endogenous() {
            let original = query(&bn, &[v], &[]).unwrap().joint.values().to_vec();
            for w in 0..2 {
                let copy = query(&tbn, &[twin.relabel[w][v.0]], &[]).unwrap();
                for (a, b) in copy.joint.values().iter().zip(&original) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn c_components_partition_the_variables(seed in any::<u64>()) {
        let f = common::random_fscm(seed, 6, 3);
        let comps = c_components(&f.pscm);
        let mut seen = vec![0; f.pscm.len()];
        for c in &comps {
            for v in c.exogenous.iter().chain(&c.members) {
                seen[v.0] += 1;
            }
            for b in &c.boundary_parents {
                prop_assert!(!c.members.contains(b));
            }
        }
        prop_assert!(seen.iter().all(|&n| n == 1));
        prop_assert!(!comps.is_empty() && comps.len() <= f.pscm.endogenous().count());
    }

    #[test]
    fn joint_factorizes_over_c_components(seed in any::<u64>(), ev_seed in any::<u64>()) {
        let f = common::random_fscm(seed, 5, 3);
        prop_assume!(f.pscm.len() <= 10);
        let full = common::random_evidence(&f, ev_seed, 1.0);
        let v: Vec<usize> = full.iter().map(|e| e.unwrap_or(0)).collect();
        let p = common::evidence_prob(&f, &full);

        // Q_j: sum over the component's exogenous states of their probability
        // times the indicator that every member's equation reproduces v
        let exo: Vec<VarId> = f.pscm.exogenous().collect();
        let mut product = 1.0;
        for comp in c_components(&f.pscm) {
            let cards: Vec<usize> = comp.exogenous.iter().map(|&u| f.pscm.cardinality(u)).collect();
            let total: usize = cards.iter().product();
            let mut q = 0.0;
            let mut states = v.clone();
            for idx in 0..total {
                let mut rest = idx;
                let mut w = 1.0;
                for (k, &u) in comp.exogenous.iter().enumerate().rev() {
                    states[u.0] = rest % cards[k];
                    rest /= cards[k];
                    w *= f.exo_pmfs[exo.iter().position(|&e| e == u).unwrap()][states[u.0]];
                }
                let consistent = comp.members.iter().all(|&m| {
                    let eq = f.pscm.equation(m).unwrap();
                    let row = eq.inputs.iter().fold(0, |acc, &i| acc * f.pscm.cardinality(i) + states[i.0]);
                    eq.table[row] == v[m.0]
                });
                if consistent {
                    q += w;
                }
            }
            product *= q;
        }
        prop_assert!((p - product).abs() <= 1e-10, "{} vs {}", p, product);
    }

    #[test]
    fn equations_induce_total_degenerate_cpts(seed in any::<u64>()) {
        let f = common::random_fscm(seed, 6, 5);
        for eq in f.pscm.equations() {
            let cpt = se_to_cpt(&f.pscm, eq);
            prop_assert!(cpt.is_degenerate());
            for row in cpt.values.chunks(cpt.child_card()) {
                prop_assert_eq!(row.iter().sum::<f64>(), 1.0);
                prop_assert!(row.iter().all(|&x| x == 0.0 || x == 1.0));
            }
        }
    }
}
