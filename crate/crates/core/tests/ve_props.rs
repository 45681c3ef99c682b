mod common;

use proptest::prelude::*;
use scmbound::ve::{query, query_with_order, BayesNet};
use scmbound::{Error, VarId};

fn prob(bn: &BayesNet, ev: &[Option<usize>]) -> f64 {
    match query(bn, &[], ev) {
        Ok(r) => r.normalizer,
        Err(Error::ZeroEvidence) => 0.0,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn order_does_not_matter(seed in any::<u64>(), ev_seed in any::<u64>(), shuffle in any::<u64>()) {
        let f = common::random_fscm(seed, 5, 4);
        let bn = BayesNet::from_fscm(&f);
        let ev = common::random_evidence(&f, ev_seed, 0.4);
        let target = f.pscm.endogenous().last().unwrap();
        let mut order: Vec<VarId> = (0..f.pscm.len()).map(VarId).collect();
        use rand::{seq::SliceRandom, SeedableRng};
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle));
        let a = query(&bn, &[target], &ev);
        let b = query_with_order(&bn, &[target], &ev, &order);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                for (x, y) in a.joint.values().iter().zip(b.joint.values()) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }
            (Err(Error::ZeroEvidence), Err(Error::ZeroEvidence)) => {}
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn matches_enumeration(seed in any::<u64>(), ev_seed in any::<u64>()) {
        let f = common::random_fscm(seed, 5, 5);
        let ev = common::random_evidence(&f, ev_seed, 0.5);
        let bn = BayesNet::from_fscm(&f);
        prop_assert!((prob(&bn, &ev) - common::evidence_prob(&f, &ev)).abs() <= 1e-10);
    }

    #[test]
    fn chain_rule_holds(seed in any::<u64>(), ev_seed in any::<u64>()) {
        let f = common::random_fscm(seed, 5, 4);
        prop_assume!(f.pscm.endogenous().count() >= 2);
        let bn = BayesNet::from_fscm(&f);
        let full = common::random_evidence(&f, ev_seed, 1.0);
        let endo: Vec<VarId> = f.pscm.endogenous().collect();
        let a = endo[0];
        let mut b_only = full.clone();
        b_only[a.0] = None;
        let p_ab = prob(&bn, &full);
        let p_b = prob(&bn, &b_only);
        let p_a_given_b = match query(&bn, &[a], &b_only) {
            Ok(r) => r.posterior()[full[a.0].unwrap()],
            Err(_) => 0.0,
        };
        prop_assert!((p_ab - p_a_given_b * p_b).abs() <= 1e-12);
    }
}
