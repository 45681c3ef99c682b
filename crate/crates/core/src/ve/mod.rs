//! Exact Bayesian-network inference by variable elimination with a min-fill
//! ordering. Serves both as the baseline EM engine and as the reference the
//! circuit runtime is checked against.

mod factor;
mod order;

pub use factor::Factor;
pub use order::{min_fill_order, min_fill_order_of, UndirectedGraph};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{induced_bn, Cpt, Fscm, VarId};

#[derive(Clone, Debug)]
pub struct BayesNet {
    cards: Vec<usize>,
    cpts: Vec<Cpt>,
}

impl BayesNet {
    pub fn new(cards: Vec<usize>, cpts: Vec<Cpt>) -> Self {
        Self { cards, cpts }
    }

    pub fn from_fscm(fscm: &Fscm) -> Self {
        Self::new(fscm.pscm.cardinalities(), induced_bn(fscm))
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn moral_graph(&self) -> UndirectedGraph {
        let families: Vec<Vec<VarId>> = self
            .cpts
            .iter()
            .map(|c| {
                let mut f = c.parents.clone();
                f.push(c.child);
                f
            })
            .collect();
        UndirectedGraph::moral(self.cards.len(), families.iter().map(Vec::as_slice))
    }
}

/// Unnormalized joint over the targets with the evidence applied, plus P(evidence).
#[derive(Clone, Debug)]
pub struct QueryResult {
    pub joint: Factor,
    pub normalizer: f64,
}

impl QueryResult {
    pub fn posterior(&self) -> Vec<f64> {
        self.joint.values().iter().map(|v| v / self.normalizer).collect()
    }
}

fn check_evidence(cards: &[usize], evidence: &[Option<usize>]) -> Result<Vec<Option<usize>>> {
    if evidence.len() > cards.len() {
        return Err(Error::InvalidQuery("evidence longer than the variable list".into()));
    }
    for (i, e) in evidence.iter().enumerate() {
        if let Some(s) = e {
            if *s >= cards[i] {
                return Err(Error::InvalidQuery(format!("evidence state {s} out of range for #{i}")));
            }
        }
    }
    let mut ev = evidence.to_vec();
    ev.resize(cards.len(), None);
    Ok(ev)
}

/// Loads the CPTs as factors: evidence on targets is reduced (kept in scope),
/// other evidence is instantiated away.
fn evidence_factors(bn: &BayesNet, targets: &[VarId], ev: &[Option<usize>]) -> Vec<Factor> {
    let mut drop = ev.to_vec();
    let mut keep = vec![None; ev.len()];
    for t in targets {
        keep[t.0] = drop[t.0].take();
    }
    bn.cpts
        .iter()
        .map(|c| {
            let f = Factor::from_cpt(c).restrict(&drop);
            if keep.iter().any(Option::is_some) {
                f.reduce(&keep)
            } else {
                f
            }
        })
        .collect()
}

fn eliminate(mut factors: Vec<Factor>, order: &[VarId]) -> Result<Factor> {
    for &v in order {
        let (bucket, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.contains(v));
        factors = rest;
        let mut it = bucket.into_iter();
        let Some(first) = it.next() else { continue };
        let product = it.try_fold(first, |acc, f| acc.multiply(&f))?;
        factors.push(product.marginalize(v));
    }
    factors
        .into_iter()
        .try_fold(Factor::scalar(1.0), |acc, f| acc.multiply(&f))
}

/// Exact P(targets, evidence) by min-fill variable elimination.
///
/// Fails with [`Error::ZeroEvidence`] when the evidence is impossible.
pub fn query(bn: &BayesNet, targets: &[VarId], evidence: &[Option<usize>]) -> Result<QueryResult> {
    let ev = check_evidence(&bn.cards, evidence)?;
    let factors = evidence_factors(bn, targets, &ev);
    let mut graph = UndirectedGraph::new(bn.cards.len());
    let mut present = vec![false; bn.cards.len()];
    for f in &factors {
        graph.add_clique(f.scope());
        for v in f.scope() {
            present[v.0] = true;
        }
    }
    for t in targets {
        present[t.0] = false;
    }
    let order = min_fill_order_of(&graph, &present);
    finish(factors, &order, targets)
}

/// Like [`query`] but with a caller-chosen elimination order; variables in
/// `order` that are targets are skipped.
pub fn query_with_order(
    bn: &BayesNet,
    targets: &[VarId],
    evidence: &[Option<usize>],
    order: &[VarId],
) -> Result<QueryResult> {
    let ev = check_evidence(&bn.cards, evidence)?;
    let factors = evidence_factors(bn, targets, &ev);
    let order: Vec<VarId> = order.iter().copied().filter(|v| !targets.contains(v)).collect();
    finish(factors, &order, targets)
}

fn finish(factors: Vec<Factor>, order: &[VarId], targets: &[VarId]) -> Result<QueryResult> {
    let mut joint = eliminate(factors, order)?;
    // anything not eliminated by the order and not a target is summed out here
    let extra: Vec<VarId> = joint.scope().iter().copied().filter(|v| !targets.contains(v)).collect();
    for v in extra {
        joint = joint.marginalize(v);
    }
    let normalizer = joint.sum();
    if normalizer <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    Ok(QueryResult { joint, normalizer })
}

/// Σ_records count · ln P(record). A record with probability zero is an error
/// naming that record.
pub fn log_likelihood(fscm: &Fscm, dataset: &Dataset) -> Result<f64> {
    let bn = BayesNet::from_fscm(fscm);
    let n = fscm.pscm.len();
    let mut total = 0.0;
    for rec in dataset.records() {
        let ev = dataset.evidence(rec, n);
        match query(&bn, &[], &ev) {
            Ok(r) => total += rec.count as f64 * r.normalizer.ln(),
            Err(Error::ZeroEvidence) => {
                return Err(Error::ZeroProbabilityRecord { record: rec.values.clone() })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(total)
}
