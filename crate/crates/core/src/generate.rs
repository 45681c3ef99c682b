//! Random semi-Markovian PSCMs and ancestral sampling of datasets.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::em::sample_initialization;
use crate::error::{Error, Result};
use crate::model::{Fscm, Pscm, PscmBuilder, VarId};

/// Inclusive ranges for the random models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub endogenous_count: (usize, usize),
    /// Clamped per model to `[ceil(n/2), n]` for `n` endogenous variables
    /// (to `n` when sharing is off).
    pub exogenous_count: (usize, usize),
    pub edge_probability: f64,
    pub exogenous_cardinality: (usize, usize),
    pub dataset_size: (usize, usize),
    /// Allow an exogenous variable to feed two endogenous variables.
    pub share_exogenous: bool,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            endogenous_count: (3, 8),
            exogenous_count: (2, 7),
            edge_probability: 0.3,
            exogenous_cardinality: (3, 32),
            dataset_size: (1000, 1000),
            share_exogenous: true,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn check(&self) -> Result<()> {
        let ranges = [self.endogenous_count, self.exogenous_count, self.exogenous_cardinality, self.dataset_size];
        if ranges.iter().any(|(lo, hi)| lo > hi) {
            return Err(Error::Format("empty range in generator config".into()));
        }
        if self.endogenous_count.0 == 0 || self.exogenous_cardinality.0 < 2 {
            return Err(Error::Format("need at least one endogenous variable and exogenous cardinality >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_probability) {
            return Err(Error::Format("edge_probability outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Surjective table over `rows` input configurations onto `card` states.
fn surjective_table<R: Rng + ?Sized>(rows: usize, card: usize, rng: &mut R) -> Vec<usize> {
    loop {
        let t: Vec<usize> = (0..rows).map(|_| rng.random_range(0..card)).collect();
        let mut hit = vec![false; card];
        for &s in &t {
            hit[s] = true;
        }
        if hit.iter().all(|&h| h) {
            return t;
        }
    }
}

/// A random PSCM: an Erdős–Rényi DAG over binary endogenous variables in a
/// random topological order, at least one exogenous parent per endogenous
/// variable, each exogenous variable feeding one or two children, and
/// uniformly sampled surjective equations. Exogenous variables come first in
/// id order, named `U0, U1, …`; endogenous ones are `V0, V1, …`.
pub fn generate_pscm<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Result<Pscm> {
    cfg.check()?;
    let n = rng.random_range(cfg.endogenous_count.0..=cfg.endogenous_count.1);
    let m = if cfg.share_exogenous {
        let lo = cfg.exogenous_count.0.clamp(n.div_ceil(2), n);
        let hi = cfg.exogenous_count.1.clamp(lo, n);
        rng.random_range(lo..=hi)
    } else {
        n
    };

    let mut b = PscmBuilder::new();
    let exo_cards: Vec<usize> = (0..m)
        .map(|_| rng.random_range(cfg.exogenous_cardinality.0..=cfg.exogenous_cardinality.1))
        .collect();
    let exo: Vec<VarId> = exo_cards.iter().enumerate().map(|(i, &k)| b.exogenous(&format!("U{i}"), k)).collect();
    let endo: Vec<VarId> = (0..n).map(|i| b.endogenous(&format!("V{i}"), 2)).collect();

    // exogenous parents: a random matching, then the leftovers share
    let mut slots: Vec<usize> = (0..n).collect();
    slots.shuffle(rng);
    let mut exo_parent = vec![0usize; n];
    for (j, &v) in slots.iter().enumerate().take(m) {
        exo_parent[v] = j;
    }
    let mut sharers: Vec<usize> = (0..m).collect();
    sharers.shuffle(rng);
    for (k, &v) in slots.iter().enumerate().skip(m) {
        exo_parent[v] = sharers[k - m];
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut parents: Vec<Vec<VarId>> = vec![Vec::new(); n];
    for j in 0..n {
        for i in 0..j {
            if rng.random_bool(cfg.edge_probability) {
                parents[order[j]].push(endo[order[i]]);
            }
        }
    }

    for v in 0..n {
        let mut inputs = parents[v].clone();
        inputs.sort();
        inputs.insert(0, exo[exo_parent[v]]);
        let rows = exo_cards[exo_parent[v]] << parents[v].len();
        let table = surjective_table(rows, 2, rng);
        b.equation(endo[v], &inputs, table);
    }
    b.build()
}

/// A random PSCM with flat-Dirichlet exogenous PMFs.
pub fn generate_fscm<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Result<Fscm> {
    let pscm = generate_pscm(cfg, rng)?;
    let pmfs = sample_initialization(&pscm, rng);
    Fscm::new(pscm, pmfs)
}

fn draw<R: Rng + ?Sized>(pmf: &[f64], rng: &mut R) -> usize {
    let r: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in pmf.iter().enumerate() {
        acc += p;
        if r < acc {
            return i;
        }
    }
    pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// `n` ancestral-sampling draws projected on the endogenous variables.
pub fn sample_dataset<R: Rng + ?Sized>(fscm: &Fscm, n: usize, rng: &mut R) -> Dataset {
    let pscm = &fscm.pscm;
    let order = pscm.topological_order().expect("valid model is acyclic");
    let exo: Vec<VarId> = pscm.exogenous().collect();
    let endo: Vec<VarId> = pscm.endogenous().collect();
    let mut states = vec![0; pscm.len()];
    let rows = (0..n).map(|_| {
        for (u, pmf) in exo.iter().zip(&fscm.exo_pmfs) {
            states[u.0] = draw(pmf, rng);
        }
        pscm.propagate(&order, &mut states);
        endo.iter().map(|v| states[v.0]).collect::<Vec<_>>()
    });
    let rows: Vec<Vec<usize>> = rows.collect();
    Dataset::from_rows(endo.clone(), rows)
}

/// One generated benchmark instance.
#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub fscm: Fscm,
    pub dataset: Dataset,
}

/// `count` instances from one ChaCha8 stream seeded by `cfg.seed`.
pub fn generate_suite(cfg: &GenConfig, count: usize) -> Result<Vec<Instance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..count)
        .map(|i| {
            let fscm = generate_fscm(cfg, &mut rng)?;
            let size = rng.random_range(cfg.dataset_size.0..=cfg.dataset_size.1);
            let dataset = sample_dataset(&fscm, size, &mut rng);
            Ok(Instance { name: format!("model_{i:03}"), fscm, dataset })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{c_components, validate};

    #[test]
    fn fixed_seed_is_reproducible() {
        let cfg = GenConfig::default();
        let a = generate_pscm(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = generate_pscm(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a.variables(), b.variables());
        assert_eq!(a.equations(), b.equations());
    }

    #[test]
    fn models_are_valid_and_in_range() {
        let cfg = GenConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let m = generate_pscm(&cfg, &mut rng).unwrap();
            assert!(validate(&m).is_empty());
            let n = m.endogenous().count();
            assert!((cfg.endogenous_count.0..=cfg.endogenous_count.1).contains(&n));
            for u in m.exogenous() {
                let k = m.cardinality(u);
                assert!((cfg.exogenous_cardinality.0..=cfg.exogenous_cardinality.1).contains(&k));
                assert!((1..=2).contains(&m.children(u).len()));
            }
            assert!(m.endogenous().all(|v| m.cardinality(v) == 2));
            let comps = c_components(&m).len();
            assert!(comps >= 1 && comps <= n);
        }
    }

    #[test]
    fn no_sharing_gives_one_component_per_variable() {
        let cfg = GenConfig { share_exogenous: false, ..GenConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let m = generate_pscm(&cfg, &mut rng).unwrap();
            assert_eq!(c_components(&m).len(), m.endogenous().count());
        }
    }

    #[test]
    fn sampling_conserves_counts() {
        let f = fixtures::fig3_fscm();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_dataset(&f, 0, &mut rng).is_empty());
        assert_eq!(sample_dataset(&f, 137, &mut rng).total(), 137);
    }

    #[test]
    fn fig3_sampled_marginal() {
        let f = fixtures::fig3_fscm();
        let d = sample_dataset(&f, 100_000, &mut ChaCha8Rng::seed_from_u64(8));
        let v2 = d.columns().iter().position(|&c| c == f.pscm.find("V2").unwrap()).unwrap();
        let ones: u64 = d.records().iter().filter(|r| r.values[v2] == 1).map(|r| r.count).sum();
        assert!((ones as f64 / 1e5 - 0.71).abs() < 0.01);
    }

    #[test]
    fn sampling_is_deterministic() {
        let f = fixtures::fig3_fscm();
        let a = sample_dataset(&f, 500, &mut ChaCha8Rng::seed_from_u64(3));
        let b = sample_dataset(&f, 500, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }
}
