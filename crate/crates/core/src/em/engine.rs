use crate::circuit::{ParamLayout, SymbolicCircuit};
use crate::error::Result;
use crate::model::{se_to_cpt, Cpt, Pscm, VarId};
use crate::runtime::{evaluate, joint_with_each_exogenous, EvalScratch, ParamBinding};
use crate::ve::{query, BayesNet};

/// Computes the E-step quantities for one record at a time.
pub trait PosteriorEngine {
    /// Number of variables evidence vectors are indexed over.
    fn n_vars(&self) -> usize;

    /// Sets the exogenous parameters for subsequent calls.
    fn bind(&mut self, binding: &ParamBinding) -> Result<()>;

    /// Writes θ_{u,v} for every parameter of a free variable into `out`
    /// (indexed by `ParamId`) and returns θ_v.
    fn joints(&mut self, evidence: &[Option<usize>], out: &mut [f64]) -> Result<f64>;

    /// θ_v alone.
    fn evidence_prob(&mut self, evidence: &[Option<usize>]) -> Result<f64>;
}

/// Upward and downward passes over a compiled circuit.
pub struct CircuitEngine<'a> {
    circuit: &'a SymbolicCircuit,
    scratch: EvalScratch,
    binding: ParamBinding,
}

impl<'a> CircuitEngine<'a> {
    pub fn new(circuit: &'a SymbolicCircuit) -> Self {
        Self {
            circuit,
            scratch: EvalScratch::new(circuit),
            binding: ParamBinding::from_values(vec![0.0; circuit.layout().len()]),
        }
    }
}

impl PosteriorEngine for CircuitEngine<'_> {
    fn n_vars(&self) -> usize {
        self.circuit.cards().len()
    }

    fn bind(&mut self, binding: &ParamBinding) -> Result<()> {
        self.binding.values_mut().copy_from_slice(binding.values());
        Ok(())
    }

    fn joints(&mut self, evidence: &[Option<usize>], out: &mut [f64]) -> Result<f64> {
        joint_with_each_exogenous(self.circuit, &self.binding, evidence, &mut self.scratch, out)
    }

    fn evidence_prob(&mut self, evidence: &[Option<usize>]) -> Result<f64> {
        evaluate(self.circuit, &self.binding, evidence, &mut self.scratch)
    }
}

/// One variable-elimination query per free exogenous variable and record.
pub struct VeEngine {
    layout: ParamLayout,
    cards: Vec<usize>,
    endogenous: Vec<Cpt>,
    free: Vec<VarId>,
    bn: Option<BayesNet>,
}

impl VeEngine {
    pub fn new(pscm: &Pscm, frozen: &[VarId]) -> Self {
        let layout = ParamLayout::of_pscm(pscm);
        let free = layout.vars().iter().copied().filter(|v| !frozen.contains(v)).collect();
        Self {
            cards: pscm.cardinalities(),
            endogenous: pscm.equations().iter().map(|eq| se_to_cpt(pscm, eq)).collect(),
            layout,
            free,
            bn: None,
        }
    }

    fn bn(&self) -> &BayesNet {
        self.bn.as_ref().expect("bind before querying")
    }
}

impl PosteriorEngine for VeEngine {
    fn n_vars(&self) -> usize {
        self.cards.len()
    }

    fn bind(&mut self, binding: &ParamBinding) -> Result<()> {
        binding.check(&self.layout)?;
        let mut cpts: Vec<Cpt> = self
            .layout
            .vars()
            .iter()
            .map(|&u| Cpt {
                child: u,
                parents: vec![],
                cards: vec![self.cards[u.0]],
                values: binding.pmf(&self.layout, u).to_vec(),
            })
            .collect();
        cpts.extend(self.endogenous.iter().cloned());
        self.bn = Some(BayesNet::new(self.cards.clone(), cpts));
        Ok(())
    }

    fn joints(&mut self, evidence: &[Option<usize>], out: &mut [f64]) -> Result<f64> {
        if self.free.is_empty() {
            return self.evidence_prob(evidence);
        }
        let mut total = 0.0;
        for &u in &self.free {
            let r = query(self.bn(), &[u], evidence)?;
            out[self.layout.range(u).expect("exogenous")].copy_from_slice(r.joint.values());
            total = r.normalizer;
        }
        Ok(total)
    }

    fn evidence_prob(&mut self, evidence: &[Option<usize>]) -> Result<f64> {
        Ok(query(self.bn(), &[], evidence)?.normalizer)
    }
}
