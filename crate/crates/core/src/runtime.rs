//! Evaluation of symbolic circuits under a concrete parameter binding.

use crate::circuit::{NodeKind, ParamLayout, SymbolicCircuit};
use crate::error::{Error, Result};
use crate::model::VarId;

/// Concrete values for every [`ParamId`](crate::circuit::ParamId) of a layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBinding {
    values: Vec<f64>,
}

impl ParamBinding {
    /// `pmfs` is aligned with `layout.vars()`.
    pub fn new(layout: &ParamLayout, pmfs: &[Vec<f64>]) -> Result<Self> {
        if pmfs.len() != layout.vars().len() {
            return Err(Error::IncompleteBinding { expected: layout.vars().len(), got: pmfs.len() });
        }
        let values: Vec<f64> = pmfs.iter().flatten().copied().collect();
        let b = Self { values };
        b.check(layout)?;
        Ok(b)
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn pmf(&self, layout: &ParamLayout, var: VarId) -> &[f64] {
        &self.values[layout.range(var).expect("variable is symbolic")]
    }

    /// PMFs in layout order.
    pub fn pmfs(&self, layout: &ParamLayout) -> Vec<Vec<f64>> {
        layout.vars().iter().map(|&v| self.pmf(layout, v).to_vec()).collect()
    }

    /// Checks length and that every variable's block is a PMF (±1e-12).
    pub fn check(&self, layout: &ParamLayout) -> Result<()> {
        if self.values.len() != layout.len() {
            return Err(Error::IncompleteBinding { expected: layout.len(), got: self.values.len() });
        }
        for &v in layout.vars() {
            let pmf = self.pmf(layout, v);
            let sum: f64 = pmf.iter().sum();
            if pmf.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Format(format!("binding for {v} is not a PMF (sum {sum})")));
            }
        }
        Ok(())
    }
}

/// Per-worker buffers sized to one circuit.
#[derive(Clone, Debug)]
pub struct EvalScratch {
    up: Vec<f64>,
    down: Vec<f64>,
    suffix: Vec<f64>,
}

impl EvalScratch {
    pub fn new(c: &SymbolicCircuit) -> Self {
        let widest = c.nodes().map(|n| n.children.len()).max().unwrap_or(0);
        Self { up: vec![0.0; c.len()], down: vec![0.0; c.len()], suffix: vec![0.0; widest + 1] }
    }

    /// Node values of the last upward pass.
    pub fn upward(&self) -> &[f64] {
        &self.up
    }

    /// Partial derivatives of the root from the last downward pass.
    pub fn downward(&self) -> &[f64] {
        &self.down
    }
}

fn check_inputs(c: &SymbolicCircuit, b: &ParamBinding, evidence: &[Option<usize>], s: &EvalScratch) -> Result<()> {
    if b.values.len() != c.layout().len() {
        return Err(Error::IncompleteBinding { expected: c.layout().len(), got: b.values.len() });
    }
    if evidence.len() > c.cards().len() {
        return Err(Error::InvalidQuery("evidence longer than the variable list".into()));
    }
    for (i, e) in evidence.iter().enumerate() {
        if e.is_some_and(|s| s >= c.cards()[i]) {
            return Err(Error::InvalidQuery(format!("evidence state out of range for #{i}")));
        }
    }
    assert_eq!(s.up.len(), c.len(), "scratch belongs to a different circuit");
    Ok(())
}

fn upward(c: &SymbolicCircuit, b: &ParamBinding, evidence: &[Option<usize>], up: &mut [f64]) -> f64 {
    let params = b.values();
    for i in 0..c.kinds.len() {
        let lo = c.offsets[i] as usize;
        let hi = c.offsets[i + 1] as usize;
        up[i] = match c.kinds[i] {
            NodeKind::Sum => c.children[lo..hi].iter().map(|&k| up[k as usize]).sum(),
            NodeKind::Product => c.children[lo..hi].iter().map(|&k| up[k as usize]).product(),
            NodeKind::Indicator { var, state } => match evidence.get(var.0).copied().flatten() {
                Some(e) if e != state => 0.0,
                _ => 1.0,
            },
            NodeKind::Parameter(p) => params[p.0],
            NodeKind::Constant(v) => v,
        };
    }
    up[c.root as usize]
}

/// P(evidence) by one upward pass; unobserved indicators are set to 1.
/// `evidence` is indexed by variable id and may be shorter than the model.
pub fn evaluate(
    c: &SymbolicCircuit,
    b: &ParamBinding,
    evidence: &[Option<usize>],
    scratch: &mut EvalScratch,
) -> Result<f64> {
    check_inputs(c, b, evidence, scratch)?;
    Ok(upward(c, b, evidence, &mut scratch.up))
}

/// θ_v together with θ_{u,v} for every parameter `(U, u)`, from one upward
/// and one downward pass. `out` is indexed by `ParamId`.
///
/// Fails with [`Error::ZeroEvidence`] when θ_v = 0.
pub fn joint_with_each_exogenous(
    c: &SymbolicCircuit,
    b: &ParamBinding,
    evidence: &[Option<usize>],
    scratch: &mut EvalScratch,
    out: &mut [f64],
) -> Result<f64> {
    check_inputs(c, b, evidence, scratch)?;
    assert_eq!(out.len(), c.layout().len());
    let EvalScratch { up, down, suffix } = scratch;
    let total = upward(c, b, evidence, up);
    if total == 0.0 {
        return Err(Error::ZeroEvidence);
    }

    down.fill(0.0);
    down[c.root as usize] = 1.0;
    for i in (0..c.kinds.len()).rev() {
        let d = down[i];
        if d == 0.0 {
            continue;
        }
        let kids = &c.children[c.offsets[i] as usize..c.offsets[i + 1] as usize];
        match c.kinds[i] {
            NodeKind::Sum => {
                for &k in kids {
                    down[k as usize] += d;
                }
            }
            NodeKind::Product => {
                // d/dx_j of Π x = prefix_j · suffix_{j+1}
                suffix[kids.len()] = 1.0;
                for j in (0..kids.len()).rev() {
                    suffix[j] = suffix[j + 1] * up[kids[j] as usize];
                }
                let mut prefix = 1.0;
                for (j, &k) in kids.iter().enumerate() {
                    down[k as usize] += d * prefix * suffix[j + 1];
                    prefix *= up[k as usize];
                }
            }
            _ => {}
        }
    }

    for &var in c.layout().vars() {
        let range = c.layout().range(var).expect("symbolic var");
        for (state, slot) in out[range].iter_mut().enumerate() {
            let leaf = c.indicator_leaf(var, state) as usize;
            *slot = down[leaf] * up[leaf];
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::compile;
    use crate::fixtures;

    fn fig3() -> (SymbolicCircuit, ParamBinding) {
        let f = fixtures::fig3_fscm();
        let c = compile(&f.pscm);
        let b = ParamBinding::new(c.layout(), &f.exo_pmfs).unwrap();
        (c, b)
    }

    #[test]
    fn fig3_evidence_probabilities() {
        let (c, b) = fig3();
        let mut s = EvalScratch::new(&c);
        // ids: U1 U2 V1 V2
        let p = evaluate(&c, &b, &[None, None, None, Some(1)], &mut s).unwrap();
        assert!((p - 0.71).abs() < 1e-12);
        assert!((evaluate(&c, &b, &[], &mut s).unwrap() - 1.0).abs() < 1e-12);
        let p = evaluate(&c, &b, &[None, Some(1), Some(1), Some(1)], &mut s).unwrap();
        assert!((p - 0.135).abs() < 1e-12);
    }

    #[test]
    fn fig3_joints_with_each_exogenous() {
        let (c, b) = fig3();
        let mut s = EvalScratch::new(&c);
        let mut out = vec![0.0; c.layout().len()];
        let ev = [None, None, Some(1), Some(1)];
        let pv = joint_with_each_exogenous(&c, &b, &ev, &mut s, &mut out).unwrap();
        assert!((pv - 0.63).abs() < 1e-12);
        let expected = [0.0, 0.63, 0.0, 0.135, 0.0, 0.495];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-12, "{out:?}");
        }
        // each joint equals an evaluate call with the exogenous state added
        for p in 0..out.len() {
            let (var, state) = c.layout().var_state(crate::circuit::ParamId(p));
            let mut e2 = ev.to_vec();
            e2[var.0] = Some(state);
            let direct = evaluate(&c, &b, &e2, &mut s).unwrap();
            assert!((direct - out[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_evidence_is_signalled() {
        let (c, b) = fig3();
        let mut s = EvalScratch::new(&c);
        let mut out = vec![0.0; c.layout().len()];
        let r = joint_with_each_exogenous(&c, &b, &[None, Some(0), None, Some(1)], &mut s, &mut out);
        assert!(matches!(r, Err(Error::ZeroEvidence)));
    }

    #[test]
    fn incomplete_binding_is_rejected() {
        let (c, _) = fig3();
        let mut s = EvalScratch::new(&c);
        let short = ParamBinding::from_values(vec![0.5, 0.5]);
        assert!(matches!(
            evaluate(&c, &short, &[], &mut s),
            Err(Error::IncompleteBinding { expected: 6, got: 2 })
        ));
    }

    #[test]
    fn rebinding_is_pure() {
        let (c, b1) = fig3();
        let b2 = ParamBinding::new(c.layout(), &[vec![0.5, 0.5], vec![0.25; 4]]).unwrap();
        let mut s = EvalScratch::new(&c);
        let ev = [None, None, Some(0), Some(1)];
        let first = evaluate(&c, &b1, &ev, &mut s).unwrap();
        let _ = evaluate(&c, &b2, &ev, &mut s).unwrap();
        let again = evaluate(&c, &b1, &ev, &mut s).unwrap();
        assert_eq!(first.to_bits(), again.to_bits());
    }
}
