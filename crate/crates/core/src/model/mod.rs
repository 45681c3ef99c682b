//! Partially and fully specified structural causal models.
//!
//! A [`Pscm`] holds the variables and one structural equation per endogenous
//! variable. Pairing it with one marginal PMF per exogenous variable gives an
//! [`Fscm`], which is read as a Bayesian network whose non-root CPTs are
//! degenerate (0/1).

mod components;
mod surgery;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use components::{c_components, component_submodel, CComponent, Submodel};
pub use surgery::{build_twin, intervene, CounterfactualQuery, Target, Twin, World};

/// Dense index of a variable inside one model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Endogenous,
    Exogenous,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub cardinality: usize,
    pub kind: VarKind,
}

impl Variable {
    pub fn is_exogenous(&self) -> bool {
        self.kind == VarKind::Exogenous
    }
}

/// Deterministic map from the joint input configuration to a child state.
///
/// `table` is row-major over `inputs` with the last input varying fastest.
/// An equation with no inputs is a constant map (the result of surgery).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructuralEquation {
    pub child: VarId,
    pub inputs: Vec<VarId>,
    pub table: Vec<usize>,
}

impl StructuralEquation {
    pub fn constant(child: VarId, state: usize) -> Self {
        Self { child, inputs: Vec::new(), table: vec![state] }
    }
}

/// Row-major position of `states` inside a table over `cards` (last fastest).
#[inline]
pub fn config_index(states: impl IntoIterator<Item = usize>, cards: &[usize]) -> usize {
    states
        .into_iter()
        .zip(cards)
        .fold(0, |acc, (s, &c)| acc * c + s)
}

/// Inverse of [`config_index`], writing into `out`.
pub fn config_states(mut index: usize, cards: &[usize], out: &mut [usize]) {
    for (slot, &c) in out.iter_mut().zip(cards).rev() {
        *slot = index % c;
        index /= c;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    NonContiguousId,
    CardinalityBelowTwo,
    Cycle,
    ExogenousWithEquation,
    MissingEquation,
    DuplicateEquation,
    UnknownInput,
    TableNotTotal,
    StateOutOfRange,
    NotSurjective,
    PmfInvalid,
}

/// One broken model rule, naming the offending variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub variable: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.rule, self.variable, self.detail)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pscm {
    variables: Vec<Variable>,
    equations: Vec<StructuralEquation>,
    eq_of: Vec<Option<usize>>,
}

impl Pscm {
    /// Assembles a model without checking it; see [`validate`].
    pub fn from_parts(variables: Vec<Variable>, equations: Vec<StructuralEquation>) -> Self {
        let mut eq_of = vec![None; variables.len()];
        for (i, eq) in equations.iter().enumerate() {
            if let Some(slot) = eq_of.get_mut(eq.child.0) {
                if slot.is_none() {
                    *slot = Some(i);
                }
            }
        }
        Self { variables, equations, eq_of }
    }

    /// Assembles a model and rejects it if any rule is broken.
    pub fn new(variables: Vec<Variable>, equations: Vec<StructuralEquation>) -> Result<Self> {
        let m = Self::from_parts(variables, equations);
        let violations = validate(&m);
        if violations.is_empty() {
            Ok(m)
        } else {
            Err(Error::InvalidModel(violations))
        }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn cardinality(&self, id: VarId) -> usize {
        self.variables[id.0].cardinality
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality).collect()
    }

    pub fn equations(&self) -> &[StructuralEquation] {
        &self.equations
    }

    pub fn equation(&self, child: VarId) -> Option<&StructuralEquation> {
        self.eq_of.get(child.0).copied().flatten().map(|i| &self.equations[i])
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.variables.iter().find(|v| v.name == name).map(|v| v.id)
    }

    pub fn exogenous(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables.iter().filter(|v| v.is_exogenous()).map(|v| v.id)
    }

    pub fn endogenous(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables.iter().filter(|v| !v.is_exogenous()).map(|v| v.id)
    }

    /// Direct parents of `id` in the induced graph.
    pub fn parents(&self, id: VarId) -> &[VarId] {
        self.equation(id).map(|e| e.inputs.as_slice()).unwrap_or(&[])
    }

    pub fn children(&self, id: VarId) -> Vec<VarId> {
        self.equations
            .iter()
            .filter(|e| e.inputs.contains(&id))
            .map(|e| e.child)
            .collect()
    }

    /// Kahn order with ties broken by lowest id, or `None` when the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<VarId>> {
        let n = self.variables.len();
        let mut indegree = vec![0usize; n];
        let mut children = vec![Vec::new(); n];
        for eq in &self.equations {
            if eq.child.0 >= n {
                continue;
            }
            for &p in &eq.inputs {
                if p.0 < n {
                    indegree[eq.child.0] += 1;
                    children[p.0].push(eq.child.0);
                }
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(VarId(i));
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Values of all endogenous variables given a full exogenous assignment.
    ///
    /// `states` is indexed by variable id; exogenous entries are read, endogenous
    /// entries are overwritten. `order` must be a topological order of `self`.
    pub fn propagate(&self, order: &[VarId], states: &mut [usize]) {
        for &v in order {
            if let Some(eq) = self.equation(v) {
                let cards: Vec<usize> = eq.inputs.iter().map(|&i| self.cardinality(i)).collect();
                let idx = config_index(eq.inputs.iter().map(|&i| states[i.0]), &cards);
                states[v.0] = eq.table[idx];
            }
        }
    }
}

/// Checks every model rule and reports each broken one. An empty result means
/// the model is a valid semi-Markovian PSCM.
pub fn validate(pscm: &Pscm) -> Vec<Violation> {
    let mut out = Vec::new();
    let vars = pscm.variables();
    let name_of = |id: VarId| {
        vars.get(id.0).map(|v| v.name.clone()).unwrap_or_else(|| id.to_string())
    };
    let mut push = |rule: Rule, variable: String, detail: String| {
        out.push(Violation { rule, variable, detail });
    };

    for (i, v) in vars.iter().enumerate() {
        if v.id.0 != i {
            push(Rule::NonContiguousId, v.name.clone(), format!("id {} at position {i}", v.id.0));
        }
        if v.cardinality < 2 {
            push(Rule::CardinalityBelowTwo, v.name.clone(), format!("cardinality {}", v.cardinality));
        }
    }

    let mut seen = vec![0usize; vars.len()];
    for eq in pscm.equations() {
        let Some(child) = vars.get(eq.child.0) else {
            push(Rule::UnknownInput, eq.child.to_string(), "equation child out of range".into());
            continue;
        };
        seen[eq.child.0] += 1;
        if child.is_exogenous() {
            push(
                Rule::ExogenousWithEquation,
                child.name.clone(),
                "exogenous variables cannot have incoming arcs".into(),
            );
        }
        if let Some(bad) = eq.inputs.iter().find(|i| i.0 >= vars.len()) {
            push(Rule::UnknownInput, child.name.clone(), format!("input {bad} out of range"));
            continue;
        }
        let expected: usize = eq.inputs.iter().map(|&i| vars[i.0].cardinality).product();
        if eq.table.len() != expected {
            push(
                Rule::TableNotTotal,
                child.name.clone(),
                format!("table has {} entries, input product is {expected}", eq.table.len()),
            );
            continue;
        }
        if let Some(&s) = eq.table.iter().find(|&&s| s >= child.cardinality) {
            push(
                Rule::StateOutOfRange,
                child.name.clone(),
                format!("state {s} outside 0..{}", child.cardinality),
            );
            continue;
        }
        // A constant map with no inputs is an intervened equation and exempt.
        if !eq.inputs.is_empty() {
            let hit: BTreeSet<usize> = eq.table.iter().copied().collect();
            if hit.len() != child.cardinality {
                push(
                    Rule::NotSurjective,
                    child.name.clone(),
                    format!("table reaches {} of {} states", hit.len(), child.cardinality),
                );
            }
        }
    }
    for v in vars {
        if v.kind == VarKind::Endogenous && v.id.0 < seen.len() {
            match seen[v.id.0] {
                0 => push(Rule::MissingEquation, v.name.clone(), "no structural equation".into()),
                1 => {}
                k => push(Rule::DuplicateEquation, v.name.clone(), format!("{k} equations")),
            }
        }
    }

    if pscm.topological_order().is_none() {
        // name one variable on a cycle: any variable not removable by Kahn's algorithm
        let n = vars.len();
        let mut indeg = vec![0usize; n];
        for eq in pscm.equations() {
            if eq.child.0 < n {
                indeg[eq.child.0] += eq.inputs.iter().filter(|i| i.0 < n).count();
            }
        }
        let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        while let Some(i) = stack.pop() {
            for eq in pscm.equations() {
                if eq.child.0 < n {
                    for p in &eq.inputs {
                        if p.0 == i {
                            indeg[eq.child.0] -= 1;
                            if indeg[eq.child.0] == 0 {
                                stack.push(eq.child.0);
                            }
                        }
                    }
                }
            }
        }
        let culprit = (0..n).find(|&i| indeg[i] > 0).map(VarId).unwrap_or(VarId(0));
        push(Rule::Cycle, name_of(culprit), "induced graph is cyclic".into());
    }
    out
}

/// A PSCM together with one marginal PMF per exogenous variable.
///
/// `exo_pmfs` is aligned with `pscm.exogenous()` (ascending variable id).
#[derive(Clone, Debug, PartialEq)]
pub struct Fscm {
    pub pscm: Pscm,
    pub exo_pmfs: Vec<Vec<f64>>,
}

impl Fscm {
    pub fn new(pscm: Pscm, exo_pmfs: Vec<Vec<f64>>) -> Result<Self> {
        let f = Self { pscm, exo_pmfs };
        let mut violations = validate(&f.pscm);
        violations.extend(validate_pmfs(&f));
        if violations.is_empty() {
            Ok(f)
        } else {
            Err(Error::InvalidModel(violations))
        }
    }

    /// PMF of the exogenous variable `u`.
    pub fn pmf(&self, u: VarId) -> Option<&[f64]> {
        self.pscm
            .exogenous()
            .position(|x| x == u)
            .map(|i| self.exo_pmfs[i].as_slice())
    }
}

pub fn validate_pmfs(fscm: &Fscm) -> Vec<Violation> {
    let mut out = Vec::new();
    let exo: Vec<VarId> = fscm.pscm.exogenous().collect();
    if exo.len() != fscm.exo_pmfs.len() {
        out.push(Violation {
            rule: Rule::PmfInvalid,
            variable: "*".into(),
            detail: format!("{} exogenous variables but {} PMFs", exo.len(), fscm.exo_pmfs.len()),
        });
        return out;
    }
    for (u, pmf) in exo.iter().zip(&fscm.exo_pmfs) {
        let var = fscm.pscm.variable(*u);
        let sum: f64 = pmf.iter().sum();
        let detail = if pmf.len() != var.cardinality {
            Some(format!("{} entries for cardinality {}", pmf.len(), var.cardinality))
        } else if pmf.iter().any(|&p| !(p >= 0.0)) {
            Some("negative or NaN entry".to_string())
        } else if (sum - 1.0).abs() > 1e-12 {
            Some(format!("sums to {sum}"))
        } else {
            None
        };
        if let Some(detail) = detail {
            out.push(Violation { rule: Rule::PmfInvalid, variable: var.name.clone(), detail });
        }
    }
    out
}

/// Conditional probability table, row-major over `parents` then `child`
/// (child state fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    pub child: VarId,
    pub parents: Vec<VarId>,
    /// Cardinalities of `parents` followed by the child's.
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

impl Cpt {
    pub fn child_card(&self) -> usize {
        *self.cards.last().expect("cpt has a child")
    }

    /// The conditional PMF for one parent configuration index.
    pub fn row(&self, parent_config: usize) -> &[f64] {
        let k = self.child_card();
        &self.values[parent_config * k..(parent_config + 1) * k]
    }

    pub fn is_degenerate(&self) -> bool {
        self.values.iter().all(|&p| p == 0.0 || p == 1.0)
    }
}

/// Degenerate CPT induced by a structural equation.
pub fn se_to_cpt(pscm: &Pscm, eq: &StructuralEquation) -> Cpt {
    let k = pscm.cardinality(eq.child);
    let mut cards: Vec<usize> = eq.inputs.iter().map(|&i| pscm.cardinality(i)).collect();
    cards.push(k);
    let mut values = vec![0.0; eq.table.len() * k];
    for (row, &state) in eq.table.iter().enumerate() {
        values[row * k + state] = 1.0;
    }
    Cpt { child: eq.child, parents: eq.inputs.clone(), cards, values }
}

/// One CPT per variable, ordered by variable id. Exogenous roots carry their PMFs.
pub fn induced_bn(fscm: &Fscm) -> Vec<Cpt> {
    let pscm = &fscm.pscm;
    let mut exo_pmfs = fscm.exo_pmfs.iter();
    pscm.variables()
        .iter()
        .map(|v| match v.kind {
            VarKind::Exogenous => Cpt {
                child: v.id,
                parents: Vec::new(),
                cards: vec![v.cardinality],
                values: exo_pmfs.next().expect("one PMF per exogenous variable").clone(),
            },
            VarKind::Endogenous => {
                se_to_cpt(pscm, pscm.equation(v.id).expect("endogenous variable has an equation"))
            }
        })
        .collect()
}

/// Convenience constructor used by tests, fixtures and the generator.
#[derive(Default, Debug, Clone)]
pub struct PscmBuilder {
    variables: Vec<Variable>,
    equations: Vec<StructuralEquation>,
}

impl PscmBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn add(&mut self, name: &str, cardinality: usize, kind: VarKind) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(Variable { id, name: name.to_string(), cardinality, kind });
        id
    }

    pub fn exogenous(&mut self, name: &str, cardinality: usize) -> VarId {
        self.add(name, cardinality, VarKind::Exogenous)
    }

    pub fn endogenous(&mut self, name: &str, cardinality: usize) -> VarId {
        self.add(name, cardinality, VarKind::Endogenous)
    }

    pub fn equation(&mut self, child: VarId, inputs: &[VarId], table: Vec<usize>) -> &mut Self {
        self.equations.push(StructuralEquation { child, inputs: inputs.to_vec(), table });
        self
    }

    pub fn build(self) -> Result<Pscm> {
        Pscm::new(self.variables, self.equations)
    }

    pub fn build_unchecked(self) -> Pscm {
        Pscm::from_parts(self.variables, self.equations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn fig3_model_is_valid() {
        assert!(validate(&fixtures::fig3_pscm()).is_empty());
        assert!(validate_pmfs(&fixtures::fig3_fscm()).is_empty());
    }

    #[test]
    fn added_back_arc_is_a_cycle() {
        let m = fixtures::fig3_pscm();
        let (v1, v2) = (m.find("V1").unwrap(), m.find("V2").unwrap());
        let mut eqs = m.equations().to_vec();
        let e1 = eqs.iter_mut().find(|e| e.child == v1).unwrap();
        // f_V1(U1, V2) = U1
        e1.inputs.push(v2);
        e1.table = vec![0, 0, 1, 1];
        let broken = Pscm::from_parts(m.variables().to_vec(), eqs);
        let v = validate(&broken);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, Rule::Cycle);
    }

    #[test]
    fn constant_map_over_an_input_is_not_surjective() {
        let mut b = PscmBuilder::new();
        let u = b.exogenous("U", 2);
        let v = b.endogenous("V", 2);
        b.equation(v, &[u], vec![0, 0]);
        let v = validate(&b.build_unchecked());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::NotSurjective);
        assert_eq!(v[0].variable, "V");
    }

    #[test]
    fn structural_errors_are_named() {
        let mut b = PscmBuilder::new();
        let u = b.exogenous("U", 2);
        let v = b.endogenous("V", 2);
        let w = b.endogenous("W", 1);
        b.equation(v, &[u], vec![0, 1, 1]);
        b.equation(u, &[], vec![0]);
        let rules: Vec<Rule> = validate(&b.build_unchecked()).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::TableNotTotal));
        assert!(rules.contains(&Rule::ExogenousWithEquation));
        assert!(rules.contains(&Rule::CardinalityBelowTwo));
        assert!(rules.contains(&Rule::MissingEquation));
        let _ = w;
    }

    #[test]
    fn identity_equation_gives_identity_cpt() {
        let m = fixtures::fig3_pscm();
        let cpt = se_to_cpt(&m, m.equation(m.find("V1").unwrap()).unwrap());
        assert_eq!(cpt.values, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn fig3_v2_cpt_matches_case_map() {
        let m = fixtures::fig3_pscm();
        let cpt = se_to_cpt(&m, m.equation(m.find("V2").unwrap()).unwrap());
        assert_eq!(cpt.cards, vec![2, 4, 2]);
        // rows (V1, U2): V2 = 0, V1, !V1, 1
        let expected_state = |v1: usize, u2: usize| match u2 {
            0 => 0,
            1 => v1,
            2 => 1 - v1,
            _ => 1,
        };
        for v1 in 0..2 {
            for u2 in 0..4 {
                let row = cpt.row(v1 * 4 + u2);
                let s = expected_state(v1, u2);
                assert_eq!(row[s], 1.0);
                assert_eq!(row[1 - s], 0.0);
            }
        }
        assert!(cpt.is_degenerate());
    }

    #[test]
    fn surjective_two_input_map_puts_all_mass_on_mapped_states() {
        let mut b = PscmBuilder::new();
        let u = b.exogenous("U", 2);
        let x = b.endogenous("X", 2);
        let y = b.endogenous("Y", 2);
        b.equation(x, &[u], vec![0, 1]);
        // Y = X AND U
        b.equation(y, &[x, u], vec![0, 0, 0, 1]);
        let m = b.build().unwrap();
        let cpt = se_to_cpt(&m, m.equation(y).unwrap());
        for (row, &s) in m.equation(y).unwrap().table.iter().enumerate() {
            assert_eq!(cpt.row(row)[s], 1.0);
            assert_eq!(cpt.row(row).iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn induced_bn_of_fig3() {
        let bn = induced_bn(&fixtures::fig3_fscm());
        assert_eq!(bn.len(), 4);
        assert_eq!(bn[0].values, vec![0.1, 0.9]);
        assert_eq!(bn[1].values, vec![0.05, 0.15, 0.25, 0.55]);
        assert!(bn[2].is_degenerate() && bn[3].is_degenerate());
    }

    #[test]
    fn fig1_as_fscm_has_the_same_two_cpts() {
        // X1 becomes an exogenous-like root; X2 is non-degenerate, so it is kept as a BN.
        let (cards, cpts) = fixtures::fig1_bn();
        assert_eq!(cards, vec![2, 2]);
        assert_eq!(cpts[0].values, vec![0.1, 0.9]);
        assert_eq!(cpts[1].values, vec![0.2, 0.8, 0.3, 0.7]);
    }

    #[test]
    fn pmf_validation() {
        let f = fixtures::fig3_fscm();
        let bad = Fscm { pscm: f.pscm.clone(), exo_pmfs: vec![vec![0.5, 0.6], f.exo_pmfs[1].clone()] };
        let v = validate_pmfs(&bad);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].variable, "U1");
    }

    #[test]
    fn config_index_roundtrip() {
        let cards = [3, 2, 4];
        let mut out = [0; 3];
        for i in 0..24 {
            config_states(i, &cards, &mut out);
            assert_eq!(config_index(out, &cards), i);
        }
    }
}
