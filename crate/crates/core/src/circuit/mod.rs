//! Symbolic arithmetic circuits.
//!
//! A circuit computes the network polynomial of a model. Exogenous
//! probabilities are parameter leaves bound at evaluation time, so one
//! compilation serves every fully specified model sharing the structural
//! equations.

mod compile;

use std::fmt::Write as _;

use serde::Serialize;

use crate::model::{Pscm, VarId};

pub use compile::{compile, compile_bn, compile_unfolded, compile_with, CompileOptions};

/// Index of a circuit node. Children always have smaller ids than parents.
pub type NodeId = u32;

/// Dense identifier of one `(exogenous variable, state)` parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ParamId(pub usize);

/// Bijection between `(variable, state)` pairs of the symbolic roots and
/// [`ParamId`]s; variables are laid out by ascending id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    offsets: Vec<Option<usize>>,
    vars: Vec<VarId>,
    cards: Vec<usize>,
    len: usize,
}

impl ParamLayout {
    pub fn new(n_vars: usize, symbolic: &[(VarId, usize)]) -> Self {
        let mut sorted = symbolic.to_vec();
        sorted.sort();
        let mut offsets = vec![None; n_vars];
        let mut len = 0;
        for &(v, card) in &sorted {
            offsets[v.0] = Some(len);
            len += card;
        }
        Self {
            offsets,
            vars: sorted.iter().map(|p| p.0).collect(),
            cards: sorted.iter().map(|p| p.1).collect(),
            len,
        }
    }

    /// Layout over the exogenous variables of `pscm`.
    pub fn of_pscm(pscm: &Pscm) -> Self {
        let exo: Vec<(VarId, usize)> = pscm.exogenous().map(|u| (u, pscm.cardinality(u))).collect();
        Self::new(pscm.len(), &exo)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn id(&self, var: VarId, state: usize) -> Option<ParamId> {
        let off = self.offsets.get(var.0).copied().flatten()?;
        let k = self.vars.binary_search(&var).ok()?;
        (state < self.cards[k]).then_some(ParamId(off + state))
    }

    /// Range of parameter ids belonging to `var`.
    pub fn range(&self, var: VarId) -> Option<std::ops::Range<usize>> {
        let off = self.offsets.get(var.0).copied().flatten()?;
        let k = self.vars.binary_search(&var).ok()?;
        Some(off..off + self.cards[k])
    }

    pub fn var_state(&self, p: ParamId) -> (VarId, usize) {
        let k = self
            .vars
            .iter()
            .rposition(|v| self.offsets[v.0].is_some_and(|o| o <= p.0))
            .expect("param id in range");
        (self.vars[k], p.0 - self.offsets[self.vars[k].0].expect("offset"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeKind {
    Sum,
    Product,
    Indicator { var: VarId, state: usize },
    Parameter(ParamId),
    Constant(f64),
}

/// A borrowed view of one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircuitNode<'a> {
    pub kind: NodeKind,
    pub children: &'a [NodeId],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CircuitStats {
    pub node_count: usize,
    pub arc_count: usize,
    pub param_count: usize,
    pub depth: usize,
}

#[derive(Clone, Debug)]
pub struct SymbolicCircuit {
    pub(crate) kinds: Vec<NodeKind>,
    /// CSR offsets into `children`; node `i` owns `children[offsets[i]..offsets[i + 1]]`.
    pub(crate) offsets: Vec<u32>,
    pub(crate) children: Vec<NodeId>,
    pub(crate) root: NodeId,
    pub(crate) param_index: Vec<NodeId>,
    pub(crate) indicator_index: Vec<Vec<NodeId>>,
    pub(crate) layout: ParamLayout,
    pub(crate) cards: Vec<usize>,
}

impl SymbolicCircuit {
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> CircuitNode<'_> {
        let i = id as usize;
        CircuitNode {
            kind: self.kinds[i],
            children: &self.children[self.offsets[i] as usize..self.offsets[i + 1] as usize],
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = CircuitNode<'_>> + '_ {
        (0..self.kinds.len() as NodeId).map(|i| self.node(i))
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    /// Cardinalities of the model variables, indexed by id.
    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn param_leaf(&self, p: ParamId) -> NodeId {
        self.param_index[p.0]
    }

    pub fn indicator_leaf(&self, var: VarId, state: usize) -> NodeId {
        self.indicator_index[var.0][state]
    }

    pub fn stats(&self) -> CircuitStats {
        let mut depth = vec![0usize; self.len()];
        for i in 0..self.len() {
            let kids = self.node(i as NodeId).children;
            depth[i] = kids.iter().map(|&c| depth[c as usize] + 1).max().unwrap_or(0);
        }
        CircuitStats {
            node_count: self.len(),
            arc_count: self.children.len(),
            param_count: self.kinds.iter().filter(|k| matches!(k, NodeKind::Parameter(_))).count(),
            depth: depth[self.root as usize],
        }
    }

    /// Line-oriented text dump, one node per line, ending with `ROOT <id>`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, node) in self.nodes().enumerate() {
            let _ = match node.kind {
                NodeKind::Sum | NodeKind::Product => {
                    let tag = if node.kind == NodeKind::Sum { 'S' } else { 'P' };
                    let kids: Vec<String> = node.children.iter().map(|c| c.to_string()).collect();
                    writeln!(out, "{i} {tag} {}", kids.join(" "))
                }
                NodeKind::Indicator { var, state } => writeln!(out, "{i} I {} {state}", var.0),
                NodeKind::Parameter(p) => writeln!(out, "{i} T {}", p.0),
                NodeKind::Constant(c) => writeln!(out, "{i} C {c}"),
            };
        }
        let _ = writeln!(out, "ROOT {}", self.root);
        out
    }
}
