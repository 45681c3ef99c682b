//! Compilation by symbolic variable elimination.
//!
//! Factor cells hold circuit nodes instead of numbers. Multiplying and
//! summing cells emits product and sum nodes, so the elimination trace is the
//! circuit. With folding on, 0 entries of degenerate CPTs delete their
//! product terms and 1 entries are absorbed without a leaf.

use std::collections::HashMap;

use super::{NodeId, NodeKind, ParamId, ParamLayout, SymbolicCircuit};
use crate::model::{config_index, config_states, se_to_cpt, Cpt, Pscm, VarId, VarKind};
use crate::ve::{min_fill_order, UndirectedGraph};

#[derive(Clone, Debug, PartialEq)]
pub struct CompileOptions {
    /// Fold 0/1 CPT entries away instead of emitting constant leaves.
    pub fold: bool,
    /// Elimination order; min-fill over the moral graph when `None`.
    pub order: Option<Vec<VarId>>,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self { fold: true, order: None }
    }
}

/// Compiles `pscm` with exogenous PMFs as parameters and determinism folded.
pub fn compile(pscm: &Pscm) -> SymbolicCircuit {
    compile_with(pscm, &CompileOptions::default())
}

/// As [`compile`], but every CPT entry becomes a (shared) constant leaf.
pub fn compile_unfolded(pscm: &Pscm) -> SymbolicCircuit {
    compile_with(pscm, &CompileOptions { fold: false, order: None })
}

pub fn compile_with(pscm: &Pscm, opts: &CompileOptions) -> SymbolicCircuit {
    let layout = ParamLayout::of_pscm(pscm);
    let tables = pscm
        .variables()
        .iter()
        .map(|v| match v.kind {
            VarKind::Exogenous => Table {
                scope: vec![v.id],
                cards: vec![v.cardinality],
                leaves: (0..v.cardinality)
                    .map(|s| Leaf::Param(layout.id(v.id, s).expect("exogenous in layout")))
                    .collect(),
            },
            VarKind::Endogenous => {
                let eq = pscm.equation(v.id).expect("endogenous variable has an equation");
                Table::constants(&se_to_cpt(pscm, eq))
            }
        })
        .collect();
    build(pscm.cardinalities(), tables, layout, opts)
}

/// Compiles a Bayesian network; the root CPTs of `symbolic` become parameter
/// leaves and every other entry a constant.
pub fn compile_bn(
    cards: &[usize],
    cpts: &[Cpt],
    symbolic: &[VarId],
    opts: &CompileOptions,
) -> SymbolicCircuit {
    let sym: Vec<(VarId, usize)> = symbolic.iter().map(|&v| (v, cards[v.0])).collect();
    let layout = ParamLayout::new(cards.len(), &sym);
    let tables = cpts
        .iter()
        .map(|c| {
            if symbolic.contains(&c.child) {
                assert!(c.parents.is_empty(), "only root CPTs can be symbolic");
                Table {
                    scope: vec![c.child],
                    cards: c.cards.clone(),
                    leaves: (0..c.child_card())
                        .map(|s| Leaf::Param(layout.id(c.child, s).expect("in layout")))
                        .collect(),
                }
            } else {
                Table::constants(c)
            }
        })
        .collect();
    build(cards.to_vec(), tables, layout, opts)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Leaf {
    Param(ParamId),
    Const(f64),
}

/// A CPT whose scope is `parents ++ [child]`, child fastest.
struct Table {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    leaves: Vec<Leaf>,
}

impl Table {
    fn constants(cpt: &Cpt) -> Self {
        let mut scope = cpt.parents.clone();
        scope.push(cpt.child);
        Self { scope, cards: cpt.cards.clone(), leaves: cpt.values.iter().map(|&p| Leaf::Const(p)).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cell {
    Zero,
    One,
    Node(NodeId),
}

struct SymFactor {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    cells: Vec<Cell>,
}

impl SymFactor {
    /// Re-lays `cells` (over `scope` in the given order) with the scope sorted.
    fn sorted(scope: Vec<VarId>, cards: Vec<usize>, cells: Vec<Cell>) -> Self {
        let mut perm: Vec<usize> = (0..scope.len()).collect();
        perm.sort_by_key(|&i| scope[i]);
        let new_scope: Vec<VarId> = perm.iter().map(|&i| scope[i]).collect();
        let new_cards: Vec<usize> = perm.iter().map(|&i| cards[i]).collect();
        let mut out = vec![Cell::Zero; cells.len()];
        let mut states = vec![0; scope.len()];
        for (idx, cell) in cells.into_iter().enumerate() {
            config_states(idx, &cards, &mut states);
            out[config_index(perm.iter().map(|&i| states[i]), &new_cards)] = cell;
        }
        Self { scope: new_scope, cards: new_cards, cells: out }
    }
}

#[derive(Default)]
struct Builder {
    kinds: Vec<NodeKind>,
    kids: Vec<Vec<NodeId>>,
    interned: HashMap<(bool, Vec<NodeId>), NodeId>,
    constants: HashMap<u64, NodeId>,
}

impl Builder {
    fn push(&mut self, kind: NodeKind, kids: Vec<NodeId>) -> NodeId {
        let id = self.kinds.len() as NodeId;
        self.kinds.push(kind);
        self.kids.push(kids);
        id
    }

    fn constant(&mut self, c: f64) -> NodeId {
        if let Some(&id) = self.constants.get(&c.to_bits()) {
            return id;
        }
        let id = self.push(NodeKind::Constant(c), Vec::new());
        self.constants.insert(c.to_bits(), id);
        id
    }

    fn internal(&mut self, is_sum: bool, kids: Vec<NodeId>) -> NodeId {
        let key = (is_sum, kids);
        if let Some(&id) = self.interned.get(&key) {
            return id;
        }
        let kind = if is_sum { NodeKind::Sum } else { NodeKind::Product };
        let id = self.push(kind, key.1.clone());
        self.interned.insert(key, id);
        id
    }

    fn product(&mut self, cells: &[Cell]) -> Cell {
        let mut kids = Vec::with_capacity(cells.len());
        for c in cells {
            match *c {
                Cell::Zero => return Cell::Zero,
                Cell::One => {}
                Cell::Node(n) => kids.push(n),
            }
        }
        match kids.len() {
            0 => Cell::One,
            1 => Cell::Node(kids[0]),
            _ => Cell::Node(self.internal(false, kids)),
        }
    }

    fn sum(&mut self, cells: &[Cell]) -> Cell {
        let mut kids = Vec::with_capacity(cells.len());
        for c in cells {
            match *c {
                Cell::Zero => {}
                Cell::One => kids.push(self.constant(1.0)),
                Cell::Node(n) => kids.push(n),
            }
        }
        kids.sort_unstable();
        match kids.len() {
            0 => Cell::Zero,
            1 => Cell::Node(kids[0]),
            _ => Cell::Node(self.internal(true, kids)),
        }
    }
}

fn build(cards: Vec<usize>, tables: Vec<Table>, layout: ParamLayout, opts: &CompileOptions) -> SymbolicCircuit {
    let n = cards.len();
    let mut b = Builder::default();

    let param_index: Vec<NodeId> =
        (0..layout.len()).map(|p| b.push(NodeKind::Parameter(ParamId(p)), Vec::new())).collect();
    let indicator_index: Vec<Vec<NodeId>> = (0..n)
        .map(|v| {
            (0..cards[v])
                .map(|s| b.push(NodeKind::Indicator { var: VarId(v), state: s }, Vec::new()))
                .collect()
        })
        .collect();

    let mut graph = UndirectedGraph::new(n);
    let mut factors: Vec<SymFactor> = Vec::with_capacity(2 * tables.len());
    for t in tables {
        graph.add_clique(&t.scope);
        let cells = t
            .leaves
            .iter()
            .map(|leaf| match *leaf {
                Leaf::Param(p) => Cell::Node(param_index[p.0]),
                Leaf::Const(c) if opts.fold && c == 0.0 => Cell::Zero,
                Leaf::Const(c) if opts.fold && c == 1.0 => Cell::One,
                Leaf::Const(c) => Cell::Node(b.constant(c)),
            })
            .collect();
        let child = *t.scope.last().expect("table has a child");
        factors.push(SymFactor::sorted(t.scope, t.cards, cells));
        factors.push(SymFactor {
            scope: vec![child],
            cards: vec![cards[child.0]],
            cells: indicator_index[child.0].iter().map(|&l| Cell::Node(l)).collect(),
        });
    }

    let order = opts.order.clone().unwrap_or_else(|| min_fill_order(&graph));
    for v in order {
        let (bucket, rest): (Vec<SymFactor>, Vec<SymFactor>) =
            factors.into_iter().partition(|f| f.scope.binary_search(&v).is_ok());
        factors = rest;
        if bucket.is_empty() {
            continue;
        }
        factors.push(eliminate(&mut b, &bucket, v));
    }

    let finals: Vec<Cell> = factors
        .iter()
        .map(|f| {
            debug_assert!(f.scope.is_empty(), "elimination order must cover every variable");
            f.cells[0]
        })
        .collect();
    let root = match b.product(&finals) {
        Cell::Node(id) => id,
        Cell::One => b.constant(1.0),
        Cell::Zero => b.constant(0.0),
    };
    finish(b, root, param_index, indicator_index, layout, cards)
}

/// Multiplies the bucket and sums `v` out, emitting nodes.
fn eliminate(b: &mut Builder, bucket: &[SymFactor], v: VarId) -> SymFactor {
    let mut scope: Vec<VarId> = bucket.iter().flat_map(|f| f.scope.iter().copied()).collect();
    scope.sort();
    scope.dedup();
    let cards: Vec<usize> = scope
        .iter()
        .map(|u| {
            let f = bucket.iter().find(|f| f.scope.contains(u)).expect("scope var in some factor");
            f.cards[f.scope.binary_search(u).expect("present")]
        })
        .collect();
    let strides: Vec<Vec<usize>> = bucket
        .iter()
        .map(|f| {
            let mut own = vec![1usize; f.cards.len()];
            for i in (0..f.cards.len().saturating_sub(1)).rev() {
                own[i] = own[i + 1] * f.cards[i + 1];
            }
            scope.iter().map(|u| f.scope.binary_search(u).map(|k| own[k]).unwrap_or(0)).collect()
        })
        .collect();

    let size: usize = cards.iter().product();
    let mut product = Vec::with_capacity(size);
    let mut offsets = vec![0usize; bucket.len()];
    let mut states = vec![0usize; scope.len()];
    let mut cells = Vec::with_capacity(bucket.len());
    for _ in 0..size {
        cells.clear();
        cells.extend(bucket.iter().zip(&offsets).map(|(f, &o)| f.cells[o]));
        product.push(b.product(&cells));
        for d in (0..scope.len()).rev() {
            states[d] += 1;
            for (o, s) in offsets.iter_mut().zip(&strides) {
                *o += s[d];
            }
            if states[d] < cards[d] {
                break;
            }
            for (o, s) in offsets.iter_mut().zip(&strides) {
                *o -= s[d] * cards[d];
            }
            states[d] = 0;
        }
    }

    let k = scope.binary_search(&v).expect("v in bucket scope");
    let card = cards[k];
    let inner: usize = cards[k + 1..].iter().product();
    let outer: usize = cards[..k].iter().product();
    let mut summed = Vec::with_capacity(outer * inner);
    let mut terms = Vec::with_capacity(card);
    for o in 0..outer {
        for i in 0..inner {
            terms.clear();
            terms.extend((0..card).map(|s| product[(o * card + s) * inner + i]));
            summed.push(b.sum(&terms));
        }
    }
    let mut out_scope = scope;
    let mut out_cards = cards;
    out_scope.remove(k);
    out_cards.remove(k);
    SymFactor { scope: out_scope, cards: out_cards, cells: summed }
}

/// Drops nodes unreachable from the root (leaves in the indices are kept) and
/// packs the arena into CSR form.
fn finish(
    b: Builder,
    root: NodeId,
    param_index: Vec<NodeId>,
    indicator_index: Vec<Vec<NodeId>>,
    layout: ParamLayout,
    cards: Vec<usize>,
) -> SymbolicCircuit {
    let total = b.kinds.len();
    let mut keep = vec![false; total];
    for &p in &param_index {
        keep[p as usize] = true;
    }
    for l in indicator_index.iter().flatten() {
        keep[*l as usize] = true;
    }
    let mut stack = vec![root];
    keep[root as usize] = true;
    while let Some(id) = stack.pop() {
        for &c in &b.kids[id as usize] {
            if !keep[c as usize] {
                keep[c as usize] = true;
                stack.push(c);
            }
        }
    }
    let mut remap = vec![NodeId::MAX; total];
    let mut next = 0;
    for (i, &k) in keep.iter().enumerate() {
        if k {
            remap[i] = next;
            next += 1;
        }
    }
    let mut kinds = Vec::with_capacity(next as usize);
    let mut offsets = Vec::with_capacity(next as usize + 1);
    let mut children = Vec::new();
    offsets.push(0u32);
    for i in 0..total {
        if keep[i] {
            kinds.push(b.kinds[i]);
            children.extend(b.kids[i].iter().map(|&c| remap[c as usize]));
            offsets.push(children.len() as u32);
        }
    }
    SymbolicCircuit {
        kinds,
        offsets,
        children,
        root: remap[root as usize],
        param_index: param_index.iter().map(|&p| remap[p as usize]).collect(),
        indicator_index: indicator_index
            .iter()
            .map(|ls| ls.iter().map(|&l| remap[l as usize]).collect())
            .collect(),
        layout,
        cards,
    }
}
