//! c-component decomposition and per-component sub-models.

use std::collections::BTreeSet;

use super::{Pscm, StructuralEquation, VarId, VarKind, Variable};
use crate::dataset::Dataset;

/// Variables linked by exogenous-to-endogenous arcs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CComponent {
    pub exogenous: Vec<VarId>,
    pub members: Vec<VarId>,
    /// Endogenous parents of some member that are not members themselves.
    pub boundary_parents: Vec<VarId>,
}

impl CComponent {
    fn min_id(&self) -> VarId {
        self.exogenous.iter().chain(&self.members).copied().min().expect("component is nonempty")
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so the representative is the minimum id
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Partitions the variables into c-components, ordered by smallest member id.
pub fn c_components(pscm: &Pscm) -> Vec<CComponent> {
    let n = pscm.len();
    let mut uf = UnionFind((0..n).collect());
    for eq in pscm.equations() {
        for &p in &eq.inputs {
            if pscm.variable(p).is_exogenous() {
                uf.union(p.0, eq.child.0);
            }
        }
    }
    let mut groups: Vec<Vec<VarId>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = uf.find(i);
        groups[r].push(VarId(i));
    }
    let mut out: Vec<CComponent> = groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|g| {
            let (exogenous, members): (Vec<VarId>, Vec<VarId>) =
                g.into_iter().partition(|&v| pscm.variable(v).is_exogenous());
            let member_set: BTreeSet<VarId> = members.iter().copied().collect();
            let boundary: BTreeSet<VarId> = members
                .iter()
                .flat_map(|&m| pscm.parents(m).iter().copied())
                .filter(|p| !pscm.variable(*p).is_exogenous() && !member_set.contains(p))
                .collect();
            CComponent { exogenous, members, boundary_parents: boundary.into_iter().collect() }
        })
        .collect();
    out.sort_by_key(CComponent::min_id);
    out
}

/// The sub-model of one c-component together with its projected data.
///
/// Boundary parents appear as root variables of kind exogenous; they are
/// observed in every record and are not EM parameters (see `boundary`).
#[derive(Clone, Debug)]
pub struct Submodel {
    pub pscm: Pscm,
    pub dataset: Dataset,
    /// Sub-model ids of the boundary roots.
    pub boundary: Vec<VarId>,
    /// Sub-model id -> id in the parent model.
    pub to_original: Vec<VarId>,
}

impl Submodel {
    pub fn is_boundary(&self, v: VarId) -> bool {
        self.boundary.contains(&v)
    }

    /// Exogenous variables of the sub-model that are EM parameters.
    pub fn free_exogenous(&self) -> Vec<VarId> {
        self.pscm.exogenous().filter(|v| !self.is_boundary(*v)).collect()
    }
}

pub fn component_submodel(pscm: &Pscm, comp: &CComponent, dataset: &Dataset) -> Submodel {
    let mut keep: Vec<VarId> = comp
        .exogenous
        .iter()
        .chain(&comp.members)
        .chain(&comp.boundary_parents)
        .copied()
        .collect();
    keep.sort();
    let mut to_sub = vec![None; pscm.len()];
    for (i, &v) in keep.iter().enumerate() {
        to_sub[v.0] = Some(VarId(i));
    }
    let sub = |v: VarId| to_sub[v.0].expect("inputs of members stay in the sub-model");

    let variables: Vec<Variable> = keep
        .iter()
        .map(|&v| {
            let orig = pscm.variable(v);
            let kind = if comp.boundary_parents.contains(&v) { VarKind::Exogenous } else { orig.kind };
            Variable { id: sub(v), name: orig.name.clone(), cardinality: orig.cardinality, kind }
        })
        .collect();
    let equations: Vec<StructuralEquation> = comp
        .members
        .iter()
        .filter_map(|&m| pscm.equation(m))
        .map(|eq| StructuralEquation {
            child: sub(eq.child),
            inputs: eq.inputs.iter().map(|&i| sub(i)).collect(),
            table: eq.table.clone(),
        })
        .collect();

    let observed: Vec<VarId> = keep
        .iter()
        .copied()
        .filter(|v| comp.boundary_parents.contains(v) || comp.members.contains(v))
        .collect();
    let renamed: Vec<VarId> = observed.iter().map(|&v| sub(v)).collect();
    let dataset = dataset.project(&observed, &renamed);

    Submodel {
        pscm: Pscm::from_parts(variables, equations),
        dataset,
        boundary: comp.boundary_parents.iter().map(|&v| sub(v)).collect(),
        to_original: keep,
    }
}
