use crate::error::{Error, Result};
use crate::model::{Cpt, VarId};

/// Dense table over a scope of variables, row-major with the last variable
/// fastest. Scopes are kept sorted by variable id.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * cards[i + 1];
    }
    s
}

impl Factor {
    /// Builds a factor over `scope` (any order of distinct variables); the
    /// result is stored with its scope sorted.
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if scope.len() != cards.len() {
            return Err(Error::FactorMismatch("scope and cardinalities differ in length".into()));
        }
        let size: usize = cards.iter().product();
        if values.len() != size {
            return Err(Error::FactorMismatch(format!(
                "{} values for a domain of {size}",
                values.len()
            )));
        }
        if values.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::FactorMismatch("negative or NaN entry".into()));
        }
        let mut sorted = scope.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != scope.len() {
            return Err(Error::FactorMismatch("repeated variable in scope".into()));
        }
        Ok(Self { scope, cards, values }.into_sorted())
    }

    pub fn scalar(value: f64) -> Self {
        Self { scope: Vec::new(), cards: Vec::new(), values: vec![value] }
    }

    pub fn from_cpt(cpt: &Cpt) -> Self {
        let mut scope = cpt.parents.clone();
        scope.push(cpt.child);
        Self { scope, cards: cpt.cards.clone(), values: cpt.values.clone() }.into_sorted()
    }

    fn into_sorted(self) -> Self {
        if self.scope.windows(2).all(|w| w[0] < w[1]) {
            return self;
        }
        let mut perm: Vec<usize> = (0..self.scope.len()).collect();
        perm.sort_by_key(|&i| self.scope[i]);
        let scope: Vec<VarId> = perm.iter().map(|&i| self.scope[i]).collect();
        let cards: Vec<usize> = perm.iter().map(|&i| self.cards[i]).collect();
        let old_strides = strides(&self.cards);
        // stride in the old layout for each position of the new layout
        let src: Vec<usize> = perm.iter().map(|&i| old_strides[i]).collect();
        let mut values = vec![0.0; self.values.len()];
        let mut states = vec![0usize; scope.len()];
        let mut offset = 0usize;
        for slot in values.iter_mut() {
            *slot = self.values[offset];
            for d in (0..scope.len()).rev() {
                states[d] += 1;
                offset += src[d];
                if states[d] < cards[d] {
                    break;
                }
                offset -= src[d] * cards[d];
                states[d] = 0;
            }
        }
        Self { scope, cards, values }
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.scope.binary_search(&v).is_ok()
    }

    /// Entry for a full assignment of the scope, given in scope order.
    pub fn value(&self, states: &[usize]) -> f64 {
        self.values[crate::model::config_index(states.iter().copied(), &self.cards)]
    }

    pub fn multiply(&self, other: &Factor) -> Result<Factor> {
        let mut scope = Vec::with_capacity(self.scope.len() + other.scope.len());
        let mut cards = Vec::with_capacity(scope.capacity());
        let (mut i, mut j) = (0, 0);
        while i < self.scope.len() || j < other.scope.len() {
            let a = self.scope.get(i);
            let b = other.scope.get(j);
            match (a, b) {
                (Some(x), Some(y)) if x == y => {
                    if self.cards[i] != other.cards[j] {
                        return Err(Error::FactorMismatch(format!(
                            "variable {x} has cardinality {} and {}",
                            self.cards[i], other.cards[j]
                        )));
                    }
                    scope.push(*x);
                    cards.push(self.cards[i]);
                    i += 1;
                    j += 1;
                }
                (Some(x), Some(y)) if x < y => {
                    scope.push(*x);
                    cards.push(self.cards[i]);
                    i += 1;
                }
                (Some(x), None) => {
                    scope.push(*x);
                    cards.push(self.cards[i]);
                    i += 1;
                }
                (_, Some(y)) => {
                    scope.push(*y);
                    cards.push(other.cards[j]);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        let stride_in = |f: &Factor| -> Vec<usize> {
            let s = strides(&f.cards);
            scope
                .iter()
                .map(|v| f.scope.binary_search(v).map(|k| s[k]).unwrap_or(0))
                .collect()
        };
        let sa = stride_in(self);
        let sb = stride_in(other);
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut states = vec![0usize; scope.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            for d in (0..scope.len()).rev() {
                states[d] += 1;
                ia += sa[d];
                ib += sb[d];
                if states[d] < cards[d] {
                    break;
                }
                ia -= sa[d] * cards[d];
                ib -= sb[d] * cards[d];
                states[d] = 0;
            }
        }
        Ok(Factor { scope, cards, values })
    }

    /// Sums `v` out of the factor; a no-op when `v` is not in scope.
    pub fn marginalize(&self, v: VarId) -> Factor {
        let Ok(k) = self.scope.binary_search(&v) else {
            return self.clone();
        };
        let card = self.cards[k];
        let inner: usize = self.cards[k + 1..].iter().product();
        let outer: usize = self.cards[..k].iter().product();
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..card {
                let base = (o * card + s) * inner;
                let dst = &mut values[o * inner..(o + 1) * inner];
                for (d, x) in dst.iter_mut().zip(&self.values[base..base + inner]) {
                    *d += x;
                }
            }
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(k);
        cards.remove(k);
        Factor { scope, cards, values }
    }

    /// Zeroes every entry inconsistent with the evidence; the scope is kept.
    /// `evidence` is indexed by variable id.
    pub fn reduce(&self, evidence: &[Option<usize>]) -> Factor {
        let mut out = self.clone();
        let mut states = vec![0usize; self.scope.len()];
        for (idx, slot) in out.values.iter_mut().enumerate() {
            crate::model::config_states(idx, &self.cards, &mut states);
            let consistent = self
                .scope
                .iter()
                .zip(&states)
                .all(|(v, &s)| evidence.get(v.0).copied().flatten().is_none_or(|e| e == s));
            if !consistent {
                *slot = 0.0;
            }
        }
        out
    }

    /// Instantiates the evidence and drops the evidenced variables from the scope.
    pub fn restrict(&self, evidence: &[Option<usize>]) -> Factor {
        let fixed: Vec<Option<usize>> =
            self.scope.iter().map(|v| evidence.get(v.0).copied().flatten()).collect();
        if fixed.iter().all(Option::is_none) {
            return self.clone();
        }
        let st = strides(&self.cards);
        let mut base = 0usize;
        let mut scope = Vec::new();
        let mut cards = Vec::new();
        let mut kept_strides = Vec::new();
        for (k, f) in fixed.iter().enumerate() {
            match f {
                Some(s) => base += s * st[k],
                None => {
                    scope.push(self.scope[k]);
                    cards.push(self.cards[k]);
                    kept_strides.push(st[k]);
                }
            }
        }
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut states = vec![0usize; scope.len()];
        let mut offset = base;
        for _ in 0..size {
            values.push(self.values[offset]);
            for d in (0..scope.len()).rev() {
                states[d] += 1;
                offset += kept_strides[d];
                if states[d] < cards[d] {
                    break;
                }
                offset -= kept_strides[d] * cards[d];
                states[d] = 0;
            }
        }
        Factor { scope, cards, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn fig1_marginal_of_x2() {
        let (_, cpts) = fixtures::fig1_bn();
        let prior = Factor::from_cpt(&cpts[0]);
        let cond = Factor::from_cpt(&cpts[1]);
        let m = prior.multiply(&cond).unwrap().marginalize(VarId(0));
        assert_eq!(m.scope(), &[VarId(1)]);
        assert!(close(m.values(), &[0.29, 0.71]), "{:?}", m.values());
    }

    #[test]
    fn marginalizing_an_absent_variable_is_a_noop() {
        let f = Factor::new(vec![VarId(3)], vec![2], vec![0.4, 0.6]).unwrap();
        assert_eq!(f.marginalize(VarId(7)), f);
    }

    #[test]
    fn reduce_then_sum_is_slice_mass() {
        let f = Factor::new(vec![VarId(0), VarId(1)], vec![2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let ev = [None, Some(2)];
        assert_eq!(f.reduce(&ev).sum(), 3.0 + 6.0);
        assert_eq!(f.reduce(&ev).scope(), f.scope());
        let r = f.restrict(&ev);
        assert_eq!(r.scope(), &[VarId(0)]);
        assert_eq!(r.values(), &[3.0, 6.0]);
    }

    #[test]
    fn unsorted_scopes_are_normalized() {
        // table over (B, A) with A fastest
        let f = Factor::new(vec![VarId(1), VarId(0)], vec![2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(f.scope(), &[VarId(0), VarId(1)]);
        assert_eq!(f.value(&[2, 1]), 6.0);
        assert_eq!(f.value(&[1, 0]), 2.0);
    }

    #[test]
    fn mismatches_are_errors() {
        let a = Factor::new(vec![VarId(0)], vec![2], vec![0.5, 0.5]).unwrap();
        let b = Factor::new(vec![VarId(0)], vec![3], vec![0.2, 0.3, 0.5]).unwrap();
        assert!(matches!(a.multiply(&b), Err(Error::FactorMismatch(_))));
        assert!(Factor::new(vec![VarId(0)], vec![2], vec![1.0]).is_err());
        assert!(Factor::new(vec![VarId(0)], vec![2], vec![-1.0, 2.0]).is_err());
    }
}
