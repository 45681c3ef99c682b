use std::collections::BTreeMap;

use crate::model::VarId;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Record {
    /// States aligned with [`Dataset::columns`].
    pub values: Vec<usize>,
    pub count: u64,
}

/// Endogenous observations, deduplicated with multiplicities.
///
/// Records are kept in lexicographic order of their values so that two
/// datasets holding the same multiset of rows are identical.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    columns: Vec<VarId>,
    records: Vec<Record>,
    total: u64,
}

impl Dataset {
    pub fn from_rows<I>(columns: Vec<VarId>, rows: I) -> Self
    where
        I: IntoIterator<Item = Vec<usize>>,
    {
        Self::from_counts(columns, rows.into_iter().map(|r| (r, 1)))
    }

    /// Builds a dataset from `(row, count)` pairs, merging repeated rows and
    /// dropping zero counts.
    pub fn from_counts<I>(columns: Vec<VarId>, rows: I) -> Self
    where
        I: IntoIterator<Item = (Vec<usize>, u64)>,
    {
        let mut merged: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for (row, count) in rows {
            assert_eq!(row.len(), columns.len(), "row width must match the columns");
            if count > 0 {
                *merged.entry(row).or_default() += count;
            }
        }
        let total = merged.values().sum();
        let records = merged.into_iter().map(|(values, count)| Record { values, count }).collect();
        Self { columns, records, total }
    }

    pub fn empty(columns: Vec<VarId>) -> Self {
        Self { columns, records: Vec::new(), total: 0 }
    }

    pub fn columns(&self) -> &[VarId] {
        &self.columns
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// |D|, the number of observations counted with multiplicity.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// One row per observation, in record order.
    pub fn explode(&self) -> Vec<Vec<usize>> {
        self.records
            .iter()
            .flat_map(|r| std::iter::repeat_n(r.values.clone(), r.count as usize))
            .collect()
    }

    /// Keeps the listed columns (in that order) and renames them to `renamed`.
    pub fn project(&self, keep: &[VarId], renamed: &[VarId]) -> Dataset {
        assert_eq!(keep.len(), renamed.len());
        let pos: Vec<usize> = keep
            .iter()
            .map(|k| {
                self.columns
                    .iter()
                    .position(|c| c == k)
                    .unwrap_or_else(|| panic!("column {k} not in dataset"))
            })
            .collect();
        Dataset::from_counts(
            renamed.to_vec(),
            self.records
                .iter()
                .map(|r| (pos.iter().map(|&p| r.values[p]).collect(), r.count)),
        )
    }

    /// Evidence vector indexed by variable id for a model with `n_vars` variables.
    pub fn evidence(&self, record: &Record, n_vars: usize) -> Vec<Option<usize>> {
        let mut ev = vec![None; n_vars];
        self.fill_evidence(record, &mut ev);
        ev
    }

    pub fn fill_evidence(&self, record: &Record, ev: &mut [Option<usize>]) {
        for (c, &s) in self.columns.iter().zip(&record.values) {
            ev[c.0] = Some(s);
        }
    }
}
