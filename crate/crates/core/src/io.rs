//! File formats: model JSON, dataset CSV, query JSON and results JSON.
//! Variables are referenced by name in every file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::em::{BoundsReport, EmRunResult, Termination};
use crate::error::{Error, Result};
use crate::model::{
    CounterfactualQuery, Pscm, StructuralEquation, Target, VarId, VarKind, Variable, World,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDoc {
    pub name: String,
    pub cardinality: usize,
    pub kind: VarKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationDoc {
    pub child: String,
    pub inputs: Vec<String>,
    pub table: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub variables: Vec<VariableDoc>,
    pub equations: Vec<EquationDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exo_pmfs: Option<BTreeMap<String, Vec<f64>>>,
}

/// A parsed model file. The PSCM is not validated yet.
#[derive(Clone, Debug)]
pub struct LoadedModel {
    pub pscm: Pscm,
    /// Aligned with the exogenous variables when the file is an FSCM.
    pub exo_pmfs: Option<Vec<Vec<f64>>>,
}

fn lookup(pscm_names: &BTreeMap<&str, VarId>, name: &str, field: &str) -> Result<VarId> {
    pscm_names
        .get(name)
        .copied()
        .ok_or_else(|| Error::Format(format!("{field}: unknown variable {name:?}")))
}

pub fn parse_model(text: &str) -> Result<LoadedModel> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let mut names = BTreeMap::new();
    let mut variables = Vec::new();
    for (i, v) in doc.variables.iter().enumerate() {
        if names.insert(v.name.as_str(), VarId(i)).is_some() {
            return Err(Error::Format(format!("variables[{i}].name: duplicate {:?}", v.name)));
        }
        variables.push(Variable { id: VarId(i), name: v.name.clone(), cardinality: v.cardinality, kind: v.kind });
    }
    let equations = doc
        .equations
        .iter()
        .enumerate()
        .map(|(i, eq)| {
            Ok(StructuralEquation {
                child: lookup(&names, &eq.child, &format!("equations[{i}].child"))?,
                inputs: eq
                    .inputs
                    .iter()
                    .map(|n| lookup(&names, n, &format!("equations[{i}].inputs")))
                    .collect::<Result<_>>()?,
                table: eq.table.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pscm = Pscm::from_parts(variables, equations);
    let exo_pmfs = match &doc.exo_pmfs {
        None => None,
        Some(map) => {
            for name in map.keys() {
                let id = lookup(&names, name, "exo_pmfs")?;
                if pscm.variable(id).kind != VarKind::Exogenous {
                    return Err(Error::Format(format!("exo_pmfs: {name:?} is not exogenous")));
                }
            }
            let pmfs = pscm
                .exogenous()
                .map(|u| {
                    let name = &pscm.variable(u).name;
                    map.get(name).cloned().ok_or_else(|| Error::Format(format!("exo_pmfs: missing {name:?}")))
                })
                .collect::<Result<_>>()?;
            Some(pmfs)
        }
    };
    Ok(LoadedModel { pscm, exo_pmfs })
}

pub fn model_doc(pscm: &Pscm, exo_pmfs: Option<&[Vec<f64>]>) -> ModelDoc {
    let name = |v: VarId| pscm.variable(v).name.clone();
    ModelDoc {
        variables: pscm
            .variables()
            .iter()
            .map(|v| VariableDoc { name: v.name.clone(), cardinality: v.cardinality, kind: v.kind })
            .collect(),
        equations: pscm
            .equations()
            .iter()
            .map(|eq| EquationDoc {
                child: name(eq.child),
                inputs: eq.inputs.iter().map(|&i| name(i)).collect(),
                table: eq.table.clone(),
            })
            .collect(),
        exo_pmfs: exo_pmfs.map(|pmfs| pscm.exogenous().map(name).zip(pmfs.iter().cloned()).collect()),
    }
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        Error::Csv(err) => Error::Format(format!("{}: {err}", path.display())),
        other => other,
    })
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let text = std::fs::read_to_string(path)?;
    with_path(path, parse_model(&text))
}

pub fn save_model(path: &Path, pscm: &Pscm, exo_pmfs: Option<&[Vec<f64>]>) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(&model_doc(pscm, exo_pmfs))?)?;
    Ok(())
}

/// Reads a CSV whose header names endogenous variables; rows are merged into
/// counts.
pub fn read_dataset<R: std::io::Read>(reader: R, pscm: &Pscm) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let columns: Vec<VarId> = header
        .iter()
        .map(|h| {
            let id = pscm.find(h).ok_or_else(|| Error::Format(format!("header: unknown variable {h:?}")))?;
            if pscm.variable(id).kind != VarKind::Endogenous {
                return Err(Error::Format(format!("header: {h:?} is not endogenous")));
            }
            Ok(id)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .zip(&columns)
            .map(|(cell, &c)| {
                let name = &pscm.variable(c).name;
                let s: usize = cell
                    .parse()
                    .map_err(|_| Error::Format(format!("row {}: {name}: not a state index {cell:?}", line + 1)))?;
                if s >= pscm.cardinality(c) {
                    return Err(Error::Format(format!("row {}: {name}: state {s} out of range", line + 1)));
                }
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Dataset::from_rows(columns, rows))
}

pub fn load_dataset(path: &Path, pscm: &Pscm) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    with_path(path, read_dataset(file, pscm))
}

pub fn write_dataset<W: std::io::Write>(writer: W, pscm: &Pscm, dataset: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(dataset.columns().iter().map(|&c| pscm.variable(c).name.as_str()))?;
    for row in dataset.explode() {
        w.write_record(row.iter().map(|s| s.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(path: &Path, pscm: &Pscm, dataset: &Dataset) -> Result<()> {
    write_dataset(std::fs::File::create(path)?, pscm, dataset)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldDoc {
    #[serde(default)]
    pub interventions: BTreeMap<String, usize>,
    #[serde(default)]
    pub observations: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDoc {
    pub world: usize,
    pub variable: String,
    pub state: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryDoc {
    pub worlds: Vec<WorldDoc>,
    pub target: TargetDoc,
}

pub fn parse_query(text: &str, pscm: &Pscm) -> Result<CounterfactualQuery> {
    let doc: QueryDoc = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let find = |name: &str, field: String| {
        pscm.find(name).ok_or_else(|| Error::Format(format!("{field}: unknown variable {name:?}")))
    };
    let map = |m: &BTreeMap<String, usize>, field: String| -> Result<BTreeMap<VarId, usize>> {
        m.iter().map(|(k, &v)| Ok((find(k, field.clone())?, v))).collect()
    };
    let worlds = doc
        .worlds
        .iter()
        .enumerate()
        .map(|(i, w)| {
            Ok(World {
                interventions: map(&w.interventions, format!("worlds[{i}].interventions"))?,
                observations: map(&w.observations, format!("worlds[{i}].observations"))?,
            })
        })
        .collect::<Result<_>>()?;
    let target = Target {
        world: doc.target.world,
        variable: find(&doc.target.variable, "target.variable".into())?,
        state: doc.target.state,
    };
    let q = CounterfactualQuery { worlds, target };
    q.validate(pscm)?;
    Ok(q)
}

pub fn load_query(path: &Path, pscm: &Pscm) -> Result<CounterfactualQuery> {
    let text = std::fs::read_to_string(path)?;
    with_path(path, parse_query(&text, pscm))
}

pub fn query_doc(pscm: &Pscm, q: &CounterfactualQuery) -> QueryDoc {
    let names = |m: &BTreeMap<VarId, usize>| m.iter().map(|(k, &v)| (pscm.variable(*k).name.clone(), v)).collect();
    QueryDoc {
        worlds: q
            .worlds
            .iter()
            .map(|w| WorldDoc { interventions: names(&w.interventions), observations: names(&w.observations) })
            .collect(),
        target: TargetDoc {
            world: q.target.world,
            variable: pscm.variable(q.target.variable).name.clone(),
            state: q.target.state,
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunDoc {
    pub pmfs: BTreeMap<String, Vec<f64>>,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub final_loglik: Option<f64>,
}

pub fn run_docs(pscm: &Pscm, runs: &[EmRunResult]) -> Vec<RunDoc> {
    runs.iter()
        .map(|r| RunDoc {
            pmfs: pscm.exogenous().map(|u| pscm.variable(u).name.clone()).zip(r.pmfs.iter().cloned()).collect(),
            trace: r.trace.clone(),
            iterations: r.iterations,
            termination: r.termination,
            final_loglik: r.final_loglik(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsDoc {
    pub query: QueryDoc,
    pub runs: usize,
    pub per_run_values: Vec<Option<f64>>,
    pub lower: f64,
    pub upper: f64,
    pub termination: Vec<Termination>,
    pub iterations: Vec<usize>,
    pub final_loglik: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compile_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em_ms: Option<f64>,
}

pub fn results_doc(pscm: &Pscm, report: &BoundsReport, timing: bool) -> ResultsDoc {
    let b = &report.bounds;
    ResultsDoc {
        query: query_doc(pscm, &b.query),
        runs: report.runs.len(),
        per_run_values: b.per_run_values.clone(),
        lower: b.lower,
        upper: b.upper,
        termination: report.runs.iter().map(|r| r.termination).collect(),
        iterations: report.runs.iter().map(|r| r.iterations).collect(),
        final_loglik: report.runs.iter().map(|r| r.final_loglik()).collect(),
        compile_ms: timing.then_some(report.compile_ms),
        em_ms: timing.then_some(report.em_ms),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn model_round_trip() {
        let f = fixtures::fig3_fscm();
        let text = serde_json::to_string(&model_doc(&f.pscm, Some(&f.exo_pmfs))).unwrap();
        let back = parse_model(&text).unwrap();
        assert_eq!(back.pscm.variables(), f.pscm.variables());
        assert_eq!(back.pscm.equations(), f.pscm.equations());
        assert_eq!(back.exo_pmfs.unwrap(), f.exo_pmfs);
    }

    #[test]
    fn bad_model_names_the_field() {
        let text = r#"{"variables":[{"name":"U","cardinality":2,"kind":"exogenous"}],
            "equations":[{"child":"V","inputs":["U"],"table":[0,1]}]}"#;
        let e = parse_model(text).unwrap_err().to_string();
        assert!(e.contains("equations[0].child"), "{e}");
        let e = parse_model(r#"{"variables":[{"name":"U","kind":"exogenous"}],"equations":[]}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("cardinality"), "{e}");
    }

    #[test]
    fn dataset_round_trip() {
        let m = fixtures::fig3_pscm();
        let cols = vec![m.find("V2").unwrap(), m.find("V1").unwrap()];
        let d = Dataset::from_rows(cols, vec![vec![1, 0], vec![1, 1], vec![1, 0]]);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &m, &d).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("V2,V1\n"));
        assert_eq!(read_dataset(buf.as_slice(), &m).unwrap(), d);
    }

    #[test]
    fn dataset_errors_name_the_row() {
        let m = fixtures::fig3_pscm();
        let e = read_dataset("V1,V2\n0,1\n1,7\n".as_bytes(), &m).unwrap_err().to_string();
        assert!(e.contains("row 2") && e.contains("V2"), "{e}");
        assert!(read_dataset("U1\n0\n".as_bytes(), &m).is_err());
    }

    #[test]
    fn query_round_trip() {
        let m = fixtures::fig3_pscm();
        let q = fixtures::fig3_counterfactual(&m);
        let text = serde_json::to_string(&query_doc(&m, &q)).unwrap();
        assert_eq!(parse_query(&text, &m).unwrap(), q);
    }
}
