//! The four-method runtime benchmark: BN or circuit engine, each with and
//! without parallelism over c-components. All methods run the same EM
//! trajectories; only wall time differs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::em::{execute, prepare, EmConfig, Engine, Parallelism};
use crate::error::{Error, Result};
use crate::model::Pscm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Bnc,
    Bnp,
    Acc,
    Acp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Bnc, Method::Bnp, Method::Acc, Method::Acp];

    pub fn engine(self) -> Engine {
        match self {
            Method::Bnc | Method::Bnp => Engine::Ve,
            Method::Acc | Method::Acp => Engine::Circuit,
        }
    }

    pub fn parallelism(self) -> Parallelism {
        match self {
            Method::Bnc | Method::Acc => Parallelism::None,
            Method::Bnp | Method::Acp => Parallelism::Components,
        }
    }

    /// `base` with this method's engine and parallelism; always decomposed.
    pub fn config(self, base: &EmConfig) -> EmConfig {
        EmConfig { engine: self.engine(), parallelism: self.parallelism(), decompose: true, ..base.clone() }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Bnc => "BNC",
            Method::Bnp => "BNP",
            Method::Acc => "ACC",
            Method::Acp => "ACP",
        };
        f.write_str(s)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bnc" => Ok(Method::Bnc),
            "bnp" => Ok(Method::Bnp),
            "acc" => Ok(Method::Acc),
            "acp" => Ok(Method::Acp),
            _ => Err(Error::Format(format!("unknown method {s:?}"))),
        }
    }
}

/// One benchmark model with its data.
#[derive(Clone, Debug)]
pub struct BenchInstance {
    pub name: String,
    pub pscm: Pscm,
    pub dataset: Dataset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub model: String,
    pub method: Method,
    /// EM wall time; `None` when censored by the timeout.
    pub wall_ms: Option<f64>,
    pub ratio_vs_bnc: Option<f64>,
    pub timeout: bool,
    pub compile_ms: f64,
    /// Final log-likelihood of every run.
    pub final_logliks: Vec<Option<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub entries: Vec<BenchEntry>,
    /// Summed EM wall time per method over models that no method timed out on.
    pub total_ms: BTreeMap<Method, f64>,
    pub ratio_quartiles: BTreeMap<Method, Quartiles>,
    pub timeouts: BTreeMap<Method, usize>,
}

impl BenchReport {
    pub fn entry(&self, model: &str, method: Method) -> Option<&BenchEntry> {
        self.entries.iter().find(|e| e.model == model && e.method == method)
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Quartiles { q1: quantile(&v, 0.25), median: quantile(&v, 0.5), q3: quantile(&v, 0.75), count: v.len() })
}

/// Times EM for every instance and method, methods one after another per
/// model. Compilation is timed separately and excluded from `wall_ms`.
pub fn run_benchmark(
    instances: &[BenchInstance],
    methods: &[Method],
    base: &EmConfig,
    timeout: Option<Duration>,
) -> Result<BenchReport> {
    let mut entries = Vec::new();
    for inst in instances {
        let first = entries.len();
        for &method in methods {
            let cfg = method.config(base);
            let plan = prepare(&inst.pscm, &inst.dataset, &cfg)?;
            let start = Instant::now();
            let deadline = timeout.map(|t| start + t);
            let (wall_ms, final_logliks) = match execute(&plan, &inst.pscm, &cfg, deadline) {
                Ok(runs) => (
                    Some(start.elapsed().as_secs_f64() * 1e3),
                    runs.iter().map(|r| r.final_loglik()).collect(),
                ),
                Err(Error::Timeout) => (None, vec![]),
                Err(e) => return Err(e),
            };
            entries.push(BenchEntry {
                model: inst.name.clone(),
                method,
                wall_ms,
                ratio_vs_bnc: None,
                timeout: wall_ms.is_none(),
                compile_ms: plan.compile_ms(),
                final_logliks,
            });
        }
        let bnc = entries[first..].iter().find(|e| e.method == Method::Bnc).and_then(|e| e.wall_ms);
        for e in &mut entries[first..] {
            e.ratio_vs_bnc = match (e.method, e.wall_ms, bnc) {
                (Method::Bnc, Some(_), _) => Some(1.0),
                (_, Some(t), Some(b)) if b > 0.0 => Some(t / b),
                _ => None,
            };
        }
    }

    let mut total_ms = BTreeMap::new();
    let mut ratio_quartiles = BTreeMap::new();
    let mut timeouts = BTreeMap::new();
    let complete: Vec<&String> = instances
        .iter()
        .map(|i| &i.name)
        .filter(|name| entries.iter().filter(|e| &e.model == *name).all(|e| !e.timeout))
        .collect();
    for &method in methods {
        let mine: Vec<&BenchEntry> = entries.iter().filter(|e| e.method == method).collect();
        timeouts.insert(method, mine.iter().filter(|e| e.timeout).count());
        total_ms.insert(
            method,
            mine.iter().filter(|e| complete.contains(&&e.model)).filter_map(|e| e.wall_ms).fold(0.0, |a, b| a + b),
        );
        let ratios: Vec<f64> = mine.iter().filter_map(|e| e.ratio_vs_bnc).collect();
        if let Some(q) = quartiles(&ratios) {
            ratio_quartiles.insert(method, q);
        }
    }
    Ok(BenchReport { entries, total_ms, ratio_quartiles, timeouts })
}
