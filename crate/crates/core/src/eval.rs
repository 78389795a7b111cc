//! Precision@k experiments over retrieval variants, with preselection
//! density diagnostics.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec::write_atomic;
use crate::error::{Error, Result};
use crate::par;
use crate::retrieval::{Engine, QueryConfig, RankedResult, Variant};
use crate::textpipe::{DocId, Label, StoredDoc};

pub const DEFAULT_K: usize = 100;

/// Fraction of the first `min(k, |ranked|)` documents labelled
/// `query_label`; 0 for an empty list. Unknown ids count as non-relevant.
pub fn precision_at_k(ranked: &[DocId], query_label: Label, labels: &HashMap<DocId, Label>, k: usize) -> f64 {
    let n = k.min(ranked.len());
    if n == 0 {
        return 0.0;
    }
    let hits = ranked[..n]
        .iter()
        .filter(|id| labels.get(id) == Some(&query_label))
        .count();
    hits as f64 / n as f64
}

/// Precision@k for every `k` in `1..=k_max` in one pass.
pub fn precision_curve(ranked: &[DocId], query_label: Label, labels: &HashMap<DocId, Label>, k_max: usize) -> Vec<f64> {
    let mut hits = 0usize;
    (1..=k_max)
        .map(|k| {
            if k <= ranked.len() {
                if labels.get(&ranked[k - 1]) == Some(&query_label) {
                    hits += 1;
                }
                hits as f64 / k as f64
            } else if ranked.is_empty() {
                0.0
            } else {
                hits as f64 / ranked.len() as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Largest cutoff `K`; curves cover `1..=K`.
    pub k: usize,
    pub variants: Vec<Variant>,
    pub query: QueryConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            variants: Variant::ALL.to_vec(),
            query: QueryConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantCurve {
    pub variant: Variant,
    /// Mean precision@k over queries, index `k - 1`.
    pub precision: Vec<f64>,
    /// Same-label fraction over all preselected documents.
    pub density: f64,
}

impl VariantCurve {
    pub fn at(&self, k: usize) -> f64 {
        self.precision[k - 1]
    }
}

/// Raw per-query numbers; densities and counts in the report are
/// recomputable from these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryLog {
    pub query_id: DocId,
    pub label: Label,
    pub radius: usize,
    pub preselection_size: usize,
    pub same_label: usize,
    /// Recall of the top `K` per variant, against all same-label documents.
    pub recall: BTreeMap<Variant, f64>,
}

impl QueryLog {
    pub fn density(&self) -> f64 {
        if self.preselection_size == 0 {
            0.0
        } else {
            self.same_label as f64 / self.preselection_size as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub query_count: usize,
    pub empty_preselections: usize,
    pub mean_preselection_size: f64,
    pub curves: Vec<VariantCurve>,
    pub queries: Vec<QueryLog>,
    pub config: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn curve(&self, variant: Variant) -> Option<&VariantCurve> {
        self.curves.iter().find(|c| c.variant == variant)
    }

    /// Micro-averaged density: the per-query densities weighted by
    /// preselection size.
    pub fn density(&self) -> f64 {
        let (same, total) = self
            .queries
            .iter()
            .fold((0usize, 0usize), |(s, t), q| (s + q.same_label, t + q.preselection_size));
        if total == 0 {
            0.0
        } else {
            same as f64 / total as f64
        }
    }
}

struct QueryOutcome {
    log: QueryLog,
    curves: Vec<Vec<f64>>,
}

/// Runs every variant for every query and averages the precision curves.
/// Queries run in parallel; aggregation follows query order, so the result
/// does not depend on the thread count.
pub fn run_experiment(engine: &Engine, queries: &[StoredDoc], cfg: &EvalConfig) -> Result<EvalReport> {
    if cfg.k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if cfg.variants.is_empty() {
        return Err(Error::Empty("variant list"));
    }
    if queries.is_empty() {
        return Err(Error::Empty("query set"));
    }
    let labels: HashMap<DocId, Label> = engine.docs().iter().map(|d| (d.id, d.label)).collect();
    let mut class_sizes: HashMap<Label, usize> = HashMap::new();
    for d in engine.docs() {
        *class_sizes.entry(d.label).or_default() += 1;
    }
    let mut qcfg = cfg.query;
    qcfg.depth = qcfg.depth.max(cfg.k);

    let outcomes = par::map_slice(queries, 1, |q| -> Result<QueryOutcome> {
        let results = engine.search_variants(&q.vector, Some(q.id), &qcfg, &cfg.variants)?;
        Ok(outcome(q, &results, &labels, &class_sizes, cfg.k))
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let n = outcomes.len() as f64;
    let logs: Vec<QueryLog> = outcomes.iter().map(|o| o.log.clone()).collect();
    let (same, total) = logs
        .iter()
        .fold((0usize, 0usize), |(s, t), l| (s + l.same_label, t + l.preselection_size));
    let density = if total == 0 { 0.0 } else { same as f64 / total as f64 };
    let curves = cfg
        .variants
        .iter()
        .enumerate()
        .map(|(vi, &variant)| {
            let mut precision = vec![0.0; cfg.k];
            for o in &outcomes {
                for (acc, p) in precision.iter_mut().zip(&o.curves[vi]) {
                    *acc += p;
                }
            }
            precision.iter_mut().for_each(|p| *p /= n);
            VariantCurve {
                variant,
                precision,
                density,
            }
        })
        .collect();

    Ok(EvalReport {
        k: cfg.k,
        query_count: logs.len(),
        empty_preselections: logs.iter().filter(|l| l.preselection_size == 0).count(),
        mean_preselection_size: total as f64 / n,
        curves,
        queries: logs,
        config: config_snapshot(cfg),
    })
}

fn outcome(
    q: &StoredDoc,
    results: &[RankedResult],
    labels: &HashMap<DocId, Label>,
    class_sizes: &HashMap<Label, usize>,
    k: usize,
) -> QueryOutcome {
    let first = &results[0];
    let same_label = first
        .preselection
        .iter()
        .filter(|id| labels.get(id) == Some(&q.label))
        .count();
    let relevant_total = class_sizes.get(&q.label).copied().unwrap_or(0);
    let mut recall = BTreeMap::new();
    let mut curves = Vec::with_capacity(results.len());
    for r in results {
        let ids: Vec<DocId> = r.results.iter().take(k).map(|s| s.doc).collect();
        let hits = ids.iter().filter(|id| labels.get(id) == Some(&q.label)).count();
        let rc = if relevant_total == 0 { 0.0 } else { hits as f64 / relevant_total as f64 };
        recall.insert(r.variant, rc);
        curves.push(precision_curve(&ids, q.label, labels, k));
    }
    QueryOutcome {
        log: QueryLog {
            query_id: q.id,
            label: q.label,
            radius: first.radius,
            preselection_size: first.preselection_size(),
            same_label,
            recall,
        },
        curves,
    }
}

fn config_snapshot(cfg: &EvalConfig) -> BTreeMap<String, String> {
    let q = &cfg.query;
    let variants: Vec<&str> = cfg.variants.iter().map(|v| v.as_str()).collect();
    [
        ("eval.k", cfg.k.to_string()),
        ("eval.variants", variants.join(",")),
        ("hash.radius", q.preselect.radius.to_string()),
        ("hash.min_count", q.preselect.min_count.to_string()),
        ("hash.max_radius", q.preselect.max_radius.to_string()),
        ("hash.threshold", q.threshold.to_string()),
        ("query.alpha", q.gsa_alpha.to_string()),
        ("query.sigma", q.gsa_sigma.to_string()),
        ("query.prf_k", q.prf_k.to_string()),
        ("query.prf_scope", format!("{:?}", q.prf_scope).to_lowercase()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Long-format CSV: `variant,k,mean_precision`, one row per variant and k.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("variant,k,mean_precision\n");
    for c in &report.curves {
        for (i, p) in c.precision.iter().enumerate() {
            writeln!(out, "{},{},{}", c.variant, i + 1, p).expect("writing to a String");
        }
    }
    out
}

/// Writes `precision.csv` and `report.json` into `dir`; returns both paths.
pub fn export_report(report: &EvalReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("precision.csv");
    let json = dir.join("report.json");
    write_atomic(&csv, report_csv(report).as_bytes())?;
    let mut body = serde_json::to_string_pretty(report)?;
    body.push('\n');
    write_atomic(&json, body.as_bytes())?;
    Ok((csv, json))
}

/// Parses a CSV written by [`report_csv`] back into per-variant curves.
pub fn parse_csv(text: &str) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut lines = text.lines();
    if lines.next() != Some("variant,k,mean_precision") {
        return Err(Error::Format("missing CSV header".into()));
    }
    let mut curves: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for line in lines {
        let mut parts = line.split(',');
        let (Some(v), Some(k), Some(p), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Format(format!("malformed CSV row {line:?}")));
        };
        let k: usize = k.parse().map_err(|_| Error::Format(format!("bad k in {line:?}")))?;
        let p: f64 = p.parse().map_err(|_| Error::Format(format!("bad precision in {line:?}")))?;
        let curve = curves.entry(v.to_string()).or_default();
        if k != curve.len() + 1 {
            return Err(Error::Format(format!("k out of sequence in {line:?}")));
        }
        curve.push(p);
    }
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(pairs: &[(DocId, Label)]) -> HashMap<DocId, Label> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn precision_examples() {
        let l = labels(&[(1, 0), (2, 0), (3, 1), (4, 0), (5, 1), (6, 1)]);
        assert_eq!(precision_at_k(&[1, 2, 4], 0, &l, 5), 1.0);
        assert_eq!(precision_at_k(&[3, 5, 6], 0, &l, 10), 0.0);
        assert_eq!(precision_at_k(&[1, 3, 2, 5, 4], 0, &l, 5), 0.6);
        assert_eq!(precision_at_k(&[], 0, &l, 5), 0.0);
    }

    #[test]
    fn curve_matches_pointwise_precision() {
        let l = labels(&[(1, 0), (2, 1), (3, 0), (4, 0)]);
        let ranked = [2, 1, 3, 4];
        let curve = precision_curve(&ranked, 0, &l, 7);
        for k in 1..=7 {
            assert_eq!(curve[k - 1], precision_at_k(&ranked, 0, &l, k));
        }
        assert_eq!(precision_curve(&[], 0, &l, 3), vec![0.0; 3]);
    }

    fn report() -> EvalReport {
        EvalReport {
            k: 100,
            query_count: 1,
            empty_preselections: 0,
            mean_preselection_size: 3.0,
            curves: [Variant::Tfidf, Variant::Gsa]
                .into_iter()
                .map(|variant| VariantCurve {
                    variant,
                    precision: (1..=100).map(|k| 1.0 / (k as f64 + 0.1)).collect(),
                    density: 2.0 / 3.0,
                })
                .collect(),
            queries: vec![QueryLog {
                query_id: 9,
                label: 0,
                radius: 2,
                preselection_size: 3,
                same_label: 2,
                recall: BTreeMap::new(),
            }],
            config: BTreeMap::new(),
        }
    }

    #[test]
    fn export_is_stable_and_parses_back() {
        let r = report();
        let dir = tempfile::tempdir().unwrap();
        let (csv, json) = export_report(&r, dir.path()).unwrap();
        let first = (std::fs::read(&csv).unwrap(), std::fs::read(&json).unwrap());
        export_report(&r, dir.path()).unwrap();
        assert_eq!(first, (std::fs::read(&csv).unwrap(), std::fs::read(&json).unwrap()));

        let text = String::from_utf8(first.0).unwrap();
        assert_eq!(text.lines().count(), 1 + 200);
        let parsed = parse_csv(&text).unwrap();
        for c in &r.curves {
            let back = &parsed[c.variant.as_str()];
            assert!(back.iter().zip(&c.precision).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        let from_json: EvalReport = serde_json::from_slice(&first.1).unwrap();
        assert_eq!(from_json, r);
        assert!((r.density() - r.queries[0].density()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn precision_is_a_fraction(
            ranked in prop::collection::vec(0u64..30, 0..40),
            k in 1usize..50,
            label in 0u32..3,
        ) {
            let l: HashMap<DocId, Label> = (0..30).map(|i| (i, (i % 3) as u32)).collect();
            let p = precision_at_k(&ranked, label, &l, k);
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
