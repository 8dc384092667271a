//! Benchmark harness: timed evaluation of query batches over model batches,
//! with optional cross-checking against the naive oracle.

use crate::error::Result;
use crate::eval::{eval_exists_auto, eval_full_foil, eval_naive, EvalConfig};
use crate::model::Model;
use crate::syntax::{expand_macros, parse_core, Binding};
use serde::Serialize;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Naive,
    Exists,
    Width,
    Auto,
}

impl Engine {
    pub fn parse(text: &str) -> Option<Engine> {
        Some(match text {
            "naive" => Engine::Naive,
            "exists" => Engine::Exists,
            "width" => Engine::Width,
            "auto" => Engine::Auto,
            _ => return None,
        })
    }
}

/// One (model, query) cell of the report.
#[derive(Debug, Clone, Serialize)]
pub struct BenchCell {
    pub model: String,
    pub query: String,
    pub engine: Engine,
    /// None when the engine does not apply to the pair.
    pub answer: Option<bool>,
    pub error: Option<String>,
    pub times_secs: Vec<f64>,
    pub mean_secs: f64,
    pub max_secs: f64,
    /// Oracle agreement when cross-checking was on and within caps.
    pub oracle_agrees: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub cells: Vec<BenchCell>,
    pub mean_secs: f64,
    pub max_secs: f64,
    pub stddev_secs: f64,
    pub failures: usize,
    pub oracle_mismatches: usize,
}

/// Evaluate one parsed query with the chosen engine.
pub fn run_engine(
    engine: Engine,
    model: &Model,
    query: &crate::syntax::Formula,
    binding: &Binding,
    cfg: &EvalConfig,
) -> Result<bool> {
    match engine {
        Engine::Naive => {
            let f = expand_macros(query);
            eval_naive(model, &f, binding, cfg)
        }
        Engine::Exists => eval_exists_auto_model(model, query, binding),
        Engine::Width => eval_full_foil(model, query, binding, cfg, None),
        Engine::Auto => {
            if let ok @ Ok(_) = eval_exists_auto_model(model, query, binding) {
                return ok;
            }
            if let ok @ Ok(_) = eval_full_foil(model, query, binding, cfg, None) {
                return ok;
            }
            let f = expand_macros(query);
            eval_naive(model, &f, binding, cfg)
        }
    }
}

fn eval_exists_auto_model(
    model: &Model,
    query: &crate::syntax::Formula,
    binding: &Binding,
) -> Result<bool> {
    eval_exists_auto(model, query, binding)
}

/// Run each query `reps` times over each model, timing every repetition.
/// With `oracle` set, answers are cross-checked against the naive engine
/// where its work cap allows.
pub fn bench(
    models: &[(String, Model)],
    queries: &[(String, String)],
    reps: usize,
    engine: Engine,
    oracle: bool,
    cfg: &EvalConfig,
) -> BenchReport {
    let mut cells = Vec::new();
    for (mname, model) in models {
        for (qname, qtext) in queries {
            let mut cell = BenchCell {
                model: mname.clone(),
                query: qname.clone(),
                engine,
                answer: None,
                error: None,
                times_secs: Vec::new(),
                mean_secs: 0.0,
                max_secs: 0.0,
                oracle_agrees: None,
            };
            match parse_core(qtext) {
                Err(e) => cell.error = Some(e.to_string()),
                Ok(query) => {
                    let binding = Binding::new();
                    for _ in 0..reps {
                        let start = Instant::now();
                        let result = run_engine(engine, model, &query, &binding, cfg);
                        let dt = start.elapsed().as_secs_f64();
                        match result {
                            Ok(answer) => {
                                cell.times_secs.push(dt);
                                cell.answer = Some(answer);
                            }
                            Err(e) => {
                                cell.error = Some(e.to_string());
                                break;
                            }
                        }
                    }
                    if oracle && cell.error.is_none() {
                        let f = expand_macros(&query);
                        if let Ok(expect) = eval_naive(model, &f, &binding, cfg) {
                            cell.oracle_agrees = Some(cell.answer == Some(expect));
                        }
                    }
                }
            }
            if !cell.times_secs.is_empty() {
                cell.mean_secs =
                    cell.times_secs.iter().sum::<f64>() / cell.times_secs.len() as f64;
                cell.max_secs = cell.times_secs.iter().copied().fold(0.0, f64::max);
            }
            cells.push(cell);
        }
    }
    let times: Vec<f64> = cells
        .iter()
        .filter(|c| c.error.is_none())
        .flat_map(|c| c.times_secs.iter().copied())
        .collect();
    let mean = if times.is_empty() { 0.0 } else { times.iter().sum::<f64>() / times.len() as f64 };
    let var = if times.is_empty() {
        0.0
    } else {
        times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / times.len() as f64
    };
    BenchReport {
        mean_secs: mean,
        max_secs: times.iter().copied().fold(0.0, f64::max),
        stddev_secs: var.sqrt(),
        failures: cells.iter().filter(|c| c.error.is_some()).count(),
        oracle_mismatches: cells.iter().filter(|c| c.oracle_agrees == Some(false)).count(),
        cells,
    }
}

impl BenchReport {
    /// Plain-text table, one row per cell.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:<18} {:>9} {:>9}  {}\n",
            "model", "query", "mean(s)", "max(s)", "answer"
        ));
        for c in &self.cells {
            let answer = match (&c.error, c.answer) {
                (Some(e), _) => format!("error: {e}"),
                (None, Some(true)) => "YES".into(),
                (None, Some(false)) => "NO".into(),
                _ => "-".into(),
            };
            let check = match c.oracle_agrees {
                Some(true) => " [oracle ok]",
                Some(false) => " [ORACLE MISMATCH]",
                None => "",
            };
            out.push_str(&format!(
                "{:<24} {:<18} {:>9.4} {:>9.4}  {}{}\n",
                c.model, c.query, c.mean_secs, c.max_secs, answer, check
            ));
        }
        out.push_str(&format!(
            "total: mean {:.4}s, max {:.4}s, stddev {:.4}s, {} failures, {} oracle mismatches\n",
            self.mean_secs, self.max_secs, self.stddev_secs, self.failures, self.oracle_mismatches
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{random_query, random_tree};

    #[test]
    fn single_cell_reports_all_reps() {
        let tree = random_tree(4, 4, 1).unwrap();
        let models = vec![("t".to_string(), Model::Diagram(tree))];
        let queries = vec![("q".to_string(), random_query(4, 2, 3, 1))];
        let report = bench(&models, &queries, 5, Engine::Exists, true, &EvalConfig::default());
        assert_eq!(report.cells.len(), 1);
        assert_eq!(report.cells[0].times_secs.len(), 5);
        assert!(report.cells[0].mean_secs >= 0.0);
        assert_eq!(report.oracle_mismatches, 0);
        assert!(report.table().contains("model"));
    }

    #[test]
    fn engine_mismatch_recorded_not_fatal() {
        let tree = random_tree(3, 3, 2).unwrap();
        let models = vec![("t".to_string(), Model::Diagram(tree))];
        // The width engine needs a complete ordered diagram.
        let queries = vec![("q".to_string(), "Exists x, P(x)".to_string())];
        let report = bench(&models, &queries, 2, Engine::Width, false, &EvalConfig::default());
        assert_eq!(report.failures, 1);
        assert!(report.cells[0].error.is_some());
    }
}
