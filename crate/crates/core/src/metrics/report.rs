use std::fmt::Write as _;

use serde::Serialize;

use super::bootstrap::{aggregate, bootstrap_ci, BootstrapConfig, ConfidenceInterval};
use super::clustering::{MissingPolicy, PageScore};
use super::MetricError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageEntry {
    pub page_id: String,
    /// `None` for pages with fewer than two ground-truth foreground pixels.
    pub rand_index: Option<f64>,
    pub pixels: u64,
    /// Where the prediction came from: `label-map`, `prediction-file:<method>`
    /// or `missing`.
    pub prediction: String,
}

impl PageEntry {
    pub fn new(page_id: impl Into<String>, score: PageScore, prediction: impl Into<String>) -> Self {
        Self {
            page_id: page_id.into(),
            rand_index: score.rand_index.map(|r| r.value()),
            pixels: score.pixels,
            prediction: prediction.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub missing_policy: MissingPolicy,
    #[serde(flatten)]
    pub bootstrap: BootstrapConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub rand_index: f64,
    pub pages_scored: usize,
    pub pages_skipped: usize,
    pub confidence_interval: Option<ConfidenceInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub config: ReportConfig,
    pub pages: Vec<PageEntry>,
    /// `None` when no page could be scored.
    pub aggregate: Option<Aggregate>,
}

impl EvalReport {
    /// Sorts pages by id, aggregates the scored ones and bootstraps an
    /// interval when at least two pages were scored and `replicates > 0`.
    pub fn build(mut pages: Vec<PageEntry>, config: ReportConfig) -> Result<Self, MetricError> {
        pages.sort_by(|a, b| a.page_id.cmp(&b.page_id));
        let scored: Vec<(f64, u64)> = pages
            .iter()
            .filter_map(|p| p.rand_index.map(|r| (r, p.pixels)))
            .collect();
        let aggregate = if scored.is_empty() {
            None
        } else {
            let confidence_interval = if scored.len() >= 2 && config.bootstrap.replicates > 0 {
                Some(bootstrap_ci(&scored, &config.bootstrap)?)
            } else {
                None
            };
            Some(Aggregate {
                rand_index: aggregate(&scored, config.bootstrap.aggregation),
                pages_scored: scored.len(),
                pages_skipped: pages.len() - scored.len(),
                confidence_interval,
            })
        };
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            config,
            pages,
            aggregate,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is always serializable");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let width = self
            .pages
            .iter()
            .map(|p| p.page_id.len())
            .max()
            .unwrap_or(4)
            .max(4);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>10}  {:>10}  prediction", "page", "rand", "pixels");
        for p in &self.pages {
            let score = p
                .rand_index
                .map_or_else(|| "skipped".to_owned(), |r| format!("{r:.6}"));
            let _ = writeln!(
                out,
                "{:<width$}  {:>10}  {:>10}  {}",
                p.page_id, score, p.pixels, p.prediction
            );
        }
        match &self.aggregate {
            None => out.push_str("no scorable pages\n"),
            Some(a) => {
                let b = &self.config.bootstrap;
                let _ = write!(
                    out,
                    "\n{:?} rand index over {} pages: {:.6}",
                    b.aggregation, a.pages_scored, a.rand_index
                );
                if let Some(ci) = &a.confidence_interval {
                    let _ = write!(
                        out,
                        "  {:.0}% CI [{:.6}, {:.6}] ({} replicates, seed {})",
                        (1.0 - b.alpha) * 100.0,
                        ci.low,
                        ci.high,
                        b.replicates,
                        b.seed
                    );
                }
                out.push('\n');
            }
        }
        out
    }
}
