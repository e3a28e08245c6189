use std::collections::HashSet;
use std::fmt::Write as _;

use serde::Serialize;

use super::{read, to_json, write, CommandError, Outcome, RunConfig, EXIT_FAILURE, EXIT_OK};
use crate::formats::{parse_coco_lenient, CocoIssue};
use crate::segmodel::{validate_page, Diagnostic, DiagnosticKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub pages: usize,
    pub diagnostics: Vec<Diagnostic>,
}

/// Page name used for problems that belong to the document as a whole.
const DOCUMENT: &str = "(document)";

pub(super) fn cmd_validate(config: &RunConfig) -> Result<Outcome, CommandError> {
    let ann = config.annotations.as_ref().expect("checked by RunConfig::check");
    let (doc, issues) = parse_coco_lenient(&read(ann)?).map_err(|e| CommandError::data(ann, e))?;
    let known: HashSet<u64> = doc.annotations.iter().map(|a| a.id).collect();
    let mut diagnostics: Vec<Diagnostic> = issues
        .iter()
        // a dangling relation with one known end lands on that end's page
        // and is reported there
        .filter(|i| match i {
            CocoIssue::DanglingRelation { source, target, .. } => {
                !known.contains(source) && !known.contains(target)
            }
            _ => true,
        })
        .map(|i| Diagnostic {
            page_id: DOCUMENT.to_owned(),
            kind: DiagnosticKind::Format {
                message: i.to_string(),
            },
        })
        .collect();
    let pages = doc.pages();
    for page in &pages {
        diagnostics.extend(validate_page(page));
    }

    let report = ValidationReport {
        schema_version: 1,
        pages: pages.len(),
        diagnostics,
    };
    if let Some(out) = &config.output {
        write(out, to_json(&report).as_bytes())?;
    }
    let mut text = String::new();
    for d in &report.diagnostics {
        let _ = writeln!(text, "{d}");
    }
    let _ = writeln!(text, "{} page(s), {} diagnostic(s)", report.pages, report.diagnostics.len());
    Ok(Outcome {
        stdout: text,
        exit_code: if report.diagnostics.is_empty() { EXIT_OK } else { EXIT_FAILURE },
    })
}
