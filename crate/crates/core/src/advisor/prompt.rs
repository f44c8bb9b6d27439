//! Prompt rendering and the line-oriented suggestion format.

use std::fmt::Write;

use super::{AdvisorContext, AdvisorError, AdvisorSuggestion, MAX_SUGGESTIONS};
use crate::data::{MetaFeature, StateVector};
use crate::operators::{OperatorId, Pipeline};

const FENCE: &str = "```";

/// Short textual description of a meta-feature vector.
pub fn describe_state(s: &StateVector) -> String {
    let pct = |f| 100.0 * s.get(f);
    format!(
        "about {:.0} rows, {} cols, {:.1}% missing cells, {:.1}% categorical cols, \
         mean |skewness| {:.2}, {:.1}% outlier cells, mean |correlation| {:.2}, {} classes",
        10f64.powf(s.get(MetaFeature::Log10Rows)),
        s.get(MetaFeature::NCols),
        pct(MetaFeature::FracMissing),
        pct(MetaFeature::FracCategorical),
        s.get(MetaFeature::MeanAbsSkewness),
        pct(MetaFeature::FracOutlierCells),
        s.get(MetaFeature::MeanAbsPairwiseCorrelation),
        s.get(MetaFeature::NClasses),
    )
}

fn list_or_none(items: &[String]) -> String {
    if items.is_empty() {
        "none".to_string()
    } else {
        items.join(", ")
    }
}

pub fn build_prompt(ctx: &AdvisorContext) -> String {
    let s = &ctx.summary;
    let mut p = String::new();
    p.push_str(
        "You are an expert data scientist working on automated data preparation for \
         tabular classification.\n\n",
    );
    let _ = writeln!(
        p,
        "Task: propose between 1 and {MAX_SUGGESTIONS} data preparation pipelines that should \
         maximise the accuracy of a downstream logistic regression classifier. Each pipeline is \
         an ordered list of at most {} operators. For every pipeline give the operator names in \
         order, a confidence between 0.0 and 1.0, and a short rationale.\n",
        ctx.max_pipeline_len
    );
    p.push_str("Current context:\n");
    p.push_str("- Task type: logistic regression classification\n");
    p.push_str("- Dataset statistics:\n");
    let _ = writeln!(
        p,
        "  - Size of dataset: {} rows, {} cols",
        s.n_rows, s.n_cols
    );
    let _ = writeln!(
        p,
        "  - Missing Values: {}",
        if s.has_missing { "Yes" } else { "No" }
    );
    let _ = writeln!(p, "  - Feature Types: {}", s.feature_types());
    let _ = writeln!(
        p,
        "  - Cols with skewed distribution: {}",
        list_or_none(&s.skewed_columns)
    );
    let outliers: Vec<String> = s
        .outlier_columns
        .iter()
        .map(|(name, pct)| format!("{name} ({pct:.2}%)"))
        .collect();
    let _ = writeln!(p, "  - Cols with outliers: {}", list_or_none(&outliers));
    let _ = writeln!(p, "- Current partial pipeline: {}", ctx.partial_pipeline);
    let _ = writeln!(
        p,
        "\nAvailable operators: {}",
        ctx.available_operators.join(", ")
    );

    if !ctx.retrieved.is_empty() {
        p.push_str("\n---\n");
        for (i, ex) in ctx.retrieved.iter().enumerate() {
            let _ = writeln!(p, "\n[Example {}]", i + 1);
            let _ = writeln!(p, "- Context: {}", ex.context);
            let _ = writeln!(
                p,
                "- Pipeline: {}, accuracy {:.4}",
                ex.pipeline, ex.accuracy
            );
        }
    }
    if !ctx.knowledge_rules.is_empty() {
        p.push_str("\nHints mined from earlier successful runs (advisory only):\n");
        for r in &ctx.knowledge_rules {
            let _ = writeln!(p, "- {r}");
        }
    }
    let _ = write!(
        p,
        "\nOutput format: reply with one fenced block (three backticks) containing one line per \
         pipeline, exactly in this form:\n\
         {FENCE}\n\
         PIPELINE: OperatorA, OperatorB | CONFIDENCE: 0.8 | RATIONALE: why this fits the data\n\
         {FENCE}\n\
         Use only operator names from the available list.\n"
    );
    p
}

/// Renders suggestions in the format [`parse_suggestions`] reads.
pub fn render_suggestions(suggestions: &[AdvisorSuggestion]) -> String {
    let mut out = String::from(FENCE);
    out.push('\n');
    for s in suggestions {
        let rationale: String = s
            .rationale
            .chars()
            .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        let _ = writeln!(
            out,
            "PIPELINE: {} | CONFIDENCE: {} | RATIONALE: {}",
            s.pipeline.names().join(", "),
            s.confidence,
            rationale
        );
    }
    out.push_str(FENCE);
    out.push('\n');
    out
}

fn fenced_blocks(text: &str) -> Vec<Vec<&str>> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        if line.trim_start().starts_with(FENCE) {
            match current.take() {
                Some(b) => blocks.push(b),
                None => current = Some(Vec::new()),
            }
        } else if let Some(b) = current.as_mut() {
            b.push(line);
        }
    }
    blocks
}

fn is_pipeline_line(line: &str) -> bool {
    line.trim_start()
        .trim_start_matches(['-', '*', ' '])
        .to_ascii_uppercase()
        .starts_with("PIPELINE:")
}

/// Value of a `KEY: value` field, key matched case-insensitively.
fn field<'a>(part: &'a str, key: &str) -> Option<&'a str> {
    let part = part.trim().trim_start_matches(['-', '*', ' ']);
    let (k, v) = part.split_once(':')?;
    k.trim().eq_ignore_ascii_case(key).then_some(v.trim())
}

fn parse_line(line: &str, max_len: usize) -> Option<AdvisorSuggestion> {
    let mut parts = line.splitn(3, '|');
    let names = field(parts.next()?, "PIPELINE")?;
    let confidence: f64 = field(parts.next()?, "CONFIDENCE")?.parse().ok()?;
    if confidence.is_nan() {
        return None;
    }
    let rationale = parts
        .next()
        .and_then(|p| field(p, "RATIONALE"))
        .unwrap_or("")
        .to_string();
    let names = names.trim_start_matches('[').trim_end_matches(']');
    let ops: Vec<OperatorId> = names
        .split(',')
        .filter(|n| !n.trim().is_empty())
        .map(OperatorId::from_name)
        .collect::<Result<_, _>>()
        .ok()?;
    if ops.is_empty() || ops.len() > max_len {
        return None;
    }
    Some(AdvisorSuggestion {
        pipeline: Pipeline::new(ops),
        confidence: confidence.clamp(0.0, 1.0),
        rationale,
    })
}

/// Extracts suggestions from a reply. Lines inside the first fenced block
/// that holds any are preferred; otherwise bare lines anywhere are used.
/// Invalid suggestions are dropped; at most three are kept, most confident
/// first.
pub fn parse_suggestions(
    text: &str,
    max_len: usize,
) -> Result<Vec<AdvisorSuggestion>, AdvisorError> {
    let lines: Vec<&str> = fenced_blocks(text)
        .into_iter()
        .map(|b| {
            b.into_iter()
                .filter(|l| is_pipeline_line(l))
                .collect::<Vec<_>>()
        })
        .find(|b| !b.is_empty())
        .unwrap_or_else(|| text.lines().filter(|l| is_pipeline_line(l)).collect());
    if lines.is_empty() {
        return Err(AdvisorError::UnparseableResponse);
    }
    let mut out: Vec<AdvisorSuggestion> = lines
        .iter()
        .filter_map(|l| parse_line(l, max_len))
        .collect();
    out.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    out.truncate(MAX_SUGGESTIONS);
    Ok(out)
}
