//! Deterministic rule-table advisor used offline and in tests.

use super::{Advisor, AdvisorContext, AdvisorError, AdvisorSuggestion, MAX_SUGGESTIONS};
use crate::data::MetaFeature;
use crate::operators::{OperatorId, Pipeline};

const IMPUTER_MEAN: i64 = 1;
const ONE_HOT: i64 = 5;

/// Share of an example's recorded accuracy used as its confidence.
const EXAMPLE_CONFIDENCE_SCALE: f64 = 0.75;

#[derive(Debug, Clone, Copy, Default)]
pub struct MockAdvisor;

fn pipeline(ids: &[i64]) -> Pipeline {
    Pipeline::from_ids(ids).expect("registry ids")
}

impl MockAdvisor {
    /// Pure function of the context.
    pub fn propose(ctx: &AdvisorContext) -> Vec<AdvisorSuggestion> {
        let s = &ctx.state_vector;
        let mut raw: Vec<(Pipeline, f64, String)> = Vec::new();
        if s.get(MetaFeature::MeanAbsSkewness) > 1.0 {
            raw.push((
                pipeline(&[10, 15]),
                0.8,
                "skewed features: rank-normalise then add interactions".into(),
            ));
        }
        if s.get(MetaFeature::FracOutlierCells) > 0.05 {
            raw.push((
                pipeline(&[8]),
                0.7,
                "many outlier cells: scale robustly".into(),
            ));
        }
        if s.get(MetaFeature::MeanAbsPairwiseCorrelation) > 0.8 {
            raw.push((
                pipeline(&[9, 17]),
                0.65,
                "strongly correlated features: standardise then project".into(),
            ));
        }
        if raw.is_empty() {
            raw.push((pipeline(&[9]), 0.6, "no dominant issue: standardise".into()));
        }
        for rule in &ctx.knowledge_rules {
            if rule.predicate.holds(s) && !rule.sequence.is_empty() {
                raw.push((
                    Pipeline::new(rule.sequence.clone()),
                    rule.confidence,
                    format!("mined rule: {rule}"),
                ));
            }
        }
        for ex in &ctx.retrieved {
            if !ex.pipeline.is_empty() {
                raw.push((
                    ex.pipeline.clone(),
                    EXAMPLE_CONFIDENCE_SCALE * ex.accuracy,
                    format!("worked on a similar dataset (accuracy {:.3})", ex.accuracy),
                ));
            }
        }

        let imputer = OperatorId::new(IMPUTER_MEAN).expect("registry id");
        let one_hot = OperatorId::new(ONE_HOT).expect("registry id");
        let mut out: Vec<AdvisorSuggestion> = Vec::new();
        for (p, confidence, rationale) in raw {
            let mut ops = p.ops().to_vec();
            if s.get(MetaFeature::FracMissing) > 0.0 && !ops.contains(&imputer) {
                ops.insert(0, imputer);
            }
            if s.get(MetaFeature::FracCategorical) > 0.0 && !ops.contains(&one_hot) {
                ops.insert(0, one_hot);
            }
            ops.truncate(ctx.max_pipeline_len.max(1));
            let p = Pipeline::new(ops);
            let confidence = confidence.clamp(0.0, 1.0);
            match out.iter_mut().find(|o| o.pipeline == p) {
                Some(existing) if existing.confidence < confidence => {
                    existing.confidence = confidence;
                    existing.rationale = rationale;
                }
                Some(_) => {}
                None => out.push(AdvisorSuggestion {
                    pipeline: p,
                    confidence,
                    rationale,
                }),
            }
        }
        out.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        out.truncate(MAX_SUGGESTIONS);
        out
    }
}

impl Advisor for MockAdvisor {
    fn suggest(&mut self, ctx: &AdvisorContext) -> Result<Vec<AdvisorSuggestion>, AdvisorError> {
        Ok(Self::propose(ctx))
    }
}
