//! Label-only views of recommendations and their reasons.

use serde::Serialize;

use kgreason_core::embed::RecommendationList;
use kgreason_core::paths::PathInstance;
use kgreason_core::reasons::{
    reasons_against, reasons_against_s2, reasons_for, render_reason_text, AgainstOptions,
};
use kgreason_core::{KnowledgeGraph, PathType, Reason, Result, Scheme};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReasonView {
    pub text: String,
    /// Entity labels of the first witness, anchor first.
    pub path: Vec<String>,
    pub path_type: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub favored: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExplainedRecommendation {
    pub item: String,
    pub score: f64,
    pub reason_for: Option<ReasonView>,
    /// `None` when the scheme found nothing or the list has no alternatives.
    pub reason_against: Option<ReasonView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reasons_for: Option<Vec<ReasonView>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reasons_against: Option<Vec<ReasonView>>,
}

fn path_labels(g: &KnowledgeGraph, p: &PathInstance) -> Vec<String> {
    p.entities
        .iter()
        .map(|&e| g.entity_label(e).to_owned())
        .collect()
}

pub fn reason_view(g: &KnowledgeGraph, r: &Reason) -> ReasonView {
    let witness = &r.witnesses[0];
    ReasonView {
        text: render_reason_text(g, r),
        path: path_labels(g, witness),
        path_type: witness.path_type.display(g).to_string(),
        scheme: r.scheme.map(|s| s.name().to_owned()),
        favored: r
            .favored
            .iter()
            .map(|&e| g.entity_label(e).to_owned())
            .collect(),
    }
}

/// Attaches reasons to every recommended item. The displayed reason for and
/// reason against are the first of their ordered sets; `verbose` also returns
/// the full sets.
pub fn explain_list(
    g: &KnowledgeGraph,
    path_types: &[PathType],
    list: &RecommendationList,
    scheme: Scheme,
    opts: AgainstOptions<'_>,
    verbose: bool,
) -> Result<Vec<ExplainedRecommendation>> {
    if scheme == Scheme::S2 {
        reasons_against_s2()?;
    }
    let mut out = Vec::with_capacity(list.items.len());
    for (&item, &score) in list.items.iter().zip(&list.scores) {
        let fors = reasons_for(g, path_types, item, list.user)?;
        let against = if list.items.len() < 2 {
            Vec::new()
        } else {
            reasons_against(g, path_types, scheme, item, list.user, &list.items, opts)?
        };
        let views = |rs: &[Reason]| rs.iter().map(|r| reason_view(g, r)).collect::<Vec<_>>();
        out.push(ExplainedRecommendation {
            item: g.entity_label(item).to_owned(),
            score,
            reason_for: fors.first().map(|r| reason_view(g, r)),
            reason_against: against.first().map(|r| reason_view(g, r)),
            reasons_for: verbose.then(|| views(&fors)),
            reasons_against: verbose.then(|| views(&against)),
        });
    }
    Ok(out)
}
