//! Coverage and support of explanations over simulated interactions.
//!
//! A recommendation slot is one (interaction, recommended item) pair.
//! Coverage is the fraction of slots with at least one reason of a given
//! type. Support is the population mean and standard deviation of the reason
//! count over explained slots only.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embed::{recommend_top_n, EmbeddingModel, RecommendationList};
use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, RelationId};
use crate::paths::PathType;
use crate::reasons::{
    reasons_against, reasons_for, AgainstOptions, ObjectiveSpec, Reason, Scheme, TrimBound,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExplanationType {
    ReasonFor,
    Against(Scheme),
}

impl ExplanationType {
    pub fn csv_name(self) -> String {
        match self {
            ExplanationType::ReasonFor => "reason_for".to_owned(),
            ExplanationType::Against(s) => format!("against_{}", s.name()),
        }
    }
}

impl fmt::Display for ExplanationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExplanationType::ReasonFor => f.write_str("Reason For"),
            ExplanationType::Against(s) => write!(f, "Reason Against ({s})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ItemReasons {
    pub item: EntityId,
    pub reasons_for: Vec<Reason>,
    pub against: BTreeMap<Scheme, Vec<Reason>>,
}

impl ItemReasons {
    pub fn count(&self, ty: ExplanationType) -> Option<usize> {
        match ty {
            ExplanationType::ReasonFor => Some(self.reasons_for.len()),
            ExplanationType::Against(s) => self.against.get(&s).map(Vec::len),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interaction {
    pub user: EntityId,
    pub recommendations: RecommendationList,
    /// Parallel to `recommendations.items`.
    pub per_item: Vec<ItemReasons>,
}

#[derive(Clone, Debug)]
pub struct HarnessConfig {
    pub cases: usize,
    pub n: usize,
    pub schemes: Vec<Scheme>,
    pub bound: TrimBound,
    pub seed: u64,
    pub relation: RelationId,
    pub candidates: Vec<EntityId>,
    /// Eligible query anchors; `cases` of them are sampled without
    /// replacement.
    pub anchors: Vec<EntityId>,
}

/// Samples `cases` anchors, asks for their top-N list and computes every
/// requested kind of reason for every recommended item.
pub fn simulate_interactions(
    m: &EmbeddingModel,
    g: &KnowledgeGraph,
    path_types: &[PathType],
    objective: Option<&ObjectiveSpec>,
    cfg: &HarnessConfig,
) -> Result<Vec<Interaction>> {
    if cfg.cases == 0 {
        return Err(Error::domain("cases must be positive"));
    }
    if cfg.anchors.len() < cfg.cases {
        return Err(Error::domain(format!(
            "{} cases requested but only {} eligible anchors",
            cfg.cases,
            cfg.anchors.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let picked = sample(&mut rng, cfg.anchors.len(), cfg.cases);
    let opts = AgainstOptions {
        bound: cfg.bound,
        objective,
    };
    let mut out = Vec::with_capacity(cfg.cases);
    for idx in picked {
        let user = cfg.anchors[idx];
        let candidates: Vec<EntityId> = cfg
            .candidates
            .iter()
            .copied()
            .filter(|&c| c != user)
            .collect();
        let recommendations = recommend_top_n(m, user, cfg.relation, &candidates, cfg.n)?;
        let mut per_item = Vec::with_capacity(recommendations.items.len());
        for &item in &recommendations.items {
            let mut against = BTreeMap::new();
            for &scheme in &cfg.schemes {
                let rs = reasons_against(
                    g,
                    path_types,
                    scheme,
                    item,
                    user,
                    &recommendations.items,
                    opts,
                )?;
                against.insert(scheme, rs);
            }
            per_item.push(ItemReasons {
                item,
                reasons_for: reasons_for(g, path_types, item, user)?,
                against,
            });
        }
        out.push(Interaction {
            user,
            recommendations,
            per_item,
        });
    }
    Ok(out)
}

/// Reason counts for every slot, in interaction order.
pub fn slot_counts(interactions: &[Interaction], ty: ExplanationType) -> Result<Vec<usize>> {
    if interactions.is_empty() {
        return Err(Error::domain("no interactions"));
    }
    let mut counts = Vec::new();
    for inter in interactions {
        for slot in &inter.per_item {
            counts.push(
                slot.count(ty)
                    .ok_or_else(|| Error::domain(format!("{ty} was not computed")))?,
            );
        }
    }
    Ok(counts)
}

pub fn coverage_of_counts(counts: &[usize]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::domain("no recommendation slots"));
    }
    Ok(counts.iter().filter(|&&c| c > 0).count() as f64 / counts.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Support {
    pub mean: f64,
    pub std: f64,
}

pub fn support_of_counts(counts: &[usize]) -> Result<Support> {
    let explained: Vec<f64> = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64)
        .collect();
    if explained.is_empty() {
        return Err(Error::domain(
            "support is undefined: no explained recommendations",
        ));
    }
    let n = explained.len() as f64;
    let mean = explained.iter().sum::<f64>() / n;
    let var = explained.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    Ok(Support {
        mean,
        std: var.sqrt(),
    })
}

pub fn coverage(interactions: &[Interaction], ty: ExplanationType) -> Result<f64> {
    coverage_of_counts(&slot_counts(interactions, ty)?)
}

pub fn support(interactions: &[Interaction], ty: ExplanationType) -> Result<Support> {
    support_of_counts(&slot_counts(interactions, ty)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub ty: ExplanationType,
    pub explained: usize,
    pub total: usize,
    pub coverage: f64,
    /// `None` when nothing was explained.
    pub support: Option<Support>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoverageReport {
    pub rows: Vec<ReportRow>,
    /// Rendered as comment lines: seed, configuration hashes and so on.
    pub manifest: Vec<(String, String)>,
}

const SUPPORT_NOTE: &str =
    "support = mean ± population std of reason counts over explained recommendations only";

/// One row for reasons-for, then one per scheme found in the interactions.
pub fn build_report(interactions: &[Interaction]) -> CoverageReport {
    let mut types = vec![ExplanationType::ReasonFor];
    if let Some(slot) = interactions.iter().flat_map(|i| &i.per_item).next() {
        types.extend(slot.against.keys().map(|&s| ExplanationType::Against(s)));
    }
    let rows = types
        .into_iter()
        .filter_map(|ty| {
            let counts = slot_counts(interactions, ty).ok()?;
            let explained = counts.iter().filter(|&&c| c > 0).count();
            Some(ReportRow {
                ty,
                explained,
                total: counts.len(),
                coverage: coverage_of_counts(&counts).ok()?,
                support: support_of_counts(&counts).ok(),
            })
        })
        .collect();
    CoverageReport {
        rows,
        manifest: Vec::new(),
    }
}

impl CoverageReport {
    pub fn row(&self, ty: ExplanationType) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.ty == ty)
    }

    fn write_manifest(&self, out: &mut String) {
        for (k, v) in &self.manifest {
            let _ = writeln!(out, "# {k}: {v}");
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_manifest(&mut out);
        let width = self
            .rows
            .iter()
            .map(|r| r.ty.to_string().len())
            .chain(["Explanation Type".len()])
            .max()
            .unwrap_or(0);
        let _ = writeln!(
            out,
            "{:<width$}  {:>8}  Support",
            "Explanation Type", "Coverage"
        );
        for r in &self.rows {
            let support = match r.support {
                Some(s) => format!("{:.1} ± {:.1}", s.mean, s.std),
                None => "-".to_owned(),
            };
            let _ = writeln!(
                out,
                "{:<width$}  {:>7.1}%  {support}",
                r.ty.to_string(),
                r.coverage * 100.0
            );
        }
        let _ = writeln!(out, "# {SUPPORT_NOTE}");
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        self.write_manifest(&mut out);
        out.push_str("type,coverage,support_mean,support_std,explained,total\n");
        for r in &self.rows {
            let (mean, std) = match r.support {
                Some(s) => (format!("{:.6}", s.mean), format!("{:.6}", s.std)),
                None => ("-".to_owned(), "-".to_owned()),
            };
            let _ = writeln!(
                out,
                "{},{:.6},{mean},{std},{},{}",
                r.ty.csv_name(),
                r.coverage,
                r.explained,
                r.total
            );
        }
        let _ = writeln!(out, "# {SUPPORT_NOTE}");
        out
    }
}
