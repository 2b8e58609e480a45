//! Reasons for a recommended item, and reasons against it under the
//! practical-reasoning schemes S1, S3, S4 and S5.
//!
//! All set algebra between items is done on [`ReasonKey`]s, so a context that
//! supports two items is recognised as the same reason for both.
//!
//! Against-reasons for S1/S3/S4 are ordered by how many alternatives share the
//! key (descending), then by key. S3 trims that order, so S3 with an
//! unbounded trim returns exactly the S1 list.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{Direction, EntityId, KnowledgeGraph, RelationId};
use crate::paths::{find_paths, reason_key_of, PathInstance, PathType, ReasonKey, RelationStep};

/// Reasons shown by S3 when no bound is configured.
pub const DEFAULT_S3_BOUND: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarity {
    For,
    Against,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::S1 => "s1",
            Scheme::S2 => "s2",
            Scheme::S3 => "s3",
            Scheme::S4 => "s4",
            Scheme::S5 => "s5",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name().to_uppercase())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s1" => Ok(Scheme::S1),
            "s2" => Ok(Scheme::S2),
            "s3" => Ok(Scheme::S3),
            "s4" => Ok(Scheme::S4),
            "s5" => Ok(Scheme::S5),
            other => Err(Error::domain(format!(
                "unknown scheme {other:?} (expected s1, s3, s4 or s5)"
            ))),
        }
    }
}

/// How many S3 reasons to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrimBound {
    Unbounded,
    AtMost(usize),
}

impl TrimBound {
    pub fn at_most(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("S3 bound must be at least 1"));
        }
        Ok(TrimBound::AtMost(k))
    }
}

impl Default for TrimBound {
    fn default() -> Self {
        TrimBound::AtMost(DEFAULT_S3_BOUND)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveDirection {
    Maximize,
    Minimize,
}

impl ObjectiveDirection {
    /// Whether `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            ObjectiveDirection::Maximize => a > b,
            ObjectiveDirection::Minimize => a < b,
        }
    }
}

/// What an against-reason under S5 points at: the target's attribute value
/// compared with a strictly better alternative.
#[derive(Clone, Debug, PartialEq)]
pub struct Shortfall {
    pub attribute: RelationId,
    pub direction: ObjectiveDirection,
    pub own_value: EntityId,
    pub own_score: f64,
    pub alternative: EntityId,
    pub alternative_value: EntityId,
    pub alternative_score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reason {
    pub key: ReasonKey,
    /// Concrete paths carrying the key. For S1/S3/S4 these end at the
    /// favored alternatives; for S5 it is the target's attribute edge.
    pub witnesses: Vec<PathInstance>,
    pub polarity: Polarity,
    /// `None` for reasons for.
    pub scheme: Option<Scheme>,
    pub item: EntityId,
    pub user: EntityId,
    /// Alternatives this reason speaks for. Empty for reasons for.
    pub favored: Vec<EntityId>,
    pub shortfall: Option<Shortfall>,
}

/// A quantitative objective over one attribute relation: each attribute value
/// (tail entity) has a score and the direction says which end is better.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveSpec {
    pub attribute: RelationId,
    pub values: BTreeMap<EntityId, f64>,
    pub direction: ObjectiveDirection,
}

impl ObjectiveSpec {
    /// The single scored attribute value of `item`.
    pub fn value_of(&self, g: &KnowledgeGraph, item: EntityId) -> Result<(EntityId, f64)> {
        let scored: Vec<(EntityId, f64)> = g
            .neighbors(item, self.attribute, Direction::Forward)
            .iter()
            .filter_map(|v| self.values.get(v).map(|&s| (*v, s)))
            .collect();
        match scored.as_slice() {
            [one] => Ok(*one),
            [] => Err(Error::domain(format!(
                "item {:?} has no scored {} value",
                g.entity_label(item),
                g.relation_label(self.attribute)
            ))),
            _ => Err(Error::domain(format!(
                "item {:?} has {} scored {} values, expected one",
                g.entity_label(item),
                scored.len(),
                g.relation_label(self.attribute)
            ))),
        }
    }
}

/// Reads an objective table: a `direction: maximize|minimize` header, then
/// `relation<TAB>value<TAB>score` lines over a single relation.
pub fn load_objective<R: BufRead>(source: R, g: &KnowledgeGraph) -> Result<ObjectiveSpec> {
    let mut direction = None;
    let mut attribute: Option<RelationId> = None;
    let mut values = BTreeMap::new();
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.trim().strip_prefix("direction:") {
            direction = Some(match rest.trim() {
                "maximize" => ObjectiveDirection::Maximize,
                "minimize" => ObjectiveDirection::Minimize,
                other => {
                    return Err(Error::parse(
                        line_no,
                        format!("unknown direction {other:?}"),
                    ))
                }
            });
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                line_no,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let relation = g
            .require_relation(fields[0])
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        match attribute {
            None => attribute = Some(relation),
            Some(r) if r != relation => {
                return Err(Error::parse(
                    line_no,
                    "objective must use a single attribute relation",
                ))
            }
            Some(_) => {}
        }
        let value = g
            .require_entity(fields[1])
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        let score: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad score {:?}", fields[2])))?;
        if !score.is_finite() {
            return Err(Error::parse(line_no, "score must be finite"));
        }
        values.insert(value, score);
    }
    let direction = direction.ok_or_else(|| Error::parse(1, "missing `direction:` header"))?;
    let attribute = attribute.ok_or_else(|| Error::parse(1, "objective has no value lines"))?;
    Ok(ObjectiveSpec {
        attribute,
        values,
        direction,
    })
}

/// Key → witnesses for all permissible paths from `user` to `item`.
fn grouped_paths(
    g: &KnowledgeGraph,
    path_types: &[PathType],
    item: EntityId,
    user: EntityId,
) -> Result<BTreeMap<ReasonKey, Vec<PathInstance>>> {
    if path_types.is_empty() {
        return Err(Error::domain("the set of permissible path types is empty"));
    }
    let mut grouped: BTreeMap<ReasonKey, Vec<PathInstance>> = BTreeMap::new();
    for ty in path_types {
        for p in find_paths(g, user, item, ty)? {
            grouped.entry(reason_key_of(&p)).or_default().push(p);
        }
    }
    Ok(grouped)
}

/// Reasons for recommending `item` to `user`: one per distinct key, ordered by
/// witness count (descending) then key.
pub fn reasons_for(
    g: &KnowledgeGraph,
    path_types: &[PathType],
    item: EntityId,
    user: EntityId,
) -> Result<Vec<Reason>> {
    let mut out: Vec<Reason> = grouped_paths(g, path_types, item, user)?
        .into_iter()
        .map(|(key, witnesses)| Reason {
            key,
            witnesses,
            polarity: Polarity::For,
            scheme: None,
            item,
            user,
            favored: Vec::new(),
            shortfall: None,
        })
        .collect();
    out.sort_by(|a, b| {
        b.witnesses
            .len()
            .cmp(&a.witnesses.len())
            .then_with(|| a.key.cmp(&b.key))
    });
    Ok(out)
}

fn alternatives_of(
    g: &KnowledgeGraph,
    target: EntityId,
    items: &[EntityId],
) -> Result<Vec<EntityId>> {
    g.check_entity(target)?;
    if !items.contains(&target) {
        return Err(Error::domain(format!(
            "item {:?} is not in the recommendation list",
            g.entity_label(target)
        )));
    }
    let mut seen = BTreeSet::new();
    Ok(items
        .iter()
        .copied()
        .filter(|&i| i != target && seen.insert(i))
        .collect())
}

struct Pooled {
    witnesses: Vec<PathInstance>,
    favored: Vec<EntityId>,
}

/// Pools the alternatives' reasons-for by key.
fn pool_alternatives(
    g: &KnowledgeGraph,
    path_types: &[PathType],
    alternatives: &[EntityId],
    user: EntityId,
) -> Result<BTreeMap<ReasonKey, Pooled>> {
    let mut pooled: BTreeMap<ReasonKey, Pooled> = BTreeMap::new();
    for &alt in alternatives {
        for (key, witnesses) in grouped_paths(g, path_types, alt, user)? {
            let entry = pooled.entry(key).or_insert_with(|| Pooled {
                witnesses: Vec::new(),
                favored: Vec::new(),
            });
            entry.witnesses.extend(witnesses);
            entry.favored.push(alt);
        }
    }
    Ok(pooled)
}

/// Turns pooled keys into against-reasons in the frequency-then-key order.
fn against_list(
    pooled: impl IntoIterator<Item = (ReasonKey, Pooled)>,
    scheme: Scheme,
    target: EntityId,
    user: EntityId,
) -> Vec<Reason> {
    let mut out: Vec<Reason> = pooled
        .into_iter()
        .map(|(key, mut p)| {
            p.witnesses.sort();
            p.favored.sort();
            Reason {
                key,
                witnesses: p.witnesses,
                polarity: Polarity::Against,
                scheme: Some(scheme),
                item: target,
                user,
                favored: p.favored,
                shortfall: None,
            }
        })
        .collect();
    out.sort_by(against_order);
    out
}

/// Display order for S1/S3/S4 reasons against.
pub fn against_order(a: &Reason, b: &Reason) -> Ordering {
    b.favored
        .len()
        .cmp(&a.favored.len())
        .then_with(|| a.key.cmp(&b.key))
}

/// S1: the union of the alternatives' reasons-for, minus the target's own.
pub fn reasons_against_s1(
    g: &KnowledgeGraph,
    path_types: &[PathType],
    target: EntityId,
    user: EntityId,
    items: &[EntityId],
) -> Result<Vec<Reason>> {
    let alternatives = alternatives_of(g, target, items)?;
    let own = grouped_paths(g, path_types, target, user)?;
    let pooled = pool_alternatives(g, path_types, &alternatives, user)?;
    Ok(against_list(
        pooled.into_iter().filter(|(k, _)| !own.contains_key(k)),
        Scheme::S1,
        target,
        user,
    ))
}

/// S3: the S1 list trimmed to its first `bound` reasons.
pub fn reasons_against_s3(
    g: &KnowledgeGraph,
    path_types: &[PathType],
    target: EntityId,
    user: EntityId,
    items: &[EntityId],
    bound: TrimBound,
) -> Result<Vec<Reason>> {
    if bound == TrimBound::AtMost(0) {
        return Err(Error::domain("S3 bound must be at least 1"));
    }
    let mut out = reasons_against_s1(g, path_types, target, user, items)?;
    if let TrimBound::AtMost(k) = bound {
        out.truncate(k);
    }
    for r in &mut out {
        r.scheme = Some(Scheme::S3);
    }
    Ok(out)
}

/// S4: reasons-for shared by every alternative, minus the target's own.
/// Needs at least one alternative.
pub fn reasons_against_s4(
    g: &KnowledgeGraph,
    path_types: &[PathType],
    target: EntityId,
    user: EntityId,
    items: &[EntityId],
) -> Result<Vec<Reason>> {
    let alternatives = alternatives_of(g, target, items)?;
    if alternatives.is_empty() {
        return Err(Error::domain(
            "S4 needs at least two distinct items (one alternative to the target)",
        ));
    }
    let own = grouped_paths(g, path_types, target, user)?;
    let pooled = pool_alternatives(g, path_types, &alternatives, user)?;
    let everyone = alternatives.len();
    Ok(against_list(
        pooled
            .into_iter()
            .filter(|(k, p)| p.favored.len() == everyone && !own.contains_key(k)),
        Scheme::S4,
        target,
        user,
    ))
}

/// S5: one reason per alternative that strictly beats the target on the
/// objective, largest margin first.
pub fn reasons_against_s5(
    g: &KnowledgeGraph,
    objective: &ObjectiveSpec,
    target: EntityId,
    user: EntityId,
    items: &[EntityId],
) -> Result<Vec<Reason>> {
    let alternatives = alternatives_of(g, target, items)?;
    let (own_value, own_score) = objective.value_of(g, target)?;
    let step = RelationStep::forward(objective.attribute);
    let witness = PathInstance {
        path_type: PathType::new(vec![step])?,
        entities: vec![target, own_value],
    };
    let mut out = Vec::new();
    for alt in alternatives {
        let (alt_value, alt_score) = objective.value_of(g, alt)?;
        if !objective.direction.better(alt_score, own_score) {
            continue;
        }
        out.push(Reason {
            key: reason_key_of(&witness),
            witnesses: vec![witness.clone()],
            polarity: Polarity::Against,
            scheme: Some(Scheme::S5),
            item: target,
            user,
            favored: vec![alt],
            shortfall: Some(Shortfall {
                attribute: objective.attribute,
                direction: objective.direction,
                own_value,
                own_score,
                alternative: alt,
                alternative_value: alt_value,
                alternative_score: alt_score,
            }),
        });
    }
    let margin = |r: &Reason| {
        let s = r.shortfall.as_ref().expect("S5 reasons carry a shortfall");
        (s.alternative_score - s.own_score).abs()
    };
    out.sort_by(|a, b| {
        margin(b)
            .total_cmp(&margin(a))
            .then_with(|| a.favored.cmp(&b.favored))
    });
    Ok(out)
}

/// S2 ("a reason only against A") has no computational reading here.
pub fn reasons_against_s2() -> Result<Vec<Reason>> {
    Err(Error::UnsupportedScheme(Scheme::S2.to_string()))
}

/// Per-call options for [`reasons_against`].
#[derive(Clone, Copy, Debug, Default)]
pub struct AgainstOptions<'a> {
    pub bound: TrimBound,
    pub objective: Option<&'a ObjectiveSpec>,
}

/// Dispatches to the scheme-specific generator.
pub fn reasons_against(
    g: &KnowledgeGraph,
    path_types: &[PathType],
    scheme: Scheme,
    target: EntityId,
    user: EntityId,
    items: &[EntityId],
    opts: AgainstOptions<'_>,
) -> Result<Vec<Reason>> {
    match scheme {
        Scheme::S1 => reasons_against_s1(g, path_types, target, user, items),
        Scheme::S2 => reasons_against_s2(),
        Scheme::S3 => reasons_against_s3(g, path_types, target, user, items, opts.bound),
        Scheme::S4 => reasons_against_s4(g, path_types, target, user, items),
        Scheme::S5 => {
            let objective = opts
                .objective
                .ok_or_else(|| Error::domain("scheme S5 needs an objective"))?;
            reasons_against_s5(g, objective, target, user, items)
        }
    }
}

fn join_labels(g: &KnowledgeGraph, ids: &[EntityId]) -> String {
    ids.iter()
        .map(|&e| g.entity_label(e))
        .collect::<Vec<_>>()
        .join(" and ")
}

/// "you bought Laptop, which has Cutting Edge OS, which Red Phone also has",
/// with the final entity replaced by `last`.
fn hop_chain(g: &KnowledgeGraph, path: &PathInstance, last: &str) -> String {
    let steps = path.path_type.steps();
    let mut parts = Vec::with_capacity(steps.len());
    for (k, step) in steps.iter().enumerate() {
        let to = if k + 1 == steps.len() {
            last
        } else {
            g.entity_label(path.entities[k + 1])
        };
        let rel = g.relation_label(step.relation);
        parts.push(match (k, step.direction) {
            (0, Direction::Forward) => format!("you {rel} {to}"),
            (0, Direction::Inverse) => format!("{to} {rel} you"),
            (_, Direction::Forward) => format!("which {rel} {to}"),
            (_, Direction::Inverse) => format!("which {to} also {rel}"),
        });
    }
    parts.join(", ")
}

/// One-sentence rendering of a reason.
pub fn render_reason_text(g: &KnowledgeGraph, reason: &Reason) -> String {
    let item = g.entity_label(reason.item);
    if let Some(s) = &reason.shortfall {
        return format!(
            "{alt} serves the {attr} objective better than {item}: {item} has {attr} {own} ({own_score}) versus {alt_value} ({alt_score}).",
            alt = g.entity_label(s.alternative),
            attr = g.relation_label(s.attribute),
            own = g.entity_label(s.own_value),
            own_score = s.own_score,
            alt_value = g.entity_label(s.alternative_value),
            alt_score = s.alternative_score,
        );
    }
    let witness = &reason.witnesses[0];
    match reason.polarity {
        Polarity::For => format!("Recommended because {}.", hop_chain(g, witness, item)),
        Polarity::Against => {
            let favored = join_labels(g, &reason.favored);
            let verb = if reason.favored.len() == 1 {
                "is"
            } else {
                "are"
            };
            format!(
                "{favored} {verb} favored over {item} because {}.",
                hop_chain(g, witness, &favored)
            )
        }
    }
}
