//! Immutable in-memory knowledge graph.
//!
//! Entities and relations are interned into dense ids in first-appearance
//! order. Triples are kept as a duplicate-free list plus a membership set, and
//! two adjacency indexes answer one-step queries in either direction:
//!
//! - forward: `(head, relation) -> tails`
//! - inverse: `(tail, relation) -> heads`
//!
//! Both indexes hold sorted neighbor lists so traversal order is
//! deterministic. The graph is frozen once built; to change it, rebuild.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// Direction in which a relation is traversed. `Inverse` walks `r⁻`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Forward => Direction::Inverse,
            Direction::Inverse => Direction::Forward,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Interner {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    fn get(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    fn len(&self) -> usize {
        self.labels.len()
    }
}

/// Accumulates labelled triples and freezes them into a [`KnowledgeGraph`].
#[derive(Debug, Default)]
pub struct GraphBuilder {
    entities: Interner,
    relations: Interner,
    triples: Vec<Triple>,
    seen: HashSet<Triple>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a triple by label. Returns `false` when it was already present.
    pub fn add(&mut self, head: &str, relation: &str, tail: &str) -> Result<bool> {
        for (what, label) in [("head", head), ("relation", relation), ("tail", tail)] {
            if label.trim().is_empty() {
                return Err(Error::domain(format!("empty {what} label")));
            }
        }
        let h = EntityId(self.entities.intern(head));
        let r = RelationId(self.relations.intern(relation));
        let t = EntityId(self.entities.intern(tail));
        let triple = Triple::new(h, r, t);
        if self.seen.insert(triple) {
            self.triples.push(triple);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn build(self) -> KnowledgeGraph {
        let mut forward: HashMap<(EntityId, RelationId), Vec<EntityId>> = HashMap::new();
        let mut inverse: HashMap<(EntityId, RelationId), Vec<EntityId>> = HashMap::new();
        for t in &self.triples {
            forward
                .entry((t.head, t.relation))
                .or_default()
                .push(t.tail);
            inverse
                .entry((t.tail, t.relation))
                .or_default()
                .push(t.head);
        }
        for list in forward.values_mut().chain(inverse.values_mut()) {
            list.sort_unstable();
        }
        KnowledgeGraph {
            entities: self.entities,
            relations: self.relations,
            triples: self.triples,
            membership: self.seen,
            forward,
            inverse,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    entities: Interner,
    relations: Interner,
    triples: Vec<Triple>,
    membership: HashSet<Triple>,
    forward: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    inverse: HashMap<(EntityId, RelationId), Vec<EntityId>>,
}

/// Reads tab-separated triples. Blank lines and lines starting with `#` are
/// skipped; every other line must have exactly three non-empty fields.
pub fn load_triples<R: BufRead>(source: R) -> Result<KnowledgeGraph> {
    let mut builder = GraphBuilder::new();
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                line_no,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        if let Some(pos) = fields.iter().position(|f| f.trim().is_empty()) {
            return Err(Error::parse(line_no, format!("field {} is empty", pos + 1)));
        }
        builder.add(fields[0], fields[1], fields[2])?;
    }
    Ok(builder.build())
}

impl KnowledgeGraph {
    pub fn from_labels<'a, I>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    {
        let mut builder = GraphBuilder::new();
        for (h, r, t) in triples {
            builder.add(h, r, t)?;
        }
        Ok(builder.build())
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Triples in first-appearance order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> {
        (0..self.entities.len() as u32).map(EntityId)
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> {
        (0..self.relations.len() as u32).map(RelationId)
    }

    pub fn entity_id(&self, label: &str) -> Option<EntityId> {
        self.entities.get(label).map(EntityId)
    }

    pub fn relation_id(&self, label: &str) -> Option<RelationId> {
        self.relations.get(label).map(RelationId)
    }

    pub fn require_entity(&self, label: &str) -> Result<EntityId> {
        self.entity_id(label)
            .ok_or_else(|| Error::domain(format!("unknown entity {label:?}")))
    }

    pub fn require_relation(&self, label: &str) -> Result<RelationId> {
        self.relation_id(label)
            .ok_or_else(|| Error::domain(format!("unknown relation {label:?}")))
    }

    /// Panics on an id that was not issued by this graph.
    pub fn entity_label(&self, id: EntityId) -> &str {
        &self.entities.labels[id.index()]
    }

    /// Panics on an id that was not issued by this graph.
    pub fn relation_label(&self, id: RelationId) -> &str {
        &self.relations.labels[id.index()]
    }

    pub fn entity_labels(&self) -> &[String] {
        &self.entities.labels
    }

    pub fn relation_labels(&self) -> &[String] {
        &self.relations.labels
    }

    pub fn check_entity(&self, id: EntityId) -> Result<()> {
        if id.index() < self.entities.len() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "entity id {} is not registered",
                id.0
            )))
        }
    }

    pub fn check_relation(&self, id: RelationId) -> Result<()> {
        if id.index() < self.relations.len() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "relation id {} is not registered",
                id.0
            )))
        }
    }

    pub fn contains(&self, head: EntityId, relation: RelationId, tail: EntityId) -> Result<bool> {
        self.check_entity(head)?;
        self.check_relation(relation)?;
        self.check_entity(tail)?;
        Ok(self.has_triple(Triple::new(head, relation, tail)))
    }

    /// Unchecked membership; unknown ids simply answer `false`.
    pub fn has_triple(&self, triple: Triple) -> bool {
        self.membership.contains(&triple)
    }

    pub fn step_neighbors(
        &self,
        entity: EntityId,
        relation: RelationId,
        direction: Direction,
    ) -> Result<&[EntityId]> {
        self.check_entity(entity)?;
        self.check_relation(relation)?;
        Ok(self.neighbors(entity, relation, direction))
    }

    /// Sorted neighbor slice; empty for unknown ids.
    pub fn neighbors(
        &self,
        entity: EntityId,
        relation: RelationId,
        direction: Direction,
    ) -> &[EntityId] {
        let index = match direction {
            Direction::Forward => &self.forward,
            Direction::Inverse => &self.inverse,
        };
        index
            .get(&(entity, relation))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Total number of (key, neighbor) pairs held by one index.
    pub fn index_size(&self, direction: Direction) -> usize {
        let index = match direction {
            Direction::Forward => &self.forward,
            Direction::Inverse => &self.inverse,
        };
        index.values().map(Vec::len).sum()
    }

    pub fn summary(&self) -> GraphSummary {
        GraphSummary {
            entities: self.num_entities(),
            relations: self.num_relations(),
            triples: self.num_triples(),
        }
    }

    /// Writes the triple set back out in the TSV format accepted by
    /// [`load_triples`].
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for t in &self.triples {
            writeln!(
                out,
                "{}\t{}\t{}",
                self.entity_label(t.head),
                self.relation_label(t.relation),
                self.entity_label(t.tail)
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphSummary {
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
}

impl fmt::Display for GraphSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "entities\t{}", self.entities)?;
        writeln!(f, "relations\t{}", self.relations)?;
        write!(f, "triples\t{}", self.triples)
    }
}
