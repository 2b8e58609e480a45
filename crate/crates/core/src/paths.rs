//! Path types and the search for concrete paths of a type between an anchor
//! (user or query entity) and an item.
//!
//! Paths are oriented anchor → item: `entities[0]` is the anchor and the last
//! entity is the item. Instances are simple: no entity appears twice.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::graph::{Direction, EntityId, KnowledgeGraph, RelationId, Triple};

/// Longest path type accepted from a configuration file unless overridden.
pub const DEFAULT_MAX_PATH_LEN: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationStep {
    pub relation: RelationId,
    pub direction: Direction,
}

impl RelationStep {
    pub fn forward(relation: RelationId) -> Self {
        RelationStep {
            relation,
            direction: Direction::Forward,
        }
    }

    pub fn inverse(relation: RelationId) -> Self {
        RelationStep {
            relation,
            direction: Direction::Inverse,
        }
    }

    /// The edge this step implies when walked from `from` to `to`.
    pub fn edge(self, from: EntityId, to: EntityId) -> Triple {
        match self.direction {
            Direction::Forward => Triple::new(from, self.relation, to),
            Direction::Inverse => Triple::new(to, self.relation, from),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathType {
    steps: Vec<RelationStep>,
}

impl PathType {
    pub fn new(steps: Vec<RelationStep>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::domain("a path type needs at least one step"));
        }
        Ok(PathType { steps })
    }

    pub fn steps(&self) -> &[RelationStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The type read from the other end: steps reversed, each direction flipped.
    pub fn reversed(&self) -> PathType {
        PathType {
            steps: self
                .steps
                .iter()
                .rev()
                .map(|s| RelationStep {
                    relation: s.relation,
                    direction: s.direction.flipped(),
                })
                .collect(),
        }
    }

    /// Parses `rel1,rel2^-,rel3` against the graph's relation vocabulary.
    pub fn parse(spec: &str, g: &KnowledgeGraph) -> Result<Self> {
        let mut steps = Vec::new();
        for raw in spec.split(',') {
            let token = raw.trim();
            let (label, direction) = match token.strip_suffix("^-") {
                Some(l) => (l.trim(), Direction::Inverse),
                None => (token, Direction::Forward),
            };
            if label.is_empty() {
                return Err(Error::domain(format!(
                    "empty relation in path type {spec:?}"
                )));
            }
            let relation = g.require_relation(label)?;
            steps.push(RelationStep {
                relation,
                direction,
            });
        }
        PathType::new(steps)
    }

    pub fn display<'a>(&'a self, g: &'a KnowledgeGraph) -> PathTypeDisplay<'a> {
        PathTypeDisplay { ty: self, g }
    }
}

pub struct PathTypeDisplay<'a> {
    ty: &'a PathType,
    g: &'a KnowledgeGraph,
}

impl fmt::Display for PathTypeDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.ty.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(self.g.relation_label(step.relation))?;
            if step.direction == Direction::Inverse {
                f.write_str("^-")?;
            }
        }
        Ok(())
    }
}

/// Reads a path-type file: one type per line, comma-separated relation
/// labels with `^-` marking inverse steps. `#` comments and blank lines are
/// skipped. Types longer than `max_len` are rejected.
pub fn load_path_types<R: BufRead>(
    source: R,
    g: &KnowledgeGraph,
    max_len: usize,
) -> Result<Vec<PathType>> {
    let mut types = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let ty = PathType::parse(line, g).map_err(|e| match e {
            Error::Domain(msg) => Error::parse(line_no, msg),
            other => other,
        })?;
        if ty.len() > max_len {
            return Err(Error::parse(
                line_no,
                format!("path type has {} steps, maximum is {max_len}", ty.len()),
            ));
        }
        if !types.contains(&ty) {
            types.push(ty);
        }
    }
    Ok(types)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathInstance {
    pub path_type: PathType,
    pub entities: Vec<EntityId>,
}

impl PathInstance {
    pub fn anchor(&self) -> EntityId {
        self.entities[0]
    }

    pub fn item(&self) -> EntityId {
        *self
            .entities
            .last()
            .expect("instance has at least two entities")
    }

    /// Edges visited by the instance, in walk order.
    pub fn edges(&self) -> impl Iterator<Item = Triple> + '_ {
        self.path_type
            .steps()
            .iter()
            .zip(self.entities.windows(2))
            .map(|(step, pair)| step.edge(pair[0], pair[1]))
    }

    pub fn reversed(&self) -> PathInstance {
        PathInstance {
            path_type: self.path_type.reversed(),
            entities: self.entities.iter().rev().copied().collect(),
        }
    }

    /// Checks the structural invariants: length, edge existence and the
    /// simple-path rule.
    pub fn is_valid_in(&self, g: &KnowledgeGraph) -> bool {
        if self.entities.len() != self.path_type.len() + 1 {
            return false;
        }
        let distinct: HashSet<_> = self.entities.iter().collect();
        distinct.len() == self.entities.len() && self.edges().all(|e| g.has_triple(e))
    }
}

/// Item-independent identity of a reason: the path type plus every entity on
/// the path except the item endpoint.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReasonKey {
    pub path_type: PathType,
    pub context: Vec<EntityId>,
}

pub fn reason_key_of(p: &PathInstance) -> ReasonKey {
    ReasonKey {
        path_type: p.path_type.clone(),
        context: p.entities[..p.entities.len() - 1].to_vec(),
    }
}

fn check_endpoints(g: &KnowledgeGraph, from: EntityId, to: EntityId) -> Result<()> {
    g.check_entity(from)?;
    g.check_entity(to)?;
    if from == to {
        return Err(Error::domain(format!(
            "path endpoints coincide ({})",
            g.entity_label(from)
        )));
    }
    Ok(())
}

fn check_type(g: &KnowledgeGraph, ty: &PathType) -> Result<()> {
    ty.steps()
        .iter()
        .try_for_each(|s| g.check_relation(s.relation))
}

/// Depth-first walk over simple paths of `steps` from `from` to `to`.
/// `visit` returns `true` to stop the search early.
fn walk<F>(
    g: &KnowledgeGraph,
    steps: &[RelationStep],
    to: EntityId,
    stack: &mut Vec<EntityId>,
    visit: &mut F,
) -> bool
where
    F: FnMut(&[EntityId]) -> bool,
{
    let depth = stack.len() - 1;
    let current = stack[depth];
    let step = steps[depth];
    let last = depth + 1 == steps.len();
    for &next in g.neighbors(current, step.relation, step.direction) {
        if last {
            if next == to {
                stack.push(next);
                let stop = visit(stack);
                stack.pop();
                if stop {
                    return true;
                }
            }
        } else if next != to && !stack.contains(&next) {
            stack.push(next);
            let stop = walk(g, steps, to, stack, visit);
            stack.pop();
            if stop {
                return true;
            }
        }
    }
    false
}

pub fn path_holds(g: &KnowledgeGraph, ty: &PathType, from: EntityId, to: EntityId) -> Result<bool> {
    check_endpoints(g, from, to)?;
    check_type(g, ty)?;
    let mut stack = vec![from];
    Ok(walk(g, ty.steps(), to, &mut stack, &mut |_| true))
}

/// All simple instances of `ty` from `anchor` to `item`, ordered by their
/// entity sequence.
pub fn find_paths(
    g: &KnowledgeGraph,
    anchor: EntityId,
    item: EntityId,
    ty: &PathType,
) -> Result<Vec<PathInstance>> {
    check_endpoints(g, anchor, item)?;
    check_type(g, ty)?;
    let mut out = Vec::new();
    let mut stack = vec![anchor];
    // Neighbor lists are sorted, so pre-order DFS emits sequences in
    // lexicographic order.
    walk(g, ty.steps(), item, &mut stack, &mut |entities| {
        out.push(PathInstance {
            path_type: ty.clone(),
            entities: entities.to_vec(),
        });
        false
    });
    Ok(out)
}

/// Brute-force counterpart of [`find_paths`]: materializes every entity
/// sequence of the right length, then keeps the ones whose hops are all
/// triples and whose entities are pairwise distinct. Exponential in the path
/// length; meant for cross-checking on small graphs.
pub fn enumerate_paths_oracle(
    g: &KnowledgeGraph,
    anchor: EntityId,
    item: EntityId,
    ty: &PathType,
) -> Result<Vec<PathInstance>> {
    check_endpoints(g, anchor, item)?;
    check_type(g, ty)?;
    let edges: HashSet<Triple> = g.triples().iter().copied().collect();
    let n = g.num_entities() as u32;
    let inner = ty.len() - 1;
    let mut odometer = vec![0u32; inner];
    let mut out = Vec::new();
    loop {
        let mut entities = Vec::with_capacity(ty.len() + 1);
        entities.push(anchor);
        entities.extend(odometer.iter().map(|&e| EntityId(e)));
        entities.push(item);
        let candidate = PathInstance {
            path_type: ty.clone(),
            entities,
        };
        let distinct: HashSet<_> = candidate.entities.iter().collect();
        if distinct.len() == candidate.entities.len()
            && candidate.edges().all(|e| edges.contains(&e))
        {
            out.push(candidate);
        }
        // advance the odometer, least significant digit last
        let mut pos = inner;
        loop {
            if pos == 0 {
                out.sort();
                return Ok(out);
            }
            pos -= 1;
            odometer[pos] += 1;
            if odometer[pos] < n {
                break;
            }
            odometer[pos] = 0;
        }
    }
}
