//! Translation embeddings (TransE) and the top-N recommender built on them.
//!
//! A triple ⟨h, r, t⟩ is scored by `-‖h + r - t‖₂`. Training minimises the
//! margin ranking loss `max(0, γ + d(pos) - d(neg))` with one corrupted
//! negative per positive, using plain SGD over mini-batches. Entity vectors
//! are projected onto the unit ball before every epoch and after the last one.
//!
//! Training is single-threaded and fully determined by the seed.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, RelationId, Triple};

const MODEL_MAGIC: &str = "kgreason-transe";
const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dim: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Resample corruptions that happen to be true triples.
    pub filtered_negatives: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 50,
            margin: 1.0,
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 1,
            seed: 42,
            filtered_negatives: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::domain("dim must be positive"));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::domain("margin must be a positive number"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::domain("learning_rate must be a positive number"));
        }
        if self.batch_size == 0 {
            return Err(Error::domain("batch_size must be positive"));
        }
        Ok(())
    }
}

/// Entity and relation vectors, stored row-major, tagged with the labels of
/// the graph they were trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    dim: usize,
    entity_labels: Vec<String>,
    relation_labels: Vec<String>,
    entities: Vec<f64>,
    relations: Vec<f64>,
}

impl EmbeddingModel {
    /// All-zero vectors for every entity and relation of `g`.
    pub fn zeros(g: &KnowledgeGraph, dim: usize) -> Self {
        EmbeddingModel {
            dim,
            entity_labels: g.entity_labels().to_vec(),
            relation_labels: g.relation_labels().to_vec(),
            entities: vec![0.0; g.num_entities() * dim],
            relations: vec![0.0; g.num_relations() * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_entities(&self) -> usize {
        self.entity_labels.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_labels.len()
    }

    pub fn entity(&self, id: EntityId) -> &[f64] {
        let i = id.index() * self.dim;
        &self.entities[i..i + self.dim]
    }

    pub fn relation(&self, id: RelationId) -> &[f64] {
        let i = id.index() * self.dim;
        &self.relations[i..i + self.dim]
    }

    pub fn entity_mut(&mut self, id: EntityId) -> &mut [f64] {
        let i = id.index() * self.dim;
        &mut self.entities[i..i + self.dim]
    }

    pub fn relation_mut(&mut self, id: RelationId) -> &mut [f64] {
        let i = id.index() * self.dim;
        &mut self.relations[i..i + self.dim]
    }

    pub fn param(&self, p: Param) -> &[f64] {
        match p {
            Param::Entity(e) => self.entity(e),
            Param::Relation(r) => self.relation(r),
        }
    }

    pub fn param_mut(&mut self, p: Param) -> &mut [f64] {
        match p {
            Param::Entity(e) => self.entity_mut(e),
            Param::Relation(r) => self.relation_mut(r),
        }
    }

    fn check_entity(&self, id: EntityId) -> Result<()> {
        if id.index() < self.num_entities() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "entity id {} has no embedding",
                id.0
            )))
        }
    }

    fn check_relation(&self, id: RelationId) -> Result<()> {
        if id.index() < self.num_relations() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "relation id {} has no embedding",
                id.0
            )))
        }
    }

    /// Errors unless the model's vocabulary is exactly that of `g`, id for id.
    pub fn check_matches(&self, g: &KnowledgeGraph) -> Result<()> {
        if self.entity_labels != g.entity_labels() || self.relation_labels != g.relation_labels() {
            return Err(Error::domain(
                "model vocabulary does not match the graph (was it trained on another file?)",
            ));
        }
        Ok(())
    }

    pub fn max_entity_norm(&self) -> f64 {
        self.entities
            .chunks(self.dim.max(1))
            .map(norm)
            .fold(0.0, f64::max)
    }

    fn project_entities(&mut self) {
        for row in self.entities.chunks_mut(self.dim) {
            let n = norm(row);
            if n > 1.0 {
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
    }

    /// Text serialization: a header line, then one tab-separated row per
    /// entity (`E`) and relation (`R`). Floats round-trip exactly.
    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "{MODEL_MAGIC}\t{MODEL_VERSION}\t{}\t{}\t{}",
            self.dim,
            self.num_entities(),
            self.num_relations()
        )?;
        let rows = self
            .entity_labels
            .iter()
            .zip(self.entities.chunks(self.dim))
            .map(|(l, v)| ("E", l, v))
            .chain(
                self.relation_labels
                    .iter()
                    .zip(self.relations.chunks(self.dim))
                    .map(|(l, v)| ("R", l, v)),
            );
        for (tag, label, vec) in rows {
            write!(out, "{tag}\t{label}")?;
            for x in vec {
                write!(out, "\t{x:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines().enumerate();
        let header = match lines.next() {
            Some((_, l)) => l?,
            None => return Err(Error::parse(1, "empty model file")),
        };
        let h: Vec<&str> = header.split('\t').collect();
        if h.len() != 5 || h[0] != MODEL_MAGIC {
            return Err(Error::parse(1, "not a kgreason model file"));
        }
        let version: u32 = h[1].parse().map_err(|_| Error::parse(1, "bad version"))?;
        if version != MODEL_VERSION {
            return Err(Error::parse(
                1,
                format!("unsupported model version {version}"),
            ));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(1, "bad header count"))
        };
        let (dim, n_ent, n_rel) = (num(h[2])?, num(h[3])?, num(h[4])?);
        if dim == 0 {
            return Err(Error::parse(1, "dim must be positive"));
        }
        let mut model = EmbeddingModel {
            dim,
            entity_labels: Vec::with_capacity(n_ent),
            relation_labels: Vec::with_capacity(n_rel),
            entities: Vec::with_capacity(n_ent * dim),
            relations: Vec::with_capacity(n_rel * dim),
        };
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != dim + 2 {
                return Err(Error::parse(
                    line_no,
                    format!("expected {} fields", dim + 2),
                ));
            }
            let (labels, data) = match fields[0] {
                "E" => (&mut model.entity_labels, &mut model.entities),
                "R" => (&mut model.relation_labels, &mut model.relations),
                other => return Err(Error::parse(line_no, format!("unknown row tag {other:?}"))),
            };
            labels.push(fields[1].to_owned());
            for f in &fields[2..] {
                data.push(
                    f.parse()
                        .map_err(|_| Error::parse(line_no, format!("bad number {f:?}")))?,
                );
            }
        }
        if model.entity_labels.len() != n_ent || model.relation_labels.len() != n_rel {
            return Err(Error::parse(1, "row counts do not match the header"));
        }
        Ok(model)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A trainable parameter block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Param {
    Entity(EntityId),
    Relation(RelationId),
}

/// Sparse gradient keyed by parameter block.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradient {
    pub blocks: BTreeMap<Param, Vec<f64>>,
}

impl Gradient {
    fn add(&mut self, p: Param, dim: usize, scale: f64, dir: &[f64]) {
        let block = self.blocks.entry(p).or_insert_with(|| vec![0.0; dim]);
        for (b, d) in block.iter_mut().zip(dir) {
            *b += scale * d;
        }
    }

    fn merge(&mut self, other: Gradient) {
        for (p, v) in other.blocks {
            let dim = v.len();
            self.add(p, dim, 1.0, &v);
        }
    }

    pub fn get(&self, p: Param, coord: usize) -> f64 {
        self.blocks.get(&p).map_or(0.0, |b| b[coord])
    }
}

/// `h + r - t` for a triple.
fn residual(m: &EmbeddingModel, t: Triple) -> Vec<f64> {
    m.entity(t.head)
        .iter()
        .zip(m.relation(t.relation))
        .zip(m.entity(t.tail))
        .map(|((h, r), t)| h + r - t)
        .collect()
}

/// `‖h + r - t‖₂`.
pub fn distance(m: &EmbeddingModel, t: Triple) -> f64 {
    norm(&residual(m, t))
}

pub fn score_triple(
    m: &EmbeddingModel,
    head: EntityId,
    relation: RelationId,
    tail: EntityId,
) -> Result<f64> {
    m.check_entity(head)?;
    m.check_relation(relation)?;
    m.check_entity(tail)?;
    Ok(-distance(m, Triple::new(head, relation, tail)))
}

pub fn margin_loss(m: &EmbeddingModel, pos: Triple, neg: Triple, margin: f64) -> f64 {
    (margin + distance(m, pos) - distance(m, neg)).max(0.0)
}

/// Loss and analytic gradient for one (positive, negative) pair. The gradient
/// is zero when the hinge is inactive.
pub fn margin_loss_grad(
    m: &EmbeddingModel,
    pos: Triple,
    neg: Triple,
    margin: f64,
) -> (f64, Gradient) {
    let rp = residual(m, pos);
    let rn = residual(m, neg);
    let dp = norm(&rp);
    let dn = norm(&rn);
    let loss = margin + dp - dn;
    let mut grad = Gradient::default();
    if loss <= 0.0 {
        return (0.0, grad);
    }
    let dim = m.dim();
    // d‖x‖/dx = x/‖x‖; undefined at 0, where we take 0.
    for (res, d, sign, t) in [(&rp, dp, 1.0, pos), (&rn, dn, -1.0, neg)] {
        if d == 0.0 {
            continue;
        }
        let s = sign / d;
        grad.add(Param::Entity(t.head), dim, s, res);
        grad.add(Param::Relation(t.relation), dim, s, res);
        grad.add(Param::Entity(t.tail), dim, -s, res);
    }
    (loss, grad)
}

/// Seeded initialization: every coordinate uniform in `[-6/√d, 6/√d]`,
/// relation vectors then scaled to unit length.
pub fn init_model(g: &KnowledgeGraph, cfg: &TrainConfig) -> EmbeddingModel {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut m = EmbeddingModel::zeros(g, cfg.dim);
    let bound = 6.0 / (cfg.dim as f64).sqrt();
    for x in m.entities.iter_mut().chain(m.relations.iter_mut()) {
        *x = rng.gen_range(-bound..=bound);
    }
    for row in m.relations.chunks_mut(cfg.dim) {
        let n = norm(row);
        if n > 0.0 {
            row.iter_mut().for_each(|x| *x /= n);
        }
    }
    m
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Mean hinge loss over the positives of each epoch.
    pub epoch_losses: Vec<f64>,
}

pub fn train_transe(g: &KnowledgeGraph, cfg: &TrainConfig) -> Result<EmbeddingModel> {
    train_on(g, g.triples(), cfg, |_, _, _| {}).map(|(m, _)| m)
}

/// Trains on `triples` (a subset of `g`'s triples, e.g. a training split)
/// using `g` for the vocabulary and for filtered negative sampling.
/// `on_epoch` sees the epoch index, the projected model and the epoch loss.
pub fn train_on<F>(
    g: &KnowledgeGraph,
    triples: &[Triple],
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<(EmbeddingModel, TrainReport)>
where
    F: FnMut(usize, &EmbeddingModel, f64),
{
    cfg.validate()?;
    if g.is_empty() || triples.is_empty() {
        return Err(Error::domain("cannot train on an empty graph"));
    }
    let mut model = init_model(g, cfg);
    let mut report = TrainReport::default();
    if cfg.epochs == 0 {
        return Ok((model, report));
    }
    // Separate stream from initialization so changing epochs keeps the init.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let n_entities = g.num_entities() as u32;
    let mut order: Vec<Triple> = triples.to_vec();
    model.project_entities();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = Gradient::default();
            for &pos in batch {
                let neg = corrupt(g, pos, n_entities, cfg.filtered_negatives, &mut rng);
                let (loss, gr) = margin_loss_grad(&model, pos, neg, cfg.margin);
                total += loss;
                grad.merge(gr);
            }
            for (p, block) in grad.blocks {
                for (x, gx) in model.param_mut(p).iter_mut().zip(&block) {
                    *x -= cfg.learning_rate * gx;
                }
            }
        }
        model.project_entities();
        let mean = total / order.len() as f64;
        report.epoch_losses.push(mean);
        on_epoch(epoch, &model, mean);
    }
    Ok((model, report))
}

/// Replaces head or tail (probability ½ each) with a uniformly drawn entity.
fn corrupt(
    g: &KnowledgeGraph,
    pos: Triple,
    n_entities: u32,
    filtered: bool,
    rng: &mut ChaCha8Rng,
) -> Triple {
    const MAX_TRIES: usize = 64;
    let mut candidate = pos;
    for _ in 0..MAX_TRIES {
        let e = EntityId(rng.gen_range(0..n_entities));
        candidate = if rng.gen_bool(0.5) {
            Triple::new(e, pos.relation, pos.tail)
        } else {
            Triple::new(pos.head, pos.relation, e)
        };
        if !filtered || !g.has_triple(candidate) {
            break;
        }
    }
    candidate
}

/// Ordered recommendations: `items[k]` scored `scores[k]`, non-increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct RecommendationList {
    pub user: EntityId,
    pub items: Vec<EntityId>,
    pub scores: Vec<f64>,
}

/// The `n` candidates scoring highest as tails of `⟨user, relation, ·⟩`;
/// ties go to the smaller entity id.
pub fn recommend_top_n(
    m: &EmbeddingModel,
    user: EntityId,
    relation: RelationId,
    candidates: &[EntityId],
    n: usize,
) -> Result<RecommendationList> {
    if candidates.is_empty() {
        return Err(Error::domain("candidate set is empty"));
    }
    if n == 0 {
        return Err(Error::domain("N must be positive"));
    }
    m.check_entity(user)?;
    m.check_relation(relation)?;
    let mut seen = HashSet::new();
    let mut scored = Vec::with_capacity(candidates.len());
    for &c in candidates {
        if seen.insert(c) {
            scored.push((c, score_triple(m, user, relation, c)?));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(n);
    let (items, scores) = scored.into_iter().unzip();
    Ok(RecommendationList {
        user,
        items,
        scores,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankMetrics {
    pub mean_rank: f64,
    /// `(k, fraction of queries ranked within the top k)`.
    pub hits: Vec<(usize, f64)>,
}

impl RankMetrics {
    pub fn hits_at(&self, k: usize) -> Option<f64> {
        self.hits.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkMetrics {
    pub raw: RankMetrics,
    /// Other true tails of the same (head, relation) removed from the ranking.
    pub filtered: RankMetrics,
}

/// Tail-prediction ranks of `held_out` among all entities. `g` supplies the
/// known-true triples for the filtered variant.
pub fn evaluate_link_prediction(
    m: &EmbeddingModel,
    held_out: &[Triple],
    g: &KnowledgeGraph,
    ks: &[usize],
) -> Result<LinkMetrics> {
    if held_out.is_empty() {
        return Err(Error::domain("no held-out triples"));
    }
    let mut raw_ranks = Vec::with_capacity(held_out.len());
    let mut filtered_ranks = Vec::with_capacity(held_out.len());
    for &t in held_out {
        let truth = score_triple(m, t.head, t.relation, t.tail)?;
        let mut raw = 1usize;
        let mut filtered = 1usize;
        for e in (0..m.num_entities() as u32).map(EntityId) {
            if e == t.tail {
                continue;
            }
            let s = -distance(m, Triple::new(t.head, t.relation, e));
            if s > truth {
                raw += 1;
                if !g.has_triple(Triple::new(t.head, t.relation, e)) {
                    filtered += 1;
                }
            }
        }
        raw_ranks.push(raw);
        filtered_ranks.push(filtered);
    }
    let summarize = |ranks: &[usize]| RankMetrics {
        mean_rank: ranks.iter().sum::<usize>() as f64 / ranks.len() as f64,
        hits: ks
            .iter()
            .map(|&k| {
                let hit = ranks.iter().filter(|&&r| r <= k).count();
                (k, hit as f64 / ranks.len() as f64)
            })
            .collect(),
    };
    Ok(LinkMetrics {
        raw: summarize(&raw_ranks),
        filtered: summarize(&filtered_ranks),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn tiny() -> KnowledgeGraph {
        KnowledgeGraph::from_labels([("a", "r", "b"), ("b", "r", "c"), ("c", "s", "a")]).unwrap()
    }

    #[test]
    fn zero_epochs_keep_initialization() {
        let g = tiny();
        let cfg = TrainConfig {
            epochs: 0,
            dim: 8,
            ..TrainConfig::default()
        };
        assert_eq!(train_transe(&g, &cfg).unwrap(), init_model(&g, &cfg));
    }

    #[test]
    fn empty_graph_rejected() {
        let g = KnowledgeGraph::from_labels([]).unwrap();
        assert!(matches!(
            train_transe(&g, &TrainConfig::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn init_within_bounds() {
        let g = tiny();
        let cfg = TrainConfig {
            dim: 16,
            ..TrainConfig::default()
        };
        let m = init_model(&g, &cfg);
        let bound = 6.0 / 4.0;
        for e in g.entity_ids() {
            assert!(m.entity(e).iter().all(|x| x.abs() <= bound));
        }
        for r in g.relation_ids() {
            assert!((norm(m.relation(r)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_translation_scores_zero() {
        let g = tiny();
        let mut m = EmbeddingModel::zeros(&g, 2);
        let (a, b, r) = (EntityId(0), EntityId(1), RelationId(0));
        m.entity_mut(a).copy_from_slice(&[0.5, -1.0]);
        m.relation_mut(r).copy_from_slice(&[0.25, 2.0]);
        m.entity_mut(b).copy_from_slice(&[0.75, 1.0]);
        assert_eq!(score_triple(&m, a, r, b).unwrap(), 0.0);
        // 3-4-5 triangle: a + r - c = (0.75, 1.0) - (-2.25, -3.0) = (3, 4)
        m.entity_mut(EntityId(2)).copy_from_slice(&[-2.25, -3.0]);
        let s = score_triple(&m, a, r, EntityId(2)).unwrap();
        assert!((s + 5.0).abs() < 1e-9);
        assert!(score_triple(&m, a, r, EntityId(9)).is_err());
    }

    #[test]
    fn top_n_ties_break_on_id() {
        let g = tiny();
        let m = EmbeddingModel::zeros(&g, 3);
        let all: Vec<EntityId> = g.entity_ids().collect();
        let list = recommend_top_n(
            &m,
            EntityId(0),
            RelationId(0),
            &[EntityId(2), EntityId(1), EntityId(0)],
            2,
        )
        .unwrap();
        assert_eq!(list.items, vec![EntityId(0), EntityId(1)]);
        let list = recommend_top_n(&m, EntityId(0), RelationId(0), &all, 10).unwrap();
        assert_eq!(list.items.len(), 3);
        assert!(recommend_top_n(&m, EntityId(0), RelationId(0), &[], 1).is_err());
    }

    #[test]
    fn model_text_round_trip() {
        let g = fixtures::phones();
        let cfg = TrainConfig {
            dim: 5,
            epochs: 3,
            ..TrainConfig::default()
        };
        let m = train_transe(&g, &cfg).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = EmbeddingModel::load(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        back.check_matches(&g).unwrap();
        assert!(back.check_matches(&tiny()).is_err());
    }

    #[test]
    fn model_load_rejects_garbage() {
        assert!(EmbeddingModel::load("hello\n".as_bytes()).is_err());
        assert!(EmbeddingModel::load("kgreason-transe\t2\t1\t0\t0\n".as_bytes()).is_err());
        assert!(
            EmbeddingModel::load("kgreason-transe\t1\t2\t1\t0\nE\ta\t0.1\n".as_bytes()).is_err()
        );
    }

    #[test]
    fn bad_config_rejected() {
        let g = tiny();
        for cfg in [
            TrainConfig {
                dim: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                margin: 0.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                learning_rate: -1.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                batch_size: 0,
                ..TrainConfig::default()
            },
        ] {
            assert!(train_transe(&g, &cfg).is_err());
        }
    }

    #[test]
    fn inactive_hinge_has_no_gradient() {
        let g = tiny();
        let mut m = EmbeddingModel::zeros(&g, 1);
        m.entity_mut(EntityId(2)).copy_from_slice(&[10.0]);
        let pos = Triple::new(EntityId(0), RelationId(0), EntityId(1));
        let neg = Triple::new(EntityId(0), RelationId(0), EntityId(2));
        let (loss, grad) = margin_loss_grad(&m, pos, neg, 1.0);
        assert_eq!(loss, 0.0);
        assert!(grad.blocks.is_empty());
    }
}
