//! Rule-generated user/item/feature graphs for training and harness runs.
//!
//! Item `j` carries feature `j mod features`. Each user likes a seeded random
//! subset of features and prefers exactly the items carrying a liked feature.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Direction, EntityId, GraphBuilder, KnowledgeGraph, RelationId, Triple};
use crate::paths::{PathType, RelationStep};

pub const FEATURE_RELATION: &str = "has_feature";
pub const LIKES_RELATION: &str = "likes";
pub const PREFERS_RELATION: &str = "prefers";

/// Permissible path type for the generated graphs: a liked feature that the
/// item carries.
pub const LIKED_FEATURE_PATH: &str = "likes,has_feature^-";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreferenceSpec {
    pub users: usize,
    pub items: usize,
    pub features: usize,
    pub likes_per_user: usize,
    pub seed: u64,
}

impl Default for PreferenceSpec {
    fn default() -> Self {
        PreferenceSpec {
            users: 50,
            items: 20,
            features: 5,
            likes_per_user: 1,
            seed: 7,
        }
    }
}

/// Path types for the harness pipeline: a liked feature the item carries,
/// and an already preferred item sharing a feature with it.
pub const HARNESS_PATHS: &str = "likes,has_feature^-\nprefers,has_feature,has_feature^-\n";

impl PreferenceSpec {
    /// Harness pipeline: two items per feature, so no three items share a
    /// feature and no S4 reason can exist for a top-4 list.
    pub fn harness() -> Self {
        PreferenceSpec {
            users: 120,
            items: 20,
            features: 10,
            likes_per_user: 2,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PreferenceData {
    pub graph: KnowledgeGraph,
    pub users: Vec<EntityId>,
    pub items: Vec<EntityId>,
    pub features: Vec<EntityId>,
    pub prefers: RelationId,
    pub preference_triples: Vec<Triple>,
}

pub fn user_label(i: usize) -> String {
    format!("user_{i:03}")
}

pub fn item_label(i: usize) -> String {
    format!("item_{i:03}")
}

pub fn feature_label(i: usize) -> String {
    format!("feature_{i:03}")
}

/// Labelled triples of the generated graph, in insertion order.
pub fn preference_triples(spec: &PreferenceSpec) -> Result<Vec<(String, String, String)>> {
    if spec.users == 0 || spec.items == 0 || spec.features == 0 {
        return Err(Error::domain("users, items and features must be positive"));
    }
    if spec.likes_per_user == 0 || spec.likes_per_user > spec.features {
        return Err(Error::domain("likes_per_user must be in 1..=features"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::new();
    for j in 0..spec.items {
        out.push((
            item_label(j),
            FEATURE_RELATION.to_owned(),
            feature_label(j % spec.features),
        ));
    }
    let mut liked_by_user = Vec::with_capacity(spec.users);
    for u in 0..spec.users {
        let mut liked = sample(&mut rng, spec.features, spec.likes_per_user).into_vec();
        liked.sort_unstable();
        for &f in &liked {
            out.push((user_label(u), LIKES_RELATION.to_owned(), feature_label(f)));
        }
        liked_by_user.push(liked);
    }
    for (u, liked) in liked_by_user.iter().enumerate() {
        for j in 0..spec.items {
            if liked.contains(&(j % spec.features)) {
                out.push((user_label(u), PREFERS_RELATION.to_owned(), item_label(j)));
            }
        }
    }
    Ok(out)
}

pub fn preference_graph(spec: &PreferenceSpec) -> Result<PreferenceData> {
    let mut b = GraphBuilder::new();
    for (h, r, t) in preference_triples(spec)? {
        b.add(&h, &r, &t)?;
    }
    let graph = b.build();
    let ids = |labels: Vec<String>| -> Vec<EntityId> {
        labels.iter().filter_map(|l| graph.entity_id(l)).collect()
    };
    let users = ids((0..spec.users).map(user_label).collect());
    let items = ids((0..spec.items).map(item_label).collect());
    let features = ids((0..spec.features).map(feature_label).collect());
    let prefers = graph.require_relation(PREFERS_RELATION)?;
    let preference_triples = graph
        .triples()
        .iter()
        .copied()
        .filter(|t| t.relation == prefers)
        .collect();
    Ok(PreferenceData {
        graph,
        users,
        items,
        features,
        prefers,
        preference_triples,
    })
}

impl PreferenceData {
    /// Holds out `fraction` of the preference edges (rounded up, seeded).
    /// Returns `(training triples, held-out triples)`; the training side keeps
    /// every non-preference triple.
    pub fn split(&self, fraction: f64, seed: u64) -> Result<(Vec<Triple>, Vec<Triple>)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::domain("held-out fraction must be in [0, 1)"));
        }
        let n = self.preference_triples.len();
        let k = (fraction * n as f64).ceil() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut held: Vec<Triple> = sample(&mut rng, n, k)
            .into_iter()
            .map(|i| self.preference_triples[i])
            .collect();
        held.sort();
        let train = self
            .graph
            .triples()
            .iter()
            .copied()
            .filter(|t| held.binary_search(t).is_err())
            .collect();
        Ok((train, held))
    }
}

/// Bounds for [`random_instance`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceBounds {
    pub max_entities: usize,
    pub max_relations: usize,
    pub max_triples: usize,
    pub max_path_types: usize,
    pub max_path_len: usize,
    pub min_items: usize,
    pub max_items: usize,
}

impl Default for InstanceBounds {
    fn default() -> Self {
        InstanceBounds {
            max_entities: 25,
            max_relations: 4,
            max_triples: 120,
            max_path_types: 5,
            max_path_len: 3,
            min_items: 2,
            max_items: 5,
        }
    }
}

/// A small random graph with path types, an anchor, a recommendation list
/// and a target item drawn from it.
#[derive(Clone, Debug)]
pub struct RandomInstance {
    pub graph: KnowledgeGraph,
    pub path_types: Vec<PathType>,
    pub user: EntityId,
    pub items: Vec<EntityId>,
    pub target: EntityId,
}

pub fn random_instance(seed: u64, bounds: &InstanceBounds) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n_ent =
            rng.gen_range(bounds.max_items + 1..=bounds.max_entities.max(bounds.max_items + 1));
        let n_rel = rng.gen_range(1..=bounds.max_relations);
        let n_triples = rng.gen_range(n_ent..=bounds.max_triples.max(n_ent));
        let mut b = GraphBuilder::new();
        for _ in 0..n_triples {
            let h = rng.gen_range(0..n_ent);
            let r = rng.gen_range(0..n_rel);
            let t = rng.gen_range(0..n_ent);
            b.add(&format!("e{h}"), &format!("r{r}"), &format!("e{t}"))
                .expect("generated labels are non-empty");
        }
        let graph = b.build();
        let n_items = rng.gen_range(bounds.min_items..=bounds.max_items);
        if graph.num_entities() < n_items + 1 {
            continue;
        }
        let picked = sample(&mut rng, graph.num_entities(), n_items + 1).into_vec();
        let user = EntityId(picked[0] as u32);
        let items: Vec<EntityId> = picked[1..].iter().map(|&i| EntityId(i as u32)).collect();
        let target = items[rng.gen_range(0..items.len())];
        let n_types = rng.gen_range(1..=bounds.max_path_types);
        let mut path_types = Vec::with_capacity(n_types);
        for _ in 0..n_types {
            let len = rng.gen_range(1..=bounds.max_path_len);
            let steps = (0..len)
                .map(|_| RelationStep {
                    relation: RelationId(rng.gen_range(0..graph.num_relations() as u32)),
                    direction: if rng.gen_bool(0.5) {
                        Direction::Forward
                    } else {
                        Direction::Inverse
                    },
                })
                .collect();
            let ty = PathType::new(steps).expect("len >= 1");
            if !path_types.contains(&ty) {
                path_types.push(ty);
            }
        }
        return RandomInstance {
            graph,
            path_types,
            user,
            items,
            target,
        };
    }
}
