//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use kgreason_cli::serve::router;
use kgreason_core::embed::Param;
use kgreason_core::embed::{
    evaluate_link_prediction, init_model, margin_loss, margin_loss_grad, train_on, EmbeddingModel,
    TrainConfig,
};
use kgreason_core::eval::{
    build_report, coverage, coverage_of_counts, simulate_interactions, support_of_counts,
    ExplanationType, HarnessConfig,
};
use kgreason_core::fixtures;
use kgreason_core::paths::{
    enumerate_paths_oracle, find_paths, load_path_types, reason_key_of, ReasonKey,
    DEFAULT_MAX_PATH_LEN,
};
use kgreason_core::reasons::{
    reasons_against_s1, reasons_against_s3, reasons_against_s4, reasons_for, render_reason_text,
    TrimBound,
};
use kgreason_core::synthetic::{
    preference_graph, random_instance, InstanceBounds, PreferenceSpec, RandomInstance,
    HARNESS_PATHS,
};
use kgreason_core::{EntityId, RelationId, Scheme, Triple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tower::ServiceExt;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn labels(g: &kgreason_core::KnowledgeGraph, ids: &[EntityId]) -> Vec<String> {
    ids.iter().map(|&e| g.entity_label(e).to_owned()).collect()
}

fn fig1_phones() -> Outcome {
    let g = fixtures::phones();
    let pi = vec![fixtures::phones_path_type(&g)];
    let id = |l: &str| g.entity_id(l).unwrap();
    let (user, red, green) = (id("User"), id("Red Phone"), id("Green Phone"));
    let fors = reasons_for(&g, &pi, red, user).map_err(|e| e.to_string())?;
    ensure(fors.len() == 1, || {
        format!("{} reasons for Red Phone", fors.len())
    })?;
    ensure(fors[0].witnesses.len() == 1, || {
        "expected one witness".into()
    })?;
    let w = labels(&g, &fors[0].witnesses[0].entities);
    ensure(
        w == ["User", "Laptop", "Cutting Edge OS", "Red Phone"],
        || format!("witness {w:?}"),
    )?;
    let against =
        reasons_against_s1(&g, &pi, red, user, &[red, green]).map_err(|e| e.to_string())?;
    ensure(against.len() == 1, || {
        format!("{} S1 reasons", against.len())
    })?;
    let w = labels(&g, &against[0].witnesses[0].entities);
    ensure(
        w == ["User", "Laptop", "Long Duration Battery", "Green Phone"],
        || format!("S1 witness {w:?}"),
    )?;
    Ok("1 reason for, 1 S1 reason (Long Duration Battery)".into())
}

fn example_courses() -> Outcome {
    let g = fixtures::course_topics();
    let pi = vec![fixtures::course_path_type(&g)];
    let id = |l: &str| g.entity_id(l).unwrap();
    let (user, a, b) = (id("Stochastic Resonance"), id("PME3430"), id("PME3479"));
    let items = [a, b];
    let n_for_a = reasons_for(&g, &pi, a, user)
        .map_err(|e| e.to_string())?
        .len();
    let n_for_b = reasons_for(&g, &pi, b, user)
        .map_err(|e| e.to_string())?
        .len();
    let against_b = reasons_against_s1(&g, &pi, b, user, &items).map_err(|e| e.to_string())?;
    let against_a = reasons_against_s1(&g, &pi, a, user, &items).map_err(|e| e.to_string())?;
    ensure(n_for_a == 2 && n_for_b == 1, || {
        format!("reasons for: {n_for_a}, {n_for_b}")
    })?;
    ensure(against_a.is_empty(), || {
        format!("{} S1 reasons against PME3430", against_a.len())
    })?;
    ensure(against_b.len() == 1, || {
        format!("{} S1 reasons against PME3479", against_b.len())
    })?;
    let ctx = labels(&g, &against_b[0].key.context);
    ensure(ctx.iter().any(|l| l == "Robotic Sensing"), || {
        format!("context {ctx:?}")
    })?;
    Ok("|for|=2,1; S1(PME3479)=1 (Robotic Sensing); S1(PME3430)=0".into())
}

/// Keys of all paths from the brute-force enumerator.
fn oracle_keys(inst: &RandomInstance, item: EntityId) -> Result<BTreeSet<ReasonKey>, String> {
    let mut keys = BTreeSet::new();
    for ty in &inst.path_types {
        for p in
            enumerate_paths_oracle(&inst.graph, inst.user, item, ty).map_err(|e| e.to_string())?
        {
            keys.insert(reason_key_of(&p));
        }
    }
    Ok(keys)
}

fn check_instance(seed: u64) -> Result<(), String> {
    let inst = random_instance(seed, &InstanceBounds::default());
    let g = &inst.graph;
    let pi = &inst.path_types;
    let err = |e: kgreason_core::Error| format!("seed {seed}: {e}");
    for ty in pi {
        for &item in &inst.items {
            let fast = find_paths(g, inst.user, item, ty).map_err(err)?;
            let slow = enumerate_paths_oracle(g, inst.user, item, ty).map_err(err)?;
            ensure(fast == slow, || {
                format!("seed {seed}: (f) find_paths differs from oracle")
            })?;
        }
    }
    let own: BTreeSet<ReasonKey> = reasons_for(g, pi, inst.target, inst.user)
        .map_err(err)?
        .into_iter()
        .map(|r| r.key)
        .collect();
    ensure(own == oracle_keys(&inst, inst.target)?, || {
        format!("seed {seed}: reasons for differ from oracle")
    })?;
    let alts: Vec<BTreeSet<ReasonKey>> = inst
        .items
        .iter()
        .filter(|&&i| i != inst.target)
        .map(|&i| oracle_keys(&inst, i))
        .collect::<Result<_, _>>()?;
    let s1 = reasons_against_s1(g, pi, inst.target, inst.user, &inst.items).map_err(err)?;
    let s4 = reasons_against_s4(g, pi, inst.target, inst.user, &inst.items).map_err(err)?;
    let s3 = reasons_against_s3(
        g,
        pi,
        inst.target,
        inst.user,
        &inst.items,
        TrimBound::Unbounded,
    )
    .map_err(err)?;
    let k1: BTreeSet<&ReasonKey> = s1.iter().map(|r| &r.key).collect();
    let k4: BTreeSet<&ReasonKey> = s4.iter().map(|r| &r.key).collect();
    ensure(k1.iter().all(|k| !own.contains(*k)), || {
        format!("seed {seed}: (a) S1 meets own reasons")
    })?;
    ensure(
        k1.iter().all(|k| alts.iter().any(|a| a.contains(*k))),
        || format!("seed {seed}: (b)"),
    )?;
    ensure(
        k4.iter().all(|k| alts.iter().all(|a| a.contains(*k))),
        || format!("seed {seed}: (c)"),
    )?;
    ensure(k4.is_subset(&k1), || format!("seed {seed}: (d)"))?;
    let same = s3.len() == s1.len()
        && s3
            .iter()
            .zip(&s1)
            .all(|(a, b)| a.key == b.key && a.witnesses == b.witnesses && a.favored == b.favored);
    ensure(same, || {
        format!("seed {seed}: (e) unbounded S3 differs from S1")
    })?;
    Ok(())
}

fn property_suite() -> Outcome {
    const INSTANCES: u64 = 1000;
    for seed in 0..INSTANCES {
        check_instance(seed)?;
    }
    Ok(format!("{INSTANCES} instances, properties (a)-(f) hold"))
}

fn micro_graph() -> kgreason_core::KnowledgeGraph {
    kgreason_core::KnowledgeGraph::from_labels([
        ("a", "r", "b"),
        ("b", "r", "c"),
        ("c", "s", "a"),
        ("d", "s", "b"),
    ])
    .unwrap()
}

fn gradient_check() -> Result<f64, String> {
    let g = micro_graph();
    let m = init_model(
        &g,
        &TrainConfig {
            dim: 6,
            seed: 3,
            ..TrainConfig::default()
        },
    );
    let pos = Triple::new(EntityId(0), RelationId(0), EntityId(1));
    let neg = Triple::new(EntityId(0), RelationId(0), EntityId(3));
    let margin = 10.0;
    let (_, grad) = margin_loss_grad(&m, pos, neg, margin);
    let params = [
        Param::Entity(EntityId(0)),
        Param::Entity(EntityId(1)),
        Param::Entity(EntityId(3)),
        Param::Relation(RelationId(0)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let p = params[rng.gen_range(0..params.len())];
        let c = rng.gen_range(0..6);
        let mut plus: EmbeddingModel = m.clone();
        plus.param_mut(p)[c] += eps;
        let mut minus = m.clone();
        minus.param_mut(p)[c] -= eps;
        let numeric = (margin_loss(&plus, pos, neg, margin)
            - margin_loss(&minus, pos, neg, margin))
            / (2.0 * eps);
        let exact = grad.get(p, c);
        worst = worst.max((numeric - exact).abs() / numeric.abs().max(exact.abs()).max(1e-8));
    }
    ensure(worst <= 1e-4, || {
        format!("gradient relative error {worst:.2e}")
    })?;
    Ok(worst)
}

fn embedding_checks() -> Outcome {
    let worst = gradient_check()?;

    let data = preference_graph(&PreferenceSpec::default()).map_err(|e| e.to_string())?;
    let (train, held) = data.split(0.1, 1).map_err(|e| e.to_string())?;
    let cfg = TrainConfig::default();
    let mut max_norm: f64 = 0.0;
    let mut epochs = 0;
    let (m, _) = train_on(&data.graph, &train, &cfg, |_, m, _| {
        max_norm = max_norm.max(m.max_entity_norm());
        epochs += 1;
    })
    .map_err(|e| e.to_string())?;
    ensure(epochs == cfg.epochs && max_norm <= 1.0 + 1e-6, || {
        format!("entity norm {max_norm} over {epochs} epochs")
    })?;

    let (again, _) =
        train_on(&data.graph, &train, &cfg, |_, _, _| {}).map_err(|e| e.to_string())?;
    let bits = |m: &EmbeddingModel| {
        let mut v = Vec::new();
        m.save(&mut v).unwrap();
        v
    };
    ensure(bits(&m) == bits(&again), || {
        "retraining with the same seed changed the model".into()
    })?;

    let metrics =
        evaluate_link_prediction(&m, &held, &data.graph, &[3]).map_err(|e| e.to_string())?;
    let hits3 = metrics.filtered.hits_at(3).unwrap();
    ensure(hits3 >= 0.5, || format!("filtered hits@3 = {hits3:.3}"))?;
    Ok(format!(
        "grad rel err {worst:.1e}; max norm {max_norm:.6}; reproducible; filtered hits@3 {hits3:.3} on {} held out",
        held.len()
    ))
}

fn metric_arithmetic() -> Outcome {
    let counts = [2, 0, 1, 3];
    let cov = coverage_of_counts(&counts).map_err(|e| e.to_string())?;
    let sup = support_of_counts(&counts).map_err(|e| e.to_string())?;
    // Population std of {2, 1, 3} is sqrt(2/3).
    let expected_std = (2.0f64 / 3.0).sqrt();
    ensure(cov == 0.75, || format!("coverage {cov}"))?;
    ensure(
        (sup.mean - 2.0).abs() < 1e-12 && (sup.std - expected_std).abs() < 1e-12,
        || format!("support {sup:?}"),
    )?;

    let data = preference_graph(&PreferenceSpec::harness()).map_err(|e| e.to_string())?;
    let pi = load_path_types(HARNESS_PATHS.as_bytes(), &data.graph, DEFAULT_MAX_PATH_LEN)
        .map_err(|e| e.to_string())?;
    let m = train_on(
        &data.graph,
        data.graph.triples(),
        &TrainConfig {
            epochs: 30,
            ..TrainConfig::default()
        },
        |_, _, _| {},
    )
    .map_err(|e| e.to_string())?
    .0;
    let mut runs = 0;
    let mut report_text = String::new();
    for seed in 0..10 {
        let cfg = HarnessConfig {
            cases: 100,
            n: 4,
            schemes: vec![Scheme::S1, Scheme::S3, Scheme::S4],
            bound: TrimBound::default(),
            seed,
            relation: data.prefers,
            candidates: data.items.clone(),
            anchors: data.users.clone(),
        };
        let interactions =
            simulate_interactions(&m, &data.graph, &pi, None, &cfg).map_err(|e| e.to_string())?;
        let c1 = coverage(&interactions, ExplanationType::Against(Scheme::S1))
            .map_err(|e| e.to_string())?;
        let c4 = coverage(&interactions, ExplanationType::Against(Scheme::S4))
            .map_err(|e| e.to_string())?;
        ensure(c4 <= c1, || {
            format!("seed {seed}: S4 coverage {c4} > S1 {c1}")
        })?;
        let report = build_report(&interactions);
        let s4 = report
            .row(ExplanationType::Against(Scheme::S4))
            .ok_or("no S4 row")?;
        ensure(
            s4.coverage == 0.0 && s4.support.is_none() && s4.total == 400,
            || format!("seed {seed}: S4 row {s4:?}"),
        )?;
        if seed == 0 {
            report_text = report.to_text();
        }
        runs += 1;
    }
    let s4_line = report_text
        .lines()
        .find(|l| l.starts_with("Reason Against (S4)"))
        .ok_or("no S4 line")?;
    ensure(
        s4_line.split_whitespace().collect::<Vec<_>>()[3..] == ["0.0%", "-"],
        || format!("S4 line {s4_line:?}"),
    )?;
    Ok(format!(
        "0.75 / 2.0 ± {expected_std:.3}; S4 ≤ S1 on {runs} runs; S4 row \"0.0%  -\""
    ))
}

async fn post(app: &axum::Router, body: &str) -> Vec<u8> {
    let req = Request::builder()
        .method("POST")
        .uri("/recommend")
        .header("content-type", "application/json")
        .body(Body::from(body.to_owned()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    resp.into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec()
}

fn cli_api_contract() -> Outcome {
    let courses = common::courses();
    let o = common::kgreason(&[
        "explain",
        "--graph",
        common::s(&courses.graph),
        "--paths",
        common::s(&courses.paths),
        "--scheme",
        "s2",
        "--item",
        "PME3479",
        "--items",
        "PME3430,PME3479",
        "--anchor",
        "Stochastic Resonance",
    ]);
    let err = common::stderr(&o);
    ensure(
        !o.status.success() && err.contains("unsupported-scheme"),
        || format!("s2 exit {:?}: {err}", o.status.code()),
    )?;

    let phones = common::phones();
    let state = common::phones_state(&phones);
    let app = router(state.clone());
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let body = r#"{"anchor":"User","n":2,"scheme":"s1","k":3}"#;
    let (a, b) = rt.block_on(async { (post(&app, body).await, post(&app, body).await) });
    ensure(a == b, || "repeated POST /recommend differed".into())?;

    let resp: Value = serde_json::from_slice(&a).map_err(|e| e.to_string())?;
    let g = &state.graph;
    let user = g.entity_id("User").unwrap();
    let items: Vec<EntityId> = resp["items"]
        .as_array()
        .ok_or("no items")?
        .iter()
        .map(|i| g.entity_id(i["item"].as_str().unwrap()).unwrap())
        .collect();
    let mut shown = 0;
    for (k, &item) in items.iter().enumerate() {
        let top = reasons_against_s3(
            g,
            &state.path_types,
            item,
            user,
            &items,
            TrimBound::at_most(1).unwrap(),
        )
        .map_err(|e| e.to_string())?;
        let displayed = &resp["items"][k]["reason_against"];
        match top.first() {
            Some(r) => {
                ensure(displayed["text"] == render_reason_text(g, r), || {
                    format!("item {k}: displayed {displayed}")
                })?;
                shown += 1;
            }
            None => ensure(displayed.is_null(), || {
                format!("item {k}: unexpected {displayed}")
            })?,
        }
    }
    ensure(shown == 2, || format!("{shown} against-reasons displayed"))?;
    Ok("s2 exits nonzero (unsupported-scheme); identical payloads; displayed = S3(K=1)".into())
}

fn main() {
    let criteria: [Criterion; 6] = [
        (
            "phones fixture reasons for and S1 against",
            Duration::from_secs(1),
            fig1_phones,
        ),
        (
            "course-topic fixture reason counts",
            Duration::from_secs(1),
            example_courses,
        ),
        (
            "random-instance property suite",
            Duration::from_secs(300),
            property_suite,
        ),
        (
            "embedding checks",
            Duration::from_secs(120),
            embedding_checks,
        ),
        (
            "metric arithmetic and coverage report",
            Duration::from_secs(120),
            metric_arithmetic,
        ),
        (
            "CLI and HTTP contract",
            Duration::from_secs(60),
            cli_api_contract,
        ),
    ];
    let mut failed = 0;
    for (k, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if took <= *limit {
                Ok(detail)
            } else {
                Err(format!("took {took:.2?}, limit {limit:?}"))
            }
        });
        match outcome {
            Ok(detail) => println!("PASS  [{}] {name} ({took:.2?}): {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  [{}] {name} ({took:.2?}): {why}", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
