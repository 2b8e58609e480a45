use kgreason_core::embed::{train_transe, EmbeddingModel, TrainConfig};
use kgreason_core::eval::{
    build_report, coverage, simulate_interactions, support, ExplanationType, HarnessConfig,
    Interaction,
};
use kgreason_core::paths::{load_path_types, PathType, DEFAULT_MAX_PATH_LEN};
use kgreason_core::reasons::{reasons_against_s1, reasons_for, TrimBound};
use kgreason_core::synthetic::{preference_graph, PreferenceData, PreferenceSpec, HARNESS_PATHS};
use kgreason_core::{Error, Scheme};

struct Pipeline {
    data: PreferenceData,
    paths: Vec<PathType>,
    model: EmbeddingModel,
}

fn pipeline(spec: &PreferenceSpec) -> Pipeline {
    let data = preference_graph(spec).unwrap();
    let paths =
        load_path_types(HARNESS_PATHS.as_bytes(), &data.graph, DEFAULT_MAX_PATH_LEN).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    let model = train_transe(&data.graph, &cfg).unwrap();
    Pipeline { data, paths, model }
}

fn config(p: &Pipeline, cases: usize, seed: u64) -> HarnessConfig {
    HarnessConfig {
        cases,
        n: 4,
        schemes: vec![Scheme::S1, Scheme::S3, Scheme::S4],
        bound: TrimBound::default(),
        seed,
        relation: p.data.prefers,
        candidates: p.data.items.clone(),
        anchors: p.data.users.clone(),
    }
}

fn run(p: &Pipeline, cases: usize, seed: u64) -> Vec<Interaction> {
    simulate_interactions(
        &p.model,
        &p.data.graph,
        &p.paths,
        None,
        &config(p, cases, seed),
    )
    .unwrap()
}

#[test]
fn synthetic_report_has_empty_s4_row() {
    let p = pipeline(&PreferenceSpec::harness());
    let interactions = run(&p, 100, 1);
    assert_eq!(
        interactions.iter().map(|i| i.per_item.len()).sum::<usize>(),
        400
    );

    let report = build_report(&interactions);
    let s4 = report.row(ExplanationType::Against(Scheme::S4)).unwrap();
    assert_eq!(s4.coverage, 0.0);
    assert_eq!(s4.support, None);
    let for_row = report.row(ExplanationType::ReasonFor).unwrap();
    let s1 = report.row(ExplanationType::Against(Scheme::S1)).unwrap();
    assert!(for_row.coverage > 0.0 && s1.coverage > 0.0);
    assert!(for_row.support.unwrap().mean >= 1.0);
    assert!(s1.support.unwrap().mean >= 1.0);

    let text = report.to_text();
    let s4_line = text
        .lines()
        .find(|l| l.starts_with("Reason Against (S4)"))
        .unwrap();
    assert!(
        s4_line.contains("0.0%") && s4_line.trim_end().ends_with('-'),
        "{s4_line}"
    );
    let csv = report.to_csv();
    assert!(
        csv.lines().any(|l| l == "against_s4,0.000000,-,-,0,400"),
        "{csv}"
    );
}

#[test]
fn s4_never_covers_more_than_s1() {
    let spec = PreferenceSpec {
        features: 5,
        ..PreferenceSpec::harness()
    };
    for p in [pipeline(&PreferenceSpec::harness()), pipeline(&spec)] {
        for seed in 0..5 {
            let interactions = run(&p, 40, seed);
            let s1 = coverage(&interactions, ExplanationType::Against(Scheme::S1)).unwrap();
            let s4 = coverage(&interactions, ExplanationType::Against(Scheme::S4)).unwrap();
            assert!(s4 <= s1, "seed {seed}: S4 {s4} > S1 {s1}");
        }
    }
}

#[test]
fn report_recounts_from_scratch() {
    let p = pipeline(&PreferenceSpec::harness());
    let interactions = run(&p, 50, 3);
    let report = build_report(&interactions);
    let g = &p.data.graph;

    // Recompute reason counts slot by slot without the harness.
    let mut for_counts = Vec::new();
    let mut s1_counts = Vec::new();
    for inter in &interactions {
        let items = &inter.recommendations.items;
        for &item in items {
            for_counts.push(reasons_for(g, &p.paths, item, inter.user).unwrap().len());
            s1_counts.push(
                reasons_against_s1(g, &p.paths, item, inter.user, items)
                    .unwrap()
                    .len(),
            );
        }
    }
    for (ty, counts) in [
        (ExplanationType::ReasonFor, &for_counts),
        (ExplanationType::Against(Scheme::S1), &s1_counts),
    ] {
        let row = report.row(ty).unwrap();
        let explained: Vec<f64> = counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| c as f64)
            .collect();
        assert_eq!(row.total, counts.len());
        assert_eq!(row.explained, explained.len());
        assert_eq!(row.coverage, explained.len() as f64 / counts.len() as f64);
        let mean = explained.iter().sum::<f64>() / explained.len() as f64;
        let var = explained
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / explained.len() as f64;
        let s = support(&interactions, ty).unwrap();
        assert!((s.mean - mean).abs() < 1e-12 && (s.std - var.sqrt()).abs() < 1e-12);
    }
    assert_eq!(build_report(&interactions), report);
}

#[test]
fn simulation_is_seeded() {
    let p = pipeline(&PreferenceSpec::harness());
    assert_eq!(run(&p, 20, 9), run(&p, 20, 9));
    let users = |xs: Vec<Interaction>| xs.into_iter().map(|i| i.user).collect::<Vec<_>>();
    assert_ne!(users(run(&p, 20, 9)), users(run(&p, 20, 10)));
}

#[test]
fn case_counts_are_validated() {
    let p = pipeline(&PreferenceSpec::harness());
    let zero = simulate_interactions(&p.model, &p.data.graph, &p.paths, None, &config(&p, 0, 1));
    assert!(matches!(zero, Err(Error::Domain(_))));
    let too_many =
        simulate_interactions(&p.model, &p.data.graph, &p.paths, None, &config(&p, 121, 1));
    assert!(matches!(too_many, Err(Error::Domain(_))));

    let tiny = PreferenceSpec {
        users: 1,
        items: 3,
        features: 3,
        likes_per_user: 1,
        seed: 2,
    };
    let q = pipeline(&tiny);
    let one = run(&q, 1, 0);
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].per_item.len(), 3);
}
