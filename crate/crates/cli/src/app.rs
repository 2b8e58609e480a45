//! Command-line definitions and their implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use kgreason_core::embed::{recommend_top_n, EmbeddingModel, RecommendationList};
use kgreason_core::eval::{build_report, simulate_interactions, HarnessConfig};
use kgreason_core::reasons::{
    reasons_against, reasons_for, render_reason_text, AgainstOptions, ObjectiveSpec, TrimBound,
    DEFAULT_S3_BOUND,
};
use kgreason_core::synthetic::{
    preference_triples, PreferenceSpec, HARNESS_PATHS, LIKED_FEATURE_PATH,
};
use kgreason_core::{EntityId, KnowledgeGraph, RelationId, Scheme};

use crate::choices::ChoiceLog;
use crate::error::{CliError, CliResult};
use crate::load;
use crate::serve::{self, RequestDefaults, ServiceState};

#[derive(Debug, Parser)]
#[command(
    name = "kgreason",
    version,
    about = "Reasons for and against knowledge-graph recommendations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a triple file and print its size, optionally writing it back normalized.
    Ingest(IngestArgs),
    /// Train a TransE model and write it to a file.
    Train(TrainArgs),
    /// Print the top-N items for an anchor, one per line.
    Recommend(RecommendArgs),
    /// Print reasons for and against one item of a recommendation list.
    Explain(ExplainArgs),
    /// Simulate interactions and write a coverage/support report.
    Eval(EvalArgs),
    /// Serve the HTTP API and the demo UI.
    Serve(ServeArgs),
    /// Write a rule-generated preference graph and its path types.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Write the deduplicated triples here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub model: PathBuf,
    /// TOML file with training hyperparameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
}

/// How the recommendation list is scored and which entities it may contain.
#[derive(Debug, Args, Clone)]
pub struct Selection {
    /// Relation scored as ⟨anchor, relation, item⟩.
    #[arg(long, default_value = "prefers")]
    pub rec_relation: String,
    /// Comma-separated candidate labels (default: tails of the relation).
    #[arg(long, conflicts_with = "candidates")]
    pub items: Option<String>,
    /// File of candidate labels, one per line.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub anchor: String,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[command(flatten)]
    pub selection: Selection,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub paths: PathBuf,
    /// Item to explain.
    #[arg(long)]
    pub item: String,
    #[arg(long)]
    pub anchor: String,
    #[arg(long, default_value = "s1")]
    pub scheme: String,
    /// Number of reasons kept by S3.
    #[arg(long, default_value_t = DEFAULT_S3_BOUND)]
    pub k: usize,
    #[arg(long)]
    pub objective: Option<PathBuf>,
    /// Recommend the list with this model instead of taking it from --items.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[command(flatten)]
    pub selection: Selection,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub paths: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub cases: usize,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Comma-separated schemes.
    #[arg(long, default_value = "s1,s3,s4")]
    pub scheme: String,
    #[arg(long, default_value_t = DEFAULT_S3_BOUND)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub objective: Option<PathBuf>,
    /// File of anchor labels to sample from (default: heads of the relation).
    #[arg(long)]
    pub anchors: Option<PathBuf>,
    #[command(flatten)]
    pub selection: Selection,
    /// Text report path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub paths: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub objective: Option<PathBuf>,
    #[arg(long, default_value = "s1")]
    pub scheme: String,
    #[arg(long, default_value_t = DEFAULT_S3_BOUND)]
    pub k: usize,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "choices.ndjson")]
    pub choice_log: PathBuf,
    /// Directory with the built demo UI, served at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    #[command(flatten)]
    pub selection: Selection,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Start from the harness preset (120 users, 10 features, 2 likes each).
    #[arg(long)]
    pub harness: bool,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub items: Option<usize>,
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub likes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a, out),
        Command::Train(a) => train(a, out),
        Command::Recommend(a) => recommend(a, out),
        Command::Explain(a) => explain(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Serve(a) => serve_cmd(a),
        Command::Synth(a) => synth(a, out),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::in_file(path, e)
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Core(e.into()))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(io_err(path))
}

fn ingest(a: IngestArgs, out: &mut dyn Write) -> CliResult<()> {
    let g = load::read_graph(&a.graph)?;
    if let Some(path) = &a.out {
        let mut buf = Vec::new();
        g.write_tsv(&mut buf)?;
        fs::write(path, buf).map_err(io_err(path))?;
    }
    emit(out, &format!("{}\n", g.summary()))
}

fn train(a: TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let g = load::read_graph(&a.graph)?;
    let mut cfg = match &a.config {
        Some(p) => load::read_train_config(p)?,
        None => Default::default(),
    };
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.dim = a.dim.unwrap_or(cfg.dim);
    let mut last_loss = None;
    let (model, _) =
        kgreason_core::embed::train_on(&g, g.triples(), &cfg, |_, _, loss| last_loss = Some(loss))?;
    let mut buf = Vec::new();
    model.save(&mut buf)?;
    fs::write(&a.model, buf).map_err(io_err(&a.model))?;
    let loss = last_loss.map_or_else(|| "-".to_owned(), |l| format!("{l:.6}"));
    emit(
        out,
        &format!(
            "entities\t{}\nrelations\t{}\ndim\t{}\nepochs\t{}\nseed\t{}\nfinal_loss\t{loss}\n",
            g.num_entities(),
            g.num_relations(),
            cfg.dim,
            cfg.epochs,
            cfg.seed
        ),
    )
}

fn relation_and_candidates(
    g: &KnowledgeGraph,
    sel: &Selection,
) -> CliResult<(RelationId, Vec<EntityId>)> {
    let relation = g.require_relation(&sel.rec_relation)?;
    let candidates = match (&sel.items, &sel.candidates) {
        (Some(list), _) => load::parse_label_csv(list, g)?,
        (None, Some(path)) => load::read_label_list(path, g)?,
        (None, None) => load::tails_of(g, relation),
    };
    Ok((relation, candidates))
}

fn top_n(
    g: &KnowledgeGraph,
    m: &EmbeddingModel,
    anchor: &str,
    n: usize,
    sel: &Selection,
) -> CliResult<RecommendationList> {
    let user = g.require_entity(anchor)?;
    let (relation, candidates) = relation_and_candidates(g, sel)?;
    let candidates: Vec<EntityId> = candidates.into_iter().filter(|&c| c != user).collect();
    Ok(recommend_top_n(m, user, relation, &candidates, n)?)
}

fn recommend(a: RecommendArgs, out: &mut dyn Write) -> CliResult<()> {
    let g = load::read_graph(&a.graph)?;
    let m = load::read_model(&a.model, &g)?;
    let list = top_n(&g, &m, &a.anchor, a.n, &a.selection)?;
    let mut text = String::new();
    for (rank, (&item, score)) in list.items.iter().zip(&list.scores).enumerate() {
        text.push_str(&format!(
            "{}\t{}\t{score:.6}\n",
            rank + 1,
            g.entity_label(item)
        ));
    }
    emit(out, &text)
}

fn load_objective(path: Option<&PathBuf>, g: &KnowledgeGraph) -> CliResult<Option<ObjectiveSpec>> {
    path.map(|p| load::read_objective(p, g)).transpose()
}

fn explain(a: ExplainArgs, out: &mut dyn Write) -> CliResult<()> {
    let scheme: Scheme = a.scheme.parse()?;
    let g = load::read_graph(&a.graph)?;
    let path_types = load::read_paths(&a.paths, &g)?;
    let objective = load_objective(a.objective.as_ref(), &g)?;
    let user = g.require_entity(&a.anchor)?;
    let item = g.require_entity(&a.item)?;
    let items = match (&a.model, &a.selection.items) {
        (Some(model), _) => {
            let m = load::read_model(model, &g)?;
            top_n(&g, &m, &a.anchor, a.n, &a.selection)?.items
        }
        (None, Some(list)) => load::parse_label_csv(list, &g)?,
        (None, None) => {
            return Err(CliError::Usage(
                "explain needs the recommendation list: pass --items or --model".to_owned(),
            ))
        }
    };
    if !items.contains(&item) {
        return Err(CliError::Core(kgreason_core::Error::Domain(format!(
            "{} is not in the recommendation list",
            a.item
        ))));
    }
    let opts = AgainstOptions {
        bound: TrimBound::at_most(a.k)?,
        objective: objective.as_ref(),
    };
    let against = reasons_against(&g, &path_types, scheme, item, user, &items, opts)?;
    let fors = reasons_for(&g, &path_types, item, user)?;
    let mut text = String::new();
    for r in &fors {
        text.push_str(&format!("for\t{}\n", render_reason_text(&g, r)));
    }
    for r in &against {
        text.push_str(&format!(
            "against\t{scheme}\t{}\n",
            render_reason_text(&g, r)
        ));
    }
    text.push_str(&format!(
        "# {}: {} for, {} against ({scheme})\n",
        a.item,
        fors.len(),
        against.len()
    ));
    emit(out, &text)
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let schemes = a
        .scheme
        .split(',')
        .map(|s| s.trim().parse::<Scheme>())
        .collect::<Result<Vec<_>, _>>()?;
    let g = load::read_graph(&a.graph)?;
    let path_types = load::read_paths(&a.paths, &g)?;
    let m = load::read_model(&a.model, &g)?;
    let objective = load_objective(a.objective.as_ref(), &g)?;
    let (relation, candidates) = relation_and_candidates(&g, &a.selection)?;
    let (anchors, anchor_source) = match &a.anchors {
        Some(p) => (load::read_label_list(p, &g)?, p.display().to_string()),
        None => (
            load::heads_of(&g, relation),
            format!("heads of {}", a.selection.rec_relation),
        ),
    };
    let cfg = HarnessConfig {
        cases: a.cases,
        n: a.n,
        schemes: schemes.clone(),
        bound: TrimBound::at_most(a.k)?,
        seed: a.seed,
        relation,
        candidates,
        anchors,
    };
    let interactions = simulate_interactions(&m, &g, &path_types, objective.as_ref(), &cfg)?;
    let mut report = build_report(&interactions);
    let scheme_names: Vec<&str> = schemes.iter().map(|s| s.name()).collect();
    report.manifest = vec![
        ("seed".to_owned(), a.seed.to_string()),
        ("cases".to_owned(), a.cases.to_string()),
        ("n".to_owned(), a.n.to_string()),
        ("schemes".to_owned(), scheme_names.join(",")),
        ("k".to_owned(), a.k.to_string()),
        ("rec_relation".to_owned(), a.selection.rec_relation.clone()),
        (
            "anchors".to_owned(),
            format!(
                "{} ({}), sampled uniformly without replacement",
                cfg.anchors.len(),
                anchor_source
            ),
        ),
        ("candidates".to_owned(), cfg.candidates.len().to_string()),
        ("graph_sha256".to_owned(), load::sha256_file(&a.graph)?),
        ("paths_sha256".to_owned(), load::sha256_file(&a.paths)?),
        ("model_sha256".to_owned(), load::sha256_file(&a.model)?),
    ];
    if let Some(p) = &a.objective {
        report
            .manifest
            .push(("objective_sha256".to_owned(), load::sha256_file(p)?));
    }
    if let Some(p) = &a.csv {
        write_file(p, &report.to_csv())?;
    }
    match &a.out {
        Some(p) => write_file(p, &report.to_text()),
        None => emit(out, &report.to_text()),
    }
}

/// Loads everything `serve` needs, without binding a socket.
pub fn service_state(a: &ServeArgs) -> CliResult<ServiceState> {
    let scheme: Scheme = a.scheme.parse()?;
    TrimBound::at_most(a.k)?;
    let graph = load::read_graph(&a.graph)?;
    let path_types = load::read_paths(&a.paths, &graph)?;
    let model = load::read_model(&a.model, &graph)?;
    let objective = load_objective(a.objective.as_ref(), &graph)?;
    let (relation, candidates) = relation_and_candidates(&graph, &a.selection)?;
    let anchors = load::heads_of(&graph, relation);
    let choices = ChoiceLog::open(&a.choice_log).map_err(|e| CliError::Config {
        path: a.choice_log.clone(),
        message: e.to_string(),
    })?;
    Ok(ServiceState {
        graph,
        path_types,
        model,
        objective,
        relation,
        candidates,
        anchors,
        defaults: RequestDefaults {
            n: a.n,
            scheme,
            k: a.k,
        },
        choices: Mutex::new(choices),
        ui_dir: a.ui_dir.clone(),
    })
}

fn serve_cmd(a: ServeArgs) -> CliResult<()> {
    let state = service_state(&a)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Core(e.into()))?;
    runtime
        .block_on(serve::run(state, &a.host, a.port))
        .map_err(|e| CliError::Core(e.into()))
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> CliResult<()> {
    let base = if a.harness {
        PreferenceSpec::harness()
    } else {
        PreferenceSpec::default()
    };
    let spec = PreferenceSpec {
        users: a.users.unwrap_or(base.users),
        items: a.items.unwrap_or(base.items),
        features: a.features.unwrap_or(base.features),
        likes_per_user: a.likes.unwrap_or(base.likes_per_user),
        seed: a.seed.unwrap_or(base.seed),
    };
    let triples = preference_triples(&spec)?;
    fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;
    let mut tsv = String::new();
    for (h, r, t) in &triples {
        tsv.push_str(&format!("{h}\t{r}\t{t}\n"));
    }
    let graph_path = a.out_dir.join("graph.tsv");
    let paths_path = a.out_dir.join("paths.txt");
    write_file(&graph_path, &tsv)?;
    let paths = if a.harness {
        HARNESS_PATHS.to_owned()
    } else {
        format!("{LIKED_FEATURE_PATH}\n")
    };
    write_file(&paths_path, &paths)?;
    emit(
        out,
        &format!(
            "{}\n{}\ntriples\t{}\n",
            graph_path.display(),
            paths_path.display(),
            triples.len()
        ),
    )
}
