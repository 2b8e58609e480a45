#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use kgreason_cli::app::{service_state, Selection, ServeArgs};
use kgreason_cli::serve::ServiceState;
use kgreason_core::fixtures::{
    COURSES_PATHS, COURSES_TSV, PHONES_OBJECTIVE, PHONES_PATHS, PHONES_TSV,
};
use tempfile::TempDir;

pub fn kgreason(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgreason"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub struct Fixture {
    pub dir: TempDir,
    pub graph: PathBuf,
    pub paths: PathBuf,
    pub model: PathBuf,
    pub objective: PathBuf,
}

impl Fixture {
    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn write_fixture(tsv: &str, paths: &str, objective: &str) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let f = Fixture {
        graph: dir.path().join("graph.tsv"),
        paths: dir.path().join("paths.txt"),
        model: dir.path().join("model.txt"),
        objective: dir.path().join("objective.tsv"),
        dir,
    };
    std::fs::write(&f.graph, tsv).unwrap();
    std::fs::write(&f.paths, paths).unwrap();
    std::fs::write(&f.objective, objective).unwrap();
    let o = kgreason(&[
        "train",
        "--graph",
        s(&f.graph),
        "--model",
        s(&f.model),
        "--epochs",
        "50",
        "--dim",
        "8",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    f
}

pub fn phones() -> Fixture {
    write_fixture(PHONES_TSV, PHONES_PATHS, PHONES_OBJECTIVE)
}

pub fn courses() -> Fixture {
    write_fixture(COURSES_TSV, COURSES_PATHS, "")
}

pub fn phones_serve_args(f: &Fixture) -> ServeArgs {
    ServeArgs {
        graph: f.graph.clone(),
        paths: f.paths.clone(),
        model: f.model.clone(),
        objective: Some(f.objective.clone()),
        scheme: "s1".to_owned(),
        k: 3,
        n: 2,
        host: "127.0.0.1".to_owned(),
        port: 0,
        choice_log: f.file("choices.ndjson"),
        ui_dir: None,
        selection: Selection {
            rec_relation: "bought".to_owned(),
            items: Some("Red Phone,Green Phone".to_owned()),
            candidates: None,
        },
    }
}

pub fn phones_state(f: &Fixture) -> Arc<ServiceState> {
    Arc::new(service_state(&phones_serve_args(f)).unwrap())
}
