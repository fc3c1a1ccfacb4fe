use std::path::Path;

use chrono::{NaiveDate, TimeZone, Utc};
use codecause_core::ingest::{harvest_methods, DateWindow, IngestError};
use git2::{Repository, Signature, Time};

struct Fixture {
    repo: Repository,
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let repo = Repository::init(dir.path()).unwrap();
        repo.remote("origin", "https://example.com/acme/widgets.git").unwrap();
        Fixture { repo, dir }
    }

    fn commit(&self, date: (i32, u32, u32), message: &str, files: &[(&str, &str)]) -> String {
        for (path, text) in files {
            let full = self.dir.path().join(path);
            std::fs::create_dir_all(full.parent().unwrap()).unwrap();
            std::fs::write(full, text).unwrap();
        }
        let mut index = self.repo.index().unwrap();
        for (path, _) in files {
            index.add_path(Path::new(path)).unwrap();
        }
        index.write().unwrap();
        let tree = self.repo.find_tree(index.write_tree().unwrap()).unwrap();
        let day = NaiveDate::from_ymd_opt(date.0, date.1, date.2).unwrap();
        let when = Utc.from_utc_datetime(&day.and_hms_opt(10, 0, 0).unwrap());
        let sig = Signature::new("Dev", "dev@example.com", &Time::new(when.timestamp(), 0)).unwrap();
        let parent = self.repo.head().ok().map(|h| h.peel_to_commit().unwrap());
        let parents: Vec<&git2::Commit> = parent.iter().collect();
        self.repo
            .commit(Some("HEAD"), &sig, &sig, message, &tree, &parents)
            .unwrap()
            .to_string()
    }
}

const F1: &str = "def f1(x):\n    \"\"\"First helper of the module.\"\"\"\n    return x\n";
const G: &str = "def g(a):\n    \"\"\"Double the given value twice over.\"\"\"\n    return a * 2\n";
const G_COMMENTED: &str =
    "def g(a):\n    \"\"\"Double the given value twice over.\"\"\"\n    # scale\n    return a * 2\n";
const H: &str = "def h(b):\n    return b - 1\n";

fn build() -> (Fixture, Vec<String>) {
    let fx = Fixture::new();
    let c1 = fx.commit((2021, 6, 1), "Initial import", &[("pkg/a.py", F1)]);
    let c2 = fx.commit(
        (2022, 3, 1),
        "Add g and h",
        &[
            ("pkg/b.py", &format!("{G}\n\n{H}")),
            ("notes.txt", "def not_python():\n    pass\n"),
            ("pkg/a.py", &format!("{F1}\n\ndef f2():\n    return 2\n")),
        ],
    );
    let c3 = fx.commit((2022, 4, 1), "Comment g", &[("pkg/b.py", &format!("{G_COMMENTED}\n\n{H}"))]);
    let c4 = fx.commit((2023, 2, 1), "Change h", &[("pkg/b.py", &format!("{G_COMMENTED}\n\ndef h(b):\n    return b - 2\n"))]);
    (fx, vec![c1, c2, c3, c4])
}

#[test]
fn mines_new_and_updated_methods_inside_the_window() {
    let (fx, commits) = build();
    let samples = harvest_methods(fx.dir.path(), &DateWindow::default()).unwrap();
    let got: Vec<(&str, &str, &str)> = samples
        .iter()
        .map(|s| (s.commit_id.as_str(), s.path.as_str(), s.fun_name.as_str()))
        .collect();
    assert_eq!(
        got,
        vec![
            (commits[1].as_str(), "pkg/a.py", "f2"),
            (commits[1].as_str(), "pkg/b.py", "g"),
            (commits[1].as_str(), "pkg/b.py", "h"),
            (commits[2].as_str(), "pkg/b.py", "g"),
        ]
    );
    assert!(samples.iter().all(|s| s.repository == "acme/widgets"));
    let commented = &samples[3];
    assert!(commented.code.contains("# scale"));
    assert_eq!(commented.docstring.as_deref(), Some("Double the given value twice over."));
    assert_eq!(samples[1].docstring, commented.docstring);
    assert_eq!(samples[1].commit_message, "Add g and h");
    assert_eq!(samples[1].file_name, "b.py");
}

#[test]
fn window_sound_and_deterministic() {
    let (fx, _) = build();
    let window = DateWindow::default();
    let a = harvest_methods(fx.dir.path(), &window).unwrap();
    let b = harvest_methods(fx.dir.path(), &window).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|s| window.contains(s.committed_at)));

    let wide = DateWindow::new(
        NaiveDate::from_ymd_opt(2021, 1, 1).unwrap(),
        NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
    )
    .unwrap();
    let all = harvest_methods(fx.dir.path(), &wide).unwrap();
    let names: Vec<&str> = all.iter().map(|s| s.fun_name.as_str()).collect();
    assert_eq!(names, ["f1", "f2", "g", "h", "g", "h"]);
}

#[test]
fn unreadable_repository_is_named_in_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let err = harvest_methods(&missing, &DateWindow::default()).unwrap_err();
    assert!(matches!(err, IngestError::Repository { .. }), "{err:?}");
    assert!(err.to_string().contains("nope"), "{err}");
}

#[test]
fn empty_history_yields_nothing() {
    let dir = tempfile::tempdir().unwrap();
    Repository::init(dir.path()).unwrap();
    assert!(harvest_methods(dir.path(), &DateWindow::default()).unwrap().is_empty());
}
