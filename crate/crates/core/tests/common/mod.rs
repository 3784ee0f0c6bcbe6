//! Scripted fixture repository and dataset shared by the integration tests.
//!
//! History (first parent on the left):
//!
//! ```text
//! C1 ─ C2 ─────── C3 ─ M ─ C4 ─ C5   (main)
//!        \            /
//!         F1 ────────       (feature, also refs/pull/1/head)
//!                 C3 ─ W    (wip, never merged)
//! ```
//!
//! * C2 creates `src/feature.py` with four lines; C4 deletes its 2nd and 3rd.
//! * F1 appends three lines to `src/app.py`; C5 rewrites the last of them.
//! * C3 adds a second line to `README.md`.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};

pub const T0: i64 = 1_700_000_000;
pub const DAY: i64 = 86_400;

pub const FEATURE_LINES: [&str; 4] = [
    "def parse_header(line):",
    "    key, _, value = line.partition(\":\")",
    "    return key.strip().lower(), value.strip()",
    "HEADER_LIMIT = 64",
];

pub const APP_BASE: &str = "import sys\n\n\ndef main(argv):\n    return 0\n";
pub const F1_LINES: [&str; 3] = [
    "def load(path):",
    "    with open(path) as fh:",
    "        return fh.read().splitlines()",
];

pub struct Fixture {
    pub tmp: tempfile::TempDir,
    pub repo: PathBuf,
    pub commits: HashMap<&'static str, String>,
    pub times: HashMap<&'static str, i64>,
}

pub fn git(dir: &Path, args: &[&str], time: Option<i64>) -> String {
    let mut cmd = Command::new("git");
    cmd.current_dir(dir)
        .args(args)
        .env("LC_ALL", "C")
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .env("HOME", dir)
        .env("GIT_AUTHOR_NAME", "Fixture")
        .env("GIT_AUTHOR_EMAIL", "fixture@example.com")
        .env("GIT_COMMITTER_NAME", "Fixture")
        .env("GIT_COMMITTER_EMAIL", "fixture@example.com");
    if let Some(t) = time {
        let d = format!("{t} +0000");
        cmd.env("GIT_AUTHOR_DATE", &d).env("GIT_COMMITTER_DATE", &d);
    }
    let out = cmd.output().expect("git runs");
    assert!(
        out.status.success(),
        "git {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap().trim().to_string()
}

impl Fixture {
    fn write(&self, rel: &str, content: &str) {
        let p = self.repo.join(rel);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(p, content).unwrap();
    }

    fn commit(&mut self, name: &'static str, t: i64) {
        git(&self.repo, &["add", "-A"], None);
        git(&self.repo, &["commit", "-q", "-m", name], Some(t));
        self.record(name, t);
    }

    fn record(&mut self, name: &'static str, t: i64) {
        let sha = git(&self.repo, &["rev-parse", "HEAD"], None);
        self.commits.insert(name, sha);
        self.times.insert(name, t);
    }

    pub fn sha(&self, name: &str) -> &str {
        &self.commits[name]
    }

    pub fn time(&self, name: &str) -> i64 {
        self.times[name]
    }

    pub fn url(&self) -> String {
        self.repo.to_string_lossy().into_owned()
    }

    pub fn build() -> Fixture {
        let tmp = tempfile::tempdir().unwrap();
        let repo = tmp.path().join("origin");
        std::fs::create_dir_all(&repo).unwrap();
        let mut fx = Fixture {
            tmp,
            repo,
            commits: HashMap::new(),
            times: HashMap::new(),
        };
        let r = fx.repo.clone();
        git(&r, &["init", "-q", "-b", "main", "."], None);

        fx.write("README.md", "# demo\n");
        fx.write("src/app.py", APP_BASE);
        fx.commit("C1", T0);

        fx.write("src/feature.py", &(FEATURE_LINES.join("\n") + "\n"));
        fx.commit("C2", T0 + DAY + 17);

        git(&r, &["checkout", "-q", "-b", "feature"], None);
        fx.write("src/app.py", &format!("{APP_BASE}{}\n", F1_LINES.join("\n")));
        fx.commit("F1", T0 + 2 * DAY + 5);

        git(&r, &["checkout", "-q", "main"], None);
        fx.write("README.md", "# demo\nUsage: app FILE\n");
        fx.commit("C3", T0 + 3 * DAY);

        git(&r, &["checkout", "-q", "-b", "wip"], None);
        fx.write("src/wip.py", "UNFINISHED = True\n");
        fx.commit("W", T0 + 3 * DAY + 100);
        git(&r, &["checkout", "-q", "main"], None);

        let tm = T0 + 4 * DAY + 60;
        git(&r, &["merge", "-q", "--no-ff", "feature", "-m", "M"], Some(tm));
        fx.record("M", tm);

        fx.write(
            "src/feature.py",
            &format!("{}\n{}\n", FEATURE_LINES[0], FEATURE_LINES[3]),
        );
        fx.commit("C4", T0 + 5 * DAY + 3601);

        fx.write(
            "src/app.py",
            &format!(
                "{APP_BASE}{}\n{}\n        return [l.rstrip() for l in fh]\n",
                F1_LINES[0], F1_LINES[1]
            ),
        );
        fx.commit("C5", T0 + 6 * DAY + 7);

        let f1 = fx.sha("F1").to_string();
        git(&r, &["update-ref", "refs/pull/1/head", &f1], None);
        fx
    }

    /// Dataset entries referring to the fixture, in a fixed order:
    /// commit C2, pull request 1, issue 7 (closed by C3), an expired commit
    /// link, a malformed entry and the unmerged commit W.
    pub fn dataset(&self) -> Value {
        let url = self.url();
        let listing = FEATURE_LINES.join("\n");
        json!({
            "schema_version": "1",
            "entries": [
                {
                    "category": "commit",
                    "repo_url": url,
                    "change_id": self.sha("C2"),
                    "conversations": [{
                        "conversation_id": "conv-c2",
                        "turns": [{
                            "prompt": "How do I split an HTTP header line into key and value?",
                            "answer": "Partition on the first colon and normalize both parts:",
                            "listings": [{"language": "python", "content": listing}]
                        }]
                    }]
                },
                {
                    "category": "pull_request",
                    "repo_url": url,
                    "change_id": "1",
                    "target_branch": "main",
                    "merged": true,
                    "conversations": [{
                        "conversation_id": "conv-pr1",
                        "turns": [{
                            "prompt": "Write a function that reads a file.",
                            "answer": "Here is a loader:",
                            "listings": [{"language": "python", "content": "def load(path):\n    pass"}]
                        }]
                    }]
                },
                {
                    "category": "issue",
                    "repo_url": url,
                    "change_id": "7",
                    "closed_by": [{"category": "commit", "change_id": self.sha("C3")}],
                    "conversations": [{
                        "conversation_id": "conv-i7",
                        "turns": [{
                            "prompt": "What is a good name for a chess engine?",
                            "answer": "Consider something short and memorable.",
                            "listings": []
                        }]
                    }]
                },
                {
                    "category": "commit",
                    "repo_url": url,
                    "change_id": self.sha("C4"),
                    "conversations": null
                },
                {
                    "category": "wiki",
                    "repo_url": url,
                    "change_id": "x",
                    "conversations": []
                },
                {
                    "category": "commit",
                    "repo_url": url,
                    "change_id": self.sha("W"),
                    "conversations": [{
                        "conversation_id": "conv-w",
                        "turns": [{"prompt": "flag?", "answer": "UNFINISHED = True", "listings": []}]
                    }]
                }
            ]
        })
    }

    pub fn write_dataset(&self) -> PathBuf {
        let p = self.tmp.path().join("dataset.json");
        std::fs::write(&p, serde_json::to_string_pretty(&self.dataset()).unwrap()).unwrap();
        p
    }

    pub fn config(&self, out: &str) -> chatprov::pipeline::PipelineConfig {
        let mut cfg = chatprov::pipeline::PipelineConfig::new(
            self.write_dataset(),
            self.tmp.path().join("cache"),
            self.tmp.path().join(out),
        );
        cfg.parallelism = 2;
        cfg
    }
}

/// Hand-built fate table: (file, line at head, head commit, birth commit,
/// death commit or None when censored).
pub fn expected_fates() -> Vec<(&'static str, u32, &'static str, &'static str, Option<&'static str>)> {
    vec![
        ("src/feature.py", 1, "C2", "C2", None),
        ("src/feature.py", 2, "C2", "C2", Some("C4")),
        ("src/feature.py", 3, "C2", "C2", Some("C4")),
        ("src/feature.py", 4, "C2", "C2", None),
        ("src/app.py", 6, "F1", "F1", None),
        ("src/app.py", 7, "F1", "F1", None),
        ("src/app.py", 8, "F1", "F1", Some("C5")),
        ("README.md", 2, "C3", "C3", None),
    ]
}
