mod common;

use std::collections::BTreeSet;

use chatprov::gitbridge::{
    extract_hunks, is_merged, resolve_change, reverse_blame, CloneCache, GitError, LineKind, Repo,
};
use chatprov::ingest::{parse_dataset, Category, ChangeRecord};
use common::{expected_fates, Fixture, FEATURE_LINES, F1_LINES};

fn records(fx: &Fixture) -> Vec<ChangeRecord> {
    parse_dataset(&fx.dataset().to_string()).unwrap().records
}

fn clone(fx: &Fixture) -> Repo {
    CloneCache::new(fx.tmp.path().join("cache"))
        .ensure(&fx.url(), false)
        .unwrap()
}

#[test]
fn main_branch_detection() {
    let fx = Fixture::build();
    let repo = clone(&fx);
    let main = repo.main_branch(None).unwrap();
    assert_eq!(main.name, "main");
    assert_eq!(main.commit, fx.sha("C5"));
    let wip = repo.main_branch(Some("wip")).unwrap();
    assert_eq!(wip.commit, fx.sha("W"));
    assert!(matches!(
        repo.main_branch(Some("nope")),
        Err(GitError::NoMainBranch { .. })
    ));
}

#[test]
fn cache_reuses_clone_and_fetches_pull_refs() {
    let fx = Fixture::build();
    let cache = CloneCache::new(fx.tmp.path().join("cache"));
    assert!(cache.open(&fx.url()).is_none());
    let repo = cache.ensure(&fx.url(), false).unwrap();
    assert_eq!(
        repo.resolve_commit("refs/pull/1/head").unwrap().as_deref(),
        Some(fx.sha("F1"))
    );
    assert!(cache.open(&fx.url()).is_some());
    // refresh on an existing clone
    cache.ensure(&fx.url(), true).unwrap();
    assert!(cache.entry_dir(&fx.url()).join("meta").exists());
}

#[test]
fn resolves_each_category() {
    let fx = Fixture::build();
    let repo = clone(&fx);
    let main = repo.main_branch(None).unwrap();
    let recs = records(&fx);

    let c2 = resolve_change(&repo, &recs[0], &main);
    assert!(c2.failures.is_empty());
    assert_eq!(c2.changes.len(), 1);
    assert_eq!(c2.changes[0].base_commit, fx.sha("C1"));
    assert_eq!(c2.changes[0].head_commit, fx.sha("C2"));
    assert!(c2.changes[0].merged);

    // already merged pull request: fork point from the merge's mainline parent
    let pr = resolve_change(&repo, &recs[1], &main);
    assert_eq!(pr.changes.len(), 1, "{:?}", pr.failures);
    assert_eq!(pr.changes[0].head_commit, fx.sha("F1"));
    assert_eq!(pr.changes[0].base_commit, fx.sha("C2"));
    assert!(pr.changes[0].merged);

    let issue = resolve_change(&repo, &recs[2], &main);
    assert_eq!(issue.changes.len(), 1);
    assert!(!issue.is_ambiguous());
    assert_eq!(issue.changes[0].category, Category::Issue);
    assert_eq!(issue.changes[0].head_commit, fx.sha("C3"));
    assert_eq!(
        issue.changes[0].via.as_deref(),
        Some(format!("commit:{}", fx.sha("C3")).as_str())
    );

    let wip = resolve_change(&repo, &recs[5], &main);
    assert_eq!(wip.changes.len(), 1);
    assert!(!wip.changes[0].merged);
    assert!(!is_merged(&repo, &wip.changes[0], &main).unwrap());
}

#[test]
fn unknown_commit_is_unresolvable() {
    let fx = Fixture::build();
    let repo = clone(&fx);
    let main = repo.main_branch(None).unwrap();
    let mut rec = records(&fx).remove(0);
    rec.change_id = "0123456789abcdef0123456789abcdef01234567".into();
    let res = resolve_change(&repo, &rec, &main);
    assert!(res.changes.is_empty());
    assert!(matches!(res.failures[0].1, GitError::ChangeUnresolvable(_)));
}

#[test]
fn root_commit_diffs_against_empty_tree() {
    let fx = Fixture::build();
    let repo = clone(&fx);
    let main = repo.main_branch(None).unwrap();
    let mut rec = records(&fx).remove(0);
    rec.change_id = fx.sha("C1").to_string();
    let rc = resolve_change(&repo, &rec, &main).changes.remove(0);
    assert_eq!(rc.base_commit, repo.empty_tree().unwrap());
    let x = extract_hunks(&repo, &rc, 3).unwrap();
    let files: BTreeSet<&str> = x.hunks.iter().map(|h| h.file_path.as_str()).collect();
    assert_eq!(files, BTreeSet::from(["README.md", "src/app.py"]));
}

#[test]
fn hunks_carry_both_images() {
    let fx = Fixture::build();
    let repo = clone(&fx);
    let main = repo.main_branch(None).unwrap();
    let recs = records(&fx);

    let rc = resolve_change(&repo, &recs[0], &main).changes.remove(0);
    let x = extract_hunks(&repo, &rc, 3).unwrap();
    assert_eq!(x.hunks.len(), 1);
    let h = &x.hunks[0];
    assert_eq!(h.file_path, "src/feature.py");
    assert!(h.pre_lines.is_empty());
    let added: Vec<(&str, u32)> = h.added().map(|l| (l.content.as_str(), l.line_no)).collect();
    assert_eq!(added, FEATURE_LINES.iter().copied().zip(1..).collect::<Vec<_>>());

    let rc = resolve_change(&repo, &recs[1], &main).changes.remove(0);
    let x = extract_hunks(&repo, &rc, 3).unwrap();
    assert_eq!(x.hunks.len(), 1);
    let h = &x.hunks[0];
    // post image: three lines of context, then the additions
    let post: Vec<(&str, LineKind, u32)> = h
        .post_lines
        .iter()
        .map(|l| (l.content.as_str(), l.kind, l.line_no))
        .collect();
    assert_eq!(
        post,
        vec![
            ("", LineKind::Context, 3),
            ("def main(argv):", LineKind::Context, 4),
            ("    return 0", LineKind::Context, 5),
            (F1_LINES[0], LineKind::Added, 6),
            (F1_LINES[1], LineKind::Added, 7),
            (F1_LINES[2], LineKind::Added, 8),
        ]
    );
    assert_eq!(h.pre_lines.len(), 3);
    assert!(h.pre_lines.iter().all(|l| l.kind == LineKind::Context));

    // zero context keeps only changed lines
    let x0 = extract_hunks(&repo, &rc, 0).unwrap();
    assert!(x0.hunks[0].post_lines.iter().all(|l| l.kind == LineKind::Added));
}

#[test]
fn hunks_reproduce_the_head_file() {
    // applying the post images over the base file yields the head file
    let fx = Fixture::build();
    let repo = clone(&fx);
    let main = repo.main_branch(None).unwrap();
    let mut rec = records(&fx).remove(0);
    rec.change_id = fx.sha("C5").to_string();
    let rc = resolve_change(&repo, &rec, &main).changes.remove(0);
    let x = extract_hunks(&repo, &rc, 1).unwrap();
    for h in &x.hunks {
        let base = repo.file_lines(&rc.base_commit, &h.file_path).unwrap();
        let head = repo.file_lines(&rc.head_commit, &h.file_path).unwrap();
        let mut rebuilt: Vec<String> = base[..(h.pre_start as usize).saturating_sub(1)].to_vec();
        if h.pre_len == 0 {
            rebuilt = base[..h.pre_start as usize].to_vec();
        }
        rebuilt.extend(h.post_lines.iter().map(|l| l.content.clone()));
        let consumed = if h.pre_len == 0 { h.pre_start } else { h.pre_start - 1 + h.pre_len };
        rebuilt.extend(base[consumed as usize..].iter().cloned());
        assert_eq!(rebuilt, head, "{}", h.file_path);
    }
}

#[test]
fn fates_match_hand_table() {
    let fx = Fixture::build();
    let repo = clone(&fx);
    let main = repo.main_branch(None).unwrap();
    for (file, line, head, birth, death) in expected_fates() {
        let ff = reverse_blame(&repo, fx.sha(head), file, &BTreeSet::from([line]), &main).unwrap();
        assert!(ff.unresolved.is_empty(), "{file}:{line} unresolved");
        let f = &ff.fates[0];
        assert_eq!(f.birth_commit, fx.sha(birth), "{file}:{line}");
        assert_eq!(f.birth_time, fx.time(birth));
        assert_eq!(f.death_commit.as_deref(), death.map(|d| fx.sha(d)), "{file}:{line}");
        assert_eq!(f.death_time, death.map(|d| fx.time(d)));
        assert_eq!(f.censored, death.is_none());
        assert_eq!(f.horizon_time, fx.time("C5"));
    }
}

#[test]
fn reverse_blame_at_tip_censors_everything() {
    let fx = Fixture::build();
    let repo = clone(&fx);
    let main = repo.main_branch(None).unwrap();
    let ff = reverse_blame(&repo, fx.sha("C5"), "src/app.py", &BTreeSet::from([1, 8]), &main).unwrap();
    assert_eq!(ff.fates.len(), 2);
    assert!(ff.fates.iter().all(|f| f.censored && f.death_commit.is_none()));
    assert_eq!(ff.fates[0].birth_commit, fx.sha("C1"));
    assert_eq!(ff.fates[1].birth_commit, fx.sha("C5"));
}

#[test]
fn reverse_blame_errors() {
    let fx = Fixture::build();
    let repo = clone(&fx);
    let main = repo.main_branch(None).unwrap();
    let err = reverse_blame(&repo, fx.sha("C1"), "src/feature.py", &BTreeSet::from([1]), &main).unwrap_err();
    assert!(matches!(err, GitError::FileAbsent { .. }));
    // a head that never reached the mainline
    let err = reverse_blame(&repo, fx.sha("W"), "src/wip.py", &BTreeSet::from([1]), &main).unwrap_err();
    assert!(matches!(err, GitError::ChangeUnresolvable(_)));
}
