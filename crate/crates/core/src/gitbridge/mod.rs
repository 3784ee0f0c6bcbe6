//! Everything that talks to git.
//!
//! All queries go through the `git` executable with a fixed locale and
//! configuration overrides, and their porcelain output is parsed by
//! [`diff`] and [`blame`].

pub mod blame;
pub mod cache;
pub mod diff;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use thiserror::Error;

use crate::ingest::{Category, ChangeLink, ChangeRecord};

pub use blame::{parse_porcelain, BlameOutput};
pub use cache::CloneCache;
pub use diff::{parse_unified_diff, FileDiff, HunkImage, HunkLine, LineKind};

#[derive(Debug, Error)]
pub enum GitError {
    #[error("git {args} failed ({status}): {stderr}")]
    Command {
        args: String,
        status: String,
        stderr: String,
    },
    #[error("cannot run git: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse git output: {0}")]
    Parse(String),
    #[error("change unresolvable: {0}")]
    ChangeUnresolvable(String),
    #[error("no main branch found (tried {})", .tried.join(", "))]
    NoMainBranch { tried: Vec<String> },
    #[error("{path} does not exist at {commit}")]
    FileAbsent { path: String, commit: String },
    #[error("repository lock {0} is held by another process")]
    Locked(String),
}

const CONFIG_OVERRIDES: &[&str] = &[
    "-c",
    "core.quotepath=false",
    "-c",
    "color.ui=false",
    "-c",
    "diff.noprefix=false",
    "-c",
    "diff.mnemonicPrefix=false",
    "-c",
    "blame.coloring=none",
];

fn git_command(dir: &Path, args: &[&str]) -> Command {
    let mut cmd = Command::new("git");
    cmd.current_dir(dir)
        .env("LC_ALL", "C")
        .env("LANG", "C")
        .env("GIT_TERMINAL_PROMPT", "0")
        .env_remove("GIT_DIR")
        .env_remove("GIT_WORK_TREE")
        .args(CONFIG_OVERRIDES)
        .args(args);
    cmd
}

fn output(dir: &Path, args: &[&str]) -> Result<Output, GitError> {
    log::debug!("git {}", args.join(" "));
    Ok(git_command(dir, args).output()?)
}

pub(crate) fn run_git(dir: &Path, args: &[&str]) -> Result<String, GitError> {
    let out = output(dir, args)?;
    if !out.status.success() {
        return Err(GitError::Command {
            args: args.join(" "),
            status: out.status.to_string(),
            stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
        });
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// A local repository (bare or with a work tree).
#[derive(Debug, Clone)]
pub struct Repo {
    dir: PathBuf,
}

/// A ref name together with the commit it pointed to when resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchTip {
    pub name: String,
    pub commit: String,
}

impl Repo {
    pub fn open(dir: impl Into<PathBuf>) -> Self {
        Repo { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn git(&self, args: &[&str]) -> Result<String, GitError> {
        run_git(&self.dir, args)
    }

    /// Run a query whose exit status is the answer (0 = yes, 1 = no).
    fn git_predicate(&self, args: &[&str]) -> Result<bool, GitError> {
        let out = output(&self.dir, args)?;
        match out.status.code() {
            Some(0) => Ok(true),
            Some(1) => Ok(false),
            _ => Err(GitError::Command {
                args: args.join(" "),
                status: out.status.to_string(),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            }),
        }
    }

    /// Full commit id of `rev`, or `None` when it does not name a commit.
    pub fn resolve_commit(&self, rev: &str) -> Result<Option<String>, GitError> {
        let peeled = format!("{rev}^{{commit}}");
        let out = output(&self.dir, &["rev-parse", "--verify", "--quiet", &peeled])?;
        if !out.status.success() {
            return Ok(None);
        }
        let sha = String::from_utf8_lossy(&out.stdout).trim().to_string();
        Ok((!sha.is_empty()).then_some(sha))
    }

    pub fn first_parent(&self, commit: &str) -> Result<Option<String>, GitError> {
        self.resolve_commit(&format!("{commit}^1"))
    }

    pub fn merge_base(&self, a: &str, b: &str) -> Result<Option<String>, GitError> {
        let out = output(&self.dir, &["merge-base", a, b])?;
        if !out.status.success() {
            return Ok(None);
        }
        let sha = String::from_utf8_lossy(&out.stdout).trim().to_string();
        Ok((!sha.is_empty()).then_some(sha))
    }

    /// True when `ancestor` is reachable from (or equal to) `descendant`.
    pub fn is_ancestor(&self, ancestor: &str, descendant: &str) -> Result<bool, GitError> {
        self.git_predicate(&["merge-base", "--is-ancestor", ancestor, descendant])
    }

    pub fn commit_time(&self, commit: &str) -> Result<i64, GitError> {
        let out = self.git(&["log", "-1", "--format=%H %ct", commit])?;
        out.split_whitespace()
            .nth(1)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| GitError::Parse(format!("no commit time in {out:?}")))
    }

    /// Id of the empty tree in this repository's hash format.
    pub fn empty_tree(&self) -> Result<String, GitError> {
        let out = self.git(&["hash-object", "-t", "tree", "/dev/null"])?;
        Ok(out.trim().to_string())
    }

    pub fn file_exists(&self, commit: &str, path: &str) -> Result<bool, GitError> {
        self.git_predicate(&["cat-file", "-e", &format!("{commit}:{path}")])
            .or(Ok(false))
    }

    pub fn file_lines(&self, commit: &str, path: &str) -> Result<Vec<String>, GitError> {
        let out = self.git(&["cat-file", "blob", &format!("{commit}:{path}")])?;
        Ok(out.lines().map(str::to_string).collect())
    }

    /// Commits on the first-parent chain of `tip` that are not reachable
    /// from `exclude`, oldest first.
    pub fn first_parent_chain(&self, exclude: &str, tip: &str) -> Result<Vec<String>, GitError> {
        let range = format!("{exclude}..{tip}");
        let out = self.git(&["rev-list", "--first-parent", "--reverse", &range])?;
        Ok(out.lines().map(str::to_string).collect())
    }

    /// Oldest commit of `chain` (oldest first, first-parent ordered) that
    /// contains `commit`. Containment is monotone along such a chain, so a
    /// binary search suffices.
    pub fn first_descendant_in(
        &self,
        chain: &[String],
        commit: &str,
    ) -> Result<Option<usize>, GitError> {
        let (mut lo, mut hi) = (0, chain.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.is_ancestor(commit, &chain[mid])? {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Ok((lo < chain.len()).then_some(lo))
    }

    /// The branch treated as mainline: the override when given, otherwise
    /// the clone's default head, then `main`, then `master`.
    pub fn main_branch(&self, override_name: Option<&str>) -> Result<BranchTip, GitError> {
        let mut candidates = Vec::new();
        if let Some(name) = override_name {
            candidates.push(name.to_string());
        } else {
            if let Ok(head) = self.git(&["symbolic-ref", "--quiet", "HEAD"]) {
                candidates.push(head.trim().to_string());
            }
            candidates.push("main".into());
            candidates.push("master".into());
        }
        for name in &candidates {
            let qualified = if name.starts_with("refs/") {
                name.clone()
            } else {
                format!("refs/heads/{name}")
            };
            for rev in [&qualified, name] {
                if let Some(commit) = self.resolve_commit(rev)? {
                    let short = qualified.trim_start_matches("refs/heads/").to_string();
                    return Ok(BranchTip { name: short, commit });
                }
            }
        }
        Err(GitError::NoMainBranch { tried: candidates })
    }
}

/// A change pinned to a concrete commit range of the clone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedChange {
    /// Index of the originating record in the dataset.
    pub record_index: usize,
    pub category: Category,
    pub change_id: String,
    /// For issues: the closing change this range came from.
    pub via: Option<String>,
    pub base_commit: String,
    pub head_commit: String,
    /// Merge flag recorded in the dataset, if any.
    pub recorded_merged: Option<bool>,
    pub merged: bool,
}

/// Outcome of resolving one record. Issues may resolve to several changes.
#[derive(Debug, Default)]
pub struct Resolution {
    pub changes: Vec<ResolvedChange>,
    pub failures: Vec<(String, GitError)>,
}

impl Resolution {
    /// True when an issue was closed by more than one change.
    pub fn is_ambiguous(&self) -> bool {
        self.changes.len() + self.failures.len() > 1
    }
}

fn base_of_commit(repo: &Repo, head: &str) -> Result<String, GitError> {
    match repo.first_parent(head)? {
        Some(p) => Ok(p),
        None => repo.empty_tree(),
    }
}

fn resolve_commit_link(repo: &Repo, id: &str) -> Result<(String, String), GitError> {
    let head = repo
        .resolve_commit(id)?
        .ok_or_else(|| GitError::ChangeUnresolvable(format!("unknown commit {id}")))?;
    let base = base_of_commit(repo, &head)?;
    Ok((base, head))
}

/// Base and head for the whole pull request: the head commit against its
/// fork point from the target branch.
fn resolve_pull_link(
    repo: &Repo,
    id: &str,
    head_hint: Option<&str>,
    target: Option<&str>,
    main: &BranchTip,
) -> Result<(String, String), GitError> {
    let head = match head_hint {
        Some(h) => repo.resolve_commit(h)?,
        None => repo.resolve_commit(&format!("refs/pull/{id}/head"))?,
    }
    .ok_or_else(|| GitError::ChangeUnresolvable(format!("no head commit for pull request {id}")))?;

    let target_tip = match target {
        Some(t) => repo
            .resolve_commit(&format!("refs/heads/{t}"))?
            .or(repo.resolve_commit(t)?)
            .ok_or_else(|| GitError::ChangeUnresolvable(format!("unknown target branch {t}")))?,
        None => main.commit.clone(),
    };

    let fork = repo
        .merge_base(&head, &target_tip)?
        .ok_or_else(|| GitError::ChangeUnresolvable(format!("pull request {id} shares no history with its target")))?;
    if fork != head {
        return Ok((fork, head));
    }

    // Already merged: find where the head entered the target's mainline and
    // take the fork point from the mainline parent of that commit.
    let chain = repo.first_parent_chain(&head, &target_tip)?;
    let base = match repo.first_descendant_in(&chain, &head)? {
        Some(i) => {
            let entry = &chain[i];
            match repo.first_parent(entry)? {
                Some(p) if p != head => repo.merge_base(&p, &head)?.unwrap_or(p),
                _ => base_of_commit(repo, &head)?,
            }
        }
        None => base_of_commit(repo, &head)?,
    };
    let base = if base == head {
        base_of_commit(repo, &head)?
    } else {
        base
    };
    Ok((base, head))
}

fn resolve_link(
    repo: &Repo,
    record: &ChangeRecord,
    link: &ChangeLink,
    via: Option<String>,
    main: &BranchTip,
) -> Result<ResolvedChange, GitError> {
    let (base, head) = match link.category {
        Category::Commit => resolve_commit_link(repo, &link.change_id)?,
        Category::PullRequest => resolve_pull_link(
            repo,
            &link.change_id,
            link.head_commit.as_deref(),
            link.target_branch.as_deref(),
            main,
        )?,
        Category::Issue => {
            return Err(GitError::ChangeUnresolvable(
                "issue links must point at commits or pull requests".into(),
            ))
        }
    };
    if base == head {
        return Err(GitError::ChangeUnresolvable(format!(
            "empty range for {}",
            link.change_id
        )));
    }
    let mut rc = ResolvedChange {
        record_index: record.index,
        category: record.category.unwrap_or(link.category),
        change_id: record.change_id.clone(),
        via,
        base_commit: base,
        head_commit: head,
        recorded_merged: link.merged,
        merged: false,
    };
    rc.merged = is_merged(repo, &rc, main)?;
    Ok(rc)
}

/// Pin a dataset record to commit ranges in `repo`.
pub fn resolve_change(repo: &Repo, record: &ChangeRecord, main: &BranchTip) -> Resolution {
    let mut res = Resolution::default();
    let Some(category) = record.category else {
        res.failures.push((
            record.change_id.clone(),
            GitError::ChangeUnresolvable("record has no category".into()),
        ));
        return res;
    };
    let links: Vec<(ChangeLink, Option<String>)> = match category {
        Category::Commit | Category::PullRequest => vec![(
            ChangeLink {
                category,
                change_id: record.change_id.clone(),
                head_commit: record.head_commit.clone(),
                target_branch: record.target_branch.clone(),
                merged: record.merged,
            },
            None,
        )],
        Category::Issue => record
            .closed_by
            .iter()
            .map(|l| (l.clone(), Some(format!("{}:{}", l.category, l.change_id))))
            .collect(),
    };
    if links.is_empty() {
        res.failures.push((
            record.change_id.clone(),
            GitError::ChangeUnresolvable(format!("issue {} has no closing change", record.change_id)),
        ));
    }
    for (link, via) in links {
        let label = via.clone().unwrap_or_else(|| link.change_id.clone());
        match resolve_link(repo, record, &link, via, main) {
            Ok(rc) => res.changes.push(rc),
            Err(e) => res.failures.push((label, e)),
        }
    }
    res
}

/// Whether the change reached the main branch. A merge flag recorded for a
/// pull request is trusted as is.
pub fn is_merged(repo: &Repo, rc: &ResolvedChange, main: &BranchTip) -> Result<bool, GitError> {
    if rc.recorded_merged == Some(true) && (rc.category == Category::PullRequest || rc.via.as_deref().is_some_and(|v| v.starts_with("pull_request:"))) {
        return Ok(true);
    }
    repo.is_ancestor(&rc.head_commit, &main.commit)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HunkExtract {
    pub hunks: Vec<HunkImage>,
    pub binary_files: usize,
}

/// Unified-diff hunks of `base..head` with `context` lines of context.
pub fn extract_hunks(repo: &Repo, rc: &ResolvedChange, context: u32) -> Result<HunkExtract, GitError> {
    let text = repo.git(&[
        "diff",
        "--no-color",
        "--no-ext-diff",
        "--no-renames",
        "--src-prefix=a/",
        "--dst-prefix=b/",
        &format!("-U{context}"),
        &rc.base_commit,
        &rc.head_commit,
        "--",
    ])?;
    let files = parse_unified_diff(&text)?;
    let mut out = HunkExtract::default();
    for f in files {
        if f.binary {
            out.binary_files += 1;
            continue;
        }
        out.hunks.extend(f.hunks);
    }
    Ok(out)
}

/// How a line that existed at some head commit fared on the mainline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineFate {
    pub file_path: String,
    /// Line number at the head commit.
    pub line_no: u32,
    pub content: String,
    pub birth_commit: String,
    pub birth_time: i64,
    /// Last commit in which the line still existed.
    pub last_commit: String,
    /// First mainline commit without the line.
    pub death_commit: Option<String>,
    pub death_time: Option<i64>,
    pub censored: bool,
    /// Committer time of the analysis tip.
    pub horizon_time: i64,
}

/// Result of [`reverse_blame`] for one file.
#[derive(Debug, Default)]
pub struct FileFates {
    pub fates: Vec<LineFate>,
    /// Requested lines the blame did not report.
    pub unresolved: Vec<u32>,
}

fn line_ranges(lines: &BTreeSet<u32>) -> Vec<(u32, u32)> {
    let mut ranges: Vec<(u32, u32)> = Vec::new();
    for &l in lines {
        match ranges.last_mut() {
            Some((_, end)) if *end + 1 == l => *end = l,
            _ => ranges.push((l, l)),
        }
    }
    ranges
}

fn blame(repo: &Repo, extra: &[&str], ranges: &[(u32, u32)], rev: &str, file: &str) -> Result<BlameOutput, GitError> {
    let mut args: Vec<String> = vec!["blame".into(), "--porcelain".into()];
    args.extend(extra.iter().map(|s| s.to_string()));
    for (a, b) in ranges {
        args.push(format!("-L{a},{b}"));
    }
    args.push(rev.to_string());
    args.push("--".into());
    args.push(file.to_string());
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    parse_porcelain(&repo.git(&argv)?)
}

/// Trace each requested line of `file` at `head` forward along the mainline
/// up to `tip`.
///
/// Birth comes from a forward blame at `head`. When `head` sits on a side
/// branch, its lines are first carried over to the mainline commit that
/// brought `head` in, by matching blame origins; lines missing there died in
/// that commit. The last commit holding a line comes from
/// `git blame --reverse --first-parent`; when that is the tip itself the
/// line is censored, otherwise it died in the oldest mainline commit
/// descending from that last commit.
pub fn reverse_blame(
    repo: &Repo,
    head: &str,
    file: &str,
    lines: &BTreeSet<u32>,
    tip: &BranchTip,
) -> Result<FileFates, GitError> {
    let mut out = FileFates::default();
    if lines.is_empty() {
        return Ok(out);
    }
    if !repo.file_exists(head, file)? {
        return Err(GitError::FileAbsent {
            path: file.to_string(),
            commit: head.to_string(),
        });
    }
    let horizon_time = repo.commit_time(&tip.commit)?;

    let forward = blame(repo, &[], &line_ranges(lines), head, file)?;
    let mut births: HashMap<u32, (&str, u32, i64, &str)> = HashMap::new();
    for l in &forward.lines {
        if let Some(t) = forward.commit(&l.commit).and_then(|c| c.committer_time) {
            births.insert(l.final_line, (l.commit.as_str(), l.orig_line, t, l.content.as_str()));
        }
    }

    let chain = if head == tip.commit {
        Vec::new()
    } else {
        repo.first_parent_chain(head, &tip.commit)?
    };
    let on_mainline = head == tip.commit
        || match chain.first() {
            Some(c) => repo.first_parent(c)?.as_deref() == Some(head),
            None => false,
        };

    // the mainline commit the lines are traced from, and each head line's
    // number there (None: dropped on entry)
    let (start, at_start): (String, BTreeMap<u32, Option<u32>>) = if on_mainline {
        (head.to_string(), lines.iter().map(|&l| (l, Some(l))).collect())
    } else {
        let idx = repo.first_descendant_in(&chain, head)?.ok_or_else(|| {
            GitError::ChangeUnresolvable(format!("{head} is not contained in {}", tip.name))
        })?;
        let entry = chain[idx].clone();
        let origin_at_entry: HashMap<(String, u32), u32> = if repo.file_exists(&entry, file)? {
            let b = blame(repo, &[], &[], &entry, file)?;
            b.lines
                .into_iter()
                .map(|l| ((l.commit, l.orig_line), l.final_line))
                .collect()
        } else {
            HashMap::new()
        };
        let map = lines
            .iter()
            .map(|&l| {
                let m = births
                    .get(&l)
                    .and_then(|&(c, o, _, _)| origin_at_entry.get(&(c.to_string(), o)).copied());
                (l, m)
            })
            .collect();
        (entry, map)
    };

    let mut last_seen: BTreeMap<u32, String> = BTreeMap::new();
    let start_lines: BTreeSet<u32> = at_start.values().flatten().copied().collect();
    if start == tip.commit {
        for &l in &start_lines {
            last_seen.insert(l, tip.commit.clone());
        }
    } else if !start_lines.is_empty() {
        let range = format!("{start}..{}", tip.commit);
        let reverse = blame(
            repo,
            &["--reverse", "--first-parent"],
            &line_ranges(&start_lines),
            &range,
            file,
        )?;
        for l in reverse.lines {
            last_seen.insert(l.final_line, l.commit);
        }
    }

    let mut deaths: HashMap<String, Option<(String, i64)>> = HashMap::new();
    for &line_no in lines {
        let Some(&(birth_commit, _, birth_time, content)) = births.get(&line_no) else {
            out.unresolved.push(line_no);
            continue;
        };
        let (last, censored, death) = match at_start[&line_no] {
            None => (
                head.to_string(),
                false,
                Some((start.clone(), repo.commit_time(&start)?)),
            ),
            Some(sl) => {
                let Some(last) = last_seen.get(&sl) else {
                    out.unresolved.push(line_no);
                    continue;
                };
                if *last == tip.commit {
                    (last.clone(), true, None)
                } else {
                    if !deaths.contains_key(last) {
                        let d = match repo.first_descendant_in(&chain, last)? {
                            Some(i) if chain[i] != *last => {
                                Some((chain[i].clone(), repo.commit_time(&chain[i])?))
                            }
                            // the last holder is itself on the chain: its child dropped the line
                            Some(i) if i + 1 < chain.len() => {
                                Some((chain[i + 1].clone(), repo.commit_time(&chain[i + 1])?))
                            }
                            _ => None,
                        };
                        deaths.insert(last.clone(), d);
                    }
                    (last.clone(), false, deaths[last].clone())
                }
            }
        };
        if !censored && death.is_none() {
            out.unresolved.push(line_no);
            continue;
        }
        out.fates.push(LineFate {
            file_path: file.to_string(),
            line_no,
            content: content.to_string(),
            birth_commit: birth_commit.to_string(),
            birth_time,
            last_commit: last,
            death_commit: death.as_ref().map(|d| d.0.clone()),
            death_time: death.map(|d| d.1),
            censored,
            horizon_time,
        });
    }
    Ok(out)
}
