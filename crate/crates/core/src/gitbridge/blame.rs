//! Parser for `git blame --porcelain` (and `--line-porcelain`) output.

use std::collections::HashMap;

use super::GitError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlameCommit {
    pub committer_time: Option<i64>,
    pub author_time: Option<i64>,
    pub summary: Option<String>,
    pub boundary: bool,
    /// `previous <sha> <path>`; under `--reverse` this names the child commit.
    pub previous: Option<(String, String)>,
    pub filename: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlameLine {
    pub commit: String,
    /// Line number in `commit`.
    pub orig_line: u32,
    /// Line number in the blamed revision.
    pub final_line: u32,
    pub content: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlameOutput {
    pub lines: Vec<BlameLine>,
    pub commits: HashMap<String, BlameCommit>,
}

impl BlameOutput {
    pub fn commit(&self, sha: &str) -> Option<&BlameCommit> {
        self.commits.get(sha)
    }
}

fn is_object_id(s: &str) -> bool {
    (s.len() == 40 || s.len() == 64) && s.bytes().all(|b| b.is_ascii_hexdigit())
}

pub fn parse_porcelain(text: &str) -> Result<BlameOutput, GitError> {
    let mut out = BlameOutput::default();
    let mut current: Option<(String, u32, u32)> = None;

    for line in text.lines() {
        if let Some(content) = line.strip_prefix('\t') {
            let (commit, orig_line, final_line) = current.take().ok_or_else(|| {
                GitError::Parse("blame content line without a header".to_string())
            })?;
            out.lines.push(BlameLine {
                commit,
                orig_line,
                final_line,
                content: content.to_string(),
            });
            continue;
        }
        if current.is_none() {
            let mut parts = line.split(' ');
            let sha = parts.next().unwrap_or_default();
            if !is_object_id(sha) {
                return Err(GitError::Parse(format!("unexpected blame line: {line:?}")));
            }
            let mut num = || -> Result<u32, GitError> {
                parts
                    .next()
                    .and_then(|p| p.parse().ok())
                    .ok_or_else(|| GitError::Parse(format!("bad blame header: {line:?}")))
            };
            let orig = num()?;
            let fin = num()?;
            out.commits.entry(sha.to_string()).or_default();
            current = Some((sha.to_string(), orig, fin));
            continue;
        }
        let sha = &current.as_ref().expect("checked above").0;
        let info = out.commits.get_mut(sha).expect("inserted with header");
        let (key, value) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "committer-time" => info.committer_time = value.parse().ok(),
            "author-time" => info.author_time = value.parse().ok(),
            "summary" => info.summary = Some(value.to_string()),
            "boundary" => info.boundary = true,
            "filename" => info.filename = Some(value.to_string()),
            "previous" => {
                if let Some((s, p)) = value.split_once(' ') {
                    info.previous = Some((s.to_string(), p.to_string()));
                }
            }
            _ => {}
        }
    }
    if current.is_some() {
        return Err(GitError::Parse("blame output ends inside an entry".into()));
    }
    Ok(out)
}
